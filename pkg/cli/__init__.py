"""
Command-line front end
"""
from cli.commands import cmd_run, cmd_calibrate, cmd_validate

__all__ = ['cmd_run', 'cmd_calibrate', 'cmd_validate']
