"""
PBD soft-tissue simulation: solver, shape matching, links, catheter contact
"""
from .engine import ParticleSystem, SimConfig, StepReport, PBDSolver, step
from .constraints import ConstraintSet, DistanceLink, LinkBatch, apply_stiffness_iteration_correction
from .shape_match import ClusterParams, ShapeCluster, ClusterBatch, build_clusters, polar_rotation
from .catheter import CatheterRig, CapsulePose, CatheterContact, pose_at, project_collisions
from .scene import Scene, SoftBody, build_scene

__all__ = [
    'ParticleSystem', 'SimConfig', 'StepReport', 'PBDSolver', 'step',
    'ConstraintSet', 'DistanceLink', 'LinkBatch', 'apply_stiffness_iteration_correction',
    'ClusterParams', 'ShapeCluster', 'ClusterBatch', 'build_clusters', 'polar_rotation',
    'CatheterRig', 'CapsulePose', 'CatheterContact', 'pose_at', 'project_collisions',
    'Scene', 'SoftBody', 'build_scene',
]
