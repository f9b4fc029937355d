"""
Parameter calibration: coarse grid pass, then coordinate descent.

The descent tries a +step and a -step along each free dimension around the
current best point and halves the step of a dimension when neither helps.
Grid evaluations run concurrently in worker threads; the trace is always
kept in evaluation-index order.
"""
import asyncio
import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional

import numpy as np
import pandas as pd

import config
from analysis.metrics import DisplacementCurve, mismatch_score
from calibration.experiment import averaged_insertion
from calibration.params import PARAM_NAMES, ParamSpace, StructureParamTable
from config import get_settings
from exceptions import CalibrationError, ConfigError, SimulationInstabilityError
from simulation.shape_match import ClusterParams

logger = logging.getLogger(__name__)

# Descent stops once every step is below this fraction of its range
MIN_STEP_FRACTION = 1e-4


@dataclass
class ObjectiveValue:
    score: float
    rmse: float = float("nan")
    stable: bool = True
    message: str = ""


@dataclass
class Evaluation:
    """One row of the calibration trace."""
    index: int
    phase: str
    params: ClusterParams
    score: float
    rmse: float
    stable: bool
    message: str = ""

    def to_dict(self) -> Dict:
        return {
            "index": self.index,
            "phase": self.phase,
            **self.params.to_dict(),
            "score": self.score,
            "rmse": self.rmse,
            "stable": self.stable,
            "message": self.message,
        }


@dataclass
class CalibrationResult:
    best: ClusterParams
    score: float
    trace: List[Evaluation] = field(default_factory=list)

    def trace_dataframe(self) -> pd.DataFrame:
        return pd.DataFrame([e.to_dict() for e in self.trace])


Objective = Callable[[ClusterParams], ObjectiveValue]


class ScenarioObjective:
    """Mismatch between a scenario's simulated slab curve and a reference curve."""

    def __init__(self, setup, reference: DisplacementCurve, structure: Optional[str] = None,
                 repeats: Optional[int] = None):
        self.setup = setup
        self.reference = reference
        self.structure = structure or setup.scenario.calibration_structure
        self.rig = setup.rig()
        self.sim_config = setup.sim_config()
        self.protocol = setup.protocol(repeats)
        self.margin = setup.scenario.rig.margin
        self.friction = setup.scenario.rig.friction

    def table_for(self, params: ClusterParams) -> StructureParamTable:
        base = self.setup.table.get(self.structure).cluster
        params = ClusterParams(**params.to_dict(), region_norm=base.region_norm)
        return self.setup.table.with_params(self.structure, params)

    def __call__(self, params: ClusterParams) -> ObjectiveValue:
        table = self.table_for(params)
        record = averaged_insertion(
            lambda k: self.setup.scene(k, table=table),
            self.rig,
            self.protocol,
            self.sim_config,
            self.margin,
            self.friction,
            params=params.to_dict(),
        )
        result = mismatch_score(record.curve(), self.reference)
        return ObjectiveValue(score=result.mse_pct, rmse=result.rmse)


def _safe_evaluate(objective: Objective, params: ClusterParams) -> ObjectiveValue:
    try:
        return objective(params)
    except SimulationInstabilityError as e:
        logger.warning(f"Unstable evaluation at {params.to_dict()}: {e}")
        return ObjectiveValue(score=float("inf"), stable=False, message=str(e))


async def _evaluate_batch(objective: Objective, points: List[ClusterParams], threads: int) -> List[ObjectiveValue]:
    """Evaluate points concurrently; results come back in input order."""
    semaphore = asyncio.Semaphore(max(1, threads))

    async def evaluate(p: ClusterParams) -> ObjectiveValue:
        async with semaphore:
            return await asyncio.to_thread(_safe_evaluate, objective, p)

    return await asyncio.gather(*(evaluate(p) for p in points))


def _subsample(points: List[ClusterParams], budget: int) -> List[ClusterParams]:
    if len(points) <= budget:
        return points
    idx = np.unique(np.round(np.linspace(0, len(points) - 1, budget)).astype(int))
    return [points[i] for i in idx]


class Calibrator:
    """Budget-bounded grid + coordinate-descent search."""

    def __init__(self, space: ParamSpace, objective: Objective, budget: int,
                 grid_resolution: int = config.DEFAULT_GRID_RESOLUTION, threads: Optional[int] = None):
        if budget < 1:
            raise ConfigError(f"budget must be >= 1, got {budget}")
        self.space = space
        self.objective = objective
        self.budget = budget
        self.grid_resolution = grid_resolution
        self.threads = threads or get_settings().threads

        # State
        self.trace: List[Evaluation] = []
        self.cache: Dict[tuple, Evaluation] = {}
        self.best: Optional[Evaluation] = None

    def _record(self, phase: str, params: ClusterParams, value: ObjectiveValue) -> Evaluation:
        ev = Evaluation(len(self.trace), phase, params, value.score, value.rmse, value.stable, value.message)
        self.trace.append(ev)
        self.cache[params.key()] = ev
        if ev.stable and (self.best is None or not self.best.stable or ev.score < self.best.score):
            self.best = ev
            logger.info(f"[{phase} #{ev.index}] best so far {ev.score:.4f}% at {params.to_dict()}")
        elif self.best is None:
            self.best = ev
        return ev

    def _grid_pass(self):
        points = _subsample(self.space.grid(self.grid_resolution), self.budget)
        logger.info(f"Grid pass: {len(points)} point(s), {self.threads} worker(s)")
        values = asyncio.run(_evaluate_batch(self.objective, points, self.threads))
        for p, v in zip(points, values):
            self._record("grid", p, v)

    def _evaluate(self, params: ClusterParams) -> Optional[Evaluation]:
        """Cached evaluation; None when the budget is spent."""
        hit = self.cache.get(params.key())
        if hit is not None:
            return hit
        if len(self.trace) >= self.budget:
            return None
        return self._record("descent", params, _safe_evaluate(self.objective, params))

    def _descent(self):
        dims = self.space.free_dimensions
        if not dims:
            return
        res = max(self.grid_resolution - 1, 1)
        step = {n: (self.space.bounds(n)[1] - self.space.bounds(n)[0]) / (2.0 * res) for n in dims}
        min_step = {n: (self.space.bounds(n)[1] - self.space.bounds(n)[0]) * MIN_STEP_FRACTION for n in dims}

        while len(self.trace) < self.budget:
            active = [n for n in dims if step[n] >= min_step[n]]
            if not active:
                break
            for n in active:
                center = self.best.params
                improved = False
                for sign in (1.0, -1.0):
                    values = center.to_dict()
                    values[n] += sign * step[n]
                    cand = self.space.clamp(values)
                    if cand.key() == center.key():
                        continue
                    ev = self._evaluate(cand)
                    if ev is None:
                        return
                    if ev is self.best:
                        improved = True
                        break
                if not improved:
                    step[n] *= 0.5

    def run(self) -> CalibrationResult:
        self._grid_pass()
        if len(self.trace) < self.budget:
            self._descent()

        stable = [e for e in self.trace if e.stable]
        if not stable:
            lo = {n: min(getattr(e.params, n) for e in self.trace) for n in PARAM_NAMES}
            hi = {n: max(getattr(e.params, n) for e in self.trace) for n in PARAM_NAMES}
            region = ", ".join(f"{n} in [{lo[n]:g}, {hi[n]:g}]" for n in PARAM_NAMES)
            raise CalibrationError(f"all {len(self.trace)} evaluations were unstable: {region}")

        logger.info(f"Calibration done: {len(self.trace)} evaluations, best {self.best.score:.4f}%")
        return CalibrationResult(best=self.best.params, score=self.best.score, trace=self.trace)


def calibrate(
    space: ParamSpace,
    objective: Objective,
    budget: int,
    grid_resolution: int = config.DEFAULT_GRID_RESOLUTION,
    threads: Optional[int] = None,
) -> CalibrationResult:
    """
    Search `space` for the parameters minimizing `objective`.

    Args:
        space: parameter box
        objective: params -> ObjectiveValue (e.g. a ScenarioObjective against a reference curve)
        budget: maximum number of objective evaluations (>= 1)
        grid_resolution: points per free dimension in the grid pass
        threads: concurrent grid evaluations, defaults to SIM_THREADS

    Returns:
        CalibrationResult with the best parameters, their score and the trace

    Raises:
        CalibrationError: every evaluation was unstable
    """
    return Calibrator(space, objective, budget, grid_resolution, threads).run()
