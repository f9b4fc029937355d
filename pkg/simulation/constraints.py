"""
Distance links and the per-scene constraint container.
"""
import logging
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, List, Optional

import numpy as np

from exceptions import ConfigError

if TYPE_CHECKING:
    from simulation.catheter import CatheterContact
    from simulation.shape_match import ClusterBatch

logger = logging.getLogger(__name__)


def apply_stiffness_iteration_correction(stiffness: float, iterations: int) -> float:
    """
    Per-iteration stiffness so that n iterations compound to the nominal value.

    k' = 1 - (1 - k)^(1/n)
    """
    if not (0.0 <= stiffness <= 1.0):
        raise ValueError(f"stiffness must be within [0, 1], got {stiffness}")
    if iterations < 1:
        raise ValueError(f"iterations must be >= 1, got {iterations}")
    if stiffness >= 1.0:
        return 1.0
    return 1.0 - (1.0 - stiffness) ** (1.0 / iterations)


def corrected_stiffness(stiffness: np.ndarray, iterations: int) -> np.ndarray:
    """Vectorized apply_stiffness_iteration_correction."""
    k = np.clip(np.asarray(stiffness, dtype=float), 0.0, 1.0)
    if iterations <= 1:
        return k
    return 1.0 - (1.0 - k) ** (1.0 / iterations)


@dataclass
class DistanceLink:
    i: int
    j: int
    rest_length: float
    stiffness: float

    def __post_init__(self):
        if self.i == self.j:
            raise ConfigError(f"link endpoints must differ, got ({self.i}, {self.j})")
        if self.rest_length <= 0:
            raise ConfigError(f"link rest length must be > 0, got {self.rest_length}")
        if not (0.0 <= self.stiffness <= 1.0):
            raise ConfigError(f"link stiffness must be within [0, 1], got {self.stiffness}")


class LinkBatch:
    """
    All distance links of a scene as parallel arrays.

    Projection gathers every link correction first and then applies, per
    particle, the mean over its incident links.
    """

    def __init__(self, i: np.ndarray, j: np.ndarray, rest_length: np.ndarray, stiffness: np.ndarray):
        self.i = np.asarray(i, dtype=np.int64)
        self.j = np.asarray(j, dtype=np.int64)
        self.rest_length = np.asarray(rest_length, dtype=float)
        self.stiffness = np.asarray(stiffness, dtype=float)
        if not (len(self.i) == len(self.j) == len(self.rest_length) == len(self.stiffness)):
            raise ConfigError("link arrays differ in length")
        if np.any(self.i == self.j):
            raise ConfigError("link endpoints must differ")
        if np.any(self.rest_length <= 0):
            raise ConfigError("link rest lengths must be > 0")
        self._degree = None

    @classmethod
    def empty(cls) -> "LinkBatch":
        return cls(np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64), np.zeros(0), np.zeros(0))

    @classmethod
    def from_links(cls, links: List[DistanceLink]) -> "LinkBatch":
        if not links:
            return cls.empty()
        return cls(
            [l.i for l in links], [l.j for l in links],
            [l.rest_length for l in links], [l.stiffness for l in links],
        )

    @classmethod
    def concatenate(cls, batches: List["LinkBatch"]) -> "LinkBatch":
        batches = [b for b in batches if len(b)]
        if not batches:
            return cls.empty()
        return cls(
            np.concatenate([b.i for b in batches]),
            np.concatenate([b.j for b in batches]),
            np.concatenate([b.rest_length for b in batches]),
            np.concatenate([b.stiffness for b in batches]),
        )

    def to_links(self) -> List[DistanceLink]:
        return [
            DistanceLink(int(a), int(b), float(r), float(k))
            for a, b, r, k in zip(self.i, self.j, self.rest_length, self.stiffness)
        ]

    def __len__(self) -> int:
        return len(self.i)

    def degree(self, count: int) -> np.ndarray:
        if self._degree is None or len(self._degree) != count:
            self._degree = np.bincount(self.i, minlength=count) + np.bincount(self.j, minlength=count)
        return self._degree

    def violations(self, predicted: np.ndarray) -> np.ndarray:
        """Signed length error |p_j - p_i| - rest per link."""
        if len(self) == 0:
            return np.zeros(0)
        return np.linalg.norm(predicted[self.j] - predicted[self.i], axis=1) - self.rest_length

    def residual(self, predicted: np.ndarray) -> float:
        """L2 norm of all link violations."""
        return float(np.linalg.norm(self.violations(predicted)))

    def project(self, predicted: np.ndarray, inv_mass: np.ndarray, iterations: int = 1) -> np.ndarray:
        """One averaged pass over every link, applied in place; returns the displacement."""
        count = len(predicted)
        if len(self) == 0:
            return np.zeros((count, 3))

        d = predicted[self.j] - predicted[self.i]
        length = np.linalg.norm(d, axis=1)
        wi = inv_mass[self.i]
        wj = inv_mass[self.j]
        w = wi + wj
        valid = (w > 0) & (length > 1e-15)

        k = corrected_stiffness(self.stiffness, iterations)
        s = np.zeros(len(self))
        s[valid] = k[valid] * (length[valid] - self.rest_length[valid]) / w[valid]
        n = np.zeros_like(d)
        n[valid] = d[valid] / length[valid, None]

        delta = np.zeros((count, 3))
        for a in range(3):
            step = s * n[:, a]
            delta[:, a] = (
                np.bincount(self.i, weights=wi * step, minlength=count)
                - np.bincount(self.j, weights=wj * step, minlength=count)
            )
        deg = self.degree(count)
        linked = deg > 0
        delta[linked] /= deg[linked, None]
        predicted += delta
        return delta


@dataclass
class ConstraintSet:
    """Constraint groups projected, in order, within every solver iteration."""
    clusters: Optional["ClusterBatch"] = None
    links: Optional[LinkBatch] = None
    contacts: List["CatheterContact"] = field(default_factory=list)

    def validate(self, count: int) -> None:
        if self.clusters is not None and len(self.clusters) and self.clusters.members.max() >= count:
            raise ConfigError("cluster member index exceeds particle count")
        if self.links is not None and len(self.links):
            if max(self.links.i.max(), self.links.j.max()) >= count:
                raise ConfigError("link endpoint exceeds particle count")

    def with_contact(self, contact: "CatheterContact") -> "ConstraintSet":
        return ConstraintSet(clusters=self.clusters, links=self.links, contacts=self.contacts + [contact])

    @property
    def num_clusters(self) -> int:
        return 0 if self.clusters is None else len(self.clusters)

    @property
    def num_links(self) -> int:
        return 0 if self.links is None else len(self.links)
