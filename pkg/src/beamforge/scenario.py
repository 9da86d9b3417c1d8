"""Domain model: terminals, scenarios, beam plans, and feasibility checking."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import project_equirectangular

UNBOUNDED = math.inf

# Relative slack on the coverage radius test. Optimal disks place users
# exactly on the boundary, where the last-ulp rounding of a distance must not
# flip feasibility.
GEOM_EPS = 1e-9


@dataclass(frozen=True)
class Terminal:
    """A ground user: planar position in km and downlink demand in Mbps."""

    id: str
    position: tuple[float, float]
    demand: float

    def __post_init__(self):
        if not (self.demand > 0):
            raise ValueError(f"terminal {self.id!r}: demand must be positive, got {self.demand}")
        if not all(math.isfinite(c) for c in self.position):
            raise ValueError(f"terminal {self.id!r}: position must be finite")


@dataclass
class Scenario:
    """A terminal set plus the system parameters of one placement problem.

    Value object: treat as immutable after construction. `weights` is the
    per-terminal probability used by the annealing objective; defaults to
    uniform 1/U, or demand-proportional when `demand_weighted=True`.
    """

    terminals: list[Terminal]
    r_max: float
    c_max: float = UNBOUNDED
    b_max: int = 32
    weights: np.ndarray | None = None
    demand_weighted: bool = False
    origin: tuple[float, float] | None = None  # (lat0, lon0) when projected from geodetic

    def __post_init__(self):
        if not self.terminals:
            raise ValueError("scenario needs at least one terminal")
        ids = [t.id for t in self.terminals]
        if len(set(ids)) != len(ids):
            raise ValueError("terminal ids must be unique")
        if not (self.r_max > 0):
            raise ValueError("r_max must be positive")
        if not (self.c_max > 0):
            raise ValueError("c_max must be positive (or math.inf for unbounded)")
        if self.b_max < 1:
            raise ValueError("b_max must be a positive integer")
        if self.weights is None:
            if self.demand_weighted:
                w = self.demands / self.demands.sum()
            else:
                w = np.full(len(self.terminals), 1.0 / len(self.terminals))
            self.weights = w
        else:
            self.weights = np.asarray(self.weights, dtype=float)
            if self.weights.shape != (len(self.terminals),) or np.any(self.weights < 0):
                raise ValueError("weights must be a nonnegative vector of length U")
            if abs(self.weights.sum() - 1.0) > 1e-12:
                raise ValueError("weights must sum to 1")

    @property
    def positions(self) -> np.ndarray:
        return np.array([t.position for t in self.terminals], dtype=float)

    @property
    def demands(self) -> np.ndarray:
        return np.array([t.demand for t in self.terminals], dtype=float)

    @property
    def ids(self) -> list[str]:
        return [t.id for t in self.terminals]

    @property
    def size(self) -> int:
        return len(self.terminals)


@dataclass
class BeamPlan:
    """A hard solution: beam centers and a one-beam-per-terminal assignment."""

    centers: np.ndarray                 # (M, 2) km
    assignment: dict[str, int]          # terminal id -> beam index
    per_beam_load: np.ndarray = field(default=None)   # Mbps, length M
    per_beam_count: np.ndarray = field(default=None)  # users, length M

    @property
    def num_beams(self) -> int:
        return len(self.centers)

    @classmethod
    def from_labels(cls, scenario: Scenario, centers: np.ndarray, labels: np.ndarray) -> "BeamPlan":
        centers = np.asarray(centers, dtype=float).reshape(-1, 2)
        labels = np.asarray(labels, dtype=int)
        m = len(centers)
        loads = np.bincount(labels, weights=scenario.demands, minlength=m).astype(float)
        counts = np.bincount(labels, minlength=m)
        assignment = {t.id: int(b) for t, b in zip(scenario.terminals, labels)}
        return cls(centers=centers, assignment=assignment,
                   per_beam_load=loads, per_beam_count=counts)

    def labels_for(self, scenario: Scenario) -> np.ndarray:
        return np.array([self.assignment[t.id] for t in scenario.terminals], dtype=int)


@dataclass(frozen=True)
class FeasibilityReport:
    coverage_ok: bool
    capacity_ok: bool
    max_radius_used: float
    max_load: float
    fractional_loads: np.ndarray
    uncovered: int

    @property
    def feasible(self) -> bool:
        return self.coverage_ok and self.capacity_ok


def project_geodetic(records, ids=None):
    """Project (lat deg, lon deg, demand Mbps) records about their centroid.

    Returns (terminals, (lat0, lon0)). Equirectangular about the centroid, so
    Euclidean distances in the result approximate great-circle distances for
    regional extents.
    """
    records = list(records)
    if not records:
        raise ValueError("no records to project")
    lats = np.array([r[0] for r in records], dtype=float)
    lons = np.array([r[1] for r in records], dtype=float)
    if np.any(lats < -90) or np.any(lats > 90):
        raise ValueError("latitude out of range [-90, 90]")
    if np.any(lons < -180) or np.any(lons > 180):
        raise ValueError("longitude out of range [-180, 180]")
    lat0 = float(lats.mean())
    lon0 = float(lons.mean())
    xy = project_equirectangular(lats, lons, lat0, lon0)
    if ids is None:
        ids = [f"t{i:04d}" for i in range(len(records))]
    terminals = [
        Terminal(id=str(i), position=(float(x), float(y)), demand=float(r[2]))
        for i, (x, y), r in zip(ids, xy, records)
    ]
    return terminals, (lat0, lon0)


def check_feasibility(scenario: Scenario, plan: BeamPlan) -> FeasibilityReport:
    """Check a hard plan against the exact coverage and capacity constraints."""
    ids = set(scenario.ids)
    plan_ids = set(plan.assignment)
    if plan_ids != ids:
        missing = ids - plan_ids
        extra = plan_ids - ids
        raise ValueError(f"assignment mismatch: missing={sorted(missing)[:5]} extra={sorted(extra)[:5]}")
    labels = plan.labels_for(scenario)
    m = plan.num_beams
    if np.any(labels < 0) or np.any(labels >= m):
        raise ValueError("assignment references out-of-range beam index")

    pos = scenario.positions
    dists = np.linalg.norm(pos - plan.centers[labels], axis=1)
    max_radius = float(dists.max())
    r_limit = scenario.r_max * (1.0 + GEOM_EPS)
    coverage_ok = bool(max_radius <= r_limit)

    loads = np.bincount(labels, weights=scenario.demands, minlength=m).astype(float)
    max_load = float(loads.max())
    capacity_ok = bool(max_load <= scenario.c_max * (1.0 + GEOM_EPS)
                       if math.isfinite(scenario.c_max) else True)

    total = scenario.demands.sum()
    return FeasibilityReport(
        coverage_ok=coverage_ok,
        capacity_ok=capacity_ok,
        max_radius_used=max_radius,
        max_load=max_load,
        fractional_loads=loads / total,
        uncovered=int(np.sum(dists > r_limit)),
    )
