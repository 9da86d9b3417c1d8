"""Synthetic instance generation (stands in for sampled vessel locations)."""
from __future__ import annotations

import math

import numpy as np

from .scenario import Scenario, Terminal

# System defaults: 45 km max footprint radius, 700 Mbps per beam, 32 beams.
DEFAULT_R_MAX_KM = 45.0
DEFAULT_C_MAX_MBPS = 700.0
DEFAULT_B_MAX = 32
DEFAULT_DEMAND_RANGE = (5.0, 10.0)


def generate(u: int, extent_km: float, demand_range=DEFAULT_DEMAND_RANGE, seed: int = 0,
             r_max: float = DEFAULT_R_MAX_KM, c_max: float = DEFAULT_C_MAX_MBPS,
             b_max: int = DEFAULT_B_MAX) -> Scenario:
    """Uniform points in [0, extent]^2 with uniform demands; deterministic per seed."""
    if u < 1:
        raise ValueError("u must be >= 1")
    if extent_km <= 0:
        raise ValueError("extent must be positive")
    lo, hi = demand_range
    if not (0 < lo <= hi):
        raise ValueError("demand range must satisfy 0 < min <= max")
    rng = np.random.default_rng(seed)
    xy = rng.uniform(0.0, extent_km, size=(u, 2))
    demands = rng.uniform(lo, hi, size=u)
    terminals = [
        Terminal(id=f"t{i:04d}", position=(float(x), float(y)), demand=float(f))
        for i, ((x, y), f) in enumerate(zip(xy, demands))
    ]
    return Scenario(terminals=terminals, r_max=r_max,
                    c_max=c_max if c_max is not None else math.inf, b_max=b_max)
