"""Exact brute-force disk-cover solver for tiny instances.

Ground truth for testing the annealing solver and the clique-cover baseline.
Relies on the classical discretization argument: some optimal cover uses only
disks that are either centered on a point or whose boundary passes through two
points at distance <= 2*r_max, so enumerating those candidate centers is
exhaustive. Minimality comes from iterative deepening over the cover size.
"""
from __future__ import annotations

import itertools
import math

import numpy as np

from .scenario import BeamPlan, Scenario

MAX_USERS = 12
GEOM_EPS = 1e-9


def candidate_centers(scenario: Scenario) -> np.ndarray:
    """Each point itself, plus both radius-r_max circle centers through every
    pair within 2*r_max."""
    pos = scenario.positions
    r = scenario.r_max
    out = [pos]
    for i, j in itertools.combinations(range(len(pos)), 2):
        p, q = pos[i], pos[j]
        d = float(np.linalg.norm(q - p))
        if d > 2.0 * r or d == 0.0:
            continue
        mid = (p + q) / 2.0
        h = math.sqrt(max(r * r - (d / 2.0) ** 2, 0.0))
        perp = np.array([-(q - p)[1], (q - p)[0]]) / d
        out.append(mid[None, :] + h * perp[None, :])
        out.append(mid[None, :] - h * perp[None, :])
    return np.vstack(out)


def _coverage_masks(scenario: Scenario, centers: np.ndarray):
    """Deduplicated, maximal coverage masks and a representative center each."""
    pos = scenario.positions
    diff = pos[None, :, :] - centers[:, None, :]
    d = np.sqrt(np.einsum("cuk,cuk->cu", diff, diff))
    covered = d <= scenario.r_max * (1.0 + GEOM_EPS)
    masks: dict[int, int] = {}  # mask -> candidate index
    for c in range(len(centers)):
        mask = 0
        for u in np.flatnonzero(covered[c]):
            mask |= 1 << int(u)
        if mask and mask not in masks:
            masks[mask] = c
    # Drop masks strictly contained in another mask.
    keep = []
    all_masks = list(masks)
    for m in all_masks:
        if not any(m != o and (m | o) == o for o in all_masks):
            keep.append(m)
    return [(m, centers[masks[m]]) for m in keep]


def _assign_with_capacity(scenario: Scenario, chosen, labels_out) -> bool:
    """Backtracking user->disk assignment respecting c_max. Fills labels_out."""
    pos = scenario.positions
    demands = scenario.demands
    options = []
    for u in range(scenario.size):
        opts = [k for k, (mask, _) in enumerate(chosen) if mask >> u & 1]
        options.append(opts)
    order = sorted(range(scenario.size), key=lambda u: len(options[u]))
    loads = [0.0] * len(chosen)

    def backtrack(idx: int) -> bool:
        if idx == len(order):
            return True
        u = order[idx]
        for k in options[u]:
            if loads[k] + demands[u] <= scenario.c_max * (1.0 + 1e-12):
                loads[k] += demands[u]
                labels_out[u] = k
                if backtrack(idx + 1):
                    return True
                loads[k] -= demands[u]
        return False

    return backtrack(0)


def exact_min_cover(scenario: Scenario, with_capacity: bool = False) -> BeamPlan:
    """Minimum-beam-count plan by exhaustive search; U <= 12 enforced.

    With capacity, the same candidate center may be picked more than once
    (co-located beams each contribute c_max), so the search runs over
    multisets of candidate disks.
    """
    if scenario.size > MAX_USERS:
        raise ValueError(f"exact solver limited to {MAX_USERS} users, got {scenario.size}")
    cands = _coverage_masks(scenario, candidate_centers(scenario))
    full = (1 << scenario.size) - 1
    capacity = with_capacity and math.isfinite(scenario.c_max)

    for k in range(1, 4 * scenario.size + 1):
        if capacity:
            plan = _search_k_capacity(scenario, cands, full, k)
        else:
            plan = _search_k_coverage(scenario, cands, full, k)
        if plan is not None:
            return plan
    raise RuntimeError("no feasible cover found")


def _plan_from(scenario: Scenario, picked, labels) -> BeamPlan:
    centers = np.array([c for _, c in picked])
    return BeamPlan.from_labels(scenario, centers, labels)


def _search_k_coverage(scenario: Scenario, cands, full: int, k: int):
    """Depth-first search for a cover of <= k disks; exact by iterative deepening."""
    chosen: list[int] = []

    def dfs(covered: int, remaining: int):
        if covered == full:
            picked = [cands[i] for i in chosen]
            labels = np.array(
                [next(j for j, (mask, _) in enumerate(picked) if mask >> u & 1)
                 for u in range(scenario.size)], dtype=int)
            return _plan_from(scenario, picked, labels)
        if remaining == 0:
            return None
        # Branch on the uncovered user with fewest covering candidates.
        best_opts = None
        for u in range(scenario.size):
            if covered >> u & 1:
                continue
            opts = [i for i, (mask, _) in enumerate(cands) if mask >> u & 1]
            if best_opts is None or len(opts) < len(best_opts):
                best_opts = opts
        for i in best_opts:
            if i in chosen:
                continue
            chosen.append(i)
            plan = dfs(covered | cands[i][0], remaining - 1)
            if plan is not None:
                return plan
            chosen.pop()
        return None

    return dfs(0, k)


def _search_k_capacity(scenario: Scenario, cands, full: int, k: int):
    """Try every k-multiset of candidate disks whose union covers all users."""
    for combo in itertools.combinations_with_replacement(range(len(cands)), k):
        union = 0
        for i in combo:
            union |= cands[i][0]
        if union != full:
            continue
        picked = [cands[i] for i in combo]
        labels = np.zeros(scenario.size, dtype=int)
        if _assign_with_capacity(scenario, picked, labels):
            return _plan_from(scenario, picked, labels)
    return None
