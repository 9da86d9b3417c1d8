"""Randomized clique-cover baseline over the 2*r_max proximity graph.

Reconstructs the benchmark heuristic: grow maximal cliques from random
uncovered seeds, preferring larger cliques and then fewer already-covered
members, and place one beam per clique at the clique's minimum enclosing disk
center. Clique growth additionally enforces that the clique fits in one disk
of radius r_max, which the pairwise 2*r_max test alone does not guarantee.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import min_enclosing_circle
from .scenario import BeamPlan, Scenario

# Relative slack on geometric threshold tests; absorbs MEC rounding only.
GEOM_EPS = 1e-9

# Maximal cliques grown per seed node before picking the best.
GROW_TRIALS = 8


@dataclass
class ProximityGraph:
    nodes: list[str]
    adjacency: np.ndarray  # (U, U) bool, symmetric, no self-loops


def build_graph(scenario: Scenario) -> ProximityGraph:
    """Edge between every pair within distance 2*r_max (inclusive)."""
    pos = scenario.positions
    diff = pos[:, None, :] - pos[None, :, :]
    d = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
    adj = d <= 2.0 * scenario.r_max * (1.0 + GEOM_EPS)
    np.fill_diagonal(adj, False)
    return ProximityGraph(nodes=scenario.ids, adjacency=adj)


def _grow_clique(seed: int, adj: np.ndarray, pos: np.ndarray, r_max: float,
                 rng: np.random.Generator) -> list[int]:
    """Grow one maximal clique from `seed` in a random candidate order.

    A candidate joins only if adjacent to every member and the clique's
    minimum enclosing disk stays within r_max. The disk radius is monotone in
    the member set, so a rejected candidate can never become addable later.
    """
    members = [seed]
    candidates = np.flatnonzero(adj[seed])
    rng.shuffle(candidates)
    for c in candidates:
        if not adj[c, members].all():
            continue
        _, radius = min_enclosing_circle(pos[members + [int(c)]], rng)
        if radius <= r_max * (1.0 + GEOM_EPS):
            members.append(int(c))
    return members


def cc_cover(graph: ProximityGraph, scenario: Scenario, seed: int) -> BeamPlan:
    """One randomized clique-cover run; returns a hard coverage plan."""
    rng = np.random.default_rng(seed)
    pos = scenario.positions
    adj = graph.adjacency
    u = scenario.size
    covered = np.zeros(u, dtype=bool)
    labels = np.full(u, -1, dtype=int)
    centers = []

    while not covered.all():
        uncovered = np.flatnonzero(~covered)
        start = int(rng.choice(uncovered))
        best = None
        best_key = None
        for _ in range(GROW_TRIALS):
            clique = _grow_clique(start, adj, pos, scenario.r_max, rng)
            collisions = int(covered[clique].sum())
            key = (len(clique), -collisions)
            if best_key is None or key > best_key:
                best_key = key
                best = clique
        center, _ = min_enclosing_circle(pos[best], rng)
        beam = len(centers)
        centers.append(center)
        for member in best:
            if not covered[member]:
                covered[member] = True
                labels[member] = beam

    return BeamPlan.from_labels(scenario, np.array(centers), labels)


def cc_best_of(scenario: Scenario, runs: int, seed: int) -> BeamPlan:
    """Best (fewest beams) plan over `runs` seeded repetitions; ties keep the first."""
    if runs < 1:
        raise ValueError("runs must be >= 1")
    graph = build_graph(scenario)
    best = None
    for i in range(runs):
        plan = cc_cover(graph, scenario, seed + i)
        if best is None or plan.num_beams < best.num_beams:
            best = plan
    return best
