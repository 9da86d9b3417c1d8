"""Deterministic-annealing beam placement: COV, CAP, and LB variants.

The solver anneals a soft clustering of terminals onto beam centers. At each
temperature it alternates Gibbs association updates with the stationarity
center update, extracts a hard plan, and, if the plan is infeasible, spawns a
perturbed copy of the worst beam before cooling. Centers that stay within a
merge threshold collapse back, so the beam count only grows when the
temperature actually supports separation.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .scenario import BeamPlan, Scenario, check_feasibility

VARIANTS = ("coverage", "capacity", "load_balance")


@dataclass(frozen=True)
class SolverConfig:
    variant: str = "coverage"
    alpha: float = 10.0
    beta: float = 10.0
    eta: float = 0.5
    t_high: float | None = None          # default: 2 * max distortion to the centroid
    t_min: float | None = None           # default: min(1e-8 * t_high, 1e-3)
    cooling_rate: float = 0.95
    inner_iters: int = 100
    inner_tol: float = 1e-4              # fraction of r_max
    split_perturbation: float = 1e-2     # fraction of r_max
    merge_threshold: float = 1e-3        # fraction of r_max
    p_floor: float = 1e-6
    lb_damping: float = 0.1              # marginal fixed-point relaxation (LB)
    split_interval: int = 10             # cooling steps between split attempts
    seed: int = 0

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        if self.alpha < 1:
            raise ValueError("alpha must be >= 1")
        if self.beta <= 0 or self.eta < 0:
            raise ValueError("beta must be positive and eta nonnegative")
        if not (0.0 < self.cooling_rate < 1.0):
            raise ValueError("cooling_rate must be in (0, 1)")
        for name in ("inner_tol", "split_perturbation", "merge_threshold", "p_floor"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if not (0.0 < self.lb_damping <= 1.0):
            raise ValueError("lb_damping must be in (0, 1]")
        if self.split_interval < 1:
            raise ValueError("split_interval must be >= 1")
        if self.t_high is not None and self.t_min is not None and not (self.t_min < self.t_high):
            raise ValueError("t_min must be below t_high")

    @property
    def uses_lb(self) -> bool:
        return self.variant == "load_balance"

    @property
    def enforces_capacity(self) -> bool:
        return self.variant in ("capacity", "load_balance")


@dataclass
class SoftState:
    """Live annealing state: centers, soft associations, marginals, T."""

    centers: np.ndarray         # (M, 2)
    assoc: np.ndarray           # (U, M), rows sum to 1
    beam_marginals: np.ndarray  # (M,)
    temperature: float
    free_energy: float = math.nan

    @property
    def num_beams(self) -> int:
        return len(self.centers)


@dataclass(frozen=True)
class TraceRecord:
    temperature: float
    num_beams: int
    free_energy: float
    feasible: bool


@dataclass
class SolveResult:
    plan: BeamPlan
    feasible: bool
    at_beam_cap: bool
    trace: list[TraceRecord]
    inner_free_energies: list[np.ndarray] = field(default_factory=list)


def initial_state(scenario: Scenario, cfg: SolverConfig) -> SoftState:
    """Single beam at the weighted centroid, temperature at t_high."""
    pu = scenario.weights
    centroid = pu @ scenario.positions
    t_high = cfg.t_high
    if t_high is None:
        d0 = kernels.distortion_matrix(scenario.positions, centroid[None, :],
                                       cfg.alpha, scenario.r_max)
        t_high = max(2.0 * float(d0.max()), 1.0)
    u = scenario.size
    return SoftState(
        centers=centroid[None, :].copy(),
        assoc=np.ones((u, 1)),
        beam_marginals=np.array([1.0]),
        temperature=float(t_high),
    )


def _beam_term(state: SoftState, cfg: SolverConfig):
    if not cfg.uses_lb:
        return None
    return kernels.lb_exponent_term(state.beam_marginals, cfg.eta, cfg.beta, cfg.p_floor)


def gibbs_update(state: SoftState, scenario: Scenario, cfg: SolverConfig) -> SoftState:
    """Recompute associations from the Gibbs distribution at the current T.

    LB variant adds the marginal-dependent exponent term evaluated at the
    previous iteration's marginals (fixed-point iteration).
    """
    if state.temperature <= 0:
        raise ValueError("temperature must be positive")
    dist = kernels.distortion_matrix(scenario.positions, state.centers,
                                     cfg.alpha, scenario.r_max)
    assoc, log_z = kernels.gibbs_rows(dist, state.temperature, _beam_term(state, cfg))
    pb = scenario.weights @ assoc
    f = -state.temperature * float(scenario.weights @ log_z)
    if cfg.uses_lb:
        f += kernels.lb_free_energy_extra(pb, cfg.eta, cfg.beta, cfg.p_floor)
    return SoftState(centers=state.centers.copy(), assoc=assoc, beam_marginals=pb,
                     temperature=state.temperature, free_energy=f)


def center_update(state: SoftState, scenario: Scenario, cfg: SolverConfig) -> SoftState:
    """Move each center to its distortion-weighted mean of associated users."""
    dist = kernels.distortion_matrix(scenario.positions, state.centers,
                                     cfg.alpha, scenario.r_max)
    new_centers = kernels.update_centers(scenario.positions, scenario.weights,
                                         state.assoc, dist, cfg.alpha, state.centers)
    return replace_centers(state, new_centers)


def replace_centers(state: SoftState, centers: np.ndarray) -> SoftState:
    return SoftState(centers=centers, assoc=state.assoc,
                     beam_marginals=state.beam_marginals,
                     temperature=state.temperature, free_energy=state.free_energy)


def free_energy(state: SoftState, scenario: Scenario, cfg: SolverConfig) -> float:
    """Annealed objective at Gibbs-optimal associations: -T * sum_u p(u) log Z_u.

    The LB variant subtracts eta * sum_b p(b)^2 * d_beta'(p(b)), using the
    state's marginals.
    """
    dist = kernels.distortion_matrix(scenario.positions, state.centers,
                                     cfg.alpha, scenario.r_max)
    _, log_z = kernels.gibbs_rows(dist, state.temperature, _beam_term(state, cfg))
    f = -state.temperature * float(scenario.weights @ log_z)
    if cfg.uses_lb:
        f += kernels.lb_free_energy_extra(state.beam_marginals, cfg.eta, cfg.beta, cfg.p_floor)
    return f


def hard_labels(state: SoftState) -> np.ndarray:
    """Row argmax of the associations; ties break to the lowest beam index."""
    return np.argmax(state.assoc, axis=1)


def split_beam(state: SoftState, scenario: Scenario, cfg: SolverConfig,
               rng: np.random.Generator) -> SoftState:
    """Add a beam near the worst-covered user, or split the most loaded beam
    when a capacity-enforcing variant has an overloaded beam.

    The donor's association mass is divided equally with the newborn.
    """
    m = state.num_beams
    if m >= scenario.b_max:
        raise RuntimeError(f"beam cap b_max={scenario.b_max} reached")
    labels = hard_labels(state)
    theta = rng.uniform(0.0, 2.0 * math.pi)
    offset = cfg.split_perturbation * scenario.r_max * np.array([math.cos(theta), math.sin(theta)])
    loads = np.bincount(labels, weights=scenario.demands, minlength=m)
    overloaded = (cfg.enforces_capacity and math.isfinite(scenario.c_max)
                  and float(loads.max()) > scenario.c_max)
    if overloaded:
        donor = int(np.argmax(loads))
        newborn = state.centers[donor] + offset
    else:
        # Newborn lands on the worst-covered user; a perturbed copy of the
        # donor center would need many cold iterations to migrate there.
        dists = np.linalg.norm(scenario.positions - state.centers[labels], axis=1)
        worst = int(np.argmax(dists))
        donor = int(labels[worst])
        newborn = scenario.positions[worst] + offset
    centers = np.vstack([state.centers, newborn])

    assoc = np.hstack([state.assoc, state.assoc[:, donor:donor + 1] / 2.0])
    assoc[:, donor] /= 2.0
    pb = scenario.weights @ assoc
    return SoftState(centers=centers, assoc=assoc, beam_marginals=pb,
                     temperature=state.temperature, free_energy=state.free_energy)


def merge_beams(state: SoftState, scenario: Scenario, cfg: SolverConfig) -> SoftState:
    """Collapse center pairs within merge_threshold * r_max, transitively.

    Merged centers sit at the marginal-weighted mean; association columns add,
    so every row sum is preserved exactly. Under a capacity-enforcing variant,
    a pair whose combined hard-assigned demand exceeds c_max is kept apart:
    co-located demand above c_max genuinely needs coincident beams.
    """
    centers = state.centers.copy()
    assoc = state.assoc.copy()
    pb = state.beam_marginals.copy()
    threshold = cfg.merge_threshold * scenario.r_max
    while len(centers) > 1:
        labels = np.argmax(assoc, axis=1)
        loads = np.bincount(labels, weights=scenario.demands, minlength=len(centers))
        diff = centers[:, None, :] - centers[None, :, :]
        d = np.linalg.norm(diff, axis=2)
        np.fill_diagonal(d, np.inf)
        if cfg.enforces_capacity and math.isfinite(scenario.c_max):
            over = loads[:, None] + loads[None, :] > scenario.c_max
            d[over] = np.inf
        i, j = np.unravel_index(np.argmin(d), d.shape)
        if d[i, j] > threshold:
            break
        if i > j:
            i, j = j, i
        w = pb[i] + pb[j]
        if w > 0:
            centers[i] = (pb[i] * centers[i] + pb[j] * centers[j]) / w
        else:
            centers[i] = (centers[i] + centers[j]) / 2.0
        assoc[:, i] += assoc[:, j]
        pb[i] += pb[j]
        centers = np.delete(centers, j, axis=0)
        assoc = np.delete(assoc, j, axis=1)
        pb = np.delete(pb, j)
    return SoftState(centers=centers, assoc=assoc, beam_marginals=pb,
                     temperature=state.temperature, free_energy=state.free_energy)


def load_profile(plan: BeamPlan, scenario: Scenario) -> np.ndarray:
    """Per-beam assigned demand as a fraction of total demand; sums to 1."""
    labels = plan.labels_for(scenario)
    loads = np.bincount(labels, weights=scenario.demands, minlength=plan.num_beams)
    return loads / scenario.demands.sum()


def _plan_feasible(report, cfg: SolverConfig) -> bool:
    return report.coverage_ok and (report.capacity_ok if cfg.enforces_capacity else True)


def capacity_repair(scenario: Scenario, centers: np.ndarray, assoc: np.ndarray,
                    labels: np.ndarray) -> np.ndarray:
    """Greedy reassignment to clear capacity overloads in a hard plan.

    Argmax rounding cannot split co-located users across twin beams, so when a
    beam exceeds c_max, its lowest-affinity users move to the closest beam
    that still has spare capacity. Moves that would break coverage are not
    taken. Deterministic; returns the (possibly unchanged) labels.
    """
    if not math.isfinite(scenario.c_max):
        return labels
    labels = labels.copy()
    demands = scenario.demands
    pos = scenario.positions
    m = len(centers)
    dists = np.linalg.norm(pos[:, None, :] - centers[None, :, :], axis=2)
    loads = np.bincount(labels, weights=demands, minlength=m)
    for _ in range(scenario.size * m):
        over = np.flatnonzero(loads > scenario.c_max)
        if not len(over):
            break
        b = int(over[np.argmax(loads[over])])
        members = np.flatnonzero(labels == b)
        moved = False
        # Try members from lowest association to this beam first.
        for u in members[np.argsort(assoc[members, b], kind="stable")]:
            targets = [t for t in range(m)
                       if t != b and dists[u, t] <= scenario.r_max
                       and loads[t] + demands[u] <= scenario.c_max]
            if targets:
                t = min(targets, key=lambda t: dists[u, t])
                labels[u] = t
                loads[b] -= demands[u]
                loads[t] += demands[u]
                moved = True
                break
        if not moved:
            break
    return labels


def coverage_repair(scenario: Scenario, labels: np.ndarray, cfg: SolverConfig,
                    num_beams: int) -> np.ndarray:
    """Shrink overstretched beams by offloading their outermost users.

    A beam whose members do not fit in an r_max disk sheds, one at a time, the
    member furthest from the disk center, to whichever other beam stays within
    r_max (and c_max when enforced) with the least resulting radius. Stops
    when every beam fits or no valid move remains.
    """
    from .geometry import min_enclosing_circle

    labels = labels.copy()
    pos = scenario.positions
    demands = scenario.demands
    cap = scenario.c_max if (cfg.enforces_capacity and math.isfinite(scenario.c_max)) else math.inf
    rng = np.random.default_rng(0)
    groups = [list(np.flatnonzero(labels == b)) for b in range(num_beams)]
    loads = np.array([demands[g].sum() if g else 0.0 for g in groups])
    for _ in range(scenario.size * max(num_beams, 1)):
        worst = None
        for b, g in enumerate(groups):
            if len(g) < 2:
                continue
            center, radius = min_enclosing_circle(pos[g], rng)
            if radius > scenario.r_max and (worst is None or radius > worst[0]):
                worst = (radius, b, center)
        if worst is None:
            break
        _, b, center = worst
        # Outermost members first; fall through to closer ones when no other
        # beam can take the furthest.
        order = sorted(groups[b],
                       key=lambda u: -float(np.linalg.norm(pos[u] - center)))
        moved = False
        for u in order:
            options = []
            for t, g in enumerate(groups):
                if t == b or not g or loads[t] + demands[u] > cap:
                    continue
                _, radius = min_enclosing_circle(pos[g + [u]], rng)
                if radius <= scenario.r_max:
                    options.append((radius, t))
            if options:
                _, t = min(options)
                groups[b].remove(u)
                groups[t].append(u)
                loads[b] -= demands[u]
                loads[t] += demands[u]
                labels[u] = t
                moved = True
                break
        if not moved:
            break
    return labels


def extract_plan(state: SoftState, scenario: Scenario, cfg: SolverConfig) -> BeamPlan:
    """Argmax rounding, plus capacity and coverage repair of the hard groups.

    Each nonempty beam is recentred on the minimum enclosing disk of its hard
    users: the annealed center minimizes distortion, not worst-case distance,
    and can sit just outside coverage of its own furthest member.
    """
    from .geometry import min_enclosing_circle

    labels = hard_labels(state)
    if cfg.enforces_capacity:
        labels = capacity_repair(scenario, state.centers, state.assoc, labels)
    labels = coverage_repair(scenario, labels, cfg, state.num_beams)
    centers = state.centers.copy()
    rng = np.random.default_rng(0)
    for b in range(len(centers)):
        members = np.flatnonzero(labels == b)
        if len(members):
            centers[b], _ = min_enclosing_circle(scenario.positions[members], rng)
    return BeamPlan.from_labels(scenario, centers, labels)


def _eliminate_beams(scenario: Scenario, groups: list[list[int]], cap: float,
                     rng: np.random.Generator) -> list[list[int]]:
    """Try to dissolve whole beams by scattering their users one at a time.

    Stronger than pairwise merging: a small beam can disappear even when no
    single neighbor absorbs all of it. Beams are tried smallest first; a move
    is valid when the target still fits in an r_max disk and within cap.
    """
    from .geometry import min_enclosing_circle

    pos = scenario.positions
    demands = scenario.demands
    changed = True
    while changed:
        changed = False
        for b in sorted(range(len(groups)), key=lambda b: len(groups[b])):
            if len(groups) == 1:
                break
            trial = [list(g) for g in groups]
            victims = trial[b]
            del trial[b]
            ok = True
            for u in victims:
                placed = False
                # Prefer the target whose disk grows the least.
                options = []
                for t, g in enumerate(trial):
                    if demands[g + [u]].sum() > cap:
                        continue
                    _, radius = min_enclosing_circle(pos[g + [u]], rng)
                    if radius <= scenario.r_max:
                        options.append((radius, t))
                if options:
                    _, t = min(options)
                    trial[t].append(u)
                    placed = True
                if not placed:
                    ok = False
                    break
            if ok:
                groups = trial
                changed = True
                break
    return groups


def consolidate_plan(scenario: Scenario, plan: BeamPlan, cfg: SolverConfig) -> BeamPlan:
    """Merge beam pairs whose combined users fit inside one r_max disk.

    The annealing loop can leave redundant beams behind (a forced split that
    separated but was never strictly needed). Greedily merging the pair with
    the smallest combined enclosing radius, and recentering every beam on the
    minimum enclosing disk of its users, strictly reduces the beam count
    without ever breaking coverage. Capacity-enforcing variants only merge
    pairs whose combined demand stays within c_max.
    """
    from .geometry import min_enclosing_circle

    pos = scenario.positions
    labels = plan.labels_for(scenario)
    groups = [list(np.flatnonzero(labels == b)) for b in range(plan.num_beams)]
    groups = [g for g in groups if g]
    cap = scenario.c_max if (cfg.enforces_capacity and math.isfinite(scenario.c_max)) else math.inf
    rng = np.random.default_rng(0)

    while True:
        best = None
        for i in range(len(groups)):
            for j in range(i + 1, len(groups)):
                if scenario.demands[groups[i] + groups[j]].sum() > cap:
                    continue
                _, radius = min_enclosing_circle(pos[groups[i] + groups[j]], rng)
                if radius <= scenario.r_max and (best is None or radius < best[0]):
                    best = (radius, i, j)
        if best is None:
            break
        _, i, j = best
        groups[i] = groups[i] + groups[j]
        del groups[j]

    groups = _eliminate_beams(scenario, groups, cap, rng)

    centers = np.empty((len(groups), 2))
    for b, g in enumerate(groups):
        centers[b], _ = min_enclosing_circle(pos[g], rng)
        labels[g] = b
    return BeamPlan.from_labels(scenario, centers, labels)


def solve(scenario: Scenario, cfg: SolverConfig, record_inner: bool = False) -> SolveResult:
    """Run the full annealing loop and return a feasible hard plan.

    Cooling runs from t_high to t_min, attempting a split every
    split_interval steps while infeasible. COV and CAP return (consolidated)
    at the first feasible extraction; LB keeps cooling to the floor and
    returns the feasible plan with the flattest load profile, since the
    balancing pressure needs low temperature to act. If the floor is reached
    and the plan is still infeasible, splitting continues at constant t_min
    (the associations are effectively hard there) until feasibility or b_max.
    Returns the best plan seen (fewest uncovered users, then smallest max
    radius) with feasible=False when b_max blocks feasibility.
    """
    pos = scenario.positions
    pu = scenario.weights
    state = initial_state(scenario, cfg)
    t_high = state.temperature
    t_min = cfg.t_min if cfg.t_min is not None else min(1e-8 * t_high, 1e-3)
    rng = np.random.default_rng(cfg.seed)

    trace: list[TraceRecord] = []
    inner_f: list[np.ndarray] = []
    best_plan = None
    best_key = (np.inf, np.inf)
    best_lb = None
    temperature = t_high
    steps_since_split = cfg.split_interval  # allow an immediate first split
    floor_budget = 4 * scenario.b_max + 10

    while True:
        centers, assoc, pb, f_hist = kernels.anneal_inner(
            pos, pu, state.centers, temperature, cfg.alpha, scenario.r_max,
            use_lb=cfg.uses_lb, eta=cfg.eta, beta=cfg.beta, p_floor=cfg.p_floor,
            lb_damping=cfg.lb_damping, pb=state.beam_marginals,
            max_iters=cfg.inner_iters, tol_km=cfg.inner_tol * scenario.r_max)
        state = SoftState(centers=centers, assoc=assoc, beam_marginals=pb,
                          temperature=temperature, free_energy=float(f_hist[-1]))
        if record_inner:
            inner_f.append(f_hist)

        plan = extract_plan(state, scenario, cfg)
        report = check_feasibility(scenario, plan)
        feasible = _plan_feasible(report, cfg)
        trace.append(TraceRecord(temperature=temperature, num_beams=state.num_beams,
                                 free_energy=state.free_energy, feasible=feasible))
        at_floor = temperature <= t_min
        if feasible:
            if not cfg.uses_lb:
                plan = consolidate_plan(scenario, plan, cfg)
                return SolveResult(plan=plan, feasible=True, at_beam_cap=False,
                                   trace=trace, inner_free_energies=inner_f)
            # The balancing pressure equilibrates at low temperature, so keep
            # cooling with the beam count frozen and keep the flattest plan.
            spread = float(np.std(load_profile(plan, scenario)))
            if best_lb is None or spread < best_lb[0]:
                best_lb = (spread, plan)
            if at_floor:
                return SolveResult(plan=best_lb[1], feasible=True, at_beam_cap=False,
                                   trace=trace, inner_free_energies=inner_f)
        else:
            key = (report.uncovered, report.max_radius_used)
            if key < best_key:
                best_key = key
                best_plan = plan

            steps_since_split += 1
            if steps_since_split >= cfg.split_interval or at_floor:
                if state.num_beams < scenario.b_max:
                    state = split_beam(state, scenario, cfg, rng)
                    steps_since_split = 0
                elif at_floor:
                    if best_lb is not None:
                        return SolveResult(plan=best_lb[1], feasible=True,
                                           at_beam_cap=False, trace=trace,
                                           inner_free_energies=inner_f)
                    return SolveResult(plan=best_plan if best_plan is not None else plan,
                                       feasible=False, at_beam_cap=True,
                                       trace=trace, inner_free_energies=inner_f)
        state = merge_beams(state, scenario, cfg)

        if at_floor:
            floor_budget -= 1
            if floor_budget <= 0:
                if best_lb is not None:
                    return SolveResult(plan=best_lb[1], feasible=True, at_beam_cap=False,
                                       trace=trace, inner_free_energies=inner_f)
                return SolveResult(plan=best_plan if best_plan is not None else plan,
                                   feasible=False, at_beam_cap=state.num_beams >= scenario.b_max,
                                   trace=trace, inner_free_energies=inner_f)
        temperature = max(temperature * cfg.cooling_rate, t_min)
        state = SoftState(centers=state.centers, assoc=state.assoc,
                          beam_marginals=state.beam_marginals,
                          temperature=temperature, free_energy=state.free_energy)
