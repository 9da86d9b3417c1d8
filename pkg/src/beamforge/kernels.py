"""Hot numeric kernels for the annealing inner loop.

Two interchangeable backends: a numba @njit path (default when numba imports)
and a pure-numpy path. Select with BEAMFORGE_BACKEND=numba|numpy; anything
else (or an import failure) falls back to numpy.

All distortions are normalized by r_max**alpha, so the coverage boundary sits
at distortion 1 and alpha=10 stays well conditioned. Exponentials are always
evaluated in shifted form (per-row minimum exponent subtracted) so low
temperatures cannot underflow the whole row.
"""
from __future__ import annotations

import math
import os

import numpy as np

EPS_WEIGHT = 1e-12    # stand-in weight when a user sits exactly on a center
MIN_BEAM_WEIGHT = 1e-15  # below this total pull, a beam keeps its center


def _pick_backend() -> str:
    choice = os.environ.get("BEAMFORGE_BACKEND", "").strip().lower()
    if choice == "numpy":
        return "numpy"
    try:
        import numba  # noqa: F401
    except ImportError:
        return "numpy"
    return "numba"


BACKEND = _pick_backend()


def get_backend() -> str:
    return BACKEND


# ---------------------------------------------------------------- numpy path

def distortion_matrix(pos: np.ndarray, centers: np.ndarray,
                      alpha: float, r_max: float) -> np.ndarray:
    """(U, M) matrix of normalized distortions (dist/r_max)**alpha."""
    diff = pos[:, None, :] - centers[None, :, :]
    d2 = np.einsum("umk,umk->um", diff, diff)
    return (d2 / (r_max * r_max)) ** (alpha / 2.0)


def lb_exponent_term(pb: np.ndarray, eta: float, beta: float, p_floor: float) -> np.ndarray:
    """Per-beam additive distortion term of the load-balancing variant.

    eta*d_beta(q) + eta*p*d(d_beta)/dp with d_beta(q)=q**-beta evaluated at
    the relative marginal q = p * M (q = 1 when loads are uniform). Measuring
    the marginal against the uniform value keeps the term O(1) near balance
    for steep beta, instead of blowing up as the beam count grows. Marginals
    are clamped to p_floor.
    """
    m = len(pb)
    q = np.maximum(pb, p_floor) * m
    return eta * (1.0 - beta) * q ** (-beta)


def lb_free_energy_extra(pb: np.ndarray, eta: float, beta: float, p_floor: float) -> float:
    """-eta * sum_b p(b)^2 * d(d_beta)/dp at p(b), the marginal term of F_LB.

    Uses the same relative-marginal form q = p * M as lb_exponent_term, which
    reduces the sum to eta*beta/M * sum_b q(b)**(1-beta).
    """
    m = len(pb)
    q = np.maximum(pb, p_floor) * m
    return float(eta * beta / m * np.sum(q ** (1.0 - beta)))


def gibbs_rows(dist: np.ndarray, temperature: float,
               beam_term: np.ndarray | None = None):
    """Row-stochastic Gibbs associations and per-row log partition values.

    Returns (assoc, log_z) where log_z[u] = log sum_b exp(-(d_ub + t_b)/T),
    computed with per-row exponent shifting.
    """
    a = dist / temperature
    if beam_term is not None:
        a = a + beam_term[None, :] / temperature
    m = a.min(axis=1)
    p = np.exp(-(a - m[:, None]))
    z = p.sum(axis=1)
    log_z = np.log(z) - m
    return p / z[:, None], log_z


def update_centers(pos: np.ndarray, pu: np.ndarray, assoc: np.ndarray,
                   dist: np.ndarray, alpha: float, old_centers: np.ndarray) -> np.ndarray:
    """Stationarity update: distance-weighted mean with weights d**(1-2/alpha)."""
    g = np.where(dist > 0.0, dist ** (1.0 - 2.0 / alpha), EPS_WEIGHT)
    w = pu[:, None] * assoc * g
    den = w.sum(axis=0)
    num = w.T @ pos
    new = old_centers.copy()
    ok = den > MIN_BEAM_WEIGHT
    new[ok] = num[ok] / den[ok, None]
    return new


MIN_BACKTRACK_STEP = 1e-3  # give up shrinking the center step below this


def _anneal_inner_numpy(pos, pu, centers, temperature, alpha, r_max,
                        use_lb, eta, beta, p_floor, lb_damping, pb,
                        max_iters, tol_km):
    f_hist = np.empty(max_iters + 1)
    n = 0
    dist = distortion_matrix(pos, centers, alpha, r_max)
    for _ in range(max_iters):
        term = lb_exponent_term(pb, eta, beta, p_floor) if use_lb else None
        assoc, log_z = gibbs_rows(dist, temperature, term)
        if use_lb:
            # Damped fixed-point iteration: the marginals feed back into the
            # exponent, and a full update oscillates for steep beta.
            pb = (1.0 - lb_damping) * pb + lb_damping * (pu @ assoc)
        else:
            pb = pu @ assoc
        f_core = -temperature * float(pu @ log_z)
        f = f_core
        if use_lb:
            f += lb_free_energy_extra(pb, eta, beta, p_floor)
        f_hist[n] = f
        n += 1
        proposed = update_centers(pos, pu, assoc, dist, alpha, centers)
        # The fixed-point step overshoots for steep alpha; halve it until the
        # free energy at the shifted centers stops increasing.
        step = 1.0
        while True:
            cand = centers + step * (proposed - centers)
            cand_dist = distortion_matrix(pos, cand, alpha, r_max)
            _, cand_log_z = gibbs_rows(cand_dist, temperature, term)
            if -temperature * float(pu @ cand_log_z) <= f_core:
                break
            step *= 0.5
            if step < MIN_BACKTRACK_STEP:
                cand = centers
                cand_dist = dist
                break
        move = float(np.max(np.linalg.norm(cand - centers, axis=1)))
        centers = cand
        dist = cand_dist
        if move < tol_km:
            break
    # Final associations consistent with the final centers.
    term = lb_exponent_term(pb, eta, beta, p_floor) if use_lb else None
    assoc, log_z = gibbs_rows(dist, temperature, term)
    if use_lb:
        pb = (1.0 - lb_damping) * pb + lb_damping * (pu @ assoc)
    else:
        pb = pu @ assoc
    f = -temperature * float(pu @ log_z)
    if use_lb:
        f += lb_free_energy_extra(pb, eta, beta, p_floor)
    f_hist[n] = f
    n += 1
    return centers, assoc, pb, f_hist[:n].copy()


# ---------------------------------------------------------------- numba path

try:
    from numba import njit
except ImportError:  # pragma: no cover
    njit = None

if njit is not None:

    @njit(cache=True)
    def _gibbs_core_nb(pos, pu, centers, term, temperature, half_alpha, r2,
                       dist, assoc, log_z):
        """Fill dist/assoc/log_z in place; return the core free energy."""
        u_n = pos.shape[0]
        m_n = centers.shape[0]
        for u in range(u_n):
            lo = 1e300
            for b in range(m_n):
                dx = pos[u, 0] - centers[b, 0]
                dy = pos[u, 1] - centers[b, 1]
                d = ((dx * dx + dy * dy) / r2) ** half_alpha
                dist[u, b] = d
                e = (d + term[b]) / temperature
                if e < lo:
                    lo = e
            z = 0.0
            for b in range(m_n):
                e = (dist[u, b] + term[b]) / temperature
                w = math.exp(-(e - lo))
                assoc[u, b] = w
                z += w
            for b in range(m_n):
                assoc[u, b] /= z
            log_z[u] = math.log(z) - lo
        f = 0.0
        for u in range(u_n):
            f += pu[u] * log_z[u]
        return -temperature * f

    @njit(cache=True)
    def _anneal_inner_nb(pos, pu, centers, temperature, alpha, r_max,
                         use_lb, eta, beta, p_floor, lb_damping, pb,
                         max_iters, tol_km):
        u_n = pos.shape[0]
        m_n = centers.shape[0]
        assoc = np.empty((u_n, m_n))
        dist = np.empty((u_n, m_n))
        cand = np.empty((m_n, 2))
        proposed = np.empty((m_n, 2))
        cand_dist = np.empty((u_n, m_n))
        cand_assoc = np.empty((u_n, m_n))
        cand_log_z = np.empty(u_n)
        term = np.zeros(m_n)
        log_z = np.empty(u_n)
        f_hist = np.empty(max_iters + 1)
        n = 0
        r2 = r_max * r_max
        half_alpha = alpha / 2.0
        g_exp = 1.0 - 2.0 / alpha
        f_core = _gibbs_core_nb(pos, pu, centers, term, temperature,
                                half_alpha, r2, dist, assoc, log_z)
        for _ in range(max_iters):
            if use_lb:
                for b in range(m_n):
                    p = pb[b] if pb[b] > p_floor else p_floor
                    q = p * m_n
                    term[b] = eta * (1.0 - beta) * q ** (-beta)
                f_core = _gibbs_core_nb(pos, pu, centers, term, temperature,
                                        half_alpha, r2, dist, assoc, log_z)
            for b in range(m_n):
                s = 0.0
                for u in range(u_n):
                    s += pu[u] * assoc[u, b]
                if use_lb:
                    pb[b] = (1.0 - lb_damping) * pb[b] + lb_damping * s
                else:
                    pb[b] = s
            f = f_core
            if use_lb:
                for b in range(m_n):
                    p = pb[b] if pb[b] > p_floor else p_floor
                    q = p * m_n
                    f += eta * beta / m_n * q ** (1.0 - beta)
            f_hist[n] = f
            n += 1
            # Fixed-point center proposal with weights d**(1 - 2/alpha).
            for b in range(m_n):
                num_x = 0.0
                num_y = 0.0
                den = 0.0
                for u in range(u_n):
                    d = dist[u, b]
                    g = d ** g_exp if d > 0.0 else EPS_WEIGHT
                    w = pu[u] * assoc[u, b] * g
                    num_x += w * pos[u, 0]
                    num_y += w * pos[u, 1]
                    den += w
                if den > MIN_BEAM_WEIGHT:
                    proposed[b, 0] = num_x / den
                    proposed[b, 1] = num_y / den
                else:
                    proposed[b, 0] = centers[b, 0]
                    proposed[b, 1] = centers[b, 1]
            # The proposal overshoots for steep alpha; halve the step until
            # the free energy at the shifted centers stops increasing.
            step = 1.0
            accepted = False
            while True:
                for b in range(m_n):
                    cand[b, 0] = centers[b, 0] + step * (proposed[b, 0] - centers[b, 0])
                    cand[b, 1] = centers[b, 1] + step * (proposed[b, 1] - centers[b, 1])
                cand_f = _gibbs_core_nb(pos, pu, cand, term, temperature,
                                        half_alpha, r2, cand_dist, cand_assoc,
                                        cand_log_z)
                if cand_f <= f_core:
                    accepted = True
                    break
                step *= 0.5
                if step < MIN_BACKTRACK_STEP:
                    break
            if not accepted:
                break
            move = 0.0
            for b in range(m_n):
                dx = cand[b, 0] - centers[b, 0]
                dy = cand[b, 1] - centers[b, 1]
                mv = math.sqrt(dx * dx + dy * dy)
                if mv > move:
                    move = mv
                centers[b, 0] = cand[b, 0]
                centers[b, 1] = cand[b, 1]
            for u in range(u_n):
                log_z[u] = cand_log_z[u]
                for b in range(m_n):
                    dist[u, b] = cand_dist[u, b]
                    assoc[u, b] = cand_assoc[u, b]
            f_core = cand_f
            if move < tol_km:
                break
        # Final associations consistent with the final centers.
        if use_lb:
            for b in range(m_n):
                p = pb[b] if pb[b] > p_floor else p_floor
                q = p * m_n
                term[b] = eta * (1.0 - beta) * q ** (-beta)
        f_core = _gibbs_core_nb(pos, pu, centers, term, temperature,
                                half_alpha, r2, dist, assoc, log_z)
        for b in range(m_n):
            s = 0.0
            for u in range(u_n):
                s += pu[u] * assoc[u, b]
            if use_lb:
                pb[b] = (1.0 - lb_damping) * pb[b] + lb_damping * s
            else:
                pb[b] = s
        f = f_core
        if use_lb:
            for b in range(m_n):
                p = pb[b] if pb[b] > p_floor else p_floor
                q = p * m_n
                f += eta * beta / m_n * q ** (1.0 - beta)
        f_hist[n] = f
        n += 1
        return centers, assoc, pb, f_hist[:n].copy()


def anneal_inner(pos, pu, centers, temperature, alpha, r_max,
                 use_lb=False, eta=0.5, beta=10.0, p_floor=1e-6,
                 lb_damping=0.1, pb=None, max_iters=100, tol_km=1e-4):
    """Alternate Gibbs/center updates at fixed temperature until convergence.

    Returns (centers, assoc, beam_marginals, free_energy_history). The last
    history entry is the free energy at the returned centers/associations.
    """
    pos = np.ascontiguousarray(pos, dtype=float)
    pu = np.ascontiguousarray(pu, dtype=float)
    centers = np.ascontiguousarray(centers, dtype=float).copy()
    if pb is None:
        pb = np.full(len(centers), 1.0 / len(centers))
    pb = np.ascontiguousarray(pb, dtype=float).copy()
    args = (pos, pu, centers, float(temperature), float(alpha), float(r_max),
            bool(use_lb), float(eta), float(beta), float(p_floor),
            float(lb_damping), pb, int(max_iters), float(tol_km))
    if BACKEND == "numba":
        return _anneal_inner_nb(*args)
    return _anneal_inner_numpy(*args)
