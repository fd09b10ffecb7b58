"""Contracted rate ``J(S) = inf { I(k) : S(k) = S }`` on a fixed uniform grid.

Kernels are parametrized as ``values = m U diag(lam) U^T`` with ``U`` an
``m x r`` orthonormal frame, so the spectrum equals the target by
construction.  ``U`` is improved by Givens rotations of pairs of grid rows;
every rotation keeps the frame orthonormal.
"""

from __future__ import annotations

import itertools
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import optimize

from .entrylaw import RateProfile, cramer_rate
from .errors import InfeasibleGrid, NoFeasibleCandidate, NonFinite
from .kernel import StepKernel
from .rate import rate_primal
from .sampler import stream
from .spectral import Spectrum, spectrum_distance, spectrum_of_kernel

__all__ = ["JProblem", "solve_j", "descend_frame", "j_upper_bound_from_samples"]

_TAG_FRAME = 4
_INFEASIBLE = 1e6


@dataclass(frozen=True)
class JProblem:
    target: Spectrum
    m: int
    profile: RateProfile
    restarts: int = 32
    max_sweeps: int = 500
    tol: float = 1e-10
    n_angles: int = 32

    def __post_init__(self):
        if self.m < 1:
            raise ValueError("grid size must be positive")


def _objective(problem, lam, frames):
    """I of each frame in a stack ``(B, m, r)``, with a hull penalty.

    Frames whose kernel leaves the support hull score ``1e6 (1 + excess)``,
    which keeps the search moving back toward feasibility.
    """
    m = problem.m
    vals = m * np.einsum("bir,r,bjr->bij", frames, lam, frames)
    vals = 0.5 * (vals + np.swapaxes(vals, 1, 2))
    u, inv = np.unique(vals, return_inverse=True)
    h = np.asarray(cramer_rate(problem.profile, u), dtype=float)[inv.reshape(-1)]
    h = h.reshape(vals.shape)
    out = 0.5 * h.sum(axis=(1, 2)) / m**2
    bad = ~np.isfinite(out)
    if bad.any():
        lo, hi = problem.profile.law.support
        excess = np.maximum(lo - vals[bad], 0.0) + np.maximum(vals[bad] - hi, 0.0)
        out[bad] = _INFEASIBLE * (1.0 + excess.sum(axis=(1, 2)))
    return out


def _rotated(frame, p, q, angles):
    c, s = np.cos(angles), np.sin(angles)
    out = np.repeat(frame[None], len(angles), axis=0)
    out[:, p] = c[:, None] * frame[p] - s[:, None] * frame[q]
    out[:, q] = s[:, None] * frame[p] + c[:, None] * frame[q]
    return out


def descend_frame(problem: JProblem, frame) -> tuple[float, np.ndarray, list[float]]:
    """Givens coordinate descent from ``frame``.

    Each sweep visits every row pair, scans ``n_angles`` rotation angles,
    polishes the best one with a bounded scalar search, and accepts it only
    if the objective drops.  Returns the final value, frame and the
    per-sweep objective history (non-increasing).
    """
    lam = np.asarray(problem.target.eigenvalues, dtype=float)
    u = np.array(frame, dtype=float)
    m = problem.m
    val = float(_objective(problem, lam, u[None])[0])
    history = [val]
    if m < 2 or lam.size == 0:
        return val, u, history
    grid = np.linspace(-math.pi, math.pi, problem.n_angles, endpoint=False)
    step = 2 * math.pi / problem.n_angles
    for _ in range(problem.max_sweeps):
        start = val
        for p, q in itertools.combinations(range(m), 2):
            vals = _objective(problem, lam, _rotated(u, p, q, grid))
            i = int(np.argmin(vals))
            best_a, best_v = grid[i], float(vals[i])

            def f(a):
                return float(_objective(problem, lam, _rotated(u, p, q, np.array([a])))[0])

            res = optimize.minimize_scalar(
                f, bounds=(best_a - step, best_a + step), method="bounded",
                options={"xatol": 1e-10},
            )
            if res.fun < best_v:
                best_a, best_v = float(res.x), float(res.fun)
            if best_v < val:
                u = _rotated(u, p, q, np.array([best_a]))[0]
                val = best_v
        history.append(val)
        if start - val < problem.tol:
            break
    return val, u, history


def _kernel(problem, lam, u):
    vals = problem.m * (u * lam) @ u.T
    return StepKernel.uniform(0.5 * (vals + vals.T))


def solve_j(
    problem: JProblem, seed: int = 0, workers: int = 1
) -> tuple[float, StepKernel, float]:
    """Best ``(J, k_star, residual)`` over random orthonormal starting frames.

    ``residual`` is the spectrum distance between ``k_star`` and the target.
    Ties between restarts go to the lowest restart index.
    """
    lam = np.asarray(problem.target.eigenvalues, dtype=float)
    r, m = lam.size, problem.m
    if m < r:
        raise InfeasibleGrid(f"grid {m} cannot carry rank {r}")
    if r == 0:
        k = StepKernel.uniform(np.zeros((m, m)))
        return rate_primal(k, problem.profile), k, 0.0

    def run(i):
        g = stream(seed, _TAG_FRAME, i).standard_normal((m, r))
        frame, _ = np.linalg.qr(g)
        val, u, _ = descend_frame(problem, frame)
        return val, u

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            results = list(pool.map(run, range(problem.restarts)))
    else:
        results = [run(i) for i in range(problem.restarts)]
    best = min(range(len(results)), key=lambda i: (results[i][0], i))
    val, u = results[best]
    if val >= _INFEASIBLE:
        raise NonFinite("every restart left the support hull; J is infinite on this grid")
    k = _kernel(problem, lam, u)
    residual = spectrum_distance(spectrum_of_kernel(k), problem.target)
    return rate_primal(k, problem.profile), k, residual


def j_upper_bound_from_samples(
    target: Spectrum, candidates, profile: RateProfile, tol: float = 1e-6
) -> float:
    """Smallest ``I`` among candidates whose spectrum is within ``tol`` of target."""
    best = math.inf
    feasible = 0
    for i, k in enumerate(candidates):
        d = spectrum_distance(spectrum_of_kernel(k), target)
        if d > tol:
            warnings.warn(f"candidate {i} skipped: spectrum distance {d:.3g}", stacklevel=2)
            continue
        feasible += 1
        best = min(best, rate_primal(k, profile))
    if feasible == 0:
        raise NoFeasibleCandidate("no candidate has the target spectrum")
    return best
