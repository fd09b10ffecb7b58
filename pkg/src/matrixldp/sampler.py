"""Base and tilted random symmetric matrices and rare-event estimates.

Randomness is counter based: sample ``s`` under seed ``seed`` draws from a
Philox stream keyed by ``(seed, stream tag, s)`` and consumes one open uniform
per independent entry in row-major upper-triangle order.  A sample therefore
never depends on how many workers produced it or in which batch.
"""

from __future__ import annotations

import functools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import special

from .cutnorm import EXACT_CAP, _exact_matrix, _heuristic_matrix, _witness
from .entrylaw import EntryLaw, RateProfile, open_uniforms, tilt_for_mean
from .errors import AuditFailure, ZeroHits
from .kernel import StepKernel, _merge_breakpoints, coarse_grain, refine
from .rate import block_of
from .spectral import Spectrum, eig_symmetric, spectrum_distance

__all__ = [
    "TiltPlan",
    "RareEventEstimate",
    "build_plan",
    "stream",
    "sample_matrix",
    "sample_tilted",
    "kernel_event_log_weights",
    "spectrum_event_log_weights",
    "summarize",
    "estimate_kernel_event",
    "estimate_spectrum_event",
]

_TAG_BASE = 1
_TAG_TILTED = 2
_TAG_HEURISTIC = 3
_MASK64 = (1 << 64) - 1


def stream(seed: int, tag: int, index: int) -> np.random.Generator:
    """Independent generator for ``(seed, tag, index)``; ``index < 2**56``."""
    if not 0 <= index < 1 << 56:
        raise ValueError("sample index out of range")
    key = np.array([seed & _MASK64, (tag << 56) | index], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def _fill_symmetric(n, upper):
    x = np.empty((n, n))
    iu = np.triu_indices(n)
    x[iu] = upper
    x.T[iu] = upper
    return x


def sample_matrix(law: EntryLaw, n: int, seed: int, sample_index: int = 0) -> np.ndarray:
    """Symmetric ``n x n`` matrix with i.i.d. entries ``j >= i``."""
    if n < 1:
        raise ValueError("n must be positive")
    u = open_uniforms(stream(seed, _TAG_BASE, sample_index), n * (n + 1) // 2)
    return _fill_symmetric(n, np.asarray(law.ppf(u), dtype=float))


@dataclass(frozen=True, eq=False)
class TiltPlan:
    """Blockwise exponential tilts on the uniform q-grid.

    ``thetas[r, s]`` moves the entry law's mean to ``target.values[r, s]``.
    """

    q: int
    thetas: np.ndarray
    target: StepKernel
    profile: RateProfile
    laws: tuple = field(init=False, repr=False)
    log_mgfs: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        th = np.array(self.thetas, dtype=float)
        if th.shape != (self.q, self.q):
            raise ValueError("thetas must be q x q")
        th = 0.5 * (th + th.T)
        th.setflags(write=False)
        object.__setattr__(self, "thetas", th)
        law = self.profile.law
        laws = tuple(tuple(law.tilt(float(t)) if t != 0 else law for t in row) for row in th)
        object.__setattr__(self, "laws", laws)
        lm = np.asarray(law.log_mgf(th), dtype=float).reshape(th.shape)
        object.__setattr__(self, "log_mgfs", lm)


def build_plan(f: StepKernel, profile: RateProfile, q: int | None = None) -> TiltPlan:
    """Plan that tilts block ``(r, s)`` to the q-grid average of ``f``.

    ``q`` defaults to ``f.m``; for a uniform ``f`` this is ``f`` itself.
    """
    q = f.m if q is None else q
    g = coarse_grain(f, q)
    th = np.asarray(tilt_for_mean(profile, g.values), dtype=float).reshape(q, q)
    return TiltPlan(q, th, g, profile)


@functools.lru_cache(maxsize=64)
def _layout(n: int, q: int):
    """Upper-triangle entries grouped by their block pair."""
    iu, ju = np.triu_indices(n)
    b = block_of(np.arange(n), n, q)
    br, bs = b[iu], b[ju]
    groups = []
    for r in range(q):
        for s in range(r, q):
            idx = np.flatnonzero((br == r) & (bs == s))
            if idx.size:
                groups.append((r, s, idx))
    return groups


def sample_tilted(
    plan: TiltPlan, n: int, seed: int, sample_index: int = 0
) -> tuple[np.ndarray, float]:
    """Draw from the tilted ensemble; return the matrix and ``log dQ/dQ^g``.

    Entry ``(i, j)``, ``j >= i``, follows the tilt for blocks
    ``(block(i), block(j))``; the log ratio is
    ``-Σ_{j >= i} [theta x_ij - log M(theta)]``.
    """
    if n < plan.q:
        raise ValueError("n must be at least the plan's grid size")
    u = open_uniforms(stream(seed, _TAG_TILTED, sample_index), n * (n + 1) // 2)
    x = np.empty_like(u)
    log_ratio = 0.0
    for r, s, idx in _layout(n, plan.q):
        vals = np.asarray(plan.laws[r][s].ppf(u[idx]), dtype=float)
        x[idx] = vals
        th = plan.thetas[r, s]
        if th != 0.0:
            log_ratio -= th * math.fsum(vals) - idx.size * plan.log_mgfs[r, s]
    return _fill_symmetric(n, x), float(log_ratio)


@dataclass(frozen=True)
class RareEventEstimate:
    log_prob: float
    rate_estimate: float
    std_error_log: float
    ess: float
    n: int
    samples: int
    hit_count: int
    zero_hits: bool = False

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def summarize(log_weights, n: int) -> RareEventEstimate:
    """Reduce per-sample log weights (``-inf`` for misses), in index order."""
    lw = np.asarray(log_weights, dtype=float)
    k = lw.size
    hits = int(np.count_nonzero(np.isfinite(lw)))
    if hits == 0:
        return RareEventEstimate(-math.inf, math.inf, math.inf, 0.0, n, k, 0, True)
    s1 = special.logsumexp(lw)
    s2 = special.logsumexp(2.0 * lw)
    log_ratio = math.log(k) + s2 - 2.0 * s1  # K Σw² / (Σw)², >= 1
    ratio = math.exp(log_ratio)
    se = math.sqrt(max(ratio - 1.0, 0.0) / (k - 1)) if k > 1 else math.inf
    log_prob = float(s1 - math.log(k))
    return RareEventEstimate(
        log_prob=log_prob,
        rate_estimate=-log_prob / n**2 + 0.0,
        std_error_log=se,
        ess=float(k / ratio),
        n=n,
        samples=k,
        hit_count=hits,
    )


class _CutEvent:
    """``d_cut(embed(X), f) < delta`` on the common refinement of both grids."""

    def __init__(self, f, n, delta, seed, restarts, exact_cap, audit_fraction):
        bp = _merge_breakpoints(np.linspace(0.0, 1.0, n + 1), f.breakpoints)
        self.bp = bp
        self.n = n
        self.fine = refine(f, bp)
        mids = 0.5 * (bp[:-1] + bp[1:])
        self.rows = np.minimum((mids * n).astype(int), n - 1)
        w = np.diff(bp)
        self.ww = w[:, None] * w[None, :]
        self.delta = delta
        self.seed = seed
        self.restarts = restarts
        self.exact_cap = exact_cap
        self.audit_every = (
            max(1, round(1.0 / audit_fraction)) if audit_fraction > 0 else 0
        )

    def value(self, x, index):
        mat = (x[np.ix_(self.rows, self.rows)] - self.fine.values) * self.ww
        m = mat.shape[0]
        if m <= self.exact_cap:
            return _exact_matrix(mat)[0]
        rng = stream(self.seed, _TAG_HEURISTIC, index)
        val = _witness(self.bp, mat, _heuristic_matrix(mat, self.restarts, rng)).value
        if self.audit_every and index % self.audit_every == 0 and m <= EXACT_CAP:
            exact = _exact_matrix(mat)[0]
            if (exact < self.delta) != (val < self.delta):
                raise AuditFailure(
                    f"sample {index}: heuristic {val:.6g} vs exact {exact:.6g} "
                    f"around delta={self.delta}"
                )
        return val

    def __call__(self, x, index):
        return self.value(x, index) < self.delta


class _SpectrumEvent:
    def __init__(self, target, n, delta, method):
        self.target, self.n, self.delta, self.method = target, n, delta, method

    def __call__(self, x, index):
        eigs = eig_symmetric(x, self.method) / self.n
        return spectrum_distance(Spectrum.from_eigenvalues(eigs), self.target) < self.delta


def _log_weights(plan, n, seed, event, samples, start, workers):
    def run(indices):
        out = np.empty(len(indices))
        for t, s in enumerate(indices):
            x, lr = sample_tilted(plan, n, seed, s)
            out[t] = lr if event(x, s) else -math.inf
        return out

    idx = np.arange(start, start + samples)
    if workers > 1 and samples > 1:
        chunks = np.array_split(idx, min(samples, 8 * workers))
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(run, chunks))
        return np.concatenate(parts)
    return run(idx)


def kernel_event_log_weights(
    plan: TiltPlan,
    f: StepKernel,
    delta: float,
    n: int,
    samples: int,
    seed: int,
    start: int = 0,
    workers: int = 1,
    restarts: int = 8,
    exact_cap: int = 16,
    audit_fraction: float = 0.01,
) -> np.ndarray:
    """Log weight of each tilted sample in the cut ball (``-inf`` outside).

    Samples ``start .. start + samples - 1`` are drawn, so consecutive batches
    concatenate to one larger batch.
    """
    if not delta > 0:
        raise ValueError("delta must be positive")
    event = _CutEvent(f, n, delta, seed, restarts, exact_cap, audit_fraction)
    return _log_weights(plan, n, seed, event, samples, start, workers)


def spectrum_event_log_weights(
    plan: TiltPlan,
    target: Spectrum,
    delta: float,
    n: int,
    samples: int,
    seed: int,
    start: int = 0,
    workers: int = 1,
    method: str = "jacobi",
) -> np.ndarray:
    if not delta > 0:
        raise ValueError("delta must be positive")
    event = _SpectrumEvent(target, n, delta, method)
    return _log_weights(plan, n, seed, event, samples, start, workers)


def _finish(lw, n):
    est = summarize(lw, n)
    if est.zero_hits:
        raise ZeroHits(est)
    return est


def estimate_kernel_event(
    law: EntryLaw,
    f: StepKernel,
    delta: float,
    n: int,
    samples: int,
    seed: int,
    plan: TiltPlan | None = None,
    workers: int = 1,
    **event_options,
) -> RareEventEstimate:
    """Importance-sampling estimate of ``P[d_cut(k_X, f) < delta]``.

    The default plan tilts toward the block averages of ``f`` on its own grid.
    Raises :class:`ZeroHits` (carrying the degenerate estimate) when no
    sample lands in the ball.
    """
    if plan is None:
        plan = build_plan(f, RateProfile(law))
    lw = kernel_event_log_weights(plan, f, delta, n, samples, seed, workers=workers,
                                  **event_options)
    return _finish(lw, n)


def estimate_spectrum_event(
    law: EntryLaw,
    target: Spectrum,
    delta: float,
    n: int,
    samples: int,
    seed: int,
    plan: TiltPlan | None = None,
    workers: int = 1,
    method: str = "jacobi",
) -> RareEventEstimate:
    """Importance-sampling estimate of ``P[d(S(X / n), target) < delta]``.

    Without a plan, the minimizer from :func:`matrixldp.jsolve.solve_j` on the
    smallest grid that carries the target is used as the tilt target.
    """
    if plan is None:
        from .jsolve import JProblem, solve_j

        profile = RateProfile(law)
        _, k_star, _ = solve_j(JProblem(target, max(1, target.rank), profile), seed)
        plan = build_plan(k_star, profile)
    lw = spectrum_event_log_weights(plan, target, delta, n, samples, seed,
                                    workers=workers, method=method)
    return _finish(lw, n)
