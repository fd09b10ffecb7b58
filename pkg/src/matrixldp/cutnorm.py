"""Cut distance between step kernels.

For kernels that are step functions on a common partition, the supremum over
Borel rectangles may be restricted to unions of blocks, which turns the cut
distance into a maximization of ``|a^T M b|`` over 0/1 vectors ``a, b`` with
``M[i, j] = w_i w_j (k1 - k2)[i, j]``.  For a fixed ``a`` the best ``b`` is a
sign threshold of ``a^T M``, so exhaustive search only has to enumerate ``a``.

Block indices in witnesses are 0-based and refer to the common refinement,
whose breakpoints the witness carries.
"""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from numba import njit

from .errors import NonUniformGrid, TooLarge
from .kernel import StepKernel, common_refinement, lcm_grid, refine

__all__ = [
    "CutWitness",
    "cut_distance_exact",
    "cut_distance_heuristic",
    "cut_distance",
    "quotient_cut_distance",
    "witness_value",
    "EXACT_CAP",
]

EXACT_CAP = 24


@dataclass(frozen=True)
class CutWitness:
    """Block sets ``A, B`` achieving ``value = |∫_{A x B} (k1 - k2)|``."""

    set_a: tuple[int, ...]
    set_b: tuple[int, ...]
    value: float
    breakpoints: tuple[float, ...]

    def to_dict(self) -> dict:
        return {"A": list(self.set_a), "B": list(self.set_b), "value": self.value}


def _difference(k1: StepKernel, k2: StepKernel):
    a, b = common_refinement(k1, k2)
    w = a.widths
    return a.breakpoints, w[:, None] * (a.values - b.values) * w[None, :]


def _mask(indicator) -> int:
    return sum(1 << int(i) for i in np.flatnonzero(indicator))


def _best_side(c):
    """Best 0/1 partner for the linear forms in the rows of ``c``.

    Returns ``(indicator, value)`` where the indicator selects the positive or
    the negative entries, whichever has the larger absolute sum.
    """
    pos = np.where(c > 0, c, 0.0).sum(axis=-1)
    neg = -np.where(c < 0, c, 0.0).sum(axis=-1)
    take_pos = pos >= neg
    ind = np.where(take_pos[..., None], c > 0, c < 0)
    return ind, np.maximum(pos, neg)


def _witness(bp, mat, a_ind) -> CutWitness:
    """Complete ``A`` with its optimal ``B``; ties go to the smaller bitmask."""
    a = a_ind.astype(float)
    c = a @ mat
    pos_set, neg_set = c > 0, c < 0
    pos, neg = c[pos_set].sum(), -c[neg_set].sum()
    if pos > neg or (pos == neg and _mask(pos_set) <= _mask(neg_set)):
        b_ind = pos_set
    else:
        b_ind = neg_set
    value = abs(float(a @ mat @ b_ind.astype(float)))
    return CutWitness(
        tuple(np.flatnonzero(a_ind).tolist()),
        tuple(np.flatnonzero(b_ind).tolist()),
        value,
        tuple(bp.tolist()),
    )


@njit(cache=True, nogil=True)
def _gray_scan(mat, hi_start, hi_stop, lo_bits, tol):
    """Best row set among those whose high bits lie in ``[hi_start, hi_stop)``.

    The low ``lo_bits`` bits are walked in Gray-code order so each step adds or
    removes one row of ``mat``.  Among values within ``tol`` of the best, the
    smallest bitmask wins.
    """
    m = mat.shape[0]
    c = np.empty(m)
    best_val = -1.0
    best_mask = 0
    for h in range(hi_start, hi_stop):
        for j in range(m):
            c[j] = 0.0
        for i in range(lo_bits, m):
            if (h >> (i - lo_bits)) & 1:
                for j in range(m):
                    c[j] += mat[i, j]
        for t in range(1 << lo_bits):
            g = t ^ (t >> 1)
            if t > 0:
                bit = 0
                while not (t >> bit) & 1:
                    bit += 1
                sign = 1.0 if (g >> bit) & 1 else -1.0
                for j in range(m):
                    c[j] += sign * mat[bit, j]
            pos = 0.0
            neg = 0.0
            for j in range(m):
                if c[j] > 0:
                    pos += c[j]
                else:
                    neg -= c[j]
            val = pos if pos > neg else neg
            mask = (h << lo_bits) | g
            if val > best_val + tol or (val >= best_val - tol and mask < best_mask):
                best_val = val
                best_mask = mask
    return best_val, best_mask


def _exact_matrix(mat, cap=EXACT_CAP, workers=1):
    """Exhaustive maximum over all ``2^m`` row sets; returns (value, A bitmask).

    Ties (within a relative 1e-12) resolve to the smallest bitmask, i.e. the
    first maximizer in binary-counter order, whatever ``workers`` is.
    """
    m = mat.shape[0]
    if m > cap:
        raise TooLarge(m, cap)
    mat = np.ascontiguousarray(mat, dtype=float)
    lo_bits = min(m, 12)
    n_hi = 1 << (m - lo_bits)
    tol = 1e-12 * max(float(np.abs(mat).sum()), 1e-300)
    n_jobs = min(n_hi, 64)
    bounds = np.linspace(0, n_hi, n_jobs + 1).astype(np.int64)
    jobs = [(int(bounds[i]), int(bounds[i + 1])) for i in range(n_jobs)]
    run = lambda j: _gray_scan(mat, j[0], j[1], lo_bits, tol)  # noqa: E731
    if workers > 1 and n_jobs > 1:
        with ThreadPoolExecutor(workers) as pool:
            results = list(pool.map(run, jobs))
    else:
        results = [run(j) for j in jobs]
    best_val, best_a = -1.0, 0
    for val, a in results:
        if val > best_val + tol or (val >= best_val - tol and a < best_a):
            best_val, best_a = val, a
    return best_val, best_a


def cut_distance_exact(
    k1: StepKernel, k2: StepKernel, cap: int = EXACT_CAP, workers: int = 1
) -> tuple[float, CutWitness]:
    """Exact cut distance by enumeration over the common refinement.

    Raises :class:`TooLarge` when the refinement has more than ``cap`` blocks.
    """
    bp, mat = _difference(k1, k2)
    _, a_mask = _exact_matrix(mat, cap, workers)
    a_ind = ((a_mask >> np.arange(mat.shape[0])) & 1).astype(bool)
    w = _witness(bp, mat, a_ind)
    return w.value, w


def _heuristic_matrix(mat, restarts, rng, max_iter=200):
    """Alternating maximization from random row sets, batched over restarts.

    Besides the ``restarts`` random starts, the full set and the positive
    row-sum set are tried.  Returns the best ``A`` indicator found.
    """
    m = mat.shape[0]
    starts = [rng.random((restarts, m)) < 0.5, np.ones((1, m), bool),
              (mat.sum(axis=1) > 0)[None, :]]
    a = np.concatenate(starts).astype(float)
    best = np.full(a.shape[0], -1.0)
    best_a = a.copy()
    for _ in range(max_iter):
        b, _ = _best_side(a @ mat)
        a_new, val = _best_side(b.astype(float) @ mat)
        improved = val > best * (1 + 1e-13) + 1e-300
        if not improved.any():
            break
        best = np.where(improved, val, best)
        best_a[improved] = a_new[improved]
        a = a_new.astype(float)
    return best_a[int(np.argmax(best))].astype(bool)


def cut_distance_heuristic(
    k1: StepKernel, k2: StepKernel, restarts: int = 50, seed: int = 0, rng=None
) -> tuple[float, CutWitness]:
    """Lower bound on the cut distance from alternating block-set maximization.

    Given ``A`` the optimal ``B`` is a sign threshold and vice versa; each start
    is iterated to a fixed point and the best witness over all starts is kept.
    The returned value is achieved by its witness, so it never exceeds the
    exact distance.
    """
    if rng is None:
        rng = np.random.default_rng(seed)
    bp, mat = _difference(k1, k2)
    a_ind = _heuristic_matrix(mat, restarts, rng)
    w = _witness(bp, mat, a_ind)
    return w.value, w


def cut_distance(k1, k2, cap: int = EXACT_CAP, restarts: int = 50, seed: int = 0):
    """Exact distance when the refinement fits under ``cap``, else heuristic."""
    bp, mat = _difference(k1, k2)
    if mat.shape[0] <= cap:
        return cut_distance_exact(k1, k2, cap)
    return cut_distance_heuristic(k1, k2, restarts, seed)


def witness_value(k1: StepKernel, k2: StepKernel, witness: CutWitness) -> float:
    """Re-integrate ``k1 - k2`` over the witness rectangle."""
    bp = np.asarray(witness.breakpoints)
    a, b = refine(k1, bp), refine(k2, bp)
    w = a.widths
    mat = w[:, None] * (a.values - b.values) * w[None, :]
    ia, ib = list(witness.set_a), list(witness.set_b)
    return abs(float(mat[np.ix_(ia, ib)].sum()))


def _exact_batch(mats):
    """Exact cut norm for a stack of ``(P, m, m)`` weighted matrices."""
    m = mats.shape[-1]
    idx = np.arange(1 << m)
    bits = ((idx[:, None] >> np.arange(m)) & 1).astype(float)
    _, val = _best_side(np.einsum("am,pmn->pan", bits, mats))
    return val.max(axis=1)


def quotient_cut_distance(
    k1: StepKernel,
    k2: StepKernel,
    mode: str = "exact",
    seed: int = 0,
    restarts: int = 8,
    cap: int = 8,
    heuristic_restarts: int = 8,
) -> tuple[float, np.ndarray]:
    """``min_sigma d(sigma k1, k2)`` over block permutations of a common grid.

    Kernels of different uniform sizes are first blown up to the lcm grid.
    ``mode="exact"`` enumerates all ``m!`` permutations (``m <= cap``) with the
    exact cut distance; ``mode="local_search"`` hill-climbs over pairwise swaps
    from ``restarts`` starts (identity first), scoring with the heuristic, and
    returns an upper bound on the quotient distance.
    """
    if not (k1.is_uniform and k2.is_uniform):
        raise NonUniformGrid("quotient distance needs uniform grids")
    k1, k2 = lcm_grid(k1, k2)
    m = k1.m
    v1, v2 = k1.values, k2.values
    scale = 1.0 / (m * m)
    if mode == "exact":
        if m > cap:
            raise TooLarge(m, cap)
        best_val, best_perm = math.inf, None
        perms = itertools.permutations(range(m))
        while True:
            batch = np.array(list(itertools.islice(perms, 2048)), dtype=int)
            if batch.size == 0:
                break
            mats = scale * (v1[batch[:, :, None], batch[:, None, :]] - v2[None])
            vals = _exact_batch(mats)
            i = int(np.argmin(vals))
            if vals[i] < best_val:
                best_val, best_perm = abs(float(vals[i])), batch[i]
        return best_val, best_perm
    if mode != "local_search":
        raise ValueError(f"unknown mode {mode!r}")

    def score(perm):
        mat = scale * (v1[np.ix_(perm, perm)] - v2)
        a = _heuristic_matrix(mat, heuristic_restarts, np.random.default_rng(seed))
        return _witness(np.linspace(0, 1, m + 1), mat, a).value

    rng = np.random.default_rng(seed)
    best_val, best_perm = math.inf, None
    for r in range(restarts):
        perm = np.arange(m) if r == 0 else rng.permutation(m)
        val = score(perm)
        improved = True
        while improved:
            improved = False
            for i, j in itertools.combinations(range(m), 2):
                cand = perm.copy()
                cand[i], cand[j] = cand[j], cand[i]
                cv = score(cand)
                if cv < val - 1e-15:
                    perm, val, improved = cand, cv, True
        if val < best_val:
            best_val, best_perm = val, perm
    return best_val, best_perm
