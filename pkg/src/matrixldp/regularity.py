"""Weak regularity: low-complexity cut-norm approximants of step kernels.

The partition of the kernel's blocks into classes is refined by the two
witness sets of the current residual's cut norm until the residual is small.
Each refinement raises the energy ``||approximant||_HS^2`` by at least
``eps^2``, so at most ``ceil(l^2 / eps^2)`` steps are taken for ``|k| <= l``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .cutnorm import EXACT_CAP, _exact_matrix, _heuristic_matrix, _witness
from .cutnorm import cut_distance
from .errors import BudgetExceeded
from .kernel import StepKernel, hs_norm_sq, l1_norm, rearrange

__all__ = [
    "RegularityResult",
    "class_average",
    "weak_regularize",
    "canonicalize",
    "covering_demo",
]


@dataclass(frozen=True, eq=False)
class RegularityResult:
    """Outcome of :func:`weak_regularize`.

    ``labels[i]`` is the class of block ``i``; ``order`` lists the blocks class
    by class and ``approximant`` lives on the class widths of
    ``rearrange(k, order)``.  ``achieved_eps`` is the exact residual cut norm
    when ``certified``, otherwise the heuristic lower bound; ``upper_bound`` is
    always a valid upper bound.
    """

    labels: np.ndarray
    order: np.ndarray
    approximant: StepKernel
    achieved_eps: float
    certified: bool
    upper_bound: float
    steps: int
    energies: tuple[float, ...]

    @property
    def parts(self) -> int:
        return self.approximant.m

    def to_dict(self) -> dict:
        return {
            "partition": self.labels.tolist(),
            "order": self.order.tolist(),
            "approximant": self.approximant.to_dict(),
            "achieved_eps": self.achieved_eps,
            "certified": self.certified,
            "upper_bound": self.upper_bound,
            "steps": self.steps,
            "energies": list(self.energies),
        }


def class_average(k: StepKernel, labels):
    """``(averages, class_widths)``: the conditional mean of ``k`` on class pairs."""
    labels = np.asarray(labels, dtype=int)
    p = int(labels.max()) + 1
    ind = np.zeros((k.m, p))
    ind[np.arange(k.m), labels] = 1.0
    cw = ind.T @ k.widths
    avg = (ind.T @ k.weighted() @ ind) / np.outer(cw, cw)
    return 0.5 * (avg + avg.T), cw


def _relabel(keys):
    """Class ids in order of first appearance."""
    _, first, inv = np.unique(keys, axis=0, return_index=True, return_inverse=True)
    rank = np.argsort(np.argsort(first))
    return rank[inv.reshape(-1)]


def _finish(k, labels, avg, cw, val, certified, upper, steps, energies):
    order = np.argsort(labels, kind="stable")
    bp = np.concatenate([[0.0], np.cumsum(cw)])
    bp[-1] = 1.0
    return RegularityResult(
        labels, order, StepKernel(bp, avg), val, certified, upper, steps, tuple(energies)
    )


def weak_regularize(
    k: StepKernel,
    eps: float,
    max_parts: int = 256,
    seed: int = 0,
    cap: int = EXACT_CAP,
    restarts: int = 50,
) -> RegularityResult:
    """Refine a block partition of ``k`` until the residual cut norm is <= eps.

    Residual cut norms are exact when ``k.m <= cap`` and heuristic otherwise.
    A heuristic witness below ``eps`` ends the loop (uncertified).  Raises
    :class:`BudgetExceeded`, carrying the last result, when a refinement would
    need more than ``max_parts`` classes.
    """
    if not eps > 0:
        raise ValueError("eps must be positive")
    rng = np.random.default_rng(seed)
    exact = k.m <= cap
    labels = np.zeros(k.m, dtype=int)
    w = k.widths
    energies, steps = [], 0
    while True:
        avg, cw = class_average(k, labels)
        energies.append(float(np.sum(np.outer(cw, cw) * avg**2)))
        resid = k.values - avg[np.ix_(labels, labels)]
        mat = w[:, None] * resid * w[None, :]
        if exact:
            _, a_mask = _exact_matrix(mat, cap)
            a_ind = ((a_mask >> np.arange(k.m)) & 1).astype(bool)
        else:
            a_ind = _heuristic_matrix(mat, restarts, rng)
        wit = _witness(k.breakpoints, mat, a_ind)
        upper = wit.value if exact else float(np.abs(mat).sum())
        result = _finish(k, labels, avg, cw, wit.value, exact, upper, steps, energies)
        if wit.value <= eps:
            return result
        in_a = np.isin(np.arange(k.m), wit.set_a)
        in_b = np.isin(np.arange(k.m), wit.set_b)
        new = _relabel(np.column_stack([labels, in_a, in_b]))
        if new.max() + 1 > max_parts:
            raise BudgetExceeded(int(new.max()) + 1, wit.value, result)
        labels = new
        steps += 1


def canonicalize(approx: StepKernel) -> StepKernel:
    """Sort classes by (row average, width): a cheap stand-in for the quotient."""
    cw = approx.widths
    row_avg = approx.values @ cw
    order = np.lexsort((cw, row_avg))
    return rearrange(approx, order)


def covering_demo(kernels, ell: float, eps: float, seed: int = 0, max_parts: int = 256):
    """Greedy eps-cover of regularized, canonicalized kernels.

    Returns the representatives and, per kernel, ``(index, bound)`` where
    ``bound = achieved_eps + d(canonical approximant, representative)`` bounds
    the distance from the relabeled kernel to its representative.
    """
    reps: list[StepKernel] = []
    assignment = []
    for k in kernels:
        if k.sup_norm > ell:
            raise ValueError("kernel exceeds the bound ell")
        res = weak_regularize(k, eps, max_parts, seed)
        canon = canonicalize(res.approximant)
        best_i, best_d = -1, math.inf
        for i, r in enumerate(reps):
            d, _ = cut_distance(canon, r, seed=seed)
            if d < best_d:
                best_i, best_d = i, d
        if best_d > eps:
            reps.append(canon)
            best_i, best_d = len(reps) - 1, 0.0
        assignment.append((best_i, res.achieved_eps + best_d))
    return reps, assignment
