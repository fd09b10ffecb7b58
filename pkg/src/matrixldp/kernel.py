"""Symmetric step kernels on the unit square.

A :class:`StepKernel` is constant on the blocks ``J_i x J_j`` of an interval
partition ``0 = t_0 < t_1 < ... < t_m = 1``.  Blocks are half-open
``[t_{i-1}, t_i)`` with the last one closed.  Kernels are immutable: every
operation returns a new value.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import AsymmetricInput, NonUniformGrid

__all__ = [
    "StepKernel",
    "embed_matrix",
    "coarse_grain",
    "truncate",
    "common_refinement",
    "refine",
    "blow_up",
    "apply_permutation",
    "rearrange",
    "hs_norm_sq",
    "l1_norm",
    "load_kernel",
    "save_kernel",
    "kernel_to_csv",
    "lcm_grid",
]

_BP_TOL = 1e-12


def _frozen(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class StepKernel:
    breakpoints: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        t = _frozen(self.breakpoints)
        v = _frozen(self.values)
        if t.ndim != 1 or t.size < 2:
            raise ValueError("breakpoints must be a 1-d array with at least 2 entries")
        if t[0] != 0.0 or t[-1] != 1.0:
            raise ValueError("breakpoints must start at 0 and end at 1")
        if np.any(np.diff(t) <= 0):
            raise ValueError("breakpoints must be strictly increasing")
        m = t.size - 1
        if v.shape != (m, m):
            raise ValueError(f"values must be {m}x{m}, got {v.shape}")
        if not np.array_equal(v, v.T):
            raise AsymmetricInput("kernel values must be exactly symmetric")
        object.__setattr__(self, "breakpoints", t)
        object.__setattr__(self, "values", v)

    @classmethod
    def uniform(cls, values) -> "StepKernel":
        """Kernel on the uniform grid of size ``len(values)``."""
        v = np.asarray(values, dtype=float)
        return cls(np.linspace(0.0, 1.0, v.shape[0] + 1), v)

    @classmethod
    def constant(cls, c: float) -> "StepKernel":
        return cls(np.array([0.0, 1.0]), np.array([[float(c)]]))

    @property
    def m(self) -> int:
        return self.values.shape[0]

    @property
    def widths(self) -> np.ndarray:
        """Block lengths; exactly ``1/m`` each on a uniform grid."""
        if self.is_uniform:
            return np.full(self.m, 1.0 / self.m)
        return np.diff(self.breakpoints)

    @property
    def is_uniform(self) -> bool:
        d = np.diff(self.breakpoints)
        return bool(np.all(np.abs(d - 1.0 / self.m) <= _BP_TOL))

    @property
    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.values)))

    def weighted(self) -> np.ndarray:
        """The matrix ``w_i w_j values[i, j]``: block integrals of the kernel."""
        w = self.widths
        return w[:, None] * self.values * w[None, :]

    def __eq__(self, other):
        if not isinstance(other, StepKernel):
            return NotImplemented
        return np.array_equal(self.breakpoints, other.breakpoints) and np.array_equal(
            self.values, other.values
        )

    def __hash__(self):
        return hash((self.breakpoints.tobytes(), self.values.tobytes()))

    def __repr__(self):
        return f"StepKernel(m={self.m}, uniform={self.is_uniform})"

    def __neg__(self):
        return StepKernel(self.breakpoints, -self.values)

    def __mul__(self, c):
        return StepKernel(self.breakpoints, float(c) * self.values)

    __rmul__ = __mul__

    def __add__(self, other):
        a, b = common_refinement(self, other)
        return StepKernel(a.breakpoints, a.values + b.values)

    def __sub__(self, other):
        a, b = common_refinement(self, other)
        return StepKernel(a.breakpoints, a.values - b.values)

    def to_dict(self) -> dict:
        return {"breakpoints": self.breakpoints.tolist(), "values": self.values.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "StepKernel":
        return cls(np.asarray(d["breakpoints"]), np.asarray(d["values"]))


def embed_matrix(x) -> StepKernel:
    """Map a symmetric n x n matrix to the step kernel on the uniform n-grid.

    The kernel's nonzero operator spectrum is ``eig(x) / n``.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim != 2 or x.shape[0] != x.shape[1]:
        raise ValueError("expected a square matrix")
    if np.max(np.abs(x - x.T), initial=0.0) > 0:
        raise AsymmetricInput("matrix is not symmetric")
    return StepKernel.uniform(x)


def _overlaps(src, dst):
    """``P[i, r] = |[src_{i-1}, src_i] ∩ [dst_{r-1}, dst_r]|``."""
    lo = np.maximum(src[:-1, None], dst[None, :-1])
    hi = np.minimum(src[1:, None], dst[None, 1:])
    return np.maximum(hi - lo, 0.0)


def coarse_grain(k: StepKernel, q: int) -> StepKernel:
    """Block averages of ``k`` over the uniform q-grid (exact overlap areas)."""
    if q < 1:
        raise ValueError("q must be a positive integer")
    grid = np.linspace(0.0, 1.0, q + 1)
    p = _overlaps(k.breakpoints, grid)
    g = q * q * (p.T @ k.values @ p)
    return StepKernel(grid, 0.5 * (g + g.T))


def truncate(k: StepKernel, ell: float) -> tuple[StepKernel, float]:
    """Apply f_ell blockwise; also return ``delta = ∫∫ |f_ell(k) - k|^2``."""
    if not ell > 0:
        raise ValueError("ell must be positive")
    clipped = np.clip(k.values, -ell, ell)
    w = k.widths
    delta = float(np.sum(w[:, None] * (k.values - clipped) ** 2 * w[None, :]))
    return StepKernel(k.breakpoints, clipped), delta


def _merge_breakpoints(*bps):
    merged = np.unique(np.concatenate(bps))
    keep = [0]
    for i in range(1, merged.size):
        if merged[i] - merged[keep[-1]] > _BP_TOL:
            keep.append(i)
    out = merged[keep]
    out[-1] = 1.0
    return out


def refine(k: StepKernel, breakpoints) -> StepKernel:
    """Re-express ``k`` on a finer partition (every old breakpoint must appear)."""
    bp = np.asarray(breakpoints, dtype=float)
    mids = 0.5 * (bp[:-1] + bp[1:])
    idx = np.searchsorted(k.breakpoints, mids, side="right") - 1
    idx = np.clip(idx, 0, k.m - 1)
    return StepKernel(bp, k.values[np.ix_(idx, idx)])


def common_refinement(k1: StepKernel, k2: StepKernel) -> tuple[StepKernel, StepKernel]:
    """Both kernels on the union of their breakpoints.

    Breakpoints closer than 1e-12 are identified.
    """
    if np.array_equal(k1.breakpoints, k2.breakpoints):
        return k1, k2
    bp = _merge_breakpoints(k1.breakpoints, k2.breakpoints)
    return refine(k1, bp), refine(k2, bp)


def blow_up(k: StepKernel, factor: int) -> StepKernel:
    """Split every block into ``factor`` equal sub-blocks (same function)."""
    if k.is_uniform:
        bp = np.linspace(0.0, 1.0, k.m * factor + 1)
    else:
        t = k.breakpoints
        fine = (t[:-1, None] + np.outer(np.diff(t), np.arange(factor) / factor)).ravel()
        bp = np.append(fine, 1.0)
    return StepKernel(bp, np.repeat(np.repeat(k.values, factor, 0), factor, 1))


def apply_permutation(k: StepKernel, sigma) -> StepKernel:
    """The action ``values[i][j] <- values[sigma[i]][sigma[j]]`` (0-based).

    Only defined on uniform grids; ``apply_permutation(apply_permutation(k, s), t)``
    equals ``apply_permutation(k, s[t])``.
    """
    sigma = np.asarray(sigma, dtype=int)
    if not k.is_uniform:
        raise NonUniformGrid("block permutations need equal-width blocks")
    if sorted(sigma.tolist()) != list(range(k.m)):
        raise ValueError("sigma is not a permutation of the blocks")
    return StepKernel(k.breakpoints, k.values[np.ix_(sigma, sigma)])


def rearrange(k: StepKernel, order) -> StepKernel:
    """Lay the blocks out in ``order``, carrying their widths along.

    This is the interval-exchange map, measure preserving for any widths; on a
    uniform grid it coincides with :func:`apply_permutation`.
    """
    order = np.asarray(order, dtype=int)
    if sorted(order.tolist()) != list(range(k.m)):
        raise ValueError("order is not a permutation of the blocks")
    bp = np.concatenate([[0.0], np.cumsum(k.widths[order])])
    bp[-1] = 1.0
    return StepKernel(bp, k.values[np.ix_(order, order)])


def hs_norm_sq(k: StepKernel) -> float:
    """Squared Hilbert-Schmidt (L2) norm."""
    w = k.widths
    return float(np.sum(w[:, None] * k.values**2 * w[None, :]))


def l1_norm(k: StepKernel) -> float:
    w = k.widths
    return float(np.sum(w[:, None] * np.abs(k.values) * w[None, :]))


def save_kernel(k: StepKernel, path) -> None:
    Path(path).write_text(json.dumps(k.to_dict()) + "\n")


def load_kernel(path) -> StepKernel:
    return StepKernel.from_dict(json.loads(Path(path).read_text()))


def kernel_to_csv(k: StepKernel) -> str:
    """Blocks as rows ``i, j, t_lo_i, t_hi_i, t_lo_j, t_hi_j, value``."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["i", "j", "t_lo_i", "t_hi_i", "t_lo_j", "t_hi_j", "value"])
    t = k.breakpoints
    for i in range(k.m):
        for j in range(k.m):
            w.writerow([i, j, repr(t[i]), repr(t[i + 1]), repr(t[j]), repr(t[j + 1]),
                        repr(float(k.values[i, j]))])
    return buf.getvalue()


def lcm_grid(*ks: StepKernel) -> list[StepKernel]:
    """Blow uniform kernels up to a common uniform grid (lcm of sizes)."""
    if not all(k.is_uniform for k in ks):
        raise NonUniformGrid("lcm refinement needs uniform grids")
    m = math.lcm(*(k.m for k in ks))
    return [blow_up(k, m // k.m) if k.m != m else k for k in ks]
