"""Eigenvalues of step kernels, the spectrum space and its metric.

A step kernel with block widths ``w`` acts on step functions like the matrix
``values @ diag(w)``; its nonzero spectrum is that of the symmetric matrix
``D^{1/2} values D^{1/2}`` with ``D = diag(w)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .errors import NonConvergence
from .kernel import StepKernel, common_refinement, hs_norm_sq

__all__ = [
    "Spectrum",
    "eig_symmetric",
    "kernel_matrix",
    "spectrum_of_kernel",
    "spectrum_distance",
    "trace_moment",
    "weyl_gap",
    "semicircle_cdf",
    "semicircle_check",
]


@njit(cache=True)
def _jacobi(a, tol, max_sweeps):
    """Cyclic Jacobi sweeps on ``a`` in place; returns the sweep count or -1."""
    n = a.shape[0]
    for sweep in range(max_sweeps + 1):
        off = 0.0
        for p in range(n):
            for q in range(p + 1, n):
                off += a[p, q] * a[p, q]
        if math.sqrt(2.0 * off) <= tol:
            return sweep
        if sweep == max_sweeps:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                if abs(theta) > 1e150:
                    t = 0.5 / theta
                else:
                    t = 1.0 / (abs(theta) + math.sqrt(theta * theta + 1.0))
                    if theta < 0:
                        t = -t
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                for k in range(n):
                    akp = a[k, p]
                    akq = a[k, q]
                    a[k, p] = c * akp - s * akq
                    a[k, q] = s * akp + c * akq
                for k in range(n):
                    apk = a[p, k]
                    aqk = a[q, k]
                    a[p, k] = c * apk - s * aqk
                    a[q, k] = s * apk + c * aqk
                a[p, q] = 0.0
                a[q, p] = 0.0
    return -1


def eig_symmetric(mat, method: str = "jacobi", max_sweeps: int = 100) -> np.ndarray:
    """All eigenvalues of a symmetric matrix, ascending.

    ``method="jacobi"`` runs cyclic Jacobi rotations until the off-diagonal
    Frobenius norm drops below ``1e-12 * ||mat||_F``; ``method="lapack"`` defers
    to :func:`numpy.linalg.eigvalsh`.
    """
    a = np.array(mat, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("expected a square matrix")
    if not np.all(np.isfinite(a)):
        raise NonConvergence("matrix has non-finite entries")
    if method == "lapack":
        return np.linalg.eigvalsh(a)
    if method != "jacobi":
        raise ValueError(f"unknown method {method!r}")
    a = 0.5 * (a + a.T)
    tol = 1e-12 * np.linalg.norm(a)
    if _jacobi(a, tol, max_sweeps) < 0:
        raise NonConvergence(f"Jacobi did not converge in {max_sweeps} sweeps")
    return np.sort(np.diag(a))


@dataclass(frozen=True)
class Spectrum:
    """A finite signed eigenvalue multiset.

    ``positives`` are decreasing, ``negatives`` are increasing (decreasing in
    absolute value); both are implicitly padded with zeros.
    """

    positives: tuple[float, ...] = ()
    negatives: tuple[float, ...] = ()

    def __post_init__(self):
        pos = tuple(sorted((float(x) for x in self.positives), reverse=True))
        neg = tuple(sorted(float(x) for x in self.negatives))
        if any(x <= 0 for x in pos) or any(x >= 0 for x in neg):
            raise ValueError("positives must be > 0 and negatives < 0")
        object.__setattr__(self, "positives", pos)
        object.__setattr__(self, "negatives", neg)

    @classmethod
    def from_eigenvalues(cls, eigs, zero_tol: float = 1e-12) -> "Spectrum":
        """Split eigenvalues by sign, dropping those within ``zero_tol`` of 0.

        The threshold is relative to ``max(1, max |eig|)``.
        """
        e = np.asarray(eigs, dtype=float).ravel()
        cut = zero_tol * max(1.0, float(np.max(np.abs(e), initial=0.0)))
        return cls(tuple(e[e > cut]), tuple(e[e < -cut]))

    @property
    def eigenvalues(self) -> tuple[float, ...]:
        return self.positives + self.negatives

    @property
    def rank(self) -> int:
        return len(self.positives) + len(self.negatives)

    def to_dict(self) -> dict:
        return {"eigenvalues": list(self.eigenvalues)}

    @classmethod
    def from_dict(cls, d) -> "Spectrum":
        eigs = d["eigenvalues"] if isinstance(d, dict) else d
        return cls.from_eigenvalues(np.asarray(eigs, dtype=float), zero_tol=0.0)


def kernel_matrix(k: StepKernel) -> np.ndarray:
    """The symmetric matrix ``D^{1/2} values D^{1/2}`` carrying the spectrum."""
    s = np.sqrt(k.widths)
    return s[:, None] * k.values * s[None, :]


def spectrum_of_kernel(
    k: StepKernel, zero_tol: float = 1e-12, method: str = "jacobi"
) -> Spectrum:
    return Spectrum.from_eigenvalues(eig_symmetric(kernel_matrix(k), method), zero_tol)


def _dyadic_sum(u, v):
    n = max(len(u), len(v))
    a = np.zeros(n)
    b = np.zeros(n)
    a[: len(u)] = u
    b[: len(v)] = v
    return float(np.sum(np.abs(a - b) / 2.0 ** np.arange(2, n + 2)))


def spectrum_distance(s1: Spectrum, s2: Spectrum) -> float:
    """Sum over ranks j >= 1 of ``|u_j - v_j| / 2^(j+1)``, each sign class apart."""
    return _dyadic_sum(s1.positives, s2.positives) + _dyadic_sum(
        s1.negatives, s2.negatives
    )


def trace_moment(k: StepKernel, power: int) -> float:
    """``∫ k(x1,x2) k(x2,x3) ... k(xp,x1)``, i.e. the sum of eigenvalue powers.

    Computed as the trace of a matrix power, without eigen-decomposition.
    """
    if power < 2:
        raise ValueError("power must be >= 2")
    return float(np.trace(np.linalg.matrix_power(kernel_matrix(k), power)))


def _padded_gap(u, v):
    n = max(len(u), len(v))
    if n == 0:
        return 0.0
    a = np.zeros(n)
    b = np.zeros(n)
    a[: len(u)] = u
    b[: len(v)] = v
    return float(np.max(np.abs(a - b)))


def weyl_gap(a: StepKernel, b: StepKernel, zero_tol: float = 1e-12) -> tuple[float, float]:
    """``(max_j |lambda_j(A) - lambda_j(B)|, ||A - B||_HS)``.

    The j-th largest positive eigenvalues are paired (zero padded), likewise the
    negatives.
    """
    a, b = common_refinement(a, b)
    sa = spectrum_of_kernel(a, zero_tol)
    sb = spectrum_of_kernel(b, zero_tol)
    gap = max(_padded_gap(sa.positives, sb.positives),
              _padded_gap(sa.negatives, sb.negatives))
    diff = StepKernel(a.breakpoints, a.values - b.values)
    return gap, math.sqrt(hs_norm_sq(diff))


def semicircle_cdf(x, sigma: float = 1.0):
    """CDF of the semicircle law with density sqrt(4 sigma^2 - x^2) / (2 pi sigma^2)."""
    r = np.clip(np.asarray(x, dtype=float) / (2.0 * sigma), -1.0, 1.0)
    out = 0.5 + (r * np.sqrt(1.0 - r * r) + np.arcsin(r)) / np.pi
    return float(out) if out.ndim == 0 else out


def semicircle_check(eigs, sigma: float = 1.0) -> float:
    """Kolmogorov-Smirnov distance from the empirical CDF to the semicircle CDF."""
    e = np.sort(np.asarray(eigs, dtype=float).ravel())
    if e.size == 0:
        raise ValueError("need at least one eigenvalue")
    n = e.size
    f = semicircle_cdf(e, sigma)
    i = np.arange(1, n + 1)
    return float(max(np.max(i / n - f), np.max(f - (i - 1) / n)))
