"""Rate functionals on step kernels.

``I(k) = 1/2 ∫∫ h(k(x, y)) dx dy`` with ``h`` the Cramér conjugate of the
entry law.  Every functional evaluates ``h`` once per distinct block value.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .entrylaw import RateProfile, cramer_rate, tilt_for_mean, truncated_rate
from .kernel import StepKernel, common_refinement

__all__ = [
    "RateReport",
    "block_rates",
    "rate_primal",
    "rate_truncated",
    "rate_dual",
    "canonical_dual",
    "rate_report",
    "relative_entropy_tilted",
    "block_of",
]


def _unique_apply(fn, values):
    u, inv = np.unique(values, return_inverse=True)
    return np.asarray(fn(u), dtype=float).reshape(-1)[inv].reshape(values.shape)


def block_rates(k: StepKernel, profile: RateProfile, ell: float | None = None):
    """``h(values[i, j])`` (or ``h_ell``) for every block."""
    if ell is None:
        return _unique_apply(lambda u: cramer_rate(profile, u), k.values)
    return _unique_apply(lambda u: truncated_rate(profile, ell, u), k.values)


def _half_integral(k: StepKernel, per_block) -> float:
    if np.isinf(per_block).any():
        return math.inf
    w = k.widths
    # fsum is exactly rounded, hence independent of block order
    return 0.5 * math.fsum((w[:, None] * per_block * w[None, :]).ravel())


def rate_primal(k: StepKernel, profile: RateProfile) -> float:
    """``1/2 Σ h(values[i, j]) w_i w_j``; ``inf`` if any block leaves the hull."""
    return _half_integral(k, block_rates(k, profile))


def rate_truncated(k: StepKernel, profile: RateProfile, ell: float) -> float:
    """As :func:`rate_primal` with ``h_ell`` (conjugate of the clipped entry)."""
    if not ell > 0:
        raise ValueError("ell must be positive")
    return _half_integral(k, block_rates(k, profile, ell))


def rate_dual(k: StepKernel, profile: RateProfile, g: StepKernel) -> float:
    """``1/2 [<k, g> - ∫∫ log M(g)]``, a lower bound on ``I(k)`` for every ``g``."""
    k, g = common_refinement(k, g)
    w = k.widths
    ww = w[:, None] * w[None, :]
    lm = _unique_apply(profile.law.log_mgf, g.values)
    return 0.5 * float(np.sum(k.values * g.values * ww) - np.sum(lm * ww))


def canonical_dual(k: StepKernel, profile: RateProfile) -> StepKernel:
    """The blockwise optimal test kernel ``g = h'(k)``.

    Needs every block value strictly inside the support hull.
    """
    g = _unique_apply(lambda u: tilt_for_mean(profile, u), k.values)
    return StepKernel(k.breakpoints, 0.5 * (g + g.T))


@dataclass(frozen=True)
class RateReport:
    primal: float
    dual: float
    gap: float
    per_block: np.ndarray

    def to_dict(self) -> dict:
        return {
            "primal": self.primal,
            "dual": self.dual,
            "gap": self.gap,
            "per_block": self.per_block.tolist(),
        }


def rate_report(
    k: StepKernel, profile: RateProfile, g: StepKernel | None = None
) -> RateReport:
    """Primal and dual values side by side.

    Without ``g`` the canonical test kernel is used when it exists; otherwise
    the dual falls back to ``g = 0``.
    """
    per_block = block_rates(k, profile)
    primal = _half_integral(k, per_block)
    if g is None:
        try:
            g = canonical_dual(k, profile)
        except Exception:
            g = StepKernel.constant(0.0)
    dual = rate_dual(k, profile, g)
    return RateReport(primal, dual, primal - dual, per_block)


def block_of(i, n: int, q: int):
    """0-based block of 0-based row ``i`` on the q-grid: ``(r-1) n < i q <= r n``."""
    return ((np.asarray(i) + 1) * q - 1) // n


def relative_entropy_tilted(plan, n: int) -> float:
    """Exact KL divergence of the tilted n x n ensemble from the base ensemble.

    Sums ``theta m(theta) - log M(theta)`` over the independent entries
    ``j >= i`` (diagonal included once), ``m`` being the tilted mean.
    """
    if n < 1:
        raise ValueError("n must be positive")
    law = plan.profile.law
    th = np.asarray(plan.thetas, dtype=float)
    per_entry = th * np.asarray(law.tilted_mean(th)) - np.asarray(law.log_mgf(th))
    c = np.bincount(block_of(np.arange(n), n, plan.q), minlength=plan.q).astype(float)
    # pairs i < j contribute c_r c_s (r != s) or c_r (c_r - 1) / 2; i == j adds c_r
    off = 0.5 * (c @ per_entry @ c - c @ np.diag(per_entry))
    return float(off + c @ np.diag(per_entry))
