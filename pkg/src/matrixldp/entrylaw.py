"""Entry distributions with closed-form log-MGFs, Cramér conjugates and tilts.

Every law kind exposes the cumulant generating function ``log_mgf`` together
with its first two derivatives (``tilted_mean`` and ``tilted_var``: the mean and
variance of the exponentially tilted law).  The Cramér rate

    h(x) = sup_theta [theta * x - log M(theta)]

is evaluated by solving ``tilted_mean(theta) = x`` with a safeguarded Newton
iteration, so the same solver serves every kind, including the clipped
variables used by the truncated rate.

All numeric methods accept scalars or arrays and broadcast.
"""

from __future__ import annotations

import enum
import math
import re
from abc import ABC, abstractmethod
from dataclasses import dataclass

import numpy as np
from scipy import special

from .errors import NonConvergence, OutOfHull

__all__ = [
    "EntryLaw",
    "Gaussian",
    "TwoPoint",
    "Uniform",
    "TiltedUniform",
    "PointMass",
    "TailClass",
    "RateProfile",
    "log_mgf",
    "tilt",
    "cramer_rate",
    "tilt_for_mean",
    "truncated_rate",
    "clip",
    "parse_law",
    "open_uniforms",
]


def _out(a):
    """Return a Python float for 0-d results, the array otherwise."""
    a = np.asarray(a, dtype=float)
    return float(a) if a.ndim == 0 else a


def open_uniforms(rng, size):
    """Uniform draws on the open interval (0, 1).

    ``Generator.random`` returns multiples of 2**-53 in [0, 1); shifting by half
    a step keeps inverse-CDF transforms finite.
    """
    return rng.random(size) + 2.0**-54


# exponentially tilted U(0, 1): log-MGF g(u), mean m(u), variance v(u)


def _g_unit(u):
    u = np.asarray(u, dtype=float)
    with np.errstate(all="ignore"):
        pos = u + np.log(-np.expm1(-u)) - np.log(u)
        neg = np.log(-np.expm1(u)) - np.log(-u)
        small = u / 2 + u * u / 24 - u**4 / 2880
        out = np.where(u > 0, pos, neg)
    return np.where(np.abs(u) < 1e-3, small, out)


def _m_unit(u):
    u = np.asarray(u, dtype=float)
    with np.errstate(all="ignore"):
        pos = 1.0 / (-np.expm1(-u)) - 1.0 / u
        neg = 1.0 - 1.0 / (-np.expm1(u)) - 1.0 / u
        small = 0.5 + u / 12 - u**3 / 720 + u**5 / 30240
        out = np.where(u > 0, pos, neg)
    return np.where(np.abs(u) < 1e-2, small, out)


def _v_unit(u):
    u = np.asarray(u, dtype=float)
    with np.errstate(all="ignore"):
        big = 1.0 / (u * u) - 1.0 / (4.0 * np.sinh(u / 2) ** 2)
        small = 1.0 / 12 - u * u / 240 + u**4 / 6048
    return np.maximum(np.where(np.abs(u) < 1e-2, small, big), 0.0)


def _log_ndtr_diff(a, b):
    """log(Phi(b) - Phi(a)) for a < b, stable in both tails."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    with np.errstate(all="ignore"):
        lower = special.log_ndtr(b) + np.log1p(
            -np.exp(special.log_ndtr(a) - special.log_ndtr(b))
        )
        upper = special.log_ndtr(-a) + np.log1p(
            -np.exp(special.log_ndtr(-b) - special.log_ndtr(-a))
        )
    return np.where(a > 0, upper, lower)


class TailClass(enum.Enum):
    """Which Gaussian-tail integrability condition a law satisfies.

    ``ALL_THETA``: E exp(theta X^2) finite for every theta > 0 (full LDP).
    ``SOME_THETA``: finite for some theta > 0 only (lower bound only).
    """

    ALL_THETA = "all_theta"
    SOME_THETA = "some_theta"
    NONE = "none"


class EntryLaw(ABC):
    """Common interface of the supported entry distributions."""

    @abstractmethod
    def log_mgf(self, theta): ...

    @abstractmethod
    def tilted_mean(self, theta):
        """Derivative of ``log_mgf``: the mean of the law tilted by theta."""

    @abstractmethod
    def tilted_var(self, theta):
        """Second derivative of ``log_mgf``."""

    @abstractmethod
    def tilt(self, theta) -> "EntryLaw": ...

    @abstractmethod
    def ppf(self, u): ...

    @property
    @abstractmethod
    def support(self) -> tuple[float, float]:
        """Closed convex hull ``(lo, hi)`` of the support (may be infinite)."""

    @abstractmethod
    def endpoint_log_mass(self, x: float) -> float:
        """Log of the atom at a hull endpoint; ``-inf`` when there is none."""

    @abstractmethod
    def _clip_pieces(self, ell: float) -> list: ...

    @property
    def mean(self) -> float:
        return float(self.tilted_mean(0.0))

    @property
    def variance(self) -> float:
        return float(self.tilted_var(0.0))

    @property
    def tail_class(self) -> TailClass:
        lo, hi = self.support
        if math.isfinite(lo) and math.isfinite(hi):
            return TailClass.ALL_THETA
        return TailClass.SOME_THETA

    def sample(self, rng, size=None):
        return self.ppf(open_uniforms(rng, size))


@dataclass(frozen=True)
class Gaussian(EntryLaw):
    sigma: float = 1.0
    mu: float = 0.0

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")

    def __str__(self):
        if self.mu == 0.0:
            return f"gaussian(sigma={self.sigma!r})"
        return f"gaussian(sigma={self.sigma!r}, mu={self.mu!r})"

    def log_mgf(self, theta):
        t = np.asarray(theta, dtype=float)
        return _out(self.mu * t + 0.5 * self.sigma**2 * t * t)

    def tilted_mean(self, theta):
        return _out(self.mu + self.sigma**2 * np.asarray(theta, dtype=float))

    def tilted_var(self, theta):
        t = np.asarray(theta, dtype=float)
        return _out(np.full_like(t, self.sigma**2))

    def tilt(self, theta):
        if theta == 0:
            return self
        return Gaussian(self.sigma, self.mu + theta * self.sigma**2)

    def ppf(self, u):
        return _out(self.mu + self.sigma * special.ndtri(u))

    @property
    def support(self):
        return (-math.inf, math.inf)

    def endpoint_log_mass(self, x):
        return -math.inf

    def _clip_pieces(self, ell):
        lo_mass = special.log_ndtr((-ell - self.mu) / self.sigma)
        hi_mass = special.log_ndtr((self.mu - ell) / self.sigma)
        return [
            _Atom(-ell, float(lo_mass)),
            _NormalPiece(self.mu, self.sigma, -ell, ell),
            _Atom(ell, float(hi_mass)),
        ]


@dataclass(frozen=True)
class TwoPoint(EntryLaw):
    """``P(X = b) = p``, ``P(X = a) = 1 - p`` with ``a < b``."""

    a: float = -1.0
    b: float = 1.0
    p: float = 0.5

    def __post_init__(self):
        if not self.a < self.b:
            raise ValueError("two_point needs a < b")
        if not 0.0 < self.p < 1.0:
            raise ValueError("two_point needs 0 < p < 1")

    def __str__(self):
        return f"twopoint(a={self.a!r}, b={self.b!r}, p={self.p!r})"

    def _s(self, theta):
        return math.log(self.p) - math.log1p(-self.p) + np.asarray(
            theta, dtype=float
        ) * (self.b - self.a)

    def log_mgf(self, theta):
        t = np.asarray(theta, dtype=float)
        d = self.b - self.a
        return _out(
            t * self.a + np.logaddexp(math.log1p(-self.p), math.log(self.p) + t * d)
        )

    def tilted_mean(self, theta):
        return _out(self.a + (self.b - self.a) * special.expit(self._s(theta)))

    def tilted_var(self, theta):
        s = self._s(theta)
        d = self.b - self.a
        return _out(d * d * special.expit(s) * special.expit(-s))

    def tilt(self, theta):
        if theta == 0:
            return self
        p = float(special.expit(self._s(theta)))
        p = min(max(p, 5e-324), math.nextafter(1.0, 0.0))
        return TwoPoint(self.a, self.b, p)

    def ppf(self, u):
        u = np.asarray(u, dtype=float)
        return _out(np.where(u < 1.0 - self.p, self.a, self.b))

    @property
    def support(self):
        return (self.a, self.b)

    def endpoint_log_mass(self, x):
        if x == self.a:
            return math.log1p(-self.p)
        if x == self.b:
            return math.log(self.p)
        return -math.inf

    def _clip_pieces(self, ell):
        return [
            _Atom(min(max(self.a, -ell), ell), math.log1p(-self.p)),
            _Atom(min(max(self.b, -ell), ell), math.log(self.p)),
        ]


@dataclass(frozen=True)
class TiltedUniform(EntryLaw):
    """Density proportional to ``exp(theta * x)`` on ``[a, b]``.

    Produced by tilting :class:`Uniform`; ``theta = 0`` is the uniform law.
    """

    a: float = 0.0
    b: float = 1.0
    theta: float = 0.0

    def __post_init__(self):
        if not self.a < self.b:
            raise ValueError("uniform needs a < b")

    def __str__(self):
        return f"tilteduniform(a={self.a!r}, b={self.b!r}, theta={self.theta!r})"

    @property
    def _width(self):
        return self.b - self.a

    def _base(self, s):
        # log-MGF of U(a, b) at s
        s = np.asarray(s, dtype=float)
        return self.a * s + _g_unit(s * self._width)

    def log_mgf(self, theta):
        t = np.asarray(theta, dtype=float)
        return _out(self._base(t + self.theta) - self._base(self.theta))

    def tilted_mean(self, theta):
        s = np.asarray(theta, dtype=float) + self.theta
        return _out(self.a + self._width * _m_unit(s * self._width))

    def tilted_var(self, theta):
        s = np.asarray(theta, dtype=float) + self.theta
        return _out(self._width**2 * _v_unit(s * self._width))

    def tilt(self, theta):
        if theta == 0:
            return self
        return TiltedUniform(self.a, self.b, self.theta + theta)

    def ppf(self, u):
        u = np.asarray(u, dtype=float)
        t, w = self.theta, self._width
        if abs(t * w) < 1e-12:
            return _out(self.a + w * u)
        with np.errstate(all="ignore"):
            if t > 0:
                x = self.b + np.log(u + (1.0 - u) * math.exp(-t * w)) / t
            else:
                x = self.a + np.log(1.0 - u + u * math.exp(t * w)) / t
        return _out(np.clip(x, self.a, self.b))

    @property
    def support(self):
        return (self.a, self.b)

    def endpoint_log_mass(self, x):
        return -math.inf

    def _log_mass(self, lo, hi):
        """log P(lo <= X <= hi) for a sub-interval of ``[a, b]``."""
        sub = TiltedUniform(lo, hi, 0.0)
        return float(
            sub._base(self.theta)
            + math.log((hi - lo) / self._width)
            - self._base(self.theta)
        )

    def _clip_pieces(self, ell):
        lo, hi = max(self.a, -ell), min(self.b, ell)
        pieces = []
        if self.a < -ell:
            pieces.append(_Atom(-ell, self._log_mass(self.a, min(-ell, self.b))))
        if lo < hi:
            pieces.append(
                _LawPiece(TiltedUniform(lo, hi, self.theta), self._log_mass(lo, hi))
            )
        if self.b > ell:
            pieces.append(_Atom(ell, self._log_mass(max(ell, self.a), self.b)))
        return pieces


@dataclass(frozen=True)
class Uniform(TiltedUniform):
    """Uniform law on ``[a, b]``."""

    def __init__(self, a: float = 0.0, b: float = 1.0):
        super().__init__(a, b, 0.0)

    def __str__(self):
        return f"uniform(a={self.a!r}, b={self.b!r})"

    def __repr__(self):
        return f"Uniform(a={self.a!r}, b={self.b!r})"


@dataclass(frozen=True)
class PointMass(EntryLaw):
    """Degenerate law at ``c``; a test fixture."""

    c: float = 0.0

    def __str__(self):
        return f"pointmass(c={self.c!r})"

    def log_mgf(self, theta):
        return _out(self.c * np.asarray(theta, dtype=float))

    def tilted_mean(self, theta):
        return _out(np.full_like(np.asarray(theta, dtype=float), self.c))

    def tilted_var(self, theta):
        return _out(np.zeros_like(np.asarray(theta, dtype=float)))

    def tilt(self, theta):
        return self

    def ppf(self, u):
        return _out(np.full_like(np.asarray(u, dtype=float), self.c))

    @property
    def support(self):
        return (self.c, self.c)

    def endpoint_log_mass(self, x):
        return 0.0 if x == self.c else -math.inf

    def _clip_pieces(self, ell):
        return [_Atom(min(max(self.c, -ell), ell), 0.0)]


# pieces of the clipped variable f_ell(X); each reports its unnormalized
# log-weight log E[exp(theta Y); piece] and conditional tilted moments


@dataclass(frozen=True)
class _Atom:
    x: float
    log_mass: float

    @property
    def lo(self):
        return self.x

    hi = lo

    def log_weight(self, t):
        return self.log_mass + t * self.x

    def mean(self, t):
        return np.full_like(t, self.x)

    def var(self, t):
        return np.zeros_like(t)


@dataclass(frozen=True)
class _LawPiece:
    law: EntryLaw
    log_mass: float

    @property
    def lo(self):
        return self.law.support[0]

    @property
    def hi(self):
        return self.law.support[1]

    def log_weight(self, t):
        return self.log_mass + np.asarray(self.law.log_mgf(t))

    def mean(self, t):
        return np.asarray(self.law.tilted_mean(t))

    def var(self, t):
        return np.asarray(self.law.tilted_var(t))


@dataclass(frozen=True)
class _NormalPiece:
    """N(mu, sigma^2) restricted (not renormalized) to ``[lo, hi]``."""

    mu: float
    sigma: float
    lo: float
    hi: float

    def _parts(self, t):
        loc = self.mu + t * self.sigma**2
        alpha = (self.lo - loc) / self.sigma
        beta = (self.hi - loc) / self.sigma
        log_z = _log_ndtr_diff(alpha, beta)
        log_phi = -0.5 * math.log(2 * math.pi)
        ra = np.exp(log_phi - 0.5 * alpha * alpha - log_z)
        rb = np.exp(log_phi - 0.5 * beta * beta - log_z)
        return loc, alpha, beta, log_z, ra, rb

    def log_weight(self, t):
        log_z = self._parts(t)[3]
        return self.mu * t + 0.5 * self.sigma**2 * t * t + log_z

    def mean(self, t):
        loc, _, _, _, ra, rb = self._parts(t)
        return np.clip(loc + self.sigma * (ra - rb), self.lo, self.hi)

    def var(self, t):
        _, alpha, beta, _, ra, rb = self._parts(t)
        v = 1.0 + alpha * ra - beta * rb - (ra - rb) ** 2
        return np.maximum(self.sigma**2 * v, 0.0)


class _Mixture:
    """A law assembled from pieces; used for clipped variables f_ell(X)."""

    def __init__(self, pieces):
        self.pieces = pieces

    def _weights(self, t):
        lw = np.stack([np.broadcast_to(p.log_weight(t), t.shape) for p in self.pieces])
        with np.errstate(all="ignore"):
            total = special.logsumexp(lw, axis=0)
            return total, np.exp(lw - total)

    def log_mgf(self, theta):
        t = np.asarray(theta, dtype=float)
        return _out(self._weights(t)[0])

    def tilted_mean(self, theta):
        t = np.asarray(theta, dtype=float)
        _, w = self._weights(t)
        return _out(sum(wi * p.mean(t) for wi, p in zip(w, self.pieces)))

    def tilted_var(self, theta):
        t = np.asarray(theta, dtype=float)
        _, w = self._weights(t)
        means = [p.mean(t) for p in self.pieces]
        mu = sum(wi * m for wi, m in zip(w, means))
        second = sum(
            wi * (p.var(t) + (m - mu) ** 2) for wi, p, m in zip(w, self.pieces, means)
        )
        return _out(np.maximum(second, 0.0))

    @property
    def support(self):
        live = [p for p in self.pieces if getattr(p, "log_mass", 0.0) > -math.inf]
        return (min(p.lo for p in live), max(p.hi for p in live))

    def endpoint_log_mass(self, x):
        masses = [p.log_mass for p in self.pieces if isinstance(p, _Atom) and p.x == x]
        if not masses:
            return -math.inf
        return float(special.logsumexp(masses))


def clip(x, ell):
    """The truncation map f_ell: clamp ``x`` to ``[-ell, ell]``."""
    return np.clip(x, -ell, ell)


def log_mgf(law: EntryLaw, theta):
    """log E exp(theta X), in closed form per law kind."""
    return law.log_mgf(theta)


def tilt(law: EntryLaw, theta: float) -> EntryLaw:
    """The law with density exp(theta x) / M(theta) against ``law``."""
    if not math.isfinite(theta):
        raise ValueError("theta must be finite")
    return law.tilt(theta)


def _solve_theta(law, x, tol, max_iter):
    """Solve ``law.tilted_mean(theta) = x`` elementwise for interior x.

    Doubling bracket expansion followed by Newton steps that fall back to
    bisection whenever a step leaves the bracket.
    """
    shape = np.shape(x)
    x = np.atleast_1d(np.asarray(x, dtype=float)).ravel()
    tl = np.full_like(x, -1.0)
    th = np.full_like(x, 1.0)
    iters = 0
    while True:
        low_bad = np.asarray(law.tilted_mean(tl)) > x
        high_bad = np.asarray(law.tilted_mean(th)) < x
        if not (low_bad.any() or high_bad.any()):
            break
        iters += 1
        if iters > max_iter:
            raise NonConvergence("could not bracket the tilt parameter")
        th = np.where(low_bad, tl, th)
        tl = np.where(low_bad, 2.0 * tl, tl)
        tl = np.where(high_bad, th, tl)
        th = np.where(high_bad, 2.0 * th, th)

    theta = np.where((tl < 0) & (th > 0), 0.0, 0.5 * (tl + th))
    active = np.ones(x.shape, dtype=bool)
    while active.any():
        iters += 1
        if iters > max_iter:
            raise NonConvergence(
                f"Newton solve did not reach tolerance {tol} in {max_iter} iterations"
            )
        t = theta[active]
        f = np.asarray(law.tilted_mean(t)) - x[active]
        done = np.abs(f) <= tol
        lo = np.where(f < 0, t, tl[active])
        hi = np.where(f > 0, t, th[active])
        with np.errstate(all="ignore"):
            step = t - f / np.asarray(law.tilted_var(t))
        bad = ~np.isfinite(step) | (step <= lo) | (step >= hi)
        nxt = np.where(bad, 0.5 * (lo + hi), step)
        collapsed = (hi - lo) <= 4 * np.finfo(float).eps * np.maximum(1.0, np.abs(t))
        done |= collapsed
        tl[active], th[active] = lo, hi
        theta[active] = np.where(done, t, nxt)
        idx = np.flatnonzero(active)
        active[idx[done]] = False
    return theta.reshape(shape)


def _conjugate(law, x, tol, max_iter):
    """Return ``(h(x), theta*(x))``; theta is NaN where h sits on the hull."""
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise ValueError("x must be finite")
    lo, hi = law.support
    h = np.full(x.shape, math.inf)
    theta = np.full(x.shape, math.nan)
    interior = (x > lo) & (x < hi)
    for e in {lo, hi}:
        if math.isfinite(e):
            h[x == e] = -law.endpoint_log_mass(e)
    if interior.any():
        xi = x[interior]
        t = _solve_theta(law, xi, tol, max_iter)
        theta[interior] = t
        h[interior] = np.maximum(t * xi - np.asarray(law.log_mgf(t)), 0.0)
    return h, theta


@dataclass(frozen=True)
class RateProfile:
    """The Cramér conjugate of an entry law, as an evaluable convex function.

    Values are recomputed on every call; bulk callers (the rate functionals)
    de-duplicate their arguments before evaluating.
    """

    law: EntryLaw
    tol: float = 1e-10
    max_iter: int = 200

    def __call__(self, x):
        return cramer_rate(self, x)


def cramer_rate(profile: RateProfile, x):
    """h(x) = sup_theta [theta x - log M(theta)].

    Returns ``inf`` outside the support hull; at a hull endpoint returns
    ``-log P(X = endpoint)`` (``inf`` when the endpoint carries no atom).
    """
    h, _ = _conjugate(profile.law, x, profile.tol, profile.max_iter)
    return _out(h)


def tilt_for_mean(profile: RateProfile, target):
    """The tilt theta with ``tilted_mean(theta) = target``; equals h'(target).

    A degenerate law asked for its own mean returns 0.
    """
    target = np.asarray(target, dtype=float)
    lo, hi = profile.law.support
    if lo == hi and np.all(target == lo):
        return _out(np.zeros_like(target))
    if not np.all((target > lo) & (target < hi)):
        raise OutOfHull(f"target outside the open support hull ({lo}, {hi})")
    return _out(_solve_theta(profile.law, target, profile.tol, profile.max_iter))


def truncated_rate(profile: RateProfile, ell: float, z):
    """h_ell(z): the Cramér conjugate of the clipped variable f_ell(X).

    ``inf`` for ``|z| > ell``.  When the support already lies inside
    ``[-ell, ell]`` this is exactly :func:`cramer_rate`.
    """
    if not ell > 0:
        raise ValueError("ell must be positive")
    z = np.asarray(z, dtype=float)
    lo, hi = profile.law.support
    if -ell <= lo and hi <= ell:
        return cramer_rate(profile, z)
    clipped = _Mixture(profile.law._clip_pieces(ell))
    h = np.full(z.shape, math.inf)
    inside = np.abs(z) <= ell
    if inside.any():
        h[inside], _ = _conjugate(clipped, z[inside], profile.tol, profile.max_iter)
    return _out(h)


_LAW_ALIASES = {
    "gaussian": Gaussian,
    "normal": Gaussian,
    "twopoint": TwoPoint,
    "uniform": Uniform,
    "tilteduniform": TiltedUniform,
    "pointmass": PointMass,
}
_KWARG_ALIASES = {"mean": "mu"}


def parse_law(text: str) -> EntryLaw:
    """Parse a law string such as ``twopoint(a=-1,b=1,p=0.5)`` (case-insensitive).

    ``str(law)`` produces a string that parses back to an equal law.
    """
    m = re.fullmatch(r"\s*([A-Za-z_]+)\s*\((.*)\)\s*", text)
    if not m:
        raise ValueError(f"malformed law spec: {text!r}")
    name = m.group(1).lower().replace("_", "")
    if name not in _LAW_ALIASES:
        raise ValueError(f"unknown law kind {m.group(1)!r}")
    args, kwargs = [], {}
    for item in filter(None, (s.strip() for s in m.group(2).split(","))):
        if "=" in item:
            k, v = (s.strip() for s in item.split("=", 1))
            k = k.lower()
            kwargs[_KWARG_ALIASES.get(k, k)] = float(v)
        else:
            args.append(float(item))
    try:
        return _LAW_ALIASES[name](*args, **kwargs)
    except TypeError as exc:
        raise ValueError(f"bad parameters in law string {text!r}: {exc}") from None
