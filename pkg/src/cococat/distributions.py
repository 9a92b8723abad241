"""Severity and proportion laws used by the loss models.

Severities are positive continuous laws exposing CDF, density, quantile,
Laplace transform and sampling. Exponential tilting wraps any severity in
:class:`Tilted`, whose density is ``exp(-theta x) f(x) / L(theta)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, optimize, special

from .errors import NumericalToleranceError, ParameterError

__all__ = [
    "SeverityDistribution",
    "Exponential",
    "Lognormal",
    "Gamma",
    "Weibull",
    "Tilted",
    "ProportionDistribution",
    "Degenerate",
    "BetaProportion",
    "laplace",
    "cdf",
    "pdf",
    "quantile",
    "exp_tilt",
    "adaptive_gauss_legendre",
    "gauss_legendre",
]

LAPLACE_RTOL = 1e-10
TILTED_CDF_ATOL = 1e-10


def gauss_legendre(n, a=-1.0, b=1.0):
    """Nodes and weights of the ``n``-point Gauss-Legendre rule on ``[a, b]``."""
    x, w = np.polynomial.legendre.leggauss(n)
    half = 0.5 * (b - a)
    return a + half * (x + 1.0), half * w


def adaptive_gauss_legendre(func, a, b, rtol=LAPLACE_RTOL, atol=0.0, order=16,
                            start_panels=8, max_panels=2**13):
    """Integrate a vectorised ``func`` over ``[a, b]`` by composite Gauss-Legendre.

    The panel count is doubled until two successive estimates agree to
    ``max(rtol * |I|, atol)``.

    Returns:
        ``(value, error_estimate)``.

    Raises:
        NumericalToleranceError: if ``max_panels`` is reached first.
    """
    x, w = np.polynomial.legendre.leggauss(order)

    def composite(panels):
        edges = np.linspace(a, b, panels + 1)
        mid = 0.5 * (edges[:-1] + edges[1:])
        half = 0.5 * (edges[1:] - edges[:-1])
        pts = mid[:, None] + half[:, None] * x[None, :]
        return float(np.sum(half[:, None] * w[None, :] * func(pts)))

    panels = start_panels
    prev = composite(panels)
    err = math.inf
    while panels < max_panels:
        panels *= 2
        cur = composite(panels)
        err = abs(cur - prev)
        if err <= max(rtol * abs(cur), atol):
            return cur, err
        prev = cur
    raise NumericalToleranceError(
        f"quadrature did not converge on [{a}, {b}] with {panels} panels", achieved=err)


def _out(values, like):
    return float(values) if np.ndim(like) == 0 else values


def _check_positive(name, value):
    if not (np.isfinite(value) and value > 0):
        raise ParameterError(f"{name} must be a finite positive number, got {value!r}")


class SeverityDistribution:
    """Common interface of positive claim-size laws.

    Subclasses implement the vectorised ``_cdf``, ``_pdf`` and ``_laplace``
    primitives; this base class adds the support handling and shared helpers.
    """

    #: Whether the law may be used inside the pricing formulas.
    pricing_admissible = True

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        out = np.where(x > 0, self._cdf(np.maximum(x, 0.0)), 0.0)
        return _out(out, x)

    def sf(self, x):
        x = np.asarray(x, dtype=float)
        return _out(1.0 - np.asarray(self.cdf(x)), x)

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.where(x > 0, self._pdf(np.where(x > 0, x, 1.0)), 0.0)
        return _out(out, x)

    def laplace(self, z):
        """Laplace transform ``E[exp(-z X)]`` for ``z >= 0``."""
        if z < 0:
            raise ParameterError(f"Laplace argument must be nonnegative, got {z}")
        if z == 0:
            return 1.0
        return self._laplace(float(z))

    def cdf_on_grid(self, points):
        """CDF at an increasing array of points (fast path for discretisation)."""
        return np.asarray(self.cdf(points), dtype=float)

    def expect(self, func):
        """``E[func(X)]`` for a vectorised ``func``; numeric unless overridden."""
        raise NotImplementedError

    def mean(self):
        raise NotImplementedError

    def quantile(self, q):
        raise NotImplementedError

    def sample(self, rng, size):
        raise NotImplementedError


@dataclass(frozen=True)
class Exponential(SeverityDistribution):
    rate: float

    def __post_init__(self):
        _check_positive("rate", self.rate)

    def _cdf(self, x):
        return -np.expm1(-self.rate * x)

    def _pdf(self, x):
        return self.rate * np.exp(-self.rate * x)

    def _laplace(self, z):
        return self.rate / (self.rate + z)

    def expect(self, func):
        value, _ = adaptive_gauss_legendre(
            lambda u: func(-np.log1p(-u) / self.rate), 0.0, 1.0 - 1e-16)
        return value

    def mean(self):
        return 1.0 / self.rate

    def quantile(self, q):
        q = np.asarray(q, dtype=float)
        return _out(-np.log1p(-q) / self.rate, q)

    def sample(self, rng, size):
        return rng.exponential(1.0 / self.rate, size)


@dataclass(frozen=True)
class Lognormal(SeverityDistribution):
    """Lognormal law: ``log X ~ N(mu, sigma^2)``."""

    mu: float
    sigma: float

    def __post_init__(self):
        if not np.isfinite(self.mu):
            raise ParameterError(f"mu must be finite, got {self.mu!r}")
        _check_positive("sigma", self.sigma)

    def _cdf(self, x):
        with np.errstate(divide="ignore"):
            return special.ndtr((np.log(x) - self.mu) / self.sigma)

    def _pdf(self, x):
        z = (np.log(x) - self.mu) / self.sigma
        return np.exp(-0.5 * z * z) / (x * self.sigma * math.sqrt(2.0 * math.pi))

    def expect(self, func):
        # integrate against the standard normal density in log space
        def integrand(w):
            return np.exp(-0.5 * w * w) / math.sqrt(2.0 * math.pi) * func(
                np.exp(self.mu + self.sigma * w))

        value, _ = adaptive_gauss_legendre(integrand, -12.0, 12.0)
        return value

    def _laplace(self, z):
        def integrand(w):
            x = np.exp(self.mu + self.sigma * w)
            return np.exp(-0.5 * w * w - z * x) / math.sqrt(2.0 * math.pi)

        value, _ = adaptive_gauss_legendre(integrand, -12.0, 12.0)
        return value

    def mean(self):
        return math.exp(self.mu + 0.5 * self.sigma**2)

    def quantile(self, q):
        q = np.asarray(q, dtype=float)
        return _out(np.exp(self.mu + self.sigma * special.ndtri(q)), q)

    def sample(self, rng, size):
        return rng.lognormal(self.mu, self.sigma, size)


@dataclass(frozen=True)
class Gamma(SeverityDistribution):
    shape: float
    scale: float

    def __post_init__(self):
        _check_positive("shape", self.shape)
        _check_positive("scale", self.scale)

    def _cdf(self, x):
        return special.gammainc(self.shape, x / self.scale)

    def _pdf(self, x):
        k, s = self.shape, self.scale
        return np.exp((k - 1.0) * np.log(x) - x / s - special.gammaln(k) - k * math.log(s))

    def _laplace(self, z):
        return (1.0 + self.scale * z) ** (-self.shape)

    def expect(self, func):
        u_max = 1.0 - 1e-15
        value, _ = adaptive_gauss_legendre(lambda u: func(self.quantile(u)), 0.0, u_max)
        return value

    def mean(self):
        return self.shape * self.scale

    def quantile(self, q):
        q = np.asarray(q, dtype=float)
        return _out(self.scale * special.gammaincinv(self.shape, q), q)

    def sample(self, rng, size):
        return rng.gamma(self.shape, self.scale, size)


@dataclass(frozen=True)
class Weibull(SeverityDistribution):
    shape: float
    scale: float

    def __post_init__(self):
        _check_positive("shape", self.shape)
        _check_positive("scale", self.scale)

    def _cdf(self, x):
        return -np.expm1(-((x / self.scale) ** self.shape))

    def _pdf(self, x):
        k, s = self.shape, self.scale
        u = x / s
        return k / s * u ** (k - 1.0) * np.exp(-(u**k))

    def expect(self, func):
        # X = scale * E**(1/shape) with E ~ Exp(1); integrate over g = log E
        def integrand(g):
            return np.exp(g - np.exp(g)) * func(self.scale * np.exp(g / self.shape))

        value, _ = adaptive_gauss_legendre(integrand, -50.0, 4.0)
        return value

    def _laplace(self, z):
        def integrand(g):
            x = self.scale * np.exp(g / self.shape)
            return np.exp(g - np.exp(g) - z * x)

        value, _ = adaptive_gauss_legendre(integrand, -50.0, 4.0)
        return value

    def mean(self):
        return self.scale * math.gamma(1.0 + 1.0 / self.shape)

    def quantile(self, q):
        q = np.asarray(q, dtype=float)
        return _out(self.scale * (-np.log1p(-q)) ** (1.0 / self.shape), q)

    def sample(self, rng, size):
        return self.scale * rng.weibull(self.shape, size)


@dataclass(frozen=True)
class Tilted(SeverityDistribution):
    """Exponentially tilted law with density ``exp(-theta x) f(x) / L(theta)``.

    The normalising constant ``L(theta)`` is computed once on construction.
    """

    base: SeverityDistribution
    theta: float
    normalizer: float = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not (np.isfinite(self.theta) and self.theta >= 0):
            raise ParameterError(f"tilt must be finite and nonnegative, got {self.theta!r}")
        norm = self.base.laplace(self.theta)
        if not (np.isfinite(norm) and 0.0 < norm <= 1.0):
            raise NumericalToleranceError(f"invalid Laplace normaliser {norm!r}")
        object.__setattr__(self, "normalizer", norm)

    @property
    def _closed_form(self):
        b, t = self.base, self.theta
        if isinstance(b, Exponential):
            return Exponential(b.rate + t)
        if isinstance(b, Gamma):
            return Gamma(b.shape, b.scale / (1.0 + t * b.scale))
        return None

    def _cdf(self, x):
        closed = self._closed_form
        if closed is not None:
            return closed._cdf(x)
        flat = np.ravel(x)
        order = np.argsort(flat)
        pts = flat[order]
        # F_theta(x) = [exp(-t x) F(x) + t * int_0^x exp(-t y) F(y) dy] / L(t)
        acc, prev = 0.0, 0.0
        partial = np.empty_like(pts)
        for i, p in enumerate(pts):
            if p > prev:
                acc += self._segment(prev, p)
                prev = p
            partial[i] = acc
        out = np.empty_like(pts)
        out[order] = (np.exp(-self.theta * pts) * self.base.cdf(pts)
                      + self.theta * partial) / self.normalizer
        return np.clip(out.reshape(np.shape(x)), 0.0, 1.0)

    def _scales(self):
        qs = np.atleast_1d(self.base.quantile(np.array([1e-6, 0.01, 0.1, 0.5, 0.9, 0.99])))
        return np.concatenate((qs, np.array([1.0, 5.0, 20.0, 60.0]) / max(self.theta, 1e-300)))

    def _segment(self, a, b):
        """``int_a^b exp(-theta y) F(y) dy``, split where the integrand changes scale."""
        cuts = np.unique(np.concatenate(([a], [c for c in self._scales() if a < c < b], [b])))
        total = 0.0
        for lo, hi in zip(cuts[:-1], cuts[1:]):
            val, err = integrate.quad(self._tail_integrand, lo, hi,
                                      epsabs=0.01 * TILTED_CDF_ATOL, epsrel=1e-12, limit=200)
            if err > TILTED_CDF_ATOL:
                raise NumericalToleranceError("tilted CDF quadrature failed", achieved=err)
            total += val
        return total

    def _tail_integrand(self, y):
        return math.exp(-self.theta * y) * self.base.cdf(y)

    def cdf_on_grid(self, points):
        points = np.asarray(points, dtype=float)
        closed = self._closed_form
        if closed is not None:
            return closed.cdf_on_grid(points)
        lo = np.concatenate(([0.0], points[:-1]))
        nodes, weights = np.polynomial.legendre.leggauss(8)
        half = 0.5 * (points - lo)
        mid = 0.5 * (points + lo)
        ys = mid[:, None] + half[:, None] * nodes[None, :]
        vals = np.exp(-self.theta * ys) * np.asarray(self.base.cdf(ys))
        pieces = half * (vals @ weights)
        base_at = np.asarray(self.base.cdf(points))
        # cells where the base CDF jumps steeply get adaptive quadrature
        steep = np.flatnonzero(np.diff(np.concatenate(([0.0], base_at))) > 1e-2)
        for i in steep:
            pieces[i] = self._segment(lo[i], points[i])
        partial = np.cumsum(pieces)
        out = (np.exp(-self.theta * points) * base_at + self.theta * partial) / self.normalizer
        return np.clip(out, 0.0, 1.0)

    def _pdf(self, x):
        return np.exp(-self.theta * x) * self.base._pdf(x) / self.normalizer

    def _laplace(self, z):
        return self.base.laplace(z + self.theta) / self.normalizer

    def expect(self, func):
        t = self.theta
        return self.base.expect(lambda x: func(x) * np.exp(-t * x)) / self.normalizer

    def mean(self):
        closed = self._closed_form
        if closed is not None:
            return closed.mean()
        return self.expect(lambda x: x)

    def quantile(self, q):
        q_arr = np.atleast_1d(np.asarray(q, dtype=float))
        out = np.empty_like(q_arr)
        for i, qi in enumerate(q_arr):
            hi = float(self.base.quantile(qi))
            # tilting shifts mass left, so the base quantile brackets the root
            out[i] = optimize.brentq(lambda x: self.cdf(x) - qi, 0.0, hi,
                                     xtol=1e-14, rtol=1e-12)
        return _out(out if np.ndim(q) else out[0], q)

    def sample(self, rng, size):
        n = int(np.prod(size))
        out = np.empty(0)
        while out.size < n:
            need = n - out.size
            draw = self.base.sample(rng, int(need / self.normalizer * 1.1) + 16)
            keep = draw[rng.random(draw.size) < np.exp(-self.theta * draw)]
            out = np.concatenate((out, keep))
        return out[:n].reshape(size)


class ProportionDistribution:
    """Law of the share of each event's loss attributed to region one."""

    def mean(self):
        raise NotImplementedError

    def quadrature(self, n, breakpoints=()):
        """Nodes and weights for ``E[g(P)]``; weights sum to one."""
        raise NotImplementedError

    def sample(self, rng, size):
        raise NotImplementedError


@dataclass(frozen=True)
class Degenerate(ProportionDistribution):
    p: float

    def __post_init__(self):
        if not (0.0 < self.p < 1.0):
            raise ParameterError(f"proportion must lie in (0, 1), got {self.p!r}")

    def mean(self):
        return self.p

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        return _out(np.where(x >= self.p, 1.0, 0.0), x)

    def quadrature(self, n, breakpoints=()):
        return np.array([self.p]), np.array([1.0])

    def sample(self, rng, size):
        return np.full(size, self.p)


@dataclass(frozen=True)
class BetaProportion(ProportionDistribution):
    a: float
    b: float

    def __post_init__(self):
        _check_positive("a", self.a)
        _check_positive("b", self.b)

    def mean(self):
        return self.a / (self.a + self.b)

    def var(self):
        s = self.a + self.b
        return self.a * self.b / (s * s * (s + 1.0))

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        return _out(special.betainc(self.a, self.b, np.clip(x, 0.0, 1.0)), x)

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        logpdf = ((self.a - 1.0) * np.log(x) + (self.b - 1.0) * np.log1p(-x)
                  - special.betaln(self.a, self.b))
        return _out(np.exp(logpdf), x)

    def quadrature(self, n, breakpoints=()):
        """Density-weighted Gauss-Legendre, split at interior ``breakpoints``.

        The ``n`` nodes are shared evenly between panels and each panel's
        weights are rescaled to its exact probability mass.
        """
        cuts = sorted({float(c) for c in breakpoints if 0.0 < c < 1.0})
        edges = [0.0, *cuts, 1.0]
        per_panel = max(n // (len(edges) - 1), 1)
        nodes, weights = [], []
        for lo, hi in zip(edges[:-1], edges[1:]):
            x, w = gauss_legendre(per_panel, lo, hi)
            w = w * self.pdf(x)
            mass = self.cdf(hi) - self.cdf(lo)
            if w.sum() > 0:
                w = w * (mass / w.sum())
            nodes.append(x)
            weights.append(w)
        return np.concatenate(nodes), np.concatenate(weights)

    def sample(self, rng, size):
        return rng.beta(self.a, self.b, size)


def laplace(dist, z):
    """Laplace transform of ``dist`` at ``z >= 0``."""
    return dist.laplace(z)


def cdf(dist, x):
    if np.any(np.asarray(x) < 0):
        raise ParameterError("cdf is defined for x >= 0")
    return dist.cdf(x)


def pdf(dist, x):
    if np.any(np.asarray(x) < 0):
        raise ParameterError("pdf is defined for x >= 0")
    return dist.pdf(x)


def quantile(dist, q):
    q_arr = np.asarray(q, dtype=float)
    if np.any((q_arr <= 0) | (q_arr >= 1)):
        raise ParameterError("quantile order must lie in (0, 1)")
    return dist.quantile(q)


def exp_tilt(dist, theta):
    """Exponentially tilt ``dist`` by ``theta >= 0``; ``theta == 0`` returns ``dist``."""
    if not (np.isfinite(theta) and theta >= 0):
        raise ParameterError(f"tilt must be finite and nonnegative, got {theta!r}")
    if theta == 0:
        return dist
    if isinstance(dist, Tilted):
        return Tilted(dist.base, dist.theta + theta)
    return Tilted(dist, float(theta))
