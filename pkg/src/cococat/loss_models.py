"""Two-region catastrophe loss models and their change-of-measure algebra.

Three dependence structures are supported:

* :class:`ILP` - independent loss processes, one Poisson clock per region;
* :class:`ILA` - one shared clock, independent regional severities;
* :class:`PLA` - one shared clock, a total severity split by a (fixed or
  random) proportion.

Thresholds ``d1``, ``d2`` live on the model because the trigger time is a
property of the loss processes.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

from .distributions import (Degenerate, ProportionDistribution, SeverityDistribution,
                            exp_tilt)
from .errors import NumericalToleranceError, ParameterError

__all__ = [
    "PoissonIntensity",
    "as_intensity",
    "CompoundPoissonSpec",
    "ILP",
    "ILA",
    "PLA",
    "ImpactCoefficients",
    "kappa",
    "log_compensator",
    "tilt_model",
    "proportion_nodes",
    "PROPORTION_NODES",
]

PROPORTION_NODES = 64


@dataclass(frozen=True)
class PoissonIntensity:
    """Piecewise-constant Poisson intensity.

    ``rates[i]`` applies on ``[breaks[i-1], breaks[i])`` with ``breaks[-1]``
    implicitly infinite, so a single rate is a homogeneous process.
    """

    rates: tuple
    breaks: tuple = ()

    def __post_init__(self):
        rates = tuple(float(r) for r in np.atleast_1d(self.rates))
        breaks = tuple(float(b) for b in np.atleast_1d(self.breaks)) if len(
            np.atleast_1d(self.breaks)) else ()
        if len(rates) != len(breaks) + 1:
            raise ParameterError("need exactly one more rate than breakpoints")
        if any(not np.isfinite(r) or r < 0 for r in rates):
            raise ParameterError("intensities must be finite and nonnegative")
        if any(b <= 0 for b in breaks) or any(np.diff(breaks) <= 0):
            raise ParameterError("breakpoints must be positive and increasing")
        object.__setattr__(self, "rates", rates)
        object.__setattr__(self, "breaks", breaks)

    @property
    def is_homogeneous(self):
        return not self.breaks

    @property
    def _knots(self):
        starts = np.concatenate(([0.0], self.breaks))
        cum = np.concatenate(([0.0], np.cumsum(np.diff(starts) * np.asarray(self.rates[:-1]))))
        return starts, cum

    def rate(self, t):
        t = np.asarray(t, dtype=float)
        idx = np.searchsorted(self.breaks, t, side="right")
        out = np.asarray(self.rates)[idx]
        return float(out) if out.ndim == 0 else out

    def cumulative(self, t):
        """``Lambda_t``: integrated intensity over ``[0, t]``."""
        t = np.asarray(t, dtype=float)
        starts, cum = self._knots
        idx = np.searchsorted(self.breaks, t, side="right")
        out = cum[idx] + np.asarray(self.rates)[idx] * (t - starts[idx])
        return float(out) if out.ndim == 0 else out

    def inverse_cumulative(self, level):
        """Smallest ``t`` with ``Lambda_t >= level`` (``inf`` if never reached)."""
        level = np.asarray(level, dtype=float)
        starts, cum = self._knots
        idx = np.searchsorted(cum, level, side="right") - 1
        idx = np.clip(idx, 0, len(self.rates) - 1)
        rate = np.asarray(self.rates)[idx]
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.where(rate > 0, starts[idx] + (level - cum[idx]) / rate, np.inf)
        out = np.where(level <= 0, 0.0, out)
        return float(out) if out.ndim == 0 else out

    def scaled(self, factor):
        if factor == 1.0:
            return self
        return PoissonIntensity(tuple(r * factor for r in self.rates), self.breaks)


def as_intensity(value):
    if isinstance(value, PoissonIntensity):
        return value
    return PoissonIntensity((float(value),))


@dataclass(frozen=True)
class CompoundPoissonSpec:
    intensity: PoissonIntensity
    severity: SeverityDistribution

    def __post_init__(self):
        object.__setattr__(self, "intensity", as_intensity(self.intensity))


def _check_thresholds(d1, d2):
    for name, d in (("d1", d1), ("d2", d2)):
        if not (d > 0):
            raise ParameterError(f"threshold {name} must be positive, got {d!r}")


@dataclass(frozen=True)
class ILP:
    """Independent loss processes: separate clocks and severities per region."""

    region1: CompoundPoissonSpec
    region2: CompoundPoissonSpec
    d1: float
    d2: float

    kind = "ILP"

    def __post_init__(self):
        _check_thresholds(self.d1, self.d2)

    def with_thresholds(self, d1, d2):
        return dataclasses.replace(self, d1=d1, d2=d2)

    @property
    def breakpoints(self):
        return tuple(sorted(set(self.region1.intensity.breaks) | set(self.region2.intensity.breaks)))


@dataclass(frozen=True)
class ILA:
    """Independent loss amounts on a shared Poisson clock."""

    intensity: PoissonIntensity
    severity1: SeverityDistribution
    severity2: SeverityDistribution
    d1: float
    d2: float

    kind = "ILA"

    def __post_init__(self):
        object.__setattr__(self, "intensity", as_intensity(self.intensity))
        _check_thresholds(self.d1, self.d2)

    def with_thresholds(self, d1, d2):
        return dataclasses.replace(self, d1=d1, d2=d2)

    @property
    def breakpoints(self):
        return self.intensity.breaks


@dataclass(frozen=True)
class PLA:
    """Proportional loss amounts: region one receives ``P * X``, region two ``(1 - P) X``.

    A :class:`~cococat.distributions.Degenerate` proportion gives the
    constant-proportion variant, a beta proportion the random one.
    """

    intensity: PoissonIntensity
    total_severity: SeverityDistribution
    proportion: ProportionDistribution
    d1: float
    d2: float

    kind = "PLA"

    def __post_init__(self):
        object.__setattr__(self, "intensity", as_intensity(self.intensity))
        _check_thresholds(self.d1, self.d2)

    def with_thresholds(self, d1, d2):
        return dataclasses.replace(self, d1=d1, d2=d2)

    @property
    def breakpoints(self):
        return self.intensity.breaks

    @property
    def is_constant(self):
        return isinstance(self.proportion, Degenerate)

    @property
    def kink(self):
        """Proportion at which both regional thresholds bind simultaneously."""
        return self.d1 / (self.d1 + self.d2)

    def effective_threshold(self, p):
        """``D_p = min(D1 / p, D2 / (1 - p))``: total loss that triggers given ``P = p``."""
        p = np.asarray(p, dtype=float)
        with np.errstate(divide="ignore"):
            out = np.minimum(self.d1 / p, self.d2 / (1.0 - p))
        return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class ImpactCoefficients:
    """Log share-price drop per unit of regional loss."""

    alpha: float
    beta: float

    def __post_init__(self):
        for name, v in (("alpha", self.alpha), ("beta", self.beta)):
            if not (np.isfinite(v) and v > 0):
                raise ParameterError(f"{name} must be a finite positive number, got {v!r}")


def proportion_nodes(model, n=PROPORTION_NODES):
    """Quadrature over the proportion law, split at the threshold kink."""
    return model.proportion.quadrature(n, breakpoints=(model.kink,))


def _pla_mean_laplace(model, impact, scale=1.0):
    """``E_P[L_X(scale * (alpha P + beta (1 - P)))]``."""
    nodes, weights = model.proportion.quadrature(PROPORTION_NODES)
    q = impact.alpha * nodes + impact.beta * (1.0 - nodes)
    values = np.array([model.total_severity.laplace(scale * qi) for qi in q])
    return float(weights @ values)


def kappa(model, impact):
    """Compensator constant(s) making the catastrophe share factor a martingale.

    Returns:
        ``(kappa1, kappa2)`` for :class:`ILP`, a scalar otherwise.
    """
    a, b = impact.alpha, impact.beta
    if isinstance(model, ILP):
        k1 = (1.0 - model.region1.severity.laplace(a)) / a
        k2 = (1.0 - model.region2.severity.laplace(b)) / b
        out = (k1, k2)
    elif isinstance(model, ILA):
        out = (1.0 - model.severity1.laplace(a) * model.severity2.laplace(b)) / (a + b)
    elif isinstance(model, PLA):
        out = (1.0 - _pla_mean_laplace(model, impact)) / (a + b)
    else:
        raise ParameterError(f"unsupported model {type(model).__name__}")
    if not np.all(np.isfinite(out)):
        raise NumericalToleranceError("non-finite Laplace transform in kappa")
    return out


def log_compensator(model, impact, t, kappa_value=None):
    """Deterministic drift ``alpha k1 Lambda1_t + beta k2 Lambda2_t`` of ``log S^C``."""
    k = kappa(model, impact) if kappa_value is None else kappa_value
    a, b = impact.alpha, impact.beta
    if isinstance(model, ILP):
        k1, k2 = k
        return (a * k1 * model.region1.intensity.cumulative(t)
                + b * k2 * model.region2.intensity.cumulative(t))
    return k * (a + b) * model.intensity.cumulative(t)


def tilt_model(model, impact, nu, p=None):
    """Loss model seen under the conversion-leg measure with exponent ``nu``.

    Severities are tilted by ``alpha (1 - nu)`` and ``beta (1 - nu)``
    (ILP, ILA) or by ``(1 - nu) q`` with ``q = alpha p + beta (1 - p)``
    (PLA, conditional on ``P = p``); intensities are scaled by the
    corresponding Laplace factors.
    """
    if not (0.0 <= nu <= 1.0):
        raise ParameterError(f"nu must lie in [0, 1], got {nu!r}")
    w = 1.0 - nu
    a, b = impact.alpha, impact.beta
    if isinstance(model, ILP):
        regions = []
        for spec, coef in ((model.region1, a), (model.region2, b)):
            theta = coef * w
            factor = spec.severity.laplace(theta)
            regions.append(CompoundPoissonSpec(spec.intensity.scaled(factor),
                                               exp_tilt(spec.severity, theta)))
        return dataclasses.replace(model, region1=regions[0], region2=regions[1])
    if isinstance(model, ILA):
        t1, t2 = a * w, b * w
        factor = model.severity1.laplace(t1) * model.severity2.laplace(t2)
        return dataclasses.replace(model, intensity=model.intensity.scaled(factor),
                                   severity1=exp_tilt(model.severity1, t1),
                                   severity2=exp_tilt(model.severity2, t2))
    if isinstance(model, PLA):
        if p is None:
            if not model.is_constant:
                raise ParameterError("the PLA tilt is conditional on a proportion value p")
            p = model.proportion.p
        theta = w * (a * p + b * (1.0 - p))
        factor = model.total_severity.laplace(theta)
        proportion = model.proportion if (model.is_constant and model.proportion.p == p) \
            else Degenerate(p)
        return dataclasses.replace(model, intensity=model.intensity.scaled(factor),
                                   total_severity=exp_tilt(model.total_severity, theta),
                                   proportion=proportion)
    raise ParameterError(f"unsupported model {type(model).__name__}")
