"""Law of the trigger time ``tau = min(tau1, tau2)``.

On a single Poisson clock the survival function is a Poisson mixture

    S(t) = sum_n pmf(n; Lambda_t) a_n,    a_n = P(no crossing after n events),

and its density follows from differentiating the Poisson weights:

    f(t) = lambda_t sum_n pmf(n; Lambda_t) (a_n - a_{n+1}) >= 0.

For ILA ``a_n = F1^{n*}(D1) F2^{n*}(D2)``, for PLA given ``P = p``
``a_n = F_X^{n*}(D_p)``. Independent clocks (ILP) multiply survivals, and a
random proportion mixes the conditional laws over the proportion law.
The ``a_n`` depend on thresholds only, so they are computed once per law.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats

from .aggregate import DEFAULT_GRID_SIZE, SERIES_TAIL, nfold_cdf_at, poisson_truncation
from .errors import ParameterError
from .loss_models import ILA, ILP, PLA, PoissonIntensity, proportion_nodes

__all__ = [
    "TriggerLaw",
    "PoissonMixtureLaw",
    "IndependentLaw",
    "ProportionMixtureLaw",
    "trigger_law",
    "survival_ilp",
    "survival_ila",
    "survival_pla",
    "survival_pla_given_p",
    "density_ila",
    "density_pla_given_p",
    "trigger_density_ilp",
]


class TriggerLaw:
    """Interface: ``survival(t)`` and ``density(t)`` on ``[0, horizon]``."""

    measure = "base"

    def survival(self, t):
        raise NotImplementedError

    def density(self, t):
        raise NotImplementedError

    def cdf(self, t):
        return 1.0 - self.survival(t)

    @property
    def diagnostics(self):
        return {}


def _scalar_or_array(out, t):
    return float(np.ravel(out)[0]) if np.ndim(t) == 0 else out


@dataclass(frozen=True)
class PoissonMixtureLaw(TriggerLaw):
    """Trigger law driven by a single Poisson clock.

    Attributes:
        intensity: event clock.
        coeffs: ``a_0 = 1, a_1, ..., a_N``; non-crossing probability after ``n`` events.
        measure: provenance tag.
    """

    intensity: PoissonIntensity
    coeffs: np.ndarray
    measure: str = "base"

    def _weights(self, t):
        lam = np.atleast_1d(self.intensity.cumulative(np.asarray(t, dtype=float)))
        n = np.arange(len(self.coeffs))[:, None]
        return stats.poisson.pmf(n, lam[None, :])

    def survival(self, t):
        out = self.coeffs @ self._weights(t)
        return _scalar_or_array(np.clip(out, 0.0, 1.0), t)

    def density(self, t):
        drops = self.coeffs - np.append(self.coeffs[1:], 0.0)
        rate = np.atleast_1d(self.intensity.rate(np.asarray(t, dtype=float)))
        out = rate * (np.clip(drops, 0.0, None) @ self._weights(t))
        return _scalar_or_array(out, t)

    @property
    def diagnostics(self):
        return {"series_terms": len(self.coeffs) - 1}


@dataclass(frozen=True)
class IndependentLaw(TriggerLaw):
    """Minimum of independent trigger times (independent clocks)."""

    laws: tuple
    measure: str = "base"

    def survival(self, t):
        out = np.ones(np.shape(np.atleast_1d(t)))
        for law in self.laws:
            out = out * np.atleast_1d(law.survival(t))
        return _scalar_or_array(out, t)

    def density(self, t):
        surv = [np.atleast_1d(law.survival(t)) for law in self.laws]
        dens = [np.atleast_1d(law.density(t)) for law in self.laws]
        out = np.zeros_like(surv[0])
        for i, f in enumerate(dens):
            term = f
            for j, s in enumerate(surv):
                if j != i:
                    term = term * s
            out = out + term
        return _scalar_or_array(out, t)

    @property
    def diagnostics(self):
        return {"series_terms": [law.diagnostics["series_terms"] for law in self.laws]}


@dataclass(frozen=True)
class ProportionMixtureLaw(TriggerLaw):
    """Average of conditional laws over quadrature nodes of the proportion law."""

    nodes: np.ndarray
    weights: np.ndarray
    laws: tuple
    measure: str = "base"

    def survival(self, t):
        vals = np.array([np.atleast_1d(law.survival(t)) for law in self.laws])
        return _scalar_or_array(self.weights @ vals, t)

    def density(self, t):
        vals = np.array([np.atleast_1d(law.density(t)) for law in self.laws])
        return _scalar_or_array(self.weights @ vals, t)

    @property
    def diagnostics(self):
        return {"proportion_nodes": len(self.nodes),
                "series_terms": max(law.diagnostics["series_terms"] for law in self.laws)}


def _n_max(intensity, horizon, tail):
    # One extra term so the density differences a_n - a_{n+1} are covered.
    return poisson_truncation(float(intensity.cumulative(horizon)), tail) + 1


def _conditional_pla_laws(model, ps, horizon, grid_size, tail, measure, severities=None,
                          intensities=None):
    """Conditional PLA laws for several proportion values.

    ``severities``/``intensities`` allow per-node laws (tilted measure).
    """
    ps = np.atleast_1d(np.asarray(ps, dtype=float))
    sev = severities if severities is not None else [model.total_severity] * len(ps)
    ints = intensities if intensities is not None else [model.intensity] * len(ps)
    n_max = max(_n_max(i, horizon, tail) for i in ints)
    table = nfold_cdf_at(sev, model.effective_threshold(ps), n_max, grid_size)
    return tuple(PoissonMixtureLaw(ints[k], table[:, k], measure) for k in range(len(ps)))


def trigger_law(model, horizon, grid_size=DEFAULT_GRID_SIZE, tail=SERIES_TAIL,
                measure="base", p=None):
    """Build the trigger law of ``model`` valid on ``[0, horizon]``.

    Args:
        model: :class:`ILP`, :class:`ILA` or :class:`PLA` (possibly tilted).
        horizon: largest time at which the law will be evaluated.
        p: for PLA, condition on ``P = p`` instead of mixing over the proportion law.
    """
    if not (horizon >= 0):
        raise ParameterError("horizon must be nonnegative")
    if isinstance(model, ILP):
        laws = []
        for spec, d in ((model.region1, model.d1), (model.region2, model.d2)):
            n_max = _n_max(spec.intensity, horizon, tail)
            table = nfold_cdf_at([spec.severity], [d], n_max, grid_size)[:, 0]
            laws.append(PoissonMixtureLaw(spec.intensity, table, measure))
        return IndependentLaw(tuple(laws), measure)
    if isinstance(model, ILA):
        n_max = _n_max(model.intensity, horizon, tail)
        table = nfold_cdf_at([model.severity1, model.severity2], [model.d1, model.d2],
                             n_max, grid_size)
        return PoissonMixtureLaw(model.intensity, table[:, 0] * table[:, 1], measure)
    if isinstance(model, PLA):
        if p is not None or model.is_constant:
            p = model.proportion.p if p is None else p
            return _conditional_pla_laws(model, [p], horizon, grid_size, tail, measure)[0]
        nodes, weights = proportion_nodes(model)
        laws = _conditional_pla_laws(model, nodes, horizon, grid_size, tail, measure)
        return ProportionMixtureLaw(nodes, weights, laws, measure)
    raise ParameterError(f"unsupported model {type(model).__name__}")


def _law_for(model, t, kind, **kw):
    if not isinstance(model, kind):
        raise ParameterError(f"expected a {kind.__name__} model, got {type(model).__name__}")
    if np.any(np.asarray(t) < 0):
        raise ParameterError("t must be nonnegative")
    return trigger_law(model, float(np.max(t)), **kw)


def survival_ilp(t, model, **kw):
    """``Q(tau > t)`` for independent loss processes."""
    return _law_for(model, t, ILP, **kw).survival(t)


def trigger_density_ilp(t, model, **kw):
    """Density of ``tau`` for independent loss processes (product rule)."""
    return _law_for(model, t, ILP, **kw).density(t)


def survival_ila(t, model, **kw):
    return _law_for(model, t, ILA, **kw).survival(t)


def density_ila(t, model, **kw):
    return _law_for(model, t, ILA, **kw).density(t)


def survival_pla(t, model, **kw):
    """Unconditional ``Q(tau > t)``; a random proportion is integrated out."""
    return _law_for(model, t, PLA, **kw).survival(t)


def survival_pla_given_p(t, p, model, **kw):
    if not (0.0 < p < 1.0):
        raise ParameterError("p must lie in (0, 1)")
    return _law_for(model, t, PLA, p=p, **kw).survival(t)


def density_pla_given_p(t, p, model, **kw):
    if not (0.0 < p < 1.0):
        raise ParameterError("p must lie in (0, 1)")
    return _law_for(model, t, PLA, p=p, **kw).density(t)
