"""Issue-date price of a two-region CoCoCat bond.

``V0 = E[I1] + E[I2] + E[I3]`` with

* ``I1``: floating coupons ``(R_{t_{i-1}} + c) Delta Z`` paid while untriggered,
* ``I2``: conversion into ``zeta Z / K_P`` shares at ``tau <= T`` with ``K_P = S_tau^nu``,
* ``I3``: principal ``Z`` repaid at ``T`` if untriggered.

The conversion leg is

    zeta Z S0^(1-nu) int_0^T exp(-g t) Phi(t) P_bar(t) f_tau^nu(t) dt,

where ``P_bar`` is a tilted Longstaff bond, ``f_tau^nu`` the trigger
density of the tilted loss model and

    log Phi(t) = sum_clocks (Lambda^nu_t - Lambda_t) + (1 - nu) * compensator(t).
"""

from __future__ import annotations

import csv
import dataclasses
import functools
import itertools
from dataclasses import dataclass, field

import numpy as np

from .aggregate import DEFAULT_GRID_SIZE, SERIES_TAIL, nfold_cdf_at, poisson_truncation
from .distributions import exp_tilt, gauss_legendre
from .errors import NumericalToleranceError, ParameterError
from .loss_models import (ILA, ILP, PLA, CompoundPoissonSpec, kappa, log_compensator,
                          proportion_nodes, tilt_model)
from .term_structure import tilted_zcb_price
from .trigger import IndependentLaw, PoissonMixtureLaw, _conditional_pla_laws, trigger_law

__all__ = [
    "BondCovenant",
    "Variants",
    "NumericalConfig",
    "PriceBreakdown",
    "RegionSpec",
    "coupon_leg",
    "principal_leg",
    "conversion_leg",
    "price",
    "price_multi_region",
    "riskless_value",
    "sweep",
    "threshold_from_quantile",
    "write_sweep_csv",
    "SWEEP_COLUMNS",
]

SWEEP_COLUMNS = ("D1", "D2", "nu", "q", "EI1", "EI2", "EI3", "total")


@dataclass(frozen=True)
class BondCovenant:
    """Contract terms. Coupon dates are ``i * delta`` for ``i = 1..T/delta``."""

    T: float
    Z: float = 1.0
    delta: float = 0.25
    c: float = 0.0
    zeta: float = 0.0
    nu: float = 1.0

    def __post_init__(self):
        if not (self.T > 0 and self.delta > 0):
            raise ParameterError("T and delta must be positive")
        n = self.T / self.delta
        if abs(n - round(n)) > 1e-9 or round(n) < 1:
            raise ParameterError("T must be a positive integer multiple of delta")
        if not (self.Z >= 0):
            raise ParameterError("Z must be nonnegative")
        if not (self.c >= 0):
            raise ParameterError("c must be nonnegative")
        if not (0.0 <= self.zeta <= 1.0):
            raise ParameterError("zeta must lie in [0, 1]")
        if not (0.0 <= self.nu <= 1.0):
            raise ParameterError("nu must lie in [0, 1]")

    @property
    def n_periods(self):
        return int(round(self.T / self.delta))

    @property
    def coupon_dates(self):
        return self.delta * np.arange(1, self.n_periods + 1)

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)


@dataclass(frozen=True)
class Variants:
    """Formula readings that are selectable for adjudication.

    Attributes:
        coupon: ``"minus"`` prices coupon ``i >= 2`` as
            ``P(t_{i-1}) - (1 - c Delta) P(t_i)``; ``"plus"`` flips the sign.
        exponent: ``"proof"`` uses ``-nu (1 - nu) sigma_S^2 t / 2`` in the
            conversion leg, ``"theorem"`` uses ``-nu (1 - nu)^2 sigma_S^2 t / 2``.
        rate_start: ``"scaled"`` starts the tilted rate at ``nu * r0``,
            ``"unscaled"`` at ``r0``.
    """

    coupon: str = "minus"
    exponent: str = "proof"
    rate_start: str = "scaled"

    def __post_init__(self):
        if self.coupon not in ("minus", "plus"):
            raise ParameterError(f"unknown coupon variant {self.coupon!r}")
        if self.exponent not in ("proof", "theorem"):
            raise ParameterError(f"unknown exponent variant {self.exponent!r}")
        if self.rate_start not in ("scaled", "unscaled"):
            raise ParameterError(f"unknown rate_start variant {self.rate_start!r}")


@dataclass(frozen=True)
class NumericalConfig:
    time_nodes: int = 200
    rtol: float = 1e-7
    max_time_nodes: int = 6400
    grid_size: int = DEFAULT_GRID_SIZE
    series_tail: float = SERIES_TAIL
    proportion_nodes: int = 32


@dataclass
class PriceBreakdown:
    e_i1: float
    e_i2: float
    e_i3: float
    diagnostics: dict = field(default_factory=dict)

    @property
    def total(self):
        return self.e_i1 + self.e_i2 + self.e_i3

    def as_dict(self):
        return {"e_i1": self.e_i1, "e_i2": self.e_i2, "e_i3": self.e_i3,
                "total": self.total, "diagnostics": self.diagnostics}


@functools.lru_cache(maxsize=64)
def _cached_law(model, horizon, grid_size, tail):
    return trigger_law(model, horizon, grid_size, tail)


def base_law(model, covenant, numerics=NumericalConfig()):
    """Trigger law under the pricing measure on ``[0, T]`` (memoised)."""
    return _cached_law(model, float(covenant.T), numerics.grid_size, numerics.series_tail)


def coupon_leg(covenant, market, law, variant="minus"):
    """Expected discounted coupons paid before the trigger."""
    t = covenant.coupon_dates
    d, c, z = covenant.delta, covenant.c, covenant.Z
    bonds = market.zcb(t)
    surv = np.atleast_1d(law.survival(t))
    first = z * d * (market.reference_rate(d) + c) * bonds[0] * surv[0]
    sign = -1.0 if variant == "minus" else 1.0
    if variant not in ("minus", "plus"):
        raise ParameterError(f"unknown coupon variant {variant!r}")
    rest = z * np.sum(surv[1:] * (bonds[:-1] + sign * (1.0 - c * d) * bonds[1:]))
    return float(first + rest)


def principal_leg(covenant, market, law):
    return float(covenant.Z * market.zcb(covenant.T) * law.survival(covenant.T))


def _time_exponent(covenant, market, variant):
    nu, s2 = covenant.nu, market.sigma_S**2
    if variant == "proof":
        return -0.5 * nu * (1.0 - nu) * s2
    if variant == "theorem":
        return -0.5 * nu * (1.0 - nu) ** 2 * s2
    raise ParameterError(f"unknown exponent variant {variant!r}")


def _log_phi_pieces(model, tilted, impact, nu, kappa_value):
    """``t -> log Phi(t)`` for a model and its tilt."""
    comp = functools.partial(log_compensator, model, impact, kappa_value=kappa_value)
    if isinstance(model, ILP):
        def log_phi(t):
            gap = (tilted.region1.intensity.cumulative(t) - model.region1.intensity.cumulative(t)
                   + tilted.region2.intensity.cumulative(t)
                   - model.region2.intensity.cumulative(t))
            return gap + (1.0 - nu) * comp(t)
    else:
        def log_phi(t):
            gap = tilted.intensity.cumulative(t) - model.intensity.cumulative(t)
            return gap + (1.0 - nu) * comp(t)
    return log_phi


def _tilted_integrands(covenant, market, model, impact, variants, numerics):
    """List of ``(weight, log_phi, law)`` triples whose weighted sum is the leg integrand."""
    nu = covenant.nu
    k = kappa(model, impact)
    if isinstance(model, PLA) and not model.is_constant:
        nodes, weights = proportion_nodes(model, numerics.proportion_nodes)
        tilts = [tilt_model(model, impact, nu, p) for p in nodes]
        laws = _conditional_pla_laws(
            model, nodes, covenant.T, numerics.grid_size, numerics.series_tail, "tilted",
            severities=[m.total_severity for m in tilts],
            intensities=[m.intensity for m in tilts])
        return [(w, _log_phi_pieces(model, m, impact, nu, k), law)
                for w, m, law in zip(weights, tilts, laws)], k
    tilted = tilt_model(model, impact, nu)
    law = trigger_law(tilted, covenant.T, numerics.grid_size, numerics.series_tail,
                      measure="tilted")
    return [(1.0, _log_phi_pieces(model, tilted, impact, nu, k), law)], k


def _integrate_time(func, T, breakpoints, numerics):
    """Gauss-Legendre over ``[0, T]`` (split at breakpoints) with doubling."""
    edges = np.unique(np.concatenate(([0.0], [b for b in breakpoints if 0 < b < T], [T])))

    def rule(n):
        total = 0.0
        per = max(2, n // (len(edges) - 1))
        for a, b in zip(edges[:-1], edges[1:]):
            x, w = gauss_legendre(per, a, b)
            total += float(w @ func(x))
        return total

    n = numerics.time_nodes
    value = rule(n)
    while True:
        finer = rule(2 * n)
        change = abs(finer - value) / max(abs(finer), 1e-300)
        if change < numerics.rtol or finer == value:
            return finer, 2 * n, change
        n *= 2
        value = finer
        if n > numerics.max_time_nodes:
            raise NumericalToleranceError(
                f"time quadrature did not reach rtol={numerics.rtol}", achieved=change)


def conversion_leg(covenant, market, model, impact, variants=Variants(),
                   numerics=NumericalConfig(), diagnostics=None):
    """Expected discounted value of the shares delivered at conversion."""
    nu = covenant.nu
    scale = covenant.zeta * covenant.Z * market.S0 ** (1.0 - nu)
    if scale == 0.0:
        return 0.0
    g = _time_exponent(covenant, market, variants.exponent)
    pieces, k = _tilted_integrands(covenant, market, model, impact, variants, numerics)

    def integrand(t):
        bond = tilted_zcb_price(market, nu, t, variants.rate_start)
        acc = np.zeros_like(t)
        for w, log_phi, law in pieces:
            acc = acc + w * np.exp(log_phi(t)) * law.density(t)
        return np.exp(g * t) * bond * acc

    value, nodes, change = _integrate_time(integrand, covenant.T, model.breakpoints, numerics)
    if diagnostics is not None:
        diagnostics.update({"time_nodes": nodes, "time_rel_change": change,
                            "kappa": k, "tilted_series_terms": pieces[0][2].diagnostics})
    return scale * value


def price(covenant, market, model, impact, variants=Variants(), numerics=NumericalConfig()):
    """Full :class:`PriceBreakdown` for one contract and model."""
    law = base_law(model, covenant, numerics)
    diag = {"model": model.kind, "variants": dataclasses.asdict(variants),
            "series_terms": law.diagnostics.get("series_terms"),
            "grid_size": numerics.grid_size}
    e1 = coupon_leg(covenant, market, law, variants.coupon)
    e3 = principal_leg(covenant, market, law)
    e2 = conversion_leg(covenant, market, model, impact, variants, numerics, diag)
    return PriceBreakdown(e1, e2, e3, diag)


class _Riskless:
    def survival(self, t):
        return np.ones_like(np.asarray(t, dtype=float)) if np.ndim(t) else 1.0


def riskless_value(covenant, market, variant="minus"):
    """Value of the same coupon bond without catastrophe risk."""
    law = _Riskless()
    return coupon_leg(covenant, market, law, variant) + principal_leg(covenant, market, law)


# ---------------------------------------------------------------------------
# R regions

@dataclass(frozen=True)
class RegionSpec:
    """One region of the general model: loss process, threshold and impact coefficient."""

    process: CompoundPoissonSpec
    threshold: float
    impact: float

    def __post_init__(self):
        if not (self.threshold > 0 and self.impact > 0):
            raise ParameterError("threshold and impact must be positive")


def _region_laws_ilp(regions, horizon, grid_size, tail):
    laws = []
    for reg in regions:
        n_max = poisson_truncation(float(reg.process.intensity.cumulative(horizon)), tail) + 1
        table = nfold_cdf_at([reg.process.severity], [reg.threshold], n_max, grid_size)[:, 0]
        laws.append(PoissonMixtureLaw(reg.process.intensity, table))
    return IndependentLaw(tuple(laws))


def _region_law_ila(intensity, severities, thresholds, horizon, grid_size, tail):
    n_max = poisson_truncation(float(intensity.cumulative(horizon)), tail) + 1
    table = nfold_cdf_at(list(severities), list(thresholds), n_max, grid_size)
    return PoissonMixtureLaw(intensity, np.prod(table, axis=1))


def price_multi_region(covenant, market, regions, mode, variants=Variants(),
                       numerics=NumericalConfig()):
    """Price with ``R >= 1`` regions under independent processes or a shared clock.

    Args:
        regions: sequence of :class:`RegionSpec`. In ``"ILA"`` mode every region
            must carry the same intensity.
        mode: ``"ILP"`` or ``"ILA"``.
    """
    regions = tuple(regions)
    if not regions:
        raise ParameterError("at least one region is required")
    nu, T = covenant.nu, covenant.T
    w = 1.0 - nu
    gs, tail = numerics.grid_size, numerics.series_tail
    lt_full = np.array([r.process.severity.laplace(r.impact) for r in regions])
    lt_tilt = np.array([r.process.severity.laplace(r.impact * w) for r in regions])
    tilted_sev = [exp_tilt(r.process.severity, r.impact * w) for r in regions]

    if mode == "ILP":
        base = _region_laws_ilp(regions, T, gs, tail)
        tilted = _region_laws_ilp(
            [RegionSpec(CompoundPoissonSpec(r.process.intensity.scaled(f), s), r.threshold,
                        r.impact) for r, f, s in zip(regions, lt_tilt, tilted_sev)], T, gs, tail)

        # Lambda^{nu,r} - Lambda^r plus (1 - nu) alpha_r kappa_r Lambda^r, per region
        coef = (lt_tilt - 1.0) + w * (1.0 - lt_full)

        def log_phi(t):
            return coef @ np.array([r.process.intensity.cumulative(t) for r in regions])
        breaks = sorted({b for r in regions for b in r.process.intensity.breaks})
    elif mode == "ILA":
        intensity = regions[0].process.intensity
        if any(r.process.intensity != intensity for r in regions):
            raise ParameterError("ILA mode needs one shared intensity")
        sev = [r.process.severity for r in regions]
        thr = [r.threshold for r in regions]
        base = _region_law_ila(intensity, sev, thr, T, gs, tail)
        prod_tilt, prod_full = float(np.prod(lt_tilt)), float(np.prod(lt_full))
        tilted = _region_law_ila(intensity.scaled(prod_tilt), tilted_sev, thr, T, gs, tail)

        def log_phi(t):
            lam = intensity.cumulative(t)
            return -lam * (1.0 - prod_tilt) + w * lam * (1.0 - prod_full)
        breaks = list(intensity.breaks)
    else:
        raise ParameterError(f"mode must be 'ILP' or 'ILA', got {mode!r}")

    e1 = coupon_leg(covenant, market, base, variants.coupon)
    e3 = principal_leg(covenant, market, base)
    scale = covenant.zeta * covenant.Z * market.S0 ** w
    diag = {"model": f"{mode}-R{len(regions)}", "variants": dataclasses.asdict(variants)}
    if scale == 0.0:
        return PriceBreakdown(e1, 0.0, e3, diag)
    g = _time_exponent(covenant, market, variants.exponent)

    def integrand(t):
        return (np.exp(g * t + log_phi(t)) * tilted_zcb_price(market, nu, t, variants.rate_start)
                * tilted.density(t))

    value, nodes, change = _integrate_time(integrand, T, breaks, numerics)
    diag.update({"time_nodes": nodes, "time_rel_change": change})
    return PriceBreakdown(e1, scale * value, e3, diag)


# ---------------------------------------------------------------------------
# sweeps

def threshold_from_quantile(model, q):
    """Thresholds ``(D1, D2)`` set to severity quantiles of order ``q``.

    Regional severities are used when the model has them (ILP, ILA); PLA
    uses the total-loss severity for both regions.
    """
    if isinstance(model, ILP):
        return model.region1.severity.quantile(q), model.region2.severity.quantile(q)
    if isinstance(model, ILA):
        return model.severity1.quantile(q), model.severity2.quantile(q)
    x = model.total_severity.quantile(q)
    return x, x


def sweep(covenant, market, model, impact, d1=None, d2=None, nu=None, quantiles=None,
          variants=Variants(), numerics=NumericalConfig()):
    """Price over a Cartesian grid.

    Threshold grids ``d1``/``d2`` and ``quantiles`` are mutually exclusive;
    omitted axes default to the values on ``model``/``covenant``.

    Returns:
        List of row dicts keyed by :data:`SWEEP_COLUMNS`.
    """
    if quantiles is not None and (d1 is not None or d2 is not None):
        raise ParameterError("quantile mode excludes explicit threshold grids")
    nus = [covenant.nu] if nu is None else list(nu)
    if quantiles is not None:
        points = [(*threshold_from_quantile(model, q), q) for q in quantiles]
    else:
        d1s = [model.d1] if d1 is None else list(d1)
        d2s = [model.d2] if d2 is None else list(d2)
        points = [(a, b, None) for a, b in itertools.product(d1s, d2s)]
    if not points or not nus:
        raise ParameterError("empty sweep grid")
    rows = []
    for a, b, q in points:
        m = model.with_thresholds(a, b)
        for v in nus:
            res = price(covenant.replace(nu=v), market, m, impact, variants, numerics)
            rows.append({"D1": a, "D2": b, "nu": v, "q": q, "EI1": res.e_i1,
                         "EI2": res.e_i2, "EI3": res.e_i3, "total": res.total})
    return rows


def write_sweep_csv(rows, path):
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=SWEEP_COLUMNS, lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: ("" if row[k] is None else repr(float(row[k])))
                             for k in SWEEP_COLUMNS})
