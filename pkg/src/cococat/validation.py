"""Analytic-versus-simulation checks with z-scores, as run by ``cococat validate``."""

from __future__ import annotations

import dataclasses

import numpy as np

from .montecarlo import (McEstimate, Scenario, martingale_check, simulate_prices,
                         simulate_trigger_times)
from .pricing import Variants, price
from .trigger import trigger_law

__all__ = ["binomial_z", "variant_grid", "validate", "Z_LIMIT"]

Z_LIMIT = 3.0


def binomial_z(p_analytic, hits, n):
    """z-score of an analytic probability against ``hits`` successes out of ``n``."""
    emp = hits / n
    var = p_analytic * (1.0 - p_analytic) / n
    if var == 0.0:
        return 0.0 if emp == p_analytic else float(np.copysign(np.inf, p_analytic - emp))
    return float((p_analytic - emp) / np.sqrt(var))


def variant_grid(base=Variants()):
    """Each single-switch departure from ``base`` (plus ``base`` itself)."""
    out = {"selected": base}
    for name, options in (("coupon", ("minus", "plus")), ("exponent", ("proof", "theorem")),
                          ("rate_start", ("scaled", "unscaled"))):
        for opt in options:
            if opt != getattr(base, name):
                out[f"{name}={opt}"] = dataclasses.replace(base, **{name: opt})
    return out


def _check(name, analytic, mean, stderr, z):
    return {"name": name, "analytic": float(analytic), "mc": float(mean),
            "stderr": float(stderr), "z": float(z), "pass": bool(abs(z) <= Z_LIMIT)}


def validate(cfg, n_paths=None, seed=None, trigger_paths=None, negative_control=False,
             survival_times=(0.5, 1.0, 2.5, 5.0), martingale_times=(1.0, 5.0)):
    """Run the price, martingale and trigger checks for one configuration.

    Returns:
        Report dict with ``checks`` (the configured variants), ``variants``
        (z-scores of every alternative formula reading) and ``passed``.
    """
    sim = cfg.simulation
    changes = {}
    if n_paths is not None:
        changes["n_paths"] = n_paths
    if seed is not None:
        changes["seed"] = seed
    if negative_control:
        changes["kappa_shift"] = 0.1
    sim = dataclasses.replace(sim, **changes)
    cov, market, model, impact = cfg.covenant, cfg.market, cfg.model, cfg.impact
    checks = []

    est = simulate_prices(market, [Scenario(cov, model, impact)],
                          dataclasses.replace(sim, kappa_shift=0.0))[0]
    variant_report = {}
    for label, var in variant_grid(cfg.variants).items():
        res = price(cov, market, model, impact, var, cfg.numerics)
        variant_report[label] = {"total": res.total, "z": est.z_score(res.total),
                                 "pass": bool(abs(est.z_score(res.total)) <= Z_LIMIT)}
        if label == "selected":
            for leg in ("e_i1", "e_i2", "e_i3"):
                mean, se = est.legs[leg]
                value = getattr(res, leg)
                z = McEstimate(mean, se, est.n_paths).z_score(value)
                checks.append(_check(f"price.{leg}", value, mean, se, z))
            checks.append(_check("price.total", res.total, est.mean, est.stderr,
                                 est.z_score(res.total)))

    for t in martingale_times:
        mg = martingale_check(model, impact, None, t, sim)
        checks.append(_check(f"martingale.t={t:g}", 1.0, mg.mean, mg.stderr, mg.z_score(1.0)))

    horizon = max(survival_times)
    tsim = dataclasses.replace(sim, n_paths=trigger_paths or sim.n_paths)
    taus = simulate_trigger_times(model, tsim, horizon)
    law = trigger_law(model, horizon, cfg.numerics.grid_size, cfg.numerics.series_tail)
    for t in survival_times:
        s = law.survival(t)
        hits = int(np.sum(taus > t))
        n = taus.size
        checks.append(_check(f"survival.t={t:g}", s, hits / n,
                             np.sqrt(max(s * (1 - s), 0.0) / n), binomial_z(s, hits, n)))

    return {"model": model.kind, "n_paths": sim.n_paths, "trigger_paths": tsim.n_paths,
            "seed": sim.seed, "negative_control": bool(negative_control),
            "selected_variants": dataclasses.asdict(cfg.variants),
            "checks": checks, "variants": variant_report,
            "passed": all(c["pass"] for c in checks), "warnings": est.warnings}
