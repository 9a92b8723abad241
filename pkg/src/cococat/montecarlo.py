"""Joint Monte Carlo simulation of rates, equity and regional losses.

Used as the independent oracle for the analytic pricer. Paths are split
into chunks; chunk ``j`` draws its financial increments from the stream
``SeedSequence(seed, spawn_key=(j, 0))`` and the losses of the ``g``-th
distinct loss process from ``(j, 1 + g)``. Results therefore do not depend
on how chunks are scheduled, and chunk statistics are merged in chunk
order with the pairwise (Chan) update.

Dynamics:

* short rate: ``r = x**2`` with the signed root ``x`` an arithmetic Brownian
  motion (exact steps; the process the closed-form bond price describes),
  or full-truncation Euler for the literal square-root SDE; discount factor
  by the trapezoid rule;
* equity: ``S^F_t = S0 exp(int r - sigma_S^2 t / 2 + sigma_S W2_t)`` with
  ``corr(W1, W2) = rho``;
* losses: exact event-driven compound Poisson paths (no time grid);
* ``S^C_t = exp(-alpha L1_t - beta L2_t + compensator(t))``.
"""

from __future__ import annotations

import csv
import dataclasses
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError
from .loss_models import ILA, ILP, PLA, kappa as kappa_of, log_compensator
from .pricing import Variants
from .term_structure import consistent_m_r, simple_forward_rate

__all__ = [
    "SimulationConfig",
    "McEstimate",
    "Scenario",
    "simulate_price",
    "simulate_prices",
    "simulate_discount_factors",
    "martingale_check",
    "simulate_trigger_times",
    "simulate_loss_paths",
]

LEGS = ("e_i1", "e_i2", "e_i3", "total")


@dataclass(frozen=True)
class SimulationConfig:
    """Monte Carlo settings.

    Attributes:
        n_paths: number of joint paths.
        dt: Euler step of the rate diffusion (years).
        seed: master seed.
        chunk_size: paths per independent substream.
        workers: process-pool size; 1 runs in-process.
        variants: formula readings of the analytic pricer, recorded for reports.
        kappa_shift: added to every compensator constant (negative controls).
        rate_scheme: ``"exact"`` simulates the signed-root representation,
            ``"euler"`` the literal SDE ``theta_r (m_r - sqrt(r)) dt +
            sigma_r sqrt(r) dW`` by full truncation with level ``market.level``.
    """

    n_paths: int = 100_000
    dt: float = 1e-3
    seed: int = 20240917
    chunk_size: int = 1000
    workers: int = 1
    variants: Variants = field(default_factory=Variants)
    kappa_shift: float = 0.0
    rate_scheme: str = "exact"

    def __post_init__(self):
        if self.n_paths < 1:
            raise ParameterError("n_paths must be at least 1")
        if not (self.dt > 0):
            raise ParameterError("dt must be positive")
        if self.chunk_size < 1 or self.workers < 1:
            raise ParameterError("chunk_size and workers must be positive")
        if self.rate_scheme not in ("exact", "euler"):
            raise ParameterError(f"unknown rate scheme {self.rate_scheme!r}")

    def chunks(self):
        full, rest = divmod(self.n_paths, self.chunk_size)
        return [self.chunk_size] * full + ([rest] if rest else [])

    def rng(self, chunk, stream):
        return np.random.Generator(np.random.PCG64(
            np.random.SeedSequence(self.seed, spawn_key=(chunk, stream))))


@dataclass
class McEstimate:
    """Sample mean with its standard error.

    ``legs`` maps leg names to ``(mean, stderr)`` where applicable.
    """

    mean: float
    stderr: float
    n_paths: int
    legs: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)

    def z_score(self, value):
        """``(value - mean) / stderr``; 0 when both agree exactly."""
        diff = value - self.mean
        if self.stderr == 0.0:
            return 0.0 if abs(diff) <= 1e-12 * max(1.0, abs(value)) else np.copysign(np.inf, diff)
        return diff / self.stderr

    def as_dict(self):
        return {"mean": self.mean, "stderr": self.stderr, "n_paths": self.n_paths,
                "legs": {k: list(v) for k, v in self.legs.items()},
                "warnings": list(self.warnings)}


@dataclass(frozen=True)
class Scenario:
    """One priced contract in a batch simulation."""

    covenant: object
    model: object
    impact: object


class _Moments:
    """Running count, mean and centred second moment over several columns."""

    def __init__(self, width):
        self.n = 0
        self.mean = np.zeros(width)
        self.m2 = np.zeros(width)

    def add_chunk(self, values):
        values = np.asarray(values, dtype=float)
        nb = values.shape[0]
        if nb == 0:
            return
        mb = values.mean(axis=0)
        m2b = ((values - mb) ** 2).sum(axis=0)
        self.merge(nb, mb, m2b)

    def merge(self, nb, mb, m2b):
        na = self.n
        n = na + nb
        delta = mb - self.mean
        self.mean = self.mean + delta * nb / n
        self.m2 = self.m2 + m2b + delta**2 * na * nb / n
        self.n = n

    def stderr(self):
        if self.n < 2:
            return np.full_like(self.mean, np.nan)
        return np.sqrt(self.m2 / (self.n - 1) / self.n)


def _summarise(values):
    values = np.asarray(values, dtype=float)
    n = values.shape[0]
    mean = values.mean(axis=0)
    return n, mean, ((values - mean) ** 2).sum(axis=0)


def _size_warnings(config, market=None):
    out = []
    if config.n_paths < 1000:
        out.append(f"only {config.n_paths} paths: standard errors are unreliable")
    if (market is not None and config.rate_scheme == "exact" and market.m_r is not None
            and market.theta_r > 0
            and not np.isclose(market.m_r, consistent_m_r(market.theta_r, market.sigma_r))):
        out.append("exact rate scheme ignores the explicit m_r (closed-form level used)")
    return out


class _RateStepper:
    """One-step update of the rate state; ``root`` is the signed root of ``r``."""

    def __init__(self, market, scheme, dt, n):
        self.market, self.scheme, self.dt = market, scheme, dt
        self.sq = np.sqrt(dt)
        if scheme == "exact":
            self.state = np.full(n, np.sqrt(market.r0))
        else:
            self.state = np.full(n, float(market.r0))

    @property
    def rate(self):
        return self.state**2 if self.scheme == "exact" else np.maximum(self.state, 0.0)

    @property
    def root(self):
        return self.state if self.scheme == "exact" else np.sqrt(np.maximum(self.state, 0.0))

    def step(self, z):
        m = self.market
        if self.scheme == "exact":
            self.state = self.state - 0.5 * m.theta_r * self.dt + 0.5 * m.sigma_r * self.sq * z
        else:
            root = np.sqrt(np.maximum(self.state, 0.0))
            self.state = (self.state + m.theta_r * (m.level - root) * self.dt
                          + m.sigma_r * root * self.sq * z)


# ---------------------------------------------------------------------------
# loss paths

def _clock_events(intensity, horizon, n, rng):
    lam = float(intensity.cumulative(horizon))
    counts = rng.poisson(lam, n) if lam > 0 else np.zeros(n, dtype=int)
    width = max(1, int(counts.max()) if n else 1)
    u = rng.random((n, width))
    times = np.asarray(intensity.inverse_cumulative(u * lam)).reshape(n, width) if lam > 0 \
        else np.full((n, width), np.inf)
    live = np.arange(width)[None, :] < counts[:, None]
    times = np.sort(np.where(live, times, np.inf), axis=1)
    return times, live


def simulate_loss_paths(model, horizon, n, rng):
    """Event-driven regional loss paths on ``[0, horizon]``.

    Returns:
        ``(times, x1, x2)`` arrays of shape ``(n, K)``: event times sorted
        along each row (``inf`` padding) and the losses booked to each region.
    """
    if isinstance(model, ILP):
        parts = []
        for region, spec in ((0, model.region1), (1, model.region2)):
            times, live = _clock_events(spec.intensity, horizon, n, rng)
            x = np.where(live, spec.severity.sample(rng, times.shape), 0.0)
            zeros = np.zeros_like(x)
            parts.append((times, x, zeros) if region == 0 else (times, zeros, x))
        times = np.concatenate([p[0] for p in parts], axis=1)
        x1 = np.concatenate([p[1] for p in parts], axis=1)
        x2 = np.concatenate([p[2] for p in parts], axis=1)
        order = np.argsort(times, axis=1, kind="stable")
        return (np.take_along_axis(times, order, 1), np.take_along_axis(x1, order, 1),
                np.take_along_axis(x2, order, 1))
    times, live = _clock_events(model.intensity, horizon, n, rng)
    if isinstance(model, ILA):
        x1 = np.where(live, model.severity1.sample(rng, times.shape), 0.0)
        x2 = np.where(live, model.severity2.sample(rng, times.shape), 0.0)
        return times, x1, x2
    if isinstance(model, PLA):
        total = np.where(live, model.total_severity.sample(rng, times.shape), 0.0)
        # one proportion per path, shared by all of its events
        p = np.broadcast_to(np.asarray(model.proportion.sample(rng, n), dtype=float), (n,))
        return times, p[:, None] * total, (1.0 - p[:, None]) * total
    raise ParameterError(f"unsupported model {type(model).__name__}")


def _first_crossing(times, x1, x2, d1, d2):
    """Trigger time and regional losses at the trigger (``inf``/totals if none)."""
    c1 = np.cumsum(x1, axis=1)
    c2 = np.cumsum(x2, axis=1)
    hit = (c1 >= d1) | (c2 >= d2)
    any_hit = hit.any(axis=1)
    k = np.where(any_hit, np.argmax(hit, axis=1), times.shape[1] - 1)
    rows = np.arange(times.shape[0])
    tau = np.where(any_hit, times[rows, k], np.inf)
    return tau, c1[rows, k], c2[rows, k]


def _shifted_kappa(model, impact, shift):
    k = kappa_of(model, impact)
    if isinstance(model, ILP):
        return (k[0] + shift, k[1] + shift)
    return k + shift


# ---------------------------------------------------------------------------
# financial paths

def _grid(T, dt):
    steps = T / dt
    if abs(steps - round(steps)) > 1e-6:
        raise ParameterError(f"dt={dt} does not divide the horizon {T}")
    return int(round(steps))


def _simulate_financial(market, T, dt, n, rng, record_every, scheme):
    """Integrated rate and equity Brownian motion on the time grid.

    Returns:
        dict with ``I`` and ``W2`` of shape ``(steps + 1, n)``, the signed
        rate root at every ``record_every``-th node and a standard normal per
        path for the Brownian-bridge refinement of ``W2`` between nodes.
    """
    steps = _grid(T, dt)
    sq = np.sqrt(dt)
    z1 = rng.standard_normal((steps, n))
    z2 = rng.standard_normal((steps, n))
    rho = market.rho
    dw2 = sq * (rho * z1 + np.sqrt(1.0 - rho**2) * z2)
    del z2
    w2 = np.empty((steps + 1, n))
    w2[0] = 0.0
    np.cumsum(dw2, axis=0, out=w2[1:])
    del dw2
    integ = np.empty((steps + 1, n))
    integ[0] = 0.0
    stepper = _RateStepper(market, scheme, dt, n)
    roots = [stepper.root]
    rate = stepper.rate
    for k in range(steps):
        stepper.step(z1[k])
        new_rate = stepper.rate
        integ[k + 1] = integ[k] + 0.5 * dt * (rate + new_rate)
        rate = new_rate
        if (k + 1) % record_every == 0:
            roots.append(stepper.root)
    return {"I": integ, "W2": w2, "root": np.array(roots), "bridge": rng.standard_normal(n)}


def _at_time(fin, tau, dt):
    """Integrated rate and ``W2`` at times ``tau`` inside the grid."""
    steps = fin["I"].shape[0] - 1
    pos = tau / dt
    k = np.minimum(np.floor(pos).astype(int), steps - 1)
    frac = pos - k
    cols = np.arange(tau.shape[0])
    i0, i1 = fin["I"][k, cols], fin["I"][k + 1, cols]
    w0, w1 = fin["W2"][k, cols], fin["W2"][k + 1, cols]
    integ = i0 + frac * (i1 - i0)
    bridge_sd = np.sqrt(np.clip(frac * (1.0 - frac) * dt, 0.0, None))
    w2 = w0 + frac * (w1 - w0) + bridge_sd * fin["bridge"][cols]
    return integ, w2


def _payoffs(scenario, market, fin, tau, l1, l2, dt, kappa_value):
    cov, model, impact = scenario.covenant, scenario.model, scenario.impact
    n = tau.shape[0]
    dates = cov.coupon_dates
    idx = np.rint(dates / dt).astype(int)
    disc = np.exp(-fin["I"][idx])                          # (N, n)
    x_prev = fin["root"][:-1]                              # rate root at t_{i-1}, (N, n)
    ref = np.empty_like(x_prev)
    ref[0] = market.reference_rate(cov.delta)
    if len(dates) > 1:
        ref[1:] = simple_forward_rate(x_prev[1:] ** 2, cov.delta, market.theta_r,
                                      market.sigma_r, root=x_prev[1:])
    alive = tau[None, :] > dates[:, None]
    i1 = np.sum((ref + cov.c) * cov.delta * cov.Z * disc * alive, axis=0)
    i3 = cov.Z * disc[-1] * (tau > cov.T)
    i2 = np.zeros(n)
    conv = tau <= cov.T
    if np.any(conv) and cov.zeta > 0:
        t = tau[conv]
        integ, w2 = _at_time({k: (v[:, conv] if k != "bridge" else v[conv])
                              for k, v in fin.items() if k != "root"}, t, dt)
        log_sc = (-impact.alpha * l1[conv] - impact.beta * l2[conv]
                  + log_compensator(model, impact, t, kappa_value=kappa_value))
        nu, s = cov.nu, market.sigma_S
        log_pay = (-nu * integ + (1.0 - nu) * (-0.5 * s**2 * t + s * w2)
                   + (1.0 - nu) * log_sc)
        i2[conv] = cov.zeta * cov.Z * market.S0 ** (1.0 - nu) * np.exp(log_pay)
    return np.column_stack([i1, i2, i3, i1 + i2 + i3])


def _process_key(model):
    return model.with_thresholds(1.0, 1.0)


def _price_chunk(args):
    market, scenarios, config, chunk, n, T, delta, keep_paths = args
    dt = config.dt
    record_every = _grid(delta, dt)
    fin = _simulate_financial(market, T, dt, n, config.rng(chunk, 0), record_every,
                              config.rate_scheme)
    keys = []
    for sc in scenarios:
        key = _process_key(sc.model)
        if key not in keys:
            keys.append(key)
    losses = [simulate_loss_paths(key, T, n, config.rng(chunk, 1 + g))
              for g, key in enumerate(keys)]
    stats, paths = [], []
    crossings = {}
    for sc in scenarios:
        g = keys.index(_process_key(sc.model))
        ck = (g, sc.model.d1, sc.model.d2)
        if ck not in crossings:
            crossings[ck] = _first_crossing(*losses[g], sc.model.d1, sc.model.d2)
        tau, l1, l2 = crossings[ck]
        kval = _shifted_kappa(sc.model, sc.impact, config.kappa_shift)
        values = _payoffs(sc, market, fin, tau, l1, l2, dt, kval)
        stats.append(_summarise(values))
        if keep_paths:
            paths.append(np.column_stack([tau, values]))
    return stats, paths


def _run_chunks(func, jobs, workers):
    if workers == 1:
        return [func(job) for job in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, jobs))


def simulate_prices(market, scenarios, config=SimulationConfig(), dump_path=None):
    """Price several contracts on common financial paths.

    All covenants must share ``T`` and ``delta``. Scenarios with the same
    loss process (thresholds aside) share loss paths too.

    Args:
        dump_path: optional CSV receiving per-path payoffs of the first scenario.

    Returns:
        One :class:`McEstimate` per scenario, with ``legs`` holding
        ``e_i1``, ``e_i2``, ``e_i3`` and ``total``.
    """
    scenarios = list(scenarios)
    if not scenarios:
        raise ParameterError("no scenarios to simulate")
    T, delta = scenarios[0].covenant.T, scenarios[0].covenant.delta
    if any(s.covenant.T != T or s.covenant.delta != delta for s in scenarios):
        raise ParameterError("batched scenarios must share T and delta")
    _grid(delta, config.dt)
    jobs = [(market, scenarios, config, j, n, T, delta, dump_path is not None)
            for j, n in enumerate(config.chunks())]
    results = _run_chunks(_price_chunk, jobs, config.workers)
    moments = [_Moments(len(LEGS)) for _ in scenarios]
    for stats, _ in results:
        for acc, (nb, mb, m2b) in zip(moments, stats):
            acc.merge(nb, mb, m2b)
    if dump_path is not None:
        _dump_paths(dump_path, [paths[0] for _, paths in results])
    warn = _size_warnings(config, market)
    out = []
    for acc in moments:
        se = acc.stderr()
        legs = {name: (float(acc.mean[i]), float(se[i])) for i, name in enumerate(LEGS)}
        out.append(McEstimate(float(acc.mean[-1]), float(se[-1]), acc.n, legs, list(warn)))
    return out


def simulate_price(covenant, market, model, impact, config=SimulationConfig(), dump_path=None):
    """Monte Carlo estimate of the issue-date price of one contract."""
    return simulate_prices(market, [Scenario(covenant, model, impact)], config, dump_path)[0]


def _dump_paths(path, blocks):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["path", "tau", "I1", "I2", "I3", "total"])
        row = 0
        for block in blocks:
            for rec in block:
                writer.writerow([row] + [repr(float(v)) for v in rec])
                row += 1


# ---------------------------------------------------------------------------
# discount factors, martingale and trigger checks

def _discount_chunk(args):
    market, times, config, chunk, n = args
    dt = config.dt
    horizon = max(times)
    steps = _grid(horizon, dt)
    marks = {int(round(t / dt)): i for i, t in enumerate(times)}
    if len(marks) != len(times) or any(abs(t / dt - round(t / dt)) > 1e-6 for t in times):
        raise ParameterError("maturities must be distinct multiples of dt")
    rng = config.rng(chunk, 0)
    stepper = _RateStepper(market, config.rate_scheme, dt, n)
    rate = stepper.rate
    integ = np.zeros(n)
    out = np.empty((n, len(times)))
    for k in range(steps):
        stepper.step(rng.standard_normal(n))
        new_rate = stepper.rate
        integ += 0.5 * dt * (rate + new_rate)
        rate = new_rate
        if k + 1 in marks:
            out[:, marks[k + 1]] = np.exp(-integ)
    return _summarise(out)


def simulate_discount_factors(market, maturities, config=SimulationConfig()):
    """Estimates of ``E[exp(-int_0^T r du)]`` for each maturity (one path set)."""
    times = [float(t) for t in maturities]
    jobs = [(market, times, config, j, n) for j, n in enumerate(config.chunks())]
    acc = _Moments(len(times))
    for nb, mb, m2b in _run_chunks(_discount_chunk, jobs, config.workers):
        acc.merge(nb, mb, m2b)
    se = acc.stderr()
    return [McEstimate(float(acc.mean[i]), float(se[i]), acc.n,
                       warnings=_size_warnings(config, market))
            for i in range(len(times))]


def _martingale_chunk(args):
    model, impact, kval, t, config, chunk, n = args
    times, x1, x2 = simulate_loss_paths(model, t, n, config.rng(chunk, 1))
    inside = times <= t
    l1 = np.sum(np.where(inside, x1, 0.0), axis=1)
    l2 = np.sum(np.where(inside, x2, 0.0), axis=1)
    comp = log_compensator(model, impact, t, kappa_value=kval)
    values = np.exp(-impact.alpha * l1 - impact.beta * l2 + comp)
    return _summarise(values[:, None])


def martingale_check(model, impact, kappa=None, t=1.0, config=SimulationConfig()):
    """Estimate ``E[S^C_t]``, which equals 1 when ``kappa`` is the compensator constant.

    ``kappa=None`` uses the model's own constant plus ``config.kappa_shift``.
    """
    if kappa is None:
        kappa = _shifted_kappa(model, impact, config.kappa_shift)
    jobs = [(model, impact, kappa, float(t), config, j, n)
            for j, n in enumerate(config.chunks())]
    acc = _Moments(1)
    for nb, mb, m2b in _run_chunks(_martingale_chunk, jobs, config.workers):
        acc.merge(nb, mb, m2b)
    return McEstimate(float(acc.mean[0]), float(acc.stderr()[0]), acc.n,
                      warnings=_size_warnings(config))


def _trigger_chunk(args):
    model, horizon, config, chunk, n = args
    times, x1, x2 = simulate_loss_paths(model, horizon, n, config.rng(chunk, 1))
    tau, _, _ = _first_crossing(times, x1, x2, model.d1, model.d2)
    tau[tau > horizon] = np.inf
    return tau


def simulate_trigger_times(model, config=SimulationConfig(), horizon=5.0):
    """Exact trigger-time sample; ``inf`` marks paths not triggered by ``horizon``."""
    jobs = [(model, float(horizon), config, j, n) for j, n in enumerate(config.chunks())]
    return np.concatenate(_run_chunks(_trigger_chunk, jobs, config.workers))


def replace_config(config, **changes):
    return dataclasses.replace(config, **changes)
