"""Calibration of the loss model from historical event data.

Severity laws are fitted by maximum likelihood and ranked with the
Kolmogorov-Smirnov, Cramer-von Mises and Anderson-Darling statistics; the
event clock is a homogeneous Poisson process fitted by least squares to the
cumulative-count curve; the regional split is a beta law.
"""

from __future__ import annotations

import csv
import dataclasses
import datetime as dt
from dataclasses import dataclass, field

import numpy as np
from scipy import special, stats

from .distributions import BetaProportion, Gamma, Lognormal, Weibull
from .errors import DataError, FitError, ParameterError
from .loss_models import ILA, ILP, PLA, ImpactCoefficients

__all__ = [
    "LossDataset",
    "FitReport",
    "FAMILIES",
    "PRICING_FAMILIES",
    "fit_severity",
    "select_family",
    "gof_statistics",
    "ks_statistic",
    "cvm_statistic",
    "ad_statistic",
    "bootstrap_pvalues",
    "estimate_hpp_intensity",
    "intensity_bootstrap",
    "fit_proportion",
    "impact_coefficients",
    "load_losses",
    "write_losses",
    "load_index",
    "adjust_cpi",
    "simulate_dataset",
]

FAMILIES = ("lognormal", "pareto", "gamma", "weibull", "invgauss", "gev")
PRICING_FAMILIES = ("lognormal", "gamma", "weibull")
DAYS_PER_YEAR = 365.25


@dataclass(frozen=True)
class LossDataset:
    """Event records with regional losses and an observation window."""

    dates: tuple
    loss1: np.ndarray
    loss2: np.ndarray
    start: dt.date
    end: dt.date

    def __post_init__(self):
        dates = tuple(self.dates)
        loss1 = np.asarray(self.loss1, dtype=float)
        loss2 = np.asarray(self.loss2, dtype=float)
        if not (len(dates) == loss1.size == loss2.size):
            raise DataError("dates and losses differ in length")
        if any(b < a for a, b in zip(dates, dates[1:])):
            raise DataError("event dates must be nondecreasing")
        if dates and (dates[0] < self.start or dates[-1] > self.end):
            raise DataError("observation window does not cover all events")
        if self.end <= self.start:
            raise DataError("observation window must have positive length")
        if np.any(loss1 < 0) or np.any(loss2 < 0) or not np.all(np.isfinite(loss1 + loss2)):
            raise DataError("losses must be finite and nonnegative")
        object.__setattr__(self, "dates", dates)
        object.__setattr__(self, "loss1", loss1)
        object.__setattr__(self, "loss2", loss2)

    def __eq__(self, other):
        return (isinstance(other, LossDataset) and self.dates == other.dates
                and self.start == other.start and self.end == other.end
                and np.array_equal(self.loss1, other.loss1)
                and np.array_equal(self.loss2, other.loss2))

    __hash__ = None

    @property
    def n_events(self):
        return len(self.dates)

    @property
    def total(self):
        return self.loss1 + self.loss2

    @property
    def window_years(self):
        return (self.end - self.start).days / DAYS_PER_YEAR

    def event_times(self):
        """Event times in years since the window start."""
        return np.array([(d - self.start).days / DAYS_PER_YEAR for d in self.dates])


@dataclass
class FitReport:
    family: str
    params: dict
    n: int
    loglik: float = float("nan")
    ks: float = float("nan")
    cvm: float = float("nan")
    ad: float = float("nan")
    metrics: dict = field(default_factory=dict)
    notes: dict = field(default_factory=dict)

    def distribution(self):
        """Pricing-admissible severity law of this fit."""
        p = self.params
        if self.family == "lognormal":
            return Lognormal(p["mu"], p["sigma"])
        if self.family == "gamma":
            return Gamma(p["shape"], p["scale"])
        if self.family == "weibull":
            return Weibull(p["shape"], p["scale"])
        if self.family == "beta":
            return BetaProportion(p["a"], p["b"])
        raise ParameterError(
            f"{self.family} fits are reported only; heavy tails are not admitted for pricing")

    def as_dict(self):
        out = dataclasses.asdict(self)
        return {k: v for k, v in out.items()}


# ---------------------------------------------------------------------------
# goodness of fit

def ks_statistic(u):
    """``sup |F_n - F|`` from sorted probability-integral transforms ``u``."""
    u = np.sort(np.asarray(u, dtype=float))
    n = u.size
    i = np.arange(1, n + 1)
    return float(max(np.max(i / n - u), np.max(u - (i - 1) / n)))


def cvm_statistic(u):
    u = np.sort(np.asarray(u, dtype=float))
    n = u.size
    i = np.arange(1, n + 1)
    return float(1.0 / (12 * n) + np.sum((u - (2 * i - 1) / (2 * n)) ** 2))


def ad_statistic(u):
    u = np.clip(np.sort(np.asarray(u, dtype=float)), 1e-300, 1 - 1e-16)
    n = u.size
    i = np.arange(1, n + 1)
    return float(-n - np.mean((2 * i - 1) * (np.log(u) + np.log1p(-u[::-1]))))


def gof_statistics(samples, cdf):
    """KS, CvM and AD statistics of ``samples`` against a fitted ``cdf``."""
    u = np.asarray(cdf(np.asarray(samples, dtype=float)), dtype=float)
    return {"ks": ks_statistic(u), "cvm": cvm_statistic(u), "ad": ad_statistic(u)}


# ---------------------------------------------------------------------------
# severity MLE

def _check_samples(samples):
    x = np.asarray(samples, dtype=float)
    if x.ndim != 1 or x.size < 2:
        raise FitError("at least two samples are required")
    if np.any(~np.isfinite(x)) or np.any(x <= 0):
        raise FitError("severity samples must be finite and strictly positive")
    if np.ptp(x) == 0:
        raise FitError("all samples are equal: the fit is degenerate")
    return x


def _gamma_shape(s):
    """Solve ``log k - digamma(k) = s`` (``s > 0``) by safeguarded Newton."""
    k = (3.0 - s + np.sqrt((s - 3.0) ** 2 + 24.0 * s)) / (12.0 * s)
    for _ in range(100):
        g = np.log(k) - special.digamma(k) - s
        dg = 1.0 / k - special.polygamma(1, k)
        step = g / dg
        new = k - step
        while new <= 0:
            step *= 0.5
            new = k - step
        if abs(new - k) <= 1e-14 * k:
            return new
        k = new
    return k


def _weibull_shape(x):
    """Root of the Weibull profile score in the shape parameter."""
    y = np.log(x / np.max(x))
    mean_log = y.mean()

    def score(k):
        w = np.exp(k * y)
        return np.sum(w * y) / np.sum(w) - 1.0 / k - mean_log

    def dscore(k):
        w = np.exp(k * y)
        sw = np.sum(w)
        m1 = np.sum(w * y) / sw
        m2 = np.sum(w * y * y) / sw
        return m2 - m1**2 + 1.0 / k**2

    lo, hi = 1e-3, 1.0
    while score(hi) < 0:
        hi *= 2.0
        if hi > 1e4:
            raise FitError("Weibull shape diverges")
    k = np.pi / (np.sqrt(6.0) * np.std(np.log(x)))   # moment guess
    k = min(max(k, lo), hi)
    for _ in range(100):
        f = score(k)
        if f > 0:
            hi = k
        else:
            lo = k
        new = k - f / dscore(k)
        if not (lo < new < hi):
            new = 0.5 * (lo + hi)   # bisection safeguard
        if abs(new - k) <= 1e-13 * k:
            return new
        k = new
    return k


def _fit_params(x, family):
    logs = np.log(x)
    if family == "lognormal":
        return {"mu": float(logs.mean()), "sigma": float(logs.std())}
    if family == "gamma":
        s = np.log(x.mean()) - logs.mean()
        k = _gamma_shape(s)
        return {"shape": float(k), "scale": float(x.mean() / k)}
    if family == "weibull":
        k = _weibull_shape(x)
        return {"shape": float(k), "scale": float(np.mean(x**k) ** (1.0 / k))}
    if family == "pareto":
        xm = float(x.min())
        return {"shape": float(x.size / np.sum(np.log(x / xm))), "scale": xm}
    if family == "invgauss":
        mu = float(x.mean())
        return {"mean": mu, "shape": float(x.size / np.sum(1.0 / x - 1.0 / mu))}
    if family == "gev":
        c, loc, scale = stats.genextreme.fit(x)
        return {"c": float(c), "loc": float(loc), "scale": float(scale)}
    raise ParameterError(f"unknown family {family!r}; choose from {FAMILIES}")


def _frozen(family, p):
    if family == "lognormal":
        return stats.lognorm(p["sigma"], scale=np.exp(p["mu"]))
    if family == "gamma":
        return stats.gamma(p["shape"], scale=p["scale"])
    if family == "weibull":
        return stats.weibull_min(p["shape"], scale=p["scale"])
    if family == "pareto":
        return stats.pareto(p["shape"], scale=p["scale"])
    if family == "invgauss":
        # scipy's invgauss(mu/lam, scale=lam) has mean mu and shape lam
        return stats.invgauss(p["mean"] / p["shape"], scale=p["shape"])
    return stats.genextreme(p["c"], loc=p["loc"], scale=p["scale"])


def fit_severity(samples, family="lognormal"):
    """Maximum-likelihood fit of one severity family with GoF statistics.

    Raises:
        FitError: for fewer than two, non-positive or all-equal samples.
    """
    x = _check_samples(samples)
    params = _fit_params(x, family)
    if family == "lognormal" and params["sigma"] <= 0:
        raise FitError("lognormal fit is degenerate (sigma = 0)")
    law = _frozen(family, params)
    gof = gof_statistics(x, law.cdf)
    return FitReport(family, params, int(x.size), float(np.sum(law.logpdf(x))), **gof)


def select_family(samples, families=FAMILIES, criterion="ks"):
    """Fit every family and return ``(best, reports)`` ranked by ``criterion``."""
    reports = []
    for fam in families:
        try:
            reports.append(fit_severity(samples, fam))
        except FitError:
            raise
        except (RuntimeError, ValueError):
            continue   # optimiser failure in a fit-and-report family
    if not reports:
        raise FitError("no candidate family could be fitted")
    reports.sort(key=lambda r: getattr(r, criterion))
    return reports[0], reports


def bootstrap_pvalues(samples, family="lognormal", n_boot=1000, rng=None):
    """Parametric-bootstrap p-values of the three GoF statistics (slow path)."""
    rng = np.random.default_rng(rng)
    base = fit_severity(samples, family)
    law = _frozen(family, base.params)
    n = base.n
    exceed = {"ks": 0, "cvm": 0, "ad": 0}
    for _ in range(n_boot):
        rep = fit_severity(law.rvs(size=n, random_state=rng), family)
        for k in exceed:
            exceed[k] += getattr(rep, k) >= getattr(base, k)
    return {k: (v + 1) / (n_boot + 1) for k, v in exceed.items()}


# ---------------------------------------------------------------------------
# frequency and proportion

def _hpp_fit(times):
    times = np.asarray(times, dtype=float)
    counts = np.arange(1, times.size + 1)
    denom = np.sum(times**2)
    if denom <= 0:
        raise FitError("event times must not all sit at the window start")
    lam = float(np.sum(times * counts) / denom)
    resid = lam * times - counts
    return lam, resid, counts


def estimate_hpp_intensity(dataset):
    """Least-squares intensity ``sum t_k N(t_k) / sum t_k^2`` with error metrics.

    MAPE is reported in percent and skips points with ``N(t_k) = 0``.
    """
    if dataset.n_events == 0:
        raise FitError("an intensity fit needs at least one event")
    lam, resid, counts = _hpp_fit(dataset.event_times())
    keep = counts > 0
    metrics = {"mse": float(np.mean(resid**2)), "mae": float(np.mean(np.abs(resid))),
               "mape": float(100.0 * np.mean(np.abs(resid[keep]) / counts[keep]))}
    return FitReport("hpp", {"lambda": lam}, dataset.n_events, metrics=metrics)


def intensity_bootstrap(lam, years, n_boot=1000, rng=None):
    """Sampling distribution of the least-squares intensity under HPP(``lam``)."""
    rng = np.random.default_rng(rng)
    out = []
    for _ in range(n_boot):
        n = rng.poisson(lam * years)
        if n == 0:
            continue
        out.append(_hpp_fit(np.sort(rng.uniform(0.0, years, n)))[0])
    return np.array(out)


def _beta_mle(p):
    m, v = p.mean(), p.var()
    if v <= 0:
        raise FitError("all proportions are equal: the beta fit diverges")
    common = m * (1 - m) / v - 1.0
    if common <= 0:
        common = 1.0
    x = np.array([m * common, (1 - m) * common])
    g1, g2 = np.mean(np.log(p)), np.mean(np.log1p(-p))
    for _ in range(200):
        a, b = x
        f = np.array([special.digamma(a) - special.digamma(a + b) - g1,
                      special.digamma(b) - special.digamma(a + b) - g2])
        t_ab = special.polygamma(1, a + b)
        jac = np.array([[special.polygamma(1, a) - t_ab, -t_ab],
                        [-t_ab, special.polygamma(1, b) - t_ab]])
        step = np.linalg.solve(jac, f)
        new = x - step
        while np.any(new <= 0):
            step *= 0.5
            new = x - step
        if np.max(np.abs(new - x) / x) < 1e-13:
            return new
        x = new
    raise FitError("beta MLE did not converge")


def fit_proportion(dataset):
    """Beta fit of ``loss1 / (loss1 + loss2)``; events at 0 or 1 are excluded and counted."""
    tot = dataset.total
    with np.errstate(invalid="ignore", divide="ignore"):
        p = dataset.loss1 / tot
    inside = (tot > 0) & (p > 0) & (p < 1)
    excluded = int(np.sum(~inside))
    p = p[inside]
    if p.size < 2:
        raise FitError("fewer than two events with a proportion in (0, 1)")
    a, b = _beta_mle(p)
    law = stats.beta(a, b)
    gof = gof_statistics(p, law.cdf)
    return FitReport("beta", {"a": float(a), "b": float(b)}, int(p.size),
                     float(np.sum(law.logpdf(p))), **gof, notes={"excluded": excluded})


def impact_coefficients(delta, model):
    """Impact coefficients giving a share-price drop of ``delta`` for an average loss."""
    if not (delta > 0):
        raise ParameterError("delta must be positive")

    def mean_of(d):
        m = float(d.mean())
        if not np.isfinite(m) or m <= 0:
            raise ParameterError("severity must have a finite positive mean")
        return m

    if isinstance(model, ILA):
        return ImpactCoefficients(delta / mean_of(model.severity1),
                                  delta / mean_of(model.severity2))
    if isinstance(model, ILP):
        return ImpactCoefficients(delta / mean_of(model.region1.severity),
                                  delta / mean_of(model.region2.severity))
    if isinstance(model, PLA):
        ex, ep = mean_of(model.total_severity), float(model.proportion.mean())
        return ImpactCoefficients(delta / (ep * ex), delta / ((1.0 - ep) * ex))
    raise ParameterError(f"unsupported model {type(model).__name__}")


# ---------------------------------------------------------------------------
# data files

def _parse_date(text, line):
    try:
        return dt.date.fromisoformat(text.strip())
    except ValueError as exc:
        raise DataError(f"line {line}: bad date {text!r}") from exc


def load_losses(path, start=None, end=None):
    """Read ``date,loss_region1,loss_region2`` records.

    The window defaults to the calendar years spanned by the events.

    Raises:
        DataError: malformed content, reported with its line number.
        OSError: unreadable file.
    """
    dates, l1, l2 = [], [], []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["date", "loss_region1",
                                                             "loss_region2"]:
            raise DataError("line 1: expected header date,loss_region1,loss_region2")
        for line, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 3:
                raise DataError(f"line {line}: expected 3 fields, got {len(row)}")
            dates.append(_parse_date(row[0], line))
            try:
                l1.append(float(row[1]))
                l2.append(float(row[2]))
            except ValueError as exc:
                raise DataError(f"line {line}: bad loss value") from exc
            if not (np.isfinite(l1[-1]) and np.isfinite(l2[-1])) or l1[-1] < 0 or l2[-1] < 0:
                raise DataError(f"line {line}: losses must be finite and nonnegative")
    if not dates:
        raise DataError("no event records found")
    start = start or dt.date(dates[0].year, 1, 1)
    end = end or dt.date(dates[-1].year + 1, 1, 1)
    return LossDataset(tuple(dates), np.array(l1), np.array(l2), start, end)


def write_losses(dataset, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["date", "loss_region1", "loss_region2"])
        for d, a, b in zip(dataset.dates, dataset.loss1, dataset.loss2):
            writer.writerow([d.isoformat(), repr(float(a)), repr(float(b))])


def load_index(path):
    """Read a ``date,index`` price-index series, sorted by date."""
    rows = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["date", "index"]:
            raise DataError("line 1: expected header date,index")
        for line, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 2:
                raise DataError(f"line {line}: expected 2 fields")
            try:
                value = float(row[1])
            except ValueError as exc:
                raise DataError(f"line {line}: bad index value") from exc
            if not value > 0:
                raise DataError(f"line {line}: index must be positive")
            rows.append((_parse_date(row[0], line), value))
    rows.sort()
    return rows


def adjust_cpi(dataset, index, reference=None):
    """Express losses in reference-date money: ``loss * I(reference) / I(event date)``.

    ``index`` is a sorted sequence of ``(date, value)``; the value in force at
    a date is the latest one on or before it.

    Raises:
        DataError: if an event or the reference date precedes the series.
    """
    if not index:
        raise DataError("empty index series")
    dates = [d for d, _ in index]
    values = np.array([v for _, v in index])
    reference = reference or dates[-1]

    def level(day):
        pos = np.searchsorted(np.array(dates, dtype="datetime64[D]"),
                              np.datetime64(day, "D"), side="right") - 1
        if pos < 0:
            raise DataError(f"index series does not cover {day.isoformat()}")
        return values[pos]

    ref = level(reference)
    factors = np.array([ref / level(d) for d in dataset.dates])
    return dataclasses.replace(dataset, loss1=dataset.loss1 * factors,
                               loss2=dataset.loss2 * factors)


def simulate_dataset(model, years, rng=None, start=dt.date(1985, 1, 1)):
    """Synthetic event history from a shared-clock model (ILA or PLA).

    The proportion is redrawn per event so its law can be fitted.
    """
    rng = np.random.default_rng(rng)
    if not isinstance(model, (ILA, PLA)):
        raise ParameterError("synthetic histories need a shared event clock (ILA or PLA)")
    rate = model.intensity.rates[0]
    if not model.intensity.is_homogeneous:
        raise ParameterError("synthetic histories need a homogeneous intensity")
    n = rng.poisson(rate * years)
    times = np.sort(rng.uniform(0.0, years, n))
    if isinstance(model, ILA):
        l1 = model.severity1.sample(rng, n)
        l2 = model.severity2.sample(rng, n)
    else:
        tot = model.total_severity.sample(rng, n)
        p = np.asarray(model.proportion.sample(rng, n), dtype=float)
        l1, l2 = p * tot, (1.0 - p) * tot
    dates = tuple(start + dt.timedelta(days=int(t * DAYS_PER_YEAR)) for t in times)
    end = start + dt.timedelta(days=int(round(years * DAYS_PER_YEAR)))
    return LossDataset(dates, l1, l2, start, max(end, dates[-1] if dates else end))
