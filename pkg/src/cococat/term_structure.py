"""Longstaff double-square-root short-rate model.

Under the pricing measure the short rate follows

    dr_t = theta_r (m_r - sqrt(r_t)) dt + sigma_r sqrt(r_t) dW_t,

and the zero-coupon bond price is ``A(T) exp(r0 B(T) + sqrt(r0) C(T))``
with ``psi = sqrt(2) sigma_r``. The closed form does not contain ``m_r``.
It is the exact price for ``m_r = sigma_r**2 / (4 theta_r)`` once the rate
is written as ``r = x**2`` with the signed root ``x`` following
``dx = -theta_r / 2 dt + sigma_r / 2 dW``. That level is the default. An
explicit ``m_r`` is stored on :class:`MarketParams` and used by the
literal Euler scheme of the Monte Carlo engine, which makes any mismatch
visible.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ParameterError, SingularParameterError

__all__ = [
    "MarketParams",
    "zcb_price",
    "bond_price_from_root",
    "consistent_m_r",
    "tilted_rate_params",
    "tilted_zcb_price",
    "simple_forward_rate",
]


def consistent_m_r(theta_r, sigma_r):
    """Long-run level for which the closed-form bond price is exact."""
    return sigma_r**2 / (4.0 * theta_r)


@dataclass(frozen=True)
class MarketParams:
    """Financial-market inputs.

    Attributes:
        r0: initial short rate.
        theta_r, sigma_r: Longstaff speed and volatility.
        S0, sigma_S: initial share price and equity volatility.
        rho: correlation between the rate and equity Brownian motions.
        m_r: Longstaff level; ``None`` selects :func:`consistent_m_r`.
        mu_S: real-world equity drift. Carried for completeness only.
        R0: first-period reference rate; ``None`` means the simple rate
            implied by the bond curve over one coupon period.
    """

    r0: float
    theta_r: float
    sigma_r: float
    S0: float
    sigma_S: float
    rho: float
    m_r: float | None = None
    mu_S: float = 0.0
    R0: float | None = None

    def __post_init__(self):
        if not (self.r0 >= 0):
            raise ParameterError("r0 must be nonnegative")
        frozen = self.theta_r == 0 and self.sigma_r == 0
        if not (frozen or (self.theta_r > 0 and self.sigma_r > 0)):
            raise ParameterError("theta_r and sigma_r must both be positive (or both zero)")
        if not (self.S0 > 0):
            raise ParameterError("S0 must be positive")
        if not (self.sigma_S >= 0):
            raise ParameterError("sigma_S must be nonnegative")
        if not (-1.0 <= self.rho <= 1.0):
            raise ParameterError("rho must lie in [-1, 1]")
        if self.m_r is not None and not (self.m_r >= 0):
            raise ParameterError("m_r must be nonnegative")
        if self.R0 is not None and not (self.R0 >= 0):
            raise ParameterError("R0 must be nonnegative")

    @property
    def level(self):
        """Long-run level actually used by simulations."""
        if self.m_r is not None:
            return self.m_r
        return 0.0 if self.theta_r == 0 else consistent_m_r(self.theta_r, self.sigma_r)

    def reference_rate(self, delta):
        """First-coupon reference rate ``R0``."""
        if self.R0 is not None:
            return self.R0
        return float(simple_forward_rate(self.r0, delta, self.theta_r, self.sigma_r))

    def zcb(self, T):
        return zcb_price(self.r0, T, self.theta_r, self.sigma_r)


def bond_price_from_root(x, T, theta_r, sigma_r):
    """Bond price ``A(T) exp(x**2 B(T) + x C(T))`` in terms of the signed root ``x``.

    The closed form is the price for ``r = x**2`` with
    ``dx = -theta_r / 2 dt + sigma_r / 2 dW``; ``x`` changes sign when the
    rate touches zero, after which ``sqrt(r)`` in the rate SDE reads as ``x``.
    """
    x = np.asarray(x, dtype=float)
    T = np.asarray(T, dtype=float)
    psi = np.sqrt(2.0) * sigma_r
    s2 = sigma_r**2
    c1 = theta_r**2 / (psi * s2)
    c2 = psi / 4.0 - theta_r**2 / psi**2
    c3 = -4.0 * theta_r**2 / psi**3
    denom = 1.0 + np.exp(psi * T)
    log_a = 0.5 * np.log(2.0 / denom) + c1 + c2 * T + c3 / denom
    b = -psi / s2 + 2.0 * psi / (s2 * denom)
    c = 2.0 * theta_r * (1.0 - np.exp(0.5 * psi * T))**2 / (s2 * denom)
    out = np.exp(log_a + x * x * b + x * c)
    out = np.where(T == 0, 1.0, out)
    return float(out) if out.ndim == 0 else out


def zcb_price(r0, T, theta_r, sigma_r):
    """Closed-form Longstaff bond price ``P(r0, T)``; broadcasts over ``r0`` and ``T``.

    ``theta_r = sigma_r = 0`` is accepted as the frozen-rate limit ``exp(-r0 T)``.

    Example:
        >>> round(float(zcb_price(0.02, 0.0, 0.2, 0.03)), 12)
        1.0
    """
    r0 = np.asarray(r0, dtype=float)
    T = np.asarray(T, dtype=float)
    if np.any(r0 < 0) or np.any(T < 0):
        raise ParameterError("r0 and T must be nonnegative")
    if theta_r == 0 and sigma_r == 0:
        # frozen rate
        out = np.exp(-r0 * T)
        return float(out) if out.ndim == 0 else out
    if not (theta_r > 0 and sigma_r > 0):
        raise ParameterError("theta_r and sigma_r must be positive")
    return bond_price_from_root(np.sqrt(r0), T, theta_r, sigma_r)


def simple_forward_rate(r, delta, theta_r, sigma_r, root=None):
    """Simple rate ``(1/P(r, delta) - 1)/delta`` over one accrual period.

    ``root`` overrides ``sqrt(r)`` with the signed root of the rate state.
    """
    if root is not None and not (theta_r == 0 and sigma_r == 0):
        bond = bond_price_from_root(root, delta, theta_r, sigma_r)
    else:
        bond = zcb_price(r, delta, theta_r, sigma_r)
    return (1.0 / bond - 1.0) / delta


def tilted_rate_params(theta_r, m_r, sigma_r, sigma_S, rho, nu):
    """Rate parameters of ``nu * r`` under the conversion-leg measure.

    Returns:
        ``(theta_bar, m_bar, sigma_bar)``.

    Raises:
        SingularParameterError: if ``theta_bar`` vanishes while ``m_r != 0``.
    """
    if not (0.0 < nu <= 1.0):
        raise ParameterError("tilted rate parameters need nu in (0, 1]")
    if nu == 1.0:
        return theta_r, m_r, sigma_r
    root = np.sqrt(nu)
    theta_bar = root * (theta_r - sigma_r * sigma_S * rho * (1.0 - nu))
    if theta_bar == 0.0:
        if m_r != 0.0:
            raise SingularParameterError("tilted mean-reversion speed vanishes")
        m_bar = 0.0
    else:
        m_bar = nu * m_r * theta_r / theta_bar
    return theta_bar, m_bar, root * sigma_r


def tilted_zcb_price(market, nu, t, rate_start="scaled"):
    """``E[exp(-nu * int_0^t r du)]`` under the conversion-leg measure.

    ``nu * r`` is again a Longstaff process with :func:`tilted_rate_params`
    started at ``nu * r0``. ``rate_start="unscaled"`` starts it at ``r0``
    instead, which is kept only so the two readings can be compared.
    """
    if nu == 0.0:
        return np.ones_like(np.asarray(t, dtype=float)) if np.ndim(t) else 1.0
    if market.theta_r == 0 and market.sigma_r == 0:
        return zcb_price(nu * market.r0, t, 0.0, 0.0)
    theta_bar, _, sigma_bar = tilted_rate_params(
        market.theta_r, market.level, market.sigma_r, market.sigma_S, market.rho, nu)
    if theta_bar <= 0:
        raise SingularParameterError(
            f"tilted mean-reversion speed {theta_bar:.4g} is not positive")
    if rate_start == "scaled":
        start = nu * market.r0
    elif rate_start == "unscaled":
        start = market.r0
    else:
        raise ParameterError(f"unknown rate_start variant {rate_start!r}")
    return zcb_price(start, t, theta_bar, sigma_bar)
