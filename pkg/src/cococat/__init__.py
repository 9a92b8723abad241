"""Pricing of multi-region contingent-convertible catastrophe (CoCoCat) bonds.

The package combines closed-form risk-neutral pricing under three
inter-regional loss-dependence structures with a joint Monte Carlo oracle,
a calibration pipeline for historical loss data and a command-line front end.

Example:
    >>> from cococat import load_config, price
    >>> cfg = load_config("paper-ila.cfg")
    >>> res = price(cfg.covenant, cfg.market, cfg.model, cfg.impact)
    >>> 0 < res.total < 1.5
    True
"""

from .distributions import (BetaProportion, Degenerate, Exponential, Gamma, Lognormal,
                            Tilted, Weibull, exp_tilt, laplace)
from .aggregate import compound_poisson_cdf, nfold_cdf
from .errors import (CoCoCatError, ConfigError, DataError, FitError, NumericalToleranceError,
                     ParameterError, SingularParameterError)
from .loss_models import (ILA, ILP, PLA, CompoundPoissonSpec, ImpactCoefficients,
                          PoissonIntensity, kappa, tilt_model)
from .term_structure import MarketParams, tilted_rate_params, zcb_price
from .trigger import trigger_law
from .pricing import (BondCovenant, NumericalConfig, PriceBreakdown, RegionSpec, Variants,
                      conversion_leg, coupon_leg, price, price_multi_region, principal_leg,
                      riskless_value, sweep)
from .montecarlo import (McEstimate, Scenario, SimulationConfig, martingale_check,
                         simulate_price, simulate_prices, simulate_trigger_times)
from .config import RunConfig, load_config, parse_config

__version__ = "0.1.0"
