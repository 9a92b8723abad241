"""JSON run configurations: schema validation and object construction."""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import jsonschema

from .distributions import (BetaProportion, Degenerate, Exponential, Gamma, Lognormal,
                            Weibull)
from .errors import ConfigError, ParameterError
from .loss_models import ILA, ILP, PLA, CompoundPoissonSpec, ImpactCoefficients, PoissonIntensity
from .montecarlo import SimulationConfig
from .pricing import BondCovenant, NumericalConfig, Variants
from .term_structure import MarketParams

__all__ = ["SCHEMA_VERSION", "SCHEMA", "RunConfig", "load_config", "parse_config",
           "bundled_config_path", "severity_to_json", "model_to_json"]

SCHEMA_VERSION = 1

_NUM = {"type": "number"}
_OPT_NUM = {"type": ["number", "null"]}


def _obj(props, required=()):
    return {"type": "object", "properties": props, "required": list(required),
            "additionalProperties": False}


_INTENSITY = {"oneOf": [
    {"type": "number", "minimum": 0},
    _obj({"rates": {"type": "array", "items": {"type": "number", "minimum": 0}, "minItems": 1},
          "breaks": {"type": "array", "items": {"type": "number"}}}, ["rates"]),
]}

_SEVERITY = {"oneOf": [
    _obj({"family": {"const": "exponential"}, "rate": _NUM}, ["family", "rate"]),
    _obj({"family": {"const": "lognormal"}, "mu": _NUM, "sigma": _NUM},
         ["family", "mu", "sigma"]),
    _obj({"family": {"const": "gamma"}, "shape": _NUM, "scale": _NUM},
         ["family", "shape", "scale"]),
    _obj({"family": {"const": "weibull"}, "shape": _NUM, "scale": _NUM},
         ["family", "shape", "scale"]),
]}

_PROPORTION = {"oneOf": [
    _obj({"family": {"const": "degenerate"}, "p": _NUM}, ["family", "p"]),
    _obj({"family": {"const": "beta"}, "a": _NUM, "b": _NUM}, ["family", "a", "b"]),
]}

_REGION = _obj({"intensity": _INTENSITY, "severity": _SEVERITY}, ["intensity", "severity"])

_MODEL = {"oneOf": [
    _obj({"type": {"const": "ILP"}, "region1": _REGION, "region2": _REGION,
          "d1": _NUM, "d2": _NUM}, ["type", "region1", "region2", "d1", "d2"]),
    _obj({"type": {"const": "ILA"}, "intensity": _INTENSITY, "severity1": _SEVERITY,
          "severity2": _SEVERITY, "d1": _NUM, "d2": _NUM},
         ["type", "intensity", "severity1", "severity2", "d1", "d2"]),
    _obj({"type": {"const": "PLA"}, "intensity": _INTENSITY, "total_severity": _SEVERITY,
          "proportion": _PROPORTION, "d1": _NUM, "d2": _NUM},
         ["type", "intensity", "total_severity", "proportion", "d1", "d2"]),
]}

SCHEMA = _obj({
    "schema_version": {"const": SCHEMA_VERSION},
    "covenant": _obj({"T": _NUM, "Z": _NUM, "delta": _NUM, "c": _NUM, "zeta": _NUM, "nu": _NUM},
                     ["T", "Z", "delta", "c", "zeta", "nu"]),
    "market": _obj({"r0": _NUM, "theta_r": _NUM, "sigma_r": _NUM, "S0": _NUM, "sigma_S": _NUM,
                    "rho": _NUM, "m_r": _OPT_NUM, "mu_S": _NUM, "R0": _OPT_NUM},
                   ["r0", "theta_r", "sigma_r", "S0", "sigma_S", "rho"]),
    "model": _MODEL,
    "impact": {"oneOf": [_obj({"alpha": _NUM, "beta": _NUM}, ["alpha", "beta"]),
                         _obj({"delta": _NUM}, ["delta"])]},
    "numerics": _obj({"time_nodes": {"type": "integer", "minimum": 2}, "rtol": _NUM,
                      "max_time_nodes": {"type": "integer"},
                      "grid_size": {"type": "integer", "minimum": 16},
                      "series_tail": _NUM, "proportion_nodes": {"type": "integer", "minimum": 1}}),
    "variants": _obj({"coupon": {"enum": ["minus", "plus"]},
                      "exponent": {"enum": ["proof", "theorem"]},
                      "rate_start": {"enum": ["scaled", "unscaled"]}}),
    "simulation": _obj({"n_paths": {"type": "integer", "minimum": 1}, "dt": _NUM,
                        "seed": {"type": "integer", "minimum": 0},
                        "chunk_size": {"type": "integer", "minimum": 1},
                        "workers": {"type": "integer", "minimum": 1},
                        "rate_scheme": {"enum": ["exact", "euler"]}}),
}, ["schema_version", "covenant", "market", "model", "impact"])


@dataclass(frozen=True)
class RunConfig:
    covenant: BondCovenant
    market: MarketParams
    model: object
    impact: ImpactCoefficients
    numerics: NumericalConfig
    variants: Variants
    simulation: SimulationConfig
    raw: dict


def _severity(spec):
    fam = spec["family"]
    args = {k: v for k, v in spec.items() if k != "family"}
    return {"exponential": Exponential, "lognormal": Lognormal, "gamma": Gamma,
            "weibull": Weibull}[fam](**args)


def _intensity(spec):
    if isinstance(spec, dict):
        return PoissonIntensity(tuple(spec["rates"]), tuple(spec.get("breaks", ())))
    return PoissonIntensity((float(spec),))


def _proportion(spec):
    if spec["family"] == "degenerate":
        return Degenerate(spec["p"])
    return BetaProportion(spec["a"], spec["b"])


def _model(spec):
    kind = spec["type"]
    if kind == "ILP":
        regions = [CompoundPoissonSpec(_intensity(spec[r]["intensity"]),
                                       _severity(spec[r]["severity"]))
                   for r in ("region1", "region2")]
        return ILP(regions[0], regions[1], spec["d1"], spec["d2"])
    if kind == "ILA":
        return ILA(_intensity(spec["intensity"]), _severity(spec["severity1"]),
                   _severity(spec["severity2"]), spec["d1"], spec["d2"])
    return PLA(_intensity(spec["intensity"]), _severity(spec["total_severity"]),
               _proportion(spec["proportion"]), spec["d1"], spec["d2"])


def parse_config(raw):
    """Validate a configuration mapping and build the pricing objects.

    Raises:
        ConfigError: schema violations, unknown keys or invalid parameter values.
    """
    try:
        jsonschema.validate(raw, SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"config invalid at {where}: {exc.message}") from None
    try:
        model = _model(raw["model"])
        imp = raw["impact"]
        if "delta" in imp:
            from .calibration import impact_coefficients
            impact = impact_coefficients(imp["delta"], model)
        else:
            impact = ImpactCoefficients(imp["alpha"], imp["beta"])
        variants = Variants(**raw.get("variants", {}))
        return RunConfig(
            covenant=BondCovenant(**raw["covenant"]),
            market=MarketParams(**raw["market"]),
            model=model,
            impact=impact,
            numerics=NumericalConfig(**raw.get("numerics", {})),
            variants=variants,
            simulation=SimulationConfig(variants=variants, **raw.get("simulation", {})),
            raw=copy.deepcopy(raw),
        )
    except ParameterError as exc:
        raise ConfigError(f"config invalid: {exc}") from None


def bundled_config_path(name):
    """Path of a configuration shipped with the package (e.g. ``paper-ila.cfg``)."""
    ref = resources.files("cococat") / "configs" / name
    return Path(str(ref))


def load_config(path):
    """Read and validate a JSON configuration file.

    A bare name that does not exist on disk is looked up among the bundled
    configurations.

    Raises:
        OSError: unreadable file.
        ConfigError: malformed JSON or schema violations.
    """
    path = Path(path)
    if not path.exists() and path.name == str(path) and bundled_config_path(path.name).exists():
        path = bundled_config_path(path.name)
    text = path.read_text()
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: not valid JSON ({exc.msg} at line {exc.lineno})") from None
    return parse_config(raw)


def severity_to_json(dist):
    if isinstance(dist, Exponential):
        return {"family": "exponential", "rate": dist.rate}
    if isinstance(dist, Lognormal):
        return {"family": "lognormal", "mu": dist.mu, "sigma": dist.sigma}
    if isinstance(dist, Gamma):
        return {"family": "gamma", "shape": dist.shape, "scale": dist.scale}
    if isinstance(dist, Weibull):
        return {"family": "weibull", "shape": dist.shape, "scale": dist.scale}
    raise ConfigError(f"severity {type(dist).__name__} has no configuration form")


def _intensity_json(intensity):
    if intensity.is_homogeneous:
        return intensity.rates[0]
    return {"rates": list(intensity.rates), "breaks": list(intensity.breaks)}


def model_to_json(model):
    if isinstance(model, ILP):
        return {"type": "ILP", "d1": model.d1, "d2": model.d2,
                **{name: {"intensity": _intensity_json(r.intensity),
                          "severity": severity_to_json(r.severity)}
                   for name, r in (("region1", model.region1), ("region2", model.region2))}}
    if isinstance(model, ILA):
        return {"type": "ILA", "intensity": _intensity_json(model.intensity),
                "severity1": severity_to_json(model.severity1),
                "severity2": severity_to_json(model.severity2), "d1": model.d1, "d2": model.d2}
    prop = model.proportion
    prop_json = ({"family": "degenerate", "p": prop.p} if isinstance(prop, Degenerate)
                 else {"family": "beta", "a": prop.a, "b": prop.b})
    return {"type": "PLA", "intensity": _intensity_json(model.intensity),
            "total_severity": severity_to_json(model.total_severity),
            "proportion": prop_json, "d1": model.d1, "d2": model.d2}
