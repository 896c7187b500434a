"""TOML run configuration.

Layout (every section and key optional; missing values take built-in defaults)::

    schema = 1
    [perception]              h0, w0, weights, l0, gamma, beta_l, beta_ner, calibration_file
    [perception.calibration]  grad_p5, grad_p95, lap_p5, lap_p95, epsilon
    [policy]                  tau_text, tau_image, ell_max, beta_bw_mbps, bandwidth_gate_literal
    [cost_model]              CostModel fields; edge_queue_cap may be "unbounded"
    [simulation]              bandwidths_mbps, seed, strategies, uniform_threshold, ablation_bandwidth_mbps
    [synthetic]               SyntheticSpec fields except seed (taken from simulation.seed)
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Callable

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .errors import ConfigError, DomainError, ParseError
from .perception import Calibration, ImageWeights, PerceptionConfig, TextParams
from .policy import PolicyConfig
from .simulator import ALL_STRATEGIES, CostModel, Strategy
from .workload import Dist, SyntheticSpec

SCHEMA_VERSION = 1


@dataclass(frozen=True)
class SimulationSettings:
    bandwidths_mbps: tuple[float, ...] = (200.0, 300.0, 400.0)
    seed: int = 7
    strategies: tuple[Strategy, ...] = ALL_STRATEGIES
    uniform_threshold: float = 0.5
    ablation_bandwidth_mbps: float = 300.0

    def __post_init__(self) -> None:
        if not self.bandwidths_mbps or any(not b > 0 for b in self.bandwidths_mbps):
            raise DomainError("bandwidths_mbps must be a non-empty list of positive numbers")
        if not self.strategies:
            raise DomainError("strategies must not be empty")
        if not 0.0 <= self.uniform_threshold <= 1.0:
            raise DomainError("uniform_threshold must be in [0, 1]")
        if not self.ablation_bandwidth_mbps > 0:
            raise DomainError("ablation_bandwidth_mbps must be positive")


@dataclass(frozen=True)
class Config:
    perception: PerceptionConfig = field(default_factory=PerceptionConfig)
    policy: PolicyConfig = field(default_factory=PolicyConfig)
    cost_model: CostModel = field(default_factory=CostModel)
    simulation: SimulationSettings = field(default_factory=SimulationSettings)
    synthetic: SyntheticSpec = field(default_factory=SyntheticSpec)

    def synthetic_spec(self, request_count: int | None = None) -> SyntheticSpec:
        spec = replace(self.synthetic, seed=self.simulation.seed)
        if request_count is not None:
            spec = replace(spec, request_count=request_count)
        return spec


# -- value coercion ------------------------------------------------------------


def _number(v: Any) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise TypeError("expected a number")
    return float(v)


def _integer(v: Any) -> int:
    if isinstance(v, bool) or not isinstance(v, int):
        raise TypeError("expected an integer")
    return v


def _boolean(v: Any) -> bool:
    if not isinstance(v, bool):
        raise TypeError("expected true or false")
    return v


def _string(v: Any) -> str:
    if not isinstance(v, str):
        raise TypeError("expected a string")
    return v


def _numbers(n: int | None = None) -> Callable[[Any], tuple[float, ...]]:
    def conv(v: Any) -> tuple[float, ...]:
        if not isinstance(v, list) or (n is not None and len(v) != n):
            raise TypeError(f"expected a list of {n or 'one or more'} numbers")
        return tuple(_number(x) for x in v)

    return conv


def _int_pair(v: Any) -> tuple[int, int]:
    if not isinstance(v, list) or len(v) != 2:
        raise TypeError("expected [lo, hi]")
    return (_integer(v[0]), _integer(v[1]))


def _table(v: Any) -> dict:
    if not isinstance(v, dict):
        raise TypeError("expected a table")
    return v


def _queue_cap(v: Any) -> int | None:
    if v == "unbounded":
        return None
    return _integer(v)


def _strategies(v: Any) -> tuple[Strategy, ...]:
    if not isinstance(v, list):
        raise TypeError("expected a list of strategy names")
    return tuple(Strategy.parse(_string(x)) for x in v)


def _dist(v: Any) -> Dist:
    if not isinstance(v, dict) or set(v) - {"kind", "a", "b"}:
        raise TypeError("expected a table with keys kind, a, b")
    return Dist(_string(v.get("kind", "uniform")), _number(v.get("a", 0.0)), _number(v.get("b", 1.0)))


_CALIBRATION_KEYS = {k: _number for k in Calibration.KEYS}
_PERCEPTION_KEYS = {
    "h0": _integer,
    "w0": _integer,
    "weights": _numbers(4),
    "l0": _integer,
    "gamma": _number,
    "beta_l": _number,
    "beta_ner": _number,
    "calibration_file": _string,
    "calibration": _table,
}
_POLICY_KEYS = {
    "tau_text": _number,
    "tau_image": _number,
    "ell_max": _number,
    "beta_bw_mbps": _number,
    "bandwidth_gate_literal": _boolean,
}
_COST_KEYS: dict[str, Callable[[Any], Any]] = {
    f.name: _number for f in fields(CostModel) if f.name != "edge_queue_cap"
}
_COST_KEYS["edge_queue_cap"] = _queue_cap
_SIMULATION_KEYS = {
    "bandwidths_mbps": _numbers(),
    "seed": _integer,
    "strategies": _strategies,
    "uniform_threshold": _number,
    "ablation_bandwidth_mbps": _number,
}
_SYNTHETIC_KEYS = {
    "request_count": _integer,
    "arrival_rate": _number,
    "image_probability": _number,
    "text_complexity": _dist,
    "image_complexity": _dist,
    "text_bytes": _int_pair,
    "image_bytes": _int_pair,
}
_SECTIONS = {
    "perception": _PERCEPTION_KEYS,
    "policy": _POLICY_KEYS,
    "cost_model": _COST_KEYS,
    "simulation": _SIMULATION_KEYS,
    "synthetic": _SYNTHETIC_KEYS,
}


def _section(doc: dict, name: str, schema: dict[str, Callable[[Any], Any]]) -> dict[str, Any]:
    raw = doc.get(name, {})
    if not isinstance(raw, dict):
        raise ConfigError(f"[{name}] must be a table")
    out = {}
    for key, value in raw.items():
        if key not in schema:
            raise ConfigError(f"[{name}] unknown key {key!r}")
        try:
            out[key] = schema[key](value)
        except (TypeError, DomainError) as exc:
            raise ConfigError(f"[{name}] {key}: {exc}") from None
    return out


def _build(section: str, ctor: Callable[..., Any], *args: Any, **kwargs: Any) -> Any:
    try:
        return ctor(*args, **kwargs)
    except DomainError as exc:
        raise ConfigError(f"[{section}] {exc}") from None


def config_from_dict(doc: dict, base_dir: str | Path = ".") -> Config:
    schema = doc.get("schema", SCHEMA_VERSION)
    if schema != SCHEMA_VERSION:
        raise ConfigError(f"unsupported schema {schema!r} (expected {SCHEMA_VERSION})")
    unknown = set(doc) - set(_SECTIONS) - {"schema"}
    if unknown:
        raise ConfigError(f"unknown section {sorted(unknown)[0]!r}")

    p = _section(doc, "perception", _PERCEPTION_KEYS)
    cal_inline = p.pop("calibration", None)
    cal_file = p.pop("calibration_file", None)
    if cal_inline is not None and cal_file is not None:
        raise ConfigError("[perception] give either calibration_file or a calibration table, not both")
    if cal_file is not None:
        try:
            calibration = Calibration.load(Path(base_dir) / cal_file)
        except (OSError, ParseError) as exc:
            raise ConfigError(f"[perception] calibration_file: {exc}") from None
    else:
        cal = _section({"perception.calibration": cal_inline or {}}, "perception.calibration", _CALIBRATION_KEYS)
        calibration = _build("perception.calibration", Calibration, **cal)
    weights = p.pop("weights", None)
    text = _build(
        "perception",
        TextParams,
        **{k: p.pop(k) for k in ("l0", "gamma", "beta_l", "beta_ner") if k in p},
    )
    perception = _build(
        "perception",
        PerceptionConfig,
        weights=_build("perception", ImageWeights, *weights) if weights else ImageWeights(),
        calibration=calibration,
        text=text,
        **p,
    )

    policy = _build("policy", PolicyConfig, **_section(doc, "policy", _POLICY_KEYS))
    cost_model = _build("cost_model", CostModel, **_section(doc, "cost_model", _COST_KEYS))
    simulation = _build("simulation", SimulationSettings, **_section(doc, "simulation", _SIMULATION_KEYS))
    synthetic = _build("synthetic", SyntheticSpec, **_section(doc, "synthetic", _SYNTHETIC_KEYS))
    return Config(perception, policy, cost_model, simulation, synthetic)


def load_config(path: str | Path | None) -> Config:
    if path is None:
        return Config()
    path = Path(path)
    try:
        doc = tomllib.loads(path.read_text(encoding="utf-8"))
    except tomllib.TOMLDecodeError as exc:
        raise ParseError(f"{path}: {exc}") from None
    return config_from_dict(doc, path.parent)


# -- rendering -------------------------------------------------------------------


def _toml_value(v: Any) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int, float)):
        return repr(v)
    if isinstance(v, str):
        return '"' + v.replace("\\", "\\\\").replace('"', '\\"') + '"'
    if isinstance(v, Strategy):
        return _toml_value(v.value)
    if isinstance(v, Dist):
        return f'{{ kind = "{v.kind}", a = {v.a!r}, b = {v.b!r} }}'
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_toml_value(x) for x in v) + "]"
    raise TypeError(f"cannot render {v!r}")


def render_config(cfg: Config) -> str:
    """Render a config as TOML that ``load_config`` reads back to an equal value."""
    per = cfg.perception
    w = per.weights
    lines = [f"schema = {SCHEMA_VERSION}", "", "[perception]"]
    lines += [
        f"h0 = {per.h0}",
        f"w0 = {per.w0}",
        "# resolution, edge density, entropy, sharpness",
        f"weights = {_toml_value([w.w_res, w.w_edge, w.w_ent, w.w_lap])}",
        f"l0 = {per.text.l0}",
        f"gamma = {per.text.gamma!r}",
        f"beta_l = {per.text.beta_l!r}",
        f"beta_ner = {per.text.beta_ner!r}",
        "",
        "[perception.calibration]",
    ]
    lines += [f"{k} = {getattr(per.calibration, k)!r}" for k in Calibration.KEYS]
    lines += ["", "[policy]"]
    lines += [f"{f.name} = {_toml_value(getattr(cfg.policy, f.name))}" for f in fields(PolicyConfig)]
    lines += ["", "[cost_model]"]
    for f in fields(CostModel):
        v = getattr(cfg.cost_model, f.name)
        lines.append(f"{f.name} = {_toml_value('unbounded' if v is None else v)}")
    lines += ["", "[simulation]"]
    lines += [f"{f.name} = {_toml_value(getattr(cfg.simulation, f.name))}" for f in fields(SimulationSettings)]
    lines += ["", "[synthetic]"]
    lines += [
        f"{f.name} = {_toml_value(getattr(cfg.synthetic, f.name))}"
        for f in fields(SyntheticSpec)
        if f.name != "seed"
    ]
    return "\n".join(lines) + "\n"
