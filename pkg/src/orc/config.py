"""Scenario configuration: YAML loading with strict validation, and the paper presets."""

from __future__ import annotations

import copy
import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import yaml

PAPER_BOUNDS = (-1.6, 1.6, -1.0, 1.0)
PAPER_INITIAL_POSITIONS = [
    [-0.8, -0.2],
    [-0.8, 0.2],
    [-0.4, -0.2],
    [-0.4, 0.2],
    [0.0, -0.2],
    [0.0, 0.2],
    [0.4, -0.2],
    [0.4, 0.2],
    [0.8, -0.2],
    [0.8, 0.2],
]

LEARNERS = ("gp", "rfgp", "orfgp", "truth")
PRESETS = ("paper-ti", "paper-tv", "paper-tv-gp-diverge")


class ConfigError(ValueError):
    pass


@dataclass
class DomainConfig:
    bounds: tuple = PAPER_BOUNDS
    h: float = 0.02


@dataclass
class RfConfig:
    num_features: int = 20
    lengthscale: float = 1.1
    reg: float = 0.1
    magnitude: float = 5.0
    gain_noise: Any = None  # None: use reg
    literal_update: bool = False


@dataclass
class GpConfig:
    lengthscale: float = 1.3
    magnitude: float = 1.0e4
    mean: str = "linear"
    rho: tuple = (0.0, 0.0)
    refit: bool = False
    lengthscale_bounds: tuple = (0.05, 3.0)


@dataclass
class BetaConfig:
    mode: str = "constant"
    sqrt_beta: float = 1.0e-3
    delta: float = 0.05


@dataclass
class ControlConfig:
    kappa: float = 1.0
    dt: float = 1.0
    inner_steps: int = 1


@dataclass
class DensityConfig:
    preset: str = "ti_gmm"
    components: list = field(default_factory=list)


@dataclass
class SeedConfig:
    features: int = 0
    noise: int = 1
    init: int = 2
    oracle: int = 3


@dataclass
class OracleConfig:
    enabled: bool = True
    restarts: int = 50


@dataclass
class OutputConfig:
    dir: str = "runs/out"
    record_timing: bool = False


@dataclass
class ScenarioConfig:
    name: str = "custom"
    domain: DomainConfig = field(default_factory=DomainConfig)
    n: int = 10
    initial_positions: Any = None  # None: uniform random from the init seed
    learner: str = "rfgp"
    data_window: str = "all"
    rf: RfConfig = field(default_factory=RfConfig)
    gp: GpConfig = field(default_factory=GpConfig)
    noise_std: float = 0.01
    beta: BetaConfig = field(default_factory=BetaConfig)
    control: ControlConfig = field(default_factory=ControlConfig)
    density: DensityConfig = field(default_factory=DensityConfig)
    T: int = 500
    seeds: SeedConfig = field(default_factory=SeedConfig)
    oracle: OracleConfig = field(default_factory=OracleConfig)
    eps_pos: float = 1.0e-6
    output: OutputConfig = field(default_factory=OutputConfig)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def config_hash(self) -> str:
        data = self.to_dict()
        data.pop("output")  # where results go does not change them
        blob = json.dumps(data, sort_keys=True, default=list).encode()
        return hashlib.sha256(blob).hexdigest()

    def replace(self, **overrides) -> "ScenarioConfig":
        """Copy with dotted-key overrides, e.g. ``replace(**{"seeds.noise": 4})``; result is validated."""
        data = self.to_dict()
        for key, value in overrides.items():
            node = data
            parts = key.split(".")
            for p in parts[:-1]:
                node = node[p]
            if parts[-1] not in node:
                raise ConfigError(f"unknown field {key!r}")
            node[parts[-1]] = value
        return from_dict(data)

    def validate(self) -> "ScenarioConfig":
        _validate(self)
        return self


# ---------------------------------------------------------------------------


def _build(cls, data: Any, path: str):
    if not isinstance(data, dict):
        raise ConfigError(f"{path or 'config'}: expected a mapping, got {type(data).__name__}")
    known = {f.name: f for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - set(known))
    if unknown:
        raise ConfigError(f"{path or 'config'}: unknown field(s) {', '.join(unknown)}")
    kwargs = {}
    for name, value in data.items():
        f = known[name]
        sub = f.default_factory if f.default_factory is not dataclasses.MISSING else None
        if sub is not None and dataclasses.is_dataclass(sub):
            kwargs[name] = _build(sub, value, f"{path}.{name}" if path else name)
        else:
            kwargs[name] = copy.deepcopy(value)
    return cls(**kwargs)


def _check(cond: bool, field_name: str, msg: str):
    if not cond:
        raise ConfigError(f"{field_name}: {msg}")


def _positive(value, field_name: str):
    _check(isinstance(value, (int, float)) and not isinstance(value, bool) and value > 0, field_name, f"must be positive, got {value!r}")


def _validate(c: ScenarioConfig):
    _check(isinstance(c.domain.bounds, (list, tuple)) and len(c.domain.bounds) == 4, "domain.bounds", "needs [x_min, x_max, y_min, y_max]")
    c.domain.bounds = tuple(float(b) for b in c.domain.bounds)
    x0, x1, y0, y1 = c.domain.bounds
    _check(x1 > x0 and y1 > y0, "domain.bounds", "max must exceed min")
    _positive(c.domain.h, "domain.h")
    for lo, hi in ((x0, x1), (y0, y1)):
        k = (hi - lo) / c.domain.h
        _check(abs(k - round(k)) <= 1e-9 * max(1.0, k), "domain.h", f"{c.domain.h} does not divide the domain side {hi - lo:g}")
    _check(isinstance(c.n, int) and c.n >= 1, "n", "must be a positive integer")
    if c.initial_positions is not None:
        pos = c.initial_positions
        _check(isinstance(pos, (list, tuple)) and len(pos) == c.n, "initial_positions", f"needs {c.n} [x, y] pairs")
        for i, p in enumerate(pos):
            _check(isinstance(p, (list, tuple)) and len(p) == 2, f"initial_positions[{i}]", "needs [x, y]")
            _check(x0 <= p[0] <= x1 and y0 <= p[1] <= y1, f"initial_positions[{i}]", "outside the domain")
        c.initial_positions = [[float(a), float(b)] for a, b in pos]
    _check(c.learner in LEARNERS, "learner", f"must be one of {LEARNERS}")
    _check(c.data_window in ("all", "current"), "data_window", "must be 'all' or 'current'")
    _check(isinstance(c.rf.num_features, int) and c.rf.num_features >= 1, "rf.num_features", "must be a positive integer")
    _positive(c.rf.lengthscale, "rf.lengthscale")
    _positive(c.rf.reg, "rf.reg")
    _positive(c.rf.magnitude, "rf.magnitude")
    if c.rf.gain_noise is not None:
        _check(isinstance(c.rf.gain_noise, (int, float)) and c.rf.gain_noise >= 0, "rf.gain_noise", "must be >= 0 or null")
    _positive(c.gp.lengthscale, "gp.lengthscale")
    _positive(c.gp.magnitude, "gp.magnitude")
    _check(c.gp.mean in ("linear", "zero"), "gp.mean", "must be 'linear' or 'zero'")
    _check(len(c.gp.rho) == 2, "gp.rho", "needs two entries")
    c.gp.rho = tuple(float(r) for r in c.gp.rho)
    c.gp.lengthscale_bounds = tuple(float(b) for b in c.gp.lengthscale_bounds)
    _check(isinstance(c.noise_std, (int, float)) and c.noise_std >= 0, "noise_std", "must be >= 0")
    _check(c.beta.mode in ("theoretical", "constant"), "beta.mode", "must be 'theoretical' or 'constant'")
    _check(c.beta.sqrt_beta >= 0, "beta.sqrt_beta", "must be >= 0")
    _check(0 < c.beta.delta <= 1, "beta.delta", "must lie in (0, 1]")
    _positive(c.control.kappa, "control.kappa")
    _positive(c.control.dt, "control.dt")
    _check(c.control.kappa * c.control.dt <= 1, "control", "kappa*dt must not exceed 1")
    _check(isinstance(c.control.inner_steps, int) and c.control.inner_steps >= 1, "control.inner_steps", "must be >= 1")
    _check(c.density.preset in ("ti_gmm", "tv_gmm", "custom"), "density.preset", "must be ti_gmm, tv_gmm or custom")
    if c.density.preset == "custom":
        _check(bool(c.density.components), "density.components", "required for the custom preset")
    _check(isinstance(c.T, int) and c.T >= 1, "T", "must be a positive integer")
    for s in ("features", "noise", "init", "oracle"):
        _check(isinstance(getattr(c.seeds, s), int), f"seeds.{s}", "must be an integer")
    _check(isinstance(c.oracle.restarts, int) and c.oracle.restarts >= 1, "oracle.restarts", "must be >= 1")
    _positive(c.eps_pos, "eps_pos")


def from_dict(data: dict) -> ScenarioConfig:
    return _build(ScenarioConfig, data, "").validate()


# ---------------------------------------------------------------------------
# presets

# Per-learner settings used by the paper presets.  The RF values come from the
# paper; the GP prior is matched to the mixture's range (magnitude) and
# smoothness (lengthscale), and uses the theoretical confidence schedule.
_LEARNER_DEFAULTS = {
    "rfgp": {"rf.num_features": 20, "beta.mode": "constant", "beta.sqrt_beta": 1.0e-3},
    "orfgp": {"rf.num_features": 40, "beta.mode": "constant", "beta.sqrt_beta": 1.0e5},
    "gp": {"beta.mode": "theoretical"},
    "truth": {},
}


def preset(name: str, learner: str | None = None) -> ScenarioConfig:
    """Paper scenario presets; ``learner`` overrides the preset's default learner."""
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; choose from {PRESETS}")
    base = {
        "name": name,
        "domain": {"bounds": list(PAPER_BOUNDS), "h": 0.02},
        "n": 10,
        "initial_positions": copy.deepcopy(PAPER_INITIAL_POSITIONS),
        "noise_std": 0.01,
        "rf": {"reg": 0.1, "magnitude": 5.0},
    }
    if name == "paper-ti":
        base.update(T=500, learner="rfgp", data_window="all", density={"preset": "ti_gmm"})
    elif name == "paper-tv":
        base.update(T=2000, learner="orfgp", data_window="current", density={"preset": "tv_gmm"})
        base["oracle"] = {"enabled": False}
    else:
        base.update(T=2000, learner="gp", data_window="all", density={"preset": "tv_gmm"})
        base["oracle"] = {"enabled": False}
    if learner is not None:
        base["learner"] = learner
    cfg = from_dict(base)
    return cfg.replace(**_LEARNER_DEFAULTS[cfg.learner])


def load_config(path: str | Path) -> ScenarioConfig:
    """Load a YAML scenario file.

    A top-level ``preset:`` key (with optional ``learner:``) starts from that
    preset; remaining keys override it using nested mappings.
    """
    text = Path(path).read_text()
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f" (line {mark.line + 1}, column {mark.column + 1})" if mark else ""
        raise ConfigError(f"{path}: YAML parse error{where}: {exc}") from exc
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    return config_from_mapping(data)


def config_from_mapping(data: dict) -> ScenarioConfig:
    data = dict(data)
    preset_name = data.pop("preset", None)
    if preset_name is None:
        return from_dict(data)
    base = preset(preset_name, data.get("learner")).to_dict()
    _merge(base, data, "")
    return from_dict(base)


def _merge(base: dict, over: dict, path: str):
    for k, v in over.items():
        where = f"{path}.{k}" if path else k
        if k not in base:
            raise ConfigError(f"{where}: unknown field")
        if isinstance(base[k], dict) and isinstance(v, dict):
            _merge(base[k], v, where)
        else:
            base[k] = v
