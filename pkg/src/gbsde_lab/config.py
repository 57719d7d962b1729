"""Run configuration: strict JSON parsing with documented defaults."""

import difflib
import json
import math
from dataclasses import asdict, dataclass, field, fields

from .errors import ConfigError


@dataclass
class LatticeConfig:
    T: float = 1.0
    N: int = 200
    sigma_lo: float = 0.5
    sigma_hi: float = 1.0
    m_vol: int = 5
    truncation_factor: float = 5.0
    refinement: int = 2


@dataclass
class GeneratorConfig:
    name: str = "signed_sqrt"
    params: dict = field(default_factory=dict)
    lam: float = 0.0


@dataclass
class TerminalConfig:
    name: str = "call"
    params: dict = field(default_factory=lambda: {"K": 0.0})


@dataclass
class Tolerances:
    root: float = 1e-12
    picard: float = 1e-12


@dataclass
class SamplingConfig:
    n_controls: int = 8
    n_paths: int = 256


@dataclass
class RunConfig:
    lattice: LatticeConfig = field(default_factory=LatticeConfig)
    generator: GeneratorConfig = field(default_factory=GeneratorConfig)
    terminal: TerminalConfig = field(default_factory=TerminalConfig)
    alpha_schedule: list = field(default_factory=lambda: [1e-1, 3e-2, 1e-2, 3e-3, 1e-3])
    epsilon_schedule: list = field(default_factory=lambda: [1e-1, 1e-2, 1e-3])
    perturbation: TerminalConfig = field(
        default_factory=lambda: TerminalConfig("constant", {"c": 1.0}))
    tolerances: Tolerances = field(default_factory=Tolerances)
    sampling: SamplingConfig = field(default_factory=SamplingConfig)
    seed: int = 0
    output_dir: str = "reports"

    def to_dict(self):
        out = asdict(self)
        out["generator"]["lambda"] = out["generator"].pop("lam")
        return out

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


_SECTIONS = {"lattice": LatticeConfig, "generator": GeneratorConfig, "terminal": TerminalConfig,
             "perturbation": TerminalConfig, "tolerances": Tolerances, "sampling": SamplingConfig}
_ALIASES = {"lambda": "lam"}


def _unknown(path, key, known):
    hint = difflib.get_close_matches(key, known, n=1)
    suffix = f"; did you mean '{hint[0]}'?" if hint else ""
    return ConfigError(f"{path}{key}", f"unknown field{suffix}")


def _number(path, value, integer=False):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(path, f"expected a number, got {value!r}")
    if integer:
        if int(value) != value:
            raise ConfigError(path, f"expected an integer, got {value!r}")
        return int(value)
    if not math.isfinite(value):
        raise ConfigError(path, "must be finite")
    return float(value)


def _section(cls, data, path):
    if not isinstance(data, dict):
        raise ConfigError(path.rstrip("."), "expected an object")
    names = {f.name: f for f in fields(cls)}
    public = [k for k in names if k != "lam"] + (["lambda"] if "lam" in names else [])
    kwargs = {}
    for key, value in data.items():
        attr = _ALIASES.get(key, key)
        if attr not in names or (attr == "lam" and key != "lambda"):
            raise _unknown(path, key, public)
        default = getattr(cls(), attr)
        where = f"{path}{key}"
        if isinstance(default, dict):
            if not isinstance(value, dict):
                raise ConfigError(where, "expected an object")
            kwargs[attr] = {k: _number(f"{where}.{k}", v) for k, v in value.items()}
        elif isinstance(default, str):
            if not isinstance(value, str):
                raise ConfigError(where, "expected a string")
            kwargs[attr] = value
        else:
            kwargs[attr] = _number(where, value, integer=isinstance(default, int))
    return cls(**kwargs)


def parse_config(data):
    """Build a RunConfig from a parsed JSON document; unknown fields are errors."""
    if not isinstance(data, dict):
        raise ConfigError("", "config must be a JSON object")
    known = [f.name for f in fields(RunConfig)]
    kwargs = {}
    for key, value in data.items():
        if key not in known:
            raise _unknown("", key, known)
        if key in _SECTIONS:
            kwargs[key] = _section(_SECTIONS[key], value, f"{key}.")
        elif key in ("alpha_schedule", "epsilon_schedule"):
            if not isinstance(value, list) or not value:
                raise ConfigError(key, "expected a non-empty list")
            kwargs[key] = [_number(f"{key}[{i}]", v) for i, v in enumerate(value)]
        elif key == "seed":
            kwargs[key] = _number(key, value, integer=True)
        elif key == "output_dir":
            if not isinstance(value, str):
                raise ConfigError(key, "expected a string")
            kwargs[key] = value
    cfg = RunConfig(**kwargs)
    validate_config(cfg)
    return cfg


def validate_config(cfg):
    sched = cfg.alpha_schedule
    if any(a <= 0 for a in sched):
        raise ConfigError("alpha_schedule", "all entries must be > 0")
    if any(b >= a for a, b in zip(sched, sched[1:])):
        raise ConfigError("alpha_schedule", "must be strictly decreasing")
    if any(e < 0 for e in cfg.epsilon_schedule):
        raise ConfigError("epsilon_schedule", "entries must be >= 0")
    for name in ("root", "picard"):
        if not getattr(cfg.tolerances, name) > 0:
            raise ConfigError(f"tolerances.{name}", "must be > 0")
    lat = cfg.lattice
    if not lat.T > 0:
        raise ConfigError("lattice.T", "must be > 0")
    if lat.N < 1:
        raise ConfigError("lattice.N", "must be >= 1")
    if not 0 < lat.sigma_lo <= lat.sigma_hi:
        raise ConfigError("lattice.sigma_lo", "need 0 < sigma_lo <= sigma_hi")
    if lat.m_vol < 2:
        raise ConfigError("lattice.m_vol", "must be >= 2")
    if lat.truncation_factor < 1:
        raise ConfigError("lattice.truncation_factor", "must be >= 1")
    if lat.refinement < 1:
        raise ConfigError("lattice.refinement", "must be >= 1")
    if cfg.sampling.n_controls < 1 or cfg.sampling.n_paths < 1:
        raise ConfigError("sampling", "counts must be >= 1")


def load_config(path):
    """Read and strictly parse a JSON RunConfig document."""
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError("", f"{path}: invalid JSON ({exc})") from exc
    return parse_config(data)
