"""Experiment configuration: dataclass tree with a flat TOML surface.

Every field has a default; unknown keys are rejected at parse time. The
serialized form is section-per-subconfig TOML with an explicit schema version.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field, fields

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .errors import ConfigError

SCHEMA_VERSION = 1

METHODS = ("frozen", "ours", "lms", "cmac", "adapter")

ABLATION_FLAGS = (
    "no_granule_expansion",
    "no_temporal_filter",
    "no_microzones",
    "no_fast_slow",
    "no_meta",
    "no_reference_accel",
    "time_indexed_reference",
    "no_directional_gate",
)


@dataclass
class PlantConfig:
    joints: int = 4
    dt: float = 0.01
    horizon: int = 2000
    period_steps: int = 200
    # pi/4-staggered phases keep the total control effort nearly constant
    # over the cycle, so the reward EMA stays flat under nominal conditions;
    # joint 0 has the largest amplitude and a stiff PD loop so the phase
    # portrait stays locked to the drive even when actuators degrade
    amplitudes: tuple = (0.36, 0.28, 0.28, 0.28)
    phase_shift: tuple = (0.0, 0.7853981633974483, 1.5707963267948966, 2.356194490192345)
    inertia: tuple = (0.05, 0.05, 0.05, 0.05)
    damping: tuple = (0.005, 0.005, 0.005, 0.005)
    coupling_diag: float = 0.08
    coupling_off: float = -0.02
    friction: tuple = (0.005, 0.005, 0.005, 0.005)
    torque_limit: tuple = (2.0, 2.0, 2.0, 2.0)
    kp: tuple = (6.0, 1.2, 1.2, 1.2)
    kd: tuple = (0.8, 0.2, 0.2, 0.2)
    init_jitter: float = 0.01


@dataclass
class FeatureConfig:
    M: int = 2500
    seed: int = 0
    init_std: float = 0.04
    tau_E: float = 0.03
    tau_I: float = 0.30


@dataclass
class ZoneConfig:
    K: int = 4
    min_weight: float = 0.05
    width: float = 0.0          # 0 means default 1/(2K)
    w_max: float = 5.0


@dataclass
class LearnConfig:
    eta_base: float = 0.005
    fast_scale: float = 5.0
    slow_scale: float = 0.2
    fast_decay: float = 1e-3
    slow_decay: float = 0.0
    deadzone_theta: float = 0.25
    momentum_beta: float = 0.85
    l2_gamma: float = 4e-6
    epsilon: float = 1e-8
    learning_start: int = 200
    lam: float = 4.0            # diagonal tracking gain, per joint


@dataclass
class AuthorityConfig:
    g0: float = 0.35
    g_max: float = 0.70
    c0: float = 0.40
    c_max: float = 0.70
    tau_max: float = 0.15


@dataclass
class MetaConfig:
    rho: float = 0.10
    window: int = 50
    check_every: int = 20
    drop_threshold: float = -0.30
    relative_drop: bool = True
    stagnation_horizon: int = 100
    kappa: float = 0.05         # multiplier/gate relaxation, per check
    decay: float = 0.01         # multiplier decay toward nominal, per check
    kappa_gain: float = 0.02    # gain pump, per step
    decay_gain: float = 0.01    # gain dissipation, per step
    soft_gating: bool = True
    lr_bounds: tuple = (0.5, 2.0)
    gain_bounds: tuple = (0.5, 2.0)
    lambda_bounds: tuple = (0.7, 1.5)


@dataclass
class BaselineConfig:
    lms_eta: float = 0.05
    lms_gain: float = 0.35
    cmac_eta: float = 0.005
    cmac_gain: float = 0.35
    warmup: int = 200


@dataclass
class ConsolidationConfig:
    ridge_lambda: float = 1.0
    transient_frac: float = 0.25
    adapter_gain: float = 1.0


@dataclass
class AblationConfig:
    no_granule_expansion: bool = False
    no_temporal_filter: bool = False
    no_microzones: bool = False
    no_fast_slow: bool = False
    no_meta: bool = False
    no_reference_accel: bool = False
    time_indexed_reference: bool = False
    no_directional_gate: bool = False
    phase_offset: float = 0.0


@dataclass
class SweepConfig:
    families: tuple = ("actuator_scale",)
    severities: tuple = (0.9, 0.7, 0.5)
    onset_step: int = 0
    removal_step: int = -1      # -1 means never removed
    methods: tuple = ("frozen", "ours")
    seeds: tuple = (0, 1, 2, 3, 4, 5, 6, 7, 8, 9)
    episodes: int = 3
    workers: int = 1
    calibration_episodes: int = 5


@dataclass
class ExperimentConfig:
    schema_version: int = SCHEMA_VERSION
    out_dir: str = "out"
    plant: PlantConfig = field(default_factory=PlantConfig)
    features: FeatureConfig = field(default_factory=FeatureConfig)
    zones: ZoneConfig = field(default_factory=ZoneConfig)
    learn: LearnConfig = field(default_factory=LearnConfig)
    authority: AuthorityConfig = field(default_factory=AuthorityConfig)
    meta: MetaConfig = field(default_factory=MetaConfig)
    baselines: BaselineConfig = field(default_factory=BaselineConfig)
    consolidation: ConsolidationConfig = field(default_factory=ConsolidationConfig)
    ablation: AblationConfig = field(default_factory=AblationConfig)
    sweep: SweepConfig = field(default_factory=SweepConfig)


def fast_profile(cfg: ExperimentConfig) -> ExperimentConfig:
    """Small-feature, short-protocol profile for quick test runs."""
    cfg = copy_config(cfg)
    cfg.features.M = 256
    return cfg


def copy_config(cfg: ExperimentConfig) -> ExperimentConfig:
    return _from_dict(_to_dict(cfg))


# --- (de)serialization -------------------------------------------------------

_SECTIONS = {
    "plant": PlantConfig,
    "features": FeatureConfig,
    "zones": ZoneConfig,
    "learn": LearnConfig,
    "authority": AuthorityConfig,
    "meta": MetaConfig,
    "baselines": BaselineConfig,
    "consolidation": ConsolidationConfig,
    "ablation": AblationConfig,
    "sweep": SweepConfig,
}


def _to_dict(cfg: ExperimentConfig) -> dict:
    out = {"schema_version": cfg.schema_version, "out_dir": cfg.out_dir}
    for name in _SECTIONS:
        out[name] = dataclasses.asdict(getattr(cfg, name))
    return out


def _coerce(value, template):
    if isinstance(template, tuple):
        return tuple(value)
    if isinstance(template, bool):
        return bool(value)
    if isinstance(template, int) and not isinstance(template, bool):
        return int(value)
    if isinstance(template, float):
        return float(value)
    return value


def _build_section(cls, data: dict):
    defaults = cls()
    known = {f.name for f in fields(cls)}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown keys in [{cls.__name__}]: {sorted(unknown)}")
    kwargs = {}
    for f in fields(cls):
        if f.name in data:
            kwargs[f.name] = _coerce(data[f.name], getattr(defaults, f.name))
    return cls(**kwargs)


def _from_dict(data: dict) -> ExperimentConfig:
    known_top = set(_SECTIONS) | {"schema_version", "out_dir"}
    unknown = set(data) - known_top
    if unknown:
        raise ConfigError(f"unknown top-level keys: {sorted(unknown)}")
    version = data.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ConfigError(f"unsupported schema version {version}")
    kwargs = {"schema_version": version, "out_dir": str(data.get("out_dir", "out"))}
    for name, cls in _SECTIONS.items():
        kwargs[name] = _build_section(cls, data.get(name, {}))
    return ExperimentConfig(**kwargs)


def _toml_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int, float)):
        return repr(v)
    if isinstance(v, str):
        return '"' + v.replace("\\", "\\\\").replace('"', '\\"') + '"'
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_toml_value(x) for x in v) + "]"
    raise ConfigError(f"cannot serialize value {v!r}")


def dumps(cfg: ExperimentConfig) -> str:
    d = _to_dict(cfg)
    lines = [f"schema_version = {d['schema_version']}", f"out_dir = {_toml_value(d['out_dir'])}"]
    for name in _SECTIONS:
        lines.append("")
        lines.append(f"[{name}]")
        for k, v in d[name].items():
            lines.append(f"{k} = {_toml_value(v)}")
    return "\n".join(lines) + "\n"


def loads(text: str) -> ExperimentConfig:
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"config parse error: {exc}") from exc
    return _from_dict(data)


def load(path) -> ExperimentConfig:
    with open(path, "rb") as f:
        try:
            data = tomllib.load(f)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"config parse error: {exc}") from exc
    return _from_dict(data)


def save(cfg: ExperimentConfig, path) -> None:
    with open(path, "w") as f:
        f.write(dumps(cfg))
