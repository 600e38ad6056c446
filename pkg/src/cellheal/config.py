"""Experiment configuration: one TOML document covering scenario, traffic,
power-reduction, healing, oracle, and seed settings.

Every key has a default (the desk-scale 19-cell setup the test suite runs);
unknown keys are rejected by name. Parsing and serialization round-trip
losslessly. README documents each key.
"""

from typing import Optional

import tomli
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from .errors import ConfigError
from .healer import DEFAULT_INIT_ALPHAS
from .scenario import (
    EnbConfig,
    NetworkLayout,
    PropagationParams,
    TrafficParams,
    build_hex_grid,
)


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


class ScenarioSection(_Section):
    rings: int = 2  # 19-cell hexagonal grid
    inter_site_distance: float = 500.0
    cell_radius: Optional[float] = None  # default: isd / sqrt(3)
    max_power_dbm: float = 30.0
    total_prbs: int = 24
    prbs_per_subband: int = 8


class PropagationSection(_Section):
    pathloss_intercept_db: float = 15.3  # 128.1 dB at 1 km
    pathloss_per_decade_db: float = 37.6
    shadowing_stddev_db: float = 8.0
    noise_dbm_per_prb: float = -121.45


class TrafficSection(_Section):
    # tuned so the hotspot cell's reference blocking sits around 3-8%
    arrival_rate: float = 0.64
    file_size_kbits: float = 6300.0
    min_prbs_per_user: int = 1
    max_prbs_per_user: int = 4
    hotspots: dict = Field(default_factory=lambda: {"0": 2.1})

    @field_validator("hotspots")
    @classmethod
    def _digit_keys(cls, v):
        for key in v:
            if not str(key).lstrip("-").isdigit():
                raise ValueError(f"hotspot key {key!r} is not an eNB id")
        return {str(k): float(val) for k, val in v.items()}


class IcicSection(_Section):
    default_alpha: float = 0.5  # network-wide reference power factor


class SimSection(_Section):
    duration_s: int = 400
    warmup_s: int = 80
    matrix_duration_s: int = 600  # longer window for coupling estimation


class HealingSection(_Section):
    faulty_enb: int = -1  # -1: pick the worst cell from the reference episode
    tier1: list = Field(default_factory=list)  # empty: derive from geometry
    bcr_threshold_pct: float = 5.0
    bcr_discount: float = 0.3
    init_alphas: list = Field(default_factory=lambda: list(DEFAULT_INIT_ALPHAS))
    alpha_grid_step: float = 0.0125
    convergence_tol: float = 0.01
    max_iterations: int = 15
    min_optimization_iterations: int = 1


class SweepSection(_Section):
    alpha_min: float = 0.0125
    alpha_max: float = 1.0
    alpha_step: float = 0.0125
    reference_band_pct: float = 2.0  # tolerance band for picking the default
    workers: int = 1


class CurveSection(_Section):
    lo: float
    hi: float
    mid: float
    slope: float


class OracleSection(_Section):
    coupling_row: list = Field(default_factory=lambda: [9.0, 5.0, 4.0, 3.0, 2.0, 1.0])
    noise_pct: float = 5.0
    ftt_faulty: CurveSection = CurveSection(lo=8.0, hi=24.0, mid=0.47, slope=16.0)
    bcr_faulty: CurveSection = CurveSection(lo=1.0, hi=10.0, mid=0.80, slope=10.0)
    ftt_tier: CurveSection = CurveSection(lo=8.0, hi=52.0, mid=0.30, slope=-16.0)
    bcr_tier: CurveSection = CurveSection(lo=0.5, hi=9.0, mid=0.08, slope=-16.0)
    init_alphas: list = Field(default_factory=lambda: [0.9, 0.65, 0.45, 0.25, 0.05])
    bcr_discount: float = 0.0
    max_iterations: int = 10
    min_optimization_iterations: int = 5


class SeedsSection(_Section):
    root: int = 1


class ExperimentConfig(_Section):
    output_dir: str = "out"
    scenario: ScenarioSection = Field(default_factory=ScenarioSection)
    propagation: PropagationSection = Field(default_factory=PropagationSection)
    traffic: TrafficSection = Field(default_factory=TrafficSection)
    icic: IcicSection = Field(default_factory=IcicSection)
    sim: SimSection = Field(default_factory=SimSection)
    healing: HealingSection = Field(default_factory=HealingSection)
    sweep: SweepSection = Field(default_factory=SweepSection)
    oracle: OracleSection = Field(default_factory=OracleSection)
    seeds: SeedsSection = Field(default_factory=SeedsSection)

    def build_layout(self):
        s = self.scenario
        template = EnbConfig(
            id=0,
            position=(0.0, 0.0),
            max_power_dbm=s.max_power_dbm,
            alpha=self.icic.default_alpha,
            total_prbs=s.total_prbs,
            prbs_per_subband=s.prbs_per_subband,
        )
        return build_hex_grid(s.rings, s.inter_site_distance,
                              defaults=template, cell_radius=s.cell_radius)

    def propagation_params(self):
        p = self.propagation
        return PropagationParams(
            pathloss_intercept_db=p.pathloss_intercept_db,
            pathloss_per_decade_db=p.pathloss_per_decade_db,
            shadowing_stddev_db=p.shadowing_stddev_db,
            noise_dbm_per_prb=p.noise_dbm_per_prb,
        )

    def traffic_params(self):
        t = self.traffic
        return TrafficParams(
            arrival_rate=t.arrival_rate,
            file_size_kbits=t.file_size_kbits,
            min_prbs_per_user=t.min_prbs_per_user,
            max_prbs_per_user=t.max_prbs_per_user,
            rate_multipliers={int(k): v for k, v in t.hotspots.items()},
        )


def _validation_message(err):
    first = err.errors()[0]
    loc = ".".join(str(p) for p in first["loc"])
    if first["type"] == "extra_forbidden":
        return f"unknown config key {loc!r}"
    return f"invalid config value at {loc!r}: {first['msg']}"


def config_from_dict(data):
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as err:
        raise ConfigError(_validation_message(err)) from err


def loads_config(text):
    try:
        data = tomli.loads(text)
    except tomli.TOMLDecodeError as err:
        raise ConfigError(f"malformed config file: {err}") from err
    return config_from_dict(data)


def load_config(path):
    with open(path, "r", encoding="utf-8") as fh:
        return loads_config(fh.read())


def _toml_scalar(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, float)):
        return repr(value)
    if isinstance(value, str):
        escaped = value.replace("\\", "\\\\").replace('"', '\\"')
        return f'"{escaped}"'
    if isinstance(value, (list, tuple)):
        return "[" + ", ".join(_toml_scalar(v) for v in value) + "]"
    raise TypeError(f"cannot serialize {type(value).__name__} to TOML")


def _emit_table(lines, name, table):
    # None marks an absent optional key (TOML has no null); omitting it
    # round-trips back to the None default
    table = {k: v for k, v in table.items() if v is not None}
    scalars = {k: v for k, v in table.items() if not isinstance(v, dict)}
    subtables = {k: v for k, v in table.items() if isinstance(v, dict)}
    if name and (scalars or not subtables):
        lines.append(f"[{name}]")
    for key, value in scalars.items():
        lines.append(f"{key} = {_toml_scalar(value)}")
    if scalars:
        lines.append("")
    for key, sub in subtables.items():
        _emit_table(lines, f"{name}.{key}" if name else key, sub)


def dumps_config(cfg):
    """Serialize to TOML; parsing the result reproduces the config exactly."""
    data = cfg.model_dump()
    lines = []
    top = {k: v for k, v in data.items() if not isinstance(v, dict) and v is not None}
    for key, value in top.items():
        lines.append(f"{key} = {_toml_scalar(value)}")
    if top:
        lines.append("")
    for key, value in data.items():
        if isinstance(value, dict):
            _emit_table(lines, key, value)
    return "\n".join(lines).rstrip() + "\n"


def save_config(cfg, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps_config(cfg))
