"""Scenario configuration: one design alternative plus model parameters.

A scenario is stored as a small YAML file; a batch is a CSV matrix whose
columns mirror the testing-scenario table (id, transit mode, headway,
virtual-stop %, fleet size, operating periods).
"""
from __future__ import annotations

import ast
import csv
import dataclasses
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import yaml

from fixflex.errors import ConfigError

# clock hours, [start, end)
PERIODS = {"AM": (5, 10), "MD": (10, 15), "PM": (15, 20)}
DAY_START_S = 5 * 3600
DAY_END_S = 24 * 3600


class TransitMode(str, Enum):
    MICRO_ONLY = "MicroOnly"
    FIXED_ONLY = "FixedOnly"
    MICRO_PLUS_FIXED = "MicroPlusFixed"

    @classmethod
    def parse(cls, text):
        key = str(text).strip().lower().replace(" ", "").replace("_", "").replace("-", "")
        aliases = {
            "microonly": cls.MICRO_ONLY,
            "fixedonly": cls.FIXED_ONLY,
            "frtonly": cls.FIXED_ONLY,
            "micro+fixed": cls.MICRO_PLUS_FIXED,
            "microplusfixed": cls.MICRO_PLUS_FIXED,
            "fixed+micro": cls.MICRO_PLUS_FIXED,
        }
        if key not in aliases:
            raise ConfigError(f"unknown transit mode {text!r}")
        return aliases[key]


@dataclass
class Params:
    # equilibrium
    epsilon: float = 0.01
    eta: float = 0.05
    max_iterations: int = 20
    damping: float = 0.0  # weight on the previous micro attributes, 0 = direct iteration
    averaging: str = "none"  # "none" (use damping) or "msa": n-th observation weighs 1/n
    per_period_update: bool = True
    rejection_wait_cap: float = 3.0
    # cold-start micro attributes
    cold_start_detour: float = 1.2
    cold_start_wait_s: float = 300.0
    # fleet
    vehicle_capacity: int = 8
    max_wait_min: float = 20.0
    max_detour: float = 2.0
    reposition: bool = True
    reposition_window_min: float = 60.0
    reposition_scale_s: float = 600.0
    # fares and travel costs
    frt_fare: float = 2.5
    micro_fare_per_mile: float = 1.97
    auto_fuel_per_mile: float = 0.35
    walk_speed_mph: float = 2.8
    transfer_penalty_s: float = 60.0
    transfer_radius: float = 0.0
    # operating cost coefficients
    frt_operating_hr: float = 19.0
    frt_labor_per_hr: float = 170.0
    frt_gas_per_mile: float = 0.350
    micro_labor_per_hr: float = 130.0
    micro_gas_per_mile: float = 0.305
    # accessibility
    accessibility_budget_min: float = 15.0

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ConfigError("epsilon must be positive")
        if not 0 <= self.eta <= 1:
            raise ConfigError("eta must lie in [0, 1]")
        if self.max_iterations < 1:
            raise ConfigError("max_iterations must be >= 1")
        if not 0 <= self.damping < 1:
            raise ConfigError("damping must lie in [0, 1)")
        if self.averaging not in ("none", "msa"):
            raise ConfigError("averaging must be 'none' or 'msa'")
        if self.cold_start_detour < 1 or self.cold_start_wait_s < 0:
            raise ConfigError("cold-start detour must be >= 1 and wait >= 0")
        if self.vehicle_capacity < 1:
            raise ConfigError("vehicle_capacity must be >= 1")
        if self.max_detour < 1:
            raise ConfigError("max_detour must be >= 1")
        if self.walk_speed_mph <= 0:
            raise ConfigError("walk_speed_mph must be positive")

    @classmethod
    def from_dict(cls, d):
        d = dict(d or {})
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ConfigError(f"unknown parameter(s): {', '.join(sorted(unknown))}")
        return cls(**d)


@dataclass
class ScenarioConfig:
    scenario_id: str
    transit_mode: TransitMode
    headway_min: float | None = None
    virtual_stop_coverage: float = 1.0
    fleet_size: int = 0
    operating_periods: tuple = ()
    partition: str | None = None
    master_seed: int = 0
    params: Params = field(default_factory=Params)

    def __post_init__(self):
        self.scenario_id = str(self.scenario_id)
        if not isinstance(self.transit_mode, TransitMode):
            self.transit_mode = TransitMode.parse(self.transit_mode)
        self.operating_periods = tuple(self.operating_periods or ())
        for p in self.operating_periods:
            if p not in PERIODS:
                raise ConfigError(f"unknown operating period {p!r}")
        if len(set(self.operating_periods)) != len(self.operating_periods):
            raise ConfigError("duplicate operating period")
        if not 0 <= self.virtual_stop_coverage <= 1:
            raise ConfigError(f"virtual_stop_coverage {self.virtual_stop_coverage} outside [0, 1]")
        if self.fleet_size < 0:
            raise ConfigError("fleet_size must be >= 0")
        if self.transit_mode is TransitMode.FIXED_ONLY and self.fleet_size != 0:
            raise ConfigError("FixedOnly scenario must have fleet_size = 0")
        if self.transit_mode is TransitMode.MICRO_ONLY and self.headway_min is not None:
            raise ConfigError("MicroOnly scenario must not set a headway")
        if self.transit_mode is not TransitMode.MICRO_ONLY:
            if self.headway_min is None or self.headway_min <= 0:
                raise ConfigError("FRT scenario needs a positive headway_min")

    @property
    def frt_enabled(self):
        return self.transit_mode is not TransitMode.MICRO_ONLY

    @property
    def micro_enabled(self):
        return (self.transit_mode is not TransitMode.FIXED_ONLY and self.fleet_size > 0
                and self.virtual_stop_coverage > 0 and bool(self.operating_periods))

    @property
    def micro_operating_hours(self):
        return float(sum(PERIODS[p][1] - PERIODS[p][0] for p in self.operating_periods))

    def period_windows(self):
        """(name, start_s, end_s) for each operating period, in clock order."""
        wins = [(p, PERIODS[p][0] * 3600, PERIODS[p][1] * 3600) for p in self.operating_periods]
        return tuple(sorted(wins, key=lambda w: w[1]))

    def to_dict(self):
        return {
            "scenario_id": self.scenario_id,
            "transit_mode": self.transit_mode.value,
            "headway_min": self.headway_min,
            "virtual_stop_coverage": self.virtual_stop_coverage,
            "fleet_size": self.fleet_size,
            "operating_periods": list(self.operating_periods),
            "partition": self.partition,
            "master_seed": self.master_seed,
            "params": dataclasses.asdict(self.params),
        }

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        try:
            params = Params.from_dict(d.pop("params", None))
            return cls(params=params, **d)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)


def load_config(path):
    path = Path(path)
    try:
        data = yaml.safe_load(path.read_text())
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: expected a mapping at top level")
    return ScenarioConfig.from_dict(data)


def dump_config(config, path):
    Path(path).write_text(yaml.safe_dump(config.to_dict(), sort_keys=False))


MATRIX_COLUMNS = ["scenario_id", "transit_mode", "headway_min", "virtual_stop_pct",
                  "fleet_size", "operating_periods"]


def _parse_periods(text):
    text = str(text).strip()
    if text in ("", "0", "[]", "none", "None"):
        return ()
    if text.startswith("["):
        try:
            return tuple(ast.literal_eval(text))
        except (ValueError, SyntaxError):
            raise ConfigError(f"bad operating periods {text!r}") from None
    return tuple(p.strip() for p in text.replace("|", ";").split(";") if p.strip())


def config_from_matrix_row(row, base_params=None):
    """Build a ScenarioConfig from one matrix row (a dict of strings)."""
    try:
        mode = TransitMode.parse(row["transit_mode"])
        headway = float(row["headway_min"]) if str(row.get("headway_min", "")).strip() else 0.0
        pct = float(row["virtual_stop_pct"])
        fleet = int(float(row["fleet_size"]))
        periods = _parse_periods(row.get("operating_periods", ""))
    except KeyError as exc:
        raise ConfigError(f"matrix row missing column {exc}") from None
    except ValueError as exc:
        raise ConfigError(f"bad matrix value: {exc}") from None
    if mode is TransitMode.FIXED_ONLY:
        periods = ()
    params = base_params or Params()
    overrides = {k[len("param."):]: yaml.safe_load(v) for k, v in row.items()
                 if k and k.startswith("param.") and str(v).strip()}
    if overrides:
        params = dataclasses.replace(params, **overrides)
    return ScenarioConfig(
        scenario_id=str(row["scenario_id"]).strip(),
        transit_mode=mode,
        headway_min=None if mode is TransitMode.MICRO_ONLY or math.isclose(headway, 0) else headway,
        virtual_stop_coverage=pct / 100.0,
        fleet_size=fleet,
        operating_periods=periods,
        partition=(row.get("partition") or "").strip() or None,
        master_seed=int(row.get("master_seed") or 0),
        params=params,
    )


def config_to_matrix_row(config):
    return {
        "scenario_id": config.scenario_id,
        "transit_mode": config.transit_mode.value,
        "headway_min": "0" if config.headway_min is None else f"{config.headway_min:g}",
        "virtual_stop_pct": f"{config.virtual_stop_coverage * 100:g}",
        "fleet_size": str(config.fleet_size),
        "operating_periods": ";".join(config.operating_periods),
        "partition": config.partition or "",
        "master_seed": str(config.master_seed),
    }


def load_matrix(path, base_params=None):
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        configs = []
        for lineno, row in enumerate(reader, start=2):
            try:
                configs.append(config_from_matrix_row(row, base_params))
            except ConfigError as exc:
                raise ConfigError(f"{path}:{lineno}: {exc}") from None
    return configs


def write_matrix(configs, path):
    cols = MATRIX_COLUMNS + ["partition", "master_seed"]
    with Path(path).open("w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=cols, lineterminator="\n")
        w.writeheader()
        for c in configs:
            w.writerow(config_to_matrix_row(c))


def paper_matrix():
    """The 38-scenario design matrix (micro-only, FRT-only, and integrated)."""
    rows = []
    sid = 0
    period_sets = (("AM", "PM"), ("AM", "MD", "PM"))
    for cov in (75, 100):
        for fleet in (10, 15, 20):
            for ps in period_sets:
                rows.append(ScenarioConfig(str(sid), TransitMode.MICRO_ONLY, None, cov / 100, fleet, ps))
                sid += 1
    for headway in (15, 30):
        rows.append(ScenarioConfig(str(sid), TransitMode.FIXED_ONLY, headway, 0.0, 0, ()))
        sid += 1
        for cov in (75, 100):
            for fleet in (10, 15, 20):
                for ps in period_sets:
                    rows.append(ScenarioConfig(str(sid), TransitMode.MICRO_PLUS_FIXED, headway,
                                               cov / 100, fleet, ps))
                    sid += 1
    return rows
