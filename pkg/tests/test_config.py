import csv
import dataclasses

import pytest

from conftest import ROOT
from fixflex.config import Params, ScenarioConfig, TransitMode, config_from_matrix_row, \
    config_to_matrix_row, dump_config, load_config, load_matrix, paper_matrix, write_matrix
from fixflex.errors import ConfigError


def test_defaults_equal_published_values():
    p = Params()
    assert (p.epsilon, p.eta) == (0.01, 0.05)
    assert (p.frt_fare, p.micro_fare_per_mile, p.walk_speed_mph) == (2.5, 1.97, 2.8)
    assert (p.frt_labor_per_hr, p.frt_gas_per_mile, p.frt_operating_hr) == (170, 0.350, 19)
    assert (p.micro_labor_per_hr, p.micro_gas_per_mile) == (130, 0.305)
    assert (p.max_wait_min, p.max_detour, p.accessibility_budget_min) == (20, 2.0, 15)


def test_every_param_overridable():
    for f in dataclasses.fields(Params):
        if f.type in ("float", float) and f.name not in ("damping",):
            p = Params.from_dict({f.name: getattr(Params(), f.name) * 1.1 + 0.01})
            assert getattr(p, f.name) != getattr(Params(), f.name)
    with pytest.raises(ConfigError, match="unknown parameter"):
        Params.from_dict({"nope": 1})


def test_scenario_invariants():
    with pytest.raises(ConfigError):
        ScenarioConfig("x", "FixedOnly", 15, 0.0, 5, ())
    with pytest.raises(ConfigError):
        ScenarioConfig("x", "MicroOnly", 15, 1.0, 5, ("AM",))
    with pytest.raises(ConfigError):
        ScenarioConfig("x", "MicroPlusFixed", None, 1.0, 5, ("AM",))
    with pytest.raises(ConfigError):
        ScenarioConfig("x", "MicroOnly", None, 1.5, 5, ("AM",))
    with pytest.raises(ConfigError):
        ScenarioConfig("x", "MicroOnly", None, 1.0, 5, ("NIGHT",))
    with pytest.raises(ConfigError):
        Params(eta=2)


def test_transit_mode_spellings():
    assert TransitMode.parse("Micro only") is TransitMode.MICRO_ONLY
    assert TransitMode.parse("Fixed only") is TransitMode.FIXED_ONLY
    assert TransitMode.parse("Micro+Fixed") is TransitMode.MICRO_PLUS_FIXED
    with pytest.raises(ConfigError):
        TransitMode.parse("tram")


def test_paper_matrix_layout():
    m = paper_matrix()
    assert len(m) == 38
    assert sum(c.transit_mode is TransitMode.MICRO_ONLY for c in m) == 12
    assert sum(c.transit_mode is TransitMode.FIXED_ONLY for c in m) == 2
    # rows 12 and 25 are the FRT-only baselines
    assert m[12].transit_mode is TransitMode.FIXED_ONLY and m[12].headway_min == 15
    assert m[25].transit_mode is TransitMode.FIXED_ONLY and m[25].headway_min == 30
    s13 = m[13]
    assert (s13.transit_mode, s13.headway_min, s13.virtual_stop_coverage, s13.fleet_size,
            s13.operating_periods) == (TransitMode.MICRO_PLUS_FIXED, 15, 0.75, 10, ("AM", "PM"))


def test_scenario_13_round_trips(tmp_path):
    s13 = paper_matrix()[13]
    dump_config(s13, tmp_path / "s.yaml")
    assert load_config(tmp_path / "s.yaml") == s13
    assert config_from_matrix_row(config_to_matrix_row(s13)) == s13


def test_matrix_round_trip(tmp_path):
    write_matrix(paper_matrix(), tmp_path / "m.csv")
    assert load_matrix(tmp_path / "m.csv") == paper_matrix()


def test_bundled_matrices_parse():
    assert load_matrix(ROOT / "configs" / "table7_matrix.csv") == paper_matrix()
    conv = load_matrix(ROOT / "configs" / "synthetic_convergence.csv")
    assert len(conv) == 8 and all(c.params.averaging == "msa" for c in conv)


def test_param_columns_in_matrix(tmp_path):
    row = config_to_matrix_row(paper_matrix()[13])
    row["param.eta"] = "0.1"
    c = config_from_matrix_row(row)
    assert c.params.eta == 0.1


def test_bad_matrix_reports_line(tmp_path):
    p = tmp_path / "m.csv"
    p.write_text("scenario_id,transit_mode,headway_min,virtual_stop_pct,fleet_size,operating_periods\n"
                 "0,Micro only,0,75,10,AM;PM\n1,Fixed only,15,0,5,\n")
    # fleet on a FixedOnly row is a config error
    with pytest.raises(ConfigError, match="m.csv:3"):
        load_matrix(p)


def test_bad_yaml(tmp_path):
    p = tmp_path / "s.yaml"
    p.write_text("- just\n- a list\n")
    with pytest.raises(ConfigError):
        load_config(p)
    p.write_text("scenario_id: x\ntransit_mode: MicroOnly\nbogus: 1\n")
    with pytest.raises(ConfigError):
        load_config(p)


def test_period_windows_and_hours():
    c = ScenarioConfig("x", "MicroOnly", None, 1.0, 5, ("PM", "AM"))
    assert c.period_windows() == (("AM", 18000, 36000), ("PM", 54000, 72000))
    assert c.micro_operating_hours == 10.0
