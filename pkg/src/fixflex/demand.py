"""Traveler demand: profiles with individual coefficient vectors.

Coefficients are stored as nonnegative magnitudes; the choice module
applies them as disutility weights.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import astuple, dataclass, fields
from importlib import resources
from pathlib import Path

import numpy as np

from fixflex.config import DAY_END_S, DAY_START_S
from fixflex.errors import ParseError, ValidationError

BETA_NAMES = ("d0", "d_ivt", "d_gas", "t0", "t_wk", "m_wt", "f_wt", "m_ivt", "f_ivt",
              "f_trfr", "t_fr")

COMPACT_HEADER = ["dp_time", "O", "D", "rq_id", "b_c0", "b_c_ivt", "b_c_gas", "b_T0", "b_T_wk",
                  "b_T_wt", "b_m_ivt", "b_f_ivt", "b_f_trfr", "b_T_fr"]
EXTENDED_HEADER = ["dp_time", "O", "D", "rq_id", "b_c0", "b_c_ivt", "b_c_gas", "b_T0", "b_T_wk",
                   "b_m_wt", "b_f_wt", "b_m_ivt", "b_f_ivt", "b_f_trfr", "b_T_fr"]

_COLUMN_OF = {
    "d0": "b_c0", "d_ivt": "b_c_ivt", "d_gas": "b_c_gas", "t0": "b_T0", "t_wk": "b_T_wk",
    "m_wt": "b_m_wt", "f_wt": "b_f_wt", "m_ivt": "b_m_ivt", "f_ivt": "b_f_ivt",
    "f_trfr": "b_f_trfr", "t_fr": "b_T_fr",
}


@dataclass(frozen=True)
class CoefficientVector:
    d0: float = 0.0      # auto ASC
    d_ivt: float = 0.0   # 1/min
    d_gas: float = 0.0   # 1/$
    t0: float = 0.0      # transit ASC
    t_wk: float = 0.0
    m_wt: float = 0.0
    f_wt: float = 0.0
    m_ivt: float = 0.0
    f_ivt: float = 0.0
    f_trfr: float = 0.0  # 1/transfer
    t_fr: float = 0.0    # 1/$

    def as_array(self):
        return np.array(astuple(self))

    def scaled(self, name, factor):
        vals = {f.name: getattr(self, f.name) for f in fields(self)}
        vals[name] *= factor
        return CoefficientVector(**vals)


@dataclass(frozen=True)
class CoefficientSpec:
    """Per-coefficient (mean, std_dev, threshold) triples."""
    mean: CoefficientVector
    std: CoefficientVector
    threshold: CoefficientVector

    def __post_init__(self):
        for name in BETA_NAMES:
            if getattr(self.std, name) < 0 or getattr(self.threshold, name) < 0:
                raise ValidationError(f"negative std or threshold for {name}")

    @classmethod
    def from_dict(cls, d):
        parts = {k: {} for k in ("mean", "std", "threshold")}
        for name in BETA_NAMES:
            mean, std, thr = d[name]
            parts["mean"][name] = float(mean)
            parts["std"][name] = float(std)
            parts["threshold"][name] = float(thr)
        return cls(*(CoefficientVector(**parts[k]) for k in ("mean", "std", "threshold")))

    @classmethod
    def bundled(cls, region="san_diego"):
        text = resources.files("fixflex.data").joinpath(f"coefficients_{region}.json").read_text()
        return cls.from_dict(json.loads(text)["coefficients"])


@dataclass(frozen=True)
class TravelerProfile:
    rq_id: int
    origin: int
    destination: int
    dp_time: float
    betas: CoefficientVector
    rng_seed: tuple = ()

    def __post_init__(self):
        if self.origin == self.destination:
            raise ValidationError(f"traveler {self.rq_id}: origin equals destination")
        if not 0 <= self.dp_time < DAY_END_S:
            raise ValidationError(f"traveler {self.rq_id}: dp_time {self.dp_time} outside the day")
        for name in BETA_NAMES:
            if getattr(self.betas, name) < 0:
                raise ValidationError(f"traveler {self.rq_id}: negative beta {name}")


def traveler_seed(global_seed, rq_id):
    """Entropy for a traveler's private RNG stream."""
    return (int(global_seed), int(rq_id), 0xC401CE)


def traveler_rng(profile):
    return np.random.default_rng(list(profile.rng_seed))


def sample_coefficients(spec, rng):
    """Draw each beta from Normal(mean, sd) and clamp at its threshold."""
    draws = rng.normal(spec.mean.as_array(), spec.std.as_array())
    clamped = np.maximum(draws, spec.threshold.as_array())
    return CoefficientVector(*map(float, clamped))


def load_demand(path, global_seed=0):
    path = Path(path)
    profiles = []
    seen = set()
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames
        if header is None:
            return []
        if all(c in header for c in EXTENDED_HEADER):
            extended = True
        elif all(c in header for c in COMPACT_HEADER):
            extended = False
        else:
            raise ParseError(path, 1, "header matches neither the compact nor extended demand layout")
        for lineno, row in enumerate(reader, start=2):
            try:
                dp = float(row["dp_time"])
                o, d, rq = int(row["O"]), int(row["D"]), int(row["rq_id"])
                vals = {}
                for name in BETA_NAMES:
                    col = _COLUMN_OF[name]
                    if not extended and name in ("m_wt", "f_wt"):
                        col = "b_T_wt"
                    vals[name] = float(row[col])
            except (TypeError, ValueError) as exc:
                raise ParseError(path, lineno, f"bad value ({exc})") from None
            if rq in seen:
                raise ValidationError(f"{path}:{lineno}: duplicate rq_id {rq}")
            seen.add(rq)
            try:
                profiles.append(TravelerProfile(rq, o, d, dp, CoefficientVector(**vals),
                                                traveler_seed(global_seed, rq)))
            except ValidationError as exc:
                raise ValidationError(f"{path}:{lineno}: {exc}") from None
    return profiles


def _fmt(x):
    return repr(float(x)) if not float(x).is_integer() else str(int(x))


def write_demand(profiles, path, extended=None):
    """Write profiles in the compact layout when waits coincide, else extended."""
    if extended is None:
        extended = any(p.betas.m_wt != p.betas.f_wt for p in profiles)
    header = EXTENDED_HEADER if extended else COMPACT_HEADER
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for p in profiles:
            b = p.betas
            row = [_fmt(p.dp_time), p.origin, p.destination, p.rq_id, _fmt(b.d0), _fmt(b.d_ivt),
                   _fmt(b.d_gas), _fmt(b.t0), _fmt(b.t_wk)]
            row += [_fmt(b.m_wt), _fmt(b.f_wt)] if extended else [_fmt(b.m_wt)]
            row += [_fmt(b.m_ivt), _fmt(b.f_ivt), _fmt(b.f_trfr), _fmt(b.t_fr)]
            w.writerow(row)


HOURS = tuple(range(5, 24))


def peaked_profile(am=(7, 9), pm=(18, 19), peak_weight=3.0):
    """Hourly departure histogram over 5:00-23:59 with AM and PM peaks."""
    w = np.ones(len(HOURS))
    for lo, hi in (am, pm):
        for h in range(lo, hi):
            w[HOURS.index(h)] = peak_weight
    return w / w.sum()


def uniform_profile():
    return np.full(len(HOURS), 1.0 / len(HOURS))


def generate_synthetic_demand(n_trips, network, temporal_profile, spec, seed):
    """Random trips between walk nodes with sampled coefficient vectors."""
    if n_trips < 0:
        raise ValidationError("n_trips must be >= 0")
    node_ids = sorted(network.nodes)
    if len(node_ids) < 2:
        raise ValidationError("synthetic demand needs a network with at least two nodes")
    profile = np.asarray(temporal_profile, dtype=float)
    if profile.shape != (len(HOURS),) or np.any(profile < 0) or not math.isclose(profile.sum(), 1.0):
        raise ValidationError("temporal profile must be a normalized 19-bin histogram (5:00-23:59)")
    rng = np.random.default_rng([int(seed), 0xDE3A])
    hours = rng.choice(len(HOURS), size=n_trips, p=profile)
    offsets = rng.integers(0, 3600, size=n_trips)
    out = []
    for i in range(n_trips):
        o = node_ids[rng.integers(len(node_ids))]
        d = o
        while d == o:
            d = node_ids[rng.integers(len(node_ids))]
        dp = DAY_START_S + 3600 * int(hours[i]) + int(offsets[i])
        betas = sample_coefficients(spec, np.random.default_rng([int(seed), i, 0xBE7A]))
        out.append((dp, i, o, d, betas))
    out.sort(key=lambda r: (r[0], r[1]))
    return [TravelerProfile(rq, o, d, float(dp), b, traveler_seed(seed, rq))
            for dp, rq, o, d, b in out]
