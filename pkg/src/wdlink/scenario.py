"""Scenario files: the single configuration format driving every CLI run.

A scenario is one JSON document (versioned via ``schema_version``) naming the
lasers, the servo, the band plans, the transmit shapes, the channel settings,
and an explicit seed for every random stage.  Validation errors carry the
JSON path of the offending field so a broken file points at itself.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .bandplan import BandPlan, make_default_plans
from .bitload import FecProfile
from .channel import default_masks, load_mask_csv
from .noise import LaserSpec
from .ofdm_tx import SUPPORTED_ORDERS, TxConfig
from .opll import LoopConfig, pi_gains_for

SCHEMA_VERSION = 1


class ScenarioError(ValueError):
    """Invalid scenario content; message starts with the JSON path."""

    def __init__(self, path: str, msg: str):
        super().__init__(f"{path}: {msg}")
        self.json_path = path


def _get(d: dict, key: str, path: str, kind=None, required=True, default=None):
    if not isinstance(d, dict):
        raise ScenarioError(path, "expected an object")
    if key not in d:
        if required:
            raise ScenarioError(f"{path}.{key}", "missing required field")
        return default
    v = d[key]
    if kind is not None:
        if kind is float:
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                raise ScenarioError(f"{path}.{key}", f"expected a number, got {type(v).__name__}")
            v = float(v)
        elif kind is int:
            if isinstance(v, bool) or not isinstance(v, int):
                raise ScenarioError(f"{path}.{key}", f"expected an integer, got {type(v).__name__}")
        elif not isinstance(v, kind):
            raise ScenarioError(f"{path}.{key}", f"expected {kind.__name__}, got {type(v).__name__}")
    return v


@dataclass(frozen=True)
class BandScenario:
    name: str
    plan: BandPlan
    master: str
    slave: str
    tx: TxConfig
    mask: tuple
    mask_source: str
    target_snr_db: float
    downconvert: dict | None


@dataclass(frozen=True)
class Scenario:
    schema_version: int
    description: str
    fec: FecProfile
    lasers: dict
    lock: dict
    bands: tuple
    seeds: dict
    psd_rbw_hz: float

    def band(self, name: str) -> BandScenario:
        for b in self.bands:
            if b.name == name:
                return b
        raise KeyError(f"no band named {name!r} in scenario")

    def loop_config_for(self, band: BandScenario) -> LoopConfig:
        master = self.lasers[band.master]
        slave = self.lasers[band.slave]
        kp, ki = pi_gains_for(
            self.lock["unity_gain_hz"], self.lock["pi_zero_hz"], self.lock["actuator_bw_hz"]
        )
        return LoopConfig(
            target_offset_hz=slave.offset_hz - master.offset_hz,
            kp=kp,
            ki=ki,
            actuator_bw_hz=self.lock["actuator_bw_hz"],
            sim_rate_hz=self.lock["sim_rate_hz"],
            duration_s=self.lock["duration_s"],
            initial_freq_error_hz=self.lock["initial_freq_error_hz"],
        )


def _parse_plan(value, path: str) -> BandPlan:
    builtins = make_default_plans()
    if isinstance(value, str):
        name = value.removeprefix("builtin:")
        if value.startswith("builtin:") and name in builtins:
            return builtins[name]
        raise ScenarioError(path, f"unknown plan reference {value!r}")
    if isinstance(value, dict):
        try:
            return BandPlan.from_dict(value)
        except (KeyError, TypeError, ValueError) as e:
            raise ScenarioError(path, f"invalid plan: {e}") from None
    raise ScenarioError(path, "plan must be 'builtin:<name>' or an object")


def _parse_mask(value, path: str, base_dir: Path) -> tuple:
    w_mask, d_mask = default_masks()
    if isinstance(value, str):
        if value == "builtin:W":
            return w_mask, value
        if value == "builtin:D":
            return d_mask, value
        raise ScenarioError(path, f"unknown mask reference {value!r}")
    if isinstance(value, dict) and "csv" in value:
        csv_path = base_dir / str(value["csv"])
        try:
            return load_mask_csv(csv_path), f"csv:{value['csv']}"
        except OSError as e:
            raise ScenarioError(path, f"cannot read mask CSV: {e}") from None
        except ValueError as e:
            raise ScenarioError(path, f"bad mask CSV: {e}") from None
    raise ScenarioError(path, "mask must be 'builtin:W', 'builtin:D', or {'csv': path}")


def _parse_tx(d: dict, path: str) -> TxConfig:
    bits = _get(d, "bits_per_subcarrier", path, int)
    if bits not in SUPPORTED_ORDERS:
        raise ScenarioError(f"{path}.bits_per_subcarrier",
                            f"must be one of {sorted(SUPPORTED_ORDERS)}")
    kwargs = dict(
        bits_per_subcarrier=bits,
        n_symbols=_get(d, "n_symbols", path, int),
        n_training=_get(d, "n_training", path, int),
        n_pilots=_get(d, "n_pilots", path, int),
        cp_fraction=_get(d, "cp_fraction", path, float),
        clip_ratio_db=_get(d, "clip_ratio_db", path, float),
        oversample=_get(d, "oversample", path, int),
        prbs_order=_get(d, "prbs_order", path, int, required=False, default=17),
        prbs_seed_state=_get(d, "prbs_seed_state", path, int, required=False,
                             default=0x1FFFF),
    )
    try:
        return TxConfig(**kwargs)
    except ValueError as e:
        raise ScenarioError(path, str(e)) from None


def _parse_downconvert(d, path: str):
    if d is None:
        return None
    lo = _get(d, "seed_lo_hz", path, float)
    mult = _get(d, "mult", path, int)
    window = _get(d, "if_window_hz", path, list)
    if len(window) != 2 or not all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in window):
        raise ScenarioError(f"{path}.if_window_hz", "expected [low_hz, high_hz]")
    low, high = float(window[0]), float(window[1])
    if lo <= 0 or mult < 1 or not 0 <= low < high:
        raise ScenarioError(path, "downconvert values out of range")
    return {"seed_lo_hz": lo, "mult": mult, "if_window_hz": (low, high)}


def scenario_from_dict(doc: dict, base_dir: Path) -> Scenario:
    if not isinstance(doc, dict):
        raise ScenarioError("$", "scenario root must be an object")
    version = _get(doc, "schema_version", "$", int)
    if version != SCHEMA_VERSION:
        raise ScenarioError("$.schema_version",
                            f"unsupported version {version} (expected {SCHEMA_VERSION})")
    description = _get(doc, "description", "$", str, required=False, default="")

    fec_d = _get(doc, "fec", "$", dict)
    try:
        fec = FecProfile(
            overhead_fraction=_get(fec_d, "overhead_fraction", "$.fec", float),
            ber_threshold=_get(fec_d, "ber_threshold", "$.fec", float),
        )
    except ValueError as e:
        raise ScenarioError("$.fec", str(e)) from None

    lasers_d = _get(doc, "lasers", "$", dict)
    if not lasers_d:
        raise ScenarioError("$.lasers", "at least one laser required")
    lasers = {}
    for label, ld in lasers_d.items():
        path = f"$.lasers.{label}"
        lw = _get(ld, "linewidth_hz", path, float)
        off = _get(ld, "offset_hz", path, float)
        if lw < 0:
            raise ScenarioError(f"{path}.linewidth_hz", "must be non-negative")
        lasers[label] = LaserSpec(label=label, linewidth_hz=lw, offset_hz=off)

    lock_d = _get(doc, "lock", "$", dict)
    lock = {key: _get(lock_d, key, "$.lock", float)
            for key in ("sim_rate_hz", "duration_s", "actuator_bw_hz",
                        "unity_gain_hz", "pi_zero_hz", "initial_freq_error_hz")}
    for key in ("sim_rate_hz", "duration_s", "actuator_bw_hz", "unity_gain_hz"):
        if lock[key] <= 0:
            raise ScenarioError(f"$.lock.{key}", "must be positive")
    if lock["pi_zero_hz"] < 0:
        raise ScenarioError("$.lock.pi_zero_hz", "must be non-negative")

    bands_l = _get(doc, "bands", "$", list)
    if not bands_l:
        raise ScenarioError("$.bands", "at least one band required")
    bands = []
    names = set()
    for i, bd in enumerate(bands_l):
        path = f"$.bands[{i}]"
        name = _get(bd, "name", path, str)
        if name in names:
            raise ScenarioError(f"{path}.name", f"duplicate band name {name!r}")
        names.add(name)
        master = _get(bd, "master", path, str)
        slave = _get(bd, "slave", path, str)
        for role, label in (("master", master), ("slave", slave)):
            if label not in lasers:
                raise ScenarioError(f"{path}.{role}", f"unknown laser {label!r}")
        plan = _parse_plan(_get(bd, "plan", path), f"{path}.plan")
        tx = _parse_tx(_get(bd, "tx", path, dict), f"{path}.tx")
        ch = _get(bd, "channel", path, dict)
        mask, mask_source = _parse_mask(_get(ch, "mask", f"{path}.channel"),
                                        f"{path}.channel.mask", base_dir)
        snr = ch.get("target_snr_db")
        if snr is None:
            snr = math.inf  # noiseless
        elif isinstance(snr, bool) or not isinstance(snr, (int, float)):
            raise ScenarioError(f"{path}.channel.target_snr_db", "expected a number or null")
        dc = _parse_downconvert(bd.get("downconvert"), f"{path}.downconvert")
        bands.append(BandScenario(
            name=name, plan=plan, master=master, slave=slave, tx=tx,
            mask=mask, mask_source=mask_source, target_snr_db=float(snr),
            downconvert=dc,
        ))

    seeds_d = _get(doc, "seeds", "$", dict)
    seeds = {}
    for band in bands:
        for stage in ("lock", "noise"):
            key = f"{stage}_{band.name}"
            seeds[key] = _get(seeds_d, key, "$.seeds", int)
    psd_rbw = _get(doc, "psd_rbw_hz", "$", float, required=False, default=100e6)
    if psd_rbw <= 0:
        raise ScenarioError("$.psd_rbw_hz", "must be positive")

    return Scenario(
        schema_version=version,
        description=description,
        fec=fec,
        lasers=lasers,
        lock=lock,
        bands=tuple(bands),
        seeds=seeds,
        psd_rbw_hz=psd_rbw,
    )


def load_scenario(path) -> Scenario:
    p = Path(path)
    text = p.read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise ScenarioError(str(p), f"invalid JSON at line {e.lineno}: {e.msg}") from None
    return scenario_from_dict(doc, p.parent)


def default_scenario_path() -> Path:
    return Path(resources.files("wdlink").joinpath("data/default_scenario.json"))
