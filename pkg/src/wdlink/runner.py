"""Scenario execution and artifact writing.

Per band the chain is: offset-lock the slave laser, synthesize and clip the
frame, ride it on the locked beat's residual phase, shape it with the band
mask, (high band) downconvert through the multiplied-LO window, add noise at
the in-band SNR set point, then sync/demodulate/equalize, measure EVM, load
bits, and price the capacity.

Every artifact is deterministic for a given scenario, so reruns are
byte-identical and the summary can be rebuilt from stored files alone: the
summary builder only ever reads artifacts back, never live objects.
"""

from __future__ import annotations

import hashlib
import json
import math
from pathlib import Path

import numpy as np

from .bandplan import detected_indices
from .bitload import (capacity, load_bits, read_bitload_csv, write_bitload_csv,
                      write_capacity_json, write_threshold_csv)
from .channel import apply_carrier, apply_mask, dband_downconvert
from .noise import PhaseTrace, add_awgn, estimate_psd, write_psd_csv
from .ofdm_rx import (SyncError, band_average_snr_db, count_bit_errors,
                      demodulate, equalize, evm_snr, export_constellation,
                      read_metrics_csv, synchronize, write_constellation_csv,
                      write_metrics_csv)
from .ofdm_tx import build_frame, clip, papr_db
from .opll import (free_running_beat, residual_phase_variance, simulate_lock,
                   write_lock_csv)
from .scenario import BandScenario, Scenario
from .waveform import write_iq

LOCK_PSD_RBW_HZ = 1e3
LOCK_CSV_MAX_ROWS = 4000


def _write_json(path, obj) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def resolve_seeds(scn: Scenario, seed_override=None) -> dict:
    """Scenario seeds, or a deterministic per-stage expansion of an override."""
    if seed_override is None:
        return dict(scn.seeds)
    state = np.random.SeedSequence(seed_override).generate_state(2 * len(scn.bands))
    seeds = {}
    for i, band in enumerate(scn.bands):
        seeds[f"lock_{band.name}"] = int(state[2 * i])
        seeds[f"noise_{band.name}"] = int(state[2 * i + 1])
    return seeds


def _residual_tail(lock_result, duration_s: float) -> PhaseTrace:
    """Settled stretch of the loop's phase error, long enough for one frame."""
    tr = lock_result.phase_error
    n_need = int(math.ceil(duration_s * tr.sample_rate_hz)) + 2
    n_need = min(n_need, len(tr.phases))
    return PhaseTrace(phases=tr.phases[-n_need:].copy(),
                      sample_rate_hz=tr.sample_rate_hz)


def run_band(scn: Scenario, band: BandScenario, seeds: dict, band_dir: Path,
             rbw_hz: float) -> dict:
    """Run one band end to end, writing its artifacts; returns the chain
    record (also stored as chain.json) with a ``failure`` field of None,
    "lock", or "sync"."""
    band_dir.mkdir(parents=True, exist_ok=True)
    master = scn.lasers[band.master]
    slave = scn.lasers[band.slave]
    loop_cfg = scn.loop_config_for(band)
    lock = simulate_lock(master, slave, loop_cfg, seeds[f"lock_{band.name}"])
    stride = max(1, len(lock.phase_error.phases) // LOCK_CSV_MAX_ROWS)
    write_lock_csv(band_dir / "lock.csv", lock, stride=stride)
    f_err, p_err = estimate_psd(lock.phase_error, LOCK_PSD_RBW_HZ)
    write_psd_csv(band_dir / "psd_error.csv", f_err, p_err)

    record = {
        "band": band.name,
        "failure": None,
        "lock": {
            "locked": bool(lock.locked),
            "cycle_slips": int(lock.cycle_slips),
            "residual_phase_var_rad2": float(residual_phase_variance(lock)),
            "target_offset_hz": loop_cfg.target_offset_hz,
        },
    }
    if not lock.locked:
        record["failure"] = "lock"
        _write_json(band_dir / "chain.json", record)
        return record

    tx_wave, ref = build_frame(band.plan, band.tx)
    record["papr_raw_db"] = float(papr_db(tx_wave))
    tx_clipped = clip(tx_wave, band.tx.clip_ratio_db)
    record["papr_clipped_db"] = float(papr_db(tx_clipped))
    write_iq(band_dir / "tx.iq", tx_clipped)
    f_tx, p_tx = estimate_psd(tx_clipped, rbw_hz)
    write_psd_csv(band_dir / "psd_tx.csv", f_tx, p_tx)

    w = apply_carrier(tx_clipped, _residual_tail(lock, tx_clipped.duration_s))
    w = apply_mask(w, band.mask)
    if band.downconvert is not None:
        w = dband_downconvert(
            w,
            seed_lo_hz=band.downconvert["seed_lo_hz"],
            mult=band.downconvert["mult"],
            if_window_hz=band.downconvert["if_window_hz"],
            decimate=band.tx.oversample,
        )
    det = detected_indices(band.plan)
    occupied = len(det) * band.plan.spacing_hz
    w = add_awgn(w, band.target_snr_db, seeds[f"noise_{band.name}"],
                 occupied_bw_hz=occupied)
    write_iq(band_dir / "rx.iq", w)
    f_rx, p_rx = estimate_psd(w, rbw_hz)
    write_psd_csv(band_dir / "psd_rx.csv", f_rx, p_rx)

    try:
        offset = synchronize(w, ref)
    except SyncError as e:
        record["failure"] = "sync"
        record["sync_error"] = str(e)
        _write_json(band_dir / "chain.json", record)
        return record
    record["sync_offset"] = int(offset)

    raw = demodulate(w, band.plan, band.tx, offset)
    eqf = equalize(raw, ref)
    metrics = evm_snr(eqf, ref)
    write_metrics_csv(band_dir / "metrics.csv", metrics)
    errors, total = count_bit_errors(eqf, ref, indices=det)
    record["bit_errors"] = errors
    record["bits_total"] = total
    record["ber"] = errors / total if total else None

    load_map = load_bits(metrics, scn.fec, band.plan)
    write_bitload_csv(band_dir / "bitload.csv", load_map, band.plan)

    data_set = set(int(i) for i in ref.data_idx)
    cands = [int(i) for i in det if int(i) in data_set]
    show = cands[len(cands) // 2]
    record["constellation_subcarrier"] = show
    write_constellation_csv(band_dir / f"constellation_sc{show}.csv",
                            export_constellation(eqf, ref, show))
    _write_json(band_dir / "chain.json", record)
    return record


def build_summary(scn: Scenario, out_dir) -> dict:
    """(Re)build summary.json strictly from stored artifacts.

    Also rewrites capacity.json (it is derived from bitload CSVs) before the
    manifest is hashed, so rerunning this on an existing output directory
    reproduces both files byte for byte.
    """
    out = Path(out_dir)
    bands_summary = {}
    reports = {}
    for band in scn.bands:
        bdir = out / f"band_{band.name}"
        chain = json.loads((bdir / "chain.json").read_text())
        entry = {
            "failure": chain["failure"],
            "lock": chain["lock"],
            "papr_raw_db": chain.get("papr_raw_db"),
            "papr_clipped_db": chain.get("papr_clipped_db"),
            "ber": chain.get("ber"),
            "sync_offset": chain.get("sync_offset"),
            "constellation_subcarrier": chain.get("constellation_subcarrier"),
        }
        if chain["failure"] is None:
            metrics = read_metrics_csv(bdir / "metrics.csv")
            entry["avg_snr_db"] = band_average_snr_db(
                metrics, indices=detected_indices(band.plan))
            load_map = read_bitload_csv(bdir / "bitload.csv")
            rep = capacity(load_map, band.plan, scn.fec, band.tx.cp_fraction)
            entry["capacity"] = rep.to_dict()
            reports[band.name] = rep
        bands_summary[band.name] = entry

    write_capacity_json(out / "capacity.json", reports, scn.fec)
    totals = {
        "raw_gbps": sum(r.raw_gbps for r in reports.values()),
        "net_gbps": sum(r.net_gbps for r in reports.values()),
        "raw_cp_adjusted_gbps": sum(r.raw_cp_adjusted_gbps for r in reports.values()),
    }
    manifest = {}
    for p in sorted(out.rglob("*")):
        if p.is_file() and p.name != "summary.json":
            manifest[p.relative_to(out).as_posix()] = hashlib.sha256(
                p.read_bytes()).hexdigest()
    summary = {
        "description": scn.description,
        "bands": bands_summary,
        "totals": totals,
        "manifest": manifest,
    }
    _write_json(out / "summary.json", summary)
    return summary


def run_scenario(scn: Scenario, out_dir, seed_override=None, rbw_hz=None):
    """Full chain over all bands.  Returns (summary dict, any_failure)."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    seeds = resolve_seeds(scn, seed_override)
    rbw = rbw_hz if rbw_hz is not None else scn.psd_rbw_hz
    records = [run_band(scn, band, seeds, out / f"band_{band.name}", rbw)
               for band in scn.bands]
    write_threshold_csv(out / "thresholds.csv", scn.fec)
    summary = build_summary(scn, out)
    return summary, any(r["failure"] for r in records)


def lock_sim(scn: Scenario, out_dir, seed_override=None, rbw_hz=None,
             free_running: bool = False) -> dict:
    """Servo-only run: lock (or free-run) each band's laser pair and emit
    phase/beat spectra."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    seeds = resolve_seeds(scn, seed_override)
    rbw = rbw_hz if rbw_hz is not None else LOCK_PSD_RBW_HZ
    info = {}
    for band in scn.bands:
        bdir = out / f"band_{band.name}"
        bdir.mkdir(parents=True, exist_ok=True)
        master = scn.lasers[band.master]
        slave = scn.lasers[band.slave]
        loop_cfg = scn.loop_config_for(band)
        seed = seeds[f"lock_{band.name}"]
        if free_running:
            n = int(round(loop_cfg.duration_s * loop_cfg.sim_rate_hz))
            beat = free_running_beat(master, slave, n, loop_cfg.sim_rate_hz, seed)
            f_b, p_b = estimate_psd(beat, rbw)
            write_psd_csv(bdir / "psd_beat.csv", f_b, p_b)
            info[band.name] = {"mode": "free-running"}
            continue
        lock = simulate_lock(master, slave, loop_cfg, seed)
        stride = max(1, len(lock.phase_error.phases) // LOCK_CSV_MAX_ROWS)
        write_lock_csv(bdir / "lock.csv", lock, stride=stride)
        f_e, p_e = estimate_psd(lock.phase_error, rbw)
        write_psd_csv(bdir / "psd_error.csv", f_e, p_e)
        f_b, p_b = estimate_psd(lock.locked_beat, rbw)
        write_psd_csv(bdir / "psd_beat.csv", f_b, p_b)
        info[band.name] = {
            "mode": "locked",
            "locked": bool(lock.locked),
            "cycle_slips": int(lock.cycle_slips),
            "residual_phase_var_rad2": float(residual_phase_variance(lock)),
        }
    _write_json(out / "lock.json", {"bands": info})
    return info


def tx_only(scn: Scenario, out_dir, clip_db=None, rbw_hz=None) -> dict:
    """Waveform synthesis only: frames, clipping, PAPR, spectra."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rbw = rbw_hz if rbw_hz is not None else scn.psd_rbw_hz
    info = {}
    for band in scn.bands:
        bdir = out / f"band_{band.name}"
        bdir.mkdir(parents=True, exist_ok=True)
        wave, _ = build_frame(band.plan, band.tx)
        ratio = clip_db if clip_db is not None else band.tx.clip_ratio_db
        clipped = clip(wave, ratio)
        write_iq(bdir / "tx.iq", clipped)
        f_tx, p_tx = estimate_psd(clipped, rbw)
        write_psd_csv(bdir / "psd_tx.csv", f_tx, p_tx)
        info[band.name] = {
            "papr_raw_db": float(papr_db(wave)),
            "papr_clipped_db": float(papr_db(clipped)),
            "clip_ratio_db": float(ratio),
            "n_samples": len(clipped),
            "sample_rate_hz": clipped.sample_rate_hz,
        }
    _write_json(out / "tx.json", info)
    return info


def bitload_only(scn: Scenario, band_name: str, snr_csv, out_dir):
    """Load bits from an externally measured SNR profile CSV."""
    band = scn.band(band_name)
    metrics = read_metrics_csv(snr_csv)
    load_map = load_bits(metrics, scn.fec, band.plan)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_bitload_csv(out / "bitload.csv", load_map, band.plan)
    write_threshold_csv(out / "thresholds.csv", scn.fec)
    rep = capacity(load_map, band.plan, scn.fec, band.tx.cp_fraction)
    write_capacity_json(out / "capacity.json", {band.name: rep}, scn.fec)
    return rep
