"""Laser phase noise, beat notes, PSD estimation and AWGN injection.

Laser phase is modelled as a Wiener process: independent Gaussian increments
of variance 2*pi*linewidth/fs per sample, which produces a Lorentzian field
spectrum of FWHM equal to the linewidth and a far-wing phase PSD of
linewidth/(pi*f^2).  Everything is driven by explicit integer seeds through
numpy Generators, so any trace is bit-exact reproducible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import signal as sp_signal

from .waveform import ComplexWaveform


@dataclass(frozen=True)
class LaserSpec:
    """A laser line: label, Lorentzian linewidth, offset from the reference."""

    label: str
    linewidth_hz: float
    offset_hz: float = 0.0

    def __post_init__(self):
        if self.linewidth_hz < 0 or not math.isfinite(self.linewidth_hz):
            raise ValueError("linewidth_hz must be finite and >= 0")


@dataclass(frozen=True)
class PhaseTrace:
    """Sampled phase record in radians."""

    phases: np.ndarray
    sample_rate_hz: float

    def __post_init__(self):
        if self.sample_rate_hz <= 0:
            raise ValueError("sample_rate_hz must be positive")
        p = np.asarray(self.phases, dtype=np.float64)
        if p.ndim != 1:
            raise ValueError("phases must be a 1-D array")
        object.__setattr__(self, "phases", p)

    def __len__(self):
        return len(self.phases)

    @property
    def duration_s(self) -> float:
        return len(self.phases) / self.sample_rate_hz


def default_lasers() -> dict:
    """The three lines of the transmitter: 100 Hz reference plus two offset
    slaves at the W and D band centers (5 kHz and 80 kHz linewidths)."""
    return {
        "ld1": LaserSpec("ld1", linewidth_hz=100.0, offset_hz=0.0),
        "ld2": LaserSpec("ld2", linewidth_hz=5e3, offset_hz=92.5e9),
        "ld3": LaserSpec("ld3", linewidth_hz=80e3, offset_hz=130e9),
    }


def gen_phase_noise(spec: LaserSpec, n_samples: int, sample_rate_hz: float, seed: int) -> PhaseTrace:
    """Wiener phase trace for one laser.

    Increment variance per sample is 2*pi*linewidth/fs; a zero-linewidth laser
    yields an all-zero trace.
    """
    if n_samples <= 0:
        raise ValueError("n_samples must be positive")
    if sample_rate_hz <= 0:
        raise ValueError("sample_rate_hz must be positive")
    if spec.linewidth_hz == 0.0:
        return PhaseTrace(np.zeros(n_samples), sample_rate_hz)
    sigma = math.sqrt(2.0 * math.pi * spec.linewidth_hz / sample_rate_hz)
    rng = np.random.default_rng(seed)
    increments = rng.standard_normal(n_samples) * sigma
    return PhaseTrace(np.cumsum(increments), sample_rate_hz)


def beat_phase(a: PhaseTrace, b: PhaseTrace) -> PhaseTrace:
    """Phase of the beat note between two lines: element-wise difference.

    Independent Wiener traces add their linewidths (Lorentzian convolution),
    e.g. 100 Hz against 5 kHz beats at 5.1 kHz FWHM.
    """
    if a.sample_rate_hz != b.sample_rate_hz:
        raise ValueError("sample rates differ")
    if len(a) != len(b):
        raise ValueError("trace lengths differ")
    return PhaseTrace(a.phases - b.phases, a.sample_rate_hz)


def laser_pair_phases(master: LaserSpec, slave: LaserSpec, n_samples: int,
                      sample_rate_hz: float, seed: int) -> tuple:
    """Independent phase traces for a master/slave pair from one seed.

    Child seeds are split deterministically so lock simulations and
    free-running references can share the identical noise realization.
    """
    s_master, s_slave = np.random.SeedSequence(seed).generate_state(2)
    return (
        gen_phase_noise(master, n_samples, sample_rate_hz, int(s_master)),
        gen_phase_noise(slave, n_samples, sample_rate_hz, int(s_slave)),
    )


def estimate_psd(x, rbw_hz: float):
    """Power spectral density by averaged modified periodograms (Welch, 50%
    overlap, Hann window), density scaling so that sum(psd)*df recovers the
    mean-square power.

    Accepts a PhaseTrace (returns a one-sided spectrum in rad^2/Hz) or a
    ComplexWaveform (returns a two-sided spectrum centered on the anchor
    frequency).  ``rbw_hz`` sets the bin spacing and must be no finer than
    the record allows.
    """
    if isinstance(x, PhaseTrace):
        data, fs, anchor, onesided = x.phases, x.sample_rate_hz, None, True
    elif isinstance(x, ComplexWaveform):
        data, fs, anchor, onesided = x.samples, x.sample_rate_hz, x.anchor_hz, False
    else:
        raise TypeError("estimate_psd expects a PhaseTrace or ComplexWaveform")
    if rbw_hz <= 0:
        raise ValueError("rbw_hz must be positive")
    nperseg = int(round(fs / rbw_hz))
    if nperseg < 8:
        raise ValueError("rbw_hz too coarse: fewer than 8 samples per segment")
    if nperseg > len(data):
        raise ValueError(
            f"rbw_hz {rbw_hz:g} finer than the record allows (need {nperseg} samples, have {len(data)})"
        )
    freqs, psd = sp_signal.welch(
        data,
        fs=fs,
        window="hann",
        nperseg=nperseg,
        noverlap=nperseg // 2,
        detrend=False,
        scaling="density",
        return_onesided=onesided,
    )
    if onesided:
        return freqs, psd
    return np.fft.fftshift(freqs) + anchor, np.fft.fftshift(psd)


def write_psd_csv(path, freqs: np.ndarray, psd: np.ndarray) -> None:
    """Two-column CSV export: frequency in Hz, density in dB/Hz.

    Zero-density bins are floored at -400 dB to keep the file finite.
    """
    db = 10.0 * np.log10(np.maximum(np.asarray(psd, dtype=np.float64), 1e-40))
    with open(path, "w", newline="") as fh:
        fh.write("freq_hz,psd_db_hz\n")
        for f, v in zip(freqs, db):
            fh.write(f"{f:.9e},{v:.6f}\n")


def read_psd_csv(path):
    data = np.genfromtxt(path, delimiter=",", names=True)
    return np.atleast_1d(data["freq_hz"]), np.atleast_1d(data["psd_db_hz"])


def add_awgn(w: ComplexWaveform, snr_db, seed: int, occupied_bw_hz=None) -> ComplexWaveform:
    """Add complex white Gaussian noise for a target in-band SNR.

    ``occupied_bw_hz`` names the signal's occupied band; only the noise
    falling inside it counts toward the SNR, so for oversampled waveforms the
    injected total is scaled up by fs/occupied_bw.  ``None`` means the whole
    sampled band is in-band.  ``snr_db`` of None or +inf returns the waveform
    unchanged.
    """
    if snr_db is None or snr_db == float("inf"):
        return w
    if occupied_bw_hz is None:
        occupied_bw_hz = w.sample_rate_hz
    if not 0 < occupied_bw_hz <= w.sample_rate_hz:
        raise ValueError("occupied_bw_hz must lie in (0, sample_rate_hz]")
    p_sig = w.power
    if p_sig == 0.0:
        raise ValueError("cannot set an SNR on an all-zero waveform")
    p_noise = p_sig / 10.0 ** (snr_db / 10.0) * (w.sample_rate_hz / occupied_bw_hz)
    rng = np.random.default_rng(seed)
    scale = math.sqrt(p_noise / 2.0)
    noise = scale * (rng.standard_normal(len(w)) + 1j * rng.standard_normal(len(w)))
    return w.with_samples(w.samples + noise)
