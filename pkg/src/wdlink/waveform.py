"""Complex baseband waveform container and binary I/Q file I/O.

A waveform is a uniformly sampled complex envelope.  ``anchor_hz`` records the
absolute RF frequency that baseband 0 Hz corresponds to, so spectra can always
be labelled in absolute terms no matter how many mix/shift stages the samples
have been through.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

_HEADER_FIELDS = ("sample_rate_hz", "anchor_hz", "n_samples", "dtype")


@dataclass(frozen=True)
class ComplexWaveform:
    """Uniformly sampled complex envelope anchored to an absolute frequency."""

    samples: np.ndarray
    sample_rate_hz: float
    anchor_hz: float = 0.0

    def __post_init__(self):
        if self.sample_rate_hz <= 0:
            raise ValueError("sample_rate_hz must be positive")
        s = np.asarray(self.samples)
        if s.ndim != 1:
            raise ValueError("samples must be a 1-D array")
        if not np.iscomplexobj(s):
            s = s.astype(np.complex128)
        object.__setattr__(self, "samples", s)

    def __len__(self):
        return len(self.samples)

    @property
    def duration_s(self) -> float:
        return len(self.samples) / self.sample_rate_hz

    @property
    def power(self) -> float:
        """Mean-square sample power."""
        return float(np.mean(np.abs(self.samples) ** 2))

    def with_samples(self, samples: np.ndarray) -> "ComplexWaveform":
        return replace(self, samples=samples)


def write_iq(path, w: ComplexWaveform) -> None:
    """Write interleaved float32 I/Q plus a text sidecar header.

    The sidecar (``<path>.hdr``) carries sample rate, anchor frequency,
    sample count and dtype, one ``key=value`` per line.
    """
    path = str(path)
    inter = np.empty(2 * len(w.samples), dtype=np.float32)
    inter[0::2] = w.samples.real.astype(np.float32)
    inter[1::2] = w.samples.imag.astype(np.float32)
    inter.tofile(path)
    with open(path + ".hdr", "w") as fh:
        fh.write(f"sample_rate_hz={w.sample_rate_hz!r}\n")
        fh.write(f"anchor_hz={w.anchor_hz!r}\n")
        fh.write(f"n_samples={len(w.samples)}\n")
        fh.write("dtype=float32_interleaved_iq\n")


def read_iq(path) -> ComplexWaveform:
    """Read a waveform written by :func:`write_iq`."""
    path = str(path)
    header = {}
    with open(path + ".hdr") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            key, _, value = line.partition("=")
            header[key] = value
    missing = [k for k in _HEADER_FIELDS if k not in header]
    if missing:
        raise ValueError(f"sidecar header missing fields: {missing}")
    if header["dtype"] != "float32_interleaved_iq":
        raise ValueError(f"unsupported dtype {header['dtype']!r}")
    inter = np.fromfile(path, dtype=np.float32)
    n = int(header["n_samples"])
    if len(inter) != 2 * n:
        raise ValueError(f"expected {2 * n} float32 values, found {len(inter)}")
    samples = inter[0::2].astype(np.float64) + 1j * inter[1::2].astype(np.float64)
    return ComplexWaveform(
        samples=samples,
        sample_rate_hz=float(header["sample_rate_hz"]),
        anchor_hz=float(header["anchor_hz"]),
    )
