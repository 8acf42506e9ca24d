"""Frequency features of bus angular velocities."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import BandTooNarrowError, ConfigError, InsufficientSamplesError
from .timeseries import VelocityTraceSet


@dataclass(frozen=True)
class ComplexSpectrum:
    bins: np.ndarray
    bin_width_hz: float

    def __len__(self):
        return len(self.bins)

    def frequencies(self) -> np.ndarray:
        return self.bin_width_hz * np.arange(len(self.bins))


@dataclass(frozen=True)
class BandSpec:
    """Which DFT bins become features.

    Defaults keep the 0.1-2.5 Hz electromechanical range without DC.
    """

    drop_dc: bool = True
    f_lo_hz: float | None = 0.1
    f_hi_hz: float | None = 2.5
    max_bins: int | None = None

    def __post_init__(self):
        if self.f_lo_hz is not None and self.f_hi_hz is not None and not self.f_lo_hz < self.f_hi_hz:
            raise ConfigError(f"band limits must satisfy f_lo < f_hi, got {self.f_lo_hz}, {self.f_hi_hz}")
        if self.max_bins is not None and self.max_bins < 1:
            raise ConfigError(f"max_bins must be >= 1, got {self.max_bins}")


@dataclass(frozen=True)
class FeatureMatrix:
    bus_ids: tuple
    rows: np.ndarray
    band: BandSpec
    dt: float
    freqs_hz: np.ndarray | None = None
    # l2 norm of each bus's full spectrum; the yardstick for "zero energy"
    row_scale: np.ndarray | None = None

    def __post_init__(self):
        rows = np.asarray(self.rows, dtype=complex)
        if rows.ndim != 2 or rows.shape[0] != len(self.bus_ids):
            raise ConfigError(f"feature matrix shape {rows.shape} does not match bus list")
        if rows.shape[1] < 2:
            raise BandTooNarrowError("feature matrix needs at least 2 bins per bus")
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "bus_ids", tuple(self.bus_ids))

    @property
    def n_bins(self) -> int:
        return self.rows.shape[1]


def dft(signal, dt: float = 1.0) -> ComplexSpectrum:
    """DFT with the ``exp(-2j*pi*f*k/N)`` kernel, unnormalized."""
    x = np.asarray(signal, dtype=float)
    if x.ndim != 1 or x.size == 0:
        raise InsufficientSamplesError("dft needs a non-empty 1-D signal")
    return ComplexSpectrum(bins=np.fft.fft(x), bin_width_hz=1.0 / (x.size * dt))


def band_bins(n_samples: int, dt: float, band: BandSpec) -> np.ndarray:
    """Indices of the retained bins for a length-``n_samples`` transform."""
    idx = np.arange(n_samples // 2 + 1)
    f = idx / (n_samples * dt)
    keep = np.ones(idx.size, dtype=bool)
    if band.drop_dc:
        keep &= idx != 0
    if band.f_lo_hz is not None:
        keep &= f >= band.f_lo_hz
    if band.f_hi_hz is not None:
        keep &= f <= band.f_hi_hz
    idx = idx[keep]
    if band.max_bins is not None:
        idx = idx[: band.max_bins]
    return idx


def build_feature_matrix(velocities: VelocityTraceSet, band: BandSpec | None = None) -> FeatureMatrix:
    band = band or BandSpec()
    vel = np.asarray(velocities.velocities, dtype=float)
    n = vel.shape[1]
    if n < 4:
        raise InsufficientSamplesError(f"need at least 4 velocity samples, got {n}")
    dt = velocities.meta.dt
    idx = band_bins(n, dt, band)
    if idx.size < 2:
        raise BandTooNarrowError(
            f"band selects {idx.size} bin(s) at N={n}, dt={dt:g}; need at least 2"
        )
    spectra = np.stack([dft(row, dt).bins for row in vel]) if len(vel) else np.empty((0, n))
    return FeatureMatrix(
        bus_ids=velocities.bus_ids,
        rows=spectra[:, idx],
        band=band,
        dt=dt,
        freqs_hz=idx / (n * dt),
        row_scale=np.linalg.norm(spectra, axis=1),
    )


def write_spectrum_csv(features: FeatureMatrix, path) -> None:
    """Debug dump of per-bus bin magnitude and phase."""
    freqs = features.freqs_hz
    if freqs is None:
        freqs = np.arange(features.n_bins, dtype=float)
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["bus_id", "f_hz", "mag", "phase_rad"])
        for bus, row in zip(features.bus_ids, features.rows):
            for f, z in zip(freqs, row):
                w.writerow([bus, f"{f:.17g}", f"{abs(z):.17g}", f"{np.angle(z):.17g}"])
