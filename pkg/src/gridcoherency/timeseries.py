"""Per-bus voltage-angle time series: loading, differentiation, windowing.

Angles are expected as already-unwrapped radians. Nothing here wraps
values into (-pi, pi].
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .errors import (
    FormatError,
    InsufficientSamplesError,
    NonUniformSamplingError,
    WindowTooLongError,
)


@dataclass(frozen=True)
class SamplingMeta:
    dt: float
    t0: float
    count: int

    def __post_init__(self):
        if not self.dt > 0:
            raise FormatError(f"dt must be positive, got {self.dt}")
        if self.count < 1:
            raise InsufficientSamplesError(f"need at least 1 sample, got {self.count}")

    @property
    def duration(self) -> float:
        """Examination time T = (N - 1) * dt."""
        return (self.count - 1) * self.dt

    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.count)


def _check_bus_ids(bus_ids):
    bus_ids = tuple(str(b) for b in bus_ids)
    if len(set(bus_ids)) != len(bus_ids):
        dupes = sorted({b for b in bus_ids if bus_ids.count(b) > 1})
        raise FormatError(f"duplicate bus ids: {dupes}")
    return bus_ids


@dataclass(frozen=True)
class AngleTraceSet:
    bus_ids: tuple
    angles: np.ndarray
    meta: SamplingMeta

    def __post_init__(self):
        object.__setattr__(self, "bus_ids", _check_bus_ids(self.bus_ids))
        angles = np.array(self.angles, dtype=float, ndmin=2)
        if angles.ndim != 2 or angles.shape[0] != len(self.bus_ids):
            raise FormatError(
                f"angle matrix shape {angles.shape} does not match {len(self.bus_ids)} buses"
            )
        if self.meta.count < 2:
            raise InsufficientSamplesError(f"need at least 2 samples, got {self.meta.count}")
        if angles.shape[1] != self.meta.count:
            raise FormatError(
                f"angle rows have {angles.shape[1]} samples, meta says {self.meta.count}"
            )
        if not np.all(np.isfinite(angles)):
            raise FormatError("angle traces contain non-finite values")
        angles.setflags(write=False)
        object.__setattr__(self, "angles", angles)

    @property
    def n_buses(self) -> int:
        return len(self.bus_ids)

    @property
    def n_samples(self) -> int:
        return self.meta.count


@dataclass(frozen=True)
class VelocityTraceSet:
    bus_ids: tuple
    velocities: np.ndarray
    meta: SamplingMeta

    def __post_init__(self):
        if not np.all(np.isfinite(self.velocities)):
            raise FormatError("velocity traces contain non-finite values")


@dataclass(frozen=True)
class WindowSpec:
    length: int
    stride: int

    def __post_init__(self):
        if self.length < 2:
            raise WindowTooLongError(f"window length must be >= 2, got {self.length}")
        if self.stride < 1:
            raise WindowTooLongError(f"window stride must be >= 1, got {self.stride}")

    def validate(self, n_samples: int):
        if self.length > n_samples:
            raise WindowTooLongError(
                f"window of {self.length} samples exceeds trace length {n_samples}"
            )


def load_angle_csv(path, tolerance: float = 0.01) -> AngleTraceSet:
    """Read an angle CSV (``t,<bus_id>,...``) into an :class:`AngleTraceSet`.

    The sampling step is the median of successive time deltas; any delta
    deviating from it by more than ``tolerance`` (relative) is rejected.
    """
    path = Path(path)
    if not path.is_file():
        raise FormatError(f"angle file not found: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        rows = [row for row in csv.reader(fh) if row and any(c.strip() for c in row)]
    if not rows:
        raise FormatError(f"{path}: empty file")
    header = [c.strip() for c in rows[0]]
    if len(header) < 2:
        raise FormatError(f"{path}: header needs a time column and at least one bus")
    width = len(header)
    data = []
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != width:
            raise FormatError(f"{path}:{lineno}: expected {width} fields, got {len(row)}")
        try:
            data.append([float(c) for c in row])
        except ValueError as exc:
            raise FormatError(f"{path}:{lineno}: {exc}") from None
    if len(data) < 2:
        raise InsufficientSamplesError(f"{path}: need at least 2 samples, got {len(data)}")
    arr = np.asarray(data)
    t = arr[:, 0]
    deltas = np.diff(t)
    dt = float(np.median(deltas))
    if not dt > 0:
        raise NonUniformSamplingError(f"{path}: time column is not increasing")
    worst = np.max(np.abs(deltas - dt)) / dt
    if worst > tolerance:
        raise NonUniformSamplingError(
            f"{path}: sampling jitter {worst:.3g} exceeds tolerance {tolerance:g}"
        )
    meta = SamplingMeta(dt=dt, t0=float(t[0]), count=len(t))
    return AngleTraceSet(bus_ids=header[1:], angles=arr[:, 1:].T, meta=meta)


def _fmt(x) -> str:
    return f"{x:.17g}"


def write_angle_csv(traces: AngleTraceSet, path) -> None:
    """Write ``traces`` in the angle CSV format (LF line endings, 17 digits)."""
    times = traces.meta.times()
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        fh.write(",".join(("t",) + traces.bus_ids) + "\n")
        for k, tk in enumerate(times):
            fh.write(",".join([_fmt(tk)] + [_fmt(v) for v in traces.angles[:, k]]) + "\n")


def angular_velocity(traces: AngleTraceSet) -> VelocityTraceSet:
    """Forward-difference angular velocity, one sample shorter than the input."""
    if traces.n_samples < 2:
        raise InsufficientSamplesError("angular velocity needs at least 2 samples")
    vel = np.diff(traces.angles, axis=1) / traces.meta.dt
    meta = replace(traces.meta, count=traces.n_samples - 1)
    return VelocityTraceSet(bus_ids=traces.bus_ids, velocities=vel, meta=meta)


def variation_index(traces: AngleTraceSet, baseline_sample: int = 0) -> np.ndarray:
    """Pairwise integrated angle-deviation difference (rectangle rule).

    ``values[i, j] = sum_k (dtheta_i[k] - dtheta_j[k]) * dt`` with deviations
    taken from ``baseline_sample``. Antisymmetric with zero diagonal.
    """
    if not 0 <= baseline_sample < traces.n_samples:
        raise InsufficientSamplesError(
            f"baseline sample {baseline_sample} outside [0, {traces.n_samples})"
        )
    dev = traces.angles - traces.angles[:, [baseline_sample]]
    integral = dev.sum(axis=1) * traces.meta.dt
    # a - b and b - a are exact negations in IEEE arithmetic
    return integral[:, None] - integral[None, :]


def sliding_windows(traces: AngleTraceSet, spec: WindowSpec) -> list:
    spec.validate(traces.n_samples)
    out = []
    for off in range(0, traces.n_samples - spec.length + 1, spec.stride):
        meta = SamplingMeta(
            dt=traces.meta.dt, t0=traces.meta.t0 + off * traces.meta.dt, count=spec.length
        )
        out.append(
            AngleTraceSet(
                bus_ids=traces.bus_ids,
                angles=traces.angles[:, off : off + spec.length],
                meta=meta,
            )
        )
    return out
