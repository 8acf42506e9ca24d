"""Complex Pearson coherency between buses and the group integrity indices."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DegenerateSignalError, FormatError, UndefinedIndexError
from .spectrum import FeatureMatrix

# centered energy below this fraction of a row's own scale counts as zero
DEGENERATE_RTOL = 1e-10


@dataclass(frozen=True)
class SimilarityMatrix:
    bus_ids: tuple
    values: np.ndarray
    degenerate: tuple = field(default=())

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        n = len(self.bus_ids)
        if v.shape != (n, n):
            raise FormatError(f"similarity matrix shape {v.shape} does not match {n} buses")
        if not np.all(np.isfinite(v)):
            raise FormatError("similarity matrix has non-finite entries")
        if not np.array_equal(v, v.T):
            raise FormatError("similarity matrix is not symmetric")
        if np.any(v < 0) or np.any(v > 1):
            raise FormatError("similarity entries must lie in [0, 1]")
        if not np.all(np.diag(v) == 1.0):
            raise FormatError("similarity diagonal must be 1")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "bus_ids", tuple(self.bus_ids))
        object.__setattr__(self, "degenerate", tuple(self.degenerate))

    @property
    def n_buses(self) -> int:
        return len(self.bus_ids)


@dataclass(frozen=True)
class IntegrityIndices:
    """GCI/GSI for one window; ``None`` marks an undefined index."""

    gci: float | None
    gsi: float | None
    window_index: int = 0
    t_start: float = 0.0


def _is_degenerate(centered_norm, scale):
    return centered_norm <= DEGENERATE_RTOL * scale or centered_norm == 0


def complex_pearson(x, y) -> complex:
    """Pearson correlation of two complex vectors, conjugating the second."""
    x = np.asarray(x, dtype=complex)
    y = np.asarray(y, dtype=complex)
    if x.shape != y.shape or x.ndim != 1 or x.size < 2:
        raise ValueError("complex_pearson needs two equal-length vectors of length >= 2")
    xc = x - x.mean()
    yc = y - y.mean()
    nx = np.linalg.norm(xc)
    ny = np.linalg.norm(yc)
    if _is_degenerate(nx, np.linalg.norm(x)) or _is_degenerate(ny, np.linalg.norm(y)):
        raise DegenerateSignalError("vector has zero centered energy")
    return complex(np.vdot(yc, xc) / (nx * ny))


def similarity_matrix(features: FeatureMatrix) -> SimilarityMatrix:
    """Clamped real part of the pairwise complex Pearson matrix.

    Buses whose feature row has no centered energy get similarity 0 to
    every other bus and are listed in ``degenerate``.
    """
    rows = features.rows
    centered = rows - rows.mean(axis=1, keepdims=True)
    norms = np.linalg.norm(centered, axis=1)
    scale = np.linalg.norm(rows, axis=1)
    if features.row_scale is not None:
        scale = np.maximum(scale, features.row_scale)
    degenerate = np.array([_is_degenerate(n, s) for n, s in zip(norms, scale)], dtype=bool)
    centered[degenerate] = 0.0
    # elementwise Gram keeps identical rows bit-identical, so their ratio is exactly 1
    gram = (centered[:, None, :] * centered.conj()[None, :, :]).sum(axis=-1).real
    energy = np.diag(gram).copy()
    energy[degenerate] = 1.0
    r = gram / np.sqrt(np.outer(energy, energy))
    r = np.clip(r, 0.0, 1.0)
    r = 0.5 * (r + r.T)
    np.fill_diagonal(r, 1.0)
    bad = tuple(b for b, d in zip(features.bus_ids, degenerate) if d)
    return SimilarityMatrix(bus_ids=features.bus_ids, values=r, degenerate=bad)


def _labels_of(partition):
    return np.asarray(getattr(partition, "labels", partition))


def _pair_masks(labels):
    same = labels[:, None] == labels[None, :]
    upper = np.triu(np.ones(same.shape, dtype=bool), k=1)
    return same & upper, ~same & upper


def group_coherency_index(S: SimilarityMatrix, partition) -> float:
    """Mean similarity over unordered within-group pairs (self-pairs excluded)."""
    labels = _labels_of(partition)
    if labels.shape != (S.n_buses,):
        raise FormatError("partition does not cover the similarity matrix buses")
    within, _ = _pair_masks(labels)
    if not within.any():
        raise UndefinedIndexError("GCI undefined: no group has two or more buses")
    return float(S.values[within].mean())


def group_separation_index(S: SimilarityMatrix, partition) -> float:
    """Mean similarity over unordered cross-group pairs."""
    labels = _labels_of(partition)
    if labels.shape != (S.n_buses,):
        raise FormatError("partition does not cover the similarity matrix buses")
    _, cross = _pair_masks(labels)
    if not cross.any():
        raise UndefinedIndexError("GSI undefined: fewer than two groups")
    return float(S.values[cross].mean())


def integrity_indices(S: SimilarityMatrix, partition, window_index=0, t_start=0.0) -> IntegrityIndices:
    """Both indices, with undefined ones reported as ``None``."""
    try:
        gci = group_coherency_index(S, partition)
    except UndefinedIndexError:
        gci = None
    try:
        gsi = group_separation_index(S, partition)
    except UndefinedIndexError:
        gsi = None
    return IntegrityIndices(gci=gci, gsi=gsi, window_index=window_index, t_start=t_start)


def write_similarity_csv(S: SimilarityMatrix, path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([""] + list(S.bus_ids))
        for bus, row in zip(S.bus_ids, S.values):
            w.writerow([bus] + [f"{v:.17g}" for v in row])


def read_similarity_csv(path) -> SimilarityMatrix:
    with Path(path).open(newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r]
    if not rows:
        raise FormatError(f"{path}: empty similarity file")
    bus_ids = rows[0][1:]
    if [r[0] for r in rows[1:]] != bus_ids:
        raise FormatError(f"{path}: row labels do not match header")
    try:
        values = [[float(c) for c in r[1:]] for r in rows[1:]]
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from None
    return SimilarityMatrix(bus_ids=bus_ids, values=values)
