"""Multi-index diagonalization sets over frequency, interval and condition."""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np

from .errors import ValidationError
from .spectral import CospectraStack

WEIGHTINGS = ("uniform", "nondiag")


@dataclass(frozen=True)
class DiagonalizationSet:
    """Matrices (V, N, N) with their (bin, interval, condition) tags and weights.

    ``interval`` is -1 for entries built from condition-averaged stacks.
    """

    matrices: np.ndarray
    bins: np.ndarray
    frequencies: np.ndarray
    intervals: np.ndarray
    conditions: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.matrices, dtype=float)
        if c.ndim != 3 or c.shape[1] != c.shape[2] or c.shape[0] == 0:
            raise ValidationError("a diagonalization set needs matrices of shape (V, N, N), V >= 1")
        object.__setattr__(self, "matrices", c)
        for name in ("bins", "intervals", "conditions"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=int))
        for name in ("frequencies", "weights"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        v = c.shape[0]
        if any(getattr(self, n).shape != (v,) for n in
               ("bins", "frequencies", "intervals", "conditions", "weights")):
            raise ValidationError("index and weight arrays must have one entry per matrix")
        if np.any(self.weights < 0):
            raise ValidationError("weights must be non-negative")
        if np.any(self.bins == 0):
            raise ValidationError("the 0 Hz cospectrum is never part of a diagonalization set")

    def __len__(self):
        return self.matrices.shape[0]

    @property
    def dim(self) -> int:
        return self.matrices.shape[1]

    @property
    def active(self) -> np.ndarray:
        return self.weights > 0

    def total(self) -> np.ndarray:
        """Unweighted sum of all matrices in the set."""
        return self.matrices.sum(axis=0)

    def weighted_mean(self) -> np.ndarray:
        w = self.weights / self.weights.sum()
        return np.tensordot(w, self.matrices, axes=1)

    def with_matrices(self, matrices: np.ndarray) -> "DiagonalizationSet":
        return replace(self, matrices=matrices)

    def with_weights(self, weights: np.ndarray) -> "DiagonalizationSet":
        return replace(self, weights=weights)

    def descriptor(self, matrix_files: Optional[Sequence[str]] = None) -> list[dict]:
        files = matrix_files or [f"set_{v:04d}.csv" for v in range(len(self))]
        return [
            {"f_hz": float(self.frequencies[v]), "bin": int(self.bins[v]),
             "interval": int(self.intervals[v]), "condition": int(self.conditions[v]),
             "weight": float(self.weights[v]), "matrix_file": files[v]}
            for v in range(len(self))
        ]


def from_matrices(matrices, weights=None) -> DiagonalizationSet:
    """Wrap an arbitrary list of symmetric matrices as a set indexed 1..V."""
    c = np.asarray(matrices, dtype=float)
    v = c.shape[0]
    w = np.ones(v) if weights is None else np.asarray(weights, dtype=float)
    idx = np.arange(1, v + 1)
    return DiagonalizationSet(c, idx, idx.astype(float), np.zeros(v, int), np.ones(v, int), w)


def build_set(stacks: Sequence[CospectraStack], f_min: float, f_max: float) -> DiagonalizationSet:
    """One entry per (bin, interval, condition) with f_min <= f <= f_max, weights 1."""
    if not stacks:
        raise ValidationError("no cospectral stacks given")
    if not f_min > 0:
        raise ValidationError(
            f"f_min must be > 0 Hz (the DC cospectrum is excluded), got {f_min}")
    grid = stacks[0].grid
    n = stacks[0].n_channels
    for s in stacks[1:]:
        if s.grid != grid:
            raise ValidationError(f"mismatched frequency grids: {s.grid} vs {grid}")
        if s.n_channels != n:
            raise ValidationError("stacks have different channel counts")
    idx = grid.bins_in(f_min, f_max)
    idx = idx[idx > 0]
    if idx.size == 0:
        raise ValidationError(f"band [{f_min}, {f_max}] Hz selects no positive frequency bin")
    mats, bins, ivals, conds = [], [], [], []
    for s in stacks:
        mats.append(s.matrices[idx])
        bins.append(idx)
        ivals.append(np.full(idx.size, -1 if s.interval is None else s.interval))
        conds.append(np.full(idx.size, s.condition))
    bins = np.concatenate(bins)
    return DiagonalizationSet(np.concatenate(mats), bins, grid.frequencies[bins],
                              np.concatenate(ivals), np.concatenate(conds),
                              np.ones(bins.size))


def condition_average(stacks: Sequence[CospectraStack],
                      condition_labels: Optional[Sequence[int]] = None) -> list[CospectraStack]:
    """Epoch-count-weighted mean of the stacks sharing each condition label.

    Labels default to each stack's own ``condition`` tag; output is sorted by label.
    """
    if condition_labels is None:
        condition_labels = [s.condition for s in stacks]
    if len(condition_labels) != len(stacks):
        raise ValidationError(f"{len(condition_labels)} labels for {len(stacks)} stacks")
    out = []
    for k in sorted(set(condition_labels)):
        members = [s for s, lab in zip(stacks, condition_labels) if lab == k]
        counts = np.array([s.epochs_averaged for s in members], dtype=float)
        if counts.sum() <= 0:
            raise ValidationError(f"condition {k} has no epochs")
        mean = np.tensordot(counts / counts.sum(), np.stack([s.matrices for s in members]),
                            axes=1)
        first = members[0]
        out.append(replace(first, matrices=mean, epochs_averaged=int(counts.sum()),
                           interval=None, condition=int(k)))
    if not out:
        raise ValidationError("no stacks to average")
    return out


def nondiagonality_weight(C) -> float:
    """(1/(N-1)) * sum of squared off-diagonal entries / sum of squared diagonal entries.

    Zero for a diagonal matrix, one for a uniform matrix, and bounded by
    [0, 1] for any positive-definite matrix.
    """
    c = np.asarray(C, dtype=float)
    n = c.shape[0]
    if c.ndim != 2 or c.shape[1] != n:
        raise ValidationError("expected a square matrix")
    if n < 2:
        raise ValidationError("non-diagonality is undefined for 1x1 matrices")
    d = np.diag(c)
    if np.any(d == 0):
        raise ValidationError("non-diagonality needs strictly nonzero diagonal entries")
    sq = c * c
    diag = np.sum(d * d)
    off = np.sum(sq[~np.eye(n, dtype=bool)])
    return float(off / diag / (n - 1))


def apply_weighting(dset: DiagonalizationSet, cutoff_frequency: Optional[float] = None,
                    policy: str = "nondiag") -> DiagonalizationSet:
    """Non-diagonality (or uniform) weights, zeroed above the cutoff, mean-normalized to 1."""
    if policy not in WEIGHTINGS:
        raise ValidationError(f"weighting must be one of {WEIGHTINGS}, got {policy!r}")
    if len(dset) == 0:
        raise ValidationError("empty diagonalization set")
    if policy == "nondiag":
        w = np.array([nondiagonality_weight(c) for c in dset.matrices])
    else:
        w = np.ones(len(dset))
    if cutoff_frequency is not None:
        w[dset.frequencies > cutoff_frequency] = 0.0
    if not np.any(w > 0):
        raise ValidationError(
            "all weights are zero"
            + (f" after the {cutoff_frequency} Hz cutoff" if cutoff_frequency is not None else ""))
    return dset.with_weights(w / w.mean())
