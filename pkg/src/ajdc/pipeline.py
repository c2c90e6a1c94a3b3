"""Subspace reduction, model assembly, source extraction and BSS filtering."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import ajd as _ajd
from .config import RunConfig
from .diagset import (DiagonalizationSet, apply_weighting, build_set,
                      condition_average)
from .errors import NumericalError, ValidationError, stage
from .sim import Recording, equal_intervals
from .spectral import CospectraStack, band_sum, interval_cospectra

RANK_FLOOR = 1e-12


@dataclass(frozen=True)
class SubspaceReducer:
    H: np.ndarray
    M: int
    eigenvalues: np.ndarray

    @property
    def F(self) -> np.ndarray:
        """Signal-subspace rows of the whitener."""
        return self.H[:self.M]

    @property
    def G_noise(self) -> np.ndarray:
        return self.H[self.M:]


@dataclass
class SeparatingModel:
    B: np.ndarray
    A: np.ndarray
    explained_variance: np.ndarray
    total_variance: float
    component_order: np.ndarray
    sign_flips: np.ndarray
    provenance: dict = field(default_factory=dict)

    @property
    def n_components(self) -> int:
        return self.B.shape[0]

    @property
    def n_channels(self) -> int:
        return self.B.shape[1]


def _sign_by_largest(vectors: np.ndarray, axis: int) -> np.ndarray:
    """+1/-1 per vector so that its largest-magnitude entry becomes positive."""
    idx = np.argmax(np.abs(vectors), axis=axis)
    if axis == 0:
        vals = vectors[idx, np.arange(vectors.shape[1])]
    else:
        vals = vectors[np.arange(vectors.shape[0]), idx]
    return np.where(vals < 0, -1.0, 1.0)


def whitening_from_total(dset: DiagonalizationSet, M: int) -> SubspaceReducer:
    """Whitener H of C_TOT = sum_v C_v with H C_TOT H^T = I, eigenvalues descending."""
    n = dset.dim
    if not 1 <= M <= n:
        raise ValidationError(f"number of components M={M} must lie in 1..N={n}")
    ctot = dset.total()
    lam, U = np.linalg.eigh(0.5 * (ctot + ctot.T))
    # stable descending sort keeps tied eigenvalues in eigh's order (C_TOT = I gives H = I)
    order = np.argsort(-lam, kind="stable")
    lam, U = lam[order], U[:, order]
    if not lam[M - 1] > RANK_FLOOR * lam[0]:
        rank = int(np.sum(lam > RANK_FLOOR * lam[0])) if lam[0] > 0 else 0
        raise NumericalError(
            f"requested M={M} components but the summed cospectra have numerical "
            f"rank {rank} (lambda_M / lambda_1 = {lam[M - 1] / lam[0] if lam[0] else 0:.3g}); "
            f"reduce M")
    U = U * _sign_by_largest(U, axis=0)
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = np.where(lam > 0, 1.0 / np.sqrt(np.abs(lam)), 0.0)
    return SubspaceReducer(inv[:, None] * U.T, M, lam)


def reduce_set(dset: DiagonalizationSet, reducer: SubspaceReducer) -> DiagonalizationSet:
    F = reducer.F
    if F.shape[1] != dset.dim:
        raise ValidationError(f"reducer expects {F.shape[1]} channels, set has {dset.dim}")
    d = F @ dset.matrices @ F.T
    return dset.with_matrices(0.5 * (d + np.swapaxes(d, 1, 2)))


def _explained(B: np.ndarray, A: np.ndarray, V: np.ndarray) -> tuple[np.ndarray, float]:
    V = 0.5 * (V + V.T)
    per = np.einsum("mi,ij,mj->m", B, V, B) * np.sum(A * A, axis=0)
    P = A @ B
    total = float(np.trace(P @ V @ P.T))
    return per, total


def explained_variance(model: SeparatingModel, V) -> tuple[np.ndarray, float]:
    """Per-component VAR_m = tr(a_m b_m^T V b_m a_m^T) and VAR_TOT = tr(A B V B^T A^T).

    ``V`` may be a covariance matrix, a single cospectrum or a band sum.
    """
    V = np.asarray(V, dtype=float)
    if V.shape != (model.n_channels, model.n_channels):
        raise ValidationError(f"V must be {model.n_channels}x{model.n_channels}")
    return _explained(model.B, model.A, V)


def assemble_model(E, reducer: SubspaceReducer, V, provenance: Optional[dict] = None
                   ) -> SeparatingModel:
    """B = E F with unit-norm rows, A = pinv(B), signs and order fixed.

    The sign of each component is chosen so the largest-magnitude entry of its
    mixing column is positive; components are sorted by decreasing explained
    variance against ``V``.
    """
    E = E.matrix if isinstance(E, _ajd.Diagonalizer) else np.asarray(E, dtype=float)
    if E.shape != (reducer.M, reducer.M):
        raise ValidationError(f"E must be {reducer.M}x{reducer.M}, got {E.shape}")
    B = E @ reducer.F
    norms = np.linalg.norm(B, axis=1)
    s = np.linalg.svd(B, compute_uv=False)
    if np.any(norms == 0) or not s[-1] > 1e-12 * s[0]:
        raise NumericalError("assembled demixing matrix is numerically rank deficient")
    B = B / norms[:, None]
    A = np.linalg.pinv(B)
    flips = _sign_by_largest(A, axis=0)
    A = A * flips
    B = B * flips[:, None]
    per, total = _explained(B, A, np.asarray(V, dtype=float))
    order = np.argsort(-per, kind="stable")
    return SeparatingModel(B[order], A[:, order], per[order], total, order,
                           flips[order], dict(provenance or {}))


def extract_sources(model: SeparatingModel, recording: Recording) -> np.ndarray:
    """Component time series B v(t), shape (M, T)."""
    if recording.n_channels != model.n_channels:
        raise ValidationError(
            f"model expects {model.n_channels} channels, recording has {recording.n_channels}")
    return model.B @ recording.channels


def bss_filter(model: SeparatingModel, recording: Recording, keep: Sequence[bool]) -> Recording:
    """v'(t) = A diag(keep) B v(t)."""
    keep = np.asarray(keep, dtype=bool)
    if keep.shape != (model.n_components,):
        raise ValidationError(f"keep mask needs {model.n_components} entries, got {keep.size}")
    s = extract_sources(model, recording)
    v = model.A[:, keep] @ s[keep]
    return Recording(v, recording.sampling_rate, recording.interval_boundaries,
                     recording.condition_labels)


def _two_groups(dset: DiagonalizationSet) -> np.ndarray:
    """Boolean mask of the first group for the two-matrix solver."""
    for labels in (dset.conditions, dset.intervals):
        values = np.unique(labels)
        if values.size >= 2:
            return labels <= values[(values.size - 1) // 2]
    bins = np.unique(dset.bins)
    if bins.size < 2:
        raise ValidationError("two-matrix solver needs at least two distinct set entries")
    return dset.bins <= bins[(bins.size - 1) // 2]


def diagonalize(reduced: DiagonalizationSet, solver: str = "nonorthogonal",
                tolerance: float = 1e-9, max_iterations: int = 200) -> _ajd.Diagonalizer:
    if solver == "orthogonal":
        return _ajd.ajd_orthogonal(reduced, tolerance, max_iterations)
    if solver == "nonorthogonal":
        return _ajd.ajd_nonorthogonal(reduced, tolerance, max_iterations)
    if solver == "gevd2":
        w = reduced.weights[:, None, None]
        group = _two_groups(reduced)
        total = np.sum(w * reduced.matrices, axis=0)
        first = np.sum((w * reduced.matrices)[group], axis=0)
        return _ajd.gevd_two_matrix(total, first)
    raise ValidationError(f"solver must be one of {_ajd.SOLVERS}, got {solver!r}")


@dataclass
class FitResult:
    model: SeparatingModel
    reducer: SubspaceReducer
    diagonalizer: _ajd.Diagonalizer
    dset: DiagonalizationSet
    reduced: DiagonalizationSet


def fit_set(dset: DiagonalizationSet, n_components: Optional[int] = None,
            solver: str = "nonorthogonal", tolerance: float = 1e-9,
            max_iterations: int = 200, V=None, provenance: Optional[dict] = None
            ) -> FitResult:
    """Whiten, reduce, jointly diagonalize and assemble a model from a set.

    ``V`` (ordering matrix) defaults to the summed set matrices.
    """
    M = dset.dim if n_components is None else int(n_components)
    with stage("whitening"):
        reducer = whitening_from_total(dset, M)
    with stage("reduction"):
        reduced = reduce_set(dset, reducer)
    with stage("solver"):
        E = diagonalize(reduced, solver, tolerance, max_iterations)
    if V is None:
        V = dset.total()
    prov = {"solver": solver, "tolerance": tolerance, "max_iterations": max_iterations,
            "converged": E.converged, "iterations": E.sweeps}
    prov.update(provenance or {})
    with stage("assembly"):
        model = assemble_model(E, reducer, V, prov)
    return FitResult(model, reducer, E, dset, reduced)


def apply_segmentation(recording: Recording, config: RunConfig) -> Recording:
    """Impose the config's interval count and condition labels on a recording."""
    edges = recording.interval_boundaries
    labels = recording.condition_labels
    if config.intervals is not None:
        edges = equal_intervals(recording.n_samples, config.intervals)
        if labels is not None and len(labels) != config.intervals:
            labels = None
    if config.condition_labels is not None:
        labels = tuple(config.condition_labels)
    return Recording(recording.channels, recording.sampling_rate, edges, labels)


def recording_stacks(recording: Recording, config: RunConfig) -> list[CospectraStack]:
    """Welch stacks per interval, condition-averaged when the recording has labels."""
    recording = apply_segmentation(recording, config)
    stacks = interval_cospectra(recording, config.epoch_length, config.overlap, config.window)
    if recording.condition_labels is not None and config.average_conditions:
        stacks = condition_average(stacks)
    return stacks


def pooled_stack(stacks: Sequence[CospectraStack]) -> CospectraStack:
    return condition_average(list(stacks), [1] * len(stacks))[0]


@dataclass
class SeparationResult(FitResult):
    stacks: list = field(default_factory=list)
    pooled: Optional[CospectraStack] = None


def separate(recording: Recording, config: Optional[RunConfig] = None) -> SeparationResult:
    """Full pipeline from a recording to a separating model.

    Errors carry a ``stage`` attribute naming the step that failed.
    """
    config = config or RunConfig()
    with stage("config"):
        config.validate(n_channels=recording.n_channels, n_samples=recording.n_samples,
                        sampling_rate=recording.sampling_rate)
    with stage("cospectra"):
        stacks = recording_stacks(recording, config)
        pooled = pooled_stack(stacks)
    with stage("set"):
        f_min, f_max = config.band_for(stacks[0].grid)
        dset = build_set(stacks, f_min, f_max)
    with stage("weighting"):
        dset = apply_weighting(dset, config.cutoff, config.weighting)
    V = band_sum(pooled, f_min, f_max)
    fit = fit_set(dset, config.n_components, config.solver, config.tolerance,
                  config.max_iterations, V,
                  {"weighting": config.weighting, "cutoff": config.cutoff,
                   "band": [float(f_min), float(f_max)]})
    return SeparationResult(fit.model, fit.reducer, fit.diagonalizer, fit.dset,
                            fit.reduced, stacks, pooled)
