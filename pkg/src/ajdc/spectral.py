"""Fourier cospectral matrices with Welch averaging.

The DFT is normalized by 1/L, d_x(f) = (1/L) sum_t x(t) exp(-2 pi i f t / L),
and the cospectrum of channels x, y at bin f is Re(d_x) Re(d_y) + Im(d_x) Im(d_y).
With that normalization the mean-square identity reads

    (1/L) sum_t v(t) v(t)^T = C(0) + C(L/2) + 2 * sum_{0 < f < L/2} C(f)

so the fold weights are 1 at DC and Nyquist and 2 at interior bins.
"""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.signal import get_window

from .errors import ValidationError
from .sim import Recording

WINDOWS = ("rectangular", "hann")


def worker_count() -> int:
    """Worker cap from the ``BSS_THREADS`` environment variable (default 1)."""
    try:
        return max(1, int(os.environ.get("BSS_THREADS", "1")))
    except ValueError:
        return 1


@dataclass(frozen=True)
class FrequencyGrid:
    epoch_length: int
    sampling_rate: float

    def __post_init__(self):
        if self.epoch_length < 2 or self.epoch_length % 2:
            raise ValidationError(
                f"epoch length must be even and >= 2, got {self.epoch_length}")
        if not self.sampling_rate > 0:
            raise ValidationError("sampling_rate must be > 0")

    @property
    def n_frequencies(self) -> int:
        return self.epoch_length // 2 + 1

    @property
    def resolution(self) -> float:
        return self.sampling_rate / self.epoch_length

    @property
    def frequencies(self) -> np.ndarray:
        return np.arange(self.n_frequencies) * self.resolution

    def fold_weights(self) -> np.ndarray:
        w = np.full(self.n_frequencies, 2.0)
        w[0] = w[-1] = 1.0
        return w

    def bins_in(self, f_low: float, f_high: float) -> np.ndarray:
        f = self.frequencies
        # tolerate edges that equal a grid frequency up to rounding
        eps = 1e-9 * self.resolution
        return np.flatnonzero((f >= f_low - eps) & (f <= f_high + eps))


def frequency_grid(epoch_length: int, sampling_rate: float) -> FrequencyGrid:
    return FrequencyGrid(int(epoch_length), float(sampling_rate))


@dataclass(frozen=True)
class CospectraStack:
    """Cospectral matrices of shape (F, N, N) on ``grid``.

    ``interval`` and ``condition`` tag the cell of the recording the stack was
    estimated from (``interval=None`` after condition averaging).
    """

    grid: FrequencyGrid
    matrices: np.ndarray
    epochs_averaged: int = 1
    window: str = "rectangular"
    overlap: float = 0.0
    interval: Optional[int] = 0
    condition: int = 1

    def __post_init__(self):
        c = np.asarray(self.matrices, dtype=float)
        if c.ndim != 3 or c.shape[1] != c.shape[2]:
            raise ValidationError("matrices must have shape (F, N, N)")
        if c.shape[0] != self.grid.n_frequencies:
            raise ValidationError(
                f"{c.shape[0]} matrices for a grid of {self.grid.n_frequencies} bins")
        object.__setattr__(self, "matrices", c)

    @property
    def n_channels(self) -> int:
        return self.matrices.shape[1]


def _as_block(epoch) -> np.ndarray:
    x = np.asarray(epoch, dtype=float)
    if x.ndim == 1:
        x = x[np.newaxis, :]
    if x.ndim != 2:
        raise ValidationError("epoch must be an (N, L) block")
    L = x.shape[1]
    if L < 2 or L % 2:
        raise ValidationError(f"epoch length must be even and >= 2, got {L}")
    return x


def dft_coefficients(epoch) -> np.ndarray:
    """Complex coefficients (N, L/2 + 1) of the 1/L-normalized DFT."""
    x = _as_block(epoch)
    return np.fft.rfft(x, axis=-1) / x.shape[-1]


def _cospectra_from_dft(d: np.ndarray) -> np.ndarray:
    """(..., N, F) complex -> (..., F, N, N) cospectra, exactly symmetric."""
    dr = np.moveaxis(d.real, -1, -2)[..., :, :, np.newaxis]
    di = np.moveaxis(d.imag, -1, -2)[..., :, :, np.newaxis]
    c = dr * np.swapaxes(dr, -1, -2) + di * np.swapaxes(di, -1, -2)
    return 0.5 * (c + np.swapaxes(c, -1, -2))


def cospectra_epoch(epoch, sampling_rate: float = 1.0) -> CospectraStack:
    x = _as_block(epoch)
    grid = frequency_grid(x.shape[1], sampling_rate)
    return CospectraStack(grid, _cospectra_from_dft(dft_coefficients(x)))


def epoch_starts(n_samples: int, epoch_length: int, overlap: float) -> np.ndarray:
    if not 0 <= overlap <= 0.95:
        raise ValidationError(f"overlap must lie in [0, 0.95], got {overlap}")
    stride = int(round(epoch_length * (1 - overlap)))
    if stride < 1:
        raise ValidationError(
            f"overlap {overlap} rounds the stride of a {epoch_length}-sample epoch to 0")
    if n_samples < epoch_length:
        raise ValidationError(
            f"segment of {n_samples} samples is shorter than one {epoch_length}-sample epoch")
    return np.arange(0, n_samples - epoch_length + 1, stride)


def welch_cospectra(recording: Recording, epoch_length: int, overlap: float = 0.5,
                    window: str = "rectangular", start: int = 0,
                    stop: Optional[int] = None, interval: Optional[int] = 0,
                    condition: int = 1) -> CospectraStack:
    """Mean cospectra over all full epochs of ``recording[:, start:stop]``.

    With a Hann taper the result is divided by the window's mean square so
    white-noise auto-spectra keep the rectangular-window level.
    """
    if window not in WINDOWS:
        raise ValidationError(f"window must be one of {WINDOWS}, got {window!r}")
    grid = frequency_grid(epoch_length, recording.sampling_rate)
    x = recording.channels[:, start:stop]
    starts = epoch_starts(x.shape[1], epoch_length, overlap)
    taper = None
    if window == "hann":
        taper = get_window("hann", epoch_length)
        taper = taper / np.sqrt(np.mean(taper ** 2))

    def transform(chunk):
        block = np.stack([x[:, s:s + epoch_length] for s in chunk])
        if taper is not None:
            block = block * taper
        return np.fft.rfft(block, axis=-1) / epoch_length

    workers = min(worker_count(), len(starts))
    if workers > 1:
        chunks = np.array_split(starts, workers)
        with ThreadPoolExecutor(workers) as pool:
            d = np.concatenate(list(pool.map(transform, chunks)))
    else:
        d = transform(starts)
    c = _cospectra_from_dft(d)
    return CospectraStack(grid, c.mean(axis=0), len(starts), window, overlap,
                          interval, condition)


def interval_cospectra(recording: Recording, epoch_length: int, overlap: float = 0.5,
                       window: str = "rectangular") -> list[CospectraStack]:
    """One Welch stack per recording interval; epochs never straddle a boundary."""
    labels = recording.labels()
    return [welch_cospectra(recording, epoch_length, overlap, window, a, b, i, k)
            for i, ((a, b), k) in enumerate(zip(recording.intervals(), labels))]


def band_sum(stack: CospectraStack, f_low: float, f_high: float) -> np.ndarray:
    """Fold-weighted sum of the stack over bins with f_low <= f <= f_high."""
    if f_low > f_high:
        raise ValidationError(f"empty band [{f_low}, {f_high}]")
    idx = stack.grid.bins_in(f_low, f_high)
    if idx.size == 0:
        raise ValidationError(f"band [{f_low}, {f_high}] Hz contains no grid frequency")
    w = stack.grid.fold_weights()[idx]
    return _symmetric(np.tensordot(w, stack.matrices[idx], axes=1))


def covariance_from_cospectra(stack: CospectraStack) -> np.ndarray:
    """Mean-square matrix recovered from the full stack via Parseval."""
    return _symmetric(np.tensordot(stack.grid.fold_weights(), stack.matrices, axes=1))


def _symmetric(c: np.ndarray) -> np.ndarray:
    return 0.5 * (c + c.T)
