"""Synthetic sources, instantaneous linear mixing and ground truth.

All generators draw from ``numpy.random.Generator(PCG64(seed))``; a given
seed reproduces the same samples on any platform numpy supports.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.signal import lfilter

from .errors import ValidationError

SOURCE_KINDS = ("ar", "envelope", "white")


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(int(seed)))


def child_seeds(seed: int, n: int) -> list[int]:
    """Derive ``n`` independent 64-bit seeds from one master seed."""
    state = np.random.SeedSequence(int(seed)).generate_state(n, dtype=np.uint64)
    return [int(s) for s in state]


@dataclass(frozen=True)
class SourceSignal:
    samples: np.ndarray
    sampling_rate: float = 1.0
    kind: str = "white"

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=float)
        if samples.ndim != 1 or samples.size < 1:
            raise ValidationError("source samples must be a non-empty 1-D sequence")
        if not np.all(np.isfinite(samples)):
            raise ValidationError("source samples must be finite")
        if not self.sampling_rate > 0:
            raise ValidationError(f"sampling_rate must be > 0, got {self.sampling_rate}")
        if self.kind not in SOURCE_KINDS:
            raise ValidationError(f"unknown source kind {self.kind!r}")
        object.__setattr__(self, "samples", samples)

    def __len__(self):
        return self.samples.size


@dataclass(frozen=True)
class Recording:
    """Multichannel recording ``channels`` of shape (N, T).

    ``interval_boundaries`` are the I+1 sample edges ``[0, b1, ..., T]`` of
    the I analysis intervals; ``condition_labels`` hold one integer label per
    interval.
    """

    channels: np.ndarray
    sampling_rate: float = 1.0
    interval_boundaries: Optional[tuple[int, ...]] = None
    condition_labels: Optional[tuple[int, ...]] = None

    def __post_init__(self):
        x = np.asarray(self.channels, dtype=float)
        if x.ndim == 1:
            x = x[np.newaxis, :]
        if x.ndim != 2 or x.shape[1] < 1:
            raise ValidationError("channels must be an (N, T) array with T >= 1")
        if not self.sampling_rate > 0:
            raise ValidationError(f"sampling_rate must be > 0, got {self.sampling_rate}")
        object.__setattr__(self, "channels", x)
        n = x.shape[1]
        edges = self.interval_boundaries
        if edges is not None:
            edges = tuple(int(b) for b in edges)
            if len(edges) < 2 or edges[0] != 0 or edges[-1] != n:
                raise ValidationError(
                    f"interval boundaries must run from 0 to T={n}, got {edges}")
            if any(b >= c for b, c in zip(edges, edges[1:])):
                raise ValidationError("interval boundaries must be strictly increasing")
            object.__setattr__(self, "interval_boundaries", edges)
        labels = self.condition_labels
        if labels is not None:
            labels = tuple(int(k) for k in labels)
            n_int = len(edges) - 1 if edges is not None else 1
            if len(labels) != n_int:
                raise ValidationError(
                    f"{len(labels)} condition labels for {n_int} intervals")
            if min(labels) < 1:
                raise ValidationError("condition labels must be >= 1")
            object.__setattr__(self, "condition_labels", labels)

    @property
    def n_channels(self) -> int:
        return self.channels.shape[0]

    @property
    def n_samples(self) -> int:
        return self.channels.shape[1]

    def intervals(self) -> list[tuple[int, int]]:
        edges = self.interval_boundaries or (0, self.n_samples)
        return list(zip(edges[:-1], edges[1:]))

    def labels(self) -> tuple[int, ...]:
        return self.condition_labels or (1,) * len(self.intervals())


@dataclass(frozen=True)
class GroundTruth:
    mixing: np.ndarray
    sources: tuple[SourceSignal, ...]
    noise_sd: float = 0.0
    noise_seed: int = 0
    interval_boundaries: Optional[tuple[int, ...]] = None
    condition_labels: Optional[tuple[int, ...]] = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        a = np.atleast_2d(np.asarray(self.mixing, dtype=float))
        n, m = a.shape
        if m > n:
            raise ValidationError(
                f"n_sources M={m} exceeds n_sensors N={n}; need M <= N")
        if len(self.sources) != m:
            raise ValidationError(f"mixing has {m} columns but {len(self.sources)} sources")
        s = np.linalg.svd(a, compute_uv=False)
        if not s[-1] > 1e-12 * s[0]:
            raise ValidationError("mixing matrix must have full column rank")
        if self.noise_sd < 0:
            raise ValidationError("noise_sd must be >= 0")
        object.__setattr__(self, "mixing", a)
        object.__setattr__(self, "sources", tuple(self.sources))

    @property
    def source_matrix(self) -> np.ndarray:
        lengths = {len(s) for s in self.sources}
        if len(lengths) != 1:
            raise ValidationError(f"sources have unequal lengths {sorted(lengths)}")
        return np.vstack([s.samples for s in self.sources])

    @property
    def sampling_rate(self) -> float:
        return self.sources[0].sampling_rate


def ar_burn_in(order: int) -> int:
    return max(100, 10 * order)


def check_ar_stable(ar_coefficients: Sequence[float]) -> np.ndarray:
    """Return the AR poles, raising if any lies on or outside the unit circle."""
    a = np.asarray(ar_coefficients, dtype=float).ravel()
    if a.size == 0:
        return np.zeros(0, dtype=complex)
    poles = np.roots(np.concatenate([[1.0], -a]))
    mags = np.abs(poles)
    if np.any(mags >= 1.0 - 1e-10):  # roots of |z| = 1 come back as 1 - eps
        raise ValidationError(
            f"unstable AR coefficients {a.tolist()}: pole magnitude "
            f"{mags.max():.6g} >= 1")
    return poles


def ar2_coefficients(peak_hz: float, sampling_rate: float, radius: float = 0.95) -> list[float]:
    """AR(2) coefficients with a resonance at ``peak_hz``: pole pair radius*exp(±iθ)."""
    theta = 2 * np.pi * peak_hz / sampling_rate
    return [2 * radius * np.cos(theta), -radius ** 2]


def gen_ar_source(ar_coefficients: Sequence[float], length: int, seed: int,
                  sampling_rate: float = 1.0) -> SourceSignal:
    """Zero-mean Gaussian AR process x(t) = sum_k a_k x(t-k) + e(t), e ~ N(0, 1).

    The first ``max(100, 10 * order)`` samples are discarded so the output is
    free of the zero-initial-state transient.
    """
    if length < 1:
        raise ValidationError("length must be >= 1")
    a = np.asarray(ar_coefficients, dtype=float).ravel()
    check_ar_stable(a)
    burn = ar_burn_in(a.size)
    e = make_rng(seed).standard_normal(burn + int(length))
    x = lfilter([1.0], np.concatenate([[1.0], -a]), e)[burn:]
    kind = "ar" if a.size else "white"
    return SourceSignal(x, sampling_rate, kind)


def equal_intervals(length: int, n_intervals: int) -> tuple[int, ...]:
    if n_intervals < 1 or n_intervals > length:
        raise ValidationError(f"cannot split {length} samples into {n_intervals} intervals")
    return tuple(int(round(i * length / n_intervals)) for i in range(n_intervals + 1))


def gen_envelope_source(base_sd_per_interval: Sequence[float],
                        interval_boundaries: Sequence[int], length: int, seed: int,
                        sampling_rate: float = 1.0) -> SourceSignal:
    """White Gaussian noise with a piecewise-constant standard deviation.

    ``interval_boundaries`` are the I+1 edges ``[0, ..., length]``.
    """
    sds = np.asarray(base_sd_per_interval, dtype=float).ravel()
    edges = [int(b) for b in interval_boundaries]
    if len(edges) != sds.size + 1:
        raise ValidationError(f"{sds.size} sds need {sds.size + 1} edges, got {len(edges)}")
    if edges[0] != 0 or edges[-1] != length or any(b >= c for b, c in zip(edges, edges[1:])):
        raise ValidationError("edges must increase strictly from 0 to length")
    if np.any(sds < 0):
        raise ValidationError("standard deviations must be >= 0")
    if np.unique(sds).size < 2:
        raise ValidationError(
            "envelope needs at least two distinct sds; a constant envelope "
            "carries no nonstationarity")
    envelope = np.repeat(sds, np.diff(edges))
    x = make_rng(seed).standard_normal(int(length)) * envelope
    return SourceSignal(x, sampling_rate, "envelope")


def random_mixing(n_sensors: int, n_sources: int, min_singular_value: float = 0.1,
                  seed: int = 0, max_draws: int = 10_000) -> np.ndarray:
    """Standard-normal N x M matrix redrawn until sigma_min / sigma_max >= threshold."""
    if n_sources < 1 or n_sensors < 1:
        raise ValidationError("need at least one sensor and one source")
    if n_sources > n_sensors:
        raise ValidationError(
            f"n_sources M={n_sources} exceeds n_sensors N={n_sensors}; need M <= N")
    if not 0 < min_singular_value <= 1:
        raise ValidationError("min_singular_value must lie in (0, 1]")
    rng = make_rng(seed)
    for _ in range(max_draws):
        a = rng.standard_normal((n_sensors, n_sources))
        s = np.linalg.svd(a, compute_uv=False)
        if s[-1] >= min_singular_value * s[0]:
            return a
    raise ValidationError(
        f"no {n_sensors}x{n_sources} draw reached ratio {min_singular_value} "
        f"in {max_draws} attempts")


def mix(truth: GroundTruth) -> Recording:
    """v(t) = A s(t) + eta(t), with eta i.i.d. N(0, noise_sd^2) per sensor and sample."""
    s = truth.source_matrix
    v = truth.mixing @ s
    if truth.noise_sd > 0:
        v = v + truth.noise_sd * make_rng(truth.noise_seed).standard_normal(v.shape)
    return Recording(v, truth.sampling_rate, truth.interval_boundaries,
                     truth.condition_labels)
