"""Synthetic separation benchmarks.

Default parameters (source counts, AR radius, lengths, epoch sizes) are
engineering choices for reproducible tests, not recommended EEG settings.
"""
from __future__ import annotations

from dataclasses import replace
from typing import Optional, Sequence

import numpy as np

from .config import RunConfig
from .diagset import from_matrices
from .evaluation import performance_index, system_matrix
from .pipeline import separate
from .sim import (GroundTruth, Recording, ar2_coefficients, child_seeds, equal_intervals,
                  gen_ar_source, gen_envelope_source, make_rng, mix, random_mixing)


def exact_model_set(n_sensors: int, n_sources: int, n_matrices: int, seed: int,
                    min_singular_value: float = 0.1):
    """Set {A D_v A^T} with random positive diagonal profiles; returns (set, A)."""
    rng = make_rng(seed)
    A = random_mixing(n_sensors, n_sources, min_singular_value, seed)
    D = rng.uniform(0.1, 2.0, size=(n_matrices, n_sources))
    C = np.einsum("im,vm,jm->vij", A, D, A)
    return from_matrices(C), A


def coloration_truth(seed: int, n_sources: int = 8, length: int = 2 ** 13,
                     sampling_rate: float = 128.0, peak_range=(2.0, 30.0),
                     radius: float = 0.95, n_sensors: Optional[int] = None,
                     noise_sd: float = 0.0) -> GroundTruth:
    """AR(2) sources with resonances spread evenly over ``peak_range``."""
    seeds = child_seeds(seed, n_sources + 2)
    peaks = np.linspace(*peak_range, n_sources)
    sources = [gen_ar_source(ar2_coefficients(p, sampling_rate, radius), length, s,
                             sampling_rate)
               for p, s in zip(peaks, seeds)]
    A = random_mixing(n_sensors or n_sources, n_sources, 0.1, seeds[-2])
    return GroundTruth(A, tuple(sources), noise_sd, seeds[-1],
                       meta={"benchmark": "coloration", "peaks_hz": peaks.tolist()})


def nonstationarity_truth(seed: int, n_sources: int = 4, n_intervals: int = 4,
                          length: int = 2 ** 15, sampling_rate: float = 128.0,
                          sd_range=(0.7, 1.3), n_sensors: Optional[int] = None
                          ) -> GroundTruth:
    """White sources whose sd changes per interval; spectra are all flat.

    Profiles are drawn from U(*sd_range) per source and interval. Strong
    modulation makes the pooled marginals heavy-tailed, and that alone lets a
    frequency-only set separate partially through its estimation noise; the
    moderate default keeps the sources close to Gaussian over the record.
    """
    seeds = child_seeds(seed, n_sources + 3)
    edges = equal_intervals(length, n_intervals)
    sds = make_rng(seeds[-3]).uniform(*sd_range, size=(n_sources, n_intervals))
    sources = [gen_envelope_source(sd, edges, length, s, sampling_rate)
               for sd, s in zip(sds, seeds)]
    A = random_mixing(n_sensors or n_sources, n_sources, 0.1, seeds[-2])
    return GroundTruth(A, tuple(sources), 0.0, seeds[-1], edges,
                       meta={"benchmark": "nonstationarity", "sds": sds.tolist()})


def condition_truth(seed: int, length: int = 2 ** 13, sampling_rate: float = 128.0,
                    n_repeats: int = 2, sds=(1.0, 2.0), n_sensors: int = 2
                    ) -> GroundTruth:
    """Two white sources over alternating conditions 1, 2, 1, 2, ...

    Source 1 has sd ``sds[0]`` in condition 1 and ``sds[1]`` in condition 2;
    source 2 the reverse, so the energy ratio swaps between conditions.
    """
    seeds = child_seeds(seed, 4)
    labels = tuple([1, 2] * n_repeats)
    edges = equal_intervals(length, len(labels))
    lo, hi = sds
    profiles = [[lo if k == 1 else hi for k in labels], [hi if k == 1 else lo for k in labels]]
    sources = [gen_envelope_source(p, edges, length, s, sampling_rate)
               for p, s in zip(profiles, seeds)]
    A = random_mixing(n_sensors, 2, 0.1, seeds[2])
    return GroundTruth(A, tuple(sources), 0.0, seeds[3], edges, labels,
                       meta={"benchmark": "condition"})


def add_highband_noise(recording: Recording, cutoff_hz: float, snr_db: float,
                       seed: int, reference: str = "total") -> Recording:
    """Add spatially white sensor noise confined above ``cutoff_hz``.

    Each channel's noise is scaled so that signal power over noise power equals
    ``snr_db``, the signal power being that of the whole channel
    (``reference="total"``) or only of its part above the cutoff (``"band"``).
    """
    x = recording.channels
    n, T = x.shape
    freqs = np.fft.rfftfreq(T, 1.0 / recording.sampling_rate)
    high = freqs > cutoff_hz
    noise_f = np.fft.rfft(make_rng(seed).standard_normal((n, T)), axis=1)
    noise_f[:, ~high] = 0.0
    signal_f = np.fft.rfft(x, axis=1)
    sig_bins = high if reference == "band" else slice(None)
    p_sig = np.sum(np.abs(signal_f[:, sig_bins]) ** 2, axis=1)
    p_noise = np.sum(np.abs(noise_f[:, high]) ** 2, axis=1)
    gain = np.sqrt(p_sig / p_noise / 10 ** (snr_db / 10))
    noise = np.fft.irfft(noise_f * gain[:, None], n=T, axis=1)
    return replace(recording, channels=x + noise)


def run(truth: GroundTruth, config: RunConfig, recording: Optional[Recording] = None) -> float:
    """Separate ``truth``'s mixture and return the performance index."""
    rec = recording if recording is not None else mix(truth)
    res = separate(rec, config)
    return performance_index(system_matrix(res.model.B, truth.mixing))


def median_index(make_truth, config: RunConfig, seeds: Sequence[int], **kwargs) -> float:
    return float(np.median([run(make_truth(s, **kwargs), config) for s in seeds]))
