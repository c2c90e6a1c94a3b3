"""Separation quality on synthetic benchmarks."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError


@dataclass(frozen=True)
class Alignment:
    permutation: np.ndarray
    signs: np.ndarray
    correlations: np.ndarray

    def as_dict(self) -> dict:
        return {"permutation": self.permutation.tolist(), "signs": self.signs.tolist(),
                "correlations": self.correlations.tolist()}


def system_matrix(B, mixing) -> np.ndarray:
    """G = B A_true; a signed scaled permutation when separation is perfect."""
    B = np.atleast_2d(np.asarray(B, dtype=float))
    A = np.atleast_2d(np.asarray(mixing, dtype=float))
    if B.shape[1] != A.shape[0]:
        raise ValidationError(
            f"demixing matrix has {B.shape[1]} columns but the mixing has {A.shape[0]} sensors")
    if B.shape[0] != A.shape[1]:
        raise ValidationError(
            f"{B.shape[0]} estimated components for {A.shape[1]} true sources")
    return B @ A


def performance_index(G) -> float:
    """Moreau-Amari index in [0, 1]; zero iff G is a signed scaled permutation.

    (1 / (2M(M-1))) * [sum_r (sum_c |G_rc| / max_c |G_rc| - 1)
                       + sum_c (sum_r |G_rc| / max_r |G_rc| - 1)]
    """
    g = np.abs(np.asarray(G, dtype=float))
    if g.ndim != 2 or g.shape[0] != g.shape[1]:
        raise ValidationError("performance index needs a square system matrix")
    m = g.shape[0]
    if m < 2:
        raise ValidationError("performance index needs M >= 2")
    row_max = g.max(axis=1)
    col_max = g.max(axis=0)
    if np.any(row_max == 0) or np.any(col_max == 0):
        raise ValidationError("system matrix has an all-zero row or column")
    rows = np.sum(g.sum(axis=1) / row_max - 1)
    cols = np.sum(g.sum(axis=0) / col_max - 1)
    return float((rows + cols) / (2 * m * (m - 1)))


def align_components(estimated, truth) -> Alignment:
    """Greedy max-|correlation| pairing of estimated rows to true rows.

    ``permutation[j]`` is the estimated component matched to true source j,
    ``signs[j]`` the sign of that correlation.
    """
    est = np.atleast_2d(np.asarray(estimated, dtype=float))
    tru = np.atleast_2d(np.asarray(truth, dtype=float))
    if est.shape != tru.shape:
        raise ValidationError(f"shape mismatch {est.shape} vs {tru.shape}")
    e = est - est.mean(axis=1, keepdims=True)
    s = tru - tru.mean(axis=1, keepdims=True)
    en = np.linalg.norm(e, axis=1)
    sn = np.linalg.norm(s, axis=1)
    if np.any(en == 0) or np.any(sn == 0):
        raise ValidationError("cannot align a zero-variance series")
    r = (e / en[:, None]) @ (s / sn[:, None]).T
    m = r.shape[0]
    perm = np.full(m, -1)
    signs = np.ones(m, dtype=int)
    corr = np.zeros(m)
    free = np.abs(r).copy()
    for _ in range(m):
        i, j = np.unravel_index(np.argmax(free), free.shape)
        perm[j] = i
        signs[j] = 1 if r[i, j] >= 0 else -1
        corr[j] = abs(r[i, j])
        free[i, :] = -1
        free[:, j] = -1
    return Alignment(perm, signs, corr)
