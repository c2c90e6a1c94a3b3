"""Approximate joint diagonalization solvers.

Three routes to a matrix B making every B C_v B^T (nearly) diagonal:

* ``ajd_orthogonal``: cyclic Jacobi (Givens) sweeps; for whitened sets.
* ``ajd_nonorthogonal``: multiplicative updates B <- (I + W) B where W solves
  the linearized weighted least-squares problem pair by pair.
* ``gevd_two_matrix``: the exact two-matrix case.

The weighted off-diagonal criterion is sum_v w_v sum_{r != c} (B C_v B^T)_rc^2.
It is not scale invariant, so the non-orthogonal solver fixes each row's
scale by requiring diag(B Cbar B^T) = 1 for the weighted mean matrix Cbar.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.linalg

from .diagset import DiagonalizationSet
from .errors import DegenerateWarning, NumericalError, ValidationError

SOLVERS = ("orthogonal", "nonorthogonal", "gevd2")


@dataclass
class Diagonalizer:
    matrix: np.ndarray
    criterion_trace: list = field(default_factory=list)
    sweeps: int = 0
    converged: bool = True
    solver: str = ""
    warnings: list = field(default_factory=list)
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        s = np.linalg.svd(self.matrix, compute_uv=False)
        if not s[-1] > 1e-12 * s[0]:
            raise NumericalError(
                f"diagonalizer is numerically singular (sigma_min/sigma_max = {s[-1] / s[0]:.3g})")


def _offdiag_energy(t: np.ndarray) -> np.ndarray:
    """Per-matrix sum of squared off-diagonal entries of a (V, n, n) stack."""
    n = t.shape[-1]
    mask = ~np.eye(n, dtype=bool)
    return np.sum((t * t)[:, mask], axis=-1)


def off_criterion(dset: DiagonalizationSet, B) -> float:
    B = np.atleast_2d(np.asarray(B, dtype=float))
    if B.shape[1] != dset.dim:
        raise ValidationError(f"B has {B.shape[1]} columns for {dset.dim}x{dset.dim} matrices")
    act = dset.active
    t = B @ dset.matrices[act] @ B.T
    return float(np.dot(dset.weights[act], _offdiag_energy(t)))


def ajd_orthogonal(dset: DiagonalizationSet, tolerance: float = 1e-9,
                   max_sweeps: int = 200) -> Diagonalizer:
    """Orthogonal joint diagonalizer by cyclic Jacobi rotations.

    Each rotation minimizes the criterion exactly within its (p, q) plane, so
    the per-sweep criterion never increases. Weights enter by scaling each
    matrix by sqrt(w_v). The loop ends when every angle of a sweep is below
    ``tolerance`` (converged) or after ``max_sweeps``.
    """
    act = dset.active
    a = dset.matrices[act] * np.sqrt(dset.weights[act])[:, None, None]
    a = 0.5 * (a + np.swapaxes(a, 1, 2))
    n = a.shape[1]
    V = np.eye(n)
    trace = [float(np.sum(_offdiag_energy(a)))]
    converged = False
    sweeps = 0
    rotations = 0
    while sweeps < max_sweeps:
        sweeps += 1
        largest = 0.0
        for p in range(n - 1):
            for q in range(p + 1, n):
                g1 = a[:, p, p] - a[:, q, q]
                g2 = a[:, p, q] + a[:, q, p]
                ton = g1 @ g1 - g2 @ g2
                toff = 2.0 * (g1 @ g2)
                theta = 0.5 * np.arctan2(toff, ton + np.hypot(ton, toff))
                largest = max(largest, abs(theta))
                if abs(theta) < tolerance:
                    continue
                rotations += 1
                c, s = np.cos(theta), np.sin(theta)
                ap, aq = a[:, :, p].copy(), a[:, :, q].copy()
                a[:, :, p] = c * ap + s * aq
                a[:, :, q] = c * aq - s * ap
                ap, aq = a[:, p, :].copy(), a[:, q, :].copy()
                a[:, p, :] = c * ap + s * aq
                a[:, q, :] = c * aq - s * ap
                vp, vq = V[:, p].copy(), V[:, q].copy()
                V[:, p] = c * vp + s * vq
                V[:, q] = c * vq - s * vp
        trace.append(float(np.sum(_offdiag_energy(a))))
        if largest < tolerance:
            converged = True
            break
    return Diagonalizer(V.T, trace, sweeps, converged, "orthogonal",
                        diagnostics={"rotations": rotations})


def _inv_sqrt_psd(c: np.ndarray) -> Optional[np.ndarray]:
    lam, u = np.linalg.eigh(0.5 * (c + c.T))
    if lam[0] <= 1e-12 * max(lam[-1], 0.0) or lam[-1] <= 0:
        return None
    return (u / np.sqrt(lam)) @ u.T


def _fix_row_scale(B: np.ndarray, cbar: np.ndarray) -> np.ndarray:
    d = np.einsum("ij,jk,ik->i", B, cbar, B)
    norms = np.linalg.norm(B, axis=1)
    scale = np.where(d > 1e-300, 1.0 / np.sqrt(np.abs(d)), 1.0 / norms)
    return B * scale[:, None]


def ajd_nonorthogonal(dset: DiagonalizationSet, tolerance: float = 1e-9,
                      max_iterations: int = 200, init=None) -> Diagonalizer:
    """Weighted non-orthogonal joint diagonalizer.

    Parameters
    ----------
    dset : DiagonalizationSet
        At least two entries must carry positive weight.
    tolerance : float
        Stop when the relative decrease of the criterion falls below this.
    max_iterations : int
        Upper bound on accepted updates.
    init : array_like, optional
        Starting matrix. Defaults to the inverse square root of the weighted
        mean matrix when that is positive definite, else the identity.

    Returns
    -------
    Diagonalizer
        ``diagnostics["jacobian_conditioning"]`` is the smallest normalized
        determinant of the 2x2 normal equations at the final iterate; values
        near zero flag pairs of components with nearly proportional profiles.
    """
    act = dset.active
    if act.sum() < 2:
        raise ValidationError(
            "non-orthogonal AJD needs at least two positive-weight matrices; "
            "a single matrix is diagonalized by infinitely many congruences")
    C = dset.matrices[act]
    C = 0.5 * (C + np.swapaxes(C, 1, 2))
    w = dset.weights[act]
    w = w / w.mean()
    n = C.shape[1]
    cbar = np.tensordot(w / w.sum(), C, axes=1)
    if init is not None:
        B = np.array(init, dtype=float)
    else:
        B = _inv_sqrt_psd(cbar)
        if B is None:
            B = np.eye(n)
    B = _fix_row_scale(B, cbar)
    eye = np.eye(n)
    offmask = ~np.eye(n, dtype=bool)

    def criterion(B):
        t = B @ C @ B.T
        return float(np.dot(w, _offdiag_energy(t))), t

    crit, t = criterion(B)
    trace = [crit]
    converged = False
    it = 0
    conditioning = 1.0
    while it < max_iterations:
        D = np.diagonal(t, axis1=1, axis2=2)
        E = t * offmask
        z = np.einsum("k,ki,kj->ij", w, D, D)
        y = np.einsum("k,kij,kj->ij", w, E, D)
        zd = np.diag(z)
        det = np.outer(zd, zd) - z * z
        norm_det = det / np.outer(zd, zd)
        conditioning = float(norm_det[offmask].min()) if n > 1 else 1.0
        ok = offmask & (norm_det > 1e-14)
        W = np.zeros((n, n))
        W[ok] = ((z * y.T - zd[:, None] * y)[ok]) / det[ok]
        wn = np.linalg.norm(W)
        if wn > 0.9:
            W *= 0.9 / wn
        if wn == 0.0:
            converged = True
            break
        step = 1.0
        accepted = False
        singular = 0
        for _ in range(30):
            M = eye + step * W
            if abs(np.linalg.det(M)) < 1e-12:
                singular += 1
                step *= 0.5
                continue
            Bn = _fix_row_scale(M @ B, cbar)
            cn, tn = criterion(Bn)
            if cn <= crit:
                accepted = True
                break
            step *= 0.5
        if not accepted:
            if singular >= 30:
                raise NumericalError("every halved update I + W was singular")
            # no descent direction left at working precision
            converged = True
            break
        it += 1
        rel = (crit - cn) / crit if crit > 0 else 0.0
        B, crit, t = Bn, cn, tn
        trace.append(crit)
        diag_energy = float(np.dot(w, np.sum(D * D, axis=1)))
        if rel < tolerance or crit <= 1e-30 * diag_energy:
            converged = True
            break
    return Diagonalizer(B, trace, it, converged, "nonorthogonal",
                        diagnostics={"jacobian_conditioning": conditioning})


def gevd_two_matrix(C1, C2, rtol: float = 1e-8) -> Diagonalizer:
    """Exact joint diagonalizer of an SPD matrix C1 and a symmetric C2.

    Rows of the result are generalized eigenvectors, ordered by decreasing
    generalized eigenvalue, so that B C1 B^T = I and B C2 B^T is diagonal.
    Near-equal eigenvalues leave the rotation inside their eigenspace
    undetermined; a ``DegenerateWarning`` is issued and recorded.
    """
    C1 = np.asarray(C1, dtype=float)
    C2 = np.asarray(C2, dtype=float)
    C1 = 0.5 * (C1 + C1.T)
    C2 = 0.5 * (C2 + C2.T)
    try:
        np.linalg.cholesky(C1)
    except np.linalg.LinAlgError:
        raise ValidationError("C1 must be strictly positive definite") from None
    lam, X = scipy.linalg.eigh(C2, C1)
    order = np.argsort(-lam, kind="stable")
    lam, X = lam[order], X[:, order]
    notes = []
    scale = np.max(np.abs(lam))
    gaps = np.abs(np.diff(lam))
    if lam.size > 1 and (scale == 0 or np.any(gaps <= rtol * scale)):
        msg = (f"repeated generalized eigenvalues (min gap {gaps.min():.3g}, "
               f"scale {scale:.3g}); rows within the eigenspace are unidentifiable")
        warnings.warn(msg, DegenerateWarning, stacklevel=2)
        notes.append(msg)
    B = X.T
    t = B @ C2 @ B.T
    off = float(_offdiag_energy(t[np.newaxis])[0])
    return Diagonalizer(B, [off], 0, True, "gevd2", notes,
                        {"eigenvalues": lam.tolist()})
