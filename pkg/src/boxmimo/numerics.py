"""Complex linear algebra helpers shared by every detector.

Vectors and matrices are plain ``numpy.complex128`` arrays. The QR
factorization uses LAPACK's Householder routine (through ``numpy.linalg``)
and then rotates each column so that the diagonal of ``R`` is real and
non-negative, which makes the factorization unique for nonsingular input.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import SingularChannel

#: Smallest admissible magnitude of a diagonal entry of ``R``.
SINGULAR_TOL = 1e-12


@dataclass(frozen=True)
class QrFactors:
    """Unitary ``q`` and upper-triangular ``r`` with ``q @ r == h``."""

    q: np.ndarray
    r: np.ndarray


def _as_square(h) -> np.ndarray:
    h = np.asarray(h, dtype=np.complex128)
    if h.ndim != 2 or h.shape[0] != h.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {h.shape}")
    if not np.all(np.isfinite(h)):
        raise ValueError("matrix has non-finite entries")
    return h


def _normalize_phase(q: np.ndarray, r: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # works on single (n, n) or stacked (..., n, n) factors
    d = np.diagonal(r, axis1=-2, axis2=-1)
    mag = np.abs(d)
    phase = np.where(mag > 0, d / np.where(mag > 0, mag, 1.0), 1.0)
    q = q * phase[..., None, :]
    r = np.conj(phase)[..., :, None] * r
    n = r.shape[-1]
    r = np.triu(r)
    idx = np.arange(n)
    r[..., idx, idx] = mag
    return q, r


def qr_decompose(h) -> QrFactors:
    """Factor a square complex matrix as ``q @ r`` with a real, non-negative diagonal.

    Raises :class:`SingularChannel` when any ``|r[i, i]|`` falls below
    :data:`SINGULAR_TOL`.
    """
    h = _as_square(h)
    q, r = np.linalg.qr(h)
    q, r = _normalize_phase(q, r)
    if np.min(np.real(np.diagonal(r))) < SINGULAR_TOL:
        raise SingularChannel("channel matrix is numerically singular")
    return QrFactors(q=q, r=r)


def qr_decompose_many(h: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Batched :func:`qr_decompose` over a ``(T, n, n)`` stack.

    Returns ``(q, r, ok)`` where ``ok[t]`` is False for singular matrices.
    Each slice is bit-identical to calling :func:`qr_decompose` on it.
    """
    h = np.asarray(h, dtype=np.complex128)
    q, r = np.linalg.qr(h)
    q, r = _normalize_phase(q, r)
    ok = np.min(np.real(np.diagonal(r, axis1=-2, axis2=-1)), axis=-1) >= SINGULAR_TOL
    return q, r, ok


def sorted_qr_many(h: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Column-sorted QR of a ``(T, n, n)`` stack: ``h[:, :, perm] == q @ r``.

    Modified Gram-Schmidt that, at every step, takes the remaining column
    with the smallest residual norm. Weak columns end up in the top rows of
    ``r`` and the strongest in the last row, which a tree search decides
    first. Returns ``(q, r, perm, ok)``; the diagonal of ``r`` is real and
    non-negative.
    """
    h = np.asarray(h, dtype=np.complex128)
    t, _, n = h.shape
    q = h.copy()
    r = np.zeros_like(h)
    perm = np.tile(np.arange(n), (t, 1))
    rows = np.arange(t)
    norms = np.sum(np.abs(q) ** 2, axis=1)
    for i in range(n):
        k = i + np.argmin(norms[:, i:], axis=1)
        for a in (q, r):
            a[rows, :, i], a[rows, :, k] = a[rows, :, k], a[rows, :, i].copy()
        for a in (norms, perm):
            a[rows, i], a[rows, k] = a[rows, k], a[rows, i].copy()
        d = np.sqrt(np.maximum(norms[:, i], 0.0))
        r[:, i, i] = d
        q[:, :, i] /= np.where(d > 0, d, 1.0)[:, None]
        if i + 1 < n:
            proj = np.einsum("tj,tjl->tl", q[:, :, i].conj(), q[:, :, i + 1:])
            r[:, i, i + 1:] = proj
            q[:, :, i + 1:] -= q[:, :, i, None] * proj[:, None, :]
            norms[:, i + 1:] -= np.abs(proj) ** 2
    ok = np.min(np.real(np.diagonal(r, axis1=-2, axis2=-1)), axis=-1) >= SINGULAR_TOL
    return q, r, perm, ok


def herm_mul_vec(a, v) -> np.ndarray:
    """Return ``a^H v``."""
    a = np.asarray(a, dtype=np.complex128)
    v = np.asarray(v, dtype=np.complex128)
    if a.ndim != 2 or v.ndim != 1 or a.shape[0] != v.shape[0]:
        raise ValueError(f"dimension mismatch: a {a.shape}, v {v.shape}")
    return a.conj().T @ v


def back_substitute(r, x) -> np.ndarray:
    """Solve ``r z = x`` for upper-triangular ``r``."""
    r = np.asarray(r, dtype=np.complex128)
    x = np.asarray(x, dtype=np.complex128)
    n = r.shape[0]
    if r.shape != (n, n) or x.shape != (n,):
        raise ValueError(f"dimension mismatch: r {r.shape}, x {x.shape}")
    diag = np.abs(np.diagonal(r))
    if n and np.min(diag) < SINGULAR_TOL:
        raise SingularChannel("triangular factor has a vanishing diagonal entry")
    z = np.zeros(n, dtype=np.complex128)
    for i in range(n - 1, -1, -1):
        z[i] = (x[i] - r[i, i + 1:] @ z[i + 1:]) / r[i, i]
    return z
