"""Kernels for the complex Stiefel manifold St(r, n) with the real trace metric.

Points are ``n x r`` complex arrays with orthonormal columns; the metric is
``<x, y> = Re trace(x^H y)``.  Tangent vectors at ``u`` are the matrices ``z``
with ``u^H z`` skew-Hermitian.
"""
from __future__ import annotations

import numpy as np

from .tensors import inner_re

__all__ = [
    "herm",
    "skew",
    "polar_decompose",
    "orthonormality_error",
    "require_stiefel",
    "tangent_project",
    "riemannian_gradient",
    "tangent_error",
    "require_tangent",
    "weingarten_apply",
    "random_stiefel",
    "truncated_identity",
    "truncated_identity_complement",
    "diagonal_phase_direction",
    "pair_rotation_directions",
]


def herm(x):
    """Hermitian part ``(x + x^H) / 2`` of a square matrix."""
    return 0.5 * (x + x.conj().T)


def skew(x):
    """Skew-Hermitian part ``(x - x^H) / 2`` of a square matrix."""
    return 0.5 * (x - x.conj().T)


def polar_decompose(x):
    """Polar decomposition ``x = u @ p`` of a tall (or square) matrix.

    Parameters
    ----------
    x : (n, r) array_like, n >= r

    Returns
    -------
    u : (n, r) ndarray
        Orthonormal columns; the nearest such matrix to ``x`` in Frobenius
        norm, equivalently the maximizer of ``Re trace(u'^H x)`` over the
        Stiefel manifold.  Unique iff ``x`` has full column rank; for rank
        deficient input one valid factor is returned.
    p : (r, r) ndarray
        Hermitian positive semidefinite factor, re-symmetrized to remove
        roundoff skew.

    Computed from the thin SVD ``x = w diag(s) vh`` as ``u = w @ vh`` and
    ``p = vh^H diag(s) vh``.  An SVD failure raises ``numpy.linalg.LinAlgError``.
    """
    x = np.asarray(x, dtype=np.complex128)
    if x.ndim != 2 or x.shape[0] < x.shape[1]:
        raise ValueError(f"need a tall matrix, got shape {x.shape}")
    w, s, vh = np.linalg.svd(x, full_matrices=False)
    u = w @ vh
    p = vh.conj().T @ (s[:, None] * vh)
    return u, herm(p)


def orthonormality_error(u):
    """Frobenius norm of ``u^H u - I``."""
    u = np.asarray(u)
    r = u.shape[1]
    return float(np.linalg.norm(u.conj().T @ u - np.eye(r)))


def require_stiefel(u, tol=1e-12, label="point"):
    u = np.asarray(u, dtype=np.complex128)
    if u.ndim != 2 or u.shape[0] < u.shape[1]:
        raise ValueError(f"{label}: need a tall matrix, got shape {u.shape}")
    err = orthonormality_error(u)
    if err > tol:
        raise ValueError(f"{label}: columns not orthonormal, |u^H u - I| = {err:.3e} > {tol:.1e}")
    return u


def tangent_project(u, xi):
    """Orthogonal projection of ``xi`` onto the tangent space at ``u``.

    ``proj = xi - u herm(u^H xi)``; applied to a Euclidean gradient this is
    the Riemannian gradient.
    """
    u = np.asarray(u)
    xi = np.asarray(xi)
    if u.shape != xi.shape:
        raise ValueError(f"shape mismatch: point {u.shape}, vector {xi.shape}")
    return xi - u @ herm(u.conj().T @ xi)


def riemannian_gradient(u, eucl_grad):
    """Riemannian gradient at ``u`` from the Euclidean gradient ``eucl_grad``."""
    return tangent_project(u, eucl_grad)


def tangent_error(u, z):
    """Frobenius norm of ``herm(u^H z)``, zero exactly when ``z`` is tangent at ``u``."""
    u = np.asarray(u)
    z = np.asarray(z)
    return float(np.linalg.norm(herm(u.conj().T @ z)))


def require_tangent(u, z, tol=1e-10):
    z = np.asarray(z, dtype=np.complex128)
    err = tangent_error(u, z)
    if err > tol * max(1.0, float(np.linalg.norm(z))):
        raise ValueError(f"vector is not tangent: |herm(u^H z)| = {err:.3e}")
    return z


def weingarten_apply(u, z, v):
    """Weingarten term ``-z (u^H v) - u herm(z^H v)`` for tangent ``z``, normal ``v``.

    Added to the projected Euclidean Hessian this yields the Riemannian
    Hessian:  ``Hess[z] = proj(eucl_hess[z]) + weingarten_apply(u, z, normal)``
    where ``normal = u herm(u^H eucl_grad)``.
    """
    u = np.asarray(u)
    z = np.asarray(z)
    v = np.asarray(v)
    if not (u.shape == z.shape == v.shape):
        raise ValueError(f"shape mismatch: {u.shape}, {z.shape}, {v.shape}")
    return -z @ (u.conj().T @ v) - u @ herm(z.conj().T @ v)


def random_stiefel(n, r, seed):
    """Seeded uniform-ish random point: polar factor of a complex Gaussian matrix.

    Redraws (bumping a sub-seed) in the measure-zero event of rank deficiency.
    """
    n, r = int(n), int(r)
    if n < r or r < 1:
        raise ValueError(f"need n >= r >= 1, got n={n}, r={r}")
    for attempt in range(100):
        rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(attempt,)))
        x = rng.standard_normal((n, r)) + 1j * rng.standard_normal((n, r))
        s = np.linalg.svd(x, compute_uv=False)
        if s[-1] > 1e-8 * s[0]:
            return polar_decompose(x)[0]
    raise RuntimeError("could not draw a full-rank Gaussian matrix")


def truncated_identity(n, r):
    """First ``r`` columns of the ``n x n`` identity, as a complex array."""
    return np.eye(int(n), int(r), dtype=np.complex128)


def truncated_identity_complement(n, r):
    """Last ``n - r`` columns of the ``n x n`` identity, as a complex array."""
    return np.eye(int(n), dtype=np.complex128)[:, int(r):]


def diagonal_phase_direction(u, p):
    """Tangent direction ``u @ (i e_p e_p^T)`` generated by a column phase change."""
    u = np.asarray(u)
    z = np.zeros_like(u)
    z[:, p] = 1j * u[:, p]
    return z


def pair_rotation_directions(u, p, q):
    """Tangent pair ``u @ i(e_p e_q^T + e_q e_p^T)`` and ``u @ (e_p e_q^T - e_q e_p^T)``.

    Together with :func:`diagonal_phase_direction` these span the tangent
    directions of the right unitary action ``u -> u q``.
    """
    u = np.asarray(u)
    if p == q:
        raise ValueError("need two distinct columns")
    z = np.zeros_like(u)
    z[:, q] = 1j * u[:, p]
    z[:, p] += 1j * u[:, q]
    zp = np.zeros_like(u)
    zp[:, q] = u[:, p]
    zp[:, p] -= u[:, q]
    return z, zp
