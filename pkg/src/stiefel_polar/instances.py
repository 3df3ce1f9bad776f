"""Seeded test-instance generators with ground-truth sidecar data.

The rotated-diagonal constructions hide a diagonal tensor behind per-mode
rotations.  At the returned point the block gradients are ``u`` times a PSD
diagonal matrix, so the point is stationary, and with every diagonal entry
bounded away from zero the Hessian attains the largest rank the family
symmetries allow.
"""
from __future__ import annotations

import numpy as np

from .objectives import (
    CompressionObjective,
    DiagonalObjective,
    SymmetricDiagonalObjective,
)
from .stiefel import polar_decompose, random_stiefel, truncated_identity
from .tensors import make_diagonal, mode_product, random_tensor, symmetrize

__all__ = [
    "rank1_instance",
    "symmetric_rank1_instance",
    "tucker_instance",
    "rotated_diagonal_instance",
    "symmetric_rotated_diagonal_instance",
    "compression_rotated_diagonal_instance",
    "convex_symmetric_instance",
]


def _child_seed(seed, *key):
    return int(np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(key)).generate_state(1)[0])


def _unit_vector(n, seed):
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    return v / np.linalg.norm(v)


def _outer(vectors):
    t = vectors[0]
    for v in vectors[1:]:
        t = np.tensordot(t, v, axes=0)
    return t


def rank1_instance(dims, seed, lam=2.0):
    """Rank-one tensor ``lam * u_1 x .. x u_d`` with unit factors.

    The squared modulus of the top core value is ``lam**2``; the factors are
    recoverable up to a per-mode phase.
    """
    lam = float(lam)
    factors = [_unit_vector(n, _child_seed(seed, i)) for i, n in enumerate(dims)]
    tensor = lam * _outer(factors)
    meta = {"lam": lam, "lam_sq": lam * lam, "factors": [v.copy() for v in factors]}
    return tensor, meta


def symmetric_rank1_instance(n, d, seed, lam=2.0):
    """Symmetric rank-one tensor ``lam * u x .. x u`` (d copies)."""
    lam = float(lam)
    v = _unit_vector(n, _child_seed(seed, 0))
    tensor = lam * _outer([v] * int(d))
    meta = {"lam": lam, "lam_sq": lam * lam, "factor": v.copy()}
    return tensor, meta


def tucker_instance(dims, ranks, seed):
    """Random core compressed dims ``ranks`` expanded by random Stiefel factors.

    The compression objective with the true ranks attains the squared core
    norm exactly, so ``meta["core_norm_sq"]`` is the global maximum.
    """
    dims = tuple(int(n) for n in dims)
    ranks = tuple(int(r) for r in ranks)
    core = random_tensor(ranks, _child_seed(seed, 0))
    factors = [random_stiefel(n, r, _child_seed(seed, 1 + i)) for i, (n, r) in enumerate(zip(dims, ranks))]
    t = core
    for i, u in enumerate(factors):
        t = mode_product(t, u, i)
    meta = {
        "core_norm_sq": float(np.vdot(core, core).real),
        "ranks": list(ranks),
        "factors": [u.copy() for u in factors],
    }
    return t, meta


def _diag_entries(count, seed):
    # deterministic, strictly decreasing magnitudes in [0.7, 1.6]: guaranteed
    # distinct (the strict-gap conditions hold by construction) and moderate
    # ratios, so perturbations decay at a measurable geometric rate instead of
    # collapsing within a sweep or two
    rng = np.random.default_rng(seed)
    mag = np.linspace(1.6, 0.7, count)
    phase = np.exp(2j * np.pi * rng.random(count))
    return mag * phase


def _apply_rotations(t, rotations, dagger):
    # hide the diagonal behind q (dagger "H") or conj(q) (dagger "T") per mode,
    # so the daggered factors q @ eye recover it exactly
    for i, q in enumerate(rotations):
        m = q if dagger == "H" else q.conj()
        t = mode_product(t, m, i)
    return t


def rotated_diagonal_instance(dims, r, num_tensors=2, seed=0, dagger="H"):
    """Diagonal-concentration instance with a known stationary point.

    Returns ``(spec, point, meta)``: unitarily rotated diagonal tensors, the
    rotated truncated identities as the stationary point, and sidecar data
    (rotations, diagonal entries, weights).
    """
    dims = tuple(int(n) for n in dims)
    r = int(r)
    rotations = [random_stiefel(n, n, _child_seed(seed, 10 + i)) for i, n in enumerate(dims)]
    tensors = []
    diags = []
    for l in range(num_tensors):
        entries = _diag_entries(min(dims), _child_seed(seed, 20 + l))
        diags.append(entries)
        tensors.append(_apply_rotations(make_diagonal(dims, entries), rotations, dagger))
    weights = [1.0 + 0.25 * l for l in range(num_tensors)]
    spec = DiagonalObjective(tuple(tensors), tuple(weights), r, dagger)
    point = [q @ truncated_identity(n, r) for q, n in zip(rotations, dims)]
    meta = {"rotations": rotations, "diagonals": diags, "weights": weights}
    return spec, point, meta


def symmetric_rotated_diagonal_instance(n, d, r, num_tensors=2, seed=0, dagger="H"):
    """Shared-factor variant: one rotation used in every mode of each tensor."""
    n, d, r = int(n), int(d), int(r)
    q = random_stiefel(n, n, _child_seed(seed, 10))
    tensors = []
    diags = []
    for l in range(num_tensors):
        entries = _diag_entries(n, _child_seed(seed, 20 + l))
        diags.append(entries)
        diag = make_diagonal((n,) * d, entries)
        tensors.append(symmetrize(_apply_rotations(diag, [q] * d, dagger)))
    weights = [1.0 + 0.25 * l for l in range(num_tensors)]
    spec = SymmetricDiagonalObjective(tuple(tensors), tuple(weights), r, dagger)
    point = q @ truncated_identity(n, r)
    meta = {"rotation": q, "diagonals": diags, "weights": weights}
    return spec, point, meta


def convex_symmetric_instance(n, d, r, num_terms=3, seed=0, dagger="H"):
    """Shared-factor objective that is certifiably convex in the single block.

    Each tensor is a separate symmetric rank-one term ``lam_l * h_l^(x d)``,
    so every summand of the objective is ``alpha_l*|lam_l|^2*|<h_l-form,
    u_p>|^(2d)`` - the even power of the modulus of a (conjugate-)linear form,
    hence convex.  Positive weights keep the sum convex, which is the
    hypothesis the single-block monotone-ascent guarantee needs.
    """
    n, d, r = int(n), int(d), int(r)
    tensors = []
    terms = []
    for l in range(int(num_terms)):
        h = _unit_vector(n, _child_seed(seed, 40 + l))
        lam = 0.8 + 0.2 * l
        tensors.append(lam * _outer([h] * d))
        terms.append({"lam": lam, "factor": h})
    weights = [1.0 + 0.25 * l for l in range(int(num_terms))]
    spec = SymmetricDiagonalObjective(tuple(tensors), tuple(weights), r, dagger)
    meta = {"terms": terms, "weights": weights}
    return spec, meta


def _random_orthogonal(n, seed):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((n, n))
    q, _ = polar_decompose(x.astype(np.complex128))
    return q


def compression_rotated_diagonal_instance(dims, r, num_tensors=2, seed=0, dagger="H"):
    """Compression instance with a known stationary point of maximal Hessian rank.

    Real orthogonal rotations per mode (valid for both dagger modes) hide
    diagonal tensors; all block ranks equal ``r``.
    """
    dims = tuple(int(n) for n in dims)
    r = int(r)
    rotations = [_random_orthogonal(n, _child_seed(seed, 10 + i)) for i, n in enumerate(dims)]
    tensors = []
    diags = []
    for l in range(num_tensors):
        entries = _diag_entries(min(dims), _child_seed(seed, 20 + l))
        diags.append(entries)
        tensors.append(_apply_rotations(make_diagonal(dims, entries), rotations, dagger))
    weights = [1.0 + 0.25 * l for l in range(num_tensors)]
    spec = CompressionObjective(tuple(tensors), tuple(weights), (r,) * len(dims), dagger)
    point = [q @ truncated_identity(n, r) for q, n in zip(rotations, dims)]
    meta = {"rotations": rotations, "diagonals": diags, "weights": weights}
    return spec, point, meta
