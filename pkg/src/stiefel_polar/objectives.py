"""Objective families on products of complex Stiefel manifolds.

Three built-in families, each a weighted sum over one or more data tensors
``a_l`` with weights ``alpha_l > 0`` and a dagger mode ``"H"`` (conjugate
transpose) or ``"T"`` (plain transpose):

* ``DiagonalObjective``      f(u_1, .., u_d) = sum_l alpha_l |diag(w_l)|^2
* ``SymmetricDiagonalObjective``   same with a single factor in every mode
* ``CompressionObjective``   f(u_1, .., u_d) = sum_l alpha_l |w_l|^2

where ``w_l = a_l x_1 u_1^dag .. x_d u_d^dag`` is the compressed core.  All
three extend smoothly to arbitrary complex matrices; gradients and Hessians
below are those of the extension, with the Riemannian versions obtained by
projection and the Weingarten correction.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .stiefel import herm, require_tangent, tangent_project, weingarten_apply
from .tensors import (
    diag_of,
    inner_re,
    is_symmetric,
    mode_product,
    tensor_from_json,
    tensor_to_json,
)

__all__ = [
    "DiagonalObjective",
    "SymmetricDiagonalObjective",
    "CompressionObjective",
    "block_euclidean_gradient",
    "block_euclidean_hessian_apply",
    "riemannian_block_gradient",
    "full_gradient_norm",
    "riemannian_hessian_apply",
    "tangent_basis",
    "hessian_rank",
    "seminondegenerate_hessian_rank",
    "homogeneity_residual",
    "convexity_certificate",
    "spec_to_json",
    "spec_from_json",
    "save_spec",
    "load_spec",
]

DAGGER_MODES = ("H", "T")


def _dag(m, mode):
    return m.conj().T if mode == "H" else m.T


def _diag_fibers(v, axis):
    """Columns ``v[.., p, :, p, ..]``: mode-``axis`` fibers at equal other indices."""
    vm = np.moveaxis(np.asarray(v), axis, 0)
    sub = "a" + "b" * (vm.ndim - 1)
    return np.einsum(sub + "->ab", vm)


def _coerce_tensors(tensors):
    out = tuple(np.asarray(t, dtype=np.complex128) for t in tensors)
    if not out:
        raise ValueError("need at least one tensor")
    dims = out[0].shape
    for l, t in enumerate(out):
        if t.shape != dims:
            raise ValueError(f"tensor {l} has shape {t.shape}, expected {dims}")
    if out[0].ndim < 2:
        raise ValueError("need tensors of order >= 2")
    return out


def _coerce_weights(weights, count):
    out = tuple(float(w) for w in weights)
    if len(out) != count:
        raise ValueError(f"{len(out)} weights for {count} tensors")
    if any(w <= 0 for w in out):
        raise ValueError("weights must be positive")
    return out


def _check_dagger(dagger):
    if dagger not in DAGGER_MODES:
        raise ValueError(f"dagger must be one of {DAGGER_MODES}, got {dagger!r}")
    return dagger


@dataclass(frozen=True, eq=False)
class DiagonalObjective:
    """Joint diagonal concentration of one or more same-shape tensors.

    Maximized over a tuple of Stiefel factors, one per mode, all with the
    same column count ``rank``.
    """

    tensors: tuple
    weights: tuple
    rank: int
    dagger: str = "H"

    def __post_init__(self):
        object.__setattr__(self, "tensors", _coerce_tensors(self.tensors))
        object.__setattr__(self, "weights", _coerce_weights(self.weights, len(self.tensors)))
        object.__setattr__(self, "rank", int(self.rank))
        object.__setattr__(self, "dagger", _check_dagger(self.dagger))
        if not 1 <= self.rank <= min(self.dims):
            raise ValueError(f"rank {self.rank} out of range for dims {self.dims}")

    @property
    def dims(self):
        return self.tensors[0].shape

    @property
    def order(self):
        return self.tensors[0].ndim

    @property
    def num_blocks(self):
        return self.order

    @property
    def is_symmetric(self):
        return False

    @property
    def block_shapes(self):
        return [(n, self.rank) for n in self.dims]

    def _check_blocks(self, us):
        if len(us) != self.num_blocks:
            raise ValueError(f"expected {self.num_blocks} blocks, got {len(us)}")
        for i, (u, shape) in enumerate(zip(us, self.block_shapes)):
            if np.shape(u) != shape:
                raise ValueError(f"block {i}: expected shape {shape}, got {np.shape(u)}")

    def _contract(self, t, us, skip=None):
        for j, u in enumerate(us):
            if j != skip:
                t = mode_product(t, _dag(np.asarray(u), self.dagger), j)
        return t

    def evaluate(self, us):
        self._check_blocks(us)
        f = 0.0
        for alpha, t in zip(self.weights, self.tensors):
            w = diag_of(self._contract(t, us, skip=None))
            f += alpha * float(np.vdot(w, w).real)
        return f

    def block_fiber_data(self, us, i):
        """Per tensor: weight, fiber matrix ``[v_1 .. v_r]``, and core diagonal ``w``."""
        self._check_blocks(us)
        u = np.asarray(us[i])
        out = []
        for alpha, t in zip(self.weights, self.tensors):
            fib = _diag_fibers(self._contract(t, us, skip=i), i)
            if self.dagger == "H":
                w = np.einsum("np,np->p", u.conj(), fib)
            else:
                w = np.einsum("np,np->p", u, fib)
            out.append((alpha, fib, w))
        return out

    def block_gradient(self, us, i):
        """Euclidean gradient in block ``i``; column ``p`` is ``2 conj(w_p) v_p``
        for dagger ``"H"`` and ``2 w_p conj(v_p)`` for ``"T"``."""
        g = 0.0
        for alpha, fib, w in self.block_fiber_data(us, i):
            if self.dagger == "H":
                g = g + (2.0 * alpha) * (fib * w.conj()[None, :])
            else:
                g = g + (2.0 * alpha) * (fib.conj() * w[None, :])
        return g

    def block_hessian_apply(self, us, i, z):
        """Euclidean Hessian of block ``i`` applied to ``z`` (real-linear in ``z``)."""
        z = np.asarray(z)
        out = 0.0
        for alpha, fib, _ in self.block_fiber_data(us, i):
            if self.dagger == "H":
                s = np.einsum("np,np->p", fib.conj(), z)
                out = out + (2.0 * alpha) * (fib * s[None, :])
            else:
                s = np.einsum("np,np->p", fib, z)
                out = out + (2.0 * alpha) * (fib.conj() * s[None, :])
        return out


@dataclass(frozen=True, eq=False)
class SymmetricDiagonalObjective:
    """Diagonal concentration of symmetric tensors with one shared factor.

    The single variable ``u`` is used (daggered) in every mode; the tensors
    must be invariant under all index permutations.
    """

    tensors: tuple
    weights: tuple
    rank: int
    dagger: str = "H"

    def __post_init__(self):
        object.__setattr__(self, "tensors", _coerce_tensors(self.tensors))
        object.__setattr__(self, "weights", _coerce_weights(self.weights, len(self.tensors)))
        object.__setattr__(self, "rank", int(self.rank))
        object.__setattr__(self, "dagger", _check_dagger(self.dagger))
        dims = self.tensors[0].shape
        if len(set(dims)) > 1:
            raise ValueError(f"need cubical tensors, got dims {dims}")
        for l, t in enumerate(self.tensors):
            if not is_symmetric(t):
                raise ValueError(f"tensor {l} fails the permutation-invariance scan")
        if not 1 <= self.rank <= dims[0]:
            raise ValueError(f"rank {self.rank} out of range for dimension {dims[0]}")

    @property
    def n(self):
        return self.tensors[0].shape[0]

    @property
    def order(self):
        return self.tensors[0].ndim

    @property
    def num_blocks(self):
        return 1

    @property
    def is_symmetric(self):
        return True

    @property
    def block_shapes(self):
        return [(self.n, self.rank)]

    def _check_point(self, u):
        if np.shape(u) != (self.n, self.rank):
            raise ValueError(f"expected shape {(self.n, self.rank)}, got {np.shape(u)}")

    def evaluate(self, u):
        self._check_point(u)
        u = np.asarray(u)
        m = _dag(u, self.dagger)
        f = 0.0
        for alpha, t in zip(self.weights, self.tensors):
            for j in range(self.order):
                t = mode_product(t, m, j)
            w = diag_of(t)
            f += alpha * float(np.vdot(w, w).real)
        return f

    def fiber_data(self, u):
        """Per tensor: weight, fibers ``v_p`` (all modes but the first contracted
        at column ``p``), and the core diagonal ``w``."""
        self._check_point(u)
        u = np.asarray(u)
        m = _dag(u, self.dagger)
        out = []
        for alpha, t in zip(self.weights, self.tensors):
            v = t
            for j in range(1, self.order):
                v = mode_product(v, m, j)
            fib = _diag_fibers(v, 0)
            if self.dagger == "H":
                w = np.einsum("np,np->p", u.conj(), fib)
            else:
                w = np.einsum("np,np->p", u, fib)
            out.append((alpha, fib, w))
        return out

    def gradient(self, u):
        """Euclidean gradient; ``d`` times the last-block gradient of the induced
        tuple objective at ``(u, .., u)``."""
        d = self.order
        g = 0.0
        for alpha, fib, w in self.fiber_data(u):
            if self.dagger == "H":
                g = g + (2.0 * d * alpha) * (fib * w.conj()[None, :])
            else:
                g = g + (2.0 * d * alpha) * (fib.conj() * w[None, :])
        return g

    def _pair_contractions(self, u):
        """Per tensor: matrices ``c_p`` with all modes after the second contracted
        with (daggered) column ``p``."""
        u = np.asarray(u)
        m = _dag(u, self.dagger)
        out = []
        for t in self.tensors:
            mats = []
            for p in range(self.rank):
                c = t
                row = m[p : p + 1, :]
                for ax in range(2, self.order):
                    c = mode_product(c, row, ax)
                mats.append(c.reshape(t.shape[0], t.shape[0]))
            out.append(mats)
        return out

    def hessian_apply(self, u, z):
        """Euclidean Hessian applied to ``z``.

        Column ``p`` is ``2 d^2 v_p (v_p^H z_p) + 2 d(d-1) conj(w_p) c_p conj(z_p)``
        for dagger ``"H"`` (conjugates shifted for ``"T"``); the second,
        conjugate-linear term is what distinguishes the shared-factor Hessian
        from ``d^2`` copies of the tuple one.
        """
        z = np.asarray(z)
        d = self.order
        out = np.zeros_like(z)
        pair = self._pair_contractions(u)
        for (alpha, fib, w), mats in zip(self.fiber_data(u), pair):
            if self.dagger == "H":
                s = np.einsum("np,np->p", fib.conj(), z)
                out = out + (2.0 * d * d * alpha) * (fib * s[None, :])
                for p in range(self.rank):
                    out[:, p] += (2.0 * d * (d - 1) * alpha) * (
                        np.conj(w[p]) * (mats[p] @ z[:, p].conj())
                    )
            else:
                s = np.einsum("np,np->p", fib, z)
                out = out + (2.0 * d * d * alpha) * (fib.conj() * s[None, :])
                for p in range(self.rank):
                    out[:, p] += (2.0 * d * (d - 1) * alpha) * (
                        w[p] * (mats[p].conj() @ z[:, p].conj())
                    )
        return out


@dataclass(frozen=True, eq=False)
class CompressionObjective:
    """Multilinear compression: energy captured by per-mode subspaces.

    Maximizing the core norm over Stiefel tuples with column counts
    ``ranks`` is equivalent, for a single tensor, to low multilinear-rank
    approximation.
    """

    tensors: tuple
    weights: tuple
    ranks: tuple
    dagger: str = "H"

    def __post_init__(self):
        object.__setattr__(self, "tensors", _coerce_tensors(self.tensors))
        object.__setattr__(self, "weights", _coerce_weights(self.weights, len(self.tensors)))
        object.__setattr__(self, "ranks", tuple(int(r) for r in self.ranks))
        object.__setattr__(self, "dagger", _check_dagger(self.dagger))
        dims = self.dims
        if len(self.ranks) != len(dims):
            raise ValueError(f"{len(self.ranks)} ranks for an order-{len(dims)} tensor")
        for i, (r, n) in enumerate(zip(self.ranks, dims)):
            if not 1 <= r <= n:
                raise ValueError(f"rank {r} out of range at mode {i} (dimension {n})")

    @property
    def dims(self):
        return self.tensors[0].shape

    @property
    def order(self):
        return self.tensors[0].ndim

    @property
    def num_blocks(self):
        return self.order

    @property
    def is_symmetric(self):
        return False

    @property
    def block_shapes(self):
        return [(n, r) for n, r in zip(self.dims, self.ranks)]

    def _check_blocks(self, us):
        if len(us) != self.num_blocks:
            raise ValueError(f"expected {self.num_blocks} blocks, got {len(us)}")
        for i, (u, shape) in enumerate(zip(us, self.block_shapes)):
            if np.shape(u) != shape:
                raise ValueError(f"block {i}: expected shape {shape}, got {np.shape(u)}")

    def _contract(self, t, us, skip=None):
        for j, u in enumerate(us):
            if j != skip:
                t = mode_product(t, _dag(np.asarray(u), self.dagger), j)
        return t

    def evaluate(self, us):
        self._check_blocks(us)
        f = 0.0
        for alpha, t in zip(self.weights, self.tensors):
            w = self._contract(t, us, skip=None)
            f += alpha * float(np.vdot(w, w).real)
        return f

    def partial_unfoldings(self, us, i):
        """Per tensor: weight and the mode-``i`` unfolding of the contraction
        over all other modes."""
        self._check_blocks(us)
        from .tensors import unfold

        out = []
        for alpha, t in zip(self.weights, self.tensors):
            v = self._contract(t, us, skip=i)
            out.append((alpha, unfold(v, i)))
        return out

    def gram(self, us, i):
        """Weighted Gram matrix ``sum_l alpha_l f_l f_l^H`` of the partial
        contractions; Hermitian PSD, independent of fiber ordering."""
        n = self.dims[i]
        acc = np.zeros((n, n), dtype=np.complex128)
        for alpha, f in self.partial_unfoldings(us, i):
            acc += alpha * (f @ f.conj().T)
        return herm(acc)

    def block_gradient(self, us, i):
        """Euclidean gradient ``2 g u`` (dagger ``"H"``) or ``2 conj(g) u``
        (``"T"``) with ``g`` the PSD Gram matrix of the partial contractions."""
        g = self.gram(us, i)
        u = np.asarray(us[i])
        if self.dagger == "H":
            return 2.0 * (g @ u)
        return 2.0 * (g.conj() @ u)

    def block_hessian_apply(self, us, i, z):
        g = self.gram(us, i)
        z = np.asarray(z)
        if self.dagger == "H":
            return 2.0 * (g @ z)
        return 2.0 * (g.conj() @ z)


# ---------------------------------------------------------------------------
# family-generic helpers


def _blocks(spec, point):
    if spec.is_symmetric:
        return [np.asarray(point)]
    return [np.asarray(u) for u in point]


def _check_block_index(spec, i):
    if not 0 <= i < spec.num_blocks:
        raise ValueError(f"block {i} out of range ({spec.num_blocks} blocks)")


def evaluate(spec, point):
    if spec.is_symmetric:
        return spec.evaluate(np.asarray(point))
    return spec.evaluate(list(point))


def block_euclidean_gradient(spec, point, i):
    _check_block_index(spec, i)
    if spec.is_symmetric:
        return spec.gradient(np.asarray(point))
    return spec.block_gradient(list(point), i)


def block_euclidean_hessian_apply(spec, point, i, z):
    _check_block_index(spec, i)
    if spec.is_symmetric:
        return spec.hessian_apply(np.asarray(point), z)
    return spec.block_hessian_apply(list(point), i, z)


def riemannian_block_gradient(spec, point, i):
    u = _blocks(spec, point)[i]
    return tangent_project(u, block_euclidean_gradient(spec, point, i))


def full_gradient_norm(spec, point):
    """Norm of the Riemannian gradient over all blocks."""
    total = 0.0
    for i in range(spec.num_blocks):
        total += float(np.linalg.norm(riemannian_block_gradient(spec, point, i))) ** 2
    return float(np.sqrt(total))


def riemannian_hessian_apply(spec, point, i, z):
    """Riemannian Hessian of the block-``i`` restriction applied to tangent ``z``.

    Projected Euclidean Hessian plus the Weingarten term fed with the normal
    component of the Euclidean gradient.
    """
    u = _blocks(spec, point)[i]
    z = require_tangent(u, z)
    eg = block_euclidean_gradient(spec, point, i)
    eh = block_euclidean_hessian_apply(spec, point, i, z)
    normal = u @ herm(u.conj().T @ eg)
    return tangent_project(u, eh) + weingarten_apply(u, z, normal)


def tangent_basis(u):
    """Orthonormal real basis of the tangent space at ``u``.

    Projects the elementary real and imaginary entry perturbations (row-major,
    real before imaginary) and orthonormalizes them by modified Gram-Schmidt
    with one re-orthogonalization pass, dropping residuals below 1e-8.  The
    result has exactly ``2nr - r^2`` elements.
    """
    u = np.asarray(u)
    n, r = u.shape
    want = 2 * n * r - r * r
    basis = []
    for j in range(n):
        for k in range(r):
            for unit in (1.0, 1.0j):
                e = np.zeros((n, r), dtype=np.complex128)
                e[j, k] = unit
                z = tangent_project(u, e)
                for _ in range(2):
                    for b in basis:
                        z = z - inner_re(b, z) * b
                nz = np.linalg.norm(z)
                if nz > 1e-8:
                    basis.append(z / nz)
    if len(basis) != want:
        raise RuntimeError(f"tangent basis has {len(basis)} elements, expected {want}")
    return basis


def hessian_rank(spec, point, i=0, rank_tol=1e-8, grad_tol=1e-8):
    """Numerical rank of the Riemannian Hessian of block ``i`` at a stationary point.

    The Hessian is assembled as a real symmetric matrix over the basis from
    :func:`tangent_basis`; singular values below ``rank_tol`` times the largest
    do not count.  Points with block Riemannian gradient norm above
    ``grad_tol`` are rejected: away from stationarity the rank is not a
    property of the critical point.
    """
    _check_block_index(spec, i)
    u = _blocks(spec, point)[i]
    gnorm = float(np.linalg.norm(riemannian_block_gradient(spec, point, i)))
    if gnorm > grad_tol:
        raise ValueError(f"block {i} gradient norm {gnorm:.3e} exceeds {grad_tol:.1e}; "
                         "Hessian rank is only defined at stationary points")
    basis = tangent_basis(u)
    m = len(basis)
    images = [riemannian_hessian_apply(spec, point, i, b) for b in basis]
    mat = np.empty((m, m), dtype=np.float64)
    for a in range(m):
        for b in range(m):
            mat[a, b] = inner_re(basis[a], images[b])
    s = np.linalg.svd(mat, compute_uv=False)
    if s.size == 0 or s[0] == 0.0:
        return 0
    return int(np.count_nonzero(s > rank_tol * s[0]))


def seminondegenerate_hessian_rank(spec, i=0):
    """Largest Hessian rank the family symmetries allow for block ``i``.

    Scale invariance (diagonal families) leaves ``r`` null directions per
    block: rank ``2nr - r^2 - r``.  Full unitary invariance (compression)
    leaves ``r^2``: rank ``2r(n - r)``.
    """
    _check_block_index(spec, i)
    n, r = spec.block_shapes[i]
    if isinstance(spec, CompressionObjective):
        return 2 * r * (n - r)
    return 2 * n * r - r * r - r


def homogeneity_residual(spec, point):
    """Worst block deviation from the Euler identity.

    For the tuple families each block restriction satisfies
    ``h = <u, grad h> / 2``; the shared-factor objective satisfies
    ``g = <u, grad g> / (2d)``.  Zero up to roundoff for every input.
    """
    blocks = _blocks(spec, point)
    if spec.is_symmetric:
        f = spec.evaluate(blocks[0])
        scale = 1.0 / (2.0 * spec.order)
        return abs(f - scale * inner_re(blocks[0], spec.gradient(blocks[0])))
    f = spec.evaluate(blocks)
    worst = 0.0
    for i in range(spec.num_blocks):
        g = spec.block_gradient(blocks, i)
        worst = max(worst, abs(f - 0.5 * inner_re(blocks[i], g)))
    return worst


def convexity_certificate(spec, n_samples=1000, seed=0):
    """Sampled convexity check of the block restrictions (ambient extension).

    Draws Gaussian matrix pairs ``(x, y)`` and returns the largest violation of

        <y, grad(x)>  <=  (1 - beta) <x, grad(x)> + beta <y, grad(y)>

    with ``beta = 1/2`` per block for the tuple families and ``beta = 1/(2d)``
    for the shared-factor family.  Nonpositive (up to roundoff) means every
    sampled pair satisfied the gradient inequality; a theorem for the tuple
    families, instance-dependent for the shared-factor one.
    """
    rng = np.random.default_rng(seed)
    worst = -np.inf

    def draw(shape):
        return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)

    if spec.is_symmetric:
        beta = 1.0 / (2.0 * spec.order)
        shape = spec.block_shapes[0]
        for _ in range(n_samples):
            x, y = draw(shape), draw(shape)
            gx, gy = spec.gradient(x), spec.gradient(y)
            lhs = inner_re(y, gx)
            rhs = (1.0 - beta) * inner_re(x, gx) + beta * inner_re(y, gy)
            worst = max(worst, lhs - rhs)
        return worst

    for k in range(n_samples):
        i = k % spec.num_blocks
        blocks = [draw(shape) for shape in spec.block_shapes]
        x, y = blocks[i], draw(spec.block_shapes[i])
        gx = spec.block_gradient(blocks, i)
        others = list(blocks)
        others[i] = y
        gy = spec.block_gradient(others, i)
        lhs = inner_re(y, gx)
        rhs = 0.5 * inner_re(x, gx) + 0.5 * inner_re(y, gy)
        worst = max(worst, lhs - rhs)
    return worst


# ---------------------------------------------------------------------------
# JSON interchange

_FAMILY_NAMES = {
    DiagonalObjective: "diag",
    SymmetricDiagonalObjective: "symdiag",
    CompressionObjective: "compress",
}


def spec_to_json(spec):
    obj = {
        "family": _FAMILY_NAMES[type(spec)],
        "dagger": spec.dagger,
        "weights": [float(w) for w in spec.weights],
    }
    if isinstance(spec, CompressionObjective):
        obj["ranks"] = [int(r) for r in spec.ranks]
    else:
        obj["rank"] = int(spec.rank)
    obj["tensors"] = [tensor_to_json(t) for t in spec.tensors]
    return obj


def spec_from_json(obj):
    try:
        family = obj["family"]
        dagger = obj.get("dagger", "H")
        weights = obj["weights"]
        tensors = [tensor_from_json(t) for t in obj["tensors"]]
    except (KeyError, TypeError) as exc:
        raise ValueError(f"malformed objective spec: {exc}") from exc
    if family == "diag":
        return DiagonalObjective(tensors, weights, obj["rank"], dagger)
    if family == "symdiag":
        return SymmetricDiagonalObjective(tensors, weights, obj["rank"], dagger)
    if family == "compress":
        return CompressionObjective(tensors, weights, obj["ranks"], dagger)
    raise ValueError(f"unknown family {family!r}")


def save_spec(path, spec):
    import json

    with open(path, "w") as f:
        json.dump(spec_to_json(spec), f)
        f.write("\n")


def load_spec(path):
    import json

    with open(path) as f:
        return spec_from_json(json.load(f))
