"""Dense complex tensor primitives.

Tensors are plain numpy arrays of ``complex128`` in C (row-major) layout,
last index fastest.  Real-valued data rides along as complex arrays with
zero imaginary part; there is no separate real kernel.  Axes are 0-based
throughout.
"""
from __future__ import annotations

import itertools
import json
import math

import numpy as np

__all__ = [
    "as_tensor",
    "mode_product",
    "unfold",
    "refold",
    "diag_of",
    "make_diagonal",
    "symmetrize",
    "is_symmetric",
    "random_tensor",
    "inner_re",
    "tensor_to_json",
    "tensor_from_json",
    "save_tensor",
    "load_tensor",
]


def as_tensor(data, dims=None):
    """Coerce ``data`` to a C-ordered complex128 array, reshaped to ``dims``."""
    t = np.ascontiguousarray(data, dtype=np.complex128)
    if dims is not None:
        t = t.reshape(tuple(int(n) for n in dims))
    return t


def mode_product(t, m, axis):
    """Contract mode ``axis`` of ``t`` with the columns of the matrix ``m``.

    Entry ``(p_1, .., q, .., p_d)`` of the result is
    ``sum_j t[p_1, .., j, .., p_d] * m[q, j]``; dimension ``axis`` changes
    from ``m.shape[1]`` to ``m.shape[0]`` and all axes keep their positions.
    """
    t = np.asarray(t)
    m = np.asarray(m)
    if m.ndim != 2:
        raise ValueError(f"mode_product needs a matrix, got ndim={m.ndim}")
    if not 0 <= axis < t.ndim:
        raise ValueError(f"axis {axis} out of range for an order-{t.ndim} tensor")
    if m.shape[1] != t.shape[axis]:
        raise ValueError(
            f"mode {axis} mismatch: matrix is {m.shape[0]}x{m.shape[1]}, "
            f"tensor dimension is {t.shape[axis]}"
        )
    out = np.tensordot(m, t, axes=(1, axis))
    return np.moveaxis(out, 0, axis)


def unfold(t, axis):
    """Matrix with the mode-``axis`` fibers of ``t`` as columns.

    Columns are ordered by the remaining indices enumerated with the first
    remaining axis fastest (remaining axes kept in increasing axis order),
    i.e. Fortran order over the non-``axis`` indices.
    """
    t = np.asarray(t)
    if not 0 <= axis < t.ndim:
        raise ValueError(f"axis {axis} out of range for an order-{t.ndim} tensor")
    return np.moveaxis(t, axis, 0).reshape((t.shape[axis], -1), order="F")


def refold(mat, axis, dims):
    """Inverse of :func:`unfold`: rebuild the order-``len(dims)`` tensor."""
    mat = np.asarray(mat)
    dims = tuple(int(n) for n in dims)
    if not 0 <= axis < len(dims):
        raise ValueError(f"axis {axis} out of range for dims {dims}")
    rest = dims[:axis] + dims[axis + 1 :]
    if mat.shape != (dims[axis], int(np.prod(rest, dtype=np.int64))):
        raise ValueError(f"matrix shape {mat.shape} does not match dims {dims} at axis {axis}")
    t = mat.reshape((dims[axis],) + rest, order="F")
    return np.ascontiguousarray(np.moveaxis(t, 0, axis))


def diag_of(t):
    """Vector of diagonal entries ``t[k, k, .., k]`` for ``k < min(t.shape)``."""
    t = np.asarray(t)
    idx = np.arange(min(t.shape))
    return t[(idx,) * t.ndim]


def make_diagonal(dims, entries):
    """Tensor of shape ``dims`` with ``entries`` on the diagonal, zero elsewhere."""
    dims = tuple(int(n) for n in dims)
    entries = np.asarray(entries, dtype=np.complex128)
    if entries.ndim != 1 or entries.shape[0] > min(dims):
        raise ValueError(f"need at most min(dims)={min(dims)} entries, got shape {entries.shape}")
    t = np.zeros(dims, dtype=np.complex128)
    idx = np.arange(entries.shape[0])
    t[(idx,) * len(dims)] = entries
    return t


def symmetrize(t):
    """Average of ``t`` over all permutations of its (equal-sized) axes.

    The result is exactly invariant under index permutation: every orbit of
    index tuples is filled from one representative, so the invariance scan
    holds bit for bit and not just to summation roundoff.
    """
    t = as_tensor(t)
    d = t.ndim
    if len(set(t.shape)) > 1:
        raise ValueError(f"symmetrize needs equal dimensions, got {t.shape}")
    acc = np.zeros_like(t)
    for perm in itertools.permutations(range(d)):
        acc += t.transpose(perm)
    acc /= math.factorial(d)
    idx = np.indices(t.shape).reshape(d, -1)
    return acc[tuple(np.sort(idx, axis=0))].reshape(t.shape)


def is_symmetric(t, tol=1e-10):
    """Whether ``t`` is invariant under every axis permutation, to ``tol`` (relative)."""
    t = np.asarray(t)
    if len(set(t.shape)) > 1:
        return False
    bound = tol * max(1.0, float(np.abs(t).max(initial=0.0)))
    for perm in itertools.permutations(range(t.ndim)):
        if float(np.abs(t - t.transpose(perm)).max(initial=0.0)) > bound:
            return False
    return True


def random_tensor(dims, seed):
    """Seeded tensor with i.i.d. standard complex-normal entries.

    Uses ``numpy.random.default_rng(seed)`` (PCG64); the real block is drawn
    first and the imaginary block second, each standard normal, so one seed
    reproduces the tensor bit for bit within one build.
    """
    rng = np.random.default_rng(seed)
    dims = tuple(int(n) for n in dims)
    return rng.standard_normal(dims) + 1j * rng.standard_normal(dims)


def inner_re(x, y):
    """Real inner product ``Re trace(x^H y)`` of two same-shape arrays."""
    x = np.asarray(x)
    y = np.asarray(y)
    if x.shape != y.shape:
        raise ValueError(f"shape mismatch: {x.shape} vs {y.shape}")
    return float(np.vdot(x, y).real)


def tensor_to_json(t):
    """JSON-ready dict ``{"dims", "layout", "data"}`` with ``[re, im]`` pairs."""
    t = as_tensor(t)
    flat = t.reshape(-1)
    return {
        "dims": [int(n) for n in t.shape],
        "layout": "row-major",
        "data": [[float(z.real), float(z.imag)] for z in flat],
    }


def tensor_from_json(obj):
    """Parse the dict form produced by :func:`tensor_to_json`."""
    try:
        dims = tuple(int(n) for n in obj["dims"])
        layout = obj["layout"]
        data = obj["data"]
    except (KeyError, TypeError) as exc:
        raise ValueError(f"malformed tensor object: {exc}") from exc
    if layout != "row-major":
        raise ValueError(f"unsupported layout {layout!r}")
    size = int(np.prod(dims, dtype=np.int64)) if dims else 1
    if len(data) != size:
        raise ValueError(f"data length {len(data)} does not match dims {list(dims)}")
    flat = np.array([complex(re, im) for re, im in data], dtype=np.complex128)
    return flat.reshape(dims)


def save_tensor(path, t):
    with open(path, "w") as f:
        json.dump(tensor_to_json(t), f)
        f.write("\n")


def load_tensor(path):
    with open(path) as f:
        return tensor_from_json(json.load(f))
