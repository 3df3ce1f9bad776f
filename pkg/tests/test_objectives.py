"""Objective families: evaluation, gradients, homogeneity, invariances."""
from __future__ import annotations

import itertools

import numpy as np
import pytest

from stiefel_polar.instances import convex_symmetric_instance
from stiefel_polar.objectives import (
    CompressionObjective,
    DiagonalObjective,
    SymmetricDiagonalObjective,
    block_euclidean_gradient,
    convexity_certificate,
    full_gradient_norm,
    homogeneity_residual,
    load_spec,
    riemannian_block_gradient,
    save_spec,
    spec_from_json,
    spec_to_json,
)
from stiefel_polar.stiefel import random_stiefel, tangent_error, truncated_identity
from stiefel_polar.tensors import inner_re, make_diagonal, random_tensor, symmetrize

RNG = np.random.default_rng(90210)


def crandom(shape, rng=RNG):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


# --------------------------------------------------------------------------
# independent reference implementations (plain loops, no package kernels)


def ref_dag(u, dagger):
    return u.conj().T if dagger == "H" else u.T


def ref_contract_all(tensor, blocks, dagger):
    """W = tensor with every mode hit by dag(u_i), via explicit loops."""
    t = tensor
    for axis, u in enumerate(blocks):
        m = ref_dag(u, dagger)
        out_shape = list(t.shape)
        out_shape[axis] = m.shape[0]
        out = np.zeros(out_shape, dtype=np.complex128)
        for idx in itertools.product(*[range(s) for s in out.shape]):
            acc = 0.0 + 0.0j
            for k in range(t.shape[axis]):
                src = list(idx)
                src[axis] = k
                acc += t[tuple(src)] * m[idx[axis], k]
            out[idx] = acc
        t = out
    return t


def ref_diag(t):
    return np.array([t[(k,) * t.ndim] for k in range(min(t.shape))])


def ref_evaluate(spec, point):
    blocks = [point] * spec.order if spec.is_symmetric else list(point)
    total = 0.0
    ranks = getattr(spec, "ranks", None)
    for alpha, tensor in zip(spec.weights, spec.tensors):
        w = ref_contract_all(tensor, blocks, spec.dagger)
        if ranks is None:
            w = ref_diag(w)
        total += alpha * float(np.sum(np.abs(w) ** 2))
    return total


def fd_gradient(spec, point, i, step=1e-6):
    """Central differences of the objective in every real coordinate."""
    blocks = [point.copy()] if spec.is_symmetric else [u.copy() for u in point]
    u = blocks[i]
    grad = np.zeros_like(u)
    for idx in itertools.product(*[range(s) for s in u.shape]):
        for comp in (1.0, 1.0j):
            u[idx] += comp * step
            f_plus = spec.evaluate(blocks[0] if spec.is_symmetric else blocks)
            u[idx] -= 2 * comp * step
            f_minus = spec.evaluate(blocks[0] if spec.is_symmetric else blocks)
            u[idx] += comp * step
            deriv = (f_plus - f_minus) / (2 * step)
            grad[idx] += comp * deriv
    return grad


# --------------------------------------------------------------------------
# evaluation


def test_diagonal_objective_pinned_value():
    t = make_diagonal((2, 2, 2), [1.0, 2.0])
    spec = DiagonalObjective((t,), (1.0,), 2, "H")
    point = [truncated_identity(2, 2) for _ in range(3)]
    assert spec.evaluate(point) == pytest.approx(5.0, abs=1e-13)


def test_compression_full_rank_recovers_norm():
    t = random_tensor((3, 3, 3), 3)
    spec = CompressionObjective((t,), (1.0,), (3, 3, 3), "H")
    point = [random_stiefel(3, 3, 10 + i) for i in range(3)]
    expected = float(np.vdot(t, t).real)
    assert spec.evaluate(point) == pytest.approx(expected, rel=1e-12)


@pytest.mark.parametrize("dagger", ["H", "T"])
def test_evaluate_matches_loop_oracle(dagger):
    rng = np.random.default_rng(5)
    t1, t2 = crandom((3, 2, 3), rng), crandom((3, 2, 3), rng)
    spec = DiagonalObjective((t1, t2), (1.0, 0.5), 2, dagger)
    point = [random_stiefel(n, 2, 20 + i) for i, n in enumerate((3, 2, 3))]
    assert spec.evaluate(point) == pytest.approx(ref_evaluate(spec, point), rel=1e-12)

    cspec = CompressionObjective((t1,), (1.25,), (2, 2, 2), dagger)
    assert cspec.evaluate(point) == pytest.approx(ref_evaluate(cspec, point), rel=1e-12)

    s = symmetrize(crandom((3, 3, 3), rng))
    sspec = SymmetricDiagonalObjective((s,), (2.0,), 2, dagger)
    u = random_stiefel(3, 2, 30)
    assert sspec.evaluate(u) == pytest.approx(ref_evaluate(sspec, u), rel=1e-12)


def test_evaluate_shape_mismatch_names_block():
    t = crandom((3, 3, 3))
    spec = DiagonalObjective((t,), (1.0,), 2, "H")
    bad = [random_stiefel(3, 2, 1), random_stiefel(4, 2, 2), random_stiefel(3, 2, 3)]
    with pytest.raises(ValueError) as err:
        spec.evaluate(bad)
    assert "1" in str(err.value)


# --------------------------------------------------------------------------
# constructor validation


def test_constructor_validation():
    t = crandom((3, 3, 3))
    with pytest.raises(ValueError):
        DiagonalObjective((t,), (0.0,), 2, "H")  # weights must be positive
    with pytest.raises(ValueError):
        DiagonalObjective((t,), (1.0,), 4, "H")  # rank exceeds min dim
    with pytest.raises(ValueError):
        DiagonalObjective((t,), (1.0,), 2, "X")  # unknown dagger
    with pytest.raises(ValueError):
        DiagonalObjective((t, crandom((2, 2, 2))), (1.0, 1.0), 2, "H")  # dims differ
    with pytest.raises(ValueError):
        SymmetricDiagonalObjective((t,), (1.0,), 2, "H")  # not symmetric
    with pytest.raises(ValueError):
        CompressionObjective((t,), (1.0,), (2, 2), "H")  # ranks arity


# --------------------------------------------------------------------------
# gradients


@pytest.mark.parametrize("dagger", ["H", "T"])
def test_diagonal_gradient_at_identity_point(dagger):
    entries = np.array([1.5 + 0.5j, -0.25 + 1.0j, 0.75])
    t = make_diagonal((3, 3, 3), entries)
    spec = DiagonalObjective((t,), (1.0,), 2, dagger)
    point = [truncated_identity(3, 2) for _ in range(3)]
    expected = 2.0 * truncated_identity(3, 2) @ np.diag(np.abs(entries[:2]) ** 2)
    for i in range(3):
        g = block_euclidean_gradient(spec, point, i)
        assert np.allclose(g, expected, rtol=1e-12, atol=1e-12)


@pytest.mark.parametrize("dagger", ["H", "T"])
def test_symmetric_gradient_at_identity_point(dagger):
    entries = np.array([1.2, -0.7 + 0.3j])
    d = 3
    t = make_diagonal((2,) * d, entries)
    spec = SymmetricDiagonalObjective((t,), (1.0,), 2, dagger)
    g = spec.gradient(truncated_identity(2, 2))
    expected = 2.0 * d * np.diag(np.abs(entries) ** 2).astype(np.complex128)
    assert np.allclose(g, expected, rtol=1e-12, atol=1e-12)


@pytest.mark.parametrize("dagger", ["H", "T"])
def test_gradients_match_finite_differences(dagger):
    rng = np.random.default_rng(17)
    t1, t2 = crandom((3, 3, 3), rng), crandom((3, 3, 3), rng)
    point = [random_stiefel(3, 2, 40 + i) for i in range(3)]

    spec = DiagonalObjective((t1, t2), (1.0, 0.75), 2, dagger)
    for i in range(3):
        g = block_euclidean_gradient(spec, point, i)
        f = fd_gradient(spec, point, i)
        assert np.linalg.norm(g - f) <= 1e-6 * max(1.0, np.linalg.norm(g))

    cspec = CompressionObjective((t1,), (1.0,), (2, 2, 2), dagger)
    for i in range(3):
        g = block_euclidean_gradient(cspec, point, i)
        f = fd_gradient(cspec, point, i)
        assert np.linalg.norm(g - f) <= 1e-6 * max(1.0, np.linalg.norm(g))

    s = symmetrize(crandom((3, 3, 3), rng))
    sspec = SymmetricDiagonalObjective((s,), (1.0,), 2, dagger)
    u = random_stiefel(3, 2, 50)
    g = sspec.gradient(u)
    f = fd_gradient(sspec, u, 0)
    assert np.linalg.norm(g - f) <= 1e-6 * max(1.0, np.linalg.norm(g))


def test_symmetric_gradient_is_order_times_block_gradient():
    s = symmetrize(crandom((3, 3, 3)))
    sspec = SymmetricDiagonalObjective((s,), (1.0,), 2, "H")
    tuple_spec = DiagonalObjective((s,), (1.0,), 2, "H")
    u = random_stiefel(3, 2, 60)
    point = [u, u, u]
    g_sym = sspec.gradient(u)
    g_block = block_euclidean_gradient(tuple_spec, point, 2)
    assert np.allclose(g_sym, 3.0 * g_block, rtol=0, atol=1e-12)


def test_riemannian_block_gradient_is_tangent():
    t = crandom((3, 3, 3))
    spec = DiagonalObjective((t,), (1.0,), 2, "H")
    point = [random_stiefel(3, 2, 70 + i) for i in range(3)]
    for i in range(3):
        z = riemannian_block_gradient(spec, point, i)
        assert tangent_error(point[i], z) <= 1e-10
    assert full_gradient_norm(spec, point) > 0.0


# --------------------------------------------------------------------------
# homogeneity


def test_homogeneity_identity_per_block():
    rng = np.random.default_rng(31)
    t1, t2 = crandom((3, 3, 3), rng), crandom((3, 3, 3), rng)
    point = [random_stiefel(3, 2, 80 + i) for i in range(3)]
    for spec in (
        DiagonalObjective((t1, t2), (1.0, 2.0), 2, "H"),
        CompressionObjective((t1,), (1.0,), (2, 2, 2), "T"),
    ):
        f = spec.evaluate(point)
        for i in range(3):
            g = block_euclidean_gradient(spec, point, i)
            assert inner_re(point[i], g) == pytest.approx(2.0 * f, rel=1e-12)
        assert homogeneity_residual(spec, point) <= 1e-10 * (1.0 + abs(f))

    s = symmetrize(crandom((3, 3, 3), rng))
    sspec = SymmetricDiagonalObjective((s,), (1.0,), 2, "H")
    u = random_stiefel(3, 2, 90)
    f = sspec.evaluate(u)
    assert inner_re(u, sspec.gradient(u)) == pytest.approx(2.0 * sspec.order * f, rel=1e-12)
    assert homogeneity_residual(sspec, u) <= 1e-10 * (1.0 + abs(f))


def test_homogeneity_residual_zero_tensors():
    z = np.zeros((2, 2, 2), dtype=np.complex128)
    spec = DiagonalObjective((z,), (1.0,), 2, "H")
    point = [truncated_identity(2, 2) for _ in range(3)]
    assert homogeneity_residual(spec, point) == 0.0


# --------------------------------------------------------------------------
# invariances


def test_scale_invariance_of_diagonal_families():
    rng = np.random.default_rng(8)
    t = crandom((3, 3, 3), rng)
    spec = DiagonalObjective((t,), (1.0,), 2, "H")
    point = [random_stiefel(3, 2, 100 + i) for i in range(3)]
    base = spec.evaluate(point)
    phases = np.diag(np.exp(1j * rng.standard_normal(2)))
    scaled = [u @ phases for u in point]
    assert spec.evaluate(scaled) == pytest.approx(base, rel=1e-12)

    s = symmetrize(crandom((3, 3, 3), rng))
    sspec = SymmetricDiagonalObjective((s,), (1.0,), 2, "H")
    u = random_stiefel(3, 2, 110)
    assert sspec.evaluate(u @ phases) == pytest.approx(sspec.evaluate(u), rel=1e-12)


def test_unitary_invariance_of_compression():
    rng = np.random.default_rng(9)
    t = crandom((3, 3, 3), rng)
    spec = CompressionObjective((t,), (1.0,), (2, 2, 2), "H")
    point = [random_stiefel(3, 2, 120 + i) for i in range(3)]
    base = spec.evaluate(point)
    q = random_stiefel(2, 2, 17)
    rotated = [u @ q for u in point]
    assert spec.evaluate(rotated) == pytest.approx(base, rel=1e-12)


# --------------------------------------------------------------------------
# convexity certificates


def test_tuple_families_pass_convexity_certificate():
    rng = np.random.default_rng(13)
    t1, t2 = crandom((3, 3, 3), rng), crandom((3, 3, 3), rng)
    spec = DiagonalObjective((t1, t2), (1.0, 0.5), 2, "H")
    assert convexity_certificate(spec, n_samples=1000, seed=3) <= 1e-10
    cspec = CompressionObjective((t1,), (1.0,), (2, 2, 2), "T")
    assert convexity_certificate(cspec, n_samples=1000, seed=4) <= 1e-10


def test_convex_symmetric_family_passes_certificate():
    spec, _ = convex_symmetric_instance(4, 3, 2, seed=21)
    assert convexity_certificate(spec, n_samples=1000, seed=5) <= 1e-10


# --------------------------------------------------------------------------
# JSON round trip


def test_spec_json_round_trip(tmp_path):
    rng = np.random.default_rng(14)
    t = crandom((3, 3, 3), rng)
    s = symmetrize(crandom((3, 3, 3), rng))
    specs = [
        DiagonalObjective((t,), (1.0,), 2, "H"),
        SymmetricDiagonalObjective((s,), (1.5,), 2, "T"),
        CompressionObjective((t,), (1.0,), (2, 1, 2), "H"),
    ]
    for k, spec in enumerate(specs):
        obj = spec_to_json(spec)
        back = spec_from_json(obj)
        assert type(back) is type(spec)
        assert back.dagger == spec.dagger
        assert back.weights == spec.weights
        assert all(np.array_equal(a, b) for a, b in zip(back.tensors, spec.tensors))
        path = tmp_path / f"spec{k}.json"
        save_spec(path, spec)
        loaded = load_spec(path)
        assert all(np.array_equal(a, b) for a, b in zip(loaded.tensors, spec.tensors))


def test_spec_json_rejects_unknown_family():
    t = crandom((2, 2))
    obj = spec_to_json(DiagonalObjective((crandom((2, 2, 2)),), (1.0,), 2, "H"))
    obj["family"] = "nope"
    with pytest.raises(ValueError):
        spec_from_json(obj)
