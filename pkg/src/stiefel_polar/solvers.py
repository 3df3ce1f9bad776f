"""Block orthogonal-iteration solvers on products of complex Stiefel manifolds.

All solvers sweep cyclically over the blocks and replace each block by the
orthogonal polar factor of the (optionally shifted) block gradient, or by a
specialized equivalent:

* ``apdoi_run``  tuple objectives, polar update of ``grad + gamma * u``
* ``pdoi_run``   shared-factor objectives, same update on the single block
* ``hooi_run``   compression only, dominant-subspace update
* power updates (``hopm`` / ``s-hopm``) for rank-one diagonal objectives,
  the literal normalized-fiber iteration, which matches the polar update
  up to a column phase.

Each block update appends one :class:`~stiefel_polar.diagnostics.TraceRecord`.
Monotone ascent of the objective holds for the tuple families by block
multiconvexity, and for the shared-factor family whenever the instance is
convex (see :func:`stiefel_polar.objectives.convexity_certificate`).
"""
from __future__ import annotations

import math
import time
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from .diagnostics import TraceRecord
from .objectives import (
    CompressionObjective,
    DiagonalObjective,
    SymmetricDiagonalObjective,
    full_gradient_norm,
)
from .stiefel import orthonormality_error, require_stiefel, tangent_project

__all__ = [
    "NumericFailure",
    "CONVERGED_STEP",
    "CONVERGED_GRAD",
    "MAX_SWEEPS",
    "ALGORITHMS",
    "SolverConfig",
    "SolveResult",
    "ShiftEstimate",
    "estimate_shift",
    "apdoi_run",
    "pdoi_run",
    "hooi_run",
    "solve",
    "lroat",
    "hopm",
    "s_lroat",
    "s_hopm",
    "lmpd",
    "lmpd_s",
]


class NumericFailure(RuntimeError):
    """Raised when a solver hits a non-finite objective or a failed factorization."""


CONVERGED_STEP = "converged_step"
CONVERGED_GRAD = "converged_grad"
MAX_SWEEPS = "max_sweeps"

ALGORITHMS = (
    "apdoi",
    "apdoi-s",
    "pdoi",
    "pdoi-s",
    "hooi",
    "hopm",
    "s-hopm",
    "lroat",
    "s-lroat",
    "lmpd",
    "lmpd-s",
)

# gamma = 0 on a shifted algorithm means "pick the default":
# lmpd-s uses 0.01, apdoi-s / pdoi-s estimate 1.1 * sampled bound.
_DEFAULT_LMPD_S_GAMMA = 0.01
_AUTO_SHIFT_FACTOR = 1.1


@dataclass(frozen=True)
class SolverConfig:
    algorithm: str = "apdoi"
    gamma: float = 0.0
    max_sweeps: int = 1000
    tol_step: float = 1e-10
    tol_grad: float = 1e-8
    seed: int = 0

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {self.algorithm!r}")
        if not math.isfinite(self.gamma) or self.gamma < 0.0:
            raise ValueError(f"shift gamma must be finite and >= 0, got {self.gamma}")
        if self.max_sweeps < 1:
            raise ValueError("max_sweeps must be >= 1")
        if self.tol_step <= 0.0 or self.tol_grad <= 0.0:
            raise ValueError("tolerances must be positive")


@dataclass
class SolveResult:
    point: object  # list of blocks, or a single matrix for shared-factor runs
    status: str
    sweeps: int
    final_objective: float
    trace: list = field(repr=False)
    gamma: float = 0.0
    imag_peak: float = 0.0
    reorthonormalizations: int = 0


@dataclass(frozen=True)
class ShiftEstimate:
    """Sampled upper bound for the gradient norm over the manifold.

    ``value`` is twice the largest full Euclidean gradient norm seen over
    ``n_samples`` seeded random points; a heuristic stand-in for the true
    supremum, not a certificate.
    """

    value: float
    n_samples: int
    seed: int
    method: str = "sampled-max"


def _child_seed(seed, *key):
    return int(np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(key)).generate_state(1)[0])


def _random_point(spec, seed):
    from .stiefel import random_stiefel

    shapes = spec.block_shapes
    blocks = [random_stiefel(n, r, _child_seed(seed, i)) for i, (n, r) in enumerate(shapes)]
    return blocks[0] if spec.is_symmetric else blocks


def estimate_shift(spec, n_samples=32, seed=0):
    """Estimate a shift that dominates the gradient norm on the manifold."""
    if n_samples < 1:
        raise ValueError("need at least one sample")
    best = 0.0
    for k in range(n_samples):
        point = _random_point(spec, _child_seed(seed, 97, k))
        if spec.is_symmetric:
            norm = float(np.linalg.norm(spec.gradient(point)))
        else:
            sq = 0.0
            for i in range(spec.num_blocks):
                sq += float(np.linalg.norm(spec.block_gradient(point, i))) ** 2
            norm = math.sqrt(sq)
        best = max(best, norm)
    return ShiftEstimate(value=2.0 * best, n_samples=n_samples, seed=seed)


def _polar_with_sigma(m):
    """Orthogonal polar factor of ``m`` and the smallest singular value of ``m``."""
    try:
        w, s, vh = np.linalg.svd(m, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise NumericFailure(f"polar factorization failed: {exc}") from exc
    return w @ vh, float(s[-1])


def _finite_or_raise(f, sweep, block):
    if not math.isfinite(f):
        raise NumericFailure(f"objective became {f} at sweep {sweep}, block {block}")
    return f


def _maybe_reorthonormalize(u):
    # drift guard; SVD-based updates sit at roundoff level, so this is a no-op
    # in practice but keeps long runs honest
    if orthonormality_error(u) > 1e-10:
        from .stiefel import polar_decompose

        return polar_decompose(u)[0], 1
    return u, 0


def _power_fiber(spec, blocks, i):
    if spec.is_symmetric:
        (alpha, fib, w), = spec.fiber_data(blocks)
    else:
        (alpha, fib, w), = spec.block_fiber_data(blocks, i)
    return fib[:, :1]


def _tuple_run(spec, init, config, update):
    if spec.is_symmetric:
        raise ValueError("tuple solver called on a shared-factor objective")
    if update == "subspace" and not isinstance(spec, CompressionObjective):
        raise ValueError("the subspace update applies to compression objectives only")
    blocks = [require_stiefel(u, label=f"init block {i}") for i, u in enumerate(init)]
    spec._check_blocks(blocks)
    gamma = float(config.gamma)
    if update in ("subspace", "power") and gamma != 0.0:
        raise ValueError(f"{update} update does not take a shift")
    if spec.evaluate(blocks) == 0.0:
        warnings.warn("objective is exactly zero at the initial point", RuntimeWarning)

    trace = []
    imag_peak = max(float(np.abs(b.imag).max()) for b in blocks)
    reorth = 0
    status = MAX_SWEEPS
    sweeps = 0
    d = spec.num_blocks
    f = math.nan
    for sweep in range(1, config.max_sweeps + 1):
        sweeps = sweep
        step_sq = 0.0
        for i in range(d):
            t0 = time.perf_counter_ns()
            u_old = blocks[i]
            if update == "subspace":
                g_mat = spec.gram(blocks, i)
                if spec.dagger == "T":
                    g_mat = g_mat.conj()
                grad = 2.0 * (g_mat @ u_old)
                try:
                    sigma = float(np.linalg.svd(grad, compute_uv=False)[-1])
                    evals, evecs = np.linalg.eigh(g_mat)
                except np.linalg.LinAlgError as exc:
                    raise NumericFailure(f"subspace factorization failed: {exc}") from exc
                r = spec.ranks[i]
                u_new = np.ascontiguousarray(evecs[:, ::-1][:, :r])
            else:
                grad = spec.block_gradient(blocks, i)
                if update == "power":
                    v = _power_fiber(spec, blocks, i)
                    nv = float(np.linalg.norm(v))
                    if nv == 0.0:
                        raise NumericFailure(f"zero fiber at sweep {sweep}, block {i}")
                    sigma = float(np.linalg.norm(grad))
                    u_new = v / nv
                else:
                    u_new, sigma = _polar_with_sigma(grad + gamma * u_old)
            rg_norm = float(np.linalg.norm(tangent_project(u_old, grad)))
            u_new, bumped = _maybe_reorthonormalize(u_new)
            reorth += bumped
            step = float(np.linalg.norm(u_new - u_old))
            blocks[i] = u_new
            imag_peak = max(imag_peak, float(np.abs(u_new.imag).max()))
            f = _finite_or_raise(spec.evaluate(blocks), sweep, i)
            trace.append(
                TraceRecord(
                    sweep=sweep,
                    block=i,
                    objective=f,
                    step_norm=step,
                    grad_norm=rg_norm,
                    sigma_min=sigma,
                    wall_ns=time.perf_counter_ns() - t0,
                )
            )
            step_sq += step * step
        if math.sqrt(step_sq) < config.tol_step:
            status = CONVERGED_STEP
            break
        if full_gradient_norm(spec, blocks) < config.tol_grad:
            status = CONVERGED_GRAD
            break
    return SolveResult(
        point=blocks,
        status=status,
        sweeps=sweeps,
        final_objective=f,
        trace=trace,
        gamma=gamma,
        imag_peak=imag_peak,
        reorthonormalizations=reorth,
    )


def _symmetric_run(spec, init, config, update):
    if not spec.is_symmetric:
        raise ValueError("shared-factor solver called on a tuple objective")
    u = require_stiefel(init, label="init")
    spec._check_point(u)
    gamma = float(config.gamma)
    if update == "power" and gamma != 0.0:
        raise ValueError("power update does not take a shift")
    if spec.evaluate(u) == 0.0:
        warnings.warn("objective is exactly zero at the initial point", RuntimeWarning)

    trace = []
    imag_peak = float(np.abs(u.imag).max())
    reorth = 0
    status = MAX_SWEEPS
    sweeps = 0
    f = math.nan
    for sweep in range(1, config.max_sweeps + 1):
        sweeps = sweep
        t0 = time.perf_counter_ns()
        grad = spec.gradient(u)
        if update == "power":
            v = _power_fiber(spec, u, 0)
            nv = float(np.linalg.norm(v))
            if nv == 0.0:
                raise NumericFailure(f"zero fiber at sweep {sweep}")
            sigma = float(np.linalg.norm(grad))
            u_new = v / nv
        else:
            u_new, sigma = _polar_with_sigma(grad + gamma * u)
        rg_norm = float(np.linalg.norm(tangent_project(u, grad)))
        u_new, bumped = _maybe_reorthonormalize(u_new)
        reorth += bumped
        step = float(np.linalg.norm(u_new - u))
        u = u_new
        imag_peak = max(imag_peak, float(np.abs(u.imag).max()))
        f = _finite_or_raise(spec.evaluate(u), sweep, 0)
        trace.append(
            TraceRecord(
                sweep=sweep,
                block=0,
                objective=f,
                step_norm=step,
                grad_norm=rg_norm,
                sigma_min=sigma,
                wall_ns=time.perf_counter_ns() - t0,
            )
        )
        if step < config.tol_step:
            status = CONVERGED_STEP
            break
        if float(np.linalg.norm(tangent_project(u, spec.gradient(u)))) < config.tol_grad:
            status = CONVERGED_GRAD
            break
    return SolveResult(
        point=u,
        status=status,
        sweeps=sweeps,
        final_objective=f,
        trace=trace,
        gamma=gamma,
        imag_peak=imag_peak,
        reorthonormalizations=reorth,
    )


def apdoi_run(spec, init, config):
    """Cyclic polar-update sweeps over a tuple objective (shifted when
    ``config.gamma > 0``)."""
    return _tuple_run(spec, init, config, "polar")


def pdoi_run(spec, init, config):
    """Polar-update iteration for the shared-factor objective (shifted when
    ``config.gamma > 0``)."""
    return _symmetric_run(spec, init, config, "polar")


def hooi_run(spec, init, config):
    """Cyclic dominant-subspace sweeps for a compression objective.

    Each block becomes the top eigenvectors of the Gram matrix of the partial
    contraction, i.e. the dominant left singular subspace of its unfolding.
    """
    if config.gamma != 0.0:
        raise ValueError("hooi does not take a shift")
    return _tuple_run(spec, init, config, "subspace")


def _require_power_spec(spec, symmetric):
    cls = SymmetricDiagonalObjective if symmetric else DiagonalObjective
    if not isinstance(spec, cls) or spec.rank != 1 or len(spec.tensors) != 1:
        raise ValueError("power updates need a single-tensor rank-one diagonal objective")


def _with_default_shift(spec, config):
    if config.gamma > 0.0:
        return config
    if config.algorithm == "lmpd-s":
        return replace(config, gamma=_DEFAULT_LMPD_S_GAMMA)
    est = estimate_shift(spec, seed=config.seed)
    if est.value == 0.0:
        raise ValueError("cannot auto-shift a zero objective; supply gamma")
    return replace(config, gamma=_AUTO_SHIFT_FACTOR * est.value)


def solve(spec, init, config):
    """Run the algorithm named in ``config`` on ``spec`` from ``init``."""
    algo = config.algorithm
    if algo in ("apdoi", "lroat", "lmpd"):
        return apdoi_run(spec, init, config)
    if algo in ("apdoi-s", "lmpd-s"):
        return apdoi_run(spec, init, _with_default_shift(spec, config))
    if algo in ("pdoi", "s-lroat"):
        return pdoi_run(spec, init, config)
    if algo == "pdoi-s":
        return pdoi_run(spec, init, _with_default_shift(spec, config))
    if algo == "hooi":
        return hooi_run(spec, init, config)
    if algo == "hopm":
        _require_power_spec(spec, symmetric=False)
        return _tuple_run(spec, init, config, "power")
    if algo == "s-hopm":
        _require_power_spec(spec, symmetric=True)
        return _symmetric_run(spec, init, config, "power")
    raise ValueError(f"unknown algorithm {algo!r}")


# ---------------------------------------------------------------------------
# specializations: (objective, config) pairs ready for solve()


def _config(algorithm, overrides):
    return SolverConfig(algorithm=algorithm, **overrides)


def lroat(a, r, dagger="H", **overrides):
    """Best diagonal concentration of a single tensor: unshifted polar sweeps."""
    spec = DiagonalObjective((a,), (1.0,), r, dagger)
    return spec, _config("lroat", overrides)


def hopm(a, dagger="H", **overrides):
    """Best rank-one approximation by the classical power iteration."""
    spec = DiagonalObjective((a,), (1.0,), 1, dagger)
    return spec, _config("hopm", overrides)


def s_lroat(s, r, dagger="H", **overrides):
    """Shared-factor diagonal concentration of a symmetric tensor."""
    spec = SymmetricDiagonalObjective((s,), (1.0,), r, dagger)
    return spec, _config("s-lroat", overrides)


def s_hopm(s, dagger="H", **overrides):
    """Symmetric best rank-one approximation by the power iteration."""
    spec = SymmetricDiagonalObjective((s,), (1.0,), 1, dagger)
    return spec, _config("s-hopm", overrides)


def lmpd(a, ranks, dagger="H", **overrides):
    """Low multilinear-rank approximation by unshifted polar sweeps."""
    spec = CompressionObjective((a,), (1.0,), tuple(ranks), dagger)
    return spec, _config("lmpd", overrides)


def lmpd_s(a, ranks, gamma=_DEFAULT_LMPD_S_GAMMA, dagger="H", **overrides):
    """Shifted variant of :func:`lmpd`; any ``gamma > 0`` keeps the shifted
    gradient full rank because the compression Gram matrix is PSD."""
    if gamma <= 0.0:
        raise ValueError("lmpd-s needs gamma > 0")
    spec = CompressionObjective((a,), (1.0,), tuple(ranks), dagger)
    return spec, _config("lmpd-s", {"gamma": gamma, **overrides})
