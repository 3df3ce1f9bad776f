"""Convergence diagnostics: solver traces, ascent checks, rate fits, and
finite-difference gradient verification."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from . import objectives

__all__ = [
    "TraceRecord",
    "TRACE_COLUMNS",
    "fmt_float",
    "write_trace_csv",
    "read_trace_csv",
    "assert_monotone",
    "sweep_summary",
    "sufficient_increase_report",
    "RateFit",
    "fit_rate",
    "fd_gradient_check",
    "seminondegeneracy_report",
]

TRACE_COLUMNS = ("sweep", "block", "objective", "step_norm", "grad_norm", "sigma_min", "wall_ns")


@dataclass(frozen=True)
class TraceRecord:
    """One block update: objective after the update, step and pre-update
    Riemannian gradient norms, smallest singular value of the (shifted)
    gradient matrix, and wall time of the update in nanoseconds."""

    sweep: int
    block: int
    objective: float
    step_norm: float
    grad_norm: float
    sigma_min: float
    wall_ns: int


def fmt_float(x):
    # 17 significant digits round-trip any double exactly
    return format(float(x), ".17g")


def write_trace_csv(path, records):
    with open(path, "w", newline="") as f:
        f.write(",".join(TRACE_COLUMNS) + "\n")
        for r in records:
            f.write(
                f"{r.sweep},{r.block},{fmt_float(r.objective)},{fmt_float(r.step_norm)},"
                f"{fmt_float(r.grad_norm)},{fmt_float(r.sigma_min)},{r.wall_ns}\n"
            )


def read_trace_csv(path):
    records = []
    with open(path, newline="") as f:
        reader = csv.DictReader(f)
        if reader.fieldnames is None or tuple(reader.fieldnames) != TRACE_COLUMNS:
            raise ValueError(f"unexpected trace columns {reader.fieldnames}")
        for row in reader:
            records.append(
                TraceRecord(
                    sweep=int(row["sweep"]),
                    block=int(row["block"]),
                    objective=float(row["objective"]),
                    step_norm=float(row["step_norm"]),
                    grad_norm=float(row["grad_norm"]),
                    sigma_min=float(row["sigma_min"]),
                    wall_ns=int(row["wall_ns"]),
                )
            )
    return records


def assert_monotone(records, tol=1e-12):
    """Check the objective never drops between consecutive block updates.

    Returns ``(ok, first_bad_index)`` where the tolerance for the pair
    ``(f_prev, f_next)`` is ``tol * (1 + |f_prev|)``.
    """
    for k in range(1, len(records)):
        f_prev = records[k - 1].objective
        f_next = records[k].objective
        if f_next < f_prev - tol * (1.0 + abs(f_prev)):
            return False, k
    return True, None


def sweep_summary(records):
    """Per-sweep aggregates, in sweep order.

    Each entry: ``(sweep, objective_end, step_norm, min_sigma)`` with
    ``step_norm`` the root sum of squared block steps.
    """
    out = []
    current = None
    for r in records:
        if current is None or r.sweep != current[0]:
            if current is not None:
                out.append((current[0], current[1], math.sqrt(current[2]), current[3]))
            current = [r.sweep, r.objective, 0.0, math.inf]
        current[1] = r.objective
        current[2] += r.step_norm**2
        current[3] = min(current[3], r.sigma_min)
    if current is not None:
        out.append((current[0], current[1], math.sqrt(current[2]), current[3]))
    return out


def sufficient_increase_report(records, delta=None, slack=1e-10):
    """Sweeps where the guarded ascent bound fails.

    Whenever every recorded ``sigma_min`` in a sweep exceeds ``delta``, the
    objective gain over the sweep must be at least ``delta/2`` times the
    squared sweep step norm (minus ``slack``).  ``delta`` defaults to 0.99
    times the smallest ``sigma_min`` in the whole trace, which makes every
    sweep qualify.  Returns a list of ``(sweep, gain, bound)`` violations.
    """
    sweeps = sweep_summary(records)
    if not sweeps:
        return []
    if delta is None:
        delta = 0.99 * min(s[3] for s in sweeps)
    violations = []
    prev_obj = None
    for sweep, obj, step, min_sigma in sweeps:
        if prev_obj is not None and min_sigma > delta:
            gain = obj - prev_obj
            bound = 0.5 * delta * step**2 - slack
            if gain < bound:
                violations.append((sweep, gain, bound))
        prev_obj = obj
    return violations


@dataclass(frozen=True)
class RateFit:
    """Least-squares line through ``log(error)`` against sweep index."""

    window: tuple
    slope: float
    r_squared: float
    classification: str  # "linear" | "sublinear" | "inconclusive"


def fit_rate(records=None, errors=None, tail_window=None, min_points=10, r2_threshold=0.98):
    """Fit a geometric decay rate to per-sweep errors.

    ``errors`` defaults to the per-sweep step norms of ``records`` (the usual
    proxy for distance to the limit).  The fit uses the trailing
    ``tail_window`` entries (default: last half, capped at 200), drops
    nonpositive values, and classifies ``linear`` when the slope is negative
    with ``r^2`` at least ``r2_threshold``, ``sublinear`` for a negative slope
    with a worse fit, and ``inconclusive`` otherwise (including degenerate or
    too-short tails).  The verdict is empirical, not a certificate.
    """
    if errors is None:
        if records is None:
            raise ValueError("need records or errors")
        errors = [s[2] for s in sweep_summary(records)]
    errors = [float(e) for e in errors]
    n = len(errors)
    if tail_window is None:
        tail_window = min(200, max(min_points, (n + 1) // 2))
    tail_start = max(0, n - int(tail_window))
    window = (tail_start, n)
    pts = [(k, e) for k, e in enumerate(errors) if k >= tail_start and e > 0.0]
    if len(pts) < min_points:
        return RateFit(window, 0.0, 0.0, "inconclusive")
    xs = np.array([p[0] for p in pts], dtype=float)
    ys = np.log(np.array([p[1] for p in pts], dtype=float))
    vx = xs - xs.mean()
    vy = ys - ys.mean()
    denom = float(vx @ vx)
    if denom == 0.0:
        return RateFit(window, 0.0, 0.0, "inconclusive")
    slope = float(vx @ vy) / denom
    ss_tot = float(vy @ vy)
    if ss_tot == 0.0:
        # perfectly flat tail: no decay to speak of
        return RateFit(window, slope, 0.0, "inconclusive")
    resid = vy - slope * vx
    r2 = 1.0 - float(resid @ resid) / ss_tot
    if slope < 0.0 and r2 >= r2_threshold:
        cls = "linear"
    elif slope < 0.0:
        cls = "sublinear"
    else:
        cls = "inconclusive"
    return RateFit(window, slope, r2, cls)


def fd_gradient_check(spec, point, block=None, step=None):
    """Relative error between the closed-form Euclidean gradient and central
    finite differences over every real coordinate.

    Perturbs the ambient (unconstrained) entries, so it checks the gradient
    of the smooth extension.  Returns the worst relative error over the
    checked blocks (all blocks when ``block`` is None).
    """
    blocks = objectives._blocks(spec, point)
    indices = range(spec.num_blocks) if block is None else [block]
    worst = 0.0
    for i in indices:
        u = blocks[i].copy()
        h = step if step is not None else 1e-5 * (1.0 + float(np.linalg.norm(u)))
        n, r = u.shape

        def value(mat):
            if spec.is_symmetric:
                return spec.evaluate(mat)
            trial = list(blocks)
            trial[i] = mat
            return spec.evaluate(trial)

        g_fd = np.zeros((n, r), dtype=np.complex128)
        for j in range(n):
            for k in range(r):
                for unit in (1.0, 1.0j):
                    bump = np.zeros((n, r), dtype=np.complex128)
                    bump[j, k] = unit * h
                    df = (value(u + bump) - value(u - bump)) / (2.0 * h)
                    g_fd[j, k] += df * unit
        g = objectives.block_euclidean_gradient(spec, blocks if not spec.is_symmetric else blocks[0], i)
        scale = max(float(np.linalg.norm(g)), 1e-12)
        worst = max(worst, float(np.linalg.norm(g_fd - g)) / scale)
    return worst


def seminondegeneracy_report(spec, point, rank_tol=1e-8, grad_tol=1e-8):
    """Numerical Hessian rank of each block against the symmetry-allowed maximum.

    Returns one dict per block with ``rank``, ``expected`` and ``verdict``
    (``"semi-nondegenerate"`` when they match, else ``"degenerate"``).
    Raises if the point is not stationary to ``grad_tol``.
    """
    report = []
    for i in range(spec.num_blocks):
        rank = objectives.hessian_rank(spec, point, i, rank_tol=rank_tol, grad_tol=grad_tol)
        expected = objectives.seminondegenerate_hessian_rank(spec, i)
        report.append(
            {
                "block": i,
                "rank": rank,
                "expected": expected,
                "verdict": "semi-nondegenerate" if rank == expected else "degenerate",
            }
        )
    return report
