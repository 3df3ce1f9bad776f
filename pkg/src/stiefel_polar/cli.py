"""Command-line interface: generate | solve | check | bench.

Exit codes: 0 success, 2 input validation error, 3 numeric failure,
4 requested check failed.  All artifacts are JSON or CSV with floats at
17 significant digits, so outputs are reproducible byte for byte per seed
(the ``wall_ns`` trace column, real elapsed time, is the one exception).
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import instances
from .diagnostics import (
    assert_monotone,
    fd_gradient_check,
    fit_rate,
    fmt_float,
    read_trace_csv,
    seminondegeneracy_report,
    sweep_summary,
    write_trace_csv,
)
from .objectives import (
    CompressionObjective,
    DiagonalObjective,
    SymmetricDiagonalObjective,
    load_spec,
    spec_from_json,
)
from .solvers import (
    NumericFailure,
    SolverConfig,
    hopm,
    lmpd,
    lmpd_s,
    lroat,
    s_hopm,
    s_lroat,
    solve,
)
from .stiefel import random_stiefel, truncated_identity
from .tensors import (
    is_symmetric,
    random_tensor,
    symmetrize,
    tensor_from_json,
    tensor_to_json,
)

THREADS_ENV = "STIEFEL_POLAR_THREADS"

_BENCH_CASES = {
    "small": {"dims": (5, 5, 5), "rank_sets": ((1, 1, 2), (3, 3, 3)), "max_sweeps": 1000},
    "large": {"dims": (10, 10, 10), "rank_sets": ((1, 1, 2),), "max_sweeps": 500},
}
_BENCH_ALIASES = {"ex711": "small", "ex712": "large"}

_GENERATE_ALIASES = {
    "prop59": "diag-rotated",
    "prop65": "symdiag-rotated",
    "prop710": "compress-rotated",
}


@dataclass(frozen=True)
class RunManifest:
    """Validated arguments of one solve invocation."""

    spec_path: str
    algorithm: str
    gamma: float
    tol_step: float
    tol_grad: float
    max_sweeps: int
    seed: int
    init: str
    rank: int | None
    ranks: tuple | None
    dagger: str
    out_base: str


def _parse_dims(text):
    try:
        dims = tuple(int(p) for p in text.split(","))
    except ValueError as exc:
        raise ValueError(f"bad dimension list {text!r}") from exc
    if not dims or any(n < 1 for n in dims):
        raise ValueError(f"bad dimension list {text!r}")
    return dims


def _child_seed(seed, *key):
    return int(np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(key)).generate_state(1)[0])


def _write_json(path, obj):
    with open(path, "w") as f:
        json.dump(obj, f, indent=1)
        f.write("\n")


def _matrix_list_json(mats):
    return [tensor_to_json(np.asarray(m)) for m in mats]


def _write_point(path, blocks):
    _write_json(path, {"blocks": _matrix_list_json(blocks)})


def _load_point(path):
    with open(path) as f:
        obj = json.load(f)
    if not isinstance(obj, dict) or "blocks" not in obj:
        raise ValueError(f"{path}: not a point file (missing 'blocks')")
    return [tensor_from_json(b) for b in obj["blocks"]]


# ---------------------------------------------------------------------------
# generate


def cmd_generate(args):
    kind = _GENERATE_ALIASES.get(args.kind, args.kind)
    base = args.out
    seed = args.seed
    meta = {"kind": kind, "seed": seed}

    if kind in ("random", "symmetric", "rank1", "symrank1", "tucker"):
        dims = _parse_dims(args.dims)
        if kind == "random":
            t = random_tensor(dims, seed)
            extra = {}
        elif kind == "symmetric":
            if len(set(dims)) > 1:
                raise ValueError("symmetric tensors need equal dimensions")
            t = symmetrize(random_tensor(dims, seed))
            extra = {}
        elif kind == "rank1":
            t, extra = instances.rank1_instance(dims, seed, lam=args.lam)
            extra["factors"] = _matrix_list_json([v[:, None] for v in extra["factors"]])
        elif kind == "symrank1":
            if len(set(dims)) > 1:
                raise ValueError("symmetric tensors need equal dimensions")
            t, extra = instances.symmetric_rank1_instance(dims[0], len(dims), seed, lam=args.lam)
            extra["factor"] = tensor_to_json(extra["factor"][:, None])
        else:
            if args.ranks is None:
                raise ValueError("tucker needs --ranks")
            ranks = _parse_dims(args.ranks)
            t, extra = instances.tucker_instance(dims, ranks, seed)
            extra["factors"] = _matrix_list_json(extra["factors"])
        meta.update({"dims": list(dims), "norm_sq": float(np.vdot(t, t).real)})
        meta.update(extra)
        _write_json(base + ".tensor.json", tensor_to_json(t))
        _write_json(base + ".meta.json", meta)
        return 0

    if kind in ("diag-rotated", "symdiag-rotated", "compress-rotated"):
        dims = _parse_dims(args.dims)
        if args.rank is None:
            raise ValueError(f"{kind} needs --rank")
        r = args.rank
        if kind == "diag-rotated":
            spec, point, extra = instances.rotated_diagonal_instance(
                dims, r, args.num_tensors, seed, args.dagger
            )
        elif kind == "symdiag-rotated":
            if len(set(dims)) > 1:
                raise ValueError("symmetric tensors need equal dimensions")
            spec, point, extra = instances.symmetric_rotated_diagonal_instance(
                dims[0], len(dims), r, args.num_tensors, seed, args.dagger
            )
            point = [point]
        else:
            spec, point, extra = instances.compression_rotated_diagonal_instance(
                dims, r, args.num_tensors, seed, args.dagger
            )
        from .objectives import save_spec, seminondegenerate_hessian_rank

        save_spec(base + ".spec.json", spec)
        _write_point(base + ".point.json", point)
        rot_key = "rotations" if "rotations" in extra else "rotation"
        rots = extra[rot_key]
        meta.update(
            {
                "dims": list(dims),
                "rank": r,
                "weights": extra["weights"],
                "diagonals": _matrix_list_json([d[:, None] for d in extra["diagonals"]]),
                rot_key: _matrix_list_json(rots if isinstance(rots, list) else [rots]),
                "expected_hessian_ranks": [
                    seminondegenerate_hessian_rank(spec, i) for i in range(spec.num_blocks)
                ],
            }
        )
        _write_json(base + ".meta.json", meta)
        return 0

    raise ValueError(f"unknown kind {args.kind!r}")


# ---------------------------------------------------------------------------
# solve

_TUPLE_ALGOS = ("apdoi", "apdoi-s", "lroat", "hopm", "lmpd", "lmpd-s", "hooi")
_SYMMETRIC_ALGOS = ("pdoi", "pdoi-s", "s-lroat", "s-hopm")


def _spec_for_solve(manifest):
    with open(manifest.spec_path) as f:
        obj = json.load(f)
    algo = manifest.algorithm
    if isinstance(obj, dict) and "family" in obj:
        spec = spec_from_json(obj)
        family_ok = {
            DiagonalObjective: ("apdoi", "apdoi-s", "lroat", "hopm"),
            SymmetricDiagonalObjective: _SYMMETRIC_ALGOS,
            CompressionObjective: ("apdoi", "apdoi-s", "lmpd", "lmpd-s", "hooi"),
        }[type(spec)]
        if algo not in family_ok:
            raise ValueError(f"algorithm {algo!r} does not apply to family {obj['family']!r}")
        return spec
    t = tensor_from_json(obj)
    dg = manifest.dagger
    if algo in ("lroat", "apdoi", "apdoi-s"):
        if manifest.rank is None:
            raise ValueError(f"{algo} on a bare tensor needs --rank")
        return DiagonalObjective((t,), (1.0,), manifest.rank, dg)
    if algo == "hopm":
        return DiagonalObjective((t,), (1.0,), 1, dg)
    if algo in ("s-lroat", "pdoi", "pdoi-s"):
        if manifest.rank is None:
            raise ValueError(f"{algo} on a bare tensor needs --rank")
        return SymmetricDiagonalObjective((t,), (1.0,), manifest.rank, dg)
    if algo == "s-hopm":
        return SymmetricDiagonalObjective((t,), (1.0,), 1, dg)
    if algo in ("lmpd", "lmpd-s", "hooi"):
        if manifest.ranks is None:
            raise ValueError(f"{algo} needs --ranks")
        return CompressionObjective((t,), (1.0,), manifest.ranks, dg)
    raise ValueError(f"unknown algorithm {algo!r}")


def _initial_point(spec, manifest):
    if manifest.init == "random":
        shapes = spec.block_shapes
        blocks = [
            random_stiefel(n, r, _child_seed(manifest.seed, 3, i)) for i, (n, r) in enumerate(shapes)
        ]
    elif manifest.init == "identity":
        blocks = [truncated_identity(n, r) for n, r in spec.block_shapes]
    else:
        blocks = _load_point(manifest.init)
    if spec.is_symmetric:
        if len(blocks) != 1:
            raise ValueError(f"shared-factor init needs one block, got {len(blocks)}")
        return blocks[0]
    return blocks


def _result_blocks(spec, result):
    return [result.point] if spec.is_symmetric else list(result.point)


def cmd_solve(args):
    manifest = RunManifest(
        spec_path=args.spec,
        algorithm=args.algo,
        gamma=args.gamma if args.gamma is not None else 0.0,
        tol_step=args.tol_step,
        tol_grad=args.tol_grad,
        max_sweeps=args.max_sweeps,
        seed=args.seed,
        init=args.init,
        rank=args.rank,
        ranks=_parse_dims(args.ranks) if args.ranks else None,
        dagger=args.dagger,
        out_base=args.out,
    )
    spec = _spec_for_solve(manifest)
    config = SolverConfig(
        algorithm=manifest.algorithm,
        gamma=manifest.gamma,
        max_sweeps=manifest.max_sweeps,
        tol_step=manifest.tol_step,
        tol_grad=manifest.tol_grad,
        seed=manifest.seed,
    )
    init = _initial_point(spec, manifest)
    result = solve(spec, init, config)
    write_trace_csv(manifest.out_base + ".trace.csv", result.trace)
    _write_json(
        manifest.out_base + ".result.json",
        {
            "status": result.status,
            "sweeps": result.sweeps,
            "final_objective": result.final_objective,
            "algorithm": manifest.algorithm,
            "gamma": result.gamma,
            "factors": _matrix_list_json(_result_blocks(spec, result)),
        },
    )
    print(
        f"{manifest.algorithm}: {result.status} after {result.sweeps} sweeps, "
        f"objective {result.final_objective:.12g}"
    )
    return 0


# ---------------------------------------------------------------------------
# check


def _point_for_check(spec, args):
    if args.point:
        blocks = _load_point(args.point)
    elif args.result:
        with open(args.result) as f:
            obj = json.load(f)
        blocks = [tensor_from_json(b) for b in obj["factors"]]
    else:
        return None
    if spec.is_symmetric:
        if len(blocks) != 1:
            raise ValueError("shared-factor check needs exactly one block")
        return blocks[0]
    return blocks


def cmd_check(args):
    report = {"which": args.which}
    ok = True
    if args.which in ("grad", "hessrank"):
        if not args.spec:
            raise ValueError(f"check {args.which} needs --spec")
        spec = load_spec(args.spec)
        point = _point_for_check(spec, args)
        if args.which == "grad":
            if point is None:
                shapes = spec.block_shapes
                blocks = [
                    random_stiefel(n, r, _child_seed(args.seed, 5, i))
                    for i, (n, r) in enumerate(shapes)
                ]
                point = blocks[0] if spec.is_symmetric else blocks
            tol = args.tol if args.tol is not None else 1e-6
            err = fd_gradient_check(spec, point)
            ok = err <= tol
            report.update({"max_rel_error": err, "tol": tol, "pass": ok})
        else:
            if point is None:
                raise ValueError("check hessrank needs --point or --result")
            rows = seminondegeneracy_report(spec, point)
            ok = all(row["verdict"] == "semi-nondegenerate" for row in rows)
            report.update({"blocks": rows, "pass": ok})
    elif args.which == "monotone":
        if not args.trace:
            raise ValueError("check monotone needs --trace")
        records = read_trace_csv(args.trace)
        good, bad_index = assert_monotone(records, tol=args.tol if args.tol is not None else 1e-12)
        ok = good
        report.update({"pass": good, "first_violation_index": bad_index, "records": len(records)})
    elif args.which == "rate":
        if not args.trace:
            raise ValueError("check rate needs --trace")
        records = read_trace_csv(args.trace)
        fit = fit_rate(records)
        report.update(
            {
                "classification": fit.classification,
                "slope": fit.slope,
                "r_squared": fit.r_squared,
                "window": list(fit.window),
                "pass": True,  # informational: the verdict is empirical
            }
        )
    else:
        raise ValueError(f"unknown check {args.which!r}")

    text = json.dumps(report, indent=1)
    if args.out:
        with open(args.out, "w") as f:
            f.write(text + "\n")
    print(text)
    return 0 if ok else 4


# ---------------------------------------------------------------------------
# bench


def _bench_cell(case, dims, ranks, seed, algo, max_sweeps, tol_step):
    tensor = random_tensor(dims, _child_seed(seed, 11))
    init = [
        random_stiefel(n, r, _child_seed(seed, 13, i, *ranks)) for i, (n, r) in enumerate(zip(dims, ranks))
    ]
    overrides = {
        "max_sweeps": max_sweeps,
        "tol_step": tol_step,
        "tol_grad": 1e-300,  # stop on step distance only; the bench watches steps
        "seed": seed,
    }
    if algo == "hooi":
        spec, config = lmpd(tensor, ranks, **overrides)
        config = SolverConfig(**{**config.__dict__, "algorithm": "hooi"})
    elif algo == "lmpd":
        spec, config = lmpd(tensor, ranks, **overrides)
    elif algo == "lmpd-s":
        spec, config = lmpd_s(tensor, ranks, **overrides)
    else:
        raise ValueError(f"unknown bench algorithm {algo!r}")
    result = solve(spec, [u.copy() for u in init], config)
    sweeps = sweep_summary(result.trace)
    to_tol = next((s[0] for s in sweeps if s[2] < 1e-8), -1)
    fit = fit_rate(result.trace)
    row = {
        "case": case,
        "dims": "x".join(str(n) for n in dims),
        "ranks": "x".join(str(r) for r in ranks),
        "seed": seed,
        "algorithm": algo,
        "gamma": result.gamma,
        "status": result.status,
        "sweeps": result.sweeps,
        "final_objective": result.final_objective,
        "final_step_norm": sweeps[-1][2],
        "sweeps_to_tol": to_tol,
        "converged": int(to_tol >= 0),
        "rate_class": fit.classification,
    }
    return row, result.trace, sweeps


_SUMMARY_COLUMNS = (
    "case",
    "dims",
    "ranks",
    "seed",
    "algorithm",
    "gamma",
    "status",
    "sweeps",
    "final_objective",
    "final_step_norm",
    "sweeps_to_tol",
    "converged",
    "rate_class",
)


def cmd_bench(args):
    case = _BENCH_ALIASES.get(args.case, args.case)
    if case not in _BENCH_CASES:
        raise ValueError(f"unknown bench case {args.case!r}")
    setup = _BENCH_CASES[case]
    dims = setup["dims"]
    max_sweeps = args.max_sweeps if args.max_sweeps is not None else setup["max_sweeps"]
    if args.seeds:
        seeds = [int(s) for s in args.seeds.split(",")]
    else:
        seeds = list(range(args.num_seeds))
    os.makedirs(args.out_dir, exist_ok=True)

    cells = [
        (ranks, seed, algo)
        for ranks in setup["rank_sets"]
        for seed in seeds
        for algo in ("hooi", "lmpd", "lmpd-s")
    ]
    workers = max(1, int(os.environ.get(THREADS_ENV, "1")))

    def run(cell):
        ranks, seed, algo = cell
        return cell, _bench_cell(case, dims, ranks, seed, algo, max_sweeps, args.tol_step)

    if workers > 1 and len(cells) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outputs = list(pool.map(run, cells))
    else:
        outputs = [run(c) for c in cells]

    rows = []
    long_rows = []
    for (ranks, seed, algo), (row, trace, sweeps) in outputs:
        tag = f"{case}_r{'x'.join(str(r) for r in ranks)}_s{seed}_{algo}"
        write_trace_csv(os.path.join(args.out_dir, f"trace_{tag}.csv"), trace)
        rows.append(row)
        for sweep, obj, step, _sigma in sweeps:
            long_rows.append((case, row["ranks"], seed, algo, sweep, obj, step))

    rows.sort(key=lambda r: (r["case"], r["ranks"], r["seed"], r["algorithm"]))
    long_rows.sort(key=lambda r: (r[0], r[1], r[2], r[3], r[4]))

    with open(os.path.join(args.out_dir, "summary.csv"), "w") as f:
        f.write(",".join(_SUMMARY_COLUMNS) + "\n")
        for row in rows:
            parts = []
            for col in _SUMMARY_COLUMNS:
                v = row[col]
                parts.append(fmt_float(v) if isinstance(v, float) else str(v))
            f.write(",".join(parts) + "\n")

    with open(os.path.join(args.out_dir, "points.csv"), "w") as f:
        f.write("case,ranks,seed,algorithm,sweep,objective,step_norm\n")
        for case_, ranks_, seed_, algo_, sweep_, obj_, step_ in long_rows:
            f.write(
                f"{case_},{ranks_},{seed_},{algo_},{sweep_},{fmt_float(obj_)},{fmt_float(step_)}\n"
            )

    n_conv = sum(r["converged"] for r in rows)
    print(f"bench {case}: {len(rows)} cells, {n_conv} converged (step < 1e-8); "
          f"summary at {os.path.join(args.out_dir, 'summary.csv')}")
    return 0


# ---------------------------------------------------------------------------
# argument parsing


def build_parser():
    parser = argparse.ArgumentParser(
        prog="stiefel-polar",
        description="Polar-update block orthogonal iteration for tensor approximation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a seeded test instance with ground-truth sidecar")
    g.add_argument("--kind", required=True,
                   help="random | symmetric | rank1 | symrank1 | tucker | "
                        "diag-rotated | symdiag-rotated | compress-rotated")
    g.add_argument("--dims", default="4,4,4", help="comma-separated dimensions")
    g.add_argument("--rank", type=int, default=None)
    g.add_argument("--ranks", default=None, help="comma-separated ranks (tucker)")
    g.add_argument("--num-tensors", type=int, default=2)
    g.add_argument("--lam", type=float, default=2.0, help="rank-one scale")
    g.add_argument("--dagger", choices=("H", "T"), default="H")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True, help="output base path (suffixes are appended)")
    g.set_defaults(func=cmd_generate)

    s = sub.add_parser("solve", help="run a solver and write trace + result")
    s.add_argument("--spec", required=True, help="objective spec JSON or bare tensor JSON")
    s.add_argument("--algo", required=True,
                   help="apdoi | apdoi-s | pdoi | pdoi-s | hooi | lroat | hopm | "
                        "s-lroat | s-hopm | lmpd | lmpd-s")
    s.add_argument("--gamma", type=float, default=None, help="shift (default per algorithm)")
    s.add_argument("--tol-step", type=float, default=1e-10)
    s.add_argument("--tol-grad", type=float, default=1e-8)
    s.add_argument("--max-sweeps", type=int, default=1000)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--init", default="random", help="random | identity | point JSON path")
    s.add_argument("--rank", type=int, default=None, help="rank when --spec is a bare tensor")
    s.add_argument("--ranks", default=None, help="per-mode ranks when --spec is a bare tensor")
    s.add_argument("--dagger", choices=("H", "T"), default="H")
    s.add_argument("--out", required=True, help="output base path (.trace.csv / .result.json)")
    s.set_defaults(func=cmd_solve)

    c = sub.add_parser("check", help="verify gradients, Hessian ranks, monotonicity, or rates")
    c.add_argument("--which", required=True, choices=("grad", "hessrank", "monotone", "rate"))
    c.add_argument("--spec", default=None)
    c.add_argument("--point", default=None, help="point JSON (e.g. from generate)")
    c.add_argument("--result", default=None, help="result JSON (factors used as the point)")
    c.add_argument("--trace", default=None, help="trace CSV (monotone / rate)")
    c.add_argument("--tol", type=float, default=None,
                   help="pass threshold (default 1e-6 for grad, 1e-12 for monotone)")
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--out", default=None, help="write the report JSON here as well")
    c.set_defaults(func=cmd_check)

    b = sub.add_parser("bench", help="random-instance comparison of hooi / lmpd / lmpd-s")
    b.add_argument("--case", required=True, help="small (5x5x5) | large (10x10x10)")
    b.add_argument("--seeds", default=None, help="comma-separated seed list")
    b.add_argument("--num-seeds", type=int, default=20)
    b.add_argument("--max-sweeps", type=int, default=None)
    b.add_argument("--tol-step", type=float, default=1e-8)
    b.add_argument("--out-dir", required=True)
    b.set_defaults(func=cmd_bench)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (NumericFailure, np.linalg.LinAlgError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
