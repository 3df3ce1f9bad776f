"""End-to-end CLI coverage: generate | solve | check | bench, exit codes,
artifact formats, and byte-level determinism."""
from __future__ import annotations

import csv
import json
import subprocess
import sys

import pytest

from stiefel_polar.cli import main
from stiefel_polar.diagnostics import read_trace_csv, TRACE_COLUMNS
from stiefel_polar.tensors import tensor_from_json


def run_cli(*argv):
    return main(list(argv))


def load_json(path):
    with open(path) as f:
        return json.load(f)


# --------------------------------------------------------------------------
# generate


def test_generate_random_is_byte_deterministic(tmp_path):
    a = tmp_path / "a"
    b = tmp_path / "b"
    for base in (a, b):
        assert run_cli("generate", "--kind", "random", "--dims", "3,4,3",
                       "--seed", "7", "--out", str(base)) == 0
    assert (a.with_suffix(".tensor.json").read_bytes()
            == b.with_suffix(".tensor.json").read_bytes())
    assert (a.with_suffix(".meta.json").read_bytes()
            == b.with_suffix(".meta.json").read_bytes())


def test_generate_rank1_sidecar_has_ground_truth(tmp_path):
    base = tmp_path / "r1"
    assert run_cli("generate", "--kind", "rank1", "--dims", "4,4,4",
                   "--lam", "2.0", "--seed", "3", "--out", str(base)) == 0
    meta = load_json(str(base) + ".meta.json")
    assert meta["kind"] == "rank1"
    assert meta["lam_sq"] == pytest.approx(4.0)
    assert meta["norm_sq"] == pytest.approx(4.0)  # unit factors scaled by lam
    t = tensor_from_json(load_json(str(base) + ".tensor.json"))
    assert t.shape == (4, 4, 4)
    assert len(meta["factors"]) == 3


def test_generate_symmetric_requires_equal_dims(tmp_path):
    assert run_cli("generate", "--kind", "symmetric", "--dims", "3,4,3",
                   "--out", str(tmp_path / "s")) == 2
    assert run_cli("generate", "--kind", "symrank1", "--dims", "3,4",
                   "--out", str(tmp_path / "s2")) == 2


def test_generate_tucker_requires_ranks(tmp_path):
    assert run_cli("generate", "--kind", "tucker", "--dims", "4,4,4",
                   "--out", str(tmp_path / "t")) == 2
    base = tmp_path / "t2"
    assert run_cli("generate", "--kind", "tucker", "--dims", "5,4,5",
                   "--ranks", "2,2,3", "--seed", "1", "--out", str(base)) == 0
    meta = load_json(str(base) + ".meta.json")
    assert meta["ranks"] == [2, 2, 3]
    assert meta["core_norm_sq"] > 0.0


def test_generate_unknown_kind_fails(tmp_path):
    assert run_cli("generate", "--kind", "nope", "--out", str(tmp_path / "x")) == 2


def test_generate_kind_aliases_match_canonical_names(tmp_path):
    pairs = [
        ("prop59", "diag-rotated"),
        ("prop65", "symdiag-rotated"),
        ("prop710", "compress-rotated"),
    ]
    for alias, kind in pairs:
        a = tmp_path / f"alias_{alias}"
        c = tmp_path / f"canon_{alias}"
        for name, base in ((alias, a), (kind, c)):
            assert run_cli("generate", "--kind", name, "--dims", "4,4,4",
                           "--rank", "2", "--seed", "9", "--out", str(base)) == 0
        for suffix in (".spec.json", ".point.json", ".meta.json"):
            assert (a.parent / (a.name + suffix)).read_bytes() == (
                c.parent / (c.name + suffix)
            ).read_bytes()
        meta = load_json(str(a) + ".meta.json")
        assert meta["kind"] == kind  # alias resolves to the descriptive name


def test_generate_rotated_instance_sidecar(tmp_path):
    base = tmp_path / "inst"
    assert run_cli("generate", "--kind", "compress-rotated", "--dims", "4,4,4",
                   "--rank", "2", "--seed", "5", "--out", str(base)) == 0
    meta = load_json(str(base) + ".meta.json")
    assert meta["expected_hessian_ranks"] == [8, 8, 8]  # 2 * r * (n - r)
    point = load_json(str(base) + ".point.json")
    assert len(point["blocks"]) == 3
    spec = load_json(str(base) + ".spec.json")
    assert spec["family"] == "compress"


# --------------------------------------------------------------------------
# solve


def test_solve_hopm_reaches_rank_one_scale(tmp_path):
    base = tmp_path / "r1"
    run_cli("generate", "--kind", "rank1", "--dims", "4,4,4", "--lam", "2.0",
            "--seed", "3", "--out", str(base))
    out = tmp_path / "run"
    assert run_cli("solve", "--spec", str(base) + ".tensor.json", "--algo", "hopm",
                   "--seed", "1", "--out", str(out)) == 0
    result = load_json(str(out) + ".result.json")
    assert result["status"] in ("converged_step", "converged_grad")
    assert result["final_objective"] == pytest.approx(4.0, abs=1e-8)
    assert result["algorithm"] == "hopm"
    assert len(result["factors"]) == 3
    records = read_trace_csv(str(out) + ".trace.csv")
    assert len(records) >= 3
    with open(str(out) + ".trace.csv") as f:
        header = f.readline().strip()
    assert tuple(header.split(",")) == TRACE_COLUMNS


def test_solve_full_rank_compression_reaches_tensor_norm(tmp_path):
    base = tmp_path / "rand"
    run_cli("generate", "--kind", "random", "--dims", "3,3,3", "--seed", "11",
            "--out", str(base))
    meta = load_json(str(base) + ".meta.json")
    out = tmp_path / "run"
    assert run_cli("solve", "--spec", str(base) + ".tensor.json", "--algo", "lmpd",
                   "--ranks", "3,3,3", "--out", str(out)) == 0
    result = load_json(str(out) + ".result.json")
    assert result["final_objective"] == pytest.approx(meta["norm_sq"], rel=1e-10)


def test_solve_is_deterministic_modulo_wall_time(tmp_path):
    base = tmp_path / "rand"
    run_cli("generate", "--kind", "random", "--dims", "4,4,4", "--seed", "13",
            "--out", str(base))
    outs = []
    for tag in ("one", "two"):
        out = tmp_path / tag
        assert run_cli("solve", "--spec", str(base) + ".tensor.json", "--algo",
                       "lmpd-s", "--ranks", "2,2,2", "--seed", "5",
                       "--max-sweeps", "50", "--out", str(out)) == 0
        outs.append(out)
    r1 = (outs[0].parent / (outs[0].name + ".result.json")).read_bytes()
    r2 = (outs[1].parent / (outs[1].name + ".result.json")).read_bytes()
    assert r1 == r2
    t1 = read_trace_csv(str(outs[0]) + ".trace.csv")
    t2 = read_trace_csv(str(outs[1]) + ".trace.csv")
    assert len(t1) == len(t2)
    for a, b in zip(t1, t2):
        assert (a.sweep, a.block, a.objective, a.step_norm, a.grad_norm, a.sigma_min) == (
            b.sweep, b.block, b.objective, b.step_norm, b.grad_norm, b.sigma_min)


def test_solve_rejects_negative_shift(tmp_path):
    base = tmp_path / "rand"
    run_cli("generate", "--kind", "random", "--dims", "3,3,3", "--seed", "1",
            "--out", str(base))
    assert run_cli("solve", "--spec", str(base) + ".tensor.json", "--algo", "apdoi",
                   "--rank", "1", "--gamma", "-1.0", "--out", str(tmp_path / "x")) == 2


def test_solve_rejects_family_algorithm_mismatch(tmp_path):
    base = tmp_path / "inst"
    run_cli("generate", "--kind", "diag-rotated", "--dims", "4,4,4", "--rank", "2",
            "--seed", "2", "--out", str(base))
    assert run_cli("solve", "--spec", str(base) + ".spec.json", "--algo", "hooi",
                   "--out", str(tmp_path / "x")) == 2


def test_solve_bare_tensor_requires_rank(tmp_path):
    base = tmp_path / "rand"
    run_cli("generate", "--kind", "random", "--dims", "3,3,3", "--seed", "1",
            "--out", str(base))
    assert run_cli("solve", "--spec", str(base) + ".tensor.json", "--algo", "apdoi",
                   "--out", str(tmp_path / "x")) == 2
    assert run_cli("solve", "--spec", str(base) + ".tensor.json", "--algo", "hooi",
                   "--out", str(tmp_path / "x")) == 2


def test_solve_from_spec_and_point_files(tmp_path):
    base = tmp_path / "inst"
    run_cli("generate", "--kind", "diag-rotated", "--dims", "4,4,4", "--rank", "2",
            "--seed", "6", "--out", str(base))
    out = tmp_path / "run"
    assert run_cli("solve", "--spec", str(base) + ".spec.json", "--algo", "apdoi",
                   "--init", str(base) + ".point.json", "--tol-step", "1e-12",
                   "--out", str(out)) == 0
    result = load_json(str(out) + ".result.json")
    # the generated point is already stationary, so one sweep suffices
    assert result["status"] == "converged_step"
    assert result["sweeps"] == 1


# --------------------------------------------------------------------------
# check


def test_check_grad_passes_on_generated_instance(tmp_path, capsys):
    base = tmp_path / "inst"
    run_cli("generate", "--kind", "prop59", "--dims", "4,4,4", "--rank", "2",
            "--seed", "4", "--out", str(base))
    assert run_cli("check", "--which", "grad", "--spec", str(base) + ".spec.json",
                   "--seed", "0") == 0
    report = json.loads(capsys.readouterr().out)
    assert report["pass"] is True
    assert report["max_rel_error"] <= 1e-6


def test_check_hessrank_on_generated_instance(tmp_path, capsys):
    base = tmp_path / "inst"
    run_cli("generate", "--kind", "prop710", "--dims", "4,4,4", "--rank", "2",
            "--seed", "5", "--out", str(base))
    out = tmp_path / "report.json"
    assert run_cli("check", "--which", "hessrank", "--spec", str(base) + ".spec.json",
                   "--point", str(base) + ".point.json", "--out", str(out)) == 0
    report = load_json(out)
    assert report["pass"] is True
    assert [row["rank"] for row in report["blocks"]] == [8, 8, 8]


def test_check_monotone_and_rate_on_solver_trace(tmp_path, capsys):
    base = tmp_path / "rand"
    run_cli("generate", "--kind", "random", "--dims", "4,4,4", "--seed", "21",
            "--out", str(base))
    out = tmp_path / "run"
    run_cli("solve", "--spec", str(base) + ".tensor.json", "--algo", "lmpd-s",
            "--ranks", "2,2,2", "--max-sweeps", "200", "--out", str(out))
    capsys.readouterr()
    assert run_cli("check", "--which", "monotone", "--trace",
                   str(out) + ".trace.csv") == 0
    report = json.loads(capsys.readouterr().out)
    assert report["pass"] is True and report["first_violation_index"] is None
    assert run_cli("check", "--which", "rate", "--trace", str(out) + ".trace.csv") == 0
    report = json.loads(capsys.readouterr().out)
    assert report["classification"] in ("linear", "sublinear", "inconclusive")


def test_check_monotone_flags_corrupted_trace(tmp_path, capsys):
    base = tmp_path / "rand"
    run_cli("generate", "--kind", "random", "--dims", "4,4,4", "--seed", "22",
            "--out", str(base))
    out = tmp_path / "run"
    run_cli("solve", "--spec", str(base) + ".tensor.json", "--algo", "lmpd",
            "--ranks", "2,2,2", "--max-sweeps", "50", "--out", str(out))
    trace_path = str(out) + ".trace.csv"
    lines = open(trace_path).read().splitlines()
    # swap the objective fields of the last two records to force a drop
    last, prev = lines[-1].split(","), lines[-2].split(",")
    hi = float(prev[2]) + 1.0
    prev[2], last[2] = str(hi), prev[2]
    lines[-2], lines[-1] = ",".join(prev), ",".join(last)
    with open(trace_path, "w") as f:
        f.write("\n".join(lines) + "\n")
    capsys.readouterr()
    assert run_cli("check", "--which", "monotone", "--trace", trace_path) == 4
    report = json.loads(capsys.readouterr().out)
    assert report["pass"] is False
    assert report["first_violation_index"] is not None


def test_check_argument_validation(tmp_path):
    assert run_cli("check", "--which", "monotone") == 2
    assert run_cli("check", "--which", "grad") == 2
    assert run_cli("check", "--which", "rate") == 2
    base = tmp_path / "inst"
    run_cli("generate", "--kind", "prop710", "--dims", "4,4,4", "--rank", "2",
            "--seed", "5", "--out", str(base))
    assert run_cli("check", "--which", "hessrank",
                   "--spec", str(base) + ".spec.json") == 2


# --------------------------------------------------------------------------
# bench


def test_bench_small_single_seed(tmp_path, capsys):
    out_dir = tmp_path / "bench"
    assert run_cli("bench", "--case", "small", "--seeds", "0", "--max-sweeps", "60",
                   "--out-dir", str(out_dir)) == 0
    stdout = capsys.readouterr().out
    assert "bench small" in stdout
    with open(out_dir / "summary.csv") as f:
        rows = list(csv.DictReader(f))
    # 2 rank sets x 1 seed x 3 algorithms
    assert len(rows) == 6
    assert {r["algorithm"] for r in rows} == {"hooi", "lmpd", "lmpd-s"}
    assert {r["ranks"] for r in rows} == {"1x1x2", "3x3x3"}
    for row in rows:
        assert row["case"] == "small"
        assert int(row["converged"]) in (0, 1)
        trace = out_dir / f"trace_small_r{row['ranks']}_s0_{row['algorithm']}.csv"
        assert trace.exists()
    assert (out_dir / "points.csv").exists()


def test_bench_alias_and_unknown_case(tmp_path):
    assert run_cli("bench", "--case", "nope", "--out-dir", str(tmp_path / "x")) == 2
    out_dir = tmp_path / "alias"
    assert run_cli("bench", "--case", "ex711", "--seeds", "3", "--max-sweeps", "5",
                   "--out-dir", str(out_dir)) == 0
    with open(out_dir / "summary.csv") as f:
        rows = list(csv.DictReader(f))
    assert all(r["case"] == "small" for r in rows)


def test_bench_zero_seeds_writes_header_only(tmp_path):
    out_dir = tmp_path / "bench"
    assert run_cli("bench", "--case", "small", "--num-seeds", "0",
                   "--out-dir", str(out_dir)) == 0
    lines = (out_dir / "summary.csv").read_text().splitlines()
    assert len(lines) == 1 and lines[0].startswith("case,")


def test_bench_traces_replay_through_check(tmp_path, capsys):
    out_dir = tmp_path / "bench"
    run_cli("bench", "--case", "small", "--seeds", "1", "--max-sweeps", "40",
            "--out-dir", str(out_dir))
    capsys.readouterr()
    trace = out_dir / "trace_small_r3x3x3_s1_lmpd-s.csv"
    assert run_cli("check", "--which", "monotone", "--trace", str(trace)) == 0
    assert run_cli("check", "--which", "rate", "--trace", str(trace)) == 0


def test_bench_is_deterministic_modulo_wall_time(tmp_path):
    outs = []
    for tag in ("one", "two"):
        out_dir = tmp_path / tag
        run_cli("bench", "--case", "small", "--seeds", "2", "--max-sweeps", "30",
                "--out-dir", str(out_dir))
        outs.append(out_dir)
    assert (outs[0] / "summary.csv").read_bytes() == (outs[1] / "summary.csv").read_bytes()
    assert (outs[0] / "points.csv").read_bytes() == (outs[1] / "points.csv").read_bytes()


# --------------------------------------------------------------------------
# installed entry point


def test_console_script_smoke(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "stiefel_polar", "generate", "--kind", "random",
         "--dims", "2,2,2", "--seed", "0", "--out", str(tmp_path / "t")],
        capture_output=True, text=True,
    )
    assert proc.returncode == 0, proc.stderr
    assert (tmp_path / "t.tensor.json").exists()
