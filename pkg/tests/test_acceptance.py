"""End-to-end acceptance checks.

Each test exercises one numbered criterion from the checklist in the
README, at a fixed tolerance and runtime budget, and prints a single
PASS/FAIL line (visible with `pytest -s`).
"""

import math
import os
import subprocess
import sys
import time
from pathlib import Path

import numpy as np

import oracles
from coverage_ga import (
    Correspondence,
    EdgeCorrection,
    FeatureSet,
    GaConfig,
    Point2,
    RadiusGrid,
    Region,
    SampleSummary,
    estimate_homography,
    evolve,
    k_estimate,
    mcnemar,
    paired_outcomes,
    reprojection_rmse,
    t_test_two_sample,
)
from coverage_ga.cli import read_keypoints
from coverage_ga.homography import apply, read_homography_file, synthesize_correspondences

FIX = Path(__file__).parent / "fixtures"


def report(num: int, ok: bool, detail: str):
    print(f"criterion {num:02d}: {'PASS' if ok else 'FAIL'} - {detail}")
    assert ok, f"criterion {num}: {detail}"


class Timer:
    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.t0


def test_criterion_1_coverage_table_reproduction():
    with Timer() as t:
        rep = t_test_two_sample(
            SampleSummary(3897.1002, 1880.8933, 520),
            SampleSummary(2783.8826, 1492.5160, 520),
        )
    ok = (
        abs(rep.t_stat - 10.5723) <= 1e-3
        and abs(rep.t_crit_one - 1.6464) <= 5e-4
        and abs(rep.t_crit_two - 1.9624) <= 5e-4
        and rep.p_one_tail < 1e-20
        and t.elapsed < 1.0
    )
    report(
        1, ok,
        f"t={rep.t_stat:.4f} crit1={rep.t_crit_one:.4f} crit2={rep.t_crit_two:.4f} "
        f"p1={rep.p_one_tail:.3e} ({t.elapsed:.3f}s)",
    )


def test_criterion_2_accuracy_table_reproduction():
    with Timer() as t:
        rep = t_test_two_sample(
            SampleSummary(4.4531, 1.6769, 288),
            SampleSummary(4.4933, 1.6807, 288),
        )
    ok = (
        abs(abs(rep.t_stat) - 0.2875) <= 1e-3
        and abs(rep.p_two_tail - 0.7739) <= 2e-3
        and abs(rep.t_crit_two - 1.9641) <= 5e-4
        and t.elapsed < 1.0
    )
    report(
        2, ok,
        f"|t|={abs(rep.t_stat):.4f} p2={rep.p_two_tail:.4f} "
        f"crit2={rep.t_crit_two:.4f} ({t.elapsed:.3f}s)",
    )


def test_criterion_3_k_estimator_oracle_equivalence():
    grid = RadiusGrid(5.0, 50.0, 5.0)
    region = Region(120.0, 120.0)
    worst = 0.0
    with Timer() as t:
        for k in range(50):
            rng = np.random.default_rng(np.random.SeedSequence(entropy=300, spawn_key=(k,)))
            n = int(rng.integers(2, 51))
            xy = rng.random((n, 2)) * 120.0
            fs = FeatureSet([Point2(float(x), float(y)) for x, y in xy], region)
            prof = k_estimate(fs, grid, EdgeCorrection.NONE)
            expected = oracles.k_brute_force(xy, 120.0, 120.0, grid.radii())
            worst = max(worst, float(np.max(np.abs(prof.k_hat - np.asarray(expected)))))
    ok = worst <= 1e-9 and t.elapsed < 10.0
    report(3, ok, f"50 sets, worst |diff|={worst:.2e} ({t.elapsed:.2f}s)")


def test_criterion_4_csr_calibration():
    region = Region(500.0, 500.0)
    grid = RadiusGrid(r_min=10.0, r_max=50.0, delta_r=5.0)
    with Timer() as t:
        acc = np.zeros(len(grid.radii()))
        for k in range(100):
            rng = np.random.default_rng(np.random.SeedSequence(entropy=900, spawn_key=(k,)))
            xy = rng.random((200, 2)) * 500.0
            fs = FeatureSet([Point2(float(x), float(y)) for x, y in xy], region)
            acc += k_estimate(fs, grid, EdgeCorrection.ISOTROPIC).k_hat
        mean_k = acc / 100.0
    expected = np.pi * grid.radii() ** 2
    rel = np.abs(mean_k - expected) / expected
    ok = bool((rel <= 0.10).all()) and t.elapsed < 30.0
    report(4, ok, f"max relative gap {float(rel.max()):.3%} over r in [10, 50] ({t.elapsed:.2f}s)")


def test_criterion_5_ga_improvement_guarantee():
    region = Region(500.0, 500.0)
    fs = read_keypoints(FIX / "cluster_dispersed.csv", region)
    grid = RadiusGrid.for_region(region)
    with Timer() as t:
        res = evolve(fs, GaConfig(rng_seed=42), grid, EdgeCorrection.NONE)
    oracle_original = oracles.alpha_brute_force(fs.coords(), 500.0, 500.0, grid.radii())
    oracle_refined = oracles.alpha_brute_force(res.refined.coords(), 500.0, 500.0, grid.radii())
    ok = (
        res.refined_alpha <= res.original_alpha
        and res.refined_alpha < 0.8 * res.original_alpha
        and math.isclose(res.original_alpha, oracle_original, abs_tol=1e-6)
        and math.isclose(res.refined_alpha, oracle_refined, abs_tol=1e-6)
        and t.elapsed < 60.0
    )
    report(
        5, ok,
        f"alpha {res.original_alpha:.1f} -> {res.refined_alpha:.1f} "
        f"(ratio {res.refined_alpha / res.original_alpha:.3f}), oracle-verified ({t.elapsed:.2f}s)",
    )


def test_criterion_6_elitism_monotonicity():
    region = Region(500.0, 500.0)
    fs = read_keypoints(FIX / "cluster_dispersed.csv", region)
    grid = RadiusGrid.for_region(region)
    with Timer() as t:
        monotone = True
        for seed in range(20):
            history = evolve(fs, GaConfig(rng_seed=seed), grid, EdgeCorrection.NONE).history
            alphas = [r.best_alpha for r in history]
            monotone &= all(a >= b for a, b in zip(alphas, alphas[1:]))
    ok = monotone and t.elapsed < 300.0
    report(6, ok, f"20 seeded runs, best_alpha non-increasing ({t.elapsed:.2f}s)")


def test_criterion_7_dlt_round_trip():
    rng = np.random.default_rng(700)
    worst = 0.0
    with Timer() as t:
        for _ in range(100):
            angle = rng.uniform(-0.3, 0.3)
            scale = rng.uniform(0.8, 1.2)
            m = np.array(
                [
                    [scale * math.cos(angle), -scale * math.sin(angle), rng.uniform(-20, 20)],
                    [scale * math.sin(angle), scale * math.cos(angle), rng.uniform(-20, 20)],
                    [rng.uniform(-1e-3, 1e-3), rng.uniform(-1e-3, 1e-3), 1.0],
                ]
            )
            from coverage_ga import Homography

            true = Homography(m)
            pts = rng.random((8, 2)) * 200.0
            corrs = [Correspondence(Point2(*p), apply(true, Point2(*p))) for p in pts]
            worst = max(worst, reprojection_rmse(estimate_homography(corrs), corrs))
    ok = worst < 1e-6 and t.elapsed < 5.0
    report(7, ok, f"100 transforms, worst rmse={worst:.2e} ({t.elapsed:.2f}s)")


def test_criterion_8_homography_equivalence():
    h_true = read_homography_file(FIX / "true_h.txt")
    region = Region(200.0, 200.0)
    grid = RadiusGrid.for_region(region)
    n_train, n_test = 60, 30
    accuracy_bar = 1.0  # success requirement: held-out rmse within 2x the 0.5 px noise
    e_orig, e_ref = [], []
    with Timer() as t:
        for i in range(30):
            data_ss, ga_ss = np.random.SeedSequence(entropy=4242, spawn_key=(i,)).spawn(2)
            rng = np.random.default_rng(data_ss)
            corrs = synthesize_correspondences(
                h_true, n_train + n_test, region, rng, noise_sigma=0.5
            )
            train, test = corrs[:n_train], corrs[n_train:]
            fs = FeatureSet([c.p1 for c in train], region)
            res = evolve(
                fs,
                GaConfig(rng_seed=int(ga_ss.generate_state(1, np.uint64)[0])),
                grid,
                EdgeCorrection.NONE,
                min_selected=4,
            )
            refined = [c for c, keep in zip(train, res.mask) if keep]
            e_orig.append(reprojection_rmse(estimate_homography(train), test))
            e_ref.append(reprojection_rmse(estimate_homography(refined), test))
    rep = t_test_two_sample(SampleSummary.from_values(e_orig), SampleSummary.from_values(e_ref))
    # McNemar on the paired success/failure outcomes at the accuracy bar
    fail_orig = [float(e > accuracy_bar) for e in e_orig]
    fail_ref = [float(e > accuracy_bar) for e in e_ref]
    b, c = paired_outcomes(fail_orig, fail_ref)
    z = mcnemar(b, c).z
    ok = abs(rep.t_stat) < rep.t_crit_two and z < 1.96 and t.elapsed < 300.0
    report(
        8, ok,
        f"30 pairs held-out: |t|={abs(rep.t_stat):.3f} < {rep.t_crit_two:.3f}, "
        f"b={b} c={c} z={z:.3f} < 1.96 ({t.elapsed:.2f}s)",
    )


def test_criterion_9_feature_count_trend():
    region = Region(500.0, 500.0)
    fs = read_keypoints(FIX / "cluster_dispersed.csv", region)
    grid = RadiusGrid.for_region(region)
    with Timer() as t:
        finals, any_increase = [], False
        for seed in range(10):
            history = evolve(fs, GaConfig(rng_seed=seed), grid, EdgeCorrection.NONE).history
            counts = [r.selected_count for r in history]
            finals.append(counts[-1] < counts[0])
            any_increase |= any(b > a for a, b in zip(counts, counts[1:]))
    ok = all(finals) and any_increase and t.elapsed < 600.0
    report(
        9, ok,
        f"10 seeds: all final<initial={all(finals)}, "
        f"some generation-level increase={any_increase} ({t.elapsed:.2f}s)",
    )


def _cli(args, out_dir, threads):
    env = os.environ.copy()
    env["COVERAGE_GA_THREADS"] = str(threads)
    proc = subprocess.run(
        [sys.executable, "-m", "coverage_ga", *[str(a) for a in args], "--out", str(out_dir)],
        capture_output=True,
        text=True,
        env=env,
        cwd=str(Path(__file__).parent.parent),
    )
    assert proc.returncode == 0, proc.stderr
    return sorted(p.name for p in Path(out_dir).iterdir())


def test_criterion_10_manifest_determinism(tmp_path):
    fixture = FIX / "cluster_dispersed.csv"
    commands = {
        "select": ["select", fixture, "--region", "500x500", "--correction", "none",
                   "--seed", "42", "--generations", "4"],
        "coverage": ["coverage", fixture, "--region", "500x500"],
        "evaluate": ["evaluate", "--synthetic", FIX / "true_h.txt", "--region", "96x96",
                     "--pairs", "2", "--n-corrs", "30", "--generations", "2", "--seed", "3"],
    }
    with Timer() as t:
        all_ok = True
        details = []
        for name, args in commands.items():
            base = tmp_path / name / "base"
            files = _cli(args, base, threads=1)
            replicas = []
            for threads in (1, 4):
                rerun = tmp_path / name / f"threads{threads}"
                _cli([args[0], "--manifest", base / "manifest.json"], rerun, threads=threads)
                replicas.append(rerun)
            for rerun in replicas:
                for fname in files:
                    same = (base / fname).read_bytes() == (rerun / fname).read_bytes()
                    all_ok &= same
                    if not same:
                        details.append(f"{name}/{fname} differs in {rerun.name}")
    detail = "; ".join(details) if details else "select/coverage/evaluate byte-identical at threads 1 and 4"
    report(10, all_ok, f"{detail} ({t.elapsed:.2f}s)")
