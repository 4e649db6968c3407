"""Command-line pipeline: coverage profiling, subset selection, pair evaluation, reports.

Subcommands: coverage, select, evaluate, stats. Every run writes a
manifest.json capturing the resolved parameters (including the RNG seed);
rerunning any command with --manifest reproduces its outputs byte for byte.
Exit codes: 0 ok, 2 parse/usage error, 3 degenerate input, 4 numerical
failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from pathlib import Path

import numpy as np
from scipy.ndimage import gaussian_filter

from . import __version__
from .errors import (
    CoverageGaError,
    DegenerateConfigurationError,
    InsufficientCorrespondencesError,
    InsufficientPointsError,
    ParseError,
    PointAtInfinityError,
)
from .ga import GaConfig, SelectionResult, evolve
from .homography import (
    Correspondence,
    GrayImage,
    alignment_error,
    estimate_homography,
    ransac_homography,
    read_correspondences_csv,
    read_homography_file,
    read_pgm,
    reprojection_rmse,
    synthesize_correspondences,
    warp_image,
)
from .pointset import FeatureSet, Point2, Region, grid_counts
from .ripley import EdgeCorrection, RadiusGrid, k_estimate, profile_alpha
from .stats import SampleSummary, mcnemar, paired_outcomes, t_test_two_sample

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DEGENERATE = 3
EXIT_NUMERICAL = 4

_MASK64 = 0xFFFFFFFFFFFFFFFF


def fmt(x: float) -> str:
    """17-significant-digit decimal; round-trips float64 exactly."""
    return format(float(x), ".17g")


def threads_from_env() -> int:
    """Parallelism cap from COVERAGE_GA_THREADS; unset or invalid means 1."""
    raw = os.environ.get("COVERAGE_GA_THREADS", "")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


# ---------------------------------------------------------------------------
# Keypoint file I/O


def read_keypoints(path, region: Region, dedup: bool = False) -> FeatureSet:
    """Load a keypoint file (.json list of [x, y], otherwise x,y CSV).

    Coordinates must be finite and inside the region; violations report the
    offending row. With dedup, exact duplicate locations collapse to the
    first occurrence.
    """
    path = Path(path)
    if path.suffix.lower() == ".json":
        located = _read_keypoints_json(path)
    else:
        located = _read_keypoints_csv(path)
    points = []
    for where, (x, y) in located:
        if not (math.isfinite(x) and math.isfinite(y)):
            raise ParseError(f"coordinates must be finite, got ({x}, {y})", path=path, line=where)
        if not (0.0 <= x <= region.width and 0.0 <= y <= region.height):
            raise ParseError(
                f"point ({x}, {y}) lies outside the declared "
                f"{region.width}x{region.height} region",
                path=path,
                line=where,
            )
        points.append(Point2(x, y))
    if dedup:
        seen = set()
        unique = []
        for p in points:
            key = (p.x, p.y)
            if key not in seen:
                seen.add(key)
                unique.append(p)
        points = unique
    return FeatureSet(points, region)


def _read_keypoints_csv(path: Path) -> list[tuple[int, tuple[float, float]]]:
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            fields = [f.strip() for f in line.split(",")]
            try:
                values = [float(f) for f in fields]
                ok = len(values) == 2
            except ValueError:
                if lineno == 1 and not any(_is_number(f) for f in fields):
                    continue  # header row
                ok = False
                values = []
            if not ok:
                raise ParseError(
                    f"expected two comma-separated numbers, got {line!r}",
                    path=path,
                    line=lineno,
                )
            out.append((lineno, (values[0], values[1])))
    return out


def _read_keypoints_json(path: Path) -> list[tuple[int, tuple[float, float]]]:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc.msg}", path=path, line=exc.lineno) from None
    if not isinstance(data, list):
        raise ParseError("keypoint JSON must be a list of [x, y] pairs", path=path)
    out = []
    for i, entry in enumerate(data):
        if (
            not isinstance(entry, (list, tuple))
            or len(entry) != 2
            or not all(isinstance(v, (int, float)) for v in entry)
        ):
            raise ParseError(f"entry {i} is not an [x, y] pair: {entry!r}", path=path)
        out.append((i + 1, (float(entry[0]), float(entry[1]))))
    return out


def write_keypoints(points, path) -> None:
    """Write keypoints in the format implied by the file suffix."""
    path = Path(path)
    if path.suffix.lower() == ".json":
        payload = [[p.x, p.y] for p in points]
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(payload, fh)
            fh.write("\n")
    else:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write("x,y\n")
            for p in points:
                fh.write(f"{fmt(p.x)},{fmt(p.y)}\n")


def _is_number(text: str) -> bool:
    try:
        float(text)
    except ValueError:
        return False
    return True


# ---------------------------------------------------------------------------
# Argument parsing and manifest resolution

_GRID_DEFAULTS = {"rmin": None, "rmax": None, "dr": None, "correction": "isotropic"}
_GA_DEFAULTS = {
    "generations": 20,
    "pop_max": 100,
    "pop_init": 10,
    "crossovers": 10,
    "mutation_rate": 0.030,
    "mutation_unit": "gene",
    "elitism": True,
}

DEFAULTS = {
    "coverage": {
        "keypoints": None,
        "region": None,
        **_GRID_DEFAULTS,
        "poisson_scale": "unit",
        "dedup": False,
        "seed": 0,
    },
    "select": {
        "keypoints": None,
        "region": None,
        **_GRID_DEFAULTS,
        **_GA_DEFAULTS,
        "dedup": False,
        "tiles": [4, 4],
        "seed": 0,
    },
    "evaluate": {
        "image1": None,
        "image2": None,
        "corrs": None,
        "synthetic": None,
        "region": None,
        **_GRID_DEFAULTS,
        **_GA_DEFAULTS,
        "threshold": 0,
        "ransac": None,
        "pairs": 1,
        "n_corrs": 60,
        "noise_sigma": 0.0,
        "outlier_fraction": 0.0,
        "seed": 0,
    },
    "stats": {
        "results": None,
        "summary": False,
        "tie_epsilon": 0.0,
        "welch": False,
        "seed": 0,
    },
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="coverage-ga",
        description="Key-point coverage analysis, GA subset selection and homography evaluation.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_shared(p):
        p.add_argument("--out", default=None, help="output directory (default: current dir)")
        p.add_argument("--manifest", default=None,
                       help="replay a previous run from its manifest.json")
        p.add_argument("--seed", type=int, default=None, help="RNG seed (default 0)")

    def add_grid(p):
        p.add_argument("--region", default=None, metavar="WxH",
                       help="study region dimensions in pixels, e.g. 714.5x474.5")
        p.add_argument("--rmin", type=float, default=None)
        p.add_argument("--rmax", type=float, default=None,
                       help="default: quarter of the short region side")
        p.add_argument("--dr", type=float, default=None, help="default: rmax/50")
        p.add_argument("--correction", choices=["none", "isotropic"], default=None)

    def add_ga(p):
        p.add_argument("--generations", type=int, default=None)
        p.add_argument("--pop-max", dest="pop_max", type=int, default=None)
        p.add_argument("--pop-init", dest="pop_init", type=int, default=None)
        p.add_argument("--crossovers", type=int, default=None)
        p.add_argument("--mutation-rate", dest="mutation_rate", type=float, default=None)
        p.add_argument("--mutation-unit", dest="mutation_unit",
                       choices=["gene", "chromosome"], default=None)
        p.add_argument("--elitism", action=argparse.BooleanOptionalAction, default=None)

    pc = sub.add_parser("coverage", help="K profile and coverage alpha of a keypoint file")
    pc.add_argument("keypoints", nargs="?", default=None)
    add_grid(pc)
    pc.add_argument("--poisson-scale", dest="poisson_scale",
                    choices=["unit", "intensity"], default=None)
    pc.add_argument("--dedup", action=argparse.BooleanOptionalAction, default=None)
    add_shared(pc)

    ps = sub.add_parser("select", help="GA-refine a keypoint file for better coverage")
    ps.add_argument("keypoints", nargs="?", default=None)
    add_grid(ps)
    add_ga(ps)
    ps.add_argument("--dedup", action=argparse.BooleanOptionalAction, default=None)
    ps.add_argument("--tiles", type=int, nargs=2, default=None, metavar=("NX", "NY"),
                    help="tile grid for the before/after count block (default 4 4)")
    add_shared(ps)

    pe = sub.add_parser("evaluate", help="homography accuracy for original vs refined features")
    pe.add_argument("image1", nargs="?", default=None, help="first image (PGM)")
    pe.add_argument("image2", nargs="?", default=None, help="second image (PGM)")
    pe.add_argument("corrs", nargs="?", default=None, help="correspondence CSV x1,y1,x2,y2")
    pe.add_argument("--synthetic", default=None, metavar="H_FILE",
                    help="generate synthetic pairs from a ground-truth 3x3 transform file")
    add_grid(pe)
    add_ga(pe)
    pe.add_argument("--threshold", type=int, default=None,
                    help="alignment count threshold on residual intensity (default 0)")
    pe.add_argument("--ransac", type=float, nargs=2, default=None, metavar=("PX", "ITERS"),
                    help="robust estimation: inlier threshold in pixels and iteration count")
    pe.add_argument("--pairs", type=int, default=None, help="synthetic pairs to generate")
    pe.add_argument("--n-corrs", dest="n_corrs", type=int, default=None,
                    help="correspondences per synthetic pair (default 60)")
    pe.add_argument("--noise-sigma", dest="noise_sigma", type=float, default=None,
                    help="gaussian noise on synthetic matches, pixels")
    pe.add_argument("--outlier-fraction", dest="outlier_fraction", type=float, default=None)
    add_shared(pe)

    pt = sub.add_parser("stats", help="t-test and McNemar reports from a results CSV")
    pt.add_argument("results", nargs="?", default=None)
    pt.add_argument("--summary", action=argparse.BooleanOptionalAction, default=None,
                    help="input holds label,mean,sd,n summary rows instead of raw columns")
    pt.add_argument("--tie-epsilon", dest="tie_epsilon", type=float, default=None)
    pt.add_argument("--welch", action=argparse.BooleanOptionalAction, default=None)
    add_shared(pt)

    return parser


def resolve_config(args: argparse.Namespace, command: str) -> dict:
    """Merge CLI values over manifest values over built-in defaults."""
    manifest = {}
    if args.manifest:
        try:
            with open(args.manifest, "r", encoding="utf-8") as fh:
                manifest = json.load(fh)
        except OSError as exc:
            raise ParseError(f"cannot read manifest: {exc}", path=args.manifest) from None
        except json.JSONDecodeError as exc:
            raise ParseError(f"invalid manifest JSON: {exc.msg}",
                             path=args.manifest, line=exc.lineno) from None
        if manifest.get("command") != command:
            raise ParseError(
                f"manifest was written by {manifest.get('command')!r}, not {command!r}",
                path=args.manifest,
            )
    cfg = {"command": command, "version": __version__}
    for key, default in DEFAULTS[command].items():
        value = getattr(args, key, None)
        if value is None:
            value = manifest.get(key, default)
        cfg[key] = value
    if "region" in cfg and cfg["region"] is not None:
        cfg["region"] = list(_region_pair(cfg["region"]))
    if "tiles" in cfg and cfg["tiles"] is not None:
        cfg["tiles"] = [int(v) for v in cfg["tiles"]]
    return cfg


def _region_pair(value) -> tuple[float, float]:
    if isinstance(value, str):
        parts = value.lower().split("x")
        if len(parts) != 2:
            raise ParseError(f"region must look like WxH, got {value!r}")
        try:
            w, h = float(parts[0]), float(parts[1])
        except ValueError:
            raise ParseError(f"region must look like WxH, got {value!r}") from None
    elif isinstance(value, (list, tuple)) and len(value) == 2:
        w, h = float(value[0]), float(value[1])
    else:
        raise ParseError(f"cannot interpret region value {value!r}")
    if not (w > 0 and h > 0):
        raise ParseError(f"region dimensions must be positive, got {w}x{h}")
    return w, h


def _require(cfg: dict, key: str):
    if cfg.get(key) is None:
        raise ParseError(f"missing required input {key!r} (pass it as a flag or via --manifest)")
    return cfg[key]


def _grid_from_cfg(cfg: dict, region: Region) -> RadiusGrid:
    r_max = cfg["rmax"] if cfg["rmax"] is not None else min(region.width, region.height) / 4.0
    dr = cfg["dr"] if cfg["dr"] is not None else r_max / 50.0
    r_min = cfg["rmin"] if cfg["rmin"] is not None else dr
    return RadiusGrid(r_min=r_min, r_max=r_max, delta_r=dr)


def _correction_from_cfg(cfg: dict) -> EdgeCorrection:
    return EdgeCorrection(cfg["correction"])


def _ga_config(cfg: dict, seed: int | None = None) -> GaConfig:
    return GaConfig(
        population_max=cfg["pop_max"],
        population_init=cfg["pop_init"],
        generations=cfg["generations"],
        crossovers_per_generation=cfg["crossovers"],
        mutation_rate=cfg["mutation_rate"],
        elitism=cfg["elitism"],
        rng_seed=(cfg["seed"] if seed is None else seed) & _MASK64,
        mutation_unit=cfg["mutation_unit"],
    )


def write_manifest(cfg: dict, out_dir: Path) -> Path:
    path = out_dir / "manifest.json"
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(cfg, fh, sort_keys=True, indent=2)
        fh.write("\n")
    return path


# ---------------------------------------------------------------------------
# Subcommands


def cmd_coverage(cfg: dict, out_dir: Path) -> int:
    region = Region(*_region_pair(_require(cfg, "region")))
    fs = read_keypoints(_require(cfg, "keypoints"), region, dedup=cfg["dedup"])
    grid = _grid_from_cfg(cfg, region)
    intensity = len(fs) / region.area if cfg["poisson_scale"] == "intensity" else 1.0
    profile = k_estimate(fs, grid, _correction_from_cfg(cfg), poisson_intensity=intensity)
    alpha = profile_alpha(profile)

    out_dir.mkdir(parents=True, exist_ok=True)
    profile_path = out_dir / "kprofile.csv"
    with open(profile_path, "w", encoding="utf-8", newline="") as fh:
        fh.write("r,k_hat,k_poisson\n")
        for r, kh, kp in zip(profile.radii, profile.k_hat, profile.k_poisson):
            fh.write(f"{fmt(r)},{fmt(kh)},{fmt(kp)}\n")
    write_manifest(cfg, out_dir)

    print(f"n={len(fs)}")
    print(f"alpha={fmt(alpha)}")
    print(f"wrote {profile_path}")
    return EXIT_OK


def _format_grid_block(counts: np.ndarray) -> str:
    width = max(1, max(len(str(int(v))) for v in counts.ravel()))
    return "\n".join(" ".join(f"{int(v):>{width}}" for v in row) for row in counts)


def cmd_select(cfg: dict, out_dir: Path) -> int:
    region = Region(*_region_pair(_require(cfg, "region")))
    src = Path(_require(cfg, "keypoints"))
    fs = read_keypoints(src, region, dedup=cfg["dedup"])
    grid = _grid_from_cfg(cfg, region)
    correction = _correction_from_cfg(cfg)
    result = evolve(fs, _ga_config(cfg), grid, correction, threads=threads_from_env())

    out_dir.mkdir(parents=True, exist_ok=True)
    refined_path = out_dir / f"refined{src.suffix.lower() if src.suffix else '.csv'}"
    write_keypoints(result.refined.points, refined_path)

    history_path = out_dir / "history.csv"
    with open(history_path, "w", encoding="utf-8", newline="") as fh:
        fh.write("generation,best_alpha,selected_count\n")
        for rec in result.history:
            fh.write(f"{rec.generation},{fmt(rec.best_alpha)},{rec.selected_count}\n")

    nx, ny = cfg["tiles"]
    grid_path = out_dir / "grid_counts.txt"
    with open(grid_path, "w", encoding="utf-8") as fh:
        fh.write(f"tile counts {nx}x{ny}, original set (n={len(fs)}):\n")
        fh.write(_format_grid_block(grid_counts(fs, nx, ny)) + "\n\n")
        fh.write(f"tile counts {nx}x{ny}, refined set (n={len(result.refined)}):\n")
        fh.write(_format_grid_block(grid_counts(result.refined, nx, ny)) + "\n")
    write_manifest(cfg, out_dir)

    print(f"original n={len(fs)} alpha={fmt(result.original_alpha)}")
    print(f"refined n={len(result.refined)} alpha={fmt(result.refined_alpha)}")
    print(f"wrote {refined_path}")
    print(f"wrote {history_path}")
    print(f"wrote {grid_path}")
    return EXIT_OK


_RESULTS_HEADER = "pair,n_corrs,n_refined,align_original,align_refined,rmse_original,rmse_refined"


def _refine_correspondences(
    corrs: list[Correspondence],
    region: Region,
    cfg: dict,
    grid: RadiusGrid,
    correction: EdgeCorrection,
    ga_seed: int,
    threads: int,
) -> tuple[list[Correspondence], SelectionResult]:
    for i, c in enumerate(corrs):
        if not region.contains(c.p1):
            raise ParseError(
                f"correspondence {i} has p1 ({c.p1.x}, {c.p1.y}) outside the "
                f"{region.width}x{region.height} region"
            )
    fs = FeatureSet([c.p1 for c in corrs], region)
    # the refined subset must stay estimable, so degeneracy starts below 4
    result = evolve(fs, _ga_config(cfg, seed=ga_seed), grid, correction,
                    threads=threads, min_selected=4)
    refined = [c for c, keep in zip(corrs, result.mask) if keep]
    return refined, result


def _estimate(corrs: list[Correspondence], cfg: dict, rng: np.random.Generator):
    if cfg["ransac"] is not None:
        px, iters = cfg["ransac"]
        return ransac_homography(corrs, float(px), int(iters), rng)
    return estimate_homography(corrs)


def _evaluate_one_pair(
    pair_id: str,
    img1: GrayImage,
    img2: GrayImage,
    corrs: list[Correspondence],
    region: Region,
    cfg: dict,
    ga_seed: int,
    est_rng: np.random.Generator,
    threads: int,
) -> dict:
    grid = _grid_from_cfg(cfg, region)
    correction = _correction_from_cfg(cfg)
    refined, _ = _refine_correspondences(corrs, region, cfg, grid, correction, ga_seed, threads)
    h_orig = _estimate(corrs, cfg, est_rng)
    h_ref = _estimate(refined, cfg, est_rng)
    return {
        "pair": pair_id,
        "n_corrs": len(corrs),
        "n_refined": len(refined),
        "align_original": alignment_error(img1, img2, h_orig, cfg["threshold"]),
        "align_refined": alignment_error(img1, img2, h_ref, cfg["threshold"]),
        "rmse_original": reprojection_rmse(h_orig, corrs),
        "rmse_refined": reprojection_rmse(h_ref, corrs),
    }


def _append_result_row(path: Path, row: dict) -> None:
    new_file = not path.exists() or path.stat().st_size == 0
    with open(path, "a", encoding="utf-8", newline="") as fh:
        if new_file:
            fh.write(_RESULTS_HEADER + "\n")
        fh.write(
            f"{row['pair']},{row['n_corrs']},{row['n_refined']},"
            f"{row['align_original']},{row['align_refined']},"
            f"{fmt(row['rmse_original'])},{fmt(row['rmse_refined'])}\n"
        )
        fh.flush()


def _synthetic_image(width: int, height: int, rng: np.random.Generator) -> GrayImage:
    """A smooth random intensity field; good interpolation behavior under warps."""
    noise = rng.random((height, width))
    smooth = gaussian_filter(noise, sigma=6.0, mode="reflect")
    lo, hi = float(smooth.min()), float(smooth.max())
    if hi > lo:
        scaled = 30.0 + 200.0 * (smooth - lo) / (hi - lo)
    else:
        scaled = np.full_like(smooth, 128.0)
    return GrayImage(np.rint(scaled).astype(np.uint8))


def cmd_evaluate(cfg: dict, out_dir: Path) -> int:
    out_dir.mkdir(parents=True, exist_ok=True)
    results_path = out_dir / "results.csv"
    threads = threads_from_env()
    failures = 0
    successes = 0
    last_error = None

    if cfg["synthetic"] is not None:
        h_true = read_homography_file(cfg["synthetic"])
        region = Region(*_region_pair(_require(cfg, "region")))
        img_w, img_h = int(math.ceil(region.width)), int(math.ceil(region.height))
        for i in range(cfg["pairs"]):
            pair_id = f"synthetic-{i}"
            data_ss, ga_ss, est_ss = np.random.SeedSequence(
                entropy=cfg["seed"] & _MASK64, spawn_key=(i,)
            ).spawn(3)
            try:
                rng = np.random.default_rng(data_ss)
                corrs = synthesize_correspondences(
                    h_true, cfg["n_corrs"], region, rng,
                    noise_sigma=cfg["noise_sigma"],
                    outlier_fraction=cfg["outlier_fraction"],
                )
                img1 = _synthetic_image(img_w, img_h, rng)
                img2 = warp_image(img1, h_true, img_w, img_h)
                row = _evaluate_one_pair(
                    pair_id, img1, img2, corrs, region, cfg,
                    ga_seed=int(ga_ss.generate_state(1, dtype=np.uint64)[0]),
                    est_rng=np.random.default_rng(est_ss),
                    threads=threads,
                )
            except (CoverageGaError, np.linalg.LinAlgError) as exc:
                print(f"pair {pair_id}: error: {exc}", file=sys.stderr)
                failures += 1
                last_error = exc
                continue
            _append_result_row(results_path, row)
            successes += 1
            print(
                f"pair {pair_id}: align_original={row['align_original']} "
                f"align_refined={row['align_refined']} "
                f"rmse_original={fmt(row['rmse_original'])} "
                f"rmse_refined={fmt(row['rmse_refined'])}"
            )
    else:
        img1_path = Path(_require(cfg, "image1"))
        img2 = read_pgm(_require(cfg, "image2"))
        img1 = read_pgm(img1_path)
        corrs = read_correspondences_csv(_require(cfg, "corrs"))
        if cfg["region"] is not None:
            region = Region(*_region_pair(cfg["region"]))
        else:
            region = Region(float(img1.width), float(img1.height))
        row = _evaluate_one_pair(
            img1_path.stem, img1, img2, corrs, region, cfg,
            ga_seed=cfg["seed"],
            est_rng=np.random.default_rng(cfg["seed"] & _MASK64),
            threads=threads,
        )
        _append_result_row(results_path, row)
        successes += 1
        print(
            f"pair {img1_path.stem}: align_original={row['align_original']} "
            f"align_refined={row['align_refined']} "
            f"rmse_original={fmt(row['rmse_original'])} "
            f"rmse_refined={fmt(row['rmse_refined'])}"
        )

    write_manifest(cfg, out_dir)
    if successes == 0 and failures > 0:
        if isinstance(last_error, (InsufficientPointsError, InsufficientCorrespondencesError)):
            return EXIT_DEGENERATE
        return EXIT_NUMERICAL
    print(f"wrote {results_path}")
    return EXIT_OK


def _ttest_text(label_a: str, label_b: str, a: SampleSummary, b: SampleSummary,
                report, mc=None) -> str:
    lines = [
        f"{'':24}{label_a:>16}{label_b:>16}",
        f"{'Mean':<24}{a.mean:>16.4f}{b.mean:>16.4f}",
        f"{'Standard Deviation':<24}{a.sd:>16.4f}{b.sd:>16.4f}",
        f"{'Observations':<24}{a.n:>16d}{b.n:>16d}",
        f"{'df':<24}{report.df:>16.1f}",
        f"{'t Stat':<24}{report.t_stat:>16.4f}",
        f"{'P(T<=t) one-tail':<24}{report.p_one_tail:>16.4e}",
        f"{'t Critical one-tail':<24}{report.t_crit_one:>16.4f}",
        f"{'P(T<=t) two-tail':<24}{report.p_two_tail:>16.4e}",
        f"{'t Critical two-tail':<24}{report.t_crit_two:>16.4f}",
    ]
    if mc is not None:
        lines.append(f"{'McNemar b, c, z':<24}{mc.b:>8d}{mc.c:>8d}{mc.z:>16.4f}")
    return "\n".join(lines) + "\n"


def _read_summary_csv(path) -> list[tuple[str, SampleSummary]]:
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"label", "mean", "sd", "n"} <= set(reader.fieldnames):
            raise ParseError("summary CSV needs columns label,mean,sd,n", path=path)
        for i, row in enumerate(reader, start=2):
            try:
                rows.append(
                    (row["label"],
                     SampleSummary(float(row["mean"]), float(row["sd"]), int(row["n"])))
                )
            except (TypeError, ValueError) as exc:
                raise ParseError(f"bad summary row: {exc}", path=path, line=i) from None
    if len(rows) != 2:
        raise ParseError(f"summary CSV needs exactly 2 rows, got {len(rows)}", path=path)
    return rows


def _read_paired_columns(path) -> list[tuple[str, list[float], list[float]]]:
    """Metric pairs from columns named <metric>_original / <metric>_refined."""
    with open(path, "r", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise ParseError("results CSV is empty", path=path)
        fields = reader.fieldnames
        bases = [f[: -len("_original")] for f in fields
                 if f.endswith("_original") and f[: -len("_original")] + "_refined" in fields]
        if not bases:
            raise ParseError(
                "no <metric>_original / <metric>_refined column pairs found", path=path
            )
        columns: dict[str, list[float]] = {b + s: [] for b in bases for s in ("_original", "_refined")}
        for lineno, row in enumerate(reader, start=2):
            for name, values in columns.items():
                cell = row.get(name)
                if cell is None or cell.strip() == "":
                    continue
                try:
                    values.append(float(cell))
                except ValueError:
                    raise ParseError(
                        f"column {name!r} has non-numeric value {cell!r}",
                        path=path, line=lineno,
                    ) from None
    out = []
    for b in bases:
        orig, ref = columns[b + "_original"], columns[b + "_refined"]
        if len(orig) != len(ref):
            raise ParseError(
                f"columns {b}_original and {b}_refined have unequal lengths "
                f"({len(orig)} vs {len(ref)})",
                path=path,
            )
        if len(orig) < 2:
            raise ParseError(f"metric {b!r} needs at least 2 rows, got {len(orig)}", path=path)
        out.append((b, orig, ref))
    return out


def cmd_stats(cfg: dict, out_dir: Path) -> int:
    results = _require(cfg, "results")
    out_dir.mkdir(parents=True, exist_ok=True)
    report_rows = []

    if cfg["summary"]:
        (label_a, a), (label_b, b) = _read_summary_csv(results)
        report = t_test_two_sample(a, b, welch=cfg["welch"])
        text = _ttest_text(label_a, label_b, a, b, report)
        with open(out_dir / "ttest_summary.txt", "w", encoding="utf-8") as fh:
            fh.write(text)
        print(text, end="")
        report_rows.append(("summary", a, b, report, None))
    else:
        for metric, orig, ref in _read_paired_columns(results):
            a = SampleSummary.from_values(orig)
            b = SampleSummary.from_values(ref)
            report = t_test_two_sample(a, b, welch=cfg["welch"])
            mc = mcnemar(*paired_outcomes(orig, ref, tie_epsilon=cfg["tie_epsilon"]))
            text = _ttest_text("Original Set", "Refined Set", a, b, report, mc)
            with open(out_dir / f"ttest_{metric}.txt", "w", encoding="utf-8") as fh:
                fh.write(text)
            print(f"[{metric}]")
            print(text, end="")
            report_rows.append((metric, a, b, report, mc))

    report_path = out_dir / "report.csv"
    with open(report_path, "w", encoding="utf-8", newline="") as fh:
        fh.write(
            "metric,mean_original,sd_original,n_original,mean_refined,sd_refined,n_refined,"
            "t_stat,df,p_one_tail,p_two_tail,t_crit_one,t_crit_two,"
            "mcnemar_b,mcnemar_c,mcnemar_z\n"
        )
        for metric, a, b, report, mc in report_rows:
            mc_cells = f"{mc.b},{mc.c},{fmt(mc.z)}" if mc is not None else ",,"
            fh.write(
                f"{metric},{fmt(a.mean)},{fmt(a.sd)},{a.n},{fmt(b.mean)},{fmt(b.sd)},{b.n},"
                f"{fmt(report.t_stat)},{fmt(report.df)},{fmt(report.p_one_tail)},"
                f"{fmt(report.p_two_tail)},{fmt(report.t_crit_one)},{fmt(report.t_crit_two)},"
                f"{mc_cells}\n"
            )
    write_manifest(cfg, out_dir)
    print(f"wrote {report_path}")
    return EXIT_OK


# ---------------------------------------------------------------------------


_HANDLERS = {
    "coverage": cmd_coverage,
    "select": cmd_select,
    "evaluate": cmd_evaluate,
    "stats": cmd_stats,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    out_dir = Path(args.out) if args.out is not None else Path(".")
    try:
        cfg = resolve_config(args, args.command)
        return _HANDLERS[args.command](cfg, out_dir)
    except ParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (InsufficientPointsError, InsufficientCorrespondencesError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    except (DegenerateConfigurationError, PointAtInfinityError, np.linalg.LinAlgError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
