#!/usr/bin/env python3
"""Regenerate the deterministic test fixtures under tests/fixtures/."""

from pathlib import Path

import numpy as np
from scipy.ndimage import gaussian_filter

import sys

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from coverage_ga.cli import fmt  # noqa: E402
from coverage_ga.homography import (  # noqa: E402
    GrayImage,
    Homography,
    write_homography_file,
    write_pgm,
)

FIXTURES = Path(__file__).resolve().parents[1] / "tests" / "fixtures"


def write_keypoint_csv(path, xy):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("x,y\n")
        for x, y in xy:
            fh.write(f"{fmt(x)},{fmt(y)}\n")


def main():
    FIXTURES.mkdir(parents=True, exist_ok=True)

    # 50 dispersed + 50 tightly clustered keypoints in a 500x500 region.
    rng = np.random.default_rng(7)
    dispersed = rng.random((50, 2)) * 500.0
    cluster = np.array([340.0, 260.0]) + rng.normal(0.0, 2.0, (50, 2))
    cluster = np.clip(cluster, 0.0, 500.0)
    write_keypoint_csv(FIXTURES / "cluster_dispersed.csv", np.vstack([dispersed, cluster]))

    # Minimal two-point set at distance 10 inside a 100x100 region.
    write_keypoint_csv(FIXTURES / "two_points.csv", [(40.0, 50.0), (50.0, 50.0)])

    # Smooth 64x64 grayscale image for warp/alignment tests.
    rng = np.random.default_rng(11)
    noise = rng.random((64, 64))
    smooth = gaussian_filter(noise, sigma=6.0, mode="reflect")
    lo, hi = smooth.min(), smooth.max()
    pixels = np.rint(30.0 + 200.0 * (smooth - lo) / (hi - lo)).astype(np.uint8)
    write_pgm(GrayImage(pixels), FIXTURES / "smooth64.pgm")

    write_homography_file(Homography.identity(), FIXTURES / "identity_h.txt")

    # Mild projective transform used as synthetic-mode ground truth.
    true_h = Homography(
        [[1.02, 0.01, 3.0], [-0.008, 0.99, -2.0], [1.0e-4, -5.0e-5, 1.0]]
    )
    write_homography_file(true_h, FIXTURES / "true_h.txt")

    # Well-spread identity correspondences inside the 64x64 image.
    pts = [
        (6.0, 6.0), (32.0, 5.0), (57.0, 7.0), (58.0, 30.0),
        (56.0, 56.0), (30.0, 58.0), (5.0, 55.0), (7.0, 31.0),
        (22.0, 22.0), (42.0, 21.0), (43.0, 43.0), (20.0, 44.0),
    ]
    with open(FIXTURES / "corrs_identity.csv", "w", encoding="utf-8", newline="") as fh:
        fh.write("x1,y1,x2,y2\n")
        for x, y in pts:
            fh.write(f"{fmt(x)},{fmt(y)},{fmt(x)},{fmt(y)}\n")

    print(f"fixtures written to {FIXTURES}")


if __name__ == "__main__":
    main()
