"""Planar homography estimation, image warping and alignment scoring.

Also holds the 8-bit grayscale image container plus the on-disk formats it
travels in: binary PGM images, 3x3 plain-text transform files, and
x1,y1,x2,y2 correspondence CSVs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import (
    DegenerateConfigurationError,
    InsufficientCorrespondencesError,
    ParseError,
    PointAtInfinityError,
)
from .pointset import Point2, Region

__all__ = [
    "Homography",
    "Correspondence",
    "GrayImage",
    "estimate_homography",
    "apply",
    "apply_many",
    "warp_image",
    "saturating_subtract",
    "alignment_error",
    "reprojection_rmse",
    "synthesize_correspondences",
    "ransac_homography",
    "read_pgm",
    "write_pgm",
    "read_homography_file",
    "write_homography_file",
    "read_correspondences_csv",
    "write_correspondences_csv",
]

_W_EPS = 1e-12  # projective scale below which a mapped point counts as at infinity


class Homography:
    """A 3x3 invertible projective transform.

    The stored matrix is scale-normalized: the bottom-right entry is 1
    whenever it is usably nonzero, otherwise the matrix has unit Frobenius
    norm with its largest-magnitude entry positive.
    """

    __slots__ = ("m",)

    def __init__(self, m):
        m = np.array(m, dtype=np.float64)
        if m.shape != (3, 3):
            raise ValueError(f"homography matrix must be 3x3, got shape {m.shape}")
        if not np.all(np.isfinite(m)):
            raise ValueError("homography matrix entries must be finite")
        norm = float(np.linalg.norm(m))
        if norm == 0.0:
            raise DegenerateConfigurationError("homography matrix is zero")
        if abs(m[2, 2]) > 1e-12 * norm:
            m = m / m[2, 2]
        else:
            m = m / norm
            flat = m.ravel()
            if flat[int(np.argmax(np.abs(flat)))] < 0:
                m = -m
        if np.linalg.cond(m) > 1e12:
            raise DegenerateConfigurationError("homography matrix is not invertible")
        m.setflags(write=False)
        self.m = m

    @classmethod
    def identity(cls) -> "Homography":
        return cls(np.eye(3))

    def inverse(self) -> "Homography":
        return Homography(np.linalg.inv(self.m))

    def __repr__(self) -> str:
        rows = "; ".join(" ".join(f"{v:.6g}" for v in row) for row in self.m)
        return f"Homography([{rows}])"


@dataclass(frozen=True)
class Correspondence:
    """A matched point pair: p1 in the first image, p2 in the second."""

    p1: Point2
    p2: Point2


class GrayImage:
    """8-bit grayscale image; pixels held in a read-only (height, width) array."""

    __slots__ = ("pixels",)

    def __init__(self, pixels):
        a = np.asarray(pixels)
        if a.ndim != 2 or a.size == 0:
            raise ValueError(f"pixels must be a non-empty 2-D array, got shape {a.shape}")
        if a.dtype != np.uint8:
            if np.any((a < 0) | (a > 255)):
                raise ValueError("pixel intensities must be within 0..255")
            a = a.astype(np.uint8)
        else:
            a = a.copy()
        a.setflags(write=False)
        self.pixels = a

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @classmethod
    def filled(cls, width: int, height: int, value: int = 0) -> "GrayImage":
        return cls(np.full((height, width), value, dtype=np.uint8))

    def __repr__(self) -> str:
        return f"GrayImage({self.width}x{self.height})"


def _similarity_normalization(points: np.ndarray) -> np.ndarray:
    """Similarity transform taking points to zero centroid and mean distance sqrt(2)."""
    centroid = points.mean(axis=0)
    mean_dist = float(np.hypot(*(points - centroid).T).mean())
    if mean_dist <= 0.0:
        raise DegenerateConfigurationError("correspondence points are all coincident")
    s = math.sqrt(2.0) / mean_dist
    return np.array([[s, 0.0, -s * centroid[0]], [0.0, s, -s * centroid[1]], [0.0, 0.0, 1.0]])


def _to_xy(points: Sequence[Point2]) -> np.ndarray:
    return np.array([(p.x, p.y) for p in points], dtype=np.float64)


def estimate_homography(corrs: Sequence[Correspondence]) -> Homography:
    """Least-squares homography mapping each p1 onto its p2.

    Both sides are similarity-normalized before the homogeneous system is
    solved by SVD, which keeps the solution stable at pixel coordinate
    scales; the result is denormalized and scale-normalized. Raises
    InsufficientCorrespondencesError below 4 pairs and
    DegenerateConfigurationError when the system is rank-deficient
    (e.g. 3 of the 4 minimal points collinear).
    """
    if len(corrs) < 4:
        raise InsufficientCorrespondencesError(
            f"homography estimation needs at least 4 correspondences, got {len(corrs)}"
        )
    p1 = _to_xy([c.p1 for c in corrs])
    p2 = _to_xy([c.p2 for c in corrs])
    t1 = _similarity_normalization(p1)
    t2 = _similarity_normalization(p2)
    q1 = p1 @ t1[:2, :2].T + t1[:2, 2]
    q2 = p2 @ t2[:2, :2].T + t2[:2, 2]

    n = len(corrs)
    a = np.zeros((2 * n, 9), dtype=np.float64)
    x, y = q1[:, 0], q1[:, 1]
    u, v = q2[:, 0], q2[:, 1]
    a[0::2, 3] = -x
    a[0::2, 4] = -y
    a[0::2, 5] = -1.0
    a[0::2, 6] = v * x
    a[0::2, 7] = v * y
    a[0::2, 8] = v
    a[1::2, 0] = x
    a[1::2, 1] = y
    a[1::2, 2] = 1.0
    a[1::2, 6] = -u * x
    a[1::2, 7] = -u * y
    a[1::2, 8] = -u

    _, singular, vt = np.linalg.svd(a)
    if singular[7] <= 1e-10 * singular[0]:
        raise DegenerateConfigurationError("correspondence configuration is rank-deficient")
    h_norm = vt[-1].reshape(3, 3)
    return Homography(np.linalg.inv(t2) @ h_norm @ t1)


def apply(h: Homography, p: Point2) -> Point2:
    """Map a point through the homography, dividing by the projective scale."""
    v = h.m @ np.array([p.x, p.y, 1.0])
    if abs(v[2]) < _W_EPS:
        raise PointAtInfinityError(f"point ({p.x}, {p.y}) maps to infinity")
    return Point2(float(v[0] / v[2]), float(v[1] / v[2]))


def apply_many(h: Homography, xy: np.ndarray) -> np.ndarray:
    """Vectorized apply() over an (N, 2) coordinate array."""
    xy = np.asarray(xy, dtype=np.float64)
    w = h.m[2, 0] * xy[:, 0] + h.m[2, 1] * xy[:, 1] + h.m[2, 2]
    if np.any(np.abs(w) < _W_EPS):
        raise PointAtInfinityError("at least one point maps to infinity")
    px = (h.m[0, 0] * xy[:, 0] + h.m[0, 1] * xy[:, 1] + h.m[0, 2]) / w
    py = (h.m[1, 0] * xy[:, 0] + h.m[1, 1] * xy[:, 1] + h.m[1, 2]) / w
    return np.stack([px, py], axis=1)


def warp_image(img: GrayImage, h: Homography, out_w: int, out_h: int,
               interpolation: str = "bilinear") -> GrayImage:
    """Warp img into an out_w x out_h frame so that output(p) = img(h^-1(p)).

    Inverse-mapping warp with bilinear (default) or nearest sampling;
    anything sampled outside the source contributes 0. Nearest mode is
    exactly reproducible and meant for oracle comparisons.
    """
    if out_w < 1 or out_h < 1:
        raise ValueError(f"output size must be positive, got {out_w}x{out_h}")
    if interpolation not in ("bilinear", "nearest"):
        raise ValueError(f"unknown interpolation {interpolation!r}")
    hinv = h.inverse().m
    xs, ys = np.meshgrid(np.arange(out_w, dtype=np.float64),
                         np.arange(out_h, dtype=np.float64))
    denom = hinv[2, 0] * xs + hinv[2, 1] * ys + hinv[2, 2]
    degenerate = np.abs(denom) < _W_EPS
    denom = np.where(degenerate, 1.0, denom)
    sx = (hinv[0, 0] * xs + hinv[0, 1] * ys + hinv[0, 2]) / denom
    sy = (hinv[1, 0] * xs + hinv[1, 1] * ys + hinv[1, 2]) / denom
    # Degenerate rays sample nothing.
    sx = np.where(degenerate, -1e9, sx)
    sy = np.where(degenerate, -1e9, sy)

    src = img.pixels
    in_w, in_h = img.width, img.height

    if interpolation == "nearest":
        xi = np.rint(sx).astype(np.int64)
        yi = np.rint(sy).astype(np.int64)
        valid = (xi >= 0) & (xi < in_w) & (yi >= 0) & (yi < in_h)
        out = np.zeros((out_h, out_w), dtype=np.uint8)
        out[valid] = src[yi[valid], xi[valid]]
        return GrayImage(out)

    x0 = np.floor(sx).astype(np.int64)
    y0 = np.floor(sy).astype(np.int64)
    fx = sx - x0
    fy = sy - y0
    acc = np.zeros((out_h, out_w), dtype=np.float64)
    for dx, dy, weight in (
        (0, 0, (1 - fx) * (1 - fy)),
        (1, 0, fx * (1 - fy)),
        (0, 1, (1 - fx) * fy),
        (1, 1, fx * fy),
    ):
        xn = x0 + dx
        yn = y0 + dy
        valid = (xn >= 0) & (xn < in_w) & (yn >= 0) & (yn < in_h)
        vals = np.zeros_like(acc)
        vals[valid] = src[yn[valid], xn[valid]]
        acc += weight * vals
    out = np.clip(np.rint(acc), 0, 255).astype(np.uint8)
    return GrayImage(out)


def saturating_subtract(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Per-pixel a - b clamped at zero on unsigned 8-bit data."""
    d = a.astype(np.int16) - b.astype(np.int16)
    return np.maximum(d, 0).astype(np.uint8)


def alignment_error(img1: GrayImage, img2: GrayImage, h: Homography,
                    nonzero_threshold: int = 0) -> int:
    """Residual pixel count of the chained difference-image pipeline.

    img1 is warped into img2's frame (i1w) and three clamped subtractions
    follow: d1 = img2 - i1w, d2 = img2 - d1, d3 = i1w - d2. The chain
    cancels wherever the pair is aligned, leaves the non-overlap region
    dark, and exposes misalignment as bright d3 pixels, counted against
    the threshold. Larger counts mean a worse homography.
    """
    i1w = warp_image(img1, h, img2.width, img2.height).pixels
    d1 = saturating_subtract(img2.pixels, i1w)
    d2 = saturating_subtract(img2.pixels, d1)
    d3 = saturating_subtract(i1w, d2)
    return int(np.count_nonzero(d3 > nonzero_threshold))


def reprojection_rmse(h: Homography, corrs: Sequence[Correspondence]) -> float:
    """Root-mean-square distance between each mapped p1 and its p2."""
    if len(corrs) == 0:
        raise ValueError("correspondence list is empty")
    mapped = apply_many(h, _to_xy([c.p1 for c in corrs]))
    target = _to_xy([c.p2 for c in corrs])
    err_sq = ((mapped - target) ** 2).sum(axis=1)
    return float(np.sqrt(err_sq.mean()))


def synthesize_correspondences(
    h: Homography,
    count: int,
    region: Region,
    rng: np.random.Generator,
    noise_sigma: float = 0.0,
    outlier_fraction: float = 0.0,
) -> list[Correspondence]:
    """Random in-region points mapped through a known homography.

    Gaussian pixel noise perturbs the mapped side; a fraction of pairs can
    be replaced by uniform outliers for robustness tests.
    """
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    dims = np.array([region.width, region.height])
    xy1 = rng.random((count, 2)) * dims
    xy2 = apply_many(h, xy1)
    if noise_sigma > 0.0:
        xy2 = xy2 + rng.normal(0.0, noise_sigma, xy2.shape)
    n_out = int(round(outlier_fraction * count))
    if n_out > 0:
        idx = rng.choice(count, size=n_out, replace=False)
        xy2[idx] = rng.random((n_out, 2)) * dims
    return [
        Correspondence(Point2(float(a[0]), float(a[1])), Point2(float(b[0]), float(b[1])))
        for a, b in zip(xy1, xy2)
    ]


def _reprojection_errors_safe(h: Homography, xy1: np.ndarray, xy2: np.ndarray) -> np.ndarray:
    """Per-pair reprojection distances; pairs mapping to infinity get +inf."""
    w = h.m[2, 0] * xy1[:, 0] + h.m[2, 1] * xy1[:, 1] + h.m[2, 2]
    bad = np.abs(w) < _W_EPS
    w = np.where(bad, 1.0, w)
    px = (h.m[0, 0] * xy1[:, 0] + h.m[0, 1] * xy1[:, 1] + h.m[0, 2]) / w
    py = (h.m[1, 0] * xy1[:, 0] + h.m[1, 1] * xy1[:, 1] + h.m[1, 2]) / w
    err = np.hypot(px - xy2[:, 0], py - xy2[:, 1])
    return np.where(bad, np.inf, err)


def ransac_homography(
    corrs: Sequence[Correspondence],
    inlier_threshold: float,
    iterations: int,
    rng: np.random.Generator,
) -> Homography:
    """Robust estimate: best 4-point hypothesis by inlier count, refit on inliers."""
    if len(corrs) < 4:
        raise InsufficientCorrespondencesError(
            f"RANSAC needs at least 4 correspondences, got {len(corrs)}"
        )
    if inlier_threshold <= 0 or iterations < 1:
        raise ValueError("inlier threshold must be positive and iterations >= 1")
    xy1 = _to_xy([c.p1 for c in corrs])
    xy2 = _to_xy([c.p2 for c in corrs])
    best_inliers = None
    best_count = -1
    for _ in range(iterations):
        pick = rng.choice(len(corrs), size=4, replace=False)
        try:
            cand = estimate_homography([corrs[i] for i in pick])
        except DegenerateConfigurationError:
            continue
        inliers = _reprojection_errors_safe(cand, xy1, xy2) <= inlier_threshold
        count = int(inliers.sum())
        if count > best_count:
            best_count = count
            best_inliers = inliers
    if best_inliers is None or best_count < 4:
        raise DegenerateConfigurationError("RANSAC found no valid model")
    return estimate_homography([corrs[i] for i in np.flatnonzero(best_inliers)])


# ---------------------------------------------------------------------------
# File formats


def write_pgm(img: GrayImage, path) -> None:
    """Write a binary PGM (P5, maxval 255)."""
    with open(path, "wb") as fh:
        fh.write(f"P5\n{img.width} {img.height}\n255\n".encode("ascii"))
        fh.write(img.pixels.tobytes())


def read_pgm(path) -> GrayImage:
    """Read a binary PGM (P5) with maxval <= 255; '#' comments allowed."""
    with open(path, "rb") as fh:
        data = fh.read()

    pos = 0

    def next_token():
        nonlocal pos
        while pos < len(data):
            ch = data[pos : pos + 1]
            if ch == b"#":
                while pos < len(data) and data[pos : pos + 1] not in (b"\n", b"\r"):
                    pos += 1
            elif ch.isspace():
                pos += 1
            else:
                break
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise ParseError("unexpected end of PGM header", path=path)
        return data[start:pos]

    if next_token() != b"P5":
        raise ParseError("not a binary PGM (missing P5 magic)", path=path)
    try:
        width = int(next_token())
        height = int(next_token())
        maxval = int(next_token())
    except ValueError as exc:
        raise ParseError(f"malformed PGM header: {exc}", path=path) from None
    if width < 1 or height < 1:
        raise ParseError(f"invalid PGM dimensions {width}x{height}", path=path)
    if not (0 < maxval <= 255):
        raise ParseError(f"unsupported PGM maxval {maxval} (need <= 255)", path=path)
    pos += 1  # single whitespace byte after maxval
    raster = data[pos : pos + width * height]
    if len(raster) != width * height:
        raise ParseError(
            f"PGM raster truncated: expected {width * height} bytes, got {len(raster)}",
            path=path,
        )
    pixels = np.frombuffer(raster, dtype=np.uint8).reshape(height, width)
    return GrayImage(pixels)


def write_homography_file(h: Homography, path) -> None:
    """Write a 3x3 transform as 3 lines of 3 whitespace-separated reals."""
    with open(path, "w", encoding="utf-8") as fh:
        for row in h.m:
            fh.write(" ".join(format(v, ".17g") for v in row) + "\n")


def read_homography_file(path) -> Homography:
    """Read a 3x3 transform stored row-major as whitespace-separated reals."""
    with open(path, "r", encoding="utf-8") as fh:
        tokens = fh.read().split()
    if len(tokens) != 9:
        raise ParseError(f"expected 9 matrix entries, got {len(tokens)}", path=path)
    try:
        values = [float(t) for t in tokens]
    except ValueError:
        raise ParseError("matrix entries must be real numbers", path=path) from None
    return Homography(np.array(values).reshape(3, 3))


def write_correspondences_csv(corrs: Sequence[Correspondence], path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("x1,y1,x2,y2\n")
        for c in corrs:
            fh.write(
                ",".join(format(v, ".17g") for v in (c.p1.x, c.p1.y, c.p2.x, c.p2.y)) + "\n"
            )


def read_correspondences_csv(path) -> list[Correspondence]:
    """Read x1,y1,x2,y2 rows; a first line with no numeric field is a header."""
    corrs: list[Correspondence] = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            fields = [f.strip() for f in line.split(",")]
            try:
                values = [float(f) for f in fields]
                ok = len(values) == 4 and all(math.isfinite(v) for v in values)
            except ValueError:
                if lineno == 1 and not any(_is_number(f) for f in fields):
                    continue  # header row
                ok = False
                values = []
            if not ok:
                raise ParseError(
                    f"expected 4 finite comma-separated numbers, got {line!r}",
                    path=path,
                    line=lineno,
                )
            corrs.append(
                Correspondence(Point2(values[0], values[1]), Point2(values[2], values[3]))
            )
    return corrs


def _is_number(text: str) -> bool:
    try:
        float(text)
    except ValueError:
        return False
    return True
