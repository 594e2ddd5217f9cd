"""Ground-height estimation from segmented ground points.

A RANSAC plane gives the scene's global elevation; a per-cell height grid
interpolated bilinearly between cell centers captures local relief such as
curbs and sidewalks. Queries fall back to the plane wherever the grid has
no support.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from lidarlabel.geometry import PointCloud

DEFAULT_CELL_SIZE = 0.5
DEFAULT_INLIER_THRESHOLD = 0.1
DEFAULT_ITERATIONS = 200


def _as_xyz(points) -> np.ndarray:
    if isinstance(points, PointCloud):
        return points.xyz
    arr = np.asarray(points, dtype=float)
    return arr[:, :3]


def fit_plane_ransac(
    ground_points,
    inlier_threshold: float = DEFAULT_INLIER_THRESHOLD,
    iterations: int = DEFAULT_ITERATIONS,
    seed: int = 0,
):
    """Fit a plane a*x+b*y+c*z+d=0 with unit normal, c > 0.

    RANSAC consensus over random 3-point samples, followed by a least
    squares refit on the winning inlier set. Deterministic for a given
    seed.
    """
    if inlier_threshold <= 0:
        raise ValueError("inlier_threshold must be > 0")
    xyz = _as_xyz(ground_points)
    n = len(xyz)
    if n < 3:
        raise ValueError("need at least 3 points to fit a plane")
    rng = np.random.default_rng(seed)
    best_count = -1
    best_inliers = None
    for _ in range(iterations):
        idx = rng.choice(n, size=3, replace=False)
        p0, p1, p2 = xyz[idx]
        normal = np.cross(p1 - p0, p2 - p0)
        norm = np.linalg.norm(normal)
        if norm < 1e-12:
            continue  # collinear sample
        normal = normal / norm
        d = -float(normal @ p0)
        dist = np.abs(xyz @ normal + d)
        count = int(np.count_nonzero(dist <= inlier_threshold))
        if count > best_count:
            best_count = count
            best_inliers = dist <= inlier_threshold
    if best_inliers is None:
        raise ValueError("all points collinear, no plane fit possible")
    return _least_squares_plane(xyz[best_inliers])


def _least_squares_plane(xyz: np.ndarray):
    """Total-least-squares plane through a point set via SVD."""
    centroid = xyz.mean(axis=0)
    _, _, vt = np.linalg.svd(xyz - centroid, full_matrices=False)
    normal = vt[-1]
    if normal[2] < 0:
        normal = -normal
    elif normal[2] == 0:
        # vertical plane cannot model ground; nudge deterministically
        raise ValueError("degenerate vertical ground plane")
    d = -float(normal @ centroid)
    a, b, c = (float(v) for v in normal)
    return (a, b, c, d)


def plane_height_at(plane, x: float, y: float) -> float:
    a, b, c, d = plane
    return -(a * x + b * y + d) / c


@dataclass
class GroundModel:
    """Height grid over an x-y extent plus a plane for fallback queries."""

    grid: np.ndarray  # (ny, nx) cell-mean heights, NaN where unsupported
    cell_size: float
    x0: float  # min corner of the extent
    y0: float
    plane: tuple

    def to_dict(self) -> dict:
        grid = [[None if math.isnan(v) else v for v in row] for row in self.grid.tolist()]
        return {
            "version": 1,
            "cell_size": self.cell_size,
            "x0": self.x0,
            "y0": self.y0,
            "plane": list(self.plane),
            "grid": grid,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "GroundModel":
        if data.get("version") != 1:
            raise ValueError(f"unsupported ground model version {data.get('version')!r}")
        grid = np.array(
            [[math.nan if v is None else float(v) for v in row] for row in data["grid"]],
            dtype=float,
        )
        return cls(
            grid=grid,
            cell_size=float(data["cell_size"]),
            x0=float(data["x0"]),
            y0=float(data["y0"]),
            plane=tuple(float(v) for v in data["plane"]),
        )

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh)

    @classmethod
    def load(cls, path) -> "GroundModel":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def build_height_grid(
    ground_points,
    cell_size: float = DEFAULT_CELL_SIZE,
    inlier_threshold: float = DEFAULT_INLIER_THRESHOLD,
    iterations: int = DEFAULT_ITERATIONS,
    seed: int = 0,
) -> GroundModel:
    """Average ground points into cells and fit the fallback plane."""
    if cell_size <= 0:
        raise ValueError("cell_size must be > 0")
    xyz = _as_xyz(ground_points)
    if len(xyz) == 0:
        raise ValueError("no ground points")
    plane = fit_plane_ransac(xyz, inlier_threshold, iterations, seed)
    x0 = float(xyz[:, 0].min())
    y0 = float(xyz[:, 1].min())
    nx = max(1, int(math.ceil((xyz[:, 0].max() - x0) / cell_size)) or 1)
    ny = max(1, int(math.ceil((xyz[:, 1].max() - y0) / cell_size)) or 1)
    ix = np.clip(((xyz[:, 0] - x0) / cell_size).astype(int), 0, nx - 1)
    iy = np.clip(((xyz[:, 1] - y0) / cell_size).astype(int), 0, ny - 1)
    sums = np.zeros((ny, nx))
    counts = np.zeros((ny, nx))
    np.add.at(sums, (iy, ix), xyz[:, 2])
    np.add.at(counts, (iy, ix), 1.0)
    grid = np.full((ny, nx), np.nan)
    supported = counts > 0
    grid[supported] = sums[supported] / counts[supported]
    return GroundModel(grid=grid, cell_size=cell_size, x0=x0, y0=y0, plane=plane)


def ground_height_at(model: GroundModel, x: float, y: float) -> float:
    """Bilinear height between supported cell centers; plane elsewhere.

    A query contributes weight to up to four surrounding cell centers; if
    any positively weighted neighbor is missing or outside the grid the
    query falls back to the plane (hard switch, no feathering).
    """
    if not (math.isfinite(x) and math.isfinite(y)):
        raise ValueError("query coordinates must be finite")
    ny, nx = model.grid.shape
    gx = (x - model.x0) / model.cell_size - 0.5
    gy = (y - model.y0) / model.cell_size - 0.5
    i0 = math.floor(gx)
    j0 = math.floor(gy)
    fx = gx - i0
    fy = gy - j0
    total = 0.0
    height = 0.0
    for dj, wy in ((0, 1.0 - fy), (1, fy)):
        for di, wx in ((0, 1.0 - fx), (1, fx)):
            w = wx * wy
            if w <= 1e-12:
                continue
            ci = i0 + di
            cj = j0 + dj
            if not (0 <= ci < nx and 0 <= cj < ny):
                return plane_height_at(model.plane, x, y)
            v = model.grid[cj, ci]
            if math.isnan(v):
                return plane_height_at(model.plane, x, y)
            total += w
            height += w * v
    if total <= 0.0:
        return plane_height_at(model.plane, x, y)
    return height / total
