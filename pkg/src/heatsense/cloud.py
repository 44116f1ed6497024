"""Candidate point clouds and nearest-neighbor stencils.

Point clouds are the discretization substrate and, at the same time, the
universe of candidate sensor locations: every cloud point may carry a
sensor. Supported layouts are equispaced/jittered 1D intervals and
tensor-product 2D grids with per-edge boundary tagging.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

# Boundary tags. Dirichlet wins over Neumann wherever two edges meet.
INTERIOR = 0
DIRICHLET = 1
NEUMANN = 2

TAG_CHARS = {INTERIOR: "I", DIRICHLET: "D", NEUMANN: "N"}
CHAR_TAGS = {v: k for k, v in TAG_CHARS.items()}

_EDGES = ("bottom", "top", "left", "right")
_EDGE_NORMALS = {
    "bottom": (0.0, -1.0),
    "top": (0.0, 1.0),
    "left": (-1.0, 0.0),
    "right": (1.0, 0.0),
}


@dataclass
class PointCloud:
    """Candidate nodes with boundary tags and outward normals.

    points  : (n, d) coordinates, d in {1, 2}
    tags    : (n,) int array of INTERIOR / DIRICHLET / NEUMANN
    normals : (n, d) outward unit normals; zero rows except at Neumann points
    """

    points: np.ndarray
    tags: np.ndarray
    normals: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float)
        if self.points.ndim == 1:
            self.points = self.points[:, None]
        self.tags = np.asarray(self.tags, dtype=np.int8)
        if self.normals is None:
            self.normals = np.zeros_like(self.points)
        else:
            self.normals = np.asarray(self.normals, dtype=float)
        n, d = self.points.shape
        if d not in (1, 2):
            raise ValueError(f"only 1D/2D clouds supported, got d={d}")
        if self.tags.shape != (n,):
            raise ValueError("tags length does not match point count")
        if self.normals.shape != (n, d):
            raise ValueError("normals shape does not match points")
        if not np.all(np.isin(self.tags, (INTERIOR, DIRICHLET, NEUMANN))):
            raise ValueError("unknown boundary tag")
        # all points distinct
        if len(np.unique(self.points.round(decimals=14), axis=0)) != n:
            raise ValueError("cloud contains duplicate points")
        neu = self.tags == NEUMANN
        if neu.any():
            norms = np.linalg.norm(self.normals[neu], axis=1)
            if np.any(np.abs(norms - 1.0) >= 1e-12):
                raise ValueError("neumann normals must have unit length")

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def indices_where(self, tag: int) -> np.ndarray:
        return np.flatnonzero(self.tags == tag)


@dataclass
class StencilSet:
    """Per-point neighbor lists: row i holds the m nearest indices to point i,
    the point itself first, remaining neighbors in non-decreasing distance."""

    indices: np.ndarray  # (n, m) int

    def __post_init__(self):
        self.indices = np.asarray(self.indices, dtype=np.int64)

    @property
    def m(self) -> int:
        return self.indices.shape[1]

    def row(self, i: int) -> np.ndarray:
        return self.indices[i]


def generate_1d(a: float, b: float, n: int) -> PointCloud:
    """Equispaced 1D cloud on [a, b]; endpoints Dirichlet, rest interior."""
    if n < 3:
        raise ValueError(f"need n >= 3 points, got {n}")
    if not a < b:
        raise ValueError("interval must satisfy a < b")
    x = np.linspace(a, b, n)
    tags = np.full(n, INTERIOR, dtype=np.int8)
    tags[0] = tags[-1] = DIRICHLET
    return PointCloud(x[:, None], tags)


def generate_random_1d(a: float, b: float, n: int, seed: int) -> PointCloud:
    """Jittered-grid random sampling of [a, b].

    Interior nodes are equispaced points perturbed by up to 40% of the
    spacing, which keeps neighbors well separated (no near-coincident
    stencil nodes). Endpoints stay fixed and are tagged Dirichlet.
    """
    if n < 3:
        raise ValueError(f"need n >= 3 points, got {n}")
    if not a < b:
        raise ValueError("interval must satisfy a < b")
    rng = np.random.default_rng(seed)
    x = np.linspace(a, b, n)
    h = (b - a) / (n - 1)
    x[1:-1] += rng.uniform(-0.4 * h, 0.4 * h, size=n - 2)
    tags = np.full(n, INTERIOR, dtype=np.int8)
    tags[0] = tags[-1] = DIRICHLET
    return PointCloud(np.sort(x)[:, None], tags)


def generate_grid_2d(
    width: float,
    height: float,
    nx: int,
    ny: int,
    bc_layout: dict[str, int] | None = None,
) -> PointCloud:
    """Tensor-product grid on [0, width] x [0, height].

    ``bc_layout`` maps edge names (bottom/top/left/right) to DIRICHLET or
    NEUMANN. Missing edges default to Dirichlet. Corners shared by edges
    with different tags resolve by precedence Dirichlet > Neumann; a corner
    between two Neumann edges gets the normalized sum of both outward
    normals.
    """
    if nx < 3 or ny < 3:
        raise ValueError("need nx, ny >= 3")
    if width <= 0 or height <= 0:
        raise ValueError("domain dimensions must be positive")
    layout = {e: DIRICHLET for e in _EDGES}
    if bc_layout:
        for edge, tag in bc_layout.items():
            if edge not in _EDGES:
                raise ValueError(f"unknown edge {edge!r}")
            if tag not in (DIRICHLET, NEUMANN):
                raise ValueError("edges must be DIRICHLET or NEUMANN")
            layout[edge] = tag

    xs = np.linspace(0.0, width, nx)
    ys = np.linspace(0.0, height, ny)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    pts = np.column_stack([X.ravel(), Y.ravel()])
    n = nx * ny
    tags = np.full(n, INTERIOR, dtype=np.int8)
    normals = np.zeros((n, 2))

    on_edge = {
        "bottom": np.isclose(pts[:, 1], 0.0),
        "top": np.isclose(pts[:, 1], height),
        "left": np.isclose(pts[:, 0], 0.0),
        "right": np.isclose(pts[:, 0], width),
    }
    # Neumann first so an overlapping Dirichlet edge overrides it at corners.
    for edge in _EDGES:
        if layout[edge] != NEUMANN:
            continue
        mask = on_edge[edge]
        tags[mask] = NEUMANN
        normals[mask] += np.array(_EDGE_NORMALS[edge])
    for edge in _EDGES:
        if layout[edge] != DIRICHLET:
            continue
        mask = on_edge[edge]
        tags[mask] = DIRICHLET
        normals[mask] = 0.0
    neu = tags == NEUMANN
    if neu.any():
        lengths = np.linalg.norm(normals[neu], axis=1)
        normals[neu] /= lengths[:, None]
    return PointCloud(pts, tags, normals)


def generate_random_2d(width: float, height: float, n: int, seed: int) -> PointCloud:
    """Jittered-grid random interior sampling of (0, width) x (0, height).

    Validation clouds for stencil-weight checks: all points are tagged
    interior, well separated by construction.
    """
    if n < 3:
        raise ValueError(f"need n >= 3 points, got {n}")
    rng = np.random.default_rng(seed)
    side = int(np.ceil(np.sqrt(n)))
    xs = (np.arange(side) + 0.5) / side * width
    ys = (np.arange(side) + 0.5) / side * height
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    pts = np.column_stack([X.ravel(), Y.ravel()])
    pts[:, 0] += rng.uniform(-0.35 * width / side, 0.35 * width / side, size=len(pts))
    pts[:, 1] += rng.uniform(-0.35 * height / side, 0.35 * height / side, size=len(pts))
    keep = rng.permutation(len(pts))[:n]
    return PointCloud(pts[np.sort(keep)], np.full(n, INTERIOR, dtype=np.int8))


def knn_stencils(cloud: PointCloud, m: int) -> StencilSet:
    """m nearest neighbors per point (self first), ties broken by lower index.

    Brute-force squared distances with a (distance, index) lexicographic
    sort: deterministic for the desk-scale clouds used here.
    """
    n = cloud.n
    if m > n:
        raise ValueError(f"stencil size m={m} exceeds point count n={n}")
    if m < 1:
        raise ValueError("stencil size must be >= 1")
    pts = cloud.points
    sten = np.empty((n, m), dtype=np.int64)
    idx = np.arange(n)
    # chunked to bound memory on larger clouds
    chunk = max(1, int(2e6 // max(n, 1)))
    for start in range(0, n, chunk):
        stop = min(start + chunk, n)
        diff = pts[start:stop, None, :] - pts[None, :, :]
        d2 = np.einsum("ijk,ijk->ij", diff, diff)
        for row, i in enumerate(range(start, stop)):
            order = np.lexsort((idx, d2[row]))
            sten[i] = order[:m]
    # self-distance is exactly 0.0, so lexsort puts each point first in its own row
    return StencilSet(sten)


def save_cloud_csv(cloud: PointCloud, path) -> None:
    """Columnar text export: ``x[,y],tag[,nx,ny]`` with tags I|D|N."""
    has_normals = bool((cloud.tags == NEUMANN).any())
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        header = ["x"] + (["y"] if cloud.dim == 2 else []) + ["tag"]
        if has_normals:
            header += ["nx"] + (["ny"] if cloud.dim == 2 else [])
        writer.writerow(header)
        for i in range(cloud.n):
            row = [f"{c:.17g}" for c in cloud.points[i]]
            row.append(TAG_CHARS[int(cloud.tags[i])])
            if has_normals:
                row += [f"{c:.17g}" for c in cloud.normals[i]]
            writer.writerow(row)


def load_cloud_csv(path) -> PointCloud:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        dim = 2 if "y" in header else 1
        tag_col = header.index("tag")
        has_normals = "nx" in header
        pts, tags, normals = [], [], []
        for row in reader:
            pts.append([float(v) for v in row[:dim]])
            tags.append(CHAR_TAGS[row[tag_col]])
            if has_normals:
                normals.append([float(v) for v in row[tag_col + 1 : tag_col + 1 + dim]])
            else:
                normals.append([0.0] * dim)
    return PointCloud(np.array(pts), np.array(tags), np.array(normals))
