"""Synthetic clustering benchmarks and point-CSV input/output.

CSV layout: header ``id,x0,x1,...[,label]``, one point per row. Coordinate
columns may carry other names (``lon,lat`` for geodata) as long as ``id``
comes first and ``label``, when present, comes last.
"""
from __future__ import annotations

import csv
import io
import math
import os
from dataclasses import dataclass, field

import numpy as np

from .exceptions import InputError, ParameterDomainError
from .metrics import dense_labels


@dataclass
class LabeledDataset:
    points: np.ndarray
    labels: np.ndarray | None = None
    meta: dict = field(default_factory=dict)
    columns: tuple[str, ...] | None = None

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 2:
            raise InputError("points must be an (n, D) matrix")
        if not np.all(np.isfinite(pts)):
            raise InputError("points contain non-finite coordinates")
        self.points = pts
        if self.labels is not None:
            labels = np.asarray(self.labels, dtype=np.int64).reshape(-1)
            if labels.shape[0] != pts.shape[0]:
                raise InputError("one label per point is required")
            self.labels = labels
        if self.columns is None:
            self.columns = tuple(f"x{j}" for j in range(pts.shape[1]))

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    @property
    def n_clusters(self) -> int | None:
        return None if self.labels is None else int(np.unique(self.labels).size)


def _blobs(rng, centers, sigmas, points_per_cluster):
    pts, labels = [], []
    for k, (c, s) in enumerate(zip(centers, sigmas)):
        pts.append(rng.normal(c, s, size=(points_per_cluster, len(c))))
        labels.append(np.full(points_per_cluster, k, dtype=np.int64))
    if not pts:
        return np.zeros((0, 2)), np.zeros(0, dtype=np.int64)
    return np.vstack(pts), np.concatenate(labels)


def _packed_centers(rng, n, radius, min_dist, max_tries=10_000):
    """``n`` points uniform in a disc, at least ``min_dist`` apart when possible."""
    centers: list[np.ndarray] = []
    tries = 0
    while len(centers) < n:
        rho = radius * math.sqrt(rng.random())
        phi = 2 * math.pi * rng.random()
        c = np.array([rho * math.cos(phi), rho * math.sin(phi)])
        tries += 1
        if tries > max_tries or all(np.linalg.norm(c - o) >= min_dist for o in centers):
            centers.append(c)
    return centers


def _ring(n, radius, phase=0.0):
    if n == 1 and radius == 0:
        return [np.zeros(2)]
    return [radius * np.array([math.cos(phase + 2 * math.pi * k / n),
                               math.sin(phase + 2 * math.pi * k / n)]) for k in range(n)]


def gen_multiscale(n_dense_clusters: int = 4, n_sparse_clusters: int = 3,
                   points_per_cluster: int = 40, scale_ratio: float = 3.0, seed: int = 0,
                   sigma: float = 1.0, sparse_radius: float = 4.0,
                   dense_separation: float = 6.0, dense_spread: float = 2.0) -> LabeledDataset:
    """Tight clusters packed in one spot, plus broad clusters around them.

    Dense clusters have std ``sigma / scale_ratio``; their centers are drawn
    in a disc of radius ``dense_spread * sigma`` around the origin, at least
    ``dense_separation`` dense-stds apart. Sparse clusters have std
    ``sigma`` and sit on a ring of radius ``sparse_radius * sigma`` (a lone
    sparse cluster with no dense group sits at the origin).
    """
    if not scale_ratio > 1:
        raise ParameterDomainError("scale_ratio must exceed 1")
    if n_dense_clusters < 0 or n_sparse_clusters < 0 or n_dense_clusters + n_sparse_clusters == 0:
        raise InputError("need at least one cluster")
    if points_per_cluster < 1:
        raise InputError("points_per_cluster must be >= 1")
    rng = np.random.default_rng(seed)
    dense_sigma = sigma / scale_ratio
    dense = _packed_centers(rng, n_dense_clusters, dense_spread * sigma,
                            dense_separation * dense_sigma)
    radius = 0.0 if (n_dense_clusters == 0 and n_sparse_clusters == 1) else sparse_radius * sigma
    sparse = _ring(n_sparse_clusters, radius, phase=rng.uniform(0, 2 * math.pi)) if n_sparse_clusters else []
    centers = dense + sparse
    sigmas = [dense_sigma] * n_dense_clusters + [sigma] * n_sparse_clusters
    pts, labels = _blobs(rng, centers, sigmas, points_per_cluster)
    meta = dict(generator="multiscale", n_dense_clusters=n_dense_clusters,
                n_sparse_clusters=n_sparse_clusters, points_per_cluster=points_per_cluster,
                scale_ratio=scale_ratio, sigma=sigma, sparse_radius=sparse_radius,
                dense_separation=dense_separation, dense_spread=dense_spread, seed=seed)
    return LabeledDataset(pts, labels, meta)


def gen_two_scale(n_small_clusters: int = 4, n_large_clusters: int = 2,
                  points_per_cluster: int = 40, scale_ratio: float = 5.0, seed: int = 0,
                  sigma: float = 1.0, separation: float = 5.0) -> LabeledDataset:
    """Two groups of clusters, each laid out at its own scale.

    Large clusters (std ``sigma``) sit on a row with centers
    ``separation * sigma`` apart. Small clusters (std ``sigma/scale_ratio``)
    sit on a parallel row, ``separation`` small-stds apart, one large
    spacing below.
    """
    if not scale_ratio > 1:
        raise ParameterDomainError("scale_ratio must exceed 1")
    if n_small_clusters < 0 or n_large_clusters < 0 or n_small_clusters + n_large_clusters == 0:
        raise InputError("need at least one cluster")
    if points_per_cluster < 1:
        raise InputError("points_per_cluster must be >= 1")
    rng = np.random.default_rng(seed)
    small_sigma = sigma / scale_ratio
    big_step = separation * sigma
    small_step = separation * small_sigma
    large = [np.array([(k - (n_large_clusters - 1) / 2) * big_step, 0.0])
             for k in range(n_large_clusters)]
    small = [np.array([(k - (n_small_clusters - 1) / 2) * small_step, -big_step])
             for k in range(n_small_clusters)]
    centers = small + large
    sigmas = [small_sigma] * n_small_clusters + [sigma] * n_large_clusters
    pts, labels = _blobs(rng, centers, sigmas, points_per_cluster)
    meta = dict(generator="two_scale", n_small_clusters=n_small_clusters,
                n_large_clusters=n_large_clusters, points_per_cluster=points_per_cluster,
                scale_ratio=scale_ratio, sigma=sigma, separation=separation, seed=seed)
    return LabeledDataset(pts, labels, meta)


def grid_centers(k_per_side: int, spacing: float) -> np.ndarray:
    ax = (np.arange(k_per_side) - (k_per_side - 1) / 2) * spacing
    gx, gy = np.meshgrid(ax, ax, indexing="ij")
    return np.column_stack([gx.ravel(), gy.ravel()])


def gen_grid(k_per_side: int = 3, points_per_cluster: int = 40, spacing_over_sigma: float = 5.0,
             seed: int = 0, sigma: float = 1.0) -> LabeledDataset:
    """k_per_side**2 equal Gaussian clusters on a square lattice."""
    if k_per_side < 1:
        raise InputError("need at least one cluster per side")
    if points_per_cluster < 1:
        raise InputError("points_per_cluster must be >= 1")
    if not spacing_over_sigma > 0:
        raise ParameterDomainError("spacing must be positive")
    rng = np.random.default_rng(seed)
    centers = grid_centers(k_per_side, spacing_over_sigma * sigma)
    pts, labels = _blobs(rng, centers, [sigma] * len(centers), points_per_cluster)
    meta = dict(generator="grid", k_per_side=k_per_side, points_per_cluster=points_per_cluster,
                spacing_over_sigma=spacing_over_sigma, sigma=sigma, seed=seed)
    return LabeledDataset(pts, labels, meta)


def gen_blobs(n_clusters: int = 3, points_per_cluster: int = 100, separation_over_sigma: float = 10.0,
              seed: int = 0, sigma: float = 1.0, dim: int = 2) -> LabeledDataset:
    """Equal isotropic clusters on a ring, neighbours ``separation_over_sigma`` stds apart."""
    if n_clusters < 1:
        raise InputError("need at least one cluster")
    rng = np.random.default_rng(seed)
    if n_clusters == 1:
        radius = 0.0
    else:
        radius = separation_over_sigma * sigma / (2 * math.sin(math.pi / n_clusters))
    centers = [np.concatenate([c, np.zeros(dim - 2)]) for c in _ring(n_clusters, radius)]
    pts, labels = _blobs(rng, centers, [sigma] * n_clusters, points_per_cluster)
    meta = dict(generator="blobs", n_clusters=n_clusters, points_per_cluster=points_per_cluster,
                separation_over_sigma=separation_over_sigma, sigma=sigma, dim=dim, seed=seed)
    return LabeledDataset(pts, labels, meta)


GENERATORS = {
    "multiscale": gen_multiscale,
    "two_scale": gen_two_scale,
    "grid": gen_grid,
    "blobs": gen_blobs,
}


# -- CSV ------------------------------------------------------------------

def _fmt(x: float) -> str:
    return repr(float(x))


def write_csv(dataset: LabeledDataset, stream) -> None:
    w = csv.writer(stream, lineterminator="\n")
    header = ["id", *dataset.columns]
    if dataset.labels is not None:
        header.append("label")
    w.writerow(header)
    for i, row in enumerate(dataset.points):
        out = [str(i), *(_fmt(v) for v in row)]
        if dataset.labels is not None:
            out.append(str(int(dataset.labels[i])))
        w.writerow(out)


def save_csv(dataset: LabeledDataset, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        write_csv(dataset, fh)


def read_csv(stream, has_labels: bool | None = None, source: str = "<stream>") -> LabeledDataset:
    """Parse a point CSV. ``has_labels=None`` takes the label column if present."""
    reader = csv.reader(stream)
    try:
        header = next(reader)
    except StopIteration:
        raise InputError(f"{source}: empty file") from None
    header = [h.strip() for h in header]
    if len(header) < 2 or header[0].lower() != "id":
        raise InputError(f"{source}: line 1: header must start with 'id' followed by coordinates")
    label_col = header[-1].lower() == "label"
    if has_labels and not label_col:
        raise InputError(f"{source}: line 1: labels requested but there is no 'label' column")
    coords = header[1:-1] if label_col else header[1:]
    if not coords:
        raise InputError(f"{source}: line 1: no coordinate columns")
    width = len(header)
    pts, labels = [], []
    for line_no, row in enumerate(reader, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != width:
            raise InputError(f"{source}: line {line_no}: expected {width} fields, got {len(row)}")
        try:
            xs = [float(v) for v in row[1:1 + len(coords)]]
        except ValueError:
            raise InputError(f"{source}: line {line_no}: coordinates are not numbers") from None
        if not all(math.isfinite(v) for v in xs):
            raise InputError(f"{source}: line {line_no}: non-finite coordinate")
        pts.append(xs)
        if label_col:
            try:
                labels.append(int(row[-1]))
            except ValueError:
                raise InputError(f"{source}: line {line_no}: label is not an integer") from None
    if not pts:
        raise InputError(f"{source}: no data rows")
    use_labels = label_col if has_labels is None else has_labels
    lab = dense_labels(np.asarray(labels)) if use_labels else None
    return LabeledDataset(np.asarray(pts, dtype=float), lab,
                          {"source": source}, tuple(coords))


def load_csv(path, has_labels: bool | None = None) -> LabeledDataset:
    if not os.path.exists(path):
        raise InputError(f"{path}: no such file")
    with open(path, encoding="utf-8", newline="") as fh:
        return read_csv(fh, has_labels, source=str(path))


def dumps_csv(dataset: LabeledDataset) -> str:
    buf = io.StringIO()
    write_csv(dataset, buf)
    return buf.getvalue()
