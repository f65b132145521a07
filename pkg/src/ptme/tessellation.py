"""CVT partition of the unit task cube with nearest-cell and adjacency queries.

Centroids are computed with Lloyd's algorithm on uniform samples (the usual
fast-CVT approximation).  The nearest-cell query is exact: it must agree with
a brute-force scan, with ties resolved to the lowest cell index.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import Delaunay, QhullError, cKDTree

MAX_LLOYD_ITER = 50
LLOYD_TOL = 1e-4
MIN_SAMPLES = 10_000
SAMPLES_PER_CELL = 100
KMEANSPP_MAX_CELLS = 1024


class DegenerateGeometryError(ValueError):
    """Raised when centroids do not span enough dimensions to triangulate."""


@dataclass
class Tessellation:
    """A CVT of [0,1]^dim: N centroids, optional cell-adjacency graph.

    Immutable after construction (adjacency is filled once, lazily).
    """

    dim: int
    centroids: np.ndarray  # (n, dim), all coordinates in [0, 1]
    seed: int
    adjacency: dict[int, set[int]] | None = None
    _kdtree: cKDTree | None = field(default=None, repr=False, compare=False)

    @property
    def n_cells(self) -> int:
        return len(self.centroids)

    def nearest_cell(self, theta: np.ndarray) -> int:
        """Index of the centroid closest to ``theta`` (ties: lowest index)."""
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (self.dim,):
            raise ValueError(
                f"point has shape {theta.shape}, tessellation dim is {self.dim}"
            )
        d2 = ((self.centroids - theta) ** 2).sum(axis=1)
        return int(np.argmin(d2))

    def nearest_cells(self, points: np.ndarray) -> np.ndarray:
        """Vectorized nearest-cell lookup for an (m, dim) batch of points."""
        points = np.asarray(points, dtype=float)
        if points.ndim != 2 or points.shape[1] != self.dim:
            raise ValueError(
                f"points have shape {points.shape}, tessellation dim is {self.dim}"
            )
        if self._kdtree is None:
            self._kdtree = cKDTree(self.centroids)
        _, labels = self._kdtree.query(points, workers=-1)
        return labels.astype(np.intp)

    def neighbors(self, cell: int) -> set[int]:
        if self.adjacency is None:
            build_adjacency(self)
        return self.adjacency[cell]

    def to_json_dict(self) -> dict:
        adj = None
        if self.adjacency is not None:
            adj = [sorted(self.adjacency[i]) for i in range(self.n_cells)]
        return {
            "dim": self.dim,
            "seed": self.seed,
            "centroids": self.centroids.tolist(),
            "adjacency": adj,
        }

    @classmethod
    def from_json_dict(cls, doc: dict) -> "Tessellation":
        adj = doc.get("adjacency")
        adjacency = None
        if adj is not None:
            adjacency = {i: set(neigh) for i, neigh in enumerate(adj)}
        return cls(
            dim=int(doc["dim"]),
            centroids=np.asarray(doc["centroids"], dtype=float),
            seed=int(doc["seed"]),
            adjacency=adjacency,
        )

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json_dict(), fh)

    @classmethod
    def load(cls, path) -> "Tessellation":
        with open(path) as fh:
            return cls.from_json_dict(json.load(fh))


def _kmeanspp_init(samples: np.ndarray, n: int, rng: np.random.Generator) -> np.ndarray:
    """Greedy spread-out seeding; avoids the worst Lloyd local optima."""
    m = len(samples)
    centroids = np.empty((n, samples.shape[1]))
    centroids[0] = samples[rng.integers(m)]
    d2 = ((samples - centroids[0]) ** 2).sum(axis=1)
    for i in range(1, n):
        idx = rng.choice(m, p=d2 / d2.sum())
        centroids[i] = samples[idx]
        d2 = np.minimum(d2, ((samples - centroids[i]) ** 2).sum(axis=1))
    return centroids


def cvt_centroids(n: int, dim: int, seed: int) -> Tessellation:
    """Approximate an n-cell CVT of [0,1]^dim; deterministic given ``seed``.

    dim == 1 has a closed form (equispaced cell midpoints) and is returned
    exactly.  Higher dimensions run Lloyd iterations over uniform samples,
    seeded with k-means++ when n is small enough for that to be affordable.
    """
    if n < 1 or dim < 1:
        raise ValueError(f"need n >= 1 and dim >= 1, got n={n}, dim={dim}")
    if dim == 1:
        # The 1-D CVT of [0,1] is exactly the equispaced cell midpoints.
        centroids = ((np.arange(n) + 0.5) / n).reshape(n, 1)
        centroids.flags.writeable = False
        return Tessellation(dim=1, centroids=centroids, seed=int(seed))

    rng = np.random.default_rng(seed)
    m = max(MIN_SAMPLES, SAMPLES_PER_CELL * n)
    samples = rng.random((m, dim))
    if n <= KMEANSPP_MAX_CELLS:
        centroids = _kmeanspp_init(samples, n, rng)
    else:
        centroids = samples[rng.choice(m, size=n, replace=False)].copy()

    for _ in range(MAX_LLOYD_ITER):
        _, labels = cKDTree(centroids).query(samples, workers=-1)
        counts = np.bincount(labels, minlength=n)
        moved = centroids.copy()
        nonempty = counts > 0
        for d in range(dim):
            sums = np.bincount(labels, weights=samples[:, d], minlength=n)
            moved[nonempty, d] = sums[nonempty] / counts[nonempty]
        shift = np.max(np.abs(moved - centroids))
        centroids = moved
        if shift < LLOYD_TOL:
            break

    centroids.flags.writeable = False
    return Tessellation(dim=dim, centroids=centroids, seed=int(seed))


def build_adjacency(tess: Tessellation) -> dict[int, set[int]]:
    """Fill and return the cell-adjacency graph of a tessellation.

    For dim <= 3 two cells are adjacent iff their centroids share a Delaunay
    edge.  Above that, exact triangulation is disproportionate and adjacency
    falls back to the symmetric 2*(dim+1) nearest centroids.
    """
    if tess.adjacency is not None:
        return tess.adjacency
    n, dim = tess.n_cells, tess.dim
    adjacency: dict[int, set[int]] = {i: set() for i in range(n)}

    if n == 1:
        tess.adjacency = adjacency
        return adjacency

    if dim == 1:
        order = np.argsort(tess.centroids[:, 0], kind="stable")
        for a, b in zip(order[:-1], order[1:]):
            adjacency[int(a)].add(int(b))
            adjacency[int(b)].add(int(a))
        tess.adjacency = adjacency
        return adjacency

    if dim <= 3:
        pts = np.asarray(tess.centroids, dtype=float)
        rank = np.linalg.matrix_rank(pts - pts[0], tol=1e-12)
        if n < dim + 1 or rank < dim:
            raise DegenerateGeometryError(
                f"need at least {dim + 1} affinely independent centroids "
                f"to triangulate in dim {dim}"
            )
        try:
            tri = Delaunay(pts)
        except QhullError:
            # CVT output is generic; cocircular inputs only show up in
            # hand-built geometries.  Jitter far below any meaningful scale.
            jitter_rng = np.random.default_rng(tess.seed)
            jittered = pts + jitter_rng.uniform(-1e-9, 1e-9, size=pts.shape)
            try:
                tri = Delaunay(jittered)
            except QhullError as exc:
                raise DegenerateGeometryError(str(exc)) from exc
        for simplex in tri.simplices:
            for i in range(len(simplex)):
                for j in range(i + 1, len(simplex)):
                    a, b = int(simplex[i]), int(simplex[j])
                    adjacency[a].add(b)
                    adjacency[b].add(a)
    else:
        k = min(2 * (dim + 1), n - 1)
        tree = cKDTree(tess.centroids)
        _, idx = tree.query(tess.centroids, k=k + 1, workers=-1)
        for i in range(n):
            for j in idx[i, 1:]:
                adjacency[i].add(int(j))
                adjacency[int(j)].add(i)

    tess.adjacency = adjacency
    return adjacency
