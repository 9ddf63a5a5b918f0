"""Finite epsilon-nets standing in for nonempty compact sets."""
import logging

import numpy as np

from errors.exceptions import EmptyResultError, ValidationError
from mapkit.maps import EUCLIDEAN, Box, Space

logger = logging.getLogger(__name__)

BRUTE_FORCE_PAIRS = 1_000_000


def lexicographic(points: np.ndarray) -> np.ndarray:
    """Distinct rows of `points` in lexicographic order."""
    return np.unique(np.atleast_2d(points), axis=0)


def prune(points: np.ndarray, eps: float, space: Space = EUCLIDEAN) -> np.ndarray:
    """Greedy eps-net in lexicographic order.

    A point is dropped when it lies within eps/2 of a point kept before it,
    so kept points are pairwise more than eps/2 apart.
    """
    ordered = lexicographic(space.normalize(points))
    if eps <= 0 or len(ordered) < 2:
        return ordered

    pairs = space.tree(ordered).query_pairs(eps / 2, output_type="ndarray")
    if not len(pairs):
        return ordered

    # both directions, grouped by source
    src = np.concatenate([pairs[:, 0], pairs[:, 1]])
    dst = np.concatenate([pairs[:, 1], pairs[:, 0]])
    order = np.argsort(src, kind="stable")
    src, dst = src[order], dst[order]
    starts = np.searchsorted(src, np.arange(len(ordered) + 1))

    removed = np.zeros(len(ordered), dtype=bool)
    for i in range(len(ordered)):
        if removed[i]:
            continue
        neighbours = dst[starts[i]:starts[i + 1]]
        removed[neighbours[neighbours > i]] = True
    return ordered[~removed]


class PointCloud:
    def __init__(
        self,
        points: np.ndarray,
        resolution: float = 0.0,
        bbox: Box | None = None,
        space: Space = EUCLIDEAN,
    ):
        points = np.asarray(points, dtype=float)
        if points.ndim == 1:
            points = points.reshape(-1, 1)
        if points.size == 0:
            raise EmptyResultError("a point cloud needs at least one point")
        if not np.all(np.isfinite(points)):
            raise ValidationError("point cloud contains non-finite coordinates")
        if resolution < 0:
            raise ValidationError(f"resolution must be >= 0, got {resolution}")

        self.space = space
        self.resolution = float(resolution)
        self.points = prune(points, self.resolution, space)
        self.bbox = bbox if bbox is not None else Box.around(self.points)

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def __len__(self) -> int:
        return len(self.points)

    def diameter(self) -> float:
        return self.space.diameter_of(self.points)

    def __repr__(self) -> str:
        return f"PointCloud(n={len(self)}, d={self.dim}, resolution={self.resolution:g})"


def _as_points(cloud: PointCloud | np.ndarray) -> np.ndarray:
    if isinstance(cloud, PointCloud):
        return cloud.points
    points = np.asarray(cloud, dtype=float)
    return points.reshape(-1, 1) if points.ndim == 1 else points


def _nearest(a: np.ndarray, b: np.ndarray, space: Space, method: str) -> np.ndarray:
    """Distance from every row of a to its nearest row of b."""
    if method == "auto":
        method = "brute" if len(a) * len(b) <= BRUTE_FORCE_PAIRS else "tree"

    if method == "brute":
        chunk = max(1, BRUTE_FORCE_PAIRS // max(len(b), 1))
        return np.concatenate([space.pairwise(a[s:s + chunk], b).min(axis=1) for s in range(0, len(a), chunk)])

    if method != "tree":
        raise ValidationError(f"unknown excess method '{method}'")

    # re-measure the tree's candidates with the same formula as the brute-force path
    k = min(4, len(b))
    _, idx = space.tree(b).query(space.normalize(a), k=k)
    idx = idx.reshape(len(a), k)
    candidates = np.stack([space.distance(a, b[idx[:, j]]) for j in range(k)], axis=1)
    return candidates.min(axis=1)


def excess_witness(
    a: PointCloud | np.ndarray, b: PointCloud | np.ndarray, space: Space | None = None, method: str = "auto"
) -> tuple[float, np.ndarray]:
    """e(A, B) together with the point of A that attains it."""
    if space is None:
        space = a.space if isinstance(a, PointCloud) else EUCLIDEAN
    pa, pb = _as_points(a), _as_points(b)
    if not len(pa) or not len(pb):
        raise EmptyResultError("excess needs two nonempty sets")
    nearest = _nearest(pa, pb, space, method)
    worst = int(np.argmax(nearest))
    return float(nearest[worst]), pa[worst]


def excess(a: PointCloud | np.ndarray, b: PointCloud | np.ndarray, space: Space | None = None, method: str = "auto") -> float:
    """sup over a in A of inf over b in B of d(a, b)."""
    return excess_witness(a, b, space, method)[0]


def hausdorff(a: PointCloud | np.ndarray, b: PointCloud | np.ndarray, space: Space | None = None, method: str = "auto") -> float:
    return max(excess(a, b, space, method), excess(b, a, space, method))
