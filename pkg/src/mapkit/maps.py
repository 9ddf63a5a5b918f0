"""Maps, spaces and iterated function systems.

Points are numpy arrays of shape (d,); batches are (n, d). Every map kind
implements `apply_many` on batches; single points go through `apply_point`.
"""
import logging
from collections.abc import Sequence
from typing import Any

import numpy as np
from scipy.spatial import cKDTree
from scipy.spatial.distance import cdist

from config.config import DEFAULTS
from errors.exceptions import (
    ExprDomainError,
    NonConvergenceError,
    SymbolOutOfRangeError,
    ValidationError,
)
from exprdsl.expr import VARIABLES, Expression, evaluate, evaluate_array, free_variables, parse

logger = logging.getLogger(__name__)


class Box:
    """Axis-aligned box [lo_1, hi_1] x ... x [lo_d, hi_d]."""

    def __init__(self, lo: Sequence[float], hi: Sequence[float]):
        self.lo = np.atleast_1d(np.asarray(lo, dtype=float))
        self.hi = np.atleast_1d(np.asarray(hi, dtype=float))
        if self.lo.shape != self.hi.shape or self.lo.ndim != 1:
            raise ValidationError(f"box bounds disagree: lo {self.lo.tolist()}, hi {self.hi.tolist()}")
        if not (np.all(np.isfinite(self.lo)) and np.all(np.isfinite(self.hi))):
            raise ValidationError("box bounds must be finite")
        if np.any(self.lo > self.hi):
            raise ValidationError(f"empty box: lo {self.lo.tolist()} exceeds hi {self.hi.tolist()}")

    @classmethod
    def from_bounds(cls, bounds: Sequence[Sequence[float]]) -> "Box":
        bounds = np.asarray(bounds, dtype=float).reshape(-1, 2)
        return cls(bounds[:, 0], bounds[:, 1])

    @classmethod
    def around(cls, points: np.ndarray) -> "Box":
        points = np.atleast_2d(points)
        return cls(points.min(axis=0), points.max(axis=0))

    @property
    def dim(self) -> int:
        return self.lo.shape[0]

    @property
    def widths(self) -> np.ndarray:
        return self.hi - self.lo

    @property
    def center(self) -> np.ndarray:
        return (self.lo + self.hi) / 2

    @property
    def volume(self) -> float:
        return float(np.prod(self.widths))

    @property
    def diam(self) -> float:
        return float(np.linalg.norm(self.widths))

    def corners(self) -> np.ndarray:
        grids = np.meshgrid(*[(lo, hi) for lo, hi in zip(self.lo, self.hi)], indexing="ij")
        return np.unique(np.stack([g.ravel() for g in grids], axis=1), axis=0)

    def inflate(self, factor: float) -> "Box":
        half = self.widths * factor / 2
        return Box(self.center - half, self.center + half)

    def pad(self, eps: float) -> "Box":
        return Box(self.lo - eps, self.hi + eps)

    def contains(self, points: np.ndarray) -> np.ndarray:
        points = np.atleast_2d(points)
        return np.all((points >= self.lo) & (points <= self.hi), axis=1)

    def grid(self, per_axis: int) -> np.ndarray:
        axes = [np.linspace(lo, hi, per_axis) for lo, hi in zip(self.lo, self.hi)]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.unique(np.stack([m.ravel() for m in mesh], axis=1), axis=0)

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return self.lo + rng.random((n, self.dim)) * self.widths

    def to_bounds(self) -> list[list[float]]:
        return [[float(lo), float(hi)] for lo, hi in zip(self.lo, self.hi)]

    def __repr__(self) -> str:
        return f"Box({self.to_bounds()})"


class Space:
    """Ground metric: Euclidean R^d, or the circle [0, 1) with wrap-around distance."""

    def __init__(self, variant: str = "euclidean"):
        if variant not in ("euclidean", "circle"):
            raise ValidationError(f"unknown space variant '{variant}'")
        self.variant = variant

    @property
    def is_circle(self) -> bool:
        return self.variant == "circle"

    def normalize(self, points: np.ndarray) -> np.ndarray:
        if not self.is_circle:
            return points
        wrapped = np.mod(points, 1.0)
        return np.where(wrapped >= 1.0, 0.0, wrapped)

    def _gap(self, diff: np.ndarray) -> np.ndarray:
        diff = np.abs(diff)
        if self.is_circle:
            diff = np.mod(diff, 1.0)
            diff = np.minimum(diff, 1.0 - diff)
        return diff

    def distance(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        """Rowwise distance between equally shaped batches (or single points)."""
        gap = self._gap(np.asarray(a, dtype=float) - np.asarray(b, dtype=float))
        return np.sqrt(np.sum(gap * gap, axis=-1))

    def pairwise(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        if not self.is_circle:
            return cdist(np.atleast_2d(a), np.atleast_2d(b))
        gap = self._gap(np.atleast_2d(a)[:, None, :] - np.atleast_2d(b)[None, :, :])
        return np.sqrt(np.sum(gap * gap, axis=-1))

    def tree(self, points: np.ndarray) -> cKDTree:
        if self.is_circle:
            return cKDTree(self.normalize(points), boxsize=1.0)
        return cKDTree(points)

    def diameter_of(self, points: np.ndarray, chunk: int = 2048) -> float:
        points = np.atleast_2d(points)
        best = 0.0
        for start in range(0, len(points), chunk):
            block = self.pairwise(points[start:start + chunk], points)
            best = max(best, float(block.max()))
        return best

    def diameter(self, box: Box) -> float:
        if self.is_circle:
            return float(np.sqrt(box.dim) * min(0.5, float(np.max(box.widths))))
        return box.diam

    def __eq__(self, other: Any) -> bool:
        return isinstance(other, Space) and other.variant == self.variant

    def __hash__(self) -> int:
        return hash(self.variant)

    def __repr__(self) -> str:
        return f"Space({self.variant!r})"


EUCLIDEAN = Space("euclidean")
CIRCLE = Space("circle")


class MapSpec:
    """Base class of a self-map of R^d."""

    kind = "abstract"
    dim: int

    def apply_many(self, points: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def apply_point(self, x: np.ndarray) -> np.ndarray:
        return self.apply_many(np.asarray(x, dtype=float).reshape(1, -1))[0]

    def __call__(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.ndim == 2:
            return self.apply_many(x)
        return self.apply_point(x)


class AffineMap(MapSpec):
    kind = "affine"

    def __init__(self, matrix: Sequence[Sequence[float]], offset: Sequence[float]):
        self.matrix = np.atleast_2d(np.asarray(matrix, dtype=float))
        self.offset = np.atleast_1d(np.asarray(offset, dtype=float))
        d = self.offset.shape[0]
        if self.matrix.shape != (d, d):
            raise ValidationError(f"affine matrix shape {self.matrix.shape} does not match offset length {d}")
        self.dim = d

    def apply_many(self, points: np.ndarray) -> np.ndarray:
        return points @ self.matrix.T + self.offset

    def apply_point(self, x: np.ndarray) -> np.ndarray:
        return self.matrix @ np.asarray(x, dtype=float) + self.offset

    def then(self, inner: "AffineMap") -> "AffineMap":
        """self after inner."""
        return AffineMap(self.matrix @ inner.matrix, self.matrix @ inner.offset + self.offset)

    def operator_norm(self) -> float:
        return float(np.linalg.norm(self.matrix, 2))

    def __repr__(self) -> str:
        return f"AffineMap({self.matrix.tolist()}, {self.offset.tolist()})"


class ExprMap(MapSpec):
    kind = "expr"

    def __init__(self, exprs: Sequence[Expression | str]):
        if not exprs:
            raise ValidationError("expr map needs at least one coordinate expression")
        self.dim = len(exprs)
        self.variables = VARIABLES[: self.dim]
        self.exprs = tuple(parse(e, self.variables) if isinstance(e, str) else e for e in exprs)
        for expr in self.exprs:
            extra = free_variables(expr) - set(self.variables)
            if extra:
                raise ValidationError(f"variables {sorted(extra)} are not declared for a {self.dim}-d map")

    def apply_many(self, points: np.ndarray) -> np.ndarray:
        env = {name: points[:, j] for j, name in enumerate(self.variables)}
        try:
            columns = [evaluate_array(expr, env) for expr in self.exprs]
        except ExprDomainError as exc:
            point = points[exc.index] if exc.index is not None else None
            raise ExprDomainError(exc.message, point=point, index=exc.index) from exc
        return np.stack(columns, axis=1)

    def apply_point(self, x: np.ndarray) -> np.ndarray:
        env = {name: float(x[j]) for j, name in enumerate(self.variables)}
        try:
            return np.array([evaluate(expr, env) for expr in self.exprs])
        except ExprDomainError as exc:
            raise ExprDomainError(exc.message, point=x) from exc

    def __repr__(self) -> str:
        from exprdsl.expr import to_source

        return f"ExprMap({[to_source(e) for e in self.exprs]})"


BUILTINS = {
    "circle-rotation": {"params": ("r",), "dims": (1,)},
    "identity": {"params": (), "dims": (1, 2, 3)},
}


class BuiltinMap(MapSpec):
    kind = "builtin"

    def __init__(self, name: str, params: dict[str, float] | None = None, dim: int = 1):
        if name not in BUILTINS:
            raise ValidationError(f"unknown builtin map '{name}'")
        params = dict(params or {})
        missing = set(BUILTINS[name]["params"]) - set(params)
        if missing:
            raise ValidationError(f"builtin '{name}' is missing parameters {sorted(missing)}")
        if dim not in BUILTINS[name]["dims"]:
            raise ValidationError(f"builtin '{name}' is not defined in dimension {dim}")
        self.name = name
        self.params = {k: float(v) for k, v in params.items()}
        self.dim = dim

    def apply_many(self, points: np.ndarray) -> np.ndarray:
        if self.name == "circle-rotation":
            return np.mod(points + self.params["r"], 1.0)
        return np.array(points, dtype=float, copy=True)

    def __repr__(self) -> str:
        return f"BuiltinMap({self.name!r}, {self.params})"


class ComposedMap(MapSpec):
    """parts[0] o parts[1] o ... o parts[-1]; the rightmost part acts first."""

    kind = "composed"

    def __init__(self, parts: Sequence[MapSpec], space: Space = EUCLIDEAN, dim: int | None = None):
        self.parts = tuple(parts)
        self.space = space
        self.dim = self.parts[0].dim if self.parts else int(dim or 1)

    def apply_many(self, points: np.ndarray) -> np.ndarray:
        for part in reversed(self.parts):
            points = self.space.normalize(part.apply_many(points))
        return points

    def __repr__(self) -> str:
        return f"ComposedMap({list(self.parts)})"


class IFSystem:
    """Finite family of maps on a working box, with optional probabilities."""

    def __init__(
        self,
        maps: Sequence[MapSpec],
        weights: Sequence[float] | None = None,
        domain: Box | None = None,
        space: Space = EUCLIDEAN,
        name: str | None = None,
    ):
        if not maps:
            raise ValidationError("an IFS needs at least one map")
        dims = {m.dim for m in maps}
        if len(dims) != 1:
            raise ValidationError(f"maps disagree on dimension: {sorted(dims)}")
        self.maps = tuple(maps)
        self.dim = dims.pop()
        self.domain = domain if domain is not None else Box(np.zeros(self.dim), np.ones(self.dim))
        if self.domain.dim != self.dim:
            raise ValidationError(f"domain has dimension {self.domain.dim}, maps have {self.dim}")
        self.space = space
        self.name = name
        self.weights = None if weights is None else self._check_weights(weights)

    def _check_weights(self, weights: Sequence[float]) -> np.ndarray:
        weights = np.asarray(weights, dtype=float)
        if weights.shape != (self.N,):
            raise ValidationError(f"{weights.shape[0] if weights.ndim else 0} weights for {self.N} maps")
        if np.any(weights <= 0):
            raise ValidationError("weights must be strictly positive")
        total = float(weights.sum())
        if abs(total - 1.0) > DEFAULTS["weight_tolerance"]:
            raise ValidationError(f"weights sum {total:.17g}")
        return weights

    @property
    def N(self) -> int:
        return len(self.maps)

    def with_weights(self, weights: Sequence[float] | None) -> "IFSystem":
        return IFSystem(self.maps, weights, self.domain, self.space, self.name)

    def require_weights(self) -> np.ndarray:
        if self.weights is None:
            raise ValidationError("this operation needs probability weights on the IFS")
        return self.weights

    def image(self, i: int, points: np.ndarray) -> np.ndarray:
        """w_{i+1} applied to a batch (0-based map index)."""
        try:
            return self.space.normalize(self.maps[i].apply_many(points))
        except ExprDomainError as exc:
            raise exc.located(i + 1, exc.point) from exc

    def step(self, symbol: int, x: np.ndarray) -> np.ndarray:
        """w_symbol(x) for a 1-based symbol."""
        try:
            return self.space.normalize(self.maps[symbol - 1].apply_point(x))
        except ExprDomainError as exc:
            raise exc.located(symbol, exc.point if exc.point is not None else x) from exc

    def all_affine(self) -> bool:
        return all(isinstance(m, AffineMap) for m in self.maps)

    def __repr__(self) -> str:
        label = f"{self.name}: " if self.name else ""
        return f"IFSystem({label}N={self.N}, d={self.dim}, {self.space.variant})"


def apply(map_: MapSpec, x: Sequence[float] | float) -> np.ndarray:
    return map_.apply_point(np.atleast_1d(np.asarray(x, dtype=float)))


def _symbols_of(alpha: Any) -> tuple[int, ...]:
    return tuple(int(s) for s in getattr(alpha, "symbols", alpha))


def compose_word(ifs: IFSystem, alpha: Any) -> MapSpec:
    """w_alpha = w_{alpha_1} o ... o w_{alpha_k}; the last symbol acts first.

    Products of affine maps collapse into one AffineMap.
    """
    symbols = _symbols_of(alpha)
    for s in symbols:
        if not 1 <= s <= ifs.N:
            raise SymbolOutOfRangeError(s, ifs.N)

    parts = [ifs.maps[s - 1] for s in symbols]
    if ifs.all_affine() and not ifs.space.is_circle:
        result = AffineMap(np.eye(ifs.dim), np.zeros(ifs.dim))
        for part in reversed(parts):
            result = part.then(result)
        return result
    return ComposedMap(parts, ifs.space, dim=ifs.dim)


def picard_fixed_point(
    map_: MapSpec,
    x0: Sequence[float] | float,
    tol: float,
    max_iter: int = DEFAULTS["max_iter"],
    space: Space = EUCLIDEAN,
) -> tuple[np.ndarray, int]:
    """Iterate x <- w(x) until d(x, w(x)) <= tol.

    Returns the last x (not w(x)), so the tolerance holds for the returned
    point, and the number of applications of w performed.
    """
    if tol <= 0:
        raise ValidationError(f"tol must be positive, got {tol}")

    x = space.normalize(np.atleast_1d(np.asarray(x0, dtype=float)))
    residual = None
    for iteration in range(max_iter + 1):
        y = space.normalize(map_.apply_point(x))
        if not np.all(np.isfinite(y)):
            raise NonConvergenceError(f"Picard iterate left the reals after {iteration} steps", iteration, residual)
        residual = float(space.distance(x, y))
        if residual <= tol:
            logger.debug(f"Picard converged in {iteration} steps, residual {residual:.3g}")
            return x, iteration
        x = y

    raise NonConvergenceError(
        f"Picard iteration did not reach tol {tol:g} within {max_iter} steps (last residual {residual:.6g})",
        max_iter,
        residual,
    )
