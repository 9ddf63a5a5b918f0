"""Finitely supported probability measures and the Markov operator of a weighted IFS."""
import logging
from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np

from config.config import DEFAULTS
from errors.exceptions import BudgetExceededError, EmptyResultError, NonConvergenceError, ValidationError
from hyperspace.cloud import PointCloud
from mapkit.maps import EUCLIDEAN, IFSystem, MapSpec, Space

logger = logging.getLogger(__name__)


def _merge_duplicates(atoms: np.ndarray, weights: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    unique, inverse = np.unique(atoms, axis=0, return_inverse=True)
    return unique, np.bincount(inverse.ravel(), weights=weights, minlength=len(unique))


def _merge_round(
    atoms: np.ndarray, weights: np.ndarray, radius: float, space: Space
) -> tuple[np.ndarray, np.ndarray, float, bool]:
    """Merge disjoint closest pairs within `radius` into weight barycenters."""
    pairs = space.tree(atoms).query_pairs(radius, output_type="ndarray")
    if not len(pairs):
        return atoms, weights, 0.0, False

    i, j = pairs[:, 0], pairs[:, 1]
    dist = space.distance(atoms[i], atoms[j])
    order = np.lexsort((j, i, dist))

    used = np.zeros(len(atoms), dtype=bool)
    chosen = []
    for k in order:
        a, b = i[k], j[k]
        if not used[a] and not used[b]:
            used[a] = used[b] = True
            chosen.append(k)
    chosen = np.asarray(chosen)
    a, b = i[chosen], j[chosen]

    gap = atoms[b] - atoms[a]
    if space.is_circle:
        gap = gap - np.round(gap)
    total = weights[a] + weights[b]
    share = (weights[b] / total)[:, None]
    centers = space.normalize(atoms[a] + share * gap)

    # a moves share*|gap|, b moves (1 - share)*|gap|
    length = dist[chosen]
    moved = float(np.sum((weights[a] * share[:, 0] + weights[b] * (1 - share[:, 0])) * length))

    keep = ~used
    new_atoms = np.concatenate([atoms[keep], centers])
    new_weights = np.concatenate([weights[keep], total])
    return new_atoms, new_weights, moved, True


def merge_atoms(
    atoms: np.ndarray, weights: np.ndarray, radius: float, space: Space = EUCLIDEAN
) -> tuple[np.ndarray, np.ndarray, float]:
    """Agglomerate atoms until every pair is more than radius/2 apart.

    Returns the merged atoms in lexicographic order, their weights, and an
    upper bound on the Monge-Kantorovich displacement the merging caused.
    """
    atoms, weights = _merge_duplicates(space.normalize(atoms), weights)
    displacement = 0.0
    if radius <= 0:
        return atoms, weights, displacement
    merged = True
    while merged and len(atoms) > 1:
        atoms, weights, moved, merged = _merge_round(atoms, weights, radius / 2, space)
        displacement += moved
        if merged:
            atoms, weights = _merge_duplicates(atoms, weights)
    return atoms, weights, displacement


class DiscreteMeasure:
    """sum_k weights[k] * delta_{atoms[k]} with positive weights summing to 1."""

    def __init__(
        self,
        atoms: np.ndarray,
        weights: Sequence[float] | np.ndarray,
        merge_radius: float = 0.0,
        space: Space = EUCLIDEAN,
        merge_error: float = 0.0,
    ):
        atoms = np.asarray(atoms, dtype=float)
        if atoms.ndim == 1:
            atoms = atoms.reshape(-1, 1)
        weights = np.asarray(weights, dtype=float).ravel()
        if len(atoms) != len(weights):
            raise ValidationError(f"{len(atoms)} atoms but {len(weights)} weights")
        if not len(atoms):
            raise EmptyResultError("a measure needs at least one atom")
        if not (np.all(np.isfinite(atoms)) and np.all(np.isfinite(weights))):
            raise ValidationError("measure atoms and weights must be finite")
        if np.any(weights < 0):
            raise ValidationError("measure weights must be nonnegative")
        total = float(weights.sum())
        if abs(total - 1.0) > DEFAULTS["weight_tolerance"]:
            raise ValidationError(f"measure weights sum {total:.17g}, expected 1")
        if merge_radius < 0:
            raise ValidationError(f"merge radius must be >= 0, got {merge_radius}")

        # underflowed weights carry no mass
        positive = weights > 0
        atoms, weights, displacement = merge_atoms(atoms[positive], weights[positive], merge_radius, space)
        self.atoms = atoms
        self.weights = weights / weights.sum()
        self.merge_radius = float(merge_radius)
        self.space = space
        self.merge_error = float(merge_error) + displacement

    @classmethod
    def dirac(cls, point, space: Space = EUCLIDEAN) -> "DiscreteMeasure":
        return cls(np.atleast_2d(np.asarray(point, dtype=float)), [1.0], space=space)

    @property
    def dim(self) -> int:
        return self.atoms.shape[1]

    def __len__(self) -> int:
        return len(self.atoms)

    def __repr__(self) -> str:
        return f"DiscreteMeasure(atoms={len(self)}, d={self.dim}, merge_radius={self.merge_radius:g})"


def combine(
    measures: Sequence[DiscreteMeasure],
    coefficients: Sequence[float],
    merge_radius: float = 0.0,
) -> DiscreteMeasure:
    """Convex combination sum_k c_k * mu_k."""
    coefficients = np.asarray(coefficients, dtype=float)
    atoms = np.concatenate([m.atoms for m in measures])
    weights = np.concatenate([c * m.weights for c, m in zip(coefficients, measures)])
    inherited = float(np.dot(coefficients, [m.merge_error for m in measures]))
    return DiscreteMeasure(atoms, weights, merge_radius, measures[0].space, inherited)


def push_forward(map_: MapSpec, mu: DiscreteMeasure, merge_radius: float | None = None) -> DiscreteMeasure:
    """w#mu: atoms move, weights stay; coincident images merge."""
    radius = mu.merge_radius if merge_radius is None else merge_radius
    images = mu.space.normalize(map_.apply_many(mu.atoms))
    return DiscreteMeasure(images, mu.weights, radius, mu.space)


def markov_step(
    ifs: IFSystem,
    mu: DiscreteMeasure,
    merge_radius: float | None = None,
    budget: int = DEFAULTS["atom_budget"],
) -> DiscreteMeasure:
    """M(mu) = sum_i p_i * w_i#mu, then merged at the given radius."""
    p = ifs.require_weights()
    radius = mu.merge_radius if merge_radius is None else merge_radius
    if ifs.N * len(mu) > budget:
        raise BudgetExceededError("Markov step atoms before merging", ifs.N * len(mu), budget)
    atoms = np.concatenate([ifs.image(i, mu.atoms) for i in range(ifs.N)])
    weights = np.concatenate([p[i] * mu.weights for i in range(ifs.N)])
    return DiscreteMeasure(atoms, weights, radius, ifs.space)


def _distance(mu: DiscreteMeasure, nu: DiscreteMeasure) -> float:
    from measurekit.transport import monge_kantorovich

    return monge_kantorovich(mu, nu)[0]


@dataclass
class MeasureTrace:
    residuals: list[float] = field(default_factory=list)
    sizes: list[int] = field(default_factory=list)
    merge_error: float = 0.0
    converged: bool = False
    final_residual: float | None = None

    def to_dict(self) -> dict:
        return {
            "residuals": self.residuals,
            "sizes": self.sizes,
            "merge_error": self.merge_error,
            "converged": self.converged,
            "final_residual": self.final_residual,
        }


def invariant_measure(
    ifs: IFSystem,
    mu0: DiscreteMeasure,
    tol: float = DEFAULTS["tol"],
    max_iter: int = DEFAULTS["max_iter"],
    merge_radius: float = DEFAULTS["merge_radius"],
) -> tuple[DiscreteMeasure, MeasureTrace]:
    """Iterate M until d_MK(mu_k, mu_k+1) <= tol; report d_MK(M mu, mu) for the result."""
    if tol <= 0:
        raise ValidationError(f"tol must be positive, got {tol}")

    trace = MeasureTrace()
    current = mu0
    for k in range(max_iter):
        following = markov_step(ifs, current, merge_radius)
        step = _distance(current, following)
        trace.residuals.append(step)
        trace.sizes.append(len(following))
        trace.merge_error += following.merge_error
        logger.debug(f"Markov step {k}: {len(following)} atoms, d_MK {step:.6g}")
        current = following
        if step <= tol:
            trace.converged = True
            break

    if not trace.converged:
        raise NonConvergenceError(
            f"Markov iteration did not reach tol {tol:g} within {max_iter} steps",
            max_iter,
            trace.residuals[-1] if trace.residuals else None,
        )

    trace.final_residual = _distance(markov_step(ifs, current, 0.0), current)
    logger.info(f"Invariant measure: {len(current)} atoms after {len(trace.residuals)} steps, residual {trace.final_residual:.3g}")
    return current, trace


def mann_average(
    ifs: IFSystem,
    mu0: DiscreteMeasure,
    n: int,
    merge_radius: float = DEFAULTS["merge_radius"],
) -> tuple[DiscreteMeasure, float, dict]:
    """Cesaro average nu_n = (1/n) sum_{k<n} M^k mu0 and its residual d_MK(M nu_n, nu_n)."""
    if n < 1:
        raise ValidationError(f"n must be >= 1, got {n}")

    iterate = mu0
    average = mu0
    drift = mu0.merge_error
    for k in range(2, n + 1):
        iterate = markov_step(ifs, iterate, merge_radius)
        drift += iterate.merge_error
        iterate.merge_error = drift
        average = combine([average, iterate], [(k - 1) / k, 1 / k], merge_radius)
    merge_error = average.merge_error

    residual = _distance(markov_step(ifs, average, 0.0), average)
    info = {"n": n, "atoms": len(average), "merge_error": merge_error, "residual": residual}
    logger.info(f"Mann average n={n}: {len(average)} atoms, residual {residual:.3g}, merge error {merge_error:.3g}")
    return average, residual, info


def _coding_images(ifs: IFSystem, base: np.ndarray, symbols: np.ndarray) -> np.ndarray:
    """w_{s_1} o ... o w_{s_k}(base) for every row of symbols (0-based)."""
    points = np.repeat(base[None, :], len(symbols), axis=0)
    for column in range(symbols.shape[1] - 1, -1, -1):
        for i in range(ifs.N):
            mask = symbols[:, column] == i
            if mask.any():
                points[mask] = ifs.image(i, points[mask])
    return points


def bernoulli_pushforward(
    ifs: IFSystem,
    depth: int,
    samples: int = 10_000,
    seed: int = DEFAULTS["seed"],
    merge_radius: float = 0.0,
    probabilities: Sequence[float] | None = None,
    base=None,
    exact: bool | None = None,
) -> DiscreteMeasure:
    """Image of the Bernoulli measure under the coding map, truncated at `depth`.

    Exact mode enumerates all N^depth words with their cylinder weights
    (words in lexicographic order, first symbol outermost); otherwise
    `samples` i.i.d. words are drawn.
    """
    if depth < 1:
        raise ValidationError(f"depth must be >= 1, got {depth}")
    p = np.asarray(ifs.require_weights() if probabilities is None else probabilities, dtype=float)
    if p.shape != (ifs.N,) or np.any(p < 0) or abs(p.sum() - 1) > DEFAULTS["weight_tolerance"]:
        raise ValidationError(f"symbol probabilities must be a probability vector of length {ifs.N}")
    x0 = ifs.domain.center if base is None else np.atleast_1d(np.asarray(base, dtype=float))

    if exact is None:
        exact = ifs.N ** depth <= DEFAULTS["exact_words_budget"]

    if exact:
        if ifs.N ** depth > DEFAULTS["exact_words_budget"]:
            raise BudgetExceededError("exact Bernoulli words", ifs.N ** depth, DEFAULTS["exact_words_budget"])
        points = x0[None, :]
        weights = np.ones(1)
        for _ in range(depth):
            live = weights > 0
            points, weights = points[live], weights[live]
            points = np.concatenate([ifs.image(i, points) for i in range(ifs.N)])
            weights = np.concatenate([p[i] * weights for i in range(ifs.N)])
        return DiscreteMeasure(points, weights / weights.sum(), merge_radius, ifs.space)

    if depth * samples > DEFAULTS["word_budget"]:
        raise BudgetExceededError("sampled Bernoulli symbols", depth * samples, DEFAULTS["word_budget"])
    rng = np.random.default_rng(seed)
    cdf = np.cumsum(p)
    cdf[-1] = 1.0
    symbols = np.searchsorted(cdf, rng.random((samples, depth)), side="right")
    points = _coding_images(ifs, x0, symbols)
    return DiscreteMeasure(points, np.full(samples, 1 / samples), merge_radius, ifs.space)


def support_cloud(mu: DiscreteMeasure, weight_floor: float = 0.0) -> PointCloud:
    """Atoms carrying more than weight_floor."""
    keep = mu.weights > weight_floor
    if not keep.any():
        raise EmptyResultError(f"no atom carries more than {weight_floor:g}")
    return PointCloud(mu.atoms[keep], 0.0, space=mu.space)


def mass_within(mu: DiscreteMeasure, center, radius: float) -> float:
    center = np.atleast_1d(np.asarray(center, dtype=float))
    near = mu.space.distance(mu.atoms, center[None, :]) <= radius
    return float(mu.weights[near].sum())


def measure_mean(mu: DiscreteMeasure) -> np.ndarray:
    return mu.weights @ mu.atoms
