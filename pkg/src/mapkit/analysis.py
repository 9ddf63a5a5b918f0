"""Numerical contraction-class analysis of maps and IFSs.

Sampled quantities (Lipschitz estimates, Rakotch envelopes) are lower bounds
on the true constants: they only see the pairs that were drawn.
"""
import itertools
import logging
from dataclasses import asdict, dataclass, field

import numpy as np

from config.config import DEFAULTS
from errors.exceptions import BudgetExceededError, DegenerateRegionError, ValidationError
from mapkit.maps import EUCLIDEAN, AffineMap, Box, ComposedMap, IFSystem, MapSpec, Space, compose_word
from mapkit.modulus import ComparisonFunction, iterate_modulus, rakotch

logger = logging.getLogger(__name__)

_EPS = np.finfo(float).eps


def _pairs(region: Box, samples: int, rng: np.random.Generator, scales: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Anchor points (corners, then uniform) and partners at the given distances."""
    corners = region.corners()
    n_corner = samples // 4
    anchors = np.concatenate([corners[np.arange(n_corner) % len(corners)], region.sample(rng, samples - n_corner)])

    directions = rng.standard_normal((samples, region.dim))
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    inward = np.sum(directions * (region.center - anchors), axis=1) < 0
    directions[inward] *= -1

    partners = np.clip(anchors + directions * scales[:, None], region.lo, region.hi)
    return anchors, partners


def _ratios(map_: MapSpec, x: np.ndarray, y: np.ndarray, space: Space) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    d_in = space.distance(x, y)
    keep = d_in > 0
    x, y, d_in = x[keep], y[keep], d_in[keep]
    wx = space.normalize(map_.apply_many(x))
    wy = space.normalize(map_.apply_many(y))
    d_out = space.distance(wx, wy)
    scale = max(1.0, float(np.max(np.abs(wx), initial=0.0)), float(np.max(np.abs(x), initial=0.0)))
    return d_in, d_out / d_in, np.full(len(d_in), scale)


def estimate_lipschitz(
    map_: MapSpec,
    region: Box,
    samples: int = DEFAULTS["lipschitz_samples"],
    rng_seed: int = DEFAULTS["seed"],
    space: Space = EUCLIDEAN,
) -> float:
    """Largest sampled ratio d(w(x), w(y)) / d(x, y); exact operator norm for affine maps."""
    if isinstance(map_, AffineMap) and not space.is_circle:
        return map_.operator_norm()
    if samples < 2:
        raise ValidationError(f"estimate_lipschitz needs at least 2 samples, got {samples}")
    if region.volume <= 0:
        raise DegenerateRegionError(f"cannot sample pairs in zero-volume region {region}")

    rng = np.random.default_rng(rng_seed)
    half = samples // 2
    diam = space.diameter(region)

    # half uniform pairs, half perturbation pairs at scales 1e-1 .. 1e-6 of the diameter
    uniform_x, uniform_y = region.sample(rng, half), region.sample(rng, half)
    scales = diam * 10.0 ** -(1 + np.arange(samples - half) % 6)
    near_x, near_y = _pairs(region, samples - half, rng, scales)

    x = np.concatenate([uniform_x, near_x])
    y = np.concatenate([uniform_y, near_y])
    _, ratios, _ = _ratios(map_, x, y, space)
    if not len(ratios):
        raise DegenerateRegionError(f"no distinct sample pairs in {region}")
    return float(ratios.max())


def rakotch_envelope(
    map_: MapSpec,
    region: Box,
    bins: int = DEFAULTS["envelope_bins"],
    samples: int = DEFAULTS["lipschitz_samples"],
    rng_seed: int = DEFAULTS["seed"],
    space: Space = EUCLIDEAN,
    min_scale: float = DEFAULTS["envelope_min_scale"],
) -> ComparisonFunction:
    """Nonincreasing step function lambda(t) bounding the sampled ratios at distance t.

    Distances (min_scale*diam, diam] are split into logarithmic bins; each bin
    keeps its largest ratio, then a suffix max from the right makes the table
    nonincreasing. Bins without pairs are marked uncovered.
    """
    if bins < 1:
        raise ValidationError(f"bins must be >= 1, got {bins}")
    if region.volume <= 0:
        raise DegenerateRegionError(f"cannot sample pairs in zero-volume region {region}")

    rng = np.random.default_rng(rng_seed)
    diam = space.diameter(region)
    edges = np.geomspace(min_scale * diam, diam, bins + 1)

    scales = np.exp(rng.uniform(np.log(edges[0]), np.log(edges[-1]), samples))
    x, y = _pairs(region, samples, rng, scales)
    x = np.concatenate([x, region.lo[None, :]])
    y = np.concatenate([y, region.hi[None, :]])

    d_in, ratios, scale = _ratios(map_, x, y, space)
    idx = np.searchsorted(edges, d_in, side="left") - 1
    in_range = (idx >= 0) & (idx < bins)

    per_bin = np.full(bins, -np.inf)
    np.maximum.at(per_bin, idx[in_range], ratios[in_range])
    coverage = np.isfinite(per_bin)
    if not coverage.any():
        raise DegenerateRegionError(f"no sampled pair fell into any distance bin of {region}")

    lam = np.maximum.accumulate(per_bin[::-1])[::-1]
    last = int(np.flatnonzero(coverage)[-1])
    lam[last + 1:] = lam[last]

    # rounding noise of a difference quotient at distance t
    noise = 16 * _EPS * float(scale.max()) * (1 + lam) / edges[:-1]
    logger.debug(f"Envelope: {int(coverage.sum())}/{bins} bins covered, lambda range [{lam.min():.4g}, {lam.max():.4g}]")
    return rakotch(edges[:-1], lam, coverage, noise)


@dataclass
class LinearInequality:
    """sum_j coeffs[j] * p_j < rhs over 1-based weight indices."""

    coeffs: dict[int, float]
    rhs: float
    text: str

    def holds(self, weights: np.ndarray) -> bool:
        return sum(c * weights[j - 1] for j, c in self.coeffs.items()) < self.rhs


def average_region(lipschitz: list[float]) -> tuple[int, list[LinearInequality]]:
    """Weight vectors making sum p_i c_i < 1, solved for every p except the pivot's.

    The pivot is the map with the smallest constant c; its weight is
    1 - (sum of the others). The region is nonempty iff min c < 1.
    """
    c = np.asarray(lipschitz, dtype=float)
    pivot = int(np.argmin(c))
    others = [j for j in range(len(c)) if j != pivot]

    inequalities = []
    coeffs: dict[int, float] = {}
    for j in others:
        coeffs = {**coeffs, j + 1: float(c[j] - c[pivot])}
        rhs = float(1 - c[pivot])
        if len(coeffs) == 1 and coeffs[j + 1] > 0:
            # one free weight: solve for it
            single = rhs / coeffs[j + 1]
            inequalities.append(LinearInequality({j + 1: 1.0}, single, f"p{j + 1} < {single:g}"))
        else:
            lhs = " + ".join(f"{v:g}*p{k}" for k, v in coeffs.items())
            inequalities.append(LinearInequality(coeffs, rhs, f"{lhs} < {rhs:g}"))

        simplex = {k: 1.0 for k in coeffs}
        lhs = " + ".join(f"p{k}" for k in simplex)
        inequalities.append(LinearInequality(simplex, 1.0, f"{lhs} < 1"))
    return pivot + 1, inequalities


@dataclass
class ClassificationReport:
    lipschitz: list[float]
    banach: bool
    edelstein_evidence: bool
    eventual_p: int | None
    per_map_eventual_p: list[int | None]
    pivot: int
    region: list[LinearInequality]
    region_nonempty: bool
    average_rakotch_possible: bool
    weights: list[float] | None = None
    average_sum: float | None = None
    average_contractive: bool | None = None
    coeffs: list[float] | None = None
    average_rakotch: bool | None = None
    envelope_max: list[float] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["region"] = [ineq.text for ineq in self.region]
        return out


def _word_lipschitz(ifs: IFSystem, word: tuple[int, ...], samples: int, rng_seed: int) -> float:
    composed = compose_word(ifs, word)
    return estimate_lipschitz(composed, ifs.domain, samples, rng_seed, ifs.space)


def _eventual_p(ifs: IFSystem, p_max: int, samples: int, rng_seed: int, margin: float) -> int | None:
    budget = DEFAULTS["eventual_budget"]
    for p in range(1, p_max + 1):
        if ifs.N ** p > budget:
            logger.warning(f"Eventual search stopped at p={p}: {ifs.N}^{p} words exceed budget {budget}")
            return None
        words = itertools.product(range(1, ifs.N + 1), repeat=p)
        if all(_word_lipschitz(ifs, w, samples, rng_seed) < 1 - margin for w in words):
            return p
    return None


def _map_eventual_p(ifs: IFSystem, i: int, p_max: int, samples: int, rng_seed: int, margin: float) -> int | None:
    for p in range(1, p_max + 1):
        if _word_lipschitz(ifs, (i + 1,) * p, samples, rng_seed) < 1 - margin:
            return p
    return None


def classify(
    ifs: IFSystem,
    coeffs: list[float] | None = None,
    p_max: int = DEFAULTS["p_max"],
    samples: int = DEFAULTS["lipschitz_samples"],
    rng_seed: int = DEFAULTS["seed"],
    margin: float = DEFAULTS["verdict_margin"],
    bins: int = DEFAULTS["envelope_bins"],
) -> ClassificationReport:
    if p_max < 1:
        raise ValidationError(f"p_max must be >= 1, got {p_max}")
    if coeffs is not None:
        if len(coeffs) != ifs.N:
            raise ValidationError(f"{len(coeffs)} coefficients supplied for {ifs.N} maps")
        ifs.require_weights()

    lipschitz = [estimate_lipschitz(m, ifs.domain, samples, rng_seed, ifs.space) for m in ifs.maps]
    envelopes = [rakotch_envelope(m, ifs.domain, bins, samples, rng_seed, ifs.space) for m in ifs.maps]
    banach_ok = all(lip < 1 - margin for lip in lipschitz)
    edelstein = all(env.is_contractive for env in envelopes)
    pivot, region = average_region(lipschitz)
    region_nonempty = min(lipschitz) < 1 - margin

    report = ClassificationReport(
        lipschitz=lipschitz,
        banach=banach_ok,
        edelstein_evidence=edelstein,
        eventual_p=_eventual_p(ifs, p_max, samples, rng_seed, margin),
        per_map_eventual_p=[_map_eventual_p(ifs, i, p_max, samples, rng_seed, margin) for i in range(ifs.N)],
        pivot=pivot,
        region=region,
        region_nonempty=region_nonempty,
        average_rakotch_possible=edelstein or region_nonempty,
        envelope_max=[float(env.values[env.coverage].max()) for env in envelopes],
        notes=[
            "Lipschitz and envelope values are sampled lower bounds",
            "on a compact domain Edelstein and Rakotch contractivity coincide; only envelope evidence is reported",
        ],
    )

    if ifs.weights is not None:
        weights = ifs.weights
        report.weights = weights.tolist()
        report.average_sum = float(np.dot(weights, lipschitz))
        report.average_contractive = report.average_sum < 1 - margin

    if coeffs is not None:
        c = np.asarray(coeffs, dtype=float)
        feasible = float(np.dot(ifs.weights, c)) <= 1 + DEFAULTS["weight_tolerance"]
        below = all(env.below(ci) for env, ci in zip(envelopes, c))
        report.coeffs = c.tolist()
        report.average_rakotch = bool(feasible and below and np.all(c > 0))

    if not all(isinstance(m, AffineMap) for m in ifs.maps) or ifs.space.is_circle:
        report.notes.append(f"sampled with {samples} pairs per map, seed {rng_seed}")
    logger.info(f"Classified {ifs!r}: banach={report.banach}, eventual_p={report.eventual_p}")
    return report


def remetrized_distance(
    ifs: IFSystem,
    x,
    y,
    depth: int,
    a_seq: list[float] | None = None,
    phi: ComparisonFunction | None = None,
) -> tuple[float, float | None]:
    """max over k <= depth and |alpha| = k of a_k * d(w_alpha(x), w_alpha(y)).

    Returns the value and, when a joined modulus phi is supplied, the tail
    bound 2 * phi^depth(diam(domain)) on what deeper levels could add.
    """
    if depth < 0:
        raise ValidationError(f"depth must be >= 0, got {depth}")
    if a_seq is None:
        a_seq = [2 - 1 / (k + 1) for k in range(depth + 1)]
    a = np.asarray(a_seq, dtype=float)
    if len(a) < depth + 1:
        raise ValidationError(f"a_seq has {len(a)} terms, depth {depth} needs {depth + 1}")
    a = a[: depth + 1]
    if np.any(a < 1) or np.any(a > 2) or np.any(np.diff(a) <= 0):
        raise ValidationError("a_seq must be strictly increasing within [1, 2]")

    evaluations = sum(ifs.N ** k for k in range(depth + 1))
    if evaluations > DEFAULTS["word_budget"]:
        raise BudgetExceededError("remetrized distance word evaluations", evaluations, DEFAULTS["word_budget"])

    xs = np.atleast_2d(np.asarray(x, dtype=float)).reshape(1, -1)
    ys = np.atleast_2d(np.asarray(y, dtype=float)).reshape(1, -1)
    value = 0.0
    for k in range(depth + 1):
        value = max(value, float(a[k] * ifs.space.distance(xs, ys).max()))
        if k < depth:
            xs = np.concatenate([ifs.image(i, xs) for i in range(ifs.N)])
            ys = np.concatenate([ifs.image(i, ys) for i in range(ifs.N)])

    bound = None
    if phi is not None:
        bound = 2 * iterate_modulus(phi, ifs.space.diameter(ifs.domain), depth)
    return value, bound


def tarafdar_profile(
    map_: MapSpec,
    region: Box,
    k_max: int,
    grid: int = DEFAULTS["grid_points"],
    space: Space = EUCLIDEAN,
) -> list[float]:
    """Diameters of w^k(grid of region), k = 1..k_max."""
    points = region.grid(grid)
    diameters = []
    iterate = ComposedMap([map_], space)
    for _ in range(k_max):
        points = np.unique(iterate.apply_many(points), axis=0)
        diameters.append(space.diameter_of(points))
    return diameters
