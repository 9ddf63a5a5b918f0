"""Coding map evaluation and Williams fixed-point sets."""
import logging

import numpy as np

from codespace.words import Word, all_words, as_word
from config.config import DEFAULTS
from errors.exceptions import BudgetExceededError, NonConvergenceError, ValidationError
from hyperspace.cloud import PointCloud
from mapkit.maps import IFSystem, compose_word, picard_fixed_point
from mapkit.modulus import ComparisonFunction, iterate_modulus

logger = logging.getLogger(__name__)


def coding_point(
    ifs: IFSystem,
    alpha: Word | list[int],
    base=None,
    phi: ComparisonFunction | None = None,
) -> tuple[np.ndarray, float | None]:
    """w_{alpha_1} o ... o w_{alpha_k}(base), with alpha_k applied first.

    With a modulus phi, also returns phi^k(diam(domain)), which bounds the
    distance to the coding-map image of every infinite extension of alpha.
    """
    alpha = as_word(alpha, ifs.N)
    if not len(alpha):
        raise ValidationError("coding_point needs a nonempty word")
    if alpha.N != ifs.N:
        raise ValidationError(f"word over 1..{alpha.N} used with an IFS of {ifs.N} maps")

    x = ifs.domain.center if base is None else np.atleast_1d(np.asarray(base, dtype=float))
    for symbol in reversed(alpha.symbols):
        x = ifs.step(symbol, x)

    bound = None
    if phi is not None:
        bound = iterate_modulus(phi, ifs.space.diameter(ifs.domain), len(alpha))
    return x, bound


def williams_points(
    ifs: IFSystem,
    k_max: int,
    tol: float = DEFAULTS["tol"],
    max_iter: int = DEFAULTS["max_iter"],
) -> PointCloud:
    """Fixed points of w_alpha for every word with 1 <= |alpha| <= k_max."""
    if k_max < 1:
        raise ValidationError(f"k_max must be >= 1, got {k_max}")
    words = sum(ifs.N ** k for k in range(1, k_max + 1))
    if words > DEFAULTS["williams_budget"]:
        raise BudgetExceededError("Williams word enumeration", words, DEFAULTS["williams_budget"])

    start = ifs.domain.center
    points = []
    for word in all_words(ifs.N, k_max):
        try:
            x, _ = picard_fixed_point(compose_word(ifs, word), start, tol, max_iter, ifs.space)
        except NonConvergenceError as exc:
            raise NonConvergenceError(
                f"no fixed point for word {Word(word, ifs.N)}: {exc}", exc.iterations, exc.last_residual
            ) from exc
        points.append(x)

    cloud = PointCloud(np.array(points), tol, space=ifs.space)
    logger.info(f"Williams set up to length {k_max}: {words} words, {len(cloud)} distinct fixed points")
    return cloud


def cylinder_diameters(ifs: IFSystem, alpha: Word | list[int], grid: int = DEFAULTS["grid_points"]) -> list[float]:
    """diam(w_{alpha|k}(grid of domain)) for k = 1..|alpha|."""
    alpha = as_word(alpha, ifs.N)
    points = ifs.domain.grid(grid)
    diameters = []
    for k in range(1, len(alpha) + 1):
        image = compose_word(ifs, alpha.symbols[:k]).apply_many(points)
        diameters.append(ifs.space.diameter_of(np.unique(ifs.space.normalize(image), axis=0)))
    return diameters
