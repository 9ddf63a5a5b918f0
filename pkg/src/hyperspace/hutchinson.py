"""Hutchinson operator on point clouds, attractor iteration and maximal attractors."""
import logging
from dataclasses import dataclass, field

import numpy as np

from config.config import DEFAULTS
from errors.exceptions import BudgetExceededError, EscapeError, TrappingError, ValidationError
from hyperspace.cloud import PointCloud, excess, excess_witness, hausdorff
from mapkit.maps import IFSystem

logger = logging.getLogger(__name__)


def _escape_box(ifs: IFSystem):
    return ifs.domain.inflate(DEFAULTS["escape_inflation"])


def images(ifs: IFSystem, points: np.ndarray, budget: int = DEFAULTS["cloud_budget"]) -> np.ndarray:
    """Raw union of w_i(points) over all maps, map-major order; no pruning."""
    requested = ifs.N * len(points)
    if requested > budget:
        raise BudgetExceededError("Hutchinson image size (prune_eps too small?)", requested, budget)

    out = np.concatenate([ifs.image(i, points) for i in range(ifs.N)])
    box = _escape_box(ifs)
    bad = ~(np.all(np.isfinite(out), axis=1) & box.contains(out))
    if bad.any():
        index = int(np.flatnonzero(bad)[0])
        raise EscapeError(
            f"image of map {index // len(points) + 1} left the escape box {box.to_bounds()}",
            index=index,
            point=out[index],
        )
    return out


def hutchinson(ifs: IFSystem, cloud: PointCloud, prune_eps: float = 0.0) -> PointCloud:
    """F(S) = union of w_i(S), then eps-net pruned in lexicographic order."""
    if prune_eps < 0:
        raise ValidationError(f"prune_eps must be >= 0, got {prune_eps}")
    return PointCloud(images(ifs, cloud.points), prune_eps, space=ifs.space)


@dataclass
class ConvergenceTrace:
    prune_eps: float
    tol: float
    records: list[dict] = field(default_factory=list)
    converged: bool = False

    def add(self, k: int, size: int, step: float, residual: float) -> None:
        self.records.append({"k": k, "size": size, "step": step, "residual": residual})

    @property
    def steps(self) -> list[float]:
        return [r["step"] for r in self.records]

    def ratios(self) -> list[float]:
        steps = self.steps
        return [b / a for a, b in zip(steps, steps[1:]) if a > 0]

    def to_dict(self) -> dict:
        return {
            "prune_eps": self.prune_eps,
            "tol": self.tol,
            "converged": self.converged,
            "records": self.records,
            "pruning_error_per_step": self.prune_eps / 2,
        }


def attractor(
    ifs: IFSystem,
    seed: PointCloud,
    tol: float = DEFAULTS["tol"],
    max_iter: int = DEFAULTS["max_iter"],
    prune_eps: float | None = None,
    budget: int = DEFAULTS["cloud_budget"],
) -> tuple[PointCloud, ConvergenceTrace]:
    """Iterate S <- F(S) until d_H(S_k, S_k+1) <= tol or max_iter is reached."""
    if tol <= 0:
        raise ValidationError(f"tol must be positive, got {tol}")
    if prune_eps is None:
        prune_eps = tol / 4

    trace = ConvergenceTrace(prune_eps=prune_eps, tol=tol)
    current = seed
    for k in range(max_iter):
        raw = images(ifs, current.points, budget)
        following = PointCloud(raw, prune_eps, space=ifs.space)
        step = hausdorff(current, following)
        residual = hausdorff(raw, current.points, ifs.space)
        trace.add(k, len(following), step, residual)
        logger.debug(f"Hutchinson step {k}: size {len(following)}, step {step:.6g}, residual {residual:.6g}")
        current = following
        if step <= tol:
            trace.converged = True
            break

    if trace.converged:
        logger.info(f"Attractor converged after {len(trace.records)} steps with {len(current)} points")
    else:
        logger.warning(f"Attractor did not reach tol {tol:g} within {max_iter} steps")
    return current, trace


def invariance_residual(ifs: IFSystem, cloud: PointCloud, prune_eps: float = 0.0) -> float:
    """d_H(F(A), A)."""
    return hausdorff(hutchinson(ifs, cloud, prune_eps), cloud)


def maximal_attractor(ifs: IFSystem, x0: PointCloud, n: int, prune_eps: float) -> tuple[PointCloud, dict]:
    """F^n(X0) for a trapping set X0, the decreasing approximant of the maximal invariant set.

    X0 must satisfy F(X0) within prune_eps of X0.
    """
    if n < 0:
        raise ValidationError(f"n must be >= 0, got {n}")

    trapping, worst = excess_witness(images(ifs, x0.points), x0.points, ifs.space)
    if trapping > prune_eps:
        raise TrappingError(trapping, prune_eps, worst)

    excesses = []
    current = x0
    for _ in range(n):
        following = hutchinson(ifs, current, prune_eps)
        excesses.append(excess(following, current))
        current = following

    report = {
        "n": n,
        "prune_eps": prune_eps,
        "trapping_excess": trapping,
        "excesses": excesses,
        "monotone": all(e <= prune_eps for e in excesses),
        "size": len(current),
    }
    logger.info(f"Maximal attractor approximant after {n} steps: {len(current)} points, monotone={report['monotone']}")
    return current, report
