"""Chaos game: orbits x_n = w_{sigma_n}(x_{n-1}) and their omega-limit estimates."""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from codespace.drivers import Driver
from codespace.words import Word, is_disjunctive_upto
from config.config import DEFAULTS, THREADS
from errors.exceptions import AlphabetMismatchError, EmptyResultError, EscapeError, ValidationError
from hyperspace.cloud import PointCloud, excess, hausdorff
from mapkit.maps import IFSystem

logger = logging.getLogger(__name__)

TAIL_RADII = (0.5, 1.0, 10.0, 100.0, 1e6)
ESCAPE_CHECK_BLOCK = 1024


def default_burn_in(n: int) -> int:
    m = max(1000, n // 100)
    return m if m < n else n // 2


@dataclass
class OrbitConfig:
    x0: np.ndarray
    driver: Driver
    n: int
    burn_in: int | None = None
    stride: int = 1

    def __post_init__(self):
        self.x0 = np.atleast_1d(np.asarray(self.x0, dtype=float))
        if self.n < 1:
            raise ValidationError(f"orbit length must be >= 1, got {self.n}")
        if self.burn_in is None:
            self.burn_in = default_burn_in(self.n)
        if not 0 <= self.burn_in < self.n:
            raise ValidationError(f"burn-in must satisfy 0 <= m < n, got m={self.burn_in}, n={self.n}")
        if self.stride < 1:
            raise ValidationError(f"stride must be >= 1, got {self.stride}")


@dataclass
class OrbitResult:
    indices: np.ndarray
    points: np.ndarray
    symbols: np.ndarray
    N: int

    def tail(self, burn_in: int) -> np.ndarray:
        return self.points[self.indices > burn_in]

    def recorded_symbols(self) -> np.ndarray:
        """Symbol applied to reach each recorded point (0 for x_0)."""
        padded = np.concatenate([[0], self.symbols])
        return padded[self.indices]


def _check_alphabet(ifs: IFSystem, driver: Driver) -> None:
    if driver.N != ifs.N:
        raise AlphabetMismatchError(f"driver over 1..{driver.N} used with an IFS of {ifs.N} maps")


def _first_escape(block: np.ndarray, threshold: float) -> int | None:
    bad = ~np.all(np.isfinite(block) & (np.abs(block) <= threshold), axis=1)
    return int(np.flatnonzero(bad)[0]) if bad.any() else None


def _iterate(ifs: IFSystem, x0: np.ndarray, symbols: np.ndarray, threshold: float) -> np.ndarray:
    n = len(symbols)
    path = np.empty((n + 1, ifs.dim))
    path[0] = x = x0
    affine = ifs.all_affine() and not ifs.space.is_circle
    if affine:
        matrices = [m.matrix for m in ifs.maps]
        offsets = [m.offset for m in ifs.maps]

    for k in range(1, n + 1):
        s = int(symbols[k - 1])
        if affine:
            x = matrices[s - 1] @ x + offsets[s - 1]
        else:
            x = ifs.step(s, x)
            if not (np.all(np.isfinite(x)) and np.all(np.abs(x) <= threshold)):
                raise EscapeError(f"orbit left |x| <= {threshold:g} at step {k}", index=k, point=x)
        path[k] = x
        if affine and (k % ESCAPE_CHECK_BLOCK == 0 or k == n):
            start = k - (k - 1) % ESCAPE_CHECK_BLOCK
            bad = _first_escape(path[start:k + 1], threshold)
            if bad is not None:
                index = start + bad
                raise EscapeError(f"orbit left |x| <= {threshold:g} at step {index}", index=index, point=path[index])
    return path


def run_orbit(ifs: IFSystem, cfg: OrbitConfig, threshold: float = DEFAULTS["escape_threshold"]) -> OrbitResult:
    """x_n = w_{sigma_n}(x_{n-1}): the newest symbol acts last.

    Raises EscapeError (with the step index) once a coordinate exceeds
    the escape threshold or stops being finite.
    """
    _check_alphabet(ifs, cfg.driver)
    if cfg.x0.shape != (ifs.dim,):
        raise ValidationError(f"x0 has {cfg.x0.shape[0]} coordinates, the IFS acts on R^{ifs.dim}")

    symbols = cfg.driver.take(cfg.n)
    path = _iterate(ifs, ifs.space.normalize(cfg.x0), symbols, threshold)
    indices = np.arange(0, cfg.n + 1, cfg.stride)
    logger.debug(f"Orbit of {cfg.n} steps recorded at {len(indices)} indices")
    return OrbitResult(indices=indices, points=path[indices], symbols=symbols, N=ifs.N)


@dataclass
class OmegaEstimate:
    cloud: PointCloud
    burn_in: int
    tail_size: int
    stats: dict = field(default_factory=dict)


def tail_stats(points: np.ndarray) -> dict:
    norms = np.linalg.norm(points, axis=1)
    return {
        "max_abs": float(np.max(np.abs(points))),
        "outside_radius": {f"{r:g}": int(np.count_nonzero(norms > r)) for r in TAIL_RADII},
    }


def omega_limit(orbit: OrbitResult, burn_in: int, prune_eps: float, space=None) -> OmegaEstimate:
    """eps-net of the tail {x_n : n > burn_in}."""
    tail = orbit.tail(burn_in)
    if not len(tail):
        raise EmptyResultError(f"no recorded orbit points beyond burn-in {burn_in}")
    kwargs = {} if space is None else {"space": space}
    cloud = PointCloud(tail, prune_eps, **kwargs)
    return OmegaEstimate(cloud=cloud, burn_in=burn_in, tail_size=len(tail), stats=tail_stats(tail))


def sensitivity_burn_ins(n: int) -> list[int]:
    return sorted({n // 10, n // 4, n // 2})


def chaos_vs_attractor(
    ifs: IFSystem,
    cfg: OrbitConfig,
    reference: PointCloud,
    tol: float = 0.02,
    prune_eps: float | None = None,
) -> dict:
    """Compare the omega-limit estimate of one orbit with a reference set.

    An escaping orbit is a failed comparison with reason "orbit unbounded",
    not an exception.
    """
    if prune_eps is None:
        prune_eps = tol / 4
    try:
        orbit = run_orbit(ifs, cfg)
    except EscapeError as exc:
        logger.warning(f"Chaos game escaped: {exc}")
        report = {"tol": tol, "prune_eps": prune_eps, "n": cfg.n, "burn_in": cfg.burn_in, "reference_size": len(reference)}
        return {**report, "passed": False, "reason": "orbit unbounded", "escape": exc.details()}
    return compare_orbit(ifs, orbit, cfg, reference, tol, prune_eps)


def compare_orbit(
    ifs: IFSystem,
    orbit: OrbitResult,
    cfg: OrbitConfig,
    reference: PointCloud,
    tol: float = 0.02,
    prune_eps: float | None = None,
) -> dict:
    """Hausdorff check of an already computed orbit against a reference set."""
    if prune_eps is None:
        prune_eps = tol / 4
    report = {"tol": tol, "prune_eps": prune_eps, "n": cfg.n, "burn_in": cfg.burn_in, "reference_size": len(reference)}

    estimate = omega_limit(orbit, cfg.burn_in, prune_eps, ifs.space)
    to_reference = excess(estimate.cloud, reference)
    from_reference = excess(reference, estimate.cloud)
    distance = max(to_reference, from_reference)

    sensitivity = []
    for m in sensitivity_burn_ins(cfg.n):
        if m < cfg.n and len(orbit.tail(m)):
            tail_cloud = omega_limit(orbit, m, prune_eps, ifs.space).cloud
            sensitivity.append({"burn_in": m, "hausdorff": hausdorff(tail_cloud, reference), "size": len(tail_cloud)})

    passed = distance <= tol
    report.update(
        {
            "excess_omega_to_reference": to_reference,
            "excess_reference_to_omega": from_reference,
            "hausdorff": distance,
            "omega_size": len(estimate.cloud),
            "tail": estimate.stats,
            "sensitivity": sensitivity,
            "passed": passed,
        }
    )
    if not passed:
        report["reason"] = "omega-limit exceeds reference"
    logger.info(f"Chaos game vs reference: d_H={distance:.6g} (tol {tol:g}) -> {'PASS' if passed else 'FAIL'}")
    return report


def coupling_distances(ifs: IFSystem, x0, a0, driver: Driver, n: int) -> np.ndarray:
    """d(x_k, a_k), k = 0..n, for two orbits fed the same symbols."""
    _check_alphabet(ifs, driver)
    symbols = driver.take(n)
    threshold = DEFAULTS["escape_threshold"]
    xs = _iterate(ifs, ifs.space.normalize(np.atleast_1d(np.asarray(x0, dtype=float))), symbols, threshold)
    as_ = _iterate(ifs, ifs.space.normalize(np.atleast_1d(np.asarray(a0, dtype=float))), symbols, threshold)
    return ifs.space.distance(xs, as_)


def _trial(ifs: IFSystem, x0, driver: Driver, n: int, burn_in: int, k: int, prune_eps: float, reference, tol: float):
    cfg = OrbitConfig(x0=x0, driver=driver, n=n, burn_in=burn_in)
    result = {"seed": driver.seed}
    try:
        orbit = run_orbit(ifs, cfg)
    except EscapeError as exc:
        return {**result, "passed": False, "reason": "orbit unbounded", "escape": exc.details()}, None

    disjunctive, missing = is_disjunctive_upto(Word(tuple(orbit.symbols), ifs.N), k)
    result.update({"disjunctive": disjunctive, "missing": [list(w) for w in missing]})
    tail = orbit.tail(burn_in)
    if reference is not None:
        cloud = PointCloud(tail, prune_eps, space=ifs.space)
        result["hausdorff"] = hausdorff(cloud, reference)
        result["passed"] = result["hausdorff"] <= tol
    return result, tail


def stochastic_driver_run(
    ifs: IFSystem,
    x0,
    driver: Driver,
    n: int,
    trials: int,
    seed: int = DEFAULTS["seed"],
    reference: PointCloud | None = None,
    k: int = 6,
    tol: float = 0.02,
    burn_in: int | None = None,
    prune_eps: float | None = None,
) -> dict:
    """Independent seeded replicas of a stochastic driver, run in parallel."""
    if trials < 1:
        raise ValidationError(f"trials must be >= 1, got {trials}")
    _check_alphabet(ifs, driver)
    burn_in = default_burn_in(n) if burn_in is None else burn_in
    prune_eps = tol / 4 if prune_eps is None else prune_eps

    children = np.random.SeedSequence(seed).spawn(trials)
    replicas = [driver.clone(int(child.generate_state(1)[0])) for child in children]

    workers = max(1, min(THREADS, trials))
    logger.info(f"Running {trials} {driver.kind} trials of {n} steps on {workers} threads")
    with ThreadPoolExecutor(max_workers=workers) as pool:
        outcomes = list(
            pool.map(lambda d: _trial(ifs, x0, d, n, burn_in, k, prune_eps, reference, tol), replicas)
        )

    results = [r for r, _ in outcomes]
    tails = [t for _, t in outcomes if t is not None]
    report = {
        "driver": driver.describe(),
        "trials": results,
        "n": n,
        "burn_in": burn_in,
        "k": k,
        "disjunctive_count": sum(1 for r in results if r.get("disjunctive")),
    }
    if reference is not None:
        report["passed_count"] = sum(1 for r in results if r.get("passed"))
        if tails:
            pooled = PointCloud(np.concatenate(tails), prune_eps, space=ifs.space)
            report["pooled_hausdorff"] = hausdorff(pooled, reference)
    return report
