"""Exact Monge-Kantorovich distance between discrete measures.

The transportation problem is solved with POT's network simplex; the dual
potentials it returns certify optimality.
"""
import logging
from dataclasses import dataclass

import numpy as np
import ot

from config.config import DEFAULTS
from errors.exceptions import BudgetExceededError, CertificateError, InfeasibleMarginalsError, ValidationError
from mapkit.analysis import estimate_lipschitz
from mapkit.maps import IFSystem
from mapkit.modulus import ComparisonFunction
from measurekit.measures import DiscreteMeasure, markov_step

logger = logging.getLogger(__name__)

MARGINAL_TOLERANCE = 1e-10
CERTIFICATE_TOLERANCE = 1e-9
MAX_SIMPLEX_ITERATIONS = 10_000_000


@dataclass
class TransportPlan:
    sources: np.ndarray
    targets: np.ndarray
    masses: np.ndarray
    cost: float

    def marginals(self, n_sources: int, n_targets: int) -> tuple[np.ndarray, np.ndarray]:
        rows = np.bincount(self.sources, weights=self.masses, minlength=n_sources)
        cols = np.bincount(self.targets, weights=self.masses, minlength=n_targets)
        return rows, cols

    def recomputed_cost(self, mu: DiscreteMeasure, nu: DiscreteMeasure) -> float:
        d = mu.space.distance(mu.atoms[self.sources], nu.atoms[self.targets])
        return float(np.sum(self.masses * d))

    def as_rows(self) -> list[tuple[int, int, float]]:
        return [(int(s), int(t), float(m)) for s, t, m in zip(self.sources, self.targets, self.masses)]


def _certify(plan: np.ndarray, cost: np.ndarray, u: np.ndarray, v: np.ndarray, a: np.ndarray, b: np.ndarray, value: float) -> dict:
    scale = max(1.0, float(cost.max()))
    reduced = cost - u[:, None] - v[None, :]
    dual_violation = float(max(0.0, -reduced.min()))
    support = plan > 0
    slackness = float(np.abs(reduced[support]).max()) if support.any() else 0.0
    gap = abs(float(a @ u + b @ v) - value)
    certificate = {"dual_violation": dual_violation, "slackness": slackness, "duality_gap": gap, "scale": scale}
    if max(dual_violation, slackness, gap) > CERTIFICATE_TOLERANCE * scale:
        raise CertificateError(f"transport optimality not certified: {certificate}")
    return certificate


def monge_kantorovich(
    mu: DiscreteMeasure,
    nu: DiscreteMeasure,
    budget: int = DEFAULTS["transport_budget"],
) -> tuple[float, TransportPlan]:
    """min over couplings of sum mass * d(x, y), with the optimal plan."""
    if mu.space != nu.space:
        raise ValidationError(f"measures live on different spaces: {mu.space} and {nu.space}")
    if mu.dim != nu.dim:
        raise ValidationError(f"measures live in R^{mu.dim} and R^{nu.dim}")
    size = len(mu) * len(nu)
    if size > budget:
        raise BudgetExceededError("transport problem size", size, budget)

    a, b = mu.weights, nu.weights
    for name, w in (("source", a), ("target", b)):
        if abs(float(w.sum()) - 1.0) > MARGINAL_TOLERANCE or np.any(w < 0):
            raise InfeasibleMarginalsError(f"{name} weights are not a probability vector (sum {float(w.sum()):.17g})")

    cost = mu.space.pairwise(mu.atoms, nu.atoms)
    plan, log = ot.emd(a, b, cost, numItermax=MAX_SIMPLEX_ITERATIONS, log=True)
    if log.get("result_code") != 1 or log.get("warning"):
        raise CertificateError(f"network simplex did not finish: {log.get('warning')}")

    value = float(np.sum(plan * cost))
    certificate = _certify(plan, cost, np.asarray(log["u"]), np.asarray(log["v"]), a, b, value)

    sources, targets = np.nonzero(plan > 0)
    result = TransportPlan(sources=sources, targets=targets, masses=plan[sources, targets], cost=value)
    logger.debug(f"d_MK over {len(mu)}x{len(nu)} atoms = {value:.12g} (certificate {certificate})")
    return value, result


def markov_contraction_ratio(
    ifs: IFSystem,
    mu: DiscreteMeasure,
    nu: DiscreteMeasure,
    merge_radius: float = 0.0,
    moduli: list[ComparisonFunction] | None = None,
) -> dict:
    """d_MK(M mu, M nu) / d_MK(mu, nu) against sum p_i Lip(w_i) (or sum p_i phi_i(t) / t)."""
    p = ifs.require_weights()
    before = monge_kantorovich(mu, nu)[0]
    lipschitz = [estimate_lipschitz(m, ifs.domain, space=ifs.space) for m in ifs.maps]
    report = {"before": before, "lipschitz_bound": float(np.dot(p, lipschitz))}
    if before == 0:
        return {**report, "identical": True, "after": 0.0, "ratio": None}

    after = monge_kantorovich(markov_step(ifs, mu, merge_radius), markov_step(ifs, nu, merge_radius))[0]
    report.update({"identical": False, "after": after, "ratio": after / before})
    if moduli is not None:
        report["modulus_bound"] = float(sum(pi * phi(before) for pi, phi in zip(p, moduli)) / before)
    return report
