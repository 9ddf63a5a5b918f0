"""Comparison functions: the moduli phi with d(w(x), w(y)) <= phi(d(x, y)).

Four kinds:
  banach     phi(t) = lam * t
  rakotch    phi(t) = lam(t) * t, lam a nonincreasing step function
  tabulated  phi(t) = min(t, step(t))
  join       phi(t) = max of its members at t

Step functions are right-continuous on their knots; below the first knot
the first value applies.
"""
import logging
from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np

from errors.exceptions import ValidationError

logger = logging.getLogger(__name__)

KINDS = ("banach", "rakotch", "tabulated", "join")


@dataclass(frozen=True, eq=False)
class ComparisonFunction:
    kind: str
    lam: float | None = None
    knots: np.ndarray | None = None
    values: np.ndarray | None = None
    coverage: np.ndarray | None = None
    noise: np.ndarray | None = field(default=None, repr=False)
    members: tuple["ComparisonFunction", ...] | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValidationError(f"unknown comparison function kind '{self.kind}'")
        if self.kind == "banach":
            if self.lam is None or not 0 <= self.lam < 1:
                raise ValidationError(f"banach modulus needs 0 <= lambda < 1, got {self.lam}")
            return
        if self.kind == "join":
            if not self.members:
                raise ValidationError("joined modulus needs at least one member")
            return
        if self.knots is None or self.values is None or len(self.knots) != len(self.values) or not len(self.knots):
            raise ValidationError("tabulated modulus needs matching, nonempty knots and values")
        if np.any(np.diff(self.knots) <= 0):
            raise ValidationError("modulus knots must be strictly increasing")
        if self.kind == "rakotch" and np.any(np.diff(self.values) > 0):
            raise ValidationError("rakotch lambda(t) must be nonincreasing")
        if self.kind == "tabulated" and np.any(np.diff(self.values) < 0):
            raise ValidationError("tabulated phi(t) must be nondecreasing")

    def _step(self, t: np.ndarray) -> np.ndarray:
        idx = np.clip(np.searchsorted(self.knots, t, side="right") - 1, 0, len(self.knots) - 1)
        return self.values[idx]

    def lam_at(self, t: float | np.ndarray) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        if self.kind == "banach":
            return np.full_like(t, self.lam)
        if self.kind == "rakotch":
            return self._step(t)
        if self.kind == "join":
            return np.max([np.asarray(m.lam_at(t)) for m in self.members], axis=0)
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(t > 0, self(t) / t, 0.0)

    def __call__(self, t: float | np.ndarray) -> float | np.ndarray:
        t_arr = np.asarray(t, dtype=float)
        if self.kind == "banach":
            out = self.lam * t_arr
        elif self.kind == "rakotch":
            out = self._step(t_arr) * t_arr
        elif self.kind == "join":
            out = np.max([np.asarray(m(t_arr)) for m in self.members], axis=0)
        else:
            out = np.minimum(t_arr, self._step(t_arr))
        out = np.where(t_arr > 0, out, 0.0)
        return float(out) if out.ndim == 0 else out

    def below(self, c: float, resolution: float = 1e-12) -> bool:
        """Evidence that lambda(t) < c for every covered t > 0.

        A bin fails when its lambda exceeds c beyond the bin's rounding noise,
        or when it sits within noise of c at a scale where the noise itself
        is below `resolution`.
        """
        if self.kind == "banach":
            return self.lam < c
        if self.kind == "join":
            return all(m.below(c, resolution) for m in self.members)
        lam = self.values if self.kind == "rakotch" else self.lam_at(self.knots)
        covered = self.coverage if self.coverage is not None else np.ones(len(lam), dtype=bool)
        noise = self.noise if self.noise is not None else np.zeros(len(lam))
        above = lam > c + noise
        level = (lam >= c - noise) & (noise <= resolution)
        return not bool(np.any(covered & (above | level)))

    @property
    def is_contractive(self) -> bool:
        return self.below(1.0)

    def to_dict(self) -> dict:
        if self.kind == "banach":
            return {"kind": "banach", "lambda": self.lam}
        if self.kind == "join":
            return {"kind": "join", "members": [m.to_dict() for m in self.members]}
        out = {"kind": self.kind, "knots": self.knots.tolist(), "values": self.values.tolist()}
        if self.coverage is not None:
            out["coverage"] = self.coverage.tolist()
        return out


def banach(lam: float) -> ComparisonFunction:
    return ComparisonFunction("banach", lam=float(lam))


def rakotch(
    knots: Sequence[float],
    lambdas: Sequence[float],
    coverage: Sequence[bool] | None = None,
    noise: Sequence[float] | None = None,
) -> ComparisonFunction:
    return ComparisonFunction(
        "rakotch",
        knots=np.asarray(knots, dtype=float),
        values=np.asarray(lambdas, dtype=float),
        coverage=None if coverage is None else np.asarray(coverage, dtype=bool),
        noise=None if noise is None else np.asarray(noise, dtype=float),
    )


def tabulated(knots: Sequence[float], values: Sequence[float]) -> ComparisonFunction:
    return ComparisonFunction("tabulated", knots=np.asarray(knots, dtype=float), values=np.asarray(values, dtype=float))


def _coverage_at(phi: ComparisonFunction, t: np.ndarray) -> np.ndarray:
    if phi.kind == "banach" or phi.coverage is None:
        return np.ones(len(t), dtype=bool)
    idx = np.clip(np.searchsorted(phi.knots, t, side="right") - 1, 0, len(phi.knots) - 1)
    return phi.coverage[idx]


def _noise_at(phi: ComparisonFunction, t: np.ndarray) -> np.ndarray:
    if phi.kind == "banach" or phi.noise is None:
        return np.zeros(len(t))
    idx = np.clip(np.searchsorted(phi.knots, t, side="right") - 1, 0, len(phi.knots) - 1)
    return phi.noise[idx]


def modulus_join(phis: Sequence[ComparisonFunction]) -> ComparisonFunction:
    """Pointwise maximum of the moduli.

    Banach and rakotch members collapse to one rakotch table on the union of
    their knots. Once a tabulated member is present the members are kept and
    evaluated at t, since min(t, step(t)) is not a step function in t.
    """
    if not phis:
        raise ValidationError("modulus_join needs at least one comparison function")
    if len(phis) == 1:
        return phis[0]
    if all(p.kind == "banach" for p in phis):
        return banach(max(p.lam for p in phis))

    if any(p.kind in ("tabulated", "join") for p in phis):
        members = [m for p in phis for m in (p.members if p.kind == "join" else (p,))]
        return ComparisonFunction("join", members=tuple(members))

    knots = np.unique(np.concatenate([p.knots for p in phis if p.kind != "banach"]))
    lambdas = np.max([np.atleast_1d(p.lam_at(knots)) for p in phis], axis=0)
    coverage = np.all([_coverage_at(p, knots) for p in phis], axis=0)
    noise = np.max([_noise_at(p, knots) for p in phis], axis=0)
    return rakotch(knots, lambdas, coverage, noise)


def iterate_modulus(phi: ComparisonFunction, t: float, k: int) -> float:
    """phi^k(t), the k-fold composition."""
    if t < 0 or k < 0:
        raise ValidationError(f"iterate_modulus needs t >= 0 and k >= 0, got t={t}, k={k}")
    value = float(t)
    for _ in range(k):
        value = float(phi(value))
        if value == 0.0:
            break
    return value


def decays_below(phi: ComparisonFunction, t: float, eps: float, k_max: int) -> bool:
    value = float(t)
    for _ in range(k_max + 1):
        if value <= eps:
            return True
        value = float(phi(value))
    return False
