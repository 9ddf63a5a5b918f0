"""Exception hierarchy shared by every package.

The exit code of each class is the CLI contract: 2 for bad input, 3 for a
numeric failure of the dynamics, 1 for anything else.
"""
from typing import Any

import numpy as np


class IFSLabError(Exception):
    exit_code = 1
    reason = "internal error"

    def details(self) -> dict[str, Any]:
        return {}


class ValidationError(IFSLabError, ValueError):
    exit_code = 2
    reason = "validation error"


class NumericFailure(IFSLabError, ArithmeticError):
    exit_code = 3
    reason = "numeric failure"


def _as_list(point: Any) -> list[float] | None:
    if point is None:
        return None
    return [float(v) for v in np.atleast_1d(np.asarray(point, dtype=float))]


class ExprSyntaxError(ValidationError):
    reason = "expression syntax error"

    def __init__(self, message: str, offset: int, expected: set[str] | frozenset[str] = frozenset()):
        self.offset = offset
        self.expected = frozenset(expected)
        suffix = f"; expected one of {sorted(self.expected)}" if self.expected else ""
        super().__init__(f"{message} at byte {offset}{suffix}")

    def details(self) -> dict[str, Any]:
        return {"offset": self.offset, "expected": sorted(self.expected)}


class UnknownNameError(ValidationError):
    reason = "unknown name"

    def __init__(self, name: str, offset: int):
        self.name = name
        self.offset = offset
        super().__init__(f"unknown function or variable '{name}' at byte {offset}")

    def details(self) -> dict[str, Any]:
        return {"name": self.name, "offset": self.offset}


class UnboundVariableError(ValidationError):
    reason = "unbound variable"

    def __init__(self, name: str):
        self.name = name
        super().__init__(f"variable '{name}' is not bound")


class ExprDomainError(NumericFailure):
    reason = "expression domain error"

    def __init__(
        self,
        message: str,
        map_index: int | None = None,
        point: Any = None,
        index: int | None = None,
    ):
        self.message = message
        self.map_index = map_index
        self.point = _as_list(point)
        self.index = index
        where = ""
        if map_index is not None:
            where += f" in map {map_index}"
        if self.point is not None:
            where += f" at point {self.point}"
        super().__init__(f"{message}{where}")

    def located(self, map_index: int, point: Any) -> "ExprDomainError":
        return ExprDomainError(self.message, map_index=map_index, point=point)

    def details(self) -> dict[str, Any]:
        return {"map_index": self.map_index, "point": self.point}


class SymbolOutOfRangeError(ValidationError):
    reason = "symbol out of range"

    def __init__(self, symbol: int, n: int):
        self.symbol = symbol
        self.n = n
        super().__init__(f"symbol {symbol} outside alphabet 1..{n}")


class AlphabetMismatchError(ValidationError):
    reason = "alphabet mismatch"


class DegenerateRegionError(ValidationError):
    reason = "degenerate region"


class SpecValidationError(ValidationError):
    reason = "invalid IFS spec"

    def __init__(self, errors: list[str]):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors) if self.errors else "invalid IFS spec")

    def details(self) -> dict[str, Any]:
        return {"errors": self.errors}


class InfeasibleMarginalsError(ValidationError):
    reason = "infeasible marginals"


class EmptyResultError(ValidationError):
    reason = "empty result"


class NonConvergenceError(NumericFailure):
    reason = "non-convergence"

    def __init__(self, message: str, iterations: int, last_residual: float | None = None):
        self.iterations = iterations
        self.last_residual = last_residual
        super().__init__(message)

    def details(self) -> dict[str, Any]:
        return {"iterations": self.iterations, "last_residual": self.last_residual}


class EscapeError(NumericFailure):
    reason = "orbit unbounded"

    def __init__(self, message: str, index: int | None = None, point: Any = None):
        self.index = index
        self.point = _as_list(point)
        super().__init__(message)

    def details(self) -> dict[str, Any]:
        return {"index": self.index, "point": self.point}


class BudgetExceededError(NumericFailure):
    reason = "budget exceeded"

    def __init__(self, what: str, requested: int, budget: int):
        self.what = what
        self.requested = requested
        self.budget = budget
        super().__init__(f"{what}: {requested} exceeds budget {budget}")

    def details(self) -> dict[str, Any]:
        return {"what": self.what, "requested": self.requested, "budget": self.budget}


class TrappingError(NumericFailure):
    reason = "trapping precondition violated"

    def __init__(self, excess: float, prune_eps: float, worst_point: Any):
        self.excess = excess
        self.prune_eps = prune_eps
        self.worst_point = _as_list(worst_point)
        super().__init__(
            f"F(X0) is not inside the {prune_eps:g}-neighbourhood of X0: "
            f"excess {excess:.6g} at {self.worst_point}"
        )

    def details(self) -> dict[str, Any]:
        return {"excess": self.excess, "prune_eps": self.prune_eps, "worst_point": self.worst_point}


class CertificateError(NumericFailure):
    reason = "optimality not certified"
