import json
import logging
from pathlib import Path
from typing import Any

import numpy as np
import pandas as pd

from codespace.drivers import (
    BernoulliDriver,
    ChampernowneDriver,
    Driver,
    ExplicitDriver,
    MarkovChainDriver,
    MinorantDriver,
    PeriodicDriver,
)
from codespace.words import Word
from config.config import DEFAULTS
from errors.exceptions import ExprSyntaxError, SpecValidationError, UnknownNameError, ValidationError
from exprdsl.expr import VARIABLES, parse
from hyperspace.cloud import PointCloud
from mapkit.maps import AffineMap, BuiltinMap, Box, ExprMap, IFSystem, MapSpec, Space
from measurekit.measures import DiscreteMeasure
from validators.validate import validate_ifs_spec

logger = logging.getLogger(__name__)

DRIVER_KINDS = ("champernowne", "periodic", "bernoulli", "markov", "minorant", "explicit")
MINORANT_DEFAULT_PARAMS = {"const": 0.1, "logpow": 1.0, "pow": 1.0, "sinpow": 1.0}


def _read_text(path: str | Path, label: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise ValidationError(f"cannot read {label} at {path}: {e.strerror or e}") from e


def _build_map(entry: dict, index: int, dim: int) -> MapSpec:
    kind = entry["type"]
    if kind == "affine":
        return AffineMap(entry["matrix"], entry["offset"])
    if kind == "builtin":
        return BuiltinMap(entry["name"], entry.get("params") or {}, dim)

    variables = VARIABLES[:dim]
    exprs = []
    for k, text in enumerate(entry["exprs"]):
        try:
            exprs.append(parse(text, variables))
        except (ExprSyntaxError, UnknownNameError) as e:
            raise SpecValidationError([f"/maps/{index}/exprs/{k}: {e}"]) from e
    return ExprMap(exprs)


def build_ifs(document: Any, name: str | None = None) -> IFSystem:
    """Turn a validated spec document into an IFSystem."""
    is_valid, errors = validate_ifs_spec(document)
    if not is_valid:
        raise SpecValidationError(errors)

    space_doc = document["space"]
    dim = space_doc["dim"]
    space = Space(space_doc.get("variant") or "euclidean")
    bounds = space_doc.get("bounds") or [[0.0, 1.0]] * dim
    maps = [_build_map(entry, index, dim) for index, entry in enumerate(document["maps"])]

    ifs = IFSystem(
        maps,
        weights=document.get("weights"),
        domain=Box.from_bounds(bounds),
        space=space,
        name=name or document.get("name"),
    )
    logger.debug(f"Built {ifs}")
    return ifs


def load_ifs(path: str | Path) -> IFSystem:
    text = _read_text(path, "IFS spec")
    try:
        document = json.loads(text)
    except json.JSONDecodeError as e:
        raise SpecValidationError([f"/: invalid JSON at line {e.lineno} column {e.colno}: {e.msg}"]) from e

    ifs = build_ifs(document, name=document.get("name") if isinstance(document, dict) else None)
    logger.info(f"Loaded {ifs} from {path}")
    return ifs


def _read_numeric_csv(path: str | Path, label: str) -> np.ndarray:
    if not Path(path).exists():
        raise ValidationError(f"{label} CSV not found at {path}")
    try:
        df = pd.read_csv(path, header=None, dtype=float)
    except (ValueError, pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise ValidationError(f"{label} CSV at {path} is not numeric: {e}") from e
    logger.debug(f"Read {len(df)} {label.lower()} rows")
    return df.to_numpy(dtype=float)


def read_cloud_csv(path: str | Path, space: Space | None = None, resolution: float = 0.0) -> PointCloud:
    """Headerless CSV, one point per row."""
    points = _read_numeric_csv(path, "Point")
    return PointCloud(points, resolution, space=space or Space())


def read_measure_csv(path: str | Path, space: Space | None = None) -> DiscreteMeasure:
    """Headerless CSV, one atom per row: weight first, then coordinates."""
    rows = _read_numeric_csv(path, "Measure")
    if rows.shape[1] < 2:
        raise ValidationError(f"measure CSV at {path} needs a weight column and at least one coordinate")
    return DiscreteMeasure(rows[:, 1:], rows[:, 0], space=space or Space())


def _read_transition_rows(path: str) -> np.ndarray:
    return _read_numeric_csv(path, "Transition matrix")


def parse_driver(
    text: str,
    N: int,
    seed: int = DEFAULTS["seed"],
    weights: np.ndarray | None = None,
) -> Driver:
    """Parse a --driver value.

    champernowne | periodic:1,2 | bernoulli[:p1,p2,...] | markov:PATH |
    minorant:FAMILY[:param] | explicit:1,2,1
    """
    kind, _, rest = text.partition(":")
    kind = kind.strip().lower()

    if kind == "champernowne":
        return ChampernowneDriver(N)
    if kind == "periodic":
        return PeriodicDriver(Word.parse(rest, N))
    if kind == "explicit":
        return ExplicitDriver(Word.parse(rest, N))
    if kind == "bernoulli":
        if rest:
            try:
                probabilities = [float(p) for p in rest.split(",")]
            except ValueError as e:
                raise ValidationError(f"bernoulli probabilities '{rest}' are not numbers") from e
        elif weights is not None:
            probabilities = list(weights)
        else:
            probabilities = [1.0 / N] * N
        if len(probabilities) != N:
            raise ValidationError(f"bernoulli driver has {len(probabilities)} probabilities for {N} maps")
        return BernoulliDriver(probabilities, seed)
    if kind == "markov":
        if not rest:
            raise ValidationError("markov driver needs a transition matrix path, e.g. markov:rows.csv")
        driver = MarkovChainDriver(_read_transition_rows(rest), seed)
        if driver.N != N:
            raise ValidationError(f"transition matrix is {driver.N}x{driver.N}, the IFS has {N} maps")
        return driver
    if kind == "minorant":
        family, _, param = rest.partition(":")
        if family not in MINORANT_DEFAULT_PARAMS:
            raise ValidationError(f"unknown minorant family '{family}', expected one of {sorted(MINORANT_DEFAULT_PARAMS)}")
        try:
            value = float(param) if param else MINORANT_DEFAULT_PARAMS[family]
        except ValueError as e:
            raise ValidationError(f"minorant parameter '{param}' is not a number") from e
        return MinorantDriver(N, family, value, seed)

    raise ValidationError(f"unknown driver '{text}', expected one of {list(DRIVER_KINDS)}")
