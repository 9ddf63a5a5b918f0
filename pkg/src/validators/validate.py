import logging
import math
from typing import Any

import yaml

from config.config import CONFIG_DIR

logger = logging.getLogger(__name__)


def _load_spec_rules() -> dict[str, Any]:
    config_path = CONFIG_DIR / "ifs_spec_rules.yaml"

    if not config_path.exists():
        logger.warning("IFS spec rules config not found at %s", config_path)
        return {}

    with open(config_path, encoding="utf-8") as f:
        data = yaml.safe_load(f) or {}

    return data


SPEC_RULES = _load_spec_rules()


def _is_number(value: Any) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool) and math.isfinite(value)


def _validate_field(value: Any, spec: dict[str, Any]) -> bool:
    """Check if a single field value passes its validation rules."""
    field_type = spec.get("type")
    min_val = spec.get("min")
    max_val = spec.get("max")
    allowed = spec.get("allowed")
    allow_null = spec.get("allow_null", False)

    if value is None:
        return allow_null

    if field_type == "bool":
        return isinstance(value, bool)
    if field_type == "int" and (not isinstance(value, int) or isinstance(value, bool)):
        return False
    if field_type == "number" and not _is_number(value):
        return False
    if field_type == "string" and not isinstance(value, str):
        return False
    if allowed is not None and value not in allowed:
        return False

    try:
        if min_val is not None:
            if value < min_val or (spec.get("exclusive_min") and value == min_val):
                return False
        if max_val is not None and value > max_val:
            return False
        return True
    except TypeError:
        return False


def _rule(*path: str) -> dict[str, Any]:
    node: Any = SPEC_RULES
    for key in path:
        node = (node or {}).get(key, {})
    return node or {}


def _validate_space(space: Any, errors: list[str]) -> tuple[int | None, str]:
    if not isinstance(space, dict):
        errors.append("/space: must be an object")
        return None, "euclidean"

    dim = space.get("dim")
    if not _validate_field(dim, _rule("space", "dim")):
        errors.append(f"/space/dim: {dim!r} is not an integer in 1..3")
        dim = None

    variant = space.get("variant")
    if not _validate_field(variant, _rule("space", "variant")):
        errors.append(f"/space/variant: {variant!r} is not one of {_rule('space', 'variant').get('allowed')}")
    variant = variant or "euclidean"

    bounds = space.get("bounds")
    if bounds is None:
        if variant != "circle":
            errors.append("/space/bounds: required for a euclidean space")
        return dim, variant
    if not isinstance(bounds, list) or (dim is not None and len(bounds) != dim):
        errors.append(f"/space/bounds: expected {dim} [lo, hi] pairs")
        return dim, variant
    for k, pair in enumerate(bounds):
        if not (isinstance(pair, list) and len(pair) == 2 and all(_validate_field(v, _rule("space", "bound")) for v in pair)):
            errors.append(f"/space/bounds/{k}: expected [lo, hi] with finite numbers")
        elif pair[0] >= pair[1]:
            errors.append(f"/space/bounds/{k}: lo {pair[0]} must be below hi {pair[1]}")
    return dim, variant


def _validate_numbers(values: Any, length: int | None, pointer: str, errors: list[str]) -> None:
    if not isinstance(values, list) or (length is not None and len(values) != length):
        errors.append(f"{pointer}: expected a list of {length} numbers")
        return
    for k, v in enumerate(values):
        if not _validate_field(v, _rule("maps", "coefficient")):
            errors.append(f"{pointer}/{k}: {v!r} is not a finite number")


def _validate_map(entry: Any, index: int, dim: int | None, errors: list[str]) -> None:
    pointer = f"/maps/{index}"
    if not isinstance(entry, dict):
        errors.append(f"{pointer}: must be an object")
        return

    kind = entry.get("type")
    if not _validate_field(kind, _rule("maps", "type")):
        errors.append(f"{pointer}/type: {kind!r} is not one of {_rule('maps', 'type').get('allowed')}")
        return

    if kind == "affine":
        matrix = entry.get("matrix")
        if not isinstance(matrix, list) or (dim is not None and len(matrix) != dim):
            errors.append(f"{pointer}/matrix: expected {dim} rows")
        else:
            for r, row in enumerate(matrix):
                _validate_numbers(row, dim, f"{pointer}/matrix/{r}", errors)
        _validate_numbers(entry.get("offset"), dim, f"{pointer}/offset", errors)

    elif kind == "expr":
        exprs = entry.get("exprs")
        if not isinstance(exprs, list) or (dim is not None and len(exprs) != dim):
            errors.append(f"{pointer}/exprs: expected {dim} coordinate expressions")
            return
        for k, text in enumerate(exprs):
            if not _validate_field(text, _rule("maps", "expr")):
                errors.append(f"{pointer}/exprs/{k}: must be a string")

    else:
        name = entry.get("name")
        builtins = _rule("builtin")
        if name not in builtins:
            errors.append(f"{pointer}/name: unknown builtin {name!r}, expected one of {sorted(builtins)}")
            return
        params = entry.get("params") or {}
        if not isinstance(params, dict):
            errors.append(f"{pointer}/params: must be an object")
            return
        for param in builtins[name].get("params", []):
            if param not in params:
                errors.append(f"{pointer}/params/{param}: required by builtin '{name}'")
            elif not _is_number(params[param]):
                errors.append(f"{pointer}/params/{param}: {params[param]!r} is not a finite number")
        if dim is not None and dim not in builtins[name].get("dims", []):
            errors.append(f"{pointer}/name: builtin '{name}' is not defined in dimension {dim}")


def _validate_weights(weights: Any, n_maps: int, errors: list[str]) -> None:
    if not isinstance(weights, list) or len(weights) != n_maps:
        errors.append(f"/weights: expected {n_maps} weights, one per map")
        return

    bad = False
    for k, w in enumerate(weights):
        if not _validate_field(w, _rule("weights", "weight")):
            errors.append(f"/weights/{k}: {w!r} is not a positive number")
            bad = True
    if bad:
        return

    tolerance = _rule("weights").get("sum_tolerance", 1e-12)
    total = math.fsum(weights)
    if abs(total - 1.0) > tolerance:
        errors.append(f"/weights: weights sum {total:g}")


def validate_ifs_spec(document: Any) -> tuple[bool, list[str]]:
    """Validate an IFS spec document; errors are '<json pointer>: <message>'."""
    if not isinstance(document, dict):
        return False, ["/: spec must be a JSON object"]

    errors: list[str] = []
    dim, _ = _validate_space(document.get("space"), errors)

    maps = document.get("maps")
    min_count = _rule("maps").get("min_count", 1)
    if not isinstance(maps, list) or len(maps) < min_count:
        errors.append(f"/maps: expected a list of at least {min_count} map")
        maps = []
    for index, entry in enumerate(maps):
        _validate_map(entry, index, dim, errors)

    if document.get("weights") is not None and maps:
        _validate_weights(document["weights"], len(maps), errors)

    if errors:
        logger.debug(f"IFS spec rejected with {len(errors)} errors")
    return len(errors) == 0, errors
