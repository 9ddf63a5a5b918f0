"""Artifact writers: PGM/PPM images, canonical JSON reports and CSV tables."""
import json
import logging
import math
from pathlib import Path
from typing import Any

import numpy as np
import pandas as pd

from errors.exceptions import EmptyResultError, ValidationError
from hyperspace.cloud import PointCloud
from mapkit.maps import Box
from measurekit.measures import DiscreteMeasure
from measurekit.transport import TransportPlan

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.17g"
# RGB per map index, cycled; index 0 (the starting point) is black
PALETTE = np.array(
    [
        [0, 0, 0],
        [213, 62, 79],
        [50, 136, 189],
        [102, 194, 165],
        [244, 109, 67],
        [94, 79, 162],
        [254, 224, 139],
    ],
    dtype=np.uint8,
)


def _prepare(path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    return path


def _pixel_coords(points: np.ndarray, width: int, height: int, bbox: Box) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Floor mapping of the first two coordinates; larger y is higher up."""
    lo, widths = bbox.lo[:2], bbox.widths[:2]
    xy = points[:, :2]
    with np.errstate(divide="ignore", invalid="ignore"):
        frac = np.where(widths > 0, (xy - lo) / widths, 0.5)
    if frac.shape[1] == 1:
        frac = np.column_stack([frac[:, 0], np.full(len(frac), 0.5)])

    inside = np.all((frac >= 0) & (frac <= 1), axis=1)
    cols = np.minimum(np.floor(frac[:, 0] * width).astype(np.int64), width - 1)
    rows = height - 1 - np.minimum(np.floor(frac[:, 1] * height).astype(np.int64), height - 1)
    return rows, cols, inside


def _check_size(width: int, height: int) -> None:
    if width < 1 or height < 1:
        raise ValidationError(f"image size must be at least 1x1, got {width}x{height}")


def emit_image(
    cloud: PointCloud | np.ndarray,
    path: str | Path,
    width: int,
    height: int,
    bbox: Box | None = None,
) -> int:
    """Binary PGM (P5): 0 where at least one point lands, 255 elsewhere.

    Returns the number of black pixels.
    """
    _check_size(width, height)
    points = cloud.points if isinstance(cloud, PointCloud) else np.atleast_2d(np.asarray(cloud, dtype=float))
    if points.size == 0:
        raise EmptyResultError("cannot render an empty cloud")
    if bbox is None:
        bbox = cloud.bbox if isinstance(cloud, PointCloud) else Box.around(points)

    pixels = np.full((height, width), 255, dtype=np.uint8)
    rows, cols, inside = _pixel_coords(points, width, height, bbox)
    pixels[rows[inside], cols[inside]] = 0

    path = _prepare(path)
    with open(path, "wb") as f:
        f.write(f"P5\n{width} {height}\n255\n".encode("ascii"))
        f.write(pixels.tobytes())

    black = int(np.count_nonzero(pixels == 0))
    logger.info(f"Wrote {width}x{height} PGM to {path} ({black} black pixels)")
    return black


def emit_ppm(
    points: np.ndarray,
    labels: np.ndarray,
    path: str | Path,
    width: int,
    height: int,
    bbox: Box | None = None,
) -> None:
    """Binary PPM (P6) on white, each point coloured by its map index; later points win."""
    _check_size(width, height)
    points = np.atleast_2d(np.asarray(points, dtype=float))
    if points.size == 0:
        raise EmptyResultError("cannot render an empty orbit")
    if bbox is None:
        bbox = Box.around(points)

    pixels = np.full((height, width, 3), 255, dtype=np.uint8)
    rows, cols, inside = _pixel_coords(points, width, height, bbox)
    labels = np.asarray(labels, dtype=np.int64)
    colours = PALETTE[np.where(labels == 0, 0, (labels - 1) % (len(PALETTE) - 1) + 1)]
    pixels[rows[inside], cols[inside]] = colours[inside]

    path = _prepare(path)
    with open(path, "wb") as f:
        f.write(f"P6\n{width} {height}\n255\n".encode("ascii"))
        f.write(pixels.tobytes())
    logger.info(f"Wrote {width}x{height} PPM to {path}")


def _canonical(value: Any, indent: int = 0) -> str:
    pad = "  " * (indent + 1)
    close = "  " * indent
    if isinstance(value, dict):
        if not value:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {_canonical(value[k], indent + 1)}" for k in sorted(value, key=str)]
        return "{\n" + ",\n".join(items) + f"\n{close}}}"
    if isinstance(value, (list, tuple, np.ndarray)):
        values = value.tolist() if isinstance(value, np.ndarray) else value
        if not values:
            return "[]"
        return "[\n" + ",\n".join(f"{pad}{_canonical(v, indent + 1)}" for v in values) + f"\n{close}]"
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return FLOAT_FORMAT % value if math.isfinite(value) else "null"
    if value is None:
        return "null"
    return json.dumps(str(value))


def canonical_json(report: dict) -> str:
    """Sorted keys, %.17g floats, non-finite numbers as null."""
    return _canonical(report) + "\n"


def emit_report(report: dict, path: str | Path) -> None:
    path = _prepare(path)
    path.write_text(canonical_json(report), encoding="utf-8")
    logger.info(f"Wrote report to {path}")


def _to_csv(df: pd.DataFrame, path: str | Path, label: str) -> None:
    path = _prepare(path)
    df.to_csv(path, header=False, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    logger.debug(f"Wrote {len(df)} {label} rows to {path}")


def _coordinate_frame(points: np.ndarray) -> pd.DataFrame:
    points = np.atleast_2d(np.asarray(points, dtype=float))
    return pd.DataFrame({f"x{j + 1}": points[:, j] for j in range(points.shape[1])})


def emit_cloud_csv(cloud: PointCloud | np.ndarray, path: str | Path) -> None:
    points = cloud.points if isinstance(cloud, PointCloud) else cloud
    _to_csv(_coordinate_frame(points), path, "point")


def emit_orbit_csv(indices: np.ndarray, symbols: np.ndarray, points: np.ndarray, path: str | Path) -> None:
    """n, symbol applied to reach x_n (0 for x_0), then coordinates."""
    df = pd.concat(
        [pd.DataFrame({"n": np.asarray(indices, dtype=np.int64), "symbol": np.asarray(symbols, dtype=np.int64)}), _coordinate_frame(points)],
        axis=1,
    )
    _to_csv(df, path, "orbit")


def emit_measure_csv(mu: DiscreteMeasure, path: str | Path) -> None:
    df = pd.concat([pd.DataFrame({"weight": mu.weights}), _coordinate_frame(mu.atoms)], axis=1)
    _to_csv(df, path, "atom")


def emit_plan_csv(plan: TransportPlan, path: str | Path) -> None:
    """source index, target index, mass (0-based atom indices)."""
    df = pd.DataFrame(
        {
            "source": np.asarray(plan.sources, dtype=np.int64),
            "target": np.asarray(plan.targets, dtype=np.int64),
            "mass": np.asarray(plan.masses, dtype=float),
        }
    )
    _to_csv(df, path, "plan")
