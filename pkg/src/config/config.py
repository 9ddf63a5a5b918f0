import logging
import os
from pathlib import Path

import yaml
from dotenv import load_dotenv

PROJECT_ROOT = Path(__file__).resolve().parents[2]
CONFIG_DIR = Path(__file__).resolve().parent
GALLERY_DIR = PROJECT_ROOT / "data" / "gallery"

load_dotenv(PROJECT_ROOT / ".env")

logger = logging.getLogger(__name__)

THREADS = max(1, int(os.getenv("IFSLAB_THREADS", str(os.cpu_count() or 1))))
LOG_LEVEL = os.getenv("IFSLAB_LOG_LEVEL", "INFO").upper()

_FALLBACK_DEFAULTS = {
    "seed": 0,
    "tol": 1.0e-3,
    "max_iter": 200,
    "cloud_budget": 1_000_000,
    "atom_budget": 100_000,
    "escape_threshold": 1.0e12,
    "escape_inflation": 10.0,
    "word_budget": 1_000_000,
    "williams_budget": 100_000,
    "exact_words_budget": 100_000,
    "eventual_budget": 10_000,
    "disjunctive_budget": 1_000_000,
    "transport_budget": 10_000_000,
    "envelope_bins": 32,
    "envelope_min_scale": 1.0e-6,
    "lipschitz_samples": 10_000,
    "p_max": 4,
    "verdict_margin": 1.0e-9,
    "orbit_length": 100_000,
    "merge_radius": 1.0e-3,
    "grid_points": 101,
    "image_width": 512,
    "image_height": 512,
    "weight_tolerance": 1.0e-12,
}


def _load_defaults() -> dict:
    defaults_path = CONFIG_DIR / "defaults.yaml"

    if not defaults_path.exists():
        logger.warning("Defaults config not found at %s, using built-in values", defaults_path)
        return dict(_FALLBACK_DEFAULTS)

    with open(defaults_path, encoding="utf-8") as f:
        data = yaml.safe_load(f) or {}

    merged = dict(_FALLBACK_DEFAULTS)
    for key, value in data.items():
        fallback = _FALLBACK_DEFAULTS.get(key)
        if isinstance(fallback, (int, float)) and not isinstance(fallback, bool):
            try:
                # YAML 1.1 reads exponents without a sign ("1e12") as strings
                value = float(value) if isinstance(fallback, float) else int(value)
            except (TypeError, ValueError):
                logger.warning("Ignoring non-numeric default %s=%r", key, value)
                continue
        merged[key] = value
    return merged


DEFAULTS = _load_defaults()
