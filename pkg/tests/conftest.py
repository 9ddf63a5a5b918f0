import numpy as np
import pytest

from config.config import GALLERY_DIR
from mapkit.maps import AffineMap, Box, IFSystem
from readers.spec_reader import load_ifs


def gallery(name: str) -> IFSystem:
    return load_ifs(GALLERY_DIR / f"{name}.json")


@pytest.fixture
def cantor():
    return gallery("cantor")


@pytest.fixture
def sierpinski():
    return gallery("sierpinski")


@pytest.fixture
def tarafdar():
    return gallery("tarafdar")


@pytest.fixture
def sin_average():
    return gallery("sin-average")


@pytest.fixture
def semiattractor():
    return gallery("semiattractor")


@pytest.fixture
def circle_rotation():
    return gallery("circle-rotation")


@pytest.fixture
def eventual_2d():
    return gallery("eventual-2d")


@pytest.fixture
def halving():
    """One map x -> x/2 on [-1, 1]."""
    return IFSystem([AffineMap([[0.5]], [0.0])], weights=[1.0], domain=Box([-1.0], [1.0]))


def sierpinski_reference(depth: int) -> np.ndarray:
    """w_alpha(0) for every word of length `depth`: the corners of the level-depth triangles."""
    points = np.zeros((1, 2))
    offsets = np.array([[0.0, 0.0], [0.5, 0.0], [0.0, 0.5]])
    for _ in range(depth):
        points = np.concatenate([points / 2 + o for o in offsets])
    return points


def cantor_reference(depth: int) -> np.ndarray:
    """Left and right endpoints of the 2^depth intervals of the level-depth Cantor set."""
    left = np.zeros(1)
    for _ in range(depth):
        left = np.concatenate([left / 3, left / 3 + 2 / 3])
    return np.concatenate([left, left + 3.0 ** -depth]).reshape(-1, 1)
