import numpy as np
import pytest

import mapkit.maps
from errors.exceptions import ExprDomainError, NonConvergenceError, SymbolOutOfRangeError, ValidationError
from mapkit.maps import (
    CIRCLE,
    EUCLIDEAN,
    AffineMap,
    BuiltinMap,
    Box,
    ExprMap,
    IFSystem,
    apply,
    compose_word,
    picard_fixed_point,
)


class TestBox:
    def test_geometry(self):
        box = Box([0.0, -1.0], [2.0, 1.0])
        assert box.dim == 2
        assert box.widths.tolist() == [2.0, 2.0]
        assert box.center.tolist() == [1.0, 0.0]
        assert box.volume == 4.0
        assert box.diam == pytest.approx(np.sqrt(8))

    def test_inflate_about_center(self):
        box = Box([-1.0], [1.0]).inflate(10)
        assert box.to_bounds() == [[-10.0, 10.0]]

    def test_grid_is_lexicographic(self):
        grid = Box([0.0, 0.0], [1.0, 1.0]).grid(3)
        assert len(grid) == 9
        assert grid[0].tolist() == [0.0, 0.0]
        assert grid[1].tolist() == [0.0, 0.5]

    def test_empty_box_rejected(self):
        with pytest.raises(ValidationError):
            Box([1.0], [0.0])


class TestSpace:
    def test_circle_distance_wraps(self):
        d = CIRCLE.distance(np.array([[0.95]]), np.array([[0.05]]))
        assert d[0] == pytest.approx(0.1)

    def test_circle_normalizes_into_unit_interval(self):
        assert CIRCLE.normalize(np.array([[1.0], [-0.25], [2.5]])).ravel().tolist() == [0.0, 0.75, 0.5]

    def test_circle_diameter_is_half(self):
        assert CIRCLE.diameter(Box([0.0], [1.0])) == 0.5

    def test_euclidean_pairwise(self):
        a = np.array([[0.0, 0.0], [3.0, 4.0]])
        assert EUCLIDEAN.pairwise(a, a)[0, 1] == 5.0


class TestApply:
    def test_affine_third(self):
        assert apply(AffineMap([[1 / 3]], [0.0]), 1.0)[0] == pytest.approx(1 / 3)

    def test_tarafdar_first_map(self):
        assert apply(ExprMap(["max(0.5, 1-x)"]), 0.9)[0] == 0.5

    def test_circle_rotation(self):
        assert apply(BuiltinMap("circle-rotation", {"r": 0.2}), 0.9)[0] == pytest.approx(0.1)

    def test_batch_and_point_paths_agree(self):
        w = ExprMap(["0.5*sin(x) + y", "x*y"])
        points = np.array([[0.1, 0.2], [0.7, -0.3]])
        batch = w.apply_many(points)
        for p, row in zip(points, batch):
            np.testing.assert_allclose(w.apply_point(p), row, rtol=1e-14)

    def test_expr_domain_error_carries_point(self):
        with pytest.raises(ExprDomainError) as info:
            apply(ExprMap(["log(x)"]), 0.0)
        assert info.value.point == [0.0]

    def test_undeclared_variable_rejected(self):
        with pytest.raises(ValidationError):
            ExprMap([mapkit.maps.parse("y")])

    @pytest.mark.parametrize("name,params,dim", [
        ("spiral", {}, 1),
        ("circle-rotation", {}, 1),
        ("circle-rotation", {"r": 0.1}, 2),
    ])
    def test_builtin_errors(self, name, params, dim):
        with pytest.raises(ValidationError):
            BuiltinMap(name, params, dim)


class TestIFSystem:
    def test_weights_must_sum_to_one(self):
        with pytest.raises(ValidationError, match="weights sum"):
            IFSystem([AffineMap([[0.5]], [0.0]), AffineMap([[0.5]], [0.5])], weights=[0.5, 0.6])

    def test_weights_must_be_positive(self):
        with pytest.raises(ValidationError):
            IFSystem([AffineMap([[0.5]], [0.0]), AffineMap([[0.5]], [0.5])], weights=[1.0, 0.0])

    def test_dimensions_must_agree(self):
        with pytest.raises(ValidationError):
            IFSystem([AffineMap([[0.5]], [0.0]), AffineMap(np.eye(2), [0.0, 0.0])])

    def test_domain_error_names_map(self):
        ifs = IFSystem([ExprMap(["x"]), ExprMap(["log(x)"])])
        with pytest.raises(ExprDomainError) as info:
            ifs.image(1, np.array([[0.5], [0.0]]))
        assert info.value.map_index == 2
        assert info.value.point == [0.0]

    def test_require_weights(self, tarafdar):
        with pytest.raises(ValidationError):
            tarafdar.require_weights()


class TestComposeWord:
    @pytest.mark.parametrize("word,slope,offset", [
        ((1, 2), 1 / 9, 2 / 9),
        ((2, 1), 1 / 9, 2 / 3),
        ((1,), 1 / 3, 0.0),
    ])
    def test_cantor_compositions(self, cantor, word, slope, offset):
        w = compose_word(cantor, word)
        for x in (0.0, 0.5, 1.0):
            assert apply(w, x)[0] == pytest.approx(slope * x + offset, abs=1e-15)

    def test_single_symbol_matches_map(self, tarafdar):
        w = compose_word(tarafdar, (2,))
        for x in np.linspace(0, 1, 7):
            assert apply(w, x)[0] == apply(tarafdar.maps[1], x)[0]

    def test_concatenation_is_composition(self, sin_average):
        alpha, beta = (1, 2, 2), (2, 1)
        joined = compose_word(sin_average, alpha + beta)
        outer, inner = compose_word(sin_average, alpha), compose_word(sin_average, beta)
        points = np.linspace(0, 1.5, 9).reshape(-1, 1)
        np.testing.assert_allclose(joined.apply_many(points), outer.apply_many(inner.apply_many(points)), rtol=1e-14)

    def test_empty_word_is_identity(self, cantor):
        assert apply(compose_word(cantor, ()), 0.42)[0] == 0.42

    def test_symbol_out_of_range(self, cantor):
        with pytest.raises(SymbolOutOfRangeError):
            compose_word(cantor, (1, 3))

    def test_circle_composition_wraps(self, circle_rotation):
        w = compose_word(circle_rotation, (1, 1, 1))
        expected = (0.3 + 3 * 0.41421356237309515) % 1.0
        assert apply(w, 0.3)[0] == pytest.approx(expected, abs=1e-14)


class TestPicardFixedPoint:
    def test_contraction_converges(self):
        x, iterations = picard_fixed_point(AffineMap([[1 / 3]], [2 / 3]), [0.0], tol=1e-9)
        assert abs(x[0] - 1.0) <= 2e-9
        assert iterations > 0

    def test_sine_converges_slowly(self):
        w = ExprMap(["sin(x)"])
        x, iterations = picard_fixed_point(w, [1.0], tol=1e-3, max_iter=1000)
        assert abs(x[0] - np.sin(x[0])) <= 1e-3
        assert x[0] < 0.2
        assert iterations > 20

    def test_expanding_map_fails(self):
        with pytest.raises(NonConvergenceError) as info:
            picard_fixed_point(AffineMap([[2.0]], [0.0]), [1.0], tol=1e-6, max_iter=100)
        assert info.value.iterations == 100

    def test_tol_must_be_positive(self):
        with pytest.raises(ValidationError):
            picard_fixed_point(AffineMap([[0.5]], [0.0]), [1.0], tol=0.0)
