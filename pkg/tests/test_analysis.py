import numpy as np
import pytest

import mapkit.analysis
from errors.exceptions import BudgetExceededError, DegenerateRegionError, ValidationError
from mapkit.analysis import (
    average_region,
    classify,
    estimate_lipschitz,
    rakotch_envelope,
    remetrized_distance,
    tarafdar_profile,
)
from mapkit.maps import AffineMap, Box, ExprMap, IFSystem
from mapkit.modulus import iterate_modulus


@pytest.fixture
def half_and_double():
    """x/2 and 2x on [-1, 1]: one contraction, one expansion."""
    maps = [AffineMap([[0.5]], [0.0]), AffineMap([[2.0]], [0.0])]
    return IFSystem(maps, weights=[2 / 3, 1 / 3], domain=Box([-1.0], [1.0]))


class TestEstimateLipschitz:
    def test_affine_is_exact(self):
        w = AffineMap([[0.0, 1.5], [0.5, 0.0]], [0.0, 0.0])
        assert estimate_lipschitz(w, Box([0.0, 0.0], [1.0, 1.0])) == pytest.approx(1.5)

    def test_sampled_sine_slope(self):
        lip = estimate_lipschitz(ExprMap(["sin(x)"]), Box([0.0], [1.0]), samples=2000)
        assert 0.99 < lip <= 1.0 + 1e-6

    def test_same_seed_same_estimate(self):
        w = ExprMap(["x*x"])
        region = Box([0.0], [1.0])
        assert estimate_lipschitz(w, region, samples=500, rng_seed=3) == estimate_lipschitz(w, region, samples=500, rng_seed=3)

    def test_zero_volume_region(self):
        with pytest.raises(DegenerateRegionError):
            estimate_lipschitz(ExprMap(["x"]), Box([0.5], [0.5]))


class TestRakotchEnvelope:
    def test_envelope_is_nonincreasing(self):
        phi = rakotch_envelope(ExprMap(["sin(x)"]), Box([0.0], [1.0]), bins=16, samples=4000)
        assert np.all(np.diff(phi.values) <= 0)
        assert phi.values.max() <= 1.0 + 1e-6

    def test_envelope_dominates_sine(self):
        phi = rakotch_envelope(ExprMap(["sin(x)"]), Box([0.0], [1.0]))
        t = phi.knots[phi.coverage] * 1.2
        assert np.all(phi(t) >= np.sin(t) - 1e-12)

    def test_sine_iterates_bounded_by_modulus(self):
        phi = rakotch_envelope(ExprMap(["sin(x)"]), Box([0.0], [1.0]))
        x = 1.0
        for _ in range(20):
            x = np.sin(x)
        bound = iterate_modulus(phi, 1.0, 20)
        assert x <= bound < 0.45

    def test_bins_must_be_positive(self):
        with pytest.raises(ValidationError):
            rakotch_envelope(ExprMap(["x"]), Box([0.0], [1.0]), bins=0)


class TestAverageRegion:
    def test_pivot_is_smallest_constant(self):
        pivot, region = average_region([0.5, 2.0])
        assert pivot == 1
        assert [ineq.text for ineq in region] == ["p2 < 0.333333", "p2 < 1"]

    def test_membership(self):
        _, region = average_region([0.5, 2.0])
        assert all(ineq.holds(np.array([0.75, 0.25])) for ineq in region)
        assert not all(ineq.holds(np.array([2 / 3, 1 / 3])) for ineq in region)

    def test_three_maps_accumulate(self):
        pivot, region = average_region([2.0, 0.25, 1.0])
        assert pivot == 2
        assert len(region) == 4
        assert region[2].coeffs == {1: 1.75, 3: 0.75}

    def test_single_weight_is_solved_for(self):
        _, region = average_region([0.5, 2.0])
        assert region[0].coeffs == {2: 1.0}
        assert region[0].rhs == pytest.approx(1 / 3)

    def test_first_of_three_is_solved_for(self):
        _, region = average_region([2.0, 0.25, 1.0])
        assert region[0].text == "p1 < 0.428571"
        assert region[0].rhs == pytest.approx(0.75 / 1.75)


class TestClassify:
    def test_cantor_is_banach(self, cantor):
        report = classify(cantor)
        assert report.banach
        assert report.lipschitz == pytest.approx([1 / 3, 1 / 3])
        assert report.eventual_p == 1
        assert report.average_contractive

    def test_half_and_double_is_on_the_boundary(self, half_and_double):
        report = classify(half_and_double)
        assert not report.banach
        assert not report.edelstein_evidence
        assert report.average_sum == pytest.approx(1.0)
        assert report.average_contractive is False
        assert report.eventual_p is None
        assert report.per_map_eventual_p == [1, None]
        assert report.to_dict()["region"] == ["p2 < 0.333333", "p2 < 1"]

    def test_shifting_weight_makes_it_average_contractive(self, half_and_double):
        report = classify(half_and_double.with_weights([0.75, 0.25]))
        assert report.average_sum == pytest.approx(0.875)
        assert report.average_contractive

    def test_sin_average_is_rakotch_but_not_contractive(self, sin_average):
        report = classify(sin_average, coeffs=[2.0, 0.5])
        assert report.average_contractive is False
        assert report.average_rakotch is True
        assert report.edelstein_evidence is False

    def test_eventual_contraction(self, eventual_2d):
        report = classify(eventual_2d)
        assert not report.banach
        assert report.lipschitz == pytest.approx([1.5, 1.5])
        assert report.eventual_p == 2
        assert report.per_map_eventual_p == [2, 2]

    def test_coeffs_need_weights(self, tarafdar):
        with pytest.raises(ValidationError):
            classify(tarafdar, coeffs=[0.5, 0.5])

    def test_coeff_count_checked(self, cantor):
        with pytest.raises(ValidationError):
            classify(cantor, coeffs=[0.5])

    def test_eventual_search_respects_budget(self, cantor, monkeypatch):
        monkeypatch.setitem(mapkit.analysis.DEFAULTS, "eventual_budget", 1)
        assert classify(cantor).eventual_p is None


def _remetrized(ifs, x, y, depth=8):
    return remetrized_distance(ifs, x, y, depth, a_seq=[2 - 1 / (k + 1) for k in range(depth + 1)])[0]


class TestRemetrizedDistance:
    def test_cantor_endpoints(self, cantor):
        value, bound = remetrized_distance(cantor, [0.0], [1.0], depth=5)
        assert value == pytest.approx(1.0)
        assert bound is None

    def test_depth_zero_is_base_metric(self, cantor):
        value, _ = remetrized_distance(cantor, [0.2], [0.7], depth=0)
        assert value == pytest.approx(0.5)

    def test_word_budget(self, cantor):
        with pytest.raises(BudgetExceededError):
            remetrized_distance(cantor, [0.0], [1.0], depth=20)

    @pytest.mark.parametrize("a_seq", [[1.0, 1.0, 1.5], [0.5, 1.0, 1.5], [1.0, 1.5, 2.5]])
    def test_bad_weight_sequences(self, cantor, a_seq):
        with pytest.raises(ValidationError):
            remetrized_distance(cantor, [0.0], [1.0], depth=2, a_seq=a_seq)

    def test_dominates_base_metric_and_is_symmetric(self, cantor):
        rng = np.random.default_rng(3)
        for x, y in rng.random((1000, 2, 1)):
            forward = _remetrized(cantor, x, y)
            assert abs(x[0] - y[0]) <= forward + 1e-12
            assert _remetrized(cantor, y, x) == pytest.approx(forward, abs=1e-12)

    def test_triangle_inequality(self, cantor):
        rng = np.random.default_rng(4)
        for x, y, z in rng.random((300, 3, 1)):
            assert _remetrized(cantor, x, z) <= _remetrized(cantor, x, y) + _remetrized(cantor, y, z) + 1e-9

    def test_every_map_contracts_strictly(self, cantor):
        rng = np.random.default_rng(5)
        for x, y in rng.random((300, 2, 1)):
            before = _remetrized(cantor, x, y)
            for i in range(cantor.N):
                assert _remetrized(cantor, cantor.image(i, x[None, :])[0], cantor.image(i, y[None, :])[0]) < before

    def test_slow_map_is_contracted_in_the_new_metric(self):
        ifs = IFSystem([AffineMap([[0.9]], [0.0]), AffineMap([[0.5]], [0.5])], domain=Box([0.0], [1.0]))
        x, y = np.array([0.1]), np.array([0.8])
        before = _remetrized(ifs, x, y)
        assert before == pytest.approx(1.35 * 0.7)
        assert _remetrized(ifs, ifs.image(0, x[None, :])[0], ifs.image(0, y[None, :])[0]) == pytest.approx(1.35 * 0.63)
        assert _remetrized(ifs, ifs.image(1, x[None, :])[0], ifs.image(1, y[None, :])[0]) < before

    def test_tail_bound_from_modulus(self, cantor):
        from mapkit.modulus import banach

        _, bound = remetrized_distance(cantor, [0.0], [1.0], depth=3, phi=banach(1 / 3))
        assert bound == pytest.approx(2 / 27)


class TestTarafdarProfile:
    @pytest.mark.parametrize("index", [0, 1])
    def test_collapses_after_two_steps(self, tarafdar, index):
        profile = tarafdar_profile(tarafdar.maps[index], tarafdar.domain, k_max=3)
        assert profile == pytest.approx([0.5, 0.0, 0.0])
