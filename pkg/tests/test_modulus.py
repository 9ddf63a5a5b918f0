import numpy as np
import pytest

from errors.exceptions import ValidationError
from mapkit.modulus import banach, decays_below, iterate_modulus, modulus_join, rakotch, tabulated


class TestComparisonFunction:
    def test_banach_is_linear(self):
        phi = banach(0.5)
        assert phi(2.0) == 1.0
        assert phi(0.0) == 0.0
        assert phi.is_contractive

    @pytest.mark.parametrize("lam", [1.0, -0.1, 1.5])
    def test_banach_rejects_non_contractions(self, lam):
        with pytest.raises(ValidationError):
            banach(lam)

    def test_rakotch_step_is_right_continuous(self):
        phi = rakotch([0.0, 1.0, 2.0], [0.9, 0.5, 0.25])
        assert phi.lam_at(0.5) == 0.9
        assert phi.lam_at(1.0) == 0.5
        assert phi.lam_at(1.999) == 0.5
        assert phi(2.0) == 0.5

    def test_rakotch_lambda_must_not_increase(self):
        with pytest.raises(ValidationError):
            rakotch([0.0, 1.0], [0.5, 0.6])

    def test_tabulated_is_capped_by_identity(self):
        phi = tabulated([0.0, 1.0], [0.5, 0.8])
        assert phi(0.25) == 0.25
        assert phi(2.0) == 0.8

    def test_knots_must_increase(self):
        with pytest.raises(ValidationError):
            tabulated([1.0, 1.0], [0.5, 0.5])

    def test_uncovered_bins_do_not_count(self):
        phi = rakotch([0.0, 1.0], [1.2, 0.5], coverage=[False, True])
        assert phi.below(1.0)

    def test_level_bins_fail_without_noise(self):
        phi = rakotch([0.0, 1.0], [1.0, 0.5])
        assert not phi.below(1.0)

    def test_noise_above_resolution_tolerates_level(self):
        phi = rakotch([1e-8, 1.0], [1.0, 0.5], noise=[1e-8, 0.0])
        assert phi.below(1.0)
        assert not phi.below(1.0, resolution=1e-7)


class TestModulusJoin:
    def test_banach_join_takes_largest(self):
        assert modulus_join([banach(0.2), banach(0.7)]).lam == 0.7

    def test_join_dominates_every_modulus(self):
        phis = [banach(0.5), rakotch([0.0, 1.0], [0.9, 0.3]), tabulated([0.0, 0.5], [0.4, 0.6])]
        joined = modulus_join(phis)
        t = np.linspace(0.01, 3.0, 50)
        for phi in phis:
            assert np.all(joined(t) >= phi(t) - 1e-15)

    def test_rakotch_join_keeps_coverage(self):
        joined = modulus_join([rakotch([0.0, 1.0], [0.9, 0.3], coverage=[True, False]), banach(0.5)])
        assert joined.kind == "rakotch"
        assert joined.coverage.tolist() == [True, False]

    def test_banach_member_survives_a_tabulated_join(self):
        joined = modulus_join([banach(0.5), tabulated([1.0], [0.6])])
        assert joined(1.9) == pytest.approx(0.95)
        assert joined(1.0) == pytest.approx(0.6)
        assert joined(0.5) == pytest.approx(0.5)

    def test_nested_joins_flatten(self):
        inner = modulus_join([banach(0.5), tabulated([1.0], [0.6])])
        joined = modulus_join([inner, rakotch([0.0], [0.7])])
        assert len(joined.members) == 3
        assert joined(2.0) == pytest.approx(1.4)

    def test_join_contractive_iff_every_member_is(self):
        assert modulus_join([banach(0.5), tabulated([0.0, 1.0], [0.0, 0.6])]).is_contractive
        assert not modulus_join([banach(0.5), rakotch([0.0], [1.0]), tabulated([1.0], [0.6])]).is_contractive

    def test_join_report_lists_members(self):
        joined = modulus_join([banach(0.5), tabulated([1.0], [0.6])])
        assert joined.to_dict() == {
            "kind": "join",
            "members": [{"kind": "banach", "lambda": 0.5}, {"kind": "tabulated", "knots": [1.0], "values": [0.6]}],
        }

    def test_iterating_a_join_uses_the_analytic_member(self):
        joined = modulus_join([banach(0.5), tabulated([1.0], [0.6])])
        assert iterate_modulus(joined, 1.9, 1) == pytest.approx(0.95)

    def test_empty_join_rejected(self):
        with pytest.raises(ValidationError):
            modulus_join([])


class TestIterateModulus:
    def test_banach_powers(self):
        assert iterate_modulus(banach(0.5), 1.0, 3) == 0.125

    def test_zero_steps_is_identity(self):
        assert iterate_modulus(banach(0.5), 0.7, 0) == 0.7

    def test_rakotch_iterates_decay(self):
        phi = rakotch([0.0, 0.5], [0.5, 0.9])
        assert iterate_modulus(phi, 1.0, 1) == pytest.approx(0.9)
        assert decays_below(phi, 1.0, 1e-3, 100)
        assert not decays_below(phi, 1.0, 1e-3, 3)

    def test_negative_arguments_rejected(self):
        with pytest.raises(ValidationError):
            iterate_modulus(banach(0.5), -1.0, 2)
