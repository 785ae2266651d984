"""Symmetric-polynomial table tests against subset-enumeration oracles,
plus the spectrum-only closed forms built on the tables."""

import itertools
import math

import numpy as np
import pytest

import volsamp as vs
from volsamp.sympoly import _leave_one_out_log_esps, leave_one_out_profile


def enum_leverage(values, m, n):
    """Brute-force expected leverage: sum over N-subsets containing m."""
    idx = range(1, len(values) + 1)
    num = math.fsum(
        math.prod(values[i - 1] for i in u)
        for u in itertools.combinations(idx, n)
        if m in u
    )
    return num / vs.brute_force_esp(values, n)


class TestEspTable:
    def test_handworked_pair_sum(self):
        t = vs.esp_table([1.0, 0.5, 0.25], 2)
        # 1*1/2 + 1*1/4 + 1/2*1/4
        assert t.esp(2) == pytest.approx(0.875, rel=1e-14)

    def test_empty_product_convention(self):
        t = vs.esp_table([0.3, 0.2], 2)
        assert t.esp(0) == 1.0
        assert t.log_esp(0, prefix=0) == 0.0

    def test_order_above_prefix_is_zero(self):
        t = vs.esp_table([0.3, 0.2, 0.1], 3)
        assert t.esp(3, prefix=2) == 0.0

    def test_order_above_length_rejected(self):
        with pytest.raises(ValueError):
            vs.esp_table([1.0, 0.5], 3)

    def test_nonpositive_rejected(self):
        with pytest.raises(ValueError):
            vs.esp_table([1.0, 0.0], 1)
        with pytest.raises(ValueError):
            vs.esp_table([1.0, -2.0], 1)

    def test_recurrence_row_to_row(self):
        rng = np.random.default_rng(5)
        vals = np.exp(rng.uniform(np.log(1e-6), 0.0, size=9))
        t = vs.esp_table(vals, 4)
        for i in range(1, 10):
            for k in range(1, 5):
                expect = vs.brute_force_esp(vals[:i], k)
                got = t.esp(k, prefix=i)
                assert got == pytest.approx(expect, rel=1e-12, abs=1e-300)

    def test_oracle_equivalence_random_lists(self):
        rng = np.random.default_rng(42)
        for _ in range(30):
            length = int(rng.integers(2, 13))
            vals = np.exp(rng.uniform(np.log(1e-6), 0.0, size=length))
            order = int(rng.integers(1, length + 1))
            t = vs.esp_table(vals, order)
            for k in range(order + 1):
                expect = vs.brute_force_esp(vals, k)
                assert t.esp(k) == pytest.approx(expect, rel=1e-10)

    def test_maclaurin_sanity(self):
        rng = np.random.default_rng(9)
        vals = rng.random(10)
        t = vs.esp_table(vals, 10)
        assert t.esp(10) <= float(vals.sum()) ** 10

    def test_leave_one_out_matches_enumeration(self):
        rng = np.random.default_rng(17)
        vals = np.exp(rng.uniform(np.log(1e-5), 0.0, size=8))
        t = vs.esp_table(vals, 5)
        for idx in range(1, 9):
            reduced = np.delete(vals, idx - 1)
            loo = _leave_one_out_log_esps(t, idx)
            for k in range(6):
                assert math.exp(loo[k]) == pytest.approx(
                    vs.brute_force_esp(reduced, k), rel=1e-10
                )

    def test_leave_one_out_profile_consistent(self):
        rng = np.random.default_rng(23)
        vals = np.exp(rng.uniform(np.log(1e-5), 0.0, size=10))
        t = vs.esp_table(vals, 4)
        prof = leave_one_out_profile(t, [3, 4])
        for idx in range(1, 11):
            single = _leave_one_out_log_esps(t, idx)
            assert prof[0, idx - 1] == pytest.approx(single[3], rel=1e-12)
            assert prof[1, idx - 1] == pytest.approx(single[4], rel=1e-12)


class TestNormalization:
    def test_single_node_is_trace(self):
        m = vs.SpectralModel.sobolev(2, truncation=64)
        assert math.exp(vs.log_normalization(m, 1)) == pytest.approx(
            float(m.eigenvalues().sum()), rel=1e-12
        )

    def test_handworked_value(self):
        m = vs.SpectralModel.custom([1.0, 0.5, 0.25])
        assert math.exp(vs.log_normalization(m, 2)) == pytest.approx(1.75, rel=1e-12)

    def test_full_order_is_factorial_times_product(self):
        m = vs.SpectralModel.custom([0.9, 0.3, 0.2, 0.1])
        assert math.exp(vs.log_normalization(m, 4)) == pytest.approx(
            24.0 * 0.9 * 0.3 * 0.2 * 0.1, rel=1e-12
        )


class TestExpectedLeverage:
    def test_geometric_single_node(self):
        m = vs.SpectralModel.geometric(0.5, truncation=60)
        # trace is 1 - 2^-60, so the first leverage is sigma_1 up to a tail
        # deviation of 2^-61, far below log/exp roundoff
        assert vs.expected_leverage(m, 1, 1) == pytest.approx(0.5, abs=1e-15)

    def test_enumeration_oracle(self):
        rng = np.random.default_rng(3)
        vals = np.sort(np.exp(rng.uniform(np.log(1e-4), 0.0, size=9)))[::-1]
        model = vs.SpectralModel.custom(vals)
        for n in (1, 3, 6):
            for mode in (1, 4, 9):
                assert vs.expected_leverage(model, mode, n) == pytest.approx(
                    enum_leverage(vals, mode, n), rel=1e-10
                )

    @pytest.mark.parametrize(
        "model",
        [
            vs.SpectralModel.sobolev(3, truncation=128),
            vs.SpectralModel.geometric(0.7, truncation=128),
            vs.SpectralModel.sobolev_classical(1, truncation=128),
        ],
    )
    @pytest.mark.parametrize("n", [1, 4, 17])
    def test_sum_rule(self, model, n):
        total = vs.expected_leverage_profile(model, n).sum()
        assert abs(total - n) <= 1e-8

    def test_full_order_reproduces_everything(self):
        m = vs.SpectralModel.custom([0.8, 0.4, 0.2, 0.1])
        for mode in range(1, 5):
            assert vs.expected_leverage(m, mode, 4) == pytest.approx(1.0, abs=1e-12)

    def test_monotone_in_design_size(self):
        m = vs.SpectralModel.sobolev(2, truncation=64)
        for mode in (1, 3, 10):
            taus = [vs.expected_leverage(m, mode, n) for n in range(1, 30)]
            assert all(b >= a - 1e-13 for a, b in zip(taus, taus[1:]))

    def test_cross_leverage_closed_form(self):
        assert vs.expected_cross_leverage(1, 2) == 0.0
        assert vs.expected_cross_leverage(5, 3) == 0.0
        with pytest.raises(ValueError):
            vs.expected_cross_leverage(2, 2)


class TestExpectedError:
    def test_geometric_single_node_closed_form(self):
        m = vs.SpectralModel.geometric(0.5, truncation=200)
        assert vs.expected_eig_error(m, 1, 1) == pytest.approx(0.25, abs=1e-12)
        for mode in (2, 3, 5):
            sig = 2.0**-mode
            assert vs.expected_eig_error(m, mode, 1) == pytest.approx(
                sig * (1 - sig), abs=1e-12
            )

    def test_enumeration_cross_check(self):
        vals = (2.0 ** -np.arange(1, 21)).tolist()
        model = vs.SpectralModel.custom(vals)
        t = vs.esp_table(vals, 1)
        for mode in (1, 2, 4):
            expect = vals[mode - 1] * vs.brute_force_esp(
                vals[: mode - 1] + vals[mode:], 1
            ) / vs.brute_force_esp(vals, 1)
            assert vs.expected_eig_error(model, mode, 1) == pytest.approx(expect, rel=1e-10)

    def test_bounded_by_eigenvalue(self):
        m = vs.SpectralModel.sobolev(1, truncation=64)
        for n in (1, 5, 20):
            eps = vs.expected_eig_error_profile(m, n)
            assert np.all(eps <= m.eigenvalues() + 1e-15)

    def test_full_order_vanishes(self):
        m = vs.SpectralModel.custom([0.8, 0.4, 0.2, 0.1])
        for mode in range(1, 5):
            assert vs.expected_eig_error(m, mode, 4) == 0.0

    @pytest.mark.parametrize(
        "model",
        [
            vs.SpectralModel.sobolev(1, truncation=128),
            vs.SpectralModel.sobolev(4, truncation=128),
            vs.SpectralModel.geometric(0.5, truncation=128),
        ],
    )
    @pytest.mark.parametrize("n", [1, 3, 12])
    def test_monotone_in_mode(self, model, n):
        eps = vs.expected_eig_error_profile(model, n)
        assert np.all(np.diff(eps) <= 1e-15 + 1e-12 * eps[:-1])

    def test_route_agreement(self):
        # sigma_m (1 - tau_m) and the direct leave-one-out ratio agree to
        # 1e-10 relative away from leverage saturation
        for model, n_max in (
            (vs.SpectralModel.sobolev(1, truncation=128), 30),
            (vs.SpectralModel.geometric(0.7, truncation=128), 20),
        ):
            for n in range(1, n_max + 1):
                for mode in (1, 2, 5, 9):
                    direct = vs.expected_eig_error(model, mode, n)
                    via_leverage = vs.eigenvalue(model, mode) * (
                        1.0 - vs.expected_leverage(model, mode, n)
                    )
                    assert via_leverage == pytest.approx(direct, rel=1e-10)


class TestEmbeddingError:
    def setup_method(self):
        self.model = vs.SpectralModel.sobolev(2, truncation=64)

    def test_single_mode(self):
        g = vs.CoefficientVector.unit(1)
        assert vs.expected_embedding_error(self.model, g, 5) == pytest.approx(
            vs.expected_eig_error(self.model, 1, 5), rel=1e-14
        )

    def test_unit_norm_below_leading_error(self):
        rng = np.random.default_rng(8)
        c = rng.standard_normal(6)
        c /= np.linalg.norm(c)
        g = vs.CoefficientVector.from_mapping({i + 1: v for i, v in enumerate(c)})
        assert vs.expected_embedding_error(self.model, g, 4) <= vs.expected_eig_error(
            self.model, 1, 4
        ) + 1e-15

    def test_uniform_four_modes(self):
        g = vs.CoefficientVector.from_mapping({m: 0.5 for m in (1, 2, 3, 4)})
        expect = 0.25 * sum(vs.expected_eig_error(self.model, m, 6) for m in (1, 2, 3, 4))
        assert vs.expected_embedding_error(self.model, g, 6) == pytest.approx(expect, rel=1e-12)


class TestMixtureWeights:
    def test_weights_sum_to_one_by_enumeration(self):
        rng = np.random.default_rng(31)
        vals = np.sort(rng.random(8))[::-1]
        model = vs.SpectralModel.custom(vals)
        for n in (1, 2, 4):
            total = math.fsum(
                vs.mixture_weight(model, u, n)
                for u in itertools.combinations(range(1, 9), n)
            )
            assert total == pytest.approx(1.0, rel=1e-10)

    def test_full_order_single_component(self):
        m = vs.SpectralModel.custom([0.9, 0.5, 0.1])
        assert vs.delta_n(m, 3) == pytest.approx(1.0, rel=1e-12)

    def test_wrong_size_rejected(self):
        m = vs.SpectralModel.custom([0.9, 0.5, 0.1])
        with pytest.raises(ValueError):
            vs.mixture_weight(m, [1, 2], 3)
        with pytest.raises(ValueError):
            vs.mixture_weight(m, [1, 1, 2], 3)

    def test_leading_weight_bound_geometric(self):
        m = vs.SpectralModel.geometric(0.5, truncation=128)
        d2 = vs.delta_n(m, 2)
        p2 = math.exp(vs.spectrum_table(m, 2).log_esp(2))
        assert d2 == pytest.approx(0.5 * 0.25 / p2, rel=1e-12)
        # delta_N <= sigma_N / r_N with r_N the exact geometric tail
        assert d2 <= vs.eigenvalue(m, 2) / vs.tail_mass(m, 2).upper

    @pytest.mark.parametrize(
        "model",
        [
            vs.SpectralModel.sobolev(1, truncation=256),
            vs.SpectralModel.sobolev(3, truncation=256),
            vs.SpectralModel.geometric(0.2, truncation=256),
        ],
    )
    def test_leading_weight_bound_profile(self, model):
        for n in (1, 2, 5, 10, 20):
            bound = vs.eigenvalue(model, n) / vs.tail_mass(model, n).lower
            assert vs.delta_n(model, n) <= bound * (1 + 1e-12)
