"""Spectral model tests: eigenvalue closed forms, the Fourier basis,
Mercer sums against brute-force and closed-form oracles, tails.

Quadrature oracle: for 1-periodic trigonometric polynomials the uniform
grid mean (1/n) sum f(k/n) integrates exactly once n exceeds the highest
frequency present, so basis products with modes <= 21 are integrated to
machine precision on a 256-point grid.
"""

import json
import math

import numpy as np
import pytest

import volsamp as vs

GRID = np.arange(256) / 256.0


def periodic_integral(values: np.ndarray) -> float:
    """Exact integral of a low-frequency 1-periodic trig polynomial sampled
    on the uniform grid."""
    return float(np.mean(values))


class TestEigenvalues:
    def test_sobolev_closed_form(self):
        m = vs.SpectralModel.sobolev(3, truncation=16)
        assert vs.eigenvalue(m, 2) == 0.015625  # 2^-6

    def test_geometric_closed_form(self):
        m = vs.SpectralModel.geometric(0.5, truncation=16)
        assert vs.eigenvalue(m, 1) == 0.5

    def test_classical_pairs(self):
        m = vs.SpectralModel.sobolev_classical(2, truncation=16)
        assert vs.eigenvalue(m, 1) == 1.0
        # frequency j covers indices 2j and 2j+1 with the same value j^(-2s)
        assert vs.eigenvalue(m, 4) == vs.eigenvalue(m, 5) == 2.0 ** (-4)

    def test_index_zero_rejected(self):
        for m in (
            vs.SpectralModel.sobolev(1, truncation=8),
            vs.SpectralModel.geometric(0.3, truncation=8),
            vs.SpectralModel.custom([1.0, 0.5]),
        ):
            with pytest.raises(ValueError):
                vs.eigenvalue(m, 0)

    @pytest.mark.parametrize(
        "model",
        [
            vs.SpectralModel.sobolev(1, truncation=64),
            vs.SpectralModel.sobolev(5, truncation=64),
            vs.SpectralModel.geometric(0.7, truncation=64),
            vs.SpectralModel.sobolev_classical(2, truncation=64),
            vs.SpectralModel.custom(sorted(np.random.default_rng(0).random(20), reverse=True)),
        ],
    )
    def test_monotone_non_increasing(self, model):
        sig = model.eigenvalues()
        assert np.all(np.diff(sig) <= 0)
        assert np.all(sig > 0)

    def test_custom_validation(self):
        with pytest.raises(ValueError):
            vs.SpectralModel.custom([0.5, 1.0])  # increasing
        with pytest.raises(ValueError):
            vs.SpectralModel.custom([1.0, -0.5])
        with pytest.raises(ValueError):
            vs.SpectralModel.geometric(1.0)
        with pytest.raises(ValueError):
            vs.SpectralModel.sobolev(0)


class TestEigenfunctions:
    def test_constant_mode(self):
        m = vs.SpectralModel.sobolev(1, truncation=8)
        assert vs.eigenfunction_eval(m, 1, 0.37) == 1.0

    def test_cos_at_zero(self):
        m = vs.SpectralModel.sobolev(1, truncation=8)
        assert vs.eigenfunction_eval(m, 2, 0.0) == pytest.approx(math.sqrt(2.0), abs=1e-15)

    def test_domain_error(self):
        m = vs.SpectralModel.sobolev(1, truncation=8)
        with pytest.raises(ValueError):
            vs.eigenfunction_eval(m, 2, 1.2)

    def test_pair_orthogonality_by_quadrature(self):
        m = vs.SpectralModel.sobolev(1, truncation=32)
        e2 = vs.eigenfunction_eval(m, 2, GRID)
        e3 = vs.eigenfunction_eval(m, 3, GRID)
        assert abs(periodic_integral(e2 * e3)) < 1e-10

    def test_orthonormal_system(self):
        m = vs.SpectralModel.sobolev(1, truncation=32)
        e = vs.eigenfunction_matrix(m, GRID, modes=np.arange(1, 21))
        overlaps = e @ e.T / GRID.size
        np.testing.assert_allclose(overlaps, np.eye(20), atol=1e-8)

    def test_matrix_matches_scalar(self):
        m = vs.SpectralModel.sobolev(1, truncation=16)
        x = np.array([0.1, 0.6, 0.93])
        e = vs.eigenfunction_matrix(m, x)
        for row, mode in enumerate(range(1, 17)):
            np.testing.assert_allclose(e[row], vs.eigenfunction_eval(m, mode, x))


class TestKernel:
    def test_classical_diagonal_value(self):
        # B_2(t) = t^2 - t + 1/6, so k(x, x) = 1 + 2 pi^2 / 6 = 1 + pi^2 / 3
        val = vs.classical_kernel_closed_form(1, 0.4, 0.4)
        assert val == pytest.approx(1.0 + math.pi**2 / 3.0, rel=1e-14)

    def test_symmetry(self):
        m = vs.SpectralModel.sobolev(2, truncation=64)
        assert vs.kernel_eval(m, 0.21, 0.77) == vs.kernel_eval(m, 0.77, 0.21)

    def test_mercer_sum_oracle(self):
        m = vs.SpectralModel.sobolev(3, truncation=200)
        x, y = 0.1, 0.9
        brute = math.fsum(
            vs.eigenvalue(m, k) * vs.eigenfunction_eval(m, k, x) * vs.eigenfunction_eval(m, k, y)
            for k in range(1, 201)
        )
        assert vs.kernel_eval(m, x, y) == pytest.approx(brute, abs=1e-12)

    @pytest.mark.parametrize("s", [1, 2, 3])
    def test_closed_form_within_tail_of_truncated_sum(self, s):
        m = vs.SpectralModel.sobolev_classical(s, truncation=101)
        budget = 2.0 * vs.tail_mass(m).upper  # |e_m| <= sqrt(2) gives the factor 2
        rng = np.random.default_rng(7)
        for _ in range(25):
            x, y = rng.random(2)
            gap = abs(vs.classical_kernel_closed_form(s, x, y) - vs.kernel_eval(m, x, y))
            assert gap <= budget

    def test_gram_positive_semidefinite(self):
        rng = np.random.default_rng(11)
        for model in (
            vs.SpectralModel.sobolev(1, truncation=40),
            vs.SpectralModel.geometric(0.6, truncation=40),
        ):
            pts = rng.random(6)
            k_mat = vs.kernel_matrix(model, pts)
            eigs = np.linalg.eigvalsh(k_mat)
            assert eigs.min() >= -1e-10 * np.trace(k_mat)


class TestEmbedding:
    def setup_method(self):
        self.model = vs.SpectralModel.sobolev(2, truncation=32)

    def test_single_mode(self):
        g = vs.CoefficientVector.unit(4)
        x = np.array([0.12, 0.5, 0.8])
        np.testing.assert_allclose(
            vs.embedding_eval(self.model, g, x),
            vs.eigenvalue(self.model, 4) * vs.eigenfunction_eval(self.model, 4, x),
        )

    def test_norm_against_double_quadrature(self):
        # <Sigma g, Sigma g>_F = integral of g(x) k(x, y) g(y) dx dy
        g = vs.CoefficientVector.from_mapping({1: 0.5, 3: -1.2, 8: 0.3})
        gv = np.zeros(GRID.size)
        for m, c in g.coeffs:
            gv += c * vs.eigenfunction_eval(self.model, m, GRID)
        k_grid = vs.kernel_matrix(self.model, GRID)
        oracle = float(gv @ k_grid @ gv) / GRID.size**2
        assert vs.embedding_norm_sq(self.model, g) == pytest.approx(oracle, rel=1e-10)

    def test_zero_everywhere(self):
        g = vs.CoefficientVector.from_mapping({})
        assert vs.embedding_eval(self.model, g, 0.3) == 0.0
        assert vs.embedding_norm_sq(self.model, g) == 0.0

    def test_basis_mismatch(self):
        mu = vs.CoefficientVector.unit(1, vs.RKHS)
        with pytest.raises(vs.BasisMismatchError):
            vs.embedding_eval(self.model, mu, 0.5)
        with pytest.raises(vs.BasisMismatchError):
            vs.embed(self.model, mu)

    def test_embed_scales_by_root_eigenvalue(self):
        g = vs.CoefficientVector.from_mapping({2: 3.0})
        mu = vs.embed(self.model, g)
        assert mu.basis == vs.RKHS
        assert mu[2] == pytest.approx(3.0 * math.sqrt(vs.eigenvalue(self.model, 2)))


class TestTails:
    def test_geometric_exact(self):
        m = vs.SpectralModel.geometric(0.5, truncation=16)
        tb = vs.tail_mass(m, 3)
        assert tb.lower == tb.upper == pytest.approx(0.125, rel=1e-15)

    def test_custom_empty_tail(self):
        m = vs.SpectralModel.custom([1.0, 0.5, 0.25])
        tb = vs.tail_mass(m, 3)
        assert tb.lower == tb.upper == 0.0

    def test_custom_partial_tail(self):
        m = vs.SpectralModel.custom([1.0, 0.5, 0.25], truncation=2)
        tb = vs.tail_mass(m, 2)
        assert tb.lower == tb.upper == 0.25

    def test_sobolev_bracket_contains_truth(self):
        m = vs.SpectralModel.sobolev(1, truncation=16)
        tb = vs.tail_mass(m, 10)
        # high-precision partial summation: zeta(2) minus the first 10 terms
        truth = math.pi**2 / 6.0 - math.fsum((k + 1.0) ** -2 for k in range(10))
        assert truth == pytest.approx(0.095166, abs=1e-6)
        assert tb.lower <= truth <= tb.upper

    @pytest.mark.parametrize("m_top", [1, 2, 7, 8])
    def test_classical_bracket_contains_truth(self, m_top):
        model = vs.SpectralModel.sobolev_classical(2, truncation=16)
        tb = vs.tail_mass(model, m_top)
        truth = math.fsum(vs.eigenvalue(model, k) for k in range(m_top + 1, 400_001))
        assert tb.lower <= truth <= tb.upper

    def test_truncation_diagnostic_decreases_with_m(self):
        small = vs.SpectralModel.sobolev(1, truncation=32)
        large = vs.SpectralModel.sobolev(1, truncation=512)
        assert vs.truncation_diagnostic(large) < vs.truncation_diagnostic(small) < 1.0


class TestSerialization:
    def test_roundtrip(self):
        for model in (
            vs.SpectralModel.sobolev(3, truncation=128),
            vs.SpectralModel.geometric(0.2, truncation=64),
            vs.SpectralModel.custom([1.0, 0.25, 0.125]),
        ):
            assert vs.SpectralModel.from_json(model.to_json()) == model

    def test_descriptor_keys_are_exact(self):
        desc = json.loads(vs.SpectralModel.sobolev(1, truncation=8).to_json())
        assert set(desc) == {"family", "param", "truncation"}
        with pytest.raises(ValueError):
            vs.SpectralModel.from_descriptor({**desc, "extra": 1})
        with pytest.raises(ValueError):
            vs.SpectralModel.from_descriptor({"family": "sobolev", "param": 1})

    def test_default_truncation_rule(self):
        assert vs.default_truncation(10) == 128
        assert vs.default_truncation(100) == 400
