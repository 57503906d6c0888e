from fractions import Fraction

import numpy as np
import pytest

from rmtlab.ensembles import (AtomDistribution, BlockEnsembleSpec, PerturbationSpec, bernoulli,
                              block_tuples, build_correlated_demo, covariance_check, gaussian,
                              heavy_discrete, low_rank_perturbation, quaternion_embed,
                              sample_c0_matrix, sample_iid_matrix)
from rmtlab.errors import ShapeError
from rmtlab.linalg import complex_eigen, singular_values
from rmtlab.spectral import conjugate_pairing_error


def test_atom_normalization_exact():
    for d in (1, 2, 3):
        assert bernoulli(d).variance == pytest.approx(1 / d)
        vals = bernoulli(d).values()
        assert np.allclose(vals ** 2, 1 / d)
    h = heavy_discrete(2)
    p = np.array([float(q) for q in h.exact_probabilities()])
    assert np.sum(p * h.values()) == pytest.approx(0, abs=1e-15)
    assert np.sum(p * h.values() ** 2) == pytest.approx(0.5, rel=1e-14)
    assert h.exact_probabilities() == (Fraction(9, 20),) * 2 + (Fraction(1, 20),) * 2


def test_complex_heavy_atom_is_rotation_free():
    h = heavy_discrete(2, complex_=True)
    assert abs(h.second_moment()) < 1e-15
    assert sum(h.exact_probabilities()) == 1


def test_discrete_custom_validation():
    with pytest.raises(ValueError):
        AtomDistribution("discrete-custom", 2, support=(0.0, 1.0), probabilities=(0.5, 0.5))
    with pytest.raises(ValueError):
        AtomDistribution("discrete-custom", 2, support=(-1.0, 1.0), probabilities=(0.5, 0.6))
    with pytest.raises(ValueError):
        AtomDistribution("cauchy", 2)


@pytest.mark.parametrize("atom", [bernoulli(2), gaussian(2), gaussian(2, True), heavy_discrete(2)])
def test_atom_empirical_variance(atom):
    x = atom.draw(5, np.arange(10**6))
    assert abs(np.mean(np.abs(x) ** 2) - 0.5) <= 0.005
    assert abs(np.mean(x)) <= 0.005


def test_absolute_moments_closed_forms():
    g = gaussian(2)
    x = g.draw(1, np.arange(10**6))
    assert g.absolute_moment(3) == pytest.approx(np.mean(np.abs(x) ** 3), rel=0.01)
    gc = gaussian(2, True)
    y = gc.draw(1, np.arange(10**6))
    assert gc.absolute_moment(3) == pytest.approx(np.mean(np.abs(y) ** 3), rel=0.01)


def test_spec_validation():
    with pytest.raises(ValueError):
        BlockEnsembleSpec.uniform(3, "gaussian-complex", "quaternionic")
    with pytest.raises(ValueError):
        BlockEnsembleSpec.uniform(2, "bernoulli-real", "quaternionic")
    with pytest.raises(ValueError):
        BlockEnsembleSpec.uniform(1)
    assert not BlockEnsembleSpec.uniform(2, "gaussian-real", "correlated-demo").c0_compliant


def test_sampling_is_deterministic():
    spec = BlockEnsembleSpec.uniform(2, "gaussian-complex", "quaternionic")
    a = sample_c0_matrix(spec, 7, 99)
    b = sample_c0_matrix(spec, 7, 99)
    assert a.tobytes() == b.tobytes()
    assert not np.array_equal(a, sample_c0_matrix(spec, 7, 100))


def test_sampling_order_does_not_matter():
    spec = BlockEnsembleSpec.uniform(2, "bernoulli-real")
    full = sample_c0_matrix(spec, 6, 3)
    # entry (s, t; i, j) drawn alone equals the assembled matrix entry
    one = block_tuples(spec, 3, np.array([4]), np.array([2]))
    assert full[0 * 6 + 4, 1 * 6 + 2] == one[0, 1, 0]


def test_bernoulli_mean():
    x = sample_c0_matrix(BlockEnsembleSpec.uniform(2, "bernoulli-real"), 1000, 1)
    assert abs(x.mean()) <= 0.005


def test_quaternionic_block_structure():
    spec = BlockEnsembleSpec.uniform(2, "gaussian-complex", "quaternionic")
    x = sample_c0_matrix(spec, 9, 4)
    a, b = x[:9, :9], x[:9, 9:]
    assert np.array_equal(x[9:, :9], -np.conj(b))
    assert np.array_equal(x[9:, 9:], np.conj(a))


def test_quaternion_embed_examples():
    m = quaternion_embed([[1j]], [[0]])
    assert np.array_equal(m, [[1j, 0], [0, -1j]])
    m = quaternion_embed([[0]], [[1]])
    assert np.array_equal(m, [[0, 1], [-1, 0]])
    ev = complex_eigen(m).values
    assert np.allclose(sorted(ev, key=lambda v: v.imag), [-1j, 1j])
    with pytest.raises(ShapeError):
        quaternion_embed(np.eye(2), np.eye(3))


def test_quaternionic_spectra_conjugation_closed(rs):
    for n in (1, 3, 10, 40):
        a = rs.standard_normal((n, n)) + 1j * rs.standard_normal((n, n))
        b = rs.standard_normal((n, n)) + 1j * rs.standard_normal((n, n))
        m = quaternion_embed(a, b)
        assert conjugate_pairing_error(complex_eigen(m).values) <= 1e-8 * np.linalg.norm(m)


def test_correlated_demo():
    assert np.array_equal(build_correlated_demo([[1]], [[0]]), [[1, 1], [1, 0]])
    rs = np.random.default_rng(0)
    a = rs.standard_normal((5, 2)) @ rs.standard_normal((2, 5))
    m = build_correlated_demo(a, a)
    assert np.sum(singular_values(m).values > 1e-10) == 2
    with pytest.raises(ShapeError):
        build_correlated_demo(np.eye(2), np.eye(3))


def test_covariance_check_flags():
    q = covariance_check(BlockEnsembleSpec.uniform(2, "gaussian-complex", "quaternionic"), 10**6, 1)
    assert q.passed and q.max_cross <= 0.005
    b = covariance_check(BlockEnsembleSpec.uniform(2, "bernoulli-real"), 10**6, 2)
    assert b.passed and b.max_cross <= 0.005
    c = covariance_check(BlockEnsembleSpec.uniform(2, "gaussian-real", "correlated-demo"), 10**5, 3)
    assert not c.passed
    assert abs(c.table[((0, 0), (0, 1))] - 0.5) <= 0.01


def test_low_rank_perturbation_bounds():
    one = low_rank_perturbation(PerturbationSpec(1.0, 1.0, 1.0), 2, 50)
    assert np.sum(singular_values(one).values > 1e-10) == 1
    assert np.abs(one).max() <= 50
    zero = low_rank_perturbation(PerturbationSpec(0.5, 1.0, 0.0), 2, 50)
    assert not zero.any()
    p = PerturbationSpec(0.5, 0.5, 1.0)
    n10 = low_rank_perturbation(p, 2, 100, seed=8)
    assert np.sum(singular_values(n10).values > 1e-10) <= 10
    assert np.abs(n10).max() <= 100 ** 0.5 + 1e-12
    assert np.sum(np.abs(n10) ** 2) <= 100 ** 2 + 1e-9


def test_perturbation_validation():
    with pytest.raises(ValueError):
        PerturbationSpec(0.0)
    with pytest.raises(ValueError):
        PerturbationSpec(0.5, -1.0)


def test_iid_matrix_shape():
    x = sample_iid_matrix(gaussian(1, True), 30, 0)
    assert x.shape == (30, 30)
    assert np.mean(np.abs(x) ** 2) == pytest.approx(1, abs=0.1)
