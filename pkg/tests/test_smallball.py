import itertools
from fractions import Fraction
from math import comb

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rmtlab.ensembles import AtomDistribution, BlockEnsembleSpec, bernoulli
from rmtlab.errors import CapExceededError
from rmtlab.gap import Gap
from rmtlab.smallball import (CoefficientArray, decoupling_check, factored_zero_probability,
                              linear_smallball, multilinear_smallball, pigeonhole_bound)

B = bernoulli(1)


def brute_force_linear(a, beta):
    """Direct evaluation over all sign patterns and all candidate centers on a fine grid."""
    sums = np.array([np.dot(s, a) for s in itertools.product((-1, 1), repeat=len(a))])
    best = 0
    for c in np.unique(np.concatenate([sums, sums + beta, sums - beta])):
        best = max(best, int(np.sum(np.abs(sums - c) <= beta + 1e-9)))
    return Fraction(best, 2 ** len(a))


def test_all_ones_n4():
    r = linear_smallball([1, 1, 1, 1], B, 1)
    assert r.rho == Fraction(10, 16) and r.method == "exact-enumeration"
    # an optimal center covers two adjacent sums
    assert abs(r.center) == 1


def test_zero_coefficients():
    assert linear_smallball([0, 0, 0], B, 0).rho == 1


@pytest.mark.parametrize("n", range(4, 21, 2))
def test_erdos_binomial(n):
    r = linear_smallball([1] * n, B, 1)
    assert r.rho == Fraction(comb(n, n // 2) + comb(n, n // 2 - 1), 2 ** n)
    assert float(r.rho) * n ** 0.5 <= 2


def test_erdos_decay_monotone():
    vals = [float(linear_smallball([1] * n, B, 1).rho) * n ** 0.5 for n in range(4, 21, 2)]
    assert all(a <= b for a, b in zip(vals, vals[1:]))  # increasing to sqrt(8/pi) < 2
    assert max(vals) <= 2


@settings(max_examples=40, deadline=None)
@given(st.lists(st.integers(-4, 4), min_size=1, max_size=10), st.sampled_from([0, 0.5, 1, 2.5]))
def test_dp_equals_enumeration(coeffs, beta):
    a = linear_smallball(coeffs, B, beta, method="exact-enumeration")
    b = linear_smallball(coeffs, B, beta, method="dp-lattice")
    assert a.rho == b.rho


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(-3, 3, allow_nan=False), min_size=1, max_size=7), st.floats(0, 2))
def test_real_sup_against_brute_force(coeffs, beta):
    assert linear_smallball(coeffs, B, beta).rho == brute_force_linear(coeffs, beta)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.integers(-3, 3), min_size=1, max_size=8), st.floats(0, 1), st.floats(0, 1))
def test_monotone_in_beta(coeffs, b1, b2):
    lo, hi = sorted((b1, b2))
    assert linear_smallball(coeffs, B, lo).rho <= linear_smallball(coeffs, B, hi).rho


def test_permutation_and_phase_invariance(rs):
    for _ in range(10):
        a = rs.normal(size=6) + 1j * rs.normal(size=6)
        beta = float(rs.uniform(0.2, 1.5))
        base = linear_smallball(a, B, beta).rho
        assert linear_smallball(rs.permutation(a), B, beta).rho == base
        assert linear_smallball(a * np.exp(0.7j), B, beta).rho == base


def test_complex_disc_beats_point_centers():
    # the optimum must be at least as good as every disc centered at an achievable value
    a = [1.0, np.exp(2j * np.pi / 3)]
    atom = AtomDistribution("discrete-custom", 1, support=(-1.0, 0.0, 1.0),
                            probabilities=(Fraction(1, 4), Fraction(1, 2), Fraction(1, 4)))
    beta = 1.0
    r = linear_smallball(a, atom, beta)
    sup = atom.values()  # support rescaled to unit variance
    vals = np.array([x * a[0] + y * a[1] for x in sup for y in sup])
    w = np.array([float(p * q) for p in atom.exact_probabilities() for q in atom.exact_probabilities()])
    assert float(r.rho) >= max(w[np.abs(vals - v) <= beta + 1e-9].sum() for v in vals) - 1e-15
    inside = np.abs(vals - r.center) <= beta + 1e-9
    assert float(r.rho) == pytest.approx(w[inside].sum())


def test_monte_carlo_route():
    a = np.linspace(0.1, 2.0, 40) * (1 + 0.3j)
    r = linear_smallball(a, B, 1.0, trials=20000, seed=3)
    assert r.method == "monte-carlo" and r.ci_halfwidth > 0
    ref = linear_smallball(a[:20], B, 1.0)
    assert 0 < r.rho <= 1 and ref.rho <= 1


def test_cap_without_fallback():
    with pytest.raises(CapExceededError):
        linear_smallball([0.5] * 30, B, 0.1, method="exact-enumeration")
    with pytest.raises(CapExceededError):
        linear_smallball([0.5, 1.5], B, 0.1, method="dp-lattice")


def test_multilinear_rank_one_example():
    A = CoefficientArray.rank_one([1, -1], [1, -1])
    r = multilinear_smallball(A, B, 0, center=0)
    assert r.rho == Fraction(3, 4)
    assert factored_zero_probability([1, -1], [1, -1], B) == Fraction(3, 4)


def test_multilinear_zero_array():
    A = CoefficientArray(np.zeros((3, 3)))
    r = multilinear_smallball(A, B, 0)
    assert r.rho == 1 and r.center == 0


def test_multilinear_matches_direct_sum(rs):
    A = CoefficientArray(rs.integers(-2, 3, size=(3, 3)))
    shift = lambda x, y: 2 * x[0] - y[2]
    res = multilinear_smallball(A, B, 0.5, shift=shift)
    vals = []
    for x in itertools.product((-1, 1), repeat=3):
        for y in itertools.product((-1, 1), repeat=3):
            vals.append(np.array(x) @ A.entries @ np.array(y) + shift(x, y))
    vals = np.array(vals)
    best = max(np.sum(np.abs(vals - c) <= 0.5 + 1e-9) for c in np.concatenate([vals, vals + 0.5]))
    assert res.rho == Fraction(int(best), 64)


def test_multilinear_gap_pigeonhole():
    q = Gap.symmetric([2], [1])
    A = CoefficientArray(np.array([[2, -2], [0, 2]]))
    r = multilinear_smallball(A, B, 0)
    assert r.rho >= Fraction(1, q.dilate(4).size)


def test_multilinear_cap():
    with pytest.raises(CapExceededError):
        multilinear_smallball(CoefficientArray(np.ones((13, 13))), B, 0)


def test_pigeonhole_examples():
    q = Gap.symmetric([1.7], [1])
    four = pigeonhole_bound(q, 4, B)
    assert four.rho == Fraction(6, 16) and four.bound == Fraction(1, 9) and four.verified
    one = pigeonhole_bound(q, 1, B)
    assert one.rho == Fraction(1, 2) and one.bound == Fraction(1, 3)
    empty = pigeonhole_bound(Gap((), (), ()), 3, B)
    assert empty.bound == 1 and empty.rho == 1
    with pytest.raises(ValueError):
        pigeonhole_bound(q, [0.5], B)


def test_decoupling_saturated():
    spec = BlockEnsembleSpec.uniform(2, "bernoulli-real")
    rep = decoupling_check(spec, 2, 100.0, 2000, 1)
    assert rep.rho_hat == 1 and rep.rho_decoupled_hat == 1 and rep.ratio == 1


def test_decoupling_deterministic_and_partition_checked():
    spec = BlockEnsembleSpec.uniform(2, "bernoulli-real")
    a = decoupling_check(spec, 3, 0.5, 5000, 9)
    b = decoupling_check(spec, 3, 0.5, 5000, 9)
    assert a == b
    with pytest.raises(ValueError):
        decoupling_check(spec, 3, 0.5, 100, 9, partition=((0, 1, 2), ()))


def test_two_point_centers_beat_point_centers():
    from rmtlab.smallball import best_ball

    # vertices of a triangle with circumradius 1: any disc centered at a vertex holds one
    # point, the circumscribed disc holds all three
    pts = np.exp(2j * np.pi * np.arange(3) / 3)
    mass, center = best_ball(pts, np.ones(3, dtype=np.int64), 1.0)
    assert mass == 3 and abs(center) < 1e-12
