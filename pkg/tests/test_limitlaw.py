import math

import numpy as np
import pytest

from rmtlab.errors import BranchAmbiguityError
from rmtlab.limitlaw import (cubic_residual, circular_radial_cdf, density_rho, fixed_point_residual,
                             g_limit, limit_measure, nu_z_cdf, semicircle_cdf, solve_cubic_m)

GOLDEN = 1j * (math.sqrt(5) - 1) / 2


def semicircle_m(w):
    # root of m^2 + w m + 1 = 0 in the upper half-plane
    r = np.sqrt(w * w - 4 + 0j)
    roots = [(-w + r) / 2, (-w - r) / 2]
    return max(roots, key=lambda v: v.imag)


def test_closed_form_at_origin():
    assert abs(solve_cubic_m(0, 1j).m - GOLDEN) <= 1e-12
    for w in (0.3 + 0.1j, -1.7 + 0.05j, 2.5 + 2j):
        assert solve_cubic_m(0, w).m == pytest.approx(semicircle_m(w), abs=1e-10)


def test_residual_and_branch_on_grid():
    for z in (0, 0.5, 1.0 + 1.0j, 2.0):
        for u in np.linspace(-3, 3, 7):
            for v in (0.05, 0.3, 2.0):
                w = complex(u, v)
                sol = solve_cubic_m(z, w)
                assert sol.m.imag > 0
                assert sol.residual <= 1e-12 * (1 + abs(w)) ** 3
                assert cubic_residual(sol.m, z, w) == sol.residual
                assert abs(fixed_point_residual(sol.m, z, w)) <= 1e-9


def test_large_w_asymptotics():
    for z in (0, 0.7, 2.0):
        for w in (1e3j, 600 + 800j):
            m = solve_cubic_m(z, w).m
            assert abs(m + 1 / w) <= 10 / abs(w) ** 2


def test_rejects_lower_half_plane():
    with pytest.raises(ValueError):
        solve_cubic_m(0, 1.0)


def test_continuity_along_segment():
    ws = np.linspace(-2, 2, 81) + 0.2j
    ms = np.array([solve_cubic_m(0.8, w).m for w in ws])
    step = ws[1] - ws[0]
    deriv = np.abs(np.gradient(ms, step.real))
    assert np.all(np.abs(np.diff(ms)) < 10 * abs(step) * (deriv[1:] + deriv[:-1] + 1e-12))


def test_density_examples():
    assert density_rho(0, 0) == pytest.approx(1 / math.pi, abs=1e-6)
    assert density_rho(0, 3) == 0
    for z in (0.0, 0.6, 1.5j, 2.5):
        xs = np.linspace(0.05, 3, 12)
        left = np.array([density_rho(z, -x) for x in xs])
        right = np.array([density_rho(z, x) for x in xs])
        assert np.max(np.abs(left - right)) <= 1e-9
        assert np.all(right >= 0) and np.all(right <= 1 + 1e-6)


def test_nu_zero_is_semicircle():
    xs = np.linspace(-2, 2, 100)
    assert np.max(np.abs(nu_z_cdf(0, xs) - semicircle_cdf(xs))) <= 1e-5
    assert nu_z_cdf(0, 0.0) == pytest.approx(0.5, abs=1e-9)
    assert nu_z_cdf(0, 2.0) == pytest.approx(1.0, abs=1e-6)
    assert limit_measure(0).total_mass == pytest.approx(1, abs=1e-6)


def test_nu_z_off_origin():
    lm = limit_measure(1.2)
    assert lm.total_mass == pytest.approx(1, abs=1e-6)
    xs = np.linspace(-4, 4, 200)
    f = lm.cdf(xs)
    assert np.all(np.diff(f) >= -1e-12)
    assert lm.cdf(0.0) == pytest.approx(0.5, abs=1e-7)


def test_g_limit():
    assert g_limit(0, 5) == 0
    assert g_limit(1.5, 0) == pytest.approx(4 / 3)
    assert g_limit(0.5, 0.5) == 1


def test_circular_radial_cdf():
    assert circular_radial_cdf(0) == 0
    assert circular_radial_cdf(1) == 1
    assert circular_radial_cdf(0.5) == 0.25
    assert circular_radial_cdf(7.0) == 1
    with pytest.raises(ValueError):
        circular_radial_cdf(-0.1)


def test_branch_error_type_is_runtime_error():
    assert issubclass(BranchAmbiguityError, RuntimeError)
