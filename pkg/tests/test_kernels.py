import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from alrbem.kernels import EULER_GAMMA, green, radial_derivatives, radiation_check

H0_AT_ONE = -0.0220642410539192 + 0.1912994216394916j


def mp_green(dim, k, rho):
    k, rho = mp.mpmathify(k), mp.mpf(rho)
    if dim == 2:
        return complex(mp.mpc(0, 0.25) * mp.hankel1(0, k * rho))
    return complex(mp.exp(1j * k * rho) / (4 * mp.pi * rho))


def test_static_values():
    assert green(3, 0, np.array([1.0, 0, 0])).value == pytest.approx(1 / (4 * np.pi))
    assert green(2, 0, np.array([0.6, 0.8])).value == 0.0
    assert green(2, 0, np.array([2.0, 0])).value == pytest.approx(-np.log(2) / (2 * np.pi))


def test_helmholtz_value_at_unit_distance():
    val = green(2, 1.0, np.array([1.0, 0.0])).value
    assert val == pytest.approx(H0_AT_ONE, abs=1e-15)
    assert val == pytest.approx(mp_green(2, 1, 1), abs=1e-15)


@pytest.mark.parametrize("dim, k, rho", [(2, 3 + 0.6j, 1.0), (2, 0.05, 7.0), (2, 20.0, 0.3),
                                         (3, 1.0, 2.0), (3, 2 + 1j, 0.4)])
def test_against_high_precision(dim, k, rho):
    r = np.zeros(dim)
    r[0] = rho
    assert green(dim, k, r).value == pytest.approx(mp_green(dim, k, rho), rel=1e-12)


def test_complex_wavenumber_frozen_value():
    assert green(2, 3 + 0.6j, np.array([1.0, 0])).value == pytest.approx(
        -0.0539767103822993 - 0.0300974319910853j, abs=1e-14)


def test_small_k_matches_static_kernel():
    k = 1e-4
    rho = np.array([0.3, 1.0, 4.0])
    g = radial_derivatives(2, k, rho)[0]
    const = 0.25j - (np.log(k / 2) + EULER_GAMMA) / (2 * np.pi)
    assert np.allclose(g - const, -np.log(rho) / (2 * np.pi), atol=1e-6)


def test_symmetry():
    r = np.array([[0.3, -1.2], [2.0, 0.1]])
    for k in (0, 1.3):
        assert np.array_equal(green(2, k, r).value, green(2, k, -r).value)


@settings(max_examples=100, deadline=None)
@given(st.sampled_from([2, 3]), st.one_of(st.just(0.0), st.floats(1e-3, 5)), st.floats(0, 1),
       st.floats(0.1, 10), st.floats(0, 2 * np.pi), st.floats(0.1, np.pi - 0.1))
def test_gradient_and_hessian_vs_finite_differences(dim, kr, ki, rho, phi, theta):
    k = complex(kr, ki if kr > 0 else 0.0)
    if dim == 2:
        r = rho * np.array([np.cos(phi), np.sin(phi)])
    else:
        r = rho * np.array([np.sin(theta) * np.cos(phi), np.sin(theta) * np.sin(phi), np.cos(theta)])
    h = 1e-5 * rho
    ev = green(dim, k, r, hessian=True)
    fd = np.array([(green(dim, k, r + h * e).value - green(dim, k, r - h * e).value) / (2 * h)
                   for e in np.eye(dim)])
    scale = np.abs(ev.gradient).max()
    assert np.abs(fd - ev.gradient).max() <= 1e-6 * scale
    fdh = np.array([(green(dim, k, r + h * e).gradient - green(dim, k, r - h * e).gradient) / (2 * h)
                    for e in np.eye(dim)])
    assert np.abs(fdh - ev.hessian).max() <= 1e-6 * np.abs(ev.hessian).max()


def test_laplacian_from_hessian_solves_helmholtz():
    for dim, k in ((2, 1.7), (3, 0.9 + 0.2j), (2, 0), (3, 0)):
        r = np.full(dim, 0.7)
        ev = green(dim, k, r, hessian=True)
        assert abs(np.trace(ev.hessian) + k**2 * ev.value) < 1e-12


def test_singular_point_and_branch_rejected():
    with pytest.raises(ValueError):
        green(2, 1.0, np.zeros(2))
    with pytest.raises(ValueError):
        green(2, -1j, np.ones(2))
    with pytest.raises(ValueError):
        green(4, 1.0, np.ones(4))


def test_radiation_condition_residuals():
    radii = np.array([10.0, 100.0, 1000.0])
    r3 = radiation_check(3, 1.0, [1, 0, 0], radii)
    assert np.all(np.diff(r3) < 0) and r3[0] / r3[-1] >= 1e2
    r2 = radiation_check(2, 1.0, [0, 1], radii)
    assert np.all(np.diff(r2) < 0) and r2[-1] < 1e-3
    d3 = radiation_check(3, 0, [0, 0, 1], radii)
    assert np.allclose(d3, 1 / (4 * np.pi))
    with pytest.raises(ValueError):
        radiation_check(2, 0, [1, 0], radii)
