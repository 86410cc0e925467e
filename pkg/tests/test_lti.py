"""Polynomials, rational models, realizations, ZOH, H2 norms, closed loop."""

import numpy as np
import pytest
import scipy.linalg

from svfid import lti
from svfid.presets import preset_catalog, make_filter

from conftest import random_tf


# ---------------------------------------------------------------- polynomials


@pytest.mark.oracle
def test_poly_product_plus_sum_closed_loop_numerator():
    # (p - 1)(0.2 p - 2) + (3 p + 7) = 0.2 p^2 + 0.8 p + 9, the P1/K1
    # closed-loop characteristic polynomial worked out by hand.
    p = lti.Polynomial([-1.0, 1.0]) * lti.Polynomial([-2.0, 0.2]) + lti.Polynomial([7.0, 3.0])
    np.testing.assert_allclose(p.coeffs, [9.0, 0.8, 0.2], atol=1e-15)


def test_poly_arithmetic_and_trimming():
    a = lti.Polynomial([1.0, 2.0, 0.0])  # trailing zero trimmed
    assert a.degree == 1
    b = lti.Polynomial([0.0, 1.0])
    assert (a - a).is_zero
    assert (-b).coeffs[1] == -1.0
    c = a * b
    np.testing.assert_allclose(c.coeffs, [0.0, 1.0, 2.0])
    assert a(2.0) == 5.0
    # scalar multiply
    np.testing.assert_allclose((a * 3.0).coeffs, [3.0, 6.0])


def test_poly_roots():
    r = np.sort_complex(lti.Polynomial([-4.0, 0.0, 1.0]).roots())
    np.testing.assert_allclose(r, [-2.0, 2.0], atol=1e-12)


# ----------------------------------------------------------- rational models


def test_tf_monic_normalization():
    g = lti.tf([7.0, 3.0], [-2.0, 0.2])
    np.testing.assert_allclose(g.den.coeffs, [-10.0, 1.0])
    np.testing.assert_allclose(g.num.coeffs, [35.0, 15.0])
    assert g.relative_degree == 0
    assert g.order == 1


def test_tf_rejects_improper():
    with pytest.raises(ValueError):
        lti.tf([1.0, 2.0, 3.0], [1.0, 1.0])
    with pytest.raises(ValueError):
        lti.tf([1.0], [0.0])


def test_matrix_fraction_shape_and_properness():
    mf = lti.MatrixFraction(
        lti.Polynomial([-4.0, 3.6, -0.6, 1.0]),
        (
            (lti.Polynomial([4.4, 1.4, 1.0]), lti.Polynomial([1.0])),
            (lti.Polynomial([7.6, -3.8, 3.0]), lti.Polynomial([-1.0, 1.0, 1.0])),
        ),
    )
    assert mf.shape == (2, 2)
    assert mf.order == 3
    with pytest.raises(ValueError):
        lti.MatrixFraction(
            lti.Polynomial([1.0, 1.0]),
            ((lti.Polynomial([1.0, 2.0]),),),  # entry degree == den degree
        )


def test_state_space_dimension_checks():
    with pytest.raises(ValueError):
        lti.StateSpace(np.zeros((2, 2)), np.zeros((3, 1)), np.zeros((1, 2)), np.zeros((1, 1)))
    ss = lti.StateSpace(np.zeros((0, 0)), np.zeros((0, 1)), np.zeros((1, 0)), np.eye(1))
    assert ss.n_states == 0 and ss.shape == (1, 1)


# ---------------------------------------------------------------- realization


def test_realize_first_order():
    ss = lti.realize(lti.tf([1.0], [-1.0, 1.0]))
    np.testing.assert_allclose(ss.A, [[1.0]])
    np.testing.assert_allclose(ss.C @ ss.B, [[1.0]])
    np.testing.assert_allclose(ss.D, [[0.0]])


@pytest.mark.oracle
def test_realize_biproper_long_division():
    # (3s + 7)/(0.2s - 2) = 15 + 185/(s - 10) after monic normalization.
    ss = lti.realize(lti.tf([7.0, 3.0], [-2.0, 0.2]))
    assert ss.n_states == 1
    np.testing.assert_allclose(ss.D, [[15.0]])
    np.testing.assert_allclose(ss.A, [[10.0]])
    np.testing.assert_allclose((ss.C @ ss.B)[0, 0], 185.0)


@pytest.mark.oracle
def test_realize_matrix_fraction_p4():
    plant = preset_catalog("P4").plant
    ss = lti.realize(plant)
    assert ss.n_states == 6  # 3 states per output row
    got = lti.frequency_response(ss, 1.0)
    want = plant.response(1j)
    np.testing.assert_allclose(got, want, atol=1e-10)


def test_realize_matches_response_on_random_systems():
    rng = np.random.default_rng(7)
    w = np.logspace(-2, 2, 9)
    for k in range(12):
        g = random_tf(rng, order=1 + k % 4, unstable=k % 3 == 0)
        ss = lti.realize(g)
        assert ss.n_states == g.order
        got = lti.frequency_response(ss, w)[:, 0, 0]
        np.testing.assert_allclose(got, g.response(1j * w), rtol=1e-9, atol=1e-12)


# --------------------------------------------------------- frequency response


@pytest.mark.oracle
def test_frequency_response_ct_values():
    g = lti.tf([1.0], [-1.0, 1.0])
    np.testing.assert_allclose(
        lti.frequency_response(g, 1.0)[0, 0], -0.5 - 0.5j, atol=1e-14
    )
    np.testing.assert_allclose(lti.frequency_response(g, 0.0)[0, 0], -1.0, atol=1e-14)


@pytest.mark.oracle
def test_frequency_response_dt_z1():
    dss = lti.DiscreteStateSpace([[0.5]], [[1.0]], [[1.0]], [[0.0]], 1.0)
    np.testing.assert_allclose(lti.frequency_response(dss, 0.0)[0, 0], 2.0, atol=1e-14)


def test_frequency_response_rejects_pole_on_contour():
    with pytest.raises(ValueError):
        lti.frequency_response(lti.tf([1.0], [0.0, 1.0]), 0.0)  # pole at s = 0
    with pytest.raises(ValueError):
        lti.frequency_response(lti.tf([1.0], [1.0, 0.0, 1.0]), 1.0)  # poles +-j


# -------------------------------------------------------------------- c2d ZOH


@pytest.mark.oracle
def test_c2d_scalar_exponential():
    ss = lti.StateSpace([[-1.0]], [[1.0]], [[1.0]], [[0.0]])
    dss = lti.c2d_zoh(ss, 0.1)
    np.testing.assert_allclose(dss.Ad, [[np.exp(-0.1)]], rtol=1e-14)
    np.testing.assert_allclose(dss.Bd, [[1.0 - np.exp(-0.1)]], rtol=1e-14)


def test_c2d_integrator():
    ss = lti.StateSpace([[0.0]], [[1.0]], [[1.0]], [[0.0]])
    dss = lti.c2d_zoh(ss, 0.25)
    np.testing.assert_allclose(dss.Ad, [[1.0]])
    np.testing.assert_allclose(dss.Bd, [[0.25]])


@pytest.mark.oracle
def test_c2d_bd_approaches_hb_quadratically():
    A = np.array([[0.0, 1.0], [-2.0, -3.0]])
    B = np.array([[0.0], [1.0]])
    ss = lti.StateSpace(A, B, np.eye(2), np.zeros((2, 1)))

    def err(h):
        return np.linalg.norm(lti.c2d_zoh(ss, h).Bd - h * B)

    e1, e2 = err(1e-3), err(5e-4)
    assert e1 < 0.6 * np.linalg.norm(A @ B) * 1e-6
    assert 3.5 < e1 / e2 < 4.5  # halving h quarters the defect


def test_c2d_rejects_bad_h():
    ss = lti.StateSpace([[-1.0]], [[1.0]], [[1.0]], [[0.0]])
    with pytest.raises(ValueError):
        lti.c2d_zoh(ss, 0.0)


# ------------------------------------------------------------------- H2 norms


@pytest.mark.oracle
def test_h2_ct_first_order():
    ss = lti.realize(lti.tf([1.0], [1.0, 1.0]))
    np.testing.assert_allclose(lti.h2_norm_ct(ss), 1.0 / np.sqrt(2.0), rtol=1e-12)


@pytest.mark.oracle
def test_h2_ct_matches_impulse_quadrature():
    # Independent time-domain check: integrate the squared impulse response
    # of the band-pass identification filter on a fine grid.
    filt = make_filter("eqF", 2).tf
    ss = lti.realize(filt)
    h, T = 1e-3, 60.0
    Ad = scipy.linalg.expm(ss.A * h)
    x = ss.B.copy()
    g = np.empty(int(T / h) + 1)
    for k in range(len(g)):
        g[k] = (ss.C @ x)[0, 0]
        x = Ad @ x
    quad = np.sqrt(np.trapezoid(g**2, dx=h))
    lyap = lti.h2_norm_ct(ss)
    assert lyap > 0
    np.testing.assert_allclose(lyap, quad, rtol=1e-4)


def test_h2_ct_rejects_unstable_and_feedthrough():
    with pytest.raises(ValueError):
        lti.h2_norm_ct(lti.realize(lti.tf([1.0], [-1.0, 1.0])))
    with pytest.raises(ValueError):
        lti.h2_norm_ct(lti.realize(lti.tf([1.0, 1.0], [2.0, 1.0])))


@pytest.mark.oracle
def test_h2_dt_sampled_first_order():
    # ZOH of 1/(s+1): ||F_h||_2^2 = (1 - e^{-h})^2 / (1 - e^{-2h}); at
    # h = 0.01 this is 0.0050000 to five significant figures.
    ss = lti.realize(lti.tf([1.0], [1.0, 1.0]))
    h = 0.01
    dt_sq = lti.h2_norm_dt(lti.c2d_zoh(ss, h)) ** 2
    want = (1.0 - np.exp(-h)) ** 2 / (1.0 - np.exp(-2.0 * h))
    np.testing.assert_allclose(dt_sq, want, rtol=1e-12)
    assert abs(dt_sq - 5.0000e-3) < 5e-8


def test_h2_dt_geometric_series():
    dss = lti.DiscreteStateSpace([[0.5]], [[1.0]], [[1.0]], [[0.0]], 1.0)
    np.testing.assert_allclose(lti.h2_norm_dt(dss), np.sqrt(4.0 / 3.0), rtol=1e-12)


@pytest.mark.oracle
def test_sampled_norm_ratio_approaches_one():
    # ||F_h||_2^2 / (h ||F||_2^2) -> 1 as h -> 0 for the band-pass filter.
    ss = lti.realize(make_filter("eqF", 2).tf)
    ct_sq = lti.h2_norm_ct(ss) ** 2
    devs = [
        abs(lti.h2_norm_dt(lti.c2d_zoh(ss, h)) ** 2 / (h * ct_sq) - 1.0)
        for h in (1e-1, 1e-2, 1e-3)
    ]
    assert devs[0] > devs[1] > devs[2]
    assert devs[2] < 0.02


# ------------------------------------------------------------------ RHP poles


@pytest.mark.oracle
def test_rhp_pole_counts():
    assert lti.rhp_pole_count(lti.tf([-1.0, 1.0], [-4.0, 0.0, 1.0])) == 1
    assert lti.rhp_pole_count(lti.tf([1.0], [-1.0, 1.0])) == 1
    assert lti.rhp_pole_count(lti.tf([1.0, 1.0], [1.0, 0.5, 1.0])) == 0


def test_rhp_rejects_imaginary_axis_pole():
    with pytest.raises(ValueError):
        lti.rhp_pole_count(lti.tf([1.0], [0.0, 1.0]))
    with pytest.raises(ValueError):
        lti.rhp_pole_count(lti.tf([1.0], [1.0, 0.0, 1.0]))


def test_rhp_discrete_counts_outside_unit_circle():
    dss = lti.DiscreteStateSpace([[1.5]], [[1.0]], [[1.0]], [[0.0]], 0.1)
    assert lti.rhp_pole_count(dss) == 1
    dss = lti.DiscreteStateSpace([[0.5]], [[1.0]], [[1.0]], [[0.0]], 0.1)
    assert lti.rhp_pole_count(dss) == 0


# ---------------------------------------------------------------- closed loop


@pytest.mark.oracle
def test_closed_loop_p1_eigenvalues():
    # Poles of the P1/K1 loop are the roots of 0.2 s^2 + 0.8 s + 9.
    p = preset_catalog("P1")
    loop = lti.closed_loop_assemble(p.plant_ss, p.controller)
    got = np.sort_complex(loop.poles())
    want = np.sort_complex(np.array([-2.0 - 6.40312424j, -2.0 + 6.40312424j]))
    np.testing.assert_allclose(got, want, atol=1e-6)


@pytest.mark.oracle
def test_closed_loop_p3_stable():
    p = preset_catalog("P3")
    loop = lti.closed_loop_assemble(p.plant_ss, p.controller)
    assert np.max(loop.poles().real) < 0


def test_closed_loop_zero_controller_is_open_loop():
    plant = lti.realize(lti.tf([1.0], [1.0, 1.0]))
    K = lti.StateSpace(np.zeros((0, 0)), np.zeros((0, 1)), np.zeros((1, 0)), np.zeros((1, 1)))
    loop = lti.closed_loop_assemble(plant, K)
    np.testing.assert_allclose(np.sort_complex(loop.poles()), plant.poles())
    # With K = 0 the measurement-noise path reaches y straight through D.
    np.testing.assert_allclose(loop.D[1], [0.0, 0.0, 0.0, 1.0])
    assert loop.shape == (2, 4)  # outputs (u, y), inputs (r_u, r_y, w, eta)


def test_closed_loop_rejects_biproper_plant():
    plant = lti.realize(lti.tf([1.0, 1.0], [2.0, 1.0]))
    K = lti.realize(lti.tf([1.0], [1.0, 1.0]))
    with pytest.raises(ValueError):
        lti.closed_loop_assemble(plant, K)


def test_closed_loop_characteristic_polynomial_property():
    # For SISO u = K(r_y - y) + r_u the loop poles are the roots of
    # d_P d_K + n_P n_K.
    rng = np.random.default_rng(21)
    for k in range(10):
        P = random_tf(rng, order=2 + k % 2, unstable=k % 2 == 0)
        K = random_tf(rng, order=1 + k % 2)
        loop = lti.closed_loop_assemble(lti.realize(P), lti.realize(K))
        char = P.den * K.den + P.num * K.num
        got = np.sort_complex(loop.poles())
        want = np.sort_complex(char.roots())
        np.testing.assert_allclose(got, want, rtol=1e-6, atol=1e-6)
