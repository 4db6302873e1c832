import itertools
import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from oracles import piecewise_center, split_operator
from quenchkit.errors import ConvergenceWarning, LeakyTruncation, QuenchError
from quenchkit.protocol import QuenchProtocol, QuenchSegment
from quenchkit.sho import (ShoCoeffState, ShoFrame, ShoKinematics, apply_quench, basis_function,
                           eigenstate, evolve_protocol, gamma_dodonov, gamma_this_paper,
                           ludwig_probability, one_change_coeffs, rebase, sho_expectations,
                           sho_q_closed, sho_q_matrix, sho_q_quadrature,
                           sho_q_quadrature_matrix, sho_q_series, sho_q_series_kin,
                           sho_q_series_shifted, two_change_chain, two_change_energy_scan,
                           wavefunction)
from quenchkit.specfun import ho_eigenfunction

GRID = [-3, -1, 0, 0.5, 2]


def closed_matrix(n, kin):
    return np.array([[sho_q_closed(k, j, kin) for j in range(n)] for k in range(n)])


def quad_integral(k, j, kin):
    # the defining overlap with a1 = (rho - lam)/2, a2 = (rho + lam)/2
    a1, a2 = 0.5 * (kin.rho - kin.lam), 0.5 * (kin.rho + kin.lam)

    def f(u, part):
        v = ho_eigenfunction(k, u + a2) * ho_eigenfunction(j, u + a1) * np.exp(-1j * kin.kappa * u)
        return v.real if part == 0 else v.imag

    re = integrate.quad(f, -30, 30, args=(0,), limit=400, epsabs=1e-14)[0]
    im = integrate.quad(f, -30, 30, args=(1,), limit=400, epsabs=1e-14)[0]
    return complex(re, im)


def test_kinematics():
    kin = ShoKinematics.from_motion(v1=0.5, v2=2.0, a1=1.0, a2=3.0, duration=2.0,
                                    mass=4.0, hbar=1.0, omega=1.0)
    assert kin.kappa == pytest.approx(2 * 1.5) and kin.lam == pytest.approx(2 * 2.0)
    assert kin.rho == pytest.approx(2 * 4.0) and kin.tau == 2.0
    with pytest.raises(ValueError):
        ShoKinematics(math.nan)


def test_closed_examples():
    np.testing.assert_allclose(closed_matrix(8, ShoKinematics()), np.eye(8), atol=1e-15)
    assert sho_q_closed(0, 0, ShoKinematics(math.sqrt(2))) == pytest.approx(math.exp(-0.5), abs=1e-15)
    assert abs(sho_q_closed(0, 1, ShoKinematics(1.0))) ** 2 == pytest.approx(0.5 * math.exp(-0.5))
    with pytest.raises(ValueError):
        sho_q_closed(-1, 0, ShoKinematics())


@pytest.mark.parametrize("k,j,kin", [(0, 0, ShoKinematics(1.1, 0.4, 0.3)),
                                     (3, 5, ShoKinematics(-0.7, 1.2, 2.0)),
                                     (6, 2, ShoKinematics(2.0, -1.0, 0.0))])
def test_closed_against_direct_integral(k, j, kin):
    assert sho_q_closed(k, j, kin) == pytest.approx(quad_integral(k, j, kin), abs=1e-11)


def test_series_examples():
    assert sho_q_series(0, 0, 0.0, 0.0) == pytest.approx(1.0)
    kappa = 1.3
    assert sho_q_series(0, 0, 0.0, -1j * kappa) == pytest.approx(math.exp(-kappa ** 2 / 4))
    val = sho_q_series(2, 1, 0.7, -0.3j)
    ref = quad_integral(2, 1, ShoKinematics(0.3, 0.7, 0.7))  # psi_2(x + 0.7) psi_1(x) e^{-0.3 i x}
    assert val == pytest.approx(ref, abs=1e-11)
    with pytest.raises(ValueError):
        sho_q_series(0, -1, 0.0, 0.0)


def test_series_shifted_wrapper():
    a1, a2, beta = 0.4, -0.9, 0.2 - 0.7j
    direct = sho_q_series_shifted(3, 2, a1, a2, beta)
    assert direct == pytest.approx(np.exp(-beta * a2) * sho_q_series(3, 2, a1 - a2, beta))


def test_quadrature_examples():
    kin = ShoKinematics(2.0, 1.0, 0.5)
    assert sho_q_quadrature(3, 3, kin) == pytest.approx(sho_q_closed(3, 3, kin), abs=1e-10)
    assert sho_q_quadrature(2, 2, ShoKinematics()) == pytest.approx(1.0, abs=1e-13)
    p = abs(sho_q_quadrature(0, 4, ShoKinematics(0.0, 2.0, 0.0))) ** 2
    assert p == pytest.approx(math.exp(-2) * 2 ** 4 / 24, rel=1e-10)


def test_quadrature_convergence_warning():
    with pytest.warns(ConvergenceWarning):
        sho_q_quadrature_matrix(30, ShoKinematics(25.0, 0.0, 0.0), order=40)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        sho_q_quadrature_matrix(30, ShoKinematics(1.0, 1.0, 0.0))


def test_three_paths_agree():
    n = 21
    worst = 0.0
    for kappa, lam, rho in itertools.product(GRID, GRID, [0, 1]):
        kin = ShoKinematics(kappa, lam, rho)
        c = closed_matrix(n, kin)
        s = np.array([[sho_q_series_kin(k, j, kin) for j in range(n)] for k in range(n)])
        q = sho_q_quadrature_matrix(n, kin)
        worst = max(worst, np.abs(c - s).max(), np.abs(c - q).max(),
                    np.abs(c - sho_q_matrix(n, kin)).max())
    assert worst <= 1e-10


@pytest.mark.parametrize("kappa,lam", [(1.0, 0.0), (0.0, 1.0), (4.0, -3.0), (7.5, 2.0)])
def test_matrix_against_closed_large_n(kappa, lam):
    kin = ShoKinematics(kappa, lam, 0.3)
    np.testing.assert_allclose(sho_q_matrix(61, kin), closed_matrix(61, kin), atol=1e-11)


def test_symmetry_without_acceleration_change():
    for kappa, rho in [(1.3, 0.0), (-2.0, 0.7)]:
        c = closed_matrix(15, ShoKinematics(kappa, 0.0, rho))
        np.testing.assert_array_equal(c, c.T)
        s = np.array([[sho_q_series_kin(k, j, ShoKinematics(kappa, 0.0, rho)) for j in range(15)]
                      for k in range(15)])
        np.testing.assert_allclose(s, c.T, atol=1e-12)


def test_transpose_flips_lambda():
    # with lam != 0 the transpose equals the matrix at -lam; moduli are symmetric
    kin = ShoKinematics(0.8, 1.4, 0.6)
    c = closed_matrix(15, kin)
    np.testing.assert_allclose(c.T, closed_matrix(15, ShoKinematics(0.8, -1.4, 0.6)), atol=1e-13)
    np.testing.assert_allclose(np.abs(c), np.abs(c.T), atol=1e-13)


@pytest.mark.xfail(strict=True, reason="Q_kj = Q_jk needs lam = 0; e.g. Q_10 - Q_01 = sqrt2 lam e^(...)")
def test_symmetry_for_all_kinematics():
    c = closed_matrix(6, ShoKinematics(0.8, 1.4, 0.6))
    np.testing.assert_allclose(c, c.T, atol=1e-12)


@given(st.floats(-3, 3), st.floats(-3, 3))
@settings(max_examples=25, deadline=None)
def test_populations_independent_of_rho(kappa, lam):
    ref = np.abs(sho_q_matrix(20, ShoKinematics(kappa, lam, 0.0))) ** 2
    for rho in (0.7, -2.0):
        p = np.abs(sho_q_matrix(20, ShoKinematics(kappa, lam, rho))) ** 2
        np.testing.assert_allclose(p, ref, atol=1e-12)


@given(st.floats(-2, 2), st.floats(-2, 2), st.floats(-2, 2))
@settings(max_examples=25, deadline=None)
def test_truncated_unitarity(kappa, lam, rho):
    q = sho_q_matrix(80, ShoKinematics(kappa, lam, rho))
    np.testing.assert_allclose(np.sum(np.abs(q[:21]) ** 2, axis=1), 1.0, atol=1e-8)


def test_one_change_coeffs_match_matrix_columns():
    for kin in [ShoKinematics(1.3, 0.7, 0.4), ShoKinematics(-2.0, 0.5, 0.5), ShoKinematics(0.0, 1.5)]:
        q = closed_matrix(25, kin)
        for n0 in (0, 1, 2):
            np.testing.assert_allclose(one_change_coeffs(n0, kin, 25), q[:, n0], atol=1e-12)
    np.testing.assert_array_equal(one_change_coeffs(0, ShoKinematics(), 5), np.eye(5)[0])
    with pytest.raises(ValueError):
        one_change_coeffs(3, ShoKinematics())


def test_poisson_law_and_zero():
    kin = ShoKinematics(1.1, -0.6)
    x = 0.5 * kin.eta_sq
    p = np.abs(one_change_coeffs(0, kin, 31)) ** 2
    ref = [math.exp(-x) * x ** l / math.factorial(l) for l in range(31)]
    np.testing.assert_allclose(p, ref, atol=1e-12, rtol=0)
    for l in (1, 3, 6):
        kin = ShoKinematics(math.sqrt(2 * l) * 0.6, math.sqrt(2 * l) * 0.8)
        assert abs(one_change_coeffs(1, kin, 20)[l]) ** 2 <= 1e-12


@pytest.mark.parametrize("l", [1, 2, 4, 9])
def test_poisson_peak_in_eta(l):
    # P_{0->l} as a function of eta peaks at eta^2 = 2 l
    eta = np.linspace(0.01, 8, 8000)
    p = [abs(one_change_coeffs(0, ShoKinematics(e, 0.0), l + 1)[l]) ** 2 for e in eta]
    assert eta[int(np.argmax(p))] ** 2 == pytest.approx(2 * l, abs=5e-3 * l + 5e-3)


def _rand_state(n, seed):
    rng = np.random.default_rng(seed)
    c = np.zeros(n, dtype=complex)
    c[:10] = rng.normal(size=10) + 1j * rng.normal(size=10)
    return c / np.linalg.norm(c)


def test_apply_quench_properties():
    st0 = ShoCoeffState(_rand_state(60, 2), ShoFrame(0.3, 1.0, 0.5, 0.2))
    same = apply_quench(st0, 0.5, 0.2)
    np.testing.assert_array_equal(same.coeffs, st0.coeffs)
    for kappa, lam in [(2, 2), (-2, 1), (0.5, -2)]:
        out = apply_quench(st0, 0.5 + kappa, 0.2 + lam)
        assert np.sum(np.abs(out.coeffs) ** 2) == pytest.approx(1.0, abs=1e-8)
        assert out.frame == ShoFrame(0.3, 1.0, 0.5 + kappa, 0.2 + lam)
    g = apply_quench(eigenstate(0, 40), 1.2, -0.4)
    np.testing.assert_allclose(g.coeffs, one_change_coeffs(0, ShoKinematics(1.2, -0.4, -0.4), 40),
                               atol=1e-13)
    with pytest.raises(ValueError):
        apply_quench(st0, 1.0, 0.0, at_t=0.5)


def test_leaky_truncation():
    with pytest.raises(LeakyTruncation):
        apply_quench(eigenstate(0, 10), 5.0, 0.0)
    out = apply_quench(eigenstate(0, 10), 5.0, 0.0, tail_threshold=None)
    assert out.tail_mass > 0.5


def test_rebase_properties():
    c = _rand_state(60, 4)
    s = ShoCoeffState(c, ShoFrame(0.1, 0.5, 1.3, 0.0))
    assert rebase(s, 0.5) is s
    r = rebase(s, 2.0)
    np.testing.assert_allclose(np.abs(r.coeffs), np.abs(c), atol=1e-15)
    assert r.frame == ShoFrame(0.1 + 1.3 * 1.5, 2.0, 1.3, 0.0) and not r.instantaneous
    acc = ShoCoeffState(c, ShoFrame(0.0, 0.0, 0.2, 0.7))
    r = rebase(acc, 1.1)
    assert np.sum(np.abs(r.coeffs) ** 2) == pytest.approx(1.0, abs=1e-8)
    assert not np.allclose(np.abs(r.coeffs), np.abs(c), atol=1e-3)
    assert r.instantaneous
    with pytest.raises(QuenchError):
        rebase(r, 2.0)
    with pytest.raises(QuenchError):
        sho_expectations(r, 2.0)
    with pytest.raises(ValueError):
        rebase(acc, -1.0)


def test_rebase_uniform_acceleration_law():
    # populations after rebasing an eigenstate follow the closed transition law
    a, dt = 0.8, 1.3
    gamma = gamma_this_paper(a, dt)
    for i in range(3):
        r = rebase(eigenstate(i, 60, ShoFrame(0.0, 0.0, 0.0, a)), dt)
        p = np.abs(r.coeffs) ** 2
        for f in range(8):
            assert p[f] == pytest.approx(ludwig_probability(i, f, gamma), abs=1e-12)


def test_basis_function_initial_shape():
    f = ShoFrame(0.4, 1.0, 0.9, -0.5)
    x = np.linspace(-6, 6, 41)
    got = basis_function(2, x, 1.0, f)
    ref = ho_eigenfunction(2, x - 0.4 - 0.5) * np.exp(0.9j * (x - 0.4))
    np.testing.assert_allclose(got, ref, atol=1e-15)


def test_multi_quench_matches_split_operator():
    x = np.linspace(-40, 40, 4096, endpoint=False)
    times, vs, accs = [0.0, 0.4, 1.9], [0.0, 0.8, -0.3], [0.0, 0.5, -0.2]
    p = QuenchProtocol(tuple(QuenchSegment(*r) for r in zip(times, vs, accs)), x1=0.3)
    st1 = evolve_protocol(p, n0=1, n_states=60)
    psi0 = wavefunction(eigenstate(1, 60, ShoFrame(0.3)), x, 0.0)
    ref = split_operator(psi0, x, piecewise_center(times, vs, accs, 0.3), 3.0, dt=5e-4)
    np.testing.assert_allclose(wavefunction(st1, x, 3.0), ref, atol=5e-7)


def test_two_change_chain_matches_explicit_formula():
    kappa, lam, tau, n = 0.7, 0.9, 1.7, 60
    c = two_change_chain(ShoKinematics(kappa, lam, lam), tau, n)
    q_off = sho_q_matrix(n, ShoKinematics(-kappa, -lam, lam))
    q_mid = sho_q_matrix(n, ShoKinematics(-lam * tau))
    q_on = sho_q_matrix(n, ShoKinematics(kappa, lam, lam))
    l = np.arange(n)
    phase = np.exp(1j * (lam ** 2 * tau ** 3 / 6 - lam ** 2 * tau / 2 + lam * tau ** 2 * kappa / 2
                         - (l + 0.5) * tau + tau * kappa ** 2 / 2))
    ref = q_off @ (q_mid @ (phase * q_on[:, 0]))
    np.testing.assert_allclose(c, ref, atol=1e-13)


def test_two_change_chain_trivial_and_norm():
    np.testing.assert_allclose(np.abs(two_change_chain(ShoKinematics(), 2.0)), np.eye(60)[0],
                               atol=1e-15)
    c = two_change_chain(ShoKinematics(0.0, 1.0, 1.0), 3.0)
    assert np.sum(np.abs(c[:40]) ** 2) == pytest.approx(1.0, abs=1e-6)
    with pytest.raises(ValueError):
        two_change_chain(ShoKinematics(1.0), -1.0)


def test_energy_scan_matches_chain():
    taus = np.linspace(0, 5, 7)
    pops, energies, tails = two_change_energy_scan(0.6, 0.4, taus, 60)
    for i, tau in enumerate(taus):
        c = two_change_chain(ShoKinematics(0.6, 0.4, 0.4), tau, 60)
        np.testing.assert_allclose(pops[i], np.abs(c) ** 2, atol=1e-13)
    assert np.all(np.abs(tails) < 1e-10)
    assert energies[0] == pytest.approx(1.0)


def test_expectations_ground_state():
    x_mean, x_var, energy = sho_expectations(eigenstate(0, 30), 0.7)
    assert (x_mean, x_var, energy) == pytest.approx((0.0, 0.5, 1.0), abs=1e-15)


@pytest.mark.parametrize("n0", [0, 1, 2])
def test_coherent_width(n0):
    kin = ShoKinematics(1.1, 0.6, 0.6)
    state = ShoCoeffState(one_change_coeffs(n0, kin, 60), ShoFrame(0.0, 0.0, 1.1, 0.6))
    t = np.linspace(0, 4 * math.pi, 101)
    _, x_var, _ = sho_expectations(state, t)
    assert np.ptp(x_var) <= 1e-10
    np.testing.assert_allclose(np.sqrt(x_var), math.sqrt((2 * n0 + 1) / 2), atol=1e-10)


def test_mean_position_formula():
    # corrected: centre - a2 + lam cos s - kappa sin s with s = t - t1
    x1, t1, kappa, lam = 0.2, 0.5, 0.7, 0.9
    st1 = apply_quench(eigenstate(0, 60, ShoFrame(x1, t1)), kappa, lam)
    t = np.linspace(t1, t1 + 2 * math.pi, 60)
    s = t - t1
    x_mean, _, _ = sho_expectations(st1, t)
    centre = x1 + kappa * s + 0.5 * lam * s ** 2
    np.testing.assert_allclose(x_mean, centre - lam + lam * np.cos(s) - kappa * np.sin(s), atol=1e-10)
    # the printed form without the -a2 offset is off by exactly a2
    printed = centre + lam * np.cos(s) - kappa * np.sin(s)
    np.testing.assert_allclose(printed - x_mean, lam, atol=1e-10)
    # independent check on a grid
    x = np.linspace(-40, 40, 4096, endpoint=False)
    psi = split_operator(ho_eigenfunction(0, x - x1) * np.exp(-0.5j * t1), x,
                         piecewise_center([t1, t1 + 1e-12], [0, kappa], [0, lam], x1),
                         t1 + 3.0, dt=5e-4, t0=t1)
    dx = x[1] - x[0]
    x_grid = np.sum(x * np.abs(psi) ** 2) * dx
    assert x_grid == pytest.approx(sho_expectations(st1, t1 + 3.0)[0], abs=1e-6)


def test_ludwig_examples():
    for g in (0.0, 0.3, 2.5):
        assert ludwig_probability(0, 0, g) == pytest.approx(math.exp(-g))
        for f in range(6):
            assert ludwig_probability(0, f, g) == pytest.approx(g ** f * math.exp(-g) / math.factorial(f))
    gamma = 0.7
    kappa = math.sqrt(2 * gamma)
    assert ludwig_probability(2, 1, gamma) == pytest.approx(
        abs(sho_q_quadrature(1, 2, ShoKinematics(kappa))) ** 2, abs=1e-12)
    assert ludwig_probability(1, 2, gamma) == ludwig_probability(2, 1, gamma)
    with pytest.raises(ValueError):
        ludwig_probability(0, 0, -1.0)


@given(st.integers(0, 15), st.floats(0, 10))
@settings(max_examples=60, deadline=None)
def test_ludwig_normalised(i, gamma):
    total = sum(ludwig_probability(i, f, gamma) for f in range(int(i + 12 * gamma + 40) + 1))
    assert total == pytest.approx(1.0, abs=1e-10)
    assert all(0 <= ludwig_probability(i, f, gamma) <= 1 for f in range(i + 5))


def test_gamma_conventions():
    assert gamma_this_paper(1.0, 0.0) == 0.0 and gamma_dodonov(1.0, 0.0) == 0.0
    g1, g2 = gamma_this_paper(1.0, 1e-3), gamma_dodonov(1.0, 1e-3)
    assert abs(g1 - g2) / g1 <= 1e-6
    assert gamma_this_paper(1.0, 2 * math.pi) == pytest.approx(2 * math.pi ** 2)
    assert gamma_dodonov(1.0, 2 * math.pi) == pytest.approx(0.0, abs=1e-15)
    t = np.linspace(0, 1, 5)
    assert gamma_this_paper(2.0, t).shape == (5,)
