import numpy as np
import pytest

from shockform.eikonal import SolverConfig, evolve_to_stop, initialize
from shockform.errors import BoxExit, CertificateFailure, NoShock
from shockform.simplewave import (BumpComponent, SlopeProfile, bump_profile, build_simple_wave,
                                  check_nondegeneracy, integrate_state_curve, shock_time)
from shockform.systems import builtin_system


def test_constant_field_curve_is_a_line(burgers):
    curve = integrate_state_curve(burgers, [1.2, 0.0], 1.1)
    expected = np.array([1.2, 0.0]) + curve.s[:, None] * np.array([1.0, 0.0])
    np.testing.assert_allclose(curve.states, expected, atol=1e-13)
    assert curve.residual() <= 1e-10


def test_intermediate_curve_is_accurate_and_small(synthetic3):
    curve = integrate_state_curve(synthetic3, [0.0, 0.0, 0.0], 0.2)
    assert curve.residual() <= 1e-8
    assert np.abs(curve.states).max() <= 0.3
    # half-step rerun agrees (fourth-order integrator)
    fine = integrate_state_curve(synthetic3, [0.0, 0.0, 0.0], 0.2, h_ode=5e-4)
    np.testing.assert_allclose(fine(curve.s[::10]), curve(curve.s[::10]), atol=1e-10)


def test_curve_leaving_the_box():
    p = builtin_system("p_system")
    with pytest.raises(BoxExit):
        integrate_state_curve(p, p.box.mean(axis=1), 50.0)


def test_normalized_wave_has_unit_shock_time(burgers_wave):
    assert burgers_wave.t_star == pytest.approx(1.0, abs=1e-12)
    assert shock_time(burgers_wave) == pytest.approx(1.0, abs=1e-12)
    assert abs(burgers_wave.argmin) < 1e-6


def test_rate_is_quadratic_near_its_minimum(burgers_wave):
    u = np.array([0.0, 0.01, 0.02, 0.05])
    dev = burgers_wave.rate0(u) - (-1.0 + u ** 2 / 2)
    # no cubic term: the deviation is fourth order
    assert np.all(np.abs(dev) <= 0.05 * u ** 4 + 1e-15)


def test_mu_is_linear_in_tau(burgers_wave):
    u = np.linspace(-1.5, 1.5, 31)
    for tau in (0.0, 0.3, 0.9):
        np.testing.assert_allclose(burgers_wave.mu(tau, u), 1.0 + tau * burgers_wave.rate0(u),
                                   atol=1e-14)


def test_shock_time_scaling(burgers):
    curve = integrate_state_curve(burgers, [1.5, 0.0], 1.4)
    half = build_simple_wave(burgers, curve, bump_profile(2.0, amplitude=0.5), normalize=False)
    assert shock_time(half) == pytest.approx(2.0, rel=1e-8)
    steep = build_simple_wave(burgers, curve, bump_profile(0.5, amplitude=4.0), normalize=False)
    assert shock_time(steep) == pytest.approx(0.25, rel=1e-8)


def test_expansive_data_never_shocks(burgers, burgers_curve):
    with pytest.raises(NoShock):
        build_simple_wave(burgers, burgers_curve, bump_profile(2.0, amplitude=-1.0))


def test_label_inversion(burgers_wave):
    t, x = 0.7, np.linspace(-2.0, 3.0, 11)
    np.testing.assert_allclose(burgers_wave.x(t, burgers_wave.label(t, x)), x, atol=1e-11)


def test_evaluator_matches_evolution(burgers, burgers_wave):
    cfg = SolverConfig(n_u=256, dtau=2e-3, tau_max=0.5)
    tr = evolve_to_stop(initialize(burgers, burgers_wave, None, 0.0, cfg), cfg)
    assert tr.tau[-1] == pytest.approx(0.5)
    exact = burgers_wave.evaluate(0.5, tr.x[-1])
    assert np.abs(tr.psi[-1] - exact).max() <= 1e-6


def test_mild_certificate_extremal(burgers_wave):
    cert = check_nondegeneracy(burgers_wave, "mild")
    assert cert.passed and cert.clause == "extremal"


def test_mild_certificate_intermediate_window(synthetic3_wave):
    eta = 0.5
    cert = check_nondegeneracy(synthetic3_wave, "mild", eta=eta, delta1=0.05, delta2=0.1)
    assert cert.passed and cert.clause == "window"
    assert -eta / 2 <= cert.u1 < cert.u2 <= eta / 2
    # the window is where mu dips below delta2 before t* + delta1
    u = np.linspace(-0.8, 0.8, 3201)
    outside = (u < cert.u1) | (u > cert.u2)
    taus = np.linspace(0.0, synthetic3_wave.t_star + 0.05, 101)
    mu = 1.0 + taus[:, None] * synthetic3_wave.rate0(u)[None]
    assert mu[:, outside].min() >= 0.1 - 1e-9


def test_mild_certificate_rejects_wide_windows(synthetic3_wave):
    with pytest.raises(CertificateFailure) as err:
        check_nondegeneracy(synthetic3_wave, "mild", eta=0.05, delta1=0.05)
    assert err.value.clause == "width"


def test_strong_certificate(burgers_wave):
    cert = check_nondegeneracy(burgers_wave, "strong")
    assert cert.passed
    assert cert.third_derivative == pytest.approx(1.0, rel=1e-4)


def test_strong_certificate_fails_on_a_tie(burgers, burgers_curve):
    tie = SlopeProfile([BumpComponent(-1.0, 0.6), BumpComponent(1.0, 0.6)])
    wave = build_simple_wave(burgers, burgers_curve, tie)
    with pytest.raises(CertificateFailure) as err:
        check_nondegeneracy(wave, "strong")
    assert err.value.clause == "unique-minimum"
