import numpy as np
import pytest

from shockform.errors import UnknownSystem
from shockform.spectral import eigendecompose
from shockform.simplewave import bump_profile, build_simple_wave, integrate_state_curve
from shockform.systems import (BUILTIN_NAMES, GaugeParams, SystemDefinition, augment_scalar,
                               builtin_system, galilean_transform, graphical_condition_check,
                               graphical_margin, shift_state)


def test_builtin_names():
    assert set(BUILTIN_NAMES) == {"burgers_transport", "p_system", "synthetic3_intermediate"}
    with pytest.raises(UnknownSystem):
        builtin_system("euler")


def test_builtin_eigenvalues():
    np.testing.assert_allclose(
        eigendecompose(builtin_system("burgers_transport"), [0.5, 0.0]).lam, [-1.0, 0.5])
    s3 = builtin_system("synthetic3_intermediate", {"coupling": 0.0})
    np.testing.assert_allclose(eigendecompose(s3, np.zeros(3)).lam, [-2.0, 0.0, 2.0], atol=1e-14)
    np.testing.assert_allclose(eigendecompose(builtin_system("p_system"), [2.0, 0.0]).lam,
                               [-0.5, 0.5])


def test_builtins_are_strictly_hyperbolic_on_their_boxes():
    for name in BUILTIN_NAMES:
        s = builtin_system(name)
        sd = eigendecompose(s, s.sample_box(100, rng=0))
        assert np.min(np.diff(sd.lam, axis=-1)) > 0


def test_identity_gauge_changes_nothing():
    s = builtin_system("p_system")
    g = galilean_transform(s, GaugeParams())
    psi = s.sample_box(10, rng=2)
    np.testing.assert_array_equal(eigendecompose(s, psi).lam, eigendecompose(g, psi).lam)


def test_gauge_shifts_speeds_and_keeps_eigenvectors():
    s = builtin_system("burgers_transport")
    g = galilean_transform(s, GaugeParams(v=3.0))
    np.testing.assert_allclose(eigendecompose(g, [0.5, 0.0]).lam, [-4.0, -2.5])
    s3 = builtin_system("synthetic3_intermediate")
    g3 = galilean_transform(s3, GaugeParams(v=-1.5))
    psi = s3.sample_box(20, rng=4)
    a, b = eigendecompose(s3, psi), eigendecompose(g3, psi)
    np.testing.assert_allclose(b.lam, a.lam + 1.5, atol=1e-12)
    np.testing.assert_allclose(b.R, a.R, atol=1e-10)


def test_gauge_roundtrip_and_composition():
    g1, g2 = GaugeParams(0.3, -0.2, 1.5), GaugeParams(-1.0, 0.7, -0.4)
    t, x = 0.8, -1.3
    back = g1.inverse(*g1.forward(t, x))
    np.testing.assert_allclose(back, (t, x), atol=1e-15)
    np.testing.assert_allclose(g1.then(g2).forward(t, x), g2.forward(*g1.forward(t, x)),
                               atol=1e-15)
    s = galilean_transform(galilean_transform(builtin_system("burgers_transport"), g1), g2)
    assert s.gauge == g1.then(g2)


def test_shift_state_moves_the_box():
    s = builtin_system("burgers_transport")
    psi0 = np.array([1.0, 0.25])
    t = shift_state(s, psi0)
    np.testing.assert_allclose(eigendecompose(t, [0.0, 0.0]).lam,
                               eigendecompose(s, psi0).lam)
    np.testing.assert_allclose(t.box, s.box - psi0[:, None])


def scalar_burgers():
    def adv(psi):
        psi = np.asarray(psi, dtype=float)
        return psi[..., None]

    def dadv(psi):
        psi = np.asarray(psi, dtype=float)
        return np.ones(psi.shape[:-1] + (1, 1, 1))

    return SystemDefinition("scalar", 1, adv, 0, [[0.0, 2.0]], dadv)


def test_scalar_law_gains_a_slow_transport_field():
    aug = augment_scalar(scalar_burgers(), speed_margin=1.0)
    assert aug.n == 2 and aug.shock_index == 1 and aug.is_extremal
    lam = eigendecompose(aug, [[0.5, 0.0], [1.5, 0.3]]).lam
    np.testing.assert_allclose(lam, [[-1.0, 0.5], [-1.0, 1.5]])
    lo, hi = graphical_margin(aug, aug.sample_box(50, rng=1))
    assert lo < hi


def test_graphical_check_on_burgers_wave(burgers_wave):
    # slow speed is -1, fast speeds lie in [0, 2]
    assert graphical_condition_check(burgers_wave)
    lo, hi = graphical_margin(burgers_wave.system, burgers_wave.realized_states())
    assert lo == pytest.approx(-1.0) and hi >= 0.0


def test_graphical_check_holds_for_small_waves():
    s3 = builtin_system("synthetic3_intermediate")
    curve = integrate_state_curve(s3, [0.0, 0.0, 0.0], 0.2)
    wave = build_simple_wave(s3, curve, bump_profile(2.0, amplitude=0.05))
    assert graphical_condition_check(wave)
