import numpy as np
import pytest

from shockform.cusp import (CuspModel, cubic_root, cusp_eval, dyadic_shells,
                            fit_corrector_samples)
from shockform.errors import DomainError, IllConditionedFit
from shockform.simplewave import bump_profile, build_simple_wave


def test_cusp_at_the_axis():
    assert cusp_eval(CuspModel(1.0, 1.0), -1.0, 0.0) == (0.0, 1.0, 1.0)


def test_cusp_at_a_root_by_substitution():
    U, M, D = cusp_eval(CuspModel(1.0, 1.0), -1.0, 2.0)
    assert U == pytest.approx(1.0, abs=1e-15)
    assert M == pytest.approx(0.25, abs=1e-15)
    assert D == pytest.approx(2.0, abs=1e-15)


def test_cusp_is_odd_in_x():
    m = CuspModel(0.7, 0.3)
    x = np.linspace(-1, 1, 21)
    np.testing.assert_allclose(cusp_eval(m, -0.4, -x)[0], -cusp_eval(m, -0.4, x)[0], atol=0)


def test_cusp_rejects_future_times():
    with pytest.raises(DomainError):
        cusp_eval(CuspModel(1.0, 1.0), 0.1, 0.0)
    with pytest.raises(ValueError):
        CuspModel(-1.0, 1.0)


def test_cubic_root_at_the_preshock_time():
    np.testing.assert_allclose(cubic_root(1.0, 2.0, 0.0, np.array([16.0, -2.0, 0.0])),
                               [2.0, -1.0, 0.0], atol=1e-15)


def test_dyadic_shells():
    shells = dyadic_shells(1e-3, 1e-1)
    assert shells[0] == (0.05, 0.1)
    assert len(shells) == 6
    for (lo, hi), (lo2, hi2) in zip(shells, shells[1:]):
        assert hi2 == lo and lo2 == pytest.approx(lo / 2)


def cusp_samples(model, n=60):
    t = -np.geomspace(1e-4, 0.05, n)
    U = np.linspace(-0.4, 0.4, n)
    T, UU = np.meshgrid(t, U, indexing="ij")
    X = model.b0 * UU ** 3 + model.a0 * np.abs(T) * UU
    return T.ravel(), UU.ravel(), X.ravel()


def test_exact_cusp_data_has_no_corrector():
    model = CuspModel(1.0, 1 / 6)
    t, u, x = cusp_samples(model)
    cs = fit_corrector_samples(t, u, x, model, (0.05, 0.1))
    assert max(abs(cs.c20), abs(cs.c12), abs(cs.c04)) <= 1e-6


def test_degenerate_annulus():
    model = CuspModel(1.0, 1 / 6)
    t, u, x = cusp_samples(model)
    with pytest.raises(IllConditionedFit):
        fit_corrector_samples(t, u, x, model, (5.0, 6.0))


def hodograph_samples(wave, n_d=40, n_angle=81):
    """Normalized ``(t, u, x)`` from the closed-form characteristics of a
    Burgers-field wave, independent of the eikonal solver.

    Points sit on homogeneous shells ``|t| + u^2/2 = d^2``.
    """
    u0 = wave.argmin
    d = np.geomspace(3e-3, 0.1, n_d)
    ang = np.linspace(-0.49 * np.pi, 0.49 * np.pi, n_angle)
    D, A = np.meshgrid(d, ang, indexing="ij")
    t = -(D * np.cos(A)) ** 2
    u = np.sqrt(2.0) * D * np.sin(A)
    v = float(wave.speed0(np.array([u0]))[0])
    x_star = float(wave.x(wave.t_star, np.array([u0]))[0])
    tau = wave.t_star + t.ravel()
    x = wave.x(tau, u0 + u.ravel()) - x_star - v * t.ravel()
    return t.ravel(), u.ravel(), x


@pytest.mark.parametrize("q", [0.1, -0.2])
def test_quartic_corrector_from_skewed_data(burgers, burgers_curve, q):
    wave = build_simple_wave(burgers, burgers_curve, bump_profile(2.0, skew=q))
    t, u, x = hodograph_samples(wave, n_d=60)
    model = CuspModel(1.0, 1 / 6)
    shells = dyadic_shells(6.25e-3, 1e-1)
    cs = fit_corrector_samples(t, u, x, model, (0.0125, 0.025), shells)
    assert cs.c04 == pytest.approx(-q / 4, rel=1e-3)
    assert abs(cs.c20) <= 1e-5 and abs(cs.c12) <= 1e-3
    # pre-fit residual / d^3 grows like 1/d; post-fit stays flat
    pre = [r["pre"] for r in cs.residuals]
    post = [r["post"] for r in cs.residuals]
    assert len(pre) == 4
    assert pre[-1] >= 6 * pre[0]
    assert max(post) <= 1.5 * min(post)
