import dataclasses

import numpy as np
import pytest

from shockform.eikonal import SolverConfig, default_perturbation, evolve_to_stop, initialize
from shockform.errors import AmbiguousClass, CertificateFailure
from shockform.mghd import (CausalConfig, BoundaryPolyline, chord_lipschitz, classify_boundary,
                            corner_angle, extract_boundary, ladder_levels, lipschitz_ok,
                            mu_star, mu_star_bruteforce, perverse_profile, require_certificate,
                            speed_spread, trace_characteristic)
from shockform.simplewave import bump_profile, build_simple_wave, integrate_state_curve
from shockform.systems import builtin_system


@pytest.fixture(scope="module")
def coarse(burgers, burgers_wave):
    """Cheap perturbed run continued past the shock."""
    cfg = SolverConfig(n_u=256, dtau=4e-3, tau_max=1.1, mu_stop=1e-3, margin=1.5)
    st = initialize(burgers, burgers_wave, default_perturbation(2), 1e-3, cfg)
    return evolve_to_stop(st, cfg, continuation=True, tau_end=1.1)


@pytest.fixture(scope="module")
def coarse_cfg(coarse):
    return CausalConfig(base=0.8, lam_star=speed_spread(coarse))


def test_shocking_characteristics_are_vertical(coarse):
    r = trace_characteristic(coarse, 1, (0.9, 0.1))
    assert np.all(r["u"] == 0.1)
    assert r["tau"][0] == 0.9 and r["tau"][-1] == coarse.tau[0]


def test_transport_characteristic_speed(coarse):
    r = trace_characteristic(coarse, 0, (0.9, 0.1))
    slope = np.polyfit(r["tau"], r["x"], 1)[0]
    assert abs(slope + 1.0) <= 1e-6


def test_extremal_past_curves_mirror_each_other():
    s = builtin_system("synthetic3_intermediate", {"coupling": 0.0})
    curve = integrate_state_curve(s, [0.0, 0.0, 0.0], 0.5)
    wave = build_simple_wave(s, curve, bump_profile(2.0, amplitude=0.4))
    cfg = SolverConfig(n_u=256, dtau=4e-3, tau_max=0.9, margin=1.5)
    tr = evolve_to_stop(initialize(s, wave, None, 0.0, cfg), cfg)
    left = trace_characteristic(tr, 0, (0.85, 0.0))
    right = trace_characteristic(tr, 2, (0.85, 0.0))
    assert left["u"].size == right["u"].size
    np.testing.assert_allclose(left["u"], -right["u"], atol=1e-8)
    np.testing.assert_allclose(left["tau"], right["tau"], atol=1e-8)
    np.testing.assert_allclose(left["x"], -right["x"], atol=1e-8)


def test_spatially_constant_mu_is_its_own_past_minimum(coarse, coarse_cfg):
    mu = np.broadcast_to(1.0 - coarse.tau[:, None], coarse.mu.shape).copy()
    flat = dataclasses.replace(coarse, mu=mu, alive=np.ones_like(coarse.alive))
    tq = np.array([0.85, 0.9, 0.95])
    uq = np.array([-0.2, 0.0, 0.3])
    ms = mu_star(flat, coarse_cfg, tq, uq)
    np.testing.assert_allclose(ms.mu_star, 1.0 - tq, atol=1e-14)


def test_mu_star_decreases_along_future_characteristics(coarse, coarse_cfg):
    for I, start in ((0, (0.82, 0.3)), (1, (0.82, 0.05))):
        f = trace_characteristic(coarse, I, start, direction="future")
        keep = np.nonzero(f["tau"] < 1.05)[0]
        keep = keep[:: max(1, keep.size // 25)]
        m = mu_star(coarse, coarse_cfg, f["tau"][keep], f["u"][keep]).mu_star
        assert keep.size >= 10
        assert np.diff(m).max() <= 1e-12


def test_two_curve_reduction_matches_cone_search(coarse, coarse_cfg):
    rng = np.random.default_rng(3)
    tq = rng.uniform(0.85, 0.97, 12)
    uq = rng.uniform(-0.15, 0.1, 12)
    ms = mu_star(coarse, coarse_cfg, tq, uq)
    local, glob = mu_star_bruteforce(coarse, coarse_cfg, tq, uq, refine=4)
    assert np.abs(local - ms.mu_star).max() <= 1e-6
    assert np.all(glob <= ms.mu_star + 1e-6)


def test_certificate_failure_is_reported(coarse, coarse_cfg):
    ms = mu_star(coarse, coarse_cfg, np.array([0.9]), np.array([0.0]))
    require_certificate(ms, coarse_cfg)
    strict = dataclasses.replace(coarse_cfg, cert_bound=-10.0)
    with pytest.raises(CertificateFailure):
        require_certificate(mu_star(coarse, strict, np.array([0.9]), np.array([0.0])), strict)


def test_box_below_the_shock_is_extensible(coarse):
    cfg = CausalConfig(base=0.8, lam_star=speed_spread(coarse), t_box=0.95, n_columns=41,
                       n_levels=61)
    poly = classify_boundary(extract_boundary(coarse, cfg), coarse, cfg)
    assert poly.counts() == {"preshock": 0, "singular": 0, "cauchy": 0, "extensible": 41}
    np.testing.assert_allclose(poly.tau, 0.95)


def test_ladder_levels():
    cfg = CausalConfig(ladder_top=0.05, ladder_rungs=6)
    np.testing.assert_allclose(ladder_levels(cfg, 1e-3), [0.05, 0.025, 0.0125, 0.00625, 0.003125])
    with pytest.raises(ValueError):
        ladder_levels(cfg, 0.01)


def test_ladder_graphs_halve(burgers_boundary):
    live = burgers_boundary.classes != "extensible"
    steps = np.abs(np.diff(burgers_boundary.graphs[:, live], axis=0)).max(axis=1)
    ratios = steps[:-1] / steps[1:]
    assert np.all((ratios > 1.7) & (ratios < 2.3))


def test_extremal_boundary_structure(burgers_boundary):
    poly = burgers_boundary
    c = poly.counts()
    assert c["preshock"] == 1 and c["singular"] > 0 and c["cauchy"] > 0
    k = int(np.nonzero(poly.classes == "preshock")[0][0])
    # the preshock is the lowest point, with singular and Cauchy points on opposite sides
    assert poly.tau[k] == pytest.approx(poly.tau.min())
    left = set(poly.classes[:k][~poly.ambiguous[:k]]) - {"extensible"}
    right = set(poly.classes[k + 1:][~poly.ambiguous[k + 1:]]) - {"extensible"}
    assert len(left) == 1 and len(right) == 1 and left != right
    assert lipschitz_ok(poly)


def test_intermediate_boundary_has_no_singular_part(synthetic3_boundary):
    poly = synthetic3_boundary
    firm = ~poly.ambiguous
    assert poly.counts()["preshock"] == 1
    assert not np.any(poly.classes[firm] == "singular")


def test_strict_classification_raises_on_ambiguity(synthetic3_continued, synthetic3_boundary):
    if not synthetic3_boundary.ambiguous.any():
        pytest.skip("no ambiguous points in this run")
    cfg = CausalConfig(base=0.85, lam_star=speed_spread(synthetic3_continued), t_box=1.1,
                       n_columns=121, n_levels=201, mu_zero_factor=0.1, band=(-0.3, 0.3))
    with pytest.raises(AmbiguousClass):
        classify_boundary(dataclasses.replace(synthetic3_boundary), synthetic3_continued, cfg,
                          strict=True)


def test_boundary_csv(tmp_path, burgers_boundary):
    path = tmp_path / "b.csv"
    burgers_boundary.to_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "t,x,tau,u,class,slope"
    assert len(lines) == burgers_boundary.t.size + 1


def test_chord_lipschitz_ignores_short_chords():
    x = np.linspace(0.0, 1.0, 201)
    t = 0.5 * x + 2e-3 * (-1.0) ** np.arange(x.size)
    assert chord_lipschitz(t, x, 0.2) == pytest.approx(0.5, abs=0.03)
    assert chord_lipschitz(t, x, 0.0) > 1.0


def test_corner_angle_of_a_right_corner():
    t = np.concatenate([np.linspace(-0.1, 0.0, 51), np.linspace(0.0, 0.1, 51)[1:]])
    x = np.abs(t)
    # branches x = -t and x = t meet at a right angle
    angle, slopes = corner_angle(t, x, 50, 0.0, 0.05)
    assert angle == pytest.approx(np.pi / 2, abs=1e-12)
    np.testing.assert_allclose(slopes, (-1.0, 1.0))


def test_perverse_profile_dips():
    prof, centers, w = perverse_profile(3)
    np.testing.assert_allclose(centers, [1.0, 0.5, 1 / 3])
    assert w > 0
    for c in centers:
        assert prof.theta(np.array([c]))[0] == pytest.approx(0.0, abs=1e-12)
        assert prof.dtheta(np.array([c]))[0] == pytest.approx(-1.0, abs=1e-12)
