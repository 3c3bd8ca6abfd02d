"""Shared runs for the test suite.

Expensive trajectories are session scoped so unit tests and acceptance
checks reuse the same evolution.
"""
import numpy as np
import pytest

from shockform.eikonal import SolverConfig, default_perturbation, evolve_to_stop, initialize
from shockform.mghd import CausalConfig, speed_spread
from shockform.simplewave import bump_profile, build_simple_wave, integrate_state_curve
from shockform.systems import builtin_system

ACCEPTANCE = {}


def record(criterion, ok, detail=""):
    """Store a PASS/FAIL line for the acceptance summary and print it."""
    line = f"CRITERION {criterion:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE[criterion] = line
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[k])


@pytest.fixture(scope="session")
def burgers():
    return builtin_system("burgers_transport")


@pytest.fixture(scope="session")
def burgers_curve(burgers):
    return integrate_state_curve(burgers, [1.2, 0.0], 1.1)


@pytest.fixture(scope="session")
def burgers_wave(burgers, burgers_curve):
    """Normalized wave with slope ``-1 + u^2/2`` near the minimum."""
    return build_simple_wave(burgers, burgers_curve, bump_profile(2.0))


@pytest.fixture(scope="session")
def synthetic3():
    return builtin_system("synthetic3_intermediate")


@pytest.fixture(scope="session")
def synthetic3_wave(synthetic3):
    curve = integrate_state_curve(synthetic3, [0.0, 0.0, 0.0], 0.5)
    return build_simple_wave(synthetic3, curve, bump_profile(2.0, amplitude=0.4))


def _continued(system, wave, n_pert):
    cfg = SolverConfig(n_u=512, dtau=2e-3, tau_max=1.1, mu_stop=1e-3, margin=1.5)
    state = initialize(system, wave, default_perturbation(n_pert), 1e-3, cfg)
    return evolve_to_stop(state, cfg, continuation=True, tau_end=1.1)


@pytest.fixture(scope="session")
def burgers_continued(burgers, burgers_wave):
    """Perturbed Burgers-field run continued past the first shock."""
    return _continued(burgers, burgers_wave, 2)


@pytest.fixture(scope="session")
def synthetic3_continued(synthetic3, synthetic3_wave):
    return _continued(synthetic3, synthetic3_wave, 3)


@pytest.fixture(scope="session")
def burgers_causal(burgers_continued):
    return CausalConfig(base=0.85, lam_star=speed_spread(burgers_continued), t_box=1.1,
                        n_columns=121, n_levels=201, mu_zero_factor=0.1)


@pytest.fixture(scope="session")
def burgers_boundary(burgers_continued, burgers_causal):
    from shockform.mghd import classify_boundary, extract_boundary

    poly = extract_boundary(burgers_continued, burgers_causal)
    return classify_boundary(poly, burgers_continued, burgers_causal)


@pytest.fixture(scope="session")
def synthetic3_boundary(synthetic3_continued):
    from shockform.mghd import classify_boundary, extract_boundary

    cfg = CausalConfig(base=0.85, lam_star=speed_spread(synthetic3_continued), t_box=1.1,
                       n_columns=121, n_levels=201, mu_zero_factor=0.1, band=(-0.3, 0.3))
    poly = extract_boundary(synthetic3_continued, cfg)
    return classify_boundary(poly, synthetic3_continued, cfg)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
