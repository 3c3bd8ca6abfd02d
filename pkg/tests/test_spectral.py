import numpy as np
import pytest

from shockform.errors import GenuineNonlinearityFailure, HyperbolicityLoss
from shockform.spectral import (anchor_signs, check_genuine_nonlinearity, compute_xi,
                                eigen_derivatives, eigendecompose)
from shockform.systems import SystemDefinition, builtin_system


def constant_system(A, box=None):
    A = np.asarray(A, dtype=float)
    n = A.shape[0]

    def adv(psi):
        psi = np.asarray(psi, dtype=float)
        return np.broadcast_to(A, psi.shape[:-1] + (n, n)).copy()

    def dadv(psi):
        psi = np.asarray(psi, dtype=float)
        return np.zeros(psi.shape[:-1] + (n, n, n))

    box = [[-1.0, 1.0]] * n if box is None else box
    return SystemDefinition("constant", n, adv, n - 1, box, dadv)


def test_two_by_two_hand_eigensolve():
    sd = eigendecompose(constant_system([[0.0, 1.0], [4.0, 0.0]]), np.zeros(2))
    np.testing.assert_allclose(sd.lam, [-2.0, 2.0], atol=1e-14)
    r1 = np.array([1.0, -2.0]) / np.sqrt(5)
    r2 = np.array([1.0, 2.0]) / np.sqrt(5)
    # columns are unit vectors; only the sign is a convention
    assert min(np.abs(sd.R[:, 0] - r1).max(), np.abs(sd.R[:, 0] + r1).max()) < 1e-12
    assert min(np.abs(sd.R[:, 1] - r2).max(), np.abs(sd.R[:, 1] + r2).max()) < 1e-12
    np.testing.assert_allclose(sd.L @ sd.R, np.eye(2), atol=1e-14)


@pytest.mark.parametrize("diag", [[-1.0, 0.5], [-3.0, 0.25, 7.0]])
def test_diagonal_matrix_is_its_own_eigensystem(diag):
    sd = eigendecompose(constant_system(np.diag(diag)), np.zeros(len(diag)))
    np.testing.assert_allclose(sd.lam, diag)
    np.testing.assert_allclose(sd.R, np.eye(len(diag)), atol=1e-15)
    np.testing.assert_allclose(sd.L, np.eye(len(diag)), atol=1e-15)


def test_burgers_transport_at_half():
    sd = eigendecompose(builtin_system("burgers_transport"), np.array([0.5, 0.0]))
    np.testing.assert_allclose(sd.lam, [-1.0, 0.5])
    # slow field is the transport component e2, fast field the Burgers component e1
    np.testing.assert_array_equal(np.abs(sd.R), [[0.0, 1.0], [1.0, 0.0]])


def test_complex_pair_raises():
    with pytest.raises(HyperbolicityLoss):
        eigendecompose(constant_system([[0.0, -1.0], [1.0, 0.0]]), np.zeros(2))


def test_coincident_eigenvalues_raise():
    with pytest.raises(HyperbolicityLoss):
        eigendecompose(constant_system(np.eye(2)), np.zeros(2))


def test_anchor_signs_makes_leading_entry_positive():
    R = anchor_signs(np.array([[-1.0, 0.0], [0.0, -2.0]]))
    np.testing.assert_array_equal(R, [[1.0, 0.0], [0.0, 2.0]])


def test_burgers_field_gradient_and_interaction():
    s = builtin_system("burgers_transport")
    states = s.sample_box(20, rng=1)
    T = compute_xi(s, states)
    # fast field is lam = psi^1, r = e1
    np.testing.assert_allclose(T.dlam[:, 1], np.tile([1.0, 0.0], (20, 1)), atol=1e-14)
    np.testing.assert_allclose(T.rcoef, 0.0, atol=1e-14)
    np.testing.assert_allclose(T.xi[:, 1, 1, 1], -1.0, atol=1e-14)


def test_constant_matrix_has_no_interaction():
    s = constant_system([[0.0, 1.0], [4.0, 0.0]])
    T = compute_xi(s, np.array([0.3, -0.2]))
    np.testing.assert_allclose(T.dlam, 0.0, atol=1e-14)
    np.testing.assert_allclose(T.rcoef, 0.0, atol=1e-14)
    np.testing.assert_allclose(T.xi, 0.0, atol=1e-14)


def test_p_system_eigenvalue_gradient_by_differences():
    s = builtin_system("p_system")
    v = np.linspace(0.6, 2.9, 7)
    psi = np.stack([v, np.zeros_like(v)], axis=-1)
    sd = eigendecompose(s, psi)
    np.testing.assert_allclose(sd.lam, np.stack([-1 / v, 1 / v], -1), rtol=1e-13)
    dlam, _ = eigen_derivatives(s, psi, h_fd=1e-5, method="fd")
    # lam = -+1/v  ->  d lam / dv = +-1/v^2
    np.testing.assert_allclose(dlam[:, 0, 0], 1 / v ** 2, atol=1e-6)
    np.testing.assert_allclose(dlam[:, 1, 0], -1 / v ** 2, atol=1e-6)
    np.testing.assert_allclose(dlam[..., 1], 0.0, atol=1e-6)


def test_analytic_and_difference_derivatives_agree():
    s = builtin_system("synthetic3_intermediate")
    psi = s.sample_box(10, rng=3, shrink=0.2)
    a = compute_xi(s, psi, method="analytic")
    f = compute_xi(s, psi, method="fd", h_fd=1e-5)
    np.testing.assert_allclose(a.dlam, f.dlam, atol=1e-8)
    np.testing.assert_allclose(a.xi, f.xi, atol=1e-7)


def test_p_system_self_interaction_vanishes_off_diagonal():
    s = builtin_system("p_system")
    T = compute_xi(s, s.sample_box(100, rng=7))
    off = [T.xi[:, i, j, j] for i in range(2) for j in range(2) if i != j]
    assert np.max(np.abs(off)) <= 1e-8


def test_genuine_nonlinearity_certificates():
    b = builtin_system("burgers_transport")
    cert = check_genuine_nonlinearity(b, b.sample_box(50, rng=0))
    assert cert.passed and cert.c_lower == pytest.approx(1.0)
    p = builtin_system("p_system", {"box": [[1.0, 2.0], [-1.0, 1.0]]})
    assert check_genuine_nonlinearity(p, p.sample_box(50, rng=0)).c_lower > 0
    with pytest.raises(GenuineNonlinearityFailure):
        check_genuine_nonlinearity(constant_system([[0.0, 1.0], [4.0, 0.0]]), np.zeros((3, 2)))
