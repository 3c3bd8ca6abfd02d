"""Eigenstructure of the advection matrix and derived structure tensors.

All evaluators accept a single state of shape ``(N,)`` or a batch of shape
``(..., N)``. Index conventions for the returned arrays (batch axes omitted):

* ``lam[I]`` eigenvalues, increasing
* ``R[S, I]`` right eigenvectors as columns, unit Euclidean length
* ``L[J, S]`` left eigenvectors as rows, ``L @ R = Id``
* ``dlam[I, S]`` gradient of ``lam[I]`` with respect to ``psi[S]``
* ``rcoef[J, I, S]`` coefficients of ``d r_I / d psi^S`` in the eigenbasis
* ``xi[I, J, K]`` interaction tensor, so that the eigen-components ``w`` of
  ``d_x psi`` satisfy ``(d_t + lam_I d_x) w^I = xi[I, J, K] w^J w^K``
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import GenuineNonlinearityFailure, HyperbolicityLoss

HYPERBOLICITY_GAP = 1e-6
SPECTRAL_TOL = 1e-10
XI_TOL = 1e-8
H_FD = 1e-5


@dataclass(frozen=True)
class SpectralData:
    lam: np.ndarray
    R: np.ndarray
    L: np.ndarray


@dataclass(frozen=True)
class StructureTensors:
    lam: np.ndarray
    R: np.ndarray
    L: np.ndarray
    dlam: np.ndarray
    rcoef: np.ndarray
    xi: np.ndarray

    @property
    def dlam_r(self) -> np.ndarray:
        """``dlam_r[I, J] = dlam[I, S] R[S, J]``, the rate of lam_I along r_J."""
        return np.einsum("...is,...sj->...ij", self.dlam, self.R)


def _multi(system):
    # scalar laws get the decoupled transport companion
    if system.n == 1:
        from .systems import augment_scalar

        return augment_scalar(system)
    return system


def anchor_signs(R: np.ndarray) -> np.ndarray:
    """Flip columns so the first nonzero component of each is positive."""
    R = np.array(R, dtype=float)
    for i in range(R.shape[-1]):
        col = R[..., :, i]
        nz = np.abs(col) > 1e-12
        first = np.argmax(nz, axis=-1)
        lead = np.take_along_axis(col, first[..., None], axis=-1)[..., 0]
        R[..., :, i] *= np.where(lead < 0, -1.0, 1.0)[..., None]
    return R


def reference_basis(system) -> np.ndarray:
    """Right eigenvectors at the box center with anchored signs."""
    cached = getattr(system, "_ref_basis", None)
    if cached is not None:
        return cached
    center = system.box.mean(axis=1)
    A = np.asarray(system.advection(center), dtype=float)
    w, V = np.linalg.eig(A)
    order = np.argsort(w.real)
    V = V.real[:, order]
    V /= np.linalg.norm(V, axis=0)
    R = anchor_signs(V)
    object.__setattr__(system, "_ref_basis", R)
    return R


def eigendecompose(system, psi, ref=None, gap=HYPERBOLICITY_GAP) -> SpectralData:
    """Sorted real eigen-decomposition of ``A(psi)`` with continuous signs.

    Parameters
    ----------
    system : SystemDefinition
    psi : array_like, shape (..., N)
    ref : array_like, optional
        Basis (columns) to align signs with, broadcastable against the
        batch. Defaults to the anchored basis at the box center. Passing the
        basis returned at a nearby state propagates the frame continuously.
    gap : float
        Minimal admissible separation between consecutive eigenvalues.

    Returns
    -------
    SpectralData

    Raises
    ------
    HyperbolicityLoss
        If a complex pair appears or two eigenvalues come closer than ``gap``.
    """
    system = _multi(system)
    psi = np.asarray(psi, dtype=float)
    A = np.asarray(system.advection(psi), dtype=float)
    w, V = np.linalg.eig(A)
    scale = 1.0 + np.max(np.abs(w), axis=-1)
    if np.any(np.abs(w.imag) > 1e-12 * scale[..., None]):
        raise HyperbolicityLoss("complex eigenvalues encountered")
    order = np.argsort(w.real, axis=-1)
    lam = np.take_along_axis(w.real, order, axis=-1)
    R = np.take_along_axis(V.real, order[..., None, :], axis=-1)
    if lam.shape[-1] > 1 and np.min(np.diff(lam, axis=-1)) < gap:
        raise HyperbolicityLoss(
            f"eigenvalue gap {np.min(np.diff(lam, axis=-1)):.3e} below {gap:.1e}"
        )
    R = R / np.linalg.norm(R, axis=-2, keepdims=True)
    if ref is None:
        ref = reference_basis(system)
    dots = np.sum(R * np.asarray(ref), axis=-2)
    R = R * np.where(dots < 0, -1.0, 1.0)[..., None, :]
    L = np.linalg.inv(R)
    return SpectralData(lam=lam, R=R, L=L)


def eigen_derivatives(system, psi, h_fd=H_FD, method="auto", spec=None):
    """Gradients of eigenvalues and eigenbasis coefficients of eigenvector
    derivatives.

    Parameters
    ----------
    system : SystemDefinition
    psi : array_like, shape (..., N)
    h_fd : float
        Step of the symmetric difference when no analytic ``dA`` is present.
    method : {"auto", "analytic", "fd"}
    spec : SpectralData, optional
        Decomposition at ``psi`` if already available.

    Returns
    -------
    dlam : ndarray, shape (..., N, N)
    rcoef : ndarray, shape (..., N, N, N)
    """
    system = _multi(system)
    psi = np.asarray(psi, dtype=float)
    if spec is None:
        spec = eigendecompose(system, psi)
    if method == "auto":
        method = "analytic" if system.d_advection is not None else "fd"
    if method == "analytic":
        return _analytic_derivatives(system, psi, spec)
    if method != "fd":
        raise ValueError(f"unknown method {method!r}")
    n = system.n
    dlam = np.empty(psi.shape[:-1] + (n, n))
    dR = np.empty(psi.shape[:-1] + (n, n, n))
    for s in range(n):
        step = np.zeros(n)
        step[s] = h_fd
        plus = eigendecompose(system, psi + step, ref=spec.R)
        minus = eigendecompose(system, psi - step, ref=spec.R)
        dlam[..., :, s] = (plus.lam - minus.lam) / (2 * h_fd)
        dR[..., s] = (plus.R - minus.R) / (2 * h_fd)
    # dR[k, I, S]; contract with L to get coefficients in the eigenbasis
    rcoef = np.einsum("...jk,...kis->...jis", spec.L, dR)
    return dlam, rcoef


def _analytic_derivatives(system, psi, spec):
    n = system.n
    dA = np.asarray(system.d_advection(psi), dtype=float)  # (..., S, N, N)
    # M[J, I, S] = l^J dA_S r_I
    M = np.moveaxis(spec.L[..., None, :, :] @ dA @ spec.R[..., None, :, :], -3, -1)
    idx = np.arange(n)
    dlam = M[..., idx, idx, :]
    diff = spec.lam[..., None, :] - spec.lam[..., :, None]  # lam_I - lam_J at [J, I]
    off = ~np.eye(n, dtype=bool)
    safe = np.where(off, diff, 1.0)
    rcoef = np.where(off[..., None], M / safe[..., None], 0.0)
    # keep |r_I| = 1: r_I . d r_I = 0 fixes the diagonal coefficient
    gram = np.einsum("...ki,...kj->...ij", spec.R, spec.R)  # r_I . r_J at [I, J]
    diag = -np.einsum("...jis,...ij->...is", rcoef, np.where(off, gram, 0.0))
    rcoef[..., idx, idx, :] = diag
    return dlam, rcoef


def assemble_xi(lam, R, dlam, rcoef) -> np.ndarray:
    """Interaction tensor from eigen-data and its derivatives.

    ``xi[I,J,K] = (lam_K - lam_J) rcoef[I,J,S] R[S,K] - dlam[I,S] R[S,J] delta_IK``
    """
    n = lam.shape[-1]
    G = rcoef @ R[..., None, :, :]
    gap = lam[..., None, None, :] - lam[..., None, :, None]
    D = np.einsum("...is,...sj->...ij", dlam, R)
    eye = np.eye(n)
    return gap * G - D[..., :, :, None] * eye[:, None, :]


def compute_xi(system, psi, h_fd=H_FD, method="auto") -> StructureTensors:
    """Full structure tensors at one state or a batch of states."""
    system = _multi(system)
    spec = eigendecompose(system, psi)
    dlam, rcoef = eigen_derivatives(system, psi, h_fd=h_fd, method=method, spec=spec)
    xi = assemble_xi(spec.lam, spec.R, dlam, rcoef)
    return StructureTensors(spec.lam, spec.R, spec.L, dlam, rcoef, xi)


@dataclass(frozen=True)
class NonlinearityCertificate:
    c_lower: float
    index: int
    passed: bool


def check_genuine_nonlinearity(system, states, c_min=1e-3, index=None):
    """Lower bound of ``|xi[I0, I0, I0]|`` over sampled states.

    Parameters
    ----------
    system : SystemDefinition
    states : array_like, shape (M, N)
    c_min : float
        Required lower bound.
    index : int, optional
        Field to test, defaults to the system's shocking index.

    Returns
    -------
    NonlinearityCertificate

    Raises
    ------
    GenuineNonlinearityFailure
        If the sampled minimum is below ``c_min``.
    """
    states = np.atleast_2d(np.asarray(states, dtype=float))
    if states.shape[0] == 0:
        raise ValueError("need at least one state")
    i0 = system.shock_index if index is None else index
    tens = compute_xi(system, states)
    c_lower = float(np.min(np.abs(tens.xi[:, i0, i0, i0])))
    if c_lower < c_min:
        raise GenuineNonlinearityFailure(
            f"min |xi^{i0}_{i0}{i0}| = {c_lower:.3e} < c_min = {c_min:.3e}"
        )
    return NonlinearityCertificate(c_lower=c_lower, index=i0, passed=True)
