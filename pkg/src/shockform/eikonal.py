"""Evolution in eikonal coordinates ``(tau, u)``.

The unknowns on the ``u`` grid are the state ``psi``, the inverse foliation
density ``mu``, the renormalized shocking derivative ``Phi = mu (d_x psi)^I0``,
the non-shocking derivative components ``phi^I' = (d_x psi)^I'`` and the
physical position ``x``. ``psi, mu, Phi, x`` obey pointwise ODEs in ``tau``;
``phi`` is transported along the non-shocking characteristics, traced with
``u`` as the parameter so that the update stays regular as ``mu -> 0``.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .errors import NanDetected, NonMonotoneMap, ShockReached
from .simplewave import bump, dbump
from .spectral import compute_xi


# ---------------------------------------------------------------- helpers

def lagrange4(values, u0, h, uq):
    """Local 4-point cubic interpolation on a uniform grid.

    Queries outside the grid are clamped, which realizes constant extension
    of the (compactly supported) data.

    Parameters
    ----------
    values : ndarray, shape (n, ...)
    u0, h : float
        First node and spacing.
    uq : ndarray, shape (q,)

    Returns
    -------
    ndarray, shape (q, ...)
    """
    n = values.shape[0]
    s = np.clip((np.asarray(uq, dtype=float) - u0) / h, 0.0, n - 1.0)
    j = np.clip(np.floor(s).astype(int), 1, n - 3)
    t = s - j
    w = (
        -t * (t - 1) * (t - 2) / 6.0,
        (t + 1) * (t - 1) * (t - 2) / 2.0,
        -(t + 1) * t * (t - 2) / 2.0,
        (t + 1) * t * (t - 1) / 6.0,
    )
    extra = (slice(None),) + (None,) * (values.ndim - 1)
    out = w[0][extra] * values[j - 1]
    for k in range(1, 4):
        out = out + w[k][extra] * values[j - 1 + k]
    return out


def centered_diff(f, h, order=2, axis=0):
    """Centered first derivative with constant extension at the ends."""
    f = np.asarray(f, dtype=float)
    pad = [(0, 0)] * f.ndim
    pad[axis] = (2, 2)
    g = np.pad(f, pad, mode="edge")
    n = f.shape[axis]

    def sl(k):
        idx = [slice(None)] * f.ndim
        idx[axis] = slice(2 + k, 2 + k + n)
        return g[tuple(idx)]

    if order == 2:
        return (sl(1) - sl(-1)) / (2 * h)
    if order == 4:
        return (-sl(2) + 8 * sl(1) - 8 * sl(-1) + sl(-2)) / (12 * h)
    raise ValueError("order must be 2 or 4")


def refine_min(values, u, k=None, order=2):
    """Sub-grid minimum of sampled values near the discrete minimum.

    ``order=2`` fits a parabola through three nodes; ``order=4`` fits a
    quartic through five nodes and locates the critical point by Newton.

    Returns
    -------
    (u_min, v_min)
    """
    values = np.asarray(values, dtype=float)
    n = values.size
    if k is None:
        k = int(np.argmin(values))
    h = u[1] - u[0]
    half = 1 if order == 2 else 2
    if k < half or k > n - 1 - half:
        return float(u[k]), float(values[k])
    y = values[k - half:k + half + 1]
    z = np.arange(-half, half + 1, dtype=float)
    if not np.all(np.isfinite(y)):
        return float(u[k]), float(values[k])
    if order == 2:
        c2 = 0.5 * (y[2] - 2 * y[1] + y[0])
        c1 = 0.5 * (y[2] - y[0])
        if c2 <= 0:
            return float(u[k]), float(y[1])
        s = -c1 / (2 * c2)
        return float(u[k] + s * h), float(y[1] + c1 * s + c2 * s * s)
    coef = np.polynomial.polynomial.polyfit(z, y, 4)
    p = np.polynomial.Polynomial(coef)
    dp, d2p = p.deriv(), p.deriv(2)
    s = 0.0
    for _ in range(20):
        c = d2p(s)
        if c <= 0:
            break
        step = dp(s) / c
        s -= step
        if abs(step) < 1e-15:
            break
    s = float(np.clip(s, -1.0, 1.0))
    return float(u[k] + s * h), float(p(s))


# ---------------------------------------------------------------- data

@dataclass(frozen=True)
class Perturbation:
    """Compactly supported vector perturbation ``v(x) = sum_k a_k b((x-c_k)/w_k)``.

    Amplitudes are rescaled so that ``sup|v| + sup|v'| = 1``.
    """

    centers: tuple
    widths: tuple
    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.atleast_2d(np.asarray(self.amplitudes, dtype=float))
        object.__setattr__(self, "amplitudes", amps)
        lo, hi = self.support
        x = np.linspace(lo, hi, 20001)
        norm = np.max(np.abs(self._raw(x, 0))) + np.max(np.abs(self._raw(x, 1)))
        object.__setattr__(self, "_scale", 1.0 / norm if norm > 0 else 0.0)

    def _raw(self, x, d):
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape + (self.amplitudes.shape[1],))
        for c, w, a in zip(self.centers, self.widths, self.amplitudes):
            y = (x - c) / w
            prof = bump(y) if d == 0 else dbump(y) / w
            out += prof[..., None] * a
        return out

    @property
    def support(self):
        return (min(c - w for c, w in zip(self.centers, self.widths)),
                max(c + w for c, w in zip(self.centers, self.widths)))

    def __call__(self, x):
        return self._scale * self._raw(x, 0)

    def derivative(self, x):
        return self._scale * self._raw(x, 1)


def default_perturbation(n, center=0.0, width=1.0) -> Perturbation:
    """Two bumps per component, placed asymmetrically so the shock time moves
    at first order in the amplitude."""
    amps = []
    for k in range(n):
        a = np.zeros(n)
        a[k] = 1.0 if k % 2 == 0 else -0.7
        amps.append(a)
    centers = tuple(center + width * (0.3 - 0.2 * k) for k in range(n))
    widths = tuple(width * (1.0 + 0.15 * k) for k in range(n))
    return Perturbation(centers, widths, np.array(amps))


@dataclass
class SolverConfig:
    """Numerical parameters of the eikonal evolution.

    ``dtau <= 0.5 h^(2/3)`` is enforced as an accuracy bound; no CFL bound is
    needed because the non-shocking transport is semi-Lagrangian.
    """

    n_u: int = 1024
    dtau: float = 1e-3
    mu_stop: float = 1e-3
    tau_max: float = 1.5
    margin: Optional[float] = None
    fd_order: int = 4
    store_every: int = 1
    final_approach: bool = True
    max_substeps: int = 200000
    checkpoints: tuple = ()
    derivative_method: str = "auto"


@dataclass
class EikonalField:
    """Fundamental unknowns on the ``u`` grid at one ``tau`` level.

    ``tau`` is the time coordinate of the system's frame (``gauge.t0`` at the
    initial slice).
    """

    tau: float
    u: np.ndarray
    psi: np.ndarray
    mu: np.ndarray
    Phi: np.ndarray
    phi: np.ndarray
    x: np.ndarray
    alive: np.ndarray
    system: object
    wave: object = None
    phi_prev: Optional[np.ndarray] = None
    dtau_prev: float = 0.0
    _tens: object = field(default=None, repr=False)

    @property
    def h(self) -> float:
        return float(self.u[1] - self.u[0])

    @property
    def others(self):
        i0 = self.system.shock_index
        return [i for i in range(self.system.n) if i != i0]

    def tensors(self):
        if self._tens is None:
            self._tens = compute_xi(self.system, self.psi)
        return self._tens

    def min_mu(self, order=2):
        mu = np.where(self.alive, self.mu, np.inf)
        return refine_min(mu, self.u, order=order)

    def background(self):
        """Exact background ``(psi, mu, Phi)`` of the simple wave at this ``tau``."""
        w = self.wave
        psi = w.state0(self.u) - self.system.state_shift
        tau = self.tau - self.system.gauge.t0
        return psi, w.mu(tau, self.u), w.profile.dtheta(self.u)

    def perturbation(self):
        psi, mu, Phi = self.background()
        return self.psi - psi, self.mu - mu, self.Phi - Phi


def domain_margin(system, wave, tau_max):
    """``tau_max * max |lam_I' - lam| + 1`` over the background states."""
    spec_lam = compute_xi(system, wave.realized_states(201) - system.state_shift).lam
    i0 = system.shock_index
    return float(tau_max * np.max(np.abs(spec_lam - spec_lam[:, i0:i0 + 1])) + 1.0)


def initialize(system, wave, perturbation=None, eps=0.0, config=None) -> EikonalField:
    """Initial eikonal field ``psi(0, .) = Theta(0, .) + eps v`` with ``u = x``.

    Derivatives of the sampled data are taken by centered differences of
    order ``config.fd_order`` and projected onto the eigenbasis.

    Raises
    ------
    BoxExit
        If the perturbed data leave the state-space box.
    """
    config = config or SolverConfig()
    if eps < 0:
        raise ValueError("eps must be nonnegative")
    lo, hi = wave.support()
    if perturbation is not None and eps > 0:
        plo, phi_ = perturbation.support
        lo, hi = min(lo, plo), max(hi, phi_)
    margin = config.margin
    if margin is None:
        margin = domain_margin(system, wave, config.tau_max)
    u = np.linspace(lo - margin, hi + margin, config.n_u)
    h = u[1] - u[0]
    if config.dtau > 0.5 * h ** (2.0 / 3.0):
        raise ValueError(f"dtau = {config.dtau} exceeds 0.5 h^(2/3) = {0.5 * h ** (2 / 3):.3e}")
    psi = wave.state0(u) - system.state_shift
    if perturbation is not None and eps > 0:
        psi = psi + eps * perturbation(u)
    system.require_in_box(psi, "initial data")
    dpsi = centered_diff(psi, h, order=config.fd_order, axis=0)
    tens = compute_xi(system, psi, method=config.derivative_method)
    w = np.einsum("nij,nj->ni", tens.L, dpsi)
    i0 = system.shock_index
    others = [i for i in range(system.n) if i != i0]
    x = u - system.gauge.x0
    return EikonalField(system.gauge.t0, u, psi, np.ones_like(u), w[:, i0].copy(),
                        w[:, others].copy(), x, np.ones(u.shape, dtype=bool),
                        system, wave, _tens=tens)


# ---------------------------------------------------------------- stepping

def _local_rhs(state_sys, psi, mu, Phi, phi, tens, alive):
    i0 = state_sys.shock_index
    others = [i for i in range(state_sys.n) if i != i0]
    lam = tens.lam
    lam0 = lam[:, i0]
    dl = lam0[:, None] - lam[:, others]
    Rp = tens.R[:, :, others]
    D = tens.dlam_r
    xi = tens.xi
    dpsi = np.einsum("nsk,nk->ns", Rp, dl * phi)
    dmu = D[:, i0, i0] * Phi + mu * np.sum(D[:, i0, others] * phi, axis=1)
    c0 = xi[:, i0, i0, others] + xi[:, i0, others, i0] + D[:, i0, others]
    q0 = xi[:, i0][:, others][:, :, others]
    dPhi = Phi * np.sum(c0 * phi, axis=1) + mu * np.einsum("njk,nj,nk->n", q0, phi, phi)
    dx = lam0.copy()
    dead = ~alive
    if dead.any():
        dpsi[dead] = 0.0
        dmu[dead] = 0.0
        dPhi[dead] = 0.0
        dx[dead] = 0.0
    return dpsi, dmu, dPhi, dx


def _transport_coeffs(system, tens, mu, Phi, phi):
    """Per non-shocking field: speed difference and source pieces."""
    i0 = system.shock_index
    others = [i for i in range(system.n) if i != i0]
    xi = tens.xi
    d = tens.lam[:, others] - tens.lam[:, i0:i0 + 1]
    xo = xi[:, others]
    C = xo[:, :, i0, :][:, :, others] + xo[:, :, :, i0][:, :, others]
    Q = xi[:, others][:, :, others][:, :, :, others]
    return d, C, Q


def _source(mu, Phi, phi, C, Q):
    return Phi[:, None] * np.einsum("nij,nj->ni", C, phi) + mu[:, None] * np.einsum(
        "nijk,nj,nk->ni", Q, phi, phi)


def _pack(mu, Phi, phi, d, C, Q):
    n = mu.shape[0]
    return np.concatenate([mu[:, None], Phi[:, None], phi, d,
                           C.reshape(n, -1), Q.reshape(n, -1)], axis=1)


def _unpack(F, m):
    mu = F[:, 0]
    Phi = F[:, 1]
    phi = F[:, 2:2 + m]
    d = F[:, 2 + m:2 + 2 * m]
    C = F[:, 2 + 2 * m:2 + 2 * m + m * m].reshape(-1, m, m)
    Q = F[:, 2 + 2 * m + m * m:].reshape(-1, m, m, m)
    return mu, Phi, phi, d, C, Q


def _semi_lagrangian(u, tau0, dt, F0, F1, phi0, alive, max_substeps, sign_hint):
    """Transport ``phi`` from level ``tau0`` to ``tau0 + dt`` along the
    non-shocking characteristics traced backward from each node."""
    n = u.size
    h = u[1] - u[0]
    m = phi0.shape[1]
    both = np.concatenate([F0, F1], axis=1)
    width = F0.shape[1]
    out = phi0.copy()

    def fields(tq, uq):
        vals = lagrange4(both, u[0], h, uq)
        th = ((tq - tau0) / dt)[:, None]
        return _unpack((1 - th) * vals[:, :width] + th * vals[:, width:], m)

    for comp in range(m):
        idx = np.nonzero(alive)[0]
        if idx.size == 0:
            break
        sgn = -np.sign(sign_hint[idx, comp])  # u-dot = sgn(lam - lam_I')
        tp = np.full(idx.size, tau0 + dt)
        up = u[idx].copy()
        acc = np.zeros(idx.size)
        active = np.ones(idx.size, dtype=bool)
        steps = 0
        while active.any():
            steps += 1
            if steps > max_substeps:
                raise NanDetected("characteristic tracing did not reach the previous level")
            a = np.nonzero(active)[0]
            t_a, u_a, s_a = tp[a], up[a], sgn[a]
            rem = t_a - tau0
            mu1, _, _, d1, _, _ = fields(t_a, u_a)
            k1 = mu1 / d1[:, comp]
            du = s_a * np.minimum(h, rem / np.maximum(np.abs(k1), 1e-300))
            tm = t_a + 0.5 * k1 * du
            um = u_a + 0.5 * du
            mum, Phim, phim, dm, Cm, Qm = fields(tm, um)
            k2 = mum / dm[:, comp]
            dtau = k2 * du
            last = -dtau >= rem
            scale = np.where(last, rem / np.maximum(-dtau, 1e-300), 1.0)
            du = du * scale
            dtau = np.where(last, -rem, dtau)
            src = _source(mum, Phim, phim, Cm, Qm)[:, comp]
            acc[a] += src / dm[:, comp] * du
            tp[a] = t_a + dtau
            up[a] = u_a + du
            active[a[last]] = False
        foot = lagrange4(phi0[:, comp], u[0], h, up)
        out[idx, comp] = foot - acc
    return out


def advance_tau(state: EikonalField, config: SolverConfig, dt=None,
                continuation=False) -> EikonalField:
    """One step ``tau -> tau + dt`` of the coupled local/transport update.

    Raises
    ------
    ShockReached
        If called with ``min mu <= mu_stop`` outside continuation mode.
    NanDetected
        On non-finite values.
    """
    if not continuation and np.min(state.mu) <= config.mu_stop:
        raise ShockReached("mu already below threshold", state)
    dt = config.dtau if dt is None else dt
    sys_ = state.system
    alive = state.alive
    phi_n = state.phi
    if state.phi_prev is not None and state.dtau_prev > 0:
        phi_pred = phi_n + (phi_n - state.phi_prev) * (dt / state.dtau_prev)
    else:
        phi_pred = phi_n
    phi_pred = np.where(alive[:, None], phi_pred, phi_n)

    def phi_at(c):
        return phi_n + c * (phi_pred - phi_n)

    method = config.derivative_method
    y0 = (state.psi, state.mu, state.Phi, state.x)
    tens0 = state.tensors()

    def rhs(y, c, tens=None):
        psi, mu, Phi, _ = y
        if tens is None:
            tens = compute_xi(sys_, psi, method=method)
        return _local_rhs(sys_, psi, mu, Phi, phi_at(c), tens, alive)

    def axpy(y, k, a):
        return tuple(yi + a * ki for yi, ki in zip(y, k))

    k1 = rhs(y0, 0.0, tens0)
    k2 = rhs(axpy(y0, k1, 0.5 * dt), 0.5)
    k3 = rhs(axpy(y0, k2, 0.5 * dt), 0.5)
    k4 = rhs(axpy(y0, k3, dt), 1.0)
    y1 = tuple(y + dt / 6.0 * (a + 2 * b + 2 * c + d)
               for y, a, b, c, d in zip(y0, k1, k2, k3, k4))
    psi1, mu1, Phi1, x1 = y1
    tens1 = compute_xi(sys_, psi1, method=method)

    m = phi_n.shape[1]
    if m > 0:
        d0, C0, Q0 = _transport_coeffs(sys_, tens0, state.mu, state.Phi, phi_n)
        d1, C1, Q1 = _transport_coeffs(sys_, tens1, mu1, Phi1, phi_pred)
        F0 = _pack(np.maximum(state.mu, 0.0), state.Phi, phi_n, d0, C0, Q0)
        F1 = _pack(np.maximum(mu1, 0.0), Phi1, phi_pred, d1, C1, Q1)
        phi1 = _semi_lagrangian(state.u, state.tau, dt, F0, F1, phi_n, alive,
                                config.max_substeps, d1)
    else:
        phi1 = phi_n
    new = EikonalField(state.tau + dt, state.u, psi1, mu1, Phi1, phi1, x1,
                       alive.copy(), sys_, state.wave, phi_prev=phi_n, dtau_prev=dt,
                       _tens=tens1)
    for arr in (psi1, mu1, Phi1, phi1, x1):
        if not np.all(np.isfinite(arr)):
            raise NanDetected(f"non-finite values at tau = {new.tau:.6f}")
    if continuation:
        new.alive = alive & (mu1 > config.mu_stop)
    return new


# ---------------------------------------------------------------- driver

@dataclass
class Trajectory:
    """Stored snapshots of an eikonal evolution.

    Arrays carry the snapshot index first: ``psi[k, j, S]``, ``mu[k, j]``,
    ``lam[k, j, I]`` and so on. ``tau_hist``/``min_hist``/``argmin_hist``
    record the refined minimum of ``mu`` after every step.
    """

    system: object
    wave: object
    config: SolverConfig
    u: np.ndarray
    tau: np.ndarray
    psi: np.ndarray
    mu: np.ndarray
    Phi: np.ndarray
    phi: np.ndarray
    x: np.ndarray
    lam: np.ndarray
    alive: np.ndarray
    tau_hist: np.ndarray
    min_hist: np.ndarray
    argmin_hist: np.ndarray
    stop_reason: str
    t_star_est: float
    checkpoints: dict = field(default_factory=dict)
    final: Optional[EikonalField] = None

    @property
    def h(self):
        return float(self.u[1] - self.u[0])

    def snapshot(self, k) -> dict:
        return {name: getattr(self, name)[k] for name in
                ("psi", "mu", "Phi", "phi", "x", "lam", "alive")} | {"tau": self.tau[k]}

    def interp(self, name, tau, u):
        """Field ``name`` at points ``(tau, u)``: linear in ``tau``, cubic in ``u``."""
        tau = np.atleast_1d(np.asarray(tau, dtype=float))
        u = np.atleast_1d(np.asarray(u, dtype=float))
        tau, u = np.broadcast_arrays(tau, u)
        arr = getattr(self, name)
        k = np.clip(np.searchsorted(self.tau, tau, side="right") - 1, 0, len(self.tau) - 2)
        t0, t1 = self.tau[k], self.tau[k + 1]
        th = np.clip((tau - t0) / (t1 - t0), 0.0, 1.0)
        n = self.u.size
        sp = np.clip((u.ravel() - self.u[0]) / self.h, 0.0, n - 1.0)
        j = np.clip(np.floor(sp).astype(int), 1, n - 3)
        t = sp - j
        w = np.stack([-t * (t - 1) * (t - 2) / 6.0, (t + 1) * (t - 1) * (t - 2) / 2.0,
                      -(t + 1) * t * (t - 2) / 2.0, (t + 1) * t * (t - 1) / 6.0], axis=1)
        cols = j[:, None] + np.arange(-1, 3)
        kf = k.ravel()[:, None]
        extra = (slice(None), slice(None)) + (None,) * (arr.ndim - 2)
        a = np.sum(w[extra] * arr[kf, cols], axis=1)
        b = np.sum(w[extra] * arr[kf + 1, cols], axis=1)
        th = th.ravel().reshape((-1,) + (1,) * (arr.ndim - 2))
        out = ((1 - th) * a + th * b).reshape(tau.shape + arr.shape[2:])
        return out


def _store(buf, st: EikonalField):
    tens = st.tensors()
    buf["tau"].append(st.tau)
    buf["psi"].append(st.psi.copy())
    buf["mu"].append(st.mu.copy())
    buf["Phi"].append(st.Phi.copy())
    buf["phi"].append(st.phi.copy())
    buf["x"].append(st.x.copy())
    buf["lam"].append(tens.lam.copy())
    buf["alive"].append(st.alive.copy())


def evolve_to_stop(state: EikonalField, config: SolverConfig, continuation=False,
                   tau_end=None) -> Trajectory:
    """Advance until ``min mu <= mu_stop`` (or ``tau_max``).

    With ``continuation`` the run proceeds to ``tau_end`` past the first
    singularity, freezing nodes once their ``mu`` drops below ``mu_stop``;
    values at frozen nodes, and at nodes whose past meets them, are outside
    the maximal development.

    The shock time estimate extrapolates the last two samples of the
    refined ``min_u mu`` linearly to zero.
    """
    buf = {k: [] for k in ("tau", "psi", "mu", "Phi", "phi", "x", "lam", "alive")}
    hist_t, hist_m, hist_a = [], [], []
    checkpoints = {}
    pending = sorted(config.checkpoints)
    st = state
    _store(buf, st)
    um, mm = st.min_mu()
    hist_t.append(st.tau)
    hist_m.append(mm)
    hist_a.append(um)
    tau_end = state.tau + config.tau_max if tau_end is None else tau_end
    reason = "horizon"
    step = 0
    while st.tau < tau_end - 1e-12:
        dt = min(config.dtau, tau_end - st.tau)
        if pending and pending[0] > st.tau + 1e-12:
            dt = min(dt, pending[0] - st.tau)
        if config.final_approach and not continuation:
            rate = _local_rhs(st.system, st.psi, st.mu, st.Phi, st.phi,
                              st.tensors(), st.alive)[1]
            k = int(np.argmin(st.mu))
            if rate[k] < 0:
                dt = min(dt, 0.5 * st.mu[k] / -rate[k])
        st = advance_tau(st, config, dt=dt, continuation=continuation)
        step += 1
        um, mm = st.min_mu()
        hist_t.append(st.tau)
        hist_m.append(mm)
        hist_a.append(um)
        hit = pending and abs(st.tau - pending[0]) < 1e-12
        if hit:
            checkpoints[pending.pop(0)] = len(buf["tau"])
        if step % config.store_every == 0 or hit or not continuation and np.min(st.mu) <= config.mu_stop:
            _store(buf, st)
        if not continuation and np.min(st.mu) <= config.mu_stop:
            reason = "shock"
            break
    if buf["tau"][-1] != st.tau:
        _store(buf, st)
    t_arr = np.array(hist_t)
    m_arr = np.array(hist_m)
    if reason == "shock" and len(t_arr) >= 2:
        slope = (m_arr[-1] - m_arr[-2]) / (t_arr[-1] - t_arr[-2])
        t_est = float(t_arr[-1] - m_arr[-1] / slope)
    else:
        t_est = float("nan")
    arrays = {k: np.array(v) for k, v in buf.items()}
    return Trajectory(state.system, state.wave, config, state.u, arrays["tau"],
                      arrays["psi"], arrays["mu"], arrays["Phi"], arrays["phi"],
                      arrays["x"], arrays["lam"], arrays["alive"], t_arr, m_arr,
                      np.array(hist_a), reason, t_est, checkpoints, final=st)


def physical_reconstruct(state: EikonalField, order=4):
    """Physical sampling ``(t, x, psi, d_x psi)`` sorted by ``x``.

    Raises
    ------
    NonMonotoneMap
        If ``x`` is not strictly increasing in ``u``.
    """
    if not np.all(np.diff(state.x) > 0):
        raise NonMonotoneMap(f"x(u) not increasing at tau = {state.tau:.6f}")
    dpsi = centered_diff(state.psi, state.h, order=order, axis=0) / state.mu[:, None]
    t = np.full_like(state.x, state.tau)
    return {"t": t, "x": state.x.copy(), "psi": state.psi.copy(), "dpsi_dx": dpsi}


def residual_diagnostics(prev: EikonalField, cur: EikonalField, order=2) -> dict:
    """Consistency residuals between two consecutive snapshots.

    * ``commutator``: ``[d_tau, d_u] x = 0`` in the discrete form
      ``(mu^1 - mu^0)/dtau - d_u (lam^0 + lam^1)/2``
    * ``duality``: ``Phi - l^I0 . d_u psi``
    * ``lpsi``: ``l^I' . d_tau psi - (lam - lam_I') phi^I'``

    Each is the max over live nodes of the absolute value. ``order`` is the
    accuracy of the ``u`` differences: 2 measures truncation (converges at
    second order), 4 matches the solver's own stencil.
    """
    dt = cur.tau - prev.tau
    h = cur.h
    i0 = cur.system.shock_index
    others = cur.others
    t0, t1 = prev.tensors(), cur.tensors()
    lam_mid = 0.5 * (t0.lam[:, i0] + t1.lam[:, i0])
    comm = (cur.mu - prev.mu) / dt - centered_diff(lam_mid, h, order=order)
    dpsi = centered_diff(cur.psi, h, order=order, axis=0)
    dual = cur.Phi - np.einsum("nj,nj->n", t1.L[:, i0, :], dpsi)
    L_mid = 0.5 * (t0.L + t1.L)
    dtpsi = (cur.psi - prev.psi) / dt
    lhs = np.einsum("nkj,nj->nk", L_mid[:, others, :], dtpsi)
    gap_mid = 0.5 * ((t0.lam[:, [i0]] - t0.lam[:, others]) * prev.phi
                     + (t1.lam[:, [i0]] - t1.lam[:, others]) * cur.phi)
    lpsi = lhs - gap_mid
    live = cur.alive & prev.alive
    inner = live.copy()
    inner[:order // 2 + 1] = inner[-(order // 2 + 1):] = False
    return {
        "commutator": float(np.max(np.abs(comm[inner]))),
        "duality": float(np.max(np.abs(dual[inner]))),
        "lpsi": float(np.max(np.abs(lpsi[live]))) if lpsi.size else 0.0,
    }


def write_snapshot_csv(path, tau, u, x, mu, Phi, psi, phi):
    """Snapshot dump with header ``tau,u,x,mu,Phi,psi_1..psi_N,phi_1..phi_{N-1}``."""
    n = psi.shape[1]
    m = phi.shape[1]
    header = ["tau", "u", "x", "mu", "Phi"] + [f"psi_{k + 1}" for k in range(n)] + [
        f"phi_{k + 1}" for k in range(m)]
    cols = [np.full_like(u, tau), u, x, mu, Phi] + [psi[:, k] for k in range(n)] + [
        phi[:, k] for k in range(m)]
    data = np.column_stack(cols)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(header) + "\n")
        for row in data:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def c1_norms(traj: Trajectory, k: int) -> dict:
    """Discrete ``C^1_(tau,u)`` norms of the fundamental unknowns at snapshot ``k``.

    ``sup|f| + sup|d_tau f| + sup|d_u f|`` over live nodes, with the ``tau``
    derivative taken against the neighbouring snapshot.
    """
    j = k - 1 if k > 0 else k + 1
    dt = traj.tau[k] - traj.tau[j]
    live = traj.alive[k] & traj.alive[j]
    h = traj.h
    out = {}
    for name in ("psi", "mu", "Phi", "phi"):
        f = getattr(traj, name)
        a = f[k].reshape(f.shape[1], -1)
        b = f[j].reshape(f.shape[1], -1)
        if a.shape[1] == 0:
            out[name] = 0.0
            continue
        du = centered_diff(a, h, order=2, axis=0)
        out[name] = float(np.max(np.abs(a[live])) + np.max(np.abs((a - b)[live] / dt))
                          + np.max(np.abs(du[live])))
    return out


def max_shock_gradient(traj: Trajectory, k: int) -> float:
    """``max |(d_x psi)^I0| = max |Phi| / mu`` at snapshot ``k``."""
    live = traj.alive[k]
    return float(np.max(np.abs(traj.Phi[k][live]) / traj.mu[k][live]))


def snapshot_index(traj: Trajectory, tau: float) -> int:
    return int(np.argmin(np.abs(traj.tau - tau)))
