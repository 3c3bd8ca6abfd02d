"""Preshock detection, modulation fit and gauge normalization."""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import FitDegenerate, NonUniquePreshock
from .eikonal import Trajectory, lagrange4, refine_min
from .spectral import eigendecompose
from .systems import GaugeParams, galilean_transform, shift_state


def _local_quartic(values, u, k):
    """Quartic through the five nodes around ``k``; returns (poly, center, h)."""
    h = u[1] - u[0]
    z = np.arange(-2, 3, dtype=float)
    coef = np.polynomial.polynomial.polyfit(z, values[k - 2:k + 3], 4)
    return np.polynomial.Polynomial(coef), u[k], h


def local_minimum(values, u, alive=None):
    """Refined minimum ``(gamma, mu_min, mu_uu)`` of one snapshot.

    The location and value come from a five-node quartic, which keeps the
    location error at ``O(h^4)``.
    """
    v = np.asarray(values, dtype=float)
    if alive is not None:
        v = np.where(alive, v, np.inf)
    k = int(np.argmin(v))
    k = min(max(k, 2), v.size - 3)
    gamma, vmin = refine_min(v, u, k=k, order=4)
    p, uc, h = _local_quartic(v, u, k)
    s = (gamma - uc) / h
    return gamma, vmin, float(p.deriv(2)(s) / h ** 2)


def strict_local_minima(values):
    """Indices of strict interior local minima (plateaus excluded)."""
    v = np.asarray(values)
    inner = (v[1:-1] < v[:-2]) & (v[1:-1] <= v[2:])
    return np.nonzero(inner)[0] + 1


def detect_preshock(traj: Trajectory, margin=0.1, window=None):
    """Locate the first zero ``(t*, u0)`` of ``mu``.

    Parameters
    ----------
    traj : Trajectory
        Run stopped by the ``mu_stop`` threshold.
    margin : float
        Required gap between the lowest and second-lowest local minimum of
        ``mu`` at the stop.
    window : (float, float), optional
        Restrict the search to labels in this interval.

    Returns
    -------
    (t_star, u0)

    Raises
    ------
    NonUniquePreshock
    """
    if traj.stop_reason != "shock":
        raise FitDegenerate("trajectory did not reach the stopping threshold")
    u = traj.u
    sel = np.ones(u.shape, dtype=bool) if window is None else (u >= window[0]) & (u <= window[1])
    mu_f = np.where(sel & traj.alive[-1], traj.mu[-1], np.inf)
    mins = strict_local_minima(mu_f)
    mins = mins[np.isfinite(mu_f[mins])]
    if mins.size >= 2:
        vals = np.sort(mu_f[mins])
        if vals[1] - vals[0] < margin:
            raise NonUniquePreshock(
                f"two local minima of mu within {vals[1] - vals[0]:.3e} (< {margin})")
    g1, m1, _ = local_minimum(mu_f, u)
    mu_p = np.where(sel & traj.alive[-2], traj.mu[-2], np.inf)
    g0, m0, _ = local_minimum(mu_p, u)
    t1, t0 = traj.tau[-1], traj.tau[-2]
    slope = (m1 - m0) / (t1 - t0)
    t_star = float(t1 - m1 / slope)
    # the argmin curve is extrapolated the same way
    u0 = float(g1 + (g1 - g0) / (t1 - t0) * (t_star - t1))
    return t_star, u0


@dataclass
class PreshockFit:
    t_star: float
    u0: float
    tau: np.ndarray
    gamma: np.ndarray
    a: np.ndarray
    b: np.ndarray
    a0: float
    b0: float
    mu_residual: float
    x_remainder: float
    window: tuple

    def to_dict(self):
        return {"t_star": self.t_star, "u0": self.u0, "a0": self.a0, "b0": self.b0,
                "mu_residual": self.mu_residual, "x_remainder": self.x_remainder,
                "window": list(self.window), "samples": int(self.tau.size)}


def _extrapolate(tau, vals, t_star, frac=0.25):
    m = max(2, int(np.ceil(frac * tau.size)))
    coef = np.polyfit(tau[-m:], vals[-m:], 1)
    return float(np.polyval(coef, t_star))


def fit_modulation(traj: Trajectory, t_star, u0, width=0.2, r_max=0.5,
                   region=None) -> PreshockFit:
    """Fit ``mu = a (t* - tau) + 3 b (u - gamma)^2 + ...`` on the window
    ``tau in [t* - width, t* - width/4]``.

    ``a0, b0`` are linear extrapolations to ``t*`` of the last quarter of
    the window samples. Two remainder diagnostics are returned:

    * ``mu_residual``: max over the window of ``|mu - a(t*-tau) - 3b(u-gamma)^2| / |u-gamma|^3``
    * ``x_remainder``: max of
      ``|x(u) - x(gamma) - a(t*-tau)(u-gamma) - b(u-gamma)^3| / |u-gamma|^4``

    both over ``4h <= |u - gamma| <= r_max``.

    Raises
    ------
    FitDegenerate
        If the window reaches within ``10 dtau`` of ``t*`` or holds fewer
        than four snapshots.
    """
    lo, hi = t_star - width, t_star - width / 4
    if t_star - hi < 10 * traj.config.dtau:
        raise FitDegenerate("fit window closer than 10 dtau to the preshock")
    ks = np.nonzero((traj.tau >= lo) & (traj.tau <= hi))[0]
    if ks.size < 4:
        raise FitDegenerate("fewer than four snapshots in the fit window")
    u = traj.u
    h = traj.h
    sel = np.ones(u.shape, dtype=bool) if region is None else (u >= region[0]) & (u <= region[1])
    taus, gam, aa, bb = [], [], [], []
    res_mu, res_x = 0.0, 0.0
    for k in ks:
        g, mmin, muu = local_minimum(traj.mu[k], u, traj.alive[k] & sel)
        dt = t_star - traj.tau[k]
        a, b = mmin / dt, muu / 6.0
        taus.append(traj.tau[k])
        gam.append(g)
        aa.append(a)
        bb.append(b)
        d = u - g
        near = (np.abs(d) >= 4 * h) & (np.abs(d) <= r_max) & sel
        xg = lagrange4(traj.x[k], u[0], h, np.array([g]))[0]
        rm = np.abs(traj.mu[k] - a * dt - 3 * b * d ** 2)[near] / np.abs(d[near]) ** 3
        rx = np.abs(traj.x[k] - xg - a * dt * d - b * d ** 3)[near] / d[near] ** 4
        res_mu = max(res_mu, float(rm.max()))
        res_x = max(res_x, float(rx.max()))
    taus, gam, aa, bb = map(np.asarray, (taus, gam, aa, bb))
    a0 = _extrapolate(taus, aa, t_star)
    b0 = _extrapolate(taus, bb, t_star)
    return PreshockFit(t_star, u0, taus, gam, aa, bb, a0, b0, res_mu, res_x, (lo, hi))


def preshock_state(traj: Trajectory, t_star, u0):
    """``(x, psi)`` at the preshock, linearly extrapolated from the last two
    snapshots along the label ``u0``."""
    u, h = traj.u, traj.h
    q = np.array([u0])
    t1, t0 = traj.tau[-1], traj.tau[-2]
    x1 = lagrange4(traj.x[-1], u[0], h, q)[0]
    x0 = lagrange4(traj.x[-2], u[0], h, q)[0]
    p1 = lagrange4(traj.psi[-1], u[0], h, q)[0]
    p0 = lagrange4(traj.psi[-2], u[0], h, q)[0]
    s = (t_star - t1) / (t1 - t0)
    return float(x1 + s * (x1 - x0)), p1 + s * (p1 - p0)


def shift_trajectory(traj: Trajectory, system, gauge: GaugeParams, psi_shift, u_shift,
                     wave=None) -> Trajectory:
    """Express ``traj`` in a new frame.

    ``t -> t + t0``, ``x -> x - v t - x0`` (``t`` the old frame time),
    ``psi -> psi - psi_shift``, ``u -> u - u_shift`` and speeds drop by ``v``.
    """
    t_old = traj.tau
    x = traj.x - gauge.v * t_old[:, None] - gauge.x0
    return replace(
        traj,
        system=system,
        wave=traj.wave if wave is None else wave,
        u=traj.u - u_shift,
        tau=t_old + gauge.t0,
        psi=traj.psi - psi_shift,
        x=x,
        lam=traj.lam - gauge.v,
        tau_hist=traj.tau_hist + gauge.t0,
        argmin_hist=traj.argmin_hist - u_shift,
        t_star_est=traj.t_star_est + gauge.t0,
        checkpoints={k + gauge.t0: v for k, v in traj.checkpoints.items()},
        final=None,
    )


def gauge_normalize_at_preshock(system, traj: Trajectory, fit: PreshockFit):
    """Move the preshock to the origin with zero speed and zero state.

    Returns
    -------
    (normalized system, normalized trajectory, CuspModel)
    """
    from .cusp import CuspModel

    x_star, psi_star = preshock_state(traj, fit.t_star, fit.u0)
    v = float(eigendecompose(system, psi_star).lam[system.shock_index])
    g = GaugeParams(t0=-fit.t_star, x0=x_star - v * fit.t_star, v=v)
    new_sys = galilean_transform(shift_state(system, psi_star), g)
    new_traj = shift_trajectory(traj, new_sys, g, psi_star, fit.u0)
    return new_sys, new_traj, CuspModel(fit.a0, fit.b0, new_sys.gauge)
