"""Shocking simple waves: integral curves, profiles, exact evaluators and
nondegeneracy certificates."""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy.interpolate import CubicHermiteSpline, CubicSpline
from scipy.optimize import minimize_scalar

from .errors import BoxExit, CertificateFailure, NoShock
from .spectral import compute_xi, eigendecompose


def bump(y):
    """C-infinity bump ``exp(1 - 1/(1 - y^2))`` on ``|y| < 1``, zero outside."""
    y = np.asarray(y, dtype=float)
    out = np.zeros_like(y)
    inside = np.abs(y) < 1.0
    yi = y[inside]
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - yi * yi))
    return out


def dbump(y):
    y = np.asarray(y, dtype=float)
    out = np.zeros_like(y)
    inside = np.abs(y) < 1.0
    yi = y[inside]
    q = 1.0 - yi * yi
    out[inside] = np.exp(1.0 - 1.0 / q) * (-2.0 * yi / (q * q))
    return out


# ---------------------------------------------------------------- profiles

@dataclass(frozen=True)
class BumpComponent:
    """One term ``height * b(z/width) * (1 - shape z^2/2 + skew z^3)``,
    ``z = u - center``, of a slope profile."""

    center: float
    width: float
    height: float = -1.0
    shape: float = 0.0
    skew: float = 0.0

    def value(self, u):
        z = np.asarray(u, dtype=float) - self.center
        poly = 1.0 - 0.5 * self.shape * z * z + self.skew * z ** 3
        return self.height * bump(z / self.width) * poly

    def slope(self, u):
        z = np.asarray(u, dtype=float) - self.center
        poly = 1.0 - 0.5 * self.shape * z * z + self.skew * z ** 3
        dpoly = -self.shape * z + 3.0 * self.skew * z * z
        y = z / self.width
        return self.height * (dbump(y) / self.width * poly + bump(y) * dpoly)


_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(8)


class SlopeProfile:
    """Scalar initial profile specified through its (compactly supported)
    derivative.

    ``theta(u) = theta_left + int_{lo}^{u} dtheta``; outside the support the
    profile is constant. A stretch factor ``k`` maps ``u -> u / k`` about the
    origin.

    Parameters
    ----------
    components : sequence of BumpComponent
    theta_left : float, optional
        Value left of the support. Default centers the range about zero.
    stretch : float
    panels : int
        Number of quadrature panels used to tabulate ``theta``.
    """

    def __init__(self, components, theta_left=None, stretch=1.0, panels=4000):
        self.components = tuple(components)
        self.stretch = float(stretch)
        self.panels = int(panels)
        lo = min(c.center - c.width for c in self.components)
        hi = max(c.center + c.width for c in self.components)
        self._raw_support = (lo, hi)
        nodes = np.linspace(lo, hi, self.panels + 1)
        mid = 0.5 * (nodes[1:] + nodes[:-1])
        half = 0.5 * np.diff(nodes)
        pts = mid[:, None] + half[:, None] * _GL_NODES[None, :]
        incr = np.sum(self._raw_d1(pts) * _GL_WEIGHTS[None, :], axis=1) * half
        cum = np.concatenate([[0.0], np.cumsum(incr)])
        self.total = float(cum[-1])
        if theta_left is None:
            theta_left = -0.5 * self.total
        self.theta_left = float(theta_left)
        vals = self.theta_left + cum
        self._spline = CubicHermiteSpline(nodes, vals, self._raw_d1(nodes))

    # raw (unstretched) pieces
    def _raw_d1(self, u):
        return sum(c.value(u) for c in self.components)

    def _raw_d2(self, u):
        return sum(c.slope(u) for c in self.components)

    def _raw_theta(self, u):
        u = np.asarray(u, dtype=float)
        lo, hi = self._raw_support
        out = self._spline(np.clip(u, lo, hi))
        return np.where(u <= lo, self.theta_left,
                        np.where(u >= hi, self.theta_left + self.total, out))

    @property
    def support(self):
        lo, hi = self._raw_support
        return lo * self.stretch, hi * self.stretch

    def theta(self, u):
        return self._raw_theta(np.asarray(u, dtype=float) / self.stretch)

    def dtheta(self, u):
        return self._raw_d1(np.asarray(u, dtype=float) / self.stretch) / self.stretch

    def d2theta(self, u):
        return self._raw_d2(np.asarray(u, dtype=float) / self.stretch) / self.stretch ** 2

    def stretched(self, k) -> "SlopeProfile":
        return SlopeProfile(self.components, self.theta_left, self.stretch * k, self.panels)

    def range(self):
        return (min(self.theta_left, self.theta_left + self.total),
                max(self.theta_left, self.theta_left + self.total),
                float(np.min(self._spline(np.linspace(*self._raw_support, 4001)))),
                float(np.max(self._spline(np.linspace(*self._raw_support, 4001)))))


def bump_profile(width=2.0, shape=None, center=0.0, skew=0.0, amplitude=1.0):
    """Single-dip profile ``theta0' = -amplitude * b(z/w) (1 - s z^2/2 + q z^3)``.

    With ``shape=None`` the shape is chosen so that near the dip
    ``theta0' = -amplitude (1 - z^2/2) + O(z^3)``.
    """
    if shape is None:
        shape = 1.0 - 2.0 / width ** 2
    comp = BumpComponent(center=center, width=width, height=-amplitude,
                         shape=shape, skew=skew)
    return SlopeProfile([comp])


# ---------------------------------------------------------------- curves

@dataclass(frozen=True)
class IntegralCurve:
    """Integral curve ``Xi' = r_I0(Xi)`` on ``[-a, a]``."""

    system: object
    s: np.ndarray
    states: np.ndarray
    tangents: np.ndarray
    lam: np.ndarray
    rate: np.ndarray
    a: float
    h_ode: float

    def __post_init__(self):
        object.__setattr__(self, "_xi", CubicHermiteSpline(self.s, self.states, self.tangents))
        # d lam / d s = rate, so the speed interpolant is Hermite as well
        object.__setattr__(self, "_lam", CubicHermiteSpline(self.s, self.lam, self.rate))
        object.__setattr__(self, "_rate", CubicSpline(self.s, self.rate))

    def __call__(self, s):
        return self._xi(np.clip(s, -self.a, self.a))

    def speed(self, s):
        """Shocking eigenvalue along the curve."""
        return self._lam(np.clip(s, -self.a, self.a))

    def steepening(self, s):
        """``dlam_S R^S_I0`` along the curve."""
        return self._rate(np.clip(s, -self.a, self.a))

    def residual(self) -> float:
        """Max ``|Xi' - r_I0(Xi)|`` at the cell midpoints."""
        mid = 0.5 * (self.s[1:] + self.s[:-1])
        i0 = self.system.shock_index
        spec = eigendecompose(self.system, self._xi(mid))
        return float(np.max(np.abs(self._xi(mid, 1) - spec.R[..., :, i0])))


def integrate_state_curve(system, anchor, a, h_ode=1e-3) -> IntegralCurve:
    """Integrate ``Xi' = r_I0(Xi)`` from ``anchor`` over ``[-a, a]`` with RK4.

    Raises
    ------
    BoxExit
        If the curve leaves the system's box.
    """
    anchor = np.asarray(anchor, dtype=float)
    system.require_in_box(anchor, "curve anchor")
    i0 = system.shock_index
    n = max(1, int(np.ceil(a / h_ode)))
    h = a / n

    def field(psi, ref):
        spec = eigendecompose(system, psi, ref=ref)
        return spec.R[:, i0], spec.R

    def sweep(sign):
        psi = anchor.copy()
        ref = eigendecompose(system, psi).R
        out = [psi.copy()]
        step = sign * h
        for _ in range(n):
            k1, ref = field(psi, ref)
            k2, _ = field(psi + 0.5 * step * k1, ref)
            k3, _ = field(psi + 0.5 * step * k2, ref)
            k4, _ = field(psi + step * k3, ref)
            psi = psi + step / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
            if not system.in_box(psi):
                raise BoxExit(f"integral curve left the box at s = {sign * h * len(out):.4f}")
            out.append(psi.copy())
        return np.array(out)

    fwd = sweep(1.0)
    bwd = sweep(-1.0)
    states = np.vstack([bwd[::-1], fwd[1:]])
    s = np.linspace(-a, a, 2 * n + 1)
    tens = compute_xi(system, states)
    # tangents follow the continuous frame along the curve
    tangents = tens.R[:, :, i0]
    flip = np.sign(np.sum(tangents * np.gradient(states, s, axis=0), axis=1))
    tangents = tangents * np.where(flip < 0, -1.0, 1.0)[:, None]
    rate = tens.dlam_r[:, i0, i0] * np.where(flip < 0, -1.0, 1.0)
    return IntegralCurve(system, s, states, tangents, tens.lam[:, i0], rate,
                         float(a), float(h))


# ---------------------------------------------------------------- waves

@dataclass(frozen=True)
class MildCertificate:
    passed: bool
    clause: str
    u1: float = float("nan")
    u2: float = float("nan")
    eta: float = float("nan")
    delta1: float = float("nan")
    delta2: float = float("nan")


@dataclass(frozen=True)
class StrongCertificate:
    passed: bool
    argmin: float
    min_value: float
    third_derivative: float
    second_min_gap: float


@dataclass(frozen=True)
class SimpleWave:
    """Background wave ``Theta = Xi(theta)`` with profile ``theta(0, .)``."""

    system: object
    curve: IntegralCurve
    profile: SlopeProfile
    t_star: float
    normalized: bool
    min_rate: float
    argmin: float
    certificates: dict = field(default_factory=dict)

    # eikonal-coordinate fields (exact for the background)
    def state0(self, u):
        return self.curve(self.profile.theta(u))

    def speed0(self, u):
        """Shocking speed ``lam(Theta(0, u))``."""
        return self.curve.speed(self.profile.theta(u))

    def rate0(self, u):
        """Initial ``L mu = dlam_S R^S_I0 d_x theta`` (also ``d_u`` of the speed)."""
        th = self.profile.theta(u)
        return self.curve.steepening(th) * self.profile.dtheta(u)

    def mu(self, tau, u):
        return 1.0 + np.asarray(tau, dtype=float) * self.rate0(u)

    def x(self, tau, u):
        return np.asarray(u, dtype=float) + np.asarray(tau, dtype=float) * self.speed0(u)

    def support(self):
        return self.profile.support

    def realized_states(self, m=401):
        lo, hi = self.profile.support
        return self.state0(np.linspace(lo, hi, m))

    def label(self, t, x, tol=1e-12, max_iter=200):
        """Eikonal label ``u`` of the physical point ``(t, x)`` for ``t < t*``.

        Solves ``x = u + t lam(Theta(0, u))`` by bisection; the map is strictly
        increasing in ``u`` before the shock time.
        """
        t = np.asarray(t, dtype=float)
        x = np.asarray(x, dtype=float)
        t, x = np.broadcast_arrays(t, x)
        lo_s, hi_s = self.profile.support
        grid = np.linspace(lo_s, hi_s, 2001)
        sp = self.speed0(grid)
        lam_lo, lam_hi = float(sp.min()), float(sp.max())
        lo = x - np.maximum(t * lam_hi, t * lam_lo) - 1e-9
        hi = x - np.minimum(t * lam_hi, t * lam_lo) + 1e-9
        for _ in range(max_iter):
            mid = 0.5 * (lo + hi)
            f = mid + t * self.speed0(mid) - x
            lo = np.where(f < 0, mid, lo)
            hi = np.where(f < 0, hi, mid)
            if np.max(hi - lo) < tol:
                break
        return 0.5 * (lo + hi)

    def evaluate(self, t, x):
        """Exact state ``Theta(t, x)`` via characteristics (``t < t*``)."""
        return self.state0(self.label(t, x))


def _minimize_rate(rate, lo, hi, m=20001):
    grid = np.linspace(lo, hi, m)
    vals = rate(grid)
    k = int(np.argmin(vals))
    a = grid[max(k - 1, 0)]
    b = grid[min(k + 1, m - 1)]
    res = minimize_scalar(lambda u: float(rate(np.array([u]))[0]), bounds=(a, b),
                          method="bounded", options={"xatol": 1e-12})
    if res.fun <= vals[k]:
        return float(res.x), float(res.fun)
    return float(grid[k]), float(vals[k])


def build_simple_wave(system, curve, profile, normalize=True) -> SimpleWave:
    """Simple wave from an integral curve and a raw profile.

    With ``normalize`` the profile is stretched in ``u`` (range unchanged)
    so that ``min_u L mu(0, u) = -1`` and the shock time is exactly one.

    Raises
    ------
    NoShock
        If the steepening rate is nonnegative everywhere.
    BoxExit
        If the profile range does not fit on the curve.
    """
    _, _, tmin, tmax = profile.range()
    if tmin < -curve.a - 1e-12 or tmax > curve.a + 1e-12:
        raise BoxExit("profile range exceeds the integral curve parameter interval")

    def rate(u, prof=profile):
        return curve.steepening(prof.theta(u)) * prof.dtheta(u)

    lo, hi = profile.support
    u_min, m = _minimize_rate(rate, lo, hi)
    if not m < 0:
        raise NoShock("steepening rate is nonnegative everywhere")
    if normalize:
        k = -m
        profile = profile.stretched(k)
        return SimpleWave(system, curve, profile, 1.0, True, -1.0, u_min * k)
    return SimpleWave(system, curve, profile, -1.0 / m, False, m, u_min)


def shock_time(wave: SimpleWave) -> float:
    """Closed-form first shock time ``-1 / min_u L mu(0, u)``."""
    return float(wave.t_star)


def check_nondegeneracy(wave: SimpleWave, kind="mild", eta=0.5, delta1=0.1, delta2=0.1,
                        n_u=8001, n_tau=201, margin=1e-2):
    """Mild or strong nondegeneracy certificate for a simple wave.

    Parameters
    ----------
    wave : SimpleWave
    kind : {"mild", "strong"}
    eta, delta1, delta2 : float
        Mild-condition parameters, ``delta2`` in ``(0, 1/10]``.
    margin : float
        Strong condition: required relative gap between the lowest and the
        second-lowest local minimum of the steepening rate.

    Raises
    ------
    CertificateFailure
        With ``clause`` naming the violated requirement.
    """
    lo, hi = wave.support()
    if kind == "mild":
        if not 0 < delta2 <= 0.1:
            raise ValueError("delta2 must lie in (0, 1/10]")
        if wave.system.is_extremal:
            return MildCertificate(True, "extremal", eta=eta, delta1=delta1, delta2=delta2)
        u = np.linspace(lo - delta1, hi + delta1, n_u)
        rate = wave.rate0(u)
        taus = np.linspace(0.0, wave.t_star + delta1, n_tau)
        mu_min = np.min(1.0 + taus[:, None] * rate[None, :], axis=0)
        bad = u[mu_min < delta2]
        if bad.size == 0:
            raise CertificateFailure("mu never drops below delta2: no shock window", "no-window")
        u1, u2 = float(bad.min()), float(bad.max())
        if u2 - u1 > 2 * eta:
            raise CertificateFailure(
                f"low-mu interval [{u1:.4f}, {u2:.4f}] wider than 2*eta = {2 * eta}", "width")
        near = (u >= u1 - delta1) & (u <= u2 + delta1)
        bound = 0.75 * float(rate.min())
        if np.any(rate[near] > bound):
            raise CertificateFailure(
                f"L mu exceeds 3/4 inf L mu = {bound:.4f} near the window", "rate")
        return MildCertificate(True, "window", u1, u2, eta, delta1, delta2)
    if kind != "strong":
        raise ValueError(f"unknown kind {kind!r}")
    u = np.linspace(lo, hi, n_u)
    rate = wave.rate0(u)
    umin, vmin = _minimize_rate(wave.rate0, lo, hi, n_u)
    interior = (rate[1:-1] <= rate[:-2]) & (rate[1:-1] < rate[2:]) & (rate[1:-1] < 0)
    local = np.sort(rate[1:-1][interior])
    gap = float(local[1] - local[0]) if local.size > 1 else float("inf")
    if gap <= margin * abs(vmin):
        raise CertificateFailure(
            f"steepening rate has competing minima (gap {gap:.3e})", "unique-minimum")
    h = 1e-3
    f = wave.rate0(umin + h * np.arange(-2, 3))
    third = float((-f[4] + 16 * f[3] - 30 * f[2] + 16 * f[1] - f[0]) / (12 * h * h))
    if not third > 0:
        raise CertificateFailure(f"third derivative {third:.3e} not positive", "third-derivative")
    return StrongCertificate(True, umin, vmin, third, gap)


def with_certificates(wave: SimpleWave, **certs) -> SimpleWave:
    merged = dict(wave.certificates)
    merged.update(certs)
    return replace(wave, certificates=merged)
