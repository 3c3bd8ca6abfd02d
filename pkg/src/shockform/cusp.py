"""Cubic cusp profile near the preshock and its polynomial correctors.

In the normalized frame (preshock at the origin, zero speed) the leading
profile is the root ``U`` of ``b0 U^3 + a0 |t| U = x`` for ``t <= 0``, with
``M = 1 / (a0|t| + 3 b0 U^2)`` and the homogeneous distance ``D = M^(-1/2)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, IllConditionedFit, InsufficientShells
from .spectral import compute_xi
from .systems import GaugeParams


def cubic_root(a0, b0, t, x, tol=1e-15, max_iter=60):
    """Real root of ``b0 U^3 + a0 |t| U - x = 0``.

    Cardano seed, then Newton safeguarded by the bracket
    ``0 <= |U| <= min(|x| / (a0|t|), (|x| / b0)^(1/3))``.
    """
    t, x = np.broadcast_arrays(np.asarray(t, dtype=float), np.asarray(x, dtype=float))
    p = a0 * np.abs(t) / b0
    q = -x / b0
    disc = np.sqrt((q / 2) ** 2 + (p / 3) ** 3)
    # the sum of cube roots cancels badly when p dominates; use the stable pair
    w = np.cbrt(np.abs(q) / 2 + disc)
    with np.errstate(divide="ignore", invalid="ignore"):
        seed = np.where(w > 0, w - p / (3 * w), 0.0)
    u = np.sign(x) * seed
    ax = np.abs(x)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        lin = np.where(p > 0, ax / (a0 * np.abs(t)), np.inf)
    bound = np.minimum(lin, np.cbrt(ax) / np.cbrt(b0))
    lo = np.where(x >= 0, 0.0, -bound)
    hi = np.where(x >= 0, bound, 0.0)
    u = np.clip(u, lo, hi)
    for _ in range(max_iter):
        f = b0 * u ** 3 + a0 * np.abs(t) * u - x
        lo = np.where(f < 0, u, lo)
        hi = np.where(f > 0, u, hi)
        df = 3 * b0 * u ** 2 + a0 * np.abs(t)
        with np.errstate(divide="ignore", invalid="ignore"):
            step = np.where(df > 0, f / df, 0.0)
        new = u - step
        # a flat spot (df = 0 off the root) cannot move Newton; bisect instead
        outside = (new < lo) | (new > hi) | ~np.isfinite(new) | ((df <= 0) & (f != 0))
        new = np.where(outside, 0.5 * (lo + hi), new)
        if np.all(np.abs(new - u) <= tol * np.maximum(1.0, np.abs(new))):
            u = new
            break
        u = new
    return u


@dataclass(frozen=True)
class CuspModel:
    """Leading-order cusp with modulation constants ``a0, b0 > 0``."""

    a0: float
    b0: float
    gauge: GaugeParams = field(default_factory=GaugeParams)

    def __post_init__(self):
        if not (self.a0 > 0 and self.b0 > 0):
            raise ValueError("a0 and b0 must be positive")


def cusp_eval(model: CuspModel, t, x):
    """``(U, M, D)`` at ``(t, x)``, ``t <= 0``.

    Raises
    ------
    DomainError
        If any ``t > 0``.
    """
    t = np.asarray(t, dtype=float)
    if np.any(t > 0):
        raise DomainError("the cusp profile is defined for t <= 0")
    U = cubic_root(model.a0, model.b0, t, x)
    denom = model.a0 * np.abs(t) + 3 * model.b0 * U ** 2
    with np.errstate(divide="ignore", over="ignore"):
        M = 1.0 / denom
    D = np.sqrt(denom)
    if U.ndim == 0:
        return float(U), float(M), float(D)
    return U, M, D


def dyadic_shells(d_min=1e-3, d_max=1e-1):
    """``[(d_max 2^-k-1, d_max 2^-k)]`` down to ``d_min``."""
    shells = []
    hi = d_max
    while hi / 2 >= d_min * (1 - 1e-12):
        shells.append((hi / 2, hi))
        hi /= 2
    return shells


def _samples(traj, t_max=0.0):
    """Flatten all live nodes of snapshots with ``t < t_max`` into point lists."""
    ks = np.nonzero(traj.tau < t_max)[0]
    n = traj.u.size
    t = np.repeat(traj.tau[ks], n)
    u = np.tile(traj.u, ks.size)
    x = traj.x[ks].reshape(-1)
    mu = traj.mu[ks].reshape(-1)
    psi = traj.psi[ks].reshape(-1, traj.psi.shape[-1])
    live = traj.alive[ks].reshape(-1) & (mu > 0)
    return t[live], u[live], x[live], mu[live], psi[live]


@dataclass
class ShellReport:
    d_lo: float
    d_hi: float
    count: int
    ratio_u: float
    ratio_mu: float
    psi_coeff: float
    psi_coeff_relerr: float
    corridor: float

    def to_dict(self):
        return dict(self.__dict__)


@dataclass
class LeadingOrderReport:
    shells: list
    expected_coeff: float
    bounded: bool
    finest_relerr: float

    def to_dict(self):
        return {"shells": [s.to_dict() for s in self.shells],
                "expected_coeff": self.expected_coeff, "bounded": self.bounded,
                "finest_relerr": self.finest_relerr}


def validate_leading_order(traj, model: CuspModel, system, shells=None, min_points=10,
                           r_max=0.5) -> LeadingOrderReport:
    """Compare the normalized trajectory with the cusp on dyadic ``D`` shells.

    Per shell: ``sup |u - U| / D^2``, ``sup |1/mu - M| D``, the least-squares
    coefficient of ``psi^I0`` against ``U`` compared with
    ``-a0 / (d lam / d r_I0)(0)``, and the corridor constant ``c`` with
    ``|U| in [1/c, c] min(|x|^(1/3), |x|/|t|)``.

    Shells are kept when they hold ``min_points`` samples and are not finer
    than the grid spacing. ``bounded`` means max over shells <= 2 x median of
    ``sup |u - U| / D^2``.

    Raises
    ------
    InsufficientShells
        If fewer than three shells are resolvable.
    """
    shells = dyadic_shells() if shells is None else shells
    t, u, x, mu, psi = _samples(traj)
    keep = np.abs(u) <= r_max
    t, u, x, mu, psi = t[keep], u[keep], x[keep], mu[keep], psi[keep]
    U, M, D = cusp_eval(model, t, x)
    i0 = system.shock_index
    tens = compute_xi(system, np.zeros(system.n))
    slope = float(tens.dlam_r[i0, i0])
    expected = -model.a0 / slope
    psi0 = psi @ tens.L[i0]
    reports = []
    for lo, hi in shells:
        if lo < traj.h:
            continue
        s = (D >= lo) & (D < hi)
        if s.sum() < min_points:
            continue
        coeff = float(np.sum(psi0[s] * U[s]) / np.sum(U[s] ** 2))
        xs = np.abs(x[s])
        nz = xs > 0
        with np.errstate(divide="ignore"):
            scale = np.minimum(np.cbrt(xs[nz]), np.where(t[s][nz] < 0, xs[nz] / np.abs(t[s][nz]), np.inf))
        r = np.abs(U[s][nz]) / scale
        corridor = float(max(r.max(), 1 / r.min())) if r.size else float("nan")
        reports.append(ShellReport(
            lo, hi, int(s.sum()),
            float(np.max(np.abs(u[s] - U[s]) / D[s] ** 2)),
            float(np.max(np.abs(1 / mu[s] - M[s]) * D[s])),
            coeff, abs(coeff - expected) / abs(expected), corridor))
    if len(reports) < 3:
        raise InsufficientShells(f"only {len(reports)} resolvable shells")
    ratios = np.array([r.ratio_u for r in reports])
    bounded = bool(ratios.max() <= 2 * np.median(ratios))
    finest = min(reports, key=lambda r: r.d_lo)
    return LeadingOrderReport(reports, expected, bounded, finest.psi_coeff_relerr)


@dataclass
class CorrectorSet:
    """First correction ``u = U - M (c20 t^2 + c12 t U^2 + c04 U^4) + ...``.

    The leading term is ``U`` itself with unit coefficient.
    """

    c20: float
    c12: float
    c04: float
    fit_shell: tuple
    condition: float
    residuals: list

    @property
    def leading(self):
        return {"U": 1.0}

    def to_dict(self):
        return {"c20": self.c20, "c12": self.c12, "c04": self.c04,
                "fit_shell": list(self.fit_shell), "condition": self.condition,
                "residuals": self.residuals}


def _basis(t, U):
    return np.column_stack([t ** 2, t * U ** 2, U ** 4])


def fit_corrector_samples(t, u, x, model: CuspModel, fit_shell, shells=(), max_cond=1e8):
    """Least-squares corrector fit on explicit samples ``(t, u, x)``."""
    U, M, D = cusp_eval(model, t, x)
    v = u - U
    s = (D >= fit_shell[0]) & (D < fit_shell[1])
    A = _basis(t[s], U[s])
    if s.sum() < 3:
        raise IllConditionedFit("fewer than three samples in the fit annulus")
    cond = float(np.linalg.cond(A))
    if not np.isfinite(cond) or cond > max_cond:
        raise IllConditionedFit(f"design matrix condition {cond:.3e} > {max_cond:.1e}")
    coef = np.linalg.lstsq(A, v[s] / M[s], rcond=None)[0]
    c = -coef
    residuals = []
    for lo, hi in shells:
        m = (D >= lo) & (D < hi)
        if m.sum() == 0:
            continue
        post = v[m] + M[m] * (_basis(t[m], U[m]) @ c)
        residuals.append({"d_lo": lo, "d_hi": hi, "pre": float(np.max(np.abs(v[m]) / D[m] ** 3)),
                          "post": float(np.max(np.abs(post) / D[m] ** 3))})
    return CorrectorSet(float(c[0]), float(c[1]), float(c[2]), tuple(fit_shell), cond, residuals)


def fit_correctors(traj, model: CuspModel, h_max=2, fit_shell=(0.05, 0.1), shells=None,
                   r_max=0.5) -> CorrectorSet:
    """Fit the homogeneity-4 corrector ``v = u - U`` over one ``D`` annulus.

    The fit is to ``v / M`` (equalizes the weights across the annulus) with
    the basis ``{t^2, t U^2, U^4}``; per finer shell the pre- and post-fit
    residuals divided by ``D^3`` are reported.

    Raises
    ------
    IllConditionedFit
        If the design matrix condition number exceeds ``1e8``.
    """
    if h_max > 3:
        raise ValueError("correctors beyond the third are not supported")
    shells = dyadic_shells() if shells is None else shells
    shells = [s for s in shells if s[0] >= traj.h]
    t, u, x, _, _ = _samples(traj)
    keep = np.abs(u) <= r_max
    return fit_corrector_samples(t[keep], u[keep], x[keep], model, fit_shell, shells)
