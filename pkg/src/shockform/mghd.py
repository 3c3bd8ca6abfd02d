"""Future boundary of the maximal development in a box.

``mu_star(p)`` is the minimum of ``mu`` over the causal past of ``p`` above a
trapezoidal initial curve; its zero set, truncated at the box time, is the
boundary. Where ``d_tau mu <= -1/2`` the minimum is attained on the two
past extremal characteristics through ``p``, which is what the fast path
evaluates.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import AmbiguousClass, CertificateFailure, DomainExit, ResolutionLoss
from .eikonal import Trajectory

CLASSES = ("preshock", "singular", "cauchy", "extensible")


@dataclass
class CausalConfig:
    """Region and tolerances for the development boundary.

    The region is ``tau >= base + S(u - center)`` with the trapezoid
    ``S(v) = 0`` for ``|v| <= eta``, rising with slope ``delta2/(1+lam_star)``
    over ``delta1`` and flat beyond.
    """

    eta: float = 0.5
    delta1: float = 0.2
    delta2: float = 0.1
    lam_star: Optional[float] = None
    base: float = 0.8
    center: float = 0.0
    t_box: float = 1.1
    trace_step: Optional[float] = None
    cert_bound: float = -0.5
    ladder_top: float = 0.05
    ladder_rungs: int = 6
    band: Optional[tuple] = None
    tau_lo: Optional[float] = None
    lip_scale: float = 1e-3
    n_columns: int = 161
    n_levels: int = 241
    mu_zero_factor: float = 3.0
    dmu_zero_factor: float = 1e-2

    def __post_init__(self):
        if self.delta2 > 0.1:
            raise ValueError("delta2 must not exceed 1/10")

    def trapezoid(self, u):
        v = np.abs(np.asarray(u, dtype=float) - self.center)
        slope = self.delta2 / (1.0 + (self.lam_star or 0.0))
        return slope * np.clip(v - self.eta, 0.0, self.delta1)

    def floor(self, u):
        return self.base + self.trapezoid(u)


def speed_spread(traj: Trajectory) -> float:
    """``max_I sup |lam_I - lam|`` over the stored run."""
    i0 = traj.system.shock_index
    return float(np.max(np.abs(traj.lam - traj.lam[..., i0:i0 + 1])))


def check_spacelike(traj: Trajectory, cfg: CausalConfig) -> bool:
    """The trapezoid slope stays below every non-shocking ``|dtau/du|``."""
    i0 = traj.system.shock_index
    gap = np.abs(np.delete(traj.lam, i0, axis=-1) - traj.lam[..., i0:i0 + 1])
    ok = traj.alive[..., None] & (traj.mu[..., None] > 0)
    steep = np.min((traj.mu[..., None] / gap)[ok & (traj.mu[..., None] > cfg.delta2)])
    slope = cfg.delta2 / (1.0 + (cfg.lam_star or speed_spread(traj)))
    return bool(slope < steep)


# ---------------------------------------------------------------- tracing

def _slope(traj, I, tau, u):
    """``dtau/du = mu / (lam_I - lam)`` and ``mu`` at the points."""
    i0 = traj.system.shock_index
    mu = traj.interp("mu", tau, u)
    lam = traj.interp("lam", tau, u)
    return np.maximum(mu, 0.0) / (lam[:, I] - lam[:, i0]), mu


def _vertex(m0, m1, m2):
    """Minimum of the parabola through three equally spaced values when its
    vertex lies within their span; ``inf`` elsewhere."""
    curv = m0 - 2.0 * m1 + m2
    with np.errstate(divide="ignore", invalid="ignore"):
        sv = (m0 - m2) / (2.0 * curv)
        v = m1 - (m2 - m0) ** 2 / (8.0 * curv)
    ok = (curv > 0) & (np.abs(sv) <= 1.0) & np.isfinite(v)
    return np.where(ok, v, np.inf)


def _trace_many(traj, I, tau, u, floor_fn, step, past=True, record=False, max_steps=20000):
    """Trace ``L_I`` characteristics from many points until ``tau <= floor(u)``.

    RK4 in ``u`` with ``u-dot = sgn(lam - lam_I)`` for past curves. Returns
    the minimum of ``mu`` along each curve (including the start, refined
    parabolically between samples) and, if ``record``, the list of
    ``(tau, u, mu, dtau/du)`` sample arrays.
    """
    tau = np.array(tau, dtype=float)
    u = np.array(u, dtype=float)
    lo, hi = traj.u[0], traj.u[-1]
    k0, mu0 = _slope(traj, I, tau, u)
    sgn = -np.sign(k0) if past else np.sign(k0)
    best = mu0.copy()
    dtau_max = np.full_like(tau, -np.inf)  # largest d_tau mu seen along the curve
    frozen = 2.0 * traj.config.mu_stop
    samples = [(tau.copy(), u.copy(), mu0.copy(), k0.copy())] if record else None
    m_prev = np.stack([np.full_like(tau, np.nan), mu0])
    start = tau > floor_fn(u) if past else tau < floor_fn(u)
    active = start & (mu0 > frozen)
    exits = np.zeros(tau.shape, dtype=bool)

    def f(tq, uq):
        return _slope(traj, I, tq, uq)[0]

    for _ in range(max_steps):
        if not active.any():
            break
        a = np.nonzero(active)[0]
        t_a, u_a, s_a = tau[a], u[a], sgn[a]
        du = s_a * step
        c1 = f(t_a, u_a)
        c2 = f(t_a + 0.5 * du * c1, u_a + 0.5 * du)
        c3 = f(t_a + 0.5 * du * c2, u_a + 0.5 * du)
        c4 = f(t_a + du * c3, u_a + du)
        t_n = t_a + du / 6.0 * (c1 + 2 * c2 + 2 * c3 + c4)
        u_n = u_a + du
        fl = floor_fn(u_n)
        below = t_n <= fl if past else t_n >= fl
        if below.any():
            # land on the floor by linear interpolation within the step
            g0 = t_a - floor_fn(u_a)
            g1 = t_n - fl
            w = np.where(below, g0 / np.where(g0 != g1, g0 - g1, 1.0), 1.0)
            w = np.clip(w, 0.0, 1.0)
            t_n = np.where(below, t_a + w * (t_n - t_a), t_n)
            u_n = np.where(below, u_a + w * du, u_n)
        out = (u_n < lo) | (u_n > hi)
        u_n = np.clip(u_n, lo, hi)
        mu_n = traj.interp("mu", t_n, u_n)
        best[a] = np.minimum(best[a], mu_n)
        # interior minimum between samples; the last step may be short
        full = ~(below | out)
        vx = _vertex(m_prev[0, a], m_prev[1, a], np.where(full, mu_n, np.nan))
        best[a] = np.minimum(best[a], vx)
        m_prev[0, a], m_prev[1, a] = m_prev[1, a], mu_n
        dmu = traj.interp("mu", t_n + 1e-3, u_n) - traj.interp("mu", t_n - 1e-3, u_n)
        # frozen nodes lie outside the development and carry no rate
        dtau_max[a] = np.where(mu_n > frozen, np.maximum(dtau_max[a], dmu / 2e-3), dtau_max[a])
        tau[a], u[a] = t_n, u_n
        if record:
            mu_rec = np.full_like(tau, np.nan)
            k_rec = np.full_like(tau, np.nan)
            mu_rec[a] = mu_n
            k_rec[a] = f(t_n, u_n)
            samples.append((tau.copy(), u.copy(), mu_rec, k_rec))
        # once the curve meets a frozen node the minimum is already zero
        done = below | out | (best[a] <= frozen)
        exits[a[out]] = True
        active[a[done]] = False
    return best, dtau_max, exits, samples


def trace_characteristic(traj: Trajectory, I: int, p, direction="past", floor=None,
                         step=None) -> dict:
    """Integral curve of ``L_I`` through ``p = (tau, u)``.

    For the shocking field this is the vertical line ``u = const``; other
    fields are integrated in ``u``. Past curves stop at ``floor`` (a
    function of ``u``, default the initial slice), future curves at the last
    stored level.

    Returns
    -------
    dict with arrays ``tau, u, mu, x``

    Raises
    ------
    DomainExit
        If the curve leaves the ``u`` grid; ``face`` is ``"left"`` or ``"right"``.
    """
    tau0, u0 = float(p[0]), float(p[1])
    past = direction == "past"
    if floor is None:
        t_first, t_last = traj.tau[0], traj.tau[-1]
        floor = (lambda u: np.full_like(np.asarray(u, dtype=float), t_first)) if past else (
            lambda u: np.full_like(np.asarray(u, dtype=float), t_last))
    if I == traj.system.shock_index:
        end = float(floor(np.array([u0]))[0])
        ts = traj.tau[(traj.tau > min(end, tau0)) & (traj.tau < max(end, tau0))]
        ts = np.concatenate([[tau0], ts[::-1] if past else ts, [end]])
        us = np.full_like(ts, u0)
    else:
        step = traj.h / 4 if step is None else step
        _, _, exits, samples = _trace_many(traj, I, [tau0], [u0], floor, step, past=past,
                                           record=True)
        ts = np.array([s[0][0] for s in samples])
        us = np.array([s[1][0] for s in samples])
        if exits[0]:
            face = "left" if us[-1] <= traj.u[0] else "right"
            raise DomainExit(f"characteristic {I} left the grid", face)
    mu = traj.interp("mu", ts, us)
    x = traj.interp("x", ts, us)
    return {"tau": ts, "u": us, "mu": mu, "x": x}


# ---------------------------------------------------------------- mu_star

@dataclass
class MuStar:
    """``mu_star`` and ``mu_tilde = min(mu_star, t_box - tau)`` at query points.

    ``certified`` marks points whose swept region satisfied
    ``d_tau mu <= cert_bound``; ``max_dtau_mu`` is the largest rate seen.
    """

    tau: np.ndarray
    u: np.ndarray
    mu_star: np.ndarray
    mu_tilde: np.ndarray
    certified: np.ndarray
    max_dtau_mu: np.ndarray
    exits: np.ndarray


def _vertical(traj, tau, u, floor_fn, chunk=4000):
    """Min of ``mu`` and max of ``d_tau mu`` on ``{u} x [floor(u), tau]``."""
    best = np.empty(tau.size)
    rate = np.full(tau.size, -np.inf)
    fl = floor_fn(u)
    levels = traj.tau
    for s in range(0, tau.size, chunk):
        sl = slice(s, s + chunk)
        tq, uq, fq = tau[sl], u[sl], fl[sl]
        lo = np.searchsorted(levels, fq.min())
        hi = np.searchsorted(levels, tq.max(), side="right")
        lv = levels[max(lo - 1, 0):hi]
        T = np.concatenate([lv[None, :].repeat(tq.size, 0), tq[:, None], fq[:, None]], axis=1)
        T = np.clip(T, fq[:, None], tq[:, None])
        T.sort(axis=1)
        U = np.broadcast_to(uq[:, None], T.shape)
        M = traj.interp("mu", T.ravel(), U.ravel()).reshape(T.shape)
        best[sl] = M.min(axis=1)
        dT = np.diff(T, axis=1)
        dM = np.diff(M, axis=1)
        live = np.minimum(M[:, 1:], M[:, :-1]) > 2.0 * traj.config.mu_stop
        with np.errstate(divide="ignore", invalid="ignore"):
            r = np.where((dT > 1e-9) & live, dM / dT, -np.inf)
        rate[sl] = r.max(axis=1)
    return best, rate


def mu_star(traj: Trajectory, cfg: CausalConfig, tau, u, step=None) -> MuStar:
    """Two-characteristic evaluation of ``mu_star`` at points ``(tau, u)``.

    The minimum of ``mu`` is taken over the past shocking line and the past
    slowest and fastest characteristics, each down to the floor of the
    region. The reduction is valid where ``d_tau mu <= cert_bound`` on the
    swept set, which is recorded per point.
    """
    tau = np.atleast_1d(np.asarray(tau, dtype=float))
    u = np.atleast_1d(np.asarray(u, dtype=float))
    step = step or cfg.trace_step or traj.h / 4
    n = traj.system.n
    i0 = traj.system.shock_index
    best, rate = _vertical(traj, tau, u, cfg.floor)
    exits = np.zeros(tau.size, dtype=bool)
    frozen = 2.0 * traj.config.mu_stop
    # points whose shocking line already meets frozen nodes have mu_star ~ 0
    go = np.nonzero(best > frozen)[0]
    for I in sorted({0, n - 1} - {i0}):
        b, r, e, _ = _trace_many(traj, I, tau[go], u[go], cfg.floor, step, past=True)
        best[go] = np.minimum(best[go], b)
        rate[go] = np.maximum(rate[go], r)
        exits[go] |= e
    below = tau <= cfg.floor(u)
    mu_p = traj.interp("mu", tau, u)
    best = np.where(below, mu_p, best)
    mstar = np.maximum(best, 0.0)
    return MuStar(tau, u, mstar, np.minimum(mstar, cfg.t_box - tau),
                  (rate <= cfg.cert_bound) & ~exits, rate, exits)


def require_certificate(ms: MuStar, cfg: CausalConfig):
    """Raise if any query point lacks the monotonicity certificate."""
    bad = ~ms.certified
    if bad.any():
        raise CertificateFailure(
            f"{int(bad.sum())} points with d_tau mu above {cfg.cert_bound} in the swept region",
            "L-mu")


def _curve(samples, idx):
    """Recorded curve ``idx`` as ``(u, tau, dtau/du)`` sorted in ``u``."""
    t = np.array([s[0][idx] for s in samples])
    uu = np.array([s[1][idx] for s in samples])
    k = np.array([s[3][idx] for s in samples])
    # samples after the curve stopped repeat the last point
    keep = np.concatenate([[True], (np.diff(uu) != 0) | (np.diff(t) != 0)])
    t, uu, k = t[keep], uu[keep], k[keep]
    order = np.argsort(uu)
    return uu[order], t[order], k[order]


def mu_star_bruteforce(traj: Trajectory, cfg: CausalConfig, tau, u, n_levels=40,
                       n_width=1200, step=None, refine=8):
    """Dense minimization of ``mu`` over the causal past above the floor.

    The past set is the part of the strip above the floor and under the
    traced extremal characteristics (or the shocking line ``u = u_p`` when
    the shocking field is itself extremal). It is filled with ``n_width``
    columns in ``u`` and ``n_levels`` levels per column, the top level lying
    on the curve (cubic Hermite between traced samples).

    A second value minimizes over the wider cone
    ``x in [x_p - lam_max dt, x_p - lam_min dt]`` with the extreme speeds of
    the whole run, on every stored level and a ``refine``-times finer ``u``
    grid; it is a lower bound of the first up to interpolation error.

    Returns
    -------
    (local_min, global_lower_bound) arrays
    """
    from scipy.interpolate import CubicHermiteSpline

    tau = np.atleast_1d(np.asarray(tau, dtype=float))
    u = np.atleast_1d(np.asarray(u, dtype=float))
    step = step or cfg.trace_step or traj.h / 4
    n = traj.system.n
    i0 = traj.system.shock_index
    frozen = 2.0 * traj.config.mu_stop
    curves = {}
    for I in sorted({0, n - 1} - {i0}):
        curves[I] = _trace_many(traj, I, tau, u, cfg.floor, step, past=True, record=True)[3]
    lam_min = float(traj.lam[..., 0].min())
    lam_max = float(traj.lam[..., -1].max())
    local, glob = np.empty(tau.size), np.empty(tau.size)
    s = np.linspace(0.0, 1.0, n_levels)
    for p in range(tau.size):
        mu_p = float(traj.interp("mu", tau[p], u[p])[0])
        if mu_p <= frozen:
            local[p] = glob[p] = max(mu_p, 0.0)
            continue
        pieces = [np.array([u[p]])]
        ceil = [np.array([tau[p]])]
        for samples in curves.values():
            cu, ct, ck = _curve(samples, p)
            if cu.size < 2:
                continue
            spl = CubicHermiteSpline(cu, ct, ck)
            uu = np.linspace(cu[0], cu[-1], n_width)
            pieces.append(uu)
            ceil.append(spl(uu))
        U0 = np.concatenate(pieces)
        C = np.concatenate(ceil)
        F = cfg.floor(U0)
        ok = C >= F
        U0, C, F = U0[ok], C[ok], F[ok]
        T = F[:, None] + s[None, :] * (C - F)[:, None]
        U = np.broadcast_to(U0[:, None], T.shape)
        M = traj.interp("mu", T.ravel(), U.ravel())
        local[p] = max(float(M.min()), 0.0)
        glob[p] = max(_cone_min(traj, cfg, tau[p], u[p], lam_min, lam_max, refine), 0.0)
    return local, glob


def _cone_min(traj, cfg, tp, up, lam_min, lam_max, refine):
    """Min of ``mu`` over the extreme-speed cone of ``(tp, up)``.

    Levels are ``refine`` times finer than the stored ones and ``u``
    likewise; on each level both cone edges are also solved for exactly
    (``x`` is increasing in ``u`` on live nodes).
    """
    xp = float(traj.interp("x", tp, up)[0])
    best = float(traj.interp("mu", tp, up)[0])
    dt_lv = traj.config.dtau / refine
    n_lv = int(np.ceil((tp - cfg.base) / dt_lv))
    if n_lv < 1:
        return best
    L = tp - dt_lv * np.arange(1, n_lv + 1)
    dt = tp - L
    xl, xr = xp - lam_max * dt, xp - lam_min * dt
    # u band from stored nodes, padded by a node
    ks = np.nonzero((traj.tau <= tp) & (traj.tau >= cfg.base - traj.config.dtau))[0]
    dts = tp - traj.tau[ks]
    X = traj.x[ks]
    inside = (X >= (xp - lam_max * dts - 1e-9)[:, None]) & (X <= (xp - lam_min * dts + 1e-9)[:, None])
    cols = np.nonzero(inside.any(axis=0))[0]
    if cols.size == 0:
        return best
    ja, jb = max(cols[0] - 2, 0), min(cols[-1] + 2, traj.u.size - 1)
    uq = np.linspace(traj.u[ja], traj.u[jb], (jb - ja) * refine + 1)
    T = np.broadcast_to(L[:, None], (n_lv, uq.size))
    U = np.broadcast_to(uq[None, :], T.shape)
    Xq = traj.interp("x", T.ravel(), U.ravel()).reshape(T.shape)
    Mq = traj.interp("mu", T.ravel(), U.ravel()).reshape(T.shape)
    above = T >= cfg.floor(U)
    m = (Xq >= xl[:, None]) & (Xq <= xr[:, None]) & above
    if m.any():
        best = min(best, float(Mq[m].min()))
    # edges on a much finer level grid starting at p, seeded from the
    # coarse crossings and solved by secant iteration on x(u) - xe
    n_fine = int(np.ceil((tp - cfg.base) / (dt_lv / 16)))
    Lf = tp - (tp - cfg.base) * np.arange(n_fine + 1) / n_fine
    dtf = tp - Lf
    for lam_e in (lam_max, lam_min):
        xe_c = xp - lam_e * dt
        j = np.argmax(Xq >= xe_c[:, None], axis=1)
        has = (Xq[:, -1] >= xe_c) & (Xq[:, 0] < xe_c)
        if not has.any():
            continue
        r = np.nonzero(has)[0]
        uc = uq[j[r]]
        guess = np.interp(Lf, np.concatenate([L[r][::-1], [tp]]),
                          np.concatenate([uc[::-1], [up]]))
        xe = xp - lam_e * dtf
        a_, b_ = guess - traj.h / refine, guess
        fa = traj.interp("x", Lf, a_) - xe
        fb = traj.interp("x", Lf, b_) - xe
        for _ in range(30):
            den = np.where(fb != fa, fb - fa, 1.0)
            m_ = np.clip(b_ - fb * (b_ - a_) / den, traj.u[0], traj.u[-1])
            fm = traj.interp("x", Lf, m_) - xe
            a_, fa, b_, fb = b_, fb, m_, fm
            if np.all(np.abs(fm) < 1e-13):
                break
        ok = (np.abs(fb) < 1e-10) & (Lf >= cfg.floor(b_))
        ok &= (Lf >= L[r].min()) | (dtf == 0)
        if ok.sum() >= 1:
            me = traj.interp("mu", Lf[ok], b_[ok])
            best = min(best, float(me.min()))
            idx = np.nonzero(ok)[0]
            run = np.diff(idx) == 1
            v = _vertex(me[:-2], me[1:-1], me[2:]) if me.size >= 3 else np.array([np.inf])
            if me.size >= 3:
                v = np.where(run[:-1] & run[1:], v, np.inf)
                best = min(best, float(v.min()))
    return best


# ---------------------------------------------------------------- boundary

@dataclass
class BoundaryPolyline:
    """Boundary points ordered in ``u`` with physical coordinates ``(t, x)``.

    ``slope`` holds ``dt/dx`` of the segment leaving each point (``nan`` for
    the last). ``ambiguous`` flags points whose class rests on a tolerance
    near a class change.
    """

    t: np.ndarray
    x: np.ndarray
    tau: np.ndarray
    u: np.ndarray
    slope: np.ndarray
    mu: np.ndarray
    dmu: np.ndarray
    mu_star_top: np.ndarray
    classes: Optional[np.ndarray] = None
    ambiguous: Optional[np.ndarray] = None
    ladder: Optional[np.ndarray] = None
    graphs: Optional[np.ndarray] = None
    certified_fraction: float = float("nan")
    c_cone: float = float("nan")
    witness_speed: float = float("nan")
    lipschitz: float = float("nan")

    def counts(self):
        if self.classes is None:
            return {}
        return {c: int(np.sum(self.classes == c)) for c in CLASSES}

    def to_csv(self, path):
        cls = self.classes if self.classes is not None else np.full(self.t.size, "")
        with open(path, "w") as fh:
            fh.write("t,x,tau,u,class,slope\n")
            for row in zip(self.t, self.x, self.tau, self.u, cls, self.slope):
                fh.write("{:.12e},{:.12e},{:.12e},{:.12e},{},{:.12e}\n".format(*row))


def ladder_levels(cfg: CausalConfig, mu_stop):
    """Halving ladder ``s_k = top 2^-k`` kept while ``s_k >= 2 mu_stop``."""
    s = cfg.ladder_top * 0.5 ** np.arange(cfg.ladder_rungs)
    s = s[s >= 2.0 * mu_stop * (1 - 1e-12)]
    if s.size < 3:
        raise ValueError("fewer than three ladder rungs above 2 mu_stop")
    return s


def _crossings(F, levels, s):
    """First ``tau`` per column with ``F <= s`` (F non-increasing in tau)."""
    below = F <= s
    k = np.argmax(below, axis=0)
    hit = below[k, np.arange(F.shape[1])]
    k1 = np.maximum(k, 1)
    cols = np.arange(F.shape[1])
    f0, f1 = F[k1 - 1, cols], F[k1, cols]
    with np.errstate(divide="ignore", invalid="ignore"):
        w = np.clip((f0 - s) / (f0 - f1), 0.0, 1.0)
    tau = levels[k1 - 1] + w * (levels[k1] - levels[k1 - 1])
    tau = np.where(k == 0, levels[0], tau)
    return np.where(hit, tau, np.nan)


def extract_boundary(traj: Trajectory, cfg: CausalConfig, step=None) -> BoundaryPolyline:
    """Zero set of ``mu_tilde = min(mu_star, t_box - tau)`` over the band.

    ``mu_star`` is evaluated once on a ``n_levels x n_columns`` grid. For each
    rung ``s`` of a halving ladder the per-column graph ``tau_s(u)`` of the
    level set is read off by linear interpolation; the graphs are then
    extrapolated linearly in ``s`` to ``s = 0`` from the last two rungs.

    Raises
    ------
    ResolutionLoss
        If the step between two successive graphs exceeds ten times what
        the linear model predicts from the previous step.
    """
    i0 = traj.system.shock_index
    band = cfg.band or (cfg.center - cfg.eta, cfg.center + cfg.eta)
    cols = np.linspace(band[0], band[1], cfg.n_columns)
    tau_lo = cfg.base if cfg.tau_lo is None else cfg.tau_lo
    levels = np.linspace(tau_lo, cfg.t_box, cfg.n_levels)
    T, U = np.meshgrid(levels, cols, indexing="ij")
    ms = mu_star(traj, cfg, T.ravel(), U.ravel(), step=step or cfg.trace_step or traj.h / 2)
    M = ms.mu_star.reshape(T.shape)
    Mt = np.minimum(M, cfg.t_box - T)
    rungs = ladder_levels(cfg, traj.config.mu_stop)
    graphs = np.array([_crossings(Mt, levels, s) for s in rungs])
    if np.isnan(graphs).any():
        raise ResolutionLoss("a level set does not cross every column inside the band")
    dl = levels[1] - levels[0]
    steps = np.diff(graphs, axis=0)
    for k in range(1, steps.shape[0]):
        pred = steps[k - 1] * (rungs[k] - rungs[k + 1]) / (rungs[k - 1] - rungs[k])
        if np.any(np.abs(steps[k]) > 10.0 * np.abs(pred) + 2.0 * dl):
            raise ResolutionLoss(f"ladder rung {k + 1} moved more than 10x the linear prediction")
    s1, s2 = rungs[-2], rungs[-1]
    tau0 = graphs[-1] - s2 * (graphs[-2] - graphs[-1]) / (s1 - s2)
    tau0 = np.minimum(tau0, cfg.t_box)

    # mu and d_u mu at the boundary, extrapolated along the ladder
    def mu_on(g):
        return traj.interp("mu", g, cols)

    def dmu_on(g):
        d = traj.h
        return (traj.interp("mu", g, cols + d) - traj.interp("mu", g, cols - d)) / (2 * d)

    m1, m2 = mu_on(graphs[-2]), mu_on(graphs[-1])
    mu0 = m2 - s2 * (m1 - m2) / (s1 - s2)
    live = [k for k in range(rungs.size) if rungs[k] >= 4.0 * traj.config.mu_stop]
    ka, kb = (live[-2], live[-1]) if len(live) >= 2 else (rungs.size - 2, rungs.size - 1)
    da, db = dmu_on(graphs[ka]), dmu_on(graphs[kb])
    dmu0 = db - rungs[kb] * (da - db) / (rungs[ka] - rungs[kb])

    # x and the speeds from the top rung, where every stencil node is live,
    # carried to tau0 along the shocking line (d_tau x = lam)
    g_top = graphs[0]
    lam_top = traj.interp("lam", g_top, cols)
    x = traj.interp("x", g_top, cols) + lam_top[:, i0] * (tau0 - g_top)
    with np.errstate(divide="ignore", invalid="ignore"):
        slope = np.append(np.diff(tau0) / np.diff(x), np.nan)
    poly = BoundaryPolyline(tau0.copy(), x, tau0, cols, slope, mu0, dmu0, M[-1].copy(),
                            ladder=rungs, graphs=graphs,
                            certified_fraction=float(ms.certified.mean()))
    # cone constant with the constant graphical witness over boundary states
    lam = lam_top
    reg = tau0 < cfg.t_box - dl
    sel = lam[reg] if reg.any() else lam
    F = 0.5 * (sel[:, 0].max() + sel[:, -1].min())
    poly.witness_speed = float(F)
    poly.c_cone = float(min(np.min(F - sel[:, 0]), np.min(sel[:, -1] - F)))
    poly.lipschitz = chord_lipschitz(tau0, x - F * tau0, cfg.lip_scale)
    return poly


def chord_lipschitz(t, xb, scale):
    """Max ``|dt / dxb|`` over chords with ``|dxb| >= scale``.

    Chords shorter than ``scale`` only see the level-set extraction error.
    """
    best = 0.0
    for i in range(t.size - 1):
        d = np.abs(xb[i + 1:] - xb[i])
        far = np.nonzero(d >= scale)[0]
        if far.size:
            j = i + 1 + far[0]
            best = max(best, abs(t[j] - t[i]) / abs(xb[j] - xb[i]))
    return float(best)


def lipschitz_ok(poly: BoundaryPolyline, factor=1.1) -> bool:
    """Boundary slope ``|dt / d(x - F t)|`` within ``factor / c_cone``."""
    return bool(poly.c_cone > 0 and poly.lipschitz <= factor / poly.c_cone)


def classify_boundary(poly: BoundaryPolyline, traj: Trajectory, cfg: CausalConfig,
                      strict=False) -> BoundaryPolyline:
    """Fill the point classes.

    * extensible: the boundary is the box top and ``mu_star`` stays positive there
    * singular: ``mu`` vanishes at the point, transversally
    * preshock: ``mu`` vanishes tangentially (``d_u mu`` ~ 0 or changing sign)
    * cauchy: regular point with ``mu_star = 0``

    ``mu`` vanishes below ``mu_zero_factor * mu_stop``; ``d_u mu`` is small
    below ``dmu_zero_factor`` times its global maximum. Each contiguous run
    of tangential candidates yields one preshock (the lowest point); the
    other members take the class of their side and are flagged ambiguous.

    Raises
    ------
    AmbiguousClass
        Only with ``strict``, if any point is flagged.
    """
    mu_tol = cfg.mu_zero_factor * traj.config.mu_stop
    live = traj.alive & (traj.mu > 2.0 * traj.config.mu_stop)
    du = np.gradient(traj.mu, traj.h, axis=1)
    dmu_tol = cfg.dmu_zero_factor * float(np.max(np.abs(du[live])))
    dl = (cfg.t_box - (cfg.base if cfg.tau_lo is None else cfg.tau_lo)) / (cfg.n_levels - 1)
    n = poly.u.size
    top = poly.tau >= cfg.t_box - dl
    zero = poly.mu <= mu_tol
    cls = np.empty(n, dtype=object)
    amb = np.zeros(n, dtype=bool)
    ext = top & (poly.mu_star_top > mu_tol)
    cls[ext] = "extensible"
    amb[top & ~ext & (poly.mu_star_top > 0.5 * mu_tol)] = True
    cls[~ext & zero] = "singular"
    cls[~ext & ~zero] = "cauchy"
    amb[~ext & (np.abs(poly.mu - mu_tol) <= 0.5 * mu_tol)] = True
    # tangential vanishing: small d_u mu, or a sign change to a neighbour
    sgn = np.sign(poly.dmu)
    flip = np.zeros(n, dtype=bool)
    flip[:-1] |= (sgn[:-1] * sgn[1:] < 0) & (np.abs(poly.dmu[:-1]) <= np.abs(poly.dmu[1:]))
    flip[1:] |= (sgn[1:] * sgn[:-1] < 0) & (np.abs(poly.dmu[1:]) < np.abs(poly.dmu[:-1]))
    cand = ~ext & zero & ((np.abs(poly.dmu) <= dmu_tol) | flip)
    j = 0
    while j < n:
        if not cand[j]:
            j += 1
            continue
        k = j
        while k + 1 < n and cand[k + 1]:
            k += 1
        run = np.arange(j, k + 1)
        rep = run[np.argmin(poly.tau[run])]
        for m in run:
            if m == rep:
                continue
            side = np.arange(m - 1, -1, -1) if m < rep else np.arange(m + 1, n)
            outside = [q for q in side if not cand[q]]
            cls[m] = cls[outside[0]] if outside else cls[m]
            amb[m] = True
        cls[rep] = "preshock"
        j = k + 1
    poly.classes = cls.astype(str)
    poly.ambiguous = amb
    if strict and amb.any():
        raise AmbiguousClass(f"{int(amb.sum())} boundary points within tolerance of two classes")
    return poly


# ---------------------------------------------------------------- perverse example

def perverse_profile(n_max, width=None):
    """Burgers profile with ``d theta = -1`` minima at ``u = 1/n``, ``n <= n_max``.

    Dips ``-b((u - 1/n)/w)`` alternate with positive bumps of the same shape
    at the midpoints, so ``theta(1/n) = 0`` for every ``n``.
    """
    from .simplewave import BumpComponent, SlopeProfile

    if not 1 <= n_max <= 5:
        raise ValueError("n_max must be between 1 and 5")
    centers = [1.0 / n for n in range(1, n_max + 1)]
    gap = centers[-2] - centers[-1] if n_max > 1 else 1.0
    w = 0.9 * gap / 4.0 if width is None else width
    comps = [BumpComponent(c, w, -1.0) for c in centers]
    comps += [BumpComponent(0.5 * (a + b), w, 1.0) for a, b in zip(centers[:-1], centers[1:])]
    prof = SlopeProfile(comps, theta_left=0.0)
    shift = -float(prof.theta(np.array([centers[-1]]))[0])
    return SlopeProfile(comps, theta_left=shift), centers, w


def corner_angle(t, x, k, r_min, r_max):
    """Turning angle of the polyline ``(t, x)`` at index ``k``.

    Each branch is fitted by ``x - x_k = s (t - t_k)`` through the corner
    using points at distance ``[r_min, r_max]``; the angle is between the
    incoming and outgoing directions.
    """
    d = np.hypot(t - t[k], x - x[k])
    slopes = []
    for side in (np.arange(t.size) < k, np.arange(t.size) > k):
        m = side & (d >= r_min) & (d <= r_max)
        if m.sum() < 2:
            return float("nan"), (float("nan"), float("nan"))
        dt, dx = t[m] - t[k], x[m] - x[k]
        slopes.append(float(np.sum(dt * dx) / np.sum(dt * dt)))
    # incoming direction runs down the left branch, outgoing up the right one
    a_in = np.arctan2(-slopes[0], -1.0)
    a_out = np.arctan2(slopes[1], 1.0)
    turn = abs((a_out - a_in + np.pi) % (2 * np.pi) - np.pi)
    return float(turn), tuple(slopes)


def perverse_harness(n_max=3, n_u=1024, dtau=2e-3, mu_stop=2e-4, t_box=1.04, base=0.95,
                     n_columns=241, n_levels=121, r_min=None, r_max=0.02):
    """Multi-dip Burgers-plus-transport run with preshocks at ``(1, 1 + 1/n)``.

    One continuation run covers all dips; the boundary is then extracted
    and classified in a window around each dip. Each window must hold one
    preshock, located within ``2h`` of ``(1, 1 + 1/n)``; the turning angle
    of the boundary there is compared with the right angle between the
    branches of slopes ``+1`` (Burgers speed 1) and ``-1`` (transport).

    Returns
    -------
    dict (JSON-ready)
    """
    from .eikonal import SolverConfig, evolve_to_stop, initialize
    from .simplewave import build_simple_wave, integrate_state_curve
    from .systems import builtin_system

    prof, centers, w = perverse_profile(n_max)
    system = builtin_system("burgers_transport")
    _, _, tmin, tmax = prof.range()
    curve = integrate_state_curve(system, [1.0, 0.0], 1.05 * max(abs(tmin), abs(tmax)))
    wave = build_simple_wave(system, curve, prof, normalize=False)
    cfg = SolverConfig(n_u=n_u, dtau=dtau, mu_stop=mu_stop, tau_max=t_box, margin=0.1)
    traj = evolve_to_stop(initialize(system, wave, None, 0.0, cfg), cfg,
                          continuation=True, tau_end=t_box)
    h = traj.h
    r_min = 2 * h if r_min is None else r_min
    rows = []
    for n, c in zip(range(1, n_max + 1), centers):
        cc = CausalConfig(eta=10.0, base=base, center=c, t_box=t_box,
                          lam_star=speed_spread(traj), band=(c - 1.5 * w, c + 1.5 * w),
                          n_columns=n_columns, n_levels=n_levels, mu_zero_factor=0.5,
                          ladder_top=0.02, ladder_rungs=6)
        poly = classify_boundary(extract_boundary(traj, cc), traj, cc)
        pre = np.nonzero(poly.classes == "preshock")[0]
        row = {"n": n, "expected": [1.0, 1.0 + 1.0 / n], "count": int(pre.size)}
        if pre.size:
            k = int(pre[np.argmin(poly.tau[pre])])
            ang, sl = corner_angle(poly.t, poly.x, k, r_min, r_max)
            row.update(t=float(poly.t[k]), x=float(poly.x[k]),
                       error=float(max(abs(poly.t[k] - 1.0), abs(poly.x[k] - 1.0 - 1.0 / n))),
                       angle=ang, branch_slopes=list(sl), classes=poly.counts())
        rows.append(row)
    angles = [r.get("angle", float("nan")) for r in rows]
    ok_loc = all(r["count"] == 1 and r["error"] <= 2 * h for r in rows)
    ok_ang = all(abs(a - np.pi / 2) <= 0.05 for a in angles)
    return {"n_max": n_max, "h": h, "width": w, "preshocks": rows,
            "min_angle": float(np.nanmin(angles)) if rows else float("nan"),
            "locations_ok": bool(ok_loc), "angles_ok": bool(ok_ang)}
