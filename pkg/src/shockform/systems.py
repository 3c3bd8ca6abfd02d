"""Concrete strictly hyperbolic systems and Galilean gauge changes."""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .errors import BoxExit, UnknownSystem
from .spectral import check_genuine_nonlinearity, eigendecompose


@dataclass(frozen=True)
class GaugeParams:
    """Galilean change of frame ``t' = t + t0``, ``x' = x - v t - x0``."""

    t0: float = 0.0
    x0: float = 0.0
    v: float = 0.0

    def forward(self, t, x):
        t = np.asarray(t, dtype=float)
        return t + self.t0, np.asarray(x, dtype=float) - self.v * t - self.x0

    def inverse(self, tg, xg):
        t = np.asarray(tg, dtype=float) - self.t0
        return t, np.asarray(xg, dtype=float) + self.v * t + self.x0

    def then(self, other: "GaugeParams") -> "GaugeParams":
        """Gauge obtained by applying ``self`` first and ``other`` second."""
        return GaugeParams(
            t0=self.t0 + other.t0,
            x0=self.x0 + other.x0 + other.v * self.t0,
            v=self.v + other.v,
        )


@dataclass(frozen=True)
class SystemDefinition:
    """Advection matrix ``A(psi)`` for ``d_t psi + A(psi) d_x psi = 0``.

    Attributes
    ----------
    name : str
    n : int
        Dimension of the state.
    advection : callable
        Maps ``(..., N)`` states to ``(..., N, N)`` matrices.
    d_advection : callable or None
        Maps ``(..., N)`` states to ``(..., N, N, N)`` arrays whose axis
        ``-3`` indexes the differentiation variable.
    shock_index : int
        Zero-based index (in increasing eigenvalue order) of the shocking
        field.
    box : ndarray, shape (N, 2)
        Per-component admissible interval.
    gauge : GaugeParams
        Frame relative to the original physical coordinates.
    state_shift : ndarray
        States here equal original states minus this shift.
    """

    name: str
    n: int
    advection: Callable
    shock_index: int
    box: np.ndarray
    d_advection: Optional[Callable] = None
    params: dict = field(default_factory=dict)
    gauge: GaugeParams = field(default_factory=GaugeParams)
    state_shift: Optional[np.ndarray] = None

    def __post_init__(self):
        object.__setattr__(self, "box", np.asarray(self.box, dtype=float).reshape(self.n, 2))
        if self.state_shift is None:
            object.__setattr__(self, "state_shift", np.zeros(self.n))

    def in_box(self, psi, slack=0.0) -> np.ndarray:
        psi = np.asarray(psi, dtype=float)
        lo, hi = self.box[:, 0] - slack, self.box[:, 1] + slack
        return np.all((psi >= lo) & (psi <= hi), axis=-1)

    def require_in_box(self, psi, what="state"):
        if not np.all(self.in_box(psi)):
            raise BoxExit(f"{what} left the state-space box of {self.name}")

    def sample_box(self, m, rng=None, shrink=0.0) -> np.ndarray:
        """Uniform samples from the box, optionally shrunk by a margin."""
        rng = np.random.default_rng(rng)
        lo = self.box[:, 0] + shrink
        hi = self.box[:, 1] - shrink
        return lo + (hi - lo) * rng.random((m, self.n))

    @property
    def is_extremal(self) -> bool:
        return self.shock_index in (0, self.n - 1)


# ---------------------------------------------------------------- builtins

def _burgers_transport(params):
    box = params.get("box", [[0.0, 3.0], [-1.0, 1.0]])
    transport = float(params.get("transport_speed", -1.0))

    def adv(psi):
        psi = np.asarray(psi, dtype=float)
        A = np.zeros(psi.shape[:-1] + (2, 2))
        A[..., 0, 0] = psi[..., 0]
        A[..., 1, 1] = transport
        return A

    def dadv(psi):
        psi = np.asarray(psi, dtype=float)
        dA = np.zeros(psi.shape[:-1] + (2, 2, 2))
        dA[..., 0, 0, 0] = 1.0
        return dA

    # box keeps v above the transport speed, so the Burgers field is the fast one
    if np.asarray(box, dtype=float)[0][0] <= transport:
        raise ValueError("burgers_transport box must keep v above the transport speed")
    return SystemDefinition("burgers_transport", 2, adv, 1, box, dadv,
                            params=dict(params))


def _p_system(params):
    gamma = float(params.get("gamma", 1.0))
    box = params.get("box", [[0.5, 3.0], [-2.0, 2.0]])
    field_ = params.get("shock_field", "fast")
    index = {"slow": 0, "fast": 1}.get(field_, field_)

    def dp(v):
        return -gamma * v ** (-gamma - 1.0)

    def d2p(v):
        return gamma * (gamma + 1.0) * v ** (-gamma - 2.0)

    def adv(psi):
        psi = np.asarray(psi, dtype=float)
        A = np.zeros(psi.shape[:-1] + (2, 2))
        A[..., 0, 1] = -1.0
        A[..., 1, 0] = dp(psi[..., 0])
        return A

    def dadv(psi):
        psi = np.asarray(psi, dtype=float)
        dA = np.zeros(psi.shape[:-1] + (2, 2, 2))
        dA[..., 0, 1, 0] = d2p(psi[..., 0])
        return dA

    return SystemDefinition("p_system", 2, adv, int(index), box, dadv,
                            params=dict(params))


def _synthetic3(params):
    amp = float(params.get("coupling", 0.1))
    rot = float(params.get("rotation", 0.5))
    box = params.get("box", [[-1.0, 1.0], [-1.0, 1.0], [-1.0, 1.0]])

    # outer eigenvectors rotate in the (1,3) plane about the fixed middle one
    def pieces(psi):
        psi = np.asarray(psi, dtype=float)
        alpha = rot * (psi[..., 1] + 0.5 * psi[..., 0])
        eps = amp * np.sin(psi[..., 0] + psi[..., 2])
        return psi, np.cos(alpha), np.sin(alpha), -2.0 + eps, 2.0 + eps

    def adv(psi):
        psi, c, s, d1, d3 = pieces(psi)
        A = np.zeros(psi.shape[:-1] + (3, 3))
        A[..., 0, 0] = c * c * d1 + s * s * d3
        A[..., 0, 2] = A[..., 2, 0] = c * s * (d3 - d1)
        A[..., 2, 2] = s * s * d1 + c * c * d3
        A[..., 1, 1] = psi[..., 1]
        return A

    def dadv(psi):
        psi, c, s, d1, d3 = pieces(psi)
        deps = amp * np.cos(psi[..., 0] + psi[..., 2])
        dalpha = (0.5 * rot, rot, 0.0)
        dd = (deps, 0.0 * deps, deps)
        dA = np.zeros(psi.shape[:-1] + (3, 3, 3))
        for k in range(3):
            a_k, d_k = dalpha[k], dd[k]
            dA[..., k, 0, 0] = a_k * 2 * c * s * (d3 - d1) + d_k * (c * c + s * s)
            off = a_k * (c * c - s * s) * (d3 - d1)
            dA[..., k, 0, 2] = dA[..., k, 2, 0] = off
            dA[..., k, 2, 2] = a_k * 2 * s * c * (d1 - d3) + d_k * (s * s + c * c)
        dA[..., 1, 1, 1] = 1.0
        return dA

    return SystemDefinition("synthetic3_intermediate", 3, adv, 1, box, dadv,
                            params=dict(params))


_BUILTINS = {
    "burgers_transport": _burgers_transport,
    "p_system": _p_system,
    "synthetic3_intermediate": _synthetic3,
}

BUILTIN_NAMES = tuple(sorted(_BUILTINS))


def builtin_system(name, params=None, certify=True) -> SystemDefinition:
    """Instantiate a named system.

    Parameters
    ----------
    name : {"burgers_transport", "p_system", "synthetic3_intermediate"}
    params : dict, optional
        System parameters (``box``, ``gamma``, ``shock_field``, ...).
    certify : bool
        Run the spectral and genuine-nonlinearity checks on a 100-point box
        sample before returning.

    Raises
    ------
    UnknownSystem
    """
    try:
        factory = _BUILTINS[name]
    except KeyError:
        raise UnknownSystem(f"unknown system {name!r}; known: {BUILTIN_NAMES}") from None
    system = factory(dict(params or {}))
    if certify:
        eigendecompose(system, system.box.mean(axis=1))
        states = system.sample_box(100, rng=12345)
        check_genuine_nonlinearity(system, states, c_min=float((params or {}).get("c_min", 1e-3)))
    return system


def augment_scalar(system, speed_margin=1.0, samples=201) -> SystemDefinition:
    """Append a decoupled constant-speed transport field to a scalar law.

    The transport speed is placed ``speed_margin`` below the smallest
    sampled speed, so the scalar field becomes the fast (extremal) one.
    """
    if system.n != 1:
        return system
    cached = getattr(system, "_augmented", None)
    if cached is not None:
        return cached
    grid = np.linspace(system.box[0, 0], system.box[0, 1], samples)[:, None]
    speeds = np.asarray(system.advection(grid), dtype=float).reshape(samples)
    c = float(speeds.min() - speed_margin)
    base, dbase = system.advection, system.d_advection

    def adv(psi):
        psi = np.asarray(psi, dtype=float)
        A = np.zeros(psi.shape[:-1] + (2, 2))
        A[..., 0, 0] = np.asarray(base(psi[..., :1])).reshape(psi.shape[:-1])
        A[..., 1, 1] = c
        return A

    dadv = None
    if dbase is not None:
        def dadv(psi):
            psi = np.asarray(psi, dtype=float)
            dA = np.zeros(psi.shape[:-1] + (2, 2, 2))
            dA[..., 0, 0, 0] = np.asarray(dbase(psi[..., :1])).reshape(psi.shape[:-1])
            return dA

    box = np.vstack([system.box, [[-1.0, 1.0]]])
    aug = SystemDefinition(system.name + "+transport", 2, adv, 1, box, dadv,
                           params=dict(system.params, transport_speed=c))
    object.__setattr__(system, "_augmented", aug)
    return aug


def galilean_transform(system, g: GaugeParams) -> SystemDefinition:
    """Same system seen from a frame moving at speed ``g.v``.

    Eigenvalues shift by ``-g.v``; eigenvectors are untouched. The gauge
    metadata composes with any gauge already carried by ``system``.
    """
    base, dbase, v = system.advection, system.d_advection, float(g.v)
    eye = np.eye(system.n)

    def adv(psi):
        return np.asarray(base(psi), dtype=float) - v * eye

    new = replace(system, advection=adv, d_advection=dbase,
                  gauge=system.gauge.then(g))
    return new


def shift_state(system, psi0) -> SystemDefinition:
    """System in the variable ``psi - psi0`` (box shifted accordingly)."""
    psi0 = np.asarray(psi0, dtype=float)
    base, dbase = system.advection, system.d_advection

    def adv(psi):
        return base(np.asarray(psi, dtype=float) + psi0)

    dadv = None
    if dbase is not None:
        def dadv(psi):
            return dbase(np.asarray(psi, dtype=float) + psi0)

    return replace(system, advection=adv, d_advection=dadv,
                   box=system.box - psi0[:, None],
                   state_shift=system.state_shift + psi0)


def graphical_margin(system, states):
    """``(sup lam_1, inf lam_N)`` over the given states."""
    spec = eigendecompose(system, np.atleast_2d(states))
    return float(spec.lam[:, 0].max()), float(spec.lam[:, -1].min())


def graphical_condition_check(wave, samples=401) -> bool:
    """Constant-witness sufficient check of the graphical condition.

    True when the largest slow speed over the realized wave states stays
    strictly below the smallest fast speed, so that a constant vector field
    ``d_t + F d_x`` fits in between. False only means this sufficient test
    is inconclusive.
    """
    states = wave.realized_states(samples)
    sup1, infn = graphical_margin(wave.system, states)
    return bool(sup1 < infn)
