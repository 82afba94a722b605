"""Blow-up coordinates near total collision for the Manev-type case.

For a = 1 the change of variables

    rho = <r, r>^(1/2)        s = r / rho
    v = rho^(b/2) (p . s)     u = rho^(b/2) (p - (p . s) M s)

with the time rescaling dtau = rho^(-1 - b/2) dt turns the equations of
motion into a field that extends to rho = 0.  s lives on the unit mass
sphere s^T M s = 1 and u is mass-orthogonal to it, u . s = 0; v is the
scaled radial velocity.  In these variables the energy relation reads

    (u^T M^{-1} u + v^2) / 2 - rho^(b-1) W(s) - V(s) = h rho^b,

so the collision manifold rho = 0 is the set
u^T M^{-1} u + v^2 = 2 V(s), independent of h.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import integrate as _integrate
from .errors import ZeroSizeError
from .model import (
    Configuration,
    MassSystem,
    PhaseState,
    PotentialParams,
    grad_V,
    grad_W,
    mass_inner,
    potential_terms,
)


@dataclass(frozen=True)
class EnergyLevel:
    """A fixed value of the Hamiltonian."""

    h: float

    def __post_init__(self):
        if not np.isfinite(self.h):
            raise ValueError("energy must be finite")


def _energy_value(h) -> float:
    return float(h.h) if isinstance(h, EnergyLevel) else float(h)


@dataclass(frozen=True, eq=False)
class McGeheeState:
    """A point (rho, v, s, u) of the blown-up phase space."""

    rho: float
    v: float
    s: np.ndarray
    u: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.s, dtype=float)
        u = np.asarray(self.u, dtype=float)
        if s.ndim != 2 or s.shape[1] not in (1, 2) or s.shape != u.shape:
            raise ValueError("s and u must be matching (n, d) arrays, d in {1, 2}")
        if not (np.all(np.isfinite(s)) and np.all(np.isfinite(u))):
            raise ValueError("s and u must be finite")
        if not (np.isfinite(self.rho) and np.isfinite(self.v)):
            raise ValueError("rho and v must be finite")
        if self.rho < 0.0:
            raise ValueError("rho must be nonnegative")
        s = s.copy()
        u = u.copy()
        s.flags.writeable = False
        u.flags.writeable = False
        object.__setattr__(self, "s", s)
        object.__setattr__(self, "u", u)

    @property
    def n(self) -> int:
        return self.s.shape[0]

    @property
    def dim(self) -> int:
        return self.s.shape[1]


def validate_mcgehee(st: McGeheeState, ms: MassSystem, tol: float = 1e-12) -> None:
    """Check the sphere and orthogonality constraints of a state."""
    sphere = abs(mass_inner(st.s, st.s, ms) - 1.0)
    if sphere > tol:
        raise ValueError(f"s^T M s deviates from 1 by {sphere:.3e} (tol {tol:.1e})")
    ortho = abs(float(np.sum(st.u * st.s)))
    if ortho > tol:
        raise ValueError(f"u . s = {ortho:.3e} exceeds tol {tol:.1e}")


def to_mcgehee(state: PhaseState, ms: MassSystem, pp: PotentialParams) -> McGeheeState:
    """Blow up a Cartesian phase state; needs a = 1 and rho > 0."""
    pp.require_manev()
    r = state.config.positions
    p = state.momenta
    inertia = mass_inner(r, r, ms)
    if inertia <= 0.0:
        raise ZeroSizeError("configuration has zero size; blow-up undefined")
    rho = float(np.sqrt(inertia))
    s = r / rho
    radial = float(np.sum(p * s))
    scale = rho ** (pp.b / 2.0)
    v = scale * radial
    u = scale * (p - radial * ms.masses[:, None] * s)
    return McGeheeState(rho=rho, v=v, s=s, u=u)


def from_mcgehee(st: McGeheeState, ms: MassSystem, pp: PotentialParams) -> PhaseState:
    """Inverse of to_mcgehee; rejects rho = 0 (the blown-up boundary)."""
    pp.require_manev()
    if st.rho <= 0.0:
        raise ZeroSizeError("rho must be positive to map back to Cartesian variables")
    r = st.rho * st.s
    p = st.rho ** (-pp.b / 2.0) * (st.u + st.v * ms.masses[:, None] * st.s)
    return PhaseState(config=Configuration(r), momenta=p)


def _field_arrays(rho, v, s, u, ms: MassSystem, pp: PotentialParams):
    """The blown-up equations of motion on raw arrays.

    Valid for rho >= 0; at rho = 0 it restricts to the collision
    manifold flow.  Raises CollisionError through the potential guard
    when s approaches a partial collision.
    """
    b = pp.b
    m = ms.masses[:, None]
    w_s, v_s = potential_terms(s, ms, pp)
    gw = grad_W(s, ms, pp)
    gv = grad_V(s, ms, pp)
    u_m_u = float(np.sum(u * u / m))
    rho_pow = rho ** (b - 1.0) if rho > 0.0 else 0.0
    rho_dot = rho * v
    v_dot = 0.5 * b * v * v + u_m_u - rho_pow * w_s - b * v_s
    s_dot = u / m
    u_dot = (
        (0.5 * b - 1.0) * v * u
        - u_m_u * (m * s)
        + rho_pow * (w_s * (m * s) + gw)
        + b * v_s * (m * s)
        + gv
    )
    return rho_dot, v_dot, s_dot, u_dot


def vector_field(st: McGeheeState, ms: MassSystem, pp: PotentialParams):
    """Derivative (rho', v', s', u') of a state in the rescaled time tau."""
    pp.require_manev()
    return _field_arrays(st.rho, st.v, st.s, st.u, ms, pp)


def energy_residual(st: McGeheeState, h, ms: MassSystem, pp: PotentialParams) -> float:
    """Defect of the blown-up energy relation at the state."""
    pp.require_manev()
    b = pp.b
    w_s, v_s = potential_terms(st.s, ms, pp)
    u_m_u = float(np.sum(st.u * st.u / ms.masses[:, None]))
    rho_pow = st.rho ** (b - 1.0) if st.rho > 0.0 else 0.0
    return (
        0.5 * (u_m_u + st.v**2)
        - rho_pow * w_s
        - v_s
        - _energy_value(h) * st.rho**b
    )


def collision_manifold_residual(st: McGeheeState, ms: MassSystem, pp: PotentialParams) -> float:
    """u^T M^{-1} u + v^2 - 2 V(s); zero on the collision manifold."""
    _, v_s = potential_terms(st.s, ms, pp)
    u_m_u = float(np.sum(st.u * st.u / ms.masses[:, None]))
    return u_m_u + st.v**2 - 2.0 * v_s


def on_collision_manifold(
    st: McGeheeState, ms: MassSystem, pp: PotentialParams, tol: float = 1e-9
) -> bool:
    """Whether the state lies on {rho = 0, u^T M^{-1} u + v^2 = 2 V(s)}."""
    return st.rho <= tol and abs(collision_manifold_residual(st, ms, pp)) <= tol


# Flat vector layout [rho, v, s.ravel(), u.ravel()] (+ [t] when tracking
# physical time) used with the integrate module.


def pack_mcgehee(st: McGeheeState, t: float | None = None) -> np.ndarray:
    head = [np.array([st.rho, st.v]), st.s.ravel(), st.u.ravel()]
    if t is not None:
        head.append(np.array([t]))
    return np.concatenate(head)


def unpack_mcgehee(y: np.ndarray, n: int, dim: int = 2) -> McGeheeState:
    sz = n * dim
    return McGeheeState(
        rho=float(y[0]),
        v=float(y[1]),
        s=y[2 : 2 + sz].reshape(n, dim),
        u=y[2 + sz : 2 + 2 * sz].reshape(n, dim),
    )


def mcgehee_field(ms: MassSystem, pp: PotentialParams, dim: int = 2, with_time: bool = False):
    """Flat-vector right-hand side d/dtau for the blown-up system.

    With with_time the state carries a trailing physical-time component
    integrated as dt/dtau = rho^(1 + b/2).
    """
    pp.require_manev()
    n = ms.n
    sz = n * dim

    def field(tau, y):
        rho = y[0]
        v = y[1]
        s = y[2 : 2 + sz].reshape(n, dim)
        u = y[2 + sz : 2 + 2 * sz].reshape(n, dim)
        rho_dot, v_dot, s_dot, u_dot = _field_arrays(rho, v, s, u, ms, pp)
        parts = [np.array([rho_dot, v_dot]), s_dot.ravel(), u_dot.ravel()]
        if with_time:
            parts.append(np.array([rho ** (1.0 + pp.b / 2.0) if rho > 0.0 else 0.0]))
        return np.concatenate(parts)

    return field


def mcgehee_renormalizer(ms: MassSystem, dim: int = 2):
    """Per-step projection keeping s centered on the sphere, u tangent."""
    n = ms.n
    sz = n * dim

    def renorm(y):
        s = y[2 : 2 + sz].reshape(n, dim)
        u = y[2 + sz : 2 + 2 * sz].reshape(n, dim)
        s2, u2 = _integrate.renormalize_mcgehee(s, u, ms.masses)
        out = y.copy()
        out[2 : 2 + sz] = s2.ravel()
        out[2 + sz : 2 + 2 * sz] = u2.ravel()
        return out

    return renorm
