"""Quasihomogeneous n-body potentials and their derivatives.

The potential is a sum of two homogeneous terms,

    U(r) = alpha * sum_{i<j} m_i m_j / |r_i - r_j|**a
         + beta  * sum_{i<j} m_i m_j / |r_i - r_j|**b,

with 0 <= a < b, acting on point masses in one or two dimensions.  The
a-term is called W and the b-term V throughout; a = 1 with beta > 0 is
the Manev-type case used by the collision modules.

Positions and momenta are (n, d) arrays with d in {1, 2}.  All inner
products weighted by the masses use the mass metric
<x, y> = sum_i m_i x_i . y_i, and the moment of inertia about the origin
is I = <r, r>.  The momentum convention is p = M rdot, so the
Hamiltonian reads H = p^T M^{-1} p / 2 - U(r).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import CollisionError, ManevOnlyError, NotOnSphereError

# Pairwise distances below GUARD_FACTOR * sqrt(I / total_mass) count as a
# collision; evaluating any potential quantity there raises CollisionError.
GUARD_FACTOR = 1e-10


@dataclass(frozen=True, eq=False)
class MassSystem:
    """Masses of the n bodies, n >= 2, all strictly positive."""

    masses: np.ndarray

    def __post_init__(self):
        m = np.atleast_1d(np.asarray(self.masses, dtype=float))
        if m.ndim != 1 or m.size < 2:
            raise ValueError("need a 1-d array of at least two masses")
        if not np.all(np.isfinite(m)) or np.any(m <= 0.0):
            raise ValueError("masses must be finite and strictly positive")
        m = m.copy()
        m.flags.writeable = False
        object.__setattr__(self, "masses", m)

    @property
    def n(self) -> int:
        return self.masses.size

    @property
    def total_mass(self) -> float:
        return float(self.masses.sum())


@dataclass(frozen=True)
class PotentialParams:
    """Exponents and coefficients of the two potential terms.

    Requires 0 <= a < b and alpha, beta >= 0 with at least one of the
    coefficients positive.  alpha scales the a-term, beta the b-term.
    """

    a: float = 1.0
    b: float = 2.0
    alpha: float = 1.0
    beta: float = 1.0

    def __post_init__(self):
        for name in ("a", "b", "alpha", "beta"):
            v = getattr(self, name)
            if not np.isfinite(v):
                raise ValueError(f"{name} must be finite")
        if not 0.0 <= self.a < self.b:
            raise ValueError("exponents must satisfy 0 <= a < b")
        if self.alpha < 0.0 or self.beta < 0.0:
            raise ValueError("coefficients must be nonnegative")
        if self.alpha == 0.0 and self.beta == 0.0:
            raise ValueError("at least one coefficient must be positive")

    def require_manev(self) -> None:
        """Raise unless a = 1 and the b-term is active."""
        if self.a != 1.0 or self.beta <= 0.0:
            raise ManevOnlyError(
                f"operation needs a = 1 and beta > 0, got a={self.a}, beta={self.beta}"
            )


@dataclass(frozen=True, eq=False)
class Configuration:
    """Positions of the n bodies as an (n, d) array, d in {1, 2}."""

    positions: np.ndarray

    def __post_init__(self):
        r = np.asarray(self.positions, dtype=float)
        if r.ndim != 2 or r.shape[1] not in (1, 2) or r.shape[0] < 2:
            raise ValueError("positions must be (n, d) with n >= 2 and d in {1, 2}")
        if not np.all(np.isfinite(r)):
            raise ValueError("positions must be finite")
        r = r.copy()
        r.flags.writeable = False
        object.__setattr__(self, "positions", r)

    @property
    def n(self) -> int:
        return self.positions.shape[0]

    @property
    def dim(self) -> int:
        return self.positions.shape[1]


@dataclass(frozen=True, eq=False)
class PhaseState:
    """A point in phase space: configuration plus conjugate momenta."""

    config: Configuration
    momenta: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.momenta, dtype=float)
        if p.shape != self.config.positions.shape:
            raise ValueError("momenta must have the same shape as positions")
        if not np.all(np.isfinite(p)):
            raise ValueError("momenta must be finite")
        p = p.copy()
        p.flags.writeable = False
        object.__setattr__(self, "momenta", p)


def _positions(config) -> np.ndarray:
    if isinstance(config, Configuration):
        return config.positions
    return np.asarray(config, dtype=float)


def mass_inner(x, y, ms: MassSystem) -> float:
    """Mass-metric inner product sum_i m_i x_i . y_i of two (n, d) arrays."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    return float(np.sum(ms.masses[:, None] * x * y))


def moment_of_inertia(config, ms: MassSystem) -> float:
    """I = sum_i m_i |r_i|^2 about the origin."""
    r = _positions(config)
    return float(np.sum(ms.masses[:, None] * r * r))


def center_of_mass(config, ms: MassSystem) -> np.ndarray:
    r = _positions(config)
    return ms.masses @ r / ms.total_mass


def centered(positions, ms: MassSystem) -> np.ndarray:
    """Translate positions so the center of mass sits at the origin."""
    r = np.asarray(positions, dtype=float)
    return r - center_of_mass(r, ms)[None, :]


def _pair_data(r: np.ndarray, ms: MassSystem):
    """Distances and separations of all pairs, with the collision guard.

    Returns (i, j, diff, dist, mm) for pairs i < j, where diff = r_i - r_j
    and mm = m_i * m_j.
    """
    n = r.shape[0]
    i, j = np.triu_indices(n, 1)
    diff = r[i] - r[j]
    dist = np.sqrt(np.sum(diff * diff, axis=1))
    inertia = float(np.sum(ms.masses[:, None] * r * r))
    guard = GUARD_FACTOR * np.sqrt(inertia / ms.total_mass)
    dmin = float(dist.min())
    if dmin <= guard:
        raise CollisionError(
            f"minimum pairwise distance {dmin:.3e} at or below guard {guard:.3e}"
        )
    return i, j, diff, dist, ms.masses[i] * ms.masses[j]


def potential_terms(config, ms: MassSystem, pp: PotentialParams) -> tuple[float, float]:
    """Evaluate (W, V), the a-term and b-term of U, coefficients included."""
    r = _positions(config)
    _, _, _, dist, mm = _pair_data(r, ms)
    w = pp.alpha * float(np.sum(mm * dist ** (-pp.a)))
    v = pp.beta * float(np.sum(mm * dist ** (-pp.b)))
    return w, v


def potential_W(config, ms: MassSystem, pp: PotentialParams) -> float:
    return potential_terms(config, ms, pp)[0]


def potential_V(config, ms: MassSystem, pp: PotentialParams) -> float:
    return potential_terms(config, ms, pp)[1]


def potential_U(config, ms: MassSystem, pp: PotentialParams) -> float:
    w, v = potential_terms(config, ms, pp)
    return w + v


def _grad_terms(r: np.ndarray, ms: MassSystem, pp: PotentialParams):
    """Euclidean gradients (dW/dr_i, dV/dr_i) as two (n, d) arrays."""
    i, j, diff, dist, mm = _pair_data(r, ms)
    grad_w = np.zeros_like(r)
    grad_v = np.zeros_like(r)
    # d/dr_i [mm * d^-c] = -c * mm * d^(-c-2) * (r_i - r_j); the j entry
    # picks up the opposite sign.
    cw = (-pp.a * pp.alpha * mm * dist ** (-pp.a - 2.0))[:, None] * diff
    cv = (-pp.b * pp.beta * mm * dist ** (-pp.b - 2.0))[:, None] * diff
    np.add.at(grad_w, i, cw)
    np.add.at(grad_w, j, -cw)
    np.add.at(grad_v, i, cv)
    np.add.at(grad_v, j, -cv)
    return grad_w, grad_v


def grad_W(config, ms: MassSystem, pp: PotentialParams) -> np.ndarray:
    return _grad_terms(_positions(config), ms, pp)[0]


def grad_V(config, ms: MassSystem, pp: PotentialParams) -> np.ndarray:
    return _grad_terms(_positions(config), ms, pp)[1]


def grad_U(config, ms: MassSystem, pp: PotentialParams) -> np.ndarray:
    """Euclidean gradient dU/dr_i as an (n, d) array."""
    gw, gv = _grad_terms(_positions(config), ms, pp)
    return gw + gv


def d_U(config, ms: MassSystem, pp: PotentialParams, v) -> float:
    """Directional derivative DU(r)(v) for a displacement field v."""
    return float(np.sum(grad_U(config, ms, pp) * np.asarray(v, dtype=float)))


def hess_U(config, ms: MassSystem, pp: PotentialParams, v, w) -> float:
    """Second derivative D^2 U(r)(v, w) as a bilinear form.

    v and w are (n, d) displacement fields.  Each pair i < j contributes

        c * [ (c_exp + 2) / d^2 * (diff . dv)(diff . dw) - dv . dw ]

    with c = exp * coef * m_i m_j * d^(-exp-2), dv = v_i - v_j, for both
    potential terms.
    """
    r = _positions(config)
    v = np.asarray(v, dtype=float)
    w = np.asarray(w, dtype=float)
    i, j, diff, dist, mm = _pair_data(r, ms)
    dv = v[i] - v[j]
    dw = w[i] - w[j]
    ddv = np.sum(diff * dv, axis=1)
    ddw = np.sum(diff * dw, axis=1)
    dvdw = np.sum(dv * dw, axis=1)
    total = 0.0
    for exp, coef in ((pp.a, pp.alpha), (pp.b, pp.beta)):
        if coef == 0.0:
            continue
        c = exp * coef * mm * dist ** (-exp - 2.0)
        total += float(np.sum(c * ((exp + 2.0) / dist**2 * ddv * ddw - dvdw)))
    return total


def hess_U_matrix(config, ms: MassSystem, pp: PotentialParams) -> np.ndarray:
    """Dense (n*d, n*d) Hessian of U in row-major body-then-axis layout."""
    r = _positions(config)
    n, d = r.shape
    i, j, diff, dist, mm = _pair_data(r, ms)
    h = np.zeros((n * d, n * d))
    for exp, coef in ((pp.a, pp.alpha), (pp.b, pp.beta)):
        if coef == 0.0:
            continue
        c = exp * coef * mm * dist ** (-exp - 2.0)
        for p in range(len(dist)):
            u = diff[p]
            block = c[p] * ((exp + 2.0) / dist[p] ** 2 * np.outer(u, u) - np.eye(d))
            bi, bj = i[p] * d, j[p] * d
            h[bi : bi + d, bi : bi + d] += block
            h[bj : bj + d, bj : bj + d] += block
            h[bi : bi + d, bj : bj + d] -= block
            h[bj : bj + d, bi : bi + d] -= block
    return h


def hess_U_restricted(
    config,
    ms: MassSystem,
    pp: PotentialParams,
    v,
    w,
    inertia_I0: float = 1.0,
    tol: float = 1e-9,
) -> float:
    """Hessian of U restricted to the sphere <r, r> = I0, as a bilinear form.

    The restriction adds (a W + b V) / I0 times the mass inner product to
    the ambient Hessian.  The configuration must lie on the sphere within
    tol * I0, otherwise NotOnSphereError is raised.
    """
    r = _positions(config)
    inertia = moment_of_inertia(r, ms)
    if abs(inertia - inertia_I0) > tol * inertia_I0:
        raise NotOnSphereError(
            f"<r, r> = {inertia!r} but sphere has I0 = {inertia_I0!r}"
        )
    w_val, v_val = potential_terms(r, ms, pp)
    correction = (pp.a * w_val + pp.b * v_val) / inertia_I0
    return hess_U(r, ms, pp, v, w) + correction * mass_inner(v, w, ms)


def kinetic_energy(state: PhaseState, ms: MassSystem) -> float:
    """T = p^T M^{-1} p / 2."""
    p = state.momenta
    return float(0.5 * np.sum(p * p / ms.masses[:, None]))


def hamiltonian(state: PhaseState, ms: MassSystem, pp: PotentialParams) -> float:
    """H = T - U; constant along solutions of the equations of motion."""
    return kinetic_energy(state, ms) - potential_U(state.config, ms, pp)


def angular_momentum(state: PhaseState, ms: MassSystem) -> float:
    """Scalar angular momentum sum_i r_i x p_i; zero for collinear states."""
    r = state.config.positions
    p = state.momenta
    if r.shape[1] == 1:
        return 0.0
    return float(np.sum(r[:, 0] * p[:, 1] - r[:, 1] * p[:, 0]))


def total_momentum(state: PhaseState) -> np.ndarray:
    return state.momenta.sum(axis=0)


def validate_state(state: PhaseState, ms: MassSystem, tol: float = 1e-9) -> None:
    """Check the center-of-mass frame invariants of a phase state.

    Raises ValueError if the weighted position mean or the total momentum
    exceeds tol relative to the state's own scale.
    """
    r = state.config.positions
    scale = max(np.sqrt(moment_of_inertia(r, ms) / ms.total_mass), 1e-300)
    com = np.linalg.norm(center_of_mass(r, ms))
    if com > tol * scale:
        raise ValueError(f"center of mass {com:.3e} off origin beyond {tol:.1e}")
    pscale = max(float(np.abs(state.momenta).max()), 1.0)
    ptot = float(np.linalg.norm(total_momentum(state)))
    if ptot > tol * pscale:
        raise ValueError(f"total momentum {ptot:.3e} nonzero beyond {tol:.1e}")


def cartesian_field(ms: MassSystem, pp: PotentialParams, dim: int = 2):
    """Right-hand side of the equations of motion in Cartesian variables.

    Returns f(t, y) for the flat state y = [r.ravel(), p.ravel()] with
    rdot = M^{-1} p and pdot = dU/dr (the potential is attractive).
    """
    n = ms.n
    sz = n * dim

    def field(t, y):
        r = y[:sz].reshape(n, dim)
        p = y[sz:].reshape(n, dim)
        rdot = p / ms.masses[:, None]
        pdot = grad_U(r, ms, pp)
        return np.concatenate([rdot.ravel(), pdot.ravel()])

    return field


def pack_phase(state: PhaseState) -> np.ndarray:
    """Flatten a phase state to the layout used by cartesian_field."""
    return np.concatenate(
        [state.config.positions.ravel(), state.momenta.ravel()]
    )


def unpack_phase(y: np.ndarray, n: int, dim: int) -> PhaseState:
    """Inverse of pack_phase."""
    sz = n * dim
    return PhaseState(
        config=Configuration(positions=y[:sz].reshape(n, dim)),
        momenta=y[sz:].reshape(n, dim),
    )
