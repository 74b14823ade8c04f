"""Geodesic flow on the warped product (R/Z)_x x R_y x R_z with metric
diag(w^2, 1, 1), w(y, z) = cosh(y) (2 z^4 - z^2 + 1).

Three closed geodesics run along the x-circle at (y, z) = (0, 0) and
(0, +-1/2).  The module integrates the flow and the variational (tangent)
equations with fixed-step RK4, classifies the transverse monodromy of the
closed orbits through its Floquet multipliers, and analyzes the effective
potential w^-2 - 1 whose Hessian signatures distinguish the
semi-hyperbolic orbit at z = 0 from the hyperbolic pair at z = +-1/2.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .symplectic import standard_form

DOMAIN_BOUND = 10.0
BASE_Z = (0.0, 0.5, -0.5)

VERDICT_SEMI_HYPERBOLIC = "semi-hyperbolic"
VERDICT_HYPERBOLIC = "hyperbolic"
VERDICT_ELLIPTIC = "elliptic"


def _u(z):
    return 2.0 * z ** 4 - z ** 2 + 1.0


def _u_prime(z):
    return 8.0 * z ** 3 - 2.0 * z


def _u_second(z):
    return 24.0 * z ** 2 - 2.0


class WarpedMetric:
    """Closed-form warp factor, metric matrix, and partial derivatives."""

    @staticmethod
    def warp(y, z):
        return np.cosh(y) * _u(z)

    @staticmethod
    def warp_dy(y, z):
        return np.sinh(y) * _u(z)

    @staticmethod
    def warp_dz(y, z):
        return np.cosh(y) * _u_prime(z)

    @staticmethod
    def matrix(y, z):
        w = WarpedMetric.warp(y, z)
        return np.diag([w * w, 1.0, 1.0])

    @staticmethod
    def energy(state):
        """g(v, v) along the trajectory; conserved by the flow."""
        state = np.asarray(state, dtype=float)
        w = WarpedMetric.warp(state[..., 1], state[..., 2])
        return (w * state[..., 3]) ** 2 + state[..., 4] ** 2 + state[..., 5] ** 2


def christoffel(y: float, z: float) -> dict:
    """The six nonzero Christoffel symbols Gamma^a_{bc} of the warped
    metric, keyed by (a, b, c) with coordinates indexed x=0, y=1, z=2."""
    ty = math.tanh(y)
    uz = _u(z)
    ratio = _u_prime(z) / uz
    g_yxx = -math.sinh(y) * math.cosh(y) * uz ** 2
    g_zxx = -_u_prime(z) * uz * math.cosh(y) ** 2
    return {
        (0, 0, 1): ty, (0, 1, 0): ty,
        (0, 0, 2): ratio, (0, 2, 0): ratio,
        (1, 0, 0): g_yxx,
        (2, 0, 0): g_zxx,
    }


def geodesic_rhs(state):
    """First-order geodesic system for state (x, y, z, vx, vy, vz)."""
    x, y, z, vx, vy, vz = state
    uz = _u(z)
    ratio = _u_prime(z) / uz
    return np.array([
        vx,
        vy,
        vz,
        -2.0 * math.tanh(y) * vy * vx - 2.0 * ratio * vz * vx,
        math.sinh(y) * math.cosh(y) * uz ** 2 * vx ** 2,
        _u_prime(z) * uz * math.cosh(y) ** 2 * vx ** 2,
    ])


def _rhs_with_tangent(state, tangent):
    """Geodesic right-hand side together with the linearized flow acting
    on a 6 x k tangent block."""
    base = geodesic_rhs(state)
    jac = geodesic_jacobian(state)
    return base, jac @ tangent


def geodesic_jacobian(state):
    """Closed-form Jacobian of geodesic_rhs."""
    x, y, z, vx, vy, vz = state
    uz = _u(z)
    up = _u_prime(z)
    upp = _u_second(z)
    ty = math.tanh(y)
    sech2 = 1.0 / math.cosh(y) ** 2
    shch = math.sinh(y) * math.cosh(y)
    ch2 = math.cosh(y) ** 2
    ratio = up / uz
    dratio_dz = (upp * uz - up * up) / uz ** 2
    jac = np.zeros((6, 6))
    jac[0, 3] = 1.0
    jac[1, 4] = 1.0
    jac[2, 5] = 1.0
    # d(vx')/d(...)
    jac[3, 1] = -2.0 * sech2 * vy * vx
    jac[3, 2] = -2.0 * dratio_dz * vz * vx
    jac[3, 3] = -2.0 * ty * vy - 2.0 * ratio * vz
    jac[3, 4] = -2.0 * ty * vx
    jac[3, 5] = -2.0 * ratio * vx
    # d(vy')/d(...)
    jac[4, 1] = math.cosh(2.0 * y) * uz ** 2 * vx ** 2
    jac[4, 2] = 2.0 * shch * uz * up * vx ** 2
    jac[4, 3] = 2.0 * shch * uz ** 2 * vx
    # d(vz')/d(...)
    jac[5, 1] = 2.0 * up * uz * shch * vx ** 2
    jac[5, 2] = (upp * uz + up * up) * ch2 * vx ** 2
    jac[5, 3] = 2.0 * up * uz * ch2 * vx
    return jac


@dataclass
class Trajectory:
    t: np.ndarray
    states: np.ndarray       # shape (n, 6): columns x, y, z, vx, vy, vz
    energy: np.ndarray
    truncated: bool = False

    @property
    def energy_drift(self) -> float:
        return float(np.abs(self.energy - self.energy[0]).max())


def integrate(state0, t_final: float, step: float = 1e-4,
              stride: int = 1, tangent0=None):
    """Fixed-step fourth-order Runge-Kutta integration of the geodesic
    flow, optionally carrying a tangent block for the variational
    equations.  Blows past |y| or |z| > 10 truncate the trajectory with a
    flag.  Returns (Trajectory, tangent_final)."""
    if step <= 0:
        raise ValueError("step must be positive")
    state = np.asarray(state0, dtype=float).copy()
    tangent = None if tangent0 is None else np.asarray(tangent0, dtype=float).copy()
    n_steps = int(round(t_final / step))
    ts, rows = [0.0], [state.copy()]
    truncated = False

    def deriv(s, tg):
        if tg is None:
            return geodesic_rhs(s), None
        return _rhs_with_tangent(s, tg)

    for i in range(n_steps):
        k1, m1 = deriv(state, tangent)
        k2, m2 = deriv(state + 0.5 * step * k1,
                       None if tangent is None else tangent + 0.5 * step * m1)
        k3, m3 = deriv(state + 0.5 * step * k2,
                       None if tangent is None else tangent + 0.5 * step * m2)
        k4, m4 = deriv(state + step * k3,
                       None if tangent is None else tangent + step * m3)
        state = state + step / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        if tangent is not None:
            tangent = tangent + step / 6.0 * (m1 + 2 * m2 + 2 * m3 + m4)
        if abs(state[1]) > DOMAIN_BOUND or abs(state[2]) > DOMAIN_BOUND:
            truncated = True
            ts.append((i + 1) * step)
            rows.append(state.copy())
            break
        if (i + 1) % stride == 0 or i == n_steps - 1:
            ts.append((i + 1) * step)
            rows.append(state.copy())
    states = np.array(rows)
    traj = Trajectory(t=np.array(ts), states=states,
                      energy=WarpedMetric.energy(states), truncated=truncated)
    return traj, tangent


@dataclass(frozen=True)
class PoincareReport:
    base_z: float
    period: float
    multipliers: tuple
    verdict: str
    closure_residual: float
    symplectic_defect: float
    monodromy: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.monodromy.setflags(write=False)

    def to_json(self) -> str:
        return json.dumps({
            "base_z": self.base_z,
            "period": self.period,
            "multipliers": [[m.real, m.imag] for m in self.multipliers],
            "verdict": self.verdict,
            "closure_residual": self.closure_residual,
            "symplectic_defect": self.symplectic_defect,
            "monodromy": [list(row) for row in self.monodromy],
        })


def _classify_multipliers(mults, tol=1e-4):
    pairs_off = 0
    pairs_on = 0
    for mu in mults:
        if abs(abs(mu) - 1.0) > tol:
            pairs_off += 1
        else:
            pairs_on += 1
    pairs_off //= 2
    pairs_on //= 2
    if pairs_off and pairs_on:
        return VERDICT_SEMI_HYPERBOLIC
    if pairs_off:
        return VERDICT_HYPERBOLIC
    return VERDICT_ELLIPTIC


def poincare_linearization(z0: float, vx0: float | None = None,
                           step: float = 1e-4) -> PoincareReport:
    """Transverse linearization of one of the three closed geodesics.

    The section is the hypersurface x = x0 (mod 1) with transverse
    coordinates (y, z, vy, vz); on the base orbits the return time is the
    x-period T = 1 / vx0.  The variational equations are integrated along
    one period and the 4 x 4 transverse monodromy extracted; multipliers
    come in symplectic pairs (mu, 1/mu).

    vx0 defaults to 1 / w(0, z0), normalizing the orbit to unit energy.
    """
    if min(abs(z0 - b) for b in BASE_Z) > 1e-12:
        raise ValueError(f"base orbit must have z0 in {BASE_Z}, got {z0}")
    w0 = float(WarpedMetric.warp(0.0, z0))
    if vx0 is None:
        vx0 = 1.0 / w0
    period = 1.0 / vx0
    state0 = np.array([0.0, 0.0, z0, vx0, 0.0, 0.0])
    traj, tangent = integrate(state0, period, step=step, stride=10 ** 9,
                              tangent0=np.eye(6))
    closure = float(np.linalg.norm(traj.states[-1][[1, 2, 4, 5]]
                                   - state0[[1, 2, 4, 5]]))
    if closure > 1e-6:
        raise ValueError(f"orbit failed to close: residual {closure:.3e}")
    # transverse block in (y, z, vy, vz)
    idx = [1, 2, 4, 5]
    mono = tangent[np.ix_(idx, idx)]
    mults = np.linalg.eigvals(mono)
    order = np.argsort(-np.abs(mults))
    mults = mults[order]
    j = standard_form(4)
    defect = float(np.linalg.norm(mono.T @ j @ mono - j))
    verdict = _classify_multipliers(mults)
    return PoincareReport(
        base_z=z0, period=period, multipliers=tuple(complex(m) for m in mults),
        verdict=verdict, closure_residual=closure,
        symplectic_defect=defect, monodromy=mono,
    )


def effective_potential(y, z):
    """w^-2 - 1: the potential governing transverse stability."""
    return WarpedMetric.warp(y, z) ** -2.0 - 1.0


def potential_gradient(y, z):
    w = WarpedMetric.warp(y, z)
    return np.array([
        -2.0 * w ** -3.0 * WarpedMetric.warp_dy(y, z),
        -2.0 * w ** -3.0 * WarpedMetric.warp_dz(y, z),
    ])


def potential_hessian(y, z):
    """Closed-form second derivatives of the effective potential."""
    uz = _u(z)
    up = _u_prime(z)
    upp = _u_second(z)
    sech2 = 1.0 / math.cosh(y) ** 2
    ty = math.tanh(y)
    # V = sech(y)^2 u(z)^-2 - 1
    v_yy = (4.0 * ty ** 2 - 2.0 * sech2) * sech2 * uz ** -2.0
    v_zz = sech2 * (6.0 * up ** 2 * uz ** -4.0 - 2.0 * upp * uz ** -3.0)
    v_yz = (-2.0 * sech2 * ty) * (-2.0 * uz ** -3.0 * up)
    return np.array([[v_yy, v_yz], [v_yz, v_zz]])


def find_critical_point(seed_y: float, seed_z: float, tol: float = 1e-12,
                        max_iter: int = 60):
    """Damped Newton iteration on the potential gradient."""
    yz = np.array([seed_y, seed_z], dtype=float)
    for _ in range(max_iter):
        g = potential_gradient(*yz)
        if np.linalg.norm(g) < tol:
            return yz
        h = potential_hessian(*yz)
        delta = np.linalg.solve(h, -g)
        scale = 1.0
        base = np.linalg.norm(g)
        while scale > 1e-6:
            trial = yz + scale * delta
            if np.linalg.norm(potential_gradient(*trial)) < base:
                break
            scale *= 0.5
        else:
            raise RuntimeError(
                f"Newton stalled from seed ({seed_y}, {seed_z}) at {yz}"
            )
        yz = yz + scale * delta
    raise RuntimeError(f"Newton failed to converge from seed ({seed_y}, {seed_z})")


def hessian_signature(y: float, z: float) -> tuple:
    """Signs of the Hessian eigenvalues at a critical point."""
    evals = np.linalg.eigvalsh(potential_hessian(y, z))
    return tuple("+" if e > 0 else "-" for e in evals)
