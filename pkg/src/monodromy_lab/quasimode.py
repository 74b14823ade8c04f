"""Hermite quasimodes and eigenvalue ladders for the elliptic model.

The exact ladder enumerates z = (alpha/2)(2 beta + 1) h + 2 pi k h inside
the window |z| <= c0 h^(1/m).  The perturbed ladder solves the section-map
quantization condition

    2 z - zeta_beta(z) = 2 pi k h,
    zeta_beta(z) = h sum_j lambda_j(z) (2 beta_j + 1)
                   + sum_{l>=1} z^l Q_l(h (2 beta + 1)),

by staged successive substitution; stage increments shrink like
h^((j+1)/m).  Note the normalization: feeding the model rate
lambda(z) = alpha/2 with no corrections makes the direct ladder exactly
twice the solved root, z_direct = 2 * z_root, entry by entry.  A smooth
cutoff schedule resums divergent stage series with per-order truncation
certificates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .weyl import PhaseGrid
from .symplectic import SmoothRamp


class LadderError(ValueError):
    pass


class LadderDivergenceError(LadderError):
    """A stage increment violated the h^((j+1)/m) magnitude ladder."""


class GridCapacityError(ValueError):
    """Hermite index not resolvable on the grid."""


# ---------------------------------------------------------------------------
# Hermite modes
# ---------------------------------------------------------------------------

def hermite_values(beta: int, y: np.ndarray) -> np.ndarray:
    """Normalized Hermite functions phi_beta(y) = H_beta(y) e^{-y^2/2} /
    sqrt(2^beta beta! sqrt(pi)) via the stable three-term recurrence."""
    phi_prev = np.pi ** -0.25 * np.exp(-y ** 2 / 2.0)
    if beta == 0:
        return phi_prev
    phi = math.sqrt(2.0) * y * phi_prev
    for k in range(1, beta):
        phi, phi_prev = (
            math.sqrt(2.0 / (k + 1)) * y * phi - math.sqrt(k / (k + 1)) * phi_prev,
            phi,
        )
    return phi


@dataclass(frozen=True)
class HermiteMode:
    """Product Hermite state on a transverse grid, one 1D factor per
    transverse coordinate, each normalized to unit L2 norm."""

    beta: tuple
    h: float
    grid: PhaseGrid
    values: tuple  # one sample vector per transverse coordinate

    def factor(self, j: int = 0) -> np.ndarray:
        return self.values[j]


def grid_capacity(grid: PhaseGrid, h: float) -> int:
    """Largest resolvable Hermite index: the classical turning point
    sqrt(h (2 beta + 1)) must stay inside a quarter window."""
    return int(((grid.L ** 2 / 4.0) / h - 1.0) / 2.0)


def hermite_mode(beta, h: float, grid: PhaseGrid) -> HermiteMode:
    """Sampled product Hermite mode v_beta with factors
    h^(-1/4) H_b(x / sqrt(h)) e^(-x^2 / 2h), renormalized on the grid.

    Refused when an index exceeds the grid capacity.
    """
    if isinstance(beta, (int, np.integer)):
        beta = (int(beta),)
    beta = tuple(int(b) for b in beta)
    if any(b < 0 for b in beta):
        raise ValueError("Hermite indices must be nonnegative")
    cap = grid_capacity(grid, h)
    if max(beta) > cap:
        raise GridCapacityError(
            f"Hermite index {max(beta)} exceeds grid capacity {cap} "
            f"(need h(2 beta + 1) <= L^2/4)"
        )
    factors = []
    for b in beta:
        vals = hermite_values(b, grid.x / math.sqrt(h)) * h ** -0.25
        vals = vals.astype(complex)
        norm = math.sqrt(float(np.sum(np.abs(vals) ** 2) * grid.dx))
        factors.append(vals / norm)
    return HermiteMode(beta=beta, h=h, grid=grid, values=tuple(factors))


# ---------------------------------------------------------------------------
# Ladders
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LadderEntry:
    k: int
    beta: tuple
    z: float
    residual: float
    stages: tuple = ()


@dataclass(frozen=True)
class QuasimodeLadder:
    m_exponent: float
    c0: float
    h: float
    entries: tuple

    def __post_init__(self):
        zmax = self.c0 * self.h ** (1.0 / self.m_exponent)
        for e in self.entries:
            if abs(e.z) > zmax * (1.0 + 1e-12):
                raise LadderError(
                    f"ladder entry z={e.z!r} falls outside |z| <= {zmax!r}"
                )

    @property
    def count(self) -> int:
        return len(self.entries)

    def z_values(self) -> np.ndarray:
        return np.array([e.z for e in self.entries])


def k_window(h: float, m_exponent: float, c0: float) -> int:
    """Integer window |k| <= c0 h^(1/m - 1) / pi, sized so the k-term stays
    within twice the z-window."""
    return int(math.floor(c0 * h ** (1.0 / m_exponent - 1.0) / math.pi))


def _dedup_check(entries, alpha, h):
    """Distinctness of ladder values.  With rational alpha the values
    (alpha/2)(2 b + 1) h + 2 pi k h collide only for equal (k, b), which is
    certified by exact Fraction keys; otherwise values are compared at
    1e-12 resolution."""
    if isinstance(alpha, Fraction):
        keys = {(Fraction(2 * e.beta[0] + 1, 1) * alpha / 2, e.k) for e in entries}
        if len(keys) != len(entries):
            raise LadderError("duplicate ladder entries at exact rational bookkeeping")
        return
    zs = sorted(e.z for e in entries)
    for a, b in zip(zs, zs[1:]):
        if b - a < 1e-12 * max(1.0, abs(a)):
            raise LadderError(f"ladder values {a!r} and {b!r} collide at 1e-12 resolution")


def exact_model_ladder(alpha, h: float, m_exponent: float, c0: float) -> QuasimodeLadder:
    """All (k, beta) with z = (alpha/2)(2 beta + 1) h + 2 pi k h inside the
    window |z| <= c0 h^(1/m); residuals are identically zero at continuum
    level.  Empty windows give an empty (valid) ladder."""
    if h <= 0 or float(alpha) <= 0:
        raise ValueError("alpha and h must be positive")
    zmax = c0 * h ** (1.0 / m_exponent)
    alpha_f = float(alpha)
    kmax = k_window(h, m_exponent, c0)
    entries = []
    for k in range(-kmax, kmax + 1):
        base = 2.0 * math.pi * k * h
        # (alpha/2)(2b+1)h in [-zmax - base, zmax - base], b >= 0
        hi = (zmax - base) / (alpha_f * h)
        if hi < 0.5:
            continue
        lo = (-zmax - base) / (alpha_f * h)
        b_lo = max(0, int(math.ceil(lo - 0.5)))
        b_hi = int(math.floor(hi - 0.5 + 1e-15))
        for b in range(b_lo, b_hi + 1):
            z = 0.5 * alpha_f * (2 * b + 1) * h + base
            if abs(z) <= zmax * (1.0 + 1e-15):
                entries.append(LadderEntry(k=k, beta=(b,), z=z, residual=0.0))
    _dedup_check(entries, alpha, h)
    entries.sort(key=lambda e: e.z)
    return QuasimodeLadder(m_exponent=m_exponent, c0=c0, h=h, entries=tuple(entries))


def perturbed_ladder(lambda_fns, q_corrections, h: float, m_exponent: float,
                     c0: float, order: int,
                     divergence_margin: float = 50.0) -> QuasimodeLadder:
    """Staged solution of the section-map quantization condition.

    Parameters
    ----------
    lambda_fns : sequence of callables
        Smooth rates lambda_j(z), one per transverse mode.
    q_corrections : sequence of callables
        Coefficients Q_l(I) of the z-power expansion of the transverse
        eigenvalue, l = 1, 2, ...; each maps the action vector
        I = h (2 beta + 1) to a scalar and must vanish at I = 0.
    order : int
        Number of correction stages beyond stage zero.

    Stage zero solves 2 z = h sum lambda_j(0) (2 beta_j + 1) + 2 pi k h;
    each later stage re-substitutes the current root into the right-hand
    side.  Stage increments must obey |dz_j| <= margin * h^((j+1)/m) or a
    divergence report is raised.  Entries are kept when the converged root
    lies inside |z| <= c0 h^(1/m).
    """
    if order < 0:
        raise ValueError("order must be >= 0")
    n_modes = len(lambda_fns)
    for l, q in enumerate(q_corrections, start=1):
        at_zero = float(q(np.zeros(n_modes)))
        if abs(at_zero) > 1e-12:
            raise LadderError(f"correction Q_{l} must vanish at I = 0, got {at_zero!r}")
    zmax = c0 * h ** (1.0 / m_exponent)
    kmax = k_window(h, m_exponent, c0)
    lam0 = np.array([float(f(0.0)) for f in lambda_fns])

    def zeta(z, action):
        val = h * float(sum(f(z) * (2 * b + 1)
                            for f, b in zip(lambda_fns, action)))
        iv = h * (2 * np.asarray(action, dtype=float) + 1.0)
        for l, q in enumerate(q_corrections, start=1):
            val += z ** l * float(q(iv))
        return val

    # enumerate the beta lattice per mode from the stage-zero window
    b_cap = int(max(0.0, (2.0 * zmax / (h * lam0.min()) - 1.0) / 2.0)) + 1
    entries = []
    betas = _beta_lattice(n_modes, b_cap)
    for k in range(-kmax, kmax + 1):
        for beta in betas:
            z0 = 0.5 * (h * float(lam0 @ (2 * np.asarray(beta) + 1.0))
                        + 2.0 * math.pi * k * h)
            if abs(z0) > 2.0 * zmax:
                continue
            stages = [z0]
            z = z0
            diverged = False
            for j in range(1, order + 1):
                z_next = 0.5 * (zeta(z, beta) + 2.0 * math.pi * k * h)
                dz = z_next - z
                bound = divergence_margin * max(abs(z0), h ** (1.0 / m_exponent)) \
                    * h ** (j / m_exponent)
                if abs(dz) > bound:
                    raise LadderDivergenceError(
                        f"stage {j} increment {dz!r} exceeds "
                        f"{bound!r} at (k={k}, beta={beta})"
                    )
                stages.append(dz)
                z = z_next
                if diverged:
                    break
            if abs(z) <= zmax:
                residual = abs(2.0 * z - zeta(z, beta) - 2.0 * math.pi * k * h)
                entries.append(LadderEntry(k=k, beta=tuple(beta), z=z,
                                           residual=residual, stages=tuple(stages)))
    entries.sort(key=lambda e: e.z)
    return QuasimodeLadder(m_exponent=m_exponent, c0=c0, h=h, entries=tuple(entries))


def _beta_lattice(n_modes: int, cap: int):
    if n_modes == 1:
        return [(b,) for b in range(cap + 1)]
    smaller = _beta_lattice(n_modes - 1, cap)
    return [(b,) + rest for b in range(cap + 1) for rest in smaller]


# ---------------------------------------------------------------------------
# Resummation of stage series
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TruncationCertificate:
    order: int
    constant: float
    max_ratio: float
    passed: bool


@dataclass(frozen=True)
class ResummedSeries:
    h_grid: np.ndarray
    values: np.ndarray
    cutoffs: np.ndarray
    certificates: tuple

    def __post_init__(self):
        for arr in (self.h_grid, self.values, self.cutoffs):
            arr.setflags(write=False)


def _default_cutoff_schedule(envelopes, m_exponent, n_max=3):
    """Increasing cutoff scales making the tail of the resummed series
    uniformly small: lambda_j >= 2 (2^(j+1) max(C_j, 1))^(m / max(j+1-m*n, 1))
    for the largest certified order."""
    lams = []
    prev = 1.0
    m = m_exponent
    for j, c in enumerate(envelopes):
        power = m / max(j + 1.0 - m * n_max, 1.0)
        lam = 2.0 * (2.0 ** (j + 1) * max(abs(c), 1.0)) ** power
        prev = max(1.5 * prev, lam)
        lams.append(prev)
    return np.array(lams)


def borel_resum(coefficients, h_grid, m_exponent: float,
                cutoffs=None, orders=(1, 2, 3)):
    """Cutoff-weighted resummation of a stage series z^(j)(h) = c_j h^((j+1)/m).

    The resummed value sum_j chi(lambda_j h) c_j h^((j+1)/m) uses a smooth
    cutoff chi identically one on [0, 1] and supported in [-1, 2], with an
    increasing scale schedule lambda_j.  For each certified order N the
    difference against the partial sum through j = m N is bounded by
    C_N h^N across the h grid; the certificate records the constant and the
    largest observed ratio.
    """
    coefficients = np.asarray(coefficients, dtype=float)
    h_grid = np.sort(np.asarray(h_grid, dtype=float))
    envelopes = np.abs(coefficients)
    if cutoffs is None:
        cutoffs = _default_cutoff_schedule(envelopes, m_exponent, n_max=max(orders))
    cutoffs = np.asarray(cutoffs, dtype=float)
    if np.any(np.diff(cutoffs) <= 0):
        raise ValueError("cutoff scales must be strictly increasing")
    ramp = SmoothRamp(1.0, 2.0)

    def chi(x):
        return 1.0 - ramp(x)

    j_idx = np.arange(coefficients.size)
    powers = (j_idx + 1.0) / m_exponent
    terms = coefficients[None, :] * h_grid[:, None] ** powers[None, :]
    weights = np.array([[chi(lam * h) for lam in cutoffs] for h in h_grid])
    values = (weights * terms).sum(axis=1)

    certificates = []
    for n in orders:
        j_cut = int(m_exponent * n)
        partial = terms[:, : j_cut + 1].sum(axis=1)
        diff = np.abs(values - partial)
        # closed-form constant from the schedule: tail terms need
        # lambda_j h <= 2, truncated head terms need lambda_j h >= 1
        c_n = 0.0
        for j, (c, lam) in enumerate(zip(envelopes, cutoffs)):
            if j > j_cut:
                c_n += abs(c) * (2.0 / lam) ** max((j + 1.0) / m_exponent - n, 0.0)
            else:
                c_n += abs(c) * lam ** max(n - (j + 1.0) / m_exponent, 0.0)
        ratios = diff / h_grid ** n
        max_ratio = float(ratios.max()) if ratios.size else 0.0
        certificates.append(TruncationCertificate(
            order=n, constant=float(c_n), max_ratio=max_ratio,
            passed=bool(max_ratio <= c_n * (1.0 + 1e-9)),
        ))
    return ResummedSeries(h_grid=h_grid, values=values, cutoffs=cutoffs,
                          certificates=tuple(certificates))


# ---------------------------------------------------------------------------
# Residual certification on the product grid
# ---------------------------------------------------------------------------

def residual_certify(k: int, beta: int, z: float, alpha: float, h: float,
                     grid: PhaseGrid, n_t: int = 64) -> float:
    """Residual of the lattice-mode quasimode u(t, x) = e^{i 2 pi k t}
    v_beta(x) under the model operator h D_t + Q - z on the period-one
    time circle times the transverse grid.

    For ladder-quantized z the residual sits at discretization level; a
    detuned z + delta reports |delta| exactly, a useful diagnostic rather
    than an error.
    """
    from .monodromy import rotation_generator

    if abs(k) >= n_t // 2:
        raise ValueError(f"time index {k} beyond the {n_t}-point time grid")
    mode = hermite_mode(beta, h, grid)
    v = mode.factor(0)
    q = rotation_generator(alpha, PhaseGrid(L=grid.L, N=grid.N, hbar=h))
    # u(t_j, x) = e^{i 2 pi k t_j} v(x); h D_t picks 2 pi k h exactly on the
    # time lattice, so the residual reduces to the transverse factor
    t_phase = 2.0 * math.pi * k * h
    resid_vec = (q @ v) + (t_phase - z) * v
    return float(np.sqrt(np.sum(np.abs(resid_vec) ** 2) * grid.dx))
