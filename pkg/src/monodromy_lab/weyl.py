"""Discrete Weyl quantization on a periodic position grid.

A symbol a(x, xi) becomes a dense complex matrix through the symmetrized
kernel

    K(x_i, x_j) = (2 pi hbar)^-1 sum_l a((x_i+x_j)/2, xi_l)
                  exp(i (x_i - x_j) xi_l / hbar) dxi dx,

evaluated by FFT over the frequency index for every midpoint.  Real
symbols give Hermitian matrices; symbols independent of xi give diagonal
multiplication operators.  States are sample vectors u(x_k); inner
products carry the quadrature weight dx.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigvalsh, expm

_EXP_OVERFLOW = 600.0


class GridError(ValueError):
    """Grid cannot represent the requested object."""


@dataclass(frozen=True)
class PhaseGrid:
    """Uniform position grid of N points on [-L, L) with the discrete
    Fourier dual scaled by hbar: xi_j = pi * hbar * (j - N/2) / L."""

    L: float
    N: int
    hbar: float

    def __post_init__(self):
        if self.N % 2 != 0 or self.N <= 0:
            raise GridError(f"N must be a positive even integer, got {self.N}")
        if self.L <= 0 or self.hbar <= 0:
            raise GridError("L and hbar must be positive")

    @property
    def x(self) -> np.ndarray:
        return -self.L + 2.0 * self.L * np.arange(self.N) / self.N

    @property
    def dx(self) -> float:
        return 2.0 * self.L / self.N

    @property
    def xi(self) -> np.ndarray:
        return np.pi * self.hbar * (np.arange(self.N) - self.N // 2) / self.L

    @property
    def dxi(self) -> float:
        return np.pi * self.hbar / self.L

    @property
    def xi_max(self) -> float:
        return float(np.abs(self.xi).max())

    def norm(self, u) -> float:
        u = np.asarray(u)
        return float(np.sqrt(np.sum(np.abs(u) ** 2) * self.dx))

    def inner(self, u, v) -> complex:
        return complex(np.vdot(u, v) * self.dx)

    def normalize(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=complex)
        return u / self.norm(u)


@dataclass(frozen=True)
class WeylOperator:
    """Dense matrix realization of a quantized symbol on a PhaseGrid."""

    grid: PhaseGrid
    matrix: np.ndarray
    symbol_tag: str = ""

    def __post_init__(self):
        self.matrix.setflags(write=False)

    @property
    def is_hermitian(self) -> bool:
        scale = max(1.0, float(np.abs(self.matrix).max()))
        return bool(np.abs(self.matrix - self.matrix.conj().T).max() <= 1e-10 * scale)

    def hermitian_defect(self) -> float:
        return float(np.linalg.norm(self.matrix - self.matrix.conj().T))


def quantize(symbol, grid: PhaseGrid, symbol_tag: str = "",
             xi_support: float | None = None) -> WeylOperator:
    """Weyl-quantize a symbol a(x, xi) on the grid.

    Parameters
    ----------
    symbol : callable
        Vectorized function of two arrays (x, xi).
    grid : PhaseGrid
    symbol_tag : str
        Provenance string stored on the operator.
    xi_support : float, optional
        Effective momentum support of the symbol/states; when given, the
        grid must satisfy max |xi| >= 4 * xi_support or quantization is
        refused with the Nyquist estimate for N.

    Notes
    -----
    Matrix entries are assembled by FFT over the frequency index for each
    of the 2N-1 midpoints (x_i + x_j)/2, so the cost is O(N^2 log N).
    Real-valued symbols produce Hermitian matrices to rounding accuracy.
    """
    n = grid.N
    if xi_support is not None and grid.xi_max < 4.0 * xi_support:
        needed = int(np.ceil(4.0 * xi_support * 2.0 * grid.L / (np.pi * grid.hbar)))
        raise GridError(
            f"Nyquist violation: max |xi| = {grid.xi_max:.3g} < 4 * {xi_support:.3g}; "
            f"need N >= {needed}"
        )
    # midpoints (x_i + x_j)/2 live on the half-step grid of 2N-1 points
    mid = (-2.0 * grid.L + grid.dx * np.arange(2 * n - 1)) / 2.0
    vals = np.asarray(symbol(mid[:, None], grid.xi[None, :]), dtype=complex)
    if vals.shape != (2 * n - 1, n):
        vals = np.broadcast_to(vals, (2 * n - 1, n)).copy()
    if not np.all(np.isfinite(vals)):
        raise GridError("symbol evaluated to a non-finite value on the grid")
    # sum_l a(m, xi_l) e^{i (x_i - x_j) xi_l / hbar}: with r = i - j the phase
    # is e^{i 2 pi (l - N/2) r / N}, an inverse DFT in l with a parity twist
    transform = n * np.fft.ifft(vals, axis=1)  # index r = (i - j) mod N
    r_signed = np.arange(-(n - 1), n)
    phase = np.where(r_signed % 2 == 0, 1.0, -1.0)  # e^{-i pi r}
    ii, jj = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    mid_idx = ii + jj
    r_idx = (ii - jj) % n
    kernel = transform[mid_idx, r_idx] * phase[(ii - jj) + (n - 1)]
    mat = kernel * (grid.dxi * grid.dx / (2.0 * np.pi * grid.hbar))
    return WeylOperator(grid=grid, matrix=mat, symbol_tag=symbol_tag)


def fourier_multiplier(func, grid: PhaseGrid) -> np.ndarray:
    """Direct construction F^-1 diag(func(xi)) F; reference for symbols
    independent of x."""
    n = grid.N
    f = np.fft.fft(np.eye(n), axis=0)
    finv = np.fft.ifft(np.eye(n), axis=0)
    diag = func(np.fft.ifftshift(grid.xi))
    return finv @ (diag[:, None] * f)


def position_multiplier(func, grid: PhaseGrid) -> np.ndarray:
    return np.diag(np.asarray(func(grid.x), dtype=complex))


def op_exponential(a, t: complex, check: bool = False) -> np.ndarray:
    """Scaling-and-squaring exponential exp(t A) of a quantized operator.

    Overflow is refused upfront from the norm estimate.  With check=True
    the inverse is computed as well and the roundtrip defect
    ||exp(tA) exp(-tA) - I|| must stay below 1e-9.
    """
    mat = a.matrix if isinstance(a, WeylOperator) else np.asarray(a)
    # growth is governed by the Hermitian part of t A; a skew-Hermitian
    # exponent stays unitary no matter how large t gets
    herm = 0.5 * (t * mat + np.conj(t) * mat.conj().T)
    scale = np.linalg.norm(herm, ord=1)
    if scale > _EXP_OVERFLOW:
        raise OverflowError(
            f"operator exponential refused: ||Herm(t A)||_1 = {scale:.3e} "
            f"exceeds {_EXP_OVERFLOW:.0f}"
        )
    out = expm(t * mat)
    if check:
        back = expm(-t * mat)
        defect = np.linalg.norm(out @ back - np.eye(mat.shape[0]))
        if defect > 1e-9:
            raise ArithmeticError(f"exponential roundtrip defect {defect:.3e} > 1e-9")
    return out


def min_eigenvalue(a: WeylOperator) -> float:
    """Smallest eigenvalue of a Hermitian quantized operator."""
    if not a.is_hermitian:
        raise ValueError(
            f"min_eigenvalue requires a Hermitian operator "
            f"(defect {a.hermitian_defect():.3e})"
        )
    h = 0.5 * (a.matrix + a.matrix.conj().T)
    return float(eigvalsh(h, subset_by_index=(0, 0))[0])


def microlocal_cutoff(grid: PhaseGrid, width_x: float = 1.0,
                      width_xi: float | None = None) -> np.ndarray:
    """Phase-space cutoff onto states concentrated near the origin:
    a Gaussian envelope in position composed with its Fourier twin in
    momentum.  Leakage outside the window is exponentially small."""
    if width_xi is None:
        width_xi = width_x
    gx = np.exp(-grid.x ** 2 / (2.0 * width_x ** 2))
    gxi = np.exp(-np.fft.ifftshift(grid.xi) ** 2 / (2.0 * width_xi ** 2))
    pos = gx[:, None] * np.eye(grid.N)
    mom = np.fft.ifft(gxi[:, None] * np.fft.fft(np.eye(grid.N), axis=0), axis=0)
    return pos @ mom


def cutoff_range(cutoff: np.ndarray, sv_tol: float = 1e-6,
                 max_rank: int | None = None) -> np.ndarray:
    """Orthonormal basis (columns) of the numerical range of a cutoff:
    left singular vectors with sigma >= sv_tol * sigma_max."""
    u, s, _ = np.linalg.svd(cutoff)
    if s[0] == 0.0:
        raise ValueError("cutoff is identically zero")
    rank = int(np.sum(s >= sv_tol * s[0]))
    if max_rank is not None:
        rank = min(rank, max_rank)
    return u[:, :rank]
