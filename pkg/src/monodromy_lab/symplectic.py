"""Symplectic linear algebra: polar factors, matrix logarithms, spectral
classification of linearized return maps, quadratic generators, and the
scheduled deformation of the identity into a given symplectic map.

Conventions
-----------
Phase space is R^(2m) with coordinates z = (x_1..x_m, xi_1..xi_m).  The
symplectic structure is the bilinear form omega(v, w) = v^T J w with

    J = [[0, -I], [I, 0]],

so a matrix K is symplectic iff K^T J K = J, and the Lie algebra consists
of B with B^T J + J B = 0.  The Hamiltonian flow matrix of a quadratic
form q(z) = (1/2) z^T H z is -J H (Hamilton's equations
xdot = dq/dxi, xidot = -dq/dx).
"""

from __future__ import annotations

import cmath
import logging
import math
from dataclasses import dataclass, field
from itertools import product as _iter_product

import numpy as np
from scipy.linalg import expm

logger = logging.getLogger(__name__)

DEFAULT_SYMPLECTIC_TOL = 1e-10

KIND_COMPLEX_HYPERBOLIC = "complex-hyperbolic"
KIND_REAL_POSITIVE = "real-positive"
KIND_REAL_NEGATIVE = "real-negative"
KIND_ELLIPTIC = "elliptic"


class SymplecticError(ValueError):
    """Input fails a symplectic-structure precondition."""


class ClassificationAmbiguousError(SymplecticError):
    """An eigenvalue sits in the ambiguous band around the unit circle,
    or exactly at +-1, where no stability type can be assigned."""


class UnsupportedSpectrumError(SymplecticError):
    """Spectrum shape outside the supported classification (for example a
    repeated eigenvalue on the unit circle)."""


def standard_form(dim: int) -> np.ndarray:
    """Matrix of the symplectic form on R^dim: -I upper-right, I lower-left."""
    if dim % 2 != 0 or dim <= 0:
        raise SymplecticError(f"phase-space dimension must be a positive even integer, got {dim}")
    m = dim // 2
    j = np.zeros((dim, dim))
    j[:m, m:] = -np.eye(m)
    j[m:, :m] = np.eye(m)
    return j


def symplectic_defect(mat: np.ndarray) -> float:
    """Frobenius norm of K^T J K - J."""
    mat = np.asarray(mat, dtype=float)
    j = standard_form(mat.shape[0])
    return float(np.linalg.norm(mat.T @ j @ mat - j))


@dataclass(frozen=True)
class SymplecticMatrix:
    """Even-dimensional real matrix with a certified symplectic defect."""

    entries: np.ndarray
    dim: int
    defect: float

    @classmethod
    def from_array(cls, mat, tol: float = DEFAULT_SYMPLECTIC_TOL) -> "SymplecticMatrix":
        mat = np.array(mat, dtype=float)
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
            raise SymplecticError(f"expected a square matrix, got shape {mat.shape}")
        defect = symplectic_defect(mat)
        if defect > tol:
            raise SymplecticError(
                f"matrix is not symplectic: defect {defect:.3e} exceeds tolerance {tol:.3e}"
            )
        mat.setflags(write=False)
        return cls(entries=mat, dim=mat.shape[0], defect=defect)

    @property
    def J(self) -> np.ndarray:
        return standard_form(self.dim)

    def __matmul__(self, other):
        if isinstance(other, SymplecticMatrix):
            return SymplecticMatrix.from_array(self.entries @ other.entries, tol=1e-8)
        return self.entries @ other


def random_sp_algebra_element(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Random element of the symplectic Lie algebra: J S with S symmetric,
    entries uniform in [-1, 1]."""
    m = rng.uniform(-1.0, 1.0, size=(dim, dim))
    s = 0.5 * (m + m.T)
    return standard_form(dim) @ s


def random_symplectic(dim: int, rng: np.random.Generator, scale: float = 1.0) -> SymplecticMatrix:
    """exp of a random Lie-algebra element; symplectic to exponential accuracy."""
    return SymplecticMatrix.from_array(expm(scale * random_sp_algebra_element(dim, rng)), tol=1e-8)


# ---------------------------------------------------------------------------
# Polar decomposition and logarithm of positive-definite symplectic matrices
# ---------------------------------------------------------------------------

def polar_decompose(k: SymplecticMatrix):
    """Factor K = Q P with Q orthogonal symplectic and P symmetric
    positive-definite symplectic.

    Parameters
    ----------
    k : SymplecticMatrix

    Returns
    -------
    (Q, P) : pair of SymplecticMatrix
        ``Q.entries @ P.entries`` reconstructs K to 1e-10.
    """
    a = k.entries
    gram = a.T @ a
    gram = 0.5 * (gram + gram.T)
    evals, vecs = np.linalg.eigh(gram)
    if evals.min() <= 0:
        raise SymplecticError("K^T K is not positive definite; input badly conditioned")
    sq = np.sqrt(evals)
    cond = float(sq.max() / sq.min())
    if cond > 1e12:
        logger.warning("polar_decompose: near-singular input, cond(P) = %.3e", cond)
    p = (vecs * sq) @ vecs.T
    p_inv = (vecs / sq) @ vecs.T
    q = a @ p_inv
    q_mat = SymplecticMatrix.from_array(q, tol=1e-8)
    p_mat = SymplecticMatrix.from_array(p, tol=1e-8)
    resid = np.linalg.norm(q @ p - a)
    if resid > 1e-10 * max(1.0, np.linalg.norm(a)):
        raise SymplecticError(f"polar reconstruction failed: residual {resid:.3e}")
    return q_mat, p_mat


def symplectic_log(a: SymplecticMatrix, tol: float = 1e-8) -> np.ndarray:
    """Real symmetric logarithm of a symmetric positive-definite symplectic
    matrix.  The result B satisfies exp(B) = A and B^T J + J B = 0; the
    eigenvalue logs inherit the pairing log(1/mu) = -log(mu) from the
    (mu, 1/mu) spectrum of A.
    """
    mat = a.entries
    if np.linalg.norm(mat - mat.T) > tol * max(1.0, np.linalg.norm(mat)):
        raise SymplecticError("symplectic_log requires a symmetric matrix")
    evals, vecs = np.linalg.eigh(0.5 * (mat + mat.T))
    if evals.min() <= 0:
        raise SymplecticError(
            f"symplectic_log requires positive-definite input; min eigenvalue {evals.min():.3e}"
        )
    cond = float(evals.max() / evals.min())
    if cond > 1e12:
        logger.warning("symplectic_log: ill-conditioned input, cond(A) = %.3e", cond)
    b = (vecs * np.log(evals)) @ vecs.T
    b = 0.5 * (b + b.T)
    j = a.J
    defect = np.linalg.norm(b.T @ j + j @ b)
    if defect > tol * max(1.0, np.linalg.norm(b)):
        raise SymplecticError(f"logarithm left the symplectic Lie algebra: defect {defect:.3e}")
    return b


# ---------------------------------------------------------------------------
# Spectral classification
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SpectralBlock:
    """One invariant block of the linearized return map.

    mu is the representative eigenvalue (|mu| > 1 for hyperbolic kinds,
    |mu| = 1 for elliptic), k its Jordan multiplicity, lam the chosen
    logarithm branch, and kind one of the four block kinds.
    """

    mu: complex
    k: int
    lam: complex
    kind: str

    @property
    def x_width(self) -> int:
        # number of x-coordinates this block occupies
        return 2 * self.k if self.kind == KIND_COMPLEX_HYPERBOLIC else self.k


@dataclass(frozen=True)
class SpectralClassification:
    """Eigenvalue inventory of a symplectic matrix together with the real
    factorization dS = exp(-J F) exp(B) in an adapted symplectic basis.

    ``basis`` holds the symplectic change of coordinates T, so that
    T^{-1} dS T = exp(-J F) exp(B) with B block-diagonal in the adapted
    coordinates (hyperbolic generator) and F symmetric diagonal (rotation
    generator: pi per real-negative mode, the signed angle per elliptic
    mode, zero elsewhere).
    """

    dim: int
    blocks: tuple
    B: np.ndarray
    F: np.ndarray
    basis: np.ndarray
    source: np.ndarray

    def __post_init__(self):
        total = sum(4 * b.k if b.kind == KIND_COMPLEX_HYPERBOLIC else
                    (2 * b.k if b.kind != KIND_ELLIPTIC else 2)
                    for b in self.blocks)
        if total != self.dim:
            raise SymplecticError(
                f"block dimension count {total} does not match dim {self.dim}"
            )
        for arr in (self.B, self.F, self.basis, self.source):
            arr.setflags(write=False)

    @property
    def n_hc(self) -> int:
        return sum(1 for b in self.blocks if b.kind == KIND_COMPLEX_HYPERBOLIC)

    @property
    def n_hr_plus(self) -> int:
        return sum(1 for b in self.blocks if b.kind == KIND_REAL_POSITIVE)

    @property
    def n_hr_minus(self) -> int:
        return sum(1 for b in self.blocks if b.kind == KIND_REAL_NEGATIVE)

    @property
    def n_e(self) -> int:
        return sum(1 for b in self.blocks if b.kind == KIND_ELLIPTIC)

    @property
    def J(self) -> np.ndarray:
        return standard_form(self.dim)

    def rotation_factor(self) -> np.ndarray:
        """exp(-J F): the unit-modulus part of the map (identity on
        hyperbolic-positive modes, -identity on real-negative modes,
        rotation on elliptic modes)."""
        return expm(-self.J @ self.F)

    def stretch_factor(self) -> np.ndarray:
        """exp(B): the positive-spectrum part of the map."""
        return expm(self.B)

    def reconstruct(self, frame: str = "original") -> np.ndarray:
        """exp(-J F) exp(B), conjugated back to the original coordinates
        when frame == 'original'."""
        rec = self.rotation_factor() @ self.stretch_factor()
        if frame == "adapted":
            return rec
        if frame == "original":
            t = self.basis
            return t @ rec @ np.linalg.inv(t)
        raise ValueError(f"unknown frame {frame!r}")

    def reconstruction_error(self) -> float:
        """Relative error of exp(-J F) exp(B) against the classified matrix."""
        rec = self.reconstruct("original")
        return float(np.linalg.norm(rec - self.source) / np.linalg.norm(self.source))

    def log_branch(self, mu: complex, tol: float = 1e-6) -> complex:
        """Branch value lambda(mu) for any eigenvalue of the classified map.

        Mirrored eigenvalues get exactly mirrored branches:
        lambda(1/mu) = -lambda(mu) and lambda(conj mu) = conj(lambda(mu)).
        """
        mu = complex(mu)
        for b in self.blocks:
            for factor, lam in (
                (b.mu, b.lam),
                (1.0 / b.mu, -b.lam),
                (np.conj(b.mu), np.conj(b.lam)),
                (1.0 / np.conj(b.mu), -np.conj(b.lam)),
            ):
                if abs(mu - factor) <= tol * max(1.0, abs(factor)):
                    return lam
        raise SymplecticError(f"{mu} is not an eigenvalue of the classified map")

    def elliptic_angles(self) -> list:
        """Signed rotation angles Im(lam) of the elliptic blocks."""
        return [float(b.lam.imag) for b in self.blocks if b.kind == KIND_ELLIPTIC]


def _cluster_eigenvalues(evals: np.ndarray, rel_gap: float = 1e-6):
    """Greedy clustering of eigenvalues at relative gap rel_gap.
    Returns a list of (centroid, count)."""
    order = np.lexsort((evals.imag, evals.real))
    clusters = []
    for idx in order:
        ev = evals[idx]
        placed = False
        for c in clusters:
            if abs(ev - c[0] / c[1]) <= rel_gap * max(1.0, abs(ev)):
                c[0] += ev
                c[1] += 1
                placed = True
                break
        if not placed:
            clusters.append([ev, 1])
    return [(c[0] / c[1], c[1]) for c in clusters]


def _rank(mat: np.ndarray, rel_tol: float = 1e-8) -> int:
    sv = np.linalg.svd(mat, compute_uv=False)
    if sv.size == 0 or sv[0] == 0.0:
        return 0
    return int(np.sum(sv > rel_tol * sv[0]))


def _jordan_structure(a: np.ndarray, mu: complex, alg_mult: int):
    """Jordan block sizes for eigenvalue mu via staircase rank tests on
    powers of (A - mu I).  Returns a descending list of block sizes."""
    n = a.shape[0]
    shifted = a.astype(complex) - mu * np.eye(n)
    ranks = [n]
    power = np.eye(n, dtype=complex)
    for _ in range(alg_mult):
        power = power @ shifted
        ranks.append(_rank(power))
        if ranks[-1] <= n - alg_mult:
            break
    # number of blocks of size >= s is rank((A-mu)^(s-1)) - rank((A-mu)^s)
    at_least = [ranks[s - 1] - ranks[s] for s in range(1, len(ranks))]
    sizes = []
    for s in range(len(at_least), 0, -1):
        count = at_least[s - 1] - (at_least[s] if s < len(at_least) else 0)
        sizes.extend([s] * count)
    sizes.sort(reverse=True)
    if sum(sizes) != alg_mult:
        raise UnsupportedSpectrumError(
            f"Jordan staircase for eigenvalue {mu} is numerically ambiguous "
            f"(sizes {sizes}, algebraic multiplicity {alg_mult})"
        )
    return sizes


def _nullspace(mat: np.ndarray, dim_expected: int) -> np.ndarray:
    """Orthonormal nullspace basis (columns), taking the dim_expected
    smallest singular directions."""
    _, sv, vh = np.linalg.svd(mat)
    if dim_expected > 0 and sv.size >= dim_expected + 1:
        kept = sv[-dim_expected]
        cut = sv[-dim_expected - 1] if sv.size > dim_expected else np.inf
        if kept > 1e-4 * max(cut, 1.0):
            logger.debug("nullspace threshold weak: sigma=%.3e next=%.3e", kept, cut)
    return vh[-dim_expected:].conj().T


def _jordan_chains(a: np.ndarray, mu: complex, sizes):
    """Chain basis columns for the generalized eigenspace of mu, organized
    so that A acts as the direct sum of Jordan blocks of the given sizes.
    Works in complex arithmetic; caller realifies if needed."""
    n = a.shape[0]
    shifted = a.astype(complex) - mu * np.eye(n)
    depth = max(sizes)
    mult = sum(sizes)
    # nested nullspaces N_1 subset ... subset N_depth
    nulls = []
    power = np.eye(n, dtype=complex)
    expected = 0
    at_least = {s: sum(1 for k in sizes if k >= s) for s in range(1, depth + 1)}
    for s in range(1, depth + 1):
        power = power @ shifted
        expected += at_least[s]
        nulls.append(_nullspace(power, expected))
    chains = []
    used = np.zeros((n, 0), dtype=complex)
    for size in sizes:  # descending
        top_space = nulls[size - 1]
        # project away lower nullspace and previously used chain vectors
        avoid = [used] if used.shape[1] else []
        if size >= 2:
            avoid.append(nulls[size - 2])
        # also avoid images under shifted^j of used tops to keep chains independent
        candidates = top_space
        if avoid:
            av = np.hstack(avoid)
            q, _ = np.linalg.qr(av)
            candidates = top_space - q @ (q.conj().T @ top_space)
        norms = np.linalg.norm(candidates, axis=0)
        top = candidates[:, int(np.argmax(norms))]
        if np.linalg.norm(top) < 1e-10:
            raise UnsupportedSpectrumError(
                f"failed to extract a Jordan chain of size {size} for eigenvalue {mu}"
            )
        top = top / np.linalg.norm(top)
        chain = [top]
        for _ in range(size - 1):
            chain.append(shifted @ chain[-1])
        chain.reverse()  # chain[0] is a true eigenvector
        chains.append(np.column_stack(chain))
        used = np.hstack([used, chains[-1]])
    basis = np.hstack(chains)
    if _rank(basis) < mult:
        raise UnsupportedSpectrumError(f"Jordan chain basis for {mu} is rank deficient")
    return chains


def _standardize_chain(a: np.ndarray, chain: np.ndarray, lam: complex):
    """Rebase a Jordan chain so the restriction of A becomes exactly
    exp(lam I + N) with N the unit-superdiagonal nilpotent.  Returns the
    new basis columns."""
    k = chain.shape[1]
    if k == 1:
        return chain
    # representation of A on the chain: the k x k Jordan block J_k(mu)
    mu = cmath.exp(lam)
    jb = mu * np.eye(k, dtype=complex) + np.diag(np.ones(k - 1, dtype=complex), 1)
    # nilpotent part of log(J_k(mu)) via the finite series log(I + N/mu)
    nil = np.diag(np.ones(k - 1, dtype=complex), 1) / mu
    lognil = np.zeros((k, k), dtype=complex)
    term = np.eye(k, dtype=complex)
    for j in range(1, k):
        term = term @ nil
        lognil += ((-1) ** (j + 1) / j) * term
    # chain basis of the nilpotent lognil: columns lognil^(k-1) e_k .. e_k
    cols = []
    vec = np.zeros(k, dtype=complex)
    vec[-1] = 1.0
    for j in range(k - 1, -1, -1):
        cols.append(np.linalg.matrix_power(lognil, j) @ vec)
    p = np.column_stack(cols)
    return chain @ p


def _real_basis_from_complex(cols: np.ndarray) -> np.ndarray:
    """Realify complex columns u -> (Re u, Im u) pairs, interleaved."""
    out = []
    for j in range(cols.shape[1]):
        out.append(cols[:, j].real)
        out.append(cols[:, j].imag)
    return np.column_stack(out)


def _hc_block_matrix(lam: complex, k: int) -> np.ndarray:
    """Real 2k x 2k generator block for a complex-hyperbolic eigenvalue:
    2x2 rotations-plus-stretch on the diagonal, identity couplings above."""
    lam2 = np.array([[lam.real, lam.imag], [-lam.imag, lam.real]])
    blk = np.zeros((2 * k, 2 * k))
    for i in range(k):
        blk[2 * i:2 * i + 2, 2 * i:2 * i + 2] = lam2
        if i + 1 < k:
            blk[2 * i:2 * i + 2, 2 * i + 2:2 * i + 4] = np.eye(2)
    return blk


def _hr_block_matrix(lam: float, k: int) -> np.ndarray:
    return lam * np.eye(k) + np.diag(np.ones(k - 1), 1)


def classify_spectrum(ds, tol_unit: float = 1e-6,
                      tol_factor: float = 1e-8) -> SpectralClassification:
    """Classify the spectrum of a symplectic matrix and build the real
    factorization dS = exp(-J F) exp(B) in an adapted symplectic basis.

    Eigenvalues are sorted into four kinds: complex-hyperbolic quadruples
    (|mu| > 1, Im mu != 0), real pairs mu > 1, real pairs mu < -1, and
    unit-modulus elliptic pairs.  Jordan multiplicities are detected by
    staircase rank tests.  Elliptic angles are signed by the symplectic
    orientation of the invariant plane, so a negatively-oriented rotation
    carries Im(lam) < 0.

    Parameters
    ----------
    ds : SymplecticMatrix or array
    tol_unit : float
        Distance to the unit circle below which an eigenvalue counts as
        unit-modulus.  Eigenvalues with distance in (tol_unit, 10*tol_unit)
        are refused as ambiguous.
    tol_factor : float
        Relative tolerance for the reconstruction check.

    Raises
    ------
    ClassificationAmbiguousError
        Eigenvalue in the ambiguous band, or at +-1.
    UnsupportedSpectrumError
        Repeated elliptic eigenvalue (multiplicity > 1).
    """
    if not isinstance(ds, SymplecticMatrix):
        ds = SymplecticMatrix.from_array(ds)
    a = ds.entries
    n = ds.dim
    m = n // 2
    evals = np.linalg.eig(a)[0]
    clusters = _cluster_eigenvalues(evals)

    hc, hrp, hrm, ell = [], [], [], []
    cluster_tol = 1e-6
    for mu, mult in clusters:
        dist = abs(abs(mu) - 1.0)
        if dist <= tol_unit:
            if abs(mu.imag) <= cluster_tol * max(1.0, abs(mu)):
                raise ClassificationAmbiguousError(
                    f"eigenvalue {mu:.6g} sits at +-1 on the unit circle; "
                    "neither hyperbolic nor nonresonant-elliptic"
                )
            if mu.imag > 0:
                ell.append((mu / abs(mu), mult))
            continue
        if dist < 10.0 * tol_unit:
            raise ClassificationAmbiguousError(
                f"eigenvalue {mu:.6g} lies in the ambiguous band around the unit "
                f"circle (distance {dist:.3e}, tol {tol_unit:.1e})"
            )
        if abs(mu) < 1.0:
            continue  # handled through its reciprocal partner
        if abs(mu.imag) <= cluster_tol * max(1.0, abs(mu)):
            mu_r = mu.real
            if mu_r > 0:
                hrp.append((complex(mu_r), mult))
            else:
                hrm.append((complex(mu_r), mult))
        elif mu.imag > 0:
            hc.append((mu, mult))
        # Im mu < 0 representatives are the conjugates; skipped.

    for mu, mult in ell:
        if mult > 1:
            raise UnsupportedSpectrumError(
                f"elliptic eigenvalue {mu:.6g} has multiplicity {mult}; "
                "repeated unit-modulus eigenvalues are unsupported"
            )

    blocks = []
    x_cols = []   # columns spanning the x-half of the adapted basis
    f_groups = [] # parallel list of xi-half column groups
    j_form = standard_form(n)
    evals_full, evecs_full = np.linalg.eig(a)

    def _simple_eigvec(mu):
        idx = int(np.argmin(np.abs(evals_full - mu)))
        return evecs_full[:, idx:idx + 1]

    def _dual_columns(x_group: np.ndarray, dual_space: np.ndarray) -> np.ndarray:
        """Solve for the omega-dual basis inside dual_space with pairing
        omega(x_i, f_j) = -delta_ij."""
        gram = x_group.T @ j_form @ dual_space
        coeff = np.linalg.solve(gram, -np.eye(gram.shape[0]))
        return dual_space @ coeff

    # --- complex-hyperbolic groups -----------------------------------------
    for mu, mult in hc:
        lam = cmath.log(mu)
        if mult == 1:
            sizes = [1]
            chains = [_simple_eigvec(mu)]
            dual_space = _simple_eigvec(1.0 / mu)
        else:
            sizes = _jordan_structure(a, mu, mult)
            chains = _jordan_chains(a, mu, sizes)
            dual_space = np.hstack(_jordan_chains(a, 1.0 / mu, sizes))
        std = [_standardize_chain(a, c, lam) for c in chains]
        for c in std:
            k = c.shape[1]
            gram = c.T @ j_form @ dual_space
            coeff = np.linalg.solve(gram.astype(complex), -2.0 * np.eye(k))
            w_cols = dual_space @ coeff
            e_real = _real_basis_from_complex(c)
            f_real = _real_basis_from_complex(w_cols.conj())  # (Re w, -Im w)
            x_cols.append(e_real)
            f_groups.append(f_real)
            blocks.append(SpectralBlock(mu=mu, k=k, lam=lam, kind=KIND_COMPLEX_HYPERBOLIC))

    # --- real hyperbolic groups --------------------------------------------
    for family, kind in ((hrp, KIND_REAL_POSITIVE), (hrm, KIND_REAL_NEGATIVE)):
        for mu, mult in family:
            mu_r = mu.real
            lam = math.log(abs(mu_r))
            sizes = [1] * mult if mult == 1 else _jordan_structure(a, mu_r, mult)
            if max(sizes) == 1:
                space = _nullspace(a - mu_r * np.eye(n), mult)
                chains = [space[:, i:i + 1] for i in range(mult)]
                dual_space = _nullspace(a - (1.0 / mu_r) * np.eye(n), mult)
            else:
                chains = [np.real(c) for c in _jordan_chains(a, mu_r, sizes)]
                dual_space = np.real(np.hstack(_jordan_chains(a, 1.0 / mu_r, sizes)))
            if mu_r > 0:
                std = [np.real(_standardize_chain(a, c.astype(complex), complex(lam)))
                       for c in chains]
            else:
                std = [_standardize_negative_chain(a, c, lam) for c in chains]
            for c in std:
                k = c.shape[1]
                f_cols = _dual_columns(c, dual_space)
                x_cols.append(c)
                f_groups.append(f_cols)
                blocks.append(SpectralBlock(mu=complex(mu_r), k=k, lam=complex(lam), kind=kind))

    # --- elliptic pairs ------------------------------------------------------
    for mu, _ in ell:
        u = _simple_eigvec(mu)[:, 0]
        gamma = complex(u @ (j_form @ np.conj(u))) / 1j  # omega(u, conj u) = i*gamma
        gamma = gamma.real
        if abs(gamma) < 1e-12:
            raise UnsupportedSpectrumError(
                f"degenerate symplectic pairing for elliptic eigenvalue {mu:.6g}"
            )
        if gamma < 0:
            u = np.conj(u)       # negatively oriented plane: flip representative
            mu = np.conj(mu)
            gamma = -gamma
        u = u * math.sqrt(2.0 / gamma)
        alpha = cmath.log(mu).imag
        x_cols.append(u.real[:, None])
        f_groups.append(u.imag[:, None])
        blocks.append(SpectralBlock(mu=mu, k=1, lam=complex(0.0, alpha), kind=KIND_ELLIPTIC))

    # --- order blocks: hc, hr+, hr-, elliptic --------------------------------
    kind_order = {KIND_COMPLEX_HYPERBOLIC: 0, KIND_REAL_POSITIVE: 1,
                  KIND_REAL_NEGATIVE: 2, KIND_ELLIPTIC: 3}
    perm = sorted(range(len(blocks)), key=lambda i: (kind_order[blocks[i].kind], -blocks[i].k))
    blocks = [blocks[i] for i in perm]
    x_cols = [x_cols[i] for i in perm]
    f_groups = [f_groups[i] for i in perm]

    if sum(c.shape[1] for c in x_cols) != m:
        raise UnsupportedSpectrumError(
            "classified blocks do not fill the phase space: "
            f"{sum(c.shape[1] for c in x_cols)} x-columns for m = {m}"
        )

    basis = np.column_stack([np.hstack(x_cols), np.hstack(f_groups)])
    basis_defect = symplectic_defect(basis)
    if basis_defect > 1e-6:
        raise SymplecticError(
            f"adapted basis is not symplectic: defect {basis_defect:.3e}"
        )

    # --- assemble B and F in the adapted coordinates -------------------------
    bx = np.zeros((m, m))
    fx = np.zeros((m, m))
    pos = 0
    for b in blocks:
        w = b.x_width
        if b.kind == KIND_COMPLEX_HYPERBOLIC:
            bx[pos:pos + w, pos:pos + w] = _hc_block_matrix(b.lam, b.k)
        elif b.kind in (KIND_REAL_POSITIVE, KIND_REAL_NEGATIVE):
            bx[pos:pos + w, pos:pos + w] = _hr_block_matrix(b.lam.real, b.k)
            if b.kind == KIND_REAL_NEGATIVE:
                fx[pos:pos + w, pos:pos + w] = math.pi * np.eye(b.k)
        else:
            fx[pos, pos] = b.lam.imag
        pos += w

    big_b = np.zeros((n, n))
    big_b[:m, :m] = bx
    big_b[m:, m:] = -bx.T
    big_f = np.zeros((n, n))
    big_f[:m, :m] = fx
    big_f[m:, m:] = fx

    cls = SpectralClassification(dim=n, blocks=tuple(blocks), B=big_b, F=big_f,
                                 basis=basis, source=np.array(a))
    err = cls.reconstruction_error()
    if err > tol_factor:
        raise SymplecticError(
            f"factorization exp(-J F) exp(B) fails to reconstruct the input: "
            f"relative error {err:.3e} > {tol_factor:.1e}"
        )
    return cls


def _standardize_negative_chain(a: np.ndarray, chain: np.ndarray, lam: float):
    """Chain rebasing for a negative real eigenvalue -e^lam: the adapted
    block must satisfy A|block = -exp(lam I + N) (rotation factor -I times
    stretch exp(B_j))."""
    k = chain.shape[1]
    if k == 1:
        return chain
    mu = -math.exp(lam)
    nil = np.diag(np.ones(k - 1), 1) / mu
    lognil = np.zeros((k, k))
    term = np.eye(k)
    for j in range(1, k):
        term = term @ nil
        lognil += ((-1) ** (j + 1) / j) * term
    cols = []
    vec = np.zeros(k)
    vec[-1] = 1.0
    for j in range(k - 1, -1, -1):
        cols.append(np.linalg.matrix_power(lognil, j) @ vec)
    return chain @ np.column_stack(cols)


# ---------------------------------------------------------------------------
# Nonresonance scan
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class NonresonanceVerdict:
    kind: str                 # "resonant" or "independent"
    witness: tuple = ()       # integer coefficients when resonant
    pi_multiple: int = 0      # the integer p with sum c_j alpha_j = p*pi
    bound: int = 0

    @property
    def is_resonant(self) -> bool:
        return self.kind == "resonant"


def nonresonance_check(alphas, denominator_bound: int,
                       tol: float = 1e-9) -> NonresonanceVerdict:
    """Scan for integer relations sum c_j alpha_j in pi*Z with
    |c_j| <= denominator_bound.

    Returns a resonant verdict with witness coefficients when a relation is
    found; otherwise "independent" up to the scanned bound (true
    independence is not decidable numerically, so the bound is recorded).
    """
    alphas = [float(av) for av in alphas]
    if denominator_bound < 1:
        raise ValueError("denominator_bound must be >= 1")
    ranges = [range(-denominator_bound, denominator_bound + 1)] * len(alphas)
    # scan smallest coefficient vectors first so the witness is minimal,
    # preferring a positive leading nonzero entry
    candidates = sorted(
        (c for c in _iter_product(*ranges) if any(c)),
        key=lambda c: (max(abs(v) for v in c), sum(abs(v) for v in c),
                       [-v for v in c]),
    )
    for coeffs in candidates:
        total = sum(c * av for c, av in zip(coeffs, alphas))
        ratio = total / math.pi
        nearest = round(ratio)
        scale = max(1.0, sum(abs(c * av) for c, av in zip(coeffs, alphas)) / math.pi)
        if abs(ratio - nearest) <= tol * scale:
            return NonresonanceVerdict(kind="resonant", witness=tuple(coeffs),
                                       pi_multiple=int(nearest), bound=denominator_bound)
    return NonresonanceVerdict(kind="independent", bound=denominator_bound)


# ---------------------------------------------------------------------------
# Quadratic generators
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class QuadraticHamiltonian:
    """Quadratic generators attached to a spectral classification, in the
    adapted coordinates.

    q_hyp generates the stretch factor: exp(flow(q_hyp)) = exp(B).
    q_rot generates the rotation factor: exp(flow(q_rot)) = exp(-J F).
    q_art is the auxiliary stretch 2 x_j xi_j on each elliptic mode used to
    stand in for the rotation during the scheduled deformation.
    """

    dim: int
    hyp_coeffs: np.ndarray   # m x m matrix M with q_hyp = <M x, xi>
    rot_coeffs: np.ndarray   # per-mode coefficients of (x_j^2 + xi_j^2)/1 in q_rot, = F_jj/2
    ah_coeffs: np.ndarray    # per-mode coefficients c_j with q_art = sum c_j x_j xi_j

    def __post_init__(self):
        for arr in (self.hyp_coeffs, self.rot_coeffs, self.ah_coeffs):
            arr.setflags(write=False)

    @property
    def m(self) -> int:
        return self.dim // 2

    def evaluate(self, x, xi) -> float:
        """q_hyp(x, xi) = <M x, xi>; real for real inputs."""
        x = np.asarray(x, dtype=float)
        xi = np.asarray(xi, dtype=float)
        return float(xi @ (self.hyp_coeffs @ x))

    def evaluate_rotation(self, x, xi) -> float:
        """q_rot(x, xi) = sum_j (F_jj / 2)(x_j^2 + xi_j^2)."""
        x = np.asarray(x, dtype=float)
        xi = np.asarray(xi, dtype=float)
        return float(np.sum(self.rot_coeffs * (x ** 2 + xi ** 2)))

    def evaluate_artificial(self, x, xi) -> float:
        x = np.asarray(x, dtype=float)
        xi = np.asarray(xi, dtype=float)
        return float(np.sum(self.ah_coeffs * x * xi))

    def hessian(self, which: str = "hyp") -> np.ndarray:
        m = self.m
        h = np.zeros((self.dim, self.dim))
        if which == "hyp":
            h[:m, m:] = self.hyp_coeffs.T
            h[m:, :m] = self.hyp_coeffs
        elif which == "rot":
            h[:m, :m] = np.diag(2.0 * self.rot_coeffs)
            h[m:, m:] = np.diag(2.0 * self.rot_coeffs)
        elif which == "art":
            h[:m, m:] = np.diag(self.ah_coeffs)
            h[m:, :m] = np.diag(self.ah_coeffs)
        else:
            raise ValueError(f"unknown generator {which!r}")
        return h

    def flow_matrix(self, which: str = "hyp") -> np.ndarray:
        """Hamiltonian matrix -J Hess(q); its exponential is the time-one flow."""
        return -standard_form(self.dim) @ self.hessian(which)


def build_quadratic_hamiltonian(cls: SpectralClassification) -> QuadraticHamiltonian:
    """Quadratic generators of the two factors of a classified map.

    The stretch generator is <M x, xi> with M the x-block of B: per
    complex-hyperbolic block Re(lam)(x1 xi1 + x2 xi2) - Im(lam)(x1 xi2 - x2 xi1)
    plus chain couplings, per real block lam x_l xi_l plus chain couplings.
    The rotation generator is (pi/2)(x^2+xi^2) per real-negative mode and
    (Im lam / 2)(x^2+xi^2) per elliptic mode.
    """
    m = cls.dim // 2
    hyp = np.array(cls.B[:m, :m])
    rot = np.array(np.diag(cls.F[:m, :m]) / 2.0)
    ah = np.zeros(m)
    pos = 0
    for b in cls.blocks:
        if b.kind == KIND_ELLIPTIC:
            ah[pos] = 2.0
        pos += b.x_width
    return QuadraticHamiltonian(dim=cls.dim, hyp_coeffs=hyp, rot_coeffs=rot, ah_coeffs=ah)


# ---------------------------------------------------------------------------
# Smooth schedules and deformations
# ---------------------------------------------------------------------------

def _bump(t):
    """exp(-1/t) for t > 0, exactly 0 for t <= 0."""
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    pos = t > 0
    out[pos] = np.exp(-1.0 / t[pos])
    return out


def _bump_prime(t):
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    pos = t > 0
    out[pos] = np.exp(-1.0 / t[pos]) / t[pos] ** 2
    return out


class SmoothRamp:
    """Monotone C-infinity ramp from 0 to 1 with derivative supported in
    [start, stop], built from the normalized exp(-1/t) bump."""

    def __init__(self, start: float, stop: float):
        if not stop > start:
            raise ValueError("ramp requires stop > start")
        self.start = float(start)
        self.stop = float(stop)

    def _s(self, t):
        return (np.asarray(t, dtype=float) - self.start) / (self.stop - self.start)

    def __call__(self, t):
        s = self._s(t)
        f, g = _bump(s), _bump(1.0 - s)
        with np.errstate(invalid="ignore"):
            val = np.where(s <= 0.0, 0.0, np.where(s >= 1.0, 1.0, f / (f + g)))
        return val if val.ndim else float(val)

    def derivative(self, t):
        s = self._s(t)
        f, g = _bump(s), _bump(1.0 - s)
        fp, gp = _bump_prime(s), _bump_prime(1.0 - s)
        denom = (f + g) ** 2
        inside = (s > 0.0) & (s < 1.0)
        out = np.zeros_like(np.asarray(s, dtype=float))
        num = fp * g + f * gp
        out[inside] = num[inside] / denom[inside] / (self.stop - self.start)
        return out if out.ndim else float(out)


@dataclass(frozen=True)
class DeformationSchedule:
    """The four scheduled cutoffs driving the staged deformation: rotation
    ramp psi1 on [0, 1/4], holding window chi on [1/4, 1/2], auxiliary
    stretch ramp psi2 on [1/2, 3/4], and main ramp psi on [3/4, 1]."""

    psi1: SmoothRamp
    psi2: SmoothRamp
    psi: SmoothRamp
    chi: SmoothRamp

    @classmethod
    def default(cls) -> "DeformationSchedule":
        return cls(psi1=SmoothRamp(0.0, 0.25), chi=SmoothRamp(0.25, 0.5),
                   psi2=SmoothRamp(0.5, 0.75), psi=SmoothRamp(0.75, 1.0))


def reparametrize_flow(a_func, chi: SmoothRamp, mat_dim: int,
                       rtol: float = 1e-11, atol: float = 1e-13):
    """Compress a time-one matrix flow into the interior of [0, 1].

    Given the fundamental solution phi of phi' = A(t) phi, the rescaled
    generator B(t) = chi'(t) A(chi(t)) has support inside (0, 1) and the
    solution of psi' = B psi satisfies psi(t) = phi(chi(t)), in particular
    psi(1) = phi(1).

    Returns (b_func, psi_end, phi_end, report).
    """
    from scipy.integrate import solve_ivp

    def b_func(t):
        return chi.derivative(t) * np.asarray(a_func(chi(t)), dtype=float)

    ident = np.eye(mat_dim)

    def rhs_psi(t, y):
        return (b_func(t) @ y.reshape(mat_dim, mat_dim)).ravel()

    def rhs_phi(t, y):
        return (np.asarray(a_func(t), dtype=float) @ y.reshape(mat_dim, mat_dim)).ravel()

    sol_psi = solve_ivp(rhs_psi, (0.0, 1.0), ident.ravel(), method="DOP853",
                        rtol=rtol, atol=atol)
    sol_phi = solve_ivp(rhs_phi, (0.0, 1.0), ident.ravel(), method="DOP853",
                        rtol=rtol, atol=atol)
    if not (sol_psi.success and sol_phi.success):
        raise RuntimeError(
            "flow integration failed: "
            f"psi: {sol_psi.message!r}, phi: {sol_phi.message!r}"
        )
    psi_end = sol_psi.y[:, -1].reshape(mat_dim, mat_dim)
    phi_end = sol_phi.y[:, -1].reshape(mat_dim, mat_dim)
    report = {
        "deviation": float(np.linalg.norm(psi_end - phi_end)),
        "psi_steps": int(sol_psi.t.size),
        "phi_steps": int(sol_phi.t.size),
    }
    return b_func, psi_end, phi_end, report


def composite_deformation(cls: SpectralClassification, sched: DeformationSchedule,
                          t: float, frame: str = "adapted") -> SymplecticMatrix:
    """The staged linear deformation of the identity into the classified map.

    In the adapted coordinates the path is

        kappa(t) = exp(-psi1(t) J F) exp(psi2(t) H_art) exp(psi(t) (B - H_art)),

    with H_art the flow matrix of the auxiliary stretch on the elliptic
    modes.  kappa(0) = I, kappa(1) = exp(-J F) exp(B), and on the holding
    window (the support of chi') kappa(t) equals the rotation factor
    exp(-J F) exactly: identity on hyperbolic-positive modes, -identity on
    real-negative modes, a rotation on elliptic modes.
    """
    if not 0.0 <= t <= 1.0:
        raise ValueError(f"deformation time must lie in [0, 1], got {t}")
    q = build_quadratic_hamiltonian(cls)
    h_art = q.flow_matrix("art")
    j = cls.J
    gen_main = cls.B - h_art
    kappa = (
        expm(-float(sched.psi1(t)) * (j @ cls.F))
        @ expm(float(sched.psi2(t)) * h_art)
        @ expm(float(sched.psi(t)) * gen_main)
    )
    if frame == "original":
        kappa = cls.basis @ kappa @ np.linalg.inv(cls.basis)
    elif frame != "adapted":
        raise ValueError(f"unknown frame {frame!r}")
    return SymplecticMatrix.from_array(kappa, tol=1e-8)
