import math

import numpy as np
import pytest

from monodromy_lab.monodromy import (
    AliasingError,
    ModelParams,
    build_elliptic_monodromy,
    build_hyperbolic_monodromy,
    conjugated_contraction,
    contraction_sweep,
    elliptic_propagator,
    escape_weight,
    fit_gap_exponent,
    microlocal_basis,
    rescale_state,
    restricted_norm,
    rotation_generator,
    unitarity_defect,
)
from monodromy_lab.quasimode import hermite_mode
from monodromy_lab.weyl import PhaseGrid, op_exponential

HT = 0.2
GRID = PhaseGrid(L=16.0, N=512, hbar=HT)


def model(h=0.01, s=0.3, lam=1.0):
    return ModelParams(lam=lam, alpha=1.0, h=h, hbar_tilde=HT, s=s, grid=GRID)


# ---------------------------------------------------------------------------
# parameters
# ---------------------------------------------------------------------------

def test_params_validate_ordering():
    with pytest.raises(ValueError, match="h <= hbar_tilde"):
        ModelParams(h=0.5, hbar_tilde=0.2)
    with pytest.raises(ValueError, match="weight"):
        ModelParams(h=0.01, hbar_tilde=0.2, s=0.9)
    # h == hbar_tilde is allowed (trivial zoom)
    ModelParams(h=0.2, hbar_tilde=0.2)


# ---------------------------------------------------------------------------
# rescaling
# ---------------------------------------------------------------------------

def test_rescale_identity_when_parameters_match():
    g = PhaseGrid(L=4.0, N=128, hbar=0.1)
    rng = np.random.default_rng(0)
    u = rng.standard_normal(128) + 1j * rng.standard_normal(128)
    out = rescale_state(u, 0.1, 0.1, g, g)
    assert np.allclose(out, u, atol=1e-14)


def test_rescale_gaussian_closed_form():
    h, ht = 0.0125, 0.2
    ratio = math.sqrt(h / ht)
    grid_to = PhaseGrid(L=8.0, N=256, hbar=ht)
    grid_from = PhaseGrid(L=8.0 * ratio, N=256, hbar=h)
    u = np.exp(-grid_from.x ** 2 / (2.0 * h))
    out = rescale_state(u, h, ht, grid_from, grid_to)
    expected = (h / ht) ** 0.25 * np.exp(-grid_to.x ** 2 / (2.0 * ht))
    assert np.allclose(out, expected, atol=1e-12)


def test_rescale_preserves_norm():
    h, ht = 0.2 / 16.0, 0.2
    ratio = math.sqrt(h / ht)
    grid_to = PhaseGrid(L=8.0, N=512, hbar=ht)
    grid_from = PhaseGrid(L=8.0 * ratio, N=512, hbar=h)
    rng = np.random.default_rng(1)
    # smooth random state: random Hermite combination
    u = sum(rng.standard_normal() * hermite_mode(b, h, grid_from).factor(0)
            for b in range(8))
    n_from = grid_from.norm(u)
    out = rescale_state(u, h, ht, grid_from, grid_to)
    assert grid_to.norm(out) == pytest.approx(n_from, abs=1e-8 * n_from)


def test_rescale_general_window_interpolation():
    # unmatched windows exercise the trigonometric interpolation path
    h, ht = 0.05, 0.2
    grid_from = PhaseGrid(L=6.0, N=256, hbar=h)
    grid_to = PhaseGrid(L=8.0, N=256, hbar=ht)
    u = np.exp(-grid_from.x ** 2).astype(complex)
    out = rescale_state(u, h, ht, grid_from, grid_to)
    expected = (h / ht) ** 0.25 * np.exp(-(math.sqrt(h / ht) * grid_to.x) ** 2)
    assert np.abs(out - expected).max() <= 1e-8


def test_rescale_refuses_aliasing():
    h, ht = 0.05, 0.2
    grid_from = PhaseGrid(L=2.0, N=128, hbar=h)
    grid_to = PhaseGrid(L=8.0, N=128, hbar=ht)
    u = np.exp(-grid_from.x ** 2)
    with pytest.raises(AliasingError):
        rescale_state(u, h, ht, grid_from, grid_to)


# ---------------------------------------------------------------------------
# hyperbolic model
# ---------------------------------------------------------------------------

def test_hyperbolic_monodromy_unitary():
    m = build_hyperbolic_monodromy(model(h=0.1))
    assert unitarity_defect(m) <= 1e-9


def test_hyperbolic_monodromy_zero_rate_is_identity():
    m = build_hyperbolic_monodromy(model(lam=0.0, h=0.1))
    assert np.abs(m - np.eye(GRID.N)).max() <= 1e-12


def test_hyperbolic_variance_growth():
    # the time-one map spreads the ground Gaussian along the unstable
    # direction: position variance grows by e^(2 lam) (lam=1, h=hbar_tilde)
    p = ModelParams(lam=1.0, h=HT, hbar_tilde=HT, s=0.3, grid=GRID)
    m = build_hyperbolic_monodromy(p)
    u = np.exp(-GRID.x ** 2 / (2.0 * HT)).astype(complex)
    u /= GRID.norm(u)
    v = m @ u
    var0 = np.sum(GRID.x ** 2 * np.abs(u) ** 2) * GRID.dx
    var1 = np.sum(GRID.x ** 2 * np.abs(v) ** 2) * GRID.dx
    assert var1 / var0 == pytest.approx(math.e ** 2, rel=0.05)


def test_group_law():
    p = model(h=0.1)
    q1 = build_hyperbolic_monodromy(p)  # time-one map
    # fractional times via the same generator
    from monodromy_lab.monodromy import _stretch_generator
    gen = _stretch_generator(p).matrix
    gen = 0.5 * (gen + gen.conj().T)
    m_t = lambda t: op_exponential(gen, -1.0j * t / p.h)
    lhs = m_t(0.4) @ m_t(0.6)
    assert np.linalg.norm(lhs - q1, 2) <= 1e-8


# ---------------------------------------------------------------------------
# conjugated contraction
# ---------------------------------------------------------------------------

def test_contraction_no_weight_is_unitary():
    res = conjugated_contraction(model(s=0.0), gap_data=False)
    assert res.norm_conjugated == pytest.approx(1.0, abs=1e-9)


def test_contraction_strict_for_positive_weight():
    res = conjugated_contraction(model(s=0.3), gap_data=False)
    assert res.norm_conjugated < 1.0
    assert res.unitarity_defect <= 1e-9


def test_contraction_monotone_in_weight():
    rs = []
    for s in (0.0, 0.125, 0.25, 0.375, 0.5):
        rs.append(conjugated_contraction(model(s=s), gap_data=False).norm_conjugated)
    assert all(b < a + 1e-12 for a, b in zip(rs, rs[1:]))
    assert rs[0] == pytest.approx(1.0, abs=1e-9)


def test_contraction_sign_flip_expands():
    # with the opposite weight sign the restricted map expands: smallest
    # singular value on the subspace stays above 1/r of the contracted run
    p_plus = model(s=0.3)
    r_plus = conjugated_contraction(p_plus, gap_data=False).norm_conjugated
    m = build_hyperbolic_monodromy(p_plus)
    gw = escape_weight(p_plus)
    m_minus = op_exponential(gw, +0.3) @ m @ op_exponential(gw, -0.3)
    basis = microlocal_basis(GRID)
    smin = np.linalg.svd(m_minus @ basis, compute_uv=False)[-1]
    assert smin >= 1.0 / r_plus - 1e-9
    assert smin > 1.0


def test_contraction_gap_inequality_random_states():
    p = model(s=0.3)
    res = conjugated_contraction(p, gap_data=False)
    r = res.norm_conjugated
    m = build_hyperbolic_monodromy(p)
    gw = escape_weight(p)
    m_tilde = op_exponential(gw, -p.s) @ m @ op_exponential(gw, p.s)
    basis = microlocal_basis(GRID)
    rng = np.random.default_rng(7)
    for _ in range(25):
        w = rng.standard_normal(basis.shape[1]) + 1j * rng.standard_normal(basis.shape[1])
        u = basis @ w
        u /= np.linalg.norm(u)
        gap = (1.0 - (u.conj() @ (m_tilde @ u))).real
        assert gap >= (1.0 - r) - 1e-9


def test_contraction_sweep_constant_rate_and_gap_fit():
    hs = [1 / 100, 1 / 200]
    small_gap_grid = PhaseGrid(L=32.0, N=256, hbar=HT)
    rows = contraction_sweep(hs, grid=PhaseGrid(L=16.0, N=256, hbar=HT),
                             gap_grid=small_gap_grid)
    rs = [row.norm_conjugated for row in rows]
    assert max(rs) < 1.0
    assert max(rs) - min(rs) <= 1e-12
    assert all(row.gap_value > 0 for row in rows)
    assert np.isfinite(rows[0].gap_exponent)


def test_fit_gap_exponent_recovers_power_law():
    hs = np.array([1e-2, 1e-3, 1e-4])
    c, n = fit_gap_exponent(hs, 2.0 * hs ** 1.5)
    assert n == pytest.approx(1.5, abs=1e-12)
    assert c == pytest.approx(0.5, rel=1e-9)


# ---------------------------------------------------------------------------
# elliptic model
# ---------------------------------------------------------------------------

ELL_GRID = PhaseGrid(L=1.0, N=512, hbar=1e-3)


def test_elliptic_hermite_eigenrelation():
    alpha, h = 1.0, 1e-3
    prop = elliptic_propagator(alpha, h, ELL_GRID)
    for k, b in ((0, 0), (1, 3), (-2, 7)):
        z = 0.5 * alpha * (2 * b + 1) * h + 2.0 * math.pi * k * h
        m = build_elliptic_monodromy(alpha, h, z, ELL_GRID, propagator=prop)
        v = hermite_mode(b, h, ELL_GRID).factor(0)
        phase = np.exp(1j * (z - 0.5 * alpha * (2 * b + 1) * h) / h)
        assert np.sqrt(np.sum(np.abs(m @ v - phase * v) ** 2) * ELL_GRID.dx) <= 1e-8
        # quantized z fixes the mode
        assert np.sqrt(np.sum(np.abs(m @ v - v) ** 2) * ELL_GRID.dx) <= 1e-8


def test_elliptic_detuned_phase_closed_form():
    alpha, h = 1.0, 1e-3
    prop = elliptic_propagator(alpha, h, ELL_GRID)
    m = build_elliptic_monodromy(alpha, h, 0.0, ELL_GRID, propagator=prop)
    v = hermite_mode(0, h, ELL_GRID).factor(0)
    # ||M(0) v0 - v0|| = |e^{-i alpha/2} - 1| = 2 |sin(alpha/4)|
    resid = np.sqrt(np.sum(np.abs(m @ v - v) ** 2) * ELL_GRID.dx)
    assert resid == pytest.approx(2.0 * abs(math.sin(alpha / 4.0)), abs=1e-8)


def test_elliptic_unitarity_and_eigenphase_slope():
    alpha, h = 1.0, 1e-3
    prop = elliptic_propagator(alpha, h, ELL_GRID)
    assert unitarity_defect(prop) <= 1e-9
    # eigenphase of M(z) on v_k is linear in k with slope -alpha
    z = 0.0
    m = build_elliptic_monodromy(alpha, h, z, ELL_GRID, propagator=prop)
    phases = []
    for b in range(4):
        v = hermite_mode(b, h, ELL_GRID).factor(0)
        lam = (v.conj() @ (m @ v)) * ELL_GRID.dx
        phases.append(np.angle(lam))
    diffs = np.diff(np.unwrap(phases))
    assert np.allclose(diffs, -alpha, atol=1e-8)


def test_rotation_generator_spectrum():
    alpha, h = 1.0, 1e-3
    q = rotation_generator(alpha, ELL_GRID)
    v = hermite_mode(5, h, ELL_GRID).factor(0)
    val = (v.conj() @ (q @ v)).real * ELL_GRID.dx
    assert val == pytest.approx(0.5 * alpha * 11 * h, rel=1e-10)
