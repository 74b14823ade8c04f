import math

import numpy as np
import pytest

from monodromy_lab.geodesic import (
    WarpedMetric,
    christoffel,
    effective_potential,
    find_critical_point,
    geodesic_jacobian,
    geodesic_rhs,
    hessian_signature,
    integrate,
    poincare_linearization,
    potential_gradient,
)
from monodromy_lab.symplectic import standard_form


# ---------------------------------------------------------------------------
# metric and Christoffel symbols
# ---------------------------------------------------------------------------

def test_warp_positive_on_domain():
    ys = np.linspace(-5, 5, 41)
    zs = np.linspace(-5, 5, 41)
    yy, zz = np.meshgrid(ys, zs)
    assert np.all(WarpedMetric.warp(yy, zz) > 0)
    # the polynomial factor attains its minimum 7/8 at z^2 = 1/4
    zmin = np.sqrt(0.25)
    assert WarpedMetric.warp(0.0, zmin) == pytest.approx(7.0 / 8.0)


def test_christoffel_origin_all_zero():
    table = christoffel(0.0, 0.0)
    assert all(v == pytest.approx(0.0, abs=1e-15) for v in table.values())


def test_christoffel_sample_values():
    table = christoffel(1.0, 0.0)
    assert table[(0, 1, 0)] == pytest.approx(math.tanh(1.0))
    assert table[(1, 0, 0)] == pytest.approx(-math.sinh(1.0) * math.cosh(1.0))
    # z-derivative factor 8 z^3 - 2 z vanishes at z = 0
    assert table[(0, 0, 2)] == 0.0


def test_christoffel_metric_compatibility():
    # oracle: Levi-Civita formula with finite differences of the metric
    rng = np.random.default_rng(4)
    eps = 1e-6

    def metric(q):
        return WarpedMetric.matrix(q[1], q[2])

    for _ in range(100):
        q = rng.uniform(-1.5, 1.5, size=3)
        dg = np.zeros((3, 3, 3))  # dg[k, i, j] = d_k g_ij
        for k in range(3):
            qp, qm = q.copy(), q.copy()
            qp[k] += eps
            qm[k] -= eps
            dg[k] = (metric(qp) - metric(qm)) / (2 * eps)
        ginv = np.linalg.inv(metric(q))
        gamma_fd = np.zeros((3, 3, 3))
        for a in range(3):
            for b in range(3):
                for c in range(3):
                    gamma_fd[a, b, c] = 0.5 * sum(
                        ginv[a, l] * (dg[b, c, l] + dg[c, b, l] - dg[l, b, c])
                        for l in range(3)
                    )
        table = christoffel(q[1], q[2])
        gamma = np.zeros((3, 3, 3))
        for (a, b, c), v in table.items():
            gamma[a, b, c] = v
        assert np.abs(gamma - gamma_fd).max() <= 1e-7


# ---------------------------------------------------------------------------
# flow
# ---------------------------------------------------------------------------

def test_rhs_invariant_orbits():
    for z0 in (0.0, 0.5, -0.5):
        state = np.array([0.3, 0.0, z0, 1.0, 0.0, 0.0])
        deriv = geodesic_rhs(state)
        assert np.allclose(deriv, [1.0, 0, 0, 0, 0, 0], atol=1e-14)


def test_rhs_energy_derivative_vanishes():
    # closed-form check: dE/dt = grad E . rhs = 0 along the flow
    rng = np.random.default_rng(5)
    eps = 1e-7
    for _ in range(50):
        state = rng.uniform(-1.0, 1.0, size=6)
        deriv = geodesic_rhs(state)
        grad = np.zeros(6)
        for i in range(6):
            sp, sm = state.copy(), state.copy()
            sp[i] += eps
            sm[i] -= eps
            grad[i] = (WarpedMetric.energy(sp) - WarpedMetric.energy(sm)) / (2 * eps)
        assert abs(grad @ deriv) <= 1e-6 * max(1.0, float(WarpedMetric.energy(state)))


def test_jacobian_matches_finite_differences():
    rng = np.random.default_rng(6)
    eps = 1e-6
    for _ in range(25):
        state = rng.uniform(-1.0, 1.0, size=6)
        jac = geodesic_jacobian(state)
        fd = np.zeros((6, 6))
        for i in range(6):
            sp, sm = state.copy(), state.copy()
            sp[i] += eps
            sm[i] -= eps
            fd[:, i] = (geodesic_rhs(sp) - geodesic_rhs(sm)) / (2 * eps)
        assert np.abs(jac - fd).max() <= 1e-6


def test_integrate_central_orbit_closes():
    state0 = np.array([0.0, 0.0, 0.0, 1.0, 0.0, 0.0])
    traj, _ = integrate(state0, 1.0, step=1e-4, stride=1000)
    final = traj.states[-1]
    assert np.abs(final[[1, 2, 4, 5]]).max() <= 1e-8
    assert final[0] == pytest.approx(1.0, abs=1e-10)
    assert traj.energy_drift <= 1e-8


def test_integrate_perturbed_orbit_energy_and_moduli():
    # small transverse kick: bounded oscillation in z, exponential growth in y
    state0 = np.array([0.0, 1e-6, 1e-3, 1.0, 0.0, 0.0])
    traj, _ = integrate(state0, 3.0, step=1e-3, stride=10)
    assert traj.energy_drift <= 1e-8
    zmax = np.abs(traj.states[:, 2]).max()
    assert zmax <= 5e-3  # elliptic direction stays bounded
    # hyperbolic direction: dy(t) ~ dy0 cosh(t) at unit rate and dvy(0) = 0
    ygrow = np.abs(traj.states[:, 1]).max() / 1e-6
    assert ygrow == pytest.approx(math.cosh(3.0), rel=0.01)


def test_integrate_time_reversal():
    state0 = np.array([0.0, 0.05, 0.45, 1.0, 0.02, -0.01])
    traj, _ = integrate(state0, 1.0, step=1e-4, stride=10 ** 9)
    turn = traj.states[-1].copy()
    turn[3:] *= -1.0
    back, _ = integrate(turn, 1.0, step=1e-4, stride=10 ** 9)
    final = back.states[-1].copy()
    final[3:] *= -1.0
    assert np.abs(final - state0).max() <= 1e-7


def test_integrate_blowup_guard():
    state0 = np.array([0.0, 2.5, 0.0, 3.0, 4.0, 0.0])
    traj, _ = integrate(state0, 50.0, step=1e-3, stride=100)
    assert traj.truncated
    assert np.abs(traj.states[-1][[1, 2]]).max() > 10.0 - 1.0


# ---------------------------------------------------------------------------
# Poincare classification
# ---------------------------------------------------------------------------

def test_poincare_central_orbit_semi_hyperbolic():
    report = poincare_linearization(0.0)
    assert report.verdict == "semi-hyperbolic"
    mults = np.array(report.multipliers)
    off = mults[np.abs(np.abs(mults) - 1.0) > 1e-4]
    on = mults[np.abs(np.abs(mults) - 1.0) <= 1e-4]
    assert off.size == 2 and on.size == 2
    # real pair e^{+-1}: unit-speed normalization makes the stretch rate 1
    assert np.max(np.abs(off)) == pytest.approx(math.e, rel=1e-6)
    # elliptic pair e^{+-i sqrt(2)}
    angle = abs(np.angle(on[0]))
    assert angle == pytest.approx(math.sqrt(2.0), abs=1e-6)


@pytest.mark.parametrize("z0", [0.5, -0.5])
def test_poincare_side_orbits_hyperbolic(z0):
    report = poincare_linearization(z0)
    assert report.verdict == "hyperbolic"
    mults = np.array(report.multipliers)
    assert np.abs(mults.imag).max() <= 1e-8
    # stretch exponents T and T*sqrt(32/7) with period T = 7/8
    period = 7.0 / 8.0
    expected = sorted([math.exp(period), math.exp(period * math.sqrt(32.0 / 7.0))])
    got = sorted(np.abs(mults[np.abs(mults) > 1.0]))
    assert got == pytest.approx(expected, rel=1e-6)


def test_poincare_symplectic_pairing():
    for z0 in (0.0, 0.5):
        report = poincare_linearization(z0)
        mults = np.array(report.multipliers)
        assert abs(np.prod(mults) - 1.0) <= 1e-6
        # (mu, 1/mu) pairing
        for mu in mults:
            assert np.min(np.abs(mults - 1.0 / mu)) <= 1e-6 * max(1.0, abs(1.0 / mu))
        assert np.linalg.det(report.monodromy) == pytest.approx(1.0, abs=1e-6)
        assert report.symplectic_defect <= 1e-6


def test_poincare_stable_under_step_halving():
    r1 = poincare_linearization(0.0, step=1e-4)
    r2 = poincare_linearization(0.0, step=5e-5)
    assert r1.verdict == r2.verdict
    m1 = np.sort_complex(np.array(r1.multipliers))
    m2 = np.sort_complex(np.array(r2.multipliers))
    assert np.abs(m1 - m2).max() <= 1e-4


def test_poincare_rejects_non_base_orbit():
    with pytest.raises(ValueError, match="base orbit"):
        poincare_linearization(0.3)


# ---------------------------------------------------------------------------
# effective potential
# ---------------------------------------------------------------------------

def test_potential_at_origin():
    assert effective_potential(0.0, 0.0) == pytest.approx(0.0, abs=1e-15)


def test_potential_gradient_zeros():
    for z0 in (0.0, 0.5, -0.5):
        assert np.abs(potential_gradient(0.0, z0)).max() <= 1e-14


def test_potential_newton_finds_critical_points():
    for seed, target in ((0.1, 0.05), (0.05, 0.45), (-0.02, -0.55)):
        yz = find_critical_point(seed, target)
        assert abs(yz[0]) <= 1e-10
        assert min(abs(yz[1] - b) for b in (0.0, 0.5, -0.5)) <= 1e-10


def test_hessian_signatures():
    assert hessian_signature(0.0, 0.0) == ("-", "+")
    assert hessian_signature(0.0, 0.5) == ("-", "-")
    assert hessian_signature(0.0, -0.5) == ("-", "-")


def test_hessian_matches_finite_differences():
    from monodromy_lab.geodesic import potential_hessian
    rng = np.random.default_rng(7)
    eps = 1e-5
    for _ in range(40):
        y, z = rng.uniform(-1.0, 1.0, size=2)
        h = potential_hessian(y, z)
        fd = np.zeros((2, 2))
        pts = [(eps, 0), (-eps, 0), (0, eps), (0, -eps)]
        gp = [potential_gradient(y + dy, z + dz) for dy, dz in pts]
        fd[:, 0] = (gp[0] - gp[1]) / (2 * eps)
        fd[:, 1] = (gp[2] - gp[3]) / (2 * eps)
        assert np.abs(h - 0.5 * (fd + fd.T)).max() <= 1e-7
