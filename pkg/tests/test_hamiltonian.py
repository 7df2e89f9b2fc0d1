import math

import numpy as np
import pytest

from coisocap import (CoisoSpace, ExtendedHamiltonian, ProfileInvalid,
                      RadialProfile, canonical_center, canonical_lower_profile,
                      comparison_Q, eval_H, extend_hamiltonian,
                      extension_profile, grad_Hbar, q2, q_pi,
                      simple_hamiltonian, steep_profile,
                      validate_extension_profile, validate_lower_profile)
from coisocap.capacity import arccos_integral

HALF_PI = math.pi / 2


# ---------------------------------------------------------------------------
# quadratic forms


def test_q2_one_sided():
    # x^2 + y^2 above the axis, x^2 alone below
    assert q2(2.0, 1.5) == 2.0 ** 2 + 1.5 ** 2
    assert q2(2.0, -1.5) == 2.0 ** 2
    assert q2(0.0, -3.0) == 0.0


def test_q_pi_collects_blocks():
    s = CoisoSpace(n=2, k=1)
    n_scale = 2.0
    p = np.array([0.5, 1.0, -0.25, 2.0])
    got = float(q_pi(s, n_scale, p))
    # last plane one sided; the symplectic V1 pairs weigh twice the
    # isotropic middle ones
    want = (q2(1.0, 2.0)
            + 2.0 * (0.5 ** 2 + 0.25 ** 2) / n_scale ** 2)
    assert abs(got - want) < 1e-15
    below = np.array([0.5, 1.0, -0.25, -2.0])
    want_b = 1.0 ** 2 + 2.0 * (0.5 ** 2 + 0.25 ** 2) / n_scale ** 2
    assert abs(float(q_pi(s, n_scale, below)) - want_b) < 1e-15


# ---------------------------------------------------------------------------
# lower-bound profiles


def test_canonical_profile_hits_target():
    for abs_a in (0.0, 0.5):
        prof = canonical_lower_profile(abs_a, eps=1e-3, delta=1e-3)
        target = arccos_integral(abs_a)
        assert prof.m_h <= target
        assert abs(prof.m_h - target) < 2e-2
        # raises ProfileInvalid on a budget violation
        report = validate_lower_profile(prof)
        assert report["min_budget_margin"] > 0.0


def test_canonical_profile_frozen_value():
    prof = canonical_lower_profile(0.5, eps=1e-3, delta=1e-3)
    assert abs(prof.m_h - 0.6117889491007423) < 1e-12


def test_steep_profile_violates_budget():
    prof = steep_profile(2.0)
    assert abs(prof.m_h - 2.0) < 1e-12
    with pytest.raises(ProfileInvalid):
        validate_lower_profile(prof)


def test_steep_profile_slope_cap():
    with pytest.raises(ProfileInvalid):
        steep_profile(2.6)   # would need ramp slope >= pi


def test_profile_outside_domain():
    prof = canonical_lower_profile(0.0)
    # value continues flat, slope cuts off hard
    assert prof.value(5.0) == prof.m_h
    assert prof.slope(5.0) == 0.0
    assert prof.value(-1.0) == prof.value(prof.knots[0])


def test_profile_json_roundtrip():
    prof = steep_profile(1.2)
    back = RadialProfile.from_json(prof.to_json())
    assert np.array_equal(back.knots, prof.knots)
    assert np.array_equal(back.values, prof.values)
    assert back.mode == prof.mode
    u = np.linspace(0.0, 2.0, 101)
    assert np.allclose(back.value(u), prof.value(u), atol=0.0)


# ---------------------------------------------------------------------------
# radial Hamiltonians


def test_simple_hamiltonian_center_and_values():
    s = CoisoSpace(n=2, k=0)
    prof = canonical_lower_profile(0.5)
    ham = simple_hamiltonian(s, prof)
    assert np.allclose(ham.center, canonical_center(s, 0.5))
    assert ham.center[2 * s.n - 1] == -0.5
    # value is radial around the center
    p = ham.center + np.array([0.3, 0.0, 0.0, 0.4])
    rho2 = 0.3 ** 2 + 0.4 ** 2
    assert abs(eval_H(ham, p) - float(prof.value(rho2))) < 1e-15
    # gradient is radial: J grad rotates the offset plane-wise
    g = ham.grad(p)
    expected = 2.0 * float(prof.slope(rho2)) * (p - ham.center)
    assert np.allclose(g, expected, atol=1e-14)


def test_gradient_matches_fd():
    rng = np.random.default_rng(41)
    s = CoisoSpace(n=2, k=1)
    ham = simple_hamiltonian(s, canonical_lower_profile(0.25))
    h = 1e-6
    worst = 0.0
    for _ in range(25):
        p = ham.center + 0.6 * rng.standard_normal(4)
        g = ham.grad(p)
        for j in range(4):
            e = np.zeros(4)
            e[j] = h
            fd = (eval_H(ham, p + e) - eval_H(ham, p - e)) / (2 * h)
            worst = max(worst, abs(fd - g[j]))
    assert worst < 5e-9


# ---------------------------------------------------------------------------
# extension


def test_extension_profile_shape():
    m_h = 2.0
    prof = extension_profile(m_h)
    rep = validate_extension_profile(prof)
    assert rep["min_over_line"] >= 0.0
    assert rep["max_virial"] <= 1e-12
    # exact linear tail with slope pi/2 + eps
    eps = prof.eps
    u = np.array([9.0, 16.0, 30.0])
    tail = prof.value(u)
    assert np.allclose(np.diff(tail) / np.diff(u), HALF_PI + eps, atol=1e-12)


def test_extend_hamiltonian_frozen_values():
    s = CoisoSpace(n=1, k=0)
    ham = simple_hamiltonian(s, steep_profile(2.0))
    ext = extend_hamiltonian(ham)
    assert isinstance(ext, ExtendedHamiltonian)
    assert abs(ext.eps - 0.02146018366025512) < 1e-15
    assert abs(ext.comparison_constant() - 1.5922565104551516) < 1e-12
    assert ext.n_scale == 2.0


def test_extension_matches_inner_inside():
    s = CoisoSpace(n=1, k=0)
    ham = simple_hamiltonian(s, steep_profile(2.0))
    ext = extend_hamiltonian(ham)
    rng = np.random.default_rng(43)
    pts = 0.5 * rng.standard_normal((64, 2))
    inside = pts[ext.q(pts) <= 1.0 - 1e-9]
    assert inside.shape[0] > 10
    assert np.allclose(ext.value(inside), ham.value(inside), atol=1e-14)
    assert np.allclose(ext.grad(inside), ham.grad(inside), atol=1e-14)


def test_extension_dominated_by_comparison():
    # Hbar(p) <= C * Q(p) with Q the shifted quadratic comparison form
    s = CoisoSpace(n=2, k=1)
    ham = simple_hamiltonian(s, steep_profile(1.8))
    ext = extend_hamiltonian(ham)
    rng = np.random.default_rng(47)
    pts = 4.0 * rng.standard_normal((500, 4))
    lhs = ext.value(pts)
    rhs = ext.comparison_constant() * comparison_Q(s, ext.eps, ext.n_scale, pts)
    assert np.all(lhs <= rhs + 1e-9)


def test_grad_Hbar_consistency():
    s = CoisoSpace(n=1, k=0)
    ext = extend_hamiltonian(simple_hamiltonian(s, steep_profile(2.0)))
    rng = np.random.default_rng(53)
    pts = 2.0 * rng.standard_normal((40, 2))
    assert np.allclose(grad_Hbar(ext, pts), ext.grad(pts), atol=0.0)


def test_extension_gradient_fd():
    s = CoisoSpace(n=1, k=0)
    ext = extend_hamiltonian(simple_hamiltonian(s, steep_profile(2.0)))
    rng = np.random.default_rng(59)
    h = 1e-6
    worst = 0.0
    for _ in range(30):
        p = 2.5 * rng.standard_normal(2)
        if abs(ext.q(p) - 1.0) < 1e-3:
            continue    # the switch point itself is only C^1
        g = ext.grad(p)
        for j in range(2):
            e = np.zeros(2)
            e[j] = h
            fd = (float(ext.value(p + e)) - float(ext.value(p - e))) / (2 * h)
            worst = max(worst, abs(fd - g[j]))
    assert worst < 2e-7
