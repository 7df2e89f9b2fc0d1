import math

import numpy as np
import pytest

from coisocap.geometry import CoisoSpace
from coisocap.hamiltonian import q2
from coisocap.capacity import (
    DomainError,
    CapacityReport,
    RegionSpec,
    area_A,
    arccos_integral,
    axiom_property_suite,
    lower_bound_capacity,
    nonsqueeze_check,
    radius_R,
    strict_nontriviality_map,
)

HALF_PI = math.pi / 2


def test_area_profile_endpoints_and_monotone():
    assert area_A(0.0) == 0.0
    assert abs(area_A(1.0) - HALF_PI) < 1e-12
    r = np.linspace(0.0, 1.0, 101)
    vals = np.array([area_A(float(t)) for t in r])
    assert np.all(np.diff(vals) > 0)


def test_domain_errors():
    with pytest.raises(DomainError):
        area_A(-0.1)
    with pytest.raises(DomainError):
        area_A(1.0000001)
    with pytest.raises(DomainError):
        radius_R(0.0)
    with pytest.raises(DomainError):
        radius_R(-1.0)
    with pytest.raises(DomainError):
        arccos_integral(1.0)


def test_arccos_integral_cross_check():
    """Both quadrature routes agree with the closed form on a grid of |a|."""
    assert arccos_integral(0.0) == HALF_PI
    # values below 0.05 exercise the corner-flagged route, the rest the
    # substituted one
    for a in [0.001, 0.01, 0.04, 0.05, 0.1, 0.25, 0.5, 0.75, 0.9, 0.99]:
        target = area_A(math.sqrt(1.0 - a * a))
        assert abs(arccos_integral(a) - target) < 1e-8


def test_radius_area_roundtrip():
    for A in [0.01, 0.3, 1.0, HALF_PI, 4.0]:
        R = radius_R(A)
        assert abs(HALF_PI * R * R - A) < 1e-12


def test_region_spec_ball_and_cylinder():
    space = CoisoSpace(n=2, k=1)
    ball = RegionSpec(space, "ball", radius=1.0)
    pts = np.array([[0.0, 0.0, 0.0, 0.0],
                    [1.0, 0.0, 0.0, 0.0],
                    [0.8, 0.8, 0.0, 0.0]])
    assert list(ball.contains(pts)) == [True, True, False]

    # the cylinder only sees the last conjugate plane
    cyl = RegionSpec(space, "cylinder", radius=0.5)
    far = np.array([[0.0, 0.3, 9.0, 0.3],
                    [0.0, 0.6, 0.0, 0.0]])
    assert list(cyl.contains(far)) == [True, False]

    off = np.zeros(4)
    off[0] = 0.2
    with pytest.raises(ValueError):
        RegionSpec(space, "ball", a_center=off, radius=1.0)
    with pytest.raises(ValueError):
        RegionSpec(space, "ball", radius=0.0)
    with pytest.raises(ValueError):
        RegionSpec(space, "banana", radius=1.0)
    with pytest.raises(ValueError):
        RegionSpec(space, "u_region", A=0.0)


def test_region_spec_u_region():
    space = CoisoSpace(n=1, k=0)
    reg = RegionSpec(space, "u_region", A=HALF_PI)
    pts = np.array([[0.9, 0.3],     # inside the half disk
                    [0.9, -5.0],    # deep in the half strip: |x| < 1, y <= 0
                    [0.0, 1.1],     # above the disk
                    [1.5, 0.5],     # right of the disk, y > 0
                    [1.5, -2.0]])   # outside the strip
    assert list(reg.contains(pts)) == [True, True, False, False, False]


def test_strict_nontriviality_map_squeezes_disk():
    margin = 0.05
    lam, psi = strict_nontriviality_map(margin)
    assert abs(lam * lam - (1.0 + 2.0 * margin / math.pi)) < 1e-15

    rng = np.random.default_rng(7)
    theta = rng.uniform(0, 2 * np.pi, 512)
    rr = np.sqrt(rng.uniform(0, 1, 512))
    disk = np.stack([rr * np.cos(theta), rr * np.sin(theta)], axis=-1)
    out = psi(disk)
    # area preserving, image inside the slightly enlarged region
    assert np.allclose(out[..., 0] * out[..., 1], disk[..., 0] * disk[..., 1])
    assert np.all(HALF_PI * q2(out[..., 0], out[..., 1]) <= HALF_PI + margin + 1e-12)

    with pytest.raises(ValueError):
        strict_nontriviality_map(0.0)


def test_capacity_report_rejects_inverted_bounds():
    with pytest.raises(ValueError):
        CapacityReport(lower=1.0, upper=0.5, abs_a=0.0, eps=1e-3, delta=1e-3,
                       admissible=True, analytic_certificate=True)


def test_lower_bound_capacity_frozen_value():
    space = CoisoSpace(n=1, k=0)
    rep = lower_bound_capacity(space, 0.5)
    assert abs(rep.lower - 0.6117889491007423) < 1e-12
    assert rep.upper == HALF_PI
    assert rep.admissible and rep.analytic_certificate
    # certified value sits under the margin-free target, which sits under pi/2
    target = rep.witnesses["target"]
    assert abs(target - 0.6141848493043789) < 1e-12
    assert rep.lower < target < HALF_PI

    # vector center displaced along y_n gives the same certificate
    center = np.array([0.0, -0.5])
    rep2 = lower_bound_capacity(space, center)
    assert rep2.lower == rep.lower
    with pytest.raises(ValueError):
        lower_bound_capacity(space, np.array([0.5, 0.0]))


def test_nonsqueeze_verdicts():
    rep = nonsqueeze_check(1.0, HALF_PI)
    assert rep.verdict == "Consistent"
    assert abs(rep.radius_bound - 1.0) < 1e-12

    rep = nonsqueeze_check(1.0, HALF_PI - 0.01)
    assert rep.verdict == "Obstructed"
    assert rep.area_r > rep.area_bound

    assert nonsqueeze_check(0.5, 0.5).verdict == "Consistent"
    with pytest.raises(DomainError):
        nonsqueeze_check(-0.1, 1.0)
    with pytest.raises(DomainError):
        nonsqueeze_check(0.5, 0.0)


def test_axiom_property_suite_gaps():
    for (n, k) in [(1, 0), (2, 1)]:
        out = axiom_property_suite(CoisoSpace(n, k))
        assert out["field_identity_gap"] <= 1e-9
        assert out["return_time_gap"] <= 1e-9
        assert out["action_scaling_gap"] <= 1e-9
        assert out["translation_return_gap"] <= 1e-9
        assert abs(out["m_h_scaling"] - out["alpha"]) <= 1e-12
        assert out["squeeze_map_inside"]
        assert out["squeeze_map_lambda"] > 1.0
