import numpy as np
import pytest

from coisocap import (CoisoSpace, ParityViolation, action_form_a,
                      action_form_a_quadrature, action_value, e_plus,
                      evaluate, flow_norm, from_modes, hs_norm, path_from_json,
                      path_to_json, project, project_part, truncate,
                      zero_path)
from coisocap.spectral import parity_mask


HALF_PI = np.pi / 2


def random_path(space, rng, max_freq=8, scale=1.0):
    mask = parity_mask(space, max_freq)
    coeffs = rng.standard_normal(mask.shape) * scale
    coeffs[~mask] = 0.0
    modes = {m: coeffs[m + max_freq]
             for m in range(-max_freq, max_freq + 1)}
    return from_modes(space, modes, max_freq=max_freq)


def test_parity_rules():
    s = CoisoSpace(n=2, k=1)
    # odd frequencies carry only V0 directions
    with pytest.raises(ParityViolation):
        from_modes(s, {1: np.array([1.0, 0.0, 0.0, 0.0])})
    with pytest.raises(ParityViolation):
        from_modes(s, {-3: np.array([0.0, 0.0, 1.0, 0.0])})
    # W directions never appear
    with pytest.raises(ParityViolation):
        from_modes(s, {2: np.array([0.0, 0.0, 0.0, 1.0])})
    # legal: V0 on odd, V0 + V1 on even
    from_modes(s, {1: np.array([0.0, 1.0, 0.0, 0.0]),
                   2: np.array([1.0, 0.5, -0.3, 0.0])})


def test_e_plus_normalization():
    for (n, k) in [(1, 0), (2, 1), (3, 2)]:
        s = CoisoSpace(n=n, k=k)
        ep = e_plus(s)
        assert action_value(ep) == HALF_PI
        assert abs(flow_norm(ep) ** 2 - np.pi) < 1e-13


def test_endpoints_on_one_leaf():
    """Boundary parity: gamma(0) and gamma(1) differ only in V0."""
    rng = np.random.default_rng(5)
    s = CoisoSpace(n=2, k=1)
    for _ in range(20):
        p = random_path(s, rng)
        g0 = evaluate(p, 0.0)
        g1 = evaluate(p, 1.0)
        assert np.max(np.abs(g0[s.w0_indices])) < 1e-12
        assert np.max(np.abs((g0 - g1)[s.v1_indices])) < 1e-12


def test_action_form_vs_quadrature():
    rng = np.random.default_rng(17)
    s = CoisoSpace(n=2, k=0)
    worst = 0.0
    for _ in range(60):
        p = random_path(s, rng, max_freq=6)
        q = random_path(s, rng, max_freq=6)
        a_spec = action_form_a(p, q)
        a_quad = action_form_a_quadrature(p, q)
        worst = max(worst, abs(a_spec - a_quad))
    assert worst < 1e-10


def test_pseudo_orthogonality_16_modes():
    # distinct frequencies decouple in the a-form
    s = CoisoSpace(n=1, k=0)
    unit = np.array([1.0, 0.0])
    paths = {m: from_modes(s, {m: unit}, max_freq=8)
             for m in range(-8, 9) if m != 0}
    for k1, p1 in paths.items():
        for k2, p2 in paths.items():
            got = action_form_a(p1, p2)
            if k1 != k2:
                assert abs(got) < 1e-12
            else:
                want = np.sign(k1) * HALF_PI * abs(k1)
                assert abs(got - want) < 1e-12


def test_projection_splits_action():
    rng = np.random.default_rng(23)
    s = CoisoSpace(n=2, k=1)
    p = random_path(s, rng)
    dec = project(p)
    recon = dec.reconstruct()
    assert np.allclose(recon.coeffs, p.coeffs, atol=1e-14)
    # constant loops carry no area, so the signed parts split the action
    a_parts = action_value(dec.plus) + action_value(dec.minus)
    assert abs(a_parts - action_value(p)) < 1e-12
    assert action_value(dec.plus) >= 0.0
    assert action_value(dec.minus) <= 0.0


def test_project_part_names():
    rng = np.random.default_rng(29)
    s = CoisoSpace(n=1, k=0)
    p = random_path(s, rng, max_freq=4)
    plus = project_part(p, "+")
    assert np.allclose(plus.coeffs[:4 + 1], 0.0)
    zero = project_part(p, "0")
    freqs = np.nonzero(np.any(zero.coeffs != 0.0, axis=1))[0] - 4
    assert set(freqs.tolist()) <= {0}
    with pytest.raises(ValueError):
        project_part(p, "plus")


def test_truncate_projects_tail():
    rng = np.random.default_rng(31)
    s = CoisoSpace(n=2, k=0)
    p = random_path(s, rng, max_freq=8)
    t = truncate(p, 3)
    assert t.max_freq == 3
    for m in range(-3, 4):
        assert np.allclose(t.coefficient(m), p.coefficient(m))
    # norms only shrink
    assert flow_norm(t) <= flow_norm(p) + 1e-15
    assert hs_norm(t, 0.5) <= hs_norm(p, 0.5) + 1e-15


def test_json_roundtrip():
    rng = np.random.default_rng(37)
    s = CoisoSpace(n=2, k=1)
    p = random_path(s, rng)
    q = path_from_json(path_to_json(p))
    assert q.max_freq == p.max_freq
    assert np.array_equal(q.coeffs, p.coeffs)


def test_zero_path_is_neutral():
    s = CoisoSpace(n=1, k=0)
    z = zero_path(s, 5)
    assert action_value(z) == 0.0
    assert flow_norm(z) == 0.0
    assert np.allclose(evaluate(z, np.linspace(0, 1, 7)), 0.0)
