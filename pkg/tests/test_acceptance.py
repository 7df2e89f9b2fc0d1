"""End-to-end acceptance gate.

Each test prints exactly one pass/fail line (straight to the real stdout,
so the lines survive pytest's capture) and then asserts, so a red run
still shows which gates held.  Tolerances and runtime budgets are pinned
literals; they are a contract, not a sliding scale.
"""

import math
import time
from pathlib import Path

import numpy as np
import pytest

from coisocap import (ActionFunctional, CoisoSpace, GalerkinSpace,
                      LinkingConfig, RadialProfile, action_form_a,
                      action_form_a_quadrature, area_A, arccos_integral,
                      axiom_property_suite, build_sigma_sample,
                      canonical_lower_profile, check_linking_bounds,
                      closed_form_radial, extend_hamiltonian, first_return_radial,
                      flow_step, from_modes, integral_inequality_check,
                      integrate, is_admissible, minimax_estimate,
                      nonsqueeze_check, phi_value, return_time,
                      shooting_chords, simple_hamiltonian, steep_profile)
from coisocap.cli import main as cli_main

HALF_PI = math.pi / 2


@pytest.fixture
def report(capsys):
    """One visible pass/fail line per criterion, then the hard assert."""

    def _report(num, label, failures, elapsed=None):
        tag = "PASS" if not failures else "FAIL"
        timing = "" if elapsed is None else f" [{elapsed:.2f} s]"
        with capsys.disabled():
            print(f"criterion {num:02d} {label}: {tag}{timing}", flush=True)
        assert not failures, "; ".join(failures)

    return _report


def _linear_profile(slope, abs_a=0.0):
    # domain margin past r^2 = 1 keeps unit orbits off the support cutoff
    return RadialProfile(knots=np.array([0.0, 2.0]),
                         values=np.array([0.0, 2.0 * slope]),
                         derivs=np.array([slope, slope]),
                         mode="lower_bound", abs_a=abs_a)


def test_criterion_01_closed_form_area(report):
    t0 = time.perf_counter()
    bad = []
    if abs(area_A(1.0) - HALF_PI) >= 1e-12:
        bad.append("area at r=1 missed pi/2")
    worst = 0.0
    for a in np.linspace(0.0, 0.98, 50):
        a = float(a)
        worst = max(worst, abs(arccos_integral(a) - area_A(math.sqrt(1.0 - a * a))))
    if worst >= 1e-8:
        bad.append(f"quadrature route off by {worst:.3e}")
    elapsed = time.perf_counter() - t0
    if elapsed >= 1.0:
        bad.append(f"took {elapsed:.2f} s, budget 1 s")
    report(1, "closed-form area values", bad, elapsed)


def test_criterion_02_lower_bound_witness(report):
    t0 = time.perf_counter()
    bad = []
    space = CoisoSpace(n=1, k=0)
    for abs_a in (0.0, 0.5):
        prof = canonical_lower_profile(abs_a, eps=1e-3, delta=1e-3)
        ham = simple_hamiltonian(space, prof)
        target = area_A(math.sqrt(1.0 - abs_a * abs_a))
        if abs(ham.m_h - target) >= 2e-2:
            bad.append(f"|a|={abs_a}: witness value {ham.m_h:.6f} "
                       f"too far from {target:.6f}")
        rep = is_admissible(space, ham)
        if not (rep.passed and rep.analytic):
            bad.append(f"|a|={abs_a}: no analytic admissibility certificate")
    elapsed = time.perf_counter() - t0
    if elapsed >= 10.0:
        bad.append(f"took {elapsed:.2f} s, budget 10 s")
    report(2, "certified lower-bound witness", bad, elapsed)


def test_criterion_03_flow_oracle(report):
    t0 = time.perf_counter()
    rng = np.random.default_rng(42)
    spaces = [CoisoSpace(1, 0), CoisoSpace(2, 1), CoisoSpace(3, 0)]
    worst = 0.0
    for i in range(100):
        space = spaces[i % 3]
        ham = simple_hamiltonian(space, _linear_profile(0.6), abs_a=0.0)
        x0 = rng.standard_normal(space.dim_ambient)
        x0 *= rng.uniform(0.3, 0.95) / np.linalg.norm(x0)
        traj = integrate(ham, x0, 1.0, tol=1e-10)
        closed = closed_form_radial(ham, x0, np.array([1.0]))[0]
        worst = max(worst, float(np.max(np.abs(traj.points[-1] - closed))))
    bad = []
    if worst >= 1e-6:
        bad.append(f"integrator drifted {worst:.3e} from the closed form")
    elapsed = time.perf_counter() - t0
    if elapsed >= 5.0:
        bad.append(f"took {elapsed:.2f} s, budget 5 s")
    report(3, "adaptive integrator vs closed-form flow", bad, elapsed)


def test_criterion_04_return_time(report):
    space = CoisoSpace(n=1, k=0)
    slope = 0.6
    ham = simple_hamiltonian(space, _linear_profile(slope, abs_a=0.5), abs_a=0.5)
    x0 = np.array([math.sqrt(3.0) / 2.0, 0.0])
    b = 2.0 * slope
    expected_bT = math.pi - 2.0 * (math.pi / 6.0)

    bad = []
    ev = first_return_radial(ham, x0)
    if not ev.returned:
        bad.append("analytic detector found no return")
    elif abs(b * ev.T - expected_bT) >= 1e-6:
        bad.append(f"analytic bT = {b * ev.T:.9f}, expected {expected_bT:.9f}")
    num = return_time(space, ham, x0)
    if not num.returned:
        bad.append("numeric detector found no return")
    elif abs(b * num.T - expected_bT) >= 1e-6:
        bad.append(f"numeric bT = {b * num.T:.9f}, expected {expected_bT:.9f}")
    report(4, "first-return angle identity", bad)


def test_criterion_05_spectral_time_equivalence(report):
    rng = np.random.default_rng(55)
    spaces = [CoisoSpace(1, 0), CoisoSpace(2, 0), CoisoSpace(2, 1),
              CoisoSpace(3, 2)]
    from coisocap.spectral import parity_mask

    def rand_path(space, max_freq):
        mask = parity_mask(space, max_freq)
        coeffs = rng.standard_normal(mask.shape)
        coeffs[~mask] = 0.0
        modes = {m: coeffs[m + max_freq]
                 for m in range(-max_freq, max_freq + 1)}
        return from_modes(space, modes, max_freq=max_freq)

    bad = []
    worst = 0.0
    for i in range(500):
        space = spaces[i % 4]
        nf = int(rng.integers(1, 9))
        p, q = rand_path(space, nf), rand_path(space, nf)
        worst = max(worst, abs(action_form_a(p, q) - action_form_a_quadrature(p, q)))
    if worst >= 1e-10:
        bad.append(f"spectral vs quadrature gap {worst:.3e}")

    s = CoisoSpace(1, 0)
    unit = np.array([1.0, 0.0])
    paths = {m: from_modes(s, {m: unit}, max_freq=8) for m in range(-8, 9)}
    worst_tab = 0.0
    for k1, p1 in paths.items():
        for k2, p2 in paths.items():
            got = action_form_a(p1, p2)
            want = np.sign(k1) * HALF_PI * abs(k1) if k1 == k2 else 0.0
            worst_tab = max(worst_tab, abs(got - want))
    if worst_tab >= 1e-12:
        bad.append(f"mode pairing table off by {worst_tab:.3e}")
    report(5, "spectral action equals time-domain quadrature", bad)


def test_criterion_06_gradient_correctness(report):
    space = CoisoSpace(n=1, k=0)
    ham = extend_hamiltonian(simple_hamiltonian(space, steep_profile(2.0)))
    gal = GalerkinSpace(space, 8)
    F = ActionFunctional(gal, ham)
    rng = np.random.default_rng(66)

    bad = []
    h = 1e-6
    worst = 0.0
    for _ in range(200):
        x = 0.4 * rng.standard_normal(gal.dof_freq.size)
        v = rng.standard_normal(x.size)
        v /= np.linalg.norm(v)
        lhs = float(np.sum(gal.metric_w * F.grad_packed(x) * v))
        fd = (float(F.phi(x + h * v)) - float(F.phi(x - h * v))) / (2 * h)
        worst = max(worst, abs(lhs - fd) / max(1.0, abs(fd)))
    if worst >= 1e-6:
        bad.append(f"gradient vs finite differences rel err {worst:.3e}")

    # the flow driver must never let Phi climb past the guard
    worst_climb = -math.inf
    for _ in range(6):
        x = gal.unpack(0.4 * rng.standard_normal(gal.dof_freq.size))
        prev = phi_value(F, x)
        for _ in range(40):
            x = flow_step(F, x, 0.05)
            cur = phi_value(F, x)
            worst_climb = max(worst_climb, cur - prev)
            prev = cur
    if worst_climb > 1e-10:
        bad.append(f"flow step increased the functional by {worst_climb:.3e}")
    report(6, "functional gradient and descent guard", bad)


def test_criterion_07_chord_existence_desk_scale(report):
    t0 = time.perf_counter()
    space = CoisoSpace(n=1, k=0)
    ham = simple_hamiltonian(space, steep_profile(2.0))
    F = ActionFunctional(GalerkinSpace(space, 32), extend_hamiltonian(ham))

    value, res = minimax_estimate(F)
    elapsed = time.perf_counter() - t0

    oracle = max(r["action"] for r in shooting_chords(ham))
    bad = []
    if not res.action > 0.0:
        bad.append(f"chord action {res.action:.3e} not positive")
    if not res.ode_residual < 1e-4:
        bad.append(f"ode residual {res.ode_residual:.3e}")
    if not res.leaf_res < 1e-8:
        bad.append(f"leaf residual {res.leaf_res:.3e}")
    if not res.inside_flag:
        bad.append("chord left the comparison region")
    if abs(res.action - oracle) >= 1e-3:
        bad.append(f"action {res.action:.8f} vs shooting {oracle:.8f}")
    if abs(value - oracle) >= 1e-3:
        bad.append(f"minimax value {value:.8f} vs shooting {oracle:.8f}")
    if elapsed >= 300.0:
        bad.append(f"took {elapsed:.1f} s, budget 300 s")
    report(7, "desk-scale chord via minimax", bad, elapsed)


def test_criterion_08_negative_control(tmp_path, report):
    cfg = Path(__file__).resolve().parents[1] / "configs" / "chord_negative.json"
    code = cli_main(["chord", "--config", str(cfg), "--out", str(tmp_path)])
    bad = []
    if code != 5:
        bad.append(f"exit code {code}, expected 5")
    report(8, "no chord below the threshold (exit 5)", bad)


def test_criterion_09_property_suites(report):
    bad = []
    cfg = LinkingConfig(tau=2.5, alpha=0.3, seed=9, n_interior=9200,
                        n_boundary=512, n_ray=301)
    space = CoisoSpace(n=2, k=1)
    paths = build_sigma_sample(cfg, space, max_freq=8)
    out = integral_inequality_check(space, paths)
    if out["n_samples"] < 10000:
        bad.append(f"only {out['n_samples']} samples")
    if out["violations"] != 0:
        bad.append(f"{out['violations']} inequality violations "
                   f"(worst {out['worst_margin']:.3e})")

    desk = CoisoSpace(n=1, k=0)
    ham = extend_hamiltonian(simple_hamiltonian(desk, steep_profile(2.0)))
    F = ActionFunctional(GalerkinSpace(desk, 16), ham)
    rep = check_linking_bounds(F)
    if not (rep.boundary_ok and rep.boundary_max_phi <= 1e-10):
        bad.append(f"boundary max {rep.boundary_max_phi:.3e} not <= 0")
    if not (rep.gamma_ok and rep.beta > 0.0 and rep.gamma_min_phi >= rep.beta):
        bad.append(f"sphere min {rep.gamma_min_phi:.3e} below beta {rep.beta:.3e}")

    for (n, k) in [(1, 0), (2, 1), (3, 2)]:
        res = axiom_property_suite(CoisoSpace(n, k))
        gaps = {key: res[key] for key in
                ("field_identity_gap", "return_time_gap",
                 "action_scaling_gap", "translation_return_gap")}
        worst = max(gaps.values())
        if worst > 1e-9:
            bad.append(f"(n={n}, k={k}) axiom gap {worst:.3e}")
        if not res["squeeze_map_inside"]:
            bad.append(f"(n={n}, k={k}) squeeze image escaped")
    report(9, "inequality, linking and axiom property suites", bad)


def test_criterion_10_nonsqueeze_table(report):
    bad = []
    if nonsqueeze_check(1.0, HALF_PI).verdict != "Consistent":
        bad.append("boundary case not Consistent")
    for A in (HALF_PI - 1e-6, 1.5, 1.0, 0.5):
        v = nonsqueeze_check(1.0, A).verdict
        if v != "Obstructed":
            bad.append(f"A={A}: verdict {v}, expected Obstructed")
    report(10, "non-squeezing verdict table", bad)
