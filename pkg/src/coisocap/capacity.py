"""Capacity bounds and region geometry.

Closed forms: area_A(r) = arcsin(r) - r sqrt(1 - r^2) and the critical
radius radius_R(A) = sqrt(2A/pi).  The arccos energy integral is computed
by adaptive quadrature as an independent cross-check of the closed form.
lower_bound_capacity builds the canonical admissible profile at a given
margin, certifies it, and reports the certified value against the pi/2
upper bound.  nonsqueeze_check evaluates the obstruction inequality only;
no embedding search happens here.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

from scipy.integrate import simpson

from .dynamics import (T_MAX_DEFAULT, closed_form_radial, first_return_radial,
                       is_admissible)
from .geometry import CoisoSpace
from .hamiltonian import (HALF_PI, RadialHamiltonian, RadialProfile,
                          canonical_lower_profile, q2, simple_hamiltonian)


class DomainError(ValueError):
    """Argument outside the mathematical domain of a closed-form map."""


def area_A(r: float) -> float:
    """arcsin(r) - r sqrt(1 - r^2); 0 at 0, pi/2 at 1, strictly increasing."""
    if not 0.0 <= r <= 1.0:
        raise DomainError(f"r={r} outside [0, 1]")
    return math.asin(r) - r * math.sqrt(max(0.0, 1.0 - r * r))


def arccos_integral(abs_a: float) -> float:
    """Quadrature of the energy budget integral from |a|^2 to 1 of arccos(|a|/sqrt(t)).

    For moderate |a| this substitutes t = |a|^2 / cos^2(alpha), which turns
    the square-root corner at the lower limit into a smooth integrand; for
    tiny |a| the substituted integrand develops a sharp boundary layer, so
    the original variable with the corner flagged is better behaved.  Both
    routes are independent of area_A, which they are used to cross-check.
    """
    if not 0.0 <= abs_a < 1.0:
        raise DomainError(f"|a|={abs_a} outside [0, 1)")
    if abs_a == 0.0:
        return HALF_PI
    a2 = abs_a * abs_a
    if abs_a < 0.05:
        val, _ = quad(lambda t: math.acos(abs_a / math.sqrt(t)), a2, 1.0,
                      points=[a2], limit=500, epsabs=1e-12, epsrel=1e-12)
        return val
    upper = math.acos(abs_a)

    def integrand(alpha: float) -> float:
        c = math.cos(alpha)
        return 2.0 * a2 * alpha * math.sin(alpha) / c ** 3

    val, _ = quad(integrand, 0.0, upper, limit=500, epsabs=1e-12, epsrel=1e-12)
    return val


def radius_R(A: float) -> float:
    if A <= 0:
        raise DomainError(f"A={A} must be positive")
    return math.sqrt(2.0 * A / math.pi)


# ---------------------------------------------------------------------------
# regions


@dataclass(frozen=True)
class RegionSpec:
    """Ball, symplectic cylinder, or the U-shaped comparison region.

    kind "ball": |p - a| <= radius.
    kind "cylinder": distance to a in the last conjugate plane <= radius.
    kind "u_region": (pi/2) q2(x_n, y_n) <= A, the half-disk-plus-slab set.
    The center may only be displaced along y_n.
    """

    space: CoisoSpace
    kind: str
    a_center: np.ndarray | None = None
    radius: float = 0.0
    A: float = 0.0

    def __post_init__(self):
        if self.kind not in ("ball", "cylinder", "u_region"):
            raise ValueError(f"unknown region kind {self.kind!r}")
        if self.kind in ("ball", "cylinder"):
            if self.radius <= 0:
                raise ValueError("ball/cylinder radius must be positive")
            c = (np.zeros(self.space.dim_ambient) if self.a_center is None
                 else np.asarray(self.a_center, dtype=float))
            off = c.copy()
            off[-1] = 0.0
            if np.any(np.abs(off) > 1e-12):
                raise ValueError("the center may only be displaced along y_n")
            object.__setattr__(self, "a_center", c)
        else:
            if self.A <= 0:
                raise ValueError("u_region needs A > 0")

    def contains(self, points: np.ndarray) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        n = self.space.n
        if self.kind == "ball":
            d2 = np.sum((pts - self.a_center) ** 2, axis=-1)
            return d2 <= self.radius ** 2
        if self.kind == "cylinder":
            dx = pts[..., n - 1] - self.a_center[n - 1]
            dy = pts[..., 2 * n - 1] - self.a_center[2 * n - 1]
            return dx * dx + dy * dy <= self.radius ** 2
        return HALF_PI * q2(pts[..., n - 1], pts[..., 2 * n - 1]) <= self.A


def strict_nontriviality_map(margin: float):
    """Smooth symplectic map sending the unit disk into the U-region of pi/2 + margin.

    The linear squeeze (x, y) -> (x / lam, lam y) with lam^2 = 1 + 2 margin / pi
    is area preserving and maps x^2 + y^2 <= 1 into (pi/2) q2 <= pi/2 + margin:
    the upper half lands in the enlarged half disk, the lower half in the slab.
    Returns (lam, psi) with psi acting on (..., 2) arrays of (x, y) pairs.
    """
    if margin <= 0:
        raise ValueError("margin must be positive")
    lam = math.sqrt(1.0 + 2.0 * margin / math.pi)

    def psi(pts: np.ndarray) -> np.ndarray:
        pts = np.asarray(pts, dtype=float)
        out = np.empty_like(pts)
        out[..., 0] = pts[..., 0] / lam
        out[..., 1] = pts[..., 1] * lam
        return out

    return lam, psi


# ---------------------------------------------------------------------------
# reports


@dataclass(frozen=True)
class CapacityReport:
    lower: float
    upper: float
    abs_a: float
    eps: float
    delta: float
    admissible: bool
    analytic_certificate: bool
    minimax_estimate: float | None = None
    witnesses: dict | None = None

    def __post_init__(self):
        if math.isfinite(self.lower) and math.isfinite(self.upper):
            if self.lower > self.upper + 1e-12:
                raise ValueError("capacity report violates lower <= upper")

    def to_json(self) -> str:
        payload = {
            "lower": self.lower, "upper": self.upper, "abs_a": self.abs_a,
            "eps": self.eps, "delta": self.delta,
            "admissible": self.admissible,
            "analytic_certificate": self.analytic_certificate,
            "minimax_estimate": self.minimax_estimate,
            "witnesses": self.witnesses,
        }
        return json.dumps(payload, sort_keys=True)


def lower_bound_capacity(space: CoisoSpace, a_center, delta_margin: float = 1e-3,
                         eps: float = 1e-3) -> CapacityReport:
    """Certified lower bound from the canonical admissible profile.

    a_center may be the scalar |a| or a center vector displaced only along
    y_n.  The report's lower value is the certified m(H) = f(1); the upper
    value is the pi/2 bound for the U-shaped comparison region.  The target
    it approaches as the margins shrink is area_A(sqrt(1 - |a|^2)).
    """
    if np.ndim(a_center) == 0:
        abs_a = float(a_center)
    else:
        c = np.asarray(a_center, dtype=float)
        off = c.copy()
        off[-1] = 0.0
        if np.any(np.abs(off) > 1e-12):
            raise ValueError("the center may only be displaced along y_n")
        abs_a = float(abs(c[-1]))
    profile = canonical_lower_profile(abs_a, eps=eps, delta=delta_margin)
    ham = simple_hamiltonian(space, profile, abs_a=abs_a)
    report = is_admissible(space, ham)
    if not report.passed:
        raise ValueError(f"canonical profile failed certification: {report}")
    witnesses = {
        "profile": json.loads(profile.to_json()),
        "target": area_A(math.sqrt(1.0 - abs_a * abs_a)),
        "chord": None,
    }
    return CapacityReport(lower=ham.m_h, upper=HALF_PI, abs_a=abs_a, eps=eps,
                          delta=delta_margin, admissible=bool(report.passed),
                          analytic_certificate=bool(report.analytic),
                          witnesses=witnesses)


@dataclass(frozen=True)
class NonsqueezeReport:
    verdict: str
    r: float
    A: float
    radius_bound: float
    area_r: float
    area_bound: float

    def to_json(self) -> str:
        return json.dumps({
            "verdict": self.verdict, "r": self.r, "A": self.A,
            "radius_bound": self.radius_bound, "area_r": self.area_r,
            "area_bound": self.area_bound,
            "chain": "Consistent iff r <= R(A), equivalently "
                     "area_A(r) <= area_A(R(A)) by strict monotonicity",
        }, sort_keys=True)


def nonsqueeze_check(r: float, A: float) -> NonsqueezeReport:
    """Obstruction verdict for squeezing radius r data into the A-region.

    Consistent means r <= R(A) (no obstruction); Obstructed means the
    inequality fails, so no relative embedding can exist.  The verdict is
    monotone-invariant: it depends only on area_A(r) vs area_A(R(A)).
    """
    if r < 0:
        raise DomainError("r must be nonnegative")
    Rb = radius_R(A)
    verdict = "Consistent" if r <= Rb + 1e-12 else "Obstructed"
    return NonsqueezeReport(verdict=verdict, r=r, A=A, radius_bound=Rb,
                            area_r=area_A(min(r, 1.0)),
                            area_bound=area_A(min(Rb, 1.0)))


# ---------------------------------------------------------------------------
# axiom-level property harness


def axiom_property_suite(space: CoisoSpace, seed: int = 3,
                         n_orbits: int = 8) -> dict:
    """Numerically checkable fragments of the conformality/monotonicity axioms.

    Conformality at alpha = 2: with (H, omega) -> (alpha H, alpha omega) the
    vector field of the rescaled data equals the original one, so orbits
    coincide; in standard-form time the rescaled flow runs alpha times
    faster, so alpha * T_standard(alpha H) = T_standard(H), and evaluating
    the rescaled action data along the original orbit doubles the action.
    Monotonicity fragment: translating the Hamiltonian by a leaf vector
    translates orbits and preserves return times and m(H).  The
    strict-nontriviality squeeze map is exercised on sampled disk points
    as well.  Returns worst-case discrepancies.
    """
    rng = np.random.default_rng(seed)
    n = space.n
    prof = canonical_lower_profile(0.25, eps=1e-3, delta=1e-3)
    ham = simple_hamiltonian(space, prof)
    scaled = RadialProfile(knots=prof.knots, values=2.0 * prof.values,
                           derivs=2.0 * prof.derivs, mode=prof.mode,
                           abs_a=prof.abs_a, eps=prof.eps, delta=prof.delta,
                           tail_slope=2.0 * prof.tail_slope)
    ham2 = RadialHamiltonian(space=space, profile=scaled, center=ham.center)

    alpha = 2.0
    field_gap = 0.0
    action_ratio_gap = 0.0
    time_gap = 0.0
    translate_gap = 0.0
    # support the samples on the leaf directions: every active plane is then
    # a half-turn plane and the analytic first return lands inside the horizon
    v0 = space.v0_indices
    for _ in range(n_orbits):
        # points stay on the subspace; the center sits at -|a| along y_n,
        # so |x0 - center|^2 = rho^2 + |a|^2 lands inside the profile window
        x0 = np.zeros(2 * n)
        rho = rng.uniform(0.45, 0.95)
        x0[v0] = rng.standard_normal(v0.size)
        x0[v0] *= rho / np.linalg.norm(x0[v0])

        # the rescaled-form field (1/alpha) J grad(alpha H) is the original
        g1 = ham.grad(x0)
        g2 = ham2.grad(x0) / alpha
        field_gap = max(field_gap, float(np.linalg.norm(g1 - g2)))

        ev1 = first_return_radial(ham, x0)
        ev2 = first_return_radial(ham2, x0)
        if ev1.returned:
            # the rescaled orbit runs alpha times faster, so its return
            # sits well inside the same horizon and must be found
            if not ev2.returned:
                time_gap = math.inf
            else:
                time_gap = max(time_gap, abs(alpha * ev2.T - ev1.T))
            act1 = _loop_action(ham, ham, x0, ev1.T)
            act2 = _loop_action(ham, ham2, x0, ev1.T)
            if abs(act1) > 1e-12:
                action_ratio_gap = max(action_ratio_gap,
                                       abs(act2 / act1 - alpha))
        elif ev2.returned and alpha * ev2.T <= T_MAX_DEFAULT - 1e-9:
            # conversely a fast return this early pins the slow one inside
            # the horizon, where it was not seen
            time_gap = math.inf

        # leaf translation: orbits translate, return data is unchanged
        v = np.zeros(2 * n)
        if space.v0_indices.size:
            v[space.v0_indices] = rng.standard_normal(space.v0_indices.size)
        ham_t = RadialHamiltonian(space=space, profile=prof,
                                  center=ham.center + v)
        ev_t = first_return_radial(ham_t, x0 + v)
        if ev_t.returned != ev1.returned:
            translate_gap = math.inf
        elif ev1.returned:
            translate_gap = max(translate_gap, abs(ev_t.T - ev1.T))

    lam, psi = strict_nontriviality_map(margin=0.05)
    theta = rng.uniform(0, 2 * np.pi, 256)
    rr = np.sqrt(rng.uniform(0, 1, 256))
    disk = np.stack([rr * np.cos(theta), rr * np.sin(theta)], axis=-1)
    image = psi(disk)
    q_img = q2(image[..., 0], image[..., 1])
    squeeze_ok = bool(np.all(HALF_PI * q_img <= HALF_PI + 0.05 + 1e-12))

    return {
        "alpha": alpha,
        "field_identity_gap": field_gap,
        "return_time_gap": time_gap,
        "action_scaling_gap": action_ratio_gap,
        "translation_return_gap": translate_gap,
        "squeeze_map_lambda": lam,
        "squeeze_map_inside": squeeze_ok,
        "m_h_scaling": ham2.m_h / ham.m_h,
    }


def _loop_action(orbit_ham: RadialHamiltonian, value_ham: RadialHamiltonian,
                 x0: np.ndarray, T: float, n_grid: int = 4097) -> float:
    """Action data of value_ham along the closed-form arc of orbit_ham.

    1/2 int <grad H, x> dt - int H dt over the arc; evaluating a rescaled
    Hamiltonian along the original orbit is exactly the conformality test.
    """
    ts = np.linspace(0.0, T, n_grid)
    pts = closed_form_radial(orbit_ham, x0, ts)
    G = value_ham.grad(pts)
    integrand = 0.5 * np.sum(G * pts, axis=-1) - value_ham.value(pts)
    return float(simpson(integrand, x=ts))
