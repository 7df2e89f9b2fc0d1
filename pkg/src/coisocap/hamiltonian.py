"""Admissible Hamiltonians, their truncated extensions, and related forms.

The basic stock are radial Hamiltonians

    H(x) = f(|x - a|^2)

built from a C^1 monotone profile f given by cubic Hermite data
(knots, values, derivatives).  Two profile modes exist:

* "lower_bound": f vanishes on [0, |a|^2 + eps], then climbs with slope
  kept strictly under the return-time budget arccos(|a| / sqrt(t)) minus a
  safety margin delta, and is frozen at its maximum m_H = f(1) on
  [1 - eps, 1].  Such an H never brings a leaf point back to its leaf in
  time <= 1, which is what makes m_H a certified capacity lower bound.

* "extension": a profile on [1, infinity) used to continue a Hamiltonian
  with m_H > pi/2 across the sublevel set {q_Pi <= 1}; it starts flat at
  m_H with zero slope, stays above the comparison line (pi/2 + eps) r,
  climbs with slope at most pi/2 + eps, and is exactly linear with slope
  pi/2 + eps from r_join on.  These inequalities force any fast chord of
  the extended Hamiltonian with positive action back into {q_Pi <= 1}.

The truncation shape q_Pi is the anisotropic quadratic-ish form

    q_Pi(z) = q2(x_n, y_n) + (1/N^2) sum_{k<i<n} (x_i^2 + y_i^2)
                           + (2/N^2) sum_{i<=k}  (x_i^2 + y_i^2),

    q2(x, y) = x^2 + y^2  if y >= 0,      x^2  if y < 0,

which is C^1 (the y-gradient vanishes on both sides of y = 0).  The scale
N is chosen so the support of dH fits inside {q_Pi < 1}.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicHermiteSpline

from .geometry import CoisoSpace, apply_J

HALF_PI = 0.5 * np.pi


class ProfileInvalid(ValueError):
    """A profile violates its mode's defining inequalities."""


class InvalidTarget(ValueError):
    """Normalization target outside the coisotropic subspace."""


# ---------------------------------------------------------------------------
# the truncation shape


def q2(x, y):
    """One-sided plane form: x^2 + y^2 for y >= 0, x^2 for y < 0."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    return x * x + np.where(y >= 0.0, y * y, 0.0)


def q_pi(space: CoisoSpace, n_scale: float, points: np.ndarray) -> np.ndarray:
    """The truncation shape q_Pi; vectorized over leading axes."""
    p = np.asarray(points, dtype=float)
    n, k = space.n, space.k
    out = q2(p[..., n - 1], p[..., 2 * n - 1])
    if n > 1:
        inv = 1.0 / float(n_scale) ** 2
        mid_x = p[..., k:n - 1]
        mid_y = p[..., n + k:2 * n - 1]
        out = out + inv * (np.sum(mid_x ** 2, axis=-1) + np.sum(mid_y ** 2, axis=-1))
        if k > 0:
            sym_x = p[..., 0:k]
            sym_y = p[..., n:n + k]
            out = out + 2.0 * inv * (np.sum(sym_x ** 2, axis=-1)
                                     + np.sum(sym_y ** 2, axis=-1))
    return out


def grad_q_pi(space: CoisoSpace, n_scale: float, points: np.ndarray) -> np.ndarray:
    p = np.asarray(points, dtype=float)
    n, k = space.n, space.k
    out = np.zeros_like(p)
    out[..., n - 1] = 2.0 * p[..., n - 1]
    yn = p[..., 2 * n - 1]
    out[..., 2 * n - 1] = np.where(yn >= 0.0, 2.0 * yn, 0.0)
    if n > 1:
        inv = 1.0 / float(n_scale) ** 2
        out[..., k:n - 1] = 2.0 * inv * p[..., k:n - 1]
        out[..., n + k:2 * n - 1] = 2.0 * inv * p[..., n + k:2 * n - 1]
        if k > 0:
            out[..., 0:k] = 4.0 * inv * p[..., 0:k]
            out[..., n:n + k] = 4.0 * inv * p[..., n:n + k]
    return out


# ---------------------------------------------------------------------------
# profiles


@dataclass(frozen=True)
class RadialProfile:
    """C^1 profile defined by cubic Hermite data, plus mode metadata.

    For mode "lower_bound" the spline lives on [knots[0], knots[-1]] with
    constant continuation on both sides.  For mode "extension" the spline
    lives on [1, r_join] and continues as m_H below 1 and as the exact line
    tail_slope * r above r_join.
    """

    knots: np.ndarray = field()
    values: np.ndarray = field()
    derivs: np.ndarray = field()
    mode: str = "lower_bound"
    abs_a: float = 0.0
    eps: float = 0.0
    delta: float = 0.0
    tail_slope: float = 0.0

    def __post_init__(self):
        kn = np.asarray(self.knots, dtype=float)
        va = np.asarray(self.values, dtype=float)
        de = np.asarray(self.derivs, dtype=float)
        if not (kn.ndim == 1 and kn.shape == va.shape == de.shape and kn.size >= 2):
            raise ProfileInvalid("knots/values/derivs must be equal-length 1-d arrays")
        if np.any(np.diff(kn) <= 0):
            raise ProfileInvalid("knots must be strictly increasing")
        if self.mode not in ("lower_bound", "extension"):
            raise ProfileInvalid(f"unknown profile mode {self.mode!r}")
        object.__setattr__(self, "knots", kn)
        object.__setattr__(self, "values", va)
        object.__setattr__(self, "derivs", de)
        object.__setattr__(self, "_spline", CubicHermiteSpline(kn, va, de))
        object.__setattr__(self, "_dspline", self._spline.derivative())

    @property
    def m_h(self) -> float:
        """The plateau value m(H) = f at the right end of the active window."""
        if self.mode == "lower_bound":
            return float(self.values[-1])
        return float(self.values[0])

    @property
    def r_join(self) -> float:
        return float(self.knots[-1])

    def value(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        lo, hi = self.knots[0], self.knots[-1]
        inside = self._spline(np.clip(t, lo, hi))
        if self.mode == "extension":
            return np.where(t >= hi, self.tail_slope * t,
                            np.where(t <= lo, self.m_h, inside))
        return inside  # clamped: constant 0 below, constant m_h above

    def slope(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        lo, hi = self.knots[0], self.knots[-1]
        inside = self._dspline(np.clip(t, lo, hi))
        if self.mode == "extension":
            return np.where(t >= hi, self.tail_slope,
                            np.where(t <= lo, 0.0, inside))
        return np.where((t <= lo) | (t >= hi), 0.0, inside)

    # ---- serialization ----

    def to_json(self) -> str:
        return json.dumps({
            "knots": self.knots.tolist(),
            "values": self.values.tolist(),
            "derivs": self.derivs.tolist(),
            "mode": self.mode,
            "a": self.abs_a,
            "eps": self.eps,
            "delta": self.delta,
            "m_H": self.m_h,
            "tail_slope": self.tail_slope,
        }, sort_keys=True)

    @staticmethod
    def from_json(text: str) -> "RadialProfile":
        d = json.loads(text)
        prof = RadialProfile(np.array(d["knots"]), np.array(d["values"]),
                             np.array(d["derivs"]), mode=d["mode"],
                             abs_a=float(d["a"]), eps=float(d["eps"]),
                             delta=float(d["delta"]),
                             tail_slope=float(d["tail_slope"]))
        if abs(prof.m_h - float(d["m_H"])) > 0.0:
            raise ProfileInvalid("serialized m_H disagrees with the knot data")
        return prof

    def curvature_bound(self, lo: float | None = None,
                        hi: float | None = None, n_grid: int = 4096) -> float:
        """max |f''| over [lo, hi] (defaults: the knot span)."""
        f2 = self._dspline.derivative()
        lo = self.knots[0] if lo is None else lo
        hi = self.knots[-1] if hi is None else hi
        grid = np.clip(np.linspace(lo, hi, n_grid), self.knots[0], self.knots[-1])
        return float(np.max(np.abs(f2(grid))))


def _cumulative_integral(g, knots: np.ndarray, nodes: int = 12) -> np.ndarray:
    """Integral of g from knots[0], per-interval Gauss-Legendre."""
    x, w = np.polynomial.legendre.leggauss(nodes)
    a = knots[:-1]
    h = np.diff(knots)
    pts = a[:, None] + 0.5 * h[:, None] * (x[None, :] + 1.0)
    pieces = 0.5 * h * np.sum(w[None, :] * g(pts), axis=1)
    return np.concatenate([[0.0], np.cumsum(pieces)])


def canonical_lower_profile(abs_a: float, eps: float = 1e-3,
                            delta: float = 1e-3) -> RadialProfile:
    """Near-extremal admissible profile for the ball about (0,..,0, -|a|).

    The slope follows arccos(|a|/sqrt(t)) - delta, with linear eps-wide
    on/off ramps so that f' = 0 on [0, |a|^2 + eps] and on [1 - eps, 1].
    As eps, delta -> 0 the plateau value f(1) tends to the area bound
    arcsin(r) - r sqrt(1 - r^2), r = sqrt(1 - |a|^2).
    """
    if not 0.0 <= abs_a < 1.0:
        raise ProfileInvalid(f"need 0 <= |a| < 1, got {abs_a}")
    if eps <= 0 or delta <= 0:
        raise ProfileInvalid("eps and delta must be positive")
    a2 = abs_a * abs_a
    if a2 + 2 * eps >= 1.0 - 2 * eps:
        raise ProfileInvalid(f"windows do not fit: |a|^2={a2}, eps={eps}")
    if math.acos(abs_a / math.sqrt(a2 + 2 * eps)) <= delta:
        raise ProfileInvalid("delta eats the whole slope budget at the window start")

    def g(t):
        t = np.asarray(t, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(t > 0, abs_a / np.sqrt(np.maximum(t, 1e-300)), 1.0)
        base = np.maximum(np.arccos(np.clip(ratio, 0.0, 1.0)) - delta, 0.0)
        ramp_up = np.clip((t - (a2 + eps)) / eps, 0.0, 1.0)
        ramp_down = np.clip(((1.0 - eps) - t) / eps, 0.0, 1.0)
        return base * ramp_up * ramp_down

    # knots: exact window breakpoints, fine inside the ramps, geometrically
    # graded after the ramp (where arccos has a sqrt-type derivative blow-up
    # for abs_a > 0), uniform across the bulk
    pieces = [np.array([0.0]), np.array([a2]) if a2 > 0 else np.empty(0),
              np.linspace(a2 + eps, a2 + 2 * eps, 41)]
    graded = []
    step = 2 * eps
    while a2 + step < min(a2 + 0.12, 1.0 - 2 * eps):
        step *= 1.08
        graded.append(a2 + step)
    pieces.append(np.asarray(graded))
    pieces.append(np.linspace(min(a2 + 0.12, 1.0 - 2 * eps), 1.0 - 2 * eps, 401))
    pieces.append(np.linspace(1.0 - 2 * eps, 1.0 - eps, 41))
    pieces.append(np.array([1.0]))
    knots = np.unique(np.concatenate(pieces))
    knots = knots[(knots >= 0.0) & (knots <= 1.0)]

    profile = RadialProfile(knots, _cumulative_integral(g, knots), g(knots),
                            mode="lower_bound", abs_a=float(abs_a),
                            eps=float(eps), delta=float(delta))
    validate_lower_profile(profile)
    return profile


def steep_profile(m_target: float, eps: float = 0.02,
                  ramp_frac: float = 0.18) -> RadialProfile:
    """Monotone profile climbing to m_target, zero near 0, flat near 1.

    The slope is a trapezoid over [eps, 1 - eps] (linear ramps of relative
    width ramp_frac, flat top in between).  Used for the chord pipeline,
    where m_target > pi/2 deliberately violates admissibility.  The flat-top
    slope must stay below pi so slope crossings of pi/2 come in one pair.
    """
    if m_target <= 0:
        raise ProfileInvalid("m_target must be positive")
    width = 1.0 - 2 * eps
    w = ramp_frac * width
    top = m_target / (width - w)
    if top >= np.pi:
        raise ProfileInvalid(f"flat-top slope {top:.3f} >= pi; widen the window")

    t0, t1, t2, t3 = eps, eps + w, 1.0 - eps - w, 1.0 - eps

    def g(t):
        t = np.asarray(t, dtype=float)
        up = np.clip((t - t0) / w, 0.0, 1.0)
        down = np.clip((t3 - t) / w, 0.0, 1.0)
        return top * np.minimum(up, down)

    pieces = [np.array([0.0, t0]), np.linspace(t0, t1, 33),
              np.linspace(t1, t2, 65), np.linspace(t2, t3, 33), np.array([1.0])]
    knots = np.unique(np.concatenate(pieces))
    return RadialProfile(knots, _cumulative_integral(g, knots), g(knots),
                         mode="lower_bound", abs_a=0.0, eps=float(eps))


def extension_profile(m_h: float, eps: float | None = None) -> RadialProfile:
    """Continuation profile on [1, infinity) for a plateau value m_h > pi/2.

    Closed form: with A = pi/2 + eps and u = (r - 1)/(r_join - 1),

        f'(r) = A (2u - u^2),     f(r) = m_h + A (r_join - 1)(u^2 - u^3/3),

    and r_join = (3 m_h - 2A)/A makes f meet the line A r with matching
    slope, so f(r) = A r exactly from r_join on.  Then
    f(r) - A r = (m_h - A)(1 - u)^3 >= 0 and f'(r) r - f(r) <= 0 hold
    identically.
    """
    if eps is None:
        eps = default_extension_eps(m_h)
    if eps <= 0:
        raise ProfileInvalid("eps must be positive")
    A = HALF_PI + eps
    if m_h <= A:
        raise ProfileInvalid(f"need m_h > pi/2 + eps, got m_h={m_h}, eps={eps}")
    r_join = (3.0 * m_h - 2.0 * A) / A
    L = r_join - 1.0
    u = np.linspace(0.0, 1.0, 65)
    knots = 1.0 + L * u
    values = m_h + A * L * (u ** 2 - u ** 3 / 3.0)
    derivs = A * (2.0 * u - u ** 2)
    profile = RadialProfile(knots, values, derivs, mode="extension",
                            eps=float(eps), tail_slope=float(A))
    validate_extension_profile(profile)
    return profile


def default_extension_eps(m_h: float) -> float:
    """Default margin: 5% of the headroom above pi/2, clamped into (0, 0.1]."""
    if m_h <= HALF_PI:
        raise ProfileInvalid(f"extension needs m_h > pi/2, got {m_h}")
    return float(min(0.05 * (m_h - HALF_PI), 0.1))


def validate_lower_profile(profile: RadialProfile, n_grid: int = 20001) -> dict:
    """Grid check of the lower-bound inequalities; raises ProfileInvalid.

    Checks: f = 0 on the inner window, f frozen past 1 - eps, f' >= 0
    (up to interpolation dust 1e-12), and the strict slope budget
    f'(t) < arccos(|a|/sqrt(t)) - 1e-12 beyond the inner window.
    """
    if profile.mode != "lower_bound":
        raise ProfileInvalid("not a lower_bound profile")
    a2 = profile.abs_a ** 2
    eps = profile.eps
    grid = np.unique(np.concatenate([
        np.linspace(0.0, 1.0, n_grid),
        np.linspace(a2 + eps, min(a2 + 3 * eps, 1.0), 2001),
        np.linspace(max(1.0 - 3 * eps, 0.0), 1.0, 2001),
        profile.knots,
    ]))
    fp = profile.slope(grid)
    report = {"min_slope": float(fp.min())}
    if report["min_slope"] < -1e-12:
        raise ProfileInvalid(f"negative slope {report['min_slope']:.3e}")
    inner = grid <= a2 + eps
    if np.any(np.abs(profile.value(grid[inner])) > 0.0):
        raise ProfileInvalid("profile not identically zero on the inner window")
    after = grid > a2 + eps
    budget = np.arccos(np.clip(profile.abs_a / np.sqrt(grid[after]), 0.0, 1.0))
    report["min_budget_margin"] = float(np.min(budget - fp[after]))
    if report["min_budget_margin"] <= 1e-12:
        raise ProfileInvalid(
            f"slope budget violated, margin {report['min_budget_margin']:.3e}")
    climb = (grid >= a2 + 2 * eps + 1e-6) & (grid <= 1.0 - eps - 1e-6)
    if climb.any():
        report["min_climb_slope"] = float(np.min(fp[climb]))
        if report["min_climb_slope"] <= 0.0:
            raise ProfileInvalid("slope not strictly positive on the climb window")
    tail = grid >= 1.0 - eps
    if np.any(np.abs(profile.value(grid[tail]) - profile.m_h) > 0.0):
        raise ProfileInvalid("profile not frozen at m_H on [1 - eps, 1]")
    return report


def validate_extension_profile(profile: RadialProfile, n_grid: int = 4001) -> dict:
    """Grid check of the extension inequalities; raises ProfileInvalid."""
    if profile.mode != "extension":
        raise ProfileInvalid("not an extension profile")
    A = profile.tail_slope
    hi = profile.r_join
    grid = np.linspace(1.0, hi + 2.0, n_grid)
    f = profile.value(grid)
    fp = profile.slope(grid)
    report = {
        "min_over_line": float(np.min(f - A * grid)),
        "max_slope": float(np.max(fp)),
        "min_slope_interior": float(np.min(fp[(grid > 1.0 + 1e-9)])),
        "max_virial": float(np.max(fp * grid - f)),
    }
    if report["min_over_line"] < -1e-12:
        raise ProfileInvalid(f"f dips below the comparison line: {report}")
    if report["max_slope"] > A + 1e-12:
        raise ProfileInvalid(f"slope exceeds pi/2 + eps: {report}")
    if report["min_slope_interior"] <= 0.0:
        raise ProfileInvalid(f"slope not strictly positive past 1: {report}")
    if report["max_virial"] > 1e-12:
        raise ProfileInvalid(f"f'(t) t - f(t) > 0 somewhere: {report}")
    return report


# ---------------------------------------------------------------------------
# Hamiltonians


def canonical_center(space: CoisoSpace, abs_a: float) -> np.ndarray:
    """Ball center (0, ..., 0, -|a|): on the y_n axis, below the coisotropic."""
    c = np.zeros(space.dim_ambient)
    c[2 * space.n - 1] = -abs(abs_a)
    return c


@dataclass(frozen=True)
class RadialHamiltonian:
    """H(x) = f(|x - center|^2) for a profile f."""

    space: CoisoSpace
    profile: RadialProfile
    center: np.ndarray = field()

    def __post_init__(self):
        c = np.asarray(self.center, dtype=float)
        if c.shape != (self.space.dim_ambient,):
            raise ValueError(f"center shape {c.shape}, expected ({self.space.dim_ambient},)")
        object.__setattr__(self, "center", c)

    @property
    def m_h(self) -> float:
        return self.profile.m_h

    def radius2(self, points) -> np.ndarray:
        d = np.asarray(points, dtype=float) - self.center
        return np.sum(d * d, axis=-1)

    def value(self, points) -> np.ndarray:
        return self.profile.value(self.radius2(points))

    def grad(self, points) -> np.ndarray:
        d = np.asarray(points, dtype=float) - self.center
        return 2.0 * self.profile.slope(np.sum(d * d, axis=-1))[..., None] * d

    def rotation_rate(self, points) -> np.ndarray:
        """b = 2 f'(|x - a|^2): the angular speed of the orbit through x."""
        return 2.0 * self.profile.slope(self.radius2(points))

    def support_radius2(self) -> float:
        """Radius^2 bound for supp dH around the center."""
        if self.profile.mode != "lower_bound":
            raise ValueError("support_radius2 applies to ball profiles")
        return 1.0 - self.profile.eps

    def gradient_lipschitz_bound(self) -> float:
        """L with |grad(x) - grad(y)| <= L |x - y|, from profile curvature."""
        grid = np.linspace(self.profile.knots[0], self.profile.knots[-1], 8192)
        fp = np.abs(self.profile.slope(grid))
        f2 = self.profile.curvature_bound()
        return float(np.max(2.0 * fp) + 4.0 * self.profile.knots[-1] * f2)


def simple_hamiltonian(space: CoisoSpace, profile: RadialProfile,
                       abs_a: float | None = None) -> RadialHamiltonian:
    """Radial Hamiltonian about the canonical center for the profile's |a|."""
    if abs_a is None:
        abs_a = profile.abs_a
    return RadialHamiltonian(space, profile, canonical_center(space, abs_a))


@dataclass(frozen=True)
class ExtendedHamiltonian:
    """H-bar: the inner Hamiltonian inside {q_Pi <= 1}, f_ext(q_Pi) outside."""

    inner: RadialHamiltonian
    ext: RadialProfile
    n_scale: int

    @property
    def space(self) -> CoisoSpace:
        return self.inner.space

    @property
    def eps(self) -> float:
        return self.ext.eps

    @property
    def m_h(self) -> float:
        return self.inner.m_h

    def q(self, points) -> np.ndarray:
        return q_pi(self.space, self.n_scale, points)

    def value(self, points) -> np.ndarray:
        q = self.q(points)
        return np.where(q <= 1.0, self.inner.value(points), self.ext.value(q))

    def grad(self, points) -> np.ndarray:
        q = self.q(points)
        out_slope = np.where(q > 1.0, self.ext.slope(np.maximum(q, 1.0)), 0.0)
        gq = grad_q_pi(self.space, self.n_scale, points)
        return np.where((q <= 1.0)[..., None], self.inner.grad(points),
                        out_slope[..., None] * gq)

    def comparison_value(self, points) -> np.ndarray:
        """Q(z) = (pi/2 + eps) q_Pi(z), the quadratic-ish comparison floor."""
        return (HALF_PI + self.eps) * self.q(points)

    def comparison_constant(self) -> float:
        """C with H-bar >= Q - C everywhere; pi/2 + eps works since H >= 0."""
        return HALF_PI + self.eps

    def quadratic_bound(self) -> float:
        """M with H-bar(z) <= M |z|^2 for all z (uses the zero window at 0)."""
        r2 = self.inner.radius2(np.zeros(self.space.dim_ambient))
        zero_window = r2 + (self.inner.profile.eps
                            if self.inner.profile.mode == "lower_bound" else 0.0)
        r0 = math.sqrt(zero_window) - math.sqrt(r2) if zero_window > r2 else 0.0
        if r0 <= 0:
            raise ValueError("inner Hamiltonian has no zero window around the origin")
        return max(self.m_h / r0 ** 2, self.m_h, self.ext.tail_slope)

    def gradient_lipschitz_bound(self) -> float:
        """L for grad H-bar, combining the inner profile and the extension."""
        grid = np.linspace(1.0, self.ext.r_join, 4096)
        fp = self.ext.slope(grid)
        f2 = self.ext.curvature_bound()
        l_ext = float(np.max(2.0 * fp)) + 4.0 * self.ext.r_join * f2
        l_tail = 2.0 * self.ext.tail_slope
        return max(self.inner.gradient_lipschitz_bound(), l_ext, l_tail)


def select_n_scale(inner: RadialHamiltonian, margin: float | None = None,
                   n_samples: int = 4096, seed: int = 7) -> int:
    """Smallest power-of-two N >= 2 with sampled supp dH inside {q_Pi < 1 - margin}.

    The margin defaults to min(1e-3, eps/2): with an eps-wide frozen window
    the support sphere approaches q_Pi = 1 - eps, so a fixed 1e-3 margin
    would be unsatisfiable for eps <= 1e-3.
    """
    prof = inner.profile
    eps = prof.eps if prof.mode == "lower_bound" else 1e-2
    if margin is None:
        margin = min(1e-3, 0.5 * eps)
    rng = np.random.default_rng(seed)
    dim = inner.space.dim_ambient
    dirs = rng.standard_normal((n_samples, dim))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    radii = np.sqrt(inner.support_radius2()) * rng.uniform(0.2, 1.0, n_samples) ** 0.5
    pts = inner.center + radii[:, None] * dirs
    # axis-aligned extremes of the support sphere, the analytic worst cases
    extremes = inner.center + np.sqrt(inner.support_radius2()) * np.vstack(
        [np.eye(dim), -np.eye(dim)])
    pts = np.vstack([pts, extremes])
    n = 2
    while n <= 1024:
        if float(np.max(q_pi(inner.space, n, pts))) < 1.0 - margin:
            return n
        n *= 2
    raise ProfileInvalid("could not fit supp dH inside the unit q_Pi sublevel set")


def extend_hamiltonian(inner: RadialHamiltonian, eps: float | None = None,
                       n_scale: int | None = None) -> ExtendedHamiltonian:
    """Build H-bar from a radial H with m_H > pi/2."""
    ext = extension_profile(inner.m_h, eps)
    if n_scale is None:
        n_scale = select_n_scale(inner)
    return ExtendedHamiltonian(inner, ext, int(n_scale))


# ---------------------------------------------------------------------------
# normalization generator


@dataclass(frozen=True)
class SmoothCutoff:
    """C^1 cutoff in a squared distance: 1 below r1sq, 0 above r2sq."""

    r1sq: float
    r2sq: float

    def __post_init__(self):
        if not 0 < self.r1sq < self.r2sq:
            raise ValueError(f"need 0 < r1sq < r2sq, got {self.r1sq}, {self.r2sq}")

    def value(self, d2) -> np.ndarray:
        u = np.clip((np.asarray(d2, dtype=float) - self.r1sq)
                    / (self.r2sq - self.r1sq), 0.0, 1.0)
        return 1.0 - u * u * (3.0 - 2.0 * u)

    def slope(self, d2) -> np.ndarray:
        u = (np.asarray(d2, dtype=float) - self.r1sq) / (self.r2sq - self.r1sq)
        inside = (u > 0.0) & (u < 1.0)
        return np.where(inside, -6.0 * u * (1.0 - u) / (self.r2sq - self.r1sq), 0.0)


@dataclass(frozen=True)
class NormalizationHamiltonian:
    """K(z) = cutoff(d^2(z)) <z, -J p>: its time-1 flow carries 0 to p.

    The flow field equals p wherever the cutoff is 1 (covering the segment
    [0, p]), and the construction is exactly tangent to the coisotropic
    subspace.  Tangency needs the x_{j>k}-derivatives of K to vanish on the
    subspace; the factor <z, -J p> contributes p_{y_j} = 0 there, and the
    cutoff contributes g * d(cutoff)/dx_j.  When p has no V1 component the
    pairing <z, -Jp> vanishes identically on the subspace and a fully
    compact ball cutoff works ("ball" mode).  Otherwise no compactly
    supported cutoff can be exactly tangent (a cutoff constant in the leaf
    directions on the subspace cannot decay there), so the distance omits
    the V0 coordinates and the support is a slab, compact in the V1 and W0
    directions only ("slab" mode).
    """

    space: CoisoSpace
    target: np.ndarray = field()
    cutoff: SmoothCutoff = field(default=None)
    mode: str = "ball"

    def _d2_center_mask(self):
        mask = np.zeros(self.space.dim_ambient, dtype=bool)
        if self.mode == "ball":
            mask[:] = True
        else:
            mask[self.space.v1_indices] = True
            mask[self.space.w0_indices] = True
        return mask

    def _d2(self, points) -> np.ndarray:
        d = np.asarray(points, dtype=float) - 0.5 * self.target
        return np.sum((d * self._d2_center_mask()) ** 2, axis=-1)

    def pairing(self, points) -> np.ndarray:
        return np.sum(np.asarray(points, dtype=float)
                      * (-apply_J(self.target)), axis=-1)

    def value(self, points) -> np.ndarray:
        return self.cutoff.value(self._d2(points)) * self.pairing(points)

    def grad(self, points) -> np.ndarray:
        p = np.asarray(points, dtype=float)
        d2 = self._d2(p)
        chi = self.cutoff.value(d2)
        dchi = self.cutoff.slope(d2)
        dd2 = 2.0 * (p - 0.5 * self.target) * self._d2_center_mask()
        return (self.pairing(p) * dchi)[..., None] * dd2 \
            + chi[..., None] * (-apply_J(self.target))


def eval_H(ham, p) -> np.ndarray:
    """Evaluate any of the Hamiltonian types at p (vectorized)."""
    return ham.value(p)


def grad_Hbar(ext: ExtendedHamiltonian, p) -> np.ndarray:
    """Gradient of the extended Hamiltonian at p (vectorized)."""
    return ext.grad(p)


def comparison_Q(space: CoisoSpace, eps: float, n_scale: float, p) -> np.ndarray:
    """Q(z) = (pi/2 + eps) q_Pi(z); quadratic floor used in the linking bounds."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    return (HALF_PI + eps) * q_pi(space, n_scale, p)


def normalization_hamiltonian(space: CoisoSpace, p_target: np.ndarray,
                              cutoff: SmoothCutoff | None = None
                              ) -> NormalizationHamiltonian:
    """Generator whose time-1 flow moves the origin to p_target along [0, p].

    p_target must lie on the coisotropic subspace (InvalidTarget otherwise).
    p_target = 0 gives K identically zero.
    """
    p = np.asarray(p_target, dtype=float)
    if p.shape != (space.dim_ambient,):
        raise InvalidTarget(f"target shape {p.shape}, expected ({space.dim_ambient},)")
    if np.max(np.abs(p[space.w0_indices]), initial=0.0) > 1e-12:
        raise InvalidTarget("target is off the coisotropic subspace")
    p = p.copy()
    p[space.w0_indices] = 0.0
    has_v1 = np.max(np.abs(p[space.v1_indices]), initial=0.0) > 0.0
    mode = "slab" if has_v1 else "ball"
    if cutoff is None:
        if mode == "ball":
            core = 0.25 * float(np.dot(p, p))
        else:
            pv1 = p[space.v1_indices]
            core = 0.25 * float(np.dot(pv1, pv1))
        cutoff = SmoothCutoff(core + 1.0, core + 2.0 + float(np.dot(p, p)))
    return NormalizationHamiltonian(space=space, target=p, cutoff=cutoff, mode=mode)
