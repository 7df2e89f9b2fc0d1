"""Discretized variational problem whose critical points are leafwise chords.

The functional on the constrained Galerkin space is

    Phi(x) = a(x) - b(x),      b(x) = sum_q w_q Hbar(gamma_x(t_q)),

with a the signed action form and b the Gauss-Legendre discretization of
the Hamiltonian term.  Everything runs on packed coefficient vectors: one
real degree of freedom per (frequency, allowed direction) pair, with the
variational metric weight 1 for the constant mode and pi |m| otherwise.
In that metric grad a = P+ - P-, so the negative-gradient flow splits into
exact exponential decay/growth on the positive/negative modes plus a
nonlinearity, and one flow step freezes the nonlinear part per step
(exponential Euler).  b's gradient is assembled with the same quadrature
nodes used for its value, so the discrete gradient is the exact derivative
of the discrete functional.

The minimax machinery evolves a sample of the linking set

    Sigma_tau = {x- + x0 + s e+ : ||x- + x0|| <= tau, s in [0, tau]}

and records sup Phi on a fixed schedule.  A finite sample drains off the
mountain pass eventually, so the sup is kept honest by bracket refinement
along the e+ ray: points on one side of the pass drain to the origin
(Phi -> 0), points on the other side drain into the negative well, and
points close to the crossing hang near the pass level for a time that
grows as the bracket narrows.  Each plateau of the records triggers a
fresh, eightfold narrower cohort of ray samples around the slowest
drainer, until the bracket reaches the resolution floor of the discrete
flow and the records plateau at the minimax level itself.  The
sup-attaining sample then seeds a Gauss-Newton polish of ||grad Phi||^2,
and the result is validated into a ChordResult or rejected.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import simpson, solve_ivp
from scipy.optimize import brentq, least_squares
from scipy.stats import qmc

from .geometry import CoisoSpace
from .hamiltonian import ExtendedHamiltonian, HALF_PI, q_pi
from .spectral import (DEFAULT_MAX_FREQ, SpectralPath, gauss_legendre_01,
                       parity_mask)

TOL_CRIT = 1e-7
TOL_ODE = 1e-4
TOL_LEAF = 1e-8
ODE_GRID = 401


class NoConvergence(RuntimeError):
    """The minimax search did not stabilize on a positive critical value."""


class BoundsNotFound(NoConvergence):
    """No (tau, alpha, beta) triple verified the linking inequalities."""


class ValidationFailed(RuntimeError):
    """A candidate critical point violates the chord residual tolerances."""


class StepRejected(RuntimeError):
    """A flow step increased Phi beyond the monotonicity tolerance."""


# ---------------------------------------------------------------------------
# Galerkin space


@dataclass(frozen=True)
class GalerkinSpace:
    """Packed real coordinates for the constrained Fourier space."""

    space: CoisoSpace
    max_freq: int = DEFAULT_MAX_FREQ
    n_quad: int = 0

    def __post_init__(self):
        if self.n_quad == 0:
            object.__setattr__(self, "n_quad", max(32, 4 * self.max_freq))
        mask = parity_mask(self.space, self.max_freq)
        rows, cols = np.nonzero(mask)
        freqs = rows - self.max_freq
        object.__setattr__(self, "dof_freq", freqs)
        object.__setattr__(self, "dof_col", cols)
        object.__setattr__(self, "dim", freqs.size)
        w = np.where(freqs == 0, 1.0, np.pi * np.abs(freqs)).astype(float)
        object.__setattr__(self, "metric_w", w)
        object.__setattr__(self, "dof_sign", np.sign(freqs).astype(float))
        tq, wq = gauss_legendre_01(self.n_quad)
        object.__setattr__(self, "t_quad", tq)
        object.__setattr__(self, "w_quad", wq)
        object.__setattr__(self, "basis_quad", self.basis_matrix(tq))
        # the single e+ degree of freedom: frequency 1 in the last leaf slot
        plus_idx = np.nonzero((freqs == 1) & (cols == self.space.n - 1))[0]
        object.__setattr__(self, "eplus_dof", int(plus_idx[0]))

    def basis_matrix(self, t: np.ndarray) -> np.ndarray:
        """B with gamma_x(t_i)_j = sum_d B[i, j, d] x_d."""
        t = np.asarray(t, dtype=float)
        n = self.space.n
        ang = np.pi * np.outer(t, self.dof_freq)
        c, s = np.cos(ang), np.sin(ang)
        B = np.zeros((t.size, 2 * n, self.dim))
        d_idx = np.arange(self.dim)
        x_like = self.dof_col < n
        B[:, self.dof_col[x_like], d_idx[x_like]] = c[:, x_like]
        B[:, self.dof_col[x_like] + n, d_idx[x_like]] = s[:, x_like]
        y_like = ~x_like
        B[:, self.dof_col[y_like] - n, d_idx[y_like]] = -s[:, y_like]
        B[:, self.dof_col[y_like], d_idx[y_like]] = c[:, y_like]
        return B

    def deriv_matrix(self, t: np.ndarray) -> np.ndarray:
        """Time derivative of the basis on a grid."""
        t = np.asarray(t, dtype=float)
        n = self.space.n
        ang = np.pi * np.outer(t, self.dof_freq)
        rate = np.pi * self.dof_freq
        c, s = rate * np.cos(ang), rate * np.sin(ang)
        B = np.zeros((t.size, 2 * n, self.dim))
        d_idx = np.arange(self.dim)
        x_like = self.dof_col < n
        B[:, self.dof_col[x_like], d_idx[x_like]] = -s[:, x_like]
        B[:, self.dof_col[x_like] + n, d_idx[x_like]] = c[:, x_like]
        y_like = ~x_like
        B[:, self.dof_col[y_like] - n, d_idx[y_like]] = -c[:, y_like]
        B[:, self.dof_col[y_like], d_idx[y_like]] = -s[:, y_like]
        return B

    # ---- conversions ----

    def pack(self, path: SpectralPath) -> np.ndarray:
        if path.space != self.space:
            raise ValueError("path lives over a different coisotropic space")
        if path.max_freq > self.max_freq:
            raise ValueError("path truncation exceeds the Galerkin space")
        rows = self.dof_freq + path.max_freq
        ok = np.abs(self.dof_freq) <= path.max_freq
        out = np.zeros(self.dim)
        out[ok] = path.coeffs[rows[ok], self.dof_col[ok]]
        return out

    def unpack(self, x: np.ndarray) -> SpectralPath:
        coeffs = np.zeros((2 * self.max_freq + 1, self.space.dim_ambient))
        coeffs[self.dof_freq + self.max_freq, self.dof_col] = np.asarray(x, float)
        return SpectralPath(self.space, coeffs)

    # ---- batched primitives (X has shape (..., dim)) ----

    def eval_batch(self, X: np.ndarray, B: np.ndarray | None = None) -> np.ndarray:
        B = self.basis_quad if B is None else B
        return np.einsum("tjd,...d->...tj", B, np.asarray(X, float))

    def norm(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, float)
        return np.sqrt(np.einsum("d,...d->...", self.metric_w, X * X))

    def inner(self, X: np.ndarray, Y: np.ndarray) -> np.ndarray:
        return np.einsum("d,...d->...", self.metric_w,
                         np.asarray(X, float) * np.asarray(Y, float))

    def a_value(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, float)
        return 0.5 * np.einsum("d,...d->...",
                               self.dof_sign * self.metric_w, X * X)

    def ray_point(self, s: float) -> np.ndarray:
        x = np.zeros(self.dim)
        x[self.eplus_dof] = s
        return x


# ---------------------------------------------------------------------------
# the functional


@dataclass(frozen=True)
class ActionFunctional:
    """Phi = a - b on a Galerkin space, for an extended (or plain) Hamiltonian."""

    gal: GalerkinSpace
    ham: object

    @property
    def space(self) -> CoisoSpace:
        return self.gal.space

    def b_value(self, X: np.ndarray) -> np.ndarray:
        pts = self.gal.eval_batch(X)
        vals = np.asarray(self.ham.value(pts), dtype=float)
        return vals @ self.gal.w_quad

    def phi(self, X: np.ndarray) -> np.ndarray:
        return self.gal.a_value(X) - self.b_value(X)

    def grad_packed(self, X: np.ndarray) -> np.ndarray:
        """Metric gradient of Phi: sign(m) x - Riesz-rescaled quadrature of grad H."""
        gal = self.gal
        pts = gal.eval_batch(X)
        G = np.asarray(self.ham.grad(pts), dtype=float)
        gb = np.einsum("...tj,tjd,t->...d", G, gal.basis_quad, gal.w_quad)
        return gal.dof_sign * np.asarray(X, float) - gb / gal.metric_w

    def comparison_constant(self) -> float:
        if isinstance(self.ham, ExtendedHamiltonian):
            return self.ham.comparison_constant()
        raise BoundsNotFound(
            "no comparison constant: the Hamiltonian has no truncated extension")


def phi_value(F: ActionFunctional, x) -> float:
    """Phi at a path (SpectralPath or packed coordinates)."""
    X = F.gal.pack(x) if isinstance(x, SpectralPath) else np.asarray(x, float)
    return float(F.phi(X))


def phi_gradient(F: ActionFunctional, x) -> SpectralPath:
    """Metric gradient of Phi as a path; P+ x - P- x when grad H vanishes."""
    X = F.gal.pack(x) if isinstance(x, SpectralPath) else np.asarray(x, float)
    return F.gal.unpack(F.grad_packed(X))


def _flow_step_packed(F: ActionFunctional, X: np.ndarray, dt) -> np.ndarray:
    """One exponential-Euler step of x' = -grad Phi with the nonlinearity frozen.

    Positive modes contract by e^{-dt}, negative modes expand by e^{dt}
    (their unstable directions), the constant block moves by dt; in each
    case toward/along the frozen target beta = Riesz(grad b).
    """
    gal = F.gal
    X = np.asarray(X, float)
    dt = np.asarray(dt, float)[..., None] if np.ndim(dt) else float(dt)
    # grad Phi = sign(m) x - beta, so beta is recovered from one gradient call
    beta = gal.dof_sign * X - F.grad_packed(X)
    sgn = gal.dof_sign
    em = np.exp(-dt)
    ep = np.exp(dt)
    out = np.where(sgn > 0, em * X + (1.0 - em) * beta,
                   np.where(sgn < 0, ep * X - (ep - 1.0) * beta, X + dt * beta))
    return out


def flow_step(F: ActionFunctional, x: SpectralPath, dt: float,
              tol_mono: float = 1e-10) -> SpectralPath:
    """Single-path flow step; raises StepRejected if Phi increases past tol."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    X = F.gal.pack(x)
    before = float(F.phi(X))
    Y = _flow_step_packed(F, X, dt)
    after = float(F.phi(Y))
    if after > before + tol_mono:
        raise StepRejected(f"Phi increased by {after - before:.3e} over dt={dt}")
    return F.gal.unpack(Y)


# ---------------------------------------------------------------------------
# linking sets


@dataclass(frozen=True)
class LinkingConfig:
    tau: float | None = None
    alpha: float | None = None
    beta: float | None = None
    n_interior: int = 96
    n_boundary: int = 64
    n_ray: int = 129
    n_gamma: int = 64
    seed: int = 11
    require_linking: bool = True
    record_dt: float = 1.0
    max_records: int = 120
    plateau_tol: float = 1e-6
    plateau_len: int = 5
    min_positive: float = 1e-4
    # ray bracket refinement (enrichment near the slowest-draining ray point)
    max_rounds: int = 10
    bracket_points: int = 33
    bracket_floor: float = 1e-8
    # hard cap on batched substeps per record; curvature spikes in steep
    # profiles otherwise pin single samples at microscopic dt for minutes
    max_substeps: int = 400


def _minus_zero_dofs(gal: GalerkinSpace) -> np.ndarray:
    return np.nonzero(gal.dof_freq <= 0)[0]


def _sigma_sample_packed(gal: GalerkinSpace, tau: float, alpha: float,
                         cfg: LinkingConfig) -> np.ndarray:
    """Deterministic sample of Sigma_tau, including its boundary strata."""
    rng = np.random.default_rng(cfg.seed)
    mz = _minus_zero_dofs(gal)
    w_mz = gal.metric_w[mz]
    d_mz = mz.size

    def ball(count, surface=False):
        raw = rng.standard_normal((count, d_mz))
        raw /= np.sqrt(np.sum(w_mz * raw * raw, axis=1, keepdims=True))
        r = tau if surface else tau * rng.uniform(0, 1, (count, 1)) ** (1.0 / d_mz)
        return raw * r

    halton = qmc.Halton(d=1, scramble=True, seed=cfg.seed)
    s_int = tau * halton.random(cfg.n_interior)[:, 0]
    rows = []
    for body, s_vals in [
        (ball(cfg.n_interior), s_int),
        (ball(cfg.n_boundary, surface=True), tau * rng.uniform(0, 1, cfg.n_boundary)),
        (ball(cfg.n_boundary), np.full(cfg.n_boundary, tau)),
        (ball(cfg.n_boundary // 2), np.zeros(cfg.n_boundary // 2)),
    ]:
        X = np.zeros((body.shape[0], gal.dim))
        X[:, mz] = body
        X[:, gal.eplus_dof] += s_vals
        rows.append(X)
    ray = np.zeros((cfg.n_ray, gal.dim))
    ray[:, gal.eplus_dof] = np.linspace(0.0, tau, cfg.n_ray)
    rows.append(ray)
    distinguished = np.zeros((2, gal.dim))
    distinguished[1, gal.eplus_dof] = alpha
    rows.append(distinguished)
    return np.vstack(rows)


def build_sigma_sample(config: LinkingConfig, space: CoisoSpace,
                       max_freq: int = DEFAULT_MAX_FREQ) -> list:
    """Sample of Sigma_tau as SpectralPaths (0 and alpha e+ included)."""
    gal = GalerkinSpace(space, max_freq)
    tau = config.tau if config.tau is not None else 1.0
    alpha = config.alpha if config.alpha is not None else 0.5 * tau
    X = _sigma_sample_packed(gal, tau, alpha, config)
    return [gal.unpack(row) for row in X]


def sigma_membership(gal: GalerkinSpace, X: np.ndarray, tau: float,
                     tol: float = 1e-9) -> np.ndarray:
    """Predicate for x- + x0 + s e+ with ||x- + x0|| <= tau, s in [0, tau]."""
    X = np.atleast_2d(np.asarray(X, float))
    mz = _minus_zero_dofs(gal)
    plus = np.nonzero(gal.dof_freq > 0)[0]
    stray = np.setdiff1d(plus, [gal.eplus_dof])
    s = X[:, gal.eplus_dof]
    body = np.sqrt(np.sum(gal.metric_w[mz] * X[:, mz] ** 2, axis=1))
    clean = np.max(np.abs(X[:, stray]), axis=1, initial=0.0) <= tol
    return clean & (s >= -tol) & (s <= tau + tol) & (body <= tau + tol)


@dataclass(frozen=True)
class LinkingReport:
    tau_star: float
    tau: float
    alpha: float
    beta: float
    boundary_max_phi: float
    gamma_min_phi: float
    chain_margin: float
    boundary_ok: bool
    gamma_ok: bool


def _gamma_sample_packed(gal: GalerkinSpace, alpha: float, count: int,
                         seed: int) -> np.ndarray:
    """Points of the sphere ||x|| = alpha inside the full positive subspace."""
    rng = np.random.default_rng(seed + 1)
    plus = np.nonzero(gal.dof_freq > 0)[0]
    raw = rng.standard_normal((count, plus.size))
    raw /= np.sqrt(np.sum(gal.metric_w[plus] * raw * raw, axis=1, keepdims=True))
    X = np.zeros((count, gal.dim))
    X[:, plus] = alpha * raw
    # include the distinguished direction itself
    X[0] = 0.0
    X[0, gal.eplus_dof] = alpha / math.sqrt(math.pi)
    return X


def check_linking_bounds(F: ActionFunctional,
                         config: LinkingConfig | None = None) -> LinkingReport:
    """Verify Phi <= 0 on the boundary strata and Phi >= beta > 0 on Gamma_alpha.

    tau starts from the analytic sufficient radius when a comparison
    constant exists (growing until the sampled bound holds), and alpha
    scans downward until the sampled minimum clears beta = alpha^2 / 4.
    Raises BoundsNotFound when no pair verifies within the scan limits.
    """
    cfg = config or LinkingConfig()
    gal = F.gal

    # analytic tau*: Phi <= C - min(1/2, (pi/2+eps)/N^2, eps) tau^2 on the boundary
    tau_star = math.nan
    tau_candidates = []
    if isinstance(F.ham, ExtendedHamiltonian):
        C = F.ham.comparison_constant()
        eps = F.ham.eps
        coef = min(0.5, (HALF_PI + eps) / F.ham.n_scale ** 2, eps)
        tau_star = math.sqrt(C / coef)
        tau_candidates = [tau_star, 2 * tau_star, 4 * tau_star]
    if cfg.tau is not None:
        tau_candidates = [cfg.tau]
    if not tau_candidates:
        tau_candidates = [2.0, 4.0, 8.0, 16.0]

    boundary_ok = False
    boundary_max = math.inf
    chain_margin = math.inf
    tau_used = tau_candidates[-1]
    for tau in tau_candidates:
        X = _sigma_sample_packed(gal, tau, 0.5 * tau, cfg)
        mz_norm = np.sqrt(np.sum(gal.metric_w[_minus_zero_dofs(gal)]
                                 * X[:, _minus_zero_dofs(gal)] ** 2, axis=1))
        s = X[:, gal.eplus_dof]
        on_boundary = (np.abs(mz_norm - tau) <= 1e-9 * tau) \
            | (np.abs(s - tau) <= 1e-9 * tau) | (s <= 1e-12)
        phis = F.phi(X)
        if isinstance(F.ham, ExtendedHamiltonian):
            chain_margin = min(chain_margin, _chain_margin(F, X, phis))
        bmax = float(np.max(phis[on_boundary])) if on_boundary.any() else -math.inf
        boundary_max = bmax
        tau_used = tau
        if bmax <= 1e-10:
            boundary_ok = True
            break

    alpha = cfg.alpha if cfg.alpha is not None else 0.5
    gamma_ok = False
    gamma_min = -math.inf
    beta = 0.0
    for _ in range(12):
        if alpha >= tau_used:
            alpha *= 0.5
            continue
        XG = _gamma_sample_packed(gal, alpha, cfg.n_gamma, cfg.seed)
        gmin = float(np.min(F.phi(XG)))
        gamma_min = gmin
        beta_target = 0.25 * alpha * alpha
        if gmin >= beta_target > 0:
            gamma_ok = True
            beta = beta_target
            break
        alpha *= 0.5

    report = LinkingReport(tau_star=tau_star, tau=tau_used, alpha=alpha,
                           beta=beta, boundary_max_phi=boundary_max,
                           gamma_min_phi=gamma_min, chain_margin=chain_margin,
                           boundary_ok=boundary_ok, gamma_ok=gamma_ok)
    if not (boundary_ok and gamma_ok):
        raise BoundsNotFound(f"linking bounds not verified: {report}")
    return report


def _chain_margin(F: ActionFunctional, X: np.ndarray, phis: np.ndarray) -> float:
    """Slack in Phi <= C - 1/2||x-||^2 - eps s^2 - (pi/2+eps) q_Pi(x0)."""
    gal = F.gal
    ham = F.ham
    C = ham.comparison_constant()
    eps = ham.eps
    minus = np.nonzero(gal.dof_freq < 0)[0]
    zero = np.nonzero(gal.dof_freq == 0)[0]
    nminus2 = np.sum(gal.metric_w[minus] * X[:, minus] ** 2, axis=1)
    s = X[:, gal.eplus_dof]
    x0 = np.zeros((X.shape[0], gal.space.dim_ambient))
    x0[:, gal.dof_col[zero]] = X[:, zero]
    q0 = q_pi(gal.space, ham.n_scale, x0)
    bound = C - 0.5 * nminus2 - eps * s * s - (HALF_PI + eps) * q0
    return float(np.min(bound - phis))


def integral_inequality_check(space: CoisoSpace, sample, n_scale: float = 2,
                              n_quad: int | None = None,
                              tol: float = -1e-12) -> dict:
    """Check int q_Pi(x) >= int q_Pi(x0) + int q_Pi(s e+), same rule throughout.

    sample: iterable of SpectralPath of the Sigma form (no positive modes
    besides the e+ one, s >= 0), or a packed (S, dim) array paired with a
    GalerkinSpace via the attribute protocol below.  All three integrals
    use one shared Gauss-Legendre rule, so the orthogonality cancellations
    behind the inequality survive discretization up to rounding dust.
    """
    if isinstance(sample, tuple) and isinstance(sample[0], GalerkinSpace):
        gal, X = sample
        X = np.atleast_2d(np.asarray(X, float))
    else:
        paths = list(sample)
        if not paths:
            return {"n_samples": 0, "worst_margin": math.inf,
                    "violations": 0, "tolerance": tol}
        width = max(p.max_freq for p in paths)
        gal = GalerkinSpace(space, width, n_quad or max(32, 4 * width))
        X = np.vstack([gal.pack(p) for p in paths])
    ok = sigma_membership(gal, X, tau=math.inf)
    if not ok.all():
        raise ValueError("sample contains paths not of the form x- + x0 + s e+")
    s = X[:, gal.eplus_dof]
    pts = gal.eval_batch(X)
    i_full = q_pi(space, n_scale, pts) @ gal.w_quad
    zero = np.nonzero(gal.dof_freq == 0)[0]
    x0 = np.zeros((X.shape[0], space.dim_ambient))
    x0[:, gal.dof_col[zero]] = X[:, zero]
    i_zero = q_pi(space, n_scale, x0) * float(np.sum(gal.w_quad))
    ray_pts = s[:, None, None] * gal.eval_batch(gal.ray_point(1.0))
    i_ray = q_pi(space, n_scale, ray_pts) @ gal.w_quad
    margins = i_full - i_zero - i_ray
    return {"n_samples": int(X.shape[0]), "worst_margin": float(np.min(margins)),
            "violations": int(np.sum(margins < tol)), "tolerance": tol}


# ---------------------------------------------------------------------------
# minimax


@dataclass(frozen=True)
class ChordResult:
    """A validated leafwise chord extracted from the minimax flow."""

    path: SpectralPath
    action: float
    grad_norm: float
    ode_residual: float
    leaf_res: float
    inside_flag: bool
    records: tuple = ()


class _Evolver:
    """Adaptive per-sample exponential-Euler driver with monotonicity guard."""

    def __init__(self, F: ActionFunctional, X: np.ndarray,
                 dt0: float = 0.05, dt_max: float = 0.25,
                 freeze_level: float | None = None,
                 pos_floor: float = 1e-5):
        self.F = F
        self.X = np.array(X, dtype=float)
        self.phi = np.asarray(F.phi(self.X), dtype=float)
        self.dt = np.full(self.X.shape[0], dt0)
        self.dt_max = dt_max
        C = 2.0
        try:
            C = F.comparison_constant()
        except BoundsNotFound:
            pass
        self.freeze_level = freeze_level if freeze_level is not None else -10.0 * C
        # Phi is monotone along each trajectory, so a sample that has drained
        # below pos_floor can never matter for a positive plateau again; once
        # its step size also collapses it is pure cost and gets parked
        self.pos_floor = pos_floor
        self.frozen = np.zeros(self.X.shape[0], dtype=bool)

    def advance(self, horizon: float, max_substeps: int | None = None):
        """Advance active samples by up to `horizon` time units.

        Each loop iteration applies one batched trial step.  When
        max_substeps runs out the laggards simply carry less flow time into
        this record, which only stretches their schedule; accepted steps are
        still monotone in Phi.
        """
        remaining = np.where(self.frozen, 0.0, horizon)
        iters = 0
        while np.any(remaining > 1e-12):
            if max_substeps is not None and iters >= max_substeps:
                break
            iters += 1
            active = np.nonzero(remaining > 1e-12)[0]
            dt = np.minimum(self.dt[active], remaining[active])
            trial = _flow_step_packed(self.F, self.X[active], dt)
            phi_new = np.asarray(self.F.phi(trial), dtype=float)
            ok = phi_new <= self.phi[active] + 1e-10
            acc = active[ok]
            self.X[acc] = trial[ok]
            self.phi[acc] = phi_new[ok]
            remaining[acc] -= dt[ok]
            self.dt[acc] = np.minimum(self.dt[acc] * 2.0, self.dt_max)
            rej = active[~ok]
            self.dt[rej] *= 0.5
            stuck = rej[self.dt[rej] < 1e-9]
            if stuck.size:
                self.frozen[stuck] = True
                remaining[stuck] = 0.0
            done = self.phi[active] < self.freeze_level
            done |= (self.phi[active] < self.pos_floor) & (self.dt[active] < 1e-4)
            newly_frozen = active[done]
            if newly_frozen.size:
                self.frozen[newly_frozen] = True
                remaining[newly_frozen] = 0.0

    def add(self, rows: np.ndarray) -> np.ndarray:
        rows = np.atleast_2d(rows)
        ids = np.arange(self.X.shape[0], self.X.shape[0] + rows.shape[0])
        self.X = np.vstack([self.X, rows])
        self.phi = np.concatenate([self.phi, np.asarray(self.F.phi(rows), float)])
        self.dt = np.concatenate([self.dt, np.full(rows.shape[0], 0.05)])
        self.frozen = np.concatenate([self.frozen,
                                      np.zeros(rows.shape[0], dtype=bool)])
        return ids

    def sup(self) -> tuple[float, int]:
        j = int(np.argmax(self.phi))
        return float(self.phi[j]), j


def minimax_estimate(F: ActionFunctional,
                     config: LinkingConfig | None = None):
    """Evolve a Sigma sample, record sup Phi, extract and validate a chord.

    A finite sample drains off the mountain pass, so whenever the records
    plateau the sample is enriched with a cohort of fresh ray points
    bracketing the slowest-draining parameter seen so far.  Each round
    narrows the bracket eightfold; points this close to the stable set hang
    near the pass level for many records, which is what the plateau detector
    needs.  Narrowing stops at bracket_floor since the discrete flow cannot
    separate parameters much below it.

    Returns (value, ChordResult) where value is the observed infimum of the
    recorded sups over the last cohort's schedule.  Raises NoConvergence
    when the records never plateau or plateau at a level that is not
    meaningfully positive, BoundsNotFound when the linking preconditions
    cannot be verified (unless disabled), and ValidationFailed when the
    refined candidate misses the tolerances.
    """
    cfg = config or LinkingConfig()
    gal = F.gal
    try:
        link = check_linking_bounds(F, cfg)
        tau, alpha = link.tau, link.alpha
    except BoundsNotFound:
        if cfg.require_linking:
            raise
        tau = cfg.tau if cfg.tau is not None else 4.0
        alpha = cfg.alpha if cfg.alpha is not None else 0.1

    ev = _Evolver(F, _sigma_sample_packed(gal, tau, alpha, cfg),
                  pos_floor=0.1 * cfg.min_positive)

    # the static ray profile seeds the first bracket
    unit = gal.ray_point(1.0)
    ray_s = np.linspace(0.0, tau, cfg.n_ray)
    center = float(ray_s[int(np.argmax(F.phi(ray_s[:, None] * unit[None, :])))])
    half = float(ray_s[1] - ray_s[0])

    records = []
    plateau = 0
    rounds = 0
    enrich_from = 0
    cohort_ids = None
    cohort_s = None
    at_floor = False
    for k in range(cfg.max_records):
        ev.advance(cfg.record_dt, cfg.max_substeps)
        sup, arg = ev.sup()
        records.append({"t": (k + 1) * cfg.record_dt, "sup_phi": sup,
                        "argmax_path_id": arg})
        if len(records) >= 2:
            if abs(records[-1]["sup_phi"] - records[-2]["sup_phi"]) <= cfg.plateau_tol:
                plateau += 1
            else:
                plateau = 0
        # a drained sample can never climb back (the flow is monotone), so
        # skip the wait for a formal plateau at the bottom
        ready = plateau >= cfg.plateau_len or sup < cfg.min_positive
        if not ready:
            continue
        if at_floor or rounds >= cfg.max_rounds:
            break
        if cohort_ids is not None:
            # slowest drainer in the last cohort sits nearest the stable set
            center = float(cohort_s[int(np.argmax(ev.phi[cohort_ids]))])
        lo, hi = max(center - half, 0.0), min(center + half, tau)
        cohort_s = np.linspace(lo, hi, cfg.bracket_points)
        cohort_ids = ev.add(cohort_s[:, None] * unit[None, :])
        spacing = (hi - lo) / (cfg.bracket_points - 1)
        half = 2.0 * spacing
        at_floor = spacing <= cfg.bracket_floor
        rounds += 1
        plateau = 0
        enrich_from = len(records)
    else:
        err = NoConvergence(
            f"sup did not plateau within {cfg.max_records} records "
            f"(last sup {records[-1]['sup_phi']:.6g})")
        err.records = tuple(records)
        raise err

    # earlier rounds drain before their bracket tightens, so the honest
    # infimum is taken over the last cohort's schedule only
    value = min(r["sup_phi"] for r in records[enrich_from:])
    if value < cfg.min_positive:
        err = NoConvergence(
            f"records plateaued at {value:.3e}, not meaningfully positive: "
            "no positive-action chord located")
        err.records = tuple(records)
        raise err

    sup, arg = ev.sup()
    seed = ev.X[arg]
    try:
        result = refine_and_validate(F, seed, records=tuple(records))
    except ValidationFailed as err:
        err.records = tuple(records)
        raise
    return value, result


def refine_and_validate(F: ActionFunctional, seed: np.ndarray,
                        records: tuple = (),
                        tol_crit: float = TOL_CRIT,
                        tol_ode: float = TOL_ODE,
                        tol_leaf: float = TOL_LEAF) -> ChordResult:
    """Gauss-Newton polish of ||grad Phi|| from a seed, then residual gates."""
    gal = F.gal
    sqw = np.sqrt(gal.metric_w)

    def resid(x):
        return sqw * F.grad_packed(x)

    sol = least_squares(resid, np.asarray(seed, float), method="lm",
                        xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=4000)
    x = sol.x
    grad_norm = float(np.linalg.norm(resid(x)))
    path = gal.unpack(x)
    action = float(F.phi(x))

    grid = np.linspace(0.0, 1.0, ODE_GRID)
    Bg = gal.basis_matrix(grid)
    Dg = gal.deriv_matrix(grid)
    vals = np.einsum("tjd,d->tj", Bg, x)
    dvals = np.einsum("tjd,d->tj", Dg, x)
    n = gal.space.n
    G = np.asarray(F.ham.grad(vals), dtype=float)
    JG = np.concatenate([-G[:, n:], G[:, :n]], axis=1)
    ode_residual = float(np.max(np.linalg.norm(dvals - JG, axis=1)))
    leaf_res = float(gal.space.leaf_residual(vals[0], vals[-1]))
    if isinstance(F.ham, ExtendedHamiltonian):
        qmax = float(np.max(F.ham.q(vals)))
    else:
        qmax = float(np.max(q_pi(gal.space, 2, vals)))
    inside = qmax <= 1.0 + 1e-8

    failures = []
    if not grad_norm < tol_crit:
        failures.append(f"grad_norm {grad_norm:.3e} >= {tol_crit}")
    if not action > 0:
        failures.append(f"action {action:.3e} <= 0")
    if not ode_residual < tol_ode:
        failures.append(f"ode_residual {ode_residual:.3e} >= {tol_ode}")
    if not leaf_res < tol_leaf:
        failures.append(f"leaf_res {leaf_res:.3e} >= {tol_leaf}")
    if not inside:
        failures.append(f"max q_Pi {qmax:.6f} > 1 + 1e-8 for a positive action")
    # every constant path in the profile's flat bottom is a critical point,
    # so the zero-frequency block is excluded before testing degeneracy
    osc = np.where(gal.dof_freq == 0, 0.0, x)
    if float(gal.norm(osc)) <= 1e-8:
        failures.append("candidate is a constant path")
    if failures:
        raise ValidationFailed("; ".join(failures))
    return ChordResult(path=path, action=action, grad_norm=grad_norm,
                       ode_residual=ode_residual, leaf_res=leaf_res,
                       inside_flag=inside, records=records)


# ---------------------------------------------------------------------------
# shooting oracle


def shooting_chords(ham, s_max: float = 1.0, n_scan: int = 257,
                    tol: float = 1e-12) -> list:
    """Independent chord finder for n = 1, k = 0 by shooting on x' = J grad H.

    Radial symmetry collapses the initial-condition search to the initial
    abscissa xi > 0 on the leaf; the chord condition is y(1; xi) = 0 with
    the orbit actually leaving the leaf in between.  Actions come from
    time-domain quadrature of the solution, with no spectral machinery
    involved, so this is a genuinely independent oracle for the minimax.
    """
    space = ham.space
    if space.n != 1 or space.k != 0:
        raise ValueError("the shooting oracle is implemented for n=1, k=0")

    def field(t, z):
        g = ham.grad(z)
        return np.array([-g[1], g[0]])

    def solve(xi: float, dense: bool = False):
        return solve_ivp(field, (0.0, 1.0), np.array([xi, 0.0]),
                         method="DOP853", rtol=1e-12, atol=1e-12,
                         dense_output=dense)

    def y_end(xi: float) -> float:
        return float(solve(xi).y[1, -1])

    grid = np.linspace(1e-6, s_max, n_scan)
    moving = np.array([np.linalg.norm(ham.grad(np.array([g, 0.0]))) > 1e-12
                       for g in grid])
    vals = np.array([y_end(g) if m else 0.0 for g, m in zip(grid, moving)])
    chords = []
    for i in range(n_scan - 1):
        if not (moving[i] and moving[i + 1]):
            continue
        if vals[i] == 0.0 and abs(vals[i + 1]) > 0:
            continue
        if vals[i] * vals[i + 1] < 0.0:
            xi = brentq(y_end, grid[i], grid[i + 1], xtol=tol, rtol=8.9e-16)
            chords.append(_shooting_record(ham, solve(xi, dense=True), xi))
    return chords


def _shooting_record(ham, sol, xi: float) -> dict:
    ts = np.linspace(0.0, 1.0, 4097)
    zs = sol.sol(ts).T
    G = np.asarray(ham.grad(zs), dtype=float)
    a_val = 0.5 * simpson(np.sum(G * zs, axis=1), x=ts)
    b_val = simpson(np.asarray(ham.value(zs), dtype=float), x=ts)
    return {"xi": float(xi), "action": float(a_val - b_val),
            "y_end": float(zs[-1, 1]),
            "radius": float(np.linalg.norm(zs[0] - getattr(ham, "center",
                                                           np.zeros(2))))}
