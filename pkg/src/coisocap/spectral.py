"""Constrained Fourier paths, fractional inner products, and the action form.

Paths gamma : [0, 1] -> R^{2n} are stored by their coefficients in the
rotating basis

    gamma(t) = sum_m  e^{m pi J t} z_m,        |m| <= max_freq,

where e^{theta J} is the blockwise 2x2 rotation (geometry.rotate).  The
boundary-condition constraint is encoded by a parity rule on the
coefficients:

    m odd  ->  z_m in V0            (leaf directions only),
    m even ->  z_m in V0 + V1       (the coisotropic subspace C).

Under this rule gamma(0) and gamma(1) automatically lie on C and differ by
an element of V0, i.e. the endpoints sit on one leaf; and the basis paths
t -> e^{m pi J t} e are L^2([0,1])-orthonormal whenever both frequencies
obey the rule.  (Same-direction pairs integrate to delta_{ml} for every
frequency pair; J-related directions within one plane would fail this for
frequencies of opposite parity, but the parity rule never mixes them.)

Two inner-product normalizations coexist, on purpose:

* `hs_inner(phi, psi, s)` is the fractional H^s pairing

      <z_0, w_0> + (pi/2) sum_{m != 0} |m|^{2s} <z_m, w_m>,

  the convention in which the distinguished path e+ (single coefficient
  z_1 = e_n) has squared H^{1/2} norm pi/2.

* `flow_inner(phi, psi)` is the s = 1/2 pairing with weight pi instead of
  pi/2.  It is the metric used by the variational solver: there the action
  form below satisfies a(x) = 1/2 ||x+||^2 - 1/2 ||x-||^2 exactly, the
  gradient of a is P+ - P-, and ||e+||^2 = pi.

The signed action form is

    a(phi, psi) = (pi/2) sum_m m <z_m, w_m>
                = 1/2 Integral_0^1 <-J phi'(t), psi(t)> dt,

with the time-domain form reproduced by `action_form_a_quadrature` through
Gauss-Legendre quadrature as an independent route.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .geometry import CoisoSpace, apply_J

DEFAULT_MAX_FREQ = 32


class ParityViolation(ValueError):
    """Coefficient outside the subspace allowed for its frequency parity."""


class SpaceMismatch(ValueError):
    """Operands built over different (n, k) spaces."""


def gauss_legendre_01(n_nodes: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes and weights on [0, 1]."""
    x, w = np.polynomial.legendre.leggauss(int(n_nodes))
    return 0.5 * (x + 1.0), 0.5 * w


def parity_mask(space: CoisoSpace, max_freq: int) -> np.ndarray:
    """Boolean (2N+1, 2n) array of components allowed by the parity rule.

    Row r corresponds to frequency m = r - N.
    """
    n2 = space.dim_ambient
    freqs = np.arange(-max_freq, max_freq + 1)
    mask = np.zeros((freqs.size, n2), dtype=bool)
    even = freqs % 2 == 0
    mask[np.ix_(even, space.coiso_indices)] = True
    mask[np.ix_(~even, space.v0_indices)] = True
    return mask


@dataclass(frozen=True)
class SpectralPath:
    """A constrained Fourier path.

    coeffs has shape (2*max_freq + 1, 2n); row r holds z_m for m = r - max_freq.
    Components outside the parity rule must be exactly zero.
    """

    space: CoisoSpace
    coeffs: np.ndarray = field()

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=float)
        if c.ndim != 2 or c.shape[1] != self.space.dim_ambient or c.shape[0] % 2 != 1:
            raise ValueError(f"coefficient array has shape {c.shape}, expected "
                             f"(odd, {self.space.dim_ambient})")
        mask = parity_mask(self.space, c.shape[0] // 2)
        bad = np.abs(c[~mask])
        if bad.size and bad.max() > 0.0:
            raise ParityViolation(
                f"forbidden coefficient of size {bad.max():.3e} present "
                "(odd frequencies must lie in V0, even ones in the coisotropic)")
        object.__setattr__(self, "coeffs", c)

    @property
    def max_freq(self) -> int:
        return self.coeffs.shape[0] // 2

    @property
    def frequencies(self) -> np.ndarray:
        return np.arange(-self.max_freq, self.max_freq + 1)

    def coefficient(self, m: int) -> np.ndarray:
        if abs(m) > self.max_freq:
            return np.zeros(self.space.dim_ambient)
        return self.coeffs[m + self.max_freq]

    def __add__(self, other: "SpectralPath") -> "SpectralPath":
        _same_space(self, other)
        a, b = _common_width(self, other)
        return SpectralPath(self.space, a + b)

    def __sub__(self, other: "SpectralPath") -> "SpectralPath":
        _same_space(self, other)
        a, b = _common_width(self, other)
        return SpectralPath(self.space, a - b)

    def __mul__(self, scalar: float) -> "SpectralPath":
        return SpectralPath(self.space, float(scalar) * self.coeffs)

    __rmul__ = __mul__


def _same_space(phi: SpectralPath, psi: SpectralPath):
    if phi.space != psi.space:
        raise SpaceMismatch(f"paths live over {phi.space} and {psi.space}")


def _common_width(phi: SpectralPath, psi: SpectralPath):
    n = max(phi.max_freq, psi.max_freq)
    return _pad(phi, n), _pad(psi, n)


def _pad(phi: SpectralPath, max_freq: int) -> np.ndarray:
    if phi.max_freq == max_freq:
        return phi.coeffs
    pad = max_freq - phi.max_freq
    return np.pad(phi.coeffs, ((pad, pad), (0, 0)))


def zero_path(space: CoisoSpace, max_freq: int = DEFAULT_MAX_FREQ) -> SpectralPath:
    return SpectralPath(space, np.zeros((2 * max_freq + 1, space.dim_ambient)))


def from_modes(space: CoisoSpace, modes: dict, max_freq: int | None = None) -> SpectralPath:
    """Build a path from {frequency: coefficient vector}."""
    if max_freq is None:
        max_freq = max((abs(int(m)) for m in modes), default=0)
    coeffs = np.zeros((2 * max_freq + 1, space.dim_ambient))
    for m, vec in modes.items():
        m = int(m)
        if abs(m) > max_freq:
            raise ValueError(f"frequency {m} exceeds max_freq={max_freq}")
        coeffs[m + max_freq] = np.asarray(vec, dtype=float)
    return SpectralPath(space, coeffs)


def e_plus(space: CoisoSpace, max_freq: int = 1) -> SpectralPath:
    """The distinguished positive path t -> e^{pi J t} e_n (z_1 = e_n)."""
    vec = np.zeros(space.dim_ambient)
    vec[space.n - 1] = 1.0
    return from_modes(space, {1: vec}, max_freq=max_freq)


# ---------------------------------------------------------------------------
# evaluation


def evaluate(path: SpectralPath, t) -> np.ndarray:
    """gamma(t) for scalar or array t; returns shape t.shape + (2n,)."""
    t = np.asarray(t, dtype=float)
    scalar = t.ndim == 0
    tv = np.atleast_1d(t)
    n = path.space.n
    ang = np.pi * np.outer(path.frequencies, tv)          # (2N+1, T)
    c, s = np.cos(ang), np.sin(ang)
    zx = path.coeffs[:, :n]
    zy = path.coeffs[:, n:]
    vx = np.einsum("mt,mi->ti", c, zx) - np.einsum("mt,mi->ti", s, zy)
    vy = np.einsum("mt,mi->ti", s, zx) + np.einsum("mt,mi->ti", c, zy)
    out = np.concatenate([vx, vy], axis=-1)
    return out[0] if scalar else out.reshape(t.shape + (2 * n,))


def derivative_values(path: SpectralPath, t) -> np.ndarray:
    """gamma'(t); each mode differentiates to m pi J e^{m pi J t} z_m."""
    dcoeffs = np.pi * path.frequencies[:, None] * apply_J(path.coeffs)
    dpath = SpectralPath.__new__(SpectralPath)
    object.__setattr__(dpath, "space", path.space)
    object.__setattr__(dpath, "coeffs", dcoeffs)
    return evaluate(dpath, t)


# ---------------------------------------------------------------------------
# inner products and the action form


def hs_inner(phi: SpectralPath, psi: SpectralPath, s: float) -> float:
    """Fractional H^s pairing, pi/2-weighted convention."""
    _same_space(phi, psi)
    a, b = _common_width(phi, psi)
    m = np.arange(-(a.shape[0] // 2), a.shape[0] // 2 + 1)
    per_freq = np.sum(a * b, axis=1)
    nz = m != 0
    return float(per_freq[~nz].sum()
                 + 0.5 * np.pi * np.sum(np.abs(m[nz]) ** (2.0 * s) * per_freq[nz]))


def hs_norm(phi: SpectralPath, s: float) -> float:
    return float(np.sqrt(max(hs_inner(phi, phi, s), 0.0)))


def flow_inner(phi: SpectralPath, psi: SpectralPath) -> float:
    """s = 1/2 pairing with weight pi: the variational-flow metric.

    In this metric a(x) = 1/2||P+ x||^2 - 1/2||P- x||^2 and ||e+||^2 = pi.
    """
    _same_space(phi, psi)
    a, b = _common_width(phi, psi)
    m = np.arange(-(a.shape[0] // 2), a.shape[0] // 2 + 1)
    per_freq = np.sum(a * b, axis=1)
    w = np.where(m == 0, 1.0, np.pi * np.abs(m))
    return float(np.sum(w * per_freq))


def flow_norm(phi: SpectralPath) -> float:
    return float(np.sqrt(max(flow_inner(phi, phi), 0.0)))


def project_part(path: SpectralPath, part: str) -> SpectralPath:
    """Spectral projection: part '+' keeps m > 0, '0' keeps m = 0, '-' m < 0."""
    m = path.frequencies
    keep = {"+": m > 0, "0": m == 0, "-": m < 0}.get(part)
    if keep is None:
        raise ValueError(f"part must be '+', '0' or '-', got {part!r}")
    coeffs = np.where(keep[:, None], path.coeffs, 0.0)
    return SpectralPath(path.space, coeffs)


@dataclass(frozen=True)
class SpectralDecomposition:
    """The three frequency-sign parts of a path; they sum back to it."""

    minus: SpectralPath
    zero: np.ndarray
    plus: SpectralPath

    def reconstruct(self) -> SpectralPath:
        space = self.minus.space
        mean = from_modes(space, {0: self.zero},
                          max_freq=self.minus.max_freq)
        return self.minus + mean + self.plus


def project(path: SpectralPath) -> SpectralDecomposition:
    """Split a path into negative, constant, and positive frequency parts."""
    return SpectralDecomposition(minus=project_part(path, "-"),
                                 zero=path.coefficient(0).copy(),
                                 plus=project_part(path, "+"))


def truncate(path: SpectralPath, max_freq: int) -> SpectralPath:
    """Drop frequencies above max_freq (returns a narrower coefficient array)."""
    if max_freq >= path.max_freq:
        return path
    lo = path.max_freq - max_freq
    return SpectralPath(path.space, path.coeffs[lo:lo + 2 * max_freq + 1].copy())


def action_form_a(phi: SpectralPath, psi: SpectralPath) -> float:
    """Signed action form a(phi, psi) = (pi/2) sum_m m <z_m, w_m>."""
    _same_space(phi, psi)
    a, b = _common_width(phi, psi)
    m = np.arange(-(a.shape[0] // 2), a.shape[0] // 2 + 1)
    return float(0.5 * np.pi * np.sum(m * np.sum(a * b, axis=1)))


def action_value(phi: SpectralPath) -> float:
    return action_form_a(phi, phi)


def action_form_a_quadrature(phi: SpectralPath, psi: SpectralPath,
                             n_quad: int | None = None) -> float:
    """Time-domain route: 1/2 Integral <-J phi'(t), psi(t)> dt by Gauss-Legendre.

    For truncated paths the integrand is a trigonometric polynomial, so with
    the default node count (4x the larger truncation, at least 32) the rule
    is exact to rounding.
    """
    _same_space(phi, psi)
    if n_quad is None:
        n_quad = max(32, 4 * max(phi.max_freq, psi.max_freq))
    t, w = gauss_legendre_01(n_quad)
    integrand = np.sum(-apply_J(derivative_values(phi, t)) * evaluate(psi, t), axis=-1)
    return float(0.5 * np.dot(w, integrand))


# ---------------------------------------------------------------------------
# serialization


def path_to_json(path: SpectralPath) -> str:
    """Bit-exact JSON encoding (floats serialize via repr round-trip)."""
    payload = {
        "n": path.space.n,
        "k": path.space.k,
        "max_freq": path.max_freq,
        "coeffs": [[int(m), path.coefficient(int(m)).tolist()]
                   for m in path.frequencies],
    }
    return json.dumps(payload, sort_keys=True)


def path_from_json(text: str) -> SpectralPath:
    payload = json.loads(text)
    space = CoisoSpace(int(payload["n"]), int(payload["k"]))
    modes = {int(m): vec for m, vec in payload["coeffs"]}
    return from_modes(space, modes, max_freq=int(payload["max_freq"]))
