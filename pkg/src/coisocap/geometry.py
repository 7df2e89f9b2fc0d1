"""Linear symplectic geometry of R^{2n} relative to a coisotropic subspace.

Points are numpy arrays with the coordinate layout

    p = (x_1, ..., x_n, y_1, ..., y_n),

so x_i sits at index i-1 and y_i at index n+i-1.  The complex structure J
acts blockwise as J(x, y) = (-y, x), and the symplectic form is
omega(u, v) = <Ju, v>, which gives omega(x_i, y_i) = +1.

The distinguished coisotropic subspace with parameters (n, k), 0 <= k < n,
keeps all x coordinates and the first k of the y coordinates:

    C = {(x_1..x_n, y_1..y_k, 0, ..., 0)},      dim C = n + k.

Its characteristic foliation is by affine translates of

    V0 = span{x_{k+1}, ..., x_n}                (n - k leaf directions),

and two more distinguished subspaces appear throughout:

    V1 = span{x_1..x_k, y_1..y_k}               (2k symplectic directions),
    W0 = span{y_{k+1}, ..., y_n}                (= J V0, normal directions).

V0 + V1 = C and the three spaces are mutually orthogonal.  The linear
involution c negates the y_{k+1..n} coordinates; its fixed-point set is
exactly C.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class NotOnCoisotropic(ValueError):
    """Raised when a point is too far from the coisotropic subspace."""


def apply_J(p: np.ndarray) -> np.ndarray:
    """Apply the standard complex structure J(x, y) = (-y, x).

    Works on any array whose last axis has even length 2n.
    """
    p = np.asarray(p, dtype=float)
    n = p.shape[-1] // 2
    if p.shape[-1] != 2 * n or n == 0:
        raise ValueError(f"last axis must have even positive length, got {p.shape[-1]}")
    out = np.empty_like(p)
    out[..., :n] = -p[..., n:]
    out[..., n:] = p[..., :n]
    return out


def rotate(p: np.ndarray, theta) -> np.ndarray:
    """Apply e^{theta J}: rotation by theta in every (x_i, y_i) plane.

    `theta` may be a scalar or an array broadcastable against p's leading axes.
    Implemented with the real 2x2 rotation blocks; no complex arithmetic.
    """
    p = np.asarray(p, dtype=float)
    n = p.shape[-1] // 2
    theta = np.asarray(theta, dtype=float)[..., None]
    c, s = np.cos(theta), np.sin(theta)
    x, y = p[..., :n], p[..., n:]
    out = np.empty(np.broadcast_shapes(p.shape[:-1], c.shape[:-1]) + (2 * n,))
    out[..., :n] = c * x - s * y
    out[..., n:] = s * x + c * y
    return out


def symplectic_form(u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """omega(u, v) = <Ju, v>, the standard symplectic form."""
    return np.sum(apply_J(u) * np.asarray(v, dtype=float), axis=-1)


@dataclass(frozen=True)
class CoisoSpace:
    """The pair (R^{2n}, C) for the standard coisotropic C of type (n, k)."""

    n: int
    k: int

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"need n >= 1, got n={self.n}")
        if not 0 <= self.k < self.n:
            raise ValueError(f"need 0 <= k < n, got k={self.k}, n={self.n}")

    # ---- index helpers (all refer to positions in the length-2n layout) ----

    @property
    def dim_ambient(self) -> int:
        return 2 * self.n

    @property
    def dim_coiso(self) -> int:
        return self.n + self.k

    @property
    def v0_indices(self) -> np.ndarray:
        """x_{k+1..n}: the leaf directions."""
        return np.arange(self.k, self.n)

    @property
    def v1_indices(self) -> np.ndarray:
        """x_{1..k} and y_{1..k}: the symplectic directions inside C."""
        return np.concatenate([np.arange(0, self.k),
                               np.arange(self.n, self.n + self.k)])

    @property
    def w0_indices(self) -> np.ndarray:
        """y_{k+1..n}: the directions normal to C (equal to J V0)."""
        return np.arange(self.n + self.k, 2 * self.n)

    @property
    def coiso_indices(self) -> np.ndarray:
        return np.arange(0, self.n + self.k)

    # ---- membership and projections ----

    def contains(self, p: np.ndarray, tol: float = 1e-9) -> np.ndarray:
        """Whether p lies on C up to tol (checks the y_{k+1..n} components)."""
        p = self._check(p)
        w = p[..., self.w0_indices]
        return np.max(np.abs(w), axis=-1) <= tol

    def project_coiso(self, p: np.ndarray) -> np.ndarray:
        """Orthogonal projection onto C (zero the y_{k+1..n} components)."""
        out = self._check(p).copy()
        out[..., self.w0_indices] = 0.0
        return out

    def project_v0(self, p: np.ndarray) -> np.ndarray:
        out = np.zeros_like(self._check(p))
        out[..., self.v0_indices] = np.asarray(p, dtype=float)[..., self.v0_indices]
        return out

    def project_v1(self, p: np.ndarray) -> np.ndarray:
        out = np.zeros_like(self._check(p))
        out[..., self.v1_indices] = np.asarray(p, dtype=float)[..., self.v1_indices]
        return out

    def project_w0(self, p: np.ndarray) -> np.ndarray:
        out = np.zeros_like(self._check(p))
        out[..., self.w0_indices] = np.asarray(p, dtype=float)[..., self.w0_indices]
        return out

    def involution(self, p: np.ndarray) -> np.ndarray:
        """The involution fixing C: negate the y_{k+1..n} coordinates."""
        out = self._check(p).copy()
        out[..., self.w0_indices] *= -1.0
        return out

    # ---- leaves of the characteristic foliation ----

    def leaf_of(self, p: np.ndarray, tol: float = 1e-9) -> "Leaf":
        """Leaf of the characteristic foliation through a point of C.

        The anchor is the unique leaf point with vanishing V0 component; the
        tiny off-C residual of p (below tol) is snapped to exactly zero.
        """
        p = self._check(p)
        if p.ndim != 1:
            raise ValueError("leaf_of expects a single point")
        off = float(np.max(np.abs(p[self.w0_indices]), initial=0.0))
        if off > tol:
            raise NotOnCoisotropic(
                f"point is {off:.3e} away from the coisotropic subspace (tol {tol:.1e})")
        anchor = p.copy()
        anchor[self.v0_indices] = 0.0
        anchor[self.w0_indices] = 0.0
        return Leaf(space=self, anchor=anchor)

    def leaf_residual(self, p: np.ndarray, q: np.ndarray) -> np.ndarray:
        """Distance-like defect measuring whether p and q share a leaf.

        Combines the off-C parts of both points with their V1-component
        difference; zero exactly when both lie on C and on the same leaf.
        """
        p = self._check(p)
        q = self._check(q)
        pw = p[..., self.w0_indices]
        qw = q[..., self.w0_indices]
        d1 = (p - q)[..., self.v1_indices]
        return np.sqrt(np.sum(pw ** 2, axis=-1) + np.sum(qw ** 2, axis=-1)
                       + np.sum(d1 ** 2, axis=-1))

    def _check(self, p: np.ndarray) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        if p.shape[-1] != 2 * self.n:
            raise ValueError(
                f"point has last axis {p.shape[-1]}, expected {2 * self.n}")
        return p


@dataclass(frozen=True)
class Leaf:
    """A leaf anchor + its space.  Leaves are affine translates of V0."""

    space: CoisoSpace
    anchor: np.ndarray = field()

    def __post_init__(self):
        a = np.asarray(self.anchor, dtype=float)
        object.__setattr__(self, "anchor", a)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Leaf):
            return NotImplemented
        return (self.space == other.space
                and self.anchor.shape == other.anchor.shape
                and bool(np.all(self.anchor == other.anchor)))

    def __hash__(self):
        return hash((self.space, self.anchor.tobytes()))

    def contains(self, p: np.ndarray, tol: float = 1e-9) -> bool:
        """Whether p lies on this leaf up to tol."""
        return bool(self.space.leaf_residual(self.anchor, p) <= tol)


def involution_c(space: CoisoSpace, p: np.ndarray) -> np.ndarray:
    """Linear involution fixing the coisotropic subspace: negates the W0 part."""
    return space.involution(p)


def leaf_of(space: CoisoSpace, p: np.ndarray, tol: float = 1e-9) -> Leaf:
    """Leaf through a point of the coisotropic subspace."""
    return space.leaf_of(p, tol=tol)


def leaf_residual(space: CoisoSpace, p: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Distance-like defect of p, q lying on one common leaf."""
    return space.leaf_residual(p, q)
