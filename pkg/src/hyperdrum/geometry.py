"""Hyperbolic 3-space in the Minkowski (hyperboloid) model.

Points live on the upper sheet of the unit hyperboloid

    x0^2 - x1^2 - x2^2 - x3^2 = 1,   x0 >= 1,

inside R^{3,1} with metric signature (+,-,-,-).  Isometries are
orthochronous, orientation-preserving Lorentz matrices g in SO(3,1)
acting by matrix multiplication.  Geodesic distance between two points
is arccosh of their Minkowski inner product.

Spherical coordinates (rho, theta, phi) are attached via

    x0 = cosh(rho)
    x1 = sinh(rho) sin(theta) cos(phi)
    x2 = sinh(rho) sin(theta) sin(phi)
    x3 = sinh(rho) cos(theta)

with theta measured from the x3 axis.  The Klein chart is u_i = x_i/x0
and the Poincare chart is v_i = x_i/(1 + x0); both map the hyperboloid
into the open unit ball.

All operations are pure functions over immutable values and are safe to
call concurrently.  Group words of moderate length accumulate floating
point drift, so `compose` re-orthonormalizes its result against the
Minkowski metric (a modified Gram-Schmidt); without this, words of
length ~15 drift above 1e-8.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

ETA_DIAG = np.array([1.0, -1.0, -1.0, -1.0])
ETA = np.diag(ETA_DIAG)

POINT_TOL = 1e-12       # hyperboloid defect allowed at construction
ISOMETRY_TOL = 1e-10    # Lorentz defect allowed at construction
WORD_TOL = 1e-8         # defect allowed after long words
_DOT_SLACK = 1e-6       # how far below 1 an inner product may fall


class GeometryError(ValueError):
    """An input violated a hyperboloid or Lorentz invariant."""


def mdot(x, y):
    """Minkowski inner product x0*y0 - x1*y1 - x2*y2 - x3*y3.

    Accepts arrays of shape (..., 4); broadcasts like a dot product
    over the last axis.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    return np.einsum("...i,...i->...", x * ETA_DIAG, y)


def project_hyperboloid(v):
    """Rescale a near-hyperboloid 4-vector so mdot(v, v) = 1 exactly.

    Used after applying an isometry to kill accumulated rounding.
    Vectors of shape (..., 4) are handled componentwise.
    """
    v = np.asarray(v, dtype=float)
    norm = mdot(v, v)
    if np.any(norm <= 0):
        raise GeometryError("vector left the timelike cone; not a point of H^3")
    return v / np.sqrt(norm)[..., np.newaxis]


@dataclass(frozen=True)
class HPoint:
    """A point of H^3 as a 4-vector on the upper unit hyperboloid."""

    vec: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.vec, dtype=float)
        if v.shape != (4,):
            raise GeometryError("HPoint needs a 4-vector, got shape %s" % (v.shape,))
        defect = abs(mdot(v, v) - 1.0)
        if defect > 1e-8:
            raise GeometryError("hyperboloid defect %.3e too large" % defect)
        if defect > POINT_TOL:
            v = project_hyperboloid(v)
        if v[0] < 1.0 - POINT_TOL:
            raise GeometryError("point lies on the lower sheet (x0 = %g)" % v[0])
        v = v.copy()
        v.flags.writeable = False
        object.__setattr__(self, "vec", v)

    @property
    def x0(self):
        return float(self.vec[0])

    def __iter__(self):
        return iter(self.vec)

    def __eq__(self, other):
        if not isinstance(other, HPoint):
            return NotImplemented
        return bool(np.array_equal(self.vec, other.vec))


def origin() -> HPoint:
    """The basepoint (1, 0, 0, 0)."""
    return HPoint(np.array([1.0, 0.0, 0.0, 0.0]))


def from_spherical(rho: float, theta: float, phi: float) -> HPoint:
    """Point at geodesic radius rho in direction (theta, phi)."""
    if rho < 0:
        raise GeometryError("rho must be nonnegative")
    s = np.sinh(rho)
    return HPoint(np.array([
        np.cosh(rho),
        s * np.sin(theta) * np.cos(phi),
        s * np.sin(theta) * np.sin(phi),
        s * np.cos(theta),
    ]))


def to_spherical(p: HPoint) -> tuple[float, float, float]:
    """Spherical chart (rho, theta, phi); (0, 0, 0) at the origin.

    phi is reduced to [0, 2pi).  theta and phi are meaningless at
    rho = 0 and are returned as 0 there.
    """
    v = p.vec
    x0 = max(v[0], 1.0)
    rho = float(np.arccosh(x0))
    s = np.sinh(rho)
    if s < 1e-15:
        return 0.0, 0.0, 0.0
    ct = np.clip(v[3] / s, -1.0, 1.0)
    theta = float(np.arccos(ct))
    phi = float(np.arctan2(v[2], v[1])) % (2.0 * np.pi)
    return rho, theta, phi


def spherical_from_vec(v):
    """Vectorized spherical chart for an (n, 4) array of hyperboloid points.

    Returns (rho, theta, phi) arrays.  Rows at the origin get angles 0.
    """
    v = np.asarray(v, dtype=float)
    x0 = np.maximum(v[..., 0], 1.0)
    rho = np.arccosh(x0)
    s = np.sinh(rho)
    safe = np.where(s < 1e-15, 1.0, s)
    ct = np.clip(v[..., 3] / safe, -1.0, 1.0)
    theta = np.where(s < 1e-15, 0.0, np.arccos(ct))
    phi = np.where(s < 1e-15, 0.0, np.arctan2(v[..., 2], v[..., 1]) % (2.0 * np.pi))
    return rho, theta, phi


def to_klein(p: HPoint) -> tuple[float, float, float]:
    """Klein (projective) chart u_i = x_i / x0, |u| < 1."""
    v = p.vec
    return float(v[1] / v[0]), float(v[2] / v[0]), float(v[3] / v[0])


def to_poincare(p: HPoint) -> tuple[float, float, float]:
    """Poincare ball chart v_i = x_i / (1 + x0), |v| < 1."""
    v = p.vec
    d = 1.0 + v[0]
    return float(v[1] / d), float(v[2] / d), float(v[3] / d)


def from_klein(u1: float, u2: float, u3: float) -> HPoint:
    """Inverse Klein chart; |u| must be < 1."""
    uu = u1 * u1 + u2 * u2 + u3 * u3
    if uu >= 1.0:
        raise GeometryError("Klein coordinates must lie in the open unit ball")
    x0 = 1.0 / np.sqrt(1.0 - uu)
    return HPoint(np.array([x0, u1 * x0, u2 * x0, u3 * x0]))


def from_poincare(v1: float, v2: float, v3: float) -> HPoint:
    """Inverse Poincare ball chart; |v| must be < 1."""
    vv = v1 * v1 + v2 * v2 + v3 * v3
    if vv >= 1.0:
        raise GeometryError("Poincare coordinates must lie in the open "
                            "unit ball")
    d = 1.0 - vv
    return HPoint(np.array([(1.0 + vv) / d,
                            2.0 * v1 / d, 2.0 * v2 / d, 2.0 * v3 / d]))


def distance(p: HPoint, q: HPoint) -> float:
    """Geodesic distance arccosh(<p, q>)."""
    d = mdot(p.vec, q.vec)
    if d < 1.0 - _DOT_SLACK:
        raise GeometryError("inner product %.6f < 1; invariant violation" % d)
    return float(np.arccosh(max(d, 1.0)))


def distance_many(p, q):
    """Vectorized distance between broadcastable (..., 4) point arrays."""
    d = np.maximum(mdot(p, q), 1.0)
    return np.arccosh(d)


def so31_orthonormalize(m):
    """Modified Gram-Schmidt of the columns in the Minkowski metric.

    The timelike column (column 0) is normalized first and the spacelike
    columns are orthogonalized against it and each other.  Input must
    already be close to SO(3,1); this only removes rounding drift.
    """
    m = np.array(m, dtype=float)
    cols = [m[:, j].copy() for j in range(4)]
    n0 = mdot(cols[0], cols[0])
    if n0 <= 0:
        raise GeometryError("column 0 is not timelike")
    cols[0] /= np.sqrt(n0)
    for j in range(1, 4):
        cols[j] -= mdot(cols[j], cols[0]) * cols[0]
        for i in range(1, j):
            # spacelike unit vectors have <s, s> = -1, so the projection
            # coefficient flips sign relative to the Euclidean case
            cols[j] += mdot(cols[j], cols[i]) * cols[i]
        nj = -mdot(cols[j], cols[j])
        if nj <= 0:
            raise GeometryError("column %d degenerated during cleanup" % j)
        cols[j] /= np.sqrt(nj)
    return np.column_stack(cols)


@dataclass(frozen=True)
class Isometry:
    """An orientation-preserving, orthochronous element of SO(3,1)."""

    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        if m.shape != (4, 4):
            raise GeometryError("Isometry needs a 4x4 matrix, got %s" % (m.shape,))
        defect = np.max(np.abs(m.T @ ETA @ m - ETA))
        if defect > WORD_TOL:
            raise GeometryError("Lorentz defect %.3e exceeds %g" % (defect, WORD_TOL))
        if defect > ISOMETRY_TOL:
            m = so31_orthonormalize(m)
        if m[0, 0] < 1.0 - ISOMETRY_TOL:
            raise GeometryError("matrix is not orthochronous (g00 = %g)" % m[0, 0])
        if np.linalg.det(m) < 0:
            raise GeometryError("matrix is orientation-reversing")
        m = m.copy()
        m.flags.writeable = False
        object.__setattr__(self, "matrix", m)

    @property
    def g00(self):
        return float(self.matrix[0, 0])

    def __eq__(self, other):
        if not isinstance(other, Isometry):
            return NotImplemented
        return bool(np.array_equal(self.matrix, other.matrix))


def identity() -> Isometry:
    return Isometry(np.eye(4))


def apply(g: Isometry, p: HPoint) -> HPoint:
    """The image g . p, re-projected onto the hyperboloid."""
    return HPoint(project_hyperboloid(g.matrix @ p.vec))


def apply_many(g: Isometry, pts):
    """Apply one isometry to an (n, 4) array of points; returns (n, 4)."""
    out = np.asarray(pts, dtype=float) @ g.matrix.T
    return project_hyperboloid(out)


def compose(g: Isometry, h: Isometry) -> Isometry:
    """The product g h (first apply h, then g), with Lorentz cleanup."""
    return Isometry(so31_orthonormalize(g.matrix @ h.matrix))


def inverse(g: Isometry) -> Isometry:
    """Group inverse eta g^T eta (exact for exact Lorentz matrices)."""
    return Isometry(ETA @ g.matrix.T @ ETA)


def displacement(g: Isometry) -> float:
    """Distance the isometry moves the origin: arccosh(g00)."""
    return float(np.arccosh(max(g.g00, 1.0)))
