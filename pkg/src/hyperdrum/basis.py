"""Eigenmodes of the covering space H^3.

The Laplacian eigenfunctions on hyperbolic 3-space factor into radial
and angular parts,

    Q_klm(rho, theta, phi) = X_k^l(rho) * Y_lm(theta, phi),

with eigenvalue q^2 = k^2 + 1.  The radial factors are the
hyperspherical Bessel functions

    X_k^l(rho) = (-1)^(l+1) sinh^l(rho)
                 / sqrt(prod_{n=0..l} (n^2 + k^2))
                 * d^(l+1) cos(k rho) / d cosh(rho)^(l+1),

which reduce to X^0 = sin(k rho)/sinh(rho) and oscillate at large rho
with amplitude 1/sinh(rho).  Successive l obey the three-term relation

    b_l X^(l-1) + b_(l+1) X^(l+1) = (2l+1) coth(rho) X^l,
    b_l = sqrt(k^2 + l^2).

Upward recursion in l is unstable below the classical turning point
sinh(rho_0) ~ (l + 1/2)/k, where X^l is exponentially small and the
recursion's dominant solution swamps it.  We therefore recurse upward
only when every l <= L is oscillatory (k sinh rho > L + 2), and
otherwise evaluate the ratio X^(L+1)/X^L by a continued fraction
(modified Lentz; Pincherle's theorem ties the converged fraction to the
minimal solution, which is X), recurse downward, and rescale against
the l = 0, 1 closed forms.

The angular factors are real orthonormal spherical harmonics built from
a fully normalized associated-Legendre recursion.  Coefficient vectors
are indexed by i = l^2 + l + m (0-based; equivalently the 1-based
scheme i = l^2 + l + 1 + m), giving (L+1)^2 entries through multipole L.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import HPoint, spherical_from_vec

L_MAX = 64              # tested upper bound for the radial recursion
_LENTZ_TINY = 1e-30
_LENTZ_TOL = 5e-16
_LENTZ_MAXITER = 100000
_RESCALE_LIMIT = 1e250  # downward-recursion overflow guard


class BasisError(ValueError):
    """Invalid basis-function request."""


def _radial_closed_01(k, rho, sh, coth):
    """Closed forms of X^0 and X^1 (seed and normalization anchors)."""
    skr = np.sin(k * rho)
    ckr = np.cos(k * rho)
    x0 = skr / sh
    x1 = (coth * skr - k * ckr) / (np.sqrt(k * k + 1.0) * sh)
    return x0, x1


def _lentz_ratio(k, L, coth):
    """Continued fraction for the ratio X^(L+1)/X^L at each point.

    Expansion of the three-term recursion from below:

        r_L = b_(L+1) / ((2L+3) coth - b_(L+2)^2 / ((2L+5) coth - ...))

    evaluated by the modified Lentz algorithm, vectorized over points.
    """
    n = coth.shape[0]
    f = np.full(n, _LENTZ_TINY)
    c = f.copy()
    d = np.zeros(n)
    j = 0
    while True:
        j += 1
        lj = L + j
        aj = k * k + lj * lj if j == 1 else -(k * k + lj * lj)
        if j == 1:
            aj = np.sqrt(aj)
        bj = (2.0 * lj + 1.0) * coth
        d = bj + aj * d
        d[d == 0.0] = _LENTZ_TINY
        c = bj + aj / c
        c[c == 0.0] = _LENTZ_TINY
        d = 1.0 / d
        delta = c * d
        f = f * delta
        if np.all(np.abs(delta - 1.0) < _LENTZ_TOL):
            return f
        if j > _LENTZ_MAXITER:
            raise BasisError("continued fraction failed to converge "
                             "(k=%g, L=%d)" % (k, L))


def radial_table(k: float, L: int, rho) -> np.ndarray:
    """X^l_k(rho) for l = 0..L at each point; shape (len(rho), L+1).

    rho must be positive.  Points are split between the upward and
    downward (continued-fraction) branches by the turning-point
    criterion; see the module docstring.
    """
    if L < 0 or L > L_MAX:
        raise BasisError("multipole L=%d outside [0, %d]" % (L, L_MAX))
    if k <= 0:
        raise BasisError("wavenumber must be positive")
    rho = np.atleast_1d(np.asarray(rho, dtype=float))
    if np.any(rho <= 0):
        raise BasisError("rho must be positive")
    npts = rho.shape[0]
    sh = np.sinh(rho)
    coth = np.cosh(rho) / sh
    x0, x1 = _radial_closed_01(k, rho, sh, coth)

    out = np.empty((npts, L + 1))
    out[:, 0] = x0
    if L == 0:
        return out
    out[:, 1] = x1
    if L == 1:
        return out

    beta = np.sqrt(k * k + np.arange(L + 2, dtype=float) ** 2)

    up = k * sh > L + 2.0
    if np.any(up):
        xa = x0[up]
        xb = x1[up]
        cu = coth[up]
        for l in range(1, L):
            xa, xb = xb, ((2.0 * l + 1.0) * cu * xb - beta[l] * xa) / beta[l + 1]
            out[up, l + 1] = xb

    dn = ~up
    if np.any(dn):
        cd = coth[dn]
        ratio = _lentz_ratio(k, L, cd)
        ndn = cd.shape[0]
        cols = np.empty((ndn, L + 1))
        xh = ratio            # plays X^(L+1) for X^L = 1
        xl = np.ones(ndn)
        cols[:, L] = xl
        # retroactive rescales keep intermediates inside float range;
        # true values this small flush to zero, which is their nearest
        # representable
        for l in range(L, 0, -1):
            xl, xh = ((2.0 * l + 1.0) * cd * xl - beta[l + 1] * xh) / beta[l], xl
            big = np.abs(xl) > _RESCALE_LIMIT
            if np.any(big):
                xl[big] *= 1.0 / _RESCALE_LIMIT
                xh[big] *= 1.0 / _RESCALE_LIMIT
                cols[big, l:] *= 1.0 / _RESCALE_LIMIT
            cols[:, l - 1] = xl
        x0d = x0[dn]
        x1d = x1[dn]
        use0 = np.abs(x0d) >= np.abs(x1d)
        scale = np.where(use0,
                         x0d / np.where(cols[:, 0] == 0.0, 1.0, cols[:, 0]),
                         x1d / np.where(cols[:, 1] == 0.0, 1.0, cols[:, 1]))
        out[dn, :] = cols * scale[:, np.newaxis]
    return out


def hyper_bessel(l: int, k: float, rho: float) -> float:
    """Single value X^l_k(rho); l <= 64, k > 0, rho > 0."""
    if l < 0 or l > L_MAX:
        raise BasisError("l=%d outside [0, %d]" % (l, L_MAX))
    return float(radial_table(k, l, np.array([rho]))[0, l])


def envelope_radius(l: int, k: float, threshold: float) -> float:
    """Smallest rho with X^l_k(rho) sinh(rho) = threshold.

    The product rises from 0 through the threshold on the way to its
    first oscillation crest, so a forward march with steps shorter than
    a quarter period brackets the first crossing, which is then polished
    by bisection (scipy brentq).
    """
    from scipy.optimize import brentq

    if not 0.0 < threshold < 1.0:
        raise BasisError("threshold must lie in (0, 1)")

    def f(r):
        return float(radial_table(k, l, np.array([r]))[0, l]) * np.sinh(r) - threshold

    step = min(0.05, 0.7 / k)
    lo = 1e-4
    flo = f(lo)
    if flo >= 0.0:
        # already past threshold at the march origin (tiny l, huge k)
        lo, flo = 1e-9, f(1e-9)
    r = lo
    while r < 50.0:
        rn = r + step
        fn = f(rn)
        if flo < 0.0 <= fn:
            return float(brentq(f, r, rn, xtol=1e-12, rtol=8.9e-16))
        r, flo = rn, fn
    raise BasisError("no envelope crossing below rho = 50 "
                     "(l=%d, k=%g, threshold=%g)" % (l, k, threshold))


def harmonic_table(L: int, theta, phi) -> np.ndarray:
    """Real orthonormal spherical harmonics; shape (npts, (L+1)^2).

    Column i = l^2 + l + m holds Y_lm.  Conventions: Y_l0 = S_l0,
    Y_lm = sqrt(2) S_lm cos(m phi), Y_l(-m) = sqrt(2) S_lm sin(m phi)
    for m > 0, with S_lm the orthonormalized associated Legendre
    functions (Condon-Shortley phase included).
    """
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    phi = np.atleast_1d(np.asarray(phi, dtype=float))
    npts = theta.shape[0]
    ct = np.cos(theta)
    st = np.sin(theta)

    s = np.empty((L + 1, L + 1, npts))   # s[l, m] = S_lm(theta)
    s[0, 0] = 1.0 / np.sqrt(4.0 * np.pi)
    for m in range(1, L + 1):
        s[m, m] = -np.sqrt((2.0 * m + 1.0) / (2.0 * m)) * st * s[m - 1, m - 1]
    for m in range(0, L):
        s[m + 1, m] = np.sqrt(2.0 * m + 3.0) * ct * s[m, m]
    for m in range(0, L - 1):
        alm_prev = np.sqrt((4.0 * (m + 1.0) ** 2 - 1.0) / ((m + 1.0) ** 2 - m * m))
        for l in range(m + 2, L + 1):
            alm = np.sqrt((4.0 * l * l - 1.0) / (l * l - m * m))
            s[l, m] = alm * (ct * s[l - 1, m] - s[l - 2, m] / alm_prev)
            alm_prev = alm

    marr = np.arange(1, L + 1)
    cosm = np.cos(marr[:, np.newaxis] * phi[np.newaxis, :])
    sinm = np.sin(marr[:, np.newaxis] * phi[np.newaxis, :])

    out = np.empty((npts, (L + 1) ** 2))
    sqrt2 = np.sqrt(2.0)
    for l in range(L + 1):
        base = l * l + l
        out[:, base] = s[l, 0]
        for m in range(1, l + 1):
            out[:, base + m] = sqrt2 * s[l, m] * cosm[m - 1]
            out[:, base - m] = sqrt2 * s[l, m] * sinm[m - 1]
    return out


def real_harmonics(L: int, theta: float, phi: float) -> np.ndarray:
    """Harmonic vector of length (L+1)^2 at a single direction."""
    return harmonic_table(L, np.array([theta]), np.array([phi]))[0]


def coeff_index(l: int, m: int) -> int:
    """Flat index of (l, m) in a coefficient vector (0-based)."""
    if abs(m) > l:
        raise BasisError("|m| must not exceed l")
    return l * l + l + m


def lm_of_index(i: int) -> tuple[int, int]:
    """Inverse of coeff_index."""
    l = int(np.sqrt(i))
    return l, i - l * l - l


def _ell_of_columns(L):
    """Map basis-column index -> l, as an integer array of length (L+1)^2."""
    return np.repeat(np.arange(L + 1), 2 * np.arange(L + 1) + 1)


def q_table(k: float, L: int, pts) -> np.ndarray:
    """Q_klm at each hyperboloid point; shape (npts, (L+1)^2).

    pts is an (npts, 4) array of hyperboloid vectors.  Points at the
    origin are special-cased: only the l = 0 channel survives there,
    with the limit X^0_k(0) = k.
    """
    pts = np.asarray(pts, dtype=float)
    rho, theta, phi = spherical_from_vec(pts)
    at_origin = rho < 1e-12
    rho_safe = np.where(at_origin, 1.0, rho)
    xs = radial_table(k, L, rho_safe)
    ys = harmonic_table(L, theta, phi)
    out = ys * xs[:, _ell_of_columns(L)]
    if np.any(at_origin):
        out[at_origin, :] = 0.0
        out[at_origin, 0] = k / np.sqrt(4.0 * np.pi)
    return out


def evaluate_Q(k: float, L: int, p: HPoint) -> np.ndarray:
    """Basis vector Q_klm(p) of length (L+1)^2."""
    return q_table(k, L, p.vec[np.newaxis, :])[0]


@dataclass(frozen=True)
class ModeCoefficients:
    """Expansion coefficients a_klm of a candidate mode at wavenumber k."""

    k: float
    L: int
    a: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.a, dtype=float)
        n = (self.L + 1) ** 2
        if a.shape != (n,):
            raise BasisError("coefficient vector must have length (L+1)^2 = %d" % n)
        a = a.copy()
        a.flags.writeable = False
        object.__setattr__(self, "a", a)


def evaluate_mode_many(c: ModeCoefficients, pts) -> np.ndarray:
    """Mode amplitude sum_lm a_lm Q_klm at each of the (n, 4) points."""
    return q_table(c.k, c.L, pts) @ c.a


def evaluate_mode(c: ModeCoefficients, p: HPoint) -> float:
    """Mode amplitude at a single point."""
    return float(evaluate_mode_many(c, p.vec[np.newaxis, :])[0])
