"""Correctness checks on solved modes.

A mode that really is a Laplacian eigenfunction of the quotient must
pass a battery of tests that the solver itself never optimizes for:
its Monte Carlo norm over the fundamental domain is finite and
well-conditioned, distinct modes are nearly orthogonal, the cumulative
eigenvalue count follows Weyl's k^3 law, high-mode coefficients look
Gaussian (the quantum-chaos expectation for a generic compact
hyperbolic space), the mode agrees with itself across matched circle
pairs, and the lowest eigenvalue sits inside the diameter bounds.

All integrals over the fundamental domain are Monte Carlo sums over
uniform hyperbolic-volume samples; the volume element is carried by
the sampling measure, never written out.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import erf

from .basis import ModeCoefficients, evaluate_mode_many
from .geometry import apply_many
from .solver import Eigenmode
from .tiling import (circle_points, domain_volume_mc, membership_orbit,
                     out_radius_estimate, sample_domain_points)

MC_ERROR_TOL = 0.02     # relative; above this we warn and suggest n_mc
EVAL_CHUNK = 16384      # rows per basis-table block, caps memory
MIN_MODES_FOR_FIT = 10
MIN_GOE_SAMPLES = 100


class ValidationError(ValueError):
    """Check asked on inputs that cannot support it."""


# ---------------------------------------------------------------------------
# report types

@dataclass(frozen=True)
class Staircase:
    """Cumulative eigenvalue count N(<= k) with its cubic fit.

    ks are sorted eigenvalue wavenumbers, mults their multiplicities,
    counts the running total.  coeff and offset are the least-squares
    fit of counts = coeff * k^3 + offset over the upper half of the
    range; expected is the Weyl slope Vol / (6 pi^2).
    """

    ks: np.ndarray
    mults: np.ndarray
    counts: np.ndarray
    coeff: float
    offset: float
    expected: float

    def __post_init__(self):
        if np.any(np.diff(self.ks) < 0):
            raise ValidationError("staircase wavenumbers must be sorted")
        jumps = np.diff(np.concatenate([[0], self.counts]))
        if np.any(jumps != self.mults):
            raise ValidationError("count jumps disagree with multiplicities")

    def count(self, k: float) -> int:
        """N(<= k)."""
        i = int(np.searchsorted(self.ks, k, side="right"))
        return 0 if i == 0 else int(self.counts[i - 1])


@dataclass(frozen=True)
class GoeReport:
    """Normalized coefficient power against the GOE prediction."""

    label: str
    x: np.ndarray           # sorted samples |a - abar|^2 / sigma^2
    cdf: np.ndarray         # empirical CDF at x
    ks_stat: float          # sup |F_emp - I(x)|

    def __post_init__(self):
        if np.any(self.x < 0):
            raise ValidationError("power samples must be nonnegative")
        if np.any(np.diff(self.cdf) < 0) or abs(self.cdf[-1] - 1.0) > 1e-12:
            raise ValidationError("empirical CDF must rise to 1")


@dataclass(frozen=True)
class BoundsReport:
    """Diameter-based interval for the lowest nonzero eigenvalue."""

    D: float
    D_tilde: float
    lower: float
    upper: float
    observed: float
    passed: bool

    def __post_init__(self):
        if self.lower > self.upper:
            raise ValidationError("bounds interval is empty")
        if self.D_tilde < self.D:
            raise ValidationError("rounded diameter fell below the diameter")


# ---------------------------------------------------------------------------
# Monte Carlo plumbing

def _coeffs(mode) -> ModeCoefficients:
    if isinstance(mode, ModeCoefficients):
        return mode
    if isinstance(mode, Eigenmode):
        return mode.coefficients()[0]
    raise ValidationError("expected an Eigenmode or ModeCoefficients, "
                          "got %r" % type(mode).__name__)


def _values(mode, pts) -> np.ndarray:
    """Mode amplitudes at (n, 4) hyperboloid points.

    Accepts ModeCoefficients, an Eigenmode (leading vector), or any
    callable pts -> values, which lets synthetic modes built outside
    the basis expansion run through the same checks.
    """
    if callable(mode) and not isinstance(mode, (ModeCoefficients, Eigenmode)):
        return np.asarray(mode(pts), dtype=float)
    c = _coeffs(mode)
    out = np.empty(len(pts))
    for s in range(0, len(pts), EVAL_CHUNK):
        out[s:s + EVAL_CHUNK] = evaluate_mode_many(c, pts[s:s + EVAL_CHUNK])
    return out


_point_cache: dict = {}
_amp_cache: dict = {}


def _mc_points(gens, n_mc, seed):
    """Shared uniform domain sample and covolume for one (gens, n, seed).

    The draw runs on a seed derived from the caller's, so a validation
    pass with the same user seed as the scan does not reuse the
    solver's collocation points.
    """
    key = (gens.matrices().tobytes(), n_mc, seed)
    if key not in _point_cache:
        sub = int(np.random.SeedSequence([seed, 0x4E52]).generate_state(1)[0])
        r_out = out_radius_estimate(gens)
        orbit = membership_orbit(gens, r_out)
        pts = sample_domain_points(n_mc, gens, sub, r_out=r_out, orbit=orbit)
        vol, verr = domain_volume_mc(gens, max(n_mc, 10 ** 4), sub,
                                     r_out=r_out, orbit=orbit)
        _point_cache[key] = (key, pts, vol, verr)
    return _point_cache[key]


def _mc_values(mode, tag, pts) -> np.ndarray:
    """Amplitudes at the shared sample, cached per coefficient ray."""
    if callable(mode) and not isinstance(mode, (ModeCoefficients, Eigenmode)):
        return _values(mode, pts)
    c = _coeffs(mode)
    nrm = float(np.linalg.norm(c.a))
    if nrm == 0.0:
        raise ValidationError("coefficient vector is zero")
    key = (tag, c.k, c.L, (c.a / nrm).tobytes())
    if key not in _amp_cache:
        _amp_cache[key] = _values(ModeCoefficients(c.k, c.L, c.a / nrm), pts)
    return nrm * _amp_cache[key]


# ---------------------------------------------------------------------------
# checks

def normalize_mode(mode, gens, n_mc: int = 100000, seed: int = 0):
    """Rescale so the Monte Carlo estimate of the domain integral of
    Psi^2 equals one.

    Returns new ModeCoefficients; the input is unchanged.  Warns with a
    suggested n_mc when the combined sampling and covolume error
    exceeds 2%: the rescale is still applied, the caller decides
    whether the precision is enough.
    """
    c = _coeffs(mode)
    tag, pts, vol, verr = _mc_points(gens, n_mc, seed)
    sq = _mc_values(c, tag, pts) ** 2
    mean = float(sq.mean())
    if mean <= 0.0:
        raise ValidationError("mode vanishes on the whole sample")
    sem = float(sq.std()) / math.sqrt(n_mc)
    rel = math.hypot(sem / mean, verr / vol)
    if rel > MC_ERROR_TOL:
        need = int(math.ceil(n_mc * (rel / MC_ERROR_TOL) ** 2))
        warnings.warn("normalization MC error %.1f%% exceeds %.0f%%; "
                      "suggest n_mc >= %d" % (100 * rel, 100 * MC_ERROR_TOL,
                                              need))
    return ModeCoefficients(c.k, c.L, c.a / math.sqrt(mean * vol))


def overlap(a, b, gens, n_mc: int = 100000, seed: int = 0) -> float:
    """Monte Carlo estimate of the domain integral of Psi_a Psi_b.

    Both inputs should already be normalized; self-overlap of a
    normalized mode then comes out 1 up to MC error.  Amplitudes are
    cached per mode across calls with the same gens, n_mc and seed, so
    all-pairs overlap tables cost one evaluation per mode.
    """
    tag, pts, vol, _ = _mc_points(gens, n_mc, seed)
    va = _mc_values(a, tag, pts)
    vb = _mc_values(b, tag, pts)
    return vol * float((va * vb).mean())


def weyl_staircase(modes, vol: float) -> Staircase:
    """Fit the cumulative count to coeff * k^3 + offset.

    modes is a gapless eigenvalue list up to its largest wavenumber
    (completeness is the caller's assertion; a missed mode biases the
    fit low).  Entries are Eigenmodes or plain (k, multiplicity)
    pairs.  Only the upper half [k_top/2, k_top] enters the fit: the
    staircase is all steps at low k and the asymptotic slope is a
    high-k statement.
    """
    pairs = []
    for m in modes:
        k = getattr(m, "k", None)
        if k is None:
            k, mult = m
        else:
            mult = getattr(m, "multiplicity", 1)
        pairs.append((float(k), int(mult)))
    pairs.sort()
    ks = np.array([p[0] for p in pairs])
    mults = np.array([p[1] for p in pairs])
    if int(mults.sum()) < MIN_MODES_FOR_FIT:
        raise ValidationError("need at least %d modes to fit the staircase, "
                              "have %d" % (MIN_MODES_FOR_FIT, mults.sum()))
    counts = np.cumsum(mults)
    sel = ks >= 0.5 * ks[-1]
    if int(sel.sum()) < 2:
        raise ValidationError("fit window [k_top/2, k_top] holds fewer "
                              "than two eigenvalues")
    design = np.column_stack([ks[sel] ** 3, np.ones(int(sel.sum()))])
    (coeff, offset), *_ = np.linalg.lstsq(design, counts[sel], rcond=None)
    return Staircase(ks, mults, counts, float(coeff), float(offset),
                     expected=vol / (6.0 * math.pi ** 2))


def goe_cdf(x):
    """I(x) = erf(sqrt(x/2)), the cumulative GOE power distribution."""
    return erf(np.sqrt(np.asarray(x, dtype=float) / 2.0))


def goe_test(mode, label: str | None = None) -> GoeReport:
    """Kolmogorov-Smirnov distance of normalized coefficient power
    from the GOE prediction.

    The samples are x_i = |a_i - abar|^2 / sigma^2 with abar and
    sigma^2 the mean and population variance of the coefficient
    vector; for Gaussian coefficients x follows P(x) =
    exp(-x/2)/sqrt(2 pi x).  Accepts an Eigenmode (leading vector),
    ModeCoefficients, or a bare sample array.
    """
    if isinstance(mode, Eigenmode):
        a = mode.vectors[0]
        label = label or "%s q2=%.1f" % (mode.manifold, mode.q2)
    elif isinstance(mode, ModeCoefficients):
        a = mode.a
        label = label or "k=%.4f" % mode.k
    else:
        a = np.asarray(mode, dtype=float)
        label = label or "samples"
    if a.ndim != 1 or len(a) < MIN_GOE_SAMPLES:
        raise ValidationError("need a flat vector of at least %d "
                              "coefficients" % MIN_GOE_SAMPLES)
    sigma2 = float(np.var(a))
    if sigma2 == 0.0:
        raise ValidationError("coefficient variance is zero; "
                              "power samples are undefined")
    x = np.sort(np.abs(a - a.mean()) ** 2 / sigma2)
    n = len(x)
    hi = np.arange(1, n + 1) / n
    model = goe_cdf(x)
    ks = float(max(np.max(hi - model), np.max(model - (hi - 1.0 / n))))
    return GoeReport(label, x, hi, ks)


def circles_test(mode, g, rho: float, n_samples: int = 256):
    """RMS mismatch of the mode across the matched circle pair of g.

    Samples n_samples points around the circle C on the rho-sphere and
    at their g-images on the partner circle; a true eigenmode of the
    quotient takes equal values at both.  Returns (rms_mismatch,
    rms_mode), the second being the RMS of the mode on C so the caller
    can form a relative error.  Raises when the sphere does not
    self-intersect under g.
    """
    pts = circle_points(g, rho, n_samples)
    partner = apply_many(g, pts)
    va = _values(mode, pts)
    vb = _values(mode, partner)
    rms_mismatch = float(np.sqrt(np.mean((vb - va) ** 2)))
    rms_mode = float(np.sqrt(np.mean(va ** 2)))
    return rms_mismatch, rms_mode


def eigenvalue_bounds(D: float):
    """Diameter bounds on the lowest nonzero eigenvalue q1^2.

    lower = 4 Dt / (D^2 (sinh Dt + Dt)^2) with Dt = sqrt(ceil(D^2)),
    upper = 1 + (2 pi / D)^2.
    """
    if D <= 0:
        raise ValidationError("diameter must be positive")
    dt = math.sqrt(math.ceil(D * D))
    lower = 4.0 * dt / (D * D * (math.sinh(dt) + dt) ** 2)
    upper = 1.0 + (2.0 * math.pi / D) ** 2
    return lower, upper


def check_bounds(D: float, q2_observed: float) -> BoundsReport:
    """BoundsReport for an observed lowest eigenvalue."""
    lower, upper = eigenvalue_bounds(D)
    dt = math.sqrt(math.ceil(D * D))
    return BoundsReport(D, dt, lower, upper, q2_observed,
                        bool(lower <= q2_observed <= upper))


def wavelength_ratio(mode, D: float) -> float:
    """Wavelength of the mode over the diameter, (2 pi / k) / D."""
    if D <= 0:
        raise ValidationError("diameter must be positive")
    k = float(getattr(mode, "k", mode))
    return 2.0 * math.pi / (k * D)
