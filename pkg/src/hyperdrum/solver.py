"""Eigenvalue scan for the Laplacian on a compact hyperbolic quotient.

A mode of the quotient lifts to an eigenfunction of H^3 that takes the
same value at every deck-group image of a point.  Expanding the lift in
the radial-harmonic basis through multipole L and demanding equality on
image pairs of a handful of random interior points yields a homogeneous
linear system A a = 0 whose rows are basis-vector differences.  Away
from an eigenvalue the system has no nullspace; chi^2(k), the squared
smallest singular value of the column-scaled system (see
scaled_smallest), dips sharply as k sweeps through an eigen-wavenumber.
Minima are located on a grid, refined by golden-section search, and
their multiplicity is read off the singular-value gap.

Parameter heuristics (L, the image shell [rho_min, rho_max], and the
oversampling factor c) follow simple rules of thumb in k; they keep the
highest multipole significant at the shell edge and the system safely
overdetermined.  All randomness (sample points, equation subsampling)
is seeded, so a scan is reproducible bit for bit in serial mode.
"""

from __future__ import annotations

import hashlib
import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .basis import (L_MAX, ModeCoefficients, envelope_radius, q_table,
                    radial_table)
from .geometry import HPoint
from .tiling import (ElementBall, GeneratorSet, domain_volume_mc,
                     enumerate_elements, images_from_ball,
                     sample_domain_points)

ENVELOPE_THRESHOLD = 0.25   # X^L_k(rho) sinh(rho) level defining the shell
TRUNCATION_AMPLITUDE = 0.04  # envelope level the first dropped multipole
                             # may reach at the shell edge
MIN_IMAGES = 10             # expected images per point at rho_max, at least
PAIR_MARGIN = 1.1           # expected pairs must beat c*N by this factor
VALUE_FACTOR = 1.15         # independent point values per coefficient, min
DROP_AMPLITUDE = 0.055      # edge envelope allowed for the first dropped
                            # multipole when the value-rank cap binds
SHELL_CHASE = 16            # how far past the L rule the shell index may grow
COLUMN_FLOOR = 1e-12        # columns below this fraction of the largest drop
MULTIPLICITY_TAU = 0.1      # sigma_i < tau * sigma_(n_keep) counts as null
PROMINENCE = 0.1            # dip threshold relative to the median chi^2
BLEND_SPACING = 3.0         # minima closer than this (in dk) are blended
REFINE_XTOL = 1e-4
REFINE_BOOST = 2            # point-count multiplier for refinement systems
REFINE_SCALE = 0.4          # truncation-threshold tightening for refinement
REFINE_MIN_L = 32           # smallest multipole cutoff worth refining at
BRACKET_SLIDE = 3           # max cells a bracket may walk downhill


class SolverError(RuntimeError):
    """Scan or refinement failure."""


def default_L_rule(k: float) -> int:
    return 10 + int(k)


def default_c_rule(k: float) -> int:
    return 10 + int(100.0 / k)


@dataclass(frozen=True)
class ScanConfig:
    """Scan window and parameter heuristics.

    d is the number of random interior sample points; L_rule and c_rule
    map k to the multipole cutoff and the oversampling factor; n_keep
    singular pairs are retained per grid point (multiplicities up to
    n_keep - 1 are resolvable).
    """

    k_lo: float
    k_hi: float
    dk: float = 0.01
    d: int = 20
    l_min: int = 5
    n_keep: int = 5
    seed: int = 0
    L_rule: Callable[[float], int] = field(default=default_L_rule)
    c_rule: Callable[[float], int] = field(default=default_c_rule)

    def __post_init__(self):
        # modes below k = 1/4 are unreliable in this expansion; refuse
        if self.k_lo < 0.25:
            raise SolverError("k_lo must be >= 0.25")
        if self.k_hi < self.k_lo:
            raise SolverError("k_hi must be >= k_lo")
        if self.dk <= 0:
            raise SolverError("dk must be positive")
        if self.d < 1 or self.n_keep < 1:
            raise SolverError("d and n_keep must be positive")

    def grid(self) -> np.ndarray:
        n = int(math.floor((self.k_hi - self.k_lo) / self.dk + 1e-9)) + 1
        return self.k_lo + self.dk * np.arange(n)

    def digest(self) -> str:
        payload = (self.k_lo, self.k_hi, self.dk, self.d, self.l_min,
                   self.n_keep, self.seed,
                   getattr(self.L_rule, "__name__", repr(self.L_rule)),
                   getattr(self.c_rule, "__name__", repr(self.c_rule)))
        return hashlib.sha256(repr(payload).encode()).hexdigest()[:12]


@dataclass(frozen=True)
class Params:
    """Per-k assembly parameters."""

    L: int
    l_min: int
    rho_min: float
    rho_max: float
    c: int


def _shell_volume(rho):
    return math.pi * (math.sinh(2.0 * rho) - 2.0 * rho)


def _edge_ladder(k: float, j: int, rho_max: float) -> np.ndarray:
    """Envelope |X^l_k sinh(rho)| at the shell edge for l = 0 .. j+12.

    The envelope falls steadily with l beyond the local bandwidth
    k sinh(rho); truncating at the shell index j itself (envelope 0.25
    at the edge by construction) leaves a truncation residual the size
    of the off-eigenvalue floor, which caps the chi^2 contrast near 2.
    A few more multipoles push the residual well under the floor.
    """
    top = min(j + 12, L_MAX)
    return np.abs(radial_table(k, top, np.array([rho_max]))[0]) \
        * math.sinh(rho_max)


def _truncation_index(k: float, j: int, rho_max: float) -> int:
    """Smallest multipole cutoff whose first dropped multipole is at or
    below TRUNCATION_AMPLITUDE at the shell edge."""
    ladder = _edge_ladder(k, j, rho_max)
    below = np.flatnonzero(ladder[j:] <= TRUNCATION_AMPLITUDE)
    return int(j + below[0] - 1) if len(below) else len(ladder) - 1


def choose_params(k: float, cfg: ScanConfig, volume: float | None = None,
                  scale: float = 1.0, min_L: int = 0,
                  chase_drop: float | None = None) -> Params:
    """Multipole cutoff, image shell, and oversampling factor at k.

    The shell edges are the first radii where X^l_k(rho) sinh(rho)
    reaches the envelope threshold (the rule-of-thumb index outer,
    l_min inner); without a volume the heuristics are returned as-is.

    Given the quotient volume, the shell index is raised (pushing the
    envelope crossing outward) until the shell is expected to hold
    MIN_IMAGES images of each point, enough pairs to cover the
    oversampling target c * N, and enough distinct image values to pin
    the coefficients down: the pair rows of one point only carry rank
    n_j, so N must stay below d * n_bar by VALUE_FACTOR or the
    nullspace read is vacuous.  The cutoff L runs from the shell index
    toward the truncation target under that cap.

    A scan stops at the first workable shell: its higher floors make
    dips stand out and keep the grid cheap.  Refinement passes the
    deep-chase knobs instead: scale tightens the truncation ladder,
    min_L keeps the chase going until the cutoff reaches that size,
    and chase_drop demands the first dropped multipole be small at the
    edge.  At wavenumbers too high for the configured point count no
    shell meets the demands; the best one within the chase is used,
    the margin erodes and dips flatten.  Raising d restores them.
    """
    L0 = cfg.L_rule(k)
    c = cfg.c_rule(k)
    rho_min = envelope_radius(cfg.l_min, k, ENVELOPE_THRESHOLD)
    if volume is None:
        rho_max = envelope_radius(L0, k, ENVELOPE_THRESHOLD)
        if rho_min >= rho_max:
            raise SolverError("empty image shell at k=%.4f" % k)
        return Params(L0, cfg.l_min, rho_min, rho_max, c)
    best = None
    for j in range(L0, L0 + SHELL_CHASE + 1):
        rho_max = envelope_radius(j, k, ENVELOPE_THRESHOLD)
        n_bar = (_shell_volume(rho_max) - _shell_volume(rho_min)) / volume
        ladder = _edge_ladder(k, j, rho_max)
        below = np.flatnonzero(ladder[j:] <= scale * TRUNCATION_AMPLITUDE)
        L_full = int(j + below[0] - 1) if len(below) else len(ladder) - 1
        L_rank = int(math.sqrt(max(cfg.d * n_bar, 1.0) / VALUE_FACTOR)) - 1
        L = min(L_full, L_rank)
        pairs = cfg.d * n_bar * (n_bar + 1.0) / 2.0
        if n_bar < MIN_IMAGES or L < cfg.l_min + 2 or \
                pairs < PAIR_MARGIN * c * (L + 1) ** 2:
            continue
        dropped = ladder[L + 1] if L + 1 < len(ladder) else 0.0
        key = (L < min_L, dropped)
        if best is None or key < best[0]:
            best = (key, L, rho_max)
        if (chase_drop is None or dropped <= chase_drop) and L >= min_L:
            break
    if best is None:
        raise SolverError("too few image values at k=%.4f to constrain "
                          "any usable multipole range; raise d" % k)
    _, L, rho_max = best
    if rho_min >= rho_max:
        raise SolverError("empty image shell at k=%.4f" % k)
    return Params(L, cfg.l_min, rho_min, rho_max, c)


# ----------------------------------------------------------------------
# system assembly
# ----------------------------------------------------------------------

def _pair_unrank(t):
    """Unordered pair (a, b), a < b, from its rank t in the sequence
    (0,1), (0,2), (1,2), (0,3), ..."""
    t = np.asarray(t, dtype=np.int64)
    b = np.floor((1.0 + np.sqrt(1.0 + 8.0 * t)) / 2.0).astype(np.int64)
    # polish the float estimate at triangular-number boundaries
    b = np.where(b * (b - 1) // 2 > t, b - 1, b)
    b = np.where((b + 1) * b // 2 <= t, b + 1, b)
    a = t - b * (b - 1) // 2
    return a, b


class PairGeometry:
    """Frozen geometry of one assembled system.

    Holds every sample point with its images in the shell plus the
    selected equation pairs; only the wavenumber is left free, so the
    same rows can be re-evaluated at nearby k during refinement.
    """

    def __init__(self, points, ball: ElementBall, params: Params, seed):
        points = np.atleast_2d(np.asarray(points, dtype=float))
        positions = []
        self.words = []
        offsets = []
        counts = []
        total = 0
        for pt in points:
            ims = images_from_ball(HPoint(pt), ball,
                                   params.rho_min, params.rho_max)
            if len(ims) == 0:
                self.words.append(())
                continue
            offsets.append(total)
            counts.append(len(ims) + 1)
            total += len(ims) + 1
            positions.append(np.vstack([pt, ims.points]))
            self.words.append(ims.words)
        if not positions:
            raise SolverError("no images in the shell for any sample point")
        self.positions = np.concatenate(positions)
        self.params = params

        npairs = np.array([n * (n - 1) // 2 for n in counts], dtype=np.int64)
        bounds = np.concatenate([[0], np.cumsum(npairs)])
        total_pairs = int(bounds[-1])
        cap = params.c * self.N
        if total_pairs > cap:
            rng = np.random.default_rng(seed)
            sel = np.sort(rng.choice(total_pairs, size=cap, replace=False))
        else:
            sel = np.arange(total_pairs)
        # map flat pair ranks to (point, copy, copy); copy 0 is the base
        which = np.searchsorted(bounds, sel, side="right") - 1
        a, b = _pair_unrank(sel - bounds[which])
        off = np.asarray(offsets, dtype=np.int64)
        self.row_point = np.flatnonzero([len(w) > 0 for w in self.words]
                                        )[which].astype(np.int32)
        self.copy_a = a.astype(np.int32)
        self.copy_b = b.astype(np.int32)
        self._ga = off[which] + a
        self._gb = off[which] + b

    @property
    def N(self) -> int:
        return (self.params.L + 1) ** 2

    @property
    def M(self) -> int:
        return len(self._ga)

    def matrix(self, k: float) -> np.ndarray:
        Q = q_table(k, self.params.L, self.positions)
        return Q[self._ga] - Q[self._gb]


@dataclass(frozen=True)
class SystemMatrix:
    """Dense difference system at one wavenumber, with row provenance:
    row r equates copies copy_a[r] and copy_b[r] of point point[r]
    (copy 0 is the base point, copy i >= 1 the image words[point][i-1]).
    """

    A: np.ndarray
    point: np.ndarray
    copy_a: np.ndarray
    copy_b: np.ndarray
    words: tuple

    @property
    def M(self) -> int:
        return self.A.shape[0]

    @property
    def N(self) -> int:
        return self.A.shape[1]

    def words_for_row(self, r: int):
        """(word_a, word_b) of row r; () is the identity word."""
        j = self.point[r]

        def w(copy):
            return () if copy == 0 else self.words[j][copy - 1]

        return w(self.copy_a[r]), w(self.copy_b[r])


def assemble_system(points, gens: GeneratorSet, k: float, params: Params,
                    seed=0, ball: ElementBall | None = None) -> SystemMatrix:
    """Difference system at k: one row per selected image pair.

    Points with no images in the shell contribute no rows; if every
    point is empty the system is undefined and an error is raised.
    The pair selection is capped at c * N rows, drawn uniformly with
    the given seed.
    """
    if ball is None:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        rmax = float(np.arccosh(np.maximum(pts[:, 0], 1.0)).max())
        ball = enumerate_elements(gens, params.rho_max + rmax + 1e-6)
    geo = PairGeometry(points, ball, params, seed)
    return SystemMatrix(geo.matrix(k), geo.row_point, geo.copy_a,
                        geo.copy_b, tuple(geo.words))


def svd_smallest(A, n_keep: int):
    """The n_keep smallest singular values and right singular vectors.

    Returns (sigma, vectors) with sigma ascending and vectors (n_keep,
    N) orthonormal; chi^2 of a unit-norm candidate a is |A a|^2, so the
    best attainable residual is sigma[0]**2.
    """
    if isinstance(A, SystemMatrix):
        A = A.A
    A = np.asarray(A, dtype=float)
    if A.shape[0] < A.shape[1]:
        raise SolverError("system is underdetermined: M=%d < N=%d"
                          % A.shape)
    try:
        _, s, vt = np.linalg.svd(A, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise SolverError("SVD did not converge: %s" % exc) from exc
    n_keep = min(n_keep, len(s))
    return s[-n_keep:][::-1].copy(), vt[-n_keep:][::-1].copy()


def scaled_smallest(A, n_keep: int):
    """svd_smallest of the column-scaled system, mapped back to
    coefficient space.

    Columns of the raw difference matrix span orders of magnitude: a
    multipole evanescent over most of the shell contributes rows a
    thousandth the size of an oscillatory one, and the raw residual
    |A a|^2 is then dominated by the strong columns no matter how badly
    the weak ones fit.  Scaling every column to unit norm weighs each
    retained multipole equally (the inner shell cut-off exists for the
    same reason, but only helps the lowest few), which is what lets a
    genuine nullspace separate from the floor by orders of magnitude
    instead of a factor of two.  Columns with no support in the shell
    at all (norm below COLUMN_FLOOR of the largest) are excluded and
    their coefficients pinned to zero.

    The small end of the spectrum comes from the Gram matrix of the
    scaled system when that is substantially cheaper than a full SVD;
    squaring costs accuracy below sigma^2 of about 1e-10, far under
    any dip this assembly can produce.

    Returns (sigma, vectors): sigma ascending, from the scaled system;
    vectors (n_keep, N) orthonormal coefficient vectors whose span maps
    the scaled near-nullspace back through the scaling.
    """
    if isinstance(A, SystemMatrix):
        A = A.A
    A = np.asarray(A, dtype=float)
    nrm = np.linalg.norm(A, axis=0)
    keep = nrm > nrm.max() * COLUMN_FLOOR
    B = A[:, keep] / nrm[keep]
    if B.shape[0] > 3 * B.shape[1] >= 3:
        if B.shape[0] < B.shape[1]:
            raise SolverError("system is underdetermined: M=%d < N=%d"
                              % B.shape)
        w, v = np.linalg.eigh(B.T @ B)
        n = min(n_keep, len(w))
        s, vt = np.sqrt(np.maximum(w[:n], 0.0)), v[:, :n].T
    else:
        s, vt = svd_smallest(B, n_keep)
    vecs = np.zeros((len(vt), A.shape[1]))
    vecs[:, keep] = vt / nrm[keep]
    # Gram-Schmidt: the scaled vectors are orthonormal, their images
    # under the inverse scaling are not.  The leading direction is kept.
    q, r = np.linalg.qr(vecs.T)
    q = q * np.sign(np.diag(r))
    return s, np.ascontiguousarray(q.T)


# ----------------------------------------------------------------------
# scan
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class ScanResult:
    """chi^2 grid of a scan: per k, the n_keep smallest singular values
    and the assembly parameters in force."""

    manifold: str
    config: ScanConfig
    ks: np.ndarray
    sigma: np.ndarray       # (n_grid, n_keep), ascending per row
    L: np.ndarray
    M: np.ndarray
    N: np.ndarray
    rho_min: np.ndarray
    rho_max: np.ndarray

    @property
    def chi2(self) -> np.ndarray:
        return self.sigma ** 2

    @property
    def best(self) -> np.ndarray:
        return self.sigma[:, 0] ** 2


_POOL_STATE: dict = {}


def _pool_init(points, ball, n_keep, seed):
    _POOL_STATE["points"] = points
    _POOL_STATE["ball"] = ball
    _POOL_STATE["n_keep"] = n_keep
    _POOL_STATE["seed"] = seed


def _pool_task(args):
    i, k, params = args
    st = _POOL_STATE
    return _grid_point(st["points"], st["ball"], k, params, st["seed"], i,
                       st["n_keep"])


def _grid_point(points, ball, k, params, seed, index, n_keep):
    try:
        geo = PairGeometry(points, ball, params,
                           np.random.SeedSequence([seed, 1, index]))
        s, _ = scaled_smallest(geo.matrix(k), n_keep)
    except SolverError as exc:
        raise SolverError("grid index %d (k=%.6g): %s"
                          % (index, k, exc)) from exc
    if len(s) < n_keep:
        s = np.concatenate([s, np.full(n_keep - len(s), s[-1])])
    return s, geo.M

def _scan_volume(manifold, cfg):
    if manifold.volume is not None:
        return manifold.volume
    return domain_volume_mc(manifold.gens, 10 ** 5, cfg.seed)[0]


def scan(manifold, cfg: ScanConfig, threads: int = 1) -> ScanResult:
    """chi^2(k) over the configured grid.

    Sample points are drawn once per scan, so the curve is smooth in k;
    the element ball is enumerated once at the largest shell radius and
    filtered per grid point.  With threads > 1 the grid is distributed
    over a process pool; results are merged in grid order and agree
    with the serial scan.
    """
    gens = manifold.gens
    volume = _scan_volume(manifold, cfg)
    ks = cfg.grid()
    params = [choose_params(k, cfg, volume) for k in ks]

    points = sample_domain_points(cfg.d, gens, cfg.seed)
    rmax = float(np.arccosh(np.maximum(points[:, 0], 1.0)).max())
    ball_radius = max(p.rho_max for p in params) + rmax + 1e-6
    ball = enumerate_elements(gens, ball_radius)

    tasks = list(zip(range(len(ks)), ks, params))
    if threads > 1:
        import multiprocessing as mp
        with mp.Pool(threads, initializer=_pool_init,
                     initargs=(points, ball, cfg.n_keep, cfg.seed)) as pool:
            rows = pool.map(_pool_task, tasks, chunksize=1)
    else:
        rows = [_grid_point(points, ball, k, p, cfg.seed, i, cfg.n_keep)
                for (i, k, p) in tasks]

    sigma = np.stack([r[0] for r in rows])
    M = np.array([r[1] for r in rows])
    return ScanResult(manifold=manifold.name, config=cfg, ks=ks,
                      sigma=sigma,
                      L=np.array([p.L for p in params]),
                      M=M,
                      N=np.array([(p.L + 1) ** 2 for p in params]),
                      rho_min=np.array([p.rho_min for p in params]),
                      rho_max=np.array([p.rho_max for p in params]))


# ----------------------------------------------------------------------
# minimum detection and refinement
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class Candidate:
    """A chi^2 dip: grid minimum k with its bracketing interval."""

    k: float
    k_lo: float
    k_hi: float
    chi2: float
    blended: bool = False


def detect_minima(result: ScanResult, prominence: float = PROMINENCE):
    """Local minima of the best-vector chi^2 curve below the prominence
    threshold (a fraction of the median).  Near-coincident minima are
    merged into a single candidate flagged for deconvolution.
    """
    best = result.best
    ks = result.ks
    if len(ks) < 3:
        return []
    thr = prominence * float(np.median(best))
    idx = [i for i in range(1, len(ks) - 1)
           if best[i] < best[i - 1] and best[i] < best[i + 1]
           and best[i] < thr]
    cands = [Candidate(k=float(ks[i]), k_lo=float(ks[i - 1]),
                       k_hi=float(ks[i + 1]), chi2=float(best[i]))
             for i in idx]
    merged = []
    for c in cands:
        prev = merged[-1] if merged else None
        if prev is not None and c.k - prev.k_hi < BLEND_SPACING * result.config.dk \
                and c.k - prev.k < BLEND_SPACING * result.config.dk:
            deeper = c if c.chi2 < prev.chi2 else prev
            merged[-1] = Candidate(k=deeper.k, k_lo=prev.k_lo, k_hi=c.k_hi,
                                   chi2=deeper.chi2, blended=True)
        else:
            merged.append(c)
    return merged


_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


def _golden_section(f, lo, hi, xtol):
    a, b = lo, hi
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    fc, fd = f(c), f(d)
    while b - a > xtol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - _INVPHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INVPHI * (b - a)
            fd = f(d)
    return (c, fc) if fc < fd else (d, fd)


@dataclass(frozen=True)
class Eigenmode:
    """A refined eigenvalue with its coefficient vectors.

    q^2 = k^2 + 1 is always derived from k, never stored.  vectors
    holds multiplicity-many orthonormal rows; multiplicities at or
    above the scan's n_keep saturate (re-run with a larger n_keep to
    resolve them).
    """

    k: float
    multiplicity: int
    vectors: np.ndarray
    chi2: float
    L: int
    manifold: str
    config_digest: str

    def __post_init__(self):
        gram = self.vectors @ self.vectors.T
        if np.max(np.abs(gram - np.eye(len(self.vectors)))) > 1e-8:
            raise SolverError("mode vectors are not orthonormal")

    @property
    def q2(self) -> float:
        return self.k * self.k + 1.0

    def coefficients(self):
        return tuple(ModeCoefficients(self.k, self.L, v)
                     for v in self.vectors)


def _frozen_geometry(manifold, k_center, cfg, points=None, ball=None,
                     volume=None, boost=1):
    gens = manifold.gens
    if volume is None:
        volume = _scan_volume(manifold, cfg)
    if boost == 1:
        params = choose_params(k_center, cfg, volume)
        eff = cfg
    else:
        eff = replace(cfg, d=boost * cfg.d)
        params = choose_params(k_center, eff, volume, scale=REFINE_SCALE,
                               min_L=REFINE_MIN_L,
                               chase_drop=REFINE_SCALE * DROP_AMPLITUDE)
    if points is None:
        points = sample_domain_points(eff.d, gens, cfg.seed)
    rmax = float(np.arccosh(np.maximum(points[:, 0], 1.0)).max())
    need = params.rho_max + rmax + 1e-6
    if ball is None or ball.radius < need:
        ball = enumerate_elements(gens, need)
    seed = np.random.SeedSequence([cfg.seed, 2, int(round(k_center / cfg.dk))])
    return PairGeometry(points, ball, params, seed)


def refine_minimum(manifold, candidate: Candidate, cfg: ScanConfig,
                   points=None, ball=None, volume=None) -> Eigenmode:
    """Golden-section refinement of one chi^2 dip.

    The system is rebuilt at the bracket center with REFINE_BOOST times
    the scan's points and REFINE_SCALE times its truncation thresholds,
    then frozen, so chi^2 is smooth in k: near the feasibility edge the
    scan's own value supply leaves true nullspace directions barely
    separated from the singular tail, and the boost restores the
    margin while the deeper cutoff drops the floor well below the scan
    curve.  The sampler stream is prefix stable, so the scan's points
    are the leading subset of the boosted set; `points`, when supplied,
    must hold at least REFINE_BOOST * d rows.

    Rebuilding can displace the dip by a grid cell or so, in which
    case the bracket slides downhill to recapture it; a bracket whose
    interior minimum actually evaporates is reported as a rejected
    candidate.  Multiplicity is the number of singular values below
    MULTIPLICITY_TAU times the n_keep-th one at the refined k.
    """
    k_c = 0.5 * (candidate.k_lo + candidate.k_hi)
    if points is None or len(points) < REFINE_BOOST * cfg.d:
        points = sample_domain_points(REFINE_BOOST * cfg.d, manifold.gens,
                                      cfg.seed)
    if volume is None:
        volume = _scan_volume(manifold, cfg)
    geo = _frozen_geometry(manifold, k_c, cfg,
                           points[:REFINE_BOOST * cfg.d], ball, volume,
                           boost=REFINE_BOOST)

    def f(k):
        s, _ = scaled_smallest(geo.matrix(k), 1)
        return s[0] ** 2

    lo, mid, hi = candidate.k_lo, candidate.k, candidate.k_hi
    f_lo, f_mid, f_hi = f(lo), f(mid), f(hi)
    for _ in range(BRACKET_SLIDE):
        if f_mid < min(f_lo, f_hi):
            break
        if f_lo < f_hi:
            lo, mid, hi = 2 * lo - mid, lo, mid
            f_lo, f_mid, f_hi = f(lo), f_lo, f_mid
        else:
            lo, mid, hi = mid, hi, 2 * hi - mid
            f_lo, f_mid, f_hi = f_mid, f_hi, f(hi)
    if f_mid >= min(f_lo, f_hi):
        raise SolverError("rejected candidate near k=%.4f: bracket lost "
                          "its minimum under refinement" % candidate.k)
    k_star, chi2 = _golden_section(f, lo, hi, REFINE_XTOL)
    if chi2 >= min(f_lo, f_hi):
        raise SolverError("rejected candidate near k=%.4f: no interior "
                          "minimum" % candidate.k)

    s, vt = scaled_smallest(geo.matrix(k_star), cfg.n_keep)
    mult = int(np.sum(s < MULTIPLICITY_TAU * s[-1]))
    if mult < 1:
        raise SolverError("rejected candidate near k=%.4f: no singular "
                          "value separates from the tail" % candidate.k)
    return Eigenmode(k=float(k_star), multiplicity=mult,
                     vectors=vt[:mult], chi2=float(s[0] ** 2),
                     L=geo.params.L, manifold=manifold.name,
                     config_digest=cfg.digest())


def _split_blend(result: ScanResult, cand: Candidate):
    """Deconvolve a blended dip: fit a two-dip (quartic) model over the
    bracket and bracket each interior vertex separately."""
    dk = result.config.dk
    sel = (result.ks >= cand.k_lo - 2 * dk) & (result.ks <= cand.k_hi + 2 * dk)
    ks, ys = result.ks[sel], result.best[sel]
    if len(ks) < 6:
        return [cand]
    t = ks - ks.mean()
    poly = np.polynomial.Polynomial.fit(t, ys, 4)
    deriv = poly.deriv()
    crit = [r.real for r in deriv.roots()
            if abs(r.imag) < 1e-9 and poly.deriv(2)(r.real) > 0
            and ks[0] <= r.real + ks.mean() <= ks[-1]]
    if len(crit) != 2:
        return [cand]
    out = []
    for r in sorted(crit):
        v = r + ks.mean()
        out.append(Candidate(k=float(v), k_lo=float(v - dk),
                             k_hi=float(v + dk), chi2=float(poly(r))))
    return out


def refine_all(manifold, result: ScanResult, cfg: ScanConfig,
               candidates=None):
    """Refine every detected dip; blended dips are deconvolved first.
    Rejected candidates are dropped with a warning."""
    if candidates is None:
        candidates = detect_minima(result)
    gens = manifold.gens
    points = sample_domain_points(REFINE_BOOST * cfg.d, gens, cfg.seed)
    volume = _scan_volume(manifold, cfg)
    modes = []
    for cand in candidates:
        parts = _split_blend(result, cand) if cand.blended else [cand]
        for part in parts:
            try:
                modes.append(refine_minimum(manifold, part, cfg,
                                            points=points, volume=volume))
            except SolverError as exc:
                warnings.warn(str(exc))
    return modes
