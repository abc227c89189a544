"""Group-theoretic side of the solver: tilings of H^3 by a cocompact group.

Given the face-pairing generators of a discrete, freely acting subgroup
of SO(3,1), this module enumerates group elements and orbit points out
to a radius, tests membership in the Dirichlet domain centered at the
origin, samples the domain uniformly in hyperbolic volume, estimates
the covolume and diameter by Monte Carlo, and computes the matched
self-intersection circles of geodesic spheres.

Element enumeration is a breadth-first walk over words in the
generators.  A word is expanded further only while the orbit of the
basepoint stays within the search radius plus a pruning margin
(default: twice the largest generator displacement) because geodesic
words can leave the ball and re-enter.  Deduplication uses the orbit of
the origin: the action is free, so two words give the same element
exactly when they move the origin to the same point.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .geometry import (ETA_DIAG, HPoint, Isometry, displacement, identity,
                       inverse, mdot, origin, project_hyperboloid,
                       spherical_from_vec, to_spherical)

WORD_CAP = 30
DEDUP_TOL = 1e-6      # Euclidean; duplicates drift ~1e-10, distinct
                      # elements are separated by the systole (~0.3)
_BALL_SAFETY = 0.05   # padding on the out-radius estimate


class TilingError(ValueError):
    """Inconsistent generator set or ill-posed tiling request."""


def _default_labels(n):
    alphabet = "abcdefghijklmnopqrstuvwxyz"
    if n <= len(alphabet):
        return [alphabet[i] for i in range(n)]
    return ["g%d" % (i + 1) for i in range(n)]


@dataclass(frozen=True)
class GeneratorSet:
    """Face-pairing generators with their inverses, in a fixed order.

    elements[i] and elements[inverse_index[i]] compose to the identity.
    Labels use lowercase for the supplied generators and uppercase for
    appended inverses, so words print like "abA".
    """

    elements: tuple
    labels: tuple
    inverse_index: tuple

    def __post_init__(self):
        if not self.elements:
            raise TilingError("generator set is empty")
        for g, lab in zip(self.elements, self.labels):
            if g.g00 <= 1.0 + 1e-9:
                raise TilingError("generator %r is the identity" % lab)
        for i, j in enumerate(self.inverse_index):
            prod = self.elements[i].matrix @ self.elements[j].matrix
            if np.max(np.abs(prod - np.eye(4))) > 1e-8:
                raise TilingError("elements %r and %r are not inverse"
                                  % (self.labels[i], self.labels[j]))

    @classmethod
    def from_generators(cls, gens, labels=None):
        """Build a set from generators, appending any missing inverses."""
        gens = [g if isinstance(g, Isometry) else Isometry(g) for g in gens]
        if labels is None:
            labels = _default_labels(len(gens))
        labels = list(labels)
        elements = list(gens)
        for i, g in enumerate(gens):
            if _find_match(elements, inverse(g)) is None:
                elements.append(inverse(g))
                labels.append(labels[i].upper())
        inv_idx = []
        for g in elements:
            j = _find_match(elements, inverse(g))
            if j is None:
                raise TilingError("generator list not closed under inverse")
            inv_idx.append(j)
        return cls(tuple(elements), tuple(labels), tuple(inv_idx))

    def __len__(self):
        return len(self.elements)

    def matrices(self):
        return np.stack([g.matrix for g in self.elements])

    def max_displacement(self):
        return max(displacement(g) for g in self.elements)

    def min_displacement(self):
        return min(displacement(g) for g in self.elements)


def _find_match(elements, g, tol=1e-8):
    for j, h in enumerate(elements):
        if np.max(np.abs(h.matrix - g.matrix)) < tol:
            return j
    return None


@dataclass(frozen=True)
class ManifoldSpec:
    """A named manifold: generators plus optional census metadata."""

    name: str
    gens: GeneratorSet
    volume: float | None = None
    diameter: float | None = None
    geodesic: float | None = None      # shortest closed geodesic
    symmetry: str | None = None
    extra: dict = field(default_factory=dict)


@dataclass(frozen=True)
class ElementBall:
    """All nontrivial group elements g with d(origin, g origin) <= radius.

    words[i] is a tuple of generator indices (left-to-right application
    order: word (a, b) is elements[a] composed with elements[b] acting
    as a then b reading right to left on points).
    """

    radius: float
    words: tuple
    mats: np.ndarray       # shape (n, 4, 4)
    disp: np.ndarray       # shape (n,)

    def __len__(self):
        return len(self.words)

    def orbit(self):
        """Origin orbit points, shape (n, 4)."""
        return np.ascontiguousarray(self.mats[:, :, 0])


def enumerate_elements(gens: GeneratorSet, radius: float,
                       prune_margin: float | None = None,
                       word_cap: int = WORD_CAP) -> ElementBall:
    """Breadth-first enumeration of the group ball of the given radius.

    The identity is not included.  Raises if the walk is still finding
    in-ball elements at the word cap, which signals an ill-conditioned
    generator set (or a radius far beyond sensible use).
    """
    if radius <= 0:
        return ElementBall(radius, (), np.zeros((0, 4, 4)), np.zeros(0))
    if prune_margin is None:
        prune_margin = 2.0 * gens.max_displacement()
    explore = np.cosh(radius + prune_margin)
    keep = np.cosh(radius)

    gmats = gens.matrices()
    ngen = len(gens)

    kept_mats = [np.eye(4)[np.newaxis]]
    kept_words = [()]
    tree_pts = np.array([[1.0, 0.0, 0.0, 0.0]])
    tree = cKDTree(tree_pts)

    frontier = np.eye(4)[np.newaxis]
    frontier_words = [()]
    depth = 0
    while len(frontier):
        depth += 1
        if depth > word_cap:
            raise TilingError("word cap %d exceeded before closure; "
                              "generators look ill-conditioned" % word_cap)
        kept_chunks = []
        cwords = []
        for start in range(0, len(frontier), 100000):
            fpart = frontier[start:start + 100000]
            part = np.einsum("fij,gjk->fgik", fpart, gmats).reshape(-1, 4, 4)
            ok = part[:, 0, 0] <= explore
            kept_chunks.append(part[ok])
            wpart = frontier_words[start:start + 100000]
            cwords.extend(w + (gi,)
                          for (w, gi), keep
                          in zip(((w, gi) for w in wpart
                                  for gi in range(ngen)), ok)
                          if keep)
        children = np.concatenate(kept_chunks)
        pts = children[:, :, 0]

        # drop children already seen (drift << DEDUP_TOL << separation)
        if len(pts):
            dist, _ = tree.query(pts, k=1, distance_upper_bound=DEDUP_TOL)
            fresh = ~np.isfinite(dist) | (dist > DEDUP_TOL)
            # intra-level duplicates: keep first occurrence
            if np.any(fresh):
                sub = np.flatnonzero(fresh)
                level_tree = cKDTree(pts[sub])
                pairs = level_tree.query_pairs(DEDUP_TOL, output_type="ndarray")
                if len(pairs):
                    drop = set(sub[pairs[:, 1]].tolist())
                    fresh[list(drop)] = False
            children, pts = children[fresh], pts[fresh]
            cwords = [w for w, ok in zip(cwords, fresh) if ok]

        if not len(pts):
            break
        kept_mats.append(children)
        kept_words.extend(cwords)
        tree_pts = np.concatenate([tree_pts, pts])
        tree = cKDTree(tree_pts)
        frontier = children
        frontier_words = cwords

    mats = np.concatenate(kept_mats)[1:]          # drop the identity
    words = tuple(kept_words[1:])
    disp = np.arccosh(np.maximum(mats[:, 0, 0], 1.0))
    sel = np.flatnonzero(disp <= np.arccosh(keep) + 1e-12)
    order = sel[np.lexsort((np.arange(len(sel)), disp[sel]))]
    return ElementBall(radius, tuple(words[i] for i in order),
                       np.ascontiguousarray(mats[order]), disp[order])


@dataclass(frozen=True)
class ImageSet:
    """Images of one basepoint inside a radial shell [rho_min, rho_max]."""

    base: HPoint
    words: tuple
    points: np.ndarray     # shape (n, 4)
    radii: np.ndarray      # shape (n,)

    def __len__(self):
        return len(self.words)

    def __iter__(self):
        for w, p, r in zip(self.words, self.points, self.radii):
            yield w, HPoint(p), float(r)


def images_from_ball(p: HPoint, ball: ElementBall, rho_min: float,
                     rho_max: float) -> ImageSet:
    """Filter a precomputed element ball down to images of p in the shell.

    The ball must have radius >= rho_max + d(origin, p), else images can
    be missed; this is asserted.
    """
    base_r = float(np.arccosh(max(p.vec[0], 1.0)))
    if ball.radius + 1e-9 < rho_max + base_r:
        raise TilingError("element ball radius %.3f too small for "
                          "rho_max=%.3f with |p|=%.3f"
                          % (ball.radius, rho_max, base_r))
    if len(ball) == 0:
        return ImageSet(p, (), np.zeros((0, 4)), np.zeros(0))
    pts = np.einsum("nij,j->ni", ball.mats, p.vec)
    pts = project_hyperboloid(pts)
    radii = np.arccosh(np.maximum(pts[:, 0], 1.0))
    sel = np.flatnonzero((radii >= rho_min) & (radii <= rho_max))
    return ImageSet(p, tuple(ball.words[i] for i in sel),
                    np.ascontiguousarray(pts[sel]), radii[sel])


def enumerate_images(p: HPoint, gens: GeneratorSet, rho_min: float,
                     rho_max: float, prune_margin: float | None = None,
                     word_cap: int = WORD_CAP) -> ImageSet:
    """All images g p with d(origin, g p) in [rho_min, rho_max], g != id."""
    if rho_max <= 0:
        raise TilingError("rho_max must be positive")
    base_r = float(np.arccosh(max(p.vec[0], 1.0)))
    ball = enumerate_elements(gens, rho_max + base_r, prune_margin, word_cap)
    return images_from_ball(p, ball, rho_min, rho_max)


def in_domain_many(pts, orbit) -> np.ndarray:
    """Vectorized Dirichlet-domain membership for (n, 4) points.

    A point is inside when it is at least as close to the origin as to
    every orbit point (ties count as inside).
    """
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    orbit = np.atleast_2d(np.asarray(orbit, dtype=float))
    if orbit.shape[0] == 0:
        raise TilingError("empty orbit")
    # d(p, 0) <= d(p, y)  <=>  <p, e0> <= <p, y>
    dots = pts @ (orbit * ETA_DIAG).T
    return pts[:, 0] <= dots.min(axis=1)


def in_dirichlet_domain(p: HPoint, orbit) -> bool:
    """Membership of a single point; orbit from membership_orbit()."""
    if isinstance(orbit, (list, tuple)) and orbit and isinstance(orbit[0], HPoint):
        orbit = np.stack([q.vec for q in orbit])
    return bool(in_domain_many(p.vec[np.newaxis], orbit)[0])


def _fibonacci_directions(n):
    i = np.arange(n) + 0.5
    z = 1.0 - 2.0 * i / n
    r = np.sqrt(np.maximum(1.0 - z * z, 0.0))
    golden = np.pi * (3.0 - np.sqrt(5.0))
    t = golden * i
    return np.column_stack([r * np.cos(t), r * np.sin(t), z])


def out_radius_estimate(gens: GeneratorSet, ndirs: int = 1000,
                        step: float = 0.05) -> float:
    """Smallest sampled radius whose full sphere lies outside the domain.

    Grows R until none of ndirs quasi-uniform directions at radius R is
    inside; the small additive safety covers vertices poking between
    sampled directions.
    """
    r = 0.5 * gens.min_displacement()
    dirs = _fibonacci_directions(ndirs)
    ball = enumerate_elements(gens, 2.0 * r + 0.6)
    while r < 25.0:
        if 2.0 * r + 0.6 > ball.radius:
            ball = enumerate_elements(gens, 2.0 * r + 1.1)
        sh, ch = np.sinh(r), np.cosh(r)
        pts = np.column_stack([np.full(ndirs, ch), sh * dirs])
        if not np.any(in_domain_many(pts, ball.orbit())):
            return r + _BALL_SAFETY
        r += step
    raise TilingError("out-radius search did not terminate; "
                      "generators may not be cocompact")


def membership_orbit(gens: GeneratorSet, r_out: float | None = None) -> np.ndarray:
    """Origin orbit large enough for Dirichlet membership tests."""
    if r_out is None:
        r_out = out_radius_estimate(gens)
    return enumerate_elements(gens, 2.0 * r_out + 0.1).orbit()


def _ball_volume(r):
    return np.pi * (np.sinh(2.0 * r) - 2.0 * r)


def _sample_ball(n, radius, rng):
    """n points uniform in hyperbolic volume inside the radius-R ball."""
    u = rng.random(n)
    target = u * (np.sinh(2.0 * radius) - 2.0 * radius)
    # invert F(r) = sinh(2r) - 2r by interpolation plus Newton polish
    grid = np.linspace(0.0, radius, 4096)
    fgrid = np.sinh(2.0 * grid) - 2.0 * grid
    r = np.interp(target, fgrid, grid)
    for _ in range(3):
        f = np.sinh(2.0 * r) - 2.0 * r - target
        fp = np.maximum(2.0 * np.cosh(2.0 * r) - 2.0, 1e-30)
        r = np.clip(r - f / fp, 0.0, radius)
    dirs = rng.standard_normal((n, 3))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    sh, ch = np.sinh(r), np.cosh(r)
    return np.column_stack([ch, sh[:, np.newaxis] * dirs])


def sample_domain_points(n: int, gens: GeneratorSet, seed: int,
                         r_out: float | None = None,
                         orbit: np.ndarray | None = None):
    """n i.i.d. uniform points in the Dirichlet domain (rejection sampled).

    Returns an (n, 4) array.  Deterministic given the seed; r_out and
    orbit may be passed to skip their recomputation.
    """
    if n < 1:
        raise TilingError("need n >= 1")
    if r_out is None:
        r_out = out_radius_estimate(gens)
    if orbit is None:
        orbit = membership_orbit(gens, r_out)
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0x7D0]))
    got = []
    total = 0
    drawn = 0
    # fixed batch size keeps the accepted sequence a prefix-stable
    # stream: the first n points do not depend on n
    while total < n:
        pts = _sample_ball(1024, r_out, rng)
        drawn += 1024
        acc = pts[in_domain_many(pts, orbit)]
        got.append(acc)
        total += len(acc)
        if drawn >= 10240 and total < drawn * 1e-3:
            raise TilingError("acceptance rate below 1e-3; "
                              "out-radius estimate looks wrong")
    return np.concatenate(got)[:n]


def domain_volume_mc(gens: GeneratorSet, n: int, seed: int,
                     r_out: float | None = None,
                     orbit: np.ndarray | None = None):
    """Monte Carlo covolume: acceptance fraction times ball volume.

    Returns (volume, stderr) with the binomial standard error.
    """
    if n < 10 ** 4:
        raise TilingError("need n >= 1e4 for a meaningful estimate")
    if r_out is None:
        r_out = out_radius_estimate(gens)
    if orbit is None:
        orbit = membership_orbit(gens, r_out)
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0x7D1]))
    hits = 0
    chunk = 200000
    left = n
    while left > 0:
        m = min(chunk, left)
        pts = _sample_ball(m, r_out, rng)
        hits += int(np.count_nonzero(in_domain_many(pts, orbit)))
        left -= m
    acc = hits / n
    vol = acc * _ball_volume(r_out)
    err = _ball_volume(r_out) * np.sqrt(max(acc * (1.0 - acc), 0.0) / n)
    return float(vol), float(err)


def estimate_diameter(gens: GeneratorSet, n: int, seed: int) -> float:
    """Lower bound on the diameter from n sampled domain points.

    For each pair of sample points the quotient-space distance is the
    minimum of d(p, g q) over the orbit of q; the diameter estimate is
    the maximum over pairs, converging from below as n grows.
    """
    if n < 10 ** 3:
        raise TilingError("need n >= 1e3 sample points")
    r_out = out_radius_estimate(gens)
    orbit = membership_orbit(gens, r_out)
    pts = sample_domain_points(n, gens, seed, r_out=r_out, orbit=orbit)
    # any competitive image of q lies within |p| + d(p, q) <= 3 r_out
    ball = enumerate_elements(gens, 3.0 * r_out + 0.1)
    mats = np.concatenate([np.eye(4)[np.newaxis], ball.mats])
    best = 0.0
    chunk = max(1, int(2e7 / (len(mats) * n)))
    eta_pts = pts * ETA_DIAG
    for start in range(0, n, chunk):
        q = pts[start:start + chunk]
        images = np.einsum("mij,qj->qmi", mats, q).reshape(-1, 4)
        dots = eta_pts @ images.T
        dots = dots.reshape(n, len(q), len(mats))
        dmin = np.arccosh(np.maximum(dots.min(axis=2), 1.0))
        best = max(best, float(dmin.max()))
    return best


def matched_circle(g: Isometry, rho: float):
    """Angular radius and centers of the matched circle pair of g.

    The sphere of radius rho about the basepoint self-intersects under
    g along two circles: C, centered on the direction of g^-1 origin,
    and its partner g(C), centered on the direction of g origin.  Both
    have angular radius alpha.  Returns (alpha, center_g, center_ginv)
    where each center is (theta, phi).
    """
    if rho <= 0:
        raise TilingError("rho must be positive")
    g00 = g.g00
    if g00 <= 1.0:
        raise TilingError("generator displaces the origin by zero")
    arg = (g00 - 1.0) / (np.sqrt(g00 * g00 - 1.0) * np.tanh(rho))
    if arg > 1.0 + 1e-12:
        raise TilingError("sphere of radius %.4f does not self-intersect "
                          "under this pairing (face distance %.4f)"
                          % (rho, np.arccosh(g00) / 2.0))
    alpha = float(np.arccos(np.clip(arg, -1.0, 1.0)))
    fwd = to_spherical(HPoint(project_hyperboloid(g.matrix[:, 0])))
    back = to_spherical(HPoint(project_hyperboloid(inverse(g).matrix[:, 0])))
    return alpha, (fwd[1], fwd[2]), (back[1], back[2])


def circle_points(g: Isometry, rho: float, n: int) -> np.ndarray:
    """n points around the circle C (the g^-1-side circle) on the
    rho-sphere, starting at the circle's intersection with the meridian
    through its center and the north pole (x3 axis).

    Applying g to these points lands on the partner circle with the
    matching phase.
    """
    alpha, _, _ = matched_circle(g, rho)
    axis = inverse(g).matrix[1:4, 0]
    axis = axis / np.linalg.norm(axis)
    zhat = np.array([0.0, 0.0, 1.0])
    e1 = zhat - (zhat @ axis) * axis
    if np.linalg.norm(e1) < 1e-12:
        e1 = np.array([1.0, 0.0, 0.0])
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(axis, e1)
    t = 2.0 * np.pi * np.arange(n) / n
    dirs = (np.cos(alpha) * axis[np.newaxis, :]
            + np.sin(alpha) * (np.cos(t)[:, np.newaxis] * e1
                               + np.sin(t)[:, np.newaxis] * e2))
    sh, ch = np.sinh(rho), np.cosh(rho)
    return np.column_stack([np.full(n, ch), sh * dirs])
