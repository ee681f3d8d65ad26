"""
Analytic continuation of resonance branches along paths in the resolvent set.

Branches are followed by discrete steps joined with an optimal assignment.
A step is accepted only if every matched value moves by less than half
its distance to the nearest other branch at the previous sample, which
makes the assignment the unique nearest-neighbour pairing.  Otherwise the step is
halved.  Closed loops give monodromy permutations.  A quadtree of such loops
localizes branching points.  Rays into a target point are used to classify
how the branches behave there.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    CardinalityMismatch,
    DepthExceeded,
    InsufficientDecades,
    ResatlasError,
    SpectrumHit,
    StepCollapse,
)
from .numerics import eigenvalues, match_multisets, solve_shifted, spectrum_guard
from .problem import ResonanceProblem
from .resonance import (
    ResonanceSet,
    consistency_scale,
    coupling_consistency,
    resonances_at,
    transfer_at,
    transfer_matrix,
    ZERO_TOL,
)

CLASSIFICATIONS = ("regular", "pole_like", "branching", "suspected_absorbing")


# -- permutations ------------------------------------------------------------


def identity(k):
    return tuple(range(k))


def compose(first, second):
    """Apply ``first`` then ``second`` (both as index maps ``i -> perm[i]``)."""
    return tuple(second[i] for i in first)


def inverse(perm):
    out = [0] * len(perm)
    for i, j in enumerate(perm):
        out[j] = i
    return tuple(out)


def power(perm, n):
    out = identity(len(perm))
    for _ in range(n):
        out = compose(out, perm)
    return out


def cycles(perm):
    seen, out = set(), []
    for start in range(len(perm)):
        if start in seen:
            continue
        cyc, i = [], start
        while i not in seen:
            seen.add(i)
            cyc.append(i)
            i = perm[i]
        out.append(tuple(cyc))
    return out


def is_identity(perm):
    return all(i == j for i, j in enumerate(perm))


# -- types -------------------------------------------------------------------


@dataclass(frozen=True)
class PathSpec:
    waypoints: tuple
    max_step: float
    min_step: float
    closed: bool = False

    def __post_init__(self):
        pts = tuple(complex(w) for w in self.waypoints)
        object.__setattr__(self, "waypoints", pts)
        if len(pts) < 2:
            raise ValueError("a path needs at least two waypoints")
        if len(set(pts)) != len(pts):
            raise ValueError("waypoints must be pairwise distinct")
        if not (0 < self.min_step <= self.max_step):
            raise ValueError("need 0 < min_step <= max_step")

    @classmethod
    def segment(cls, a, b, max_step=None, min_step=None):
        length = abs(b - a)
        max_step = length / 16 if max_step is None else max_step
        min_step = max_step * 1e-7 if min_step is None else min_step
        return cls((a, b), max_step, min_step)

    @classmethod
    def circle(cls, z0, rho, npts=16, max_step=None, min_step=None):
        theta = 2 * np.pi * np.arange(npts) / npts
        pts = tuple(complex(z0 + rho * np.exp(1j * t)) for t in theta)
        max_step = 2 * np.pi * rho / 32 if max_step is None else max_step
        min_step = max_step * 1e-7 if min_step is None else min_step
        return cls(pts, max_step, min_step, closed=True)

    @classmethod
    def rectangle(cls, re_min, re_max, im_min, im_max, max_step=None, min_step=None):
        pts = (
            complex(re_min, im_min),
            complex(re_max, im_min),
            complex(re_max, im_max),
            complex(re_min, im_max),
        )
        diam = math.hypot(re_max - re_min, im_max - im_min)
        max_step = diam / 16 if max_step is None else max_step
        min_step = max_step * 1e-7 if min_step is None else min_step
        return cls(pts, max_step, min_step, closed=True)

    def vertices(self):
        pts = list(self.waypoints)
        if self.closed:
            pts.append(pts[0])
        return pts

    def reversed(self):
        """Same path in the opposite direction; closed loops keep their base point."""
        pts = self.waypoints
        if self.closed:
            pts = (pts[0],) + tuple(reversed(pts[1:]))
        else:
            pts = tuple(reversed(pts))
        return PathSpec(pts, self.max_step, self.min_step, self.closed)

    def rotated(self, shift):
        """Closed loop with its base point moved ``shift`` waypoints forward."""
        if not self.closed:
            raise ValueError("only closed paths can be rotated")
        pts = self.waypoints[shift:] + self.waypoints[:shift]
        return PathSpec(pts, self.max_step, self.min_step, True)

    def length(self):
        v = self.vertices()
        return sum(abs(b - a) for a, b in zip(v, v[1:]))


@dataclass(frozen=True)
class Ambiguous:
    """Returned by :func:`match_spectra` when the assignment is not safely unique."""

    distance: float
    half_gap: float


@dataclass
class BranchFamily:
    """Branches sampled along a path.

    ``samples[i]`` is ``(z, ResonanceSet, perm)``, where the set holds the raw
    (sorted) resonance values and ``perm`` maps each branch label's position
    at sample ``i - 1`` to its position in sample ``i``.  ``tracks`` holds
    the values in label order, one row per sample.
    """

    samples: list
    branch_labels: tuple
    tracks: np.ndarray
    zero_count: int

    @property
    def z(self):
        return np.array([s[0] for s in self.samples])

    def composed(self):
        """Raw index at the final sample of each branch labelled at the start."""
        return self._positions[-1]

    def start_values(self):
        return self.tracks[0]

    def end_values(self):
        return self.tracks[-1]

    _positions: list = field(default_factory=list, repr=False)


@dataclass(frozen=True)
class BranchPoint:
    location: complex
    radius: float
    monodromy: tuple
    periods: tuple
    base_point: complex = 0j
    refined: bool = False


@dataclass
class DivergenceReport:
    target: complex
    direction: complex
    classification: str
    order: int | None
    fit_quality: float
    slopes: np.ndarray
    samples: dict
    monodromy: tuple | None = None
    notes: list = field(default_factory=list)

    @property
    def label(self):
        if self.classification == "pole_like":
            return f"pole_like({self.order})"
        return self.classification


# -- matching and tracing ----------------------------------------------------


def _nearest_gaps(values):
    """Distance from each value to its nearest neighbour in the same multiset."""
    values = np.asarray(values)
    if values.size < 2:
        return np.full(values.size, math.inf)
    d = np.abs(values[:, None] - values[None, :])
    d[np.diag_indices_from(d)] = math.inf
    return d.min(axis=1)


def match_spectra(prev: ResonanceSet, next: ResonanceSet):
    """Optimal assignment of ``prev`` onto ``next``.

    Returns a permutation tuple ``perm`` (``prev.values[i]`` continues to
    ``next.values[perm[i]]``) or :class:`Ambiguous` when some paired distance
    reaches half the gap from its ``prev`` value to the nearest other one.
    The half-gap discs are disjoint, so an accepted assignment is the unique
    nearest-neighbour matching.  Measuring the gap per branch keeps steps
    long near a pole, where one isolated branch moves fast.
    """
    a, b = np.asarray(prev.values), np.asarray(next.values)
    if a.size != b.size:
        raise CardinalityMismatch(f"{a.size} branches before the step, {b.size} after")
    perm, _ = match_multisets(a, b)
    if a.size == 0:
        return ()
    dists = np.abs(a - b[perm])
    half = 0.5 * _nearest_gaps(a)
    worst = int(np.argmax(dists / half))
    if dists[worst] >= half[worst]:
        return Ambiguous(float(dists[worst]), float(half[worst]))
    return tuple(int(i) for i in perm)


def _path_clearance(p, pts):
    """Smallest distance from ``spec(H0)`` (real) to the polyline ``pts``."""
    lam = np.asarray(p.spectrum, dtype=float)
    best = math.inf
    for a, b in zip(pts, pts[1:]):
        d = b - a
        denom = abs(d) ** 2
        t = np.clip(((lam - a.real) * d.real - a.imag * d.imag) / denom, 0.0, 1.0)
        best = min(best, float(np.min(np.abs(a + t * d - lam))))
    return best


def _check_path(p, path):
    pts = path.vertices()
    clearance = _path_clearance(p, pts)
    if clearance < 10 * path.min_step:
        lam = np.asarray(p.spectrum)
        raise SpectrumHit(pts[0], clearance, float(lam[np.argmin(np.abs(lam - pts[0]))]))
    return pts


def _verify(p, z, sample, values):
    for r in values:
        eig_d, sing_min = coupling_consistency(p, z, r, sample)
        if eig_d > 1e-7 * consistency_scale(p, z, r):
            raise ResatlasError(f"coupling consistency failed at z={z}: r={r}, distance {eig_d:.3e}")


def trace_branches(
    p: ResonanceProblem,
    path: PathSpec,
    start=None,
    verify=True,
    zero_tol=ZERO_TOL,
) -> BranchFamily:
    """Continue every resonance branch along ``path``.

    ``start`` optionally fixes the branch labelling: an array of resonance
    values at the first waypoint, in the desired label order (for example
    the end values of a previous traversal).
    """
    pts = _check_path(p, path)
    z = pts[0]
    sample = transfer_at(p, z, zero_tol)
    rs = resonances_at(sample)
    if verify:
        _verify(p, z, sample, rs.values)
    kk = len(rs)
    if start is None:
        pos = tuple(range(kk))
    else:
        perm, dist = match_multisets(start, rs.values)
        if len(start) != kk or dist > 1e-6 * (1 + np.max(np.abs(rs.values), initial=0.0)):
            raise ValueError("start values do not match the resonances at the first waypoint")
        pos = tuple(int(i) for i in perm)
    zero_count = sample.zero_count
    samples = [(z, rs, identity(kk))]
    positions = [pos]
    tracks = [rs.values[list(pos)]]

    h = path.max_step
    for a, b in zip(pts, pts[1:]):
        seg = abs(b - a)
        done = 0.0
        while done < seg * (1 - 1e-14):
            step = min(h, seg - done)
            while True:
                z_next = a + (b - a) * ((done + step) / seg)
                nxt_sample = transfer_at(p, z_next, zero_tol)
                nxt = resonances_at(nxt_sample)
                reason = None
                if nxt_sample.zero_count != zero_count or len(nxt) != kk:
                    reason = "zero_count changed (step crossed a sigma-zero)"
                else:
                    perm = match_spectra(samples[-1][1], nxt)
                    if isinstance(perm, Ambiguous):
                        reason = f"ambiguous matching (distance {perm.distance:.3e} >= half gap {perm.half_gap:.3e})"
                if reason is None:
                    break
                step *= 0.5
                if step < path.min_step:
                    raise StepCollapse(z_next, step, reason)
            if verify:
                _verify(p, z_next, nxt_sample, nxt.values)
            pos = tuple(perm[i] for i in positions[-1])
            samples.append((z_next, nxt, perm))
            positions.append(pos)
            tracks.append(nxt.values[list(pos)])
            done += step
            h = min(path.max_step, 2 * step)
    fam = BranchFamily(samples, tuple(range(kk)), np.array(tracks).reshape(len(tracks), kk), zero_count)
    fam._positions = positions
    return fam


def _loop_permutation(fam):
    # last sample sits at the base point again; read off where each label landed
    perm, _ = match_multisets(fam.end_values(), fam.start_values())
    return tuple(int(i) for i in perm)


def monodromy(p: ResonanceProblem, loop: PathSpec, start=None, verify=True):
    """Permutation of branch labels after one traversal of a closed loop.

    ``perm[i] = j`` means the branch labelled ``i`` at the base point returns
    as the value labelled ``j``.
    """
    if not loop.closed:
        raise ValueError("monodromy needs a closed loop")
    fam = trace_branches(p, loop, start=start, verify=verify)
    return _loop_permutation(fam)


def traverse(p: ResonanceProblem, loop: PathSpec, times: int, verify=False):
    """Trace ``loop`` ``times`` times in a row; return ``(start, end)`` label-ordered values."""
    fam = trace_branches(p, loop, verify=verify)
    start = fam.start_values()
    end = fam.end_values()
    for _ in range(times - 1):
        end = trace_branches(p, loop, start=end, verify=verify).end_values()
    return start, end


# -- branch point localization ----------------------------------------------


def _as_rect(region):
    if hasattr(region, "re_min"):
        return (region.re_min, region.re_max, region.im_min, region.im_max)
    re_min, re_max, im_min, im_max = (float(x) for x in region)
    return (re_min, re_max, im_min, im_max)


def _diam(rect):
    return math.hypot(rect[1] - rect[0], rect[3] - rect[2])


def _cell_monodromy(p, rect, rel_min_step):
    diam = _diam(rect)
    loop = PathSpec.rectangle(*rect, max_step=diam / 12, min_step=diam * rel_min_step)
    return monodromy(p, loop, verify=False)


def _split(rect, fx, fy):
    re_min, re_max, im_min, im_max = rect
    xm = re_min + fx * (re_max - re_min)
    ym = im_min + fy * (im_max - im_min)
    return [
        (re_min, xm, im_min, ym),
        (xm, re_max, im_min, ym),
        (xm, re_max, ym, im_max),
        (re_min, xm, ym, im_max),
    ]


_SPLITS = ((0.5137, 0.4921), (0.4379, 0.5623), (0.5811, 0.4262), (0.3907, 0.6093))


def _collision_gap(p, z, ell=2):
    """Squared gap of the closest pair of sigma values at ``z`` (holomorphic near a 2-cycle point)."""
    m, _ = transfer_matrix(p, z)
    s = eigenvalues(m)
    d = np.abs(s[:, None] - s[None, :])
    d[np.diag_indices_from(d)] = np.inf
    i, j = np.unravel_index(np.argmin(d), d.shape)
    return (s[i] - s[j]) ** 2


def refine_branch_point(p: ResonanceProblem, z, radius, iters=40):
    """Newton iteration on the squared collision gap, staying within ``radius`` of ``z``.

    Returns the refined location or ``None`` if the iteration leaves the disc
    or does not converge.
    """
    z0 = complex(z)
    zk = z0
    h = radius * 1e-4
    for _ in range(iters):
        g = _collision_gap(p, zk)
        dg = (_collision_gap(p, zk + h) - _collision_gap(p, zk - h)) / (2 * h)
        if dg == 0:
            return None
        step = g / dg
        zk = zk - step
        if abs(zk - z0) > radius:
            return None
        h = max(min(h, abs(step)), radius * 1e-9)
        if abs(step) < 1e-13 * (1 + abs(zk)):
            return zk
    return None


def locate_branch_points(
    p: ResonanceProblem,
    region,
    max_depth: int = 8,
    min_depth: int = 2,
    max_cells: int = 512,
    rel_min_step: float = 1e-9,
    refine: bool = True,
):
    """Quadtree search for branching points inside an axis-aligned rectangle.

    Every cell boundary is traced as a loop; cells with non-identity
    monodromy (and every cell above ``min_depth``, so that pairs of points
    whose monodromies cancel are separated) are subdivided until their
    diameter falls below ``2**-max_depth`` of the region's diameter.
    Subdivision lines are placed slightly off-centre and moved if a child
    boundary passes too close to a branching point.
    """
    root = _as_rect(region)
    root_diam = _diam(root)
    target = root_diam * 2.0**-max_depth
    found = []

    def children_of(rect, parent_perm):
        last_error = None
        for fx, fy in _SPLITS:
            kids = _split(rect, fx, fy)
            try:
                perms = [_cell_monodromy(p, kid, rel_min_step) for kid in kids]
            except StepCollapse as exc:
                last_error = exc
                continue
            # a non-trivial parent loop is a product of its children's loops
            if not is_identity(parent_perm) and all(map(is_identity, perms)):
                last_error = StepCollapse(complex(rect[0], rect[2]), 0.0, "children inconsistent with parent")
                continue
            return list(zip(kids, perms))
        raise StepCollapse(
            last_error.location if last_error else complex(rect[0], rect[2]),
            last_error.step if last_error else 0.0,
            f"no consistent subdivision of cell {rect}: {last_error.reason if last_error else ''}",
        )

    try:
        level = [(root, _cell_monodromy(p, root, rel_min_step))]
    except StepCollapse as exc:
        raise StepCollapse(exc.location, exc.step, f"region boundary {root}: {exc.reason}") from exc
    depth = 0
    while level:
        nxt = []
        for rect, perm in level:
            if depth >= min_depth and is_identity(perm):
                continue
            if _diam(rect) < target:
                if not is_identity(perm):
                    found.append((rect, perm))
                continue
            nxt.extend(children_of(rect, perm))
        depth += 1
        level = nxt
        if len(level) > max_cells:
            raise DepthExceeded([r for r, _ in level])

    points = []
    for rect, perm in found:
        centre = complex(0.5 * (rect[0] + rect[1]), 0.5 * (rect[2] + rect[3]))
        radius = 0.5 * _diam(rect)
        location, refined = centre, False
        lengths = sorted(len(c) for c in cycles(perm))
        if refine and lengths.count(2) == 1 and all(n == 1 for n in lengths if n != 2):
            z = refine_branch_point(p, centre, radius)
            if z is not None:
                location, refined = z, True
        points.append(
            BranchPoint(
                location=location,
                radius=radius,
                monodromy=perm,
                periods=tuple(lengths),
                base_point=complex(rect[0], rect[2]),
                refined=refined,
            )
        )
    return points


# -- divergence classification ----------------------------------------------


def _track_along(values_per_t):
    """Label-consistent ordering of eigenvalue lists by successive optimal assignment."""
    rows = [np.asarray(values_per_t[0])]
    for vals in values_per_t[1:]:
        perm, _ = match_multisets(rows[-1], vals)
        rows.append(np.asarray(vals)[perm])
    return np.array(rows)


def _holomorphic_zero(p, z0, rho_start, rho_min, npts=64, degree=16):
    """Fit the smallest-modulus sigma on a circle by a polynomial in ``z - z0``.

    Returns ``(order, residual)``: the vanishing order at ``z0`` (``None``
    if the fitted value at ``z0`` is not negligible) and the relative
    residual of the fit.  Shrinks the circle until the smallest sigma is
    well separated from the rest.
    """
    rho = rho_start
    while rho >= rho_min:
        pts = z0 + rho * np.exp(2j * np.pi * np.arange(npts) / npts)
        vals, separated = [], True
        for z in pts:
            s = eigenvalues(transfer_matrix(p, z)[0])
            mags = np.sort(np.abs(s))
            if mags.size > 1 and mags[1] < 10 * mags[0]:
                separated = False
                break
            vals.append(s[np.argmin(np.abs(s))])
        if separated:
            break
        rho *= 0.25
    else:
        return None, math.inf
    vals = np.array(vals)
    w = (pts - z0) / rho
    vander = np.vander(w, degree + 1, increasing=True)
    coef, *_ = np.linalg.lstsq(vander, vals, rcond=None)
    scale = float(np.max(np.abs(vals)))
    residual = float(np.max(np.abs(vander @ coef - vals))) / scale
    # the constant term must vanish, without it the fit must stay accurate
    no_const = vander[:, 1:]
    coef1, *_ = np.linalg.lstsq(no_const, vals, rcond=None)
    residual0 = float(np.max(np.abs(no_const @ coef1 - vals))) / scale
    if residual0 >= 1e-6:
        return None, residual0
    significant = np.nonzero(np.abs(coef1) > 1e-6 * np.max(np.abs(coef1)))[0]
    return int(significant[0]) + 1, max(residual, residual0)


def branching_at(p: ResonanceProblem, z0, t0):
    """Monodromy on two small circles around ``z0``; non-identity on both means branching."""
    spectrum_guard(p.spectrum, complex(z0), scale=max(1.0, float(np.max(np.abs(p.spectrum)))))
    perms = []
    for rho in (t0 / 8, t0 / 64):
        try:
            perms.append(monodromy(p, PathSpec.circle(z0, rho), verify=False))
        except StepCollapse:
            # a loop through a sigma-zero or collision this close counts as unresolved
            perms.append(None)
    nontrivial = [q for q in perms if q is not None and not is_identity(q)]
    return nontrivial[-1] if len(nontrivial) == len(perms) else None


def classify_approach(
    p: ResonanceProblem,
    z0,
    direction=1.0,
    decades: int = 6,
    t0: float | None = None,
    branching=None,
) -> DivergenceReport:
    """Classify the behaviour of every branch as ``z -> z0`` along ``z0 + t * direction``.

    ``branching`` may carry a precomputed result of :func:`branching_at`
    (``False`` for none), which :func:`resatlas.scan.absorbing_sweep` reuses
    across directions.
    """
    z0 = complex(z0)
    d = complex(direction)
    if d == 0:
        raise ValueError("direction must be nonzero")
    d /= abs(d)
    dist0 = float(np.min(np.abs(p.spectrum - z0)))
    spectrum_guard(p.spectrum, z0, scale=max(1.0, float(np.max(np.abs(p.spectrum)))))
    if t0 is None:
        t0 = min(0.5 * dist0, 1.0)
    n_samples = int(round(3.32 * decades)) + 1
    ts = t0 * 2.0 ** -np.arange(n_samples)

    if branching is None:
        branching = branching_at(p, z0, t0)
    sig_rows = [eigenvalues(transfer_matrix(p, z0 + t * d)[0]) for t in ts]
    sig = _track_along(sig_rows)
    with np.errstate(divide="ignore"):
        r = -1.0 / sig
    samples = {"t": ts, "z": z0 + ts * d, "r": r}

    if branching:
        return DivergenceReport(z0, d, "branching", None, 0.0, np.zeros(sig.shape[1]), samples, branching)

    tail = slice(n_samples // 2, None)
    x = np.log(ts[tail])
    slopes, quality = [], 0.0
    for jcol in range(sig.shape[1]):
        y = np.log(np.abs(r[tail, jcol]))
        if not np.all(np.isfinite(y)):
            slopes.append(-math.inf)
            quality = math.inf
            continue
        coef = np.polyfit(x, y, 1)
        quality = max(quality, float(np.max(np.abs(np.polyval(coef, x) - y))))
        slopes.append(float(coef[0]))
    slopes = np.array(slopes)
    if quality > 0.05:
        raise InsufficientDecades(
            f"log-log fit residual {quality:.3f} > 0.05 after {decades} decades at z0={z0}"
        )

    diverging = np.nonzero(slopes <= -0.05)[0]
    if diverging.size == 0:
        return DivergenceReport(z0, d, "regular", None, quality, slopes, samples)

    notes = []
    orders = []
    for jcol in diverging:
        m = int(round(-slopes[jcol]))
        if m < 1 or abs(slopes[jcol] + m) >= 0.05:
            notes.append(f"branch {jcol}: non-integer divergence slope {slopes[jcol]:.4f}")
        else:
            orders.append(m)
    if len(orders) == diverging.size:
        zero_order, resid = _holomorphic_zero(p, z0, t0 / 8, t0 * 2.0**-24)
        if zero_order is not None and zero_order == max(orders):
            if diverging.size > 1:
                notes.append(f"{diverging.size} diverging branches; zero order checked on the smallest sigma")
            return DivergenceReport(z0, d, "pole_like", zero_order, quality, slopes, samples, notes=notes)
        notes.append(f"no holomorphic zero of sigma of order {max(orders)} at z0 (fit residual {resid:.2e})")
    return DivergenceReport(z0, d, "suspected_absorbing", None, quality, slopes, samples, notes=notes)
