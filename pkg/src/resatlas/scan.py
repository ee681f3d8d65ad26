"""
Grid scans of the transfer family over a rectangle of the complex plane and
sweeps of approach rays looking for absorbing points.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .continuation import branching_at, classify_approach
from .errors import CouplingCollision, ResatlasError
from .numerics import circle_points, mean_value_defect
from .problem import ResonanceProblem
from .resonance import f_value, herglotz_sum, transfer_at

SCHEMA = "resatlas-scan/1"
CSV_COLUMNS = (
    "re(z)", "im(z)", "sigma_min", "sigma_max", "abs_f", "re_f", "im_f",
    "zero_count", "condition", "skipped",
)
SHIFT_RETRY = 0.37
ZERO_REL = 1e-6
ANNULUS_FACTOR = 3.0


def default_workers():
    env = os.environ.get("RESATLAS_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def _map(func, items, workers):
    items = list(items)
    if workers is None or workers <= 1 or len(items) < 2:
        return [func(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, items))


@dataclass(frozen=True)
class Region:
    re_min: float
    re_max: float
    im_min: float
    im_max: float
    margin: float | None = None

    def __post_init__(self):
        if not (self.re_min < self.re_max and self.im_min < self.im_max):
            raise ValueError(f"degenerate region {self}")
        if self.margin is not None and not self.margin > 0:
            raise ValueError("exclusion margin must be positive")

    @classmethod
    def parse(cls, text, margin=None):
        """``"re_min,re_max,im_min,im_max"``."""
        parts = [float(x) for x in text.split(",")]
        if len(parts) != 4:
            raise ValueError(f"region needs four comma-separated numbers, got {text!r}")
        return cls(*parts, margin=margin)

    def contains(self, z):
        return self.re_min <= z.real <= self.re_max and self.im_min <= z.imag <= self.im_max

    def exclusion(self, p: ResonanceProblem):
        if self.margin is not None:
            return self.margin
        spec = p.spectrum
        diam = float(spec[-1] - spec[0])
        return 1e-3 * (diam if diam > 0 else max(1.0, abs(float(spec[0]))))

    def grid(self, nx, ny):
        return np.linspace(self.re_min, self.re_max, nx), np.linspace(self.im_min, self.im_max, ny)


@dataclass(frozen=True)
class ScanRecord:
    z: complex
    sigma_min: float
    sigma_max: float
    f: complex
    zero_count: int
    condition: float
    skipped: bool
    reason: str = ""

    @property
    def abs_f(self):
        return abs(self.f)


@dataclass
class ScanReport:
    nx: int
    ny: int
    region: Region
    margin: float
    shift: float
    records: list
    summary: dict = field(default_factory=dict)
    zero_candidates: list = field(default_factory=list)

    def active(self):
        return [r for r in self.records if not r.skipped]

    def grid_values(self, name):
        """Quantity on the grid as an ``(ny, nx)`` array, NaN where skipped."""
        vals = [math.nan if r.skipped else getattr(r, name) for r in self.records]
        return np.array(vals, dtype=float if name != "f" else complex).reshape(self.ny, self.nx)

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in self.records:
            if r.skipped:
                w.writerow([_g(r.z.real), _g(r.z.imag)] + ["nan"] * 7 + [1])
            else:
                w.writerow([
                    _g(r.z.real), _g(r.z.imag), _g(r.sigma_min), _g(r.sigma_max),
                    _g(abs(r.f)), _g(r.f.real), _g(r.f.imag), r.zero_count, _g(r.condition), 0,
                ])
        return buf.getvalue()

    def to_json(self, extra=None):
        reasons = {}
        for r in self.records:
            if r.skipped:
                reasons[r.reason] = reasons.get(r.reason, 0) + 1
        doc = {
            "schema": SCHEMA,
            "kind": "scan",
            "grid": [self.nx, self.ny],
            "region": [self.region.re_min, self.region.re_max, self.region.im_min, self.region.im_max],
            "exclusion_margin": self.margin,
            "shift": self.shift,
            "records": len(self.records),
            "skipped": reasons,
            "summary": self.summary,
            "zero_candidates": self.zero_candidates,
        }
        if extra:
            doc.update(extra)
        return json.dumps(doc, indent=1, allow_nan=True) + "\n"


def _g(x):
    return format(float(x), ".17g")


def _cjson(z):
    return [float(z.real), float(z.imag)]


def _node(p, z, s, margin):
    dist = float(np.min(np.abs(p.spectrum - z)))
    if dist < margin:
        return ScanRecord(z, math.nan, math.nan, complex(math.nan), 0, math.nan, True, "inside exclusion margin")
    try:
        sample = transfer_at(p, z)
        rep = herglotz_sum(p, z, s)
    except CouplingCollision:
        raise
    except ResatlasError as exc:
        return ScanRecord(z, math.nan, math.nan, complex(math.nan), 0, math.nan, True, type(exc).__name__)
    mags = np.abs(sample.eigs)
    return ScanRecord(
        z=z,
        sigma_min=float(mags.min()),
        sigma_max=float(mags.max()),
        f=rep.f_trace,
        zero_count=sample.zero_count,
        condition=sample.condition,
        skipped=False,
    )


def grid_scan(
    p: ResonanceProblem,
    region: Region,
    nx: int,
    ny: int,
    s: float = 0.0,
    workers: int | None = 1,
    refine_zeros: bool = True,
) -> ScanReport:
    """Evaluate ``M(z)`` and ``f(z) = sum_j 1/(s - r_j(z))`` on an ``nx`` by ``ny`` grid.

    Records are row-major (imaginary part outer, real part inner).  If ``s``
    collides with a resonance value at some node, the whole scan is redone
    with ``s + 0.37``.
    """
    if nx < 2 or ny < 2:
        raise ValueError("grid needs nx, ny >= 2")
    margin = region.exclusion(p)
    xs, ys = region.grid(nx, ny)
    nodes = [complex(x, y) for y in ys for x in xs]
    for _ in range(8):
        try:
            records = _map(lambda z: _node(p, z, s, margin), nodes, workers)
            break
        except CouplingCollision:
            s = s + SHIFT_RETRY
    else:
        raise ResatlasError("could not find a shift free of coupling collisions")
    report = ScanReport(nx, ny, region, margin, float(s), records)
    report.summary = _summarize(report)
    report.zero_candidates = _zero_candidates(p, report, refine_zeros)
    return report


def _summarize(report):
    active = report.active()
    out = {}
    for name, get in (
        ("sigma_min", lambda r: r.sigma_min),
        ("sigma_max", lambda r: r.sigma_max),
        ("abs_f", lambda r: abs(r.f)),
        ("condition", lambda r: r.condition),
    ):
        vals = [get(r) for r in active]
        out[name] = {"min": min(vals), "max": max(vals)} if vals else {}
    return out


def _newton_zero(p, z, s, h, iters=50):
    for _ in range(iters):
        fz = f_value(p, z, s)
        df = (f_value(p, z + h, s) - f_value(p, z - h, s)) / (2 * h)
        if df == 0:
            return z
        step = fz / df
        z = z - step
        h = max(min(h, abs(step)), 1e-9 * h)
        if abs(step) < 1e-14 * (1 + abs(z)):
            break
    return z


def isolation_check(p: ResonanceProblem, z, radius, s=0.0, npts=64, rings=5):
    """Minimum of ``|f|`` on rings filling the annulus ``(radius, 3 radius)`` around ``z``.

    Returns ``(ring_min, centre_value)``; the zero is isolated when
    ``ring_min > 10 * centre_value``.
    """
    ring_min = math.inf
    for rho in np.linspace(radius, ANNULUS_FACTOR * radius, rings):
        for w in circle_points(z, rho, npts):
            ring_min = min(ring_min, abs(f_value(p, w, s)))
    return ring_min, abs(f_value(p, z, s))


def _zero_candidates(p, report, refine):
    mags = np.abs(report.grid_values("f"))
    finite = mags[np.isfinite(mags)]
    if finite.size == 0:
        return []
    threshold = ZERO_REL * float(np.median(finite))
    dx = (report.region.re_max - report.region.re_min) / (report.nx - 1)
    dy = (report.region.im_max - report.region.im_min) / (report.ny - 1)
    spacing = min(dx, dy)
    out = []
    for iy in range(report.ny):
        for ix in range(report.nx):
            v = mags[iy, ix]
            if not (np.isfinite(v) and v < threshold):
                continue
            nb = mags[max(iy - 1, 0):iy + 2, max(ix - 1, 0):ix + 2]
            if np.nanmin(nb) < v:
                continue
            z = report.records[iy * report.nx + ix].z
            cand = {"node": _cjson(z), "abs_f_node": float(v)}
            if refine:
                dist = float(np.min(np.abs(p.spectrum - z)))
                zr = _newton_zero(p, z, report.shift, 1e-4 * spacing)
                radius = min(0.5 * spacing, dist / (2 * ANNULUS_FACTOR))
                ring_min, centre = isolation_check(p, zr, radius, report.shift)
                cand.update(
                    refined=_cjson(zr),
                    abs_f_refined=centre,
                    isolation_radius=radius,
                    annulus_min=ring_min,
                    isolated=bool(ring_min > 10 * centre),
                )
            out.append(cand)
    return out


def mean_value_residual(p: ResonanceProblem, z0, rho, s=0.0, npts=64):
    """Relative mean-value defect of ``f`` on a circle: ``|f(z0) - avg| / (1 + max |f|)``."""
    defect, _, circle_max = mean_value_defect(lambda z: f_value(p, z, s), z0, rho, npts)
    return defect / (1.0 + circle_max)


# -- absorbing-point sweeps --------------------------------------------------


@dataclass
class SweepSummary:
    counts: dict
    findings: list
    errors: list
    reports: list

    @property
    def suspected(self):
        return self.counts.get("suspected_absorbing", 0)

    def to_json(self, extra=None):
        doc = {
            "schema": SCHEMA,
            "kind": "absorbing_sweep",
            "counts": self.counts,
            "findings": self.findings,
            "errors": self.errors,
        }
        if extra:
            doc.update(extra)
        return json.dumps(doc, indent=1, allow_nan=True) + "\n"


def finding_record(rep):
    """Full sample data of a suspected absorbing approach, for manual inspection."""
    return {
        "target": _cjson(rep.target),
        "direction": _cjson(rep.direction),
        "classification": rep.classification,
        "slopes": [float(x) for x in rep.slopes],
        "fit_quality": rep.fit_quality,
        "notes": list(rep.notes),
        "t": [float(t) for t in rep.samples["t"]],
        "r": [[_cjson(v) for v in row] for row in rep.samples["r"]],
    }


def absorbing_sweep(
    p: ResonanceProblem,
    region: Region,
    targets,
    directions_per_target: int = 8,
    decades: int = 6,
    workers: int | None = 1,
) -> SweepSummary:
    """Classify approach rays into every target, equally spaced in direction.

    Per-ray errors are collected, never raised.  Any ``suspected_absorbing``
    ray becomes a finding carrying its full sample data.
    """
    targets = [complex(t) for t in targets]
    for t in targets:
        if not region.contains(t):
            raise ValueError(f"target {t} outside region")
    dirs = np.exp(2j * np.pi * np.arange(directions_per_target) / directions_per_target)

    def per_target(z0):
        out = []
        try:
            t0 = min(0.5 * float(np.min(np.abs(p.spectrum - z0))), 1.0)
            branching = branching_at(p, z0, t0) or False
        except ResatlasError as exc:
            return [(z0, complex(d), exc) for d in dirs]
        for d in dirs:
            try:
                out.append(classify_approach(p, z0, d, decades, branching=branching))
            except ResatlasError as exc:
                out.append((z0, complex(d), exc))
        return out

    counts = {}
    findings, errors, reports = [], [], []
    for batch in _map(per_target, targets, workers):
        for item in batch:
            if isinstance(item, tuple):
                z0, d, exc = item
                errors.append({"target": _cjson(z0), "direction": _cjson(d), "error": type(exc).__name__,
                               "message": str(exc)})
                continue
            reports.append(item)
            counts[item.label] = counts.get(item.label, 0) + 1
            if item.classification == "suspected_absorbing":
                findings.append(finding_record(item))
    return SweepSummary(dict(sorted(counts.items())), findings, errors, reports)
