"""
Command-line interface.

Exit codes: 0 success, 1 invariant violation or suspected absorbing finding,
2 bad input or usage.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys

import numpy as np

from . import __version__
from .continuation import PathSpec, classify_approach, locate_branch_points, trace_branches
from .errors import CouplingCollision, ResatlasError
from .plot import plot_scan_csv
from .problem import ENSEMBLE_KINDS, EnsembleSpec, SplitMix64, build_ensemble, load_problem, require_valid, serialize
from .resonance import (
    consistency_scale,
    coupling_consistency,
    herglotz_defect,
    herglotz_sum,
    resonances_at,
    shift_identity_residual,
    shifted_transfer_at,
    transfer_at,
    weyl_report,
)
from .scan import Region, absorbing_sweep, default_workers, grid_scan

EXIT_OK, EXIT_VIOLATION, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def parse_complex(text):
    """Parse ``a+bi`` (``j`` is accepted too)."""
    t = text.strip().replace(" ", "").replace("I", "i").replace("i", "j")
    if t in ("j", "+j", "-j"):
        t = t.replace("j", "1j")
    t = t.replace("+j", "+1j").replace("-j", "-1j")
    try:
        return complex(t)
    except ValueError:
        raise UsageError(f"bad complex literal {text!r}; expected a+bi") from None


def _positive(text):
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError(f"must be positive, got {text}")
    return v


def _grid(text):
    try:
        nx, ny = (int(x) for x in text.lower().split("x"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"grid must look like 64x64, got {text!r}") from None
    if nx < 2 or ny < 2:
        raise argparse.ArgumentTypeError("grid dimensions must be >= 2")
    return nx, ny


def _region(text):
    try:
        return Region.parse(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


class Outputs:
    """Check output paths up front; remove partial files if the command fails."""

    def __init__(self, *paths):
        self.paths = [p for p in paths if p]
        for path in self.paths:
            parent = os.path.dirname(os.path.abspath(path))
            if not os.path.isdir(parent) or not os.access(parent, os.W_OK):
                raise UsageError(f"output path not writable: {path}")
        self.written = []

    def write(self, path, text):
        self.written.append(path)
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        if exc_type is not None:
            for path in self.written:
                try:
                    os.remove(path)
                except OSError:
                    pass
        return False


def _load(path):
    try:
        with open(path, "rb") as fh:
            data = fh.read()
    except OSError as exc:
        raise UsageError(f"cannot read problem file {path}: {exc}") from None
    return require_valid(load_problem(data))


def _threads(args):
    return args.threads if args.threads else default_workers()


# -- subcommands -------------------------------------------------------------


def cmd_gen(args, out):
    k = args.k if args.k is not None else min(3, args.n)
    p = build_ensemble(EnsembleSpec(args.ensemble, args.n, k, args.seed, args.scale))
    text = serialize(p).decode()
    with Outputs(args.out) as o:
        if args.out:
            o.write(args.out, text)
        else:
            out.write(text)
    return EXIT_OK


def _verify_samples(p, samples, seed):
    rng = SplitMix64(seed)
    lam = p.spectrum
    lo, hi = float(lam[0]) - 1.0, float(lam[-1]) + 1.0
    for _ in range(samples):
        z = complex(rng.uniform(lo, hi), rng.uniform(0.05, 1.0) * max(1.0, hi - lo) / 2)
        s = rng.uniform(-1.0, 1.0)
        yield z, s


def cmd_verify(args, out):
    p = _load(args.problem)
    worst = {name: 0.0 for name in ("shift_identity", "trace_identity", "weyl", "coupling_eig",
                                    "coupling_sing", "herglotz")}
    tols = {
        "shift_identity": args.tol,
        "trace_identity": args.tol,
        "weyl": 1e-12,
        "coupling_eig": 1e-7,
        "coupling_sing": 1e-7,
        "herglotz": 1e-12,
    }
    for z, s in _verify_samples(p, args.samples, args.seed):
        for _ in range(8):
            try:
                shift = shift_identity_residual(p, z, s)
                rep = herglotz_sum(p, z, s)
                break
            except CouplingCollision:
                s += 0.37
        ms = shifted_transfer_at(p, s, z)
        worst["shift_identity"] = max(worst["shift_identity"], shift / (1 + ms.norm))
        worst["trace_identity"] = max(worst["trace_identity"], rep.residual / (1 + rep.trace_norm_bound))
        sample = transfer_at(p, z)
        for q in (0.5, 1.0, 2.0):
            w = weyl_report(sample.m, q)
            worst["weyl"] = max(worst["weyl"], -w.min_slack / max(1.0, float(w.prefix_s_sums[-1])))
        for r in resonances_at(sample).values:
            eig_d, sing_min = coupling_consistency(p, z, r, sample)
            worst["coupling_eig"] = max(worst["coupling_eig"], eig_d / consistency_scale(p, z, r))
            worst["coupling_sing"] = max(worst["coupling_sing"], sing_min)
        d = herglotz_defect(p, z)
        worst["herglotz"] = max(worst["herglotz"], -d / sample.bound)
    failed = False
    out.write(f"# verify problem={args.problem} samples={args.samples} seed={args.seed}\n")
    out.write(f"{'check':<16} {'max_residual':>14} {'tolerance':>10}  status\n")
    for name, value in worst.items():
        ok = value <= tols[name]
        failed |= not ok
        out.write(f"{name:<16} {value:14.3e} {tols[name]:10.1e}  {'ok' if ok else 'FAIL'}\n")
    return EXIT_VIOLATION if failed else EXIT_OK


def cmd_scan(args, out):
    p = _load(args.problem)
    region = args.region if args.margin is None else Region(
        args.region.re_min, args.region.re_max, args.region.im_min, args.region.im_max, args.margin)
    json_path = args.json or (os.path.splitext(args.out)[0] + ".json" if args.out else None)
    with Outputs(args.out, json_path) as o:
        nx, ny = args.grid
        report = grid_scan(p, region, nx, ny, s=args.shift, workers=_threads(args))
        meta = {"problem": os.path.basename(args.problem), "requested_shift": args.shift}
        if args.out:
            o.write(args.out, report.to_csv())
            o.write(json_path, report.to_json(meta))
        else:
            out.write(report.to_csv())
    return EXIT_OK


def cmd_trace(args, out):
    p = _load(args.problem)
    pts = [parse_complex(x) for x in args.path.split(";")]
    length = sum(abs(b - a) for a, b in zip(pts, pts[1:] + (pts[:1] if args.closed else [])))
    max_step = args.max_step or length / 64
    min_step = args.min_step or max_step * 1e-7
    try:
        path = PathSpec(tuple(pts), max_step, min_step, closed=args.closed)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    fam = trace_branches(p, path)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    kk = fam.tracks.shape[1]
    w.writerow(["step", "re(z)", "im(z)"] + [f"{part}_r{j}" for j in range(kk) for part in ("re", "im")])
    for i, (z, _, _) in enumerate(fam.samples):
        row = [i, repr(float(z.real)), repr(float(z.imag))]
        for v in fam.tracks[i]:
            row += [repr(float(v.real)), repr(float(v.imag))]
        w.writerow(row)
    with Outputs(args.out) as o:
        if args.out:
            o.write(args.out, buf.getvalue())
        else:
            out.write(buf.getvalue())
    return EXIT_OK


def _cj(z):
    return [float(np.real(z)), float(np.imag(z))]


def cmd_branch_points(args, out):
    p = _load(args.problem)
    r = args.region
    pts = locate_branch_points(p, (r.re_min, r.re_max, r.im_min, r.im_max), max_depth=args.max_depth)
    doc = {
        "schema": "resatlas-scan/1",
        "kind": "branch_points",
        "region": [r.re_min, r.re_max, r.im_min, r.im_max],
        "max_depth": args.max_depth,
        "branch_points": [
            {
                "location": _cj(b.location),
                "radius": b.radius,
                "monodromy": list(b.monodromy),
                "periods": list(b.periods),
                "refined": b.refined,
            }
            for b in pts
        ],
    }
    text = json.dumps(doc, indent=1) + "\n"
    with Outputs(args.out) as o:
        if args.out:
            o.write(args.out, text)
        else:
            out.write(text)
    return EXIT_OK


def cmd_classify(args, out):
    p = _load(args.problem)
    rep = classify_approach(p, parse_complex(args.z0), parse_complex(args.direction), args.decades)
    doc = {
        "schema": "resatlas-scan/1",
        "kind": "classify",
        "target": _cj(rep.target),
        "direction": _cj(rep.direction),
        "classification": rep.classification,
        "label": rep.label,
        "order": rep.order,
        "fit_quality": rep.fit_quality,
        "slopes": [float(x) for x in rep.slopes],
        "monodromy": list(rep.monodromy) if rep.monodromy else None,
        "notes": rep.notes,
        "decades": args.decades,
    }
    text = json.dumps(doc, indent=1, allow_nan=True) + "\n"
    with Outputs(args.out) as o:
        if args.out:
            o.write(args.out, text)
        else:
            out.write(text)
    if rep.classification == "suspected_absorbing":
        sys.stderr.write(f"FINDING: suspected absorbing point at {args.z0}\n")
        return EXIT_VIOLATION
    return EXIT_OK


def cmd_sweep(args, out):
    p = _load(args.problem)
    targets = [parse_complex(x) for x in args.targets.split(";")]
    try:
        summary = absorbing_sweep(p, args.region, targets, args.directions, args.decades, workers=_threads(args))
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    text = summary.to_json({"targets": [_cj(t) for t in targets], "decades": args.decades})
    with Outputs(args.out) as o:
        if args.out:
            o.write(args.out, text)
        else:
            out.write(text)
    if summary.findings:
        sys.stderr.write(f"FINDING: {len(summary.findings)} suspected absorbing approaches\n")
        return EXIT_VIOLATION
    return EXIT_OK


def cmd_plot(args, out):
    try:
        with open(args.csv, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise UsageError(f"cannot read {args.csv}: {exc}") from None
    spectrum = _load(args.problem).spectrum if args.problem else ()
    try:
        svg = plot_scan_csv(text, args.quantity, spectrum=spectrum, log=not args.linear)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    with Outputs(args.out) as o:
        o.write(args.out, svg)
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="resatlas", description="Coupling resonance functions of matrix pairs.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--threads", type=int, default=None,
                        help="worker threads (default: $RESATLAS_THREADS or CPU count)")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="write a seeded ensemble problem file")
    g.add_argument("--ensemble", choices=ENSEMBLE_KINDS, required=True)
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--k", type=int)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--scale", type=_positive, default=1.0)
    g.add_argument("--out")
    g.set_defaults(func=cmd_gen)

    v = sub.add_parser("verify", help="random-sample identity suite")
    v.add_argument("--problem", required=True)
    v.add_argument("--samples", type=int, default=32)
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--tol", type=_positive, default=1e-8)
    v.set_defaults(func=cmd_verify)

    s = sub.add_parser("scan", help="grid scan to CSV + JSON summary")
    s.add_argument("--problem", required=True)
    s.add_argument("--region", type=_region, required=True, help="re_min,re_max,im_min,im_max")
    s.add_argument("--grid", type=_grid, default=(64, 64))
    s.add_argument("--shift", type=float, default=0.0)
    s.add_argument("--margin", type=_positive)
    s.add_argument("--out")
    s.add_argument("--json")
    s.set_defaults(func=cmd_scan)

    t = sub.add_parser("trace", help="continue branches along a path")
    t.add_argument("--problem", required=True)
    t.add_argument("--path", required=True, help="waypoints 'a+bi;c+di;...'")
    t.add_argument("--closed", action="store_true")
    t.add_argument("--max-step", type=_positive)
    t.add_argument("--min-step", type=_positive)
    t.add_argument("--out")
    t.set_defaults(func=cmd_trace)

    b = sub.add_parser("branch-points", help="quadtree monodromy search")
    b.add_argument("--problem", required=True)
    b.add_argument("--region", type=_region, required=True)
    b.add_argument("--max-depth", type=int, default=8)
    b.add_argument("--out")
    b.set_defaults(func=cmd_branch_points)

    c = sub.add_parser("classify", help="classify an approach ray")
    c.add_argument("--problem", required=True)
    c.add_argument("--z0", required=True)
    c.add_argument("--direction", default="1")
    c.add_argument("--decades", type=int, default=6)
    c.add_argument("--out")
    c.set_defaults(func=cmd_classify)

    w = sub.add_parser("sweep", help="absorbing-point sweep over targets")
    w.add_argument("--problem", required=True)
    w.add_argument("--region", type=_region, required=True)
    w.add_argument("--targets", required=True, help="'a+bi;c+di;...'")
    w.add_argument("--directions", type=int, default=8)
    w.add_argument("--decades", type=int, default=6)
    w.add_argument("--out")
    w.set_defaults(func=cmd_sweep)

    pl = sub.add_parser("plot", help="render a scan CSV column as an SVG heatmap")
    pl.add_argument("--csv", required=True)
    pl.add_argument("--quantity", default="abs_f")
    pl.add_argument("--problem", help="problem file for spectrum markers")
    pl.add_argument("--linear", action="store_true", help="linear instead of log10 colour scale")
    pl.add_argument("--out", required=True)
    pl.set_defaults(func=cmd_plot)
    return parser


# flags whose values may start with "-" (negative literals)
_SIGNED_FLAGS = ("--region", "--z0", "--direction", "--path", "--targets", "--shift")


def _glue_signed(argv):
    out, i = [], 0
    while i < len(argv):
        if argv[i] in _SIGNED_FLAGS and i + 1 < len(argv):
            out.append(f"{argv[i]}={argv[i + 1]}")
            i += 2
        else:
            out.append(argv[i])
            i += 1
    return out


def run_cli(argv=None, out=None):
    out = out if out is not None else sys.stdout
    parser = build_parser()
    argv = _glue_signed(list(sys.argv[1:] if argv is None else argv))
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    if args.threads is not None and args.threads < 1:
        sys.stderr.write("resatlas: --threads must be >= 1\n")
        return EXIT_USAGE
    try:
        return args.func(args, out)
    except (UsageError, ValueError) as exc:
        # parse, schema, Hermiticity and spec errors all derive from ValueError
        sys.stderr.write(f"resatlas {args.command}: {exc}\n")
        return EXIT_USAGE
    except ResatlasError as exc:
        sys.stderr.write(f"resatlas {args.command}: {exc}\n")
        return EXIT_VIOLATION


def main():
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
