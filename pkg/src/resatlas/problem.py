"""
Self-adjoint pairs ``(H0, V = F* J F)``: construction, validation, seeded
ensembles and the JSON problem-file format.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import BadSpec, DimensionMismatch, NotHermitian, ParseError, SchemaError
from .numerics import HERMITIAN_TOL, as_matrix, hermitian_defect

ENSEMBLE_KINDS = ("diagonal", "jacobi", "dense-gaussian", "rank-k-perturbation")
_FIELDS = ("n", "k", "h0", "f", "j")


@dataclass(frozen=True, eq=False)
class ResonanceProblem:
    """A pair ``H0``, ``V = F* J F`` with ``H0`` (n x n), ``F`` (k x n), ``J`` (k x k).

    ``h0`` may be a real 1-d array, shorthand for a diagonal matrix.
    """

    n: int
    k: int
    h0: np.ndarray
    f: np.ndarray
    j: np.ndarray

    @classmethod
    def from_arrays(cls, h0, f, j):
        h0 = np.asarray(h0)
        if h0.ndim == 1:
            if np.iscomplexobj(h0) and np.any(h0.imag != 0):
                raise BadSpec("diagonal h0 must be real")
            h0 = np.asarray(h0.real if np.iscomplexobj(h0) else h0, dtype=float)
        else:
            h0 = as_matrix(h0, "h0")
        f = as_matrix(f, "f")
        j = as_matrix(j, "j")
        return cls(n=h0.shape[0], k=f.shape[0], h0=h0, f=f, j=j)

    @classmethod
    def rank_one(cls, h0, v, coupling=1.0):
        """``V = coupling * <v, .> v``."""
        v = np.asarray(v, dtype=complex).reshape(1, -1)
        return cls.from_arrays(h0, v, [[coupling]])

    @property
    def diagonal(self):
        return self.h0.ndim == 1

    @cached_property
    def h0_matrix(self):
        if self.diagonal:
            return np.diag(self.h0.astype(complex))
        return self.h0

    @cached_property
    def v(self):
        return self.f.conj().T @ self.j @ self.f

    @cached_property
    def spectrum(self):
        """Ascending eigenvalues of ``H0``."""
        if self.diagonal:
            return np.sort(self.h0.astype(float))
        h = self.h0
        return np.linalg.eigvalsh(0.5 * (h + h.conj().T))

    @cached_property
    def scale(self):
        """``max(1, ||H0||, ||V||)``, the natural size of the pair."""
        nv = np.linalg.norm(self.v, 2) if self.v.size else 0.0
        return float(max(1.0, np.max(np.abs(self.spectrum)), nv))

    @cached_property
    def factor_norm(self):
        """``||F||^2 ||J||``."""
        return float(np.linalg.norm(self.f, 2) ** 2 * np.linalg.norm(self.j, 2))

    def is_real(self):
        return not (
            np.iscomplexobj(self.h0) and np.any(self.h0.imag != 0)
            or np.any(self.f.imag != 0)
            or np.any(self.j.imag != 0)
        )

    def h_s(self, s):
        """``H0 + s V``."""
        return self.h0_matrix + s * self.v

    def __eq__(self, other):
        if not isinstance(other, ResonanceProblem):
            return NotImplemented
        return (
            self.n == other.n
            and self.k == other.k
            and self.h0.ndim == other.h0.ndim
            and np.array_equal(self.h0, other.h0)
            and np.array_equal(self.f, other.f)
            and np.array_equal(self.j, other.j)
        )

    def __hash__(self):
        return hash((self.n, self.k, self.h0.tobytes(), self.f.tobytes(), self.j.tobytes()))


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    defect: float
    tolerance: float


@dataclass
class ValidationReport:
    checks: list = field(default_factory=list)

    @property
    def ok(self):
        return all(c.passed for c in self.checks)

    def failures(self):
        return [c for c in self.checks if not c.passed]

    def __str__(self):
        lines = []
        for c in self.checks:
            flag = "pass" if c.passed else "FAIL"
            lines.append(f"{flag}  {c.name:<16} defect={c.defect:.3e} tol={c.tolerance:.3e}")
        return "\n".join(lines)


def validate(p: ResonanceProblem) -> ValidationReport:
    """Check every structural invariant of ``p`` and report measured defects."""
    h0 = p.h0
    if h0.ndim == 1:
        if h0.shape[0] != p.n:
            raise DimensionMismatch(f"h0 has {h0.shape[0]} entries, n={p.n}")
    elif h0.shape != (p.n, p.n):
        raise DimensionMismatch(f"h0 has shape {h0.shape}, expected ({p.n}, {p.n})")
    if p.f.shape != (p.k, p.n):
        raise DimensionMismatch(f"f has shape {p.f.shape}, expected ({p.k}, {p.n})")
    if p.j.shape != (p.k, p.k):
        raise DimensionMismatch(f"j has shape {p.j.shape}, expected ({p.k}, {p.k})")

    report = ValidationReport()
    report.checks.append(Check("dimensions", p.n >= 1 and p.k >= 1, 0.0, 0.0))
    finite = all(np.all(np.isfinite(a)) for a in (h0, p.f, p.j))
    report.checks.append(Check("finite", bool(finite), 0.0 if finite else math.inf, 0.0))
    if not finite:
        return report
    for name, mat in (("hermitian(h0)", p.h0_matrix), ("hermitian(j)", p.j)):
        defect, norm = hermitian_defect(mat)
        tol = HERMITIAN_TOL * norm
        report.checks.append(Check(name, defect <= tol, defect, tol))
    defect, norm = hermitian_defect(p.v)
    tol = HERMITIAN_TOL * norm
    report.checks.append(Check("hermitian(V)", defect <= tol, defect, tol))
    return report


def require_valid(p: ResonanceProblem) -> ResonanceProblem:
    """Return ``p`` or raise the error matching its first failed check."""
    report = validate(p)
    for c in report.failures():
        if c.name.startswith("hermitian"):
            raise NotHermitian(c.name[len("hermitian("):-1], c.defect, c.tolerance)
        raise BadSpec(f"validation failed: {c.name}")
    return p


# -- seeded ensembles --------------------------------------------------------

_MASK64 = (1 << 64) - 1


class SplitMix64:
    """SplitMix64 generator (Steele, Lea, Flood 2014), 64-bit state.

    Pure integer arithmetic, so streams are reproducible on any platform.
    Uniform doubles take the top 53 bits; normals use Box-Muller.
    """

    def __init__(self, seed: int):
        self.state = seed & _MASK64

    def next_u64(self):
        self.state = (self.state + 0x9E3779B97F4A7C15) & _MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        return z ^ (z >> 31)

    def uniform(self, lo=0.0, hi=1.0):
        return lo + (hi - lo) * ((self.next_u64() >> 11) * 2.0**-53)

    def normal(self):
        u1 = 1.0 - self.uniform()  # in (0, 1]
        u2 = self.uniform()
        return math.sqrt(-2.0 * math.log(u1)) * math.cos(2.0 * math.pi * u2)

    def uniform_array(self, shape, lo=0.0, hi=1.0):
        size = int(np.prod(shape))
        return np.array([self.uniform(lo, hi) for _ in range(size)]).reshape(shape)

    def normal_array(self, shape):
        size = int(np.prod(shape))
        return np.array([self.normal() for _ in range(size)]).reshape(shape)

    def complex_normal_array(self, shape):
        # re/im interleaved per entry, unit variance overall
        size = int(np.prod(shape))
        vals = [complex(self.normal(), self.normal()) / math.sqrt(2.0) for _ in range(size)]
        return np.array(vals, dtype=complex).reshape(shape)


@dataclass(frozen=True)
class EnsembleSpec:
    kind: str
    n: int
    k: int
    seed: int = 0
    scale: float = 1.0


def build_ensemble(spec: EnsembleSpec) -> ResonanceProblem:
    """Deterministically build a problem from ``spec``.

    diagonal
        ``h0 = diag(scale * U[-1, 1])``, ``F = [I_k 0]``, ``J = I_k``.
    jacobi
        ``h0`` is the Dirichlet Laplacian stencil (``2*scale`` on the
        diagonal, ``-scale`` off it); ``F`` real Gaussian scaled by
        ``1/sqrt(n)``; ``J = I_k``.
    dense-gaussian
        ``h0 = scale * (G + G*) / (2 sqrt(n))`` with complex Gaussian ``G``;
        complex Gaussian ``F / sqrt(n)``; Hermitian Gaussian ``J``.
    rank-k-perturbation
        ``h0 = diag(scale * U[-1, 1])``; ``F`` has orthonormal rows;
        ``J = diag(scale * N(0, 1))``.
    """
    kind, n, k = spec.kind, spec.n, spec.k
    if kind not in ENSEMBLE_KINDS:
        raise BadSpec(f"unknown ensemble kind {kind!r}; expected one of {ENSEMBLE_KINDS}")
    if not (isinstance(n, (int, np.integer)) and isinstance(k, (int, np.integer))) or n < 1 or k < 1:
        raise BadSpec(f"n and k must be positive integers, got n={n}, k={k}")
    if not (spec.scale > 0 and math.isfinite(spec.scale)):
        raise BadSpec(f"scale must be positive, got {spec.scale}")
    if spec.seed < 0:
        raise BadSpec("seed must be unsigned")
    if k > n and kind in ("diagonal", "rank-k-perturbation"):
        raise BadSpec(f"{kind} ensemble requires n >= k (n={n}, k={k})")
    rng = SplitMix64(spec.seed)
    scale = float(spec.scale)

    if kind == "diagonal":
        h0 = scale * rng.uniform_array((n,), -1.0, 1.0)
        f = np.eye(k, n, dtype=complex)
        j = np.eye(k, dtype=complex)
    elif kind == "jacobi":
        h0 = (
            2.0 * scale * np.eye(n)
            - scale * np.eye(n, k=1)
            - scale * np.eye(n, k=-1)
        ).astype(complex)
        f = rng.normal_array((k, n)).astype(complex) / math.sqrt(n)
        j = np.eye(k, dtype=complex)
    elif kind == "dense-gaussian":
        g = rng.complex_normal_array((n, n))
        h0 = scale * (g + g.conj().T) / (2.0 * math.sqrt(n))
        f = rng.complex_normal_array((k, n)) / math.sqrt(n)
        a = rng.complex_normal_array((k, k))
        j = (a + a.conj().T) / (2.0 * math.sqrt(k))
    else:
        h0 = scale * rng.uniform_array((n,), -1.0, 1.0)
        g = rng.complex_normal_array((n, k))
        q, r = np.linalg.qr(g)
        # fix the QR sign ambiguity so rows are a deterministic function of g
        q = q * (np.diag(r) / np.abs(np.diag(r)))
        f = q.conj().T
        j = np.diag(scale * rng.normal_array((k,))).astype(complex)
    return ResonanceProblem(n=n, k=k, h0=h0, f=f, j=j)


# -- problem files -----------------------------------------------------------


def _cplx_to_json(a):
    return [[[float(x.real), float(x.imag)] for x in row] for row in np.asarray(a, dtype=complex)]


def serialize(p: ResonanceProblem) -> bytes:
    doc = {
        "n": int(p.n),
        "k": int(p.k),
        "h0": [float(x) for x in p.h0] if p.diagonal else _cplx_to_json(p.h0),
        "f": _cplx_to_json(p.f),
        "j": _cplx_to_json(p.j),
    }
    return json.dumps(doc, indent=1).encode("utf-8")


def _is_number(x):
    return isinstance(x, (int, float)) and not isinstance(x, bool)


def _parse_complex_matrix(name, value, rows, cols):
    if not isinstance(value, list) or len(value) != rows:
        raise SchemaError(name, f"expected {rows} rows")
    out = np.empty((rows, cols), dtype=complex)
    for i, row in enumerate(value):
        if not isinstance(row, list) or len(row) != cols:
            raise SchemaError(name, f"row {i} must have {cols} entries")
        for jj, entry in enumerate(row):
            if not (isinstance(entry, list) and len(entry) == 2 and all(map(_is_number, entry))):
                raise SchemaError(name, f"entry [{i}][{jj}] must be a [re, im] pair of numbers")
            out[i, jj] = complex(entry[0], entry[1])
    return out


def load_problem(data) -> ResonanceProblem:
    """Parse a problem document (bytes or str).  Hermiticity is left to :func:`validate`."""
    if isinstance(data, (bytes, bytearray)):
        try:
            data = data.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ParseError(f"not UTF-8: {exc}") from exc
    try:
        doc = json.loads(data)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, exc.lineno, exc.colno) from exc
    if not isinstance(doc, dict):
        raise SchemaError("<root>", "document must be a JSON object")
    unknown = sorted(set(doc) - set(_FIELDS))
    if unknown:
        raise SchemaError(unknown[0], "unknown field")
    for name in _FIELDS:
        if name not in doc:
            raise SchemaError(name, "missing required field")
    n, k = doc["n"], doc["k"]
    for name, val in (("n", n), ("k", k)):
        if not isinstance(val, int) or isinstance(val, bool) or val < 1:
            raise SchemaError(name, "must be a positive integer")
    h0 = doc["h0"]
    if isinstance(h0, list) and len(h0) == n and all(_is_number(x) for x in h0):
        h0 = np.array([float(x) for x in h0])
    else:
        h0 = _parse_complex_matrix("h0", h0, n, n)
    f = _parse_complex_matrix("f", doc["f"], k, n)
    j = _parse_complex_matrix("j", doc["j"], k, k)
    if not all(np.all(np.isfinite(a)) for a in (h0, f, j)):
        raise SchemaError("<entries>", "non-finite value")
    return ResonanceProblem(n=n, k=k, h0=h0, f=f, j=j)


def build_corpus(count=200, seed=20240601, max_n=20, max_k=6):
    """Seeded mix of all ensemble kinds with ``2 <= n <= max_n`` and ``1 <= k <= min(max_k, n)``."""
    rng = SplitMix64(seed)
    out = []
    for i in range(count):
        kind = ENSEMBLE_KINDS[i % len(ENSEMBLE_KINDS)]
        n = 2 + int(rng.uniform() * (max_n - 1))
        k = 1 + int(rng.uniform() * min(max_k, n))
        out.append(build_ensemble(EnsembleSpec(kind, n, k, seed=seed + i)))
    return out
