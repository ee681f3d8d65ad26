"""
Dense complex linear algebra used by every other module.

The routines are thin, validated wrappers around LAPACK (through numpy and
scipy).  Their value is in the contracts: finite-entry checks, Hermiticity
tolerances, a deterministic eigenvalue ordering and an explicit guard that
refuses to form a resolvent when ``z`` is numerically in the spectrum.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import DimensionMismatch, NoConvergence, NonFinite, NotHermitian, SpectrumHit

HERMITIAN_TOL = 1e-12
SPECTRUM_TOL = 1e-13


def as_matrix(a, name="matrix"):
    """Return ``a`` as a finite 2-d complex array, raising on bad input."""
    arr = np.asarray(a, dtype=complex)
    if arr.ndim == 1 and arr.size == 1:
        arr = arr.reshape(1, 1)
    if arr.ndim != 2:
        raise DimensionMismatch(f"{name} must be 2-d, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise NonFinite(f"{name} has non-finite entries")
    return arr


def _square(a, name):
    arr = as_matrix(a, name)
    if arr.shape[0] != arr.shape[1]:
        raise DimensionMismatch(f"{name} must be square, got shape {arr.shape}")
    return arr


def hermitian_defect(a):
    """Spectral-norm defect ``||A - A*||`` and the norm ``||A||``."""
    arr = np.asarray(a)
    norm = np.linalg.norm(arr, 2) if arr.size else 0.0
    defect = np.linalg.norm(arr - arr.conj().T, 2) if arr.size else 0.0
    return float(defect), float(norm)


def check_hermitian(a, name="matrix", tol=HERMITIAN_TOL):
    arr = _square(a, name)
    defect, norm = hermitian_defect(arr)
    if defect > tol * norm:
        raise NotHermitian(name, defect, tol * norm)
    return arr


@dataclass(frozen=True)
class EigenResult:
    """Eigenvalues in descending magnitude plus a relative residual bound."""

    values: np.ndarray
    residual_bound: float

    def __len__(self):
        return len(self.values)


def sort_eigenvalues(values):
    """Order by descending magnitude, ties by ascending argument in (-pi, pi]."""
    values = np.asarray(values, dtype=complex)
    if values.size == 0:
        return values
    args = np.angle(values)
    # np.angle returns -pi for negative reals with a -0.0 imaginary part
    args = np.where(args <= -np.pi, np.pi, args)
    mags = np.abs(values)
    top = mags.max()
    # magnitudes equal to 12 digits count as ties, so rounding cannot flip them
    key = np.round(mags / top * 1e12) if top > 0 else mags
    order = np.lexsort((args, -key))
    return values[order]


def hermitian_eigen(a, tol=HERMITIAN_TOL):
    """Ascending real eigenvalues and an orthonormal eigenbasis of a Hermitian matrix.

    Raises NotHermitian if ``||A - A*|| > tol * ||A||``.
    """
    arr = check_hermitian(a, "A", tol)
    # symmetrize so LAPACK sees exactly the Hermitian part
    w, u = np.linalg.eigh(0.5 * (arr + arr.conj().T))
    return w, u


def general_eigen(a):
    arr = _square(a, "A")
    try:
        w, v = np.linalg.eig(arr)
    except np.linalg.LinAlgError as exc:
        raise NoConvergence(f"eigensolver did not converge (LAPACK geev budget): {exc}") from exc
    norm = np.linalg.norm(arr, 2)
    if norm > 0:
        res = np.linalg.norm(arr @ v - v * w, axis=0) / np.maximum(np.linalg.norm(v, axis=0), 1e-300)
        bound = float(res.max() / norm) if res.size else 0.0
    else:
        bound = 0.0
    return EigenResult(sort_eigenvalues(w), bound)


def eigenvalues(a):
    """Eigenvalues only, sorted as in :class:`EigenResult`."""
    arr = _square(a, "A")
    try:
        w = np.linalg.eigvals(arr)
    except np.linalg.LinAlgError as exc:
        raise NoConvergence(str(exc)) from exc
    return sort_eigenvalues(w)


def singular_values(a):
    arr = as_matrix(a, "A")
    if arr.size == 0:
        return np.zeros(0)
    return np.linalg.svd(arr, compute_uv=False)


def trace_norm(a):
    return float(np.sum(singular_values(a)))


def spectrum_guard(eigs, z, scale=None):
    """Distances ``|lambda_j - z|``; raise SpectrumHit inside ``1e-13 * ||H||``."""
    eigs = np.asarray(eigs)
    dist = np.abs(eigs - z)
    if scale is None:
        scale = float(np.max(np.abs(eigs))) if eigs.size else 0.0
    i = int(np.argmin(dist))
    if dist[i] <= SPECTRUM_TOL * scale:
        raise SpectrumHit(z, float(dist[i]), float(np.real(eigs[i])))
    return dist


def solve_shifted(h, z, b, eigs=None):
    """Solve ``(H - z) X = B`` for Hermitian ``H``.

    Parameters
    ----------
    h : (n, n) Hermitian array
    z : complex shift, must be off the spectrum of ``h``
    b : (n, m) right-hand side
    eigs : optional precomputed eigenvalues of ``h``

    Returns
    -------
    x : (n, m) complex array
    condition : float
        ``max|lambda - z| / min|lambda - z|``, the 2-norm condition number of
        ``H - z`` (exact because ``H - z`` is normal).
    """
    h = _square(h, "H")
    b = as_matrix(b, "B") if np.ndim(b) == 2 else as_matrix(np.reshape(b, (-1, 1)), "B")
    if b.shape[0] != h.shape[0]:
        raise DimensionMismatch(f"B has {b.shape[0]} rows, H is {h.shape[0]}x{h.shape[0]}")
    if eigs is None:
        eigs = np.linalg.eigvalsh(h)
    dist = spectrum_guard(eigs, complex(z))
    condition = float(dist.max() / dist.min())
    x = np.linalg.solve(h - complex(z) * np.eye(h.shape[0]), b)
    return x, condition


def match_multisets(a, b):
    """Optimal assignment between two equal-size multisets of complex numbers.

    Minimizes the total ``sum |a_i - b_perm[i]|`` (Hungarian method).  Returns
    ``(perm, distance)`` where ``perm[i]`` is the index in ``b`` paired with
    ``a[i]`` and ``distance`` is the largest paired gap.
    """
    a = np.asarray(a, dtype=complex).ravel()
    b = np.asarray(b, dtype=complex).ravel()
    if a.size != b.size:
        raise DimensionMismatch(f"multisets differ in size: {a.size} vs {b.size}")
    if a.size == 0:
        return np.zeros(0, dtype=int), 0.0
    cost = np.abs(a[:, None] - b[None, :])
    rows, cols = linear_sum_assignment(cost)
    perm = np.empty(a.size, dtype=int)
    perm[rows] = cols
    return perm, float(cost[rows, cols].max())


def matching_distance(a, b):
    return match_multisets(a, b)[1]


def circle_points(z0, rho, npts=64):
    theta = 2 * np.pi * np.arange(npts) / npts
    return z0 + rho * np.exp(1j * theta)


def mean_value_defect(func, z0, rho, npts=64):
    """``|func(z0) - mean of func over a circle|`` for array-valued ``func``.

    For holomorphic ``func`` the trapezoid rule on the circle is exact up to
    aliasing, so the defect measures departure from holomorphy.  Returns
    ``(defect, centre_value_norm, max_circle_norm)``.
    """
    centre = np.asarray(func(z0))
    vals = [np.asarray(func(z)) for z in circle_points(z0, rho, npts)]
    avg = np.mean(vals, axis=0)
    defect = float(np.max(np.abs(centre - avg)))
    return defect, float(np.max(np.abs(centre))), float(max(np.max(np.abs(v)) for v in vals))
