"""
Transfer family ``M(z) = F (H0 - z)^{-1} F* J``, its eigenvalues ``sigma_j(z)``
and the coupling resonances ``r_j(z) = -1 / sigma_j(z)``.

Besides evaluation this module carries the identity checks that tie the
resonances to the shifted pair ``H_s = H0 + s V``:

* the eigenvalues of ``M_s(z) = F (H_s - z)^{-1} F* J`` are ``1 / (s - r_j(z))``;
* ``tr M_s(z) = sum_j 1 / (s - r_j(z))``, bounded by ``||M_s(z)||_1``;
* ``z`` is an eigenvalue of ``H0 + r_j(z) V``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .errors import CouplingCollision
from .numerics import (
    eigenvalues,
    match_multisets,
    mean_value_defect,
    singular_values,
    solve_shifted,
    sort_eigenvalues,
    spectrum_guard,
)
from .problem import ResonanceProblem

ZERO_TOL = 1e-10
COLLISION_TOL = 1e-12


@dataclass(frozen=True)
class TransferSample:
    z: complex
    m: np.ndarray
    sigmas: np.ndarray
    zero_count: int
    condition: float
    zero_tol: float
    eigs: np.ndarray  # all k eigenvalues of m, sorted, zeros included
    bound: float  # factor bound used as the zero threshold scale

    @property
    def norm(self):
        return float(np.linalg.norm(self.m, 2))


@dataclass(frozen=True)
class ResonanceSet:
    z: complex
    values: np.ndarray

    def __len__(self):
        return len(self.values)


@dataclass(frozen=True)
class HerglotzReport:
    z: complex
    s: float
    f_sum: complex
    f_trace: complex
    residual: float
    trace_norm_bound: float

    @property
    def tolerance(self):
        return 1e-8 * (1.0 + self.trace_norm_bound)


@dataclass(frozen=True)
class WeylReport:
    p: float
    prefix_lambda_sums: np.ndarray
    prefix_s_sums: np.ndarray
    min_slack: float

    @property
    def tolerance(self):
        return 1e-12 * max(1.0, float(self.prefix_s_sums[-1]) if len(self.prefix_s_sums) else 0.0)

    @property
    def holds(self):
        return self.min_slack >= -self.tolerance


def _sample(m, z, condition, zero_tol, bound):
    eigs = eigenvalues(m)
    # bound >= ||M(z)||; it sets the rounding floor of the computed entries,
    # so it still separates true zeros when M is 1x1
    mags = np.abs(eigs)
    zero = (mags < zero_tol * bound) | (mags == 0)
    sigmas = eigs[~zero]
    return TransferSample(
        z=complex(z),
        m=m,
        sigmas=sigmas,
        zero_count=int(zero.sum()),
        condition=condition,
        zero_tol=zero_tol,
        eigs=eigs,
        bound=float(bound),
    )


def transfer_matrix(p: ResonanceProblem, z, h=None, eigs=None):
    """``F (H - z)^{-1} F* J`` and the condition number of ``H - z`` (``H = H0`` by default)."""
    if h is None:
        h, eigs = p.h0_matrix, p.spectrum
    x, condition = solve_shifted(h, z, p.f.conj().T, eigs=eigs)
    return p.f @ x @ p.j, condition


def _factor_bound(p, z, eigs):
    """``||F||^2 ||J|| / dist(z, spec H)``, an upper bound for ``||M(z)||``."""
    return p.factor_norm / float(np.min(np.abs(np.asarray(eigs) - z)))


def transfer_at(p: ResonanceProblem, z, zero_tol=ZERO_TOL) -> TransferSample:
    """Evaluate ``M(z)`` and split its eigenvalues into retained and numerically zero ones."""
    m, condition = transfer_matrix(p, z)
    return _sample(m, z, condition, zero_tol, _factor_bound(p, z, p.spectrum))


def resonances_at(sample: TransferSample) -> ResonanceSet:
    # numerically zero sigmas correspond to no finite coupling
    return ResonanceSet(sample.z, sort_eigenvalues(-1.0 / sample.sigmas))


def resonances(p: ResonanceProblem, z, zero_tol=ZERO_TOL) -> ResonanceSet:
    return resonances_at(transfer_at(p, z, zero_tol))


def shifted_transfer_at(p: ResonanceProblem, s: float, z, zero_tol=ZERO_TOL) -> TransferSample:
    """Transfer sample of the pair ``(H0 + s V, V)`` with the same ``F`` and ``J``."""
    if s == 0:
        return transfer_at(p, z, zero_tol)
    hs = p.h_s(s)
    hs = 0.5 * (hs + hs.conj().T)
    eigs = np.linalg.eigvalsh(hs)
    m, condition = transfer_matrix(p, z, h=hs, eigs=eigs)
    return _sample(m, z, condition, zero_tol, _factor_bound(p, z, eigs))


def _shift_terms(p, z, s, zero_tol):
    res = resonances(p, z, zero_tol)
    gaps = np.abs(s - res.values)
    if gaps.size and gaps.min() < COLLISION_TOL:
        raise CouplingCollision(z, s, complex(res.values[int(np.argmin(gaps))]))
    return 1.0 / (s - res.values)


def shift_identity_residual(p: ResonanceProblem, z, s: float, zero_tol=ZERO_TOL) -> float:
    """Matching distance between ``{1/(s - r_j(z))}`` and the spectrum of ``M_s(z)``.

    The two sides come from separate code paths: one from the eigenvalues of
    ``M(z)``, the other from a fresh solve with ``H0 + s V``.  Branches that
    vanish numerically are padded as zeros on the left, which is what the
    corresponding eigenvalues of ``M_s`` are.
    """
    terms = _shift_terms(p, z, s, zero_tol)
    ms = shifted_transfer_at(p, s, z, zero_tol)
    lhs = np.concatenate([terms, np.zeros(p.k - terms.size, dtype=complex)])
    return match_multisets(lhs, ms.eigs)[1]


def herglotz_sum(p: ResonanceProblem, z, s: float = 0.0, zero_tol=ZERO_TOL) -> HerglotzReport:
    terms = _shift_terms(p, z, s, zero_tol)
    f_sum = complex(np.sum(terms))
    ms = shifted_transfer_at(p, s, z, zero_tol)
    f_trace = complex(np.trace(ms.m))
    return HerglotzReport(
        z=complex(z),
        s=float(s),
        f_sum=f_sum,
        f_trace=f_trace,
        residual=abs(f_sum - f_trace),
        trace_norm_bound=float(np.sum(singular_values(ms.m))),
    )


def f_value(p: ResonanceProblem, z, s: float = 0.0):
    """``f(z) = tr F (H_s - z)^{-1} F* J`` (equal to the branch sum, without eigensolves)."""
    if s == 0:
        m, _ = transfer_matrix(p, z)
    else:
        hs = p.h_s(s)
        hs = 0.5 * (hs + hs.conj().T)
        m, _ = transfer_matrix(p, z, h=hs, eigs=np.linalg.eigvalsh(hs))
    return complex(np.trace(m))


def weyl_report(a, p: float) -> WeylReport:
    """Prefix sums of ``|lambda_j|^p`` and ``s_j^p`` for a square matrix."""
    if not p > 0:
        raise ValueError(f"p must be positive, got {p}")
    lam = np.abs(eigenvalues(a))  # already in descending magnitude
    sv = singular_values(a)
    lam_sums = np.cumsum(lam**p)
    s_sums = np.cumsum(sv**p)
    slack = s_sums - lam_sums
    return WeylReport(float(p), lam_sums, s_sums, float(slack.min()) if slack.size else 0.0)


def coupling_consistency(p: ResonanceProblem, z, r, sample: TransferSample | None = None):
    """Independent check that ``r`` is a coupling resonance at ``z``.

    Returns ``(eig_distance, sing_min)``: the distance from ``z`` to the
    spectrum of the (non-Hermitian) ``H0 + r V``, and the smallest singular
    value of ``I + r M(z)``.  Both vanish exactly when ``r`` is a resonance.
    """
    spectrum_guard(p.spectrum, complex(z))
    if sample is None:
        sample = transfer_at(p, z)
    w = np.linalg.eigvals(p.h0_matrix + r * p.v)
    eig_distance = float(np.min(np.abs(w - z)))
    sing_min = float(singular_values(np.eye(p.k) + r * sample.m)[-1])
    return eig_distance, sing_min


def consistency_scale(p: ResonanceProblem, z, r):
    """Scale for :func:`coupling_consistency` thresholds: ``(1 + |z|) * max(1, ||H0 + r V||)``."""
    return (1.0 + abs(z)) * max(1.0, float(np.linalg.norm(p.h0_matrix + r * p.v, 2)))


def herglotz_defect(p: ResonanceProblem, z):
    """Smallest eigenvalue of ``Im F (H0 - z)^{-1} F*`` for ``z`` in the upper half-plane.

    Nonnegative for every ``z`` with ``Im z > 0``; for a rank-one pair with
    ``J = [1]`` it is ``Im sigma(z)``.
    """
    x, _ = solve_shifted(p.h0_matrix, z, p.f.conj().T, eigs=p.spectrum)
    a = p.f @ x
    im = (a - a.conj().T) / 2j
    return float(np.linalg.eigvalsh(im)[0])


def transfer_mean_value_defect(p: ResonanceProblem, z0, npts=64):
    """Mean-value defect of ``M`` on the circle of radius half the distance to ``spec(H0)``."""
    rho = 0.5 * float(np.min(np.abs(p.spectrum - z0)))
    defect, centre, _ = mean_value_defect(lambda z: transfer_matrix(p, z)[0], z0, rho, npts)
    return defect, centre


def _gram_det(p, x):
    a = p.f @ solve_shifted(p.h0_matrix, x, p.f.conj().T, eigs=p.spectrum)[0]
    return float(np.prod(np.linalg.eigvalsh(0.5 * (a + a.conj().T))))


def real_axis_sigma_zeros(p: ResonanceProblem, samples_per_gap=64, margin=1e-3):
    """Real points in the resolvent set where some ``sigma_j`` vanishes.

    For real ``x`` off the spectrum, ``F (H0 - x)^{-1} F*`` is Hermitian and
    its determinant is real; sign changes inside each spectral gap (and on
    unit-length stretches beyond the extreme eigenvalues) are refined with
    Brent's method.  Zeros of even multiplicity are not detected.
    """
    if p.k > p.n:
        return []
    lam = np.unique(p.spectrum)
    width = max(float(lam[-1] - lam[0]), 1.0)
    edges = [(lam[0] - width, lam[0])] + list(zip(lam[:-1], lam[1:])) + [(lam[-1], lam[-1] + width)]
    zeros = []
    for a, b in edges:
        gap = b - a
        if gap <= 0:
            continue
        xs = np.linspace(a + margin * gap, b - margin * gap, samples_per_gap)
        vals = [_gram_det(p, x) for x in xs]
        for x0, x1, v0, v1 in zip(xs, xs[1:], vals, vals[1:]):
            if v0 == 0:
                zeros.append(float(x0))
            elif v0 * v1 < 0:
                zeros.append(float(brentq(lambda x: _gram_det(p, x), x0, x1, xtol=1e-15, rtol=1e-15)))
    return zeros
