import numpy as np
import pytest

from resatlas.continuation import (
    Ambiguous,
    PathSpec,
    branching_at,
    classify_approach,
    compose,
    cycles,
    identity,
    inverse,
    is_identity,
    locate_branch_points,
    match_spectra,
    monodromy,
    power,
    trace_branches,
    traverse,
)
from resatlas.errors import CardinalityMismatch, SpectrumHit, StepCollapse
from resatlas.numerics import match_multisets
from resatlas.problem import EnsembleSpec, ResonanceProblem, build_ensemble
from resatlas.resonance import ResonanceSet, real_axis_sigma_zeros, resonances

BOX = (0.1, 2.0, 0.1, 2.0)


def rs(values):
    return ResonanceSet(0j, np.asarray(values, dtype=complex))


def identity_pair(lam):
    lam = np.asarray(lam, dtype=float)
    return ResonanceProblem.from_arrays(lam, np.eye(lam.size), np.eye(lam.size))


def rank_one():
    return ResonanceProblem.rank_one(np.array([1.0, -1.0]), np.array([1.0, 1.0]) / np.sqrt(2))


def jacobi(n, seed, k=3):
    return build_ensemble(EnsembleSpec("jacobi", n, k, seed=seed))


@pytest.fixture(scope="module")
def seeded_points():
    p = jacobi(8, 11)
    return p, locate_branch_points(p, BOX)


def cycle_type(perm):
    return sorted(len(c) for c in cycles(perm))


# -- permutations ------------------------------------------------------------


def test_permutation_algebra():
    a, b = (1, 2, 0), (1, 0, 2)
    assert compose(a, inverse(a)) == identity(3)
    assert power(a, 3) == identity(3)
    assert compose(a, b) == (0, 2, 1)
    assert cycle_type(a) == [3] and cycle_type(b) == [1, 2]


# -- match_spectra -----------------------------------------------------------


def test_match_identical():
    assert match_spectra(rs([1, 5, 2j]), rs([1, 5, 2j])) == (0, 1, 2)


def test_match_swap():
    assert match_spectra(rs([1, 5]), rs([5.1, 1.05])) == (1, 0)


def test_match_ambiguous():
    out = match_spectra(rs([1, 1.2]), rs([1.1, 1.1 + 0.2j]))
    assert isinstance(out, Ambiguous)
    assert out.half_gap == pytest.approx(0.1)
    assert out.distance >= out.half_gap


def test_match_cardinality():
    with pytest.raises(CardinalityMismatch):
        match_spectra(rs([1, 2]), rs([1]))


# -- trace_branches ----------------------------------------------------------


def test_trace_identity_perturbation():
    lam = np.array([-1.0, 0.3, 2.0])
    fam = trace_branches(identity_pair(lam), PathSpec.segment(1j, 2 + 1j))
    # each label stays on one exact branch z - lambda_j for the whole path
    offsets = fam.z[:, None] - fam.tracks
    np.testing.assert_allclose(offsets, np.broadcast_to(offsets[0], offsets.shape), atol=1e-13)
    np.testing.assert_allclose(np.sort(offsets[0].real), lam, atol=1e-13)


def test_trace_contractible_loop_identity():
    p = identity_pair([0.0, 2.0])
    assert is_identity(monodromy(p, PathSpec.circle(1 + 1j, 0.5)))


def test_path_through_spectrum():
    with pytest.raises(SpectrumHit):
        trace_branches(rank_one(), PathSpec.segment(0.5 + 0j, 1.5 + 0j))


def test_step_collapse_at_sigma_zero():
    # one branch runs off to infinity at a real sigma-zero and the other cannot be told apart
    p = jacobi(8, 3, k=2)
    x0 = real_axis_sigma_zeros(p)[0]
    delta = 0.3 * np.min(np.abs(p.spectrum - x0))
    with pytest.raises(StepCollapse) as info:
        trace_branches(p, PathSpec.segment(x0 - delta + 0j, x0 + delta + 0j, min_step=1e-7))
    assert abs(info.value.location - x0) < 1e-3 * delta


def test_path_independence(seeded_points):
    p, _ = seeded_points
    a, b = 0.2 + 1.5j, 1.5 + 1.5j
    straight = trace_branches(p, PathSpec.segment(a, b, max_step=0.05))
    bent = trace_branches(p, PathSpec((a, 0.85 + 1.9j, b), 0.05, 1e-9))
    assert np.max(np.abs(straight.end_values() - bent.end_values())) < 1e-7
    assert straight.composed() == bent.composed()


# -- monodromy ---------------------------------------------------------------


def test_monodromy_reversal_and_powers(seeded_points):
    p, points = seeded_points
    for bp in points:
        loop = PathSpec.circle(bp.location, bp.radius)
        perm = monodromy(p, loop)
        assert not is_identity(perm)
        assert monodromy(p, loop.reversed()) == inverse(perm)
        start, end = traverse(p, loop, 2)
        twice, _ = match_multisets(end, start)
        assert tuple(int(i) for i in twice) == power(perm, 2)


def test_monodromy_rotation_conjugate(seeded_points):
    p, points = seeded_points
    loop = PathSpec.circle(points[0].location, points[0].radius)
    base = monodromy(p, loop)
    for shift in (3, 7, 12):
        assert cycle_type(monodromy(p, loop.rotated(shift))) == cycle_type(base)


@pytest.mark.parametrize("seed", [1, 2, 3])
def test_period_closure(seed):
    p = jacobi(6, seed)
    points = locate_branch_points(p, BOX)
    assert points
    for bp in points:
        loop = PathSpec.circle(bp.location, bp.radius)
        for ell in bp.periods:
            start, end = traverse(p, loop, ell)
            moved = np.abs(end - start) / (1 + np.abs(start))
            in_cycle = [i for c in cycles(monodromy(p, loop)) if len(c) == ell for i in c]
            assert np.max(moved[in_cycle]) < 1e-6


# -- locate_branch_points ------------------------------------------------------


def test_no_branch_points_identity_pair():
    assert locate_branch_points(identity_pair([-1.0, 0.5, 3.0]), (-2, 2, 0.1, 2)) == []


def test_no_branch_points_rank_one():
    p = ResonanceProblem.rank_one(np.array([-1.0, 0.0, 2.0]), np.array([1.0, 2.0, 0.5]))
    assert locate_branch_points(p, BOX) == []


def test_branch_points_two_radius(seeded_points):
    p, points = seeded_points
    assert len(points) >= 1
    for bp in points:
        assert bp.refined and bp.periods == (1, 2)
        small = monodromy(p, PathSpec.circle(bp.location, bp.radius / 2))
        large = monodromy(p, PathSpec.circle(bp.location, 2 * bp.radius))
        assert not is_identity(small)
        assert small == large


def test_loop_around_point_matches_located(seeded_points):
    p, points = seeded_points
    for bp in points:
        perm = monodromy(p, PathSpec.circle(bp.location, bp.radius))
        assert cycle_type(perm) == list(bp.periods)


def test_branch_point_is_collision(seeded_points):
    p, points = seeded_points
    for bp in points:
        r = resonances(p, bp.location).values
        d = np.abs(r[:, None] - r[None, :]) + np.diag([np.inf] * r.size)
        assert d.min() < 1e-5 * (1 + np.abs(r).max())


# -- classify_approach ---------------------------------------------------------


@pytest.mark.parametrize("k", range(8))
def test_rank_one_pole(k):
    rep = classify_approach(rank_one(), 0.0, np.exp(2j * np.pi * k / 8))
    assert rep.label == "pole_like(1)"
    assert rep.fit_quality < 0.05
    assert rep.slopes[0] == pytest.approx(-1.0, abs=0.05)


@pytest.mark.parametrize("z0", [0.5 + 0.5j, -2.0 + 0j, 1.0 - 3j])
def test_identity_pair_regular(z0):
    rep = classify_approach(identity_pair([0.0, 2.0]), z0, 1j)
    assert rep.classification == "regular"
    assert np.all(np.abs(rep.slopes) < 0.05)


def test_branching_at_located_point(seeded_points):
    p, points = seeded_points
    for bp in points:
        rep = classify_approach(p, bp.location, 1.0)
        assert rep.classification == "branching"
        assert cycle_type(rep.monodromy) == list(bp.periods)


def test_no_branching_away_from_points(seeded_points):
    p, _ = seeded_points
    assert branching_at(p, 1.0 + 1.5j, 0.2) is None


def test_classify_rejects_spectrum():
    with pytest.raises(SpectrumHit):
        classify_approach(rank_one(), 1.0, 1j)
