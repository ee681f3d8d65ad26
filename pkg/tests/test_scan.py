import json
import math

import numpy as np
import pytest

from resatlas.problem import EnsembleSpec, ResonanceProblem, build_corpus, build_ensemble
from resatlas.resonance import real_axis_sigma_zeros
from resatlas.scan import (
    CSV_COLUMNS,
    SCHEMA,
    Region,
    absorbing_sweep,
    grid_scan,
    isolation_check,
    mean_value_residual,
)


def identity_pair(lam):
    lam = np.asarray(lam, dtype=float)
    return ResonanceProblem.from_arrays(lam, np.eye(lam.size), np.eye(lam.size))


def rank_one():
    return ResonanceProblem.rank_one(np.array([1.0, -1.0]), np.array([1.0, 1.0]) / np.sqrt(2))


def f_identity(z):
    return -2 * z / (z * z - 1)


# -- grid_scan ---------------------------------------------------------------


def test_scan_identity_pair_node_values():
    p = identity_pair([1.0, -1.0])
    # nodes at -2, -1.5, ..., 2 by 0.5, 0.75, ..., 2
    rep = grid_scan(p, Region(-2, 2, 0.5, 2), 9, 7)
    assert len(rep.records) == 63
    node = next(r for r in rep.records if r.z == 1j)
    assert node.abs_f == pytest.approx(1.0, abs=1e-15)
    for r in rep.records:
        assert r.f == pytest.approx(f_identity(r.z), rel=1e-13)


def test_scan_row_major():
    rep = grid_scan(identity_pair([0.0]), Region(-1, 1, 0.5, 1), 3, 2)
    zs = [r.z for r in rep.records]
    assert zs == [-1 + 0.5j, 0.5j, 1 + 0.5j, -1 + 1j, 1j, 1 + 1j]


def test_scan_all_inside_margin():
    p = identity_pair([0.0, 1.0])
    rep = grid_scan(p, Region(-0.01, 0.01, -0.01, 0.01, margin=0.1), 4, 4)
    assert all(r.skipped and r.reason == "inside exclusion margin" for r in rep.records)
    assert all(v == {} for v in rep.summary.values())
    assert rep.zero_candidates == []
    assert "inside exclusion margin" in json.loads(rep.to_json())["skipped"]


def test_scan_default_margin():
    p = identity_pair([0.0, 2.0])
    assert Region(-1, 1, -1, 1).exclusion(p) == pytest.approx(2e-3)
    rep = grid_scan(p, Region(-1, 1, -1, 1), 5, 5)
    skipped = [r.z for r in rep.records if r.skipped]
    assert skipped == [0j]


def test_nested_grids_monotone():
    p = build_ensemble(EnsembleSpec("dense-gaussian", 6, 3, seed=4))
    region = Region(-1.5, 1.5, 0.2, 1.4)
    coarse = grid_scan(p, region, 5, 4, refine_zeros=False)
    fine = grid_scan(p, region, 9, 7, refine_zeros=False)
    coarse_z = {r.z for r in coarse.records}
    assert coarse_z <= {r.z for r in fine.records}
    for name in ("abs_f", "sigma_min", "sigma_max"):
        assert fine.summary[name]["min"] <= coarse.summary[name]["min"]
        assert fine.summary[name]["max"] >= coarse.summary[name]["max"]


def test_scan_collision_retry():
    # r_1(z) = z for spectrum {0}, so s = 0.5 collides at the node z = 0.5
    p = identity_pair([0.0, 3.0])
    rep = grid_scan(p, Region(0.5, 1.5, -0.5, 0.5), 3, 3, s=0.5)
    assert rep.shift == pytest.approx(0.87)
    assert not any(r.skipped for r in rep.records)


def test_csv_and_json_shape():
    rep = grid_scan(identity_pair([1.0, -1.0]), Region(-2, 2, -1, 1), 5, 5)
    lines = rep.to_csv().splitlines()
    assert tuple(lines[0].split(",")) == CSV_COLUMNS
    assert len(lines) == 26
    skipped = [ln for ln in lines[1:] if ln.endswith(",1")]
    assert len(skipped) == 2 and "nan" in skipped[0]
    doc = json.loads(rep.to_json())
    assert doc["schema"] == SCHEMA and doc["records"] == 25


@pytest.mark.parametrize("workers", [2, 4])
def test_scan_worker_independence(workers):
    p = build_corpus()[13]
    region = Region(-2, 2, 0.1, 2)
    serial = grid_scan(p, region, 16, 12, workers=1)
    parallel = grid_scan(p, region, 16, 12, workers=workers)
    assert serial.to_csv() == parallel.to_csv()
    assert serial.to_json() == parallel.to_json()


# -- holomorphy and zeros ------------------------------------------------------


def test_mean_value_residual_small():
    for p in build_corpus()[:20]:
        for z0 in (0.3 + 1.0j, -0.7 + 0.6j):
            rho = 0.5 * float(np.min(np.abs(p.spectrum - z0)))
            assert mean_value_residual(p, z0, rho, s=0.0) < 1e-7


def test_mean_value_detects_non_holomorphic_scale():
    # the residual of a circle straddling the spectrum is not small
    p = identity_pair([0.0])
    assert mean_value_residual(p, 0.1 + 0j, 0.5) > 1e-3


def test_zero_found_and_isolated():
    p = identity_pair([1.0, -1.0])
    rep = grid_scan(p, Region(-0.5, 0.5, -0.5, 0.5), 11, 11)
    assert len(rep.zero_candidates) == 1
    cand = rep.zero_candidates[0]
    assert cand["node"] == [0.0, 0.0]
    assert cand["isolated"]
    assert cand["annulus_min"] > 10 * cand["abs_f_refined"]


def test_zero_refined_off_grid():
    p = rank_one()
    # sigma(z) = -z / (z^2 - 1) with s = 0 vanishes only at 0
    ring_min, centre = isolation_check(p, 1e-12 + 0j, 0.05)
    assert centre < 1e-11 and ring_min > 0.04


def test_real_sigma_zeros_are_isolated_zeros_of_f():
    p = build_ensemble(EnsembleSpec("jacobi", 8, 1, seed=2))
    for x in real_axis_sigma_zeros(p):
        dist = float(np.min(np.abs(p.spectrum - x)))
        ring_min, centre = isolation_check(p, complex(x), dist / 10)
        assert ring_min > 10 * centre


# -- absorbing_sweep -----------------------------------------------------------


def test_sweep_identity_pair_regular():
    p = identity_pair([-1.0, 0.5, 2.0])
    region = Region(-3, 3, -2, 2)
    targets = [0.3 + 1j, -2 + 0.5j, 1.2 - 1j, 0j, 2.5 + 1.5j]
    summary = absorbing_sweep(p, region, targets, 8)
    assert summary.counts == {"regular": 40}
    assert summary.findings == [] and summary.errors == []


def test_sweep_rank_one_pole():
    summary = absorbing_sweep(rank_one(), Region(-0.5, 0.5, -0.5, 0.5), [0j], 8)
    assert summary.counts == {"pole_like(1)": 8}
    assert summary.suspected == 0


def test_sweep_target_outside_region():
    with pytest.raises(ValueError):
        absorbing_sweep(rank_one(), Region(0, 1, 0, 1), [2 + 2j])


def test_sweep_collects_errors():
    # a target on the spectrum cannot be approached; the sweep keeps going
    summary = absorbing_sweep(rank_one(), Region(-2, 2, -1, 1), [1 + 0j, 0.5j], 4)
    assert len(summary.errors) == 4
    assert summary.errors[0]["error"] == "SpectrumHit"
    assert summary.counts == {"regular": 4}


def test_sweep_small_ensemble():
    corpus = build_corpus()[:12]
    total = {}
    for p in corpus:
        lam = p.spectrum
        targets = [complex(0.5 * (lam[0] + lam[-1]), 0.4)] + real_axis_sigma_zeros(p)[:2]
        summary = absorbing_sweep(p, Region(lam[0] - 2, lam[-1] + 2, -1, 1), targets, 4)
        assert summary.suspected == 0 and summary.errors == []
        for k, v in summary.counts.items():
            total[k] = total.get(k, 0) + v
    assert set(total) <= {"regular", "pole_like(1)", "branching"}
    assert total.get("pole_like(1)", 0) > 0


def test_sweep_json():
    summary = absorbing_sweep(rank_one(), Region(-0.5, 0.5, -0.5, 0.5), [0j], 2)
    doc = json.loads(summary.to_json())
    assert doc["schema"] == SCHEMA and doc["counts"] == {"pole_like(1)": 2}
    assert not math.isnan(summary.reports[0].fit_quality)
