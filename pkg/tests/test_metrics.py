import math

import numpy as np
import pytest

from helpers import oracle_p_ae
from lppm.geo import Euclidean, SquaredEuclidean, TagHamming
from lppm.mechanisms import BAParams, ba_fixed_point, build_coin
from lppm.metrics import (
    GI_UNBOUNDED,
    MetricReport,
    adversary_estimate,
    geo_ind_relaxed_check,
    mutual_information_bits,
    p_ae,
    p_ce,
    p_gi,
    p_wc_ae,
    p_wc_ce,
    q_avg,
    q_wc,
    report,
)
from lppm.model import DiscreteMechanism, PoiSet, Prior


def collinear():
    poi = PoiSet(np.array([[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]]))
    return poi, Prior(poi, np.full(3, 1.0 / 3.0))


def identity_mech(poi):
    return DiscreteMechanism(poi, poi.coords, np.eye(poi.n))


def constant_mech(poi, z):
    return DiscreteMechanism(poi, np.array([z], float), np.ones((poi.n, 1)))


# ---------------------------------------------------------------- quality loss

def test_q_avg_identity_zero():
    poi, prior = collinear()
    assert q_avg(identity_mech(poi), prior, Euclidean()) == 0.0


def test_q_avg_constant_is_mean_distance():
    poi, prior = collinear()
    mech = constant_mech(poi, [1.0, 0.0])
    assert q_avg(mech, prior, Euclidean()) == pytest.approx(2.0 / 3.0, abs=1e-12)


def test_q_avg_coin_hits_target(grid):
    _, prior = grid
    mech = build_coin(prior, Euclidean(), 0.7)
    assert q_avg(mech, prior, Euclidean()) == pytest.approx(0.7, abs=1e-12)


def test_q_wc_identity_zero():
    poi, prior = collinear()
    assert q_wc(identity_mech(poi), prior, Euclidean()) == 0.0


def test_q_wc_coin_is_farthest_support_point(grid):
    poi, prior = grid
    mech = build_coin(prior, Euclidean(), 0.7)
    # the star output sits at the grid center; corners are 2*sqrt(2) away
    assert q_wc(mech, prior, Euclidean()) == pytest.approx(2.0 * math.sqrt(2.0),
                                                          abs=1e-9)


def test_q_wc_ignores_zero_prior_inputs():
    poi, _ = collinear()
    prior = Prior(poi, np.array([0.5, 0.5, 0.0]))
    mech = constant_mech(poi, [0.0, 0.0])
    assert q_wc(mech, prior, Euclidean()) == 1.0


# ------------------------------------------------------------- adversary error

def test_p_ae_identity_zero():
    poi, prior = collinear()
    assert p_ae(identity_mech(poi), prior, Euclidean()) == 0.0


def test_p_ae_constant_matches_grid_oracle():
    poi, prior = collinear()
    mech = constant_mech(poi, [5.0, 5.0])
    got = p_ae(mech, prior, Euclidean())
    assert got == pytest.approx(oracle_p_ae(mech, prior), abs=1e-3)
    # and equals the best constant-report loss Q* = 2/3
    assert got == pytest.approx(2.0 / 3.0, abs=1e-6)


def test_p_ae_matches_oracle_on_random_instances():
    rng = np.random.default_rng(21)
    for _ in range(3):
        poi = PoiSet(rng.uniform(-2, 2, size=(5, 2)))
        prior = Prior(poi, rng.dirichlet(np.ones(5)))
        mech = DiscreteMechanism(
            poi, rng.uniform(-2, 2, size=(4, 2)), rng.dirichlet(np.ones(4), size=5)
        )
        assert p_ae(mech, prior, Euclidean()) == pytest.approx(
            oracle_p_ae(mech, prior), abs=1e-3
        )


def test_adversary_estimate_point_mass():
    poi, _ = collinear()
    est, err = adversary_estimate(np.array([0.0, 1.0, 0.0]), poi.coords, Euclidean())
    np.testing.assert_allclose(est, [1.0, 0.0], atol=1e-9)
    assert err == pytest.approx(0.0, abs=1e-9)


def test_adversary_estimate_squared_mean():
    pts = np.array([[0.0, 0.0], [2.0, 0.0]])
    est, err = adversary_estimate(np.array([0.5, 0.5]), pts, SquaredEuclidean())
    np.testing.assert_allclose(est, [1.0, 0.0])
    assert err == pytest.approx(1.0)


def test_adversary_estimate_weighted_median_collinear():
    poi, _ = collinear()
    post = np.array([0.4, 0.3, 0.3])
    est, _ = adversary_estimate(post, poi.coords, Euclidean())
    # the weighted median of masses 0.4/0.3/0.3 at 0,1,2 km is the 1 km point
    np.testing.assert_allclose(est, [1.0, 0.0], atol=1e-4)


def test_adversary_estimate_candidate_mode_lowest_index_tie():
    pts = np.array([[0.0, 0.0], [2.0, 0.0]])
    post = np.array([0.5, 0.5])
    cands = np.array([[0.0, 0.0], [2.0, 0.0]])  # symmetric: both cost 1.0
    idx, err = adversary_estimate(post, pts, Euclidean(), candidates=cands)
    assert idx == 0
    assert err == pytest.approx(1.0)


def test_adversary_estimate_tag_mode():
    pts = np.array([[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]])
    tags = ("Park", "Park", "Home")
    d = TagHamming(tags)
    idx, err = adversary_estimate(
        np.array([0.4, 0.3, 0.3]), pts, d,
        candidates=pts, candidate_tags=tags, poi_tags=tags,
    )
    assert tags[idx] == "Park"  # majority tag class
    assert err == pytest.approx(0.3)


def test_adversary_estimate_rejects_tag_without_candidates():
    pts = np.array([[0.0, 0.0], [1.0, 0.0]])
    with pytest.raises(Exception):
        adversary_estimate(np.array([0.5, 0.5]), pts, TagHamming(("a", "b")))


# --------------------------------------------------------------------- entropy

def test_p_ce_constant_equals_prior_entropy():
    poi, prior = collinear()
    mech = constant_mech(poi, [1.0, 0.0])
    assert p_ce(mech, prior) == pytest.approx(prior.entropy_bits(), abs=1e-12)


def test_p_ce_identity_zero():
    poi, prior = collinear()
    assert p_ce(identity_mech(poi), prior) == 0.0


def test_p_ce_coin_alpha_half_enumerated():
    poi, prior = collinear()
    mech = build_coin(prior, Euclidean(), 1.0 / 3.0)  # Q*/2 -> alpha = 0.5
    # enumerate Eq.-style atoms by hand: outputs are x0, x1(=z*), x2
    # P(z=x1) = alpha/3 + (1-alpha) = 2/3, posterior (0.25, 0.5, 0.25)
    # P(z=x0) = P(z=x2) = alpha/3 = 1/6, point-mass posteriors
    want = (2.0 / 3.0) * (-0.5 * math.log2(0.5) - 2 * 0.25 * math.log2(0.25))
    assert p_ce(mech, prior) == pytest.approx(want, abs=1e-12)


def test_mutual_information_complement():
    rng = np.random.default_rng(22)
    poi = PoiSet(rng.uniform(-2, 2, size=(6, 2)))
    prior = Prior(poi, rng.dirichlet(np.ones(6)))
    mech = DiscreteMechanism(
        poi, rng.uniform(-2, 2, size=(5, 2)), rng.dirichlet(np.ones(5), size=6)
    )
    # independent joint-based I(X;Z) oracle
    joint = prior.pmf[:, None] * mech.matrix
    px = joint.sum(axis=1)
    pz = joint.sum(axis=0)
    mask = joint > 0
    mi = float(
        (joint[mask] * np.log2(joint[mask] / np.outer(px, pz)[mask])).sum()
    )
    assert mutual_information_bits(mech, prior) == pytest.approx(mi, abs=1e-9)
    assert p_ce(mech, prior) + mi == pytest.approx(prior.entropy_bits(), abs=1e-9)


def test_p_ce_invariant_under_relabeling():
    rng = np.random.default_rng(23)
    poi = PoiSet(rng.uniform(-2, 2, size=(6, 2)))
    prior = Prior(poi, rng.dirichlet(np.ones(6)))
    matrix = rng.dirichlet(np.ones(6), size=6)
    mech = DiscreteMechanism(poi, poi.coords, matrix)
    perm = rng.permutation(6)
    poi2 = PoiSet(poi.coords[perm] + 100.0)  # relabeled and translated
    prior2 = Prior(poi2, prior.pmf[perm])
    mech2 = DiscreteMechanism(poi2, poi2.coords, matrix[perm][:, perm])
    assert p_ce(mech, prior) == pytest.approx(p_ce(mech2, prior2), abs=1e-12)


# ----------------------------------------------------- geo-indistinguishability

def test_p_gi_structural_zero_gives_zero(grid):
    _, prior = grid
    mech = build_coin(prior, Euclidean(), 0.9)
    assert p_gi(mech) == 0.0


def test_p_gi_uniform_rows_unbounded():
    poi, _ = collinear()
    mech = DiscreteMechanism(poi, poi.coords, np.full((3, 3), 1.0 / 3.0))
    assert p_gi(mech) == GI_UNBOUNDED


def test_p_gi_ba_lower_bound(grid):
    _, prior = grid
    b = 2.0
    run = ba_fixed_point(prior, None, Euclidean(), BAParams(b))
    assert p_gi(run.mechanism) >= 1.0 / (2.0 * b) - 1e-9


def test_p_gi_two_point_hand_value():
    poi = PoiSet(np.array([[0.0, 0.0], [1.0, 0.0]]))
    mech = DiscreteMechanism(poi, poi.coords,
                             np.array([[0.8, 0.2], [0.2, 0.8]]))
    want = 1.0 / math.log(4.0)  # d=1, worst log ratio log(0.8/0.2)
    assert p_gi(mech) == pytest.approx(want, abs=1e-12)


def test_relaxed_check_vacuous_delta():
    poi, prior = collinear()
    chk = geo_ind_relaxed_check(identity_mech(poi), 0.1, 1.0 - 1e-13)
    assert chk.passed


def test_relaxed_check_ba_at_2b(grid):
    _, prior = grid
    b = 2.0
    run = ba_fixed_point(prior, None, Euclidean(), BAParams(b))
    chk = geo_ind_relaxed_check(run.mechanism, 2.0 * b, 0.0)
    assert chk.passed


def test_relaxed_check_coin_fails_with_witness(grid):
    _, prior = grid
    mech = build_coin(prior, Euclidean(), 0.9)
    chk = geo_ind_relaxed_check(mech, 100.0, 0.0)
    assert not chk.passed
    x, xp, z = chk.witness
    assert mech.matrix[x, z] > 0
    assert mech.matrix[xp, z] == 0


def test_relaxed_check_rejects_bad_delta():
    poi, _ = collinear()
    with pytest.raises(ValueError):
        geo_ind_relaxed_check(identity_mech(poi), 1.0, 1.0)


# ------------------------------------------------------ worst-case-output pair

def test_p_wc_ae_coin_zero(grid):
    _, prior = grid
    mech = build_coin(prior, Euclidean(), 0.9)
    assert p_wc_ae(mech, prior, Euclidean()) == pytest.approx(0.0, abs=1e-9)


def test_p_wc_ae_constant_equals_p_ae():
    poi, prior = collinear()
    mech = constant_mech(poi, [1.0, 0.0])
    assert p_wc_ae(mech, prior, Euclidean()) == pytest.approx(
        p_ae(mech, prior, Euclidean()), abs=1e-9
    )


def test_p_wc_ae_two_output_enumeration():
    poi = PoiSet(np.array([[0.0, 0.0], [1.0, 0.0]]))
    prior = Prior(poi, np.array([0.5, 0.5]))
    mech = DiscreteMechanism(poi, poi.coords, np.array([[0.9, 0.1], [0.5, 0.5]]))
    # output 0 posterior (9/14, 5/14); output 1 posterior (1/6, 5/6)
    # 1-D weighted-median errors: min(mass) * distance
    want = min(5.0 / 14.0, 1.0 / 6.0)
    assert p_wc_ae(mech, prior, Euclidean()) == pytest.approx(want, abs=1e-6)


def test_p_wc_ce_coin_zero(grid):
    _, prior = grid
    mech = build_coin(prior, Euclidean(), 0.9)
    assert p_wc_ce(mech, prior) == 0.0


def test_p_wc_ce_constant_and_identity():
    poi, prior = collinear()
    assert p_wc_ce(constant_mech(poi, [0.0, 0.0]), prior) == pytest.approx(
        prior.entropy_bits(), abs=1e-12
    )
    assert p_wc_ce(identity_mech(poi), prior) == 0.0


def test_worst_case_below_averages():
    rng = np.random.default_rng(24)
    for _ in range(5):
        poi = PoiSet(rng.uniform(-2, 2, size=(6, 2)))
        prior = Prior(poi, rng.dirichlet(np.ones(6)))
        mech = DiscreteMechanism(
            poi, rng.uniform(-2, 2, size=(4, 2)), rng.dirichlet(np.ones(4), size=6)
        )
        assert p_wc_ae(mech, prior, Euclidean()) <= p_ae(mech, prior, Euclidean()) + 1e-9
        assert p_wc_ce(mech, prior) <= p_ce(mech, prior) + 1e-9
        # estimation never beats doing nothing when d_P == d_Q
        assert p_ae(mech, prior, Euclidean()) <= q_avg(mech, prior, Euclidean()) + 1e-9


# ---------------------------------------------------------------------- report

def test_report_bundle(grid):
    _, prior = grid
    mech = build_coin(prior, Euclidean(), 0.9)
    rep = report(mech, prior, Euclidean(), Euclidean())
    assert rep.provenance == "exact"
    assert rep.q_avg == pytest.approx(0.9, abs=1e-12)
    assert rep.p_ae == pytest.approx(0.9, abs=1e-9)
    assert rep.p_gi == 0.0
    assert rep.p_ce <= prior.entropy_bits() + 1e-9


def test_metric_report_csv_row():
    rep = MetricReport(1.0, 2.0, 0.5, 3.0, None, 0.1, 0.2, "exact")
    row = rep.csv_row("coin", 0.5)
    parts = row.split(",")
    assert parts[0] == "coin"
    assert float(parts[1]) == 0.5
    assert math.isnan(float(parts[6]))  # p_gi None -> nan
    assert parts[-1] == "exact"
    assert len(parts) == len(MetricReport.CSV_HEADER.split(","))
