import numpy as np
import pytest

from lppm.geo import Euclidean, TagHamming
from lppm.lpopt import (
    LinearProgram,
    ShokriInstance,
    build_shokri_lp,
    dump_lp,
    extract_mechanism,
    simplex_solve,
    solve_shokri,
)
from lppm.mechanisms import optimal_constant_output
from lppm.metrics import p_ae, q_avg
from lppm.model import PoiSet, Prior


def test_lp_validation():
    with pytest.raises(ValueError):
        LinearProgram(np.ones(2), np.ones((1, 3)), ["<="], np.ones(1))
    with pytest.raises(ValueError):
        LinearProgram(np.ones(2), np.ones((1, 2)), ["<"], np.ones(1))
    with pytest.raises(ValueError):
        LinearProgram(np.array([np.inf, 1.0]), np.ones((1, 2)), ["<="], np.ones(1))


def test_simplex_trivial_box():
    lp = LinearProgram(np.array([1.0]), np.array([[1.0]]), ["<="], np.array([1.0]))
    res = simplex_solve(lp)
    assert res.status == "optimal"
    assert res.value == pytest.approx(1.0, abs=1e-10)


def test_simplex_hand_solved_vertex():
    # max 3x + 5y s.t. x <= 4, 2y <= 12, 3x + 2y <= 18 -> (2, 6), value 36
    lp = LinearProgram(
        np.array([3.0, 5.0]),
        np.array([[1.0, 0.0], [0.0, 2.0], [3.0, 2.0]]),
        ["<=", "<=", "<="],
        np.array([4.0, 12.0, 18.0]),
    )
    res = simplex_solve(lp)
    assert res.status == "optimal"
    assert res.value == pytest.approx(36.0, abs=1e-10)
    np.testing.assert_allclose(res.x, [2.0, 6.0], atol=1e-10)


def test_simplex_equality_and_geq():
    # max x + y s.t. x + y = 2, x >= 0.5 -> value 2
    lp = LinearProgram(
        np.array([1.0, 1.0]),
        np.array([[1.0, 1.0], [1.0, 0.0]]),
        ["=", ">="],
        np.array([2.0, 0.5]),
    )
    res = simplex_solve(lp)
    assert res.status == "optimal"
    assert res.value == pytest.approx(2.0, abs=1e-10)


def test_simplex_infeasible():
    lp = LinearProgram(
        np.array([1.0]), np.array([[1.0], [1.0]]), ["<=", ">="],
        np.array([1.0, 2.0]),
    )
    assert simplex_solve(lp).status == "infeasible"


def test_simplex_unbounded():
    lp = LinearProgram(np.array([1.0]), np.array([[-1.0]]), ["<="], np.array([0.0]))
    assert simplex_solve(lp).status == "unbounded"


def test_dump_lp_format():
    lp = LinearProgram(np.array([1.0, 2.0]), np.array([[1.0, 1.0]]), ["<="],
                       np.array([3.0]), names=["a", "b"])
    text = dump_lp(lp)
    lines = text.strip().split("\n")
    assert lines[0].startswith("max ")
    assert lines[1].endswith("<= 3.0")


# ---------------------------------------------------------- mechanism-design LP

def test_shokri_lp_dimensions(grid):
    poi, prior = grid
    inst = ShokriInstance(poi, prior, Euclidean(), Euclidean(), 1.0)
    lp = build_shokri_lp(inst)
    assert lp.A.shape == (625 + 25 + 1, 650)
    assert lp.senses.count("=") == 25
    assert lp.senses.count("<=") == 626
    with pytest.raises(ValueError):
        ShokriInstance(poi, prior, Euclidean(), Euclidean(), -1.0)


def test_shokri_zero_budget_is_identity(grid):
    poi, prior = grid
    inst = ShokriInstance(poi, prior, Euclidean(), Euclidean(), 0.0)
    mech, value = solve_shokri(inst)
    assert value == pytest.approx(0.0, abs=1e-9)
    np.testing.assert_allclose(mech.matrix, np.eye(25), atol=1e-9)


def test_shokri_value_matches_candidate_p_ae(grid):
    poi, prior = grid
    _, q_star = optimal_constant_output(prior, Euclidean())
    inst = ShokriInstance(poi, prior, Euclidean(), Euclidean(), 0.3 * q_star)
    mech, value = solve_shokri(inst)
    recomputed = p_ae(mech, prior, Euclidean(), candidates=poi.coords)
    assert value == pytest.approx(recomputed, abs=1e-6)
    assert q_avg(mech, prior, Euclidean()) <= 0.3 * q_star + 1e-8


def test_shokri_semantic_distance(grid):
    poi, prior = grid
    dp = TagHamming(poi.tags)
    inst = ShokriInstance(poi, prior, dp, Euclidean(), 0.5)
    mech, value = solve_shokri(inst)
    assert value >= 0.0
    assert mech.output_tags == poi.tags


def test_shokri_objective_scales_with_dp(grid):
    poi, prior = grid

    class Scaled:
        def __init__(self, c):
            self.c = c

        def pairwise(self, a, b):
            return self.c * Euclidean().pairwise(a, b)

    budget = 0.4
    base = simplex_solve(build_shokri_lp(
        ShokriInstance(poi, prior, Euclidean(), Euclidean(), budget)))
    scaled = simplex_solve(build_shokri_lp(
        ShokriInstance(poi, prior, Scaled(3.0), Euclidean(), budget)))
    assert scaled.value == pytest.approx(3.0 * base.value, rel=1e-8)


def test_extract_rejects_unsolved(grid):
    poi, prior = grid
    inst = ShokriInstance(poi, prior, Euclidean(), Euclidean(), 1.0)
    from lppm.lpopt import SimplexResult

    with pytest.raises(ValueError):
        extract_mechanism(SimplexResult("infeasible", float("nan"), np.zeros(650)),
                          inst)
