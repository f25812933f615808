import numpy as np
import pytest
from scipy.optimize import brentq

from _frameworks import equilateral
from weakrigidity.dynamics import SimConfig
from weakrigidity.equilibria import (
    align_to_x_axis,
    block_structure_check,
    classify_equilibrium,
    collinear_equilibrium_check,
    hessian_fd,
    monte_carlo_basin,
    sample_starts,
)
from weakrigidity.errors import InvalidPrecondition, NotCollinear
from weakrigidity.graph import FrameworkSpec
from weakrigidity.scenarios import load_scenario


def triangle_spec(side=10.0):
    return FrameworkSpec.from_one_based(3, 2, [(1, 2)], [(1, 2, 3), (3, 1, 2)], [side**2], [0.5, 0.5])


def test_desired_point_is_a_strict_minimum_up_to_trivial_motions():
    rep = classify_equilibrium(triangle_spec(), equilateral())
    assert rep.kind == "desired"
    assert rep.nontrivial_min_eig > 1e-3
    small = np.sum(np.abs(rep.hessian_spectrum) < 1e-6 * max(rep.hessian_spectrum))
    assert small == 3
    assert rep.symmetry_residual < 1e-6


def test_hessian_is_symmetric_at_random_points():
    rng = np.random.default_rng(1)
    spec = triangle_spec()
    for _ in range(10):
        P = rng.uniform(-10, 10, size=(3, 2))
        J = hessian_fd(spec, P, (0.1, 50.0))
        assert np.max(np.abs(J - J.T)) <= 1e-5 * max(1.0, np.max(np.abs(J)))


def test_fig8a_interaction_matrix_by_hand():
    # agent 1 at the origin between agents 2 (x=-10) and 3 (x=10). The edge
    # is satisfied, the angle at 1 has cos=-1 (error -1.5) and the angle at 3
    # has cos=1 (error 0.5). Summing the two weighted 3x3 coefficient blocks
    # with k_a = 300 gives E = -19.5 v v^T with v = (1, -1/2, -1/2).
    sc = load_scenario("fig8a")
    rep = classify_equilibrium(sc.spec, sc.positions, sc.sim_config().gains)
    v = np.array([1.0, -0.5, -0.5])
    np.testing.assert_allclose(rep.e_matrix_spectrum, np.sort(np.linalg.eigvalsh(-19.5 * np.outer(v, v))),
                               atol=1e-10)
    assert rep.e_matrix_min_eig == pytest.approx(-29.25, rel=1e-12)
    assert rep.kind == "incorrect" and rep.min_eig < 0


@pytest.mark.parametrize("name", ["fig8a", "fig8b", "fig8c"])
def test_collinear_incorrect_equilibria_are_saddles(name):
    sc = load_scenario(name)
    g = sc.sim_config().gains
    rep = classify_equilibrium(sc.spec, sc.positions, g)
    assert rep.kind == "incorrect"
    assert rep.min_eig < 0 and rep.e_matrix_min_eig < 0
    assert collinear_equilibrium_check(sc.spec, sc.positions, g)
    assert block_structure_check(sc.spec, sc.positions, g).ok()


def test_block_structure_at_independently_constructed_equilibrium():
    # on a line every cosine is +-1, so only the edge term can move the
    # agents; an equilibrium therefore needs |p_1 - p_2| = 10
    x = brentq(lambda s: s * s - 100.0, 1.0, 50.0)
    P = np.array([[0.0, 0.0], [x, 0.0], [25.0, 0.0]])
    th = 0.4
    Q = np.array([[np.cos(th), -np.sin(th)], [np.sin(th), np.cos(th)]])
    P = P @ Q.T + np.array([3.0, -1.0])
    spec = triangle_spec()
    rep = classify_equilibrium(spec, P, (0.005, 300.0))
    assert rep.kind == "incorrect"
    check = block_structure_check(spec, P, (0.005, 300.0))
    assert check.ok()
    A = align_to_x_axis(P)
    assert np.max(np.abs(A[:, 1])) < 1e-12 and np.max(np.abs(A.mean(0))) < 1e-12


def test_block_structure_needs_collinear_triangle():
    with pytest.raises(NotCollinear):
        block_structure_check(triangle_spec(), equilateral())
    spec4 = FrameworkSpec(4, 2, [(0, 1)], [], [1.0], [])
    with pytest.raises(InvalidPrecondition):
        block_structure_check(spec4, np.zeros((4, 2)))
    with pytest.raises(InvalidPrecondition):
        collinear_equilibrium_check(spec4, np.eye(4, 2))


def test_non_equilibrium_passes_collinearity_check():
    P = np.array([[0.0, 0.0], [4.0, 0.5], [1.0, 6.0]])
    assert classify_equilibrium(triangle_spec(), P).kind == "not_equilibrium"
    assert collinear_equilibrium_check(triangle_spec(), P)


def test_sample_starts():
    rng = np.random.default_rng(0)
    spec = triangle_spec()
    S = sample_starts(spec, 5, rng, box=20)
    assert S.shape == (5, 3, 2) and np.all(np.abs(S) <= 20)
    C = sample_starts(spec, 5, rng, box=20, collinear=True)
    assert np.all(C[:, :, 1] == C[:, :1, 1])


def test_monte_carlo_edge_cases():
    sc = load_scenario("sim3")
    cfg = SimConfig(dt=0.003, t_max=1.0, gain_dist=0.005, gain_angle=300)
    empty = monte_carlo_basin(sc.spec, 0, 1, cfg)
    assert empty.trials == 0 and empty.n_desired == 0 and np.isnan(empty.convergence_rate)
    a = monte_carlo_basin(sc.spec, 4, 7, cfg)
    b = monte_carlo_basin(sc.spec, 4, 7, cfg)
    assert a.to_json(sort_keys=True) == b.to_json(sort_keys=True)
    np.testing.assert_array_equal(a.final_positions, b.final_positions)
    assert a.n_desired + a.n_incorrect + a.n_horizon + a.n_degenerate == 4


def test_monte_carlo_rejects_redundant_constraints():
    spec = FrameworkSpec.from_one_based(3, 2, [(1, 2), (1, 3), (2, 3)], [(1, 2, 3)], [100.0] * 3, [0.5])
    with pytest.raises(InvalidPrecondition):
        monte_carlo_basin(spec, 1, 0, SimConfig(t_max=0.1))
