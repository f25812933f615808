import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from weakrigidity.errors import InvalidSpec
from weakrigidity.graph import Configuration, FrameworkSpec, as_positions, sensing_graph, validate


def spec1(n, edges=(), angles=(), et=None, at=None, d=2):
    et = [1.0] * len(edges) if et is None else et
    at = [0.5] * len(angles) if at is None else at
    return FrameworkSpec.from_one_based(n, d, edges, angles, et, at)


def test_duplicate_edge_under_symmetry_is_reported():
    problems = validate(spec1(3, edges=[(1, 2), (2, 1)]))
    assert any("duplicate edge" in p for p in problems)


def test_simulation_three_targets_are_valid():
    spec = spec1(3, edges=[(1, 2)], angles=[(1, 2, 3), (3, 1, 2)], et=[100.0],
                 at=[np.cos(np.pi / 3)] * 2)
    assert validate(spec) == []


@pytest.mark.parametrize("c", [1.0, -1.0, 1.5])
def test_cosine_target_outside_open_interval(c):
    problems = validate(spec1(3, angles=[(1, 2, 3)], at=[c]))
    assert any("cosine target" in p for p in problems)


def test_other_violations():
    assert any("self loop" in p for p in validate(spec1(3, edges=[(1, 1)])))
    assert any("out of range" in p for p in validate(spec1(3, edges=[(1, 4)])))
    assert any("> 0" in p for p in validate(spec1(3, edges=[(1, 2)], et=[0.0])))
    assert any("distinct" in p for p in validate(spec1(3, angles=[(1, 1, 2)])))
    assert any("duplicate angle" in p for p in validate(spec1(3, angles=[(1, 2, 3), (1, 3, 2)])))
    assert any("no constraints" in p for p in validate(spec1(3)))
    assert any(">= 3" in p for p in validate(FrameworkSpec(2, 2, [(0, 1)], (), [1.0])))
    assert any("dimension" in p for p in validate(FrameworkSpec(3, 4, [(0, 1)], (), [1.0])))
    assert any("targets" in p for p in validate(FrameworkSpec(3, 2, [(0, 1)], (), [])))
    with pytest.raises(InvalidSpec):
        spec1(3, edges=[(1, 2), (1, 2)]).check()


def test_edges_are_canonicalized():
    spec = spec1(3, edges=[(3, 1)])
    assert spec.edges == ((0, 2),)
    assert spec.one_based()[0] == [(1, 3)]


def test_sensing_graph_examples():
    s = sensing_graph(spec1(3, edges=[(1, 2)], angles=[(1, 2, 3), (3, 1, 2)]))
    assert s.edges == ((0, 1), (0, 2), (1, 2))
    assert sensing_graph(spec1(3, angles=[(1, 2, 3)])).edges == ((0, 1), (0, 2), (1, 2))
    fig2b = spec1(4, edges=[(1, 2)], angles=[(2, 3, 1), (3, 1, 2), (1, 3, 4), (4, 1, 3)])
    drawn = {(0, 1), (0, 2), (1, 2), (0, 3), (2, 3)}
    assert set(sensing_graph(fig2b).edges) == drawn
    assert sensing_graph(fig2b).neighbors[3] == (0, 2)


triple = st.tuples(st.integers(0, 4), st.integers(0, 4), st.integers(0, 4)).filter(
    lambda t: len(set(t)) == 3
)


@settings(max_examples=60, deadline=None)
@given(st.lists(triple, min_size=1, max_size=6, unique=True), st.randoms())
def test_sensing_graph_is_order_independent_and_covers_vertices(angles, rnd):
    spec = FrameworkSpec(5, 2, (), angles, (), [0.1] * len(angles))
    shuffled = list(angles)
    rnd.shuffle(shuffled)
    other = FrameworkSpec(5, 2, (), shuffled, (), [0.1] * len(angles))
    g = sensing_graph(spec)
    assert g == sensing_graph(other)
    used = {v for t in angles for v in t}
    assert all(g.neighbors[v] for v in used)


def test_configuration_shapes():
    cfg = Configuration.from_positions(np.arange(6.0).reshape(3, 2))
    assert cfg.n == 3 and cfg.positions.shape == (3, 2)
    with pytest.raises(ValueError):
        Configuration(np.arange(5.0), 2)
    spec = spec1(3, edges=[(1, 2)])
    assert as_positions(np.arange(6.0), spec).shape == (3, 2)
    with pytest.raises(ValueError):
        as_positions(np.zeros((4, 2)), spec)


def test_subset_and_labels():
    spec = spec1(3, edges=[(1, 2)], angles=[(1, 2, 3), (3, 1, 2)], et=[4.0], at=[0.1, 0.2])
    sub = spec.subset([0, 2])
    assert sub.edges == ((0, 1),) and sub.angles == ((2, 0, 1),)
    assert sub.angle_targets == (0.2,)
    assert spec.constraint_labels() == ["d12", "a1_23", "a3_12"]
