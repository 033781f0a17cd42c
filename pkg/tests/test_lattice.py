import numpy as np
import pytest

from percolab.lattice import (InvalidQuery, LatticeBox, UnsupportedDimension, BondConfig, DualView,
                              cluster_labels, cluster_of, connected, crossing_rect, dual_crossing_rect,
                              one_arm, one_arm_event, rect_crossing, sample_bond_config, two_arm,
                              two_arm_event, two_point_connected)
from percolab.rng import ReplicaStream, replica_key


def test_box_counts():
    box = LatticeBox.cube(2, 2)
    assert box.n_vertices == 25
    assert box.n_edges == 40
    b3 = LatticeBox.cube(3, 1)
    assert b3.n_vertices == 27 and b3.n_edges == 54


def test_rectangle_is_vertex_counted():
    box = LatticeBox.rectangle(3, 2)
    assert box.lo == (0, 0) and box.hi == (2, 1)
    assert box.n_edges == 7


def test_edge_lookup_roundtrip():
    box = LatticeBox.cube(2, 3)
    e = box.edge_between((0, 0), (1, 0))
    assert box.edge_between((1, 0), (0, 0)) == e
    with pytest.raises(InvalidQuery):
        box.edge_between((0, 0), (1, 1))
    with pytest.raises(InvalidQuery):
        box.vertex_index((9, 0))


def test_uniforms_do_not_depend_on_box():
    small, big = LatticeBox.cube(2, 2), LatticeBox.cube(2, 5)
    rng = ReplicaStream(7, 3)
    us = rng.edge_uniforms(small.edge_base, small.edge_axis)
    ub = rng.edge_uniforms(big.edge_base, big.edge_axis)
    idx = [big.edge_index(small.edge_base[i], int(small.edge_axis[i])) for i in range(small.n_edges)]
    assert np.array_equal(us, ub[idx])


def test_replica_keys_differ():
    keys = {replica_key(1, r, t) for r in range(50) for t in range(3)}
    assert len(keys) == 150


def test_monotone_coupling():
    box = LatticeBox.cube(2, 4)
    rng = ReplicaStream(2, 0)
    lo, hi = sample_bond_config(box, 0.3, rng), sample_bond_config(box, 0.6, rng)
    assert np.all(lo.open <= hi.open)


def test_config_is_read_only():
    box = LatticeBox.cube(2, 1)
    cfg = BondConfig(box, np.zeros(box.n_edges, bool))
    with pytest.raises(ValueError):
        cfg.open[0] = True
    with pytest.raises(InvalidQuery):
        BondConfig(box, np.zeros(3, bool))


def test_extreme_configurations():
    box = LatticeBox.cube(2, 3)
    full = BondConfig(box, np.ones(box.n_edges, bool))
    empty = BondConfig(box, np.zeros(box.n_edges, bool))
    assert one_arm_event(full, 3) and not one_arm_event(empty, 3)
    assert not two_arm_event(full, 3) and not two_arm_event(empty, 3)
    assert cluster_of(full, [0]).size == box.n_vertices
    assert np.array_equal(cluster_of(empty, [4]), [4])
    assert two_point_connected(full, (3, 3))


def test_empty_path_counts():
    box = LatticeBox.cube(2, 2)
    empty = BondConfig(box, np.zeros(box.n_edges, bool))
    assert connected(empty, [3], [3])
    assert one_arm_event(empty, 0)


def test_domain_restricts_paths():
    box = LatticeBox.rectangle(3, 1)
    cfg = BondConfig(box, np.ones(box.n_edges, bool))
    assert connected(cfg, [0], [2])
    assert not connected(cfg, [0], [2], domain=[0])


def test_union_find_matches_reach():
    box = LatticeBox.cube(2, 4)
    cfg = sample_bond_config(box, 0.5, ReplicaStream(11, 0))
    lab = cluster_labels(cfg)
    cl = cluster_of(cfg, [0])
    assert set(np.flatnonzero(lab == lab[0])) == set(cl)


def test_duality_rect_exclusive_and_exhaustive():
    # (m+1) x m primal crossing and its dual blocking crossing partition the space
    box = LatticeBox.rectangle(5, 4)
    prim, dual = rect_crossing(box, 5, 4), dual_crossing_rect(box, 5, 4)
    for i in range(300):
        cfg = sample_bond_config(box, 0.5, ReplicaStream(5, i))
        assert prim(cfg) != dual(cfg)


def test_two_arm_small_radius_reduces_to_one_arm():
    box = LatticeBox.cube(2, 2)
    for i in range(50):
        cfg = sample_bond_config(box, 0.5, ReplicaStream(3, i))
        assert two_arm(box, 1)(cfg) == one_arm(box, 1)(cfg)


def test_dual_is_planar_only():
    with pytest.raises(UnsupportedDimension):
        DualView(LatticeBox.cube(3, 1))


def test_crossing_rect_helper():
    box = LatticeBox.rectangle(4, 2)
    cfg = BondConfig(box, np.ones(box.n_edges, bool))
    assert crossing_rect(cfg, 4, 2)
