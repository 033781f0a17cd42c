"""Edge-revealing algorithms for Bernoulli bond percolation.

* origin cluster: reveals the edges touching the open cluster of 0 in Lambda_R;
  determines A_1(R).
* hyperplane sweep: reveals the edges touching the open cluster of the left
  face of the box; determines the left-right crossing.
* interface (d = 2): starts from the left and bottom sides and reveals edges
  lying between the primal cluster of those sides and the dual cluster of
  their dual neighbours; determines the left-right crossing.
"""
from __future__ import annotations

import numpy as np

from .. import _explore
from ..lattice import (BondConfig, DualView, Event, LatticeBox, UnsupportedDimension, _csr,
                       crossing, dual_crossing_rect, one_arm, rect_crossing)
from .base import AlgorithmSpec


def _states(sample) -> np.ndarray:
    if isinstance(sample, BondConfig):
        return sample.open
    return np.ascontiguousarray(sample, dtype=bool)


class BondAlgorithm(AlgorithmSpec):
    unit_kind = "edge"

    def __init__(self, box: LatticeBox, event: Event):
        self.box = box
        self.event = event
        self.n_units = box.n_edges
        self.units = np.arange(box.n_edges)
        self._indptr, self._nbr, self._eid = box.csr
        self._domain = np.ones(box.n_edges, dtype=bool)

    def state_summary(self, sample, unit):
        return "open" if bool(_states(sample)[unit]) else "closed"

    def direct(self, sample) -> bool:
        return bool(self.event(_states(sample)))

    def run_batch(self, states: np.ndarray, aux=None):
        """Revealed masks and outputs for every row of ``states``."""
        m = states.shape[0]
        revealed = np.zeros((m, self.box.n_edges), dtype=bool)
        outputs = np.zeros(m, dtype=bool)
        for i in range(m):
            order, out, _ = self.run(states[i], aux)
            revealed[i, order] = True
            outputs[i] = out
        return revealed, outputs

    def _explore(self, states, seeds, revealed=None, order=None, n_order=0):
        if revealed is None:
            revealed = np.zeros(self.box.n_edges, dtype=bool)
            order = np.empty(self.box.n_edges, dtype=np.int64)
        n_order, in_cl = _explore.explore_cluster(
            self._indptr, self._nbr, self._eid, self.box.edge_u, self.box.edge_v,
            self._domain, states, seeds, self.box.n_vertices, revealed, order, n_order)
        return revealed, order, n_order, in_cl


class OriginCluster(BondAlgorithm):
    name = "origin-cluster"
    seeding = "origin"
    growth = "primal cluster"

    def __init__(self, R: int, d: int = 2):
        if R < 1:
            raise ValueError("R >= 1")
        box = LatticeBox.cube(d, R)
        super().__init__(box, one_arm(box, R))
        self.R = R
        self._seed = np.array([box.vertex_index((0,) * d)])
        self._ring = box.sup_norm() == R

    def run(self, sample, aux=None):
        states = _states(sample)
        _, order, n, in_cl = self._explore(states, self._seed)
        return order[:n].copy(), bool(np.any(in_cl & self._ring)), {}


def _crossing_event(box: LatticeBox, k, R):
    if k is None:
        return rect_crossing(box, box.shape[0], box.shape[1])
    return crossing(box, k, R)


class HyperplaneSweep(BondAlgorithm):
    name = "hyperplane"
    seeding = "hyperplane"
    growth = "primal cluster"

    def __init__(self, k=1, R: int = 1, d: int = 2, box: LatticeBox | None = None):
        if box is None:
            if R < 1:
                raise ValueError("R >= 1")
            box = LatticeBox.crossing_box(d, R, k)
            event = crossing(box, k, R)
        else:
            event = _crossing_event(box, None, None)
        super().__init__(box, event)
        self._left = box.face(0, -1)
        self._right = np.zeros(box.n_vertices, dtype=bool)
        self._right[box.face(0, +1)] = True

    def run(self, sample, aux=None):
        states = _states(sample)
        _, order, n, in_cl = self._explore(states, self._left)
        return order[:n].copy(), bool(np.any(in_cl & self._right)), {}


class Interface(BondAlgorithm):
    name = "interface"
    seeding = "boundary-lines"
    growth = "interface"

    def __init__(self, k=1, R: int = 1, box: LatticeBox | None = None):
        if box is None:
            box = LatticeBox.crossing_box(2, R, k)
            event = crossing(box, k, R)
        else:
            event = _crossing_event(box, None, None)
        if box.d != 2:
            raise UnsupportedDimension("the interface algorithm is planar")
        super().__init__(box, event)
        dual = DualView(box)
        self._dual = dual
        self._fu, self._fv = dual.du, dual.dv
        self._f_indptr, _, self._f_eid = _csr(dual.n_faces, dual.du, dual.dv)
        lines = np.union1d(box.face(0, -1), box.face(1, -1))
        self._seed_v = lines
        self._seed_f = dual.star(lines)
        self._left = box.face(0, -1)
        self._right = np.zeros(box.n_vertices, dtype=bool)
        self._right[box.face(0, +1)] = True
        self._primal = event.arms[0]
        self._dual_arm = dual_crossing_rect(box, box.shape[0], box.shape[1]).arms[0]

    def run(self, sample, aux=None):
        states = _states(sample)
        revealed = np.zeros(self.box.n_edges, dtype=bool)
        order = np.empty(self.box.n_edges, dtype=np.int64)
        n = _explore.explore_interface(
            self._indptr, self._nbr, self._eid, self.box.edge_u, self.box.edge_v,
            self._fu, self._fv, self._f_indptr, self._f_eid, self._domain, states,
            self._seed_v, self._seed_f, self.box.n_vertices, self._dual.n_faces,
            revealed, order, 0)
        known_open = states & revealed
        if self._primal.holds(known_open):
            return order[:n].copy(), True, {"readout": "primal"}
        # dual arm uses closed bonds: treat unrevealed edges as open
        if self._dual_arm.holds(states | ~revealed):
            return order[:n].copy(), False, {"readout": "dual"}
        # not yet determined: finish with the cluster of the left face
        revealed, order, n, in_cl = self._explore(states, self._left, revealed, order, n)
        return order[:n].copy(), bool(np.any(in_cl & self._right)), {"readout": "fallback"}


class FullReveal(BondAlgorithm):
    """Reveals the event's support in index order, then evaluates it."""

    name = "full-reveal"
    seeding = "fixed order"
    growth = "none"

    def __init__(self, box: LatticeBox, event: Event):
        super().__init__(box, event)

    def run(self, sample, aux=None):
        states = _states(sample)
        return self.event.support.copy(), bool(self.event(states)), {}


def alg_origin_cluster(R: int, d: int = 2) -> OriginCluster:
    return OriginCluster(R, d)


def alg_hyperplane_sweep(k=1, R: int = 1, d: int = 2, box: LatticeBox | None = None) -> HyperplaneSweep:
    return HyperplaneSweep(k, R, d, box)


def alg_interface(k=1, R: int = 1, box: LatticeBox | None = None) -> Interface:
    return Interface(k, R, box)
