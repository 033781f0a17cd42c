import itertools
import math
from fractions import Fraction

import numpy as np
import pytest

from percolab import oracle as O
from percolab.explorer import FullReveal, HyperplaneSweep, Interface, OriginCluster
from percolab.lattice import (LatticeBox, all_open, constant, crossing, dictator, one_arm, rect_crossing,
                              two_point)

HALF = Fraction(1, 2)


def _naive_probability(box, holds, p):
    # independent brute force: plain union-find per configuration, exact arithmetic
    eu, ev = box.edge_u, box.edge_v
    total = Fraction(0)
    for bits in itertools.product((0, 1), repeat=box.n_edges):
        parent = list(range(box.n_vertices))

        def find(x):
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        for e, b in enumerate(bits):
            if b:
                parent[find(int(eu[e]))] = find(int(ev[e]))
        if holds(find, box):
            k = sum(bits)
            total += p ** k * (1 - p) ** (box.n_edges - k)
    return total


def test_frozen_one_arm_radius_one():
    box = LatticeBox.cube(2, 1)
    assert O.enumerate_probability(one_arm(box, 1), np.arange(box.n_edges), HALF) == Fraction(15, 16)


def test_frozen_rect_crossings_are_half():
    for m in (1, 2, 3):
        box = LatticeBox.rectangle(m + 1, m)
        assert O.enumerate_probability(rect_crossing(box, m + 1, m), np.arange(box.n_edges), HALF) == HALF


def test_frozen_two_point_against_naive():
    box = LatticeBox.cube(2, 1)
    exact = O.enumerate_probability(two_point(box, (1, 0)), np.arange(box.n_edges), HALF)
    assert exact == Fraction(2589, 4096)
    o, t = box.vertex_index((0, 0)), box.vertex_index((1, 0))
    assert _naive_probability(box, lambda f, b: f(o) == f(t), HALF) == exact
    assert O.enumerate_probability(two_point(box, (1, 1)), np.arange(box.n_edges), HALF) == Fraction(501, 1024)


def test_crossing_against_naive():
    box = LatticeBox.rectangle(3, 3)
    left = [box.vertex_index((0, y)) for y in range(3)]
    right = [box.vertex_index((2, y)) for y in range(3)]
    naive = _naive_probability(box, lambda f, b: {f(x) for x in left} & {f(x) for x in right}, Fraction(3, 10))
    ev = rect_crossing(box, 3, 3)
    assert O.enumerate_probability(ev, np.arange(box.n_edges), Fraction(3, 10)) == naive


def test_float_matches_fraction():
    box = LatticeBox.rectangle(3, 3)
    ev = rect_crossing(box, 3, 3)
    fr = O.enumerate_probability(ev, ev.support, Fraction(7, 10))
    assert O.enumerate_probability(ev, ev.support, 0.7) == pytest.approx(float(fr), abs=1e-14)


def test_resource_limits():
    box = LatticeBox.cube(2, 2)
    ev = one_arm(box, 2)
    with pytest.raises(O.ResourceLimit):
        O.enumerate_probability(ev, np.arange(box.n_edges), 0.5)
    with pytest.raises(O.ContractViolation):
        O.enumerate_probability(ev, [0, 1], 0.5)


def test_influence_and_russo():
    box = LatticeBox.rectangle(3, 2)
    ev = rect_crossing(box, 3, 2)
    p, h = 0.4, 1e-5
    deriv = sum(O.enumerate_pivotal_derivative(ev, e, p) for e in ev.support)
    fd = (O.enumerate_probability(ev, ev.support, p + h) - O.enumerate_probability(ev, ev.support, p - h)) / (2 * h)
    assert deriv == pytest.approx(fd, rel=1e-6)
    # resampling influence is 2p(1-p) P[pivotal] for increasing events
    for e in ev.support:
        assert O.enumerate_influence(ev, int(e), p) == pytest.approx(
            2 * p * (1 - p) * O.enumerate_pivotal_derivative(ev, int(e), p), abs=1e-14)


def test_dictator_and_constants():
    ev = dictator(3, 1)
    assert O.enumerate_probability(ev, [0, 1, 2], 0.3) == pytest.approx(0.3)
    assert O.enumerate_influence(ev, 1, 0.3) == pytest.approx(2 * 0.3 * 0.7)
    assert O.enumerate_influence(ev, 0, 0.3) == 0
    assert O.enumerate_probability(constant(2, True), [0, 1], 0.2) == pytest.approx(1.0)
    assert O.enumerate_probability(all_open(3, [0, 2]), [0, 1, 2], HALF) == Fraction(1, 4)


def test_conditional_variance_extremes():
    box = LatticeBox.rectangle(3, 2)
    ev = rect_crossing(box, 3, 2)
    pa = O.enumerate_probability(ev, ev.support, 0.5)
    assert O.enumerate_conditional_variance(ev, ev.support, 0.5) == pytest.approx(pa * (1 - pa))
    assert O.enumerate_conditional_variance(ev, [], 0.5) == pytest.approx(0.0)


def test_exact_revealment_of_full_reveal():
    box = LatticeBox.rectangle(3, 2)
    ex = O.enumerate_revealment(FullReveal(box, rect_crossing(box, 3, 2)), 0.5)
    assert ex.determines
    assert np.allclose(ex.rev, 1.0)


def test_osss_dictator_equality():
    ev = dictator(1, 0)
    box = LatticeBox.rectangle(2, 1)
    r = O.check_osss(ev, FullReveal(box, ev), 0.5)
    assert r.holds and abs(r.slack) < 1e-12


@pytest.mark.parametrize("alg", ["hyperplane", "interface"])
@pytest.mark.parametrize("p", [0.3, 0.5, 0.7])
def test_osss_on_crossings(alg, p):
    box = LatticeBox.rectangle(3, 2)
    spec = HyperplaneSweep(box=box) if alg == "hyperplane" else Interface(box=box)
    r = O.check_osss(spec.event, spec, p)
    assert r.holds


def test_osss_origin_cluster():
    spec = OriginCluster(1)
    assert O.check_osss(spec.event, spec, 0.5).holds


def test_genlb_printed_constant_fails_for_dictator():
    ev = dictator(1, 0)
    box = LatticeBox.rectangle(2, 1)
    r = O.check_genlb(ev, FullReveal(box, ev), [0], 0.5)
    assert r.holds
    assert not r.extra["holds_printed"]


def test_genub_and_genrevbound():
    spec = HyperplaneSweep(box=LatticeBox.rectangle(3, 2))
    sub = spec.event.support[:3]
    assert O.check_genub(spec.event, spec, sub, 0.5, 0.6).holds
    assert O.check_genrevbound(spec.event, spec, sub, 0.5).holds


def test_kl_stopped_identity():
    lhs, rhs, diff = O.kl_stopped(0.3, 0.6, 6)
    assert diff <= 1e-12
    lhs, rhs, diff = O.kl_stopped(0.2, 0.5, 5, O.never)
    assert lhs == pytest.approx(5 * O.kl_bernoulli(0.2, 0.5))


def test_kl_edge_cases():
    assert O.kl_bernoulli(0.4, 0.4) == 0
    assert O.kl_bernoulli(0.5, 0.0) == math.inf
    assert O.kl_bernoulli(0.0, 0.5) == pytest.approx(math.log(2))
    with pytest.raises(O.ResourceLimit):
        O.kl_stopped(0.3, 0.4, 13)


def test_pinsker_variant():
    assert O.pinsker_sweep(0.01) >= 0
    assert O.pinsker_gap(0.3, 0.3) == pytest.approx(0.0)


def test_isoperimetry():
    assert O.isoperimetry_sweep() >= 0
    with pytest.raises(ValueError):
        O.isoperimetry_halfspace_check(1.0, 0.1)
