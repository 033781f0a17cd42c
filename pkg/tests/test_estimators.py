import math

import numpy as np
import pytest

from percolab import oracle as O
from percolab.estimators import bernoulli as eb
from percolab.estimators import gaussian as eg
from percolab.estimators import revealment as ev
from percolab.estimators.core import (BernoulliModel, EventSpec, GaussianModel, InvalidData, InvalidParameter,
                                      Term, fit_exponential_decay, fit_power_law, indicator_estimate,
                                      mean_estimate, model_from_dict, ratio_term, upper_bound_verdict)
from percolab.estimators.mc import bernoulli_indicators, mc_estimate
from percolab.explorer import HyperplaneSweep, Interface, OriginCluster
from percolab.lattice import LatticeBox, rect_crossing
from percolab.parallel import workers

GM = GaussianModel(0.0, 0.25, 3.0)


# ---------------------------------------------------------------- basics
def test_indicator_estimate():
    e = indicator_estimate([1, 0, 1, 1], seed=3)
    assert e.mean == 0.75 and e.stderr == pytest.approx(math.sqrt(0.75 * 0.25 / 4)) and e.n == 4
    with pytest.raises(InvalidParameter):
        indicator_estimate([], 0)
    assert mean_estimate([2.0], 0).stderr == 0


def test_upper_bound_verdict():
    assert upper_bound_verdict(Term(1.0, 0.1), Term(0.8, 0.0)) == (True, pytest.approx(-2.0))
    assert not upper_bound_verdict(Term(1.0, 0.05), Term(0.8, 0.0))[0]
    assert upper_bound_verdict(Term(1.0), Term(1.0)) == (True, None)
    assert ratio_term(Term(1.0), Term(0.0)).value == math.inf


def test_power_fit_recovers_exponent():
    pts = [(R, 2.0 * R ** -0.25) for R in (4, 8, 16, 32)]
    f = fit_power_law(pts)
    assert f.rate == pytest.approx(0.25) and f.r2 == pytest.approx(1.0)
    e = fit_exponential_decay([(R, math.exp(-0.3 * R)) for R in (1, 2, 3, 4)])
    assert e.rate == pytest.approx(0.3)


def test_fit_rejects_bad_data():
    with pytest.raises(InvalidData):
        fit_power_law([(4, 0.5)])
    with pytest.raises(InvalidData):
        fit_power_law([(4, 0.5), (8, 0.0)])
    with pytest.raises(InvalidData):
        fit_exponential_decay([(1, 0.5), (2, float("nan")), (3, 0.1)])


def test_event_spec_validation():
    with pytest.raises(InvalidParameter):
        EventSpec("nope")
    with pytest.raises(InvalidParameter):
        EventSpec("one_arm")
    assert model_from_dict({"model": "bernoulli", "p": 0.5}).param == 0.5


# ---------------------------------------------------------------- Monte Carlo
def test_mc_matches_exact_rect():
    box = LatticeBox.rectangle(3, 3)
    exact = O.enumerate_probability(rect_crossing(box, 3, 3), np.arange(box.n_edges), 0.6)
    e = mc_estimate(EventSpec("rect", a=3, b=3), BernoulliModel(0.6), 20000, 4)
    assert abs(e.mean - exact) <= 4 * e.stderr


def test_mc_is_reproducible_and_worker_invariant():
    spec, m = EventSpec("one_arm", R=6), BernoulliModel(0.5)
    a = bernoulli_indicators(spec, m, 9000, 11)
    with workers(2):
        b = bernoulli_indicators(spec, m, 9000, 11)
    assert np.array_equal(a, b)
    # prefixes agree: replica i does not depend on n
    assert np.array_equal(a[:5000], bernoulli_indicators(spec, m, 5000, 11))


def test_one_arm_decreases_in_R():
    vals = [mc_estimate(EventSpec("one_arm", R=R), BernoulliModel(0.5), 4000, 1).mean for R in (2, 4, 8)]
    assert vals[0] > vals[1] > vals[2]


def test_russo_matches_finite_difference_and_exact():
    box = LatticeBox.rectangle(3, 2)
    ev_ = rect_crossing(box, 3, 2)
    exact = sum(O.enumerate_pivotal_derivative(ev_, int(e), 0.5) for e in ev_.support)
    r = eb.russo_derivative_estimate(EventSpec("rect", a=3, b=2), 0.5, 20000, 1)
    assert abs(r.mean - exact) <= 4 * r.stderr


def test_ubb1_and_two_arm_square():
    assert eb.check_ubb1(0.5, 0.55, 8, 4000, 1).verdict
    rep = eb.check_ubb1(0.5, 0.5, 8, 2000, 1)
    assert rep.terms["lhs"].value == 0
    assert eb.check_two_arm_square(8, 4000, 1).verdict


def test_subcritical_correlation_length():
    out = eb.correlation_length_estimate(0.4, [4, 8, 12, 16], 4000, 1)
    assert out["rate"] > 0


# ---------------------------------------------------------------- Gaussian
def test_gaussian_two_arm_square():
    assert eg.check_two_arm_square_gaussian(GM, 1.0, 6.0, 200, 1).verdict


def test_gaussian_russo_positive():
    rep = eg.check_gaussian_russo(GM, 3.0, 12.0, 80, 1)
    assert rep.verdict and rep.terms["outer_ring_infl"].value == 0


def test_truncation_monotone():
    assert eg.check_truncation([1, 2, 4], 6.0, 0.0, 150, 1).verdict


def test_lbderiv_full_subset_has_no_gap():
    rep = eg.check_lbderiv(GM, 3.0, 12.0, 150, 1)
    assert rep.verdict
    assert abs(rep.info["total_variance_gap"]) < 0.05


def test_ubgf1():
    assert eg.check_ubgf1(GM, 0.3, 12.0, 100, 1).verdict


def test_square_symmetry_small():
    P, bias = eg.square_crossing_with_bias(GM, 8.0, 300, 1)
    # an 8-connected crossing contains every 4-connected one, so the bias is never positive
    assert bias.mean <= 0
    assert abs(P.mean - 0.5 - bias.mean) <= 4 * P.stderr


# ---------------------------------------------------------------- revealments
def test_bond_revealment_bounds():
    assert ev.check_origin_cluster_bound(0.5, 6, 1500, 1).verdict
    assert ev.check_hyperplane_bound(0.5, 6, 1500, 1).verdict
    assert ev.check_interface_bound(0.5, 6, 1500, 1).verdict


@pytest.mark.parametrize("alg,p", [(OriginCluster(1), 0.5), (HyperplaneSweep(box=LatticeBox.rectangle(3, 2)), 0.3),
                                   (Interface(box=LatticeBox.rectangle(3, 3)), 0.7)], ids=["origin", "hyper", "iface"])
def test_mc_revealment_agrees_with_oracle(alg, p):
    assert ev.check_oracle_agreement(alg, p, 6000, 2).verdict


def test_revealment_tables_worker_invariant():
    alg = Interface(1, 4)
    t1, o1 = ev.revealment_run(alg, BernoulliModel(0.5), 5000, 3)
    with workers(2):
        t2, o2 = ev.revealment_run(alg, BernoulliModel(0.5), 5000, 3)
    assert np.array_equal(t1.counts, t2.counts) and np.array_equal(o1, o2)


def test_model_algorithm_mismatch():
    from percolab.explorer import alg_gaussian_one_arm
    with pytest.raises(Exception):
        ev.revealment_run(alg_gaussian_one_arm(GM.kernel, 4.0), BernoulliModel(0.5), 10, 1)
