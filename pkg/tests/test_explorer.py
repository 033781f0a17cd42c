import json

import numpy as np
import pytest

from percolab.explorer import (AlgorithmError, AlgorithmSpec, FullReveal, HyperplaneSweep, Interface,
                               OriginCluster, RevealmentTable, alg_annulus_seed, alg_gaussian_left_line,
                               alg_gaussian_levelline, alg_gaussian_line, alg_gaussian_one_arm,
                               merge_tables, run_algorithm)
from percolab.gaussian import make_bargmann_fock_kernel, truncate_kernel
from percolab.lattice import BondConfig, LatticeBox, rect_crossing, sample_bond_config
from percolab.rng import ReplicaStream


def _bond_algs():
    return [OriginCluster(3), HyperplaneSweep(1, 3), Interface(1, 3),
            HyperplaneSweep(box=LatticeBox.rectangle(5, 4)), Interface(box=LatticeBox.rectangle(5, 4))]


@pytest.mark.parametrize("alg", _bond_algs(), ids=lambda a: a.name)
def test_bond_algorithm_determines_event(alg):
    for i in range(200):
        cfg = sample_bond_config(alg.box, 0.5, ReplicaStream(9, i))
        tr = run_algorithm(alg, cfg)
        assert tr.output == alg.direct(cfg)
        # flipping unrevealed edges never changes the output
        hidden = np.setdiff1d(np.arange(alg.n_units), tr.units)
        flipped = cfg.with_states(hidden, ~cfg.open[hidden])
        assert run_algorithm(alg, flipped).output == tr.output


def test_origin_cluster_extremes():
    alg = OriginCluster(2)
    box = alg.box
    empty = BondConfig(box, np.zeros(box.n_edges, bool))
    tr = run_algorithm(alg, empty)
    assert not tr.output and len(tr) == 4 and set(tr.states) == {"closed"}
    full = BondConfig(box, np.ones(box.n_edges, bool))
    assert run_algorithm(alg, full).output


def test_trace_jsonl():
    alg = HyperplaneSweep(box=LatticeBox.rectangle(3, 2))
    cfg = sample_bond_config(alg.box, 0.5, ReplicaStream(1, 0))
    tr = run_algorithm(alg, cfg)
    lines = tr.dump_jsonl().strip().split("\n")
    assert json.loads(lines[0])["output"] == tr.output
    assert [json.loads(x)["unit"] for x in lines[1:]] == tr.units


def test_full_reveal_reveals_support():
    box = LatticeBox.rectangle(3, 2)
    ev = rect_crossing(box, 3, 2)
    tr = run_algorithm(FullReveal(box, ev), BondConfig(box, np.ones(box.n_edges, bool)))
    assert sorted(tr.units) == ev.support.tolist()


class _Bad(AlgorithmSpec):
    n_units = 2

    def run(self, sample, aux):
        return [0, 0], True, {}

    def state_summary(self, sample, unit):
        return 0


def test_repeated_unit_rejected():
    with pytest.raises(AlgorithmError):
        run_algorithm(_Bad(), None)


def test_revealment_table_merge():
    a, b = RevealmentTable.empty(3), RevealmentTable.empty(3)
    a.add(np.array([1, 0, 1], bool))
    b.add(np.array([1, 1, 0], bool))
    b.add(np.array([0, 0, 0], bool))
    m1, m2 = a.merge(b), merge_tables([b, a])
    assert np.array_equal(m1.counts, m2.counts) and m1.n == m2.n == 3
    assert np.allclose(m1.rev, [2 / 3, 1 / 3, 1 / 3])
    assert m1.mean_size == pytest.approx(4 / 3)


KERNEL = truncate_kernel(make_bargmann_fock_kernel(2, 0.25, 4.0), 2.0)
FIELD_ALGS = [alg_gaussian_line(KERNEL, 1, 8), alg_gaussian_left_line(KERNEL, 1, 8),
              alg_gaussian_levelline(KERNEL, 1, 8), alg_gaussian_one_arm(KERNEL, 8), alg_annulus_seed(KERNEL, 8)]


@pytest.mark.parametrize("alg", FIELD_ALGS, ids=lambda a: a.name)
def test_field_algorithm_determines_event(alg):
    g = alg.geom
    for rep in range(40):
        rng = np.random.default_rng(rep)
        noise = g.noise(rng)
        m = g.mask(noise, 0.0)
        aux = alg.draw_aux(rng)
        order, out, _ = alg.run(m, aux)
        assert out == alg.direct(m)
        assert np.unique(order).size == len(order) <= g.n_units
        # resampling the unrevealed boxes leaves the run unchanged
        hidden = np.setdiff1d(np.arange(g.n_units), order)
        m2 = g.mask(g.resample(noise, hidden, rng), 0.0)
        o2, out2, _ = alg.run(m2, aux)
        assert out2 == out and np.array_equal(o2, order)


def test_level_line_on_random_masks():
    k = truncate_kernel(make_bargmann_fock_kernel(2, 0.25, 4.0), 1.0)
    alg = alg_gaussian_levelline(k, 1, 4)
    rng = np.random.default_rng(0)
    for _ in range(300):
        m = rng.random(alg.geom.shape) < rng.uniform(0.3, 0.7)
        assert alg.run(m)[1] == alg.direct(m)
