"""Acceptance criteria 1-13 as functions returning JSON-able results.

Each function returns {"criterion", "passed", "summary", "data"}; ``data``
holds every number the verdict rests on and is a pure function of the seed,
so two runs with different worker counts must serialise to the same bytes
(criterion 14).  Wall-clock times are kept outside ``data``.
"""
from __future__ import annotations

import json
import math
import time
from fractions import Fraction

import numpy as np

from . import oracle
from .cli import build_instance, clean
from .estimators import bernoulli as eb
from .estimators import gaussian as eg
from .estimators import revealment as er
from .estimators.core import (BernoulliModel, EventSpec, GaussianModel, fit_exponential_decay,
                              fit_power_law, indicator_estimate, mean_estimate)
from .estimators.mc import bernoulli_indicators, field_window, noise_rng
from .explorer import (AnnulusSeed, FullReveal, GaussianLevelLine, GaussianLine, GaussianOneArm,
                       HyperplaneSweep, Interface, OriginCluster)
from .gaussian import bargmann_fock_covariance, kernel_self_convolution, make_bargmann_fock_kernel
from .lattice import LatticeBox, rect_crossing
from .parallel import chunk_map

SEED = 20240601
BUDGET = {1: 60, 2: 900, 3: 300, 4: 300, 5: 60, 6: 1, 7: 1, 8: 1, 9: 120, 10: 600, 11: 900, 12: 600, 13: 600}


def _result(i, passed, summary, data):
    return {"criterion": i, "passed": bool(passed), "summary": summary, "data": clean(data)}


# ------------------------------------------------------------------ 1
def criterion_1(seed=SEED, n=100_000):
    exact = {}
    for m in (1, 2):
        box = LatticeBox.rectangle(m + 1, m)
        exact[m] = oracle.enumerate_probability(rect_crossing(box, m + 1, m), np.arange(box.n_edges), Fraction(1, 2))
    est = indicator_estimate(bernoulli_indicators(EventSpec("rect", a=33, b=32), BernoulliModel(0.5), n, seed), seed)
    z = (est.mean - 0.5) / est.stderr
    ok = all(v == Fraction(1, 2) for v in exact.values()) and abs(z) <= 3
    return _result(1, ok, f"exact n=1,2: {[str(v) for v in exact.values()]}; MC n=32: {est.mean:.5f} (z={z:+.2f})",
                   {"exact": {str(k): str(v) for k, v in exact.items()}, "mc": est.as_dict(), "z": z})


# ------------------------------------------------------------------ 2
def criterion_2(seed=SEED, n=100_000):
    R = [8, 16, 32, 64, 128, 256]
    fit, ests = eb.fit_one_arm_exponent(BernoulliModel(0.5), R, n, seed)
    ok = 0.07 <= fit.rate <= 0.20
    return _result(2, ok, f"one-arm -slope (eta1 proxy) = {fit.rate:.4f} +- {fit.slope_stderr:.4f}, band [0.07, 0.20]",
                   {"fit": fit.as_dict(), "points": [e.as_dict() for e in ests]})


# ------------------------------------------------------------------ 3
def criterion_3(seed=SEED, n=100_000):
    reps = [eb.check_two_arm_square(R, n, seed) for R in (8, 16, 32)]
    ok = all(r.verdict for r in reps)
    s = "; ".join(f"R={r.info['R']}: {r.terms['lhs'].value:.4f} <= {r.terms['rhs'].value:.4f}" for r in reps)
    return _result(3, ok, "P[A2(R)] <= 4 P[A1(R-1)]^2: " + s, {"reports": [r.as_dict() for r in reps]})


# ------------------------------------------------------------------ 4
def criterion_4(seed=SEED, n=100_000):
    rep = eb.check_ubb1(0.5, 0.55, 32, n, seed)
    return _result(4, rep.verdict, f"lhs {rep.terms['lhs'].value:.4f} <= rhs {rep.terms['rhs'].value:.3f} "
                   f"(margin {rep.margin_sigma:.1f} sigma)", rep.as_dict())


# ------------------------------------------------------------------ 5
def criterion_5(seed=SEED):
    rows, ok = [], True
    ev, alg = build_instance({"kind": "dictator"})
    r = oracle.check_osss(ev, alg, 0.5)
    eq = abs(r.slack) <= 1e-12
    ok &= r.holds and eq
    rows.append({"instance": "dictator", "algorithm": alg.name, "p": 0.5, "lhs": r.lhs, "rhs": r.rhs,
                 "slack": r.slack, "equality": eq})
    cases = [({"kind": "rect", "a": 3, "b": 2}, "hyperplane"), ({"kind": "rect", "a": 3, "b": 2}, "interface"),
             ({"kind": "rect", "a": 3, "b": 3}, "hyperplane"), ({"kind": "rect", "a": 3, "b": 3}, "interface"),
             ({"kind": "rect", "a": 3, "b": 2}, "full"), ({"kind": "rect", "a": 3, "b": 3}, "full"),
             ({"kind": "one_arm", "R": 1}, "origin")]
    for inst, name in cases:
        ev, alg = build_instance(inst, name)
        for p in (0.3, 0.5, 0.7):
            r = oracle.check_osss(ev, alg, p)
            ok &= r.holds
            rows.append({"instance": inst, "algorithm": alg.name, "p": p, "lhs": r.lhs, "rhs": r.rhs, "slack": r.slack})
    worst = min(row["slack"] for row in rows[1:])
    return _result(5, ok, f"dictator slack {rows[0]['slack']:.1e}; crossings and A1(1): min slack {worst:.4f} "
                   f"over {len(rows) - 1} cases", {"rows": rows})


# ------------------------------------------------------------------ 6-8
def criterion_6(seed=SEED):
    lhs, rhs, diff = oracle.kl_stopped(0.3, 0.6, 6, oracle.first_success)
    return _result(6, diff <= 1e-12, f"D(X^tau||Y^tau) = {lhs:.15f}, E[tau] D = {rhs:.15f}, |diff| = {diff:.1e}",
                   {"lhs": lhs, "rhs": rhs, "diff": diff})


def criterion_7(seed=SEED):
    worst = oracle.pinsker_sweep(0.01)
    return _result(7, worst >= 0, f"worst slack over the 0.01 grid: {worst:.3e}", {"worst": worst})


def criterion_8(seed=SEED):
    worst = oracle.isoperimetry_sweep()
    lhs, rhs, ok = oracle.isoperimetry_halfspace_check(0.3, 0.1)
    spot = abs(lhs - 0.0356) < 5e-4 and abs(rhs - 0.0155) < 5e-4
    return _result(8, worst >= 0 and ok and spot,
                   f"sweep worst slack {worst:.4e}; a=0.3, eps=0.1: lhs {lhs:.4f} >= rhs {rhs:.4f}",
                   {"worst": worst, "lhs": lhs, "rhs": rhs, "c": oracle.ISO_C})


# ------------------------------------------------------------------ 9
def _point_chunk(start, count, seed, model):
    return np.array([field_window(model, 0, 0, noise_rng(seed, start + i))[0, 0] for i in range(count)])


def criterion_9(seed=SEED, n=10_000):
    q = make_bargmann_fock_kernel(2, 0.1, 4.0)
    K = kernel_self_convolution(q)
    off = K.offsets()
    dist = np.sqrt(np.sum(off ** 2, axis=-1))
    inside = dist <= 3 + 1e-9
    err = float(np.max(np.abs(K.values - bargmann_fock_covariance(off))[inside]))
    model = GaussianModel(0.0, 0.1, None)
    x = np.concatenate(chunk_map(_point_chunk, n, (seed, model)))
    var = mean_estimate(x ** 2, seed)
    ok = err <= 1e-2 and abs(var.mean - 1) <= 0.03
    return _result(9, ok, f"max |q*q - exp(-|x|^2/2)| on |x|<=3 at mesh 0.1: {err:.2e}; "
                   f"Var f(0) = {var.mean:.4f} +- {var.stderr:.4f}",
                   {"max_err": err, "variance": var.as_dict()})


# ------------------------------------------------------------------ 10
def criterion_10(seed=SEED, n=6000, n_fine=1500):
    rep = eg.check_square_symmetry(32.0, n, seed, 0.25, 3.0, n_fine)
    t = rep.terms
    return _result(10, rep.verdict,
                   f"P[cross] = {t['P[coarse]'].value:.4f} +- {t['P[coarse]'].stderr:.4f}; bias by duality "
                   f"{t['bias[coarse]'].value:+.4f} (mesh 0.25) -> {t['bias[fine]'].value:+.4f} (mesh 0.125)",
                   rep.as_dict())


# ------------------------------------------------------------------ 11
def criterion_11(seed=SEED, n_bond=10_000, n_field=1000, n_oracle=20_000):
    reps = []
    for R in (8, 16, 24):
        reps.append(er.check_origin_cluster_bound(0.5, R, n_bond, seed))
        reps.append(er.check_hyperplane_bound(0.5, R, n_bond, seed))
        reps.append(er.check_interface_bound(0.5, R, n_bond, seed))
    m2, m3, m1 = GaussianModel(0.0, 0.25, 2.0), GaussianModel(0.0, 0.25, 3.0), GaussianModel(0.0, 0.25, 1.0)
    for R in (8.0, 16.0, 24.0):
        for v in ("random", "left", "level"):
            reps.append(er.check_gaussian_line_bound(m2, R, n_field, seed, v))
    for v in ("random", "left", "level"):
        reps.append(er.check_gaussian_line_bound(m3, 24.0, n_field, seed, v))
    for R in (8.0, 16.0, 24.0):
        reps.append(er.check_annulus_bound(m1, R, n_field, seed))
    reps.append(er.check_annulus_bound(m1.at(-0.5), 16.0, n_field, seed))
    agree = [er.check_oracle_agreement(OriginCluster(1), 0.5, n_oracle, seed),
             er.check_oracle_agreement(HyperplaneSweep(box=LatticeBox.rectangle(3, 2)), 0.3, n_oracle, seed),
             er.check_oracle_agreement(Interface(box=LatticeBox.rectangle(3, 2)), 0.5, n_oracle, seed),
             er.check_oracle_agreement(Interface(box=LatticeBox.rectangle(3, 3)), 0.7, n_oracle, seed)]
    ok = all(r.verdict for r in reps + agree)
    margins = [r.margin_sigma for r in reps if r.margin_sigma is not None]
    n_fail = sum(not r.verdict for r in reps + agree)
    return _result(11, ok, f"{len(reps)} revealment bounds (min margin {min(margins):.1f} sigma), "
                   f"{len(agree)} exact-vs-MC tables; failures: {n_fail}",
                   {"bounds": [r.as_dict() for r in reps], "oracle_agreement": [r.as_dict() for r in agree]})


# ------------------------------------------------------------------ 12
def criterion_12(seed=SEED, n=10_000, n_resample=1000):
    half = BernoulliModel(0.5)
    m2, m1 = GaussianModel(0.0, 0.25, 2.0), GaussianModel(0.0, 0.25, 1.0)
    box = LatticeBox.rectangle(9, 8)
    cases = [(OriginCluster(8), half), (HyperplaneSweep(1, 8), half), (Interface(1, 8), half),
             (FullReveal(box, rect_crossing(box, 9, 8)), half),
             (GaussianLine(m2.kernel, 1.0, 8.0, 2.0, "random"), m2), (GaussianLine(m2.kernel, 1.0, 8.0, 2.0, "left"), m2),
             (GaussianLevelLine(m2.kernel, 1.0, 8.0, 2.0), m2), (GaussianOneArm(m2.kernel, 8.0, 2.0), m2),
             (AnnulusSeed(m1.kernel, 8.0, 1.0), m1)]
    reps = [er.determination_check(alg, model, n, seed, n_resample) for alg, model in cases]
    ok = all(r.verdict for r in reps)
    bad = [r.info["algorithm"] for r in reps if not r.verdict]
    return _result(12, ok, f"{len(reps)} algorithms x {n} samples, {n_resample} resampling trials each; "
                   f"failing: {bad or 'none'}", {"reports": [r.as_dict() for r in reps]})


# ------------------------------------------------------------------ 13
def criterion_13(seed=SEED, n=100_000, n_field=4000):
    R = [4, 8, 16, 32]
    sub = fit_exponential_decay(eb.decay_points(BernoulliModel(0.4), "rect", R, n, seed), "p=0.4 rect crossing")
    crit = fit_exponential_decay(eb.decay_points(BernoulliModel(0.5), "rect", R, n, seed), "p=0.5 rect crossing")
    arm_sub = fit_exponential_decay(eb.decay_points(BernoulliModel(0.4), "one_arm", R, n, seed), "p=0.4 one-arm")
    arm_crit = fit_exponential_decay(eb.decay_points(BernoulliModel(0.5), "one_arm", R, n, seed), "p=0.5 one-arm")
    gR = [2.0, 4.0, 6.0, 8.0]
    gm = GaussianModel(-0.5, 0.25, 3.0)
    g_sub = fit_exponential_decay(eg.gaussian_decay_points(gm, "one_arm", gR, n_field, seed), "ell=-0.5 one-arm")
    g_crit = fit_exponential_decay(eg.gaussian_decay_points(gm.at(0.0), "one_arm", gR, n_field, seed), "ell=0 one-arm")
    z_crit = crit.rate / crit.slope_stderr if crit.slope_stderr > 0 else math.inf
    ok = (sub.rate > 0 and sub.r2 > 0.9 and g_sub.rate > 0 and g_sub.r2 > 0.9 and abs(z_crit) <= 2)
    return _result(13, ok,
                   f"p=0.4 rate {sub.rate:.3f} (R2 {sub.r2:.3f}); ell=-0.5 rate {g_sub.rate:.3f} (R2 {g_sub.r2:.3f}); "
                   f"p=0.5 rate {crit.rate:+.4f} = {z_crit:+.2f} sigma",
                   {"bernoulli_sub": sub.as_dict(), "bernoulli_crit": crit.as_dict(), "gaussian_sub": g_sub.as_dict(),
                    "reported_one_arm_sub": arm_sub.as_dict(), "reported_one_arm_crit": arm_crit.as_dict(),
                    "reported_gaussian_crit": g_crit.as_dict()})


CRITERIA = {i: globals()[f"criterion_{i}"] for i in range(1, 14)}


def run(i: int, seed: int = SEED):
    """(result, seconds)."""
    t = time.perf_counter()
    res = CRITERIA[i](seed)
    return res, time.perf_counter() - t


def serialise(results: dict) -> bytes:
    """Canonical bytes of the criterion outputs (no timings)."""
    return json.dumps({str(k): v for k, v in sorted(results.items())}, sort_keys=True).encode()


def line(res: dict, seconds: float | None = None, budget: float | None = None) -> str:
    tag = "PASS" if res["passed"] else "FAIL"
    t = "" if seconds is None else f" [{seconds:.1f}s" + ("" if budget is None else f" / {budget:g}s") + "]"
    return f"{tag} criterion {res['criterion']:>2}: {res['summary']}{t}"
