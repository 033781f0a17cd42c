"""Revealment estimation, revealment bound checks and determination checks."""
from __future__ import annotations

import math

import numpy as np
from scipy.stats import norm

from ..explorer.base import AlgorithmSpec, RevealmentTable, merge_tables
from ..explorer.bond import BondAlgorithm, HyperplaneSweep, Interface, OriginCluster
from ..explorer.field import AnnulusSeed, FieldAlgorithm, GaussianLevelLine, GaussianLine
from ..gaussian import InvalidParameter
from ..oracle import enumerate_revealment
from ..parallel import chunk_map
from .core import (BernoulliModel, EventSpec, GaussianModel, Report, Term, _check_n,
                   indicator_estimate, term)
from .gaussian import arm_curve
from .mc import (_pix, bernoulli_indicators, box_states, gaussian_arm_radii, noise_rng,
                 one_arm_radii, two_point_sum)

TAG_STATE, TAG_NOISE, TAG_SUM, TAG_RHS, TAG_EXTRA, TAG_RESAMPLE, TAG_AUX = 0, 1, 2, 3, 4, 6, 7


# ------------------------------------------------------------- sampling
def _bond_samples(alg: BondAlgorithm, model: BernoulliModel, seed, start, count, tag=TAG_STATE):
    return box_states(alg.box, model.p, seed, tag, start, count)


def _reveal_chunk(start, count, seed, alg, model):
    table = RevealmentTable.empty(alg.n_units)
    out = np.empty(count, dtype=bool)
    if isinstance(alg, BondAlgorithm):
        states = _bond_samples(alg, model, seed, start, count)
    for i in range(count):
        aux = alg.draw_aux(noise_rng(seed, start + i, TAG_AUX))
        if isinstance(alg, BondAlgorithm):
            sample = states[i]
        else:
            sample = alg.geom.mask(alg.geom.noise(noise_rng(seed, start + i, TAG_NOISE)), model.ell)
        order, out[i], _ = alg.run(sample, aux)
        mask = np.zeros(alg.n_units, dtype=bool)
        mask[order] = True
        table.add(mask)
    return table, out


def _check_pair(alg: AlgorithmSpec, model):
    if isinstance(alg, BondAlgorithm) != isinstance(model, BernoulliModel):
        raise InvalidParameter("algorithm and model kinds differ")
    if isinstance(alg, FieldAlgorithm) and not (alg.geom.mesh == model.mesh and np.array_equal(
            alg.geom.kernel.values, model.kernel.values)):
        raise InvalidParameter("the algorithm was built for another kernel")


def revealment_run(alg: AlgorithmSpec, model, n: int, seed: int):
    """(RevealmentTable, outputs) over n replicas."""
    _check_n(n)
    _check_pair(alg, model)
    parts = chunk_map(_reveal_chunk, n, (int(seed), alg, model))
    return merge_tables([p[0] for p in parts]), np.concatenate([p[1] for p in parts])


def estimate_revealments(alg: AlgorithmSpec, model, n: int, seed: int) -> RevealmentTable:
    """Per-unit frequencies of being revealed, with binomial standard errors."""
    return revealment_run(alg, model, n, seed)[0]


# ---------------------------------------------------------- bound checks
def _units_bound(name, table: RevealmentTable, units, rhs: Term, terms: dict, info: dict) -> Report:
    """Every unit in ``units`` has Rev <= rhs beyond 3 combined sigma."""
    units = np.asarray(units, dtype=np.int64)
    if units.size == 0:
        raise InvalidParameter("no units in the checked region")
    rev, se = table.rev[units], table.stderr[units]
    sig = np.hypot(se, rhs.stderr)
    gap = rhs.value - rev
    ok = bool(np.all(gap >= -3 * sig - 1e-12))
    pos = sig > 0
    margin = float(np.min(gap[pos] / sig[pos])) if pos.any() else None
    j = int(np.argmax(rev))
    terms = dict(terms)
    terms["max_rev"] = Term(float(rev[j]), float(se[j]))
    terms["rhs"] = rhs
    info = dict(info)
    info.update({"n_units_checked": int(units.size), "argmax_unit": int(units[j])})
    return Report(name, terms, ok, margin, info)


def _edge_mid(box):
    c = box.coords
    return 0.5 * (c[box.edge_u] + c[box.edge_v])


def check_origin_cluster_bound(p: float, R: int, n: int, seed: int, d: int = 2) -> Report:
    """sum_e Rev(e) = E|W| <= 2 sum_{v in Lambda_R} P[0 <-> v] (connections in Lambda_{4R+16});
    the 2d form is reported."""
    model = BernoulliModel(p, d)
    alg = OriginCluster(R, d)
    table = estimate_revealments(alg, model, n, seed)
    chi = two_point_sum(model, R, n, seed, TAG_SUM)
    lhs = Term(table.mean_size, table.size_stderr)
    rhs = Term(2 * chi.mean, 2 * chi.stderr)
    ok, m = _upper(lhs, rhs)
    return Report("rev-origin-cluster", {"sum_rev": lhs, "rhs": rhs, "rhs_2d": Term(2 * d * chi.mean, 2 * d * chi.stderr)},
                  ok, m, {"p": p, "R": R, "d": d, "n": n, "seed": seed, "two_point_box": chi.params["box"]})


def _upper(lhs: Term, rhs: Term):
    from .core import upper_bound_verdict
    return upper_bound_verdict(lhs, rhs)


def check_hyperplane_bound(p: float, R: int, n: int, seed: int, k: float = 1.0, d: int = 2) -> Report:
    """max over right-half edges of Rev(e) <= 2 P[A_1(R)]."""
    model = BernoulliModel(p, d)
    alg = HyperplaneSweep(k, R, d)
    table = estimate_revealments(alg, model, n, seed)
    a1 = indicator_estimate(one_arm_radii(model, R, n, seed, TAG_RHS) >= R, seed)
    units = np.flatnonzero(_edge_mid(alg.box)[:, 0] >= 0)
    return _units_bound("rev-hyperplane", table, units, Term(2 * a1.mean, 2 * a1.stderr), {"P[A1]": term(a1)},
                        {"p": p, "R": R, "k": k, "d": d, "n": n, "seed": seed})


def check_interface_bound(p: float, R: int, n: int, seed: int, k: float = 1.0) -> Report:
    """max over top-right-quarter edges of Rev(e) <= 2 P[A_2(R)]."""
    model = BernoulliModel(p, 2)
    alg = Interface(k, R)
    table = estimate_revealments(alg, model, n, seed)
    a2 = indicator_estimate(bernoulli_indicators(EventSpec("two_arm", R=R), model, n, seed, TAG_RHS), seed)
    mid = _edge_mid(alg.box)
    units = np.flatnonzero((mid[:, 0] >= 0) & (mid[:, 1] >= 0))
    return _units_bound("rev-interface", table, units, Term(2 * a2.mean, 2 * a2.stderr), {"P[A2]": term(a2)},
                        {"p": p, "R": R, "k": k, "n": n, "seed": seed})


def _near(alg: FieldAlgorithm, rect):
    g = alg.geom
    return [u for u in range(g.n_units) if g.box_distance(u, rect) < alg.r]


def check_gaussian_line_bound(model: GaussianModel, R: float, n: int, seed: int, variant: str = "random",
                              k: float = 1.0) -> Report:
    """Box revealments of the line and level-line algorithms (s = r).

    random: max_S Rev(S) <= (4r/R) sum_{i=2}^{R/r} P[A_1(2r, ir)];
    left:   boxes within r of the right half, Rev(S) <= P[A_1(2r, R - 2r)];
    level:  boxes within r of the top-right quarter, Rev(S) <= P[A_2(2r, R - 2r)].
    P[A_1(2r, rho)] is taken as 1 for rho <= 2r.
    """
    kernel = model.kernel
    r = kernel.support_radius
    if variant == "level":
        alg = GaussianLevelLine(kernel, k, R, r)
    else:
        alg = GaussianLine(kernel, k, R, r, variant)
    table, _ = revealment_run(alg, model, n, seed)
    info = {"ell": model.ell, "R": R, "r": r, "k": k, "variant": variant, "n": n, "seed": seed}
    if variant == "random":
        rad = gaussian_arm_radii(model, R, 2 * r, n, seed, TAG_RHS)[:, 0]
        imax = int(math.floor(R / r + 1e-9))
        g = [(arm_curve(rad, model.mesh, 2 * r, i * r), i * r) for i in range(2, imax + 1)]
        v = (4 * r / R) * sum(x for x, _ in g)
        # the terms share replicas: bound the error of the sum by the sum of the errors
        se = (4 * r / R) * sum(math.sqrt(x * (1 - x) / n) for x, _ in g)
        return _units_bound("rev-gaussian-random-line", table, np.arange(alg.n_units), Term(v, se), {}, info)
    rad = gaussian_arm_radii(model, R - 2 * r, 2 * r, n, seed, TAG_RHS)
    n_out = _pix(R - 2 * r, model.mesh)
    if variant == "left":
        est = indicator_estimate(rad[:, 0] >= n_out, seed)
        return _units_bound("rev-gaussian-left-line", table, _near(alg, alg.half_rect()), term(est),
                            {"P[A1(2r,R-2r)]": term(est)}, info)
    if variant == "level":
        est = indicator_estimate((rad[:, 0] >= n_out) & (rad[:, 1] >= n_out), seed)
        return _units_bound("rev-gaussian-level-line", table, _near(alg, alg.quarter_rect()), term(est),
                            {"P[A2(2r,R-2r)]": term(est)}, info)
    raise InvalidParameter(f"unknown variant {variant!r}")


def annulus_bound(model: GaussianModel, R: float, s: float, n: int, seed: int) -> tuple[Term, Term]:
    """((1/(R/s - 1))(4 + 2 sum_{i=3}^{R/s-1} g_{is}), (5s/R) sum_{i=0}^{R/s-1} g_{is}),
    g_rho = P[A_1(2s, rho)] (1 for rho <= 2s)."""
    rad = gaussian_arm_radii(model, R, 2 * s, n, seed, TAG_RHS)[:, 0]
    m = int(round(R / s))
    g = [arm_curve(rad, model.mesh, 2 * s, i * s) for i in range(m)]
    var = sum(x * (1 - x) for x in g) / n
    fine = (4 + 2 * sum(g[3:m])) / (m - 1)
    coarse = 5.0 / m * sum(g)
    # the g's share replicas: bound the error of the sum by the sum of the errors
    se_sum = sum(math.sqrt(x * (1 - x) / n) for x in g)
    return Term(fine, 2 * se_sum / (m - 1)), Term(coarse, 5.0 / m * se_sum)


def check_annulus_bound(model: GaussianModel, R: float, n: int, seed: int) -> Report:
    """Random-annulus algorithm for A_1(2s, R), s = r: max_S Rev(S) <= (5s/R) sum_i g_{is}."""
    kernel = model.kernel
    s = kernel.support_radius
    alg = AnnulusSeed(kernel, R, s)
    table, _ = revealment_run(alg, model, n, seed)
    fine, coarse = annulus_bound(model, R, s, n, seed)
    rep = _units_bound("rev-annulus", table, np.arange(alg.n_units), coarse, {"rhs_fine": fine},
                       {"ell": model.ell, "R": R, "s": s, "n": n, "seed": seed})
    fine_ok, _ = _upper(rep.terms["max_rev"], fine)
    rep.info["fine_bound_holds"] = bool(fine_ok)
    rep.info["fine_le_coarse"] = bool(fine.value <= coarse.value + 1e-12)
    return rep


# ------------------------------------------------------- oracle agreement
def check_oracle_agreement(alg: BondAlgorithm, p: float, n: int, seed: int, level: float = 0.0027) -> Report:
    """MC revealments against exact enumeration on every edge.

    Edge-wise z-scores use the exact standard error; the threshold is the
    Sidak-corrected two-sided quantile for family-wise level ``level``
    (0.0027 is the 3-sigma level).  Edges with exact Rev in {0, 1} must match
    exactly.
    """
    exact = enumerate_revealment(alg, p)
    table = estimate_revealments(alg, BernoulliModel(p, alg.box.d), n, seed)
    m = alg.n_units
    z_thr = float(norm.isf(0.5 * (1 - (1 - level) ** (1.0 / m))))
    sd = np.sqrt(exact.rev * (1 - exact.rev) / n)
    diff = table.rev - exact.rev
    deg = sd < 1e-15
    ok = bool(np.all(np.abs(diff[deg]) < 1e-12))
    z = np.abs(diff[~deg]) / sd[~deg]
    zmax = float(z.max()) if z.size else 0.0
    ok &= zmax <= z_thr
    size_sd = float(table.size_stderr)
    return Report("rev-oracle-agreement",
                  {"max_abs_diff": Term(float(np.abs(diff).max())), "max_z": Term(zmax),
                   "z_threshold": Term(z_thr), "E|W| exact": Term(exact.expected_size),
                   "E|W| mc": Term(table.mean_size, size_sd)},
                  ok, z_thr - zmax,
                  {"algorithm": alg.name, "p": p, "n_edges": m, "n": n, "seed": seed,
                   "exact_determines": bool(exact.determines)})


# ------------------------------------------------------------ determination
def _det_chunk(start, count, seed, alg, model, resample_every):
    mism = 0
    flips = 0
    trials = 0
    is_bond = isinstance(alg, BondAlgorithm)
    if is_bond:
        states = _bond_samples(alg, model, seed, start, count)
        fresh = _bond_samples(alg, model, seed, start, count, TAG_RESAMPLE)
    for i in range(count):
        aux = alg.draw_aux(noise_rng(seed, start + i, TAG_AUX))
        if is_bond:
            sample = states[i]
        else:
            noise = alg.geom.noise(noise_rng(seed, start + i, TAG_NOISE))
            sample = alg.geom.mask(noise, model.ell)
        order, out, _ = alg.run(sample, aux)
        mism += out != alg.direct(sample)
        if (start + i) % resample_every:
            continue
        trials += 1
        hidden = np.ones(alg.n_units, dtype=bool)
        hidden[order] = False
        if is_bond:
            other = np.where(hidden, fresh[i], sample)
        else:
            noise2 = alg.geom.resample(noise, np.flatnonzero(hidden), noise_rng(seed, start + i, TAG_RESAMPLE))
            other = alg.geom.mask(noise2, model.ell)
        flips += alg.direct(other) != out
    return np.array([mism, flips, trials], dtype=np.int64)


def determination_check(alg: AlgorithmSpec, model, n: int = 10_000, seed: int = 0,
                        n_resample: int = 1000) -> Report:
    """Output equals the direct evaluation on n samples; on n_resample of them
    every unrevealed unit is redrawn and the direct evaluation must not move."""
    _check_n(n)
    _check_pair(alg, model)
    every = max(1, n // max(1, n_resample))
    tot = sum(chunk_map(_det_chunk, n, (int(seed), alg, model, every)))
    mism, flips, trials = (int(x) for x in tot)
    return Report("determination", {"mismatches": Term(mism), "resample_flips": Term(flips)},
                  mism == 0 and flips == 0, None,
                  {"algorithm": alg.name, "n": n, "resample_trials": trials, "seed": seed,
                   "model": model.name, "param": model.param})
