"""Exact oracles: brute-force enumeration over small edge sets and closed-form
checks of the information-theoretic and isoperimetric inequalities.

Enumeration counts satisfying configurations by their number of open edges,
so a probability is a short polynomial sum in p evaluated with ``math.fsum``.
Passing ``fractions.Fraction`` parameters gives exact rational results.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np
from scipy.special import xlogy
from scipy.stats import norm

from .lattice import Event

MAX_PROBABILITY_EDGES = 24
MAX_INFLUENCE_EDGES = 20
MAX_REVEALMENT_EDGES = 16
_CHUNK = 1 << 15


class ResourceLimit(RuntimeError):
    """Instance too large for exhaustive enumeration."""


class ContractViolation(ValueError):
    """Inputs break a precondition (e.g. algorithm does not determine the event)."""


def _check_size(n: int, cap: int):
    if n > cap:
        raise ResourceLimit(f"{n} edges exceeds the enumeration cap of {cap}")


def _edges_for(event: Event, edges) -> np.ndarray:
    edges = np.asarray(sorted(set(int(e) for e in edges)), dtype=np.int64)
    if not set(event.support.tolist()) <= set(edges.tolist()):
        raise ContractViolation("event depends on edges outside the enumerated set")
    return edges


def _bits(start: int, stop: int, n: int) -> np.ndarray:
    idx = np.arange(start, stop, dtype=np.int64)
    return ((idx[:, None] >> np.arange(n)) & 1).astype(bool)


def _configs(n_total: int, edges: np.ndarray):
    """Yield (bit-matrix over ``edges``, full state matrix) in chunks; others closed."""
    n = edges.size
    total = 1 << n
    for start in range(0, total, _CHUNK):
        stop = min(total, start + _CHUNK)
        bits = _bits(start, stop, n)
        states = np.zeros((stop - start, n_total), dtype=bool)
        states[:, edges] = bits
        yield bits, states


def _weight(p, k: int, n: int):
    return p ** k * (1 - p) ** (n - k)


def _poly(counts: Sequence[int], p, n: int):
    terms = [c * _weight(p, k, n) for k, c in enumerate(counts) if c]
    if isinstance(p, Fraction):
        return sum(terms, Fraction(0))
    return math.fsum(terms)


def _event_table(event: Event, edges: np.ndarray) -> np.ndarray:
    """Indicator of the event on every configuration, indexed by bitmask."""
    out = np.empty(1 << edges.size, dtype=bool)
    pos = 0
    for bits, states in _configs(event.n_edges, edges):
        out[pos:pos + bits.shape[0]] = event.evaluate_batch(states)
        pos += bits.shape[0]
    return out


def _popcount(n: int) -> np.ndarray:
    idx = np.arange(1 << n, dtype=np.int64)
    return ((idx[:, None] >> np.arange(n)) & 1).sum(axis=1)


def enumerate_probability(event: Event, edges, p):
    """P_p[A] by summing over all 2^|edges| configurations."""
    edges = _edges_for(event, edges)
    _check_size(edges.size, MAX_PROBABILITY_EDGES)
    n = edges.size
    counts = np.zeros(n + 1, dtype=np.int64)
    for bits, states in _configs(event.n_edges, edges):
        hit = event.evaluate_batch(states)
        counts += np.bincount(bits[hit].sum(axis=1), minlength=n + 1)
    return _poly(counts.tolist(), p, n)


def _split(table: np.ndarray, n: int, pos: int):
    idx = np.arange(1 << n, dtype=np.int64)
    without = idx[(idx >> pos) & 1 == 0]
    return without, without | (1 << pos)


def enumerate_influence(event: Event, e: int, p, edges=None):
    """Resampling influence P[1_A(X) != 1_A(X^(e))], enumerating X and the redraw."""
    edges = _edges_for(event, list(event.support if edges is None else edges) + [e])
    _check_size(edges.size, MAX_INFLUENCE_EDGES)
    n = edges.size
    pos = int(np.searchsorted(edges, e))
    table = _event_table(event, edges)
    pc = _popcount(n)
    idx = np.arange(1 << n, dtype=np.int64)
    flip_to_open = table != table[idx | (1 << pos)]
    flip_to_closed = table != table[idx & ~(1 << pos)]
    c_open = np.bincount(pc[flip_to_open], minlength=n + 1)
    c_closed = np.bincount(pc[flip_to_closed], minlength=n + 1)
    return _poly(c_open.tolist(), p, n) * p + _poly(c_closed.tolist(), p, n) * (1 - p)


def enumerate_pivotal_derivative(event: Event, e: int, p, edges=None, form: str = "pivotal"):
    """d P_p[A] / d p_e.

    ``form="pivotal"`` sums P[A | e open] - P[A | e closed] over the other edges,
    which for increasing events is P[e pivotal]; ``form="covariance"`` uses
    Cov(1_A, 1_{e open}) / (p(1-p)).
    """
    edges = _edges_for(event, list(event.support if edges is None else edges) + [e])
    _check_size(edges.size, MAX_INFLUENCE_EDGES)
    n = edges.size
    pos = int(np.searchsorted(edges, e))
    table = _event_table(event, edges)
    if form == "pivotal":
        lo, hi = _split(table, n, pos)
        pc = _popcount(n)[lo]
        up = np.bincount(pc[table[hi] & ~table[lo]], minlength=n)
        down = np.bincount(pc[table[lo] & ~table[hi]], minlength=n)
        return _poly(up.tolist(), p, n - 1) - _poly(down.tolist(), p, n - 1)
    if form == "covariance":
        if p in (0, 1):
            raise ValueError("covariance form needs 0 < p < 1")
        pc = _popcount(n)
        idx = np.arange(1 << n, dtype=np.int64)
        e_open = (idx >> pos) & 1 == 1
        pa = _poly(np.bincount(pc[table], minlength=n + 1).tolist(), p, n)
        pae = _poly(np.bincount(pc[table & e_open], minlength=n + 1).tolist(), p, n)
        return (pae - pa * p) / (p * (1 - p))
    raise ValueError(f"unknown form {form!r}")


def conditional_probabilities(event: Event, subset, p, edges=None):
    """(weights, P[A | F_subset]) over the 2^|subset| configurations of ``subset``."""
    subset = np.asarray(sorted(set(int(s) for s in subset)), dtype=np.int64)
    all_edges = set(event.support.tolist()) | set(subset.tolist())
    if edges is not None:
        all_edges |= set(int(x) for x in edges)
    edges = _edges_for(event, all_edges)
    _check_size(edges.size, MAX_PROBABILITY_EDGES)
    n, m = edges.size, subset.size
    table = _event_table(event, edges)
    in_sub = np.isin(edges, subset)
    idx = np.arange(1 << n, dtype=np.int64)
    bits = (idx[:, None] >> np.arange(n)) & 1
    outer = (bits[:, in_sub] << np.arange(m)).sum(axis=1)
    inner_k = bits[:, ~in_sub].sum(axis=1)
    outer_k = bits[:, in_sub].sum(axis=1)
    n_in = n - m
    weights, cond = [], []
    for o in range(1 << m):
        sel = outer == o
        k_out = int(outer_k[sel][0])
        counts = np.bincount(inner_k[sel & table], minlength=n_in + 1)
        weights.append(_weight(p, k_out, m))
        cond.append(_poly(counts.tolist(), p, n_in))
    return weights, cond


def _fsum(xs, p):
    return sum(xs, Fraction(0)) if isinstance(p, Fraction) else math.fsum(xs)


def enumerate_conditional_variance(event: Event, subset, p, edges=None):
    """Var_p[P_p[A | F_subset]] by double enumeration."""
    w, c = conditional_probabilities(event, subset, p, edges)
    mean = _fsum([wi * ci for wi, ci in zip(w, c)], p)
    return _fsum([wi * (ci - mean) ** 2 for wi, ci in zip(w, c)], p)


def expected_conditional_variance(event: Event, subset, p, edges=None):
    """E_p[Var_p[1_A | F_subset]] (the other half of the total-variance split)."""
    w, c = conditional_probabilities(event, subset, p, edges)
    return _fsum([wi * ci * (1 - ci) for wi, ci in zip(w, c)], p)


# ---------------------------------------------------------------- algorithms
@dataclass
class ExactRevealment:
    rev: np.ndarray  # per box edge
    expected_size: float
    determines: bool


def enumerate_revealment(spec, p, edges=None) -> ExactRevealment:
    """Exact Rev(e) for every edge, enumerating configurations and auxiliary draws.

    ``spec`` is a Bernoulli :class:`~percolab.explorer.AlgorithmSpec`; the
    enumerated edges default to its unit set.
    """
    units = np.asarray(spec.units if edges is None else sorted(edges), dtype=np.int64)
    _check_size(units.size, MAX_REVEALMENT_EDGES)
    n = units.size
    nE = spec.box.n_edges
    rev_counts = np.zeros((n + 1, nE), dtype=np.float64)
    determines = True
    aux = spec.aux_distribution()
    for a_val, a_prob in aux:
        acc = np.zeros((n + 1, nE))
        for bits, states in _configs(nE, units):
            ks = bits.sum(axis=1)
            revealed, outputs = spec.run_batch(states, a_val)
            truth = spec.event.evaluate_batch(states)
            determines &= bool(np.all(outputs == truth))
            np.add.at(acc, ks, revealed)
        rev_counts += a_prob * acc
    rev = np.array([
        math.fsum(rev_counts[k, e] * _weight(p, k, n) for k in range(n + 1)) for e in range(nE)
    ])
    return ExactRevealment(rev=rev, expected_size=math.fsum(rev.tolist()), determines=determines)


@dataclass
class CheckResult:
    lhs: float
    rhs: float
    slack: float
    holds: bool
    extra: dict


def _rev_and_infl(event, spec, p):
    ex = enumerate_revealment(spec, p)
    if not ex.determines:
        raise ContractViolation("algorithm does not determine the event")
    units = np.asarray(spec.units)
    infl = np.array([enumerate_influence(event, int(e), p, edges=units) for e in units])
    return ex, units, infl


def check_osss(event: Event, spec, p) -> CheckResult:
    """Var(1_A) <= 1/2 sum Rev(e) Infl(e), all terms exact."""
    ex, units, infl = _rev_and_infl(event, spec, p)
    pa = enumerate_probability(event, units, p)
    lhs = pa * (1 - pa)
    rhs = 0.5 * math.fsum((ex.rev[units] * infl).tolist())
    return CheckResult(lhs, rhs, rhs - lhs, rhs - lhs >= -1e-12, {"P": pa, "rev": ex.rev, "infl": infl})


def check_osss_extended(event: Event, spec, subset, p) -> CheckResult:
    """Var[P[A|F_E']] <= 1/2 sum_{e in E'} Rev(e) Infl(e)."""
    ex, units, infl = _rev_and_infl(event, spec, p)
    subset = np.asarray(sorted(subset), dtype=np.int64)
    lhs = enumerate_conditional_variance(event, subset, p, edges=units)
    pos = np.searchsorted(units, subset)
    rhs = 0.5 * math.fsum((ex.rev[subset] * infl[pos]).tolist())
    return CheckResult(lhs, rhs, rhs - lhs, rhs - lhs >= -1e-12, {})


def check_genlb(event: Event, spec, subset, p) -> CheckResult:
    """Derivative lower bound from OSSS plus Russo's formula.

    ``holds`` refers to the corrected constant 1/(p(1-p)); the printed
    constant 4/(p(1-p)) is reported in ``extra`` (the dictator event violates it).
    """
    if event.monotone != 1:
        raise ContractViolation("genlb needs an increasing event")
    ex = enumerate_revealment(spec, p)
    if not ex.determines:
        raise ContractViolation("algorithm does not determine the event")
    units = np.asarray(spec.units)
    subset = np.asarray(sorted(subset), dtype=np.int64)
    lhs = math.fsum(enumerate_pivotal_derivative(event, int(e), p, edges=units) for e in subset)
    var = enumerate_conditional_variance(event, subset, p, edges=units)
    mrev = float(ex.rev[subset].max()) if subset.size else 0.0
    if var == 0:
        rhs = rhs_printed = 0.0
    else:
        rhs = var / (p * (1 - p) * mrev)
        rhs_printed = 4 * rhs
    return CheckResult(lhs, rhs, lhs - rhs, lhs - rhs >= -1e-12,
                       {"var": var, "max_rev": mrev, "rhs_printed": rhs_printed,
                        "holds_printed": lhs - rhs_printed >= -1e-12})


def check_genub(event: Event, spec, subset, p, q) -> CheckResult:
    """|P_{p;q}^{E'}[A] - P_p[A]| <= max{..}|p-q| sqrt(max{P_p, P_{p;q}} E_p|W_E'|).

    The prefactor carries no sqrt(2); ``extra['rhs_sqrt2']`` is the weaker form.
    """
    if not (0 < p < 1 and 0 < q < 1):
        raise ValueError("p, q must lie in (0, 1)")
    ex = enumerate_revealment(spec, p)
    if not ex.determines:
        raise ContractViolation("algorithm does not determine the event")
    units = np.asarray(spec.units)
    subset = np.asarray(sorted(subset), dtype=np.int64)
    pp = enumerate_probability(event, units, p)
    ppq = mixed_probability(event, units, subset, p, q)
    ew = math.fsum(ex.rev[subset].tolist())
    pref = max(1 / math.sqrt(p * (1 - p)), 1 / math.sqrt(q * (1 - q)))
    lhs = abs(ppq - pp)
    rhs = pref * abs(p - q) * math.sqrt(max(pp, ppq) * ew)
    return CheckResult(lhs, rhs, rhs - lhs, rhs - lhs >= -1e-12,
                       {"P_p": pp, "P_pq": ppq, "EW": ew, "rhs_sqrt2": math.sqrt(2) * rhs})


def mixed_probability(event: Event, edges, subset, p, q):
    """P under parameter q on ``subset`` and p elsewhere."""
    edges = _edges_for(event, edges)
    _check_size(edges.size, MAX_PROBABILITY_EDGES)
    in_sub = np.isin(edges, np.asarray(subset))
    table = _event_table(event, edges)
    idx = np.arange(1 << edges.size, dtype=np.int64)
    bits = (idx[:, None] >> np.arange(edges.size)) & 1
    ks = bits[:, in_sub].sum(axis=1)
    ko = bits[:, ~in_sub].sum(axis=1)
    m, n_o = int(in_sub.sum()), int((~in_sub).sum())
    grid = np.zeros((m + 1, n_o + 1), dtype=np.int64)
    np.add.at(grid, (ks[table], ko[table]), 1)
    terms = [int(grid[a, b]) * _weight(q, a, m) * _weight(p, b, n_o)
             for a in range(m + 1) for b in range(n_o + 1) if grid[a, b]]
    return _fsum(terms, p)


def check_genrevbound(event: Event, spec, subset, p) -> CheckResult:
    """Lower bound on max_{e in E'} Rev(e) for increasing events.

    ``rhs`` is the corrected bound Var^{2/3} / ((p(1-p))^{1/3} (P |E'|)^{1/3}),
    which follows from the corrected derivative bound; the printed forms
    (4 Var)^{2/3}/(p(1-p) P |E'|)^{1/3} and, at p = 1/2, (8 Var)^{2/3}/(P n)^{1/3}
    are reported in ``extra``.
    """
    if event.monotone != 1:
        raise ContractViolation("genrevbound needs an increasing event")
    ex = enumerate_revealment(spec, p)
    if not ex.determines:
        raise ContractViolation("algorithm does not determine the event")
    units = np.asarray(spec.units)
    subset = np.asarray(sorted(subset), dtype=np.int64)
    var = enumerate_conditional_variance(event, subset, p, edges=units)
    pa = enumerate_probability(event, units, p)
    n = subset.size
    mrev = float(ex.rev[subset].max()) if n else 0.0
    if var == 0:
        rhs = printed = bsw = 0.0
    else:
        rhs = var ** (2 / 3) / ((p * (1 - p)) ** (1 / 3) * (pa * n) ** (1 / 3))
        printed = (4 * var) ** (2 / 3) / (p * (1 - p) * pa * n) ** (1 / 3)
        bsw = (8 * var) ** (2 / 3) / (pa * n) ** (1 / 3)
    return CheckResult(mrev, rhs, mrev - rhs, mrev - rhs >= -1e-12,
                       {"var": var, "P": pa, "rhs_printed": printed, "rhs_bsw": bsw})


# ---------------------------------------------------------------- entropy tools
def kl_bernoulli(p: float, q: float) -> float:
    """D_KL(Ber(p) || Ber(q)) in nats; may be infinite."""
    if not (0 <= p <= 1 and 0 <= q <= 1):
        raise ValueError("p, q must lie in [0, 1]")
    terms = []
    for a, b in ((p, q), (1 - p, 1 - q)):
        if a == 0:
            continue
        if b == 0:
            return math.inf
        terms.append(a * math.log(a / b))
    return max(0.0, math.fsum(terms))


StoppingRule = Callable[[tuple], bool]


def first_success(prefix: tuple) -> bool:
    return bool(prefix) and prefix[-1] == 1


def never(prefix: tuple) -> bool:
    return False


def _stopped_law(p: float, n: int, rule: StoppingRule):
    """Law of the stopped sequence X^tau as {stopped prefix: probability}."""
    law: dict[tuple, float] = {}
    frontier = [((), 1.0)]
    while frontier:
        nxt = []
        for prefix, pr in frontier:
            if len(prefix) == n or rule(prefix):
                law[prefix] = law.get(prefix, 0.0) + pr
                continue
            nxt.append((prefix + (1,), pr * p))
            nxt.append((prefix + (0,), pr * (1 - p)))
        frontier = nxt
    return law


def _check_adapted(rule: StoppingRule, n: int):
    # tau must be a function of the prefix only; stopping at a prefix must not
    # depend on symbols that come later, so evaluating twice must agree
    for m in range(n + 1):
        for w in range(1 << m):
            prefix = tuple((w >> i) & 1 for i in range(m))
            a, b = rule(prefix), rule(prefix)
            if a != b or not isinstance(a, (bool, np.bool_)):
                raise ContractViolation("stopping rule must be a deterministic boolean of the prefix")


def kl_stopped(p: float, q: float, n: int, rule: StoppingRule = first_success):
    """(D_KL(X^tau || Y^tau), E[tau] D_KL(Ber p || Ber q), |difference|)."""
    if n > 12:
        raise ResourceLimit("n <= 12 for enumeration")
    _check_adapted(rule, n)
    lx, ly = _stopped_law(p, n, rule), _stopped_law(q, n, rule)
    lhs = 0.0
    terms = []
    for path, px in lx.items():
        py = ly.get(path, 0.0)
        if px == 0:
            continue
        if py == 0:
            return math.inf, math.inf, math.nan
        terms.append(px * math.log(px / py))
    lhs = math.fsum(terms)
    etau = math.fsum(len(path) * pr for path, pr in lx.items())
    rhs = etau * kl_bernoulli(p, q)
    return lhs, rhs, abs(lhs - rhs)


def pinsker_gap(x, y):
    """2 max{x,y} D_KL(Ber x || Ber y) - (x - y)^2 (vectorised)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        kl = xlogy(x, x) - xlogy(x, y) + xlogy(1 - x, 1 - x) - xlogy(1 - x, 1 - y)
    return 2 * np.maximum(x, y) * kl - (x - y) ** 2


def pinsker_sweep(step: float = 0.01) -> float:
    """Worst slack of the Pinsker variant over the open grid (0,1)^2."""
    if step <= 0:
        raise ValueError("step must be positive")
    g = np.arange(step, 1.0, step)
    g = g[(g > 0) & (g < 1)]
    x, y = np.meshgrid(g, g, indexing="ij")
    return float(np.min(pinsker_gap(x, y)))


ISO_C = float(norm.pdf(1.0) / 2)  # sup|phi'| / 2, since |phi'(x)| = |x| phi(x) peaks at x = 1


def isoperimetry_halfspace_check(a: float, eps: float, c: float = ISO_C):
    """Half-space case of the Gaussian isoperimetric increment bound.

    lhs = Phi(Phi^{-1}(a) + eps) - a; rhs = sqrt(2/pi) a (1-a) eps - c eps^2.
    """
    if not 0 < a < 1 or eps < 0:
        raise ValueError("need 0 < a < 1 and eps >= 0")
    lhs = float(norm.cdf(norm.ppf(a) + eps) - a)
    rhs = math.sqrt(2 / math.pi) * a * (1 - a) * eps - c * eps ** 2
    return lhs, rhs, lhs >= rhs


def isoperimetry_sweep(a_grid=None, eps_grid=None, c: float = ISO_C) -> float:
    a_grid = np.round(np.arange(0.05, 0.951, 0.05), 10) if a_grid is None else a_grid
    eps_grid = np.round(np.arange(0.01, 0.501, 0.01), 10) if eps_grid is None else eps_grid
    worst = math.inf
    for a in a_grid:
        for e in eps_grid:
            lhs, rhs, _ = isoperimetry_halfspace_check(float(a), float(e), c)
            worst = min(worst, lhs - rhs)
    return worst
