"""Gaussian checks: truncation, Russo-type inequality, derivative bounds."""
from __future__ import annotations

import math

import numpy as np
from scipy import ndimage, signal

from ..explorer.field import GaussianLine, GaussianLevelLine
from ..gaussian import (FFTSampler, InvalidParameter, Kernel, NoiseGrid, _S4, _connects, lr_crossing,
                        truncation_error_sq)
from ..parallel import chunk_map
from .core import (GaussianModel, Report, Term, _check_n, _kernel, fit_exponential_decay,
                   indicator_estimate, mean_estimate, term, upper_bound_verdict)
from .bernoulli import _fitted_family
from .mc import _half, _pix, gaussian_arm_radii, gaussian_crossing, noise_rng

TAG_NOISE, TAG_RHS, TAG_SUM, TAG_EXTRA, TAG_RESAMPLE, TAG_AUX = 1, 3, 2, 4, 6, 7
FD_STEP = 0.05


def integral(kernel: Kernel) -> float:
    return float(kernel.values.sum() * kernel.cell_volume)


def l2_norm(kernel: Kernel) -> float:
    return math.sqrt(kernel.l2_norm_sq())


def arm_curve(radii: np.ndarray, mesh: float, r_in: float, rho) -> float:
    """P[A_1(r_in, rho)] from set-cluster radii; 1 by convention when rho <= r_in."""
    if rho <= r_in + 1e-12:
        return 1.0
    return float(np.mean(radii >= _pix(rho, mesh)))


def derivative_in_level(model: GaussianModel, k: float, R: float, n: int, seed: int,
                        h: float = FD_STEP, tag: int = TAG_NOISE):
    """(P_ell[Cross_k(R)], d/d ell by central difference with shared noise)."""
    x = gaussian_crossing(model, k, R, n, seed, tag, (model.ell - h, model.ell, model.ell + h))
    p = indicator_estimate(x[:, 1], seed)
    d = mean_estimate((x[:, 2].astype(float) - x[:, 0]) / (2 * h), seed, {"h": h})
    return p, d


# ------------------------------------------------------------- two-arm
def check_two_arm_square_gaussian(model: GaussianModel, r_in: float, R: float, n: int, seed: int) -> Report:
    """P[A_2(r, R)] <= P[A_1(r, R)]^2 (positively correlated planar field)."""
    n_out = _pix(R, model.mesh)
    lhs_r = gaussian_arm_radii(model, R, r_in, n, seed, TAG_NOISE)
    a2 = indicator_estimate((lhs_r[:, 0] >= n_out) & (lhs_r[:, 1] >= n_out), seed)
    a1 = indicator_estimate(gaussian_arm_radii(model, R, r_in, n, seed, TAG_RHS)[:, 0] >= n_out, seed)
    rhs = Term(a1.mean ** 2, 2 * a1.mean * a1.stderr)
    ok, m = upper_bound_verdict(term(a2), rhs)
    return Report("two-arm-square-gaussian", {"lhs": term(a2), "rhs": rhs, "P[A1]": term(a1)}, ok, m,
                  {"r": r_in, "R": R, "ell": model.ell, "n": n, "seed": seed})


# ----------------------------------------------------------- truncation
def _padded(kernel: Kernel, h: int) -> Kernel:
    pad = h - kernel.h
    vals = np.pad(kernel.values, pad) if pad > 0 else kernel.values
    return Kernel(kernel.d, kernel.mesh, h * kernel.mesh, np.ascontiguousarray(vals), kernel.name)


def _trunc_chunk(start, count, seed, tag, ref, kernels, n, K, ell):
    h = ref.h
    shape = (2 * n + 1 + 2 * h, 2 * K + 1 + 2 * h)
    samplers = [FFTSampler(q, shape) for q in (ref,) + tuple(kernels)]
    out = np.empty((count, len(samplers)), dtype=bool)
    for i in range(count):
        w = noise_rng(seed, start + i, tag).standard_normal(shape) * ref.mesh
        noise = NoiseGrid((0, 0), w, ref.mesh)
        for j, s in enumerate(samplers):
            out[i, j] = lr_crossing(s(noise).values + ell >= 0)
    return out


def check_truncation(r_list, R: float = 16.0, ell: float = 0.0, n: int = 2000, seed: int = 0,
                     mesh: float = 0.25, k: float = 1.0) -> Report:
    """|P[f in Cross] - P[f_r in Cross]| for increasing r, with shared noise.

    f uses the Bargmann-Fock kernel on |x| <= 4, f_r its smooth truncation.
    Verdict: ||q - q_r||_2 strictly decreases, and each discrepancy is at most
    the previous one within 3 sigma.
    """
    r_list = sorted(float(r) for r in r_list)
    _check_n(n)
    ref = _kernel(mesh, None)
    qs = tuple(_padded(_kernel(mesh, r), ref.h) for r in r_list)
    npx = _pix(R, mesh)
    K = _half(k, npx)
    x = np.concatenate(chunk_map(_trunc_chunk, n, (int(seed), TAG_NOISE, ref, qs, npx, K, float(ell))))
    terms, diffs = {}, []
    p_ref = indicator_estimate(x[:, 0], seed)
    terms["P[f]"] = term(p_ref)
    norms = [truncation_error_sq(ref, r) for r in r_list]
    for j, r in enumerate(r_list):
        dj = mean_estimate(x[:, 0].astype(float) - x[:, j + 1], seed)
        diffs.append(dj)
        terms[f"discrepancy[r={r:g}]"] = term(dj)
        terms[f"||q-q_r||^2[r={r:g}]"] = Term(norms[j])
    ok = all(b < a for a, b in zip(norms, norms[1:]))
    margins = []
    for a, b in zip(diffs, diffs[1:]):
        good, m = upper_bound_verdict(Term(abs(b.mean), b.stderr), Term(abs(a.mean), a.stderr))
        ok &= good
        if m is not None:
            margins.append(m)
    return Report("truncation", terms, bool(ok), min(margins) if margins else None,
                  {"r": r_list, "R": R, "ell": ell, "mesh": mesh, "k": k, "n": n, "seed": seed})


# ------------------------------------------------ Russo-type inequality
def _box_grid(n, K, h, m):
    """Noise-cell ranges of the boxes (scale m cells) that cover the noise
    region [-n-h, n+h] x [-K-h, K+h], plus one outer ring of boxes."""
    lo = (-n - h, -K - h)
    hi = (n + h, K + h)
    b0 = [math.floor(l / m) - 1 for l in lo]
    b1 = [math.floor(u / m) + 1 for u in hi]
    return lo, b0, b1


def _russo_chunk(start, count, seed, kernel, n, K, m, ell, h_fd):
    h = kernel.h
    lo, b0, b1 = _box_grid(n, K, h, m)
    # the noise grid spans every box, the field window is the central part
    glo = (b0[0] * m, b0[1] * m)
    shape = ((b1[0] - b0[0] + 1) * m, (b1[1] - b0[1] + 1) * m)
    sampler = FFTSampler(kernel, shape)
    off = (-n - glo[0] - h, -K - glo[1] - h)  # window index in the valid output
    nbx, nby = b1[0] - b0[0] + 1, b1[1] - b0[1] + 1
    q = kernel.values
    flips = np.zeros((count, nbx * nby), dtype=bool)
    der = np.empty(count)
    base = np.empty(count, dtype=bool)
    for i in range(count):
        w = noise_rng(seed, start + i, TAG_NOISE).standard_normal(shape) * kernel.mesh
        w2 = noise_rng(seed, start + i, TAG_RESAMPLE).standard_normal(shape) * kernel.mesh
        full = sampler(NoiseGrid(glo, w, kernel.mesh)).values
        win = full[off[0]:off[0] + 2 * n + 1, off[1]:off[1] + 2 * K + 1]
        a = lr_crossing(win + ell >= 0)
        base[i] = a
        der[i] = (float(lr_crossing(win + ell + h_fd >= 0)) - lr_crossing(win + ell - h_fd >= 0)) / (2 * h_fd)
        for bx in range(nbx):
            for by in range(nby):
                sx, sy = slice(bx * m, (bx + 1) * m), slice(by * m, (by + 1) * m)
                delta = signal.convolve(w2[sx, sy] - w[sx, sy], q, mode="full")
                # noise index c affects valid-output index c - 2h .. c
                ox, oy = bx * m - 2 * h - off[0], by * m - 2 * h - off[1]
                x0, y0 = max(ox, 0), max(oy, 0)
                x1 = min(ox + delta.shape[0], 2 * n + 1)
                y1 = min(oy + delta.shape[1], 2 * K + 1)
                if x1 <= x0 or y1 <= y0:
                    continue
                new = win.copy()
                new[x0:x1, y0:y1] += delta[x0 - ox:x1 - ox, y0 - oy:y1 - oy]
                mask_old = win[x0:x1, y0:y1] + ell >= 0
                if np.array_equal(mask_old, new[x0:x1, y0:y1] + ell >= 0):
                    continue
                flips[i, bx * nby + by] = lr_crossing(new + ell >= 0) != a
    return flips, der, base


def check_gaussian_russo(model: GaussianModel, s: float, R: float, n: int, seed: int,
                         k: float = 1.0, h: float = FD_STEP) -> Report:
    """dP_ell[Cross]/d ell against the summed box resampling influences.

    Reports the ratio lhs / sum_S Infl(S) and the constant
    c = ratio ||q||_2 / min(1, (s/r)^d); the verdict asserts only positivity
    (lhs > 0 and sum Infl > 0 beyond 3 sigma).  Boxes in the outer ring do not
    touch the field window and have zero influence.
    """
    kernel = model.kernel
    _check_n(n)
    m = _pix(s, model.mesh)
    npx = _pix(R, model.mesh)
    K = _half(k, npx)
    parts = chunk_map(_russo_chunk, n, (int(seed), kernel, npx, K, m, model.ell, h))
    flips = np.concatenate([p[0] for p in parts])
    der = mean_estimate(np.concatenate([p[1] for p in parts]), seed)
    prob = indicator_estimate(np.concatenate([p[2] for p in parts]), seed)
    infl = flips.mean(axis=0)
    tot = flips.sum(axis=1).astype(float)
    s_infl = mean_estimate(tot, seed)
    ratio = der.mean / s_infl.mean if s_infl.mean > 0 else math.inf
    r = kernel.support_radius
    c = ratio * l2_norm(kernel) / min(1.0, (s / r) ** 2)
    ok = der.mean - 3 * der.stderr > 0 and s_infl.mean - 3 * s_infl.stderr > 0
    _, _, b1 = _box_grid(npx, K, kernel.h, m)
    lo, b0, _ = _box_grid(npx, K, kernel.h, m)
    nby = b1[1] - b0[1] + 1
    ring = [u for u in range(infl.size)
            if u // nby in (0, b1[0] - b0[0]) or u % nby in (0, nby - 1)]
    terms = {"lhs": term(der), "sum_infl": term(s_infl), "P": term(prob), "ratio": Term(ratio),
             "c_fitted": Term(c), "max_infl": Term(float(infl.max())),
             "outer_ring_infl": Term(float(infl[ring].max()) if ring else 0.0)}
    return Report("gaussian-russo", terms, bool(ok), None,
                  {"s": s, "R": R, "k": k, "ell": model.ell, "r": r, "n": n, "seed": seed,
                   "n_boxes": int(infl.size), "min_infl": float(infl.min())})


# ------------------------------------------------------- OSSS-type bound
def _subset_units(alg, subset):
    g = alg.geom
    if subset == "all":
        return np.arange(g.n_units)
    if subset in ("half", "quarter"):
        rect = alg.half_rect() if subset == "half" else alg.quarter_rect()
        return np.array([u for u in range(g.n_units) if g.box_distance(u, rect) < alg.r])
    return np.asarray(sorted(int(u) for u in subset), dtype=np.int64)


def _lbderiv_chunk(start, count, seed, alg, units, ell, h_fd):
    g = alg.geom
    keep = np.zeros(g.n_units, bool)
    keep[units] = True
    other = np.flatnonzero(~keep)
    a = np.empty(count, bool)
    a2 = np.empty(count, bool)
    der = np.empty(count)
    rev = np.zeros(g.n_units, np.int64)
    for i in range(count):
        noise = g.noise(noise_rng(seed, start + i, TAG_NOISE))
        f = g.field(noise)
        bits = np.ascontiguousarray(f + ell >= 0)
        order, out, _ = alg.run(bits, alg.draw_aux(noise_rng(seed, start + i, TAG_AUX)))
        rev[order] += 1
        a[i] = out
        der[i] = (float(alg.direct(f + ell + h_fd >= 0)) - alg.direct(f + ell - h_fd >= 0)) / (2 * h_fd)
        noise2 = g.resample(noise, other, noise_rng(seed, start + i, TAG_RESAMPLE))
        a2[i] = alg.direct(np.ascontiguousarray(g.field(noise2) + ell >= 0))
    return a, a2, der, rev


def conditional_variance_estimate(a: np.ndarray, a2: np.ndarray):
    """Var[P[A | F]] from pairs sharing the F-measurable noise.

    Returns (value, stderr, Var(1_A), E[Var(1_A | F)]); the last two satisfy
    the law of total variance with the first exactly.
    """
    a = a.astype(float)
    a2 = a2.astype(float)
    n = a.size
    p = 0.5 * (a.mean() + a2.mean())
    z = a * a2
    v = z.mean() - p * p
    e_var = 0.5 * np.mean((a - a2) ** 2)
    se = math.sqrt(max(z.var(ddof=1), 0.0) / n + (2 * p) ** 2 * max((0.5 * (a + a2)).var(ddof=1), 0.0) / n) if n > 1 else 0.0
    return float(v), float(se), float(p * (1 - p)), float(e_var)


def check_lbderiv(model: GaussianModel, s: float, R: float, n: int, seed: int, subset="all",
                  k: float = 1.0, algorithm: str = "random-line", h: float = FD_STEP) -> Report:
    """d/d ell P[Cross_k(R)] >= c min(1,(s/r)^d)/||q|| Var[P[A|F_S']] / max_{S in S'} Rev(S).

    The derivative, the conditional variance (paired replicas sharing the
    S' noise) and the revealments are all estimated; c is reported.
    """
    kernel = model.kernel
    _check_n(n)
    if algorithm == "random-line":
        alg = GaussianLine(kernel, k, R, s, "random")
    elif algorithm == "left-line":
        alg = GaussianLine(kernel, k, R, s, "left")
    elif algorithm == "level-line":
        alg = GaussianLevelLine(kernel, k, R, s)
    else:
        raise InvalidParameter(f"unknown algorithm {algorithm!r}")
    units = _subset_units(alg, subset)
    parts = chunk_map(_lbderiv_chunk, n, (int(seed), alg, units, model.ell, h))
    a = np.concatenate([p[0] for p in parts])
    a2 = np.concatenate([p[1] for p in parts])
    der = mean_estimate(np.concatenate([p[2] for p in parts]), seed)
    rev = sum(p[3] for p in parts) / n
    v, v_se, var_a, e_var = conditional_variance_estimate(a, a2)
    max_rev = float(rev[units].max()) if units.size else 0.0
    pref = min(1.0, (s / kernel.support_radius) ** 2) / l2_norm(kernel)
    base = pref * v / max_rev if max_rev > 0 else 0.0
    c = der.mean / base if base > 0 else math.inf
    ok = der.mean + 3 * der.stderr >= 0 and v + 3 * v_se >= 0
    terms = {"derivative": term(der), "cond_var": Term(v, v_se), "max_rev": Term(max_rev),
             "var_indicator": Term(var_a), "expected_cond_var": Term(e_var), "c_fitted": Term(c)}
    return Report("lbderiv", terms, bool(ok), None,
                  {"s": s, "R": R, "k": k, "ell": model.ell, "subset": subset if isinstance(subset, str) else "list",
                   "n_subset": int(units.size), "algorithm": algorithm, "n": n, "seed": seed,
                   "total_variance_gap": var_a - (v + e_var)})


# ----------------------------------------------- one-arm and crossings
def _sum_chunk(start, count, seed, tag, model, n_w, n1, r_pix, reach, n_lim):
    from .mc import field_window
    out = np.empty(count)
    vs = np.arange(-n_lim, n_lim + 1, r_pix)
    c = n_w
    for i in range(count):
        f = field_window(model, n_w, n_w, noise_rng(seed, start + i, tag))
        bits = f + model.ell >= 0
        lab, _ = ndimage.label(bits, structure=_S4)
        core = lab[c - n1:c + n1 + 1, c - n1:c + n1 + 1]
        ids = np.unique(core[core > 0])
        if ids.size == 0:
            out[i] = 0.0
            continue
        cl = np.isin(lab, ids).astype(np.int64)
        ps = np.zeros((cl.shape[0] + 1, cl.shape[1] + 1), np.int64)
        ps[1:, 1:] = cl.cumsum(0).cumsum(1)
        lo = vs + c - reach
        hi = vs + c + reach + 1
        tot = (ps[hi[:, None], hi[None, :]] - ps[lo[:, None], hi[None, :]]
               - ps[hi[:, None], lo[None, :]] + ps[lo[:, None], lo[None, :]])
        out[i] = float(np.count_nonzero(tot))
    return out


def cluster_box_sum(model: GaussianModel, R: float, r: float, n: int, seed: int, tag: int = TAG_SUM):
    """sum_{v in rZ^2 cap Lambda_{R+2r}} P[Lambda_1 <-> v + Lambda_{6r}], connections
    inside Lambda_{R+8r} (a lower bound on the full-plane sum)."""
    eps = model.mesh
    n_w = _pix(R + 8 * r, eps)
    parts = chunk_map(_sum_chunk, n, (int(seed), int(tag), model, n_w, int(math.floor(1 / eps + 1e-9)),
                                      _pix(r, eps), _pix(6 * r, eps), _pix(R + 2 * r, eps) // _pix(r, eps) * _pix(r, eps)))
    return mean_estimate(np.concatenate(parts), seed, {"R": R, "r": r, "box": R + 8 * r})


def check_ubgf1(model: GaussianModel, ell2: float, R: float, n: int, seed: int) -> Report:
    """P_{ell'}[A_1(1,R)] - P_ell[A_1(1,R)] <= r^{d/2}(ell'-ell)/int q
    * sqrt(P_{ell'}[A_1(1,R)] sum_v P_ell[Lambda_1 <-> v + Lambda_{6r}])."""
    kernel = model.kernel
    r = kernel.support_radius
    if ell2 < model.ell:
        raise InvalidParameter("need ell <= ell'")
    if not R >= r >= 1:
        raise InvalidParameter("need R >= r >= 1")
    n_out = _pix(R, model.mesh)
    hi_model = model.at(ell2)
    ra = gaussian_arm_radii(model, R, 1.0, n, seed, TAG_NOISE)[:, 0] >= n_out
    rb = gaussian_arm_radii(hi_model, R, 1.0, n, seed, TAG_NOISE)[:, 0] >= n_out
    diff = mean_estimate(rb.astype(float) - ra, seed)
    pq = indicator_estimate(gaussian_arm_radii(hi_model, R, 1.0, n, seed, TAG_RHS)[:, 0] >= n_out, seed)
    chi = cluster_box_sum(model, R, r, n, seed)
    pref = r * (ell2 - model.ell) / integral(kernel)
    rhs = pref * math.sqrt(pq.mean * chi.mean)
    rel = 0.5 * math.hypot(pq.stderr / pq.mean if pq.mean else 0.0, chi.stderr / chi.mean if chi.mean else 0.0)
    lhs, rhs_t = term(diff), Term(rhs, rhs * rel)
    ok, m = upper_bound_verdict(lhs, rhs_t)
    return Report("ubgf1", {"lhs": lhs, "rhs": rhs_t, "P_ell'[A1]": term(pq), "box_sum": term(chi),
                            "int_q": Term(integral(kernel))}, ok, m,
                  {"ell": model.ell, "ell2": ell2, "R": R, "r": r, "n": n, "seed": seed})


def check_ubgf2(model: GaussianModel, k: float, R_list, n: int, seed: int) -> Report:
    """d+/d ell P[Cross_k(R)] <= c R/int q sqrt(P[A_2(2r, R-2r)]), c fitted on the first R."""
    kernel = model.kernel
    r = kernel.support_radius
    R_list = sorted(float(R) for R in R_list)
    deriv, base = [], []
    for R in R_list:
        if R < 4 * r:
            raise InvalidParameter("need R >= 4r")
        _, d = derivative_in_level(model, k, R, n, seed)
        rad = gaussian_arm_radii(model, R - 2 * r, 2 * r, n, seed, TAG_RHS)
        n_out = _pix(R - 2 * r, model.mesh)
        a2 = indicator_estimate((rad[:, 0] >= n_out) & (rad[:, 1] >= n_out), seed)
        pref = R / integral(kernel)
        deriv.append(term(d))
        base.append(Term(pref * math.sqrt(a2.mean), pref * 0.5 * a2.stderr / math.sqrt(a2.mean) if a2.mean else 0.0))
    return _fitted_family("ubgf2", R_list, deriv, base, upper=True,
                          extra={"ell": model.ell, "k": k, "r": r, "n": n, "seed": seed})


def check_lbgf(model: GaussianModel, k: float, R_list, n: int, seed: int, variant: int = 1) -> Report:
    """Lower bounds on d-/d ell P[Cross_k(R)], c fitted on the first R.

    variant 1: c/||q|| P(1-P) / ((r/R) sum_{i=2}^{R/r} P[A_1(2r, ir)]);
    variant 2: c/||q|| P[Cross_{1/(8k)}(kR)]^4 (1 - P[Cross_{8k}(R/8)])^2 / P[A_2(2r, R-2r)].
    """
    kernel = model.kernel
    r = kernel.support_radius
    R_list = sorted(float(R) for R in R_list)
    nq = l2_norm(kernel)
    deriv, base = [], []
    for R in R_list:
        if R < 8 * r:
            raise InvalidParameter("need R >= 8r")
        p, d = derivative_in_level(model, k, R, n, seed)
        deriv.append(term(d))
        if variant == 1:
            rad = gaussian_arm_radii(model, R, 2 * r, n, seed, TAG_RHS)[:, 0]
            imax = int(math.floor(R / r + 1e-9))
            g = [arm_curve(rad, model.mesh, 2 * r, i * r) for i in range(2, imax + 1)]
            den = (r / R) * sum(g)
            v = p.mean * (1 - p.mean) / (nq * den)
            se = p.stderr * abs(1 - 2 * p.mean) / (nq * den)
        elif variant == 2:
            t1 = indicator_estimate(gaussian_crossing(model, 1 / (8 * k), k * R, n, seed, TAG_RHS)[:, 0], seed)
            t2 = indicator_estimate(gaussian_crossing(model, 8 * k, R / 8, n, seed, TAG_SUM)[:, 0], seed)
            rad = gaussian_arm_radii(model, R - 2 * r, 2 * r, n, seed, TAG_EXTRA)
            n_out = _pix(R - 2 * r, model.mesh)
            a2 = indicator_estimate((rad[:, 0] >= n_out) & (rad[:, 1] >= n_out), seed)
            v = t1.mean ** 4 * (1 - t2.mean) ** 2 / (nq * a2.mean) if a2.mean else 0.0
            rel = math.sqrt((4 * t1.stderr / t1.mean if t1.mean else 0.0) ** 2
                            + (2 * t2.stderr / (1 - t2.mean) if t2.mean < 1 else 0.0) ** 2
                            + (a2.stderr / a2.mean if a2.mean else 0.0) ** 2)
            se = v * rel
        else:
            raise InvalidParameter("variant is 1 or 2")
        base.append(Term(v, se))
    return _fitted_family(f"lbgf{variant}", R_list, deriv, base, upper=False,
                          extra={"ell": model.ell, "k": k, "r": r, "n": n, "seed": seed})


def check_ubgf(variant: str, **params) -> Report:
    """Dispatch: 'ubgf1', 'ubgf2', 'lbgf1' or 'lbgf2'."""
    if variant == "ubgf1":
        return check_ubgf1(**params)
    if variant == "ubgf2":
        return check_ubgf2(**params)
    if variant in ("lbgf1", "lbgf2"):
        return check_lbgf(variant=int(variant[-1]), **params)
    raise InvalidParameter(f"unknown variant {variant!r}")


# ------------------------------------------------------- decay and theta
def gaussian_decay_points(model: GaussianModel, kind: str, R_list, n: int, seed: int):
    """(R, P, stderr) rows: 'one_arm' = P[Lambda_1 <-> boundary of Lambda_R] from
    one window per replica, 'crossing' = square crossings on independent streams."""
    R_list = sorted(float(R) for R in R_list)
    if kind == "one_arm":
        rad = gaussian_arm_radii(model, R_list[-1], 1.0, n, seed)[:, 0]
        out = []
        for R in R_list:
            e = indicator_estimate(rad >= _pix(R, model.mesh), seed)
            out.append((R, e.mean, e.stderr))
        return out
    if kind == "crossing":
        out = []
        for j, R in enumerate(R_list):
            e = indicator_estimate(gaussian_crossing(model, 1.0, R, n, seed, 100 + j)[:, 0], seed)
            out.append((R, e.mean, e.stderr))
        return out
    raise InvalidParameter(f"unknown decay observable {kind!r}")


def gaussian_theta_curve(model: GaussianModel, ell_list, R: float, n: int, seed: int) -> list[dict]:
    """P_ell[Lambda_1 <-> boundary of Lambda_R] with shared noise across levels."""
    rows = []
    for ell in sorted(float(x) for x in ell_list):
        e = indicator_estimate(gaussian_arm_radii(model.at(ell), R, 1.0, n, seed)[:, 0] >= _pix(R, model.mesh), seed)
        rows.append({"ell": ell, "theta": e.mean, "stderr": e.stderr})
    return rows


def gaussian_correlation_rate(model: GaussianModel, R_list, n: int, seed: int) -> dict:
    pts = [p for p in gaussian_decay_points(model, "one_arm", R_list, n, seed) if p[1] > 0]
    fit = fit_exponential_decay(pts, label="gaussian one-arm decay")
    return {"ell": model.ell, "rate": fit.rate, "rate_stderr": fit.slope_stderr, "fit": fit.as_dict()}


# ----------------------------------------------------------- mesh effects
def _dual_pair_chunk(start, count, seed, tag, model, n, K):
    from .mc import field_window
    out = np.empty((count, 2), dtype=bool)
    left = np.zeros((2 * n + 1, 2 * K + 1), bool)
    right = left.copy()
    left[0, :], right[-1, :] = True, True
    for i in range(count):
        bits = field_window(model, n, K, noise_rng(seed, start + i, tag)) + model.ell >= 0
        out[i, 0] = _connects(bits, left, right)
        out[i, 1] = _connects(bits, left, right, eight=True)
    return out


def square_crossing_with_bias(model: GaussianModel, R: float, n: int, seed: int, tag: int = TAG_NOISE):
    """Square crossing estimate and its discretisation bias.

    With 4-adjacent set pixels and 8-adjacent unset pixels, exactly one of
    (set left-right crossing, unset top-bottom crossing) occurs; at ell = 0
    the law of f is invariant under f -> -f and quarter turns, so
    P4 - 1/2 = -(P8 - P4)/2, where P8 uses 8-adjacent set pixels.  The
    right side is a paired difference with a much smaller variance.
    Returns (Estimate of P4, Estimate of P4 - 1/2 by duality).
    """
    npx = _pix(R, model.mesh)
    x = np.concatenate(chunk_map(_dual_pair_chunk, n, (int(seed), int(tag), model, npx, npx)))
    p4 = indicator_estimate(x[:, 0], seed, {"mesh": model.mesh, "R": R})
    bias = mean_estimate(-0.5 * (x[:, 1].astype(float) - x[:, 0]), seed, {"mesh": model.mesh, "R": R})
    return p4, bias


def check_square_symmetry(R: float = 32.0, n: int = 4000, seed: int = 0, mesh: float = 0.25,
                          r: float = 3.0, n_fine: int | None = None, tol: float = 0.05) -> Report:
    """|P[Cross_1(R)] - 1/2| <= tol at ell = 0, and the bias shrinks when the mesh is halved."""
    coarse = GaussianModel(0.0, mesh, r)
    fine = GaussianModel(0.0, mesh / 2, r)
    p_c, b_c = square_crossing_with_bias(coarse, R, n, seed)
    p_f, b_f = square_crossing_with_bias(fine, R, n if n_fine is None else n_fine, seed)
    near = abs(p_c.mean - 0.5) <= tol
    shrink_lhs = Term(abs(b_f.mean), b_f.stderr)
    shrink_rhs = Term(abs(b_c.mean), b_c.stderr)
    gap = shrink_rhs.value - shrink_lhs.value
    sig = math.hypot(b_f.stderr, b_c.stderr)
    ok = near and gap > 0
    return Report("square-symmetry",
                  {"P[coarse]": term(p_c), "P[fine]": term(p_f), "bias[coarse]": term(b_c),
                   "bias[fine]": term(b_f)},
                  bool(ok), gap / sig if sig > 0 else None,
                  {"R": R, "mesh": mesh, "r": r, "n": n, "seed": seed, "tol": tol,
                   "within_tol": bool(near), "bias_shrinks": bool(gap > 0)})
