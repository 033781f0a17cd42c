"""Monte Carlo engine: per-replica indicators for both models.

Bernoulli replicas use the hashed edge uniforms keyed by
replica_key(seed, replica, tag); Gaussian replicas draw their white noise
from a Philox stream keyed the same way.  All work is chunked through
:func:`percolab.parallel.chunk_map`, so results never depend on the number
of workers.
"""
from __future__ import annotations

import math
from functools import lru_cache

import numpy as np

from .. import _mc
from ..gaussian import (FFTSampler, InvalidParameter, NoiseGrid, _S4, _S8, lr_crossing)
from ..lattice import (LatticeBox, UnsupportedDimension, crossing, one_arm, rect_crossing,
                       two_point)
from ..parallel import chunk_map
from ..rng import replica_key
from .core import (BernoulliModel, Estimate, EventSpec, GaussianModel, _check_n,
                   indicator_estimate, mean_estimate, model_dict)

NOISE_TAG = 1


def _half(k, R) -> int:
    return int(math.ceil(float(k) * R - 1e-9))


# ------------------------------------------------------------ Bernoulli
def bernoulli_box_event(event: EventSpec, d: int = 2):
    """(box, lattice event) for the generic evaluation path."""
    if event.kind == "one_arm":
        box = LatticeBox.cube(d, int(event.R))
        return box, one_arm(box, int(event.R))
    if event.kind == "crossing":
        box = LatticeBox.crossing_box(d, int(event.R), event.k)
        return box, crossing(box, event.k, int(event.R))
    if event.kind == "rect":
        if d != 2:
            raise UnsupportedDimension("rectangle crossings are planar")
        box = LatticeBox.rectangle(event.a, event.b)
        return box, rect_crossing(box, event.a, event.b)
    if event.kind == "two_point":
        v = tuple(event.v)
        if len(v) != d:
            raise InvalidParameter("v has the wrong dimension")
        R = event.box if event.box is not None else 4 * max(abs(x) for x in v) + 16
        box = LatticeBox.cube(d, R)
        return box, two_point(box, v)
    if event.kind == "two_arm":
        from ..lattice import two_arm
        box = LatticeBox.cube(d, int(event.R))
        return box, two_arm(box, int(event.R))
    raise InvalidParameter(f"no box form for {event.kind}")  # pragma: no cover


def box_states(box: LatticeBox, p: float, seed: int, tag: int, start: int, count: int) -> np.ndarray:
    base = np.ascontiguousarray(box.edge_base, dtype=np.int64)
    axes = np.ascontiguousarray(box.edge_axis, dtype=np.int64)
    return _mc.box_uniforms(np.uint64(seed), np.uint64(tag), start, count, base, axes) < p


def _generic_chunk(start, count, seed, tag, p, box, ev):
    return ev.evaluate_batch(box_states(box, p, seed, tag, start, count))


def _bernoulli_chunk(start, count, seed, tag, p, d, event: EventSpec):
    s, t = np.uint64(seed), np.uint64(tag)
    if event.kind == "one_arm":
        R = int(event.R)
        return _mc.one_arm_radii(s, t, start, count, p, d, R) >= R
    if event.kind == "two_arm":
        if d != 2:
            raise UnsupportedDimension("two-arm events are planar")
        return _mc.two_arm_flags(s, t, start, count, p, int(event.R))
    if d == 2 and event.kind in ("rect", "crossing"):
        if event.kind == "rect":
            a, b = event.a, event.b
        else:
            a, b = 2 * int(event.R) + 1, 2 * _half(event.k, int(event.R)) + 1
        return _mc.rect_crossing_flags(s, t, start, count, p, a, b)
    box, ev = bernoulli_box_event(event, d)
    return _generic_chunk(start, count, seed, tag, p, box, ev)


def bernoulli_indicators(event: EventSpec, model: BernoulliModel, n: int, seed: int,
                         tag: int = 0) -> np.ndarray:
    _check_n(n)
    parts = chunk_map(_bernoulli_chunk, n, (int(seed), int(tag), float(model.p), model.d, event))
    return np.concatenate(parts)


def _radii_chunk(start, count, seed, tag, p, d, R):
    return _mc.one_arm_radii(np.uint64(seed), np.uint64(tag), start, count, p, d, R)


def one_arm_radii(model: BernoulliModel, R: int, n: int, seed: int, tag: int = 0) -> np.ndarray:
    """Per-replica sup-norm reached by the cluster of 0 in Lambda_R (capped at R)."""
    _check_n(n)
    return np.concatenate(chunk_map(_radii_chunk, n, (int(seed), int(tag), float(model.p), model.d, int(R))))


def _tp_chunk(start, count, seed, tag, p, d, Rbox, R):
    return _mc.two_point_counts(np.uint64(seed), np.uint64(tag), start, count, p, d, Rbox, R)


def two_point_sum(model: BernoulliModel, R: int, n: int, seed: int, tag: int = 0,
                  box: int | None = None) -> Estimate:
    """sum_{v in Lambda_R} P[0 <-> v], connections inside Lambda_box (default 4R + 16).

    Equals E|C(0) cap Lambda_R|; the box restriction makes it a lower bound on
    the full-space sum.
    """
    _check_n(n)
    Rbox = 4 * R + 16 if box is None else int(box)
    if Rbox < R:
        raise InvalidParameter("connection box must contain Lambda_R")
    c = np.concatenate(chunk_map(_tp_chunk, n, (int(seed), int(tag), float(model.p), model.d, Rbox, int(R))))
    return mean_estimate(c, seed, {"R": R, "box": Rbox, "p": model.p, "d": model.d})


# --------------------------------------------------------------- Gaussian
@lru_cache(maxsize=16)
def _sampler(model: GaussianModel, shape: tuple) -> FFTSampler:
    return FFTSampler(model.kernel, shape)


def noise_rng(seed: int, rep: int, tag: int = NOISE_TAG) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=replica_key(seed, rep, tag)))


def field_window(model: GaussianModel, nx: int, ny: int, rng: np.random.Generator) -> np.ndarray:
    """Field values on the centred (2nx+1) x (2ny+1) pixel window."""
    h = model.kernel.h
    shape = (2 * nx + 1 + 2 * h, 2 * ny + 1 + 2 * h)
    w = rng.standard_normal(shape) * model.mesh
    return _sampler(model, shape)(NoiseGrid((-nx - h, -ny - h), w, model.mesh)).values


def _pix(length: float, mesh: float) -> int:
    n = int(round(length / mesh))
    if abs(n * mesh - length) > 1e-9 * max(1.0, length):
        raise InvalidParameter(f"{length} is not a multiple of the mesh {mesh}")
    return n


def central_radii(bits: np.ndarray, n_in: int) -> tuple[int, int]:
    """Sup-norm radii reached by the set (4-adj) and unset (8-adj) clusters
    of the central Lambda_{n_in} pixels of a square window; -1 when absent."""
    from scipy import ndimage
    c = bits.shape[0] // 2
    out = []
    for b, st in ((bits, _S4), (~bits, _S8)):
        lab, _ = ndimage.label(b, structure=st)
        core = lab[c - n_in:c + n_in + 1, c - n_in:c + n_in + 1]
        ids = np.unique(core[core > 0])
        if ids.size == 0:
            out.append(-1)
            continue
        xs, ys = np.nonzero(np.isin(lab, ids))
        out.append(int(max(np.abs(xs - c).max(), np.abs(ys - c).max())))
    return out[0], out[1]


def _gauss_radii_chunk(start, count, seed, tag, model, n_out, n_in):
    out = np.empty((count, 2), dtype=np.int64)
    for i in range(count):
        f = field_window(model, n_out, n_out, noise_rng(seed, start + i, tag))
        out[i] = central_radii(f + model.ell >= 0, n_in)
    return out


def gaussian_arm_radii(model: GaussianModel, R: float, r_in: float, n: int, seed: int,
                       tag: int = NOISE_TAG) -> np.ndarray:
    """(n, 2) pixel radii of the set / unset clusters of Lambda_{r_in} in Lambda_R."""
    _check_n(n)
    n_out, n_in = _pix(R, model.mesh), int(math.floor(r_in / model.mesh + 1e-9))
    if n_in > n_out:
        raise InvalidParameter("need r <= R")
    return np.concatenate(chunk_map(_gauss_radii_chunk, n, (int(seed), int(tag), model, n_out, n_in)))


def _gauss_cross_chunk(start, count, seed, tag, model, n, K, ells):
    out = np.empty((count, len(ells)), dtype=bool)
    for i in range(count):
        f = field_window(model, n, K, noise_rng(seed, start + i, tag))
        for j, ell in enumerate(ells):
            out[i, j] = lr_crossing(f + ell >= 0)
    return out


def gaussian_crossing(model: GaussianModel, k: float, R: float, n: int, seed: int,
                      tag: int = NOISE_TAG, ells=None) -> np.ndarray:
    """Crossing indicators of B_k(R); one column per level (shared noise)."""
    _check_n(n)
    npx = _pix(R, model.mesh)
    K = _half(k, npx)
    ells = (model.ell,) if ells is None else tuple(float(e) for e in ells)
    return np.concatenate(chunk_map(_gauss_cross_chunk, n, (int(seed), int(tag), model, npx, K, ells)))


def gaussian_indicators(event: EventSpec, model: GaussianModel, n: int, seed: int,
                        tag: int = NOISE_TAG) -> np.ndarray:
    if event.kind == "crossing":
        return gaussian_crossing(model, event.k, event.R, n, seed, tag)[:, 0]
    if event.kind in ("one_arm", "two_arm"):
        rad = gaussian_arm_radii(model, event.R, event.r, n, seed, tag)
        n_out = _pix(event.R, model.mesh)
        hit = rad[:, 0] >= n_out
        if event.kind == "two_arm":
            hit &= rad[:, 1] >= n_out
        return hit
    raise InvalidParameter(f"{event.kind} is not available for the Gaussian model")


# ------------------------------------------------------------ public entry
def mc_indicators(event: EventSpec, model, n: int, seed: int, tag: int = 0) -> np.ndarray:
    if isinstance(model, BernoulliModel):
        return bernoulli_indicators(event, model, n, seed, tag)
    return gaussian_indicators(event, model, n, seed, tag if tag else NOISE_TAG)


def mc_estimate(event, model, n: int, seed: int, tag: int = 0) -> Estimate:
    """Frequency estimate of the event; a pure function of its arguments."""
    if isinstance(event, dict):
        event = EventSpec.from_dict(event)
    if isinstance(model, dict):
        from .core import model_from_dict
        model = model_from_dict(model)
    _check_n(n)
    x = mc_indicators(event, model, n, seed, tag)
    params = model_dict(model)
    params["event"] = event.label()
    if event.R is not None:
        params["R"] = event.R
    return indicator_estimate(x, seed, params)
