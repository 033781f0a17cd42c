"""Discretised stationary Gaussian fields f = q * W on the grid eps Z^d.

White noise is represented by i.i.d. N(0, eps^d) weights on cells centred at
the grid points; the field at grid point x is sum_c q(x - y_c) W_c.  Grid
points ("pixels") and noise cells share the integer index lattice, so a
field sample, a noise grid and a kernel all carry an integer lower corner
``lo`` and a mesh.

Excursion sets {f + l >= 0} are pixel masks.  In d = 2 set pixels are joined
by 4-adjacency and unset pixels by 8-adjacency; with this convention exactly
one of (set left-right crossing, unset top-bottom crossing) occurs in any
rectangle, mirroring continuum duality.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy import fft as sfft
from scipy import ndimage, signal

from .lattice import InvalidQuery

_S4 = ndimage.generate_binary_structure(2, 1)
_S8 = ndimage.generate_binary_structure(2, 2)


class InvalidParameter(ValueError):
    pass


def _steps(length: float, mesh: float, what: str) -> int:
    n = length / mesh
    k = int(round(n))
    if abs(n - k) > 1e-9 * max(1.0, abs(n)):
        raise InvalidParameter(f"{what}={length} is not a multiple of the mesh {mesh}")
    return k


# ------------------------------------------------------------------ kernels
@dataclass(frozen=True)
class Kernel:
    """q sampled on the offsets eps * t, t in [-h, h]^d (h = support / eps)."""

    d: int
    mesh: float
    support_radius: float
    values: np.ndarray
    name: str = "kernel"

    def __post_init__(self):
        if self.mesh <= 0:
            raise InvalidParameter("mesh must be positive")
        h = self.h
        if self.values.shape != (2 * h + 1,) * self.d:
            raise InvalidParameter("kernel table does not match its support radius")
        if not np.allclose(self.values, self.values[(slice(None, None, -1),) * self.d], atol=1e-14):
            raise InvalidParameter("kernel must satisfy q(x) = q(-x)")
        if not np.any(self.values):
            raise InvalidParameter("kernel has zero L2 norm")
        self.values.setflags(write=False)

    @property
    def h(self) -> int:
        return _steps(self.support_radius, self.mesh, "support radius")

    @property
    def cell_volume(self) -> float:
        return self.mesh ** self.d

    def offsets(self) -> np.ndarray:
        """Offsets (in length units) of the table entries, shape (..., d)."""
        ax = np.arange(-self.h, self.h + 1) * self.mesh
        return np.stack(np.meshgrid(*([ax] * self.d), indexing="ij"), axis=-1)

    def l2_norm_sq(self) -> float:
        return float(np.sum(self.values ** 2) * self.cell_volume)

    @property
    def symmetric_under_permutation(self) -> bool:
        return all(np.allclose(self.values, np.swapaxes(self.values, 0, a)) for a in range(1, self.d))

    def to_csv(self, path) -> None:
        """Rows: one column per offset coordinate, then the value."""
        off = self.offsets().reshape(-1, self.d)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow([f"x{i}" for i in range(self.d)] + ["value"])
            for o, v in zip(off, self.values.reshape(-1)):
                w.writerow([repr(float(x)) for x in o] + [repr(float(v))])

    @classmethod
    def from_csv(cls, path, name: str = "kernel") -> "Kernel":
        with open(path, newline="") as fh:
            rows = [r for r in csv.reader(fh) if r]
        d = len(rows[0]) - 1
        data = np.array([[float(x) for x in r] for r in rows[1:]])
        off, vals = data[:, :d], data[:, d]
        ax = np.unique(off[:, 0])
        if ax.size < 2:
            raise InvalidParameter("kernel CSV needs at least three offsets per axis")
        mesh = float(np.round(ax[1] - ax[0], 12))
        h = (ax.size - 1) // 2
        table = np.zeros((2 * h + 1,) * d)
        idx = np.rint(off / mesh).astype(int) + h
        table[tuple(idx.T)] = vals
        return cls(d, mesh, h * mesh, table, name)


def make_bargmann_fock_kernel(d: int = 2, mesh: float = 0.25, support_radius: float = 4.0) -> Kernel:
    """q(x) = (2/pi)^(d/4) exp(-|x|^2), so that q * q = exp(-|x|^2 / 2)."""
    if support_radius < 4:
        raise InvalidParameter("support_radius >= 4 keeps the tail negligible")
    h = _steps(support_radius, mesh, "support radius")
    ax = np.arange(-h, h + 1) * mesh
    r2 = sum(np.meshgrid(*([ax ** 2] * d), indexing="ij"))
    q = (2.0 / np.pi) ** (d / 4.0) * np.exp(-r2)
    return Kernel(d, mesh, h * mesh, q, "bargmann-fock")


def bargmann_fock_covariance(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return np.exp(-np.sum(x ** 2, axis=-1) / 2.0)


def smooth_cutoff(t) -> np.ndarray:
    """C-infinity cutoff: 1 on [0, 1/2], 0 on [1, inf), decreasing between."""
    t = np.asarray(t, dtype=float)
    s = np.clip(2.0 * t - 1.0, 0.0, 1.0)

    def psi(u):
        with np.errstate(divide="ignore"):
            return np.where(u > 0, np.exp(-1.0 / np.where(u > 0, u, 1.0)), 0.0)

    a, b = psi(1.0 - s), psi(s)
    return a / (a + b)


def truncate_kernel(kernel: Kernel, r_cut: float) -> Kernel:
    """q_r(x) = q(x) phi(|x| / r_cut); support shrinks to Lambda_{r_cut}."""
    if r_cut <= 0:
        raise InvalidParameter("r_cut must be positive")
    off = kernel.offsets()
    q = kernel.values * smooth_cutoff(np.sqrt(np.sum(off ** 2, axis=-1)) / r_cut)
    h_new = min(kernel.h, int(math.floor(r_cut / kernel.mesh + 1e-9)))
    c = kernel.h
    sl = (slice(c - h_new, c + h_new + 1),) * kernel.d
    return Kernel(kernel.d, kernel.mesh, h_new * kernel.mesh, np.ascontiguousarray(q[sl]),
                  f"{kernel.name}|r={r_cut:g}")


def truncation_error_sq(kernel: Kernel, r_cut: float) -> float:
    """||q - q_r||_2^2 on the grid."""
    off = kernel.offsets()
    phi = smooth_cutoff(np.sqrt(np.sum(off ** 2, axis=-1)) / r_cut)
    return float(np.sum((kernel.values * (1 - phi)) ** 2) * kernel.cell_volume)


def tail_l2_sq(kernel: Kernel, radius: float) -> float:
    """Grid version of the tail integral of q^2 over |x| > radius."""
    off = kernel.offsets()
    outside = np.sqrt(np.sum(off ** 2, axis=-1)) > radius
    return float(np.sum(kernel.values[outside] ** 2) * kernel.cell_volume)


@dataclass(frozen=True)
class CovarianceTable:
    """K = q * q on offsets eps * t, t in [-2h, 2h]^d."""

    mesh: float
    values: np.ndarray

    @property
    def h(self) -> int:
        return (self.values.shape[0] - 1) // 2

    def offsets(self) -> np.ndarray:
        ax = np.arange(-self.h, self.h + 1) * self.mesh
        return np.stack(np.meshgrid(*([ax] * self.values.ndim), indexing="ij"), axis=-1)

    def at(self, t: Sequence[int]) -> float:
        return float(self.values[tuple(int(x) + self.h for x in t)])


def kernel_self_convolution(kernel: Kernel) -> CovarianceTable:
    K = signal.convolve(kernel.values, kernel.values, mode="full", method="direct") * kernel.cell_volume
    return CovarianceTable(kernel.mesh, K)


# -------------------------------------------------------------------- noise
@dataclass
class NoiseGrid:
    """Cell weights W_c for cells lo + multi-index; Var W_c = mesh^d."""

    lo: tuple[int, ...]
    weights: np.ndarray
    mesh: float

    @property
    def d(self) -> int:
        return self.weights.ndim

    @property
    def shape(self) -> tuple[int, ...]:
        return self.weights.shape

    @property
    def region(self) -> tuple[np.ndarray, np.ndarray]:
        """Continuum extent of the cells (lower and upper corners)."""
        lo = (np.array(self.lo) - 0.5) * self.mesh
        return lo, lo + np.array(self.shape) * self.mesh

    def copy(self) -> "NoiseGrid":
        return NoiseGrid(self.lo, self.weights.copy(), self.mesh)

    def coarsen(self, factor: int = 2) -> "NoiseGrid":
        """Block sums: a noise grid at mesh * factor with the same white noise."""
        if any(s % factor for s in self.shape) or any(l % factor for l in self.lo):
            raise InvalidParameter("grid not aligned to the coarsening factor")
        w = self.weights
        for ax in range(self.d):
            sh = list(w.shape)
            sh[ax : ax + 1] = [sh[ax] // factor, factor]
            w = w.reshape(sh).sum(axis=ax + 1)
        return NoiseGrid(tuple(l // factor for l in self.lo), w, self.mesh * factor)


def region_cells(region, mesh: float) -> tuple[tuple[int, ...], tuple[int, ...]]:
    """Cell index range (lo, shape) of the cells whose centres lie in a box."""
    lo, hi = (np.asarray(x, dtype=float) for x in region)
    a = np.ceil(lo / mesh - 1e-9).astype(int)
    b = np.floor(hi / mesh + 1e-9).astype(int)
    if np.any(b < a):
        raise InvalidParameter("region contains no cell centre")
    return tuple(int(x) for x in a), tuple(int(x) for x in b - a + 1)


def white_noise_grid(region, mesh: float, rng: np.random.Generator, d: int | None = None) -> NoiseGrid:
    """``region`` is either a continuum box (lo, hi) or ('cells', lo, shape)."""
    if mesh <= 0:
        raise InvalidParameter("mesh must be positive")
    if isinstance(region, tuple) and len(region) == 3 and region[0] == "cells":
        lo, shape = tuple(region[1]), tuple(region[2])
    else:
        lo, shape = region_cells(region, mesh)
    w = rng.standard_normal(shape) * mesh ** (len(shape) / 2.0)
    return NoiseGrid(lo, w, mesh)


# -------------------------------------------------------------------- field
@dataclass
class FieldSample:
    lo: tuple[int, ...]
    values: np.ndarray
    mesh: float

    @property
    def shape(self) -> tuple[int, ...]:
        return self.values.shape

    def index_range(self) -> tuple[np.ndarray, np.ndarray]:
        lo = np.array(self.lo)
        return lo, lo + np.array(self.shape) - 1

    def at(self, pixel: Sequence[int]) -> float:
        return float(self.values[tuple(int(p) - l for p, l in zip(pixel, self.lo))])

    def window(self, lo: Sequence[int], hi: Sequence[int]) -> np.ndarray:
        """Values on the inclusive pixel range [lo, hi]."""
        a, b = self.index_range()
        if np.any(np.array(lo) < a) or np.any(np.array(hi) > b):
            raise InvalidQuery("window outside the sample")
        sl = tuple(slice(l - o, h - o + 1) for l, h, o in zip(lo, hi, self.lo))
        return self.values[sl]


def _check_mesh(kernel: Kernel, noise: NoiseGrid):
    if not math.isclose(kernel.mesh, noise.mesh, rel_tol=1e-12):
        raise InvalidParameter("kernel and noise meshes differ")
    if kernel.d != noise.d:
        raise InvalidParameter("kernel and noise dimensions differ")
    if any(s <= 2 * kernel.h for s in noise.shape):
        raise InvalidParameter("noise grid smaller than the kernel")


def moving_average_sample(kernel: Kernel, noise: NoiseGrid, method: str = "auto") -> FieldSample:
    """f(x) = sum_c q(x - y_c) W_c on every pixel whose kernel window fits.

    ``method``: "direct" (nested sums), "fft", or "auto" (fft for large kernels).
    """
    _check_mesh(kernel, noise)
    if method == "auto":
        method = "fft" if kernel.values.size > 81 else "direct"
    if method == "direct":
        vals = signal.convolve(noise.weights, kernel.values, mode="valid", method="direct")
    elif method == "fft":
        vals = signal.fftconvolve(noise.weights, kernel.values, mode="valid")
    else:
        raise InvalidParameter(f"unknown method {method!r}")
    return FieldSample(tuple(l + kernel.h for l in noise.lo), vals, noise.mesh)


class FFTSampler:
    """Repeated moving averages for a fixed noise shape (kernel FFT cached)."""

    def __init__(self, kernel: Kernel, noise_shape: Sequence[int]):
        self.kernel = kernel
        self.noise_shape = tuple(noise_shape)
        self.fshape = tuple(sfft.next_fast_len(n + 2 * kernel.h, real=True) for n in self.noise_shape)
        self._kf = sfft.rfftn(kernel.values, self.fshape)
        h = kernel.h
        self._sl = tuple(slice(2 * h, n) for n in self.noise_shape)

    def __call__(self, noise: NoiseGrid) -> FieldSample:
        if noise.shape != self.noise_shape:
            raise InvalidParameter("noise shape differs from the sampler's")
        full = sfft.irfftn(sfft.rfftn(noise.weights, self.fshape) * self._kf, self.fshape)
        return FieldSample(tuple(l + self.kernel.h for l in noise.lo), full[self._sl], noise.mesh)


# --------------------------------------------------------------- partitions
@dataclass(frozen=True)
class BoxPartition:
    """Translates of [0, s)^d by s Z^d; cells belong to the box holding their centre."""

    scale: float
    mesh: float

    @property
    def m(self) -> int:
        return _steps(self.scale, self.mesh, "box scale")

    def box_of_cells(self, cells: np.ndarray) -> np.ndarray:
        return np.floor_divide(cells, self.m)

    def boxes(self, noise: NoiseGrid) -> list[tuple[int, ...]]:
        """Boxes meeting the noise grid, lexicographic order."""
        lo = np.array(noise.lo)
        hi = lo + np.array(noise.shape) - 1
        a, b = np.floor_divide(lo, self.m), np.floor_divide(hi, self.m)
        rng = [range(int(x), int(y) + 1) for x, y in zip(a, b)]
        return [tuple(int(x) for x in t) for t in np.array(np.meshgrid(*rng, indexing="ij")).reshape(len(rng), -1).T]

    def cell_slices(self, noise: NoiseGrid, box: Sequence[int]) -> tuple[slice, ...]:
        out = []
        for b, l, n in zip(box, noise.lo, noise.shape):
            a0 = max(b * self.m - l, 0)
            a1 = min((b + 1) * self.m - l, n)
            out.append(slice(a0, max(a0, a1)))
        return tuple(out)


def box_component(noise: NoiseGrid, box: Sequence[int], kernel: Kernel,
                  partition: BoxPartition, method: str = "direct") -> FieldSample:
    """f_S = q * W|_S over the same pixels as :func:`moving_average_sample`."""
    masked = NoiseGrid(noise.lo, np.zeros_like(noise.weights), noise.mesh)
    sl = partition.cell_slices(noise, box)
    masked.weights[sl] = noise.weights[sl]
    return moving_average_sample(kernel, masked, method)


def resample_boxes(noise: NoiseGrid, boxes: Iterable[Sequence[int]], rng: np.random.Generator,
                   partition: BoxPartition) -> NoiseGrid:
    """Fresh weights in the listed boxes (in the given order); others untouched."""
    out = noise.copy()
    sd = noise.mesh ** (noise.d / 2.0)
    for b in boxes:
        sl = partition.cell_slices(noise, b)
        shape = tuple(s.stop - s.start for s in sl)
        out.weights[sl] = rng.standard_normal(shape) * sd
    return out


def orthogonal_decomposition_check(kernel: Kernel, partition: BoxPartition,
                                   n: int, stride: int = 1) -> dict:
    """Covariance error of f_S^n = sum_{i<=n} Z_i (q * phi_i) against f_S.

    phi_i runs through the orthonormal cosine basis of L^2(S) (piecewise
    constant on cells), constant function first, then by total frequency.
    Points are the pixels within distance r of S (every ``stride``-th one);
    the error is the max over all point pairs, which for the PSD remainder
    equals its largest diagonal entry, so it is non-increasing in n.
    """
    # by stationarity the answer does not depend on which box S is used
    m, d, h, eps = partition.m, kernel.d, kernel.h, kernel.mesh
    n_cells = m ** d
    if n < 1 or n > n_cells:
        raise InvalidParameter(f"basis size must be in [1, {n_cells}]")
    # noise cells of S occupy [h, h + m)^d in a grid of side m + 2h; pixels cover the
    # same index range, so the influence region of S is the whole pixel grid
    side = m + 4 * h
    # columns of A: responses at pixels to unit weight on each cell of S
    pix = np.arange(h, side - h, stride)
    pix_grid = np.array(np.meshgrid(*([pix] * d), indexing="ij")).reshape(d, -1).T
    cells = np.array(np.meshgrid(*([np.arange(m)] * d), indexing="ij")).reshape(d, -1).T + 2 * h
    diff = pix_grid[:, None, :] - cells[None, :, :]
    ok = np.all(np.abs(diff) <= h, axis=-1)
    A = np.zeros((pix_grid.shape[0], n_cells))
    A[ok] = kernel.values[tuple((diff[ok] + h).T)]
    # f_S = A W with Var W_c = eps^d
    cov_full = (A * eps ** d) @ A.T
    # cosine basis, orthonormal in L^2(S): entries scaled by eps^(-d/2)
    C = sfft.idct(np.eye(m), type=2, norm="ortho", axis=0)  # columns: basis vectors over cells
    freqs = np.array(np.meshgrid(*([np.arange(m)] * d), indexing="ij")).reshape(d, -1).T
    order = sorted(range(len(freqs)), key=lambda j: (int(freqs[j].sum()), tuple(freqs[j])))
    freqs = freqs[order][:n]
    B = np.ones((n_cells, n))
    cell_local = cells - 2 * h
    for j, fr in enumerate(freqs):
        col = np.ones(n_cells)
        for a in range(d):
            col *= C[cell_local[:, a], fr[a]]
        B[:, j] = col * eps ** (-d / 2.0)
    # q * phi_i evaluated at pixels: sum_c q(x - y_c) phi_i(c) eps^d
    G = (A @ B) * eps ** d
    cov_n = G @ G.T
    err = float(np.max(np.abs(cov_full - cov_n)))
    vol = n_cells * eps ** d
    const_component = (A @ np.ones(n_cells)) * eps ** d / math.sqrt(vol)
    return {"error": err, "n": n, "n_cells": n_cells, "first_column": G[:, 0],
            "constant_component": const_component}


# ------------------------------------------------------------ excursion sets
@dataclass
class CellMask:
    lo: tuple[int, ...]
    bits: np.ndarray
    mesh: float

    def window(self, lo, hi) -> np.ndarray:
        a = np.array(self.lo)
        b = a + np.array(self.bits.shape) - 1
        if np.any(np.array(lo) < a) or np.any(np.array(hi) > b):
            raise InvalidQuery("event geometry outside the mask")
        sl = tuple(slice(l - o, h - o + 1) for l, h, o in zip(lo, hi, self.lo))
        return self.bits[sl]


def excursion_set(fs: FieldSample, ell: float = 0.0) -> CellMask:
    return CellMask(fs.lo, fs.values + ell >= 0, fs.mesh)


def _touching(labels: np.ndarray, a: np.ndarray, b: np.ndarray) -> bool:
    la = np.unique(labels[a])
    la = la[la > 0]
    if la.size == 0:
        return False
    lb = np.unique(labels[b])
    return bool(np.intersect1d(la, lb[lb > 0]).size)


def _connects(bits: np.ndarray, a: np.ndarray, b: np.ndarray, eight: bool = False) -> bool:
    labels, _ = ndimage.label(bits, structure=_S8 if eight else _S4)
    return _touching(labels, a, b)


def _box_pixels(mesh: float, R: float, k: float = 1.0) -> tuple[int, int]:
    n = _steps(R, mesh, "R")
    return n, int(math.ceil(k * n - 1e-9))


def lr_crossing(bits: np.ndarray) -> bool:
    """Set pixels, 4-adjacency, first axis = horizontal."""
    a = np.zeros(bits.shape, bool)
    b = np.zeros(bits.shape, bool)
    a[0, :], b[-1, :] = True, True
    return _connects(bits, a, b)


def tb_dual_crossing(bits: np.ndarray, eight: bool = True) -> bool:
    """Unset pixels (8-adjacency by default) joining bottom and top rows."""
    a = np.zeros(bits.shape, bool)
    b = np.zeros(bits.shape, bool)
    a[:, 0], b[:, -1] = True, True
    return _connects(~bits, a, b, eight)


def crossing_window(mask: CellMask, k: float, R: float) -> np.ndarray:
    if mask.bits.ndim != 2:
        raise InvalidQuery("crossing events are implemented for d = 2")
    n, K = _box_pixels(mask.mesh, R, k)
    return mask.window((-n, -K), (n, K))


def field_crossing_event(mask: CellMask, k: float, R: float) -> bool:
    """Left-right crossing of B_k(R) = [-R, R] x [-kR, kR] by set pixels."""
    return lr_crossing(crossing_window(mask, k, R))


def _arm_masks(shape, n_in: int, n_out: int):
    c = np.array(shape) // 2
    idx = np.indices(shape)
    sup = np.max(np.abs(idx - c.reshape(-1, *([1] * len(shape)))), axis=0)
    return sup <= n_in, sup == n_out


def _arm_window(mask: CellMask, r: float, R: float):
    n_out = _steps(R, mask.mesh, "R")
    n_in = int(math.floor(r / mask.mesh + 1e-9))
    if n_in > n_out:
        raise InvalidQuery("need r <= R")
    d = mask.bits.ndim
    w = mask.window((-n_out,) * d, (n_out,) * d)
    return w, n_in, n_out


def field_one_arm(mask: CellMask, r: float, R: float) -> bool:
    """Lambda_r joined to the boundary of Lambda_R by set pixels inside Lambda_R."""
    w, n_in, n_out = _arm_window(mask, r, R)
    a, b = _arm_masks(w.shape, n_in, n_out)
    if w.ndim != 2:
        labels, _ = ndimage.label(w)
        return _touching(labels, a, b)
    return _connects(w, a, b)


def field_two_arm(mask: CellMask, r: float, R: float) -> bool:
    """Both a set path and an unset path from Lambda_r to the boundary of Lambda_R."""
    w, n_in, n_out = _arm_window(mask, r, R)
    if w.ndim != 2:
        raise InvalidQuery("two-arm events are implemented for d = 2")
    a, b = _arm_masks(w.shape, n_in, n_out)
    return _connects(w, a, b) and _connects(~w, a, b, eight=True)


def arm_radii(window: np.ndarray, n_in: int) -> tuple[int, int]:
    """Largest sup-norm reached by the set (4-adj) and unset (8-adj) clusters of
    the central Lambda_{n_in} pixels inside the window; -1 if there is none."""
    a, _ = _arm_masks(window.shape, n_in, 0)
    c = np.array(window.shape) // 2
    idx = np.indices(window.shape)
    sup = np.max(np.abs(idx - c.reshape(-1, 1, 1)), axis=0)
    out = []
    for bits, st in ((window, _S4), (~window, _S8)):
        labels, _ = ndimage.label(bits, structure=st)
        la = np.unique(labels[a & bits])
        la = la[la > 0]
        if la.size == 0:
            out.append(-1)
            continue
        sel = np.isin(labels, la)
        out.append(int(sup[sel].max()))
    return out[0], out[1]
