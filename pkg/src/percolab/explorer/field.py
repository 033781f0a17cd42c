"""Noise-box exploration algorithms for excursion sets of f = q * W (d = 2).

Units are the boxes of side s (s at least the kernel's support radius) that
tile the plane; box b holds the noise cells whose centres lie in
[b s, (b + 1) s).  The field on the pixels of a box is known once the box and
its eight neighbours are revealed, and the kernels only ever read signs
there.  Every algorithm takes the excursion mask of its domain as the sample.
"""
from __future__ import annotations

import math

import numpy as np
from scipy import ndimage

from .. import _field_explore as fx
from ..gaussian import (BoxPartition, FFTSampler, Kernel, NoiseGrid, _steps, lr_crossing,
                        resample_boxes, tb_dual_crossing)
from ..lattice import UnsupportedDimension
from .base import AlgorithmSpec, InvalidGeometry

_S4 = ndimage.generate_binary_structure(2, 1)


class FieldBoxGeometry:
    """Pixel domain [pix_lo, pix_hi] (inclusive, pixel units), its boxes and noise."""

    def __init__(self, kernel: Kernel, s: float, pix_lo, pix_hi):
        if kernel.d != 2:
            raise UnsupportedDimension("box algorithms are implemented for d = 2")
        self.kernel = kernel
        self.mesh = kernel.mesh
        self.s = float(s)
        self.m = _steps(s, kernel.mesh, "box scale")
        if kernel.h > self.m:
            raise InvalidGeometry("kernel support exceeds the box scale")
        self.pix_lo = np.array(pix_lo, dtype=np.int64)
        self.pix_hi = np.array(pix_hi, dtype=np.int64)
        self.shape = tuple(int(x) for x in self.pix_hi - self.pix_lo + 1)
        b0 = np.floor_divide(self.pix_lo, self.m)
        b1 = np.floor_divide(self.pix_hi, self.m)
        # one margin box on each side, so every box holding a pixel has all its neighbours
        self.box_lo = b0 - 1
        self.nb = tuple(int(x) for x in b1 - b0 + 3)
        self.n_units = self.nb[0] * self.nb[1]
        self.noise_lo = tuple(int(x) for x in self.m * self.box_lo)
        self.noise_shape = tuple(self.m * n for n in self.nb)
        self.partition = BoxPartition(self.s, self.mesh)
        self.pb = []
        self.b_lo = []
        self.b_hi = []
        for ax in range(2):
            pix = self.pix_lo[ax] + np.arange(self.shape[ax])
            self.pb.append(np.floor_divide(pix, self.m) - self.box_lo[ax])
            starts = (self.box_lo[ax] + np.arange(self.nb[ax])) * self.m - self.pix_lo[ax]
            self.b_lo.append(np.clip(starts, 0, self.shape[ax]).astype(np.int64))
            self.b_hi.append(np.clip(starts + self.m, 0, self.shape[ax]).astype(np.int64))
        self._sampler = None
        # offset of the domain inside the sampler output
        self._off = tuple(int(self.pix_lo[a] - (self.noise_lo[a] + kernel.h)) for a in range(2))

    # ---------------------------------------------------------------- units
    def unit(self, bx: int, by: int) -> int:
        """Unit id of the box with global index (bx, by)."""
        return int((bx - self.box_lo[0]) * self.nb[1] + (by - self.box_lo[1]))

    def unit_box(self, u: int) -> tuple[int, int]:
        return (int(u // self.nb[1] + self.box_lo[0]), int(u % self.nb[1] + self.box_lo[1]))

    def units_near(self, pixels: np.ndarray) -> np.ndarray:
        """Boxes holding any of the (local) pixels in the mask, plus their neighbours."""
        ii, jj = np.nonzero(pixels)
        hit = np.zeros(self.nb, dtype=bool)
        hit[self.pb[0][ii], self.pb[1][jj]] = True
        hit = ndimage.binary_dilation(hit, structure=np.ones((3, 3), bool))
        return np.flatnonzero(hit.reshape(-1)).astype(np.int64)

    def box_distance(self, u: int, rect) -> float:
        """Euclidean distance between the closed box of unit u and rect=(x0, x1, y0, y1)."""
        bx, by = self.unit_box(u)
        lo = np.array([bx, by]) * self.s
        hi = lo + self.s
        r_lo = np.array([rect[0], rect[2]])
        r_hi = np.array([rect[1], rect[3]])
        gap = np.maximum(0.0, np.maximum(r_lo - hi, lo - r_hi))
        return float(np.hypot(*gap))

    def pixel_interior(self, interior: np.ndarray) -> np.ndarray:
        return interior.reshape(self.nb)[self.pb[0][:, None], self.pb[1][None, :]]

    def local_coords(self) -> tuple[np.ndarray, np.ndarray]:
        """Pixel index grids (global pixel units) of the domain."""
        x = self.pix_lo[0] + np.arange(self.shape[0])
        y = self.pix_lo[1] + np.arange(self.shape[1])
        return np.meshgrid(x, y, indexing="ij")

    # ---------------------------------------------------------------- noise
    def noise(self, rng: np.random.Generator) -> NoiseGrid:
        w = rng.standard_normal(self.noise_shape) * self.mesh
        return NoiseGrid(self.noise_lo, w, self.mesh)

    def field(self, noise: NoiseGrid) -> np.ndarray:
        if self._sampler is None:
            self._sampler = FFTSampler(self.kernel, self.noise_shape)
        full = self._sampler(noise).values
        a, b = self._off
        return full[a : a + self.shape[0], b : b + self.shape[1]]

    def mask(self, noise: NoiseGrid, ell: float = 0.0) -> np.ndarray:
        return np.ascontiguousarray(self.field(noise) + ell >= 0)

    def resample(self, noise: NoiseGrid, units, rng: np.random.Generator) -> NoiseGrid:
        return resample_boxes(noise, [self.unit_box(int(u)) for u in units], rng, self.partition)

    def __getstate__(self):
        st = self.__dict__.copy()
        st["_sampler"] = None
        return st


def _spans(reached: np.ndarray, a: np.ndarray, b: np.ndarray) -> bool:
    labels, n = ndimage.label(reached, structure=_S4)
    if n == 0:
        return False
    la = np.unique(labels[a & reached])
    lb = np.unique(labels[b & reached])
    return bool(np.intersect1d(la[la > 0], lb[lb > 0]).size)


class FieldAlgorithm(AlgorithmSpec):
    unit_kind = "box"

    def __init__(self, kernel: Kernel, s, pix_lo, pix_hi):
        s = kernel.support_radius if s is None else s
        self.geom = FieldBoxGeometry(kernel, s, pix_lo, pix_hi)
        self.n_units = self.geom.n_units
        self.r = kernel.support_radius
        self.s = self.geom.s

    def state_summary(self, sample, unit):
        g = self.geom
        bx, by = unit // g.nb[1], unit % g.nb[1]
        sl = (slice(g.b_lo[0][bx], g.b_hi[0][bx]), slice(g.b_lo[1][by], g.b_hi[1][by]))
        return int(np.count_nonzero(np.asarray(sample)[sl]))

    def _grow(self, sample, seed_pixels):
        g = self.geom
        bits = np.ascontiguousarray(sample, dtype=bool)
        revealed = np.zeros(g.n_units, dtype=bool)
        order = np.empty(g.n_units, dtype=np.int64)
        n, reached, interior = fx.grow_primal(
            bits, g.pb[0], g.pb[1], g.nb[0], g.nb[1], g.b_lo[0], g.b_hi[0], g.b_lo[1], g.b_hi[1],
            seed_pixels, g.units_near(seed_pixels), revealed, order, 0)
        return order[:n].copy(), reached, interior


def _pixels(length: float, mesh: float) -> int:
    return _steps(length, mesh, "length")


class _CrossingBox(FieldAlgorithm):
    """Shared geometry for algorithms determining Cross_k(R)."""

    def __init__(self, kernel: Kernel, k: float, R: float, s=None):
        s = kernel.support_radius if s is None else s
        if R < 4 * s:
            raise InvalidGeometry("need R >= 4 s")
        eps = kernel.mesh
        self.k, self.R = k, R
        self.n = _pixels(R, eps)
        self.K = int(math.ceil(k * self.n - 1e-9))
        super().__init__(kernel, s, (-self.n, -self.K), (self.n, self.K))
        nx, ny = self.geom.shape
        self._left = np.zeros((nx, ny), bool)
        self._left[0, :] = True
        self._right = np.zeros((nx, ny), bool)
        self._right[-1, :] = True

    def direct(self, sample) -> bool:
        return lr_crossing(np.asarray(sample, dtype=bool))

    def quarter_rect(self):
        """B^dagger = [0, R] x [0, kR] in length units."""
        return (0.0, self.R, 0.0, self.K * self.geom.mesh)

    def half_rect(self):
        """B^+ = [0, R] x [-kR, kR]."""
        kr = self.K * self.geom.mesh
        return (0.0, self.R, -kr, kr)


class GaussianLine(_CrossingBox):
    """Grows the set clusters of a vertical line through B_k(R).

    ``variant="random"`` draws the line {i s} x [-kR, kR] with i uniform in
    [-R/s, 0]; ``variant="left"`` uses the left side.
    """

    growth = "primal cluster"

    def __init__(self, kernel: Kernel, k: float = 1.0, R: float = 24.0, s=None, variant: str = "random"):
        super().__init__(kernel, k, R, s)
        if variant not in ("random", "left"):
            raise ValueError("variant is 'random' or 'left'")
        self.variant = variant
        self.name = f"gaussian-{variant}-line"
        self.seeding = "random-line" if variant == "random" else "hyperplane"
        self._imax = int(math.floor(R / self.s + 1e-9))

    def aux_distribution(self):
        if self.variant == "left":
            return [(None, 1.0)]
        vals = list(range(-self._imax, 1))
        return [(i, 1.0 / len(vals)) for i in vals]

    def run(self, sample, aux=None):
        col = 0 if self.variant == "left" else int(aux) * self.geom.m + self.n
        seed = np.zeros(self.geom.shape, bool)
        seed[col, :] = True
        order, reached, _ = self._grow(sample, seed)
        return order, _spans(reached, self._left, self._right), {"line": col - self.n}


class GaussianLevelLine(_CrossingBox):
    """Follows the level lines that start on the bottom or left side of B_k(R)."""

    name = "gaussian-level-line"
    seeding = "boundary-lines"
    growth = "level-line"

    def run(self, sample, aux=None):
        g = self.geom
        bits = np.ascontiguousarray(sample, dtype=bool)
        seed = self._left.copy()
        seed[:, 0] = True
        revealed = np.zeros(g.n_units, dtype=bool)
        order = np.empty(g.n_units, dtype=np.int64)
        n, hcut, vcut, interior = fx.trace_level_lines(
            bits, g.pb[0], g.pb[1], g.nb[0], g.nb[1], g.b_lo[0], g.b_hi[0], g.b_lo[1], g.b_hi[1],
            g.units_near(seed), revealed, order, 0)
        order = order[:n].copy()
        det = g.pixel_interior(interior)
        if lr_crossing(bits & det):
            return order, True, {"readout": "primal"}
        if tb_dual_crossing(bits | ~det):
            return order, False, {"readout": "dual"}
        out, rule = self._region_loop(bits, hcut, vcut)
        return order, out, {"readout": "regions", "region_rule": rule}

    @staticmethod
    def _region_loop(bits, hcut, vcut):
        """The region/sign loop over the partition cut out by the traced lines.

        A starts as the region holding the top-left pixel, C as its sign; while
        A does not meet both the left and right sides, C flips and A absorbs
        the regions adjacent to it.  Also returns the direct face rule (some
        region with set left-side pixels reaches the right side) as a check.
        """
        lab, n_reg = fx.crack_regions(hcut, vcut)
        nx, ny = bits.shape
        left = np.zeros(n_reg, bool)
        right = np.zeros(n_reg, bool)
        left[lab[0, :]] = True
        right[lab[-1, :]] = True
        pairs = []
        a, j = np.nonzero(vcut[1:nx, :])
        pairs.append(np.stack([lab[a, j], lab[a + 1, j]], 1))
        i, b = np.nonzero(hcut[:, 1:ny])
        pairs.append(np.stack([lab[i, b], lab[i, b + 1]], 1))
        pairs = np.concatenate(pairs)
        adj = [set() for _ in range(n_reg)]
        for x, y in pairs:
            if x != y:
                adj[x].add(int(y))
                adj[y].add(int(x))
        plus_left = np.zeros(n_reg, bool)
        plus_left[lab[0, :][bits[0, :]]] = True
        rule = bool(np.any(plus_left & right))
        A = {int(lab[0, ny - 1])}
        C = bool(bits[0, ny - 1])
        while True:
            idx = np.fromiter(A, dtype=np.int64)
            if left[idx].any() and right[idx].any():
                return C, rule
            new = set().union(*(adj[x] for x in A)) - A
            if not new:  # pragma: no cover - A is then every region
                return C, rule
            C = not C
            A |= new


class GaussianOneArm(FieldAlgorithm):
    """Determines {Lambda_1 <-> boundary of Lambda_R} by growing the clusters of Lambda_1."""

    name = "gaussian-one-arm"
    seeding = "origin"
    growth = "primal cluster"

    def __init__(self, kernel: Kernel, R: float, s=None):
        s = kernel.support_radius if s is None else s
        if R < s:
            raise InvalidGeometry("need R >= s")
        self.R = R
        self.n = _pixels(R, kernel.mesh)
        super().__init__(kernel, s, (-self.n, -self.n), (self.n, self.n))
        X, Y = self.geom.local_coords()
        self._sup = np.maximum(np.abs(X), np.abs(Y))
        self._seed = self._sup <= int(math.floor(1.0 / kernel.mesh + 1e-9))
        self._ring = self._sup == self.n

    def direct(self, sample) -> bool:
        return _spans(np.asarray(sample, dtype=bool), self._seed, self._ring)

    def run(self, sample, aux=None):
        order, reached, _ = self._grow(sample, self._seed)
        return order, bool(np.any(reached & self._ring)), {}


class AnnulusSeed(FieldAlgorithm):
    """Determines A_1(2s, R) from the clusters of the boundary of Lambda_{i s}, i uniform in [2, R/s]."""

    name = "gaussian-annulus"
    seeding = "random-annulus"
    growth = "primal cluster"

    def __init__(self, kernel: Kernel, R: float, s=None):
        s = kernel.support_radius if s is None else s
        if R < 2 * s:
            raise InvalidGeometry("need R >= 2 s")
        self.R = R
        self.n = _pixels(R, kernel.mesh)
        super().__init__(kernel, s, (-self.n, -self.n), (self.n, self.n))
        X, Y = self.geom.local_coords()
        self._sup = np.maximum(np.abs(X), np.abs(Y))
        self._inner = self._sup <= 2 * self.geom.m
        self._ring = self._sup == self.n
        self._imax = int(math.floor(R / self.s + 1e-9))

    def aux_distribution(self):
        vals = list(range(2, self._imax + 1))
        return [(i, 1.0 / len(vals)) for i in vals]

    def direct(self, sample) -> bool:
        return _spans(np.asarray(sample, dtype=bool), self._inner, self._ring)

    def run(self, sample, aux=None):
        i = int(aux)
        seed = self._sup == min(i * self.geom.m, self.n)
        order, reached, _ = self._grow(sample, seed)
        return order, _spans(reached, self._inner, self._ring), {"annulus": i}


def alg_gaussian_line(kernel: Kernel, k: float = 1.0, R: float = 24.0, s=None) -> GaussianLine:
    return GaussianLine(kernel, k, R, s, "random")


def alg_gaussian_left_line(kernel: Kernel, k: float = 1.0, R: float = 24.0, s=None) -> GaussianLine:
    return GaussianLine(kernel, k, R, s, "left")


def alg_gaussian_levelline(kernel: Kernel, k: float = 1.0, R: float = 24.0, s=None) -> GaussianLevelLine:
    return GaussianLevelLine(kernel, k, R, s)


def alg_gaussian_one_arm(kernel: Kernel, R: float, s=None) -> GaussianOneArm:
    return GaussianOneArm(kernel, R, s)


def alg_annulus_seed(kernel: Kernel, R: float, s=None) -> AnnulusSeed:
    return AnnulusSeed(kernel, R, s)
