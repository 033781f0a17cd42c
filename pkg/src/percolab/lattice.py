"""Bond percolation on finite boxes of Z^d.

Vertices of a box are indexed lexicographically (C order over coordinates,
lower corner first).  Edges are indexed lexicographically over
(base vertex, axis), where the edge with base ``v`` and axis ``a`` joins ``v``
and ``v + e_a``.  Both orders are frozen: CSV output and traces rely on them.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

from . import _graph
from .rng import ReplicaStream


class InvalidQuery(ValueError):
    """Raised for queries that do not fit the box or are ill-posed."""


class UnsupportedDimension(ValueError):
    pass


def _half_side(k, R: int) -> int:
    # conservative: round kR up
    return int(math.ceil(Fraction(k) * R))


@dataclass(frozen=True)
class LatticeBox:
    """Axis-aligned vertex box ``prod_i [lo_i, hi_i]`` in Z^d.

    Use :meth:`cube` for Lambda_R, :meth:`crossing_box` for B_k(R) and
    :meth:`rectangle` for plain vertex rectangles.
    """

    lo: tuple[int, ...]
    hi: tuple[int, ...]

    def __post_init__(self):
        if len(self.lo) != len(self.hi) or len(self.lo) < 1:
            raise InvalidQuery("lo/hi dimension mismatch")
        if any(h < l for l, h in zip(self.lo, self.hi)):
            raise InvalidQuery("empty box")

    @classmethod
    def cube(cls, d: int, R: int) -> "LatticeBox":
        if d < 2 or R < 0:
            raise InvalidQuery("need d >= 2 and R >= 0")
        return cls((-R,) * d, (R,) * d)

    @classmethod
    def crossing_box(cls, d: int, R: int, k=1) -> "LatticeBox":
        """B_k(R) = [-R, R] x [-kR, kR]^(d-1), with kR rounded up."""
        if d < 2 or R < 0 or Fraction(k) < 1:
            raise InvalidQuery("need d >= 2, R >= 0, k >= 1")
        K = _half_side(k, R)
        return cls((-R,) + (-K,) * (d - 1), (R,) + (K,) * (d - 1))

    @classmethod
    def rectangle(cls, columns: int, rows: int, corner=(0, 0)) -> "LatticeBox":
        """Planar box with the given number of vertex columns and rows."""
        if columns < 1 or rows < 1:
            raise InvalidQuery("rectangle needs at least one column and row")
        x0, y0 = corner
        return cls((x0, y0), (x0 + columns - 1, y0 + rows - 1))

    # ------------------------------------------------------------ geometry
    @property
    def d(self) -> int:
        return len(self.lo)

    @cached_property
    def shape(self) -> tuple[int, ...]:
        return tuple(h - l + 1 for l, h in zip(self.lo, self.hi))

    @property
    def n_vertices(self) -> int:
        return int(np.prod(self.shape))

    @cached_property
    def coords(self) -> np.ndarray:
        """(n_vertices, d) integer coordinates in index order."""
        grids = np.indices(self.shape).reshape(self.d, -1).T
        return grids + np.asarray(self.lo)

    @cached_property
    def _edge_tables(self):
        shape, d = self.shape, self.d
        valid = np.zeros(shape + (d,), dtype=bool)
        for a in range(d):
            sl = [slice(None)] * d
            sl[a] = slice(0, shape[a] - 1)
            valid[tuple(sl) + (a,)] = True
        flat = valid.reshape(-1, d)
        base, axis = np.nonzero(flat)  # row-major: lexicographic in (vertex, axis)
        strides = np.array([int(np.prod(shape[a + 1:])) for a in range(d)], dtype=np.int64)
        other = base + strides[axis]
        index_grid = -np.ones(flat.shape, dtype=np.int64)
        index_grid[base, axis] = np.arange(base.size)
        return base.astype(np.int64), other.astype(np.int64), axis.astype(np.int64), index_grid

    @property
    def n_edges(self) -> int:
        return int(self._edge_tables[0].size)

    @property
    def edge_u(self) -> np.ndarray:
        return self._edge_tables[0]

    @property
    def edge_v(self) -> np.ndarray:
        return self._edge_tables[1]

    @property
    def edge_axis(self) -> np.ndarray:
        return self._edge_tables[2]

    @cached_property
    def edge_base(self) -> np.ndarray:
        return self.coords[self.edge_u]

    @cached_property
    def csr(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return _csr(self.n_vertices, self.edge_u, self.edge_v)

    def contains(self, other: "LatticeBox") -> bool:
        return other.d == self.d and all(
            a <= b and c >= e for a, b, c, e in zip(self.lo, other.lo, self.hi, other.hi)
        )

    def vertex_index(self, coords) -> np.ndarray | int:
        c = np.asarray(coords, dtype=np.int64)
        rel = c - np.asarray(self.lo)
        if np.any(rel < 0) or np.any(rel >= np.asarray(self.shape)):
            raise InvalidQuery(f"vertex {coords} outside box")
        idx = np.ravel_multi_index(tuple(np.moveaxis(rel, -1, 0)), self.shape)
        return int(idx) if np.ndim(idx) == 0 else idx.astype(np.int64)

    def edge_index(self, base, axis: int) -> int:
        v = self.vertex_index(base)
        e = int(self._edge_tables[3][v, axis])
        if e < 0:
            raise InvalidQuery("edge leaves the box")
        return e

    def edge_between(self, a, b) -> int:
        a, b = np.asarray(a), np.asarray(b)
        diff = b - a
        if np.abs(diff).sum() != 1:
            raise InvalidQuery("vertices are not neighbours")
        axis = int(np.flatnonzero(diff)[0])
        return self.edge_index(a if diff[axis] > 0 else b, axis)

    def face(self, axis: int, side: int) -> np.ndarray:
        """Vertex indices with coordinate ``axis`` at its low (-1) or high (+1) end."""
        val = self.lo[axis] if side < 0 else self.hi[axis]
        return np.flatnonzero(self.coords[:, axis] == val)

    def sup_norm(self) -> np.ndarray:
        return np.abs(self.coords).max(axis=1)

    def sub_box_edges(self, sub: "LatticeBox") -> np.ndarray:
        """Indices of edges with both endpoints inside ``sub``."""
        if not self.contains(sub):
            raise InvalidQuery("sub-box not contained in box")
        c = self.coords
        inside = np.all((c >= np.asarray(sub.lo)) & (c <= np.asarray(sub.hi)), axis=1)
        return np.flatnonzero(inside[self.edge_u] & inside[self.edge_v])

    def sub_box_vertices(self, sub: "LatticeBox") -> np.ndarray:
        c = self.coords
        return np.flatnonzero(np.all((c >= np.asarray(sub.lo)) & (c <= np.asarray(sub.hi)), axis=1))


def _csr(n: int, eu: np.ndarray, ev: np.ndarray):
    ends = np.concatenate([eu, ev])
    nbrs = np.concatenate([ev, eu])
    ids = np.concatenate([np.arange(eu.size), np.arange(eu.size)])
    order = np.lexsort((ids, ends))
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.add.at(indptr, ends + 1, 1)
    return np.cumsum(indptr), nbrs[order].astype(np.int64), ids[order].astype(np.int64)


# ---------------------------------------------------------------- configurations
@dataclass(frozen=True, eq=False)
class BondConfig:
    """Open/closed state of every edge of ``box``; read-only."""

    box: LatticeBox
    open: np.ndarray

    def __post_init__(self):
        arr = np.array(self.open, dtype=bool, copy=True)
        if arr.shape != (self.box.n_edges,):
            raise InvalidQuery("one state per edge required")
        arr.setflags(write=False)
        object.__setattr__(self, "open", arr)

    @property
    def n_open(self) -> int:
        return int(self.open.sum())

    def with_states(self, edges, states) -> "BondConfig":
        arr = self.open.copy()
        arr[np.asarray(edges)] = states
        return BondConfig(self.box, arr)


def bond_uniforms(box: LatticeBox, rng: ReplicaStream) -> np.ndarray:
    """The shared uniforms U_e of the monotone coupling."""
    return rng.edge_uniforms(box.edge_base, box.edge_axis)


def sample_bond_config(box: LatticeBox, p: float, rng: ReplicaStream) -> BondConfig:
    """Each edge open independently with probability ``p`` (open iff U_e < p)."""
    if not 0.0 <= p <= 1.0:
        raise ValueError("p must lie in [0, 1]")
    return BondConfig(box, bond_uniforms(box, rng) < p)


# ---------------------------------------------------------------- connectivity
def _as_vertices(box: LatticeBox, vs) -> np.ndarray:
    arr = np.asarray(list(vs) if not isinstance(vs, np.ndarray) else vs)
    if arr.size == 0:
        raise InvalidQuery("empty vertex set")
    if arr.ndim == 2:
        arr = np.asarray(box.vertex_index(arr))
    arr = np.unique(arr.astype(np.int64).ravel())
    if arr.min() < 0 or arr.max() >= box.n_vertices:
        raise InvalidQuery("vertex index outside box")
    return arr


def _usable(cfg: BondConfig, domain) -> np.ndarray:
    if domain is None:
        return cfg.open
    mask = np.zeros(cfg.box.n_edges, dtype=bool)
    dom = np.asarray(domain)
    if dom.dtype == bool:
        mask[:] = dom
    else:
        mask[dom.astype(np.int64)] = True
    return cfg.open & mask


def cluster_of(cfg: BondConfig, source, domain=None) -> np.ndarray:
    """Sorted vertex indices reachable from ``source`` through open edges of ``domain``."""
    box = cfg.box
    src = _as_vertices(box, source)
    indptr, nbr, eid = box.csr
    seen = _graph.reach(indptr, nbr, eid, _usable(cfg, domain), src, box.n_vertices)
    return np.flatnonzero(seen)


def connected(cfg: BondConfig, source, target, domain=None) -> bool:
    """Open path inside ``domain`` (edge indices or mask) from source to target.

    The empty path counts, so overlapping sets are always connected.
    """
    box = cfg.box
    src = _as_vertices(box, source)
    tgt = _as_vertices(box, target)
    tmask = np.zeros(box.n_vertices, dtype=bool)
    tmask[tgt] = True
    indptr, nbr, eid = box.csr
    return bool(_graph.reaches_target(indptr, nbr, eid, _usable(cfg, domain), src, tmask))


def cluster_labels(cfg: BondConfig, domain=None) -> np.ndarray:
    """Union-find root label of every vertex (batch connectivity)."""
    box = cfg.box
    return _graph.uf_labels(box.n_vertices, box.edge_u, box.edge_v, _usable(cfg, domain))


# ---------------------------------------------------------------- events
@dataclass(frozen=True, eq=False)
class Arm:
    """One connection requirement on a graph whose bonds are box edges.

    ``primal`` arms use open bonds, dual arms use closed ones.
    """

    n_vertices: int
    eu: np.ndarray
    ev: np.ndarray
    eid: np.ndarray
    sources: np.ndarray
    targets: np.ndarray
    primal: bool = True

    @cached_property
    def csr(self):
        indptr, nbr, local = _csr(self.n_vertices, self.eu, self.ev)
        return indptr, nbr, self.eid[local]

    @cached_property
    def target_mask(self) -> np.ndarray:
        m = np.zeros(self.n_vertices, dtype=bool)
        m[self.targets] = True
        return m

    @cached_property
    def source_mask(self) -> np.ndarray:
        m = np.zeros(self.n_vertices, dtype=bool)
        m[self.sources] = True
        return m

    def holds(self, states: np.ndarray) -> bool:
        usable = states if self.primal else ~states
        indptr, nbr, eid = self.csr
        return bool(_graph.reaches_target(indptr, nbr, eid, usable, self.sources, self.target_mask))

    def holds_batch(self, states: np.ndarray) -> np.ndarray:
        return _graph.connected_batch(
            self.n_vertices, self.eu, self.ev, self.eid, states, self.primal,
            self.source_mask, self.target_mask,
        )


class Event:
    """A boolean function of the edge states of a box.

    ``monotone`` is +1 for increasing events, -1 for decreasing, 0 otherwise.
    """

    n_edges: int
    support: np.ndarray
    monotone: int = 0
    name: str = "event"

    def __call__(self, cfg) -> bool:
        states = cfg.open if isinstance(cfg, BondConfig) else np.asarray(cfg, dtype=bool)
        return bool(self.evaluate_batch(states[None, :])[0])

    def evaluate_batch(self, states: np.ndarray) -> np.ndarray:  # pragma: no cover
        raise NotImplementedError


class ConnectionEvent(Event):
    """Conjunction of arms (all must hold)."""

    def __init__(self, n_edges: int, arms: Sequence[Arm], name: str = "connection"):
        self.n_edges = n_edges
        self.arms = tuple(arms)
        self.name = name
        self.support = np.unique(np.concatenate([a.eid for a in self.arms])) if arms else np.zeros(0, int)
        kinds = {a.primal for a in self.arms}
        self.monotone = 1 if kinds == {True} else (-1 if kinds == {False} else 0)

    def __call__(self, cfg) -> bool:
        states = cfg.open if isinstance(cfg, BondConfig) else np.asarray(cfg, dtype=bool)
        return all(a.holds(states) for a in self.arms)

    def evaluate_batch(self, states: np.ndarray) -> np.ndarray:
        states = np.ascontiguousarray(states, dtype=bool)
        out = np.ones(states.shape[0], dtype=bool)
        for a in self.arms:
            out &= a.holds_batch(states)
        return out

    def pivotal(self, states: np.ndarray) -> np.ndarray:
        """Mask of pivotal edges; single primal arm only."""
        if len(self.arms) != 1 or not self.arms[0].primal:
            raise ValueError("pivotal counting needs a single increasing arm")
        a = self.arms[0]
        indptr, nbr, eid = a.csr
        _, piv = _graph.pivotal_mask(
            indptr, nbr, eid, self.n_edges, np.ascontiguousarray(states, dtype=bool),
            a.sources, a.targets, a.n_vertices,
        )
        return piv


class EdgeFunctionEvent(Event):
    """Event given by a vectorised function of the edge states."""

    def __init__(self, n_edges, fn, support, monotone=0, name="custom"):
        self.n_edges = n_edges
        self.fn = fn
        self.support = np.asarray(sorted(support), dtype=np.int64)
        self.monotone = monotone
        self.name = name

    def evaluate_batch(self, states):
        return np.asarray(self.fn(np.asarray(states, dtype=bool)), dtype=bool)


def dictator(n_edges: int, e: int) -> EdgeFunctionEvent:
    return EdgeFunctionEvent(n_edges, lambda s: s[:, e], [e], 1, f"edge{e}")


def all_open(n_edges: int, edges: Iterable[int]) -> EdgeFunctionEvent:
    edges = list(edges)
    return EdgeFunctionEvent(n_edges, lambda s: s[:, edges].all(axis=1), edges, 1, "and")


def constant(n_edges: int, value: bool) -> EdgeFunctionEvent:
    return EdgeFunctionEvent(
        n_edges, lambda s: np.full(s.shape[0], value, dtype=bool), [], 1, str(value).lower()
    )


def _primal_arm(box: LatticeBox, domain_edges, sources, targets) -> Arm:
    dom = np.asarray(domain_edges, dtype=np.int64)
    return Arm(box.n_vertices, box.edge_u[dom], box.edge_v[dom], dom,
               np.asarray(sources, dtype=np.int64), np.asarray(targets, dtype=np.int64), True)


def _require_cube(box: LatticeBox, R: int) -> LatticeBox:
    cube = LatticeBox.cube(box.d, R)
    if R < 0 or not box.contains(cube):
        raise InvalidQuery(f"Lambda_{R} is not inside the configuration's box")
    return cube


def one_arm(box: LatticeBox, R: int) -> ConnectionEvent:
    """A_1(R): 0 <-> boundary of Lambda_R (sup-norm exactly R)."""
    cube = _require_cube(box, R)
    verts = box.sub_box_vertices(cube)
    ring = verts[box.sup_norm()[verts] == R]
    origin = box.vertex_index((0,) * box.d)
    return ConnectionEvent(box.n_edges, [_primal_arm(box, box.sub_box_edges(cube), [origin], ring)],
                           f"A1({R})")


def crossing(box: LatticeBox, k, R: int) -> ConnectionEvent:
    """Cross_k(R): left face of B_k(R) <-> right face inside B_k(R)."""
    sub = LatticeBox.crossing_box(box.d, R, k)
    if not box.contains(sub):
        raise InvalidQuery("B_k(R) is not inside the configuration's box")
    verts = box.sub_box_vertices(sub)
    x = box.coords[verts, 0]
    return ConnectionEvent(
        box.n_edges,
        [_primal_arm(box, box.sub_box_edges(sub), verts[x == -R], verts[x == R])],
        f"Cross({k},{R})",
    )


def rect_crossing(box: LatticeBox, a: int, b: int) -> ConnectionEvent:
    """Left-right crossing of the a-column x b-row rectangle at the box's lower-left corner."""
    if box.d != 2:
        raise UnsupportedDimension("rectangle crossings are planar")
    sub = LatticeBox.rectangle(a, b, corner=box.lo)
    if not box.contains(sub):
        raise InvalidQuery("rectangle does not fit the box")
    verts = box.sub_box_vertices(sub)
    x = box.coords[verts, 0]
    return ConnectionEvent(
        box.n_edges,
        [_primal_arm(box, box.sub_box_edges(sub), verts[x == sub.lo[0]], verts[x == sub.hi[0]])],
        f"rect({a}x{b})",
    )


def two_point(box: LatticeBox, v) -> ConnectionEvent:
    origin = box.vertex_index((0,) * box.d)
    tgt = box.vertex_index(v)
    return ConnectionEvent(box.n_edges, [_primal_arm(box, np.arange(box.n_edges), [origin], [tgt])],
                           f"0<->{tuple(v)}")


# ---------------------------------------------------------------- planar duality
class DualView:
    """Dual lattice of a planar box.

    Face (i, j) is the dual vertex at (i + 1/2, j + 1/2); faces range over
    [lo - 1, hi] in each axis so that every primal edge has exactly one dual
    edge.  The dual edge of primal edge e is open iff e is closed.
    """

    def __init__(self, box: LatticeBox):
        if box.d != 2:
            raise UnsupportedDimension("duality is planar")
        self.box = box
        self.flo = (box.lo[0] - 1, box.lo[1] - 1)
        self.fshape = (box.shape[0] + 1, box.shape[1] + 1)
        base = box.edge_base
        axis = box.edge_axis
        # horizontal edge (x,y)-(x+1,y): faces (x, y-1), (x, y)
        # vertical edge (x,y)-(x,y+1): faces (x-1, y), (x, y)
        fa = base.copy()
        fa[axis == 0, 1] -= 1
        fa[axis == 1, 0] -= 1
        self.du = self.face_index(fa)
        self.dv = self.face_index(base)

    @property
    def n_faces(self) -> int:
        return self.fshape[0] * self.fshape[1]

    def face_index(self, faces) -> np.ndarray:
        f = np.asarray(faces, dtype=np.int64)
        rel = f - np.asarray(self.flo)
        return (rel[..., 0] * self.fshape[1] + rel[..., 1]).astype(np.int64)

    @cached_property
    def face_coords(self) -> np.ndarray:
        g = np.indices(self.fshape).reshape(2, -1).T
        return g + np.asarray(self.flo)

    def dual_open(self, cfg: BondConfig) -> np.ndarray:
        return ~cfg.open

    def star(self, vertices) -> np.ndarray:
        """A*: the four dual neighbours of each vertex, as face indices."""
        c = self.box.coords[np.asarray(vertices, dtype=np.int64)]
        out = [c + np.array(off) for off in ((-1, -1), (-1, 0), (0, -1), (0, 0))]
        return np.unique(self.face_index(np.concatenate(out)))


def two_arm(box: LatticeBox, R: int) -> ConnectionEvent:
    """A_2(R): primal arm 0 <-> dLambda_R and dual arm 0* <-> (dLambda_R)*.

    Empty paths count, so for R <= 1 the dual requirement is void.
    """
    if box.d != 2:
        raise UnsupportedDimension("two-arm events are planar")
    primal = one_arm(box, R)
    if R <= 1:
        return ConnectionEvent(box.n_edges, primal.arms, f"A2({R})")
    dual = DualView(box)
    fc = dual.face_coords
    inner = np.all((fc >= -R) & (fc <= R - 1), axis=1)
    keep = inner[dual.du] & inner[dual.dv]
    eids = np.flatnonzero(keep)
    ring = np.flatnonzero(inner & ((fc == -R) | (fc == R - 1)).any(axis=1))
    src = dual.star([box.vertex_index((0, 0))])
    arm = Arm(dual.n_faces, dual.du[eids], dual.dv[eids], eids, src, ring, primal=False)
    return ConnectionEvent(box.n_edges, [primal.arms[0], arm], f"A2({R})")


def dual_crossing_rect(box: LatticeBox, a: int, b: int) -> ConnectionEvent:
    """Top-bottom dual crossing of the a x b rectangle used by rect_crossing."""
    sub = LatticeBox.rectangle(a, b, corner=box.lo)
    edges = box.sub_box_edges(sub)
    dual = DualView(box)
    fc = dual.face_coords
    x0, y0 = sub.lo
    x1, y1 = sub.hi
    # faces strictly between the first and last column, one row beyond top and bottom
    ok = (fc[:, 0] >= x0) & (fc[:, 0] <= x1 - 1) & (fc[:, 1] >= y0 - 1) & (fc[:, 1] <= y1)
    keep = ok[dual.du[edges]] & ok[dual.dv[edges]]
    eids = edges[keep]
    bottom = np.flatnonzero(ok & (fc[:, 1] == y0 - 1))
    top = np.flatnonzero(ok & (fc[:, 1] == y1))
    if a < 2:
        bottom = top = np.zeros(0, dtype=np.int64)
    arm = Arm(dual.n_faces, dual.du[eids], dual.dv[eids], eids, bottom, top, primal=False)
    return ConnectionEvent(box.n_edges, [arm], f"dualrect({a}x{b})")


# ---------------------------------------------------------------- config-level API
def one_arm_event(cfg: BondConfig, R: int) -> bool:
    return one_arm(cfg.box, R)(cfg)


def two_arm_event(cfg: BondConfig, R: int) -> bool:
    return two_arm(cfg.box, R)(cfg)


def crossing_event(cfg: BondConfig, k, R: int) -> bool:
    return crossing(cfg.box, k, R)(cfg)


def crossing_rect(cfg: BondConfig, a: int, b: int) -> bool:
    return rect_crossing(cfg.box, a, b)(cfg)


def two_point_connected(cfg: BondConfig, v) -> bool:
    box = cfg.box
    return connected(cfg, [box.vertex_index((0,) * box.d)], [box.vertex_index(v)])
