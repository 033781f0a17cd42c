"""numba kernels for the edge-revealing exploration algorithms."""
from __future__ import annotations

import numba as nb
import numpy as np


@nb.njit(cache=True, inline="always")
def _heap_push(heap, size, x):
    i = size
    heap[i] = x
    while i > 0:
        parent = (i - 1) >> 1
        if heap[parent] <= heap[i]:
            break
        heap[parent], heap[i] = heap[i], heap[parent]
        i = parent
    return size + 1


@nb.njit(cache=True, inline="always")
def _heap_pop(heap, size):
    top = heap[0]
    size -= 1
    heap[0] = heap[size]
    i = 0
    while True:
        left = 2 * i + 1
        if left >= size:
            break
        c = left
        if left + 1 < size and heap[left + 1] < heap[left]:
            c = left + 1
        if heap[i] <= heap[c]:
            break
        heap[i], heap[c] = heap[c], heap[i]
        i = c
    return top, size


@nb.njit(cache=True)
def explore_cluster(indptr, nbr, eid, eu, ev, domain, states, seeds, n_vertices,
                    revealed, order, n_order):
    """Reveal every domain edge touching the open cluster of ``seeds``.

    Frontier edges are revealed lowest index first.  Edges already marked in
    ``revealed`` count as known (their states extend the cluster for free).
    Returns (new order length, cluster mask).
    """
    n_edges = domain.shape[0]
    in_cl = np.zeros(n_vertices, dtype=np.bool_)
    queued = revealed.copy()
    heap = np.empty(n_edges + 1, dtype=np.int64)
    size = 0
    stack = np.empty(n_vertices, dtype=np.int64)
    top = 0
    for s in seeds:
        if not in_cl[s]:
            in_cl[s] = True
            stack[top] = s
            top += 1
    while True:
        while top > 0:
            top -= 1
            v = stack[top]
            for j in range(indptr[v], indptr[v + 1]):
                e = eid[j]
                if not domain[e]:
                    continue
                if revealed[e]:
                    w = nbr[j]
                    if states[e] and not in_cl[w]:
                        in_cl[w] = True
                        stack[top] = w
                        top += 1
                elif not queued[e]:
                    queued[e] = True
                    size = _heap_push(heap, size, e)
        if size == 0:
            break
        e, size = _heap_pop(heap, size)
        revealed[e] = True
        order[n_order] = e
        n_order += 1
        if states[e]:
            for w in (eu[e], ev[e]):
                if not in_cl[w]:
                    in_cl[w] = True
                    stack[top] = w
                    top += 1
    return n_order, in_cl


@nb.njit(cache=True)
def explore_interface(indptr, nbr, eid, eu, ev, fu, fv, f_indptr, f_eid, domain, states,
                      seed_vertices, seed_faces, n_vertices, n_faces, revealed, order, n_order):
    """Reveal edges on interfaces between the primal cluster of the seed
    vertices and the dual cluster of the seed faces.

    An unrevealed domain edge is eligible once one endpoint is known to be
    primal-connected to the seeds and one of its two faces is known to be
    dual-connected to the seed faces.  Eligible edges are revealed lowest
    index first; an open edge extends the primal side, a closed one the dual
    side.
    """
    n_edges = domain.shape[0]
    in_p = np.zeros(n_vertices, dtype=np.bool_)
    in_d = np.zeros(n_faces, dtype=np.bool_)
    queued = revealed.copy()
    heap = np.empty(n_edges + 1, dtype=np.int64)
    size = 0
    vstack = np.empty(n_vertices, dtype=np.int64)
    vtop = 0
    fstack = np.empty(n_faces, dtype=np.int64)
    ftop = 0
    for s in seed_vertices:
        if not in_p[s]:
            in_p[s] = True
            vstack[vtop] = s
            vtop += 1
    for f in seed_faces:
        if not in_d[f]:
            in_d[f] = True
            fstack[ftop] = f
            ftop += 1
    while True:
        while vtop > 0 or ftop > 0:
            if vtop > 0:
                vtop -= 1
                v = vstack[vtop]
                for j in range(indptr[v], indptr[v + 1]):
                    e = eid[j]
                    if not domain[e] or queued[e]:
                        continue
                    if in_d[fu[e]] or in_d[fv[e]]:
                        queued[e] = True
                        size = _heap_push(heap, size, e)
            else:
                ftop -= 1
                f = fstack[ftop]
                for j in range(f_indptr[f], f_indptr[f + 1]):
                    e = f_eid[j]
                    if not domain[e] or queued[e]:
                        continue
                    if in_p[eu[e]] or in_p[ev[e]]:
                        queued[e] = True
                        size = _heap_push(heap, size, e)
        if size == 0:
            break
        e, size = _heap_pop(heap, size)
        revealed[e] = True
        order[n_order] = e
        n_order += 1
        if states[e]:
            for w in (eu[e], ev[e]):
                if not in_p[w]:
                    in_p[w] = True
                    vstack[vtop] = w
                    vtop += 1
        else:
            for g in (fu[e], fv[e]):
                if not in_d[g]:
                    in_d[g] = True
                    fstack[ftop] = g
                    ftop += 1
    return n_order
