"""numba kernels shared by the bond-percolation code.

Graphs are CSR arrays (indptr, nbr, eid) where eid is the index of the bond
that carries the adjacency.  A bond is usable when ``usable[eid]`` is true; for
primal connections that is "open", for dual connections "closed".
"""
from __future__ import annotations

import numba as nb
import numpy as np

from .rng import edge_uniform2


@nb.njit(cache=True)
def reach(indptr, nbr, eid, usable, sources, n_vertices):
    """Mask of vertices reachable from ``sources`` through usable bonds."""
    seen = np.zeros(n_vertices, dtype=np.bool_)
    stack = np.empty(n_vertices, dtype=np.int64)
    top = 0
    for s in sources:
        if not seen[s]:
            seen[s] = True
            stack[top] = s
            top += 1
    while top > 0:
        top -= 1
        v = stack[top]
        for j in range(indptr[v], indptr[v + 1]):
            if usable[eid[j]]:
                w = nbr[j]
                if not seen[w]:
                    seen[w] = True
                    stack[top] = w
                    top += 1
    return seen


@nb.njit(cache=True)
def reaches_target(indptr, nbr, eid, usable, sources, target_mask):
    """Early-exit search: does any source reach a target vertex?"""
    n = target_mask.shape[0]
    seen = np.zeros(n, dtype=np.bool_)
    stack = np.empty(n, dtype=np.int64)
    top = 0
    for s in sources:
        if target_mask[s]:
            return True
        if not seen[s]:
            seen[s] = True
            stack[top] = s
            top += 1
    while top > 0:
        top -= 1
        v = stack[top]
        for j in range(indptr[v], indptr[v + 1]):
            if usable[eid[j]]:
                w = nbr[j]
                if not seen[w]:
                    if target_mask[w]:
                        return True
                    seen[w] = True
                    stack[top] = w
                    top += 1
    return False


@nb.njit(cache=True)
def _find(parent, x):
    root = x
    while parent[root] != root:
        root = parent[root]
    while parent[x] != root:
        nxt = parent[x]
        parent[x] = root
        x = nxt
    return root


@nb.njit(cache=True)
def uf_labels(n_vertices, eu, ev, usable):
    """Union-find with path compression; returns the root of every vertex."""
    parent = np.arange(n_vertices)
    for e in range(eu.shape[0]):
        if usable[e]:
            a = _find(parent, eu[e])
            b = _find(parent, ev[e])
            if a != b:
                if a < b:
                    parent[b] = a
                else:
                    parent[a] = b
    for v in range(n_vertices):
        parent[v] = _find(parent, v)
    return parent


@nb.njit(cache=True)
def connected_batch(n_vertices, eu, ev, eid, states, polarity, src_mask, tgt_mask):
    """Evaluate one connection requirement on a batch of bond configurations.

    ``eu, ev`` are the graph's bonds, ``eid`` maps each to a column of
    ``states``; with ``polarity`` true the bond is usable when the state is
    open, otherwise when it is closed.
    """
    m = states.shape[0]
    out = np.zeros(m, dtype=np.bool_)
    parent = np.empty(n_vertices, dtype=np.int64)
    for r in range(m):
        for v in range(n_vertices):
            parent[v] = v
        for e in range(eu.shape[0]):
            if states[r, eid[e]] == polarity:
                a = _find(parent, eu[e])
                b = _find(parent, ev[e])
                if a != b:
                    parent[b] = a
        hit = np.zeros(n_vertices, dtype=np.bool_)
        for v in range(n_vertices):
            if src_mask[v]:
                hit[_find(parent, v)] = True
        for v in range(n_vertices):
            if tgt_mask[v] and hit[_find(parent, v)]:
                out[r] = True
                break
    return out


@nb.njit(cache=True)
def pivotal_mask(indptr, nbr, eid, n_bonds, open_, sources, targets, n_vertices):
    """Bonds whose flip changes {sources <-> targets} in the open subgraph.

    Closed pivotal bonds join the cluster of the sources to that of the
    targets; open pivotal bonds are s-t bridges, found with an iterative
    Tarjan low-link search from a virtual source attached to ``sources``.
    """
    piv = np.zeros(n_bonds, dtype=np.bool_)
    tmask = np.zeros(n_vertices, dtype=np.bool_)
    for t in targets:
        tmask[t] = True
    from_s = reach(indptr, nbr, eid, open_, sources, n_vertices)
    holds = False
    for t in targets:
        if from_s[t]:
            holds = True
            break
    if not holds:
        from_t = reach(indptr, nbr, eid, open_, targets, n_vertices)
        for v in range(n_vertices):
            if from_s[v]:
                for j in range(indptr[v], indptr[v + 1]):
                    e = eid[j]
                    if not open_[e] and from_t[nbr[j]]:
                        piv[e] = True
        return holds, piv
    # augmented graph: vertex n_vertices is the virtual source s, bonds to it
    # carry ids >= n_bonds and are never bridges we report
    s = n_vertices
    nn = n_vertices + 1
    smask = np.zeros(n_vertices, dtype=np.bool_)
    for v in sources:
        smask[v] = True
    tin = -np.ones(nn, dtype=np.int64)
    low = np.zeros(nn, dtype=np.int64)
    tout = np.zeros(nn, dtype=np.int64)
    # stack frames: vertex, next adjacency position, entering bond id
    st_v = np.empty(nn, dtype=np.int64)
    st_j = np.empty(nn, dtype=np.int64)
    st_e = np.empty(nn, dtype=np.int64)
    src_list = sources
    n_src = src_list.shape[0]
    timer = 0
    top = 0
    st_v[0] = s
    st_j[0] = 0
    st_e[0] = -1
    tin[s] = timer
    low[s] = timer
    timer += 1
    top = 1
    tree_child_bond = -np.ones(nn, dtype=np.int64)
    while top > 0:
        v = st_v[top - 1]
        j = st_j[top - 1]
        pe = st_e[top - 1]
        advanced = False
        if v == s:
            while j < n_src:
                w = src_list[j]
                j += 1
                if tin[w] < 0:
                    st_j[top - 1] = j
                    tin[w] = timer
                    low[w] = timer
                    timer += 1
                    st_v[top] = w
                    st_j[top] = -1  # -1 means: first visit the virtual bond to s
                    st_e[top] = n_bonds + w
                    tree_child_bond[w] = -1
                    top += 1
                    advanced = True
                    break
            if not advanced:
                st_j[top - 1] = j
        else:
            if j == -1:
                j = indptr[v]
                if smask[v] and pe != n_bonds + v:
                    # back edge to s through the virtual bond
                    if tin[s] < low[v]:
                        low[v] = tin[s]
            while j < indptr[v + 1]:
                e = eid[j]
                w = nbr[j]
                j += 1
                if not open_[e] or e == pe:
                    continue
                if tin[w] < 0:
                    st_j[top - 1] = j
                    tin[w] = timer
                    low[w] = timer
                    timer += 1
                    st_v[top] = w
                    st_j[top] = -1
                    st_e[top] = e
                    tree_child_bond[w] = e
                    top += 1
                    advanced = True
                    break
                elif tin[w] < low[v]:
                    low[v] = tin[w]
            if not advanced:
                st_j[top - 1] = j
        if not advanced:
            tout[v] = timer
            timer += 1
            top -= 1
            if top > 0:
                u = st_v[top - 1]
                if low[v] < low[u]:
                    low[u] = low[v]
    # a tree bond (u, w) is a bridge iff low[w] >= tin[w] (no cross edges in an
    # undirected DFS); it is pivotal iff every reached target sits below w
    reached = 0
    for t in targets:
        if tin[t] >= 0:
            reached += 1
    for w in range(n_vertices):
        e = tree_child_bond[w]
        if e < 0 or low[w] < tin[w]:
            continue
        below = 0
        for t in targets:
            if tin[t] >= tin[w] and tout[t] <= tout[w]:
                below += 1
        if below == reached:
            piv[e] = True
    return holds, piv


# ---------------------------------------------------------------- d = 2 fast paths
# These explore Z^2 lazily: an edge's uniform is hashed from its coordinates
# when first inspected, so no configuration array is ever materialised.


@nb.njit(cache=True)
def _open_h(key, p, x, y):
    # edge (x,y)-(x+1,y)
    return edge_uniform2(key, x, y, 0) < p


@nb.njit(cache=True)
def _open_v(key, p, x, y):
    # edge (x,y)-(x,y+1)
    return edge_uniform2(key, x, y, 1) < p


@nb.njit(cache=True)
def origin_cluster_2d(key, p, R, stop_at_boundary, seen, queue):
    """Explore the open cluster of 0 inside Lambda_R.

    Returns (max sup-norm reached, cluster size).  With ``stop_at_boundary``
    the search ends as soon as the boundary is reached (size is then partial).
    ``seen`` must be a zeroed (2R+1)^2 buffer; it is zeroed again on return.
    """
    w = 2 * R + 1
    head = 0
    tail = 0
    seen[R * w + R] = True
    queue[tail] = R * w + R
    tail += 1
    best = 0
    while head < tail:
        idx = queue[head]
        head += 1
        x = idx // w - R
        y = idx % w - R
        nrm = max(abs(x), abs(y))
        if nrm > best:
            best = nrm
            if best == R and stop_at_boundary:
                break
        if x < R and not seen[idx + w] and _open_h(key, p, x, y):
            seen[idx + w] = True
            queue[tail] = idx + w
            tail += 1
        if x > -R and not seen[idx - w] and _open_h(key, p, x - 1, y):
            seen[idx - w] = True
            queue[tail] = idx - w
            tail += 1
        if y < R and not seen[idx + 1] and _open_v(key, p, x, y):
            seen[idx + 1] = True
            queue[tail] = idx + 1
            tail += 1
        if y > -R and not seen[idx - 1] and _open_v(key, p, x, y - 1):
            seen[idx - 1] = True
            queue[tail] = idx - 1
            tail += 1
    for i in range(tail):
        seen[queue[i]] = False
    return best, tail


@nb.njit(cache=True)
def dual_arm_2d(key, p, R, seen, queue):
    """Dual path from the four faces around 0 to the faces of sup-norm R-1/2.

    Face (i, j) has centre (i+1/2, j+1/2); faces with i, j in [-R, R-1] are
    used.  A dual bond is open when the primal edge it crosses is closed.
    """
    if R <= 1:
        return True
    w = 2 * R
    tail = 0
    for i in range(-1, 1):
        for j in range(-1, 1):
            idx = (i + R) * w + (j + R)
            seen[idx] = True
            queue[tail] = idx
            tail += 1
    head = 0
    found = False
    while head < tail:
        idx = queue[head]
        head += 1
        i = idx // w - R
        j = idx % w - R
        if i == -R or i == R - 1 or j == -R or j == R - 1:
            found = True
            break
        # right: crosses vertical edge (i+1, j)-(i+1, j+1)
        if not seen[idx + w] and not _open_v(key, p, i + 1, j):
            seen[idx + w] = True
            queue[tail] = idx + w
            tail += 1
        if not seen[idx - w] and not _open_v(key, p, i, j):
            seen[idx - w] = True
            queue[tail] = idx - w
            tail += 1
        # up: crosses horizontal edge (i, j+1)-(i+1, j+1)
        if not seen[idx + 1] and not _open_h(key, p, i, j + 1):
            seen[idx + 1] = True
            queue[tail] = idx + 1
            tail += 1
        if not seen[idx - 1] and not _open_h(key, p, i, j):
            seen[idx - 1] = True
            queue[tail] = idx - 1
            tail += 1
    for k in range(tail):
        seen[queue[k]] = False
    return found
