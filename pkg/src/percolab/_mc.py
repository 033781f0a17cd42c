"""Batched Monte Carlo kernels for Bernoulli bond percolation.

Every replica's configuration is the hashed-uniform field of :mod:`percolab.rng`
(key = replica_key(seed, replica, tag)), so these kernels and the generic
box-based events see the same edges for the same replica.
"""
import numba as nb
import numpy as np

from .rng import _OFFSET, _TO_UNIT, edge_uniform2, mix64


@nb.njit(cache=True)
def replica_key_nb(seed, rep, tag):
    h = mix64(np.uint64(seed))
    h = mix64(h ^ np.uint64(rep))
    return mix64(h ^ np.uint64(tag))


@nb.njit(cache=True, inline="always")
def _edge_u(key, x, d, axis):
    h = key
    for j in range(d):
        h = mix64(h ^ np.uint64(x[j] + _OFFSET))
    h = mix64(h ^ np.uint64(axis))
    return float(h >> np.uint64(11)) * _TO_UNIT


@nb.njit(cache=True)
def cluster_nd(key, p, d, Rbox, Rcount, stop_R, seen, queue, x):
    """Open cluster of 0 inside Lambda_Rbox in Z^d.

    Returns (largest sup-norm reached, #cluster vertices with sup-norm <= Rcount,
    #vertices explored).  The search stops once sup-norm ``stop_R`` is reached
    (pass -1 to explore the whole cluster).  ``seen`` is zeroed on return.
    """
    w = 2 * Rbox + 1
    start = 0
    stride = 1
    for j in range(d):
        start += Rbox * stride
        stride *= w
    seen[start] = True
    queue[0] = start
    tail = 1
    head = 0
    best = 0
    inside = 0
    while head < tail:
        idx = queue[head]
        head += 1
        rem = idx
        nrm = 0
        for j in range(d):
            x[j] = rem % w - Rbox
            rem //= w
            a = abs(x[j])
            if a > nrm:
                nrm = a
        if nrm <= Rcount:
            inside += 1
        if nrm > best:
            best = nrm
            if best == stop_R:
                break
        st = 1
        for a in range(d):
            if x[a] < Rbox:
                nb_ = idx + st
                if not seen[nb_] and _edge_u(key, x, d, a) < p:
                    seen[nb_] = True
                    queue[tail] = nb_
                    tail += 1
            if x[a] > -Rbox:
                nb_ = idx - st
                if not seen[nb_]:
                    x[a] -= 1
                    u = _edge_u(key, x, d, a)
                    x[a] += 1
                    if u < p:
                        seen[nb_] = True
                        queue[tail] = nb_
                        tail += 1
            st *= w
    for i in range(tail):
        seen[queue[i]] = False
    return best, inside, tail


@nb.njit(cache=True)
def one_arm_radii(seed, tag, start, count, p, d, R):
    """Sup-norm reached by the cluster of 0 in Lambda_R, capped at R.

    A_1(r) holds for the replica iff the returned radius is >= r (r <= R).
    """
    n = (2 * R + 1) ** d
    seen = np.zeros(n, dtype=np.bool_)
    queue = np.empty(n, dtype=np.int64)
    x = np.empty(d, dtype=np.int64)
    out = np.empty(count, dtype=np.int64)
    for i in range(count):
        key = replica_key_nb(seed, start + i, tag)
        out[i] = cluster_nd(key, p, d, R, R, R, seen, queue, x)[0]
    return out


@nb.njit(cache=True)
def two_point_counts(seed, tag, start, count, p, d, Rbox, Rcount):
    """|C(0) cap Lambda_Rcount| with C(0) the open cluster of 0 inside Lambda_Rbox."""
    n = (2 * Rbox + 1) ** d
    seen = np.zeros(n, dtype=np.bool_)
    queue = np.empty(n, dtype=np.int64)
    x = np.empty(d, dtype=np.int64)
    out = np.empty(count, dtype=np.int64)
    for i in range(count):
        key = replica_key_nb(seed, start + i, tag)
        out[i] = cluster_nd(key, p, d, Rbox, Rcount, -1, seen, queue, x)[1]
    return out


@nb.njit(cache=True)
def _dual_arm(key, p, R, seen, queue):
    # dual path from the faces around 0 to the outermost faces of Lambda_R
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
        if not seen[idx + w] and not edge_uniform2(key, i + 1, j, 1) < p:
            seen[idx + w] = True
            queue[tail] = idx + w
            tail += 1
        if not seen[idx - w] and not edge_uniform2(key, i, j, 1) < p:
            seen[idx - w] = True
            queue[tail] = idx - w
            tail += 1
        if not seen[idx + 1] and not edge_uniform2(key, i, j + 1, 0) < p:
            seen[idx + 1] = True
            queue[tail] = idx + 1
            tail += 1
        if not seen[idx - 1] and not edge_uniform2(key, i, j, 0) < p:
            seen[idx - 1] = True
            queue[tail] = idx - 1
            tail += 1
    for k in range(tail):
        seen[queue[k]] = False
    return found


@nb.njit(cache=True)
def two_arm_flags(seed, tag, start, count, p, R):
    """A_2(R) indicators in d = 2 (primal arm from 0, dual arm from 0*)."""
    n = (2 * R + 1) ** 2
    seen = np.zeros(n, dtype=np.bool_)
    queue = np.empty(n, dtype=np.int64)
    x = np.empty(2, dtype=np.int64)
    out = np.zeros(count, dtype=np.bool_)
    for i in range(count):
        key = replica_key_nb(seed, start + i, tag)
        if cluster_nd(key, p, 2, R, R, R, seen, queue, x)[0] == R:
            out[i] = _dual_arm(key, p, R, seen, queue)
    return out


@nb.njit(cache=True)
def rect_crossing_flags(seed, tag, start, count, p, cols, rows):
    """Left-right open crossing of the vertex rectangle [0, cols-1] x [0, rows-1]."""
    n = cols * rows
    seen = np.zeros(n, dtype=np.bool_)
    queue = np.empty(n, dtype=np.int64)
    out = np.zeros(count, dtype=np.bool_)
    for r in range(count):
        key = replica_key_nb(seed, start + r, tag)
        tail = 0
        for y in range(rows):
            seen[y] = True
            queue[tail] = y
            tail += 1
        head = 0
        hit = cols == 1
        while head < tail and not hit:
            idx = queue[head]
            head += 1
            x = idx // rows
            y = idx % rows
            if x + 1 < cols and not seen[idx + rows] and edge_uniform2(key, x, y, 0) < p:
                if x + 1 == cols - 1:
                    hit = True
                seen[idx + rows] = True
                queue[tail] = idx + rows
                tail += 1
            if x > 0 and not seen[idx - rows] and edge_uniform2(key, x - 1, y, 0) < p:
                seen[idx - rows] = True
                queue[tail] = idx - rows
                tail += 1
            if y + 1 < rows and not seen[idx + 1] and edge_uniform2(key, x, y, 1) < p:
                seen[idx + 1] = True
                queue[tail] = idx + 1
                tail += 1
            if y > 0 and not seen[idx - 1] and edge_uniform2(key, x, y - 1, 1) < p:
                seen[idx - 1] = True
                queue[tail] = idx - 1
                tail += 1
        out[r] = hit
        for i in range(tail):
            seen[queue[i]] = False
    return out


@nb.njit(cache=True)
def box_uniforms(seed, tag, start, count, base, axes):
    """Edge uniforms (count, m) for edges given by base coords (m, d) and axes."""
    m, d = base.shape
    out = np.empty((count, m))
    for r in range(count):
        key = replica_key_nb(seed, start + r, tag)
        for i in range(m):
            out[r, i] = _edge_u(key, base[i], d, axes[i])
    return out
