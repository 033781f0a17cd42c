"""numba kernels for the noise-box exploration algorithms (d = 2).

Pixels are indexed locally as (i, j) in [0, nx) x [0, ny).  Pixel column i
lies in box column pbx[i] and row j in box row pby[j]; a box's pixels are
bx_lo[bx]:bx_hi[bx] x by_lo[by]:by_hi[by].  Units are boxes, id = bx * nby + by.
A box is interior (its field is determined) once all nine boxes of its 3 x 3
neighbourhood are revealed.
"""
from __future__ import annotations

import numba as nb
import numpy as np

_DX = np.array([1, 0, -1, 0])
_DY = np.array([0, 1, 0, -1])


@nb.njit(cache=True)
def _reveal(u, nby, nbx, revealed, order, n_order, cnt, newly, n_new):
    revealed[u] = True
    order[n_order] = u
    bx = u // nby
    by = u % nby
    for dx in range(-1, 2):
        for dy in range(-1, 2):
            x = bx + dx
            y = by + dy
            if 0 <= x < nbx and 0 <= y < nby:
                cnt[x, y] += 1
                if cnt[x, y] == 9:
                    newly[n_new] = x * nby + y
                    n_new += 1
    return n_order + 1, n_new


@nb.njit(cache=True)
def _expand(ulist, n_u, flag, nbx, nby, cnt, revealed, mark):
    """Unrevealed neighbours of the still non-interior boxes in ulist, sorted."""
    cand = np.empty(nbx * nby, dtype=np.int64)
    n_c = 0
    for k in range(n_u):
        b = ulist[k]
        flag[b] = False
        bx = b // nby
        by = b % nby
        if cnt[bx, by] == 9:
            continue
        for dx in range(-1, 2):
            for dy in range(-1, 2):
                x = bx + dx
                y = by + dy
                if 0 <= x < nbx and 0 <= y < nby:
                    v = x * nby + y
                    if not revealed[v] and not mark[v]:
                        mark[v] = True
                        cand[n_c] = v
                        n_c += 1
    out = np.sort(cand[:n_c])
    for v in out:
        mark[v] = False
    return out


@nb.njit(cache=True)
def grow_primal(bits, pbx, pby, nbx, nby, bx_lo, bx_hi, by_lo, by_hi, seed, init,
                revealed, order, n_order):
    """Grow the set-pixel clusters of the seed pixels through determined boxes.

    Whenever a reached pixel has a 4-neighbour in a box that is not yet
    interior, that box joins U; each round reveals the unrevealed neighbours
    of U (lowest id first).  Signs are read only on interior boxes.
    Returns (order length, reached mask, interior mask over boxes).
    """
    nx, ny = bits.shape
    n_units = nbx * nby
    cnt = np.zeros((nbx, nby), dtype=np.int64)
    reached = np.zeros((nx, ny), dtype=np.bool_)
    stack = np.empty(nx * ny, dtype=np.int64)
    top = 0
    flag = np.zeros(n_units, dtype=np.bool_)
    mark = np.zeros(n_units, dtype=np.bool_)
    ulist = np.empty(n_units, dtype=np.int64)
    newly = np.empty(n_units, dtype=np.int64)
    batch = init.copy()
    while True:
        n_new = 0
        for u in batch:
            if not revealed[u]:
                n_order, n_new = _reveal(u, nby, nbx, revealed, order, n_order, cnt, newly, n_new)
        # activate boxes that just became interior
        for k in range(n_new):
            b = newly[k]
            bx = b // nby
            by = b % nby
            for i in range(bx_lo[bx], bx_hi[bx]):
                for j in range(by_lo[by], by_hi[by]):
                    if not bits[i, j] or reached[i, j]:
                        continue
                    ok = seed[i, j]
                    if not ok:
                        for d in range(4):
                            a = i + _DX[d]
                            c = j + _DY[d]
                            if 0 <= a < nx and 0 <= c < ny and reached[a, c]:
                                ok = True
                                break
                    if ok:
                        reached[i, j] = True
                        stack[top] = i * ny + j
                        top += 1
        n_u = 0
        while top > 0:
            top -= 1
            p = stack[top]
            i = p // ny
            j = p % ny
            for d in range(4):
                a = i + _DX[d]
                c = j + _DY[d]
                if a < 0 or a >= nx or c < 0 or c >= ny or reached[a, c]:
                    continue
                bx = pbx[a]
                by = pby[c]
                if cnt[bx, by] == 9:
                    if bits[a, c]:
                        reached[a, c] = True
                        stack[top] = a * ny + c
                        top += 1
                else:
                    b = bx * nby + by
                    if not flag[b]:
                        flag[b] = True
                        ulist[n_u] = b
                        n_u += 1
        batch = _expand(ulist, n_u, flag, nbx, nby, cnt, revealed, mark)
        if batch.size == 0:
            break
    interior = np.zeros(n_units, dtype=np.bool_)
    for bx in range(nbx):
        for by in range(nby):
            interior[bx * nby + by] = cnt[bx, by] == 9
    return n_order, reached, interior


@nb.njit(cache=True)
def _ahead(a, b, dirn):
    # (ahead-left, ahead-right) pixels at corner (a, b) facing dirn
    if dirn == 0:
        return a, b, a, b - 1
    if dirn == 1:
        return a - 1, b, a, b
    if dirn == 2:
        return a - 1, b - 1, a - 1, b
    return a, b - 1, a - 1, b - 1


@nb.njit(cache=True)
def _cut(a, b, dirn, hcut, vcut, test_only):
    """Crack crossed when leaving corner (a, b) in direction dirn."""
    if dirn == 0:
        x, y, h = a, b, True
    elif dirn == 2:
        x, y, h = a - 1, b, True
    elif dirn == 1:
        x, y, h = a, b, False
    else:
        x, y, h = a, b - 1, False
    if h:
        was = hcut[x, y]
        if not test_only:
            hcut[x, y] = True
    else:
        was = vcut[x, y]
        if not test_only:
            vcut[x, y] = True
    return was


@nb.njit(cache=True)
def trace_level_lines(bits, pbx, pby, nbx, nby, bx_lo, bx_hi, by_lo, by_hi, init,
                      revealed, order, n_order):
    """Trace every level line (crack curve) that starts on the bottom or left side.

    Cracks separate 4-adjacent pixels of opposite sign; at a saddle corner the
    curve wraps around the set pixels, so unset pixels stay 8-connected.  A
    tip is blocked while either pixel ahead of it lies in a non-interior box;
    those boxes form U and their unrevealed neighbours are revealed next.
    Returns (order length, hcut, vcut, interior mask) where hcut[i, b] is the
    crack between pixels (i, b-1), (i, b) and vcut[a, j] the crack between
    (a-1, j), (a, j).
    """
    nx, ny = bits.shape
    n_units = nbx * nby
    cnt = np.zeros((nbx, nby), dtype=np.int64)
    hcut = np.zeros((nx, ny + 1), dtype=np.bool_)
    vcut = np.zeros((nx + 1, ny), dtype=np.bool_)
    flag = np.zeros(n_units, dtype=np.bool_)
    mark = np.zeros(n_units, dtype=np.bool_)
    ulist = np.empty(n_units, dtype=np.int64)
    newly = np.empty(n_units, dtype=np.int64)
    n_max = nx + ny
    ta = np.empty(n_max, dtype=np.int64)
    tb = np.empty(n_max, dtype=np.int64)
    td = np.empty(n_max, dtype=np.int64)
    th = np.empty(n_max, dtype=np.int64)
    alive = np.zeros(n_max, dtype=np.bool_)
    n_tips = 0
    batch = init.copy()
    started = False
    while True:
        n_new = 0
        for u in batch:
            if not revealed[u]:
                n_order, n_new = _reveal(u, nby, nbx, revealed, order, n_order, cnt, newly, n_new)
        if not started:
            started = True
            # starting cracks on the bottom side (heading north) then the left side (east)
            for a in range(1, nx):
                if cnt[pbx[a], pby[0]] != 9 or cnt[pbx[a - 1], pby[0]] != 9:
                    continue
                if bits[a - 1, 0] != bits[a, 0]:
                    ta[n_tips] = a
                    tb[n_tips] = 0
                    td[n_tips] = 1
                    th[n_tips] = 1 if bits[a, 0] else -1
                    alive[n_tips] = True
                    n_tips += 1
            for b in range(1, ny):
                if cnt[pbx[0], pby[b]] != 9 or cnt[pbx[0], pby[b - 1]] != 9:
                    continue
                if bits[0, b - 1] != bits[0, b]:
                    ta[n_tips] = 0
                    tb[n_tips] = b
                    td[n_tips] = 0
                    th[n_tips] = 1 if bits[0, b - 1] else -1
                    alive[n_tips] = True
                    n_tips += 1
            # take the first step of every tip (both pixels already known)
            for t in range(n_tips):
                if _cut(ta[t], tb[t], td[t], hcut, vcut, True):
                    alive[t] = False
                    continue
                _cut(ta[t], tb[t], td[t], hcut, vcut, False)
                ta[t] += _DX[td[t]]
                tb[t] += _DY[td[t]]
                if ta[t] == 0 or ta[t] == nx or tb[t] == 0 or tb[t] == ny:
                    alive[t] = False
        n_u = 0
        for t in range(n_tips):
            while alive[t]:
                a = ta[t]
                b = tb[t]
                dirn = td[t]
                la, lb, ra, rb = _ahead(a, b, dirn)
                li = cnt[pbx[la], pby[lb]] == 9
                ri = cnt[pbx[ra], pby[rb]] == 9
                if not (li and ri):
                    if not li:
                        bb = pbx[la] * nby + pby[lb]
                        if not flag[bb]:
                            flag[bb] = True
                            ulist[n_u] = bb
                            n_u += 1
                    if not ri:
                        bb = pbx[ra] * nby + pby[rb]
                        if not flag[bb]:
                            flag[bb] = True
                            ulist[n_u] = bb
                            n_u += 1
                    break
                al = bits[la, lb]
                ar = bits[ra, rb]
                if th[t] == 1:
                    if not ar:
                        nd = (dirn + 3) % 4
                    elif not al:
                        nd = dirn
                    else:
                        nd = (dirn + 1) % 4
                else:
                    if not al:
                        nd = (dirn + 1) % 4
                    elif not ar:
                        nd = dirn
                    else:
                        nd = (dirn + 3) % 4
                if _cut(a, b, nd, hcut, vcut, True):
                    # met a curve traced from its other end
                    alive[t] = False
                    break
                _cut(a, b, nd, hcut, vcut, False)
                a += _DX[nd]
                b += _DY[nd]
                ta[t] = a
                tb[t] = b
                td[t] = nd
                if a == 0 or a == nx or b == 0 or b == ny:
                    alive[t] = False
        batch = _expand(ulist, n_u, flag, nbx, nby, cnt, revealed, mark)
        if batch.size == 0:
            break
    interior = np.zeros(n_units, dtype=np.bool_)
    for bx in range(nbx):
        for by in range(nby):
            interior[bx * nby + by] = cnt[bx, by] == 9
    return n_order, hcut, vcut, interior


@nb.njit(cache=True)
def crack_regions(hcut, vcut):
    """Label pixels by 4-adjacency, never crossing a cut crack."""
    nx = hcut.shape[0]
    ny = vcut.shape[1]
    lab = -np.ones((nx, ny), dtype=np.int64)
    stack = np.empty(nx * ny, dtype=np.int64)
    n_lab = 0
    for i0 in range(nx):
        for j0 in range(ny):
            if lab[i0, j0] >= 0:
                continue
            lab[i0, j0] = n_lab
            stack[0] = i0 * ny + j0
            top = 1
            while top > 0:
                top -= 1
                p = stack[top]
                i = p // ny
                j = p % ny
                # east, west, north, south
                if i + 1 < nx and not vcut[i + 1, j] and lab[i + 1, j] < 0:
                    lab[i + 1, j] = n_lab
                    stack[top] = (i + 1) * ny + j
                    top += 1
                if i - 1 >= 0 and not vcut[i, j] and lab[i - 1, j] < 0:
                    lab[i - 1, j] = n_lab
                    stack[top] = (i - 1) * ny + j
                    top += 1
                if j + 1 < ny and not hcut[i, j + 1] and lab[i, j + 1] < 0:
                    lab[i, j + 1] = n_lab
                    stack[top] = i * ny + j + 1
                    top += 1
                if j - 1 >= 0 and not hcut[i, j] and lab[i, j - 1] < 0:
                    lab[i, j - 1] = n_lab
                    stack[top] = i * ny + j - 1
                    top += 1
            n_lab += 1
    return lab, n_lab
