# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels: conv patch gather/scatter, raycasting, grid Dijkstra.

The numpy fallback in ``pyfallback.py`` implements the same contracts; the
equivalence of the two backends is covered by tests.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport INFINITY, cos, sin, sqrt
from libcpp.pair cimport pair
from libcpp.queue cimport priority_queue

cnp.import_array()

ctypedef fused real:
    float
    double


def im2col(real[:, :, :, ::1] x, int kh, int kw, int sh, int sw):
    """Gather conv patches of (N,C,H,W) into rows of (N*OH*OW, C*kh*kw)."""
    cdef int N = x.shape[0], C = x.shape[1], H = x.shape[2], W = x.shape[3]
    cdef int OH = (H - kh) // sh + 1
    cdef int OW = (W - kw) // sw + 1
    if real is float:
        dtype = np.float32
    else:
        dtype = np.float64
    out_arr = np.empty((N * OH * OW, C * kh * kw), dtype=dtype)
    cdef real[:, ::1] out = out_arr
    cdef int n, c, oh, ow, i, j, row, col, hi, wj
    for n in range(N):
        for oh in range(OH):
            for ow in range(OW):
                row = (n * OH + oh) * OW + ow
                for c in range(C):
                    hi = oh * sh
                    wj = ow * sw
                    col = c * kh * kw
                    for i in range(kh):
                        for j in range(kw):
                            out[row, col + i * kw + j] = x[n, c, hi + i, wj + j]
    return out_arr


def col2im(real[:, ::1] cols, int N, int C, int H, int W, int kh, int kw, int sh, int sw):
    """Scatter-add patch rows back into an (N,C,H,W) tensor (im2col adjoint)."""
    cdef int OH = (H - kh) // sh + 1
    cdef int OW = (W - kw) // sw + 1
    if real is float:
        dtype = np.float32
    else:
        dtype = np.float64
    x_arr = np.zeros((N, C, H, W), dtype=dtype)
    cdef real[:, :, :, ::1] x = x_arr
    cdef int n, c, oh, ow, i, j, row, col, hi, wj
    for n in range(N):
        for oh in range(OH):
            for ow in range(OW):
                row = (n * OH + oh) * OW + ow
                for c in range(C):
                    hi = oh * sh
                    wj = ow * sw
                    col = c * kh * kw
                    for i in range(kh):
                        for j in range(kw):
                            x[n, c, hi + i, wj + j] += cols[row, col + i * kw + j]
    return x_arr


def raycast(double px, double py, double[::1] angles,
            double[:, ::1] segs, double[:, ::1] discs, double[:, ::1] boxes):
    """Cast one ray per angle from (px,py); nearest wall hit and nearest obstacle hit.

    segs: (S,4) endpoints; discs: (D,3) center+radius; boxes: (B,4) aabb.
    Returns (t_wall, wall_idx, t_obs, obs_idx, obs_kind); misses are inf / -1.
    """
    cdef int W = angles.shape[0]
    cdef int S = segs.shape[0], D = discs.shape[0], B = boxes.shape[0]
    t_wall_arr = np.full(W, np.inf)
    wall_idx_arr = np.full(W, -1, dtype=np.int32)
    t_obs_arr = np.full(W, np.inf)
    obs_idx_arr = np.full(W, -1, dtype=np.int32)
    obs_kind_arr = np.full(W, -1, dtype=np.int32)
    cdef double[::1] t_wall = t_wall_arr
    cdef int[::1] wall_idx = wall_idx_arr
    cdef double[::1] t_obs = t_obs_arr
    cdef int[::1] obs_idx = obs_idx_arr
    cdef int[::1] obs_kind = obs_kind_arr

    cdef int w, s, d, b
    cdef double dx, dy, ax, ay, sx, sy, denom, t, u, best
    cdef double cx, cy, r, fx, fy, bq, cq, disc, root
    cdef double x0, y0, x1, y1, tmin, tmax, t1, t2, tmp
    cdef double EPS = 1e-9
    for w in range(W):
        dx = cos(angles[w])
        dy = sin(angles[w])
        best = INFINITY
        for s in range(S):
            ax = segs[s, 0]
            ay = segs[s, 1]
            sx = segs[s, 2] - ax
            sy = segs[s, 3] - ay
            denom = dx * sy - dy * sx
            if denom == 0.0:
                continue
            t = ((ax - px) * sy - (ay - py) * sx) / denom
            if t <= EPS or t >= best:
                continue
            u = ((ax - px) * dy - (ay - py) * dx) / denom
            if u < 0.0 or u > 1.0:
                continue
            best = t
            t_wall[w] = t
            wall_idx[w] = s
        best = INFINITY
        for d in range(D):
            cx = discs[d, 0]
            cy = discs[d, 1]
            r = discs[d, 2]
            fx = px - cx
            fy = py - cy
            bq = fx * dx + fy * dy
            cq = fx * fx + fy * fy - r * r
            disc = bq * bq - cq
            if disc < 0.0:
                continue
            root = -bq - sqrt(disc)
            if root <= EPS or root >= best:
                continue
            best = root
            t_obs[w] = root
            obs_idx[w] = d
            obs_kind[w] = 0
        for b in range(B):
            x0 = boxes[b, 0]
            y0 = boxes[b, 1]
            x1 = boxes[b, 2]
            y1 = boxes[b, 3]
            if dx != 0.0:
                t1 = (x0 - px) / dx
                t2 = (x1 - px) / dx
                if t1 > t2:
                    tmp = t1
                    t1 = t2
                    t2 = tmp
                tmin = t1
                tmax = t2
            else:
                if px < x0 or px > x1:
                    continue
                tmin = -INFINITY
                tmax = INFINITY
            if dy != 0.0:
                t1 = (y0 - py) / dy
                t2 = (y1 - py) / dy
                if t1 > t2:
                    tmp = t1
                    t1 = t2
                    t2 = tmp
                if t1 > tmin:
                    tmin = t1
                if t2 < tmax:
                    tmax = t2
            else:
                if py < y0 or py > y1:
                    continue
            if tmax < tmin or tmin <= EPS or tmin >= best:
                continue
            best = tmin
            t_obs[w] = tmin
            obs_idx[w] = b
            obs_kind[w] = 1
    return t_wall_arr, wall_idx_arr, t_obs_arr, obs_idx_arr, obs_kind_arr


def dijkstra_field(double[:, ::1] cost, cnp.uint8_t[:, ::1] seeds):
    """Weighted 8-connected distance field over a grid.

    cost is a per-cell traversal multiplier with inf marking blocked cells;
    edge weight between neighbours is the cell-cost mean times step length.
    Diagonal steps require both adjacent orthogonal cells to be passable.
    """
    cdef int H = cost.shape[0], W = cost.shape[1]
    dist_arr = np.full((H, W), np.inf)
    cdef double[:, ::1] dist = dist_arr
    cdef priority_queue[pair[double, int]] heap
    cdef pair[double, int] item
    cdef int r, c, k, nr, nc, idx
    cdef double dcur, w, SQRT2 = sqrt(2.0)
    cdef int[8] dr = [-1, -1, -1, 0, 0, 1, 1, 1]
    cdef int[8] dc = [-1, 0, 1, -1, 1, -1, 0, 1]

    for r in range(H):
        for c in range(W):
            if seeds[r, c] and cost[r, c] != INFINITY:
                dist[r, c] = 0.0
                item.first = 0.0
                item.second = r * W + c
                heap.push(item)
    while not heap.empty():
        item = heap.top()
        heap.pop()
        dcur = -item.first
        idx = item.second
        r = idx // W
        c = idx % W
        if dcur > dist[r, c]:
            continue
        for k in range(8):
            nr = r + dr[k]
            nc = c + dc[k]
            if nr < 0 or nr >= H or nc < 0 or nc >= W:
                continue
            if cost[nr, nc] == INFINITY:
                continue
            if dr[k] != 0 and dc[k] != 0:
                if cost[r, nc] == INFINITY or cost[nr, c] == INFINITY:
                    continue
                w = 0.5 * (cost[r, c] + cost[nr, nc]) * SQRT2
            else:
                w = 0.5 * (cost[r, c] + cost[nr, nc])
            if dcur + w < dist[nr, nc]:
                dist[nr, nc] = dcur + w
                item.first = -(dcur + w)
                item.second = nr * W + nc
                heap.push(item)
    return dist_arr
