"""Pure-numpy fallback for the compiled kernels.

Same contracts as ``_core``; used when the extension is not built or when
SMILNAV_NO_EXT=1 is set. Correct everywhere, slower on the hot paths.
"""

import heapq

import numpy as np


def im2col(x, kh, kw, sh, sw):
    N, C, H, W = x.shape
    OH = (H - kh) // sh + 1
    OW = (W - kw) // sw + 1
    cols = np.empty((N, C, kh, kw, OH, OW), dtype=x.dtype)
    for i in range(kh):
        for j in range(kw):
            cols[:, :, i, j] = x[:, :, i : i + sh * OH : sh, j : j + sw * OW : sw]
    # rows indexed by (n, oh, ow); columns by (c, i, j)
    return np.ascontiguousarray(cols.transpose(0, 4, 5, 1, 2, 3)).reshape(N * OH * OW, C * kh * kw)


def col2im(cols, N, C, H, W, kh, kw, sh, sw):
    OH = (H - kh) // sh + 1
    OW = (W - kw) // sw + 1
    patches = cols.reshape(N, OH, OW, C, kh, kw).transpose(0, 3, 4, 5, 1, 2)
    x = np.zeros((N, C, H, W), dtype=cols.dtype)
    for i in range(kh):
        for j in range(kw):
            x[:, :, i : i + sh * OH : sh, j : j + sw * OW : sw] += patches[:, :, i, j]
    return x


def raycast(px, py, angles, segs, discs, boxes):
    W = angles.shape[0]
    dx = np.cos(angles)
    dy = np.sin(angles)
    t_wall = np.full(W, np.inf)
    wall_idx = np.full(W, -1, dtype=np.int32)
    t_obs = np.full(W, np.inf)
    obs_idx = np.full(W, -1, dtype=np.int32)
    obs_kind = np.full(W, -1, dtype=np.int32)
    EPS = 1e-9

    if segs.shape[0]:
        ax = segs[:, 0] - px
        ay = segs[:, 1] - py
        sx = segs[:, 2] - segs[:, 0]
        sy = segs[:, 3] - segs[:, 1]
        denom = dx[:, None] * sy[None, :] - dy[:, None] * sx[None, :]
        with np.errstate(divide="ignore", invalid="ignore"):
            t = (ax[None, :] * sy[None, :] - ay[None, :] * sx[None, :]) / denom
            u = (ax[None, :] * dy[:, None] - ay[None, :] * dx[:, None]) / denom
        valid = (denom != 0) & (t > EPS) & (u >= 0.0) & (u <= 1.0)
        t = np.where(valid, t, np.inf)
        wall_idx = np.argmin(t, axis=1).astype(np.int32)
        t_wall = t[np.arange(W), wall_idx]
        wall_idx[~np.isfinite(t_wall)] = -1

    if discs.shape[0]:
        fx = px - discs[:, 0]
        fy = py - discs[:, 1]
        b = fx[None, :] * dx[:, None] + fy[None, :] * dy[:, None]
        c = (fx * fx + fy * fy - discs[:, 2] ** 2)[None, :]
        disc = b * b - c
        with np.errstate(invalid="ignore"):
            root = -b - np.sqrt(disc)
        valid = (disc >= 0) & (root > EPS)
        root = np.where(valid, root, np.inf)
        di = np.argmin(root, axis=1)
        dt = root[np.arange(W), di]
        hit = dt < t_obs
        t_obs[hit] = dt[hit]
        obs_idx[hit] = di[hit].astype(np.int32)
        obs_kind[hit] = 0

    if boxes.shape[0]:
        with np.errstate(divide="ignore", invalid="ignore"):
            tx1 = (boxes[None, :, 0] - px) / dx[:, None]
            tx2 = (boxes[None, :, 2] - px) / dx[:, None]
            ty1 = (boxes[None, :, 1] - py) / dy[:, None]
            ty2 = (boxes[None, :, 3] - py) / dy[:, None]
        txmin = np.minimum(tx1, tx2)
        txmax = np.maximum(tx1, tx2)
        tymin = np.minimum(ty1, ty2)
        tymax = np.maximum(ty1, ty2)
        # axis-parallel rays: slab degenerates to an inside test on that axis
        para_x = dx == 0
        inside_x = (px >= boxes[None, :, 0]) & (px <= boxes[None, :, 2])
        txmin = np.where(para_x[:, None], np.where(inside_x, -np.inf, np.inf), txmin)
        txmax = np.where(para_x[:, None], np.where(inside_x, np.inf, -np.inf), txmax)
        para_y = dy == 0
        inside_y = (py >= boxes[None, :, 1]) & (py <= boxes[None, :, 3])
        tymin = np.where(para_y[:, None], np.where(inside_y, -np.inf, np.inf), tymin)
        tymax = np.where(para_y[:, None], np.where(inside_y, np.inf, -np.inf), tymax)
        tmin = np.maximum(txmin, tymin)
        tmax = np.minimum(txmax, tymax)
        valid = (tmax >= tmin) & (tmin > EPS)
        tmin = np.where(valid, tmin, np.inf)
        bi = np.argmin(tmin, axis=1)
        bt = tmin[np.arange(W), bi]
        hit = bt < t_obs
        t_obs[hit] = bt[hit]
        obs_idx[hit] = bi[hit].astype(np.int32)
        obs_kind[hit] = 1

    return t_wall, wall_idx, t_obs, obs_idx, obs_kind


def dijkstra_field(cost, seeds):
    H, W = cost.shape
    dist = np.full((H, W), np.inf)
    heap = []
    SQRT2 = np.sqrt(2.0)
    for r, c in zip(*np.nonzero(seeds)):
        if np.isfinite(cost[r, c]):
            dist[r, c] = 0.0
            heapq.heappush(heap, (0.0, int(r) * W + int(c)))
    moves = [(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)]
    while heap:
        dcur, idx = heapq.heappop(heap)
        r, c = divmod(idx, W)
        if dcur > dist[r, c]:
            continue
        for dr, dc in moves:
            nr, nc = r + dr, c + dc
            if not (0 <= nr < H and 0 <= nc < W) or np.isinf(cost[nr, nc]):
                continue
            if dr and dc:
                if np.isinf(cost[r, nc]) or np.isinf(cost[nr, c]):
                    continue
                w = 0.5 * (cost[r, c] + cost[nr, nc]) * SQRT2
            else:
                w = 0.5 * (cost[r, c] + cost[nr, nc])
            nd = dcur + w
            if nd < dist[nr, nc]:
                dist[nr, nc] = nd
                heapq.heappush(heap, (nd, nr * W + nc))
    return dist
