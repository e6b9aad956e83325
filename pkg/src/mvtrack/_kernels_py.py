"""Pure-Python/numpy kernels. Used when the compiled extension is unavailable."""

from __future__ import annotations

import numpy as np


def hungarian_square(cost: np.ndarray) -> np.ndarray:
    """Minimum-cost perfect matching on a square matrix of finite costs.

    Shortest augmenting path with row/column potentials, O(n^3). Returns
    ``row_to_col`` such that row ``i`` is assigned column ``row_to_col[i]``.
    Ties resolve to the lowest column index.
    """
    cost = np.ascontiguousarray(cost, dtype=np.float64)
    n = cost.shape[0]
    if n == 0:
        return np.zeros(0, dtype=np.intp)
    inf = np.inf
    u = np.zeros(n + 1)
    v = np.zeros(n + 1)
    p = np.zeros(n + 1, dtype=np.intp)  # p[j]: 1-based row matched to column j
    way = np.zeros(n + 1, dtype=np.intp)
    for i in range(1, n + 1):
        p[0] = i
        j0 = 0
        minv = np.full(n + 1, inf)
        used = np.zeros(n + 1, dtype=bool)
        while True:
            used[j0] = True
            i0 = p[j0]
            free = ~used[1:]
            cur = cost[i0 - 1] - u[i0] - v[1:]
            better = free & (cur < minv[1:])
            minv[1:][better] = cur[better]
            way[1:][better] = j0
            masked = np.where(free, minv[1:], inf)
            j1 = int(np.argmin(masked)) + 1
            delta = masked[j1 - 1]
            u[p[used]] += delta
            v[used] -= delta
            minv[~used] -= delta
            j0 = j1
            if p[j0] == 0:
                break
        while j0:
            j1 = way[j0]
            p[j0] = p[j1]
            j0 = j1
    row_to_col = np.empty(n, dtype=np.intp)
    row_to_col[p[1:] - 1] = np.arange(n)
    return row_to_col


def pose_cost_matrix(pred_xy, pred_vis, det_xy, det_vis, min_shared: int = 3) -> np.ndarray:
    """Mean per-keypoint L2 distance over keypoints visible in both poses.

    Pairs sharing fewer than ``min_shared`` visible keypoints get ``inf``.
    """
    pred_xy = np.asarray(pred_xy, dtype=np.float64)
    det_xy = np.asarray(det_xy, dtype=np.float64)
    pred_vis = np.asarray(pred_vis, dtype=bool)
    det_vis = np.asarray(det_vis, dtype=bool)
    n_p, n_d = len(pred_xy), len(det_xy)
    if n_p == 0 or n_d == 0:
        return np.zeros((n_p, n_d))
    dist = np.linalg.norm(pred_xy[:, None] - det_xy[None], axis=-1)
    shared = pred_vis[:, None] & det_vis[None]
    count = shared.sum(axis=-1)
    total = np.where(shared, dist, 0.0).sum(axis=-1)
    out = np.full((n_p, n_d), np.inf)
    ok = count >= min_shared
    out[ok] = total[ok] / count[ok]
    return out
