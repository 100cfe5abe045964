"""Cell-list search for close pairs of points."""

from __future__ import annotations

import numpy as np


def close_pairs(points, radius: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """All unordered pairs ``i < j`` with ``|p_i - p_j| <= radius``.

    Points are binned into square cells of side ``radius``; only pairs in the
    same or adjacent cells are compared. Returns ``(i, j, dist)`` sorted by
    ``(i, j)``.
    """
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    n = len(pts)
    empty = (np.empty(0, dtype=np.intp), np.empty(0, dtype=np.intp), np.empty(0))
    if n < 2 or radius <= 0:
        return empty
    lo = pts.min(axis=0)
    cell = np.floor((pts - lo) / radius).astype(np.int64)
    ncol = int(cell[:, 1].max()) + 3
    key = (cell[:, 0] + 1) * ncol + (cell[:, 1] + 1)
    order = np.argsort(key, kind="stable")
    skey = key[order]
    uniq, start = np.unique(skey, return_index=True)
    stop = np.append(start[1:], n)

    ii, jj = [], []
    for dx in (-1, 0, 1):
        for dy in (-1, 0, 1):
            # visit each unordered pair of cells once
            if (dx, dy) < (0, 0):
                continue
            nb = uniq + dx * ncol + dy
            pos = np.searchsorted(uniq, nb)
            pos = np.minimum(pos, len(uniq) - 1)
            hit = uniq[pos] == nb
            for c, p in zip(np.nonzero(hit)[0], pos[hit]):
                a = order[start[c]:stop[c]]
                b = order[start[p]:stop[p]]
                if dx == 0 and dy == 0:
                    ia, ib = np.triu_indices(len(a), k=1)
                    ii.append(a[ia])
                    jj.append(a[ib])
                else:
                    ii.append(np.repeat(a, len(b)))
                    jj.append(np.tile(b, len(a)))
    if not ii:
        return empty
    i = np.concatenate(ii)
    j = np.concatenate(jj)
    d = np.hypot(*(pts[i] - pts[j]).T)
    keep = d <= radius
    i, j, d = i[keep], j[keep], d[keep]
    lo_ij = np.minimum(i, j)
    hi_ij = np.maximum(i, j)
    srt = np.lexsort((hi_ij, lo_ij))
    return lo_ij[srt], hi_ij[srt], d[srt]
