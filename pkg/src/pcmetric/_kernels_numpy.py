"""Pure-numpy fallback kernels.

Mirror of ``_kernels_numba``: identical signatures and identical results.
Traversal control flow runs in Python while leaf scans and the PCA step are
vectorized, so the fallback is correct everywhere numpy runs, just slower
on large clouds (see benchmarks/compare_backends.py).
"""

from __future__ import annotations

import numpy as np

from ._kernels_common import DEGENERATE_COV_TOL, EIG_TIE_RTOL


def _bbox_sqdist(bb_min, bb_max, nid, q):
    lo = bb_min[nid] - q
    hi = q - bb_max[nid]
    d = 0.0
    for ax in range(3):
        v = lo[ax]
        if v > 0.0:
            d += v * v
        v = hi[ax]
        if v > 0.0:
            d += v * v
    return d


def _leaf_sqdist(points, seg, q):
    # same association as the compiled kernel: (dx^2 + dy^2) + dz^2
    dx = points[seg, 0] - q[0]
    dy = points[seg, 1] - q[1]
    dz = points[seg, 2] - q[2]
    return dx * dx + dy * dy + dz * dz


def nearest_batch(points, perm, left, right, start, end, bb_min, bb_max, queries):
    m = queries.shape[0]
    out_idx = np.empty(m, dtype=np.int64)
    out_dist = np.empty(m, dtype=np.float64)
    for qi in range(m):
        q = queries[qi]
        best = np.inf
        best_idx = -1
        stack = [0]
        while stack:
            nid = stack.pop()
            if _bbox_sqdist(bb_min, bb_max, nid, q) > best:
                continue
            lc = left[nid]
            if lc < 0:
                seg = perm[start[nid] : end[nid]]
                d = _leaf_sqdist(points, seg, q)
                lo = d.min()
                if lo < best:
                    best = lo
                    best_idx = int(seg[d == lo].min())
                elif lo == best:
                    cand = int(seg[d == lo].min())
                    if cand < best_idx:
                        best_idx = cand
            else:
                rc = right[nid]
                dl = _bbox_sqdist(bb_min, bb_max, lc, q)
                dr = _bbox_sqdist(bb_min, bb_max, rc, q)
                if dl <= dr:
                    if dr <= best:
                        stack.append(rc)
                    stack.append(lc)
                else:
                    if dl <= best:
                        stack.append(lc)
                    stack.append(rc)
        out_idx[qi] = best_idx
        out_dist[qi] = best
    return out_idx, out_dist


def knn_batch(points, perm, left, right, start, end, bb_min, bb_max, queries, k, exclude):
    m = queries.shape[0]
    out_idx = np.empty((m, k), dtype=np.int64)
    out_dist = np.empty((m, k), dtype=np.float64)
    sentinel = points.shape[0]
    for qi in range(m):
        q = queries[qi]
        skip = exclude[qi]
        nd = np.full(k, np.inf)
        ni = np.full(k, sentinel, dtype=np.int64)
        stack = [0]
        while stack:
            nid = stack.pop()
            if _bbox_sqdist(bb_min, bb_max, nid, q) > nd[k - 1]:
                continue
            lc = left[nid]
            if lc < 0:
                seg = perm[start[nid] : end[nid]]
                if skip >= 0:
                    seg = seg[seg != skip]
                    if seg.size == 0:
                        continue
                d = _leaf_sqdist(points, seg, q)
                merged_d = np.concatenate([nd, d])
                merged_i = np.concatenate([ni, seg])
                order = np.lexsort((merged_i, merged_d))[:k]
                nd = merged_d[order]
                ni = merged_i[order]
            else:
                rc = right[nid]
                dl = _bbox_sqdist(bb_min, bb_max, lc, q)
                dr = _bbox_sqdist(bb_min, bb_max, rc, q)
                worst = nd[k - 1]
                if dl <= dr:
                    if dr <= worst:
                        stack.append(rc)
                    stack.append(lc)
                else:
                    if dl <= worst:
                        stack.append(lc)
                    stack.append(rc)
        out_idx[qi] = ni
        out_dist[qi] = nd
    return out_idx, out_dist


def _canonical_sign(vectors):
    """Flip each row so its largest-magnitude component is positive."""
    lead = np.take_along_axis(
        vectors, np.abs(vectors).argmax(axis=1)[:, None], axis=1
    )[:, 0]
    return vectors * np.where(lead < 0.0, -1.0, 1.0)[:, None]


def pca_normals(points, neighbor_idx):
    nbrs = points[neighbor_idx]  # (n, k, 3)
    centered = nbrs - nbrs.mean(axis=1, keepdims=True)
    cov = np.einsum("nki,nkj->nij", centered, centered)  # scatter matrix, not /k
    frob = np.sqrt((cov * cov).sum(axis=(1, 2)))
    flags = (frob < DEGENERATE_COV_TOL).astype(np.uint8)

    safe = cov.copy()
    safe[flags == 1] = np.eye(3)
    w, v = np.linalg.eigh(safe)  # ascending eigenvalues, eigenvectors in columns
    normals = _canonical_sign(v[:, :, 0].copy())

    # eigenvalue ties: pick the lexicographically smallest candidate vector
    scale = np.maximum(np.abs(w[:, 2]), 1e-300)
    tied = w[:, 1] <= w[:, 0] + EIG_TIE_RTOL * scale
    for i in np.flatnonzero(tied):
        tol = EIG_TIE_RTOL * scale[i]
        cand = [v[i, :, j] for j in range(3) if w[i, j] <= w[i, 0] + tol]
        cand = _canonical_sign(np.asarray(cand))
        normals[i] = min(map(tuple, cand))

    normals /= np.linalg.norm(normals, axis=1, keepdims=True)
    normals[flags == 1] = 0.0
    return normals, flags
