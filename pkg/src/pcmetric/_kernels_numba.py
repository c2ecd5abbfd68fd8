"""numba @njit kernels: batched exact 1-NN / k-NN and local-PCA normals.

Same contracts as ``_kernels_numpy``; candidates are selected by the
lexicographic (squared_distance, point_index) minimum so ties resolve to
the lowest index regardless of traversal order. No fastmath: distances
must match plain float64 arithmetic bit for bit.
"""

from __future__ import annotations

import numpy as np
from numba import njit

from ._kernels_common import DEGENERATE_COV_TOL, EIG_CONVERGENCE_TOL, EIG_TIE_RTOL

_STACK = 128  # tree depth bound; splits halve the count, so 128 is generous


@njit(cache=True, nogil=True)
def _bbox_sqdist(bb_min, bb_max, nid, qx, qy, qz):
    d = 0.0
    v = bb_min[nid, 0] - qx
    if v > 0.0:
        d += v * v
    v = qx - bb_max[nid, 0]
    if v > 0.0:
        d += v * v
    v = bb_min[nid, 1] - qy
    if v > 0.0:
        d += v * v
    v = qy - bb_max[nid, 1]
    if v > 0.0:
        d += v * v
    v = bb_min[nid, 2] - qz
    if v > 0.0:
        d += v * v
    v = qz - bb_max[nid, 2]
    if v > 0.0:
        d += v * v
    return d


@njit(cache=True, nogil=True)
def _nearest_batch(points, perm, left, right, start, end, bb_min, bb_max, queries, out_idx, out_dist):
    stack = np.empty(_STACK, dtype=np.int32)
    for qi in range(queries.shape[0]):
        qx = queries[qi, 0]
        qy = queries[qi, 1]
        qz = queries[qi, 2]
        best = np.inf
        best_idx = -1
        top = 1
        stack[0] = 0
        while top > 0:
            top -= 1
            nid = stack[top]
            # prune only on strict excess: equal-distance boxes may hold a
            # lower-index tie
            if _bbox_sqdist(bb_min, bb_max, nid, qx, qy, qz) > best:
                continue
            lc = left[nid]
            if lc < 0:
                for j in range(start[nid], end[nid]):
                    p = perm[j]
                    dx = points[p, 0] - qx
                    dy = points[p, 1] - qy
                    dz = points[p, 2] - qz
                    dd = dx * dx + dy * dy + dz * dz
                    if dd < best or (dd == best and p < best_idx):
                        best = dd
                        best_idx = p
            else:
                rc = right[nid]
                dl = _bbox_sqdist(bb_min, bb_max, lc, qx, qy, qz)
                dr = _bbox_sqdist(bb_min, bb_max, rc, qx, qy, qz)
                # push the farther child first so the nearer one is popped first
                if dl <= dr:
                    if dr <= best:
                        stack[top] = rc
                        top += 1
                    stack[top] = lc
                    top += 1
                else:
                    if dl <= best:
                        stack[top] = lc
                        top += 1
                    stack[top] = rc
                    top += 1
        out_idx[qi] = best_idx
        out_dist[qi] = best


def nearest_batch(points, perm, left, right, start, end, bb_min, bb_max, queries):
    m = queries.shape[0]
    out_idx = np.empty(m, dtype=np.int64)
    out_dist = np.empty(m, dtype=np.float64)
    _nearest_batch(points, perm, left, right, start, end, bb_min, bb_max, queries, out_idx, out_dist)
    return out_idx, out_dist


@njit(cache=True, nogil=True)
def _knn_batch(points, perm, left, right, start, end, bb_min, bb_max, queries, k, exclude, out_idx, out_dist):
    stack = np.empty(_STACK, dtype=np.int32)
    nd = np.empty(k, dtype=np.float64)
    ni = np.empty(k, dtype=np.int64)
    sentinel = points.shape[0]  # larger than any real index
    for qi in range(queries.shape[0]):
        qx = queries[qi, 0]
        qy = queries[qi, 1]
        qz = queries[qi, 2]
        skip = exclude[qi]
        for j in range(k):
            nd[j] = np.inf
            ni[j] = sentinel
        top = 1
        stack[0] = 0
        while top > 0:
            top -= 1
            nid = stack[top]
            if _bbox_sqdist(bb_min, bb_max, nid, qx, qy, qz) > nd[k - 1]:
                continue
            lc = left[nid]
            if lc < 0:
                for j in range(start[nid], end[nid]):
                    p = perm[j]
                    if p == skip:
                        continue
                    dx = points[p, 0] - qx
                    dy = points[p, 1] - qy
                    dz = points[p, 2] - qz
                    dd = dx * dx + dy * dy + dz * dz
                    if dd < nd[k - 1] or (dd == nd[k - 1] and p < ni[k - 1]):
                        pos = k - 1
                        while pos > 0 and (
                            nd[pos - 1] > dd or (nd[pos - 1] == dd and ni[pos - 1] > p)
                        ):
                            nd[pos] = nd[pos - 1]
                            ni[pos] = ni[pos - 1]
                            pos -= 1
                        nd[pos] = dd
                        ni[pos] = p
            else:
                rc = right[nid]
                dl = _bbox_sqdist(bb_min, bb_max, lc, qx, qy, qz)
                dr = _bbox_sqdist(bb_min, bb_max, rc, qx, qy, qz)
                worst = nd[k - 1]
                if dl <= dr:
                    if dr <= worst:
                        stack[top] = rc
                        top += 1
                    stack[top] = lc
                    top += 1
                else:
                    if dl <= worst:
                        stack[top] = lc
                        top += 1
                    stack[top] = rc
                    top += 1
        for j in range(k):
            out_idx[qi, j] = ni[j]
            out_dist[qi, j] = nd[j]


def knn_batch(points, perm, left, right, start, end, bb_min, bb_max, queries, k, exclude):
    m = queries.shape[0]
    out_idx = np.empty((m, k), dtype=np.int64)
    out_dist = np.empty((m, k), dtype=np.float64)
    _knn_batch(points, perm, left, right, start, end, bb_min, bb_max, queries, k, exclude, out_idx, out_dist)
    return out_idx, out_dist


@njit(cache=True, nogil=True)
def _jacobi_eigh3(a, v, w):
    """Eigen-decompose a symmetric 3x3 in place: a is destroyed, v gets
    eigenvectors (columns), w eigenvalues. Converges when the off-diagonal
    norm drops below EIG_CONVERGENCE_TOL times the Frobenius norm."""
    for i in range(3):
        for j in range(3):
            v[i, j] = 1.0 if i == j else 0.0
    frob = 0.0
    for i in range(3):
        for j in range(3):
            frob += a[i, j] * a[i, j]
    frob = np.sqrt(frob)
    if frob == 0.0:
        for i in range(3):
            w[i] = 0.0
        return
    for _ in range(64):
        off = np.sqrt(
            a[0, 1] * a[0, 1] + a[0, 2] * a[0, 2] + a[1, 2] * a[1, 2]
        )
        if off <= EIG_CONVERGENCE_TOL * frob:
            break
        for p in range(2):
            for q in range(p + 1, 3):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = 1.0 / (abs(theta) + np.sqrt(theta * theta + 1.0))
                if theta < 0.0:
                    t = -t
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                for i in range(3):
                    aip = a[i, p]
                    aiq = a[i, q]
                    a[i, p] = c * aip - s * aiq
                    a[i, q] = s * aip + c * aiq
                for i in range(3):
                    api = a[p, i]
                    aqi = a[q, i]
                    a[p, i] = c * api - s * aqi
                    a[q, i] = s * api + c * aqi
                for i in range(3):
                    vip = v[i, p]
                    viq = v[i, q]
                    v[i, p] = c * vip - s * viq
                    v[i, q] = s * vip + c * viq
    for i in range(3):
        w[i] = a[i, i]


@njit(cache=True, nogil=True)
def _pick_smallest_axis(w, v, out, row):
    """Smallest-eigenvalue eigenvector, sign-canonicalized; eigenvalue ties
    resolve to the lexicographically smallest vector."""
    # ascending order of the three eigenvalues
    i0, i1, i2 = 0, 1, 2
    if w[i0] > w[i1]:
        i0, i1 = i1, i0
    if w[i1] > w[i2]:
        i1, i2 = i2, i1
    if w[i0] > w[i1]:
        i0, i1 = i1, i0
    scale = abs(w[i2])
    if scale < 1.0e-300:
        scale = 1.0e-300
    tol = EIG_TIE_RTOL * scale

    bx = np.inf
    by = np.inf
    bz = np.inf
    for ci in range(3):
        idx = i0 if ci == 0 else (i1 if ci == 1 else i2)
        if w[idx] > w[i0] + tol:
            continue
        x = v[0, idx]
        y = v[1, idx]
        z = v[2, idx]
        # sign: make the largest-magnitude component positive
        ax, ay, az = abs(x), abs(y), abs(z)
        if ax >= ay and ax >= az:
            flip = x < 0.0
        elif ay >= az:
            flip = y < 0.0
        else:
            flip = z < 0.0
        if flip:
            x, y, z = -x, -y, -z
        if (x < bx) or (x == bx and (y < by or (y == by and z < bz))):
            bx, by, bz = x, y, z
    out[row, 0] = bx
    out[row, 1] = by
    out[row, 2] = bz


@njit(cache=True, nogil=True)
def _pca_normals(points, neighbor_idx, out, flags):
    n = neighbor_idx.shape[0]
    k = neighbor_idx.shape[1]
    a = np.empty((3, 3), dtype=np.float64)
    v = np.empty((3, 3), dtype=np.float64)
    w = np.empty(3, dtype=np.float64)
    for i in range(n):
        cx = 0.0
        cy = 0.0
        cz = 0.0
        for j in range(k):
            p = neighbor_idx[i, j]
            cx += points[p, 0]
            cy += points[p, 1]
            cz += points[p, 2]
        cx /= k
        cy /= k
        cz /= k
        sxx = 0.0
        sxy = 0.0
        sxz = 0.0
        syy = 0.0
        syz = 0.0
        szz = 0.0
        for j in range(k):
            p = neighbor_idx[i, j]
            dx = points[p, 0] - cx
            dy = points[p, 1] - cy
            dz = points[p, 2] - cz
            sxx += dx * dx
            sxy += dx * dy
            sxz += dx * dz
            syy += dy * dy
            syz += dy * dz
            szz += dz * dz
        frob = np.sqrt(
            sxx * sxx + syy * syy + szz * szz + 2.0 * (sxy * sxy + sxz * sxz + syz * syz)
        )
        if frob < DEGENERATE_COV_TOL:
            flags[i] = 1
            out[i, 0] = 0.0
            out[i, 1] = 0.0
            out[i, 2] = 0.0
            continue
        a[0, 0] = sxx
        a[0, 1] = sxy
        a[0, 2] = sxz
        a[1, 0] = sxy
        a[1, 1] = syy
        a[1, 2] = syz
        a[2, 0] = sxz
        a[2, 1] = syz
        a[2, 2] = szz
        _jacobi_eigh3(a, v, w)
        _pick_smallest_axis(w, v, out, i)
        # renormalize: Jacobi rotations keep columns orthonormal to fp noise
        nx = out[i, 0]
        ny = out[i, 1]
        nz = out[i, 2]
        norm = np.sqrt(nx * nx + ny * ny + nz * nz)
        out[i, 0] = nx / norm
        out[i, 1] = ny / norm
        out[i, 2] = nz / norm
        flags[i] = 0


def pca_normals(points, neighbor_idx):
    n = neighbor_idx.shape[0]
    out = np.empty((n, 3), dtype=np.float64)
    flags = np.zeros(n, dtype=np.uint8)
    _pca_normals(points, np.ascontiguousarray(neighbor_idx), out, flags)
    return out, flags
