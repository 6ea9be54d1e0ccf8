"""Hot kernels for fixed-radius neighbor search.

Two interchangeable backends: a numba ``@njit`` cell-grid scan (default) and a
chunked pure-numpy brute-force scan.  Set ``LAPCLT_DISABLE_NUMBA=1`` before
import to force the numpy path (also used automatically when numba is not
importable).  Both backends return the identical, canonically ordered pair
list; ``benchmarks/bench_graph.py`` compares their throughput.
"""

import os

import numpy as np

_DISABLE = os.environ.get("LAPCLT_DISABLE_NUMBA", "0") == "1"

if not _DISABLE:
    try:
        from numba import njit
    except ImportError:  # pragma: no cover - exercised only without numba
        _DISABLE = True

USING_NUMBA = not _DISABLE

# Cell grids pay off only in low ambient dimension: the 3^d neighbor-cell
# stencil outgrows a plain pair scan quickly.
_MAX_GRID_DIM = 6


def _brute_pairs_numpy(points, eps, chunk=2048):
    """All index pairs (i<j) with |x_i-x_j| <= eps, by blocked pair scan."""
    n = points.shape[0]
    eps2 = eps * eps
    out_i, out_j = [], []
    for start in range(0, n, chunk):
        stop = min(start + chunk, n)
        block = points[start:stop]
        # scan only columns j >= start; the i < j filter comes after
        diff = block[:, None, :] - points[None, start:, :]
        d2 = np.einsum("ijk,ijk->ij", diff, diff)
        ii, jj = np.nonzero(d2 <= eps2)
        ii = ii + start
        jj = jj + start
        keep = jj > ii
        out_i.append(ii[keep].astype(np.int64))
        out_j.append(jj[keep].astype(np.int64))
    if not out_i:
        return np.empty(0, np.int64), np.empty(0, np.int64)
    return np.concatenate(out_i), np.concatenate(out_j)


def _packed_cells(points, eps):
    """Mixed-radix packing of eps-side cell coordinates into scalar keys."""
    lo = points.min(axis=0)
    cells = np.floor((points - lo) / eps).astype(np.int64)
    spans = cells.max(axis=0) + 1
    mult = np.ones(len(spans), np.int64)
    for k in range(len(spans) - 2, -1, -1):
        mult[k] = mult[k + 1] * spans[k + 1]
    return cells @ mult, mult


if USING_NUMBA:

    @njit(cache=True)
    def _grid_pairs_jit(points, eps, order, cell_starts, unique_keys,
                        neighbor_offsets):  # pragma: no cover - jit compiled
        n_cells = unique_keys.shape[0]
        d = points.shape[1]
        eps2 = eps * eps
        cap = 256
        out_i = np.empty(cap, np.int64)
        out_j = np.empty(cap, np.int64)
        count = 0
        for c in range(n_cells):
            key = unique_keys[c]
            a0, a1 = cell_starts[c], cell_starts[c + 1]
            for off_idx in range(neighbor_offsets.shape[0]):
                nkey = key + neighbor_offsets[off_idx]
                lo, hi = 0, n_cells
                while lo < hi:
                    mid = (lo + hi) // 2
                    if unique_keys[mid] < nkey:
                        lo = mid + 1
                    else:
                        hi = mid
                if lo >= n_cells or unique_keys[lo] != nkey:
                    continue
                b0, b1 = cell_starts[lo], cell_starts[lo + 1]
                for a in range(a0, a1):
                    ia = order[a]
                    for b in range(b0, b1):
                        ib = order[b]
                        if ib <= ia:
                            continue
                        d2 = 0.0
                        for k in range(d):
                            t = points[ia, k] - points[ib, k]
                            d2 += t * t
                        if d2 <= eps2:
                            if count == cap:
                                cap *= 2
                                tmp_i = np.empty(cap, np.int64)
                                tmp_j = np.empty(cap, np.int64)
                                tmp_i[:count] = out_i[:count]
                                tmp_j[:count] = out_j[:count]
                                out_i = tmp_i
                                out_j = tmp_j
                            out_i[count] = ia
                            out_j[count] = ib
                            count += 1
        return out_i[:count], out_j[:count]

    def _grid_pairs(points, eps):
        keys, mult = _packed_cells(points, eps)
        order = np.argsort(keys, kind="stable").astype(np.int64)
        keys_sorted = keys[order]
        unique_keys, starts = np.unique(keys_sorted, return_index=True)
        cell_starts = np.append(starts, len(keys_sorted)).astype(np.int64)
        d = points.shape[1]
        shifts = np.array(
            np.meshgrid(*([[-1, 0, 1]] * d), indexing="ij")
        ).reshape(d, -1).T
        # distinct shift vectors can pack to the same key offset when a grid
        # span is < 3; keys hit via such wrapped offsets either coincide with
        # the true neighbor cell or lie > eps away and are distance-filtered
        offsets = np.unique(shifts @ mult)
        return _grid_pairs_jit(points, float(eps), order, cell_starts,
                               unique_keys, offsets.astype(np.int64))

else:

    def _grid_pairs(points, eps):
        return _brute_pairs_numpy(points, eps)


def neighbor_pairs(points, eps):
    """Index pairs (i, j), i < j, with ambient distance <= eps.

    Returns (i, j, dist) arrays sorted lexicographically by (i, j); the
    ordering is independent of backend and schedule.
    """
    points = np.ascontiguousarray(points, dtype=np.float64)
    n, d = points.shape
    if n < 2:
        return (np.empty(0, np.int64), np.empty(0, np.int64),
                np.empty(0, np.float64))
    if d > _MAX_GRID_DIM or not USING_NUMBA:
        ii, jj = _brute_pairs_numpy(points, eps)
    else:
        ii, jj = _grid_pairs(points, eps)
    order = np.lexsort((jj, ii))
    ii, jj = ii[order], jj[order]
    diff = points[ii] - points[jj]
    dist = np.sqrt(np.einsum("ij,ij->i", diff, diff))
    return ii, jj, dist
