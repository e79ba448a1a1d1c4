"""Hot inner loops.

Every public kernel has a compiled path (numba) and a fallback. The fallback
for :func:`insertion_scan` is a vectorised numpy expression; the sequencing
search has no sensible vectorised form, so its fallback is the same loop run
by the interpreter.
"""
import numpy as np

from ._accel import USE_NUMBA, njit

# search status codes
SEARCH_DONE = 0
SEARCH_BUDGET = 1

# memo tables are 2**k * k entries; above this the search runs without one
MAX_MEMO_NODES = 18


@njit
def _insertion_scan_loop(xs, ys, nx, ny):
    best = np.inf
    best_pos = 1
    for p in range(1, xs.shape[0]):
        ax = xs[p - 1]
        ay = ys[p - 1]
        bx = xs[p]
        by = ys[p]
        added = (abs(ax - nx) + abs(ay - ny) + abs(nx - bx) + abs(ny - by)
                 - abs(ax - bx) - abs(ay - by))
        if added < best:
            best = added
            best_pos = p
    return best, best_pos


def _insertion_scan_numpy(xs, ys, nx, ny):
    ax, ay = xs[:-1], ys[:-1]
    bx, by = xs[1:], ys[1:]
    added = (np.abs(ax - nx) + np.abs(ay - ny) + np.abs(nx - bx) + np.abs(ny - by)
             - np.abs(ax - bx) - np.abs(ay - by))
    p = int(np.argmin(added))  # argmin returns the first minimum
    return added[p], p + 1


def insertion_scan(xs, ys, nx, ny):
    """Cheapest insertion of ``(nx, ny)`` into the polyline ``xs, ys``.

    Returns ``(added_length, position)``; ``position`` is the index the new
    stop would take in the route (1 .. len-1). Earliest position wins ties.
    """
    if USE_NUMBA:
        cost, pos = _insertion_scan_loop(xs, ys, nx, ny)
    else:
        cost, pos = _insertion_scan_numpy(xs, ys, nx, ny)
    return int(cost), int(pos)


@njit
def route_length_xy(xs, ys):
    total = 0
    for p in range(1, xs.shape[0]):
        total += abs(xs[p] - xs[p - 1]) + abs(ys[p] - ys[p - 1])
    return total


@njit
def sequence_search(dist, deadline, needs_pickup, p_local, start_time, service,
                    travel_time, soft, use_memo,
                    path, cand, dist_at, time_at, late_at, mask_at, depth_box,
                    best_path, best_val, memo_late, memo_dist, budget):
    """Resumable depth-first search for the shortest deadline-feasible path.

    Local node layout: 0 is the start, ``1..k`` must all be visited, ``k+1``
    is the return node. ``needs_pickup[j]`` forces ``p_local`` to be visited
    before ``j``. Arrival at ``j`` from ``i`` is ``B_i + service +
    dist[i, j] * travel_time``; ``deadline[k+1]`` bounds the return.

    In hard mode any lateness prunes. In soft mode lateness is summed and
    the search minimises ``(total lateness, distance)`` lexicographically.

    All search state lives in the passed arrays, so a call that runs out of
    ``budget`` expansions returns ``SEARCH_BUDGET`` and can be resumed by
    calling again with the same arrays. ``best_val`` holds
    ``(lateness, distance, path_len)`` of the incumbent.
    """
    n = dist.shape[0]
    k = n - 2
    ret = n - 1
    full = (1 << k) - 1
    p_bit = 1 << (p_local - 1)
    depth = depth_box[0]
    used = 0
    while depth >= 0:
        if used >= budget:
            depth_box[0] = depth
            return SEARCH_BUDGET
        cur = path[depth]
        mask = mask_at[depth]
        j = cand[depth]
        # next admissible candidate
        while j <= k:
            bit = 1 << (j - 1)
            if (mask & bit) == 0 and (not needs_pickup[j] or (mask & p_bit) != 0):
                break
            j += 1
        if j > k:
            depth -= 1
            continue
        cand[depth] = j + 1
        used += 1

        ndist = dist_at[depth] + dist[cur, j]
        ntime = time_at[depth] + service + dist[cur, j] * travel_time
        late = ntime - deadline[j]
        if late <= 0.0:
            late = 0.0
        elif not soft:
            continue
        nlate = late_at[depth] + late
        nmask = mask | (1 << (j - 1))

        # distance lower bound: some remaining node, then home
        lb = dist[j, ret]
        prune = False
        for u in range(1, k + 1):
            if (nmask & (1 << (u - 1))) != 0:
                continue
            via = dist[j, u] + dist[u, ret]
            if via > lb:
                lb = via
            if not soft:
                if needs_pickup[u] and (nmask & p_bit) == 0:
                    arr = (ntime + 2.0 * service
                           + (dist[j, p_local] + dist[p_local, u]) * travel_time)
                else:
                    arr = ntime + service + dist[j, u] * travel_time
                if arr > deadline[u]:
                    prune = True
                    break
        if prune:
            continue
        if not soft and ntime + service + dist[j, ret] * travel_time > deadline[ret]:
            continue
        if nlate > best_val[0] or (nlate == best_val[0] and ndist + lb >= best_val[1]):
            continue

        if use_memo:
            idx = nmask * k + (j - 1)
            if memo_late[idx] <= nlate and memo_dist[idx] <= ndist:
                continue
            if nlate < memo_late[idx] or (nlate == memo_late[idx] and ndist < memo_dist[idx]):
                memo_late[idx] = nlate
                memo_dist[idx] = ndist

        if nmask == full:
            total = ndist + dist[j, ret]
            rtime = ntime + service + dist[j, ret] * travel_time
            rlate = rtime - deadline[ret]
            if rlate <= 0.0:
                rlate = 0.0
            elif not soft:
                continue
            tl = nlate + rlate
            if tl < best_val[0] or (tl == best_val[0] and total < best_val[1]):
                best_val[0] = tl
                best_val[1] = total
                for q in range(depth + 1):
                    best_path[q] = path[q]
                best_path[depth + 1] = j
                best_path[depth + 2] = ret
                best_val[2] = depth + 3
            continue

        depth += 1
        path[depth] = j
        cand[depth] = 1
        mask_at[depth] = nmask
        dist_at[depth] = ndist
        time_at[depth] = ntime
        late_at[depth] = nlate
    depth_box[0] = -1
    return SEARCH_DONE


# float32 moments that decay toward zero, and squares of tiny gradients, go
# subnormal and every multiply on them runs ~50x slower; flush them first
_FLUSH = 1e-30
_GRAD_FLUSH = 1e-15


@njit(fastmath=True)
def _adam_loop(p, g, m, v, scale, b1, b2, eps):
    s = np.float32(scale)
    c1 = np.float32(b1)
    c2 = np.float32(b2)
    e = np.float32(eps)
    d1 = np.float32(1.0) - c1
    d2 = np.float32(1.0) - c2
    fl = np.float32(_FLUSH)
    gf = np.float32(_GRAD_FLUSH)
    zero = np.float32(0.0)
    for i in range(p.shape[0]):
        gi = g[i]
        gi = gi if abs(gi) >= gf else zero
        mi = c1 * m[i] + d1 * gi
        mi = mi if abs(mi) >= fl else zero
        vi = c2 * v[i] + d2 * gi * gi
        vi = vi if vi >= fl else zero
        m[i] = mi
        v[i] = vi
        p[i] -= s * mi / (np.sqrt(vi) + e)


def _adam_numpy(p, g, m, v, scale, b1, b2, eps):
    g = np.where(np.abs(g) < _GRAD_FLUSH, 0.0, g).astype(p.dtype)
    m *= b1
    m += (1.0 - b1) * g
    m[np.abs(m) < _FLUSH] = 0.0
    v *= b2
    v += (1.0 - b2) * (g * g)
    v[v < _FLUSH] = 0.0
    p -= scale * m / (np.sqrt(v) + eps)


def adam_update(p, g, m, v, scale, b1, b2, eps):
    """In-place Adam step on flat views; ``scale`` already folds in bias correction."""
    if USE_NUMBA:
        _adam_loop(p.reshape(-1), g.reshape(-1), m.reshape(-1), v.reshape(-1), scale, b1, b2, eps)
    else:
        _adam_numpy(p, g, m, v, scale, b1, b2, eps)


# -- small-batch inference ---------------------------------------------------

@njit(fastmath=True)
def _dense_rows_loop(flat, widths, x, out):
    """ReLU MLP on a few rows, skipping zero inputs; one call per decision point.

    ``flat`` holds ``w0, b0, w1, b1, ...`` with each ``w`` stored as
    ``(fan_in, fan_out)`` row-major. Observations are mostly one-hot flags,
    so most first-layer rows are never touched.
    """
    n_layers = widths.shape[0] - 1
    width = 0
    for l in range(1, n_layers + 1):
        width = max(width, widths[l])
    a = np.empty(width, dtype=out.dtype)
    b = np.empty(width, dtype=out.dtype)
    for r in range(x.shape[0]):
        src = x[r]
        k = 0
        for l in range(n_layers):
            fan_in = widths[l]
            fan_out = widths[l + 1]
            dst = a if l % 2 == 0 else b
            w = flat[k:k + fan_in * fan_out].reshape((fan_in, fan_out))
            k += fan_in * fan_out
            bias = flat[k:k + fan_out]
            k += fan_out
            for j in range(fan_out):
                dst[j] = bias[j]
            for i in range(fan_in):
                xi = src[i]
                if xi != 0.0:
                    for j in range(fan_out):
                        dst[j] += xi * w[i, j]
            if l < n_layers - 1:
                for j in range(fan_out):
                    if dst[j] < 0.0:
                        dst[j] = 0.0
            src = dst[:fan_out]
        out[r, :] = src


def _dense_rows_numpy(flat, widths, x, out):
    h = x
    k = 0
    last = len(widths) - 2
    for l in range(last + 1):
        fan_in, fan_out = int(widths[l]), int(widths[l + 1])
        w = flat[k:k + fan_in * fan_out].reshape(fan_in, fan_out)
        k += fan_in * fan_out
        h = h @ w + flat[k:k + fan_out]
        k += fan_out
        if l < last:
            np.maximum(h, 0, out=h)
    out[:] = h


def dense_rows(flat, widths, x):
    """Q-values for a small batch ``x`` of shape ``(rows, widths[0])``."""
    out = np.empty((x.shape[0], int(widths[-1])), dtype=x.dtype)
    if USE_NUMBA:
        _dense_rows_loop(flat, widths, x, out)
    else:
        _dense_rows_numpy(flat, widths, x, out)
    return out
