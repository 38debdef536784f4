"""Compiled hot-path kernels with interchangeable pure-Python fallbacks.

Every kernel is written so the fallback produces identical results:
accumulations run in the same order, in the same precision. The compiled
versions only exist to keep the grouping step inside its latency budget.

Token rows live in two tiers: the read-only base matrix (float32 or
float64, exactly as the caller supplied it) and a float64 overlay holding
the rows rewritten by merges, with ``touched`` flagging which tier a row
lives in. Exact arithmetic always runs in float64; reading an untouched
base row upcasts losslessly, so the tiering never changes a value.
"""

from __future__ import annotations

import numpy as np

try:
    import numba as _nb

    HAVE_NUMBA = True
except Exception:  # pragma: no cover - exercised only without numba
    _nb = None
    HAVE_NUMBA = False

_MASK64 = (1 << 64) - 1


def _py_row_norms(base):
    """Epsilon-floored float64 row norms of the base matrix."""
    n, dim = base.shape
    norms = np.empty(n)
    for i in range(n):
        acc = 0.0
        for c in range(dim):
            v = float(base[i, c])
            acc += v * v
        nrm = np.sqrt(acc)
        norms[i] = nrm if nrm > 1e-12 else 1e-12
    return norms


def _py_stage_pair(base):
    """One-pass staging: the float32 cast of the base plus its row norms."""
    rows32 = base.astype(np.float32)
    return rows32, _py_row_norms(base)


def _py_pair_dot(base, overlay, touched, i, j):
    dim = base.shape[1]
    acc = 0.0
    if touched[i]:
        if touched[j]:
            for c in range(dim):
                acc += overlay[i, c] * overlay[j, c]
        else:
            for c in range(dim):
                acc += overlay[i, c] * float(base[j, c])
    else:
        if touched[j]:
            for c in range(dim):
                acc += float(base[i, c]) * overlay[j, c]
        else:
            for c in range(dim):
                acc += float(base[i, c]) * float(base[j, c])
    return acc


def _py_prescreen(raw, norms, a_ids, b_ids, pre):
    """Fill ``pre`` with norm-normalized prescreen scores and return the
    per-row maxima. Prescreen values only gate candidacy: any rounding is
    absorbed by the error band."""
    n_a, n_b = raw.shape
    pre_best = np.empty(n_a)
    inv_b = np.empty(n_b)
    for j in range(n_b):
        inv_b[j] = 1.0 / norms[b_ids[j]]
    for i in range(n_a):
        inv_a = 1.0 / norms[a_ids[i]]
        for j in range(n_b):
            pre[i, j] = raw[i, j] * (inv_a * inv_b[j])
        m = pre[i, 0]
        for j in range(1, n_b):
            if pre[i, j] > m:
                m = pre[i, j]
        pre_best[i] = m
    return pre_best


def _py_select_exact(pre, pre_best, base, overlay, touched, norms, a_ids, b_ids, top_k, band):
    """Exact-selection pass over the prescreen scores.

    Sources whose prescreen best is two bands below the ``top_k``-th
    largest keep a -inf similarity (they provably cannot enter the exact
    top ``top_k``); every other source re-scores all destinations within
    ``band`` of its prescreen maximum with sequential float64 dot products
    (ties: lowest destination position).
    """
    n_a, n_b = pre.shape
    best_pos = np.zeros(n_a, dtype=np.int64)
    best_sim = np.full(n_a, -np.inf)
    if top_k >= n_a:
        threshold = -np.inf
    else:
        threshold = np.partition(pre_best, n_a - top_k)[n_a - top_k] - 2.0 * band
    for i in range(n_a):
        if pre_best[i] < threshold:
            continue
        ai = a_ids[i]
        na = norms[ai]
        cut = pre_best[i] - band
        best = -1.0e300
        best_j = 0
        for j in range(n_b):
            if pre[i, j] >= cut:
                bj = b_ids[j]
                exact = _py_pair_dot(base, overlay, touched, ai, bj) / (na * norms[bj])
                if exact > best:
                    best = exact
                    best_j = j
        best_sim[i] = best
        best_pos[i] = best_j
    return best_sim, best_pos


def _py_best_counterparts(raw, base, overlay, touched, norms, a_ids, b_ids, top_k, band):
    """Selection core: prescreen then exact re-scoring (see the two
    halves above)."""
    pre = np.empty(raw.shape)
    pre_best = _py_prescreen(raw, norms, a_ids, b_ids, pre)
    return _py_select_exact(
        pre, pre_best, base, overlay, touched, norms, a_ids, b_ids, top_k, band
    )


def _py_sequential_weighted_merge(base, overlay, touched, rows32, norms, weights, src, dst, eps):
    """Running flat means, merges grouped by destination.

    (src, dst) must arrive sorted by destination (then source); each
    destination's merges chain in order and its overlay, staging row, and
    norm are refreshed once at the end of the run.
    """
    dim = base.shape[1]
    n = src.shape[0]
    i = 0
    while i < n:
        d = dst[i]
        j = i
        while j < n and dst[j] == d:
            j += 1
        for t in range(i, j):
            s = src[t]
            ws = float(weights[s])
            wd = float(weights[d])
            tot = 1.0 / (ws + wd)
            if touched[d]:
                if touched[s]:
                    for c in range(dim):
                        overlay[d, c] = (wd * overlay[d, c] + ws * overlay[s, c]) * tot
                else:
                    for c in range(dim):
                        overlay[d, c] = (wd * overlay[d, c] + ws * float(base[s, c])) * tot
            else:
                if touched[s]:
                    for c in range(dim):
                        overlay[d, c] = (wd * float(base[d, c]) + ws * overlay[s, c]) * tot
                else:
                    for c in range(dim):
                        overlay[d, c] = (wd * float(base[d, c]) + ws * float(base[s, c])) * tot
                touched[d] = True
            weights[d] = weights[d] + weights[s]
        acc = 0.0
        for c in range(dim):
            v = overlay[d, c]
            rows32[d, c] = np.float32(v)
            acc += v * v
        nrm = np.sqrt(acc)
        norms[d] = nrm if nrm > eps else eps
        i = j


def _py_round_uniform_merge(base, overlay, touched, rows32, norms, weights, src, dst, eps):
    """Per-round unweighted means; (src, dst) must arrive sorted by
    destination (then source) so runs of one destination are contiguous."""
    dim = base.shape[1]
    n = src.shape[0]
    i = 0
    while i < n:
        d = dst[i]
        j = i
        while j < n and dst[j] == d:
            j += 1
        cnt = float(j - i)
        for c in range(dim):
            acc = overlay[d, c] if touched[d] else float(base[d, c])
            for t in range(i, j):
                s = src[t]
                acc += overlay[s, c] if touched[s] else float(base[s, c])
            overlay[d, c] = acc / (cnt + 1.0)
        touched[d] = True
        wsum = weights[d]
        for t in range(i, j):
            wsum += weights[src[t]]
        weights[d] = wsum
        acc2 = 0.0
        for c in range(dim):
            v = overlay[d, c]
            rows32[d, c] = np.float32(v)
            acc2 += v * v
        nrm = np.sqrt(acc2)
        norms[d] = nrm if nrm > eps else eps
        i = j


def _py_group_means(order, starts, weights, tokens, out):
    """Per-group means into ``out`` (any float dtype).

    ``order`` lists token rows grouped by group id (ascending within a
    group), ``starts[g]:starts[g+1]`` delimiting group g. Accumulation is
    float64 per group; only the final mean is cast to the output dtype.
    """
    dim = tokens.shape[1]
    acc = np.empty(dim)
    for g in range(out.shape[0]):
        for c in range(dim):
            acc[c] = 0.0
        for t in range(starts[g], starts[g + 1]):
            j = order[t]
            for c in range(dim):
                acc[c] += float(tokens[j, c])
        w = float(weights[g])
        for c in range(dim):
            out[g, c] = acc[c] / w


def _py_first_occurrence_labels(root):
    """Dense relabeling of arbitrary ids in first-occurrence order."""
    n = root.shape[0]
    out = np.empty(n, dtype=np.int64)
    label_of = np.full(n, -1, dtype=np.int64)
    nxt = 0
    for j in range(n):
        r = root[j]
        if label_of[r] < 0:
            label_of[r] = nxt
            nxt += 1
        out[j] = label_of[r]
    return out


def _py_resolve_labels(parent):
    """Follow parent chains to their roots and relabel the roots densely
    in first-occurrence order."""
    n = parent.shape[0]
    out = np.empty(n, dtype=np.int64)
    label_of = np.full(n, -1, dtype=np.int64)
    nxt = 0
    for j in range(n):
        r = parent[j]
        while parent[r] != r:
            r = parent[r]
        if label_of[r] < 0:
            label_of[r] = nxt
            nxt += 1
        out[j] = label_of[r]
    return out


def _py_finish_round(best_sim, best_pos, a_ids, b_ids, r, alive, parent):
    """Select the top-r sources, record their parents, and compact alive.

    Returns (src, dst, new_alive) with the merge pairs sorted by
    (destination, source) for the representative-update kernels. Selection
    order is (similarity desc, source position asc), matching the public
    matching round.
    """
    n_a = best_sim.shape[0]
    take = min(r, n_a)
    order = np.argsort(-best_sim, kind="mergesort")
    src = np.empty(take, dtype=np.int64)
    dst = np.empty(take, dtype=np.int64)
    for t in range(take):
        i = order[t]
        src[t] = a_ids[i]
        dst[t] = b_ids[best_pos[i]]
        parent[src[t]] = dst[t]
    n_total = parent.shape[0]
    pair_order = np.argsort(dst * n_total + src, kind="mergesort")
    src = src[pair_order]
    dst = dst[pair_order]
    removed = np.zeros(n_total, dtype=np.bool_)
    for t in range(take):
        removed[src[t]] = True
    new_alive = np.empty(alive.shape[0] - take, dtype=np.int64)
    ia = 0
    for t in range(alive.shape[0]):
        v = alive[t]
        if not removed[v]:
            new_alive[ia] = v
            ia += 1
    return src, dst, new_alive


def _py_partial_shuffle(state, items, draws):
    """Mirror of Rng._partial_shuffle over a packed uint64 state vector."""
    s0, s1, s2, s3 = (int(x) for x in state)
    n = items.shape[0]
    for i in range(n - 1, n - 1 - int(draws), -1):
        span = i + 1
        limit = ((1 << 64) // span) * span
        while True:
            x = (s1 * 5) & _MASK64
            x = ((((x << 7) | (x >> 57)) & _MASK64) * 9) & _MASK64
            t = (s1 << 17) & _MASK64
            s2 ^= s0
            s3 ^= s1
            s1 ^= s2
            s0 ^= s3
            s2 ^= t
            s3 = ((s3 << 45) | (s3 >> 19)) & _MASK64
            if x < limit:
                break
        j = x % span
        items[i], items[j] = items[j], items[i]
    state[0] = s0
    state[1] = s1
    state[2] = s2
    state[3] = s3


def _py_split_random(state, n, k):
    """Sorted A (size k) and B (size n-k) of a uniform random split.

    Consumes the same draws as a k-element partial Fisher-Yates.
    """
    items = np.arange(n, dtype=np.int64)
    _py_partial_shuffle(state, items, min(k, n - 1) if n else 0)
    a_mask = np.zeros(n, dtype=np.bool_)
    for t in range(n - k, n):
        a_mask[items[t]] = True
    a = np.empty(k, dtype=np.int64)
    b = np.empty(n - k, dtype=np.int64)
    ia = ib = 0
    for v in range(n):
        if a_mask[v]:
            a[ia] = v
            ia += 1
        else:
            b[ib] = v
            ib += 1
    return a, b


if HAVE_NUMBA:
    _njit = _nb.njit(cache=True, fastmath=False)

    @_njit
    def _nb_row_norms(base):
        n, dim = base.shape
        norms = np.empty(n)
        for i in range(n):
            acc = 0.0
            for c in range(dim):
                v = np.float64(base[i, c])
                acc += v * v
            nrm = np.sqrt(acc)
            norms[i] = nrm if nrm > 1e-12 else 1e-12
        return norms

    @_njit
    def _nb_stage_pair(base):
        n, dim = base.shape
        rows32 = np.empty((n, dim), dtype=np.float32)
        norms = np.empty(n)
        for i in range(n):
            acc = 0.0
            for c in range(dim):
                v = np.float64(base[i, c])
                rows32[i, c] = np.float32(v)
                acc += v * v
            nrm = np.sqrt(acc)
            norms[i] = nrm if nrm > 1e-12 else 1e-12
        return rows32, norms

    @_njit
    def _nb_pair_dot(base, overlay, touched, i, j):
        dim = base.shape[1]
        acc = 0.0
        if touched[i]:
            if touched[j]:
                for c in range(dim):
                    acc += overlay[i, c] * overlay[j, c]
            else:
                for c in range(dim):
                    acc += overlay[i, c] * np.float64(base[j, c])
        else:
            if touched[j]:
                for c in range(dim):
                    acc += np.float64(base[i, c]) * overlay[j, c]
            else:
                for c in range(dim):
                    acc += np.float64(base[i, c]) * np.float64(base[j, c])
        return acc

    @_nb.njit(cache=True, fastmath=True)
    def _nb_prescreen(raw, norms, a_ids, b_ids, pre):
        n_a, n_b = raw.shape
        pre_best = np.empty(n_a)
        inv_b = np.empty(n_b)
        for j in range(n_b):
            inv_b[j] = 1.0 / norms[b_ids[j]]
        for i in range(n_a):
            inv_a = 1.0 / norms[a_ids[i]]
            for j in range(n_b):
                pre[i, j] = raw[i, j] * (inv_a * inv_b[j])
            m = pre[i, 0]
            for j in range(1, n_b):
                if pre[i, j] > m:
                    m = pre[i, j]
            pre_best[i] = m
        return pre_best

    @_njit
    def _nb_select_exact(pre, pre_best, base, overlay, touched, norms, a_ids, b_ids, top_k, band):
        n_a, n_b = pre.shape
        best_pos = np.zeros(n_a, dtype=np.int64)
        best_sim = np.full(n_a, -np.inf)
        if top_k >= n_a:
            threshold = -np.inf
        else:
            threshold = np.partition(pre_best, n_a - top_k)[n_a - top_k] - 2.0 * band
        for i in range(n_a):
            if pre_best[i] < threshold:
                continue
            ai = a_ids[i]
            na = norms[ai]
            cut = pre_best[i] - band
            best = -1.0e300
            best_j = 0
            for j in range(n_b):
                if pre[i, j] >= cut:
                    bj = b_ids[j]
                    exact = _nb_pair_dot(base, overlay, touched, ai, bj) / (na * norms[bj])
                    if exact > best:
                        best = exact
                        best_j = j
            best_sim[i] = best
            best_pos[i] = best_j
        return best_sim, best_pos

    def _nb_best_counterparts(raw, base, overlay, touched, norms, a_ids, b_ids, top_k, band):
        pre = np.empty(raw.shape)
        pre_best = _nb_prescreen(raw, norms, a_ids, b_ids, pre)
        return _nb_select_exact(
            pre, pre_best, base, overlay, touched, norms, a_ids, b_ids, top_k, band
        )

    @_njit
    def _nb_sequential_weighted_merge(base, overlay, touched, rows32, norms, weights, src, dst, eps):
        dim = base.shape[1]
        n = src.shape[0]
        i = 0
        while i < n:
            d = dst[i]
            j = i
            while j < n and dst[j] == d:
                j += 1
            for t in range(i, j):
                s = src[t]
                ws = np.float64(weights[s])
                wd = np.float64(weights[d])
                tot = 1.0 / (ws + wd)
                if touched[d]:
                    if touched[s]:
                        for c in range(dim):
                            overlay[d, c] = (wd * overlay[d, c] + ws * overlay[s, c]) * tot
                    else:
                        for c in range(dim):
                            overlay[d, c] = (wd * overlay[d, c] + ws * np.float64(base[s, c])) * tot
                else:
                    if touched[s]:
                        for c in range(dim):
                            overlay[d, c] = (wd * np.float64(base[d, c]) + ws * overlay[s, c]) * tot
                    else:
                        for c in range(dim):
                            overlay[d, c] = (wd * np.float64(base[d, c]) + ws * np.float64(base[s, c])) * tot
                    touched[d] = True
                weights[d] = weights[d] + weights[s]
            acc = 0.0
            for c in range(dim):
                v = overlay[d, c]
                rows32[d, c] = np.float32(v)
                acc += v * v
            nrm = np.sqrt(acc)
            norms[d] = nrm if nrm > eps else eps
            i = j

    @_njit
    def _nb_round_uniform_merge(base, overlay, touched, rows32, norms, weights, src, dst, eps):
        dim = base.shape[1]
        n = src.shape[0]
        i = 0
        while i < n:
            d = dst[i]
            j = i
            while j < n and dst[j] == d:
                j += 1
            cnt = np.float64(j - i)
            for c in range(dim):
                acc = overlay[d, c] if touched[d] else np.float64(base[d, c])
                for t in range(i, j):
                    s = src[t]
                    acc += overlay[s, c] if touched[s] else np.float64(base[s, c])
                overlay[d, c] = acc / (cnt + 1.0)
            touched[d] = True
            wsum = weights[d]
            for t in range(i, j):
                wsum += weights[src[t]]
            weights[d] = wsum
            acc2 = 0.0
            for c in range(dim):
                v = overlay[d, c]
                rows32[d, c] = np.float32(v)
                acc2 += v * v
            nrm = np.sqrt(acc2)
            norms[d] = nrm if nrm > eps else eps
            i = j

    @_njit
    def _nb_group_means(order, starts, weights, tokens, out):
        dim = tokens.shape[1]
        acc = np.empty(dim)
        for g in range(out.shape[0]):
            for c in range(dim):
                acc[c] = 0.0
            for t in range(starts[g], starts[g + 1]):
                j = order[t]
                for c in range(dim):
                    acc[c] += np.float64(tokens[j, c])
            w = np.float64(weights[g])
            for c in range(dim):
                out[g, c] = acc[c] / w

    @_njit
    def _nb_first_occurrence_labels(root):
        n = root.shape[0]
        out = np.empty(n, dtype=np.int64)
        label_of = np.full(n, -1, dtype=np.int64)
        nxt = 0
        for j in range(n):
            r = root[j]
            if label_of[r] < 0:
                label_of[r] = nxt
                nxt += 1
            out[j] = label_of[r]
        return out

    @_njit
    def _nb_resolve_labels(parent):
        n = parent.shape[0]
        out = np.empty(n, dtype=np.int64)
        label_of = np.full(n, -1, dtype=np.int64)
        nxt = 0
        for j in range(n):
            r = parent[j]
            while parent[r] != r:
                r = parent[r]
            if label_of[r] < 0:
                label_of[r] = nxt
                nxt += 1
            out[j] = label_of[r]
        return out

    @_njit
    def _nb_finish_round(best_sim, best_pos, a_ids, b_ids, r, alive, parent):
        n_a = best_sim.shape[0]
        take = min(r, n_a)
        order = np.argsort(-best_sim, kind="mergesort")
        src = np.empty(take, dtype=np.int64)
        dst = np.empty(take, dtype=np.int64)
        for t in range(take):
            i = order[t]
            src[t] = a_ids[i]
            dst[t] = b_ids[best_pos[i]]
            parent[src[t]] = dst[t]
        n_total = parent.shape[0]
        pair_order = np.argsort(dst * n_total + src, kind="mergesort")
        src = src[pair_order]
        dst = dst[pair_order]
        removed = np.zeros(n_total, dtype=np.bool_)
        for t in range(take):
            removed[src[t]] = True
        new_alive = np.empty(alive.shape[0] - take, dtype=np.int64)
        ia = 0
        for t in range(alive.shape[0]):
            v = alive[t]
            if not removed[v]:
                new_alive[ia] = v
                ia += 1
        return src, dst, new_alive

    @_njit
    def _nb_partial_shuffle(state, items, draws):
        s0 = state[0]
        s1 = state[1]
        s2 = state[2]
        s3 = state[3]
        n = items.shape[0]
        for i in range(n - 1, n - 1 - draws, -1):
            span = np.uint64(i + 1)
            # 2^64 mod span, computed in wrapping arithmetic.
            rem = (np.uint64(0) - span) % span
            limit = np.uint64(0) - rem
            while True:
                x = s1 * np.uint64(5)
                x = ((x << np.uint64(7)) | (x >> np.uint64(57))) * np.uint64(9)
                t = s1 << np.uint64(17)
                s2 ^= s0
                s3 ^= s1
                s1 ^= s2
                s0 ^= s3
                s2 ^= t
                s3 = (s3 << np.uint64(45)) | (s3 >> np.uint64(19))
                if rem == np.uint64(0) or x < limit:
                    break
            j = x % span
            tmp = items[i]
            items[i] = items[j]
            items[j] = tmp
        state[0] = s0
        state[1] = s1
        state[2] = s2
        state[3] = s3

    @_njit
    def _nb_split_random(state, n, k):
        items = np.arange(n, dtype=np.int64)
        draws = min(k, n - 1) if n else 0
        _nb_partial_shuffle(state, items, draws)
        a_mask = np.zeros(n, dtype=np.bool_)
        for t in range(n - k, n):
            a_mask[items[t]] = True
        a = np.empty(k, dtype=np.int64)
        b = np.empty(n - k, dtype=np.int64)
        ia = 0
        ib = 0
        for v in range(n):
            if a_mask[v]:
                a[ia] = v
                ia += 1
            else:
                b[ib] = v
                ib += 1
        return a, b

    row_norms = _nb_row_norms
    stage_pair = _nb_stage_pair
    best_counterparts = _nb_best_counterparts
    sequential_weighted_merge = _nb_sequential_weighted_merge
    round_uniform_merge = _nb_round_uniform_merge
    group_means = _nb_group_means
    partial_shuffle = _nb_partial_shuffle
    first_occurrence_labels = _nb_first_occurrence_labels
    resolve_labels = _nb_resolve_labels
    split_random = _nb_split_random
    finish_round = _nb_finish_round
else:  # pragma: no cover - exercised only without numba
    row_norms = _py_row_norms
    stage_pair = _py_stage_pair
    best_counterparts = _py_best_counterparts
    sequential_weighted_merge = _py_sequential_weighted_merge
    round_uniform_merge = _py_round_uniform_merge
    group_means = _py_group_means
    partial_shuffle = _py_partial_shuffle
    first_occurrence_labels = _py_first_occurrence_labels
    resolve_labels = _py_resolve_labels
    split_random = _py_split_random
    finish_round = _py_finish_round
