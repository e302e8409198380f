"""Partition-refinement kernels.

Two implementations of the same computation: the coarsest coloring that
refines an initial vertex partition and is stable under counting, per edge
label, how many out-neighbours of each colour a vertex has.

* `refine_worklist` — worklist algorithm with split-from-the-smaller-half
  bookkeeping, O((V+E) log V) splitter work plus sorting.  Compiled with
  numba when available; `refine_worklist.py_func` is the uncompiled form.
* `refine_rounds` — vectorised numpy fallback that recomputes signatures in
  global rounds until no class splits.  Simple and allocation-heavy; worst
  case carries an extra factor for the number of rounds.

Both take the graph as CSR arrays (`indptr`, `nbr`, `elab`) plus `dual`,
which maps an edge-label id to the id labelling the reversed edge.  The
kernels count *incoming* edges of each splitter class by walking members'
out-edges and dualising, which is valid because every edge here exists in
both directions with dual labels.  Returned colour ids are dense but
otherwise arbitrary; callers canonicalise.
"""
from __future__ import annotations

import numpy as np

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]

        def wrap(f):
            return f

        return wrap


@njit(cache=True)
def _refine_worklist_impl(indptr, nbr, elab, dual, init, n_init):
    n = init.shape[0]
    color = init.copy()
    if n == 0:
        return color
    ne = nbr.shape[0]

    # partition state: vertices grouped contiguously per class
    elems = np.argsort(init, kind="mergesort")
    loc = np.empty(n, np.int64)
    for i in range(n):
        loc[elems[i]] = i
    first = np.zeros(n, np.int64)
    past = np.zeros(n, np.int64)
    bounds = np.zeros(n_init + 1, np.int64)
    for v in range(n):
        bounds[init[v] + 1] += 1
    for c in range(n_init):
        bounds[c + 1] += bounds[c]
        first[c] = bounds[c]
        past[c] = bounds[c + 1]
    n_classes = n_init

    # counting refinement must seed the worklist with *every* initial class
    stack = np.empty(n, np.int64)
    on_stack = np.zeros(n, np.bool_)
    top = 0
    for c in range(n_init):
        stack[top] = c
        top += 1
        on_stack[c] = True

    snapshot = np.empty(n, np.int64)
    hit_u = np.empty(ne, np.int64)
    hit_lam = np.empty(ne, np.int64)
    aff_u = np.empty(ne, np.int64)
    aff_cnt = np.empty(ne, np.int64)

    while top > 0:
        top -= 1
        q = stack[top]
        on_stack[q] = False

        qsize = past[q] - first[q]
        for i in range(qsize):
            snapshot[i] = elems[first[q] + i]

        # edges into q, seen from their source: (u, label of u->w) per w in q
        nh = 0
        for i in range(qsize):
            w = snapshot[i]
            for e in range(indptr[w], indptr[w + 1]):
                hit_u[nh] = nbr[e]
                hit_lam[nh] = dual[elab[e]]
                nh += 1
        if nh == 0:
            continue

        ord1 = np.argsort(hit_lam[:nh] * np.int64(n) + hit_u[:nh], kind="mergesort")
        p = 0
        while p < nh:
            lam0 = hit_lam[ord1[p]]
            na = 0
            while p < nh and hit_lam[ord1[p]] == lam0:
                u0 = hit_u[ord1[p]]
                cnt = 0
                while p < nh and hit_lam[ord1[p]] == lam0 and hit_u[ord1[p]] == u0:
                    cnt += 1
                    p += 1
                aff_u[na] = u0
                aff_cnt[na] = cnt
                na += 1

            # group the counted vertices by (class, count) and split classes
            ord2 = np.argsort(
                color[aff_u[:na]] * np.int64(n + 1) + aff_cnt[:na], kind="mergesort"
            )
            i = 0
            while i < na:
                x = color[aff_u[ord2[i]]]
                j = i
                while j < na and color[aff_u[ord2[j]]] == x:
                    j += 1
                k = j - i
                base = first[x]
                xsize = past[x] - base
                if k == xsize and aff_cnt[ord2[i]] == aff_cnt[ord2[j - 1]]:
                    i = j
                    continue

                # move counted members to the front, ordered by count
                for t in range(k):
                    u = aff_u[ord2[i + t]]
                    tgt = base + t
                    pu = loc[u]
                    other = elems[tgt]
                    elems[tgt] = u
                    elems[pu] = other
                    loc[u] = tgt
                    loc[other] = pu

                nres = xsize - k
                # largest sub-block: residue wins ties so it is never pushed
                # needlessly (relabelling it would cost O(|residue|))
                largest = nres
                largest_run = -1
                t = i
                while t < j:
                    t2 = t
                    while t2 < j and aff_cnt[ord2[t2]] == aff_cnt[ord2[t]]:
                        t2 += 1
                    if t2 - t > largest:
                        largest = t2 - t
                        largest_run = t
                    t = t2

                was_pending = on_stack[x]
                keeper_run = -1 if nres > 0 else largest_run
                seg = base
                t = i
                while t < j:
                    t2 = t
                    while t2 < j and aff_cnt[ord2[t2]] == aff_cnt[ord2[t]]:
                        t2 += 1
                    gsize = t2 - t
                    if t == keeper_run:
                        first[x] = seg
                        past[x] = seg + gsize
                    else:
                        nid = n_classes
                        n_classes += 1
                        for pos in range(seg, seg + gsize):
                            color[elems[pos]] = nid
                        first[nid] = seg
                        past[nid] = seg + gsize
                        if was_pending or t != largest_run:
                            stack[top] = nid
                            top += 1
                            on_stack[nid] = True
                    seg += gsize
                    t = t2
                if nres > 0:
                    first[x] = seg
                    past[x] = seg + nres
                    if not was_pending and largest_run != -1:
                        stack[top] = x
                        top += 1
                        on_stack[x] = True
                i = j
    return color


def refine_worklist(indptr, nbr, elab, dual, init, n_init):
    return _refine_worklist_impl(indptr, nbr, elab, dual, init, np.int64(n_init))


def _dense_rank(a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, int]:
    """Dense ids of the pairs (a[i], b[i]); b may contain -1 sentinels."""
    key = a.astype(np.int64) * (np.int64(b.max()) + 2 if len(b) else 2) + (b + 1)
    uniq, inv = np.unique(key, return_inverse=True)
    return inv.astype(np.int64), len(uniq)


def refine_rounds(indptr, nbr, elab, dual, init, n_init):
    n = init.shape[0]
    if n == 0:
        return init.copy()
    src = np.repeat(np.arange(n, dtype=np.int64), np.diff(indptr))
    color = init.astype(np.int64).copy()
    ncol = int(n_init)

    while True:
        if len(nbr):
            key = elab * np.int64(ncol) + color[nbr]
            order = np.lexsort((key, src))
            s_src, s_key = src[order], key[order]
            fresh = np.ones(len(s_src), dtype=bool)
            fresh[1:] = (s_src[1:] != s_src[:-1]) | (s_key[1:] != s_key[:-1])
            starts = np.flatnonzero(fresh)
            t_src = s_src[starts]
            t_cnt = np.diff(np.append(starts, len(s_src)))
            t_rank, _ = _dense_rank(s_key[starts], t_cnt)
            tri_ptr = np.searchsorted(t_src, np.arange(n + 1, dtype=np.int64))
            tri_len = np.diff(tri_ptr)
        else:
            t_rank = np.zeros(0, np.int64)
            tri_ptr = np.zeros(n + 1, np.int64)
            tri_len = np.zeros(n, np.int64)

        # rank each vertex by (colour, signature length), then fold in the
        # signature one position at a time
        new, width = _dense_rank(color, tri_len)
        for pos in range(int(tri_len.max()) if n else 0):
            col = np.full(n, -1, np.int64)
            has = tri_len > pos
            col[has] = t_rank[tri_ptr[:-1][has] + pos]
            new, width = _dense_rank(new, col)

        if width == ncol:
            return color
        color, ncol = new, width
