"""Loop-free labeled-graph view of a binary-schema database.

Self-loops R(v,v) are first re-encoded as fresh unary facts S_R(v), which
leaves a database whose binary tuples all relate distinct constants.  That
database is then read as an undirected graph on the active domain: vertices
carry the set of unary symbols that hold on them, and each ordered pair of
adjacent vertices carries the set of (symbol, direction) pairs that relate
them.  The reverse pair always carries the dual label (directions flipped).
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .model import Database, Schema

FWD = "+"
BWD = "-"
_DUAL_DIR = {FWD: BWD, BWD: FWD}


@dataclass(frozen=True)
class EdgeLabel:
    """Non-empty set of (symbol, direction) pairs, stored canonically sorted."""

    pairs: tuple[tuple[str, str], ...]

    def __init__(self, pairs: Iterable[tuple[str, str]]):
        canon = tuple(sorted(set(pairs)))
        if not canon:
            raise ValueError("edge labels must be non-empty")
        for _, d in canon:
            if d not in (FWD, BWD):
                raise ValueError(f"bad direction {d!r}")
        object.__setattr__(self, "pairs", canon)

    def dual(self) -> EdgeLabel:
        return EdgeLabel((s, _DUAL_DIR[d]) for s, d in self.pairs)

    def issubset(self, other: EdgeLabel) -> bool:
        return set(self.pairs) <= set(other.pairs)

    def __str__(self) -> str:
        return "{" + ",".join(f"({s},{d})" for s, d in self.pairs) + "}"


def e_symbol(lab: EdgeLabel) -> str:
    """Relation name used for the edge label λ in colour-level schemas."""
    return "E" + str(lab)


@dataclass(frozen=True)
class Sigma1:
    """Loop-free schema derived from a base schema.

    Every binary symbol R gets a fresh unary symbol (nominally `S_R`) that
    records which constants had a self-loop in R.  Fresh names are chosen to
    collide with nothing in the base schema.
    """

    base: Schema
    schema: Schema
    loop_symbol: dict[str, str]


def sigma1_for(schema: Schema) -> Sigma1:
    out = Schema((s, schema.arity(s)) for s in schema.symbols)
    loop_symbol: dict[str, str] = {}
    for r in schema.binary_symbols:
        cand = f"S_{r}"
        while cand in out:
            cand = "_" + cand
        out.add(cand, 1)
        loop_symbol[r] = cand
    return Sigma1(base=schema, schema=out, loop_symbol=loop_symbol)


def encode_self_loops(db: Database) -> tuple[Database, Sigma1]:
    """Rewrite `(v,v) in R` into loop facts, preserving the intern table."""
    s1 = sigma1_for(db.schema)
    d1 = Database(s1.schema, constants=db.constants)
    for sym in db.schema.symbols:
        tups = db.tuples(sym)
        if db.schema.arity(sym) == 1:
            d1.relations[sym] = set(tups)
        else:
            loops = {t for t in tups if t[0] == t[1]}
            d1.relations[sym] = tups - loops
            d1.relations[s1.loop_symbol[sym]] = {(a,) for a, _ in loops}
    return d1, s1


class LabeledGraph:
    """CSR adjacency over the active domain, with interned edge labels.

    `verts[i]` is the constant id of vertex i; `indptr`/`nbr`/`elab` store the
    out-edges of each vertex sorted by target; `labels[elab[e]]` is the edge
    label of directed edge e and `dual_id` maps a label id to its dual's id.
    """

    def __init__(self, d1: Database, s1: Sigma1):
        self.d1 = d1
        self.s1 = s1
        self.unary_symbols: tuple[str, ...] = s1.schema.unary_symbols
        self._uidx = {u: i for i, u in enumerate(self.unary_symbols)}

        self.verts = np.array(sorted(d1.adom()), dtype=np.int64)
        self.n = len(self.verts)

        # vertex labels as bitmasks over the unary symbols (python ints, so
        # schemas of any width are fine here)
        self.vl_mask: list[int] = [0] * self.n
        for u, i in self._uidx.items():
            bit = 1 << i
            for (cid,) in d1.tuples(u):
                self.vl_mask[self.vertex_of(cid)] |= bit

        self._build_edges()

    def vertex_of(self, cid: int) -> int:
        v = int(np.searchsorted(self.verts, cid))
        if v >= self.n or self.verts[v] != cid:
            raise KeyError(f"constant id {cid} is not in the active domain")
        return v

    def const_of(self, v: int) -> int:
        return int(self.verts[v])

    def vl(self, v: int) -> frozenset[str]:
        m = self.vl_mask[v]
        return frozenset(u for u, i in self._uidx.items() if m >> i & 1)

    def _build_edges(self) -> None:
        binary = self.d1.schema.binary_symbols
        srcs: list[np.ndarray] = []
        dsts: list[np.ndarray] = []
        tags: list[np.ndarray] = []
        for r, sym in enumerate(binary):
            tups = self.d1.tuples(sym)
            if not tups:
                continue
            arr = np.fromiter((x for t in sorted(tups) for x in t), dtype=np.int64)
            a = np.searchsorted(self.verts, arr[0::2])
            b = np.searchsorted(self.verts, arr[1::2])
            srcs += [a, b]
            dsts += [b, a]
            tags += [np.full(len(a), 2 * r, np.int64), np.full(len(a), 2 * r + 1, np.int64)]

        if not srcs:
            self.indptr = np.zeros(self.n + 1, dtype=np.int64)
            self.nbr = np.zeros(0, dtype=np.int64)
            self.elab = np.zeros(0, dtype=np.int64)
            self.labels: tuple[EdgeLabel, ...] = ()
            self.dual_id = np.zeros(0, dtype=np.int64)
            self._label_ids: dict[EdgeLabel, int] = {}
            return

        # one directed entry per (src, dst) pair; the label collects every tag
        src = np.concatenate(srcs)
        dst = np.concatenate(dsts)
        tag = np.concatenate(tags)
        order = np.lexsort((tag, dst, src))
        src, dst, tag = src[order], dst[order], tag[order]

        first = np.ones(len(src), dtype=bool)
        first[1:] = (src[1:] != src[:-1]) | (dst[1:] != dst[:-1])
        starts = np.flatnonzero(first)

        if 2 * len(binary) <= 63:
            masks = np.bitwise_or.reduceat(np.int64(1) << tag, starts)
            uniq, elab = np.unique(masks, return_inverse=True)
            keys = [self._mask_pairs(int(m), binary) for m in uniq]
        else:
            # wide schemas: group tags per edge without bit tricks
            bounds = list(starts) + [len(src)]
            key_ids: dict[tuple[int, ...], int] = {}
            keys = []
            elab = np.zeros(len(starts), dtype=np.int64)
            for i in range(len(starts)):
                k = tuple(sorted(set(tag[bounds[i]:bounds[i + 1]].tolist())))
                if k not in key_ids:
                    key_ids[k] = len(keys)
                    keys.append(self._tag_pairs(k, binary))
                elab[i] = key_ids[k]

        self.labels = tuple(EdgeLabel(p) for p in keys)
        self._label_ids = {lab: i for i, lab in enumerate(self.labels)}
        self.dual_id = np.array(
            [self._label_ids[lab.dual()] for lab in self.labels], dtype=np.int64
        )
        e_src = src[starts]
        self.nbr = dst[starts]
        self.elab = np.asarray(elab, dtype=np.int64)
        self.indptr = np.searchsorted(e_src, np.arange(self.n + 1), side="left").astype(np.int64)

    @staticmethod
    def _mask_pairs(mask: int, binary: tuple[str, ...]) -> list[tuple[str, str]]:
        out = []
        r = 0
        while mask:
            if mask & 1:
                out.append((binary[r // 2], FWD if r % 2 == 0 else BWD))
            mask >>= 1
            r += 1
        return out

    @staticmethod
    def _tag_pairs(tags: tuple[int, ...], binary: tuple[str, ...]) -> list[tuple[str, str]]:
        return [(binary[t // 2], FWD if t % 2 == 0 else BWD) for t in tags]

    # -- small query helpers (tests and naive code paths) --

    def label_id(self, lab: EdgeLabel) -> int | None:
        return self._label_ids.get(lab)

    def out_edges(self, v: int) -> list[tuple[int, EdgeLabel]]:
        lo, hi = self.indptr[v], self.indptr[v + 1]
        return [(int(self.nbr[e]), self.labels[self.elab[e]]) for e in range(lo, hi)]

    def edge_label(self, v: int, w: int) -> EdgeLabel | None:
        lo, hi = self.indptr[v], self.indptr[v + 1]
        e = lo + np.searchsorted(self.nbr[lo:hi], w)
        if e < hi and self.nbr[e] == w:
            return self.labels[self.elab[e]]
        return None

    @property
    def num_directed_edges(self) -> int:
        return len(self.nbr)

    def initial_colors(self) -> tuple[np.ndarray, int]:
        """Dense ids of the vertex-label partition (refinement starting point)."""
        ranks: dict[int, int] = {}
        for m in sorted(set(self.vl_mask)):
            ranks[m] = len(ranks)
        init = np.fromiter((ranks[m] for m in self.vl_mask), dtype=np.int64, count=self.n)
        return init, len(ranks)


def build_labeled_graph(d1: Database, s1: Sigma1) -> LabeledGraph:
    """Precondition: `d1` is loop-free (see `encode_self_loops`)."""
    return LabeledGraph(d1, s1)
