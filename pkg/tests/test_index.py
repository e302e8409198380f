"""The colour index: tables, colour database, stats, persistence."""
from __future__ import annotations

import random
import threading

import numpy as np
import pytest

from colorcq.graph import EdgeLabel
from colorcq.index import (
    FORMAT_VERSION,
    MAGIC,
    build_index,
    hat_succ_count,
    hat_succ_set,
    index_stats,
    load_index,
    save_index,
)
from colorcq.model import ColorcqError, Database, Schema

from .conftest import cycle_db, movie_db, names, random_db


def _color_by_name(idx, db, name: str) -> int:
    return idx.vertex_color(idx.g.vertex_of(db.intern(name)))


def test_movie_colors_and_stats(dex_index):
    idx = dex_index
    db = idx.db
    st = index_stats(idx)
    assert st["db_size"] == 8
    assert st["d1_size"] == 8
    assert st["adom_size"] == 6
    assert st["num_colors"] == 4
    assert st["num_edge_labels"] == 6
    assert st["color_db_size"] == 10
    assert st["k_sigma"] == pytest.approx(1.25)
    assert set(st["build_seconds"]) == {"graph", "refine", "tables"}

    b = _color_by_name(idx, db, "PS")
    r = _color_by_name(idx, db, "LM")
    assert _color_by_name(idx, db, "MM") == r
    g_ = _color_by_name(idx, db, "Dr.S")
    y = _color_by_name(idx, db, "18m")
    assert _color_by_name(idx, db, "34m") == y
    assert len({b, r, g_, y}) == 4
    assert [int(idx.n_c[c]) for c in (b, r, g_, y)] == [1, 2, 1, 2]


def test_movie_color_db_matches_displayed_relations(dex_index):
    """The colour database of the running example: six displayed singleton
    relations, the two stated label equalities, and nothing else."""
    idx = dex_index
    db = idx.db
    b = _color_by_name(idx, db, "PS")
    r = _color_by_name(idx, db, "LM")
    g_ = _color_by_name(idx, db, "Dr.S")
    y = _color_by_name(idx, db, "18m")

    cdb = idx.color_db
    want = {
        EdgeLabel([("P", "+"), ("A", "-")]): {(b, r)},
        EdgeLabel([("S", "+")]): {(r, y)},
        EdgeLabel([("M", "+")]): {(r, g_)},
        EdgeLabel([("P", "-"), ("A", "+")]): {(r, b)},
        EdgeLabel([("S", "-")]): {(y, r)},
        EdgeLabel([("M", "-")]): {(g_, r)},
        # the stated equalities: single-symbol sublabels carry the same tuple
        EdgeLabel([("P", "+")]): {(b, r)},
        EdgeLabel([("A", "-")]): {(b, r)},
        EdgeLabel([("P", "-")]): {(r, b)},
        EdgeLabel([("A", "+")]): {(r, b)},
    }
    assert set(idx.closure_symbols) == set(want)
    for lab, tuples in want.items():
        assert cdb.tuples(idx.closure_symbols[lab]) == tuples
    # every unary relation of the colour schema is empty (no loops, no unary facts)
    for u in cdb.schema.unary_symbols:
        assert cdb.tuples(u) == set()
    assert cdb.size() == 10
    assert set(cdb.adom()) <= set(range(4))


def test_movie_hat_lookups(dex_index):
    idx = dex_index
    db = idx.db
    b = _color_by_name(idx, db, "PS")
    r = _color_by_name(idx, db, "LM")
    y = _color_by_name(idx, db, "18m")
    ps = db.intern("PS")

    got = hat_succ_set(idx, EdgeLabel([("P", "+")]), ps, r)
    assert names(db, [(c,) for c in got]) == {("LM",), ("MM",)}
    assert hat_succ_set(idx, EdgeLabel([("P", "+"), ("A", "-")]), ps, y) == []
    # a label larger than every actual label has empty semantics
    assert hat_succ_set(idx, EdgeLabel([("P", "+"), ("M", "+")]), ps, r) == []
    assert hat_succ_count(idx, EdgeLabel([("P", "+")]), b, r) == 2
    assert hat_succ_count(idx, EdgeLabel([("P", "+"), ("M", "+")]), b, r) == 0


def test_hat_lookup_errors(dex_index):
    idx = dex_index
    lab = EdgeLabel([("P", "+")])
    with pytest.raises(ColorcqError):
        hat_succ_count(idx, lab, 0, 99)
    with pytest.raises(ColorcqError):
        hat_succ_set(idx, lab, idx.db.intern("PS"), -1)
    with pytest.raises(KeyError):
        hat_succ_set(idx, lab, 10_000, 0)


def test_cycle_index_prop2():
    idx = build_index(cycle_db(10))
    st = index_stats(idx)
    assert st["num_colors"] == 1
    assert st["color_db_size"] == 2
    fwd, bwd = EdgeLabel([("R", "+")]), EdgeLabel([("R", "-")])
    assert idx.color_db.tuples(idx.closure_symbols[fwd]) == {(0, 0)}
    assert idx.color_db.tuples(idx.closure_symbols[bwd]) == {(0, 0)}
    assert hat_succ_count(idx, fwd, 0, 0) == 1
    assert hat_succ_count(idx, bwd, 0, 0) == 1
    assert hat_succ_count(idx, EdgeLabel([("R", "+"), ("R", "-")]), 0, 0) == 0
    assert EdgeLabel([("R", "+"), ("R", "-")]) not in idx.closure_symbols


def test_single_unary_fact_color_db():
    db = Database(Schema([("R", 2), ("U", 1)]))
    db.add_fact("U", (db.intern("a"),))
    idx = build_index(db)
    cdb = idx.color_db
    assert cdb.tuples("U") == {(0,)}
    assert cdb.size() == 1
    assert idx.closure_symbols == {}


def test_empty_database_index():
    idx = build_index(Database(Schema([("R", 2)])))
    st = index_stats(idx)
    assert st["db_size"] == 0
    assert st["adom_size"] == 0
    assert st["num_colors"] == 0
    assert st["color_db_size"] == 0
    assert st["k_sigma"] == 0.0


def test_succ_tables_against_brute_force():
    """N̂→^λ(v,c) and #̂→^λ(c,c′) recomputed edge-by-edge from the graph, for
    every closure label and a couple of labels outside the closure."""
    rng = random.Random(29)
    for _ in range(12):
        db = random_db(rng, max_adom=6)
        idx = build_index(db)
        g = idx.g
        col = idx.coloring
        labs = list(idx.closure_symbols) + [
            EdgeLabel([("R", "+"), ("S", "+")]),
            EdgeLabel([("R", "-"), ("S", "+"), ("S", "-")]),
        ]
        for lab in labs:
            for v in range(g.n):
                by_c: dict[int, list[int]] = {}
                for w, elab in g.out_edges(v):
                    if lab.issubset(elab):
                        by_c.setdefault(col.color(w), []).append(w)
                for c in range(idx.num_colors):
                    expect = sorted(by_c.get(c, []))
                    got = [int(x) for x in idx.succ(lab, v, c)]
                    assert got == expect
                    assert idx.count(lab, col.color(v), c) == len(expect)


def test_monotone_in_the_label():
    rng = random.Random(31)
    for _ in range(8):
        db = random_db(rng, max_adom=6)
        idx = build_index(db)
        labs = list(idx.closure_symbols)
        for mu in labs:
            for lam in labs:
                if not lam.issubset(mu):
                    continue
                for v in range(idx.g.n):
                    for c in range(idx.num_colors):
                        small = set(int(x) for x in idx.succ(mu, v, c))
                        big = set(int(x) for x in idx.succ(lam, v, c))
                        assert small <= big


def test_color_db_membership_iff_positive_count():
    rng = random.Random(37)
    for _ in range(10):
        db = random_db(rng, max_adom=7)
        idx = build_index(db)
        for lab, sym in idx.closure_symbols.items():
            tuples = idx.color_db.tuples(sym)
            for c in range(idx.num_colors):
                for c2 in range(idx.num_colors):
                    assert ((c, c2) in tuples) == (idx.count(lab, c, c2) > 0)


def test_loop_cover_array():
    db = Database(Schema([("R", 2), ("S", 2)]))
    a, b = db.intern("a"), db.intern("b")
    db.add_fact("R", (a, a))
    db.add_fact("R", (a, b))
    idx = build_index(db)
    ca = idx.vertex_color(idx.g.vertex_of(a))
    cb = idx.vertex_color(idx.g.vertex_of(b))
    assert idx.loop_pairs[ca] == frozenset({("R", "+"), ("R", "-")})
    assert idx.loop_pairs[cb] == frozenset()
    arr = idx.loop_cover_array(EdgeLabel([("R", "+")]))
    assert bool(arr[ca]) and not bool(arr[cb])
    both = idx.loop_cover_array(EdgeLabel([("R", "+"), ("R", "-")]))
    assert bool(both[ca])
    assert not bool(idx.loop_cover_array(EdgeLabel([("S", "+")]))[ca])


def test_closure_cap_guards_adversarial_schemas():
    n_rel = 21  # one edge carrying 21 symbols: 2^21 closure labels
    db = Database(Schema([(f"R{i:02d}", 2) for i in range(n_rel)]))
    a, b = db.intern("a"), db.intern("b")
    for i in range(n_rel):
        db.add_fact(f"R{i:02d}", (a, b))
    with pytest.raises(ColorcqError, match="closure"):
        build_index(db)


def test_persistence_round_trip(tmp_path):
    rng = random.Random(41)
    for db in (movie_db(), cycle_db(9), random_db(rng, max_adom=6)):
        idx = build_index(db)
        path = str(tmp_path / "idx.ccqx")
        save_index(idx, path)
        idx2 = load_index(path)

        assert idx2.db.constants == idx.db.constants
        for sym in idx.db.schema.symbols:
            assert idx2.db.tuples(sym) == idx.db.tuples(sym)
        assert list(idx2.coloring.color_of) == list(idx.coloring.color_of)
        assert idx2.closure_symbols == idx.closure_symbols
        for sym in idx.color_db.schema.symbols:
            assert idx2.color_db.tuples(sym) == idx.color_db.tuples(sym)
        # hat lookups agree, including ones that need lazy materialization
        for lab in idx.closure_symbols:
            assert idx2.count_table(lab) == idx.count_table(lab)
            for v in range(idx.g.n):
                for c in range(idx.num_colors):
                    assert list(idx2.succ(lab, v, c)) == list(idx.succ(lab, v, c))
        assert index_stats(idx2)["db_size"] == index_stats(idx)["db_size"]


def test_load_rejects_foreign_files(tmp_path):
    bad = tmp_path / "bad.bin"
    bad.write_bytes(b"NOPE" + b"\x00" * 32)
    with pytest.raises(ColorcqError, match="magic"):
        load_index(str(bad))

    import struct

    vers = tmp_path / "vers.bin"
    vers.write_bytes(MAGIC + struct.pack("<IQ", FORMAT_VERSION + 7, 2) + b"{}")
    with pytest.raises(ColorcqError, match="version"):
        load_index(str(vers))


def test_lazy_memoization_is_thread_safe():
    """Successor tables materialize on first use; concurrent first requests
    must install identical values."""
    db = movie_db()
    idx = build_index(db)
    lab = EdgeLabel([("P", "+")])
    barrier = threading.Barrier(8)
    results: list[dict] = []

    def worker():
        barrier.wait()
        got = {
            (v, c): [int(x) for x in idx.succ(lab, v, c)]
            for v in range(idx.g.n)
            for c in range(idx.num_colors)
        }
        results.append(got)

    threads = [threading.Thread(target=worker) for _ in range(8)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    fresh = build_index(db)
    want = {
        (v, c): [int(x) for x in fresh.succ(lab, v, c)]
        for v in range(fresh.g.n)
        for c in range(fresh.num_colors)
    }
    assert all(r == want for r in results)


def test_hat_tables_memoized(dex_index):
    lab = EdgeLabel([("A", "-")])
    idx = dex_index
    v = idx.g.vertex_of(idx.db.intern("PS"))
    c = idx.vertex_color(idx.g.vertex_of(idx.db.intern("LM")))
    first = idx.succ(lab, v, c)
    assert idx.succ(lab, v, c) is first
    assert idx.count_table(lab) is idx.count_table(lab)
