"""Colour refinement: coarsest stable colouring of a labeled graph.

A colouring is stable when any two equally coloured vertices have, for every
edge label and every colour class, the same number of out-neighbours of that
class under that label.  The coarsest such colouring refining the vertex
labels is unique up to renaming; we pin the renaming by numbering classes in
order of their smallest vertex.

The kernel backend is picked via the COLORCQ_BACKEND environment variable
("numba" or "numpy"); by default the compiled worklist kernel is used when
numba imports, with the vectorised numpy rounds as fallback.
"""
from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from . import kernels
from .graph import EdgeLabel, LabeledGraph

BACKEND_ENV = "COLORCQ_BACKEND"


def available_backends() -> tuple[str, ...]:
    return ("numba", "numpy") if kernels.HAVE_NUMBA else ("numpy",)


def default_backend() -> str:
    env = os.environ.get(BACKEND_ENV, "").strip().lower()
    if env:
        if env not in ("numba", "numpy"):
            raise ValueError(f"{BACKEND_ENV} must be 'numba' or 'numpy', got {env!r}")
        if env == "numba" and not kernels.HAVE_NUMBA:
            raise ValueError("numba backend requested but numba is not importable")
        return env
    return "numba" if kernels.HAVE_NUMBA else "numpy"


@dataclass
class Coloring:
    """Canonical colouring: `color_of[v]` plus per-class member arrays."""

    color_of: np.ndarray
    members: tuple[np.ndarray, ...]

    @property
    def num_colors(self) -> int:
        return len(self.members)

    def color(self, v: int) -> int:
        return int(self.color_of[v])

    def class_members(self, c: int) -> np.ndarray:
        return self.members[c]

    def class_size(self, c: int) -> int:
        return len(self.members[c])

    @property
    def sizes(self) -> np.ndarray:
        return np.array([len(m) for m in self.members], dtype=np.int64)


def canonicalize(raw: np.ndarray) -> np.ndarray:
    """Renumber dense colour ids so classes appear in order of least vertex."""
    if len(raw) == 0:
        return raw.astype(np.int64)
    uniq, first_idx = np.unique(raw, return_index=True)
    remap = np.empty(len(uniq), dtype=np.int64)
    remap[np.argsort(first_idx, kind="stable")] = np.arange(len(uniq))
    lookup = np.empty(int(uniq.max()) + 1, dtype=np.int64)
    lookup[uniq] = remap
    return lookup[raw]


def _as_coloring(raw: np.ndarray) -> Coloring:
    colors = canonicalize(raw)
    n_colors = int(colors.max()) + 1 if len(colors) else 0
    order = np.argsort(colors, kind="stable")  # members stay ascending per class
    bounds = np.searchsorted(colors[order], np.arange(n_colors + 1))
    members = tuple(order[bounds[c]:bounds[c + 1]] for c in range(n_colors))
    return Coloring(color_of=colors, members=members)


def refine(g: LabeledGraph, backend: str | None = None) -> Coloring:
    """Coarsest stable colouring refining g's vertex labels."""
    if backend is None:
        backend = default_backend()
    init, n_init = g.initial_colors()
    if backend == "numba":
        if not kernels.HAVE_NUMBA:
            raise ValueError("numba backend requested but numba is not importable")
        raw = kernels.refine_worklist(g.indptr, g.nbr, g.elab, g.dual_id, init, n_init)
    elif backend == "numpy":
        raw = kernels.refine_rounds(g.indptr, g.nbr, g.elab, g.dual_id, init, n_init)
    else:
        raise ValueError(f"unknown backend {backend!r}")
    return _as_coloring(raw)


def _signature(g: LabeledGraph, colors: np.ndarray, v: int) -> dict[tuple[int, int], int]:
    sig: dict[tuple[int, int], int] = {}
    for e in range(g.indptr[v], g.indptr[v + 1]):
        key = (int(g.elab[e]), int(colors[g.nbr[e]]))
        sig[key] = sig.get(key, 0) + 1
    return sig


def is_stable(
    g: LabeledGraph, colors: np.ndarray
) -> tuple[bool, tuple[int, int, EdgeLabel | None, int | None] | None]:
    """Check stability; on failure return a witness (v, w, label, colour).

    A `None` label in the witness means v and w disagree on vertex labels
    rather than on neighbour counts.
    """
    rep: dict[int, int] = {}
    rep_sig: dict[int, dict[tuple[int, int], int]] = {}
    for v in range(g.n):
        c = int(colors[v])
        if c not in rep:
            rep[c] = v
            rep_sig[c] = _signature(g, colors, v)
            continue
        w = rep[c]
        if g.vl_mask[v] != g.vl_mask[w]:
            return False, (w, v, None, None)
        sig_v = _signature(g, colors, v)
        sig_w = rep_sig[c]
        for key in sig_v.keys() | sig_w.keys():
            if sig_v.get(key, 0) != sig_w.get(key, 0):
                lab_id, target = key
                return False, (w, v, g.labels[lab_id], target)
    return True, None


def naive_refine(g: LabeledGraph) -> Coloring:
    """Fixpoint iteration with explicit signatures; reference implementation."""
    init, ncol = g.initial_colors()
    colors = [int(c) for c in init]
    while True:
        sigs = []
        for v in range(g.n):
            items = sorted(
                (int(g.elab[e]), colors[g.nbr[e]])
                for e in range(g.indptr[v], g.indptr[v + 1])
            )
            sigs.append((colors[v], tuple(items)))
        ranks: dict[tuple, int] = {}
        for s in sorted(set(sigs)):
            ranks[s] = len(ranks)
        if len(ranks) == ncol:
            return _as_coloring(np.array(colors, dtype=np.int64))
        colors = [ranks[s] for s in sigs]
        ncol = len(ranks)
