"""colorcq: a colour-index engine for free-connex acyclic conjunctive queries
over binary-schema databases.

Build an index once per database (self-loop encoding, labeled graph, colour
refinement, colour database); then answer Boolean / counting / enumeration
queries in time that depends on the index, not on the raw data size.
"""
from .model import (
    Atom,
    ColorcqError,
    ConjunctiveQuery,
    Database,
    ParseError,
    Schema,
    SchemaError,
    load_database,
    parse_query,
)
from .graph import EdgeLabel, LabeledGraph, Sigma1, build_labeled_graph, encode_self_loops
from .refine import Coloring, available_backends, default_backend, is_stable, naive_refine, refine
from .index import ColorIndex, build_index, hat_succ_count, hat_succ_set, index_stats, load_index, save_index
from .frontend import (
    FcCheck,
    QueryPlan,
    QueryRejected,
    build_plan,
    check_free_connex_acyclic,
    decompose_components,
    explain_plan,
    plan_query,
    remove_self_loops,
)
from .evaluation import (
    EnumerationSession,
    cde_fc_acq,
    count_answers,
    enumerate_answers,
    eval_boolean,
)
from .oracle import naive_count, naive_eval

__version__ = "0.1.0"

__all__ = [
    "Atom",
    "ColorcqError",
    "ConjunctiveQuery",
    "Database",
    "ParseError",
    "Schema",
    "SchemaError",
    "load_database",
    "parse_query",
    "EdgeLabel",
    "LabeledGraph",
    "Sigma1",
    "build_labeled_graph",
    "encode_self_loops",
    "Coloring",
    "available_backends",
    "default_backend",
    "is_stable",
    "naive_refine",
    "refine",
    "ColorIndex",
    "build_index",
    "hat_succ_count",
    "hat_succ_set",
    "index_stats",
    "load_index",
    "save_index",
    "FcCheck",
    "QueryPlan",
    "QueryRejected",
    "build_plan",
    "check_free_connex_acyclic",
    "decompose_components",
    "explain_plan",
    "plan_query",
    "remove_self_loops",
    "EnumerationSession",
    "cde_fc_acq",
    "count_answers",
    "enumerate_answers",
    "eval_boolean",
    "naive_count",
    "naive_eval",
    "__version__",
]
