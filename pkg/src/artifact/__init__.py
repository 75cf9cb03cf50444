"""Exact vertex sparsifiers for reachability, cuts, distances and flows.

* ``graph_core``   terminal graphs, minor traces, the graph file format
* ``reach_minor``  reachability-preserving minors of digraphs
* ``planar_reach`` the planar reachability pipeline (separators, pair sets)
* ``wye_delta``    exact local rewrites and their step logs
* ``os_pipeline``  cut/distance/flow sparsifiers for terminals on one face
* ``oracles``      brute-force ground truth
* ``instances``    seeded generators and lower-bound families
* ``cli``          the ``vsparse`` command
"""

from .graph_core import GraphError, MinorTrace, TerminalGraph, parse_graph, serialize_graph
from .os_pipeline import build_sparsifier_os
from .planar_reach import sparsify_planar_reach
from .reach_minor import minor_sparsify

__version__ = "0.1.0"

__all__ = [
    "GraphError",
    "MinorTrace",
    "TerminalGraph",
    "build_sparsifier_os",
    "minor_sparsify",
    "parse_graph",
    "serialize_graph",
    "sparsify_planar_reach",
]
