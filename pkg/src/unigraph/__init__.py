"""Unified semantic graphs for long-input abstractive summarization.

Builds phrase-level semantic graphs from dependency and coreference
annotations, augments them for graph attention, and runs a desk-scale
graph encoder-decoder whose decoder steers generation with
graph-propagated salient scores.
"""

from unigraph.annotations import (
    AnnotatedDocument,
    CoreferenceChain,
    DependencyEdge,
    DocumentSet,
    Span,
    Token,
    merge_coreference_chains,
    parse_annotation_file,
    serialize_annotations,
)
from unigraph.augment import (
    AdjacencyMatrix,
    NormalizedAdjacency,
    add_reverse_and_self_loops,
    add_shortcut_edges,
    add_supernode,
    adjacency,
    augment_graph,
    degree_normalize,
)
from unigraph.builder import build_graph
from unigraph.graph import (
    EdgeKind,
    GraphEdge,
    GraphNode,
    GraphStats,
    NodeType,
    Phrase,
    SemanticGraph,
    enumerate_meta_paths,
    graph_from_json,
    graph_stats,
    graph_to_dot,
    graph_to_json,
)

__version__ = "0.1.0"

__all__ = [
    "AnnotatedDocument", "CoreferenceChain", "DependencyEdge", "DocumentSet",
    "Span", "Token", "merge_coreference_chains", "parse_annotation_file",
    "serialize_annotations",
    "AdjacencyMatrix", "NormalizedAdjacency", "add_reverse_and_self_loops",
    "add_shortcut_edges", "add_supernode", "adjacency", "augment_graph",
    "degree_normalize",
    "build_graph",
    "EdgeKind", "GraphEdge", "GraphNode", "GraphStats", "NodeType", "Phrase",
    "SemanticGraph", "enumerate_meta_paths", "graph_from_json", "graph_stats",
    "graph_to_dot", "graph_to_json",
    "__version__",
]
