"""Graph augmentation passes and adjacency-matrix forms.

Reverse and self-loop edges let attention learn backward information; a
supernode guarantees one connected component; shortcut edges expose
two-hop relations directly. The default pipeline order is reverse/self
loops, shortcuts, supernode, then one more self-loop pass so the supernode
also carries a self loop. The supernode never takes part in the shortcut
computation: routing every pair through it would make the whole graph
two-hop adjacent.

Adjacency convention: A[i][j] = 1 iff an edge j -> i exists (columns index
sources), so the degree-normalized form A_hat = A D^-1 is column-stochastic
and propagation conserves score mass.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from unigraph.errors import GraphError
from unigraph.graph import ALL_EDGE_KINDS, EdgeKind, GraphEdge, GraphNode, NodeType, SemanticGraph


@dataclass(frozen=True)
class AdjacencyMatrix:
    n: int
    entries: np.ndarray  # bool [n, n], entries[i, j] == True iff edge j -> i

    def __post_init__(self):
        if self.entries.shape != (self.n, self.n):
            raise GraphError(f"adjacency shape {self.entries.shape} != ({self.n}, {self.n})")


@dataclass(frozen=True)
class NormalizedAdjacency:
    n: int
    entries: np.ndarray  # float64 [n, n], columns sum to 1


def add_reverse_and_self_loops(g: SemanticGraph) -> SemanticGraph:
    """Add a REVERSE twin for every ORIGINAL edge and a SELF_LOOP per node."""
    present = g.edge_set()
    new_edges = list(g.edges)
    for e in g.edges:
        if e.kind is EdgeKind.ORIGINAL and (e.dst, e.src, EdgeKind.REVERSE) not in present:
            present.add((e.dst, e.src, EdgeKind.REVERSE))
            new_edges.append(GraphEdge(src=e.dst, dst=e.src, kind=EdgeKind.REVERSE))
    for node in g.nodes:
        if (node.id, node.id, EdgeKind.SELF_LOOP) not in present:
            present.add((node.id, node.id, EdgeKind.SELF_LOOP))
            new_edges.append(GraphEdge(src=node.id, dst=node.id, kind=EdgeKind.SELF_LOOP))
    return SemanticGraph(nodes=g.nodes, edges=tuple(new_edges), alignment=g.alignment)


def add_shortcut_edges(g: SemanticGraph) -> SemanticGraph:
    """Connect every node to its two-hop neighbors over ORIGINAL/REVERSE edges.

    A SHORTCUT u -> w is added for every directed 2-path u -> v -> w with
    pairwise distinct nodes, unless any edge u -> w already exists.
    Supernodes are left out entirely.
    """
    n = g.n_nodes
    if n == 0:
        return g
    is_super = np.array([node.node_type is NodeType.SUPER for node in g.nodes])
    step = np.zeros((n, n), dtype=bool)  # step[i, j]: edge j -> i, ORIGINAL or REVERSE
    for e in g.edges:
        if e.kind in (EdgeKind.ORIGINAL, EdgeKind.REVERSE) and e.src != e.dst:
            step[e.dst, e.src] = True
    step[is_super, :] = False
    step[:, is_super] = False

    two_hop = (step.astype(np.int64) @ step.astype(np.int64)) > 0
    np.fill_diagonal(two_hop, False)

    existing = np.zeros((n, n), dtype=bool)
    for e in g.edges:
        existing[e.dst, e.src] = True

    new_edges = list(g.edges)
    dst_idx, src_idx = np.nonzero(two_hop & ~existing)
    for dst, src in sorted(zip(dst_idx.tolist(), src_idx.tolist()), key=lambda p: (p[1], p[0])):
        new_edges.append(GraphEdge(src=src, dst=dst, kind=EdgeKind.SHORTCUT))
    return SemanticGraph(nodes=g.nodes, edges=tuple(new_edges), alignment=g.alignment)


def add_supernode(g: SemanticGraph) -> SemanticGraph:
    """Append one SUPER node linked bidirectionally to every existing node."""
    if g.has_super():
        return g
    sid = g.n_nodes
    super_node = GraphNode(id=sid, node_type=NodeType.SUPER, phrases=(),
                           canonical_text="<super>")
    new_edges = list(g.edges)
    for node in g.nodes:
        new_edges.append(GraphEdge(src=sid, dst=node.id, kind=EdgeKind.SUPER_LINK))
        new_edges.append(GraphEdge(src=node.id, dst=sid, kind=EdgeKind.SUPER_LINK))
    return SemanticGraph(nodes=g.nodes + (super_node,), edges=tuple(new_edges),
                         alignment=g.alignment)


def augment_graph(g: SemanticGraph, *, reverse_self_loops: bool = True,
                  shortcuts: bool = True, supernode: bool = True) -> SemanticGraph:
    """Full augmentation pipeline; idempotent, flags disable single passes."""
    if reverse_self_loops:
        g = add_reverse_and_self_loops(g)
    if shortcuts:
        g = add_shortcut_edges(g)
    if supernode:
        g = add_supernode(g)
        if reverse_self_loops:
            g = add_reverse_and_self_loops(g)  # self loop for the new supernode
    return g


def adjacency(g: SemanticGraph, kinds: frozenset[EdgeKind] | set[EdgeKind] | None = None) -> AdjacencyMatrix:
    """Boolean adjacency over the selected edge kinds (all kinds by default)."""
    if kinds is None:
        kinds = ALL_EDGE_KINDS
    n = g.n_nodes
    mat = np.zeros((n, n), dtype=bool)
    for e in g.edges:
        if e.kind in kinds:
            mat[e.dst, e.src] = True
    return AdjacencyMatrix(n=n, entries=mat)


def degree_normalize(a: AdjacencyMatrix) -> NormalizedAdjacency:
    """Column-stochastic A_hat = A D^-1 with D the diagonal out-degree matrix.

    Every column of A must have at least one nonzero, which the self-loop
    pass guarantees.
    """
    out_degree = a.entries.sum(axis=0)
    if np.any(out_degree == 0):
        cols = np.nonzero(out_degree == 0)[0].tolist()
        raise GraphError(f"self-loop pass missing: zero out-degree columns {cols}")
    entries = a.entries.astype(np.float64) / out_degree[np.newaxis, :].astype(np.float64)
    return NormalizedAdjacency(n=a.n, entries=entries)
