"""Unified semantic graph: typed nodes, kind-tagged edges, token alignment.

Nodes are concepts merged from co-referent phrases; ORIGINAL edges derive
from dependency arcs between the phrases of two nodes and are oriented in
surface order (earlier phrase -> later phrase), which is also how composite
relations such as subject-verb-object read off the graph as N-V-N paths.
Dependency relation labels are kept as metadata only; none of the numerics
consume them.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum

from unigraph.errors import GraphError


class NodeType(Enum):
    N = "N"          # noun phrase
    V = "V"          # verb phrase
    O = "O"          # other phrase
    SUPER = "SUPER"  # artificial connectivity node, added by augmentation only


class EdgeKind(Enum):
    ORIGINAL = "ORIGINAL"
    REVERSE = "REVERSE"
    SELF_LOOP = "SELF_LOOP"
    SHORTCUT = "SHORTCUT"
    SUPER_LINK = "SUPER_LINK"


ALL_EDGE_KINDS = frozenset(EdgeKind)


@dataclass(frozen=True)
class Phrase:
    """A contiguous semantic unit of one sentence.

    ``start``/``end`` are sentence-local inclusive token bounds; pruned
    punctuation inside the bounds is not a member. ``tokens`` holds the
    member tokens as global positions under document-set concatenation,
    which is what node-state pooling and the alignment map consume.
    """

    sentence_id: int
    start: int
    end: int
    head: int                    # sentence-local index of the head token
    phrase_type: NodeType
    tokens: tuple[int, ...]      # global token positions of the members
    text: str
    head_pos: str = ""           # POS tag of the head token

    @property
    def span(self) -> tuple[int, int, int]:
        return (self.sentence_id, self.start, self.end)

    @property
    def is_pronominal(self) -> bool:
        return self.head_pos == "PRON"


@dataclass(frozen=True)
class GraphNode:
    id: int
    node_type: NodeType
    phrases: tuple[Phrase, ...]
    canonical_text: str

    def all_tokens(self) -> list[int]:
        return sorted(t for p in self.phrases for t in p.tokens)


@dataclass(frozen=True)
class GraphEdge:
    src: int
    dst: int
    kind: EdgeKind
    relation_label: str | None = None


@dataclass(frozen=True)
class SemanticGraph:
    nodes: tuple[GraphNode, ...] = ()
    edges: tuple[GraphEdge, ...] = ()
    # global token position -> node id; punctuation tokens are unmapped
    alignment: dict[int, int] = field(default_factory=dict)

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    def edges_of_kind(self, kinds: frozenset[EdgeKind] | set[EdgeKind]) -> list[GraphEdge]:
        return [e for e in self.edges if e.kind in kinds]

    def edge_set(self) -> set[tuple[int, int, EdgeKind]]:
        return {(e.src, e.dst, e.kind) for e in self.edges}

    def has_super(self) -> bool:
        return any(n.node_type is NodeType.SUPER for n in self.nodes)

    def validate(self) -> None:
        ids = {n.id for n in self.nodes}
        if ids != set(range(len(self.nodes))):
            raise GraphError("node ids must be dense 0..n-1")
        for e in self.edges:
            if e.src not in ids or e.dst not in ids:
                raise GraphError(f"edge {e} references a missing node")
        if len(self.edges) != len(self.edge_set()):
            raise GraphError("duplicate (src, dst, kind) edge")
        for tok, nid in self.alignment.items():
            if nid not in ids:
                raise GraphError(f"alignment of token {tok} targets missing node {nid}")


@dataclass(frozen=True)
class GraphStats:
    node_count: int
    edge_count: int
    input_token_count: int
    component_count: int


def graph_stats(g: SemanticGraph, input_token_count: int) -> GraphStats:
    """Exact node/edge counts plus weakly connected components over ORIGINAL edges."""
    n = g.n_nodes
    parent = list(range(n))

    def find(i: int) -> int:
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for e in g.edges:
        if e.kind is EdgeKind.ORIGINAL:
            ri, rj = find(e.src), find(e.dst)
            if ri != rj:
                parent[max(ri, rj)] = min(ri, rj)
    components = len({find(i) for i in range(n)})
    return GraphStats(node_count=n, edge_count=len(g.edges),
                      input_token_count=input_token_count, component_count=components)


def enumerate_meta_paths(g: SemanticGraph, pattern: list[NodeType] | tuple[NodeType, ...]) -> list[tuple[int, ...]]:
    """All directed ORIGINAL-edge paths whose node types match ``pattern``.

    Pattern length must be 2 or 3. Length-3 results follow edge-join
    semantics: (i, j, k) qualifies whenever edges i->j and j->k exist, so a
    path may return to its start node. Output is deduplicated and sorted.
    """
    if len(pattern) not in (2, 3):
        raise ValueError(f"meta-path pattern must have length 2 or 3, got {len(pattern)}")
    types = [n.node_type for n in g.nodes]
    original = sorted({(e.src, e.dst) for e in g.edges if e.kind is EdgeKind.ORIGINAL})

    if len(pattern) == 2:
        return [(u, v) for (u, v) in original
                if types[u] is pattern[0] and types[v] is pattern[1]]

    by_src: dict[int, list[int]] = {}
    for u, v in original:
        by_src.setdefault(u, []).append(v)
    out = []
    for u, v in original:
        if types[u] is not pattern[0] or types[v] is not pattern[1]:
            continue
        for w in by_src.get(v, ()):
            if types[w] is pattern[2]:
                out.append((u, v, w))
    return sorted(set(out))


def parse_meta_path_pattern(text: str) -> list[NodeType]:
    """Parse a pattern such as ``N-V-N`` into node types."""
    try:
        return [NodeType[part.strip().upper()] for part in text.split("-")]
    except KeyError as exc:
        raise ValueError(f"unknown node type in meta-path pattern {text!r}") from exc


# --------------------------------------------------------------------------
# Serialization
# --------------------------------------------------------------------------

def graph_to_dict(g: SemanticGraph) -> dict:
    return {
        "nodes": [
            {"id": n.id, "type": n.node_type.value,
             "phrases": [
                 {"sentence": p.sentence_id, "start": p.start, "end": p.end,
                  "head": p.head, "type": p.phrase_type.value,
                  "tokens": list(p.tokens), "text": p.text, "head_pos": p.head_pos}
                 for p in n.phrases],
             "canonical": n.canonical_text}
            for n in g.nodes],
        "edges": [
            {"src": e.src, "dst": e.dst, "kind": e.kind.value, "rel": e.relation_label}
            for e in g.edges],
        "alignment": {str(tok): nid for tok, nid in sorted(g.alignment.items())},
    }


def graph_to_json(g: SemanticGraph) -> bytes:
    return json.dumps(graph_to_dict(g), indent=2, ensure_ascii=False).encode("utf-8") + b"\n"


def graph_from_dict(data: dict) -> SemanticGraph:
    nodes = tuple(
        GraphNode(
            id=int(n["id"]), node_type=NodeType(n["type"]),
            phrases=tuple(
                Phrase(sentence_id=int(p["sentence"]), start=int(p["start"]), end=int(p["end"]),
                       head=int(p["head"]), phrase_type=NodeType(p["type"]),
                       tokens=tuple(int(t) for t in p["tokens"]), text=str(p["text"]),
                       head_pos=str(p.get("head_pos", "")))
                for p in n["phrases"]),
            canonical_text=str(n["canonical"]))
        for n in data["nodes"])
    edges = tuple(
        GraphEdge(src=int(e["src"]), dst=int(e["dst"]), kind=EdgeKind(e["kind"]),
                  relation_label=e.get("rel"))
        for e in data["edges"])
    alignment = {int(tok): int(nid) for tok, nid in data.get("alignment", {}).items()}
    g = SemanticGraph(nodes=nodes, edges=edges, alignment=alignment)
    g.validate()
    return g


def graph_from_json(data: bytes | str) -> SemanticGraph:
    return graph_from_dict(json.loads(data))


_DOT_SHAPE = {NodeType.N: "box", NodeType.V: "ellipse", NodeType.O: "diamond",
              NodeType.SUPER: "doubleoctagon"}
_DOT_STYLE = {EdgeKind.ORIGINAL: "solid", EdgeKind.REVERSE: "dotted",
              EdgeKind.SELF_LOOP: "dotted", EdgeKind.SHORTCUT: "dashed",
              EdgeKind.SUPER_LINK: "dashed"}


def graph_to_dot(g: SemanticGraph) -> str:
    """GraphViz export; node shape encodes type, edge style encodes kind."""
    lines = ["digraph semantic_graph {"]
    for n in g.nodes:
        label = (n.canonical_text or n.node_type.value).replace('"', r"\"")
        lines.append(f'  n{n.id} [shape={_DOT_SHAPE[n.node_type]} label="{label}"];')
    for e in g.edges:
        attrs = f"style={_DOT_STYLE[e.kind]}"
        if e.kind is EdgeKind.ORIGINAL and e.relation_label:
            attrs += f' label="{e.relation_label}"'
        lines.append(f"  n{e.src} -> n{e.dst} [{attrs}];")
    lines.append("}")
    return "\n".join(lines) + "\n"
