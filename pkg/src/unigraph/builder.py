"""Construction of the unified semantic graph from annotated documents.

Two-level merging: per sentence, dependency-tree tokens are merged into
phrases (punctuation pruned, coreference mention spans collapsed first,
then modifier-style dependents absorbed into their heads); across
sentences, phrases that are textually identical or co-mentioned in one
coreference chain are merged into nodes.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

from unigraph.annotations import (
    ROOT,
    AnnotatedDocument,
    CoreferenceChain,
    DocumentSet,
    Span,
    Token,
    merge_coreference_chains,
)
from unigraph.graph import EdgeKind, GraphEdge, GraphNode, NodeType, Phrase, SemanticGraph

log = logging.getLogger(__name__)

# A dependent is absorbed into its head when its relation is one of these
# and the combined token set stays contiguous. Centralized so callers can
# pass a custom table to build_graph.
MERGEABLE_RELATIONS = frozenset({
    "det",                                # determiner
    "amod",                               # adjectival modifier
    "compound", "compound:prt",           # compounds and verb particles
    "nummod",                             # numeric modifier
    "poss", "nmod:poss",                  # possessive marker
    "flat", "flat:name", "fixed",         # multiword expressions
    "case",                               # case marker
    "prt",                                # particle (non-UD label)
    "aux", "aux:pass", "auxpass",         # auxiliaries
    "cop",                                # copula
    "neg",                                # negation
})

UNIVERSAL_POS_TAGS = frozenset({
    "ADJ", "ADP", "ADV", "AUX", "CCONJ", "DET", "INTJ", "NOUN", "NUM",
    "PART", "PRON", "PROPN", "PUNCT", "SCONJ", "SYM", "VERB", "X",
})


def pos_to_node_type(pos: str) -> NodeType:
    if pos in ("NOUN", "PROPN", "PRON"):
        return NodeType.N
    if pos in ("VERB", "AUX"):
        return NodeType.V
    if pos not in UNIVERSAL_POS_TAGS:
        log.warning("unknown POS tag %r mapped to node type O", pos)
    return NodeType.O


class SentenceUnits:
    """Mutable working view of one sentence during phrase construction.

    Tokens are addressed by sentence-local position. Each token holds at
    most one incoming arc (its dependency head); ``head_of[i] == ROOT``
    marks forest roots, including tokens detached by punctuation pruning.
    Units partition the surviving tokens; a unit collapsed from a
    coreference mention is frozen and takes no further part in merging.
    """

    def __init__(self, sentence_id: int, offset: int, tokens: list[Token],
                 arcs: list[tuple[int, int, str]]):
        self.sentence_id = sentence_id
        self.offset = offset  # global position of sentence-local token 0
        self.tokens = list(tokens)
        n = len(tokens)
        self.alive = [True] * n
        self.head_of = [ROOT] * n
        self.rel_of: list[str | None] = [None] * n
        for head, dep, rel in arcs:
            self.head_of[dep] = head
            self.rel_of[dep] = rel
        self.unit_of = list(range(n))
        self.members: dict[int, list[int]] = {i: [i] for i in range(n)}
        self.unit_head: dict[int, int] = {i: i for i in range(n)}
        self.chain_tags: dict[int, frozenset[int]] = {}

    # -- basic views --------------------------------------------------

    def alive_rank(self) -> dict[int, int]:
        return {t: r for r, t in enumerate(i for i in range(len(self.tokens)) if self.alive[i])}

    def unit_ids(self) -> list[int]:
        return sorted({self.unit_of[i] for i in range(len(self.tokens)) if self.alive[i]})

    def unit_span(self, u: int) -> tuple[int, int]:
        ms = self.members[u]
        return (min(ms), max(ms))

    # -- mutations ----------------------------------------------------

    def remove_token(self, i: int) -> None:
        self.alive[i] = False
        self.head_of[i] = ROOT
        self.rel_of[i] = None
        for d in range(len(self.tokens)):
            if self.alive[d] and self.head_of[d] == i:
                self.head_of[d] = ROOT
                self.rel_of[d] = None
        del self.members[self.unit_of[i]]

    def collapse(self, token_ids: list[int], chain_id: int) -> int:
        """Fuse ``token_ids`` (and any unit they already belong to) into one
        frozen unit tagged with ``chain_id``. Returns the new unit id."""
        absorbed = sorted({self.unit_of[t] for t in token_ids})
        new_members = sorted(m for u in absorbed for m in self.members[u])
        tags = {chain_id}
        new_id = absorbed[0]
        for u in absorbed:
            del self.members[u]
            tags |= self.chain_tags.pop(u, frozenset())
            self.unit_head.pop(u, None)
        self.members[new_id] = new_members
        for m in new_members:
            self.unit_of[m] = new_id
        member_set = set(new_members)
        external = [m for m in new_members if self.head_of[m] not in member_set]
        self.unit_head[new_id] = external[0] if external else new_members[0]
        self.chain_tags[new_id] = frozenset(tags)
        return new_id

    def absorb(self, child: int, parent: int) -> None:
        """Merge unit ``child`` into unit ``parent`` (head stays parent's)."""
        self.members[parent] = sorted(self.members[parent] + self.members[child])
        for m in self.members[child]:
            self.unit_of[m] = parent
        del self.members[child]
        self.unit_head.pop(child, None)


def sentence_units(doc: AnnotatedDocument, sentence_id: int, doc_offset: int) -> SentenceUnits:
    """Build the working view of one sentence of ``doc``.

    ``doc_offset`` is the document's global token offset under set
    concatenation.
    """
    local_ids = doc.sentence_token_indices()[sentence_id]
    base = local_ids[0]
    tokens = [doc.tokens[i] for i in local_ids]
    arcs = []
    for e in doc.dependency_edges:
        if doc.tokens[e.dependent].sentence_id != sentence_id:
            continue
        head = ROOT if e.head == ROOT else e.head - base
        arcs.append((head, e.dependent - base, e.relation))
    return SentenceUnits(sentence_id, doc_offset + base, tokens, arcs)


# --------------------------------------------------------------------------
# Per-sentence operations
# --------------------------------------------------------------------------

def prune_punctuation(units: SentenceUnits) -> SentenceUnits:
    """Remove punctuation tokens and every edge incident to them.

    The remaining arcs may form a forest rather than a tree.
    """
    for i, tok in enumerate(units.tokens):
        if tok.is_punct and units.alive[i]:
            units.remove_token(i)
    return units


def identify_node_types(units: SentenceUnits) -> dict[int, NodeType]:
    """Type each current unit by its head token's POS tag.

    Returns a map from unit head token (sentence-local) to node type.
    """
    return {units.unit_head[u]: pos_to_node_type(units.tokens[units.unit_head[u]].pos_tag)
            for u in units.unit_ids()}


def merge_coref_phrases(units: SentenceUnits,
                        chains: list[CoreferenceChain]) -> SentenceUnits:
    """Collapse every chain mention span of this sentence into one unit.

    Mentions are processed in span order so that, of two overlapping but
    not nested mentions, the later-starting one is the one skipped (with a
    diagnostic). Nested or identical spans collapse into the outer unit.
    """
    mentions = [(m.start, m.end, cid, m) for cid, chain in enumerate(chains)
                for m in chain.mentions if m.sentence_id == units.sentence_id]
    for _start, _end, chain_id, m in sorted(mentions, key=lambda x: (x[0], x[1], x[2])):
        span_tokens = [t for t in range(m.start, m.end + 1)
                       if 0 <= t < len(units.tokens) and units.alive[t]]
        if not span_tokens:
            log.warning("mention %s is empty after punctuation pruning; skipped", m.as_tuple())
            continue
        span_set = set(range(m.start, m.end + 1))
        if any(not set(units.members[units.unit_of[t]]) <= span_set for t in span_tokens):
            log.warning("mention %s crosses a collapsed unit boundary; skipped", m.as_tuple())
            continue
        units.collapse(span_tokens, chain_id)
    return units


def merge_nodes(units: SentenceUnits,
                mergeable_relations: frozenset[str] = MERGEABLE_RELATIONS) -> SentenceUnits:
    """Merge consecutive tokens that form one semantic unit into phrases.

    Walks each dependency tree depth-first, children in surface order, and
    absorbs a dependent unit into its head unit when the dependent's
    relation is mergeable and the union stays contiguous over surviving
    tokens. Deepest units merge first so inner phrases form before outer
    ones. Coreference-collapsed units stay frozen on both sides.
    """
    rank = units.alive_rank()

    def contiguous(u: int, v: int) -> bool:
        ms = units.members[u] + units.members[v]
        rs = [rank[m] for m in ms]
        return max(rs) - min(rs) + 1 == len(rs)

    def parent_unit(u: int) -> int | None:
        h = units.head_of[units.unit_head[u]]
        return None if h == ROOT else units.unit_of[h]

    def children_of(u: int) -> list[int]:
        kids = [v for v in units.unit_ids() if v != u and parent_unit(v) == u]
        return sorted(kids, key=lambda v: units.unit_span(v)[0])

    def try_absorb(u: int) -> None:
        while True:
            merged = False
            for child in children_of(u):
                rel = units.rel_of[units.unit_head[child]]
                if child in units.chain_tags or u in units.chain_tags:
                    continue
                if rel not in mergeable_relations:
                    continue
                if not contiguous(u, child):
                    continue
                units.absorb(child, u)
                merged = True
            if not merged:
                break

    def visit(u: int, seen: set[int]) -> None:
        seen.add(u)
        for child in children_of(u):
            if child not in seen:
                visit(child, seen)
        try_absorb(u)

    seen: set[int] = set()
    roots = [u for u in units.unit_ids() if parent_unit(u) is None]
    for r in sorted(roots, key=lambda u: units.unit_span(u)[0]):
        visit(r, seen)
    return units


@dataclass
class SentencePhrases:
    """Final phrases of one sentence plus the surviving intra-sentence edges.

    Edges are indices into ``phrases`` oriented in surface order, and
    ``chain_tags[i]`` carries the coreference chains phrase ``i`` belongs to.
    """

    phrases: list[Phrase] = field(default_factory=list)
    edges: list[tuple[int, int, str]] = field(default_factory=list)
    chain_tags: list[frozenset[int]] = field(default_factory=list)


def extract_phrases(units: SentenceUnits) -> SentencePhrases:
    """Freeze the unit partition into phrases and lift surviving arcs."""
    out = SentencePhrases()
    unit_order = sorted(units.unit_ids(), key=lambda u: units.unit_span(u)[0])
    index_of: dict[int, int] = {}
    for i, u in enumerate(unit_order):
        ms = units.members[u]
        head = units.unit_head[u]
        head_pos = units.tokens[head].pos_tag
        out.phrases.append(Phrase(
            sentence_id=units.sentence_id,
            start=min(ms), end=max(ms), head=head,
            phrase_type=pos_to_node_type(head_pos),
            tokens=tuple(units.offset + m for m in ms),
            text=" ".join(units.tokens[m].text for m in ms),
            head_pos=head_pos))
        out.chain_tags.append(units.chain_tags.get(u, frozenset()))
        index_of[u] = i

    seen: set[tuple[int, int]] = set()
    for dep in range(len(units.tokens)):
        if not units.alive[dep]:
            continue
        head = units.head_of[dep]
        if head == ROOT or units.unit_of[dep] == units.unit_of[head]:
            continue
        a, b = index_of[units.unit_of[dep]], index_of[units.unit_of[head]]
        src, dst = (a, b) if out.phrases[a].start < out.phrases[b].start else (b, a)
        if (src, dst) not in seen:
            seen.add((src, dst))
            out.edges.append((src, dst, units.rel_of[dep] or "dep"))
    return out


# --------------------------------------------------------------------------
# Cross-sentence merging
# --------------------------------------------------------------------------

def _normalize_text(text: str) -> str:
    return " ".join(text.casefold().split())


def merge_phrases_across(sentences: list[SentencePhrases]) -> SemanticGraph:
    """Merge phrases into graph nodes across sentences and documents.

    Two phrases share a node when they carry the same coreference chain id
    or when both are non-pronominal N phrases with identical normalized
    text. Node type is the majority type of the members (ties fall to N);
    canonical text is the longest non-pronominal member text.
    """
    flat: list[Phrase] = []
    flat_chains: list[frozenset[int]] = []
    edge_lists: list[tuple[int, int, str]] = []  # indices into flat
    for sp in sentences:
        base = len(flat)
        flat.extend(sp.phrases)
        flat_chains.extend(sp.chain_tags)
        edge_lists.extend((base + s, base + d, rel) for s, d, rel in sp.edges)

    parent = list(range(len(flat)))

    def find(i: int) -> int:
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    def union(i: int, j: int) -> None:
        ri, rj = find(i), find(j)
        if ri != rj:
            parent[max(ri, rj)] = min(ri, rj)

    chain_first: dict[int, int] = {}
    text_first: dict[str, int] = {}
    for i, phrase in enumerate(flat):
        for cid in sorted(flat_chains[i]):
            if cid in chain_first:
                union(chain_first[cid], i)
            else:
                chain_first[cid] = i
        if phrase.phrase_type is NodeType.N and not phrase.is_pronominal:
            key = _normalize_text(phrase.text)
            if key in text_first:
                union(text_first[key], i)
            else:
                text_first[key] = i

    node_of_root: dict[int, int] = {}
    group_members: dict[int, list[int]] = {}
    for i in range(len(flat)):
        r = find(i)
        if r not in node_of_root:
            node_of_root[r] = len(node_of_root)
        group_members.setdefault(r, []).append(i)

    nodes: list[GraphNode] = []
    alignment: dict[int, int] = {}
    for r, nid in sorted(node_of_root.items(), key=lambda kv: kv[1]):
        members = [flat[i] for i in group_members[r]]
        counts: dict[NodeType, int] = {}
        for p in members:
            counts[p.phrase_type] = counts.get(p.phrase_type, 0) + 1
        best = max(counts.values())
        winners = [t for t, c in counts.items() if c == best]
        node_type = winners[0] if len(winners) == 1 else NodeType.N
        non_pron = [p for p in members if not p.is_pronominal]
        pool = non_pron or members
        canonical = max(pool, key=lambda p: len(p.text)).text
        nodes.append(GraphNode(id=nid, node_type=node_type,
                               phrases=tuple(members), canonical_text=canonical))
        for p in members:
            for t in p.tokens:
                alignment[t] = nid

    edges: list[GraphEdge] = []
    seen: set[tuple[int, int]] = set()
    for s, d, rel in edge_lists:
        ns, nd = node_of_root[find(s)], node_of_root[find(d)]
        if ns == nd or (ns, nd) in seen:
            continue
        seen.add((ns, nd))
        edges.append(GraphEdge(src=ns, dst=nd, kind=EdgeKind.ORIGINAL, relation_label=rel))

    graph = SemanticGraph(nodes=tuple(nodes), edges=tuple(edges), alignment=alignment)
    graph.validate()
    return graph


def build_graph(ds: DocumentSet,
                mergeable_relations: frozenset[str] = MERGEABLE_RELATIONS) -> SemanticGraph:
    """Construct the unified semantic graph of a document set.

    Composition per sentence: prune punctuation, type units, collapse
    coreference mentions, merge modifier dependents into phrases; then one
    cross-sentence phrase merge. Deterministic for fixed input; skippable
    mention conflicts are logged, never fatal.
    """
    chains = merge_coreference_chains(ds.all_chains())
    results: list[SentencePhrases] = []
    for doc, doc_off in zip(ds.documents, ds.token_offsets()):
        for sid in sorted(doc.sentence_token_indices()):
            units = sentence_units(doc, sid, doc_off)
            prune_punctuation(units)
            identify_node_types(units)
            merge_coref_phrases(units, chains)
            merge_nodes(units, mergeable_relations)
            results.append(extract_phrases(units))
    return merge_phrases_across(results)


def coref_mentions_by_sentence(chains: list[CoreferenceChain]) -> dict[int, list[tuple[int, Span]]]:
    """Index merged chain mentions by global sentence id."""
    out: dict[int, list[tuple[int, Span]]] = {}
    for cid, chain in enumerate(chains):
        for m in chain.mentions:
            out.setdefault(m.sentence_id, []).append((cid, m))
    return out
