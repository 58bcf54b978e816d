"""Annotated-document data model and ingestion of the annotation JSON format.

One annotation file holds one document set:

    {"documents": [
        {"doc_id": str,
         "sentences": [
             {"tokens": [{"text": str, "pos": str, "is_punct": bool}],
              "dependencies": [{"head": int, "dep": int, "rel": str}]}
         ],
         "coref_chains": [[{"sentence": int, "start": int, "end": int}]]}
    ]}

Dependency indices are sentence-local and 0-based; head -1 denotes ROOT.
Coreference spans are inclusive and use a *global* sentence numbering that
runs consecutively across the documents of the set, so a chain may reference
mentions in other documents of the same set (single-document exporters never
need to know this: for them global and local numbering coincide).

All types are immutable after construction and safe to share across threads.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from unigraph.errors import AnnotationParseError, AnnotationValidationError

ROOT = -1

# Coarse universal tags treated as punctuation unless the file overrides
# is_punct explicitly.
PUNCTUATION_TAGS = frozenset({"PUNCT", "SYM"})

NOUN_TAGS = frozenset({"NOUN", "PROPN", "PRON"})
VERB_TAGS = frozenset({"VERB", "AUX"})


@dataclass(frozen=True)
class Token:
    """One token of a document.

    ``index`` is the 0-based position within the document; ``sentence_id``
    is the global sentence index across the whole document set.
    """

    index: int
    text: str
    pos_tag: str
    sentence_id: int
    is_punct: bool


@dataclass(frozen=True)
class DependencyEdge:
    """A dependency arc between two tokens of one sentence.

    ``head`` and ``dependent`` are document-local token indices;
    ``head == ROOT`` marks the sentence root.
    """

    head: int
    dependent: int
    relation: str


@dataclass(frozen=True)
class Span:
    """Inclusive token span: global sentence id plus sentence-local bounds."""

    sentence_id: int
    start: int
    end: int

    def as_tuple(self) -> tuple[int, int, int]:
        return (self.sentence_id, self.start, self.end)


@dataclass(frozen=True)
class CoreferenceChain:
    """An ordered set of mentions referring to the same entity."""

    mentions: tuple[Span, ...]


@dataclass(frozen=True)
class AnnotatedDocument:
    doc_id: str
    tokens: tuple[Token, ...]
    dependency_edges: tuple[DependencyEdge, ...]
    coref_chains: tuple[CoreferenceChain, ...]

    def sentence_token_indices(self) -> dict[int, list[int]]:
        """Map global sentence id -> document-local token indices, in order."""
        out: dict[int, list[int]] = {}
        for tok in self.tokens:
            out.setdefault(tok.sentence_id, []).append(tok.index)
        return out


@dataclass(frozen=True)
class DocumentSet:
    documents: tuple[AnnotatedDocument, ...] = field(default_factory=tuple)

    @property
    def total_tokens(self) -> int:
        return sum(len(d.tokens) for d in self.documents)

    def token_offsets(self) -> list[int]:
        """Global token offset of each document under concatenation."""
        offsets, acc = [], 0
        for doc in self.documents:
            offsets.append(acc)
            acc += len(doc.tokens)
        return offsets

    def all_chains(self) -> list[CoreferenceChain]:
        return [c for doc in self.documents for c in doc.coref_chains]

    def sentences(self) -> list[tuple[int, int, list[Token]]]:
        """All sentences in set order as (global sentence id, global token
        offset of the sentence's first token, tokens)."""
        out: list[tuple[int, int, list[Token]]] = []
        for doc, doc_off in zip(self.documents, self.token_offsets()):
            for sid, indices in sorted(doc.sentence_token_indices().items()):
                toks = [doc.tokens[i] for i in indices]
                out.append((sid, doc_off + indices[0], toks))
        return out


def _fail(doc_id: str, rule: str, index: int | None, message: str) -> AnnotationValidationError:
    where = f" (doc {doc_id!r}" + (f", index {index}" if index is not None else "") + ")"
    return AnnotationValidationError(message + where, doc_id=doc_id, rule=rule, index=index)


def _validate_sentence_tree(doc_id: str, sid: int, n_tokens: int,
                            edges: list[tuple[int, int, str]]) -> None:
    """Check the per-sentence edge list forms a single-rooted tree."""
    head_of: dict[int, int] = {}
    roots = []
    for head, dep, _rel in edges:
        if not 0 <= dep < n_tokens:
            raise _fail(doc_id, "dep-index", dep, f"dependent index {dep} out of range in sentence {sid}")
        if head != ROOT and not 0 <= head < n_tokens:
            raise _fail(doc_id, "head-index", head, f"head index {head} out of range in sentence {sid}")
        if dep in head_of:
            raise _fail(doc_id, "tree violation", dep, f"token {dep} has two heads in sentence {sid}")
        head_of[dep] = head
        if head == ROOT:
            roots.append(dep)
    if n_tokens and len(roots) != 1:
        raise _fail(doc_id, "tree violation", sid,
                    f"sentence {sid} has {len(roots)} ROOT-headed edges, expected 1")
    if len(head_of) != n_tokens:
        missing = next(i for i in range(n_tokens) if i not in head_of)
        raise _fail(doc_id, "tree violation", missing,
                    f"token {missing} of sentence {sid} has no head edge")
    # Cycle check: walking head links from any token must reach ROOT.
    for start in range(n_tokens):
        seen = set()
        cur = start
        while cur != ROOT:
            if cur in seen:
                raise _fail(doc_id, "tree violation", start,
                            f"dependency cycle through token {start} in sentence {sid}")
            seen.add(cur)
            cur = head_of[cur]


def parse_annotation_file(data: bytes | str) -> DocumentSet:
    """Parse and fully validate an annotation file into a :class:`DocumentSet`.

    Raises :class:`AnnotationParseError` on malformed JSON (with byte offset)
    and :class:`AnnotationValidationError` naming doc_id, rule and offending
    index on any invariant violation.
    """
    if isinstance(data, bytes):
        try:
            text = data.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise AnnotationParseError(f"input is not UTF-8: {exc}", byte_offset=exc.start) from exc
    else:
        text = data
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise AnnotationParseError(
            f"malformed JSON at byte offset {exc.pos}: {exc.msg}", byte_offset=exc.pos) from exc

    if not isinstance(raw, dict) or not isinstance(raw.get("documents"), list):
        raise AnnotationValidationError("top level must be an object with a 'documents' list",
                                        rule="schema")

    documents: list[AnnotatedDocument] = []
    seen_ids: set[str] = set()
    global_sid = 0
    # Sentence lengths by global sid, for validating chain spans set-wide.
    sentence_lengths: dict[int, int] = {}
    pending_chains: list[tuple[str, list[list[dict]]]] = []

    for d_idx, doc_raw in enumerate(raw["documents"]):
        doc_id = doc_raw.get("doc_id")
        if not isinstance(doc_id, str) or not doc_id:
            raise _fail(str(doc_id), "doc-id", d_idx, "every document needs a non-empty string doc_id")
        if doc_id in seen_ids:
            raise _fail(doc_id, "doc-id-unique", d_idx, f"duplicate doc_id {doc_id!r}")
        seen_ids.add(doc_id)

        tokens: list[Token] = []
        dep_edges: list[DependencyEdge] = []
        for sent_raw in doc_raw.get("sentences", []):
            sent_tokens = sent_raw.get("tokens", [])
            offset = len(tokens)
            for t_local, tok_raw in enumerate(sent_tokens):
                pos = str(tok_raw.get("pos", ""))
                is_punct = bool(tok_raw.get("is_punct", pos in PUNCTUATION_TAGS))
                tokens.append(Token(index=offset + t_local, text=str(tok_raw.get("text", "")),
                                    pos_tag=pos, sentence_id=global_sid, is_punct=is_punct))
            edges_local = [(int(e["head"]), int(e["dep"]), str(e.get("rel", "dep")))
                           for e in sent_raw.get("dependencies", [])]
            _validate_sentence_tree(doc_id, global_sid, len(sent_tokens), edges_local)
            for head, dep, rel in edges_local:
                dep_edges.append(DependencyEdge(
                    head=ROOT if head == ROOT else offset + head,
                    dependent=offset + dep, relation=rel))
            sentence_lengths[global_sid] = len(sent_tokens)
            global_sid += 1

        pending_chains.append((doc_id, doc_raw.get("coref_chains", [])))
        documents.append(AnnotatedDocument(doc_id=doc_id, tokens=tuple(tokens),
                                           dependency_edges=tuple(dep_edges), coref_chains=()))

    # Chains are validated after all documents are read because their spans
    # use the set-wide sentence numbering.
    finished: list[AnnotatedDocument] = []
    for doc, (doc_id, chains_raw) in zip(documents, pending_chains):
        chains: list[CoreferenceChain] = []
        for c_idx, chain_raw in enumerate(chains_raw):
            mentions = []
            for m in chain_raw:
                span = Span(sentence_id=int(m["sentence"]), start=int(m["start"]), end=int(m["end"]))
                if span.sentence_id not in sentence_lengths:
                    raise _fail(doc_id, "chain-sentence", c_idx,
                                f"chain mention cites unknown sentence {span.sentence_id}")
                n = sentence_lengths[span.sentence_id]
                if span.start > span.end or span.start < 0 or span.end >= n:
                    raise _fail(doc_id, "chain-span", c_idx,
                                f"mention span {span.as_tuple()} out of bounds (sentence has {n} tokens)")
                mentions.append(span)
            if len(mentions) < 2:
                raise _fail(doc_id, "chain-size", c_idx, "a coreference chain needs at least 2 mentions")
            chains.append(CoreferenceChain(mentions=tuple(mentions)))
        finished.append(AnnotatedDocument(doc_id=doc.doc_id, tokens=doc.tokens,
                                          dependency_edges=doc.dependency_edges,
                                          coref_chains=tuple(chains)))
    return DocumentSet(documents=tuple(finished))


def serialize_annotations(ds: DocumentSet) -> bytes:
    """Inverse of :func:`parse_annotation_file`: round-trips exactly."""
    docs_out = []
    for doc in ds.documents:
        by_sent = doc.sentence_token_indices()
        sent_offsets = {sid: idxs[0] for sid, idxs in by_sent.items()}
        deps_by_sent: dict[int, list[dict]] = {sid: [] for sid in by_sent}
        for e in doc.dependency_edges:
            sid = doc.tokens[e.dependent].sentence_id
            off = sent_offsets[sid]
            deps_by_sent[sid].append({
                "head": ROOT if e.head == ROOT else e.head - off,
                "dep": e.dependent - off, "rel": e.relation})
        sentences = []
        for sid in sorted(by_sent):
            toks = [{"text": doc.tokens[i].text, "pos": doc.tokens[i].pos_tag,
                     "is_punct": doc.tokens[i].is_punct} for i in by_sent[sid]]
            sentences.append({"tokens": toks, "dependencies": deps_by_sent[sid]})
        chains = [[{"sentence": m.sentence_id, "start": m.start, "end": m.end}
                   for m in chain.mentions] for chain in doc.coref_chains]
        docs_out.append({"doc_id": doc.doc_id, "sentences": sentences, "coref_chains": chains})
    return json.dumps({"documents": docs_out}, indent=2, ensure_ascii=False).encode("utf-8") + b"\n"


def merge_coreference_chains(chains: list[CoreferenceChain]) -> list[CoreferenceChain]:
    """Union chains that share at least one identical mention span.

    The result is the connected components of the span-sharing relation;
    mentions are deduplicated and ordered by (sentence_id, start, end).
    Idempotent and total.
    """
    parent = list(range(len(chains)))

    def find(i: int) -> int:
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    def union(i: int, j: int) -> None:
        ri, rj = find(i), find(j)
        if ri != rj:
            parent[max(ri, rj)] = min(ri, rj)

    owner: dict[tuple[int, int, int], int] = {}
    for i, chain in enumerate(chains):
        for m in chain.mentions:
            key = m.as_tuple()
            if key in owner:
                union(owner[key], i)
            else:
                owner[key] = i

    groups: dict[int, list[Span]] = {}
    for i, chain in enumerate(chains):
        groups.setdefault(find(i), []).extend(chain.mentions)

    merged = []
    for root in sorted(groups):
        mentions = sorted(set(groups[root]), key=lambda m: m.as_tuple())
        merged.append(CoreferenceChain(mentions=tuple(mentions)))
    return merged
