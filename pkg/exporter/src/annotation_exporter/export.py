"""Turn analyzed sentences into the annotation JSON payload.

Coreference is rule-based and pipeline-independent: runs of proper nouns
are entity mentions, identical names share a chain, and a personal
pronoun joins the chain of the most recent preceding entity mention.
Resolution is per document by default; the corpus scope lets pronouns and
names link across documents of one set, which the schema supports through
its set-wide sentence numbering.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass

from annotation_exporter.pipeline import AnalyzedSentence, get_pipeline

log = logging.getLogger(__name__)

RESOLVABLE_PRONOUNS = frozenset(
    "he she it they him her them his hers its their theirs".split())


@dataclass(frozen=True)
class ExporterConfig:
    input_path: str
    output_path: str | None = None
    pipeline: str = "rule"
    per_line: bool = False            # one document per line instead of per file
    coref_scope: str = "document"     # "document" or "corpus"
    doc_id_prefix: str = "doc"


@dataclass(frozen=True)
class _Mention:
    sentence_id: int   # set-wide numbering
    start: int
    end: int
    key: str           # normalized entity name, "" for pronouns
    is_subject: bool = False


def _entity_mentions(sent: AnalyzedSentence, sid: int) -> list[_Mention]:
    mentions = []
    i = 0
    while i < len(sent.tokens):
        if sent.pos[i] == "PROPN":
            j = i
            while j + 1 < len(sent.tokens) and sent.pos[j + 1] == "PROPN":
                j += 1
            name = " ".join(t.lower() for t in sent.tokens[i:j + 1])
            mentions.append(_Mention(sid, i, j, name,
                                     is_subject=sent.rels[j] == "nsubj"))
            i = j + 1
        else:
            i += 1
    return mentions


def _pronoun_mentions(sent: AnalyzedSentence, sid: int) -> list[_Mention]:
    return [_Mention(sid, i, i, "")
            for i, (tok, pos) in enumerate(zip(sent.tokens, sent.pos))
            if pos == "PRON" and tok.lower() in RESOLVABLE_PRONOUNS]


def _resolve_chains(doc_sentences: list[list[tuple[int, AnalyzedSentence]]],
                    scope: str) -> list[list[list[_Mention]]]:
    """Chains per document. ``doc_sentences`` holds (set-wide sid, sentence)
    pairs per document; corpus scope resolves across document boundaries.

    A single-token name that ends an already-seen multi-token name joins
    that name's chain ("Einstein" after "Albert Einstein"). Pronouns
    attach to the most recent subject entity, falling back to the most
    recent entity of any role.
    """
    per_doc_chains: list[list[list[_Mention]]] = [[] for _ in doc_sentences]
    chain_of_name: dict[str, list[_Mention]] = {}
    recent: list[list[_Mention]] = []
    recent_subject: list[list[_Mention]] = []

    for d, sentences in enumerate(doc_sentences):
        if scope == "document":
            chain_of_name = {}
            recent = []
            recent_subject = []
        for sid, sent in sentences:
            events = sorted(_entity_mentions(sent, sid) + _pronoun_mentions(sent, sid),
                            key=lambda m: m.start)
            for m in events:
                if m.key:  # entity mention
                    chain = chain_of_name.get(m.key)
                    if chain is None and " " not in m.key:
                        aliases = [k for k in chain_of_name
                                   if k.endswith(" " + m.key)]
                        if aliases:
                            chain = chain_of_name[aliases[-1]]
                            chain_of_name[m.key] = chain
                    if chain is None:
                        chain = [m]
                        chain_of_name[m.key] = chain
                        per_doc_chains[d].append(chain)
                    else:
                        chain.append(m)
                    recent.append(chain)
                    if m.is_subject:
                        recent_subject.append(chain)
                else:      # pronoun
                    pool = recent_subject or recent
                    if pool:
                        pool[-1].append(m)
    return per_doc_chains


def export_documents(texts: list[tuple[str, str]], *, pipeline: str = "rule",
                     coref_scope: str = "document") -> dict:
    """Analyze (doc_id, text) pairs into one annotation payload."""
    pipe = get_pipeline(pipeline)
    analyzed = [(doc_id, pipe.analyze(text)) for doc_id, text in texts]

    doc_sentences: list[list[tuple[int, AnalyzedSentence]]] = []
    sid = 0
    for _doc_id, sents in analyzed:
        rows = []
        for sent in sents:
            rows.append((sid, sent))
            sid += 1
        doc_sentences.append(rows)
    chains = _resolve_chains(doc_sentences, coref_scope)

    documents = []
    for d, (doc_id, _sents) in enumerate(analyzed):
        sentences_out = []
        for _sid, sent in doc_sentences[d]:
            tokens = [{"text": t, "pos": p, "is_punct": p == "PUNCT"}
                      for t, p in zip(sent.tokens, sent.pos)]
            deps = [{"head": h, "dep": i, "rel": r}
                    for i, (h, r) in enumerate(zip(sent.heads, sent.rels))]
            sentences_out.append({"tokens": tokens, "dependencies": deps})
        chains_out = [[{"sentence": m.sentence_id, "start": m.start, "end": m.end}
                       for m in chain]
                      for chain in chains[d] if len(chain) >= 2]
        documents.append({"doc_id": doc_id, "sentences": sentences_out,
                          "coref_chains": chains_out})
    return {"documents": documents}


def export(cfg: ExporterConfig) -> bytes:
    """Read plain text per ``cfg``, returning (and optionally writing) the
    serialized annotation payload."""
    from pathlib import Path

    raw = Path(cfg.input_path).read_text(encoding="utf-8")
    if cfg.per_line:
        texts = [(f"{cfg.doc_id_prefix}{i:04d}", line)
                 for i, line in enumerate(raw.splitlines()) if line.strip()]
    else:
        texts = [(Path(cfg.input_path).stem, raw)] if raw.strip() else []
    payload = export_documents(texts, pipeline=cfg.pipeline,
                               coref_scope=cfg.coref_scope)
    data = json.dumps(payload, indent=2, ensure_ascii=False).encode("utf-8") + b"\n"
    if cfg.output_path:
        Path(cfg.output_path).write_bytes(data)
    return data
