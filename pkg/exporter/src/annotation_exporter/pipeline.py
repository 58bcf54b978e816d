"""NLP pipelines producing tokens, POS tags and dependency trees.

The built-in rule pipeline is deterministic and dependency-free: a regex
tokenizer, a lexicon-plus-suffix POS tagger and a heuristic attacher that
always yields a schema-valid single-rooted tree (modifiers attach forward
to the next nominal head, nominals and everything else attach to the
root, so no cycles can form). A spaCy-backed pipeline can be selected
when the optional dependency is installed.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field

log = logging.getLogger(__name__)

ROOT = -1

TOKEN_RE = re.compile(r"[A-Za-z0-9]+(?:['\-][A-Za-z0-9]+)*|[^\sA-Za-z0-9]")
SENTENCE_END = frozenset(".!?")

DETS = frozenset("the a an this that these those every each some any no".split())
PRONOUNS = frozenset("he she it they him her them his hers its their theirs "
                     "i you we me us mine yours ours who whom himself herself "
                     "itself themselves".split())
AUXES = frozenset("is are was were be been being am has have had do does did "
                  "will would can could may might shall should must".split())
ADPS = frozenset("in on at of to for with from by about over under between "
                 "through during against into onto upon across behind near".split())
CCONJS = frozenset("and or but nor yet".split())
SCONJS = frozenset("because although while if since unless whereas when after before".split())
PARTICLES = frozenset("not 's to".split())
ADVERBS = frozenset("very quite never always often soon now then there here "
                    "too also just still already yesterday today tomorrow".split())
NUMBER_WORDS = frozenset("zero one two three four five six seven eight nine ten "
                         "eleven twelve twenty thirty hundred thousand million".split())
COMMON_VERBS = frozenset("go goes went gone make makes made take takes took see sees saw "
                         "say says said get gets got know knows knew think thinks thought "
                         "win wins won give gives gave find finds found keep keeps kept "
                         "develop develops developed explain explains explained study "
                         "studies studied dedicate dedicates dedicated discover discovers "
                         "discovered build builds built write writes wrote publish "
                         "publishes published receive receives received become becomes "
                         "became teach teaches taught lead leads led work works worked "
                         "live lives lived die dies died found founds founded create "
                         "creates created propose proposes proposed prove proves proved".split())
NOMINAL = ("NOUN", "PROPN", "PRON")


@dataclass
class AnalyzedSentence:
    """One sentence: parallel token/POS lists plus head/relation arcs.

    ``heads[i]`` is the sentence-local head of token i (ROOT for the
    sentence root); ``rels[i]`` labels that arc.
    """

    tokens: list[str] = field(default_factory=list)
    pos: list[str] = field(default_factory=list)
    heads: list[int] = field(default_factory=list)
    rels: list[str] = field(default_factory=list)


class PipelineUnavailableError(RuntimeError):
    pass


def split_sentences(text: str) -> list[str]:
    out, current = [], []
    for raw in TOKEN_RE.findall(text):
        current.append(raw)
        if raw in SENTENCE_END:
            out.append(current)
            current = []
    if current:
        out.append(current)
    return [" ".join(s) for s in out]


def _tag(tokens: list[str]) -> list[str]:
    tags = []
    for i, tok in enumerate(tokens):
        low = tok.lower()
        if not tok[0].isalnum():
            tags.append("PUNCT")
        elif tok.isdigit() or low in NUMBER_WORDS:
            tags.append("NUM")
        elif low in DETS:
            tags.append("DET")
        elif low in PRONOUNS:
            tags.append("PRON")
        elif low in AUXES:
            tags.append("AUX")
        elif low in ADPS:
            tags.append("ADP")
        elif low in CCONJS:
            tags.append("CCONJ")
        elif low in SCONJS:
            tags.append("SCONJ")
        elif low in PARTICLES:
            tags.append("PART")
        elif low in ADVERBS or (low.endswith("ly") and len(low) > 3):
            tags.append("ADV")
        elif low in COMMON_VERBS or low.endswith(("ed", "ing")):
            tags.append("VERB")
        elif tok[0].isupper() and i > 0:
            tags.append("PROPN")
        elif tok[0].isupper() and i == 0 and low not in COMMON_VERBS:
            # sentence-initial unknown capitalized word: treat as a name
            tags.append("PROPN")
        else:
            tags.append("NOUN")
    return tags


def _next_nominal_head(pos: list[str], start: int) -> int | None:
    """Index of the next nominal head: the last token of the first
    NOUN/PROPN run at or after ``start``."""
    i = start
    while i < len(pos):
        if pos[i] in ("NOUN", "PROPN"):
            while i + 1 < len(pos) and pos[i + 1] in ("NOUN", "PROPN"):
                i += 1
            return i
        i += 1
    return None


def _attach(tokens: list[str], pos: list[str]) -> tuple[list[int], list[str]]:
    n = len(tokens)
    heads, rels = [ROOT] * n, ["dep"] * n
    verb_idx = [i for i, p in enumerate(pos) if p == "VERB"]
    aux_idx = [i for i, p in enumerate(pos) if p == "AUX"]
    non_punct = [i for i, p in enumerate(pos) if p != "PUNCT"]
    if verb_idx:
        root = verb_idx[0]
    elif aux_idx:
        root = aux_idx[0]
    elif non_punct:
        root = non_punct[0]
    else:
        root = 0
    rels[root] = "root"

    seen_obj = False
    for i in range(n):
        if i == root:
            continue
        p = pos[i]
        if p == "PUNCT":
            heads[i], rels[i] = root, "punct"
        elif p in ("DET", "NUM") or p == "ADJ":
            nxt = _next_nominal_head(pos, i + 1)
            if nxt is not None:
                heads[i] = nxt
                rels[i] = {"DET": "det", "NUM": "nummod"}.get(p, "amod")
            else:
                heads[i], rels[i] = root, "dep"
        elif p == "ADP":
            nxt = _next_nominal_head(pos, i + 1)
            heads[i], rels[i] = (nxt, "case") if nxt is not None else (root, "dep")
        elif p in ("NOUN", "PROPN"):
            if i + 1 < n and pos[i + 1] in ("NOUN", "PROPN"):
                heads[i], rels[i] = _next_nominal_head(pos, i), "compound"
            elif i < root:
                heads[i], rels[i] = root, "nsubj"
            else:
                has_case = any(pos[j] == "ADP" and _next_nominal_head(pos, j + 1) == i
                               for j in range(root + 1, i))
                if has_case:
                    heads[i], rels[i] = root, "obl"
                elif not seen_obj:
                    heads[i], rels[i] = root, "obj"
                    seen_obj = True
                else:
                    heads[i], rels[i] = root, "obl"
        elif p == "PRON":
            low = tokens[i].lower()
            if low in ("his", "her", "its", "their"):
                nxt = _next_nominal_head(pos, i + 1)
                if nxt is not None:
                    heads[i], rels[i] = nxt, "nmod:poss"
                else:
                    heads[i], rels[i] = root, "dep"
            elif i < root:
                heads[i], rels[i] = root, "nsubj"
            else:
                heads[i], rels[i] = root, "obj" if not seen_obj else "obl"
                seen_obj = True
        elif p == "AUX":
            heads[i], rels[i] = root, "aux"
        elif p == "VERB":
            heads[i], rels[i] = root, "conj"
        elif p == "ADV":
            heads[i], rels[i] = root, "advmod"
        elif p == "CCONJ":
            heads[i], rels[i] = root, "cc"
        elif p == "SCONJ":
            heads[i], rels[i] = root, "mark"
        else:
            heads[i], rels[i] = root, "dep"
    return heads, rels


def _flat_fallback(tokens: list[str]) -> tuple[list[int], list[str]]:
    heads = [0] * len(tokens)
    heads[0] = ROOT
    rels = ["dep"] * len(tokens)
    rels[0] = "root"
    return heads, rels


class RulePipeline:
    name = "rule"

    def analyze(self, text: str) -> list[AnalyzedSentence]:
        sentences = []
        for sent in split_sentences(text):
            tokens = sent.split(" ") if sent else []
            if not tokens:
                continue
            pos = _tag(tokens)
            try:
                heads, rels = _attach(tokens, pos)
            except Exception:  # pragma: no cover - defensive fallback
                log.warning("falling back to a flat tree for sentence: %r", sent[:60])
                heads, rels = _flat_fallback(tokens)
            sentences.append(AnalyzedSentence(tokens=tokens, pos=pos,
                                              heads=heads, rels=rels))
        return sentences


class SpacyPipeline:
    name = "spacy"

    def __init__(self, model: str = "en_core_web_sm"):
        try:
            import spacy
        except ImportError as exc:
            raise PipelineUnavailableError(
                "the spacy pipeline needs the optional dependency: "
                "pip install 'annotation-exporter[spacy]' and download a model, "
                f"e.g. python -m spacy download {model}") from exc
        try:
            self.nlp = spacy.load(model)
        except OSError as exc:
            raise PipelineUnavailableError(
                f"spaCy model {model!r} is not installed; run "
                f"python -m spacy download {model}") from exc

    def analyze(self, text: str) -> list[AnalyzedSentence]:
        doc = self.nlp(text)
        sentences = []
        for sent in doc.sents:
            offset = sent.start
            tokens = [t.text for t in sent]
            pos = [t.pos_ for t in sent]
            heads = [ROOT if t.head is t else t.head.i - offset for t in sent]
            rels = [("root" if t.head is t else t.dep_.lower()) for t in sent]
            sentences.append(AnalyzedSentence(tokens=tokens, pos=pos,
                                              heads=heads, rels=rels))
        return sentences


def get_pipeline(name: str):
    if name == "rule":
        return RulePipeline()
    if name == "spacy":
        return SpacyPipeline()
    raise ValueError(f"unknown pipeline {name!r} (choose 'rule' or 'spacy')")
