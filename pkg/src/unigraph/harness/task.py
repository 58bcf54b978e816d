"""Synthetic planted-coreference task.

Each example is a two-sentence document: the first sentence names an
entity and its first action, the second refers back to the entity with a
pronoun and states a second action. The target summary names the entity
together with the second action, so producing it requires combining
phrases from both sentences through the coreference link.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

from unigraph.annotations import (
    ROOT,
    AnnotatedDocument,
    CoreferenceChain,
    DependencyEdge,
    DocumentSet,
    Span,
    Token,
)
from unigraph.augment import augment_graph
from unigraph.builder import build_graph
from unigraph.graph import SemanticGraph

PAD, BOS, EOS = 0, 1, 2

ENTITIES = [("Ada", "Lovelace"), ("Alan", "Turing"), ("Marie", "Curie"),
            ("Isaac", "Newton"), ("Grace", "Hopper"), ("Niels", "Bohr")]
FIRST_VERBS = ["studied", "built", "painted", "measured", "described"]
SECOND_VERBS = ["admired", "kept", "sold", "repaired", "showed"]
FIRST_OBJECTS = ["machine", "theorem", "garden", "portrait", "engine", "formula"]
SECOND_OBJECTS = ["model", "notebook", "telescope", "archive", "compass", "ledger"]
PRONOUN = "they"


@dataclass(frozen=True)
class Vocabulary:
    words: tuple[str, ...]  # index 0..2 are <pad>, <bos>, <eos>

    @classmethod
    def build(cls, words: list[str]) -> "Vocabulary":
        return cls(words=("<pad>", "<bos>", "<eos>") + tuple(sorted(set(words))))

    def __len__(self) -> int:
        return len(self.words)

    def encode(self, tokens: list[str]) -> list[int]:
        index = {w: i for i, w in enumerate(self.words)}
        return [index[t] for t in tokens]

    def decode(self, ids: list[int]) -> list[str]:
        return [self.words[i] for i in ids]


@dataclass(frozen=True)
class ToyExample:
    example_id: str
    documents: DocumentSet
    input_ids: tuple[int, ...]
    target_ids: tuple[int, ...]  # without BOS/EOS
    graph: SemanticGraph         # already augmented


@dataclass(frozen=True)
class ToyTask:
    vocab: Vocabulary
    examples: tuple[ToyExample, ...]
    seed: int

    @classmethod
    def build(cls, n_examples: int = 50, seed: int = 0) -> "ToyTask":
        return build_task(n_examples=n_examples, seed=seed)


def _example_document(example_id: str, first: str, last: str, v1: str, o1: str,
                      v2: str, o2: str) -> DocumentSet:
    s0_words = [(first, "PROPN"), (last, "PROPN"), (v1, "VERB"),
                ("the", "DET"), (o1, "NOUN"), (".", "PUNCT")]
    s1_words = [(PRONOUN, "PRON"), (v2, "VERB"), ("the", "DET"),
                (o2, "NOUN"), (".", "PUNCT")]
    tokens = []
    for sid, words in enumerate([s0_words, s1_words]):
        base = len(tokens)
        for i, (text, pos) in enumerate(words):
            tokens.append(Token(index=base + i, text=text, pos_tag=pos,
                                sentence_id=sid, is_punct=pos == "PUNCT"))
    edges = [
        DependencyEdge(head=1, dependent=0, relation="compound"),
        DependencyEdge(head=2, dependent=1, relation="nsubj"),
        DependencyEdge(head=ROOT, dependent=2, relation="root"),
        DependencyEdge(head=4, dependent=3, relation="det"),
        DependencyEdge(head=2, dependent=4, relation="obj"),
        DependencyEdge(head=2, dependent=5, relation="punct"),
        DependencyEdge(head=7, dependent=6, relation="nsubj"),
        DependencyEdge(head=ROOT, dependent=7, relation="root"),
        DependencyEdge(head=9, dependent=8, relation="det"),
        DependencyEdge(head=7, dependent=9, relation="obj"),
        DependencyEdge(head=7, dependent=10, relation="punct"),
    ]
    chain = CoreferenceChain(mentions=(Span(0, 0, 1), Span(1, 0, 0)))
    doc = AnnotatedDocument(doc_id=example_id, tokens=tuple(tokens),
                            dependency_edges=tuple(edges), coref_chains=(chain,))
    return DocumentSet(documents=(doc,))


def build_task(n_examples: int = 50, seed: int = 0) -> ToyTask:
    """Deterministic task instance: distinct sampled template fillings."""
    rng = random.Random(seed)
    combos: set[tuple] = set()
    while len(combos) < n_examples:
        combos.add((rng.randrange(len(ENTITIES)), rng.choice(FIRST_VERBS),
                    rng.choice(FIRST_OBJECTS), rng.choice(SECOND_VERBS),
                    rng.choice(SECOND_OBJECTS)))

    words = ["the", ".", PRONOUN]
    words += [w for pair in ENTITIES for w in pair]
    words += FIRST_VERBS + SECOND_VERBS + FIRST_OBJECTS + SECOND_OBJECTS
    vocab = Vocabulary.build(words)

    examples = []
    for i, (ei, v1, o1, v2, o2) in enumerate(sorted(combos)):
        first, last = ENTITIES[ei]
        example_id = f"ex{i:03d}"
        ds = _example_document(example_id, first, last, v1, o1, v2, o2)
        graph = augment_graph(build_graph(ds))
        input_words = [t.text for t in ds.documents[0].tokens]
        target_words = [first, last, v2, "the", o2]
        examples.append(ToyExample(
            example_id=example_id, documents=ds,
            input_ids=tuple(vocab.encode(input_words)),
            target_ids=tuple(vocab.encode(target_words)),
            graph=graph))
    return ToyTask(vocab=vocab, examples=tuple(examples), seed=seed)
