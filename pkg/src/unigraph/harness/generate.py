"""Inference over toy-task examples."""

from __future__ import annotations

import json
from dataclasses import dataclass

import torch

from unigraph.harness.search import beam_search
from unigraph.harness.task import BOS, EOS, ToyExample, ToyTask
from unigraph.model.seq2seq import GraphInputs, GraphSeq2Seq, prepare_graph_inputs


@dataclass(frozen=True)
class GenerationOutput:
    input_id: str
    token_ids: tuple[int, ...]
    tokens: tuple[str, ...]
    score: float

    def to_json(self) -> str:
        return json.dumps({"input_id": self.input_id, "tokens": list(self.tokens),
                           "score": self.score})


def make_step_fn(model: GraphSeq2Seq, ex: ToyExample, gi: GraphInputs, **decode_kwargs):
    device = next(model.parameters()).device
    input_ids = torch.tensor(ex.input_ids, dtype=torch.long, device=device)
    token_states, node_states = model.encode(input_ids, gi)

    def step(prefix: tuple[int, ...]):
        ids = torch.tensor(prefix, dtype=torch.long, device=device)
        lp = model.next_token_log_probs(ids, token_states, node_states, gi, **decode_kwargs)
        return lp.cpu().numpy()

    return step


def generate(model: GraphSeq2Seq, task: ToyTask, *, beam_size: int = 5,
             length_penalty: float = 0.9, max_len: int = 16,
             block_trigrams: bool = True, limit: int | None = None,
             **decode_kwargs) -> list[GenerationOutput]:
    model.eval()
    outputs = []
    examples = task.examples[:limit] if limit is not None else task.examples
    with torch.no_grad():
        for ex in examples:
            gi = prepare_graph_inputs(ex.graph)
            step = make_step_fn(model, ex, gi, **decode_kwargs)
            best = beam_search(step, vocab_size=len(task.vocab), bos_id=BOS, eos_id=EOS,
                               beam_size=beam_size, max_len=max_len,
                               length_penalty=length_penalty, block_trigrams=block_trigrams)
            ids = tuple(t for t in best.tokens if t != EOS)
            outputs.append(GenerationOutput(
                input_id=ex.example_id, token_ids=ids,
                tokens=tuple(task.vocab.decode(list(ids))),
                score=best.score(length_penalty)))
    return outputs
