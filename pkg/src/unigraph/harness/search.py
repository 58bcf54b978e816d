"""Beam search with length penalty and trigram blocking.

Hypotheses are ranked by summed log-probability divided by
len(tokens) ** length_penalty; ties break lexicographically on the token
ids, so decoding is fully deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np


@dataclass(frozen=True)
class BeamHypothesis:
    tokens: tuple[int, ...]  # generated tokens, excluding BOS
    log_prob: float
    finished: bool

    def score(self, length_penalty: float) -> float:
        return self.log_prob / (max(1, len(self.tokens)) ** length_penalty)


def trigram_block(hypothesis: Sequence[int], candidate: int) -> bool:
    """True iff appending ``candidate`` creates no trigram already present."""
    if len(hypothesis) < 2:
        return True
    new = (hypothesis[-2], hypothesis[-1], candidate)
    seen = {tuple(hypothesis[i:i + 3]) for i in range(len(hypothesis) - 2)}
    return new not in seen


StepFn = Callable[[tuple[int, ...]], np.ndarray]


def beam_search(step_fn: StepFn, *, vocab_size: int, bos_id: int,
                eos_id: int | None, beam_size: int = 5, max_len: int = 32,
                length_penalty: float = 0.9,
                block_trigrams: bool = True) -> BeamHypothesis:
    """Run beam search against ``step_fn(prefix) -> log-prob vector``.

    ``prefix`` always starts with ``bos_id``. Hypotheses that emit
    ``eos_id`` are frozen but stay in the beam; the best hypothesis by
    normalized score is returned once every beam entry is finished or
    ``max_len`` tokens were generated.
    """
    if beam_size < 1:
        raise ValueError(f"beam_size must be >= 1, got {beam_size}")
    beam = [BeamHypothesis(tokens=(), log_prob=0.0, finished=False)]
    for _ in range(max_len):
        if all(h.finished for h in beam):
            break
        candidates: list[BeamHypothesis] = [h for h in beam if h.finished]
        for hyp in beam:
            if hyp.finished:
                continue
            log_probs = np.asarray(step_fn((bos_id,) + hyp.tokens), dtype=np.float64)
            if log_probs.shape != (vocab_size,):
                raise ValueError(f"step_fn returned shape {log_probs.shape}, "
                                 f"expected ({vocab_size},)")
            for tok in range(vocab_size):
                if block_trigrams and not trigram_block(hyp.tokens, tok):
                    continue
                candidates.append(BeamHypothesis(
                    tokens=hyp.tokens + (tok,),
                    log_prob=hyp.log_prob + float(log_probs[tok]),
                    finished=eos_id is not None and tok == eos_id))
        if not candidates:
            # trigram blocking can forbid every continuation; stop here and
            # keep the current beam as the final hypotheses
            break
        candidates.sort(key=lambda h: (-h.score(length_penalty), h.tokens))
        beam = candidates[:beam_size]
    return min(beam, key=lambda h: (-h.score(length_penalty), h.tokens))
