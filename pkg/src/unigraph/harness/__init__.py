from unigraph.harness.task import ToyExample, ToyTask, Vocabulary
from unigraph.harness.search import BeamHypothesis, beam_search, trigram_block
from unigraph.harness.training import TrainResult, label_smoothed_loss, train_toy

__all__ = [
    "ToyExample", "ToyTask", "Vocabulary",
    "BeamHypothesis", "beam_search", "trigram_block",
    "TrainResult", "label_smoothed_loss", "train_toy",
]
