from unigraph.model.config import ModelConfig
from unigraph.model.attention import (
    fuse,
    graph_attention_scores,
    graph_context,
    graph_propagate,
    graph_propagate_closed_form,
    multi_head_attention,
    propagated_graph_context,
)
from unigraph.model.seq2seq import (
    GraphInputs,
    GraphSeq2Seq,
    build_model,
    init_node_states,
    prepare_graph_inputs,
)
from unigraph.model.gradcheck import GradCheckReport, finite_diff_gradcheck
from unigraph.model.checkpoint import load_checkpoint, save_checkpoint
from unigraph.model.layers import DecoderStepState

__all__ = [
    "ModelConfig",
    "fuse", "graph_attention_scores", "graph_context", "graph_propagate",
    "graph_propagate_closed_form", "multi_head_attention", "propagated_graph_context",
    "GraphInputs", "GraphSeq2Seq", "build_model", "init_node_states", "prepare_graph_inputs",
    "GradCheckReport", "finite_diff_gradcheck",
    "load_checkpoint", "save_checkpoint",
    "DecoderStepState",
]
