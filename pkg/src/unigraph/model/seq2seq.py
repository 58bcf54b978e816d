"""The graph-based encoder-decoder model at desk scale.

A small trainable transformer stands in for a pretrained text encoder;
node states are initialized from token states by two-level average
pooling (tokens to phrases, phrases to nodes) and refined by
adjacency-masked self-attention; the decoder attends to both token and
node states and fuses the two context vectors at every layer.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
from torch import nn

from unigraph.augment import adjacency, degree_normalize
from unigraph.errors import ModelError
from unigraph.graph import EdgeKind, NodeType, SemanticGraph
from unigraph.model.config import ModelConfig
from unigraph.model.layers import GraphDecoderLayer, GraphEncoderLayer, TextEncoderLayer


@dataclass
class GraphInputs:
    """Model-side view of an augmented graph: attention mask and normalized
    adjacency, both over the same node ordering as ``graph.nodes``."""

    graph: SemanticGraph
    mask: torch.Tensor    # bool [n, n]; mask[i, j] true iff edge j -> i
    a_hat: torch.Tensor   # float64 [n, n], column-stochastic


def prepare_graph_inputs(g: SemanticGraph,
                         mask_kinds: frozenset[EdgeKind] | None = None,
                         prop_kinds: frozenset[EdgeKind] | None = None,
                         dtype: torch.dtype = torch.float64) -> GraphInputs:
    """Build mask and normalized adjacency from an augmented graph.

    Both default to all edge kinds. Requires self loops (the normalization
    fails otherwise), so augment the graph first.
    """
    mask_np = adjacency(g, mask_kinds).entries
    a_hat_np = degree_normalize(adjacency(g, prop_kinds)).entries
    return GraphInputs(graph=g,
                       mask=torch.from_numpy(mask_np),
                       a_hat=torch.from_numpy(a_hat_np).to(dtype))


def init_node_states(token_states: torch.Tensor, g: SemanticGraph) -> torch.Tensor:
    """Two-level average pooling of token states into node states.

    Each phrase vector is the mean of its token vectors; each node vector
    is the mean of its phrase vectors; a supernode is the mean of all
    other node vectors (zeros when it is alone).
    """
    seq_len, d = token_states.shape
    vecs: list[torch.Tensor | None] = []
    super_ids = []
    for node in g.nodes:
        if node.node_type is NodeType.SUPER:
            super_ids.append(node.id)
            vecs.append(None)
            continue
        phrase_vecs = []
        for p in node.phrases:
            if not p.tokens:
                raise ModelError(f"phrase {p.span} of node {node.id} has no tokens")
            if max(p.tokens) >= seq_len:
                raise ModelError(
                    f"node {node.id} references token {max(p.tokens)} beyond input length {seq_len}")
            idx = torch.tensor(p.tokens, dtype=torch.long, device=token_states.device)
            phrase_vecs.append(token_states.index_select(0, idx).mean(dim=0))
        if not phrase_vecs:
            raise ModelError(f"node {node.id} has no aligned tokens")
        vecs.append(torch.stack(phrase_vecs).mean(dim=0))
    if super_ids:
        regular = [v for v in vecs if v is not None]
        pooled = (torch.stack(regular).mean(dim=0) if regular
                  else torch.zeros(d, dtype=token_states.dtype, device=token_states.device))
        for i in super_ids:
            vecs[i] = pooled
    return torch.stack(vecs) if vecs else token_states.new_zeros((0, d))


class TextEncoder(nn.Module):
    """Token embedding + learned positions + transformer stack."""

    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.cfg = cfg
        self.embed = nn.Embedding(cfg.vocab_size, cfg.d_model)
        self.pos = nn.Embedding(cfg.max_seq_len, cfg.d_model)
        self.layers = nn.ModuleList(TextEncoderLayer(cfg) for _ in range(cfg.enc_layers))

    def forward(self, ids: torch.Tensor) -> torch.Tensor:
        if ids.shape[-1] > self.cfg.max_seq_len:
            raise ModelError(f"sequence length {ids.shape[-1]} exceeds maximum {self.cfg.max_seq_len}")
        positions = torch.arange(ids.shape[-1], device=ids.device)
        x = self.embed(ids) + self.pos(positions)
        for layer in self.layers:
            x = layer(x)
        return x


class GraphSeq2Seq(nn.Module):
    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.cfg = cfg
        self.text_encoder = TextEncoder(cfg)
        self.graph_layers = nn.ModuleList(
            GraphEncoderLayer(cfg) for _ in range(cfg.graph_enc_layers))
        self.tgt_embed = nn.Embedding(cfg.vocab_size, cfg.d_model)
        self.tgt_pos = nn.Embedding(cfg.max_seq_len, cfg.d_model)
        self.dec_layers = nn.ModuleList(
            GraphDecoderLayer(cfg) for _ in range(cfg.dec_layers))
        self.out_proj = nn.Linear(cfg.d_model, cfg.vocab_size)
        self.drop = nn.Dropout(cfg.dropout_rate)

    def encode(self, input_ids: torch.Tensor, gi: GraphInputs) -> tuple[torch.Tensor, torch.Tensor]:
        token_states = self.text_encoder(input_ids)
        nodes = init_node_states(token_states, gi.graph)
        for layer in self.graph_layers:
            nodes = layer(nodes, gi.mask)
        return token_states, nodes

    def decode(self, target_ids: torch.Tensor, token_states: torch.Tensor,
               node_states: torch.Tensor, gi: GraphInputs, *,
               omega: float | None = None, prop_steps: int | None = None,
               use_propagation: bool | None = None) -> torch.Tensor:
        """Logits [T, vocab] for the next token after each target prefix."""
        cfg = self.cfg
        t = target_ids.shape[-1]
        if t > cfg.max_seq_len:
            raise ModelError(f"target length {t} exceeds maximum {cfg.max_seq_len}")
        omega = cfg.omega if omega is None else omega
        prop_steps = cfg.prop_steps if prop_steps is None else prop_steps
        use_propagation = cfg.use_propagation if use_propagation is None else use_propagation

        positions = torch.arange(t, device=target_ids.device)
        y = self.tgt_embed(target_ids) + self.tgt_pos(positions)
        causal = torch.ones(t, t, dtype=torch.bool, device=target_ids.device).tril()
        for layer in self.dec_layers:
            y = layer(y, node_states, token_states, gi.a_hat, causal,
                      omega=omega, prop_steps=prop_steps, use_propagation=use_propagation)
        return self.out_proj(self.drop(y))

    def forward(self, input_ids: torch.Tensor, gi: GraphInputs,
                target_ids: torch.Tensor, **decode_kwargs) -> torch.Tensor:
        token_states, node_states = self.encode(input_ids, gi)
        return self.decode(target_ids, token_states, node_states, gi, **decode_kwargs)

    @torch.no_grad()
    def next_token_log_probs(self, prefix_ids: torch.Tensor, token_states: torch.Tensor,
                             node_states: torch.Tensor, gi: GraphInputs,
                             **decode_kwargs) -> torch.Tensor:
        logits = self.decode(prefix_ids, token_states, node_states, gi, **decode_kwargs)
        return torch.log_softmax(logits[-1], dim=-1)


def build_model(cfg: ModelConfig, seed: int = 0) -> GraphSeq2Seq:
    """Seeded double-precision model; identical seeds give identical weights."""
    torch.manual_seed(seed)
    return GraphSeq2Seq(cfg).to(torch.float64)
