"""Encoder and decoder layers (post-layer-norm transformer blocks)."""

from __future__ import annotations

from dataclasses import dataclass

import torch
from torch import nn

from unigraph.model.attention import (
    fuse,
    graph_attention_scores,
    graph_context,
    graph_propagate,
    multi_head_attention,
)
from unigraph.model.config import ModelConfig


@dataclass
class DecoderStepState:
    """Intermediate quantities of one graph-decoding layer, for inspection.

    ``alpha``/``beta`` are the raw and propagated per-head salient scores
    [T, n_nodes, n_heads]; ``g``/``g_prime`` the graph contexts built from
    each; ``c`` the text context; ``d_fused`` the fusion output; ``y`` the
    post-self-attention query states. All [T, d_model] unless noted.
    """

    y: torch.Tensor
    alpha: torch.Tensor
    beta: torch.Tensor
    g: torch.Tensor
    g_prime: torch.Tensor
    c: torch.Tensor
    d_fused: torch.Tensor


def _proj(d_in: int, d_out: int) -> nn.Parameter:
    w = torch.empty(d_in, d_out)
    nn.init.xavier_uniform_(w)
    return nn.Parameter(w)


class FeedForward(nn.Module):
    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.lin1 = nn.Linear(cfg.d_model, cfg.ffn_width)
        self.lin2 = nn.Linear(cfg.ffn_width, cfg.d_model)
        self.drop = nn.Dropout(cfg.dropout_rate)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.lin2(self.drop(torch.relu(self.lin1(self.drop(x)))))


class TextEncoderLayer(nn.Module):
    """Plain self-attention block for the token encoder."""

    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.n_heads = cfg.n_heads
        self.w_q = _proj(cfg.d_model, cfg.d_model)
        self.w_k = _proj(cfg.d_model, cfg.d_model)
        self.w_v = _proj(cfg.d_model, cfg.d_model)
        self.w_o = _proj(cfg.d_model, cfg.d_model)
        self.ln1 = nn.LayerNorm(cfg.d_model)
        self.ln2 = nn.LayerNorm(cfg.d_model)
        self.ffn = FeedForward(cfg)
        self.drop = nn.Dropout(cfg.dropout_rate)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        h = self.drop(x)
        attn = multi_head_attention(h, h, self.w_q, self.w_k, self.w_v, self.w_o, self.n_heads)
        x = self.ln1(x + attn)
        return self.ln2(x + self.ffn(x))


class GraphEncoderLayer(nn.Module):
    """Node self-attention restricted by the graph adjacency mask.

    Node i attends to node j only where mask[i, j] is set, i.e. only its
    in-neighbors (plus itself through the self loop) update it.
    """

    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.n_heads = cfg.n_heads
        self.w_q = _proj(cfg.d_model, cfg.d_model)
        self.w_k = _proj(cfg.d_model, cfg.d_model)
        self.w_v = _proj(cfg.d_model, cfg.d_model)
        self.w_o = _proj(cfg.d_model, cfg.d_model)
        self.ln1 = nn.LayerNorm(cfg.d_model)
        self.ln2 = nn.LayerNorm(cfg.d_model)
        self.ffn = FeedForward(cfg)
        self.drop = nn.Dropout(cfg.dropout_rate)

    def forward(self, nodes: torch.Tensor, mask: torch.Tensor) -> torch.Tensor:
        h = self.drop(nodes)
        attn = multi_head_attention(h, h, self.w_q, self.w_k, self.w_v, self.w_o,
                                    self.n_heads, mask=mask)
        nodes = self.ln1(nodes + attn)
        return self.ln2(nodes + self.ffn(nodes))


class GraphDecoderLayer(nn.Module):
    """Causal self-attention, then parallel graph and text attention fused
    into one hybrid representation.

    The graph path computes per-head salient scores for every node,
    optionally propagates them over the normalized adjacency, and
    softmax-mixes the node values; the text path is the same machinery
    over token states. Neither context path carries an output projection;
    the fusion map W_d is the only mixing step.
    """

    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.n_heads = cfg.n_heads
        d = cfg.d_model
        self.w_sq, self.w_sk = _proj(d, d), _proj(d, d)
        self.w_sv, self.w_so = _proj(d, d), _proj(d, d)
        self.w_gq, self.w_gk, self.w_gv = _proj(d, d), _proj(d, d), _proj(d, d)
        self.w_tq, self.w_tk, self.w_tv = _proj(d, d), _proj(d, d), _proj(d, d)
        self.w_d = _proj(2 * d, d)
        self.ln1 = nn.LayerNorm(d)
        self.ln2 = nn.LayerNorm(d)
        self.ln3 = nn.LayerNorm(d)
        self.ffn = FeedForward(cfg)
        self.drop = nn.Dropout(cfg.dropout_rate)

    def forward(self, y: torch.Tensor, nodes: torch.Tensor, tokens: torch.Tensor,
                a_hat: torch.Tensor, causal_mask: torch.Tensor, *,
                omega: float, prop_steps: int, use_propagation: bool) -> torch.Tensor:
        out, _ = self._run(y, nodes, tokens, a_hat, causal_mask, omega=omega,
                           prop_steps=prop_steps, use_propagation=use_propagation,
                           collect_state=False)
        return out

    def forward_with_state(self, y: torch.Tensor, nodes: torch.Tensor,
                           tokens: torch.Tensor, a_hat: torch.Tensor,
                           causal_mask: torch.Tensor, *, omega: float,
                           prop_steps: int,
                           use_propagation: bool) -> tuple[torch.Tensor, DecoderStepState]:
        return self._run(y, nodes, tokens, a_hat, causal_mask, omega=omega,
                         prop_steps=prop_steps, use_propagation=use_propagation,
                         collect_state=True)

    def _run(self, y, nodes, tokens, a_hat, causal_mask, *, omega, prop_steps,
             use_propagation, collect_state):
        h = self.drop(y)
        self_attn = multi_head_attention(h, h, self.w_sq, self.w_sk, self.w_sv,
                                         self.w_so, self.n_heads, mask=causal_mask)
        a = self.ln1(y + self_attn)

        alpha = graph_attention_scores(self.drop(a), self.drop(nodes),
                                       self.w_gq, self.w_gk, self.n_heads)
        if use_propagation:
            beta = graph_propagate(alpha, a_hat, omega, prop_steps)
        else:
            beta = alpha
        g = graph_context(beta, self.drop(nodes), self.w_gv, self.n_heads)

        c = multi_head_attention(self.drop(a), self.drop(tokens),
                                 self.w_tq, self.w_tk, self.w_tv, None, self.n_heads)
        fused = fuse(self.drop(g), self.drop(c), self.w_d)
        b = self.ln2(a + fused)
        out = self.ln3(b + self.ffn(b))
        state = None
        if collect_state:
            g_raw = graph_context(alpha, nodes, self.w_gv, self.n_heads)
            state = DecoderStepState(y=a, alpha=alpha, beta=beta, g=g_raw,
                                     g_prime=g, c=c, d_fused=fused)
        return out, state
