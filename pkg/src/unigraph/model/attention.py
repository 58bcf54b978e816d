"""Attention primitives for the graph decoder and encoders.

The graph-attention path scores every node against the decoder query,
optionally diffuses those salient scores over the normalized adjacency
(``beta_k = omega * A_hat @ beta_{k-1} + (1 - omega) * beta_0``), and only
then softmax-weights the node values. Heads are kept as independent score
channels throughout; their outputs are concatenated without an extra
output projection, and a single linear fusion map combines the graph and
text context vectors.
"""

from __future__ import annotations

import math

import torch

from unigraph.errors import ModelError


def split_heads(x: torch.Tensor, n_heads: int) -> torch.Tensor:
    """[..., d] -> [..., n_heads, d_head]."""
    d = x.shape[-1]
    if d % n_heads != 0:
        raise ModelError(f"width {d} not divisible by {n_heads} heads")
    return x.reshape(*x.shape[:-1], n_heads, d // n_heads)


def graph_attention_scores(y: torch.Tensor, nodes: torch.Tensor,
                           w_q: torch.Tensor, w_k: torch.Tensor,
                           n_heads: int) -> torch.Tensor:
    """Per-head salient scores of every node against the query.

    ``y`` is [..., d], ``nodes`` is [n, d]; result is [..., n, n_heads]:
    scaled dot products (y W_Q)(v_j W_K)^T / sqrt(d_head), no softmax.
    """
    q = split_heads(y @ w_q, n_heads)        # [..., C, dh]
    k = split_heads(nodes @ w_k, n_heads)    # [n, C, dh]
    scale = 1.0 / math.sqrt(q.shape[-1])
    return torch.einsum("...ch,jch->...jc", q, k) * scale


def graph_context(alpha: torch.Tensor, nodes: torch.Tensor,
                  w_v: torch.Tensor, n_heads: int) -> torch.Tensor:
    """Softmax the scores over nodes per head and mix the value projections.

    ``alpha`` is [..., n, n_heads]; the per-head weighted sums are
    concatenated back to [..., d].
    """
    v = split_heads(nodes @ w_v, n_heads)            # [n, C, dh]
    weights = torch.softmax(alpha, dim=-2)           # over nodes
    ctx = torch.einsum("...jc,jch->...ch", weights, v)
    return ctx.reshape(*ctx.shape[:-2], -1)


def graph_propagate(alpha: torch.Tensor, a_hat: torch.Tensor,
                    omega: float, p: int) -> torch.Tensor:
    """Diffuse salient scores p times with teleport probability omega.

    beta_0 = alpha; beta_k = omega * A_hat beta_{k-1} + (1 - omega) * beta_0.
    ``a_hat`` is the column-stochastic [n, n] normalized adjacency; each
    head channel propagates independently.
    """
    beta = alpha
    for _ in range(p):
        beta = omega * torch.einsum("ij,...jc->...ic", a_hat, beta) + (1.0 - omega) * alpha
    return beta


def propagation_matrix(a_hat: torch.Tensor, omega: float, p: int) -> torch.Tensor:
    """omega^p A_hat^p + (1 - omega) * sum_{i<p} omega^i A_hat^i."""
    n = a_hat.shape[0]
    eye = torch.eye(n, dtype=a_hat.dtype, device=a_hat.device)
    power = eye
    acc = torch.zeros_like(eye)
    for i in range(p):
        acc = acc + (omega ** i) * power
        power = power @ a_hat
    return (omega ** p) * power + (1.0 - omega) * acc


def graph_propagate_closed_form(alpha: torch.Tensor, a_hat: torch.Tensor,
                                omega: float, p: int) -> torch.Tensor:
    """Closed form of :func:`graph_propagate` via dense matrix powers."""
    m = propagation_matrix(a_hat, omega, p)
    return torch.einsum("ij,...jc->...ic", m, alpha)


def propagated_graph_context(beta: torch.Tensor, nodes: torch.Tensor,
                             w_v: torch.Tensor, n_heads: int) -> torch.Tensor:
    """Weighted sum of node values under the propagated scores."""
    return graph_context(beta, nodes, w_v, n_heads)


def fuse(g: torch.Tensor, c: torch.Tensor, w_d: torch.Tensor) -> torch.Tensor:
    """Linear fusion of the graph and text context vectors: W_d^T [g, c]."""
    return torch.cat([g, c], dim=-1) @ w_d


def multi_head_attention(query: torch.Tensor, memory: torch.Tensor,
                         w_q: torch.Tensor, w_k: torch.Tensor, w_v: torch.Tensor,
                         w_o: torch.Tensor | None, n_heads: int,
                         mask: torch.Tensor | None = None) -> torch.Tensor:
    """Standard multi-head attention with an optional boolean mask.

    ``mask[t, s]`` permits query position t to attend to memory position s;
    masked logits become -inf so masked weights are exactly zero. A query
    row with nothing to attend to is an error.
    """
    if mask is not None and not bool(mask.any(dim=-1).all()):
        raise ModelError("attention mask has a fully masked query row")
    scores = graph_attention_scores(query, memory, w_q, w_k, n_heads)  # [..., T?, S, C]
    if mask is not None:
        scores = torch.where(mask.unsqueeze(-1), scores,
                             torch.tensor(float("-inf"), dtype=scores.dtype))
    ctx = graph_context(scores, memory, w_v, n_heads)
    return ctx @ w_o if w_o is not None else ctx
