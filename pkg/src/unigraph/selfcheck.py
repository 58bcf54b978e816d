"""Executable invariant suite behind the ``selfcheck`` subcommand.

Every property is seeded, self-contained and cheap enough to run on every
commit: propagation equivalence and linearity, attention masking,
single-layer locality, gradient checks, the augmentation oracles and
construction determinism.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

import numpy as np
import torch

import unigraph.model.attention as attention
from unigraph.augment import (
    add_reverse_and_self_loops,
    add_shortcut_edges,
    add_supernode,
    adjacency,
    augment_graph,
    degree_normalize,
)
from unigraph.builder import build_graph
from unigraph.graph import (
    EdgeKind,
    GraphEdge,
    GraphNode,
    NodeType,
    Phrase,
    SemanticGraph,
    enumerate_meta_paths,
    graph_to_json,
)
from unigraph.harness.search import trigram_block
from unigraph.harness.task import _example_document
from unigraph.model.config import ModelConfig
from unigraph.model.gradcheck import finite_diff_gradcheck
from unigraph.model.layers import GraphEncoderLayer


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str


def random_semantic_graph(rng: random.Random, n_nodes: int,
                          edge_prob: float = 0.15) -> SemanticGraph:
    """Random typed graph with ORIGINAL edges, for oracle checks."""
    types = [rng.choice([NodeType.N, NodeType.V, NodeType.O]) for _ in range(n_nodes)]
    nodes = tuple(
        GraphNode(id=i, node_type=types[i],
                  phrases=(Phrase(sentence_id=0, start=i, end=i, head=i,
                                  phrase_type=types[i], tokens=(i,), text=f"n{i}"),),
                  canonical_text=f"n{i}")
        for i in range(n_nodes))
    edges = []
    for i in range(n_nodes):
        for j in range(n_nodes):
            if i != j and rng.random() < edge_prob:
                edges.append(GraphEdge(src=i, dst=j, kind=EdgeKind.ORIGINAL))
    alignment = {i: i for i in range(n_nodes)}
    return SemanticGraph(nodes=nodes, edges=tuple(edges), alignment=alignment)


def _random_a_hat(rng: random.Random, n: int) -> torch.Tensor:
    g = augment_graph(random_semantic_graph(rng, n))
    return torch.from_numpy(degree_normalize(adjacency(g)).entries)


def check_propagation_equivalence(seed: int, n_graphs: int = 20,
                                  max_nodes: int = 50) -> CheckResult:
    rng = random.Random(seed)
    worst = 0.0
    for _ in range(n_graphs):
        n = rng.randint(2, max_nodes)
        a_hat = _random_a_hat(rng, n)
        alpha = torch.from_numpy(
            np.random.default_rng(rng.randrange(2**31)).normal(size=(a_hat.shape[0], 4)))
        for omega in (0.1, 0.5, 0.9, 1.0):
            for p in (0, 1, 2, 5):
                it = attention.graph_propagate(alpha, a_hat, omega, p)
                cf = attention.graph_propagate_closed_form(alpha, a_hat, omega, p)
                worst = max(worst, float((it - cf).abs().max()))
    return CheckResult("propagation_equivalence", worst <= 1e-9,
                       f"max |iterative - closed form| = {worst:.3e}")


def check_propagation_linearity(seed: int) -> CheckResult:
    rng = random.Random(seed + 1)
    worst = 0.0
    for _ in range(5):
        n = rng.randint(2, 30)
        a_hat = _random_a_hat(rng, n)
        gen = np.random.default_rng(rng.randrange(2**31))
        a1 = torch.from_numpy(gen.normal(size=(a_hat.shape[0], 4)))
        a2 = torch.from_numpy(gen.normal(size=(a_hat.shape[0], 4)))
        ca, cb = gen.normal(), gen.normal()
        lhs = attention.graph_propagate(ca * a1 + cb * a2, a_hat, 0.9, 3)
        rhs = ca * attention.graph_propagate(a1, a_hat, 0.9, 3) \
            + cb * attention.graph_propagate(a2, a_hat, 0.9, 3)
        worst = max(worst, float((lhs - rhs).abs().max()))
    return CheckResult("propagation_linearity", worst <= 1e-9,
                       f"max linearity violation = {worst:.3e}")


def check_attention_softmax_masking(seed: int) -> CheckResult:
    rng = random.Random(seed + 2)
    torch.manual_seed(seed + 2)
    ok, detail = True, ""
    for _ in range(5):
        g = add_reverse_and_self_loops(random_semantic_graph(rng, rng.randint(2, 20)))
        mask = torch.from_numpy(adjacency(g).entries)
        n = mask.shape[0]
        q = torch.randn(n, 16, dtype=torch.float64)
        w = torch.randn(16, 16, dtype=torch.float64)
        scores = attention.graph_attention_scores(q, q, w, w, 2)
        scores = torch.where(mask.unsqueeze(-1), scores, torch.tensor(float("-inf")))
        weights = torch.softmax(scores, dim=-2)
        row_sums = weights.sum(dim=-2)
        if not torch.allclose(row_sums, torch.ones_like(row_sums), atol=1e-9):
            ok, detail = False, "softmax rows do not sum to 1"
            break
        masked_vals = weights[~mask]  # [num_masked, heads]
        if masked_vals.numel() and float(masked_vals.abs().max()) != 0.0:
            ok, detail = False, "masked attention weight is not exactly zero"
            break
    return CheckResult("attention_softmax_masking", ok, detail or "rows sum to 1, masked entries exactly 0")


def check_encoder_mask_locality(seed: int) -> CheckResult:
    rng = random.Random(seed + 3)
    torch.manual_seed(seed + 3)
    cfg = ModelConfig(vocab_size=8, d_model=16, n_heads=2, ffn_width=24, dropout_rate=0.0)
    layer = GraphEncoderLayer(cfg).to(torch.float64).eval()
    g = add_reverse_and_self_loops(random_semantic_graph(rng, 8))
    mask = torch.from_numpy(adjacency(g).entries)
    states = torch.randn(8, 16, dtype=torch.float64)
    base = layer(states, mask)
    ok = True
    for j in range(8):
        bumped = states.clone()
        bumped[j] += 0.37
        out = layer(bumped, mask)
        changed = (out != base).any(dim=-1)
        allowed = mask[:, j]
        if bool((changed & ~allowed).any()):
            ok = False
            break
    return CheckResult("encoder_mask_locality", ok,
                       "perturbing node j only moves outputs with A[i][j]=1")


def check_gradients(seed: int) -> CheckResult:
    torch.manual_seed(seed + 4)
    n, d, heads = 3, 8, 2
    y = torch.randn(d, dtype=torch.float64, requires_grad=True)
    nodes = torch.randn(n, d, dtype=torch.float64, requires_grad=True)
    w_q = torch.randn(d, d, dtype=torch.float64, requires_grad=True)
    w_k = torch.randn(d, d, dtype=torch.float64, requires_grad=True)
    w_v = torch.randn(d, d, dtype=torch.float64, requires_grad=True)
    w_d = torch.randn(2 * d, d, dtype=torch.float64, requires_grad=True)
    a_hat = torch.eye(n, dtype=torch.float64) * 0.5 + torch.full((n, n), 0.5 / n)

    probe = torch.randn(n, heads, dtype=torch.float64)
    probe_d = torch.randn(d, dtype=torch.float64)

    checks = {
        "graph_attention_scores": (lambda: (attention.graph_attention_scores(
            y, nodes, w_q, w_k, heads) * probe).sum(), {"y": y, "nodes": nodes, "w_q": w_q, "w_k": w_k}),
        "graph_context": (lambda: (attention.graph_context(
            attention.graph_attention_scores(y, nodes, w_q, w_k, heads),
            nodes, w_v, heads) * probe_d).sum(), {"nodes": nodes, "w_v": w_v}),
        "graph_propagate": (lambda: (attention.graph_propagate(
            attention.graph_attention_scores(y, nodes, w_q, w_k, heads),
            a_hat, 0.9, 2) * probe).sum(), {"y": y, "w_q": w_q}),
        "fuse": (lambda: (attention.fuse(y, probe_d, w_d) * probe_d).sum(), {"y": y, "w_d": w_d}),
    }
    worst, fails = 0.0, []
    for name, (fn, params) in checks.items():
        rep = finite_diff_gradcheck(fn, params, eps=1e-5, tol=1e-4)
        worst = max(worst, rep.max_rel_error)
        if not rep.passed:
            fails.append(name)
    return CheckResult("gradient_checks", not fails,
                       f"max relative error {worst:.3e}" + (f"; failed: {fails}" if fails else ""))


def check_shortcut_oracle(seed: int, n_graphs: int = 10, max_nodes: int = 200) -> CheckResult:
    rng = random.Random(seed + 5)
    for _ in range(n_graphs):
        n = rng.randint(2, max_nodes)
        g = add_reverse_and_self_loops(random_semantic_graph(rng, n, edge_prob=3.0 / n))
        with_shortcuts = add_shortcut_edges(g)
        got = {(e.src, e.dst) for e in with_shortcuts.edges if e.kind is EdgeKind.SHORTCUT}
        a = adjacency(g).entries
        two_hop = (a.astype(np.int64) @ a.astype(np.int64)) > 0
        expected_mat = two_hop & ~a
        np.fill_diagonal(expected_mat, False)
        expected = {(int(j), int(i)) for i, j in zip(*np.nonzero(expected_mat))}
        if got != expected:
            return CheckResult("shortcut_two_hop_oracle", False,
                               f"mismatch on n={n}: {len(got ^ expected)} differing pairs")
    return CheckResult("shortcut_two_hop_oracle", True,
                       f"{n_graphs} random graphs match the boolean-A^2 oracle")


def _weak_components(g: SemanticGraph, kinds: frozenset[EdgeKind]) -> int:
    n = g.n_nodes
    if n == 0:
        return 0
    adj: dict[int, set[int]] = {i: set() for i in range(n)}
    for e in g.edges:
        if e.kind in kinds:
            adj[e.src].add(e.dst)
            adj[e.dst].add(e.src)
    seen: set[int] = set()
    comps = 0
    for start in range(n):
        if start in seen:
            continue
        comps += 1
        stack = [start]
        while stack:
            cur = stack.pop()
            if cur in seen:
                continue
            seen.add(cur)
            stack.extend(adj[cur] - seen)
    return comps


def check_supernode_connectivity(seed: int, n_graphs: int = 10) -> CheckResult:
    rng = random.Random(seed + 6)
    for _ in range(n_graphs):
        g = random_semantic_graph(rng, rng.randint(1, 60), edge_prob=0.02)
        aug = add_supernode(g)
        comps = _weak_components(aug, frozenset({EdgeKind.ORIGINAL, EdgeKind.SUPER_LINK}))
        if comps != 1:
            return CheckResult("supernode_connectivity", False,
                               f"{comps} components after supernode")
    return CheckResult("supernode_connectivity", True,
                       f"{n_graphs} random graphs collapse to one weak component")


def check_column_stochastic(seed: int, n_graphs: int = 10) -> CheckResult:
    rng = random.Random(seed + 7)
    worst = 0.0
    for _ in range(n_graphs):
        g = augment_graph(random_semantic_graph(rng, rng.randint(1, 80)))
        a_hat = degree_normalize(adjacency(g)).entries
        power = np.eye(a_hat.shape[0])
        for _p in range(3):
            power = power @ a_hat
            worst = max(worst, float(np.abs(power.sum(axis=0) - 1.0).max()))
    return CheckResult("adjacency_column_stochastic", worst <= 1e-12,
                       f"max |column sum - 1| over powers = {worst:.3e}")


def check_metapath_oracle(seed: int) -> CheckResult:
    rng = random.Random(seed + 8)
    for _ in range(10):
        g = random_semantic_graph(rng, rng.randint(2, 25), edge_prob=0.2)
        types = [n.node_type for n in g.nodes]
        edges = {(e.src, e.dst) for e in g.edges if e.kind is EdgeKind.ORIGINAL}
        pattern = [rng.choice([NodeType.N, NodeType.V, NodeType.O]) for _ in range(rng.choice([2, 3]))]
        got = set(enumerate_meta_paths(g, pattern))
        if len(pattern) == 2:
            expected = {(u, v) for (u, v) in edges
                        if types[u] is pattern[0] and types[v] is pattern[1]}
        else:
            expected = {(u, v, w)
                        for (u, v) in edges for (v2, w) in edges if v2 == v
                        if types[u] is pattern[0] and types[v] is pattern[1]
                        and types[w] is pattern[2]}
        if got != expected:
            return CheckResult("metapath_exhaustive_oracle", False,
                               f"mismatch for pattern {[t.value for t in pattern]}")
    return CheckResult("metapath_exhaustive_oracle", True,
                       "10 random typed graphs match the nested-loop oracle")


def check_build_determinism(seed: int) -> CheckResult:
    ds = _example_document("selfcheck", "Ada", "Lovelace", "studied", "engine",
                           "showed", "model")
    blobs = {graph_to_json(build_graph(ds)) for _ in range(3)}
    g = build_graph(ds)
    non_punct = [t.index for d in ds.documents for t in d.tokens if not t.is_punct]
    total_ok = sorted(g.alignment) == non_punct
    compress_ok = g.n_nodes <= len(non_punct)
    ok = len(blobs) == 1 and total_ok and compress_ok
    return CheckResult("build_determinism", ok,
                       "3 runs byte-identical; alignment total; node count compresses")


def check_trigram_blocking(seed: int) -> CheckResult:
    rng = random.Random(seed + 9)
    for _ in range(200):
        hyp = [rng.randrange(6) for _ in range(rng.randint(0, 30))]
        cand = rng.randrange(6)
        seen = {tuple(hyp[i:i + 3]) for i in range(len(hyp) - 2)}
        expected = len(hyp) < 2 or (hyp[-2], hyp[-1], cand) not in seen
        if trigram_block(hyp, cand) != expected:
            return CheckResult("trigram_blocking_oracle", False,
                               f"mismatch on {hyp} + {cand}")
    return CheckResult("trigram_blocking_oracle", True, "matches hash-set oracle on 200 cases")


def run_selfcheck(seed: int = 0) -> list[CheckResult]:
    return [
        check_propagation_equivalence(seed),
        check_propagation_linearity(seed),
        check_attention_softmax_masking(seed),
        check_encoder_mask_locality(seed),
        check_gradients(seed),
        check_shortcut_oracle(seed),
        check_supernode_connectivity(seed),
        check_column_stochastic(seed),
        check_metapath_oracle(seed),
        check_build_determinism(seed),
        check_trigram_blocking(seed),
    ]
