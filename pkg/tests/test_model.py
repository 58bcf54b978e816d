import math
import random

import numpy as np
import pytest
import torch

from unigraph.augment import adjacency, augment_graph, degree_normalize
from unigraph.builder import build_graph
from unigraph.errors import ModelError
from unigraph.graph import NodeType
from unigraph.model.attention import (
    fuse,
    graph_attention_scores,
    graph_context,
    graph_propagate,
    graph_propagate_closed_form,
    multi_head_attention,
    propagated_graph_context,
    propagation_matrix,
)
from unigraph.model.config import ModelConfig
from unigraph.model.layers import GraphDecoderLayer
from unigraph.model.seq2seq import (
    TextEncoder,
    build_model,
    init_node_states,
    prepare_graph_inputs,
)
from unigraph.selfcheck import random_semantic_graph

torch.manual_seed(0)
DT = torch.float64


def rand(*shape, seed=0):
    gen = torch.Generator().manual_seed(seed)
    return torch.randn(*shape, dtype=DT, generator=gen)


class TestConfig:
    def test_head_divisibility(self):
        with pytest.raises(ModelError, match="divisible"):
            ModelConfig(vocab_size=10, d_model=10, n_heads=3)

    def test_omega_range(self):
        with pytest.raises(ModelError, match="omega"):
            ModelConfig(vocab_size=10, omega=0.0)
        with pytest.raises(ModelError, match="omega"):
            ModelConfig(vocab_size=10, omega=1.5)

    def test_negative_prop_steps(self):
        with pytest.raises(ModelError, match="prop_steps"):
            ModelConfig(vocab_size=10, prop_steps=-1)

    def test_json_round_trip(self):
        cfg = ModelConfig(vocab_size=40, d_model=32, n_heads=2)
        assert ModelConfig.from_json(cfg.to_json()) == cfg


class TestTextEncoder:
    def test_zero_layers_is_embedding_plus_positions(self):
        cfg = ModelConfig(vocab_size=11, d_model=16, n_heads=2, enc_layers=0,
                          dropout_rate=0.0)
        torch.manual_seed(3)
        enc = TextEncoder(cfg).to(DT).eval()
        ids = torch.tensor([3, 1, 4, 1, 5])
        expected = enc.embed(ids) + enc.pos(torch.arange(5))
        assert torch.equal(enc(ids), expected)

    def test_fixed_seed_bit_identical(self):
        cfg = ModelConfig(vocab_size=11, d_model=16, n_heads=2)
        ids = torch.tensor([1, 2, 3])
        outs = []
        for _ in range(2):
            torch.manual_seed(7)
            enc = TextEncoder(cfg).to(DT).eval()
            outs.append(enc(ids))
        assert torch.equal(outs[0], outs[1])

    def test_output_shape(self):
        cfg = ModelConfig(vocab_size=11, d_model=16, n_heads=2)
        enc = TextEncoder(cfg).to(DT).eval()
        assert enc(torch.arange(7)).shape == (7, 16)

    def test_too_long_raises(self):
        cfg = ModelConfig(vocab_size=11, d_model=16, n_heads=2, max_seq_len=4)
        enc = TextEncoder(cfg).to(DT).eval()
        with pytest.raises(ModelError, match="exceeds maximum"):
            enc(torch.zeros(5, dtype=torch.long))


class TestInitNodeStates:
    def test_single_token_phrase_copies_token_vector(self, einstein_ds):
        g = build_graph(einstein_ds)
        ts = rand(23, 8, seed=1)
        ns = init_node_states(ts, g)
        won = g.nodes[1]
        assert won.canonical_text == "won"
        assert torch.equal(ns[1], ts[won.phrases[0].tokens[0]])

    def test_two_phrases_average(self):
        from unigraph.graph import GraphNode, Phrase, SemanticGraph

        phrases = (
            Phrase(sentence_id=0, start=0, end=0, head=0, phrase_type=NodeType.N,
                   tokens=(0,), text="a"),
            Phrase(sentence_id=1, start=0, end=0, head=0, phrase_type=NodeType.N,
                   tokens=(1,), text="b"),
        )
        g = SemanticGraph(
            nodes=(GraphNode(id=0, node_type=NodeType.N, phrases=phrases,
                             canonical_text="a"),),
            edges=(), alignment={0: 0, 1: 0})
        ts = rand(2, 4, seed=2)
        ns = init_node_states(ts, g)
        assert torch.allclose(ns[0], (ts[0] + ts[1]) / 2, atol=0, rtol=0)

    def test_einstein_fixture_matches_double_loop_oracle(self, einstein_ds):
        g = augment_graph(build_graph(einstein_ds))
        ts = rand(23, 8, seed=3)
        ns = init_node_states(ts, g)
        for node in g.nodes:
            if node.node_type is NodeType.SUPER:
                continue
            acc = torch.zeros(8, dtype=DT)
            for p in node.phrases:
                vec = torch.zeros(8, dtype=DT)
                for t in p.tokens:
                    vec += ts[t]
                acc += vec / len(p.tokens)
            expected = acc / len(node.phrases)
            assert torch.allclose(ns[node.id], expected, atol=1e-15)
        super_node = next(n for n in g.nodes if n.node_type is NodeType.SUPER)
        regular = torch.stack([ns[n.id] for n in g.nodes if n.node_type is not NodeType.SUPER])
        assert torch.allclose(ns[super_node.id], regular.mean(dim=0), atol=1e-15)

    def test_token_out_of_range_raises(self, einstein_ds):
        g = build_graph(einstein_ds)
        with pytest.raises(ModelError, match="beyond input length"):
            init_node_states(rand(5, 8, seed=4), g)

    def test_node_without_tokens_raises(self):
        from unigraph.graph import GraphNode, SemanticGraph

        g = SemanticGraph(nodes=(GraphNode(id=0, node_type=NodeType.N, phrases=(),
                                           canonical_text="ghost"),),
                          edges=(), alignment={})
        with pytest.raises(ModelError, match="no aligned tokens"):
            init_node_states(rand(3, 8, seed=5), g)


class TestAttentionScores:
    def test_zero_query_gives_zero_scores(self):
        nodes, w = rand(4, 8, seed=5), rand(8, 8, seed=6)
        alpha = graph_attention_scores(torch.zeros(8, dtype=DT), nodes, w, w, 2)
        assert torch.equal(alpha, torch.zeros(4, 2, dtype=DT))

    def test_scaling_is_inverse_sqrt_d_head(self):
        y, nodes = rand(8, seed=7), rand(3, 8, seed=8)
        eye = torch.eye(8, dtype=DT)
        alpha = graph_attention_scores(y, nodes, eye, eye, 2)  # d_head = 4
        raw = torch.einsum("ch,jch->jc", y.reshape(2, 4), nodes.reshape(3, 2, 4))
        assert torch.allclose(alpha, raw / math.sqrt(4), atol=1e-15)

    def test_matches_triple_loop_oracle(self):
        y, nodes = rand(8, seed=9), rand(4, 8, seed=10)
        w_q, w_k = rand(8, 8, seed=11), rand(8, 8, seed=12)
        heads, d_head = 2, 4
        alpha = graph_attention_scores(y, nodes, w_q, w_k, heads)
        q = (y @ w_q).reshape(heads, d_head)
        for j in range(4):
            k = (nodes[j] @ w_k).reshape(heads, d_head)
            for c in range(heads):
                expected = sum(float(q[c, h] * k[c, h]) for h in range(d_head))
                assert abs(float(alpha[j, c]) - expected / math.sqrt(d_head)) <= 1e-12


class TestGraphContext:
    def test_uniform_scores_give_mean_value(self):
        nodes, w_v = rand(5, 8, seed=13), rand(8, 8, seed=14)
        alpha = torch.zeros(5, 2, dtype=DT)
        g = graph_context(alpha, nodes, w_v, 2)
        assert torch.allclose(g, (nodes @ w_v).mean(dim=0), atol=1e-12)

    def test_saturated_scores_select_one_node(self):
        nodes, w_v = rand(5, 8, seed=15), rand(8, 8, seed=16)
        alpha = torch.zeros(5, 2, dtype=DT)
        alpha[3] += 1e6
        g = graph_context(alpha, nodes, w_v, 2)
        assert torch.allclose(g, nodes[3] @ w_v, atol=1e-6)

    def test_matches_loop_oracle(self):
        nodes, w_v = rand(5, 8, seed=17), rand(8, 8, seed=18)
        alpha = rand(5, 2, seed=19)
        got = graph_context(alpha, nodes, w_v, 2)
        v = (nodes @ w_v).reshape(5, 2, 4)
        expected = torch.zeros(2, 4, dtype=DT)
        for c in range(2):
            weights = torch.softmax(alpha[:, c], dim=0)
            for j in range(5):
                expected[c] += weights[j] * v[j, c]
        assert torch.allclose(got, expected.reshape(8), atol=1e-12)


def path_graph_a_hat(n=3):
    """Path graph with reverse edges and self loops, column-normalized."""
    from test_graph import typed_graph
    from unigraph.augment import add_reverse_and_self_loops

    g = add_reverse_and_self_loops(
        typed_graph([NodeType.N] * n, [(i, i + 1) for i in range(n - 1)]))
    return torch.from_numpy(degree_normalize(adjacency(g)).entries)


class TestGraphPropagate:
    def test_p_zero_returns_alpha(self):
        alpha = rand(3, 2, seed=20)
        a_hat = path_graph_a_hat()
        assert torch.equal(graph_propagate(alpha, a_hat, 0.9, 0), alpha)

    def test_identity_adjacency_is_fixed_point(self):
        alpha = rand(4, 2, seed=21)
        eye = torch.eye(4, dtype=DT)
        for omega in (0.1, 0.9, 1.0):
            for p in (1, 2, 5):
                assert torch.allclose(graph_propagate(alpha, eye, omega, p), alpha,
                                      atol=1e-12)

    def test_three_node_path_matches_expanded_matrix(self):
        # omega=0.9, p=2: matrix is 0.81 A^2 + 0.09 A + 0.1 I
        a_hat = path_graph_a_hat(3)
        alpha = torch.zeros(3, 1, dtype=DT)
        alpha[0, 0] = 1.0
        got = graph_propagate(alpha, a_hat, 0.9, 2)
        m = 0.81 * (a_hat @ a_hat) + 0.1 * 0.9 * a_hat + 0.1 * torch.eye(3, dtype=DT)
        assert torch.allclose(got, m @ alpha, atol=1e-12)

    def test_propagation_conserves_mass(self):
        a_hat = path_graph_a_hat(5)
        alpha = rand(5, 3, seed=22).abs()
        beta = graph_propagate(alpha, a_hat, 0.9, 4)
        assert torch.allclose(beta.sum(dim=0), alpha.sum(dim=0), atol=1e-10)


class TestClosedForm:
    def test_p_one_expansion(self):
        a_hat = path_graph_a_hat(4)
        alpha = rand(4, 2, seed=23)
        got = graph_propagate_closed_form(alpha, a_hat, 0.7, 1)
        expected = 0.7 * torch.einsum("ij,jc->ic", a_hat, alpha) + 0.3 * alpha
        assert torch.allclose(got, expected, atol=1e-12)

    def test_omega_one_is_pure_diffusion(self):
        a_hat = path_graph_a_hat(4)
        alpha = rand(4, 2, seed=24)
        for k in (1, 2, 3):
            got = graph_propagate_closed_form(alpha, a_hat, 1.0, k)
            expected = alpha
            for _ in range(k):
                expected = torch.einsum("ij,jc->ic", a_hat, expected)
            assert torch.allclose(got, expected, atol=1e-12)

    def test_matches_iterative_on_random_graphs(self):
        rng = random.Random(12)
        for _ in range(5):
            g = augment_graph(random_semantic_graph(rng, 12, edge_prob=0.2))
            a_hat = torch.from_numpy(degree_normalize(adjacency(g)).entries)
            alpha = rand(a_hat.shape[0], 4, seed=rng.randrange(1000))
            for p in (1, 2, 3):
                it = graph_propagate(alpha, a_hat, 0.9, p)
                cf = graph_propagate_closed_form(alpha, a_hat, 0.9, p)
                assert (it - cf).abs().max() <= 1e-9


class TestPropagatedContext:
    def test_p_zero_equals_plain_context(self):
        nodes, w_v = rand(5, 8, seed=25), rand(8, 8, seed=26)
        alpha = rand(5, 2, seed=27)
        a_hat = torch.eye(5, dtype=DT)
        beta = graph_propagate(alpha, a_hat, 0.9, 0)
        assert torch.equal(propagated_graph_context(beta, nodes, w_v, 2),
                           graph_context(alpha, nodes, w_v, 2))

    def test_uniform_beta_gives_mean(self):
        nodes, w_v = rand(5, 8, seed=28), rand(8, 8, seed=29)
        beta = torch.ones(5, 2, dtype=DT)
        assert torch.allclose(propagated_graph_context(beta, nodes, w_v, 2),
                              (nodes @ w_v).mean(dim=0), atol=1e-12)

    def test_matches_loop_oracle(self):
        nodes, w_v = rand(5, 8, seed=30), rand(8, 8, seed=31)
        beta = rand(5, 2, seed=32)
        got = propagated_graph_context(beta, nodes, w_v, 2)
        v = (nodes @ w_v).reshape(5, 2, 4)
        expected = torch.zeros(2, 4, dtype=DT)
        for c in range(2):
            weights = torch.softmax(beta[:, c], dim=0)
            for j in range(5):
                expected[c] += weights[j] * v[j, c]
        assert torch.allclose(got, expected.reshape(8), atol=1e-12)


class TestFuse:
    def test_projection_matrix_selects_graph_vector(self):
        g, c = rand(6, seed=33), rand(6, seed=34)
        w_d = torch.cat([torch.eye(6, dtype=DT), torch.zeros(6, 6, dtype=DT)])
        assert torch.equal(fuse(g, c, w_d), g)

    def test_zero_matrix_gives_zero(self):
        g, c = rand(6, seed=35), rand(6, seed=36)
        assert torch.equal(fuse(g, c, torch.zeros(12, 6, dtype=DT)),
                           torch.zeros(6, dtype=DT))

    def test_matches_matmul_oracle(self):
        g, c, w_d = rand(6, seed=37), rand(6, seed=38), rand(12, 6, seed=39)
        got = fuse(g, c, w_d)
        cat = torch.cat([g, c])
        expected = torch.tensor([sum(float(cat[i] * w_d[i, o]) for i in range(12))
                                 for o in range(6)], dtype=DT)
        assert torch.allclose(got, expected, atol=1e-12)


class TestMaskedAttention:
    def test_identity_mask_attends_to_self_only(self):
        x = rand(4, 8, seed=40)
        w_q, w_k, w_v = rand(8, 8, seed=41), rand(8, 8, seed=42), rand(8, 8, seed=43)
        out = multi_head_attention(x, x, w_q, w_k, w_v, None, 2,
                                   mask=torch.eye(4, dtype=torch.bool))
        assert torch.allclose(out, x @ w_v, atol=1e-12)

    def test_full_mask_equals_unmasked(self):
        x = rand(4, 8, seed=44)
        w = [rand(8, 8, seed=45 + i) for i in range(4)]
        full = multi_head_attention(x, x, *w, 2, mask=torch.ones(4, 4, dtype=torch.bool))
        free = multi_head_attention(x, x, *w, 2, mask=None)
        assert torch.equal(full, free)

    def test_weights_sum_to_one_and_masked_rows_zero(self):
        rng = random.Random(6)
        g = augment_graph(random_semantic_graph(rng, 6), shortcuts=False, supernode=False)
        mask = torch.from_numpy(adjacency(g).entries)
        x = rand(6, 8, seed=49)
        w_q, w_k = rand(8, 8, seed=50), rand(8, 8, seed=51)
        scores = graph_attention_scores(x, x, w_q, w_k, 2)
        scores = torch.where(mask.unsqueeze(-1), scores, torch.tensor(float("-inf"), dtype=DT))
        weights = torch.softmax(scores, dim=-2)
        assert torch.allclose(weights.sum(dim=-2), torch.ones(6, 2, dtype=DT), atol=1e-9)
        assert float(weights[~mask].abs().max()) == 0.0

    def test_fully_masked_row_raises(self):
        x = rand(3, 8, seed=52)
        w = rand(8, 8, seed=53)
        mask = torch.ones(3, 3, dtype=torch.bool)
        mask[1, :] = False
        with pytest.raises(ModelError, match="fully masked"):
            multi_head_attention(x, x, w, w, w, None, 2, mask=mask)


@pytest.fixture(scope="module")
def small_setup(request):
    from pathlib import Path

    from unigraph.annotations import parse_annotation_file

    fixtures = Path(__file__).parent / "fixtures"
    ds = parse_annotation_file((fixtures / "einstein.json").read_bytes())
    g = augment_graph(build_graph(ds))
    gi = prepare_graph_inputs(g)
    cfg = ModelConfig(vocab_size=30, d_model=16, n_heads=2, ffn_width=24,
                      dropout_rate=0.0)
    model = build_model(cfg, seed=11).eval()
    input_ids = torch.arange(23) % 30
    return model, gi, input_ids


class TestDecoderLayer:
    def test_p0_bit_identical_to_no_propagation_path(self, small_setup):
        model, gi, input_ids = small_setup
        tgt = torch.tensor([1, 4, 9])
        with_p0 = model(input_ids, gi, tgt, prop_steps=0, use_propagation=True)
        without = model(input_ids, gi, tgt, use_propagation=False)
        assert torch.equal(with_p0, without)

    def test_propagation_changes_output(self, small_setup):
        model, gi, input_ids = small_setup
        tgt = torch.tensor([1, 4, 9])
        p0 = model(input_ids, gi, tgt, prop_steps=0)
        p2 = model(input_ids, gi, tgt, prop_steps=2)
        assert not torch.equal(p0, p2)

    def test_super_only_graph_is_finite(self):
        from unigraph.augment import add_reverse_and_self_loops, add_supernode
        from unigraph.graph import SemanticGraph

        g = add_reverse_and_self_loops(add_supernode(SemanticGraph()))
        gi = prepare_graph_inputs(g)
        cfg = ModelConfig(vocab_size=9, d_model=16, n_heads=2, ffn_width=24,
                          dropout_rate=0.0)
        model = build_model(cfg, seed=5).eval()
        out = model(torch.arange(4), gi, torch.tensor([1, 2]))
        assert torch.isfinite(out).all()

    def test_causal_prefix_stability(self, small_setup):
        # logits for position t must not depend on later target tokens
        model, gi, input_ids = small_setup
        full = model(input_ids, gi, torch.tensor([1, 4, 9, 2]))
        short = model(input_ids, gi, torch.tensor([1, 4]))
        assert torch.allclose(full[:2], short, atol=1e-12)

    def test_golden_regression_fixed_seed(self, small_setup):
        model, gi, input_ids = small_setup
        out = model(input_ids, gi, torch.tensor([1, 4, 9]))
        # frozen from the first verified run (after gradient checks passed)
        assert out.shape == (3, 30)
        golden_first_row = [
            -0.4610542227256775, 0.5702409510466571, 0.2752236181311887,
            -0.22037294865275014, -0.3347047928903154,
        ]
        assert np.allclose(out[0, :5].detach().numpy(), golden_first_row, atol=1e-9)


class TestDecoderStepState:
    def test_shapes_and_finiteness(self, small_setup):
        from unigraph.model.layers import GraphDecoderLayer

        model, gi, input_ids = small_setup
        ts, ns = model.encode(input_ids, gi)
        layer: GraphDecoderLayer = model.dec_layers[0]
        y = model.tgt_embed(torch.tensor([1, 4])) + model.tgt_pos(torch.arange(2))
        causal = torch.ones(2, 2, dtype=torch.bool).tril()
        out, state = layer.forward_with_state(
            y, ns, ts, gi.a_hat, causal, omega=0.9, prop_steps=2, use_propagation=True)
        n, c, d = ns.shape[0], model.cfg.n_heads, model.cfg.d_model
        assert state.alpha.shape == (2, n, c) and state.beta.shape == (2, n, c)
        assert state.g.shape == (2, d) == state.g_prime.shape == state.c.shape
        assert state.d_fused.shape == (2, d)
        for t in (state.alpha, state.beta, state.g, state.g_prime, state.c,
                  state.d_fused, out):
            assert torch.isfinite(t).all()

    def test_p0_state_collapses_to_unpropagated(self, small_setup):
        model, gi, input_ids = small_setup
        ts, ns = model.encode(input_ids, gi)
        layer = model.dec_layers[0]
        y = model.tgt_embed(torch.tensor([1])) + model.tgt_pos(torch.arange(1))
        causal = torch.ones(1, 1, dtype=torch.bool)
        _, state = layer.forward_with_state(
            y, ns, ts, gi.a_hat, causal, omega=0.9, prop_steps=0, use_propagation=True)
        assert torch.equal(state.alpha, state.beta)
        assert torch.equal(state.g, state.g_prime)

    def test_state_collection_does_not_change_output(self, small_setup):
        model, gi, input_ids = small_setup
        ts, ns = model.encode(input_ids, gi)
        layer = model.dec_layers[0]
        y = model.tgt_embed(torch.tensor([1, 4])) + model.tgt_pos(torch.arange(2))
        causal = torch.ones(2, 2, dtype=torch.bool).tril()
        plain = layer(y, ns, ts, gi.a_hat, causal, omega=0.9, prop_steps=2,
                      use_propagation=True)
        with_state, _ = layer.forward_with_state(
            y, ns, ts, gi.a_hat, causal, omega=0.9, prop_steps=2, use_propagation=True)
        assert torch.equal(plain, with_state)


class TestDeterminism:
    def test_same_seed_same_weights(self):
        cfg = ModelConfig(vocab_size=12, d_model=16, n_heads=2)
        a, b = build_model(cfg, seed=3), build_model(cfg, seed=3)
        for (na, pa), (nb, pb) in zip(a.named_parameters(), b.named_parameters()):
            assert na == nb and torch.equal(pa, pb)

    def test_propagation_linearity(self):
        a_hat = path_graph_a_hat(6)
        a1, a2 = rand(6, 2, seed=60), rand(6, 2, seed=61)
        lhs = graph_propagate(2.5 * a1 - 1.5 * a2, a_hat, 0.9, 3)
        rhs = 2.5 * graph_propagate(a1, a_hat, 0.9, 3) - 1.5 * graph_propagate(a2, a_hat, 0.9, 3)
        assert (lhs - rhs).abs().max() <= 1e-9

    def test_propagation_matrix_row_is_jacobian(self):
        a_hat = path_graph_a_hat(4)
        m = propagation_matrix(a_hat, 0.9, 2)
        alpha = rand(4, 1, seed=62).requires_grad_(True)
        beta = graph_propagate(alpha, a_hat, 0.9, 2)
        jac = torch.autograd.functional.jacobian(
            lambda a: graph_propagate(a, a_hat, 0.9, 2), alpha)
        assert torch.allclose(jac[:, 0, :, 0], m, atol=1e-12)
        assert torch.allclose(beta, m @ alpha.detach(), atol=1e-12)
