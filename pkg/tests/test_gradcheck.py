import pytest
import torch

from unigraph.model.attention import (
    fuse,
    graph_attention_scores,
    graph_context,
    graph_propagate,
    propagation_matrix,
)
from unigraph.model.config import ModelConfig
from unigraph.model.gradcheck import finite_diff_gradcheck, module_gradcheck
from unigraph.model.layers import GraphDecoderLayer, GraphEncoderLayer

DT = torch.float64


def leaf(*shape, seed):
    gen = torch.Generator().manual_seed(seed)
    return torch.randn(*shape, dtype=DT, generator=gen).requires_grad_(True)


def const(*shape, seed):
    gen = torch.Generator().manual_seed(seed)
    return torch.randn(*shape, dtype=DT, generator=gen)


class TestFiniteDiffGradcheck:
    def test_linear_fuse_is_nearly_exact(self):
        g, c = leaf(6, seed=1), leaf(6, seed=2)
        w_d = leaf(12, 6, seed=3)
        probe = const(6, seed=4)
        report = finite_diff_gradcheck(
            lambda: (fuse(g, c, w_d) * probe).sum(),
            {"g": g, "c": c, "w_d": w_d}, eps=1e-5, tol=1e-6)
        assert report.passed
        assert report.max_rel_error <= 1e-6  # exactly linear

    def test_nonfinite_gradient_reported_by_name(self):
        x = leaf(3, seed=5)

        def fn():
            return torch.log(x.sum() - x.sum()).sum()  # log(0) -> -inf, grad nan

        report = finite_diff_gradcheck(fn, {"x": x}, eps=1e-5)
        assert not report.passed
        assert any("x" in f for f in report.failures)

    def test_rejects_float32(self):
        x = torch.randn(3, requires_grad=True)
        with pytest.raises(ValueError, match="float64"):
            finite_diff_gradcheck(lambda: x.sum(), {"x": x})

    def test_propagate_jacobian_matches_closed_form_matrix(self):
        n = 4
        gen = torch.Generator().manual_seed(6)
        raw = torch.rand(n, n, generator=gen, dtype=DT) + 0.1
        a_hat = raw / raw.sum(dim=0, keepdim=True)
        alpha = leaf(n, 1, seed=7)
        probe = const(n, 1, seed=8)
        report = finite_diff_gradcheck(
            lambda: (graph_propagate(alpha, a_hat, 0.9, 2) * probe).sum(),
            {"alpha": alpha}, eps=1e-5, tol=1e-6)
        assert report.passed
        # the analytic jacobian of a linear map is the matrix itself
        m = propagation_matrix(a_hat, 0.9, 2)
        alpha.grad = None
        (graph_propagate(alpha, a_hat, 0.9, 2) * probe).sum().backward()
        assert torch.allclose(alpha.grad, m.T @ probe, atol=1e-12)


class TestOperationGradients:
    """Acceptance-grade finite-difference checks, small shapes."""

    def test_graph_attention_scores(self):
        y, nodes = leaf(8, seed=10), leaf(3, 8, seed=11)
        w_q, w_k = leaf(8, 8, seed=12), leaf(8, 8, seed=13)
        probe = const(3, 2, seed=14)
        report = finite_diff_gradcheck(
            lambda: (graph_attention_scores(y, nodes, w_q, w_k, 2) * probe).sum(),
            {"y": y, "nodes": nodes, "w_q": w_q, "w_k": w_k}, eps=1e-5, tol=1e-4)
        assert report.passed, report.per_param

    def test_graph_context(self):
        nodes, w_v = leaf(4, 8, seed=15), leaf(8, 8, seed=16)
        alpha = leaf(4, 2, seed=17)
        probe = const(8, seed=18)
        report = finite_diff_gradcheck(
            lambda: (graph_context(alpha, nodes, w_v, 2) * probe).sum(),
            {"alpha": alpha, "nodes": nodes, "w_v": w_v}, eps=1e-5, tol=1e-4)
        assert report.passed, report.per_param

    def test_graph_propagate(self):
        gen = torch.Generator().manual_seed(19)
        raw = torch.rand(4, 4, generator=gen, dtype=DT) + 0.05
        a_hat = raw / raw.sum(dim=0, keepdim=True)
        alpha = leaf(4, 2, seed=20)
        probe = const(4, 2, seed=21)
        report = finite_diff_gradcheck(
            lambda: (graph_propagate(alpha, a_hat, 0.9, 2) * probe).sum(),
            {"alpha": alpha}, eps=1e-5, tol=1e-4)
        assert report.passed, report.per_param

    def test_fuse(self):
        g, c, w_d = leaf(8, seed=22), leaf(8, seed=23), leaf(16, 8, seed=24)
        probe = const(8, seed=25)
        report = finite_diff_gradcheck(
            lambda: (fuse(g, c, w_d) * probe).sum(),
            {"g": g, "c": c, "w_d": w_d}, eps=1e-5, tol=1e-4)
        assert report.passed, report.per_param

    def test_graph_encode_layer(self):
        cfg = ModelConfig(vocab_size=9, d_model=8, n_heads=2, ffn_width=12,
                          dropout_rate=0.0)
        torch.manual_seed(26)
        layer = GraphEncoderLayer(cfg).to(DT).eval()
        nodes = const(4, 8, seed=27)
        mask = torch.ones(4, 4, dtype=torch.bool)
        mask[0, 2] = mask[2, 0] = False
        probe = const(4, 8, seed=28)
        report = module_gradcheck(layer, lambda: (layer(nodes, mask) * probe).sum(),
                                  eps=1e-5, tol=1e-4)
        assert report.passed, report.per_param

    def test_graph_decode_layer(self):
        cfg = ModelConfig(vocab_size=9, d_model=8, n_heads=2, ffn_width=12,
                          dropout_rate=0.0)
        torch.manual_seed(29)
        layer = GraphDecoderLayer(cfg).to(DT).eval()
        y = const(2, 8, seed=30)
        nodes = const(3, 8, seed=31)
        tokens = const(4, 8, seed=32)
        gen = torch.Generator().manual_seed(33)
        raw = torch.rand(3, 3, generator=gen, dtype=DT) + 0.05
        a_hat = raw / raw.sum(dim=0, keepdim=True)
        causal = torch.ones(2, 2, dtype=torch.bool).tril()
        probe = const(2, 8, seed=34)

        def fn():
            out = layer(y, nodes, tokens, a_hat, causal,
                        omega=0.9, prop_steps=2, use_propagation=True)
            return (out * probe).sum()

        report = module_gradcheck(layer, fn, eps=1e-5, tol=1e-4)
        assert report.passed, {k: v for k, v in report.per_param.items() if v > 1e-5}

    def test_decode_layer_input_gradients(self):
        cfg = ModelConfig(vocab_size=9, d_model=8, n_heads=2, ffn_width=12,
                          dropout_rate=0.0)
        torch.manual_seed(35)
        layer = GraphDecoderLayer(cfg).to(DT).eval()
        y = leaf(2, 8, seed=36)
        nodes = leaf(3, 8, seed=37)
        tokens = leaf(4, 8, seed=38)
        a_hat = torch.eye(3, dtype=DT) * 0.6 + torch.full((3, 3), 0.4 / 3, dtype=DT)
        causal = torch.ones(2, 2, dtype=torch.bool).tril()
        probe = const(2, 8, seed=39)
        report = finite_diff_gradcheck(
            lambda: (layer(y, nodes, tokens, a_hat, causal, omega=0.9,
                           prop_steps=2, use_propagation=True) * probe).sum(),
            {"y": y, "nodes": nodes, "tokens": tokens}, eps=1e-5, tol=1e-4)
        assert report.passed, report.per_param
