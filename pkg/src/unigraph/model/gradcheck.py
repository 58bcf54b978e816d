"""Finite-difference verification of analytic gradients.

Central differences with a configurable step are compared against
autograd gradients, per tensor, in double precision. The relative error
of one tensor is max|analytic - numeric| / max(1, max|analytic|,
max|numeric|), so near-zero gradients are judged on absolute error.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import torch


@dataclass
class GradCheckReport:
    max_rel_error: float
    per_param: dict[str, float] = field(default_factory=dict)
    failures: list[str] = field(default_factory=list)
    tol: float = 1e-4

    @property
    def passed(self) -> bool:
        return not self.failures and self.max_rel_error <= self.tol


def finite_diff_gradcheck(fn: Callable[[], torch.Tensor],
                          params: dict[str, torch.Tensor],
                          eps: float = 1e-5, tol: float = 1e-4) -> GradCheckReport:
    """Check autograd gradients of the scalar ``fn()`` against central
    differences for every tensor in ``params``.

    All tensors must be float64 leaves with requires_grad set; ``fn`` must
    be deterministic. Non-finite analytic gradients are reported as
    failures naming the parameter.
    """
    for name, p in params.items():
        if p.dtype != torch.float64:
            raise ValueError(f"gradcheck needs float64 tensors, {name} is {p.dtype}")
        if not p.requires_grad:
            raise ValueError(f"parameter {name} does not require grad")

    loss = fn()
    if loss.dim() != 0:
        raise ValueError("fn() must return a scalar")
    analytic = torch.autograd.grad(loss, list(params.values()), allow_unused=True)

    report = GradCheckReport(max_rel_error=0.0, tol=tol)
    for (name, p), grad in zip(params.items(), analytic):
        if grad is None:
            grad = torch.zeros_like(p)
        if not torch.isfinite(grad).all():
            report.failures.append(f"non-finite analytic gradient for {name}")
            continue
        numeric = torch.zeros_like(p)
        flat = p.data.view(-1)
        num_flat = numeric.view(-1)
        with torch.no_grad():
            for i in range(flat.numel()):
                orig = flat[i].item()
                flat[i] = orig + eps
                up = fn().item()
                flat[i] = orig - eps
                down = fn().item()
                flat[i] = orig
                num_flat[i] = (up - down) / (2.0 * eps)
        scale = max(1.0, grad.abs().max().item(), numeric.abs().max().item())
        rel = (grad - numeric).abs().max().item() / scale
        report.per_param[name] = rel
        report.max_rel_error = max(report.max_rel_error, rel)
    return report


def module_gradcheck(module: torch.nn.Module, fn: Callable[[], torch.Tensor],
                     eps: float = 1e-5, tol: float = 1e-4) -> GradCheckReport:
    """Gradcheck all parameters of a module against ``fn``."""
    params = {name: p for name, p in module.named_parameters()}
    return finite_diff_gradcheck(fn, params, eps=eps, tol=tol)
