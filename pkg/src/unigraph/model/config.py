"""Model configuration.

Desk-scale defaults; the full-scale settings this mirrors are hidden size
768, feed-forward 2048, 2 graph-encoder and 6 graph-decoder layers, omega
0.9, 2 propagation steps, label smoothing 0.1 and gradient clipping at
norm 0.2.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

from unigraph.errors import ModelError


@dataclass(frozen=True)
class ModelConfig:
    vocab_size: int
    d_model: int = 64
    n_heads: int = 4
    omega: float = 0.9
    prop_steps: int = 2
    enc_layers: int = 2
    graph_enc_layers: int = 2
    dec_layers: int = 2
    ffn_width: int = 128
    dropout_rate: float = 0.1
    label_smoothing: float = 0.1
    max_grad_norm: float = 0.2
    max_seq_len: int = 128
    use_propagation: bool = True

    def __post_init__(self):
        if self.d_model % self.n_heads != 0:
            raise ModelError(f"d_model {self.d_model} not divisible by n_heads {self.n_heads}")
        if not 0.0 < self.omega <= 1.0:
            raise ModelError(f"omega must lie in (0, 1], got {self.omega}")
        if self.prop_steps < 0:
            raise ModelError(f"prop_steps must be >= 0, got {self.prop_steps}")
        if self.vocab_size < 1:
            raise ModelError(f"vocab_size must be positive, got {self.vocab_size}")

    @property
    def d_head(self) -> int:
        return self.d_model // self.n_heads

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "ModelConfig":
        return cls(**json.loads(text))

    def replace(self, **kwargs) -> "ModelConfig":
        data = asdict(self)
        data.update(kwargs)
        return ModelConfig(**data)
