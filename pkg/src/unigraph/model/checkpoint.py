"""Checkpoint format: one .npz of named tensors plus a JSON manifest.

The manifest sits next to the tensor file (ckpt.npz -> ckpt.json) and
holds the model configuration and a name -> shape map for quick
inspection without loading the arrays.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import torch

from unigraph.errors import ModelError
from unigraph.model.config import ModelConfig
from unigraph.model.seq2seq import GraphSeq2Seq


def manifest_path(path: Path) -> Path:
    return path.with_suffix(".json")


def save_checkpoint(model: GraphSeq2Seq, path: str | Path) -> None:
    path = Path(path)
    state = {name: tensor.detach().cpu().numpy()
             for name, tensor in model.state_dict().items()}
    with open(path, "wb") as fh:
        np.savez(fh, **state)
    manifest = {
        "config": json.loads(model.cfg.to_json()),
        "tensors": {name: list(arr.shape) for name, arr in sorted(state.items())},
    }
    manifest_path(path).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def load_checkpoint(path: str | Path) -> GraphSeq2Seq:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(path)
    mpath = manifest_path(path)
    if not mpath.exists():
        raise ModelError(f"checkpoint manifest {mpath} missing")
    manifest = json.loads(mpath.read_text())
    cfg = ModelConfig(**manifest["config"])
    model = GraphSeq2Seq(cfg).to(torch.float64)
    arrays = np.load(path)
    state = {name: torch.from_numpy(arrays[name]) for name in arrays.files}
    missing = set(model.state_dict()) - set(state)
    if missing:
        raise ModelError(f"checkpoint missing tensors: {sorted(missing)[:5]}")
    model.load_state_dict(state)
    return model
