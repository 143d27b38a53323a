"""Capture-point resolution and forward-hook plumbing.

Supports the LLaMA-family decoder layout (Llama, Mistral, Gemma, Qwen):
a ``model.layers`` list whose blocks expose ``self_attn.{q,k,v,o}_proj``,
``mlp.{gate,up,down}_proj``, and the two layernorms. Components are named
by what they capture, block-relative:

    attn.q / attn.k / attn.v / attn.out   projection outputs
    mlp.gate / mlp.up / mlp.down          feed-forward projection outputs
    norm.attn / norm.mlp                  layernorm outputs
    block.in / block.out                  residual stream at block boundary
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import torch

TOKEN_RULES = ("span-end", "eos")

_SUBMODULE_PATHS = {
    "attn.q": "self_attn.q_proj",
    "attn.k": "self_attn.k_proj",
    "attn.v": "self_attn.v_proj",
    "attn.out": "self_attn.o_proj",
    "mlp.gate": "mlp.gate_proj",
    "mlp.up": "mlp.up_proj",
    "mlp.down": "mlp.down_proj",
    "norm.attn": "input_layernorm",
    "norm.mlp": "post_attention_layernorm",
}


class CaptureError(ValueError):
    """A capture point cannot be resolved in the loaded model's graph."""


@dataclass(frozen=True)
class HookSpec:
    """What to capture: model, (block, component) points, token rules."""

    model_id: str
    points: tuple[tuple[int, str], ...]
    token_rules: tuple[str, ...] = ("span-end",)

    def __post_init__(self) -> None:
        for rule in self.token_rules:
            if rule not in TOKEN_RULES:
                raise CaptureError(f"unknown token rule {rule!r} (use {TOKEN_RULES})")
        if not self.points:
            raise CaptureError("no capture points requested")


def decoder_layers(model) -> list[torch.nn.Module]:
    """Locate the transformer block list inside a causal LM."""
    for path in ("model.layers", "layers", "transformer.h", "model.decoder.layers"):
        node = model
        for part in path.split("."):
            node = getattr(node, part, None)
            if node is None:
                break
        if node is not None and len(list(node)) > 0:
            return list(node)
    raise CaptureError(
        f"cannot locate decoder layers in {type(model).__name__}; "
        "expected a LLaMA-family layout"
    )


def _resolve(layer: torch.nn.Module, path: str) -> torch.nn.Module:
    node = layer
    for part in path.split("."):
        node = getattr(node, part, None)
        if node is None:
            raise CaptureError(f"layer has no submodule {path!r}")
    return node


class CaptureSession:
    """Registers hooks for the requested points and collects activations.

    Usage: ``with CaptureSession(model, points) as session:`` then call the
    model; ``session.collected`` maps (block, component) to a float32 tensor
    of shape [seq, dim] for the last forward pass.
    """

    def __init__(self, model, points: Iterable[tuple[int, str]]):
        self.model = model
        self.points = list(points)
        self.collected: dict[tuple[int, str], torch.Tensor] = {}
        self._handles = []

    def _store(self, point):
        def fn(_module, _args, output):
            tensor = output[0] if isinstance(output, tuple) else output
            self.collected[point] = tensor.detach()[0].to(torch.float32)
        return fn

    def _store_input(self, point):
        def fn(_module, args):
            self.collected[point] = args[0].detach()[0].to(torch.float32)
        return fn

    def __enter__(self) -> "CaptureSession":
        layers = decoder_layers(self.model)
        for block, component in self.points:
            if not 0 <= block < len(layers):
                raise CaptureError(
                    f"block {block} out of range (model has {len(layers)} layers)"
                )
            layer = layers[block]
            point = (block, component)
            if component == "block.out":
                self._handles.append(layer.register_forward_hook(self._store(point)))
            elif component == "block.in":
                self._handles.append(
                    layer.register_forward_pre_hook(self._store_input(point))
                )
            elif component in _SUBMODULE_PATHS:
                module = _resolve(layer, _SUBMODULE_PATHS[component])
                self._handles.append(module.register_forward_hook(self._store(point)))
            else:
                raise CaptureError(
                    f"unknown component {component!r} "
                    f"(known: {sorted(_SUBMODULE_PATHS) + ['block.in', 'block.out']})"
                )
        return self

    def __exit__(self, *exc) -> None:
        for handle in self._handles:
            handle.remove()
        self._handles.clear()
