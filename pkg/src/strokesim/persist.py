"""On-disk formats for weights, metrics and logs.

Everything is structured text: JSON with parameters as flat row-major
lists of doubles (Python's repr round-trips them exactly), written with
sorted keys and no whitespace games so identical runs produce identical
bytes.  Timestamps never go into these files; they live in a sidecar
metadata file.
"""

from __future__ import annotations

import json
import math
from typing import Any

import numpy as np

from .agent import AgentConfig
from .nets import ACTIVATIONS, MLP

__all__ = ["FORMAT_VERSION", "WeightsError", "dump_json", "load_weights", "save_weights"]

FORMAT_VERSION = 1


class WeightsError(ValueError):
    """Weights file is missing, malformed or inconsistent."""


def dump_json(path: str, obj: Any) -> None:
    with open(path, "w") as f:
        json.dump(obj, f, sort_keys=True, separators=(",", ":"), allow_nan=True)
        f.write("\n")


def _net_to_doc(net: MLP) -> dict:
    return {
        "sizes": list(net.sizes),
        "output_activation": net.output_activation,
        "layers": [
            {"weights": w.reshape(-1).tolist(), "biases": b.tolist()}
            for w, b in zip(net.weights, net.biases)
        ],
    }


def _net_from_doc(doc: dict, where: str) -> MLP:
    try:
        sizes = [int(s) for s in doc["sizes"]]
        activation = doc["output_activation"]
        layers = doc["layers"]
    except (KeyError, TypeError) as exc:
        raise WeightsError(f"{where}: missing or malformed field ({exc})") from exc
    if activation not in ACTIVATIONS:
        raise WeightsError(f"{where}: unknown output activation {activation!r}")
    if len(layers) != len(sizes) - 1:
        raise WeightsError(f"{where}: {len(layers)} layers do not chain through sizes {sizes}")
    weights, biases = [], []
    for i, layer in enumerate(layers):
        fan_in, fan_out = sizes[i], sizes[i + 1]
        try:
            w = np.array(layer["weights"], dtype=float)
            b = np.array(layer["biases"], dtype=float)
        except (KeyError, TypeError, ValueError) as exc:
            raise WeightsError(f"{where}: layer {i} malformed ({exc})") from exc
        if w.size != fan_in * fan_out or b.shape != (fan_out,):
            raise WeightsError(
                f"{where}: layer {i} has {w.size} weights / {b.size} biases, expected {fan_in}x{fan_out}"
            )
        if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
            raise WeightsError(f"{where}: layer {i} contains non-finite values")
        weights.append(w.reshape(fan_in, fan_out))
        biases.append(b)
    return MLP(weights, biases, activation)


def save_weights(path: str, actor: MLP, critics: list[MLP], agent_cfg: AgentConfig) -> None:
    doc = {
        "format_version": FORMAT_VERSION,
        "agent": {
            "hidden_sizes": list(agent_cfg.hidden_sizes),
            "q_dim": agent_cfg.q_dim,
            "use_twin_critics": agent_cfg.use_twin_critics,
        },
        "actor": _net_to_doc(actor),
        "critics": [_net_to_doc(c) for c in critics],
    }
    dump_json(path, doc)


def load_weights(path: str) -> tuple[MLP, list[MLP], dict]:
    """(actor, critics, agent metadata) from a weights file, validated."""
    try:
        with open(path, "r") as f:
            doc = json.load(f)
    except OSError as exc:
        raise WeightsError(f"cannot read weights file {path!r}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise WeightsError(f"weights file {path!r} is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict) or doc.get("format_version") != FORMAT_VERSION:
        raise WeightsError(
            f"weights file {path!r}: unsupported or missing format_version "
            f"(expected {FORMAT_VERSION}, got {doc.get('format_version') if isinstance(doc, dict) else doc!r})"
        )
    try:
        meta = dict(doc["agent"])
        actor = _net_from_doc(doc["actor"], "actor")
        critics = [_net_from_doc(c, f"critic[{i}]") for i, c in enumerate(doc["critics"])]
    except KeyError as exc:
        raise WeightsError(f"weights file {path!r}: missing section {exc}") from exc
    if not critics:
        raise WeightsError(f"weights file {path!r}: no critics stored")
    return actor, critics, meta
