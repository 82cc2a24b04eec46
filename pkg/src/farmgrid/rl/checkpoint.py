"""Versioned JSON checkpoints for trained policies.

The file carries a format/version tag, the training config, the seed, and
the learned parameters; loading reconstructs a ready-to-run policy.
"""

from __future__ import annotations

import json
from dataclasses import asdict
from pathlib import Path
from typing import Optional

import numpy as np

from ..pricing import TariffSchedule
from .common import TrainResult
from .dqn import DqnPolicy
from .nn import Mlp
from .ppo import PpoPolicy
from .qlearning import QLearningConfig, QTable, QTablePolicy

CHECKPOINT_FORMAT = "farmgrid-checkpoint"
CHECKPOINT_VERSION = 1


class CheckpointError(ValueError):
    """Raised for unreadable or incompatible checkpoint files."""


def _mlp_to_dict(net: Mlp) -> dict:
    return {
        "layer_sizes": list(net.layer_sizes),
        "activation": net.activation,
        "weights": [w.tolist() for w in net.weights],
        "biases": [b.tolist() for b in net.biases],
    }


def _mlp_from_dict(data: dict) -> Mlp:
    net = Mlp(data["layer_sizes"], activation=data["activation"])
    net.weights = [np.asarray(w, dtype=np.float64) for w in data["weights"]]
    net.biases = [np.asarray(b, dtype=np.float64) for b in data["biases"]]
    return net


def save_policy(
    path: str | Path,
    result: TrainResult,
    config,
    priming_on: bool = True,
) -> None:
    """Serialize a trained policy (and its config) as versioned JSON."""
    policy = result.policy
    if isinstance(policy, QTablePolicy):
        data = {
            "entries": [
                [list(state), row.tolist()] for state, row in sorted(policy.table.items())
            ],
        }
    elif isinstance(policy, DqnPolicy):
        data = {"q_net": _mlp_to_dict(policy.q_net)}
    elif isinstance(policy, PpoPolicy):
        data = {
            "actor": _mlp_to_dict(policy.actor),
            "critic": _mlp_to_dict(policy.critic),
        }
    else:
        raise CheckpointError(f"cannot checkpoint policy type {type(policy).__name__}")
    doc = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "algo": result.algo,
        "seed": result.seed,
        "priming_on": priming_on,
        "config": asdict(config) if config is not None else {},
        "data": data,
    }
    Path(path).write_text(json.dumps(doc, sort_keys=True))


def load_policy(
    path: str | Path,
    schedule: Optional[TariffSchedule] = None,
    priming_on: Optional[bool] = None,
):
    """Load a checkpoint; returns ``(policy, metadata)``.

    ``schedule``/``priming_on`` override the stored values when the policy
    is evaluated under a different tariff configuration (tabular policies
    need them to reproduce state discretization).
    """
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from None
    if doc.get("format") != CHECKPOINT_FORMAT:
        raise CheckpointError(f"{path}: not a {CHECKPOINT_FORMAT} file")
    if doc.get("version") != CHECKPOINT_VERSION:
        raise CheckpointError(
            f"{path}: unsupported checkpoint version {doc.get('version')}"
        )
    algo = doc["algo"]
    priming = doc.get("priming_on", True) if priming_on is None else priming_on
    if algo == "qtable":
        cfg_dict = dict(doc["config"])
        if "kwh_edges" in cfg_dict:
            cfg_dict["kwh_edges"] = tuple(cfg_dict["kwh_edges"])
        config = QLearningConfig(**cfg_dict)
        table = QTable()
        for state, row in doc["data"]["entries"]:
            table.values(tuple(int(s) for s in state))[:] = np.asarray(row)
        policy = QTablePolicy(table, config, schedule or TariffSchedule(), priming)
    elif algo == "dqn":
        policy = DqnPolicy(_mlp_from_dict(doc["data"]["q_net"]))
    elif algo == "ppo":
        policy = PpoPolicy(
            _mlp_from_dict(doc["data"]["actor"]),
            _mlp_from_dict(doc["data"]["critic"]),
            deterministic=True,
            seed=int(doc.get("seed", 0)),
        )
    else:
        raise CheckpointError(f"{path}: unknown algo {algo!r}")
    meta = {k: doc[k] for k in ("algo", "seed", "version", "priming_on") if k in doc}
    meta["config"] = doc.get("config", {})
    return policy, meta
