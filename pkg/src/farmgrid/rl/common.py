"""Shared training plumbing: feature scaling, schedules, curves, results."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Protocol, Sequence

import numpy as np

from ..env import Action, Observation

# Fixed feature scales so raw observations land near unit magnitude.
_FEATURE_SCALE = np.array([20.0, 20.0, 100.0, 23.0, 0.66, 0.66])


class TrainingDiverged(RuntimeError):
    """Raised when a training loss stops being finite."""


class Policy(Protocol):
    def __call__(self, obs: Observation) -> Action: ...


def obs_features(obs: Observation) -> np.ndarray:
    """Scale an observation into the network input space."""
    return np.asarray(obs.as_tuple(), dtype=np.float64) / _FEATURE_SCALE


def linear_epsilon(
    step: int, total_steps: int, fraction: float, start: float, end: float
) -> float:
    """Linearly anneal exploration over the first ``fraction`` of steps."""
    horizon = max(int(total_steps * fraction), 1)
    if step >= horizon:
        return end
    return start + (end - start) * (step / horizon)


@dataclass
class TrainResult:
    """A trained policy plus its per-episode learning curve."""

    algo: str
    policy: Callable[[Observation], Action]
    curve: list[float] = field(default_factory=list)
    seed: int = 0

    def write_curve(self, path: str | Path) -> None:
        """Write the learning curve as ``episode,mean_reward`` CSV."""
        with Path(path).open("w", newline="") as fh:
            fh.write(f"# farmgrid-curve algo={self.algo} seed={self.seed}\n")
            writer = csv.writer(fh)
            writer.writerow(["episode", "mean_reward"])
            for i, r in enumerate(self.curve, start=1):
                writer.writerow([i, repr(float(r))])


def episode_mean(agent_totals: Sequence[float]) -> float:
    return float(np.mean(agent_totals))
