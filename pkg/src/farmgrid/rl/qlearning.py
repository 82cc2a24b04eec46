"""Tabular Q-learning over a discretized observation space.

States bucket load and generation into log-spaced bins, SoC into deciles,
and keep the hour's tariff tag as-is; missing table entries read as zero.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..env import Action, Observation, TradingEnv
from ..pricing import GridTag, TariffSchedule, grid_tag
from .common import TrainResult, episode_mean, linear_epsilon

N_ACTIONS = len(Action)

# Log-spaced kWh bucket edges for load and generation (8 buckets).
DEFAULT_KWH_EDGES = tuple(float(x) for x in np.geomspace(0.25, 32.0, num=7))

_TAG_INDEX = {GridTag.NIGHT: 0, GridTag.DAY: 1, GridTag.NEAR_PEAK: 2, GridTag.PEAK: 3}

StateKey = tuple[int, int, int, int]


def discretize(
    obs: Observation,
    tag: GridTag,
    edges: tuple[float, ...] = DEFAULT_KWH_EDGES,
) -> StateKey:
    """Bucket an observation into (load, generation, SoC decile, tag)."""
    load_b = int(np.searchsorted(edges, obs.load_kwh, side="right"))
    gen_b = int(np.searchsorted(edges, obs.generation_kwh, side="right"))
    soc_b = min(int(obs.soc_pct // 10), 9)
    return (load_b, gen_b, soc_b, _TAG_INDEX[tag])


class QTable:
    """Sparse action-value table; absent states read as zeros."""

    def __init__(self) -> None:
        self._table: dict[StateKey, np.ndarray] = {}

    def values(self, state: StateKey) -> np.ndarray:
        row = self._table.get(state)
        if row is None:
            row = np.zeros(N_ACTIONS)
            self._table[state] = row
        return row

    def best_action(self, state: StateKey) -> int:
        return int(np.argmax(self.values(state)))

    def max_value(self, state: StateKey) -> float:
        return float(np.max(self.values(state)))

    def __len__(self) -> int:
        return len(self._table)

    def items(self):
        return self._table.items()


def q_update(
    table: QTable,
    state: StateKey,
    action: int,
    reward: float,
    next_state: StateKey,
    alpha: float,
    gamma: float,
) -> QTable:
    """Single Bellman update: blend the old value with the bootstrapped target."""
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must be in [0, 1], got {alpha}")
    if not 0.0 <= gamma < 1.0:
        raise ValueError(f"gamma must be in [0, 1), got {gamma}")
    row = table.values(state)
    target = reward + gamma * table.max_value(next_state)
    row[action] = (1.0 - alpha) * row[action] + alpha * target
    return table


@dataclass
class QLearningConfig:
    # tabular default: a shorter credit horizon keeps the unit reward
    # visible over bootstrap noise in the bucketed table
    alpha: float = 0.2
    gamma: float = 0.9
    exploration_fraction: float = 0.5
    exploration_initial_eps: float = 1.0
    exploration_final_eps: float = 0.05
    kwh_edges: tuple[float, ...] = field(default=DEFAULT_KWH_EDGES)


class QTablePolicy:
    """Greedy policy over a learned table.

    Needs the tariff schedule and priming flag it was trained with so the
    state discretization sees the same hour tags.
    """

    def __init__(
        self,
        table: QTable,
        config: QLearningConfig,
        schedule: TariffSchedule,
        priming_on: bool = True,
    ):
        self.table = table
        self.config = config
        self._schedule = schedule
        self._priming = priming_on

    def state_of(self, obs: Observation) -> StateKey:
        tag = grid_tag(obs.hour, self._schedule, self._priming)
        return discretize(obs, tag, self.config.kwh_edges)

    def __call__(self, obs: Observation) -> Action:
        return Action(self.table.best_action(self.state_of(obs)))


def train_qtable(
    env: TradingEnv,
    episodes: int,
    seed: int,
    config: Optional[QLearningConfig] = None,
) -> TrainResult:
    """Train a shared tabular policy on every agent's experience."""
    config = config or QLearningConfig()
    rng = np.random.default_rng(seed)
    table = QTable()
    agents = env.scenario.agent_ids
    total_steps = episodes * env.horizon
    step = 0
    curve: list[float] = []

    def key(obs: Observation) -> StateKey:
        tag = grid_tag(obs.hour, env.schedule, env.priming_on)
        return discretize(obs, tag, config.kwh_edges)

    for _ in range(episodes):
        obs = env.reset()
        totals = {a: 0.0 for a in agents}
        done = False
        while not done:
            eps = linear_epsilon(
                step,
                total_steps,
                config.exploration_fraction,
                config.exploration_initial_eps,
                config.exploration_final_eps,
            )
            states = {a: key(obs[a]) for a in agents}
            actions = {}
            for a in agents:
                if rng.random() < eps:
                    actions[a] = Action(int(rng.integers(N_ACTIONS)))
                else:
                    actions[a] = Action(table.best_action(states[a]))
            outcomes, next_obs, done = env.step(actions)
            for a in agents:
                q_update(
                    table,
                    states[a],
                    int(actions[a]),
                    outcomes[a].reward,
                    key(next_obs[a]),
                    config.alpha,
                    config.gamma,
                )
                totals[a] += outcomes[a].reward
            obs = next_obs
            step += 1
        curve.append(episode_mean(list(totals.values())))

    policy = QTablePolicy(table, config, env.schedule, env.priming_on)
    return TrainResult(algo="qtable", policy=policy, curve=curve, seed=seed)
