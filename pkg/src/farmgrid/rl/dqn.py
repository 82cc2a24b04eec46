"""Deep Q-network: replay buffer, target network, epsilon-greedy learning.

Desk-scale defaults: the buffer, learning-start, and target-sync intervals
are scaled down from library defaults in proportion to the much shorter
training runs used here.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..env import Action, Observation, TradingEnv
from .common import TrainingDiverged, TrainResult, episode_mean, linear_epsilon, obs_features
from .nn import Adam, Mlp, clip_grad_norm

N_ACTIONS = len(Action)
OBS_DIM = 6


class ReplayBuffer:
    """Fixed-capacity ring buffer with uniform seeded sampling."""

    def __init__(self, capacity: int, obs_dim: int, rng: np.random.Generator):
        self.capacity = capacity
        self._rng = rng
        self._obs = np.zeros((capacity, obs_dim))
        self._next_obs = np.zeros((capacity, obs_dim))
        self._actions = np.zeros(capacity, dtype=np.int64)
        self._rewards = np.zeros(capacity)
        self._dones = np.zeros(capacity)
        self._pos = 0
        self._size = 0

    def __len__(self) -> int:
        return self._size

    def add(
        self,
        obs: np.ndarray,
        action: int,
        reward: float,
        next_obs: np.ndarray,
        done: bool,
    ) -> None:
        i = self._pos
        self._obs[i] = obs
        self._actions[i] = action
        self._rewards[i] = reward
        self._next_obs[i] = next_obs
        self._dones[i] = float(done)
        self._pos = (self._pos + 1) % self.capacity
        self._size = min(self._size + 1, self.capacity)

    def sample(self, batch_size: int):
        idx = self._rng.integers(self._size, size=batch_size)
        return (
            self._obs[idx],
            self._actions[idx],
            self._rewards[idx],
            self._next_obs[idx],
            self._dones[idx],
        )


@dataclass
class DqnConfig:
    learning_rate: float = 1e-4
    buffer_size: int = 10_000
    learning_starts: int = 1_000
    batch_size: int = 32
    tau: float = 1.0
    gamma: float = 0.99
    train_freq: int = 4
    gradient_steps: int = 1
    target_update_interval: int = 250
    exploration_fraction: float = 0.1
    exploration_initial_eps: float = 1.0
    exploration_final_eps: float = 0.05
    max_grad_norm: float = 10.0
    hidden: tuple[int, int] = (64, 64)


class DqnPolicy:
    """Greedy policy over the online Q-network."""

    def __init__(self, q_net: Mlp):
        self.q_net = q_net

    def __call__(self, obs: Observation) -> Action:
        q = self.q_net.forward(obs_features(obs))[0]
        return Action(int(np.argmax(q)))


def _sync_target(target: Mlp, online: Mlp, tau: float) -> None:
    # tau=1 is a hard copy; fractional tau blends (soft update)
    for t, o in zip(target.parameters(), online.parameters()):
        if tau >= 1.0:
            t[...] = o
        else:
            t *= 1.0 - tau
            t += tau * o


def train_dqn(
    env: TradingEnv,
    episodes: int,
    seed: int,
    config: Optional[DqnConfig] = None,
) -> TrainResult:
    """Train a shared DQN policy on every agent's experience.

    Raises :class:`TrainingDiverged` if the TD loss stops being finite.
    """
    config = config or DqnConfig()
    rng = np.random.default_rng(seed)
    q_net = Mlp([OBS_DIM, *config.hidden, N_ACTIONS], rng=rng)
    target_net = q_net.copy()
    optimizer = Adam(q_net.parameters(), lr=config.learning_rate)
    buffer = ReplayBuffer(config.buffer_size, OBS_DIM, rng)
    agents = env.scenario.agent_ids
    total_steps = episodes * env.horizon
    env_steps = 0
    grad_steps = 0
    curve: list[float] = []

    for _ in range(episodes):
        obs = env.reset()
        feats = {a: obs_features(obs[a]) for a in agents}
        totals = {a: 0.0 for a in agents}
        done = False
        while not done:
            eps = linear_epsilon(
                env_steps,
                total_steps,
                config.exploration_fraction,
                config.exploration_initial_eps,
                config.exploration_final_eps,
            )
            actions = {}
            for a in agents:
                if rng.random() < eps:
                    actions[a] = Action(int(rng.integers(N_ACTIONS)))
                else:
                    q = q_net.forward(feats[a])[0]
                    actions[a] = Action(int(np.argmax(q)))
            outcomes, next_obs, done = env.step(actions)
            for a in agents:
                nf = obs_features(next_obs[a])
                buffer.add(feats[a], int(actions[a]), outcomes[a].reward, nf, done)
                totals[a] += outcomes[a].reward
                feats[a] = nf
            env_steps += 1

            if env_steps >= config.learning_starts and env_steps % config.train_freq == 0:
                for _ in range(config.gradient_steps):
                    grad_steps += 1
                    b_obs, b_act, b_rew, b_next, b_done = buffer.sample(config.batch_size)
                    q_next = target_net.forward(b_next)
                    target = b_rew + config.gamma * (1.0 - b_done) * q_next.max(axis=1)
                    q_all, cache = q_net.forward_cached(b_obs)
                    rows = np.arange(len(b_act))
                    td_error = q_all[rows, b_act] - target
                    loss = float(np.mean(td_error**2))
                    if not np.isfinite(loss):
                        raise TrainingDiverged(
                            f"DQN loss became non-finite at env step {env_steps} "
                            f"(gradient step {grad_steps}, lr={config.learning_rate})"
                        )
                    grad_out = np.zeros_like(q_all)
                    grad_out[rows, b_act] = 2.0 * td_error / len(b_act)
                    grads = q_net.backward(cache, grad_out)
                    clip_grad_norm(grads, config.max_grad_norm)
                    optimizer.step(q_net.parameters(), grads)
                    if grad_steps % config.target_update_interval == 0:
                        _sync_target(target_net, q_net, config.tau)
        curve.append(episode_mean(list(totals.values())))

    return TrainResult(algo="dqn", policy=DqnPolicy(q_net), curve=curve, seed=seed)
