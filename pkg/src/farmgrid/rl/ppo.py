"""Proximal policy optimization: actor-critic MLPs, GAE, clipped surrogate.

On-policy: rollouts of complete episodes are collected until the step
budget fills, advantages are estimated with GAE, and the policy is updated
for several epochs of clipped-surrogate minibatch steps.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..env import Action, Observation, TradingEnv
from .common import TrainingDiverged, TrainResult, episode_mean, obs_features
from .nn import Adam, Mlp, clip_grad_norm, log_softmax, softmax

N_ACTIONS = len(Action)
OBS_DIM = 6


@dataclass
class PpoConfig:
    learning_rate: float = 3e-4
    n_steps: int = 2048
    batch_size: int = 64
    n_epochs: int = 10
    gamma: float = 0.99
    gae_lambda: float = 0.95
    clip_range: float = 0.2
    normalize_advantage: bool = True
    ent_coef: float = 0.0
    vf_coef: float = 0.5
    max_grad_norm: float = 0.5
    hidden: tuple[int, int] = (64, 64)


def clipped_surrogate(
    ratio: np.ndarray, advantage: np.ndarray, clip_range: float
) -> np.ndarray:
    """Per-sample clipped surrogate: min(r*A, clip(r, 1-eps, 1+eps)*A)."""
    unclipped = ratio * advantage
    clipped = np.clip(ratio, 1.0 - clip_range, 1.0 + clip_range) * advantage
    return np.minimum(unclipped, clipped)


def compute_gae(
    rewards: np.ndarray,
    values: np.ndarray,
    dones: np.ndarray,
    last_value: float,
    gamma: float,
    lam: float,
) -> tuple[np.ndarray, np.ndarray]:
    """Generalized advantage estimates and returns for one trajectory.

    ``dones[t]`` marks a terminal transition (no bootstrapping past it);
    ``last_value`` bootstraps a truncated final segment.
    """
    n = len(rewards)
    advantages = np.zeros(n)
    gae = 0.0
    for t in range(n - 1, -1, -1):
        next_value = last_value if t == n - 1 else values[t + 1]
        not_done = 1.0 - dones[t]
        delta = rewards[t] + gamma * next_value * not_done - values[t]
        gae = delta + gamma * lam * not_done * gae
        advantages[t] = gae
    return advantages, advantages + values


class PpoPolicy:
    """Stochastic policy over actor logits; deterministic mode takes the mode."""

    def __init__(self, actor: Mlp, critic: Mlp, deterministic: bool = True, seed: int = 0):
        self.actor = actor
        self.critic = critic
        self.deterministic = deterministic
        self._rng = np.random.default_rng(seed)

    def action_probabilities(self, obs: Observation) -> np.ndarray:
        return softmax(self.actor.forward(obs_features(obs)))[0]

    def __call__(self, obs: Observation) -> Action:
        probs = self.action_probabilities(obs)
        if self.deterministic:
            return Action(int(np.argmax(probs)))
        return Action(int(self._rng.choice(N_ACTIONS, p=probs)))


class _Rollout:
    def __init__(self) -> None:
        self.feats: list[np.ndarray] = []
        self.actions: list[int] = []
        self.logps: list[float] = []
        self.advantages: list[float] = []
        self.returns: list[float] = []

    def __len__(self) -> int:
        return len(self.actions)

    def extend(self, feats, actions, logps, advantages, returns) -> None:
        self.feats += list(feats)
        self.actions += list(actions)
        self.logps += list(logps)
        self.advantages += list(advantages)
        self.returns += list(returns)

    def arrays(self):
        return (
            np.asarray(self.feats),
            np.asarray(self.actions, dtype=np.int64),
            np.asarray(self.logps),
            np.asarray(self.advantages),
            np.asarray(self.returns),
        )


def _update(
    actor: Mlp,
    critic: Mlp,
    opt_actor: Adam,
    opt_critic: Adam,
    rollout: _Rollout,
    config: PpoConfig,
    rng: np.random.Generator,
) -> None:
    feats, actions, logp_old, advantages, returns = rollout.arrays()
    n = len(actions)
    eps = config.clip_range
    for _ in range(config.n_epochs):
        order = rng.permutation(n)
        for start in range(0, n, config.batch_size):
            idx = order[start : start + config.batch_size]
            if len(idx) == 0:
                continue
            b_feats = feats[idx]
            b_act = actions[idx]
            b_adv = advantages[idx]
            b_ret = returns[idx]
            b_logp_old = logp_old[idx]
            if config.normalize_advantage and len(idx) > 1:
                b_adv = (b_adv - b_adv.mean()) / (b_adv.std() + 1e-8)

            logits, cache_a = actor.forward_cached(b_feats)
            logp_all = log_softmax(logits)
            probs = np.exp(logp_all)
            rows = np.arange(len(b_act))
            logp = logp_all[rows, b_act]
            ratio = np.exp(logp - b_logp_old)
            unclipped = ratio * b_adv
            clipped = np.clip(ratio, 1.0 - eps, 1.0 + eps) * b_adv
            policy_loss = -float(np.mean(clipped_surrogate(ratio, b_adv, eps)))

            values, cache_c = critic.forward_cached(b_feats)
            values = values[:, 0]
            value_loss = float(np.mean((values - b_ret) ** 2))

            entropy = -np.sum(probs * logp_all, axis=1)
            loss = (
                policy_loss
                + config.vf_coef * value_loss
                - config.ent_coef * float(np.mean(entropy))
            )
            if not np.isfinite(loss):
                raise TrainingDiverged(
                    f"PPO loss became non-finite (policy={policy_loss}, value={value_loss})"
                )

            # d(-min)/d(ratio): the unclipped branch when it is the minimum,
            # otherwise the clip derivative (zero outside the band)
            take_unclipped = unclipped <= clipped
            in_band = (ratio > 1.0 - eps) & (ratio < 1.0 + eps)
            dloss_dratio = np.where(
                take_unclipped, -b_adv, np.where(in_band, -b_adv, 0.0)
            ) / len(b_act)
            dloss_dlogp = dloss_dratio * ratio
            grad_logits = dloss_dlogp[:, None] * (
                np.eye(N_ACTIONS)[b_act] - probs
            )
            if config.ent_coef != 0.0:
                dentropy_dlogits = -probs * (logp_all + entropy[:, None])
                grad_logits -= config.ent_coef * dentropy_dlogits / len(b_act)
            grads_a = actor.backward(cache_a, grad_logits)

            grad_values = config.vf_coef * 2.0 * (values - b_ret) / len(b_act)
            grads_c = critic.backward(cache_c, grad_values[:, None])

            clip_grad_norm(grads_a + grads_c, config.max_grad_norm)
            opt_actor.step(actor.parameters(), grads_a)
            opt_critic.step(critic.parameters(), grads_c)


def train_ppo(
    env: TradingEnv,
    episodes: int,
    seed: int,
    config: Optional[PpoConfig] = None,
) -> TrainResult:
    """Train a shared PPO policy on every agent's experience."""
    config = config or PpoConfig()
    rng = np.random.default_rng(seed)
    actor = Mlp([OBS_DIM, *config.hidden, N_ACTIONS], rng=rng)
    critic = Mlp([OBS_DIM, *config.hidden, 1], rng=rng)
    opt_actor = Adam(actor.parameters(), lr=config.learning_rate)
    opt_critic = Adam(critic.parameters(), lr=config.learning_rate)
    agents = env.scenario.agent_ids
    rollout = _Rollout()
    budget = config.n_steps * len(agents)
    curve: list[float] = []

    for _ in range(episodes):
        obs = env.reset()
        ep_feats = {a: [] for a in agents}
        ep_actions = {a: [] for a in agents}
        ep_logps = {a: [] for a in agents}
        ep_rewards = {a: [] for a in agents}
        ep_values = {a: [] for a in agents}
        done = False
        while not done:
            stacked = np.stack([obs_features(obs[a]) for a in agents])
            logits = actor.forward(stacked)
            logp_all = log_softmax(logits)
            probs = np.exp(logp_all)
            values = critic.forward(stacked)[:, 0]
            actions = {}
            for k, a in enumerate(agents):
                act = int(rng.choice(N_ACTIONS, p=probs[k]))
                actions[a] = Action(act)
                ep_feats[a].append(stacked[k])
                ep_actions[a].append(act)
                ep_logps[a].append(float(logp_all[k, act]))
                ep_values[a].append(float(values[k]))
            outcomes, obs, done = env.step(actions)
            for a in agents:
                ep_rewards[a].append(float(outcomes[a].reward))

        totals = []
        for a in agents:
            rewards = np.asarray(ep_rewards[a])
            values = np.asarray(ep_values[a])
            dones = np.zeros(len(rewards))
            dones[-1] = 1.0  # episodes end at the horizon
            adv, ret = compute_gae(
                rewards, values, dones, 0.0, config.gamma, config.gae_lambda
            )
            rollout.extend(ep_feats[a], ep_actions[a], ep_logps[a], adv, ret)
            totals.append(float(rewards.sum()))
        curve.append(episode_mean(totals))

        if len(rollout) >= budget:
            _update(actor, critic, opt_actor, opt_critic, rollout, config, rng)
            rollout = _Rollout()

    policy = PpoPolicy(actor, critic, deterministic=True, seed=seed)
    return TrainResult(algo="ppo", policy=policy, curve=curve, seed=seed)
