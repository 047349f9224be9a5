"""Comparison policies: tanh-Gaussian SAC and a uniform-random actor.

Both plug into the same training loop as the diffusion agent.  The SAC actor
is the standard reparameterized tanh-Gaussian with a fixed temperature (no
automatic tuning) and shares the twin-critic machinery.
"""

from __future__ import annotations

import numpy as np

from .learner import (
    CriticPair,
    LearnerConfig,
    critic_update,
    derive_seed,
)
from .mdp import ReplayBuffer
from .nncore.adam import AdamState, adam_step
from .nncore.net import DenseNet, soft_update

_LOG_STD_MIN = -20.0
_LOG_STD_MAX = 2.0
_TANH_EPS = 1e-6


class RandomAgent:
    """Uniform actions in [-1, 1]^dim; never updates."""

    def __init__(self, action_dim: int, seed: int):
        self.action_dim = action_dim
        self._act_rng = np.random.default_rng(derive_seed(seed, 2))

    def act(self, state_norm: np.ndarray, rng: np.random.Generator | None = None) -> np.ndarray:
        gen = rng if rng is not None else self._act_rng
        return gen.uniform(-1.0, 1.0, size=self.action_dim)

    def update(self, buffer: ReplayBuffer) -> dict[str, float]:  # pragma: no cover
        return {}

    def prune(self, episode: int) -> tuple[int, ...]:  # pragma: no cover
        return ()

    def soft_updates(self) -> None:
        pass

    uses_pruning = False
    uses_updates = False


def _squash(mu: np.ndarray, log_std: np.ndarray, z: np.ndarray):
    """Reparameterized tanh-Gaussian sample with its log-density."""
    std = np.exp(log_std)
    u = mu + std * z
    a = np.tanh(u)
    logp = np.sum(
        -0.5 * z**2
        - 0.5 * np.log(2.0 * np.pi)
        - log_std
        - np.log(1.0 - a**2 + _TANH_EPS),
        axis=-1,
    )
    return a, u, logp


class GaussianSacAgent:
    """Soft actor-critic with a tanh-Gaussian policy head."""

    def __init__(self, state_dim: int, action_dim: int, cfg: LearnerConfig, seed: int):
        self.cfg = cfg
        self.state_dim = state_dim
        self.action_dim = action_dim
        init_rng = np.random.default_rng(derive_seed(seed, 1))
        self.policy = DenseNet.build(
            [state_dim, *cfg.hidden_sizes, 2 * action_dim],
            init_rng,
            hidden_activation=cfg.hidden_activation,
        )
        self.critics = CriticPair.build(
            state_dim, action_dim, cfg.hidden_sizes, init_rng, cfg.hidden_activation
        )
        self.adam_policy = AdamState.for_net(self.policy, cfg.lr_actor)
        self.adam_q1 = AdamState.for_net(self.critics.q1, cfg.lr_critic)
        self.adam_q2 = AdamState.for_net(self.critics.q2, cfg.lr_critic)
        self._act_rng = np.random.default_rng(derive_seed(seed, 2))
        self._update_rng = np.random.default_rng(derive_seed(seed, 3))

    def _head(self, out: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        mu = out[..., : self.action_dim]
        log_std = np.clip(out[..., self.action_dim :], _LOG_STD_MIN, _LOG_STD_MAX)
        return mu, log_std

    def act(self, state_norm: np.ndarray, rng: np.random.Generator | None = None) -> np.ndarray:
        gen = rng if rng is not None else self._act_rng
        mu, log_std = self._head(self.policy(state_norm))
        a, _, _ = _squash(mu, log_std, gen.standard_normal(mu.shape))
        return a

    def update(self, buffer: ReplayBuffer) -> dict[str, float]:
        cfg = self.cfg
        rng = self._update_rng
        batch = buffer.sample(cfg.batch_size)
        n = batch.states.shape[0]

        # critic targets from the current policy at the next states
        mu2, log_std2 = self._head(self.policy(batch.next_states))
        a2, _, logp2 = _squash(mu2, log_std2, rng.standard_normal(mu2.shape))
        x2 = np.concatenate([batch.next_states, a2], axis=1)
        targets = batch.rewards + cfg.discount * (1.0 - batch.dones) * (
            self.critics.min_target(x2) - cfg.temperature * logp2
        )
        critic_loss = critic_update(
            batch, self.critics, targets, self.adam_q1, self.adam_q2
        )

        # actor: minimize mean(beta * logp - min Q(s, a)) via the reparam path
        out, cache = self.policy.forward(batch.states)
        mu, log_std = self._head(out)
        z = rng.standard_normal(mu.shape)
        a, u, logp = _squash(mu, log_std, z)
        x = np.concatenate([batch.states, a], axis=1)
        q1, c1 = self.critics.q1.forward(x)
        q2, c2 = self.critics.q2.forward(x)
        q1, q2 = q1[:, 0], q2[:, 0]
        actor_loss = float(np.mean(cfg.temperature * logp - np.minimum(q1, q2)))

        pick1 = (q1 <= q2).astype(float)
        _, dx1 = self.critics.q1.backward(c1, (-pick1 / n)[:, None])
        _, dx2 = self.critics.q2.backward(c2, (-(1.0 - pick1) / n)[:, None])
        da = (dx1 + dx2)[:, self.state_dim :]

        tanh_u = np.tanh(u)
        sech2 = 1.0 - tanh_u**2
        # d logp / du through the tanh correction term
        dlogp_du = 2.0 * tanh_u * sech2 / (sech2 + _TANH_EPS)
        du = (cfg.temperature / n) * dlogp_du + da * sech2
        dmu = du
        dlog_std = du * np.exp(log_std) * z - cfg.temperature / n
        # clipped log-std entries are constants
        raw_log_std = out[..., self.action_dim :]
        active = (raw_log_std > _LOG_STD_MIN) & (raw_log_std < _LOG_STD_MAX)
        dlog_std = dlog_std * active
        grads, _ = self.policy.backward(
            cache, np.concatenate([dmu, dlog_std], axis=1)
        )
        adam_step(self.adam_policy, self.policy, grads)
        return {"critic_loss": critic_loss, "actor_loss": actor_loss}

    def prune(self, episode: int) -> tuple[int, ...]:  # pragma: no cover
        return ()

    def soft_updates(self) -> None:
        rate = self.cfg.soft_update_rate
        soft_update(self.critics.t1, self.critics.q1, rate)
        soft_update(self.critics.t2, self.critics.q2, rate)

    uses_pruning = False
    uses_updates = True
