"""R2DSAC: diffusion policy + twin critics with double regularization.

Per episode the loop rolls slots with the denoising sampler, prunes the actor
pair, then runs minibatch updates: TD targets through the minimum of the
target critics with an entropy bonus, an action-entropy-regularized policy
term weighted by (severed, optionally batch-standardized) critic values, and
a denoising behavior-cloning term on replay actions.  Target networks track
online ones with soft updates.

The three ablation switches reproduce the BCDSAC / TDSAC / DSAC variants.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .diffusion import (
    DenoiserNet,
    DiffusionSchedule,
    build_schedule,
    forward_noise,
    log_prob_backward,
    log_prob_with_pack,
    reverse_sample,
)
from .mdp import ReplayBuffer, TransitionBatch, UavMecEnv
from .nncore.adam import AdamState, adam_step
from .nncore.net import DenseNet, soft_update
from .pruning import apply_mask


class ConfigError(ValueError):
    """Invalid learner configuration."""


@dataclass(frozen=True)
class LearnerConfig:
    discount: float = 0.95
    temperature: float = 0.05
    rho: float = 0.9  # weight on the action-entropy term; 1 - rho on cloning
    lr_actor: float = 3e-4
    lr_critic: float = 3e-4
    soft_update_rate: float = 0.005
    batch_size: int = 256
    buffer_capacity: int = 100_000
    episodes: int = 1000
    action_entropy_on: bool = True
    diffusion_reg_on: bool = True
    pruning_on: bool = True
    q_weight_normalize: bool = True
    prune_rate: float = 0.1
    prune_at_episode_start: bool = False
    diffusion_steps: int = 3
    psi_min: float = 0.1
    psi_max: float = 10.0
    hidden_sizes: tuple[int, ...] = (256, 256)
    time_embed_dim: int = 16
    hidden_activation: str = "mish"
    var_floor: float = 1e-2
    updates_per_episode: int = 1
    update_every_slot: bool = False
    act_weight: float | None = None  # overrides rho when set
    diff_weight: float | None = None  # overrides 1 - rho when set
    eval_episodes: int = 1

    def __post_init__(self) -> None:
        if not 0.0 <= self.discount <= 1.0:
            raise ConfigError("discount must lie in [0, 1]")
        if self.temperature < 0.0:
            raise ConfigError("temperature must be >= 0")
        if not 0.0 <= self.rho <= 1.0:
            raise ConfigError("rho must lie in [0, 1]")
        if not 0.0 < self.soft_update_rate <= 1.0:
            raise ConfigError("soft_update_rate must lie in (0, 1]")
        for name in ("lr_actor", "lr_critic"):
            if not 0.0 < getattr(self, name) <= 1.0:
                raise ConfigError(f"{name} must lie in (0, 1]")
        if self.batch_size < 1 or self.buffer_capacity < 1:
            raise ConfigError("batch_size and buffer_capacity must be >= 1")
        if self.episodes < 0:
            raise ConfigError("episodes must be >= 0")
        if not 0.0 <= self.prune_rate < 1.0:
            raise ConfigError("prune_rate must lie in [0, 1)")
        if self.updates_per_episode < 0:
            raise ConfigError("updates_per_episode must be >= 0")
        if self.eval_episodes < 1:
            raise ConfigError("eval_episodes must be >= 1")

    @property
    def effective_act_weight(self) -> float:
        return self.rho if self.act_weight is None else self.act_weight

    @property
    def effective_diff_weight(self) -> float:
        return 1.0 - self.rho if self.diff_weight is None else self.diff_weight

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "LearnerConfig":
        data = json.loads(text)
        if not isinstance(data, dict):
            raise ConfigError("learner config must be a JSON object")
        known = {f for f in cls.__dataclass_fields__}  # noqa: C416
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
        if "hidden_sizes" in data:
            data["hidden_sizes"] = tuple(data["hidden_sizes"])
        try:
            return cls(**data)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc


# flag combinations of the published ablation variants
ABLATION_FLAGS: dict[str, dict[str, bool]] = {
    "r2dsac": dict(action_entropy_on=True, diffusion_reg_on=True, pruning_on=True),
    "bcdsac": dict(action_entropy_on=True, diffusion_reg_on=True, pruning_on=False),
    "tdsac": dict(action_entropy_on=False, diffusion_reg_on=False, pruning_on=True),
    "dsac": dict(action_entropy_on=False, diffusion_reg_on=False, pruning_on=False),
}


def derive_seed(*parts: int) -> int:
    """Stable child seed from integer tags."""
    return int(np.random.SeedSequence(list(parts)).generate_state(1)[0])


class CriticPair:
    """Twin Q-networks with matching targets; inputs are concat(state, action)."""

    def __init__(self, q1: DenseNet, q2: DenseNet, t1: DenseNet, t2: DenseNet):
        self.q1, self.q2, self.t1, self.t2 = q1, q2, t1, t2

    @classmethod
    def build(
        cls,
        state_dim: int,
        action_dim: int,
        hidden_sizes: tuple[int, ...],
        rng: np.random.Generator,
        hidden_activation: str = "mish",
    ) -> "CriticPair":
        sizes = [state_dim + action_dim, *hidden_sizes, 1]
        q1 = DenseNet.build(sizes, rng, hidden_activation=hidden_activation)
        q2 = DenseNet.build(sizes, rng, hidden_activation=hidden_activation)
        return cls(q1, q2, q1.copy(), q2.copy())

    def min_online(self, x: np.ndarray) -> np.ndarray:
        return np.minimum(self.q1(x)[..., 0], self.q2(x)[..., 0])

    def min_target(self, x: np.ndarray) -> np.ndarray:
        return np.minimum(self.t1(x)[..., 0], self.t2(x)[..., 0])


def td_targets(
    batch: TransitionBatch,
    critics: CriticPair,
    target_actor: DenoiserNet,
    schedule: DiffusionSchedule,
    gamma: float,
    beta: float,
    rng: np.random.Generator,
    var_floor: float = 1e-2,
) -> np.ndarray:
    """Per-sample TD targets; no gradients flow out of here.

    The next action is sampled once per sample from the target diffusion
    policy, scored by the minimum target critic, and entropy-corrected with
    the approximate log-density under the same target policy.
    """
    if batch.states.shape[0] == 0:
        raise ValueError("batch must be nonempty")
    next_actions = reverse_sample(batch.next_states, target_actor, schedule, rng)
    x2 = np.concatenate([batch.next_states, next_actions], axis=1)
    q_next = critics.min_target(x2)
    # mean (zero-noise) one-step noising keeps the entropy bonus low-variance
    logp = log_prob_with_pack(
        next_actions,
        batch.next_states,
        target_actor,
        schedule,
        np.zeros_like(next_actions),
        var_floor,
    )[0]
    return batch.rewards + gamma * (1.0 - batch.dones) * (q_next - beta * logp)


def critic_update(
    batch: TransitionBatch,
    critics: CriticPair,
    targets: np.ndarray,
    adam_q1: AdamState,
    adam_q2: AdamState,
) -> float:
    """One MSE Adam step on each critic; returns the summed loss."""
    x = np.concatenate([batch.states, batch.actions], axis=1)
    n = x.shape[0]
    total = 0.0
    for net, adam in ((critics.q1, adam_q1), (critics.q2, adam_q2)):
        q, cache = net.forward(x)
        err = q[:, 0] - targets
        total += float(np.mean(err**2))
        grads, _ = net.backward(cache, (2.0 * err / n)[:, None])
        adam_step(adam, net, grads)
    return total


def _zero_grads(net: DenseNet) -> list[list[np.ndarray]]:
    return [[np.zeros_like(l.weight), np.zeros_like(l.bias)] for l in net.layers]


def _diffusion_loss_terms(
    batch: TransitionBatch,
    actor: DenoiserNet,
    schedule: DiffusionSchedule,
    rng: np.random.Generator,
) -> tuple[float, list[tuple[np.ndarray, np.ndarray]]]:
    """Denoising MSE on replay actions (the behavior-cloning surrogate)."""
    n = batch.states.shape[0]
    t_draws = rng.integers(1, schedule.steps + 1, size=n)
    noise = rng.standard_normal(batch.actions.shape)
    loss = 0.0
    grads = _zero_grads(actor.net)
    for t in range(1, schedule.steps + 1):
        rows = np.nonzero(t_draws == t)[0]
        if rows.size == 0:
            continue
        noisy = forward_noise(batch.actions[rows], t, schedule, noise[rows])
        pred, cache = actor.predict(noisy, batch.states[rows], t)
        resid = pred - noise[rows]
        loss += float(np.sum(resid**2))
        for g, (dw, db) in zip(grads, actor.backward(cache, 2.0 * resid / n)):
            g[0] += dw
            g[1] += db
    return loss / n, grads


def _action_entropy_terms(
    batch: TransitionBatch,
    actor: DenoiserNet,
    critics: CriticPair,
    schedule: DiffusionSchedule,
    cfg: LearnerConfig,
    rng: np.random.Generator,
) -> tuple[float, list[tuple[np.ndarray, np.ndarray]]]:
    """Entropy-regularized, Q-weighted log-density term on fresh policy actions."""
    n = batch.states.shape[0]
    actions = reverse_sample(batch.states, actor, schedule, rng)
    x = np.concatenate([batch.states, actions], axis=1)
    weights = critics.min_online(x)  # gradient severed: plain values
    if cfg.q_weight_normalize:
        weights = (weights - weights.mean()) / (weights.std() + 1e-8)
    logp, pack = log_prob_with_pack(
        actions,
        batch.states,
        actor,
        schedule,
        np.zeros_like(actions),
        cfg.var_floor,
    )
    # -mean[beta * H + w * logp] with H = -mean(logp) collapses to this
    coeff = cfg.temperature - weights
    loss = float(np.mean(coeff * logp))
    grads = log_prob_backward(pack, coeff / n, actor)
    return loss, grads


def policy_loss(
    batch: TransitionBatch,
    actor: DenoiserNet,
    critics: CriticPair,
    schedule: DiffusionSchedule,
    cfg: LearnerConfig,
    rng: np.random.Generator,
) -> tuple[float, float, float]:
    """(total, action-entropy, diffusion) losses under the ablation flags."""
    total, l_act, l_diff, _ = _policy_terms(batch, actor, critics, schedule, cfg, rng)
    return total, l_act, l_diff


def _policy_terms(
    batch: TransitionBatch,
    actor: DenoiserNet,
    critics: CriticPair,
    schedule: DiffusionSchedule,
    cfg: LearnerConfig,
    rng: np.random.Generator,
) -> tuple[float, float, float, list[tuple[np.ndarray, np.ndarray]] | None]:
    if batch.states.shape[0] == 0:
        raise ValueError("batch must be nonempty")
    if not cfg.action_entropy_on and not cfg.diffusion_reg_on:
        return 0.0, 0.0, 0.0, None
    l_act, l_diff = 0.0, 0.0
    combined = _zero_grads(actor.net)
    if cfg.action_entropy_on:
        l_act, g_act = _action_entropy_terms(batch, actor, critics, schedule, cfg, rng)
        for c, (dw, db) in zip(combined, g_act):
            c[0] += cfg.effective_act_weight * dw
            c[1] += cfg.effective_act_weight * db
    if cfg.diffusion_reg_on:
        l_diff, g_diff = _diffusion_loss_terms(batch, actor, schedule, rng)
        for c, (dw, db) in zip(combined, g_diff):
            c[0] += cfg.effective_diff_weight * dw
            c[1] += cfg.effective_diff_weight * db
    total = cfg.effective_act_weight * l_act + cfg.effective_diff_weight * l_diff
    return total, l_act, l_diff, combined


class R2dsacAgent:
    """Actor/critic bundle with its own deterministic random streams."""

    def __init__(self, state_dim: int, action_dim: int, cfg: LearnerConfig, seed: int):
        self.cfg = cfg
        self.state_dim = state_dim
        self.action_dim = action_dim
        self.schedule = build_schedule(cfg.diffusion_steps, cfg.psi_min, cfg.psi_max)
        init_rng = np.random.default_rng(derive_seed(seed, 1))
        self.actor = DenoiserNet.build(
            state_dim,
            action_dim,
            cfg.hidden_sizes,
            cfg.time_embed_dim,
            init_rng,
            cfg.hidden_activation,
        )
        self.target_actor = DenoiserNet(
            self.actor.net.copy(), state_dim, action_dim, cfg.time_embed_dim
        )
        self.critics = CriticPair.build(
            state_dim, action_dim, cfg.hidden_sizes, init_rng, cfg.hidden_activation
        )
        self.adam_actor = AdamState.for_net(self.actor.net, cfg.lr_actor)
        self.adam_q1 = AdamState.for_net(self.critics.q1, cfg.lr_critic)
        self.adam_q2 = AdamState.for_net(self.critics.q2, cfg.lr_critic)
        self._act_rng = np.random.default_rng(derive_seed(seed, 2))
        self._update_rng = np.random.default_rng(derive_seed(seed, 3))

    def act(self, state_norm: np.ndarray, rng: np.random.Generator | None = None) -> np.ndarray:
        return reverse_sample(
            state_norm, self.actor, self.schedule, rng if rng is not None else self._act_rng
        )

    def update(self, buffer: ReplayBuffer) -> dict[str, float]:
        cfg = self.cfg
        batch = buffer.sample(cfg.batch_size)
        targets = td_targets(
            batch,
            self.critics,
            self.target_actor,
            self.schedule,
            cfg.discount,
            cfg.temperature,
            self._update_rng,
            cfg.var_floor,
        )
        critic_loss = critic_update(
            batch, self.critics, targets, self.adam_q1, self.adam_q2
        )
        total, l_act, l_diff, grads = _policy_terms(
            batch, self.actor, self.critics, self.schedule, cfg, self._update_rng
        )
        if grads is not None:
            adam_step(self.adam_actor, self.actor.net, grads)
        return {
            "critic_loss": critic_loss,
            "actor_loss": l_act,
            "diffusion_loss": l_diff,
            "policy_loss": total,
        }

    def prune(self, episode: int) -> tuple[int, ...]:
        mask = apply_mask(self.actor.net, self.cfg.prune_rate, episode)
        apply_mask(self.target_actor.net, self.cfg.prune_rate, episode)
        return mask.masked_counts()

    def soft_updates(self) -> None:
        rate = self.cfg.soft_update_rate
        soft_update(self.target_actor.net, self.actor.net, rate)
        soft_update(self.critics.t1, self.critics.q1, rate)
        soft_update(self.critics.t2, self.critics.q2, rate)

    @property
    def uses_pruning(self) -> bool:
        return self.cfg.pruning_on

    @property
    def uses_updates(self) -> bool:
        return True


def evaluate(
    env: UavMecEnv, agent, cfg: LearnerConfig, seed: int, episode: int
) -> tuple[float, float, float]:
    """Deterministic eval rollouts; returns (return, carbon kg, penalty) means."""
    eval_env = UavMecEnv(env.scenario, env.penalties)
    returns, carbons, penalties = [], [], []
    for j in range(cfg.eval_episodes):
        rng = np.random.default_rng(derive_seed(seed, 23, episode, j))
        state = eval_env.reset(derive_seed(seed, 29, episode, j))
        total, carbon_kg, penalty = 0.0, 0.0, 0.0
        done = False
        while not done:
            action = agent.act(state.normalized, rng)
            state, reward, done, report, violations = eval_env.step(action)
            total += reward
            carbon_kg += report.carbon_kg
            penalty += env.penalties.reward_scale * violations.weighted(env.penalties)
        returns.append(total)
        carbons.append(carbon_kg)
        penalties.append(penalty)
    n = float(cfg.eval_episodes)
    return sum(returns) / n, sum(carbons) / n, sum(penalties) / n


@dataclass
class TrainResult:
    agent: object
    metrics: list[dict] = field(default_factory=list)


def train(
    env: UavMecEnv, cfg: LearnerConfig, seed: int, agent=None
) -> TrainResult:
    """Run the full episode loop; returns the trained agent and metric rows.

    Pruning follows the published loop ordering by default (after the slot
    loop, before parameter updates); ``prune_at_episode_start`` flips it to
    the variant described in the method text.
    """
    if agent is None:
        agent = R2dsacAgent(env.state_dim, env.action_dim, cfg, seed)
    buffer = ReplayBuffer(
        cfg.buffer_capacity, env.state_dim, env.action_dim, seed=derive_seed(seed, 31)
    )
    metrics: list[dict] = []
    for episode in range(1, cfg.episodes + 1):
        masked: tuple[int, ...] = ()
        if agent.uses_pruning and cfg.prune_at_episode_start:
            masked = agent.prune(episode)
        state = env.reset(derive_seed(seed, 37, episode))
        done = False
        losses: dict[str, float] = {}
        while not done:
            action = agent.act(state.normalized)
            next_state, reward, done, _, _ = env.step(action)
            buffer.push(state.normalized, action, reward, next_state.normalized, done)
            state = next_state
            if (
                cfg.update_every_slot
                and agent.uses_updates
                and len(buffer) >= cfg.batch_size
            ):
                losses = agent.update(buffer)
        if agent.uses_pruning and not cfg.prune_at_episode_start:
            masked = agent.prune(episode)
        if not cfg.update_every_slot and agent.uses_updates:
            for _ in range(cfg.updates_per_episode):
                if len(buffer) >= cfg.batch_size:
                    losses = agent.update(buffer)
        agent.soft_updates()
        test_reward, carbon_kg, penalty = evaluate(env, agent, cfg, seed, episode)
        metrics.append(
            {
                "episode": episode,
                "test_reward": test_reward,
                "carbon_kg": carbon_kg,
                "penalty": penalty,
                "critic_loss": losses.get("critic_loss", 0.0),
                "actor_loss": losses.get("actor_loss", 0.0),
                "diffusion_loss": losses.get("diffusion_loss", 0.0),
                "masked_neurons": ";".join(str(c) for c in masked),
            }
        )
    return TrainResult(agent=agent, metrics=metrics)


def make_agent(algo: str, state_dim: int, action_dim: int, cfg: LearnerConfig, seed: int):
    """Factory over the ablation variants and the two baselines."""
    from . import baselines  # local import: baselines builds on this module

    algo = algo.lower()
    if algo in ABLATION_FLAGS:
        variant = replace(cfg, **ABLATION_FLAGS[algo])
        return R2dsacAgent(state_dim, action_dim, variant, seed), variant
    if algo == "sac":
        return baselines.GaussianSacAgent(state_dim, action_dim, cfg, seed), cfg
    if algo == "random":
        return baselines.RandomAgent(action_dim, seed), cfg
    raise ConfigError(f"unknown algorithm {algo!r}")
