"""Diffusion policy: variance schedule, noising, denoising sampler, log-density.

Actions live in [-1, 1]^dim.  The sampler starts from standard normal noise
and walks the reverse chain; the predicted noise is tanh-wrapped inside the
transition mean (as the algorithm defines it) and the final action is clipped
rather than squashed.  The exact diffusion likelihood is intractable, so the
policy's log-density is approximated by the Gaussian of the final reverse
transition with a floor variance.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .nncore.net import DenseNet, ForwardCache, time_embed


@dataclass(frozen=True)
class DiffusionSchedule:
    """Precomputed noise schedule; index t runs 1..steps (arrays 0-based)."""

    steps: int
    psi_min: float
    psi_max: float
    psi: np.ndarray  # per-step noise variance, strictly increasing
    phi: np.ndarray  # 1 - psi
    phi_bar: np.ndarray  # cumulative product of phi, strictly decreasing

    def phi_bar_prev(self, t: int) -> float:
        # phi_bar_0 == 1 makes the final reverse step deterministic
        return 1.0 if t == 1 else float(self.phi_bar[t - 2])


def build_schedule(steps: int, psi_min: float, psi_max: float) -> DiffusionSchedule:
    if steps < 1:
        raise ValueError("steps must be >= 1")
    if not 0.0 < psi_min < psi_max:
        raise ValueError("need 0 < psi_min < psi_max")
    t = np.arange(1, steps + 1, dtype=float)
    psi = 1.0 - np.exp(-psi_min / steps - (2.0 * t - 1.0) / (2.0 * steps**2) * (psi_max - psi_min))
    phi = 1.0 - psi
    return DiffusionSchedule(
        steps=steps,
        psi_min=psi_min,
        psi_max=psi_max,
        psi=psi,
        phi=phi,
        phi_bar=np.cumprod(phi),
    )


def forward_noise(
    a0: np.ndarray, t: int, schedule: DiffusionSchedule, noise: np.ndarray
) -> np.ndarray:
    """Closed-form corruption of a clean action to diffusion step t."""
    if not 1 <= t <= schedule.steps:
        raise ValueError(f"step {t} outside [1, {schedule.steps}]")
    pb = schedule.phi_bar[t - 1]
    return np.sqrt(pb) * a0 + np.sqrt(1.0 - pb) * noise


class DenoiserNet:
    """Noise-prediction network over concat(noisy action, state, time embedding)."""

    def __init__(self, net: DenseNet, state_dim: int, action_dim: int, time_dim: int):
        expected = action_dim + state_dim + time_dim
        if net.in_dim != expected or net.out_dim != action_dim:
            raise ValueError("network dimensions do not match the conditioning")
        self.net = net
        self.state_dim = state_dim
        self.action_dim = action_dim
        self.time_dim = time_dim

    @classmethod
    def build(
        cls,
        state_dim: int,
        action_dim: int,
        hidden_sizes: tuple[int, ...],
        time_dim: int,
        rng: np.random.Generator,
        hidden_activation: str = "mish",
    ) -> "DenoiserNet":
        sizes = [action_dim + state_dim + time_dim, *hidden_sizes, action_dim]
        return cls(
            DenseNet.build(sizes, rng, hidden_activation=hidden_activation),
            state_dim,
            action_dim,
            time_dim,
        )

    def _stack(self, a_t: np.ndarray, state: np.ndarray, t: int) -> np.ndarray:
        emb = time_embed(t, self.time_dim)
        if a_t.ndim == 1:
            return np.concatenate([a_t, state, emb])
        return np.concatenate(
            [a_t, state, np.broadcast_to(emb, (a_t.shape[0], self.time_dim))], axis=1
        )

    def predict(
        self, a_t: np.ndarray, state: np.ndarray, t: int
    ) -> tuple[np.ndarray, ForwardCache]:
        return self.net.forward(self._stack(a_t, state, t))

    def backward(
        self, cache: ForwardCache, d_out: np.ndarray
    ) -> list[tuple[np.ndarray, np.ndarray]]:
        grads, _ = self.net.backward(cache, d_out)
        return grads


def reverse_mean(
    a_t: np.ndarray,
    state: np.ndarray,
    t: int,
    denoiser: DenoiserNet,
    schedule: DiffusionSchedule,
) -> tuple[np.ndarray, ForwardCache, np.ndarray]:
    """Mean of the reverse transition at step t; also returns backprop state."""
    eps, cache = denoiser.predict(a_t, state, t)
    tanh_eps = np.tanh(eps)
    psi_t = schedule.psi[t - 1]
    pb_t = schedule.phi_bar[t - 1]
    mu = (a_t - psi_t * tanh_eps / np.sqrt(1.0 - pb_t)) / np.sqrt(schedule.phi[t - 1])
    return mu, cache, tanh_eps


def reverse_variance(t: int, schedule: DiffusionSchedule) -> float:
    psi_t = schedule.psi[t - 1]
    pb_t = schedule.phi_bar[t - 1]
    return float(psi_t * (1.0 - schedule.phi_bar_prev(t)) / (1.0 - pb_t))


def reverse_sample(
    state: np.ndarray,
    denoiser: DenoiserNet,
    schedule: DiffusionSchedule,
    rng: np.random.Generator,
    trace: list | None = None,
) -> np.ndarray:
    """Draw an action by denoising Gaussian noise conditioned on the state.

    Accepts a single state vector or a (B, state_dim) batch.  The final step
    adds no noise; the result is clipped into [-1, 1].  Pass a list as
    ``trace`` to collect (t, latent action) pairs for debugging dumps.
    """
    single = state.ndim == 1
    shape = (denoiser.action_dim,) if single else (state.shape[0], denoiser.action_dim)
    a = rng.standard_normal(shape)
    if trace is not None:
        trace.append((schedule.steps + 1, a.copy()))
    for t in range(schedule.steps, 0, -1):
        mu, _, _ = reverse_mean(a, state, t, denoiser, schedule)
        if t > 1:
            a = mu + np.sqrt(reverse_variance(t, schedule)) * rng.standard_normal(shape)
        else:
            a = mu
        if trace is not None:
            trace.append((t, a.copy()))
    return np.clip(a, -1.0, 1.0)


def gaussian_log_density(x: np.ndarray, mu: np.ndarray, var: float) -> np.ndarray:
    """Log N(x; mu, var * I), summed over the trailing dimension."""
    dim = x.shape[-1]
    sq = np.sum((x - mu) ** 2, axis=-1)
    return -0.5 * dim * np.log(2.0 * np.pi * var) - sq / (2.0 * var)


@dataclass
class LogProbPack:
    """State needed to backpropagate through approx_log_prob."""

    cache: ForwardCache
    tanh_eps: np.ndarray
    diff: np.ndarray  # a0 - mu
    var: float
    noise_gain: float  # d mu / d eps_theta prefactor (negative)


def log_prob_with_pack(
    a0: np.ndarray,
    state: np.ndarray,
    denoiser: DenoiserNet,
    schedule: DiffusionSchedule,
    noise: np.ndarray,
    var_floor: float,
) -> tuple[np.ndarray, LogProbPack]:
    """Differentiable approximate log-density of a0 under the policy.

    a0 is forward-noised one step (t = 1) with the supplied noise, and the
    density is the Gaussian of the final reverse transition around
    ``reverse_mean(a1, state, 1)`` with the floor variance (the exact
    transition variance at t = 1 is zero by the phi_bar_0 convention).
    """
    a1 = forward_noise(a0, 1, schedule, noise)
    mu, cache, tanh_eps = reverse_mean(a1, state, 1, denoiser, schedule)
    diff = a0 - mu
    logp = -0.5 * a0.shape[-1] * np.log(2.0 * np.pi * var_floor) - np.sum(
        diff**2, axis=-1
    ) / (2.0 * var_floor)
    gain = -schedule.psi[0] / (
        np.sqrt(1.0 - schedule.phi_bar[0]) * np.sqrt(schedule.phi[0])
    )
    return logp, LogProbPack(
        cache=cache, tanh_eps=tanh_eps, diff=diff, var=var_floor, noise_gain=float(gain)
    )


def log_prob_backward(
    pack: LogProbPack, dlogp: np.ndarray, denoiser: DenoiserNet
) -> list[tuple[np.ndarray, np.ndarray]]:
    """Parameter gradients of sum(dlogp * logp) w.r.t. the denoiser."""
    dmu = np.atleast_1d(dlogp)[..., None] * pack.diff / pack.var
    if pack.diff.ndim == 1:
        dmu = dmu.reshape(pack.diff.shape)
    d_eps = dmu * pack.noise_gain * (1.0 - pack.tanh_eps**2)
    return denoiser.backward(pack.cache, d_eps)


def approx_log_prob(
    a0: np.ndarray,
    state: np.ndarray,
    denoiser: DenoiserNet,
    schedule: DiffusionSchedule,
    rng: np.random.Generator | None = None,
    noise: np.ndarray | None = None,
    var_floor: float = 1e-2,
) -> np.ndarray:
    """Approximate log pi(a0 | state); see log_prob_with_pack.

    The one-step noising uses ``noise`` when given, otherwise a draw from
    ``rng``, otherwise the zero (mean) noising.
    """
    if noise is None:
        noise = rng.standard_normal(a0.shape) if rng is not None else np.zeros_like(a0)
    logp, _ = log_prob_with_pack(a0, state, denoiser, schedule, noise, var_floor)
    return logp
