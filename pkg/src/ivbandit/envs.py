"""Synthetic confounded bandit environments.

The generative process per round:

    z ~ Uniform[0, 1]^2,   e ~ Normal(0, sigma^2),   c = rho*z + (1 - rho)*e,

with the scalar confounder e broadcast across both context coordinates, and
the realized reward for pulling arm a at context c

    y = (alpha . (c, a) + 1)^3 + e

using the *same* draw of e that entered the context -- that shared draw is
the confounding.  ``noise_scale`` is the standard deviation sigma; the
default corresponds to variance 0.1.  The unconfounded control variant keeps
the context/instrument stream byte-identical but pays the reward with a
fresh independent Normal(0, sigma^2) draw, severing the correlation.

A ``rho`` near 1 makes the instrument z almost determine the context (weak
confounding, strong instrument); a ``rho`` near 0 leaves the context almost
pure noise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .dualiv import TripleDataset
from .errors import InputError

#: standard deviation of the confounder; variance 0.1
DEFAULT_NOISE_SCALE = math.sqrt(0.1)


@dataclass(frozen=True, eq=False)
class EnvSpec:
    """Resolved parameters of one bandit instance (fixed for a whole run)."""

    n_arms: int
    rho: float
    alpha: np.ndarray  # (context_dim + action_dim,)
    action_set: np.ndarray  # (n_arms, action_dim)
    seed: int | None = None
    noise_scale: float = DEFAULT_NOISE_SCALE
    context_dim: int = 2
    action_dim: int = 2
    confounded: bool = True

    def __post_init__(self):
        object.__setattr__(self, "alpha", np.asarray(self.alpha, dtype=np.float64))
        object.__setattr__(
            self, "action_set", np.atleast_2d(np.asarray(self.action_set, dtype=np.float64))
        )
        if self.n_arms < 1 or self.action_set.shape != (self.n_arms, self.action_dim):
            raise InputError("action_set must be (n_arms, action_dim)")
        if self.alpha.shape != (self.context_dim + self.action_dim,):
            raise InputError("alpha must have length context_dim + action_dim")
        if not 0.0 <= self.rho <= 1.0:
            raise InputError("rho must lie in [0, 1]")
        if self.noise_scale <= 0:
            raise InputError("noise_scale must be positive")

    @property
    def x_dim(self) -> int:
        return self.context_dim + self.action_dim


@dataclass(frozen=True)
class RoundObservation:
    """What one round reveals: the confounder is visible only to oracles."""

    context: np.ndarray
    instrument: np.ndarray
    confounder: float


def sample_env(n_arms: int, rho: float, seed, noise_scale: float = DEFAULT_NOISE_SCALE) -> EnvSpec:
    """Draw a bandit instance: alpha ~ U[0,1]^4, arms ~ U[-2,2]^2.

    Deterministic in ``seed`` (an int or a ``numpy.random.SeedSequence``);
    the action set stays fixed for the lifetime of the spec.
    """
    if n_arms < 2:
        raise InputError("sample_env needs n_arms >= 2")
    if not 0.0 <= rho <= 1.0:
        raise InputError("rho must lie in [0, 1]")
    rng = np.random.default_rng(seed)
    alpha = rng.random(4)
    action_set = rng.uniform(-2.0, 2.0, size=(n_arms, 2))
    seed_val = seed if isinstance(seed, int) else None
    return EnvSpec(
        n_arms=n_arms,
        rho=rho,
        alpha=alpha,
        action_set=action_set,
        seed=seed_val,
        noise_scale=noise_scale,
    )


def unconfounded_variant(spec: EnvSpec) -> EnvSpec:
    """Same instance, but rewards use fresh noise independent of contexts."""
    return replace(spec, confounded=False)


def structural_values(spec: EnvSpec, context) -> np.ndarray:
    """Noiseless reward (alpha . (c, a) + 1)^3 for every arm at once."""
    c = np.asarray(context, dtype=np.float64).ravel()
    if c.shape[0] != spec.context_dim:
        raise InputError(f"context must have dim {spec.context_dim}")
    lin = (
        c @ spec.alpha[: spec.context_dim]
        + spec.action_set @ spec.alpha[spec.context_dim :]
        + 1.0
    )
    return lin**3


def structural_value(spec: EnvSpec, context, arm_index: int) -> float:
    """Noiseless reward of one arm at one context."""
    if not 0 <= arm_index < spec.n_arms:
        raise InputError(f"arm index {arm_index} out of range [0, {spec.n_arms})")
    return float(structural_values(spec, context)[arm_index])


def best_arm(spec: EnvSpec, context) -> tuple[int, float]:
    """Argmax arm and its structural value; ties go to the lowest index."""
    vals = structural_values(spec, context)
    idx = int(np.argmax(vals))
    return idx, float(vals[idx])


class ConfoundedEnv:
    """One run's environment: owns its round-noise stream.

    ``reward_rng`` is consumed only by the unconfounded variant; passing it
    unconditionally keeps the context/instrument stream identical between
    the confounded environment and its control.
    """

    def __init__(
        self,
        spec: EnvSpec,
        round_rng: np.random.Generator,
        reward_rng: np.random.Generator | None = None,
    ):
        if not spec.confounded and reward_rng is None:
            raise InputError("unconfounded variant needs a reward_rng stream")
        self.spec = spec
        self._round_rng = round_rng
        self._reward_rng = reward_rng

    def next_round(self) -> RoundObservation:
        """Draw (z, e) and form c = rho*z + (1 - rho)*e componentwise."""
        spec = self.spec
        z = self._round_rng.random(spec.context_dim)
        e = float(self._round_rng.normal(0.0, spec.noise_scale))
        c = spec.rho * z + (1.0 - spec.rho) * e
        return RoundObservation(context=c, instrument=z, confounder=e)

    def realized_reward(self, obs: RoundObservation, arm_index: int) -> float:
        """Noisy reward; reuses obs.confounder unless the variant is control."""
        base = structural_value(self.spec, obs.context, arm_index)
        if self.spec.confounded:
            noise = obs.confounder
        else:
            noise = float(self._reward_rng.normal(0.0, self.spec.noise_scale))
        return base + noise

    def sample_rounds(self, n: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Bulk draw of n rounds: (contexts, instruments, confounders).

        Draw order differs from repeated next_round() calls (z block first,
        then e block), but is itself deterministic for a fixed stream.
        """
        spec = self.spec
        zs = self._round_rng.random((n, spec.context_dim))
        es = self._round_rng.normal(0.0, spec.noise_scale, size=n)
        cs = spec.rho * zs + (1.0 - spec.rho) * es[:, None]
        return cs, zs, es


def collect_dataset(env: ConfoundedEnv, n: int, arm_rng: np.random.Generator) -> TripleDataset:
    """Gather n regression rows (x, y, z) with uniformly random arm pulls."""
    spec = env.spec
    cs, zs, es = env.sample_rounds(n)
    arms = arm_rng.integers(0, spec.n_arms, size=n)
    xs = np.hstack([cs, spec.action_set[arms]])
    struct = (xs @ spec.alpha + 1.0) ** 3
    if spec.confounded:
        noise = es
    else:
        noise = env._reward_rng.normal(0.0, spec.noise_scale, size=n)
    return TripleDataset(xs=xs, ys=struct + noise, zs=zs)
