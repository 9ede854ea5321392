"""Experiment orchestration: the round loop, repetition, and file outputs.

Each repeat is an independent run seeded from ``base_seed + run_index``; the
master sequence splits into four sub-streams (instance sampling, round
noise, policy sampling, control-variant reward noise) so that, e.g.,
swapping the policy never perturbs the environment stream.  Regret is
pseudo-regret against the true structural function -- the gap between the
best arm's noiseless value and the pulled arm's noiseless value -- recorded
cumulatively every round.

Runs can be dispatched to a process pool; results are joined in run-index
order, so the aggregate (and the emitted CSV bytes) are identical whatever
the pool size.
"""

from __future__ import annotations

import json
import logging
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass, field

import numpy as np

from .envs import (
    DEFAULT_NOISE_SCALE,
    ConfoundedEnv,
    EnvSpec,
    sample_env,
    structural_values,
)
from .errors import InputError
from .kernels import KernelSpec
from .policy import (
    DOUBLING,
    FINITE_RANK,
    HORIZON,
    INFINITE_RANK,
    DivElsPolicy,
    EpochSchedule,
    NaiveKrrPolicy,
    PolicyConfig,
    UniformPolicy,
    effective_dim,
)

logger = logging.getLogger("ivbandit")

POLICY_KINDS = ("div-els", "div-els-infinite", "naive-krr", "uniform")


@dataclass(frozen=True)
class RunConfig:
    """Fully describes one experiment (all repeats included)."""

    T: int = 1024
    repeats: int = 20
    base_seed: int = 0
    n_arms: int = 4
    rho: float = 0.95
    noise_scale: float = DEFAULT_NOISE_SCALE
    policy: str = "div-els"
    schedule: str = DOUBLING
    kernel: KernelSpec = field(default_factory=lambda: KernelSpec.polynomial(3, 1.0))
    eta: float | None = None  # None resolves to 200 * rho^2
    eta1: float = 1.0
    eta2: float = 1.0
    delta: float = 0.1
    d_tilde: int | None = None  # None resolves via effective_dim
    nu: float | None = None  # infinite-rank variant only
    workers: int = 1
    out: str = "regret.csv"

    def __post_init__(self):
        if self.T < 2:
            raise InputError("T must be >= 2")
        if self.repeats < 1:
            raise InputError("repeats must be >= 1")
        if self.policy not in POLICY_KINDS:
            raise InputError(f"unknown policy kind {self.policy!r}")
        if self.workers < 1:
            raise InputError("workers must be >= 1")

    def resolved_eta(self) -> float:
        return self.eta if self.eta is not None else 200.0 * self.rho**2

    def to_dict(self) -> dict:
        return {
            "T": self.T,
            "repeats": self.repeats,
            "base_seed": self.base_seed,
            "n_arms": self.n_arms,
            "rho": self.rho,
            "noise_scale": self.noise_scale,
            "policy": self.policy,
            "schedule": self.schedule,
            "kernel": self.kernel.to_dict(),
            "eta": self.eta,
            "eta1": self.eta1,
            "eta2": self.eta2,
            "delta": self.delta,
            "d_tilde": self.d_tilde,
            "nu": self.nu,
            "workers": self.workers,
            "out": self.out,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        d = dict(d)
        d["kernel"] = KernelSpec.from_dict(d["kernel"])
        return cls(**d)


@dataclass
class RegretTrace:
    """Per-round cumulative pseudo-regret of one run."""

    cumulative: np.ndarray  # (T,)
    epoch_log: list[dict]


@dataclass
class ExperimentResult:
    """Aggregate over repeats: mean trace and its standard error per round."""

    mean: np.ndarray
    stderr: np.ndarray
    traces: np.ndarray  # (repeats, T)


def _run_streams(base_seed: int, run_index: int):
    ss = np.random.SeedSequence(base_seed + run_index)
    return ss.spawn(4)  # env sampling, round noise, policy, control rewards


def resolve_env(config: RunConfig, run_index: int) -> EnvSpec:
    """The environment spec a given run will see (deterministic in seeds)."""
    env_ss, *_ = _run_streams(config.base_seed, run_index)
    return sample_env(config.n_arms, config.rho, env_ss, config.noise_scale)


def _make_schedule(config: RunConfig) -> EpochSchedule:
    if config.schedule == HORIZON:
        return EpochSchedule(HORIZON, horizon=config.T)
    return EpochSchedule(DOUBLING)


def build_policy(config: RunConfig, spec: EnvSpec, rng: np.random.Generator):
    """Instantiate the configured policy for one run's environment."""
    if config.policy == "uniform":
        return UniformPolicy(spec.n_arms, rng)
    schedule = _make_schedule(config)
    if config.policy == "div-els-infinite":
        pconfig = PolicyConfig(
            eta=config.resolved_eta(),
            eta1=config.eta1,
            eta2=config.eta2,
            delta=config.delta,
            k_spec=config.kernel,
            l_spec=config.kernel,
            variant=INFINITE_RANK,
            nu=config.nu,
            space_input_dim=spec.x_dim,
        )
        return DivElsPolicy(pconfig, schedule, spec.action_set, rng)
    d_tilde = config.d_tilde
    if d_tilde is None:
        d_yz = 1 + spec.context_dim  # the l-kernel sees (y, z)
        d_tilde = effective_dim(config.kernel, config.kernel, spec.x_dim, d_yz)
    pconfig = PolicyConfig(
        eta=config.resolved_eta(),
        eta1=config.eta1,
        eta2=config.eta2,
        delta=config.delta,
        k_spec=config.kernel,
        l_spec=config.kernel,
        d_tilde=d_tilde,
        variant=FINITE_RANK,
    )
    cls = NaiveKrrPolicy if config.policy == "naive-krr" else DivElsPolicy
    return cls(pconfig, schedule, spec.action_set, rng)


def simulate(env: ConfoundedEnv, policy, T: int) -> RegretTrace:
    """Run one trajectory of T rounds and accumulate pseudo-regret."""
    spec = env.spec
    cumulative = np.empty(T)
    total = 0.0
    for t in range(1, T + 1):
        policy.maybe_advance_epoch(t)
        obs = env.next_round()
        arm = policy.act(obs.context)
        reward = env.realized_reward(obs, arm)
        policy.observe(obs.context, obs.instrument, arm, reward)
        vals = structural_values(spec, obs.context)
        total += float(vals.max() - vals[arm])
        cumulative[t - 1] = total
    return RegretTrace(cumulative=cumulative, epoch_log=list(policy.epoch_log))


def run_once(config: RunConfig, run_index: int) -> RegretTrace:
    """Execute one seeded repeat of the configured experiment."""
    env_ss, round_ss, policy_ss, reward_ss = _run_streams(config.base_seed, run_index)
    spec = sample_env(config.n_arms, config.rho, env_ss, config.noise_scale)
    env = ConfoundedEnv(
        spec,
        round_rng=np.random.default_rng(round_ss),
        reward_rng=np.random.default_rng(reward_ss),
    )
    policy = build_policy(config, spec, np.random.default_rng(policy_ss))
    trace = simulate(env, policy, config.T)
    for rec in trace.epoch_log:
        logger.info(
            "run=%d epoch=%d n=%d lambda1=%.6g lambda2=%.6g gamma=%.6g "
            "resid1=%.3g resid2=%.3g data_sha=%s",
            run_index,
            rec["epoch"],
            rec["n_fit"],
            rec["lambda1"],
            rec["lambda2"],
            rec["gamma"],
            rec["resid_first_stage"],
            rec["resid_theta"],
            rec["data_sha"],
        )
    return trace


def run_experiment(config: RunConfig, workers: int | None = None) -> ExperimentResult:
    """Run all repeats (optionally in a process pool) and aggregate.

    The result is independent of ``workers`` because every run owns its
    seeded streams and traces are joined in run-index order.
    """
    n_workers = workers if workers is not None else config.workers
    results: list[RegretTrace | None] = [None] * config.repeats
    if n_workers <= 1 or config.repeats == 1:
        failures = []
        for i in range(config.repeats):
            try:
                results[i] = run_once(config, i)
            except Exception as exc:  # collect, then report all failing runs
                failures.append((i, exc))
        if failures:
            idx = ", ".join(str(i) for i, _ in failures)
            raise RuntimeError(f"runs failed: [{idx}]; first error: {failures[0][1]}")
    else:
        with ProcessPoolExecutor(max_workers=n_workers) as pool:
            futures = {
                pool.submit(run_once, config, i): i for i in range(config.repeats)
            }
            failures = []
            for fut in as_completed(futures):
                i = futures[fut]
                try:
                    results[i] = fut.result()
                except Exception as exc:
                    failures.append((i, exc))
            if failures:
                failures.sort()
                idx = ", ".join(str(i) for i, _ in failures)
                raise RuntimeError(
                    f"runs failed: [{idx}]; first error: {failures[0][1]}"
                )
    traces = np.vstack([r.cumulative for r in results])
    mean = traces.mean(axis=0)
    if config.repeats > 1:
        stderr = traces.std(axis=0, ddof=1) / np.sqrt(config.repeats)
    else:
        stderr = np.zeros_like(mean)
    return ExperimentResult(mean=mean, stderr=stderr, traces=traces)


def _fmt(value: float) -> str:
    # repr of a Python float is the shortest digit string that round-trips
    return repr(float(value))


def emit_csv(result: ExperimentResult, path):
    """Write the aggregate trace as t,mean_regret,stderr rows."""
    lines = ["t,mean_regret,stderr\n"]
    for t in range(result.mean.shape[0]):
        lines.append(f"{t + 1},{_fmt(result.mean[t])},{_fmt(result.stderr[t])}\n")
    with open(path, "w", newline="") as fh:
        fh.writelines(lines)


def emit_metadata(config: RunConfig, resolved_envs: list[EnvSpec], path):
    """Echo the resolved config plus each run's sampled instance to JSON."""
    payload = {
        "config": config.to_dict(),
        "resolved_eta": config.resolved_eta(),
        "environments": [
            {
                "run_index": i,
                "alpha": spec.alpha.tolist(),
                "action_set": spec.action_set.tolist(),
            }
            for i, spec in enumerate(resolved_envs)
        ],
    }
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
