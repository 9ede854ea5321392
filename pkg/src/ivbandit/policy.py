"""Epoch-based inverse-gap-weighting policies.

The learner proceeds in geometrically growing epochs.  At the start of epoch
m >= 2 it refits the reward model on the rows collected during epoch m-1
*only* (keeping each fit's data conditionally i.i.d.), with regularizers

    finite-rank variant:    lambda_i = eta_i * sqrt(d_tilde / n)
    infinite-rank variant:  lambda_i = eta_i * (log n)^r * n^(-r),
                            r = nu / (2*nu + dim)

for n the previous epoch's length, and exploration weight

    finite:    gamma_m = sqrt(eta * K * n / (d_tilde * log(2 m^2 / delta)))
    infinite:  gamma_m = sqrt(eta * K / log(2 m^2 / delta)) * (log n)^(-r) * n^r.

Epoch 1 uses the zero model and gamma_1 = 1.  Within an epoch, each round
scores every arm with the current model and samples from the inverse-gap
distribution p(a) = 1 / (K + gamma * gap(a)) for suboptimal arms, with the
leader absorbing the remainder; model values are never clipped.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field

import numpy as np

from .dualiv import DualIVModel, TripleDataset, fit, naive_krr_fit, predict_many
from .errors import InputError, NumericalError
from .kernels import KernelSpec, space_dim

DOUBLING = "doubling"
HORIZON = "horizon"

FINITE_RANK = "finite"
INFINITE_RANK = "infinite"


@dataclass(frozen=True)
class EpochSchedule:
    """Epoch boundaries tau_m; tau_0 = 0 and boundaries strictly increase.

    ``doubling`` uses tau_m = 2^m.  ``horizon`` uses
    tau_m = floor(2 * T^(1 - 2^-m)) clipped to T, which can repeat values
    for small m, so consumers step through :meth:`next_boundary` (the
    deduplicated sequence) rather than raw :meth:`boundary`.
    """

    kind: str
    horizon: int | None = None

    def __post_init__(self):
        if self.kind not in (DOUBLING, HORIZON):
            raise InputError(f"unknown schedule kind {self.kind!r}")
        if self.kind == HORIZON and (self.horizon is None or self.horizon < 2):
            raise InputError("horizon schedule needs the time horizon T >= 2")

    def boundary(self, m: int) -> int:
        if m < 0:
            raise InputError("epoch index must be >= 0")
        if m == 0:
            return 0
        if self.kind == DOUBLING:
            return 2**m
        raw = math.floor(2.0 * self.horizon ** (1.0 - 2.0**-m))
        return min(raw, self.horizon)

    def next_boundary(self, tau: int) -> int:
        """Smallest boundary strictly greater than tau."""
        if self.kind == HORIZON and tau >= self.horizon:
            raise InputError("no boundary beyond the horizon")
        m = 1
        while self.boundary(m) <= tau:
            m += 1
        return self.boundary(m)

    def boundaries_up_to(self, t_max: int) -> list[int]:
        """Distinct boundaries <= t_max, ascending."""
        out = []
        tau = 0
        while True:
            if self.kind == HORIZON and tau >= self.horizon:
                break
            nxt = self.next_boundary(tau)
            if nxt > t_max:
                break
            out.append(nxt)
            tau = nxt
        return out


@dataclass(frozen=True)
class PolicyConfig:
    """Tuning parameters shared by the epoch policies."""

    eta: float
    eta1: float
    eta2: float
    delta: float
    k_spec: KernelSpec
    l_spec: KernelSpec
    d_tilde: int | None = None
    variant: str = FINITE_RANK
    nu: float | None = None
    space_input_dim: int | None = None  # the d in the infinite-rank exponent

    def __post_init__(self):
        if min(self.eta, self.eta1, self.eta2) <= 0:
            raise InputError("eta, eta1, eta2 must be positive")
        if not 0.0 < self.delta < 1.0:
            raise InputError("delta must lie in (0, 1)")
        if self.variant not in (FINITE_RANK, INFINITE_RANK):
            raise InputError(f"unknown variant {self.variant!r}")
        if self.variant == FINITE_RANK:
            if self.d_tilde is None or self.d_tilde < 1:
                raise InputError("finite-rank variant needs d_tilde >= 1")
        else:
            if self.nu is None or self.space_input_dim is None:
                raise InputError("infinite-rank variant needs nu and the input dim")
            if self.nu <= self.space_input_dim / 2.0:
                raise InputError("infinite-rank variant needs nu > dim / 2")

    @property
    def _decay_exponent(self) -> float:
        return self.nu / (2.0 * self.nu + self.space_input_dim)


def effective_dim(k: KernelSpec, l: KernelSpec, d_x: int, d_yz: int) -> int:
    """max(dim H, dim U) for finite-rank kernels on the two input spaces."""
    return max(space_dim(k, d_x), space_dim(l, d_yz))


def lambda_schedule(config: PolicyConfig, n: int) -> tuple[float, float]:
    """Regularizer pair for a fit on n rows, per the configured variant."""
    if config.variant == FINITE_RANK:
        if n < 1:
            raise InputError("need n >= 1")
        base = math.sqrt(config.d_tilde / n)
    else:
        if n < 2:
            raise InputError("infinite-rank schedule needs n >= 2")
        r = config._decay_exponent
        base = math.log(n) ** r * n**-r
    return config.eta1 * base, config.eta2 * base


def gamma_schedule(config: PolicyConfig, m: int, epoch_len: int, n_arms: int) -> float:
    """Exploration weight gamma_m for epoch m >= 2.

    ``epoch_len`` is the length of epoch m-1 (= the size of the data the
    current model was fit on).  gamma_1 = 1 is fixed at initialization, not
    produced here.
    """
    if m < 2:
        raise InputError("gamma_schedule applies to epochs m >= 2")
    if epoch_len < 1:
        raise InputError("epoch_len must be >= 1")
    log_term = math.log(2.0 * m**2 / config.delta)
    if config.variant == FINITE_RANK:
        return math.sqrt(
            config.eta * n_arms * epoch_len / (config.d_tilde * log_term)
        )
    r = config._decay_exponent
    return (
        math.sqrt(config.eta * n_arms / log_term)
        * math.log(epoch_len) ** -r
        * epoch_len**r
    )


def igw_probabilities(fhat_values, gamma: float) -> np.ndarray:
    """Inverse-gap-weighting distribution over arms.

    The leader a_hat is the argmax (ties to the lowest index); every other
    arm gets 1 / (K + gamma * gap) and the leader absorbs the remainder, so
    the entries sum to 1 exactly.
    """
    vals = np.asarray(fhat_values, dtype=np.float64).ravel()
    if vals.shape[0] < 2:
        raise InputError("need at least 2 arms")
    if not np.all(np.isfinite(vals)):
        raise InputError("non-finite model values")
    if not (np.isfinite(gamma) and gamma >= 0):
        raise InputError("gamma must be finite and >= 0")
    n_arms = vals.shape[0]
    ahat = int(np.argmax(vals))
    gaps = vals[ahat] - vals
    probs = 1.0 / (n_arms + gamma * gaps)
    probs[ahat] = 0.0
    probs[ahat] = 1.0 - probs.sum()
    return probs


@dataclass
class EpochState:
    """Mutable per-epoch state of a running policy."""

    m: int  # current epoch index, 1-based
    epoch_end: int  # tau_m: last round of this epoch
    gamma: float
    model: DualIVModel | None  # None = the zero model of epoch 1
    buffer_xs: list = field(default_factory=list)
    buffer_ys: list = field(default_factory=list)
    buffer_zs: list = field(default_factory=list)


def _buffer_checksum(data: TripleDataset) -> str:
    h = hashlib.sha256()
    for arr in (data.xs, data.ys, data.zs):
        h.update(np.ascontiguousarray(arr).tobytes())
    return h.hexdigest()[:16]


class DivElsPolicy:
    """Dual-IV regression with the epoch learning strategy.

    Stateful and single-run: one instance per simulated trajectory.  The
    sampling stream ``rng`` must be independent of the environment's.
    """

    def __init__(
        self,
        config: PolicyConfig,
        schedule: EpochSchedule,
        action_set: np.ndarray,
        rng: np.random.Generator,
    ):
        self.config = config
        self.schedule = schedule
        self.action_set = np.atleast_2d(np.asarray(action_set, dtype=np.float64))
        self.n_arms = self.action_set.shape[0]
        if self.n_arms < 2:
            raise InputError("need at least 2 arms")
        self.rng = rng
        self.state = EpochState(
            m=1, epoch_end=schedule.next_boundary(0), gamma=1.0, model=None
        )
        self.epoch_log: list[dict] = []

    def fhat_values(self, context) -> np.ndarray:
        """Current model's score for every arm at this context."""
        if self.state.model is None:
            return np.zeros(self.n_arms)
        c = np.asarray(context, dtype=np.float64).ravel()
        xs = np.hstack([np.broadcast_to(c, (self.n_arms, c.shape[0])), self.action_set])
        return predict_many(self.state.model, xs)

    def act(self, context) -> int:
        probs = igw_probabilities(self.fhat_values(context), self.state.gamma)
        return int(self.rng.choice(self.n_arms, p=probs))

    def observe(self, context, instrument, arm_index: int, reward: float):
        c = np.asarray(context, dtype=np.float64).ravel()
        self.state.buffer_xs.append(np.concatenate([c, self.action_set[arm_index]]))
        self.state.buffer_ys.append(float(reward))
        self.state.buffer_zs.append(np.asarray(instrument, dtype=np.float64).ravel())

    def maybe_advance_epoch(self, t: int):
        """Refit and reset the buffer once t has passed the epoch boundary."""
        if t <= self.state.epoch_end:
            return
        data = TripleDataset(
            xs=np.vstack(self.state.buffer_xs),
            ys=np.asarray(self.state.buffer_ys),
            zs=np.vstack(self.state.buffer_zs),
        )
        m_next = self.state.m + 1
        lam1, lam2 = lambda_schedule(self.config, data.n)
        try:
            model = self._fit_model(data, lam1, lam2)
        except (InputError, NumericalError) as exc:
            exc.args = (f"epoch {m_next} fit failed: {exc}",)
            raise
        gamma = gamma_schedule(self.config, m_next, data.n, self.n_arms)
        self.epoch_log.append(
            {
                "epoch": m_next,
                "n_fit": data.n,
                "lambda1": lam1,
                "lambda2": lam2,
                "gamma": gamma,
                "resid_first_stage": model.diagnostics.first_stage,
                "resid_theta": model.diagnostics.theta,
                "data_sha": _buffer_checksum(data),
            }
        )
        self.state = EpochState(
            m=m_next,
            epoch_end=self.schedule.next_boundary(self.state.epoch_end),
            gamma=gamma,
            model=model,
        )

    def _fit_model(self, data: TripleDataset, lam1: float, lam2: float) -> DualIVModel:
        return fit(data, self.config.k_spec, self.config.l_spec, lam1, lam2)


class NaiveKrrPolicy(DivElsPolicy):
    """Same epoch machinery, but the fit regresses y on x and discards z."""

    def _fit_model(self, data: TripleDataset, lam1: float, lam2: float) -> DualIVModel:
        # the f-side regularizer is the natural single ridge parameter
        return naive_krr_fit(data, self.config.k_spec, lam2)


class UniformPolicy:
    """Plays every arm with probability 1/K forever."""

    def __init__(self, n_arms: int, rng: np.random.Generator):
        if n_arms < 1:
            raise InputError("need at least 1 arm")
        self.n_arms = n_arms
        self.rng = rng
        self.epoch_log: list[dict] = []

    def act(self, context) -> int:
        return int(self.rng.integers(self.n_arms))

    def observe(self, context, instrument, arm_index: int, reward: float):
        pass

    def maybe_advance_epoch(self, t: int):
        pass
