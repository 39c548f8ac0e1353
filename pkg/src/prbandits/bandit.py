"""Batched arm elimination on private robust mean estimates.

The driver doubles the batch size each round: batch tau pulls each active
arm ``B_tau = 2^tau`` times on fresh samples, estimates every active arm's
mean from its own batch only, and removes arms whose estimate trails the
best by more than twice the confidence radius.  While ``B_tau`` is below
the estimator's minimum sample threshold, a uniformly random arm is played
for the whole batch and the samples are discarded.  Forgetting earlier
batches means one reward influences exactly one private release, so the
whole action sequence is epsilon-DP by parallel composition.

Per-batch confidence is allocated as ``delta / (2 |S| tau^2)`` with |S| the
active-arm count at batch start, which keeps the total failure probability
below delta over all batches and arms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Literal, Mapping, Sequence

import numpy as np

from .env import BanditInstance, sample_rewards
from .estimators import (
    Estimate,
    central_schedule,
    prm_central,
    prm_raw,
    raw_schedule,
    truncated_mean,
)
from . import privacy
from .rng import RngStream

EstimatorName = Literal["raw", "central"]


@dataclass(frozen=True)
class BatchRecord:
    """What one batch did: phase, pull span, and any estimation output."""

    tau: int
    batch_size: int
    phase: str  # "random" | "estimate" | "exploit" | "truncated"
    active_before: tuple[int, ...]
    active_after: tuple[int, ...]
    pull_start: int
    pull_end: int
    arm: int | None = None
    radius: float | None = None
    estimates: dict[int, float] | None = None


@dataclass
class RegretTrace:
    """Per-round cumulative clean regret plus run metadata."""

    algorithm: str
    epsilon: float
    alpha: float
    instance_label: str
    seed: int
    stream_id: int
    cumulative: np.ndarray
    batches: list[BatchRecord] = field(default_factory=list)

    @property
    def final_regret(self) -> float:
        return float(self.cumulative[-1])

    @property
    def rounds(self) -> int:
        return int(self.cumulative.size)


def clean_regret(actions: Sequence[int], instance: BanditInstance) -> np.ndarray:
    """Cumulative sum of optimal-mean minus chosen-arm true mean.

    Uses ground-truth inlier means, never observed (possibly contaminated)
    rewards.
    """
    idx = np.asarray(actions, dtype=np.int64)
    if idx.size and (idx.min() < 0 or idx.max() >= instance.n_arms):
        raise IndexError("action sequence contains an out-of-range arm index")
    means = np.asarray(instance.true_means)
    return np.cumsum(instance.optimal_mean - means[idx])


def eliminate_arms(estimates: Mapping[int, float], radius: float) -> list[int]:
    """Keep arms within twice the radius of the best estimate.

    Returns surviving arm indices in their original order; the argmax arm
    always survives, so the result is never empty.
    """
    best = max(estimates.values())
    return [arm for arm, value in estimates.items() if best - value <= 2.0 * radius]


class _RawPrmPolicy:
    """Raw-moment estimator plugged into the elimination driver."""

    name = "prae-r"

    def __init__(self, epsilon: float, delta: float, alpha: float, k: float):
        self.epsilon = epsilon
        self.delta = delta
        self.alpha = alpha
        self.k = k
        raw_schedule(8, epsilon, delta, k, alpha)  # validate domains up front

    def batch_threshold(self, tau: int, n_active: int) -> int:
        if self.alpha == 0.0:
            return 1
        return math.ceil(
            math.log(16.0 * n_active * tau * tau / self.delta) / self.alpha
        )

    def estimate(self, samples: np.ndarray, delta_tau: float, rng: RngStream) -> Estimate:
        params = raw_schedule(
            samples.size, self.epsilon, delta_tau, self.k, self.alpha
        )
        return prm_raw(samples, params, rng)


class _CentralPrmPolicy:
    """Histogram-based central-moment estimator for the driver."""

    name = "prae-c"

    def __init__(
        self, epsilon: float, delta: float, alpha: float, k: float, mean_range: float
    ):
        self.epsilon = epsilon
        self.delta = delta
        self.alpha = alpha
        self.k = k
        self.mean_range = mean_range
        central_schedule(8, epsilon, delta, k, alpha, mean_range)  # validate

    def batch_threshold(self, tau: int, n_active: int) -> int:
        delta_tau = self.delta / (2.0 * n_active * tau * tau)
        params = central_schedule(
            1, self.epsilon, delta_tau, self.k, self.alpha, self.mean_range
        )
        return 2 * params.min_n  # two folds per batch

    def estimate(self, samples: np.ndarray, delta_tau: float, rng: RngStream) -> Estimate:
        fold = samples.size // 2
        params = central_schedule(
            fold, self.epsilon, delta_tau, self.k, self.alpha, self.mean_range
        )
        return prm_central(samples[: 2 * fold], params, rng)


class _AggressiveTruncationPolicy:
    """Non-robust comparison baseline: larger truncation, no contamination term.

    A simplified stand-in for prior differentially-private heavy-tailed
    elimination schemes; it shares the batching skeleton but truncates at
    ``(n eps / ln(1/delta))^(1/k)`` regardless of contamination and its
    radius carries no contamination term.
    """

    name = "dprse"

    def __init__(self, epsilon: float, delta: float, k: float):
        self.epsilon = epsilon
        self.delta = delta
        self.alpha = 0.0
        self.k = k
        raw_schedule(8, epsilon, delta, k, 0.0)  # validate domains

    def batch_threshold(self, tau: int, n_active: int) -> int:
        return 1

    def estimate(self, samples: np.ndarray, delta_tau: float, rng: RngStream) -> Estimate:
        n = samples.size
        truncation = (n * self.epsilon / math.log(1.0 / delta_tau)) ** (1.0 / self.k)
        sensitivity = privacy.truncated_mean_sensitivity(n, truncation)
        noise = privacy.add_laplace(
            "baseline-truncated-mean", sensitivity, self.epsilon, rng
        )
        log_term = math.log(4.0 / delta_tau)
        radius = math.sqrt(2.0 * log_term / n) + 2.0 * (
            4.0 * log_term / (n * self.epsilon)
        ) ** (1.0 - 1.0 / self.k)
        value = truncated_mean(samples, truncation) + noise
        return Estimate(value=value, radius=radius, n_used=n)


def _run_elimination(
    instance: BanditInstance,
    policy,
    horizon: int,
    rng: RngStream,
    phase_cap: int | None,
) -> RegretTrace:
    if horizon < 1:
        raise ValueError("horizon must be at least 1")
    if phase_cap is not None and phase_cap < 1:
        raise ValueError("phase_cap must be at least 1")

    n_arms = instance.n_arms
    active = list(range(n_arms))
    chunks: list[tuple[int, int]] = []  # (arm, pull count), in play order
    batches: list[BatchRecord] = []
    pulls = 0
    tau = 0

    while pulls < horizon:
        tau += 1
        batch_size = 2**tau

        if len(active) == 1:
            # No decision left; play the survivor without further releases.
            arm = active[0]
            remaining = horizon - pulls
            chunks.append((arm, remaining))
            batches.append(
                BatchRecord(
                    tau=tau,
                    batch_size=remaining,
                    phase="exploit",
                    active_before=tuple(active),
                    active_after=tuple(active),
                    pull_start=pulls,
                    pull_end=horizon,
                    arm=arm,
                )
            )
            pulls = horizon
            break

        threshold = policy.batch_threshold(tau, len(active))
        if phase_cap is not None:
            threshold = min(threshold, phase_cap)

        if batch_size < threshold:
            # Not enough samples for a trustworthy estimate: play one
            # uniformly random arm for the whole batch, discard the rewards.
            arm = rng.integers(n_arms)
            count = min(batch_size, horizon - pulls)
            sample_rewards(instance, arm, count, rng)
            chunks.append((arm, count))
            batches.append(
                BatchRecord(
                    tau=tau,
                    batch_size=batch_size,
                    phase="random",
                    active_before=tuple(active),
                    active_after=tuple(active),
                    pull_start=pulls,
                    pull_end=pulls + count,
                    arm=arm,
                )
            )
            pulls += count
            continue

        delta_tau = policy.delta / (2.0 * len(active) * tau * tau)
        estimates: dict[int, Estimate] = {}
        span_start = pulls
        truncated = False
        for arm in active:
            count = min(batch_size, horizon - pulls)
            samples = sample_rewards(instance, arm, count, rng)
            chunks.append((arm, count))
            pulls += count
            if count < batch_size:
                # Horizon hit mid-batch: the partial sample has the wrong n
                # for the schedule, so it is discarded without a release.
                truncated = True
                break
            estimates[arm] = policy.estimate(samples, delta_tau, rng)

        if truncated:
            batches.append(
                BatchRecord(
                    tau=tau,
                    batch_size=batch_size,
                    phase="truncated",
                    active_before=tuple(active),
                    active_after=tuple(active),
                    pull_start=span_start,
                    pull_end=pulls,
                )
            )
            break

        radius = next(iter(estimates.values())).radius
        values = {arm: est.value for arm, est in estimates.items()}
        survivors = eliminate_arms(values, radius)
        batches.append(
            BatchRecord(
                tau=tau,
                batch_size=batch_size,
                phase="estimate",
                active_before=tuple(active),
                active_after=tuple(survivors),
                pull_start=span_start,
                pull_end=pulls,
                radius=radius,
                estimates=values,
            )
        )
        active = survivors

    actions = np.concatenate(
        [np.full(count, arm, dtype=np.int64) for arm, count in chunks]
    )
    trace = clean_regret(actions, instance)
    return RegretTrace(
        algorithm=policy.name,
        epsilon=policy.epsilon,
        alpha=policy.alpha,
        instance_label=instance.label,
        seed=rng.seed,
        stream_id=rng.stream_id,
        cumulative=trace,
        batches=batches,
    )


def prae_run(
    instance: BanditInstance,
    estimator: EstimatorName,
    epsilon: float,
    delta: float,
    alpha: float,
    k: float,
    horizon: int,
    rng: RngStream,
    phase_cap: int | None = None,
) -> RegretTrace:
    """Run private robust arm elimination with the chosen estimator.

    ``phase_cap``, when given, upper-bounds the batch size at which the
    elimination phase must begin: the effective threshold is
    ``min(theoretical threshold, phase_cap)``.  The theoretical minimum
    sample counts of the central estimator exceed any desk-scale horizon,
    so experiment configurations cap them; leave ``None`` to follow the
    theory exactly.
    """
    if estimator == "raw":
        policy = _RawPrmPolicy(epsilon, delta, alpha, k)
    elif estimator == "central":
        policy = _CentralPrmPolicy(epsilon, delta, alpha, k, instance.mean_range)
    else:
        raise ValueError(f"unknown estimator {estimator!r}")
    return _run_elimination(instance, policy, horizon, rng, phase_cap)


def dprse_baseline_run(
    instance: BanditInstance,
    epsilon: float,
    delta: float,
    k: float,
    horizon: int,
    rng: RngStream,
    phase_cap: int | None = None,
) -> RegretTrace:
    """Run the aggressive-truncation baseline on the same skeleton."""
    policy = _AggressiveTruncationPolicy(epsilon, delta, k)
    return _run_elimination(instance, policy, horizon, rng, phase_cap)
