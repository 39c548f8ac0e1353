"""Reward environments: heavy-tailed inliers mixed with arbitrary outliers.

Each arm owns an inlier distribution and a contamination spec.  A pull
draws from the inlier with probability ``1 - alpha`` and from the outlier
distribution otherwise, with an independent mixture coin per pull.  All
sampling is inverse-CDF, so one reward consumes exactly two uniform draws
(coin, value); calling :func:`sample_reward` n times is bit-identical to
one :func:`sample_rewards` call of size n on the same stream.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Union

import numpy as np
from scipy import special, stats

from .rng import RngStream

# Inverse CDFs of unbounded distributions blow up at u in {0, 1}; uniform
# draws land there with probability ~2^-53, so clamp instead of special-casing.
_U_LO = 1e-12
_U_HI = 1.0 - 1e-12


@dataclass(frozen=True)
class ParetoShifted:
    """``shift + eta`` where eta is Pareto with the given shape and scale."""

    shape: float
    scale: float
    shift: float

    def __post_init__(self) -> None:
        if self.shape <= 1.0:
            raise ValueError("Pareto shape must exceed 1 for a finite mean")
        if self.scale <= 0.0:
            raise ValueError("Pareto scale must be positive")

    @property
    def mean(self) -> float:
        return self.shift + self.shape * self.scale / (self.shape - 1.0)

    def quantile(self, u: np.ndarray) -> np.ndarray:
        return self.shift + self.scale * (1.0 - u) ** (-1.0 / self.shape)


@dataclass(frozen=True)
class StudentTShifted:
    """``shift + eta`` where eta is Student's t with the given degrees of freedom."""

    dof: float
    shift: float

    def __post_init__(self) -> None:
        if self.dof <= 2.0:
            raise ValueError("Student's t needs dof > 2 for a finite variance")

    @property
    def mean(self) -> float:
        return self.shift

    def quantile(self, u: np.ndarray) -> np.ndarray:
        return self.shift + stats.t.ppf(np.clip(u, _U_LO, _U_HI), self.dof)


@dataclass(frozen=True)
class TwoPoint:
    """Value ``high`` with probability ``p_high``, else 0."""

    high: float
    p_high: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.p_high <= 1.0:
            raise ValueError("p_high must lie in [0, 1]")
        if self.high < 0.0:
            raise ValueError("high must be nonnegative")

    @property
    def mean(self) -> float:
        return self.high * self.p_high

    def quantile(self, u: np.ndarray) -> np.ndarray:
        return np.where(u < self.p_high, self.high, 0.0)


@dataclass(frozen=True)
class PointMass:
    """Degenerate distribution at ``value``. Usable as inlier or outlier."""

    value: float

    @property
    def mean(self) -> float:
        return self.value

    def quantile(self, u: np.ndarray) -> np.ndarray:
        return np.full_like(np.asarray(u, dtype=float), self.value)


@dataclass(frozen=True)
class Gaussian:
    """Normal outlier distribution."""

    mean_value: float
    std: float

    def __post_init__(self) -> None:
        if self.std < 0.0:
            raise ValueError("std must be nonnegative")

    @property
    def mean(self) -> float:
        return self.mean_value

    def quantile(self, u: np.ndarray) -> np.ndarray:
        return self.mean_value + self.std * special.ndtri(np.clip(u, _U_LO, _U_HI))


InlierKind = Union[ParetoShifted, StudentTShifted, TwoPoint, PointMass]
OutlierKind = Union[Gaussian, PointMass]


@dataclass(frozen=True)
class InlierSpec:
    """An arm's true reward distribution plus its moment order.

    ``mean`` is the analytic mean of ``kind``, derived at construction;
    ``k`` is the moment order the estimation schedules are tuned for.
    """

    kind: InlierKind
    k: float = 2.0
    mean: float = field(init=False)

    def __post_init__(self) -> None:
        if self.k < 2.0:
            raise ValueError("moment order k must be at least 2")
        object.__setattr__(self, "mean", self.kind.mean)
        if not math.isfinite(self.mean):
            raise ValueError("inlier mean must be finite")


@dataclass(frozen=True)
class ContaminationSpec:
    """Huber mixture: replace a pull by an outlier draw with probability alpha."""

    alpha: float = 0.0
    outlier: OutlierKind | None = None

    def __post_init__(self) -> None:
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must lie in [0, 1]")
        if self.alpha > 0.0 and self.outlier is None:
            raise ValueError("alpha > 0 requires an outlier distribution")


Arm = tuple[InlierSpec, ContaminationSpec]


@dataclass(frozen=True)
class BanditInstance:
    """A fixed set of arms with ground-truth inlier means.

    ``mean_range`` is the bound D with every true mean in [-D, D]; the
    histogram-based estimator bins over this range. Immutable after
    construction, so instances can be shared freely across threads.
    """

    arms: tuple[Arm, ...]
    mean_range: float
    label: str = ""

    def __post_init__(self) -> None:
        if not self.arms:
            raise ValueError("instance needs at least one arm")
        if self.mean_range < 0.0:
            raise ValueError("mean_range must be nonnegative")
        for inlier, _ in self.arms:
            if abs(inlier.mean) > self.mean_range + 1e-9:
                raise ValueError(
                    f"arm mean {inlier.mean} outside [-{self.mean_range}, {self.mean_range}]"
                )

    @property
    def n_arms(self) -> int:
        return len(self.arms)

    @property
    def true_means(self) -> tuple[float, ...]:
        return tuple(inlier.mean for inlier, _ in self.arms)

    @property
    def optimal_mean(self) -> float:
        return max(self.true_means)


def sample_rewards(
    instance: BanditInstance, arm: int, size: int, rng: RngStream
) -> np.ndarray:
    """Draw ``size`` contaminated rewards for one arm.

    Consumes exactly ``2 * size`` uniforms in (coin, value) order per draw.
    """
    if not 0 <= arm < instance.n_arms:
        raise IndexError(f"arm index {arm} out of range for {instance.n_arms} arms")
    if size < 0:
        raise ValueError("size must be nonnegative")
    if size == 0:
        return np.empty(0)
    inlier, contamination = instance.arms[arm]
    u = rng.uniform(size=(size, 2))
    values = np.asarray(inlier.kind.quantile(u[:, 1]), dtype=float)
    if contamination.alpha > 0.0:
        assert contamination.outlier is not None
        corrupted = u[:, 0] < contamination.alpha
        if corrupted.any():
            values[corrupted] = contamination.outlier.quantile(u[corrupted, 1])
    return values


def sample_reward(instance: BanditInstance, arm: int, rng: RngStream) -> float:
    """Draw a single contaminated reward for one arm."""
    return float(sample_rewards(instance, arm, 1, rng)[0])


def make_linear_means_instance(
    n_arms: int,
    inlier_kind: str = "student_t",
    alpha: float = 0.0,
    outlier: OutlierKind | None = None,
) -> BanditInstance:
    """Benchmark instance with arm means descending linearly from 100 to 0.

    Arm a (1-based) has mean ``100 - 100*(a-1)/(K-1)``.  Pareto arms use
    shape 2.5 and scale 1.5 shifted to the target mean; Student's t arms
    use dof 2.5.  When ``alpha > 0`` and no outlier is given, contamination
    defaults to Gaussian(0, 50).
    """
    if n_arms < 2:
        raise ValueError("linear-means instance needs at least 2 arms")
    if inlier_kind not in ("student_t", "pareto"):
        raise ValueError(f"unknown inlier kind {inlier_kind!r}")
    if outlier is None and alpha > 0.0:
        outlier = Gaussian(0.0, 50.0)
    contamination = ContaminationSpec(alpha, outlier)

    arms = []
    for a in range(1, n_arms + 1):
        mu = 100.0 - 100.0 * (a - 1) / (n_arms - 1)
        if inlier_kind == "pareto":
            kind: InlierKind = ParetoShifted(shape=2.5, scale=1.5, shift=mu - 2.5)
        else:
            kind = StudentTShifted(dof=2.5, shift=mu)
        arms.append((InlierSpec(kind, k=2.0), contamination))
    return BanditInstance(
        arms=tuple(arms),
        mean_range=100.0,
        label=f"linear-{inlier_kind}-K{n_arms}-a{alpha:g}",
    )


def make_hard_instance(
    n_arms: int,
    k: float = 2.0,
    gamma: float = 1.0,
    boosted_arm: int | None = None,
) -> BanditInstance:
    """Two-point worst-case instance with all k-th raw moments at most 1.

    Arm 0 pays ``1/gamma`` with probability ``gamma^k / 2`` (mean
    ``gamma^(k-1) / 2``); every other arm pays the same value with
    probability ``0.3 * gamma^k``.  Passing ``boosted_arm=i`` raises arm
    i's success probability to ``0.7 * gamma^k``, which makes it optimal
    while staying within total variation ``0.4 * gamma^k`` of the base
    instance.
    """
    if n_arms < 1:
        raise ValueError("instance needs at least one arm")
    if not 0.0 < gamma <= 1.0:
        raise ValueError("gamma must lie in (0, 1]")
    if k < 2.0:
        raise ValueError("moment order k must be at least 2")
    if boosted_arm is not None:
        if not 0 <= boosted_arm < n_arms:
            raise ValueError("boosted arm index out of range")
        if boosted_arm == 0:
            raise ValueError("arm 0 is already the base optimal arm")

    clean = ContaminationSpec(0.0, None)
    high = 1.0 / gamma
    arms = []
    for a in range(n_arms):
        if a == 0:
            p = 0.5 * gamma**k
        elif a == boosted_arm:
            p = 0.7 * gamma**k
        else:
            p = 0.3 * gamma**k
        arms.append((InlierSpec(TwoPoint(high, p), k=k), clean))
    tag = "base" if boosted_arm is None else f"boost{boosted_arm}"
    return BanditInstance(
        arms=tuple(arms),
        mean_range=1.0,
        label=f"hard-{tag}-K{n_arms}-g{gamma:g}-k{k:g}",
    )
