"""Truncation-based private and robust mean estimators with their schedules.

Two estimators are provided.  The raw-moment estimator zeroes out samples
beyond a threshold M around the origin and releases the clipped mean with
Laplace noise.  The central-moment estimator first locates the mean with a
private histogram over [-D, D] (bin width r), then truncates around that
initial estimate; it needs the mean-range bound D but tolerates means far
from zero.

The schedules freeze every constant to an explicit value: truncation
thresholds, bin widths, minimum sample counts, and the confidence radius
beta that accompanies each release.  beta is the radius at which the
estimate error is below beta with probability at least 1 - delta once the
sample count reaches ``min_n``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import privacy
from .rng import RngStream

# Radius constant of the central (histogram) estimator, calibrated once
# against the Monte-Carlo quantile study in the test suite and frozen.
CENTRAL_RADIUS_CONSTANT = 8.0

# Largest contamination rate the central schedule tolerates: above it the
# truncation window 4*alpha^(-1/k) can fall below 4r and the two-step
# argument breaks down.
CENTRAL_BREAKDOWN = 0.133

# The histogram mode-identification argument needs the mass outside a
# radius-r window below (0.249 - alpha); this pins the bin width via
# iota = (1 - alpha) / (0.249 - alpha).
_BIN_MASS_BUDGET = 0.249

_MAX_BINS = 200_000


@dataclass(frozen=True)
class Estimate:
    """A private mean estimate with its confidence radius."""

    value: float
    radius: float
    n_used: int

    def __post_init__(self) -> None:
        if self.radius <= 0.0:
            raise ValueError("radius must be positive")
        if self.n_used < 1:
            raise ValueError("n_used must be at least 1")


@dataclass(frozen=True)
class PrmRawParams:
    """Schedule for one raw-moment estimation call on n samples."""

    n: int
    epsilon: float
    delta: float
    k: float
    alpha: float
    truncation: float
    radius: float
    min_n: int


@dataclass(frozen=True)
class PrmCentralParams:
    """Schedule for one central-moment estimation call on 2n samples.

    ``n`` is the per-fold count: the histogram consumes the first n
    samples, the truncated mean around the initial estimate the last n.
    """

    n: int
    epsilon: float
    delta: float
    k: float
    alpha: float
    mean_range: float
    bin_width: float
    truncation: float
    radius: float
    min_n: int


def truncated_mean(data, truncation: float) -> float:
    """Mean with entries beyond the threshold zeroed, not clamped.

    Returns (1/n) * sum of x_i * 1{|x_i| <= M}; dropped entries still count
    in the denominator.
    """
    arr = np.asarray(data, dtype=float)
    if arr.size == 0:
        raise ValueError("truncated_mean needs at least one sample")
    if truncation < 0.0:
        raise ValueError("truncation threshold must be nonnegative")
    return float(np.where(np.abs(arr) <= truncation, arr, 0.0).mean())


def raw_schedule(
    n: int, epsilon: float, delta: float, k: float = 2.0, alpha: float = 0.0
) -> PrmRawParams:
    """Truncation threshold and radius for the raw-moment estimator.

    Without contamination::

        M    = (n * eps / (4 ln(4/delta)))^(1/k)
        beta = sqrt(2 ln(4/delta) / n) + 2 (4 ln(4/delta) / (n eps))^(1 - 1/k)

    With contamination (alpha in (0, 1/2])::

        M    = min{(n * eps / (4 ln(16/delta)))^(1/k), (8 alpha)^(-1/k)}
        beta = sqrt(2 ln(16/delta) / n)
               + 2 (4 ln(16/delta) / (n eps))^(1 - 1/k)
               + 2 (8 alpha)^(1 - 1/k)

    and the radius is only valid from ``min_n = ceil(ln(8/delta) / alpha)``
    samples on.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    if epsilon <= 0.0:
        raise ValueError("epsilon must be positive")
    if not 0.0 < delta < 1.0:
        raise ValueError("delta must lie in (0, 1)")
    if k < 2.0:
        raise ValueError("moment order k must be at least 2")
    if not 0.0 <= alpha <= 0.5:
        raise ValueError("alpha must lie in [0, 0.5] for the raw schedule")

    if alpha == 0.0:
        log_term = math.log(4.0 / delta)
        truncation = (n * epsilon / (4.0 * log_term)) ** (1.0 / k)
        radius = math.sqrt(2.0 * log_term / n) + 2.0 * (
            4.0 * log_term / (n * epsilon)
        ) ** (1.0 - 1.0 / k)
        min_n = 1
    else:
        log_term = math.log(16.0 / delta)
        truncation = min(
            (n * epsilon / (4.0 * log_term)) ** (1.0 / k),
            (8.0 * alpha) ** (-1.0 / k),
        )
        radius = (
            math.sqrt(2.0 * log_term / n)
            + 2.0 * (4.0 * log_term / (n * epsilon)) ** (1.0 - 1.0 / k)
            + 2.0 * (8.0 * alpha) ** (1.0 - 1.0 / k)
        )
        min_n = math.ceil(math.log(8.0 / delta) / alpha)

    return PrmRawParams(
        n=n,
        epsilon=epsilon,
        delta=delta,
        k=k,
        alpha=alpha,
        truncation=truncation,
        radius=radius,
        min_n=min_n,
    )


def prm_raw(data, params: PrmRawParams, rng: RngStream) -> Estimate:
    """Truncate around zero, average, add Laplace(2M / (n eps)) noise."""
    arr = np.asarray(data, dtype=float)
    if arr.size != params.n:
        raise ValueError(f"expected {params.n} samples, got {arr.size}")
    sensitivity = privacy.truncated_mean_sensitivity(params.n, params.truncation)
    noise = privacy.add_laplace("raw-truncated-mean", sensitivity, params.epsilon, rng)
    value = truncated_mean(arr, params.truncation) + noise
    return Estimate(value=value, radius=params.radius, n_used=params.n)


def _prm_raw_batch(
    data: np.ndarray, params: PrmRawParams, rng: RngStream
) -> np.ndarray:
    """Row-wise prm_raw over a (reps, n) matrix; one noise draw per row."""
    if data.ndim != 2 or data.shape[1] != params.n:
        raise ValueError("expected a (reps, n) matrix")
    sensitivity = privacy.truncated_mean_sensitivity(params.n, params.truncation)
    clipped = np.where(np.abs(data) <= params.truncation, data, 0.0).mean(axis=1)
    noise = privacy.add_laplace(
        "raw-truncated-mean", sensitivity, params.epsilon, rng, size=data.shape[0]
    )
    return clipped + noise


def private_histogram(
    data, bin_width: float, mean_range: float, epsilon: float, rng: RngStream
) -> tuple[float, np.ndarray]:
    """Noisy histogram over [-D, D] and the left endpoint of its mode bin.

    Bins are [j, j + r) with left endpoints -D, -D + r, ... up to the last
    grid point below D, so the union of bins always covers [-D, D] (the
    final bin may extend past D when 2D/r is not an integer).  Each bin
    frequency gets independent Laplace(2 / (n eps)) noise: one changed
    sample moves two counts by one each, so the L1 sensitivity of the
    frequency vector is 2/n.  Points covered by no bin are dropped from the
    counts (never an error).  Ties break toward the smallest left endpoint.
    """
    arr = np.asarray(data, dtype=float)
    if arr.size == 0:
        raise ValueError("private_histogram needs at least one sample")
    if bin_width <= 0.0:
        raise ValueError("bin width must be positive")
    if mean_range < 2.0 * bin_width:
        raise ValueError("mean range D must be at least twice the bin width")
    n_bins = int(math.ceil(2.0 * mean_range / bin_width - 1e-9))
    if n_bins > _MAX_BINS:
        raise ValueError(f"{n_bins} bins exceed the cap of {_MAX_BINS}")

    idx = np.floor((arr + mean_range) / bin_width).astype(np.int64)
    in_range = (idx >= 0) & (idx < n_bins)
    counts = np.bincount(idx[in_range], minlength=n_bins)

    n = arr.size
    noise = privacy.add_laplace("histogram", 2.0 / n, epsilon, rng, size=n_bins)
    masses = counts / n + noise
    mode = int(np.argmax(masses))  # first max: ties go to the smallest endpoint
    left_endpoint = -mean_range + mode * bin_width
    return left_endpoint, masses


def central_schedule(
    n: int,
    epsilon: float,
    delta: float,
    k: float = 2.0,
    alpha: float = 0.0,
    mean_range: float = 100.0,
) -> PrmCentralParams:
    """Bin width, truncation threshold, and radius for the two-step estimator.

    Without contamination::

        r     = 10^(1/k)
        M     = 4 (n eps / ln(1/delta))^(1/k)
        min_n = ceil(200 ln(16 D / delta) / eps)
        beta  = c * (sqrt(ln(1/delta) / n) + (ln(1/delta) / (n eps))^(1 - 1/k))

    With contamination (alpha < 0.133)::

        iota  = (1 - alpha) / (0.249 - alpha)
        r     = iota^(1/k)
        M     = min{4 (n eps / ln(1/delta))^(1/k), 4 alpha^(-1/k)}
        min_n = ceil(max{iota ln(1/delta) / eps,
                         200 ln(16 D / delta) / eps,
                         ln(16/delta) / alpha^2})

    and beta gains the additive term ``c * alpha^(1 - 1/k)``.  The radius
    constant c is :data:`CENTRAL_RADIUS_CONSTANT`.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    if not 0.0 < epsilon <= 1.0:
        raise ValueError("the central schedule requires epsilon in (0, 1]")
    if not 0.0 < delta < 1.0:
        raise ValueError("delta must lie in (0, 1)")
    if k < 2.0:
        raise ValueError("moment order k must be at least 2")
    if alpha < 0.0:
        raise ValueError("alpha must be nonnegative")
    if alpha > 0.0 and alpha >= CENTRAL_BREAKDOWN:
        raise ValueError(
            f"alpha={alpha} is at or above the breakdown point "
            f"{CENTRAL_BREAKDOWN} of the central estimator"
        )

    log_conf = math.log(1.0 / delta)
    if alpha == 0.0:
        bin_width = 10.0 ** (1.0 / k)
        truncation = 4.0 * (n * epsilon / log_conf) ** (1.0 / k)
        min_n = math.ceil(200.0 * math.log(16.0 * mean_range / delta) / epsilon)
        radius = CENTRAL_RADIUS_CONSTANT * (
            math.sqrt(log_conf / n) + (log_conf / (n * epsilon)) ** (1.0 - 1.0 / k)
        )
    else:
        iota = (1.0 - alpha) / (_BIN_MASS_BUDGET - alpha)
        bin_width = iota ** (1.0 / k)
        truncation = min(
            4.0 * (n * epsilon / log_conf) ** (1.0 / k),
            4.0 * alpha ** (-1.0 / k),
        )
        min_n = math.ceil(
            max(
                iota * log_conf / epsilon,
                200.0 * math.log(16.0 * mean_range / delta) / epsilon,
                math.log(16.0 / delta) / alpha**2,
            )
        )
        radius = CENTRAL_RADIUS_CONSTANT * (
            math.sqrt(log_conf / n)
            + (log_conf / (n * epsilon)) ** (1.0 - 1.0 / k)
            + alpha ** (1.0 - 1.0 / k)
        )

    if mean_range < 2.0 * bin_width:
        raise ValueError(
            f"mean range D={mean_range} must be at least 2r={2.0 * bin_width:.4f}"
        )
    return PrmCentralParams(
        n=n,
        epsilon=epsilon,
        delta=delta,
        k=k,
        alpha=alpha,
        mean_range=mean_range,
        bin_width=bin_width,
        truncation=truncation,
        radius=radius,
        min_n=min_n,
    )


def prm_central(data, params: PrmCentralParams, rng: RngStream) -> Estimate:
    """Histogram fold for a coarse location, then truncate around it.

    The first n samples locate the mean via :func:`private_histogram`; the
    last n are averaged after zeroing deviations beyond M from that initial
    estimate J::

        value = J + (1/n) sum (X_i - J) 1{|X_i - J| <= M} + Lap(2M / (n eps))

    Each fold sees disjoint data and spends the full per-call epsilon.
    """
    arr = np.asarray(data, dtype=float)
    if arr.size % 2 != 0:
        raise ValueError("central estimation needs an even number of samples")
    if arr.size != 2 * params.n:
        raise ValueError(f"expected {2 * params.n} samples, got {arr.size}")

    first, second = arr[: params.n], arr[params.n :]
    initial, _ = private_histogram(
        first, params.bin_width, params.mean_range, params.epsilon, rng
    )
    deviations = second - initial
    kept = np.where(np.abs(deviations) <= params.truncation, deviations, 0.0)
    sensitivity = privacy.truncated_mean_sensitivity(params.n, params.truncation)
    noise = privacy.add_laplace(
        "central-truncated-mean", sensitivity, params.epsilon, rng
    )
    value = initial + float(kept.mean()) + noise
    return Estimate(value=value, radius=params.radius, n_used=arr.size)
