"""Laplace mechanism, truncated-mean sensitivity, and DP auditing hooks.

Noise is always added at scale ``sensitivity / epsilon``, which makes each
release pure epsilon-DP.  Two context managers support verification:
:func:`noiseless` forces every scale to zero for deterministic unit tests
(it is not reachable from the CLI), and :func:`release_hook` observes
``(mechanism, sensitivity, scale, epsilon)`` for every release so tests can
assert the scale is exactly ``sensitivity / epsilon``.
"""

from __future__ import annotations

import contextlib
import contextvars
from dataclasses import dataclass
from typing import Callable, Iterator

import numpy as np

from .rng import RngStream

_NOISELESS: contextvars.ContextVar[bool] = contextvars.ContextVar(
    "prbandits_noiseless", default=False
)
_HOOK: contextvars.ContextVar[Callable[[str, float, float, float], None] | None] = (
    contextvars.ContextVar("prbandits_release_hook", default=None)
)

ReleaseHook = Callable[[str, float, float, float], None]


@dataclass(frozen=True)
class PrivacyParams:
    """Privacy budget plus the confidence parameter of the error bounds.

    ``delta_conf`` is the failure probability of the concentration bounds,
    not a DP parameter; the mechanism itself is pure epsilon-DP.
    """

    epsilon: float
    delta_conf: float

    def __post_init__(self) -> None:
        if self.epsilon <= 0.0:
            raise ValueError("epsilon must be positive")
        if not 0.0 < self.delta_conf < 1.0:
            raise ValueError("delta_conf must lie in (0, 1)")


@contextlib.contextmanager
def noiseless() -> Iterator[None]:
    """Force all Laplace scales to zero inside the block (tests only)."""
    token = _NOISELESS.set(True)
    try:
        yield
    finally:
        _NOISELESS.reset(token)


@contextlib.contextmanager
def release_hook(hook: ReleaseHook) -> Iterator[None]:
    """Invoke ``hook(mechanism, sensitivity, scale, epsilon)`` per release."""
    token = _HOOK.set(hook)
    try:
        yield
    finally:
        _HOOK.reset(token)


def _laplace_from_uniform(u: np.ndarray, scale: float) -> np.ndarray:
    # Inverse CDF; the clamp only matters at u == 0, probability 2^-53.
    p = np.asarray(u, dtype=float) - 0.5
    arg = np.maximum(-2.0 * np.abs(p), -(1.0 - 1e-16))
    return -scale * np.sign(p) * np.log1p(arg)


def laplace_sample(scale: float, rng: RngStream) -> float:
    """One draw with density (1/2b) exp(-|x|/b); scale 0 returns exactly 0."""
    if scale < 0.0:
        raise ValueError("Laplace scale must be nonnegative")
    if scale == 0.0:
        return 0.0
    return float(_laplace_from_uniform(rng.uniform(), scale))

def laplace_samples(scale: float, size: int, rng: RngStream) -> np.ndarray:
    """Vector of iid Laplace draws; one uniform consumed per draw."""
    if scale < 0.0:
        raise ValueError("Laplace scale must be nonnegative")
    if scale == 0.0:
        return np.zeros(size)
    return _laplace_from_uniform(rng.uniform(size=size), scale)


def add_laplace(
    mechanism: str,
    sensitivity: float,
    epsilon: float,
    rng: RngStream,
    size: int | None = None,
):
    """Laplace release at scale sensitivity/epsilon, reported to the hook.

    In noiseless mode the scale is forced to 0 and no uniforms are consumed.
    """
    if sensitivity < 0.0:
        raise ValueError("sensitivity must be nonnegative")
    if epsilon <= 0.0:
        raise ValueError("epsilon must be positive")
    scale = 0.0 if _NOISELESS.get() else sensitivity / epsilon
    hook = _HOOK.get()
    if hook is not None:
        hook(mechanism, sensitivity, scale, epsilon)
    if size is None:
        return laplace_sample(scale, rng)
    return laplace_samples(scale, size, rng)


def truncated_mean_sensitivity(n: int, truncation: float) -> float:
    """L1 sensitivity of an M-truncated mean of n values: 2M/n.

    Replacing one entry moves the sum by at most 2M (one surviving value can
    swing from +M to -M), hence the mean by 2M/n.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    if truncation < 0.0:
        raise ValueError("truncation threshold must be nonnegative")
    return 2.0 * truncation / n


def audit_sensitivity(
    n: int, truncation: float, trials: int, rng: RngStream
) -> float:
    """Empirically probe the 2M/n sensitivity bound.

    Generates ``trials`` random datasets of size n with entries in
    [-10M, 10M], replaces one entry by a fresh arbitrary value in the same
    range, and returns the largest observed truncated-mean difference.
    The result never exceeds 2M/n.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    if trials < 1:
        raise ValueError("trials must be at least 1")
    if truncation < 0.0:
        raise ValueError("truncation threshold must be nonnegative")
    if truncation == 0.0:
        return 0.0

    span = 10.0 * truncation
    u = rng.uniform(size=(trials, n + 2))
    base = (2.0 * u[:, :n] - 1.0) * span
    replacement = (2.0 * u[:, n] - 1.0) * span
    position = np.minimum((u[:, n + 1] * n).astype(int), n - 1)

    def _tmeans(data: np.ndarray) -> np.ndarray:
        return np.where(np.abs(data) <= truncation, data, 0.0).mean(axis=1)

    perturbed = base.copy()
    perturbed[np.arange(trials), position] = replacement
    return float(np.max(np.abs(_tmeans(base) - _tmeans(perturbed))))
