"""Stochastic gradient oracles with configurable noise and systematic bias.

An oracle draws a randomized estimate of a local gradient: optional
mini-batch or additive Gaussian sampling noise, then an optional bias
transform (mean-shifted Gaussian, relative rescale, or top-k masking).
Agents own independent generator streams split from one master seed, so
runs are reproducible and agents' draws never interleave.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, ContractViolationError
from .objective import RegularizedLogisticObjective, data_gradient, local_gradient

RELATIVE_BIAS_LIMIT = 1.0 / 256.0


@dataclass(frozen=True)
class Exact:
    """No sampling noise: the full local gradient."""


@dataclass(frozen=True)
class MiniBatch:
    """Average the data term over a uniform without-replacement batch."""


@dataclass(frozen=True)
class AdditiveGaussian:
    """Full gradient plus isotropic N(0, sigma^2 I) noise."""

    sigma: float


@dataclass(frozen=True)
class NoBias:
    pass


@dataclass(frozen=True, eq=False)
class AbsoluteGaussianMean:
    """Add e ~ N(mu, sigma_e^2 I); the mean shift is the systematic bias."""

    mu: np.ndarray
    sigma_e: float = 0.0


@dataclass(frozen=True)
class RelativeScale:
    """Return (1 + delta) times the estimate; bias grows with the gradient."""

    delta: float


@dataclass(frozen=True)
class TopK:
    """Keep only the k largest-magnitude coordinates."""

    k: int


NoiseModel = Exact | MiniBatch | AdditiveGaussian
BiasModel = NoBias | AbsoluteGaussianMean | RelativeScale | TopK


@dataclass(frozen=True, eq=False)
class OracleSpec:
    batch_size: int = 1
    noise: NoiseModel = field(default_factory=Exact)
    bias: BiasModel = field(default_factory=NoBias)


def mean_shift(norm: float, dim: int) -> np.ndarray:
    """Constant-direction shift c * ones/sqrt(d), so its norm is exactly c."""
    if dim < 1:
        raise ContractViolationError(f"dimension must be positive, got {dim}")
    return float(norm) * np.ones(dim) / np.sqrt(dim)


def bias_bounds(spec: OracleSpec, dim: int) -> tuple[float, float]:
    """(relative, absolute-squared) systematic-bias levels the spec realizes."""
    bias = spec.bias
    if isinstance(bias, NoBias):
        return 0.0, 0.0
    if isinstance(bias, AbsoluteGaussianMean):
        mu = np.asarray(bias.mu, dtype=float)
        return 0.0, float(mu @ mu)
    if isinstance(bias, RelativeScale):
        return bias.delta**2, 0.0
    if isinstance(bias, TopK):
        return 1.0 - bias.k / dim, 0.0
    raise ConfigurationError(f"unknown bias model {bias!r}")


def check_spec(spec: OracleSpec, obj: RegularizedLogisticObjective) -> None:
    """Validate an oracle spec against one local objective.

    A relative-bias level above 1/256 breaks the guarantees the runner's
    parameter guard assumes, so it warns rather than fails.
    """
    if spec.batch_size < 1:
        raise ConfigurationError(f"batch_size must be >= 1, got {spec.batch_size}")
    if isinstance(spec.noise, MiniBatch) and spec.batch_size > obj.n_samples:
        raise ConfigurationError(
            f"batch_size {spec.batch_size} exceeds the {obj.n_samples} local samples"
        )
    if isinstance(spec.noise, AdditiveGaussian) and spec.noise.sigma < 0:
        raise ConfigurationError(f"noise sigma must be >= 0, got {spec.noise.sigma}")
    bias = spec.bias
    if isinstance(bias, AbsoluteGaussianMean):
        mu = np.asarray(bias.mu, dtype=float)
        if mu.shape != (obj.dim,):
            raise ConfigurationError(
                f"bias mean has shape {mu.shape}, objective dimension is {obj.dim}"
            )
        if bias.sigma_e < 0:
            raise ConfigurationError(f"sigma_e must be >= 0, got {bias.sigma_e}")
    elif isinstance(bias, TopK):
        if not 1 <= bias.k <= obj.dim:
            raise ConfigurationError(
                f"top-k count {bias.k} must lie in [1, {obj.dim}]"
            )
    relative, _ = bias_bounds(spec, obj.dim)
    if relative > RELATIVE_BIAS_LIMIT:
        warnings.warn(
            f"relative bias level {relative:.4g} exceeds {RELATIVE_BIAS_LIMIT:.4g}; "
            "convergence guarantees no longer apply",
            stacklevel=2,
        )


def sample(
    spec: OracleSpec,
    obj: RegularizedLogisticObjective,
    x: np.ndarray,
    rng: np.random.Generator,
) -> np.ndarray:
    """Draw one (possibly biased) stochastic gradient at x.

    The penalty gradient is cheap and deterministic, so only the data
    term is ever subsampled; the bias transform applies last.
    """
    x = obj._check_point(x)
    noise = spec.noise
    if isinstance(noise, MiniBatch):
        if spec.batch_size > obj.n_samples:
            raise ConfigurationError(
                f"batch_size {spec.batch_size} exceeds the {obj.n_samples} local samples"
            )
        idx = rng.choice(obj.n_samples, size=spec.batch_size, replace=False)
        g = data_gradient(obj.features[idx], obj.labels[idx], x)
        if obj.alpha != 0.0:
            g = g + obj.alpha * 2.0 * x / (1.0 + x * x) ** 2
    elif isinstance(noise, AdditiveGaussian):
        g = local_gradient(obj, x) + noise.sigma * rng.standard_normal(obj.dim)
    elif isinstance(noise, Exact):
        g = local_gradient(obj, x)
    else:
        raise ConfigurationError(f"unknown noise model {noise!r}")

    bias = spec.bias
    if isinstance(bias, NoBias):
        return g
    if isinstance(bias, AbsoluteGaussianMean):
        # draw even when sigma_e is zero so stream use depends only on the spec
        e = np.asarray(bias.mu, dtype=float) + bias.sigma_e * rng.standard_normal(obj.dim)
        return g + e
    if isinstance(bias, RelativeScale):
        return (1.0 + bias.delta) * g
    if isinstance(bias, TopK):
        masked = np.zeros_like(g)
        keep = np.argpartition(np.abs(g), obj.dim - bias.k)[obj.dim - bias.k :]
        masked[keep] = g[keep]
        return masked
    raise ConfigurationError(f"unknown bias model {bias!r}")


def measure_oracle(
    spec: OracleSpec,
    obj: RegularizedLogisticObjective,
    x: np.ndarray,
    trials: int,
    rng: np.random.Generator,
) -> tuple[float, float]:
    """Monte-Carlo estimates of the oracle's variance and squared bias at x.

    Returns (E||g - Eg||^2, ||Eg - grad f(x)||^2) with the expectation
    replaced by the empirical mean over the given number of draws.
    """
    if trials < 2:
        raise ContractViolationError(f"need at least 2 trials, got {trials}")
    draws = np.empty((trials, obj.dim))
    for t in range(trials):
        draws[t] = sample(spec, obj, x, rng)
    mean = draws.mean(axis=0)
    centered = draws - mean
    variance = float(np.sum(centered * centered)) / (trials - 1)
    diff = mean - local_gradient(obj, x)
    return variance, float(diff @ diff)


def agent_streams(seed: int, n: int) -> list[np.random.Generator]:
    """Independent per-agent generators split from one master seed."""
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(n)]
