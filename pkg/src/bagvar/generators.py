"""Synthetic regression data generators for the simulation studies.

All feature coordinates are independent uniforms: on [0, 1] for every
generator except ``circle_indicator``, which uses [-1, 1]^2.  Signals:

* cosine           3 * cos(pi * (X1 + X2)), noiseless, p = 2
* noisy_xor        5 * [XOR(X1>0.6, X2>0.6) + XOR(X3>0.6, X4>0.6)] + N(0,1), p = 50
* noisy_and        10 * AND(X1>0.3, X2>0.3, X3>0.3, X4>0.3) + N(0,1), p = 500
* step_function    four-jump staircase in one variable + N(0, 0.5^2), p = 1
* circle_indicator 1{||x||_2 >= 1}, deterministic, p = 2
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .learners import Dataset
from .resampling import stream_rng

GENERATOR_NAMES = ("cosine", "noisy_xor", "noisy_and", "step_function", "circle_indicator")

_DEFAULT_P = {
    "cosine": 2,
    "noisy_xor": 50,
    "noisy_and": 500,
    "step_function": 1,
    "circle_indicator": 2,
}
_DEFAULT_NOISE = {
    "cosine": 0.0,
    "noisy_xor": 1.0,
    "noisy_and": 1.0,
    "step_function": 0.5,
    "circle_indicator": 0.0,
}
_MIN_P = {"cosine": 2, "noisy_xor": 4, "noisy_and": 4, "step_function": 1, "circle_indicator": 2}

#: Step-function jump locations and the level on each plateau.
STEP_JUMPS = (0.2, 0.4, 0.6, 0.8)
STEP_LEVELS = (0.0, 2.0, 0.0, 2.0, 0.0)


@dataclass(frozen=True)
class GeneratorSpec:
    """One synthetic data source: generator name, size, and seed.

    ``p`` and ``noise_sd`` default to the generator's standard values and
    may be overridden explicitly.
    """

    name: str
    n: int
    p: int | None = None
    noise_sd: float | None = None
    seed: int = 0

    def __post_init__(self):
        if self.name not in GENERATOR_NAMES:
            raise ConfigError(
                f"unknown generator {self.name!r}; expected one of {GENERATOR_NAMES}"
            )
        if self.n < 1:
            raise ConfigError(f"generator needs n >= 1, got {self.n}")
        if self.p is not None and self.p < _MIN_P[self.name]:
            raise ConfigError(
                f"{self.name} needs p >= {_MIN_P[self.name]}, got p={self.p}"
            )
        if self.noise_sd is not None and self.noise_sd < 0:
            raise ConfigError("noise_sd must be non-negative")

    @property
    def n_features(self) -> int:
        return self.p if self.p is not None else _DEFAULT_P[self.name]

    @property
    def noise(self) -> float:
        return self.noise_sd if self.noise_sd is not None else _DEFAULT_NOISE[self.name]


def step_signal(x: np.ndarray) -> np.ndarray:
    """The four-jump staircase evaluated at scalar feature values."""
    levels = np.asarray(STEP_LEVELS)
    return levels[np.searchsorted(STEP_JUMPS, x, side="right")]


def signal(name: str, X: np.ndarray) -> np.ndarray:
    """Noise-free response of a generator at the given feature rows."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if name == "cosine":
        return 3.0 * np.cos(np.pi * (X[:, 0] + X[:, 1]))
    if name == "noisy_xor":
        a = np.logical_xor(X[:, 0] > 0.6, X[:, 1] > 0.6)
        b = np.logical_xor(X[:, 2] > 0.6, X[:, 3] > 0.6)
        return 5.0 * (a.astype(float) + b.astype(float))
    if name == "noisy_and":
        return 10.0 * (X[:, :4] > 0.3).all(axis=1).astype(float)
    if name == "step_function":
        return step_signal(X[:, 0])
    if name == "circle_indicator":
        return (np.linalg.norm(X, axis=1) >= 1.0).astype(float)
    raise ConfigError(f"unknown generator {name!r}")


def sample_features(spec: GeneratorSpec, n: int, rng: np.random.Generator) -> np.ndarray:
    """Draw n feature rows from the generator's feature distribution."""
    if spec.name == "circle_indicator":
        return rng.uniform(-1.0, 1.0, size=(n, spec.n_features))
    return rng.uniform(0.0, 1.0, size=(n, spec.n_features))


def generate(spec: GeneratorSpec) -> Dataset:
    """Materialize one dataset from a generator spec (deterministic in the seed)."""
    rng = stream_rng(spec.seed)
    X = sample_features(spec, spec.n, rng)
    y = signal(spec.name, X)
    if spec.noise > 0:
        y = y + rng.normal(0.0, spec.noise, size=spec.n)
    names = tuple(f"x{j + 1}" for j in range(spec.n_features))
    return Dataset(features=X, responses=y, feature_names=names)
