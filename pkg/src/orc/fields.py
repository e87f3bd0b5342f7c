"""Ground-truth Gaussian-mixture densities and the confidence-shifted surrogate."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence, Union

import numpy as np

EPS_POS = 1e-6

Amplitude = Union[float, Callable[[float], float]]


@dataclass(frozen=True)
class GaussianComponent:
    """``A(t) * exp(-(x - m)^T diag(s) (x - m))``.

    ``shape`` holds the diagonal of the quadratic form directly (units
    1/m^2); it is not a covariance.
    """

    amplitude: Amplitude
    mean: tuple[float, float]
    shape: tuple[float, float]

    def __post_init__(self):
        if not all(s > 0 for s in self.shape):
            raise ValueError(f"shape entries must be positive, got {self.shape}")

    def amplitude_at(self, t: float) -> float:
        a = self.amplitude
        return float(a(t)) if callable(a) else float(a)

    def __call__(self, points: np.ndarray, t: float = 0.0) -> np.ndarray:
        p = np.atleast_2d(np.asarray(points, dtype=float))
        dx = p[:, 0] - self.mean[0]
        dy = p[:, 1] - self.mean[1]
        return self.amplitude_at(t) * np.exp(-(self.shape[0] * dx * dx + self.shape[1] * dy * dy))


@dataclass(frozen=True)
class AnalyticDensity:
    components: tuple[GaussianComponent, ...]
    time_varying: bool = False

    def __call__(self, points: np.ndarray, t: float = 0.0) -> np.ndarray:
        p = np.atleast_2d(np.asarray(points, dtype=float))
        out = np.zeros(len(p))
        for comp in self.components:
            out += comp(p, t)
        return out

    def at(self, t: float) -> Callable[[np.ndarray], np.ndarray]:
        """Freeze time, giving a plain point sampler."""
        return lambda points: self(points, t)


def eval_density(d: AnalyticDensity, x: Sequence[float], t: float = 0.0) -> float:
    return float(d(np.asarray(x, dtype=float).reshape(1, 2), t)[0])


# Paper mixture: four static bumps plus a pair that trades mass sinusoidally.
_MEANS = [(1.3, -0.75), (-1.2, 0.7), (1.0, 0.8), (-1.0, -0.8), (-1.0, -0.8), (1.0, 0.8)]
_SHAPES = [
    (0.3**2, 0.8**2),
    (0.3**2, 0.8**2),
    (0.8**2, 0.4**2),
    (0.4**2, 0.8**2),
    (0.85**2, 0.2**2),
    (0.85**2, 0.2**2),
]
TV_FREQUENCY = 0.12


def _a5(t: float) -> float:
    return 50.0 * (1.0 + math.sin(TV_FREQUENCY * t))


def _a6(t: float) -> float:
    return 50.0 * (1.0 - math.sin(TV_FREQUENCY * t))


def paper_ti_density() -> AnalyticDensity:
    amps: list[Amplitude] = [150.0, 150.0, 150.0, 150.0, 50.0, 50.0]
    return AnalyticDensity(
        tuple(GaussianComponent(a, m, s) for a, m, s in zip(amps, _MEANS, _SHAPES))
    )


def paper_tv_density() -> AnalyticDensity:
    amps: list[Amplitude] = [150.0, 150.0, 150.0, 150.0, _a5, _a6]
    return AnalyticDensity(
        tuple(GaussianComponent(a, m, s) for a, m, s in zip(amps, _MEANS, _SHAPES)),
        time_varying=True,
    )


def density_from_components(specs: Sequence[dict]) -> AnalyticDensity:
    """Build a static mixture from ``{"amplitude", "mean", "shape"}`` records."""
    comps = []
    for i, s in enumerate(specs):
        try:
            comps.append(
                GaussianComponent(float(s["amplitude"]), tuple(map(float, s["mean"])), tuple(map(float, s["shape"])))
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ValueError(f"density.components[{i}]: {exc}") from exc
    if not comps:
        raise ValueError("density.components must not be empty")
    return AnalyticDensity(tuple(comps))


@dataclass
class SurrogateDensity:
    """Lower-confidence field ``max(mu - sqrt(beta) * sigma, eps_pos)``."""

    mean_fn: Callable[[np.ndarray], np.ndarray]
    std_fn: Callable[[np.ndarray], np.ndarray]
    beta: float
    eps_pos: float = field(default=EPS_POS)

    def __post_init__(self):
        if self.beta < 0:
            raise ValueError("beta must be non-negative")

    def __call__(self, points: np.ndarray) -> np.ndarray:
        return surrogate_values(self.mean_fn(points), self.std_fn(points), self.beta, self.eps_pos)


def surrogate_values(mean: np.ndarray, std: np.ndarray, beta: float, eps_pos: float = EPS_POS) -> np.ndarray:
    return np.maximum(np.asarray(mean) - math.sqrt(beta) * np.asarray(std), eps_pos)


def eval_surrogate(s: SurrogateDensity, x: Sequence[float]) -> float:
    return float(s(np.asarray(x, dtype=float).reshape(1, 2))[0])
