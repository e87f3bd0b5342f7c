"""Per-step metrics: coverage cost, regret against a Lloyd-restart oracle, MSE,
confidence coverage and information gain."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import Density, DomainGrid, locational_cost, lloyd
from .rf import RfModel


@dataclass
class StepMetrics:
    t: int
    cost_true: float
    cost_surrogate: float
    regret: float | None
    mse: float
    gamma: float | None
    coverage_fraction: float
    update_ms: float | None
    positions: np.ndarray = field(repr=False)
    flags: list[str] = field(default_factory=list)

    def finite(self) -> bool:
        vals = [self.cost_true, self.cost_surrogate, self.mse, self.coverage_fraction]
        vals += [v for v in (self.regret, self.gamma, self.update_ms) if v is not None]
        return all(math.isfinite(v) for v in vals) and bool(np.all(np.isfinite(self.positions)))


@dataclass(frozen=True)
class CvtOracle:
    optimal_cost: float
    optimal_positions: np.ndarray
    restarts: int
    endpoint_costs: tuple[float, ...] = ()


def cvt_oracle(density: Density, grid: DomainGrid, n: int, restarts: int = 50, seed: int | None = 0) -> CvtOracle:
    """Best Lloyd fixed point over ``restarts`` uniform random initializations."""
    if restarts < 1:
        raise ValueError("restarts must be >= 1")
    f = grid.values(density)
    rng = np.random.default_rng(seed)
    lo = np.array([grid.x_min, grid.y_min])
    hi = np.array([grid.x_max, grid.y_max])
    best_cost, best_x, costs = math.inf, None, []
    for _ in range(restarts):
        x0 = rng.uniform(lo, hi, size=(n, 2))
        x, _ = lloyd(grid, f, x0)
        cost = locational_cost(x, f, grid)
        costs.append(cost)
        if cost < best_cost:
            best_cost, best_x = cost, x
    return CvtOracle(best_cost, best_x, restarts, tuple(costs))


def regret(cost: float, oracle: CvtOracle) -> tuple[float, bool]:
    """``max(cost - l*, 0)`` and whether the floor was applied (oracle beaten)."""
    r = cost - oracle.optimal_cost
    return max(r, 0.0), r < 0


def mse(truth: np.ndarray, mean: np.ndarray) -> float:
    """Grid-averaged squared error between the true field and the posterior mean."""
    d = np.asarray(truth) - np.asarray(mean)
    return float(np.mean(d * d))


def confidence_coverage(truth: np.ndarray, mean: np.ndarray, std: np.ndarray, beta: float) -> float:
    """Fraction of cells with ``|f - mu| <= sqrt(beta) * sigma``."""
    ok = np.abs(np.asarray(truth) - np.asarray(mean)) <= math.sqrt(beta) * np.asarray(std)
    return float(np.mean(ok))


def info_gain(model: RfModel, noise: float) -> float:
    return model.info_gain(noise)


def regret_constants(grid: DomainGrid, noise_var: float) -> dict:
    """``c0 = |D| max|x - x'|^2`` and ``c1 = 8 c0^2 / log(1 + 1/noise_var)`` for the run manifest."""
    diam_sq = (grid.x_max - grid.x_min) ** 2 + (grid.y_max - grid.y_min) ** 2
    c0 = grid.size * diam_sq
    c1 = 8 * c0 * c0 / math.log1p(1.0 / noise_var) if noise_var > 0 else math.inf
    return {"c0": c0, "c1": c1}


def cumulative_regret_ratio(regrets, checkpoints) -> list[float]:
    """``R_T / T`` at each checkpoint ``T`` (1-based step counts)."""
    r = np.cumsum(np.asarray(regrets, dtype=float))
    return [float(r[T - 1] / T) for T in checkpoints]
