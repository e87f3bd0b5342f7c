"""The learn-and-cover loop: surrogate, Lloyd step, exploration sample, measurement, update."""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import geometry
from .config import ScenarioConfig
from .fields import AnalyticDensity, density_from_components, paper_ti_density, paper_tv_density, surrogate_values
from .geometry import DomainGrid
from .gp import GpModel, fit_hyperparams
from .kernel import sample_spectral
from .metrics import CvtOracle, StepMetrics, confidence_coverage, mse, regret
from .rf import RfModel

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class BetaSchedule:
    """Confidence multiplier: ``2 log(|D| t^2 pi^2 / (6 delta))`` or a constant ``sqrt_beta^2``."""

    mode: str
    domain_cardinality: int
    delta: float = 0.05
    constant_sqrt_beta: float = 1.0

    def __post_init__(self):
        if self.mode not in ("theoretical", "constant"):
            raise ValueError(f"unknown beta mode {self.mode!r}")
        if not 0 < self.delta <= 1:
            raise ValueError(f"delta must lie in (0, 1], got {self.delta}")

    def __call__(self, t: int) -> float:
        if t < 1:
            raise ValueError("beta is defined for t >= 1")
        if self.mode == "constant":
            return self.constant_sqrt_beta**2
        return 2.0 * math.log(self.domain_cardinality * t * t * math.pi**2 / (6.0 * self.delta))


def beta(schedule: BetaSchedule, t: int) -> float:
    return schedule(t)


def select_exploration_point(std: np.ndarray, grid: DomainGrid) -> np.ndarray:
    """Cell center with the largest posterior std; first index wins ties."""
    return grid.points[int(np.argmax(std))].copy()


def measure(values: np.ndarray, noise_std: float, rng: np.random.Generator) -> np.ndarray:
    """Add one N(0, noise_std^2) draw per value, consumed in order from ``rng``."""
    values = np.asarray(values, dtype=float)
    return values + noise_std * rng.standard_normal(values.shape)


def make_density(cfg: ScenarioConfig) -> AnalyticDensity:
    if cfg.density.preset == "ti_gmm":
        return paper_ti_density()
    if cfg.density.preset == "tv_gmm":
        return paper_tv_density()
    return density_from_components(cfg.density.components)


# ---------------------------------------------------------------------------
# learners on the grid


class _Learner:
    """Grid posterior plus update; subclasses own the actual model."""

    keeps_history = False

    def grid_posterior(self) -> tuple[np.ndarray, np.ndarray]:
        raise NotImplementedError

    def update(self, X: np.ndarray, y: np.ndarray, t: int) -> list[str]:
        raise NotImplementedError

    def info_gain(self) -> float | None:
        return None

    def state_dict(self) -> dict:
        return {}


class GpLearner(_Learner):
    keeps_history = True

    def __init__(self, cfg: ScenarioConfig, grid: DomainGrid):
        g = cfg.gp
        noise = max(cfg.noise_std**2, 1e-10)
        self.model = GpModel(g.lengthscale, g.magnitude, noise, rho=g.rho, mean=g.mean)
        self.window = cfg.data_window
        self.refit = g.refit
        self.bounds = g.lengthscale_bounds
        self.tracker = self.model.track(grid.points)

    def grid_posterior(self):
        return self.tracker.mean, np.sqrt(self.tracker.var)

    def update(self, X, y, t):
        m = self.model
        if self.window == "current":
            allX, ally = X, y
        else:
            allX, ally = np.vstack([m.train_X, X]), np.concatenate([m.train_y, y])
        if self.refit and len(ally) >= 2:
            rho, ls = fit_hyperparams(allX, ally, m.magnitude, m.noise, self.bounds, mean=m.mean)
            m.rho, m.lengthscale = rho, ls
            m.fit(allX, ally)
        elif self.window == "current":
            m.fit(X, y)
        else:
            m.add(X, y)
        return []

    def info_gain(self):
        return self.model.info_gain()

    def state_dict(self):
        return self.model.state_dict()


class RfLearner(_Learner):
    def __init__(self, cfg: ScenarioConfig, grid: DomainGrid, online: bool):
        r = cfg.rf
        fmap = sample_spectral(r.lengthscale, r.num_features, cfg.seeds.features)
        self.model = RfModel(
            fmap,
            r.reg,
            r.magnitude,
            mode="online" if online else "batch",
            gain_noise=r.gain_noise,
            literal=r.literal_update,
        )
        self.online = online
        self.window = cfg.data_window
        self.keeps_history = not online and self.window == "all"
        self.noise = max(cfg.noise_std**2, 1e-10)
        self.grid_feats = fmap(grid.points)
        self.hist_X: list[np.ndarray] = []
        self.hist_y: list[np.ndarray] = []
        self._post = self.model.predict(None, feats=self.grid_feats)

    def grid_posterior(self):
        mean, var = self._post
        return mean, np.sqrt(var)

    def update(self, X, y, t):
        flags = []
        if self.online:
            skipped = self.model.update_block(X, y)
            if skipped:
                flags.append(f"gain_skipped:{skipped}")
        elif self.window == "current":
            self.model.fit(X, y)
        else:
            self.hist_X.append(X)
            self.hist_y.append(y)
            self.model.fit(np.vstack(self.hist_X), np.concatenate(self.hist_y))
        self._post = self.model.predict(None, feats=self.grid_feats)
        return flags

    def info_gain(self):
        return self.model.info_gain(self.noise)

    def state_dict(self):
        d = self.model.state_dict()
        d["history_len"] = sum(len(y) for y in self.hist_y)
        return d


class TruthLearner(_Learner):
    """Known-density baseline: mean is the current true field, zero uncertainty."""

    def __init__(self, density: AnalyticDensity, grid: DomainGrid):
        self.density = density
        self.grid = grid
        self._mean = density(grid.points, 1)

    def grid_posterior(self):
        return self._mean, np.zeros(self.grid.size)

    def update(self, X, y, t):
        self._mean = self.density(self.grid.points, t + 1)
        return []


def make_learner(cfg: ScenarioConfig, grid: DomainGrid, density: AnalyticDensity) -> _Learner:
    if cfg.learner == "gp":
        return GpLearner(cfg, grid)
    if cfg.learner == "rfgp":
        return RfLearner(cfg, grid, online=False)
    if cfg.learner == "orfgp":
        return RfLearner(cfg, grid, online=True)
    return TruthLearner(density, grid)


# ---------------------------------------------------------------------------


@dataclass
class SimulationState:
    t: int
    positions: np.ndarray
    learner: _Learner
    noise_rng: np.random.Generator
    partition: geometry.VoronoiPartition | None = None
    history: list = field(default_factory=list)


class Simulation:
    """One scenario: owns grid, true density, schedule, learner and RNG streams."""

    def __init__(self, cfg: ScenarioConfig, oracle: CvtOracle | None = None):
        self.cfg = cfg
        self.grid = geometry.build_grid(cfg.domain.bounds, cfg.domain.h)
        self.density = make_density(cfg)
        self.schedule = BetaSchedule(
            cfg.beta.mode, self.grid.size, cfg.beta.delta, cfg.beta.sqrt_beta
        )
        self.oracle = oracle
        if cfg.initial_positions is not None:
            x0 = np.array(cfg.initial_positions, dtype=float)
        else:
            rng = np.random.default_rng(cfg.seeds.init)
            lo = np.array([self.grid.x_min, self.grid.y_min])
            hi = np.array([self.grid.x_max, self.grid.y_max])
            x0 = rng.uniform(lo, hi, size=(cfg.n, 2))
        self.state = SimulationState(
            t=0,
            positions=x0,
            learner=make_learner(cfg, self.grid, self.density),
            noise_rng=np.random.default_rng(cfg.seeds.noise),
        )

    def truth(self, t: int) -> np.ndarray:
        return self.density(self.grid.points, t)

    def step(self) -> StepMetrics:
        """Advance one time step and return its metrics."""
        cfg, grid, st = self.cfg, self.grid, self.state
        t = st.t + 1
        flags: list[str] = []
        beta_t = self.schedule(t)
        mean_prev, std_prev = st.learner.grid_posterior()
        f_hat = surrogate_values(mean_prev, std_prev, beta_t, cfg.eps_pos)

        st.partition = geometry.assign_voronoi(grid, st.positions)
        c, empty = geometry.centroids(st.partition, f_hat, grid)
        if np.any(empty):
            flags.append("empty_cell")
        positions = geometry.control_step(
            st.positions,
            c,
            cfg.control.kappa,
            cfg.control.dt,
            cfg.control.inner_steps,
            grid,
            density=f_hat if cfg.control.inner_steps > 1 else None,
        )
        x_explore = select_exploration_point(std_prev, grid)

        sample_X = np.vstack([positions, x_explore])
        y = measure(self.density(sample_X, t), cfg.noise_std, st.noise_rng)

        tic = time.perf_counter()
        flags += st.learner.update(sample_X, y, t)
        update_ms = (time.perf_counter() - tic) * 1e3

        f_t = self.truth(t)
        mean_t, _ = st.learner.grid_posterior()
        partition = geometry.assign_voronoi(grid, positions)
        cost_true = geometry.locational_cost(positions, f_t, grid, partition)
        cost_sur = geometry.locational_cost(positions, f_hat, grid, partition)
        r = None
        if self.oracle is not None:
            r, clamped = regret(cost_true, self.oracle)
            if clamped:
                flags.append("regret_floor")
        st.t, st.positions, st.partition = t, positions, partition
        if not grid.contains(positions):
            flags.append("outside_domain")
        return StepMetrics(
            t=t,
            cost_true=cost_true,
            cost_surrogate=cost_sur,
            regret=r,
            mse=mse(f_t, mean_t),
            gamma=st.learner.info_gain(),
            coverage_fraction=confidence_coverage(f_t, mean_prev, std_prev, beta_t),
            update_ms=update_ms,
            positions=positions.copy(),
            flags=flags,
        )

    def run(self, steps: int | None = None, callback=None) -> list[StepMetrics]:
        out = []
        for _ in range(self.cfg.T if steps is None else steps):
            m = self.step()
            out.append(m)
            if callback is not None:
                callback(m)
        return out


def orc_step(sim: Simulation) -> tuple[SimulationState, StepMetrics]:
    m = sim.step()
    return sim.state, m
