"""Wall-time scaling of the three learners' update cost."""

from __future__ import annotations

import copy
import time
from dataclasses import dataclass

import numpy as np

from .config import ScenarioConfig
from .gp import GpModel
from .kernel import sample_spectral
from .loop import make_density
from .rf import RfModel

DEFAULT_POINTS = {
    "gp": (100, 200, 400, 800),
    "rfgp": (1000, 2000, 4000, 8000, 16000),
    "orfgp": (10, 100, 1000, 10000),
}


@dataclass
class ScalingRow:
    learner: str
    T: int
    median_s: float


def _median_time(fn, reps: int) -> float:
    times = []
    for _ in range(reps):
        tic = time.perf_counter()
        fn()
        times.append(time.perf_counter() - tic)
    return float(np.median(times))


def loglog_slope(T, seconds) -> float:
    return float(np.polyfit(np.log(np.asarray(T, float)), np.log(np.asarray(seconds, float)), 1)[0])


def _data(cfg: ScenarioConfig, count: int, rng: np.random.Generator):
    lo = np.array(cfg.domain.bounds[0::2])
    hi = np.array(cfg.domain.bounds[1::2])
    X = rng.uniform(lo, hi, size=(count, 2))
    y = make_density(cfg)(X, 0) + cfg.noise_std * rng.standard_normal(count)
    return X, y


def bench_scaling(
    cfg: ScenarioConfig,
    learners=("gp", "rfgp", "orfgp"),
    T_points: dict | None = None,
    reps: int = 7,
    seed: int = 0,
) -> tuple[list[ScalingRow], dict[str, float]]:
    """Median update time per learner at each data size, plus log-log slopes.

    ``gp`` and ``rfgp`` time a full refit on ``T`` observations; ``orfgp``
    times one rank-one update after ``T`` earlier updates.
    """
    points = dict(DEFAULT_POINTS)
    points.update(T_points or {})
    rng = np.random.default_rng(seed)
    rows: list[ScalingRow] = []
    slopes: dict[str, float] = {}
    noise = max(cfg.noise_std**2, 1e-10)
    for learner in learners:
        Ts = sorted(points[learner])
        if learner == "gp":
            X, y = _data(cfg, Ts[-1], rng)
            g = cfg.gp
            model = GpModel(g.lengthscale, g.magnitude, noise, g.rho, g.mean)
            times = [_median_time(lambda T=T: model.fit(X[:T], y[:T]), reps) for T in Ts]
        elif learner == "rfgp":
            X, y = _data(cfg, Ts[-1], rng)
            fmap = sample_spectral(cfg.rf.lengthscale, cfg.rf.num_features, cfg.seeds.features)
            model = RfModel(fmap, cfg.rf.reg, cfg.rf.magnitude, mode="batch")
            times = [_median_time(lambda T=T: model.fit(X[:T], y[:T]), reps) for T in Ts]
        elif learner == "orfgp":
            X, y = _data(cfg, Ts[-1] + reps * 20, rng)
            fmap = sample_spectral(cfg.rf.lengthscale, cfg.rf.num_features, cfg.seeds.features)
            model = RfModel(fmap, cfg.rf.reg, cfg.rf.magnitude, mode="online")
            times, done = [], 0
            for T in Ts:
                model.update_block(X[done:T], y[done:T])
                done = T
                # time on a copy so the next prefix still has exactly T' updates
                probe = copy.deepcopy(model)
                per = []
                for r in range(reps):
                    tic = time.perf_counter()
                    for k in range(20):
                        probe.update(X[T + 20 * r + k], y[T + 20 * r + k])
                    per.append((time.perf_counter() - tic) / 20)
                times.append(float(np.median(per)))
        else:
            raise ValueError(f"cannot benchmark learner {learner!r}")
        rows += [ScalingRow(learner, T, s) for T, s in zip(Ts, times)]
        slopes[learner] = loglog_slope(Ts, times)
    return rows, slopes
