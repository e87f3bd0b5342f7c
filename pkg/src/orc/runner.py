"""Run orchestration and artifact writing (metrics CSV, final state, manifest)."""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import platform
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .config import ScenarioConfig
from .geometry import build_grid
from .loop import Simulation, make_density
from .metrics import CvtOracle, StepMetrics, cvt_oracle, regret_constants

logger = logging.getLogger(__name__)

BASE_COLUMNS = [
    "t",
    "cost_true",
    "cost_surrogate",
    "regret",
    "mse",
    "gamma",
    "coverage_fraction",
    "update_ms",
    "flags",
]


class RunFailed(RuntimeError):
    """A step produced non-finite metrics or left the domain; partial outputs were written."""


def csv_columns(n: int) -> list[str]:
    cols = list(BASE_COLUMNS)
    for i in range(1, n + 1):
        cols += [f"x_{i}", f"y_{i}"]
    return cols


def _fmt(v) -> str:
    if v is None:
        return ""
    return repr(float(v))


def metrics_row(m: StepMetrics, record_timing: bool) -> list[str]:
    row = [
        str(m.t),
        _fmt(m.cost_true),
        _fmt(m.cost_surrogate),
        _fmt(m.regret),
        _fmt(m.mse),
        _fmt(m.gamma),
        _fmt(m.coverage_fraction),
        _fmt(m.update_ms) if record_timing else "",
        ";".join(m.flags),
    ]
    for x, y in m.positions:
        row += [_fmt(x), _fmt(y)]
    return row


def metrics_csv(steps: list[StepMetrics], n: int, record_timing: bool = False) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(csv_columns(n))
    for m in steps:
        w.writerow(metrics_row(m, record_timing))
    return buf.getvalue()


def compute_oracle(cfg: ScenarioConfig) -> CvtOracle:
    grid = build_grid(cfg.domain.bounds, cfg.domain.h)
    density = make_density(cfg)
    return cvt_oracle(density.at(0), grid, cfg.n, cfg.oracle.restarts, cfg.seeds.oracle)


@dataclass
class RunArtifacts:
    steps: list[StepMetrics]
    csv_text: str
    manifest: dict
    final_state: dict
    out_dir: Path | None = None
    files: dict = field(default_factory=dict)


def run_scenario(cfg: ScenarioConfig, out_dir: str | Path | None = None, oracle: CvtOracle | None = None) -> RunArtifacts:
    """Run ``cfg.T`` steps, writing ``metrics.csv``, ``final_state.json`` and ``manifest.json``.

    Raises :class:`RunFailed` after writing partial outputs when a step has
    non-finite metrics or a robot leaves the domain.
    """
    tic = time.perf_counter()
    density = make_density(cfg)
    if oracle is None and cfg.oracle.enabled:
        if density.time_varying:
            logger.warning("regret oracle skipped: density is time-varying")
        else:
            oracle = compute_oracle(cfg)
    sim = Simulation(cfg, oracle=oracle)
    steps: list[StepMetrics] = []
    error = None
    for _ in range(cfg.T):
        m = sim.step()
        steps.append(m)
        if not m.finite():
            error = f"non-finite metrics at t={m.t}"
            break
        if "outside_domain" in m.flags:
            error = f"robot outside the domain at t={m.t}"
            break

    grid = sim.grid
    manifest = {
        "name": cfg.name,
        "status": "ok" if error is None else "failed",
        "error": error,
        "steps_completed": len(steps),
        "config_hash": cfg.config_hash(),
        "config": cfg.to_dict(),
        "seeds": cfg.to_dict()["seeds"],
        "code_version": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "grid": {"h": grid.h, "nx": grid.nx, "ny": grid.ny, "cardinality": grid.size},
        "constants": regret_constants(grid, max(cfg.noise_std**2, 1e-300)),
        "oracle": None
        if oracle is None
        else {
            "optimal_cost": oracle.optimal_cost,
            "optimal_positions": oracle.optimal_positions.tolist(),
            "restarts": oracle.restarts,
            "seed": cfg.seeds.oracle,
        },
        "csv_columns": csv_columns(cfg.n),
        "wall_time_s": time.perf_counter() - tic,
    }
    final_state = {
        "t": sim.state.t,
        "positions": sim.state.positions.tolist(),
        "learner": cfg.learner,
        "learner_state": sim.state.learner.state_dict(),
    }
    text = metrics_csv(steps, cfg.n, cfg.output.record_timing)
    art = RunArtifacts(steps, text, manifest, final_state)
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        files = {
            "metrics": out / "metrics.csv",
            "final_state": out / "final_state.json",
            "manifest": out / "manifest.json",
        }
        files["metrics"].write_text(text)
        files["final_state"].write_text(json.dumps(final_state, indent=2))
        files["manifest"].write_text(json.dumps(manifest, indent=2, default=_json_default))
        art.out_dir, art.files = out, files
    if error is not None:
        raise RunFailed(error)
    return art


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, float) and math.isinf(o):
        return str(o)
    raise TypeError(f"not JSON serializable: {type(o).__name__}")
