"""Exact Gaussian-process regression with a linear mean and RBF kernel.

The factorization of ``K + noise * I`` is kept as a list of block rows of the
lower Cholesky factor.  Appending ``m`` observations to ``N`` stored ones costs
``O(N^2 m)`` and leaves earlier blocks untouched, so the residual
``L^-1 (y - mean)`` and any tracked grid projections ``L^-1 k(X, grid)`` can be
extended in place instead of refactorizing.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import linalg, optimize

from .kernel import rbf

logger = logging.getLogger(__name__)


class GpFactorizationError(RuntimeError):
    """``K + noise * I`` failed to factor; cannot happen with positive noise barring overflow."""


@dataclass
class _Block:
    start: int
    offdiag: np.ndarray  # (m, start): rows of L left of the diagonal block
    diag: np.ndarray  # (m, m) lower triangular


class GridPosterior:
    """Posterior mean/variance at a fixed point set, extended as data arrive."""

    def __init__(self, model: "GpModel", points: np.ndarray):
        self.model = model
        self.points = np.asarray(points, dtype=float)
        self._proj = np.empty((0, len(self.points)))  # L^-1 k(X, points), grown per block
        self.reset()

    def reset(self):
        """Recompute from the model's current blocks (call after hyperparameters change)."""
        self._prior_mean = self.model.mean_fn(self.points)
        self._n = 0
        self._acc_mean = np.zeros(len(self.points))
        self._acc_sq = np.zeros(len(self.points))
        for blk, alpha in zip(self.model._blocks, self.model._alpha_blocks):
            self._extend(blk, alpha)

    def _reserve(self, rows: int):
        if rows > len(self._proj):
            cap = max(rows, 2 * len(self._proj), 64)
            grown = np.empty((cap, len(self.points)))
            grown[: self._n] = self._proj[: self._n]
            self._proj = grown

    def _extend(self, blk: _Block, alpha: np.ndarray):
        m = blk.diag.shape[0]
        xb = self.model.train_X[blk.start : blk.start + m]
        rhs = self.model.magnitude * rbf(xb, self.points, self.model.lengthscale)
        if blk.start:
            rhs -= blk.offdiag @ self._proj[: blk.start]
        new = linalg.solve_triangular(blk.diag, rhs, lower=True, check_finite=False)
        self._reserve(blk.start + m)
        self._proj[blk.start : blk.start + m] = new
        self._n = blk.start + m
        self._acc_mean += new.T @ alpha
        self._acc_sq += np.einsum("ij,ij->j", new, new)

    @property
    def mean(self) -> np.ndarray:
        return self._prior_mean + self._acc_mean

    @property
    def var(self) -> np.ndarray:
        return np.maximum(self.model.magnitude - self._acc_sq, 0.0)


class GpModel:
    """Exact GP posterior; ``mean`` is ``"linear"`` (``rho . x``) or ``"zero"``."""

    def __init__(
        self,
        lengthscale: float,
        magnitude: float,
        noise: float,
        rho=(0.0, 0.0),
        mean: str = "linear",
    ):
        if not (lengthscale > 0 and magnitude > 0 and noise > 0):
            raise ValueError("lengthscale, magnitude and noise must be positive")
        if mean not in ("linear", "zero"):
            raise ValueError(f"unknown mean function {mean!r}")
        self.lengthscale = float(lengthscale)
        self.magnitude = float(magnitude)
        self.noise = float(noise)
        self.mean = mean
        self.rho = np.zeros(2) if mean == "zero" else np.asarray(rho, dtype=float).reshape(2)
        self.train_X = np.empty((0, 2))
        self.train_y = np.empty(0)
        self._blocks: list[_Block] = []
        self._alpha_blocks: list[np.ndarray] = []
        self._trackers: list[GridPosterior] = []

    @property
    def n(self) -> int:
        return len(self.train_y)

    def mean_fn(self, points: np.ndarray) -> np.ndarray:
        return np.atleast_2d(points) @ self.rho

    def kernel(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        return self.magnitude * rbf(a, b, self.lengthscale)

    def clear(self):
        self.train_X = np.empty((0, 2))
        self.train_y = np.empty(0)
        self._blocks.clear()
        self._alpha_blocks.clear()
        for tr in self._trackers:
            tr.reset()

    def _forward(self, rhs: np.ndarray) -> np.ndarray:
        """Solve ``L z = rhs`` block by block."""
        z = np.empty_like(rhs, dtype=float)
        for blk in self._blocks:
            m = blk.diag.shape[0]
            r = rhs[blk.start : blk.start + m]
            if blk.start:
                r = r - blk.offdiag @ z[: blk.start]
            z[blk.start : blk.start + m] = linalg.solve_triangular(blk.diag, r, lower=True, check_finite=False)
        return z

    def add(self, X: np.ndarray, y: np.ndarray) -> None:
        """Append observations and extend the factorization (and any tracked grids)."""
        X = np.asarray(X, dtype=float).reshape(-1, 2)
        y = np.asarray(y, dtype=float).reshape(-1)
        if len(X) != len(y):
            raise ValueError("X and y lengths differ")
        if len(y) == 0:
            return
        start = self.n
        k22 = self.kernel(X, X) + self.noise * np.eye(len(X))
        resid = y - self.mean_fn(X)
        if start:
            b = self._forward(self.kernel(self.train_X, X))  # (N, m)
            k22 -= b.T @ b
            resid -= b.T @ np.concatenate(self._alpha_blocks)
            offdiag = b.T.copy()
        else:
            offdiag = np.empty((len(X), 0))
        try:
            diag = linalg.cholesky(k22, lower=True, check_finite=False)
        except linalg.LinAlgError as exc:
            raise GpFactorizationError(str(exc)) from exc
        alpha = linalg.solve_triangular(diag, resid, lower=True, check_finite=False)
        blk = _Block(start, offdiag, diag)
        self._blocks.append(blk)
        self._alpha_blocks.append(alpha)
        self.train_X = np.vstack([self.train_X, X])
        self.train_y = np.concatenate([self.train_y, y])
        for tr in self._trackers:
            tr._extend(blk, alpha)

    def fit(self, X: np.ndarray, y: np.ndarray) -> "GpModel":
        """Replace the training set and factor it from scratch."""
        self.clear()
        self.add(X, y)
        return self

    def track(self, points: np.ndarray) -> GridPosterior:
        tr = GridPosterior(self, points)
        self._trackers.append(tr)
        return tr

    def posterior(self, points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Posterior mean and variance at ``points``; variance floored at 0."""
        q = np.atleast_2d(np.asarray(points, dtype=float))
        mean = self.mean_fn(q)
        if self.n == 0:
            return mean, np.full(len(q), self.magnitude)
        v = self._forward(self.kernel(self.train_X, q))
        alpha = np.concatenate(self._alpha_blocks)
        mean = mean + v.T @ alpha
        var = self.magnitude - np.einsum("ij,ij->j", v, v)
        return mean, np.maximum(var, 0.0)

    def logdet(self) -> float:
        """``log |K + noise * I|`` from the stored factor."""
        return float(sum(2.0 * np.sum(np.log(np.diag(b.diag))) for b in self._blocks))

    def info_gain(self) -> float:
        """``0.5 log |I + K / noise|`` for the stored inputs."""
        return 0.5 * (self.logdet() - self.n * math.log(self.noise))

    def state_dict(self) -> dict:
        return {
            "lengthscale": self.lengthscale,
            "magnitude": self.magnitude,
            "noise": self.noise,
            "mean": self.mean,
            "rho": self.rho.tolist(),
            "n_train": self.n,
        }


def gp_posterior(model: GpModel, x) -> tuple[float, float]:
    """Scalar convenience wrapper around :meth:`GpModel.posterior`."""
    m, v = model.posterior(np.asarray(x, dtype=float).reshape(1, 2))
    return float(m[0]), float(v[0])


# ---------------------------------------------------------------------------
# hyperparameter fitting


def _profile_nll(X, y, lengthscale, magnitude, noise, mean):
    """NLL with ``rho`` profiled out by generalized least squares.

    Returns ``(nll, rho)`` where ``nll = r^T A^-1 r + log|A|``.
    """
    a = magnitude * rbf(X, X, lengthscale) + noise * np.eye(len(X))
    try:
        c = linalg.cho_factor(a, lower=True, check_finite=False)
    except linalg.LinAlgError:
        return math.inf, np.zeros(2)
    if mean == "linear":
        ainv_h = linalg.cho_solve(c, X, check_finite=False)
        ainv_y = linalg.cho_solve(c, y, check_finite=False)
        rho = np.linalg.lstsq(X.T @ ainv_h, X.T @ ainv_y, rcond=None)[0]
    else:
        rho = np.zeros(2)
    r = y - X @ rho
    quad = float(r @ linalg.cho_solve(c, r, check_finite=False))
    logdet = 2.0 * float(np.sum(np.log(np.diag(c[0]))))
    return quad + logdet, rho


def fit_hyperparams(
    train_X: np.ndarray,
    train_y: np.ndarray,
    magnitude: float,
    noise: float,
    lengthscale_bounds: tuple[float, float] = (0.05, 3.0),
    n_grid: int = 16,
    mean: str = "linear",
    default_lengthscale: float = 0.5,
) -> tuple[np.ndarray, float]:
    """Minimize the marginal NLL over ``(rho, lengthscale)``.

    The lengthscale is searched on a log-spaced grid and then refined with a
    bounded Brent search between the neighbours of the best grid point; ``rho``
    is profiled in closed form for each candidate lengthscale.
    """
    X = np.asarray(train_X, dtype=float).reshape(-1, 2)
    y = np.asarray(train_y, dtype=float).reshape(-1)
    if len(X) < 2:
        raise ValueError("fit_hyperparams needs at least two observations")
    if np.all(np.ptp(X, axis=0) == 0):
        warnings.warn("all training inputs coincide; returning default hyperparameters", RuntimeWarning)
        return np.zeros(2), float(default_lengthscale)
    lo, hi = lengthscale_bounds
    grid = np.geomspace(lo, hi, n_grid)
    scores = [_profile_nll(X, y, ls, magnitude, noise, mean) for ls in grid]
    nlls = np.array([s[0] for s in scores])
    k = int(np.argmin(nlls))
    best_ls, best_nll, best_rho = grid[k], nlls[k], scores[k][1]

    left = math.log(grid[max(k - 1, 0)])
    right = math.log(grid[min(k + 1, n_grid - 1)])
    if right > left:
        res = optimize.minimize_scalar(
            lambda u: _profile_nll(X, y, math.exp(u), magnitude, noise, mean)[0],
            bounds=(left, right),
            method="bounded",
            options={"xatol": 1e-4},
        )
        ls = math.exp(res.x)
        nll, rho = _profile_nll(X, y, ls, magnitude, noise, mean)
        if nll <= best_nll:
            best_ls, best_nll, best_rho = ls, nll, rho
    logger.debug("fitted lengthscale=%.4g rho=%s nll=%.6g", best_ls, best_rho, best_nll)
    return best_rho, float(best_ls)
