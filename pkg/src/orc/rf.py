"""Random-feature GP: batch closed form and the online rank-one recursion.

Both share a Bayesian linear model ``y = phi(x) . theta + noise`` with prior
``theta ~ N(0, magnitude * I)``.
"""

from __future__ import annotations

import math

import numpy as np
from scipy import linalg

from .kernel import RandomFeatureMap


class RfModel:
    """Weight posterior ``(theta, Sigma)`` over a frozen feature map.

    ``reg`` is the ridge term of the batch closed form.  ``gain_noise`` is the
    variance added to the online gain denominator (``None`` means ``reg``,
    which makes sequential updates reproduce the batch posterior).  With
    ``literal=True`` the denominator is ``phi^T Sigma phi`` alone.
    """

    def __init__(
        self,
        fmap: RandomFeatureMap,
        reg: float,
        magnitude: float,
        mode: str = "online",
        gain_noise: float | None = None,
        literal: bool = False,
    ):
        if not (reg > 0 and magnitude > 0):
            raise ValueError("reg and magnitude must be positive")
        if mode not in ("online", "batch"):
            raise ValueError(f"unknown mode {mode!r}")
        self.fmap = fmap
        self.reg = float(reg)
        self.magnitude = float(magnitude)
        self.mode = mode
        self.gain_noise = self.reg if gain_noise is None else float(gain_noise)
        self.literal = literal
        d = fmap.dim
        self.theta = np.zeros(d)
        self.Sigma = self.magnitude * np.eye(d)
        # Phi^T Phi of the observations the posterior is conditioned on (information gain)
        self.gram = np.zeros((d, d))
        self.n_obs = 0
        self.skipped = 0

    @property
    def dim(self) -> int:
        return self.fmap.dim

    def reset(self):
        self.theta = np.zeros(self.dim)
        self.Sigma = self.magnitude * np.eye(self.dim)
        self.gram = np.zeros((self.dim, self.dim))
        self.n_obs = 0
        self.skipped = 0

    def predict(self, points: np.ndarray, feats: np.ndarray | None = None) -> tuple[np.ndarray, np.ndarray]:
        """Mean ``phi . theta`` and variance ``phi^T Sigma phi`` (floored at 0).

        ``feats`` may carry precomputed features for ``points``.
        """
        phi = self.fmap(points) if feats is None else feats
        mean = phi @ self.theta
        var = np.einsum("ij,ij->i", phi @ self.Sigma, phi)
        return mean, np.maximum(var, 0.0)

    def fit(self, X: np.ndarray, y: np.ndarray) -> "RfModel":
        """Batch posterior from ``(X, y)`` alone, discarding the current state."""
        X = np.asarray(X, dtype=float).reshape(-1, 2)
        y = np.asarray(y, dtype=float).reshape(-1)
        phi = self.fmap(X)
        g = phi.T @ phi
        a = g + (self.reg / self.magnitude) * np.eye(self.dim)
        c = linalg.cho_factor(a, lower=True, check_finite=False)
        self.theta = linalg.cho_solve(c, phi.T @ y, check_finite=False)
        sigma = self.reg * linalg.cho_solve(c, np.eye(self.dim), check_finite=False)
        self.Sigma = 0.5 * (sigma + sigma.T)
        self.gram = g
        self.n_obs = len(y)
        return self

    def update(self, x, y: float) -> bool:
        """Absorb one observation; returns False when a degenerate literal gain was skipped."""
        phi = self.fmap(np.asarray(x, dtype=float).reshape(1, 2))[0]
        g = self.Sigma @ phi
        s = float(phi @ g)
        if not self.literal:
            s += self.gain_noise
        self.gram += np.outer(phi, phi)
        self.n_obs += 1
        # literal gain is 0/0 once phi lies in the numerical null space of Sigma
        if s <= 1e-12 * self.magnitude:
            self.skipped += 1
            return False
        self.theta = self.theta + g * ((y - phi @ self.theta) / s)
        sigma = self.Sigma - np.outer(g, g) / s
        self.Sigma = 0.5 * (sigma + sigma.T)
        return True

    def update_block(self, X: np.ndarray, y: np.ndarray) -> int:
        """Sequential updates in row order; returns the number of skipped rows."""
        X = np.asarray(X, dtype=float).reshape(-1, 2)
        y = np.asarray(y, dtype=float).reshape(-1)
        return sum(not self.update(xi, yi) for xi, yi in zip(X, y))

    def info_gain(self, noise: float) -> float:
        """``log |I + (magnitude / noise) Phi^T Phi|`` over all absorbed observations."""
        c3 = self.magnitude / noise
        sign, val = np.linalg.slogdet(np.eye(self.dim) + c3 * self.gram)
        return float(val) if sign > 0 else math.nan

    def state_dict(self) -> dict:
        return {
            "mode": self.mode,
            "theta": self.theta.tolist(),
            "Sigma": self.Sigma.tolist(),
            "n_obs": self.n_obs,
        }


def rf_batch_fit(fmap: RandomFeatureMap, X, y, reg: float, magnitude: float) -> RfModel:
    return RfModel(fmap, reg, magnitude, mode="batch").fit(X, y)


def rf_predict(model: RfModel, x) -> tuple[float, float]:
    m, v = model.predict(np.asarray(x, dtype=float).reshape(1, 2))
    return float(m[0]), float(v[0])


def orf_update(model: RfModel, x, y: float) -> RfModel:
    model.update(x, y)
    return model


def orf_update_block(model: RfModel, X, y) -> RfModel:
    model.update_block(X, y)
    return model


def info_gain_bound(num_pairs: int, magnitude: float, noise: float, n_obs: int) -> float:
    """Sub-linear ceiling ``2D log((D + c3 T) / D)`` on the RF information gain."""
    c3 = magnitude / noise
    return 2 * num_pairs * math.log((num_pairs + c3 * n_obs) / num_pairs)
