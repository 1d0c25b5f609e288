"""Bayesian optimization with a Matern-5/2 Gaussian process and expected improvement."""
from __future__ import annotations

import math

import numpy as np
from scipy.linalg import cho_solve, cholesky, solve_triangular
from scipy.stats import norm

from ..errors import SurrogateError
from .base import Optimizer

SQRT5 = math.sqrt(5.0)


def matern52(a: np.ndarray, b: np.ndarray, lengthscale: float, variance: float) -> np.ndarray:
    d = np.sqrt(np.maximum(((a[:, None, :] - b[None, :, :]) ** 2).sum(-1), 0.0)) / lengthscale
    return variance * (1.0 + SQRT5 * d + 5.0 / 3.0 * d * d) * np.exp(-SQRT5 * d)


def expected_improvement(mu: np.ndarray, sigma: np.ndarray, best: float) -> np.ndarray:
    """EI for maximization; zero-variance points score ``max(mu - best, 0)``."""
    mu = np.asarray(mu, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    gain = mu - best
    ei = np.maximum(gain, 0.0)
    ok = sigma > 1e-12
    z = gain[ok] / sigma[ok]
    ei[ok] = gain[ok] * norm.cdf(z) + sigma[ok] * norm.pdf(z)
    return ei


class GaussianProcess:
    """Exact GP regression with fixed kernel hyperparameters."""

    max_jitter = 1e-4

    def __init__(self, lengthscale: float = 0.2, variance: float = 1.0, noise: float = 1e-6) -> None:
        self.lengthscale = lengthscale
        self.variance = variance
        self.noise = noise

    def fit(self, x: np.ndarray, y: np.ndarray) -> "GaussianProcess":
        self.x = np.asarray(x, dtype=float)
        self.y = np.asarray(y, dtype=float)
        k = matern52(self.x, self.x, self.lengthscale, self.variance)
        jitter = self.noise
        while True:
            try:
                self.chol = cholesky(k + jitter * np.eye(len(k)), lower=True)
                break
            except np.linalg.LinAlgError:
                if jitter >= self.max_jitter:
                    raise SurrogateError(f"covariance not positive definite at jitter {jitter:g}") from None
                jitter = min(jitter * 10.0, self.max_jitter)
        self.alpha = cho_solve((self.chol, True), self.y)
        return self

    def predict(self, xs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        ks = matern52(self.x, np.asarray(xs, dtype=float), self.lengthscale, self.variance)
        mu = ks.T @ self.alpha
        v = solve_triangular(self.chol, ks, lower=True)
        var = np.maximum(self.variance - (v * v).sum(0), 0.0)
        return mu, np.sqrt(var)

    def log_marginal_likelihood(self) -> float:
        n = len(self.y)
        return float(-0.5 * self.y @ self.alpha - np.log(np.diag(self.chol)).sum() - 0.5 * n * math.log(2 * math.pi))


def _standardize(y: np.ndarray) -> np.ndarray:
    sd = y.std()
    return (y - y.mean()) / (sd if sd > 0 else 1.0)


def fit_lengthscale(x: np.ndarray, y: np.ndarray, grid: np.ndarray, variance: float, noise: float) -> float:
    """Lengthscale on ``grid`` with the largest log marginal likelihood."""
    best, best_ll = float(grid[0]), -np.inf
    for ls in grid:
        try:
            ll = GaussianProcess(float(ls), variance, noise).fit(x, y).log_marginal_likelihood()
        except SurrogateError:
            continue
        if ll > best_ll:
            best, best_ll = float(ls), ll
    return best


class BayesianOptimizer(Optimizer):
    """Random initial design, then one EI-maximizing candidate per ask.

    Candidates are drawn uniformly, snapped to grid-cell centers and filtered
    to unseen grid points before EI is evaluated.
    """

    name = "boa"

    def __init__(self, space, budget: int = 100, seed: int | None = 0, *, n_init: int = 10,
                 candidates: int = 2048, lengthscale: float = 0.2, variance: float = 1.0,
                 noise: float = 1e-6, refit_every: int | None = 10) -> None:
        super().__init__(space, budget, seed)
        self.n_init = n_init
        self.n_candidates = candidates
        self.lengthscale = lengthscale
        self.variance = variance
        self.noise = noise
        self.refit_every = refit_every
        self.fallbacks = 0
        self._fitted_at = 0
        self.last_ei: float | None = None

    def _propose(self) -> list[np.ndarray]:
        if len(self.history) < self.n_init:
            return [self._random_vector()]
        return [self.propose()]

    def _update(self, vectors, scalars, truncated) -> None:
        pass

    def observations(self) -> tuple[np.ndarray, np.ndarray]:
        x = np.array([h.vector for h in self.history])
        y = np.array([h.scalar for h in self.history])
        return x, y

    def propose(self) -> np.ndarray:
        x, y = self.observations()
        ys = _standardize(y)
        n = len(y)
        if self.refit_every and n - self._fitted_at >= self.refit_every:
            grid = np.geomspace(0.05, 2.0, 16)
            self.lengthscale = fit_lengthscale(x, ys, grid, self.variance, self.noise)
            self._fitted_at = n
        cand = self.rng.random((self.n_candidates, self.space.k))
        sizes = np.asarray(self.space.sizes)
        idx = np.minimum(np.floor(cand * sizes).astype(np.int64), sizes - 1)
        keep = [i for i in range(len(idx)) if not self.seen(tuple(int(j) for j in idx[i]))]
        if not keep:
            self.fallbacks += 1
            return self._random_vector()
        cand = (idx[keep] + 0.5) / sizes
        try:
            gp = GaussianProcess(self.lengthscale, self.variance, self.noise).fit(x, ys)
        except SurrogateError:
            self.fallbacks += 1
            return self._random_vector()
        mu, sd = gp.predict(cand)
        ei = expected_improvement(mu, sd, float(ys.max()))
        best = int(np.argmax(ei))
        self.last_ei = float(ei[best])
        return cand[best]


def boa_propose(x: np.ndarray, y: np.ndarray, candidates: np.ndarray, lengthscale: float = 0.2,
                variance: float = 1.0, noise: float = 1e-6) -> tuple[int, np.ndarray]:
    """Index of the EI-maximizing candidate (first on ties) and all EI values."""
    ys = _standardize(np.asarray(y, dtype=float))
    gp = GaussianProcess(lengthscale, variance, noise).fit(x, ys)
    mu, sd = gp.predict(candidates)
    ei = expected_improvement(mu, sd, float(ys.max()))
    return int(np.argmax(ei)), ei
