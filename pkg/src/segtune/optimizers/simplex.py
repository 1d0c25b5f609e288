"""Nelder-Mead and Parallel Rank Order simplex searches (maximizing).

Both operate on the unit cube; every probe is clamped into ``[0, 1]^k``
before it is decoded to a grid point. Vertex values are the scalars of the
decoded grid points.
"""
from __future__ import annotations

import numpy as np

from .base import SearchOptimizer

ALPHA, GAMMA, RHO, SIGMA = 1.0, 2.0, 0.5, 0.5
INIT_OFFSET = 0.15
REINIT_RADIUS = 0.1
DEGENERATE_TOL = 1e-6


def reflect(centroid: np.ndarray, worst: np.ndarray, alpha: float = ALPHA) -> np.ndarray:
    return np.clip(centroid + alpha * (centroid - worst), 0.0, 1.0)


def initial_simplex(base: np.ndarray, offset: float = INIT_OFFSET) -> np.ndarray:
    """Base vertex plus one vertex per axis shifted by ``offset`` (wrapped into the cube)."""
    k = len(base)
    verts = np.repeat(base[None, :], k + 1, axis=0)
    for i in range(k):
        verts[i + 1, i] = (verts[i + 1, i] + offset) % 1.0
    return verts


def nm_step(verts: np.ndarray, vals: np.ndarray, alpha: float = ALPHA) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Order vertices best-first and return ``(verts, vals, reflected probe)``."""
    order = np.argsort(-vals, kind="stable")
    verts, vals = verts[order], vals[order]
    centroid = verts[:-1].mean(axis=0)
    return verts, vals, reflect(centroid, verts[-1], alpha)


class _SimplexBase(SearchOptimizer):
    def __init__(self, space, budget=100, seed=0, *, alpha=ALPHA, gamma=GAMMA, rho=RHO, sigma=SIGMA):
        super().__init__(space, budget, seed)
        self.alpha, self.gamma, self.rho, self.sigma = alpha, gamma, rho, sigma
        self.reinits = 0

    def _degenerate(self, verts: np.ndarray) -> bool:
        spread = max(float(np.max(np.linalg.norm(verts - v, axis=1))) for v in verts)
        if spread < DEGENERATE_TOL:
            return True
        keys = {self.space.decode_indices(v) for v in verts}
        return len(keys) == 1

    def _around_incumbent(self) -> np.ndarray:
        """k+1 vertices: the incumbent plus k random points within REINIT_RADIUS of it."""
        self.reinits += 1
        center = self.best.vector if self.best is not None else self._random_vector()
        k = self.space.k
        jitter = self.rng.uniform(-REINIT_RADIUS, REINIT_RADIUS, size=(k, k))
        return np.vstack([center, np.clip(center + jitter, 0.0, 1.0)])


class NelderMead(_SimplexBase):
    """Classic Nelder-Mead; one probe per ask."""

    name = "nm"

    def _evaluate_each(self, verts):
        vals = np.empty(len(verts))
        for i, v in enumerate(verts):
            known = self._known(v) if i == 0 and self.reinits else None
            vals[i] = known if known is not None else (yield [v])[0]
        return vals

    def _search(self):
        verts = initial_simplex(self._random_vector())
        vals = yield from self._evaluate_each(verts)
        while True:
            if self._degenerate(verts):
                verts = self._around_incumbent()
                vals = yield from self._evaluate_each(verts)
            verts, vals, xr = nm_step(verts, vals, self.alpha)
            centroid = verts[:-1].mean(axis=0)
            fr = (yield [xr])[0]
            if fr > vals[0]:
                xe = np.clip(centroid + self.gamma * (xr - centroid), 0.0, 1.0)
                fe = (yield [xe])[0]
                verts[-1], vals[-1] = (xe, fe) if fe > fr else (xr, fr)
                continue
            if fr > vals[-2]:
                verts[-1], vals[-1] = xr, fr
                continue
            if fr > vals[-1]:
                xc = np.clip(centroid + self.rho * (xr - centroid), 0.0, 1.0)
                fc = (yield [xc])[0]
                accept = fc >= fr
            else:
                xc = np.clip(centroid + self.rho * (verts[-1] - centroid), 0.0, 1.0)
                fc = (yield [xc])[0]
                accept = fc > vals[-1]
            if accept:
                verts[-1], vals[-1] = xc, fc
                continue
            for i in range(1, len(verts)):
                verts[i] = verts[0] + self.sigma * (verts[i] - verts[0])
                vals[i] = (yield [verts[i]])[0]


class ParallelRankOrder(_SimplexBase):
    """Batched simplex search: all non-best vertices move at once.

    Each iteration reflects every non-best vertex through the best one. If
    the best reflection beats the best vertex, an expansion batch follows and
    the whole simplex takes whichever batch (expanded or reflected) holds the
    higher value. Otherwise every non-best vertex shrinks toward the best.
    """

    name = "pro"

    def _search(self):
        k = self.space.k
        verts = initial_simplex(self._random_vector())
        vals = np.empty(k + 1)
        vals[0] = (yield [verts[0]])[0]
        vals[1:] = (yield list(verts[1:]))
        while True:
            if self._degenerate(verts):
                verts = self._around_incumbent()
                vals = np.empty(k + 1)
                vals[0] = self.best.scalar if self.best is not None else -np.inf
                vals[1:] = (yield list(verts[1:]))
            b = int(np.argmax(vals))
            best = verts[b].copy()
            others = [i for i in range(k + 1) if i != b]
            refl = [np.clip(best + self.alpha * (best - verts[i]), 0.0, 1.0) for i in others]
            fr = np.asarray((yield refl), dtype=float)
            if fr.max() > vals[b]:
                expd = [np.clip(best + self.gamma * (best - verts[i]), 0.0, 1.0) for i in others]
                fe = np.asarray((yield expd), dtype=float)
                moved, fm = (expd, fe) if fe.max() > fr.max() else (refl, fr)
            else:
                moved = [best + self.sigma * (verts[i] - best) for i in others]
                fm = np.asarray((yield moved), dtype=float)
            for j, i in enumerate(others):
                verts[i], vals[i] = moved[j], fm[j]
