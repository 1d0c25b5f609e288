"""Shared ask/tell machinery.

Subclasses propose unit-cube vectors (``_propose``) and consume scalars
(``_update``). The base class decodes proposals to grid points, keeps the
evaluation history and incumbent, and enforces the budget: a batch is cut
short so that it never contains more previously unseen grid points than the
budget has left. Seen points are free (the runner answers them from cache).
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..errors import Finished, ProtocolError
from ..paramspace import ParameterPoint, ParameterSpace

Key = tuple[int, ...]


@dataclass(frozen=True)
class HistoryEntry:
    vector: np.ndarray
    point: ParameterPoint
    scalar: float


class Optimizer:
    name = "base"
    #: consecutive batches without a fresh point before giving up
    max_stall = 200

    def __init__(self, space: ParameterSpace, budget: int = 100, seed: int | None = 0) -> None:
        if budget < 1:
            raise ValueError(f"budget must be >= 1, got {budget}")
        self.space = space
        self.budget = int(budget)
        self.seed = seed
        self.rng = np.random.default_rng(seed)
        self.history: list[HistoryEntry] = []
        self.best: HistoryEntry | None = None
        self._seen: dict[Key, float] = {}
        self._pending: tuple[list[np.ndarray], list[ParameterPoint], bool] | None = None
        self._stall = 0
        self.asks = 0

    # -- public protocol ---------------------------------------------------

    @property
    def remaining(self) -> int:
        return self.budget - len(self.history)

    @property
    def best_scalar(self) -> float:
        return self.best.scalar if self.best is not None else float("-inf")

    def seen(self, key: Key) -> bool:
        return key in self._seen

    def ask(self) -> list[ParameterPoint]:
        if self._pending is not None:
            raise ProtocolError("ask called twice without tell")
        if self.remaining <= 0 or self._stall >= self.max_stall:
            raise Finished(self.name)
        vectors = [np.clip(np.asarray(v, dtype=float), 0.0, 1.0) for v in self._propose()]
        if not vectors:
            raise Finished(self.name)
        points: list[ParameterPoint] = []
        fresh: set[Key] = set()
        for v in vectors:
            key = self.space.decode_indices(v)
            if key not in self._seen and key not in fresh:
                if len(fresh) >= self.remaining:
                    break
                fresh.add(key)
            points.append(self.space.point_at(key))
        truncated = len(points) < len(vectors)
        self._stall = 0 if fresh else self._stall + 1
        self._pending = (vectors[:len(points)], points, truncated)
        self.asks += 1
        return points

    def tell(self, results: Sequence) -> None:
        """Accept results for the last batch, in ask order.

        Items may be :class:`EvaluationResult` objects or bare scalars.
        """
        if self._pending is None:
            raise ProtocolError("tell called without a pending ask")
        vectors, points, truncated = self._pending
        if len(results) != len(points):
            raise ProtocolError(f"expected {len(points)} results, got {len(results)}")
        scalars = []
        for p, r in zip(points, results):
            if hasattr(r, "scalar"):
                if r.point is not None and tuple(r.point.values) != tuple(p.values):
                    raise ProtocolError(f"result for {r.point.values} does not match asked {p.values}")
                scalars.append(float(r.scalar))
            else:
                scalars.append(float(r))
        self._pending = None
        for v, p, s in zip(vectors, points, scalars):
            key = self.space.indices_of(p)
            if key in self._seen:
                continue
            self._seen[key] = s
            entry = HistoryEntry(self.space.encode_indices(key), p, s)
            self.history.append(entry)
            if self.best is None or s > self.best.scalar:
                self.best = entry
        self._update(vectors, scalars, truncated)

    # -- subclass hooks ------------------------------------------------------

    def _propose(self) -> list[np.ndarray]:
        raise NotImplementedError

    def _update(self, vectors: list[np.ndarray], scalars: list[float], truncated: bool) -> None:
        raise NotImplementedError

    # -- helpers -----------------------------------------------------------

    def _random_vector(self) -> np.ndarray:
        return self.rng.random(self.space.k)

    def _known(self, v: np.ndarray) -> float | None:
        return self._seen.get(self.space.decode_indices(v))


class RandomSearch(Optimizer):
    """Uniform random sampling; the baseline for the other algorithms."""

    name = "random"

    def _propose(self) -> list[np.ndarray]:
        return [self._random_vector()]

    def _update(self, vectors, scalars, truncated) -> None:
        pass


class SearchOptimizer(Optimizer):
    """Optimizer whose search is a generator.

    ``_search`` yields batches of unit vectors and receives the matching
    scalars back, so each algorithm reads as one straight-line loop.
    """

    def __init__(self, space: ParameterSpace, budget: int = 100, seed: int | None = 0) -> None:
        super().__init__(space, budget, seed)
        self._gen = None
        self._batch: list[np.ndarray] = []

    def _search(self):
        raise NotImplementedError

    def _propose(self) -> list[np.ndarray]:
        if self._gen is None:
            self._gen = self._search()
            try:
                self._batch = list(next(self._gen))
            except StopIteration:
                self._batch = []
        return list(self._batch)

    def _update(self, vectors, scalars, truncated) -> None:
        if truncated or self._gen is None:
            return
        try:
            self._batch = list(self._gen.send(list(scalars)))
        except StopIteration:
            self._batch = []
