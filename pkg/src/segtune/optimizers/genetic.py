"""Genetic algorithm over grid indices.

Individuals are index tuples (one gene per dimension). Each generation keeps
the best individual, then fills the population with children of
tournament-selected parents: one-point crossover with probability
``crossover``, followed by per-gene uniform resampling with probability
``mutation``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..errors import ConfigError
from ..paramspace import ParameterSpace
from .base import SearchOptimizer

Individual = tuple[int, ...]


@dataclass(frozen=True)
class GAConfig:
    population: int = 10
    generations: int = 10
    crossover: float = 0.5
    mutation: float = 0.3
    elitism: int = 1
    tournament: int = 2

    def __post_init__(self) -> None:
        if self.population < 2:
            raise ConfigError("GA population must be >= 2")
        if self.generations < 1:
            raise ConfigError("GA needs at least one generation")
        if not (0.0 <= self.crossover <= 1.0 and 0.0 <= self.mutation <= 1.0):
            raise ConfigError("GA crossover/mutation rates must lie in [0, 1]")
        if not 0 <= self.elitism < self.population:
            raise ConfigError("GA elitism must be in [0, population)")
        if self.tournament < 1:
            raise ConfigError("GA tournament size must be >= 1")


def one_point_crossover(a: Sequence, b: Sequence, cut: int) -> tuple[tuple, tuple]:
    """Swap the tails after position ``cut``: ``a[:cut] + b[cut:]`` and ``b[:cut] + a[cut:]``."""
    a, b = tuple(a), tuple(b)
    return a[:cut] + b[cut:], b[:cut] + a[cut:]


def mutate(ind: Individual, sizes: Sequence[int], rate: float, rng: np.random.Generator) -> Individual:
    genes = list(ind)
    for i, n in enumerate(sizes):
        if rng.random() < rate:
            genes[i] = int(rng.integers(0, n))
    return tuple(genes)


def tournament_select(population: Sequence[Individual], scores: Sequence[float], size: int,
                      rng: np.random.Generator) -> Individual:
    picks = rng.integers(0, len(population), size=size)
    winner = int(picks[0])
    for p in picks[1:]:
        if scores[int(p)] > scores[winner]:
            winner = int(p)
    return population[winner]


def ga_evolve(population: Sequence[Individual], scores: Sequence[float], config: GAConfig,
              sizes: Sequence[int], rng: np.random.Generator) -> list[Individual]:
    if len(population) != config.population or len(scores) != config.population:
        raise ConfigError(f"population of {len(population)} does not match configured {config.population}")
    k = len(sizes)
    ranked = sorted(range(len(population)), key=lambda i: -scores[i])
    nxt = [population[i] for i in ranked[:config.elitism]]
    while len(nxt) < config.population:
        p1 = tournament_select(population, scores, config.tournament, rng)
        p2 = tournament_select(population, scores, config.tournament, rng)
        if k >= 2 and rng.random() < config.crossover:
            c1, c2 = one_point_crossover(p1, p2, int(rng.integers(1, k)))
        else:
            c1, c2 = p1, p2
        for child in (c1, c2):
            if len(nxt) < config.population:
                nxt.append(mutate(child, sizes, config.mutation, rng))
    return nxt


class GeneticAlgorithm(SearchOptimizer):
    name = "ga"

    def __init__(self, space: ParameterSpace, budget: int = 100, seed: int | None = 0,
                 config: GAConfig | None = None, **overrides) -> None:
        super().__init__(space, budget, seed)
        self.config = config or GAConfig(**overrides)
        self.generation = 0

    def _search(self):
        cfg = self.config
        sizes = self.space.sizes
        population = [self.space.random_indices(self.rng) for _ in range(cfg.population)]
        while True:
            scores = yield [self.space.encode_indices(ind) for ind in population]
            self.generation += 1
            if self.generation >= cfg.generations:
                return
            population = ga_evolve(population, scores, cfg, sizes, self.rng)
