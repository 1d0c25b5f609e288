"""Search algorithms behind one ask/tell interface."""
from ..errors import ConfigError
from .base import HistoryEntry, Optimizer, RandomSearch
from .bayes import BayesianOptimizer, GaussianProcess, boa_propose, expected_improvement, matern52
from .genetic import GAConfig, GeneticAlgorithm, ga_evolve, mutate, one_point_crossover
from .simplex import NelderMead, ParallelRankOrder, initial_simplex, nm_step, reflect

ALGORITHMS = {
    "nm": NelderMead,
    "pro": ParallelRankOrder,
    "ga": GeneticAlgorithm,
    "boa": BayesianOptimizer,
    "random": RandomSearch,
}


def make_optimizer(name: str, space, budget: int = 100, seed: int | None = 0, **options) -> Optimizer:
    try:
        cls = ALGORITHMS[name]
    except KeyError:
        raise ConfigError(f"unknown algorithm {name!r}; choose from {sorted(ALGORITHMS)}") from None
    return cls(space, budget, seed, **options)


__all__ = [
    "ALGORITHMS", "BayesianOptimizer", "GAConfig", "GaussianProcess", "GeneticAlgorithm",
    "HistoryEntry", "NelderMead", "Optimizer", "ParallelRankOrder", "RandomSearch",
    "boa_propose", "expected_improvement", "ga_evolve", "initial_simplex", "make_optimizer",
    "matern52", "mutate", "nm_step", "one_point_crossover", "reflect",
]
