"""Genetic algorithm over feature masks with wrapper (train-and-validate) fitness."""
from __future__ import annotations

import logging
import math
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from . import mlp, svm
from .dataset import Dataset, FeatureMask, SplitSpec, apply_mask, split, standardize
from .seeding import derive_seed

log = logging.getLogger(__name__)

FITNESS_FLOOR = 1e-6
STRATEGIES = ("proportional", "tournament", "hof")


@dataclass(frozen=True)
class Chromosome:
    mask: FeatureMask
    fitness: float | None = None

    @property
    def sort_key(self):
        # Higher fitness first; equal fitness prefers the smaller mask value.
        return (-(self.fitness if self.fitness is not None else -math.inf), self.mask.value)


@dataclass(frozen=True)
class GaConfig:
    n_features: int = 10
    population_size: int = 20
    generations: int = 10
    crossover_rate: float = 0.9
    mutation_rate: float | None = None  # None -> 1 / n_features
    elitism_count: int = 1
    master_seed: int = 0
    strategy: str = "tournament"
    tournament_size: int | None = None  # None -> round(0.6 * population_size)

    def __post_init__(self):
        if self.population_size < 4:
            raise ValueError("population_size must be at least 4")
        if self.generations < 1:
            raise ValueError("generations must be at least 1")
        if not 0 <= self.crossover_rate <= 1 or not 0 <= self.effective_mutation_rate <= 1:
            raise ValueError("rates must lie in [0, 1]")
        if self.strategy not in STRATEGIES:
            raise ValueError(f"unknown strategy {self.strategy!r}; choose from {STRATEGIES}")
        if not 0 <= self.elitism_count < self.population_size:
            raise ValueError("elitism_count must be below population_size")
        if self.strategy == "tournament" and not 2 <= self.effective_tournament_size <= self.population_size:
            raise ValueError("tournament size must lie in [2, population_size]")

    @property
    def effective_mutation_rate(self) -> float:
        return 1.0 / self.n_features if self.mutation_rate is None else self.mutation_rate

    @property
    def effective_tournament_size(self) -> int:
        if self.tournament_size is not None:
            return self.tournament_size
        return max(2, int(math.floor(0.6 * self.population_size + 0.5)))


@dataclass(frozen=True)
class GenerationRecord:
    generation: int
    best: Chromosome
    best_fitness: float
    mean_fitness: float
    evaluations: int


@dataclass
class EvolutionLog:
    generations: list[GenerationRecord] = field(default_factory=list)
    best: Chromosome | None = None
    test_accuracy: float | None = None
    hall_of_fame: list[Chromosome] = field(default_factory=list)
    flagged_masks: list[str] = field(default_factory=list)
    repairs: int = 0

    @property
    def best_fitness_curve(self) -> list[float]:
        return [g.best_fitness for g in self.generations]


class FitnessCache:
    """Memoises an evaluator by mask; ``evaluations`` counts real evaluator calls."""

    def __init__(self, evaluator: Callable[[FeatureMask], float], threads: int = 1):
        self.evaluator = evaluator
        self.threads = max(1, int(threads))
        self.values: dict[FeatureMask, float] = {}
        self.flagged: list[FeatureMask] = []
        self.evaluations = 0
        self._lock = threading.Lock()

    def _compute(self, mask: FeatureMask) -> tuple[float, bool]:
        try:
            value = float(self.evaluator(mask))
        except mlp.TrainingDiverged as exc:
            log.warning("fitness of %s set to 0: %s", mask, exc)
            return 0.0, True
        if not 0 <= value <= 1:
            raise ValueError(f"fitness {value} for {mask} is outside [0, 1]")
        return value, False

    def evaluate_many(self, masks: Sequence[FeatureMask]) -> list[float]:
        todo = list(dict.fromkeys(m for m in masks if m not in self.values))
        if self.threads > 1 and len(todo) > 1:
            with ThreadPoolExecutor(self.threads) as pool:
                results = list(pool.map(self._compute, todo))
        else:
            results = [self._compute(m) for m in todo]
        # Insert in first-occurrence order so the flag list is schedule independent.
        with self._lock:
            for m, (value, flagged) in zip(todo, results):
                self.values[m] = value
                self.evaluations += 1
                if flagged:
                    self.flagged.append(m)
        return [self.values[m] for m in masks]

    def __call__(self, mask: FeatureMask) -> float:
        return self.evaluate_many([mask])[0]


def random_mask(n: int, rng: np.random.Generator) -> FeatureMask:
    while True:
        bits = rng.integers(0, 2, size=n).astype(bool)
        if bits.any():
            return FeatureMask(tuple(bits.tolist()))


def init_population(cfg: GaConfig, rng: np.random.Generator) -> list[FeatureMask]:
    return [random_mask(cfg.n_features, rng) for _ in range(cfg.population_size)]


def selection_probabilities(fitnesses) -> np.ndarray:
    f = np.maximum(np.asarray(fitnesses, dtype=np.float64), FITNESS_FLOOR)
    return f / f.sum()


def select_proportional(pop: Sequence[Chromosome], rng: np.random.Generator) -> Chromosome:
    p = selection_probabilities([c.fitness for c in pop])
    return pop[int(rng.choice(len(pop), p=p))]


def select_tournament(pop: Sequence[Chromosome], nts: int, rng: np.random.Generator) -> Chromosome:
    if not 2 <= nts <= len(pop):
        raise ValueError(f"tournament size {nts} outside [2, {len(pop)}]")
    group = rng.choice(len(pop), size=nts, replace=False)
    return min((pop[int(i)] for i in group), key=lambda c: c.sort_key)


def select_hall_of_fame(
    hof: Sequence[Chromosome], pop: Sequence[Chromosome], rng: np.random.Generator
) -> tuple[Chromosome, Chromosome]:
    if not hof:
        raise ValueError("hall of fame is empty")
    a = hof[int(rng.integers(len(hof)))]
    return a, select_proportional(pop, rng)


def crossover(
    a: FeatureMask, b: FeatureMask, rate: float, rng: np.random.Generator, cut: int | None = None
) -> tuple[FeatureMask, FeatureMask, int]:
    """Single-point crossover; returns both children and the number of all-zero repairs."""
    n = len(a)
    if len(b) != n:
        raise ValueError("parents differ in length")
    if rng.random() >= rate:
        return a, b, 0
    if cut is None:
        cut = int(rng.integers(1, n))
    children = [
        FeatureMask(a.bits[:cut] + b.bits[cut:]),
        FeatureMask(b.bits[:cut] + a.bits[cut:]),
    ]
    repairs = 0
    for i, c in enumerate(children):
        if c.popcount == 0:
            children[i] = random_mask(n, rng)
            repairs += 1
    return children[0], children[1], repairs


def mutate(mask: FeatureMask, rate: float, rng: np.random.Generator) -> tuple[FeatureMask, int]:
    flips = rng.random(len(mask)) < rate
    bits = np.logical_xor(mask.as_array(), flips)
    if not bits.any():
        return random_mask(len(mask), rng), 1
    return FeatureMask(tuple(bits.tolist())), 0


def _best(pop: Sequence[Chromosome]) -> Chromosome:
    return min(pop, key=lambda c: c.sort_key)


def evolve(cfg: GaConfig, evaluator, threads: int = 1) -> tuple[Chromosome, EvolutionLog]:
    """Run the GA; if ``evaluator`` has ``test_accuracy(mask)`` the final best is scored with it."""
    cache = evaluator if isinstance(evaluator, FitnessCache) else FitnessCache(evaluator, threads)
    rng = np.random.default_rng(derive_seed(cfg.master_seed, "ga"))
    masks = init_population(cfg, rng)
    evo = EvolutionLog()
    rate = cfg.effective_mutation_rate
    for g in range(cfg.generations):
        fits = cache.evaluate_many(masks)
        pop = [Chromosome(m, f) for m, f in zip(masks, fits)]
        gen_best = _best(pop)
        evo.hall_of_fame.append(gen_best)
        if evo.best is None or gen_best.sort_key < evo.best.sort_key:
            evo.best = gen_best
        evo.generations.append(
            GenerationRecord(g, gen_best, gen_best.fitness, float(np.mean(fits)), cache.evaluations)
        )
        if g == cfg.generations - 1:
            break

        ranked = sorted(pop, key=lambda c: c.sort_key)
        nxt = [c.mask for c in ranked[: cfg.elitism_count]]
        while len(nxt) < cfg.population_size:
            if cfg.strategy == "proportional":
                pa = select_proportional(pop, rng)
                pb = pop[int(rng.integers(len(pop)))]
            elif cfg.strategy == "tournament":
                nts = cfg.effective_tournament_size
                pa, pb = select_tournament(pop, nts, rng), select_tournament(pop, nts, rng)
            else:
                pa, pb = select_hall_of_fame(evo.hall_of_fame, pop, rng)
            c1, c2, rep = crossover(pa.mask, pb.mask, cfg.crossover_rate, rng)
            evo.repairs += rep
            for child in (c1, c2):
                child, rep = mutate(child, rate, rng)
                evo.repairs += rep
                if len(nxt) < cfg.population_size:
                    nxt.append(child)
        masks = nxt

    evo.flagged_masks = [str(m) for m in cache.flagged]
    test = getattr(getattr(cache, "evaluator", None), "test_accuracy", None)
    if test is not None:
        evo.test_accuracy = float(test(evo.best.mask))
    return evo.best, evo


class WrapperEvaluator:
    """Validation accuracy of a model trained on the masked features.

    ``dev`` is split once into fit/validation parts with a seed derived from
    ``master_seed``; the model seed is derived the same way, so fitness is a
    deterministic function of the mask. ``test`` is only used by
    :meth:`test_accuracy`, which retrains on all of ``dev``.
    """

    def __init__(
        self,
        dev: Dataset,
        test: Dataset | None,
        model: str = "svm",
        master_seed: int = 0,
        *,
        standardize_features: bool = True,
        validation_fraction: float = 0.3,
        train_cfg: mlp.TrainConfig = mlp.TrainConfig(epochs=500),
        svm_cfg: svm.SvmConfig = svm.SvmConfig(),
        kernel: svm.KernelSpec = svm.KernelSpec(),
        hidden: tuple[int, ...] = (18, 16, 8),
    ):
        if model not in ("svm", "ann"):
            raise ValueError(f"unknown model {model!r}")
        self.model = model
        self.standardize_features = standardize_features
        self.train_cfg = replace(train_cfg, seed=derive_seed(master_seed, "model"))
        self.svm_cfg = replace(svm_cfg, seed=derive_seed(master_seed, "model"))
        self.kernel = kernel
        self.hidden = hidden
        fit, val = split(dev, SplitSpec(1 - validation_fraction, True, derive_seed(master_seed, "validation")))
        self.fit_val = self._scaled(fit, val)
        self.dev_test = None if test is None else self._scaled(dev, test)

    def _scaled(self, train: Dataset, other: Dataset) -> tuple[Dataset, Dataset]:
        if not self.standardize_features:
            return train, other
        (a, b), _ = standardize(train, [other])
        return a, b

    def fit_score(self, train: Dataset, other: Dataset) -> tuple[float, float]:
        """(train accuracy, accuracy on ``other``) for the configured model."""
        if self.model == "svm":
            m = svm.train_smo(train, self.kernel, self.svm_cfg)
            return svm.evaluate(m, train), svm.evaluate(m, other)
        arch = mlp.MlpArchitecture.for_inputs(train.n_features, self.hidden)
        _, rep = mlp.train(train, other, arch, self.train_cfg)
        return rep.train_accuracy, rep.test_accuracy

    def __call__(self, mask: FeatureMask) -> float:
        fit, val = self.fit_val
        return self.fit_score(apply_mask(fit, mask), apply_mask(val, mask))[1]

    def train_test(self, mask: FeatureMask) -> tuple[float, float]:
        if self.dev_test is None:
            raise ValueError("evaluator has no test set")
        dev, test = self.dev_test
        return self.fit_score(apply_mask(dev, mask), apply_mask(test, mask))

    def test_accuracy(self, mask: FeatureMask) -> float:
        return self.train_test(mask)[1]


def onemax(mask: FeatureMask) -> float:
    return mask.popcount / len(mask)
