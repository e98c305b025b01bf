"""Genetic-algorithm wrapper feature selection.

Chromosomes are boolean masks over the feature columns.  A mask's fitness is
the accuracy of a random forest trained on the masked columns, either by
stratified CV on folds frozen for the whole run or by out-of-bag accuracy.
The forest seed is derived from the mask bits, so a mask always scores the
same and fitness values can be cached.
"""
from __future__ import annotations

import csv
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from .splits import stratified_folds
from .forest import ForestConfig, fit, oob_error
from .rng import derive_seed, substream


@dataclass(frozen=True)
class GaConfig:
    population_size: int = 100
    generations: int = 50
    crossover_rate: float = 0.8
    mutation_rate: float = 0.1   # per bit
    tournament_size: int = 3
    elitism_count: int = 2
    init_bit_probability: float = 0.5
    selection: str = "tournament"
    seed: int = 0

    def __post_init__(self):
        if self.population_size < 1:
            raise ValueError("population_size must be >= 1")
        if self.generations < 0:
            raise ValueError("generations must be >= 0")
        for name in ("crossover_rate", "mutation_rate"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {v}")
        if not 0.0 < self.init_bit_probability <= 1.0:
            raise ValueError("init_bit_probability must be in (0, 1]")
        if not 0 <= self.elitism_count < self.population_size:
            raise ValueError("elitism_count must be in [0, population_size)")
        if not 1 <= self.tournament_size <= self.population_size:
            raise ValueError("tournament_size must be in [1, population_size]")
        if self.selection not in ("tournament", "roulette"):
            raise ValueError(f"unknown selection operator {self.selection!r}")

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class FitnessSpec:
    mode: str = "cv"     # "cv" or "oob"
    folds: int = 3
    # smaller than the final forest: fitness is evaluated thousands of times per run
    forest: ForestConfig = field(default_factory=lambda: ForestConfig(n_trees=25))
    fitness_seed: int = 0

    def __post_init__(self):
        if self.mode not in ("cv", "oob"):
            raise ValueError(f"fitness mode must be 'cv' or 'oob', got {self.mode!r}")
        if self.mode == "cv" and self.folds < 2:
            raise ValueError("cv fitness needs at least 2 folds")

    def to_dict(self):
        d = asdict(self)
        d["forest"] = self.forest.to_dict()
        return d


def repair(mask, rng):
    """Set one random bit of an all-zero mask (in place); returns the mask."""
    if not mask.any():
        mask[rng.integers(mask.size)] = True
    return mask


def init_population(cfg, n_features, rng=None):
    if n_features < 1:
        raise ValueError("cannot build chromosomes over zero features")
    rng = rng if rng is not None else substream(cfg.seed, "init")
    pop = rng.random((cfg.population_size, n_features)) < cfg.init_bit_probability
    for row in pop:
        repair(row, rng)
    return pop


def _rank_key(fitness, mask, index):
    return (-fitness, int(mask.sum()), index)


def tournament_select(population, fitnesses, cfg, rng):
    """Best of ``tournament_size`` uniform draws (with replacement).

    Fitness ties go to the mask with fewer selected features, then to the
    lower population index.
    """
    n = len(population)
    if n == 0:
        raise ValueError("empty population")
    draws = rng.integers(0, n, size=cfg.tournament_size)
    win = min(draws, key=lambda i: _rank_key(fitnesses[i], population[i], i))
    return population[win]


def roulette_select(population, fitnesses, cfg, rng):
    f = np.asarray(fitnesses, dtype=np.float64)
    total = f.sum()
    p = f / total if total > 0 else np.full(f.size, 1.0 / f.size)
    return population[rng.choice(f.size, p=p)]


def single_point_crossover(a, b, cut):
    return np.concatenate([a[:cut], b[cut:]]), np.concatenate([b[:cut], a[cut:]])


def crossover(a, b, cfg, rng, cut=None):
    """Single-point crossover with probability ``crossover_rate``; otherwise copies."""
    a = np.asarray(a, dtype=bool)
    b = np.asarray(b, dtype=bool)
    if a.shape != b.shape:
        raise ValueError(f"parent lengths differ: {a.size} vs {b.size}")
    L = a.size
    if cut is None:
        if L < 2 or rng.random() >= cfg.crossover_rate:
            return a.copy(), b.copy()
        cut = int(rng.integers(1, L))
    c1, c2 = single_point_crossover(a, b, cut)
    return repair(c1, rng), repair(c2, rng)


def mutate(mask, cfg, rng):
    flips = rng.random(mask.size) < cfg.mutation_rate
    return repair(np.logical_xor(mask, flips), rng)


def mask_key(mask):
    mask = np.asarray(mask, dtype=bool)
    return mask.size, int.from_bytes(np.packbits(mask).tobytes(), "big")


class FitnessEvaluator:
    """Memoised fitness of masks over one dataset.

    CV folds are drawn once from ``spec.fitness_seed`` and reused for every
    mask.  ``cache`` may be shared between evaluators over the same data and
    spec (e.g. across GA seeds).
    """

    def __init__(self, ds, spec=None, cache=None, threads=1):
        self.ds = ds
        self.spec = spec or FitnessSpec()
        self.cache = {} if cache is None else cache
        self.threads = threads
        self.n_computed = 0
        counts = ds.class_counts()
        if np.count_nonzero(counts) < 2 or counts[counts > 0].min() < 2:
            raise ValueError("fitness evaluation needs at least 2 rows of every class")
        self.plan = None
        if self.spec.mode == "cv":
            smallest = int(counts[counts > 0].min())
            if self.spec.folds > smallest:
                raise ValueError(
                    f"{self.spec.folds} fitness folds exceed the smallest class ({smallest} rows)"
                )
            self.plan = stratified_folds(ds.y, self.spec.folds, self.spec.fitness_seed)

    def compute(self, mask):
        mask = np.asarray(mask, dtype=bool)
        if mask.size != self.ds.n_features:
            raise ValueError(f"mask has {mask.size} bits for {self.ds.n_features} features")
        if not mask.any():
            raise ValueError("mask selects no features")
        length, bits = mask_key(mask)
        sub = self.ds.select(mask)
        spec = self.spec
        if spec.mode == "oob":
            cfg = replace(spec.forest, seed=derive_seed(spec.fitness_seed, length, bits))
            rf = fit(sub, cfg)
            return 1.0 - oob_error(rf, sub)
        accs = []
        for i in range(len(self.plan)):
            train, test = self.plan.train_test(i, sub.n_rows)
            cfg = replace(spec.forest, seed=derive_seed(spec.fitness_seed, length, bits, i))
            rf = fit(sub.take(train), cfg)
            accs.append(float((rf.predict(sub.x[test]) == sub.y[test]).mean()))
        return float(np.mean(accs))

    def __call__(self, mask):
        key = np.asarray(mask, dtype=bool).tobytes()
        if key not in self.cache:
            self.cache[key] = self.compute(mask)
            self.n_computed += 1
        return self.cache[key]

    def evaluate_many(self, masks):
        todo = {}
        for m in masks:
            key = np.asarray(m, dtype=bool).tobytes()
            if key not in self.cache and key not in todo:
                todo[key] = np.asarray(m, dtype=bool)
        if todo:
            keys = list(todo)
            if self.threads > 1 and len(keys) > 1:
                with ThreadPoolExecutor(max_workers=self.threads) as pool:
                    vals = list(pool.map(self.compute, [todo[k] for k in keys]))
            else:
                vals = [self.compute(todo[k]) for k in keys]
            for k, v in zip(keys, vals):
                self.cache[k] = v
            self.n_computed += len(keys)
        return np.array([self.cache[np.asarray(m, dtype=bool).tobytes()] for m in masks])


def evaluate_fitness(mask, ds, spec=None):
    return FitnessEvaluator(ds, spec)(mask)


@dataclass
class GaHistory:
    best_fitness: list = field(default_factory=list)
    mean_fitness: list = field(default_factory=list)
    best_masks: list = field(default_factory=list)
    population_sizes: list = field(default_factory=list)

    def __len__(self):
        return len(self.best_fitness)

    def append(self, pop, fitness):
        i = min(range(len(pop)), key=lambda j: _rank_key(fitness[j], pop[j], j))
        self.best_fitness.append(float(fitness[i]))
        self.mean_fitness.append(float(np.mean(fitness)))
        self.best_masks.append(pop[i].copy())
        self.population_sizes.append(len(pop))

    def write_csv(self, path):
        with Path(path).open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["generation", "best", "mean", "n_selected"])
            for g, (b, m, mask) in enumerate(zip(self.best_fitness, self.mean_fitness, self.best_masks)):
                w.writerow([g, repr(b), repr(m), int(mask.sum())])


@dataclass
class GaResult:
    best_mask: np.ndarray
    best_fitness: float
    history: GaHistory
    n_evaluations: int
    populations: list | None = None

    def selected_names(self, feature_names):
        return selected_names(self.best_mask, feature_names)


def selected_names(mask, feature_names):
    return [name for name, bit in zip(feature_names, mask) if bit]


def run_ga(ds, cfg=None, spec=None, fitness=None, threads=1, keep_populations=False):
    """Evolve feature masks for ``cfg.generations`` generations.

    Each generation keeps the ``elitism_count`` best masks unchanged and fills
    the rest through selection, crossover and mutation.  ``fitness`` overrides
    the forest-based evaluator with any callable or :class:`FitnessEvaluator`
    over masks.  Returns the best mask ever seen together with the
    per-generation history (``generations + 1`` entries).
    """
    cfg = cfg or GaConfig()
    if fitness is None:
        fitness = FitnessEvaluator(ds, spec, threads=threads)
    n_features = ds.n_features if ds is not None else None
    if n_features is None:
        raise ValueError("run_ga needs a dataset to size the chromosomes")

    if hasattr(fitness, "evaluate_many"):
        score = fitness.evaluate_many
    else:
        def score(masks):
            return np.array([fitness(m) for m in masks], dtype=np.float64)

    select = tournament_select if cfg.selection == "tournament" else roulette_select
    pop = init_population(cfg, n_features)
    fit_vals = score(pop)
    history = GaHistory()
    history.append(pop, fit_vals)
    pops = [pop.copy()] if keep_populations else None
    best_mask, best_fit = history.best_masks[0].copy(), history.best_fitness[0]

    for gen in range(1, cfg.generations + 1):
        rng = substream(cfg.seed, "generation", gen)
        order = sorted(range(len(pop)), key=lambda j: _rank_key(fit_vals[j], pop[j], j))
        children = [pop[j].copy() for j in order[: cfg.elitism_count]]
        while len(children) < cfg.population_size:
            a = select(pop, fit_vals, cfg, rng)
            b = select(pop, fit_vals, cfg, rng)
            c1, c2 = crossover(a, b, cfg, rng)
            children.append(mutate(c1, cfg, rng))
            if len(children) < cfg.population_size:
                children.append(mutate(c2, cfg, rng))
        pop = np.array(children, dtype=bool)
        fit_vals = score(pop)
        history.append(pop, fit_vals)
        if keep_populations:
            pops.append(pop.copy())
        g_fit, g_mask = history.best_fitness[-1], history.best_masks[-1]
        if g_fit > best_fit or (g_fit == best_fit and g_mask.sum() < best_mask.sum()):
            best_fit, best_mask = g_fit, g_mask.copy()

    n_eval = getattr(fitness, "n_computed", 0)
    return GaResult(best_mask, best_fit, history, n_eval, pops)
