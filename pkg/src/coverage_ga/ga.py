"""Binary-mask genetic algorithm minimizing the coverage deviation alpha.

Each candidate is an inclusion mask over a fixed feature set; its fitness
is the coverage deviation of the selected subset (smaller is fitter).
Selection is roulette-wheel on a minimization transform of the fitness,
recombination is one-point crossover, mutation negates genes, the best
candidate ever seen survives unconditionally, and the population is capped
by dropping the worst candidates after each generation's offspring arrive.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import InsufficientPointsError
from .pointset import FeatureSet
from .ripley import EdgeCorrection, RadiusGrid, coverage_alpha

__all__ = [
    "PENALTY_ALPHA",
    "Chromosome",
    "GaConfig",
    "GenerationRecord",
    "SelectionResult",
    "fitness",
    "pick_by_cumulative_weight",
    "roulette_select",
    "crossover_one_point",
    "mutate",
    "mutate_single_gene",
    "evolve",
]

# Fitness assigned to masks selecting fewer features than the degeneracy
# floor: always worst, but still comparable so candidates never raise mid-run.
PENALTY_ALPHA = math.inf


@dataclass(eq=False)
class Chromosome:
    """An inclusion mask over a feature set, with a cached fitness value.

    fitness_alpha is None until evaluated; PENALTY_ALPHA marks masks that
    select fewer features than the evaluation's degeneracy floor.
    """

    mask: np.ndarray
    fitness_alpha: float | None = None

    def __post_init__(self):
        self.mask = np.asarray(self.mask, dtype=bool)

    @property
    def selected_count(self) -> int:
        return int(self.mask.sum())

    def copy(self) -> "Chromosome":
        return Chromosome(self.mask.copy(), self.fitness_alpha)


@dataclass(frozen=True)
class GaConfig:
    """Evolution parameters; the defaults are the production schedule."""

    population_max: int = 100
    population_init: int = 10
    generations: int = 20
    crossovers_per_generation: int = 10
    mutation_rate: float = 0.030
    elitism: bool = True
    rng_seed: int = 0
    mutation_unit: str = "gene"  # "gene": per-gene flips; "chromosome": one flip per selected chromosome

    def __post_init__(self):
        if not (0 < self.population_init <= self.population_max):
            raise ValueError(
                f"need 0 < population_init <= population_max, got "
                f"{self.population_init} / {self.population_max}"
            )
        if not (0.0 <= self.mutation_rate <= 1.0):
            raise ValueError(f"mutation_rate must be in [0, 1], got {self.mutation_rate}")
        if self.generations < 0:
            raise ValueError(f"generations must be >= 0, got {self.generations}")
        if self.crossovers_per_generation < 0:
            raise ValueError(
                f"crossovers_per_generation must be >= 0, got {self.crossovers_per_generation}"
            )
        if self.mutation_unit not in ("gene", "chromosome"):
            raise ValueError(f"mutation_unit must be 'gene' or 'chromosome', got {self.mutation_unit!r}")


@dataclass(frozen=True)
class GenerationRecord:
    """One history row; generation 0 is the unrefined input set."""

    generation: int
    best_alpha: float
    selected_count: int


@dataclass(frozen=True)
class SelectionResult:
    refined: FeatureSet
    history: list[GenerationRecord] = field(repr=False)
    original_alpha: float = 0.0
    refined_alpha: float = 0.0
    mask: np.ndarray | None = field(default=None, repr=False)


def _mask_alpha(mask: np.ndarray, fs: FeatureSet, grid: RadiusGrid,
                correction: EdgeCorrection, min_selected: int = 2) -> float:
    if int(mask.sum()) < max(min_selected, 2):
        return PENALTY_ALPHA
    return coverage_alpha(fs.subset(mask), grid, correction)


def fitness(chrom: Chromosome, fs: FeatureSet, grid: RadiusGrid,
            correction: EdgeCorrection = EdgeCorrection.ISOTROPIC,
            min_selected: int = 2) -> float:
    """Coverage deviation of the masked subset; cached on the chromosome.

    Masks with fewer than min_selected features (never below 2, since the
    deviation itself needs 2) get PENALTY_ALPHA instead of an exception so
    degenerate candidates stay comparable. Callers that feed the selection
    into homography estimation raise the floor to 4.
    """
    if len(chrom.mask) != len(fs):
        raise ValueError(f"mask length {len(chrom.mask)} != feature count {len(fs)}")
    if chrom.fitness_alpha is None:
        chrom.fitness_alpha = _mask_alpha(chrom.mask, fs, grid, correction, min_selected)
    return chrom.fitness_alpha


def pick_by_cumulative_weight(weights: Sequence[float], draw: float) -> int:
    """First index whose cumulative share of the total weight reaches `draw`.

    `draw` is a uniform variate in [0, 1); weights need not be normalized.
    """
    cum = np.cumsum(np.asarray(weights, dtype=np.float64))
    total = cum[-1]
    if not (math.isfinite(total) and total > 0):
        raise ValueError(f"total selection weight must be positive and finite, got {total}")
    return min(int(np.searchsorted(cum, draw * total, side="left")), len(cum) - 1)


def roulette_select(population: Sequence[Chromosome], rng: np.random.Generator) -> int:
    """Sample an index with probability decreasing in fitness.

    Because alpha is minimized, each candidate's wheel share is its gap to
    the worst finite fitness in the population plus a small floor, so the
    worst candidates (including penalized ones) stay selectable but rare.
    Populations with all-equal fitness reduce to a uniform draw.
    """
    if len(population) == 0:
        raise ValueError("population is empty")
    if any(c.fitness_alpha is None for c in population):
        raise ValueError("all fitness values must be evaluated before selection")
    alphas = np.array([c.fitness_alpha for c in population], dtype=np.float64)
    finite = alphas[np.isfinite(alphas)]
    if finite.size == 0:
        return int(rng.integers(len(population)))
    worst = float(finite.max())
    best = float(finite.min())
    eps = 1e-9 * (worst - best + 1.0)
    weights = np.maximum(worst - alphas, 0.0) + eps
    return pick_by_cumulative_weight(weights, rng.random())


def crossover_one_point(a: Chromosome, b: Chromosome, cut: int) -> tuple[Chromosome, Chromosome]:
    """Swap the parent mask tails at `cut`; children start unevaluated."""
    n = len(a.mask)
    if len(b.mask) != n:
        raise ValueError(f"parent masks differ in length: {n} vs {len(b.mask)}")
    if not (0 <= cut <= n):
        raise ValueError(f"cut must be in [0, {n}], got {cut}")
    child1 = np.concatenate([a.mask[:cut], b.mask[cut:]])
    child2 = np.concatenate([b.mask[:cut], a.mask[cut:]])
    return Chromosome(child1), Chromosome(child2)


def mutate(c: Chromosome, rate: float, rng: np.random.Generator) -> Chromosome:
    """Negate each gene independently with probability `rate` (new chromosome)."""
    if not (0.0 <= rate <= 1.0):
        raise ValueError(f"mutation rate must be in [0, 1], got {rate}")
    flips = rng.random(len(c.mask)) < rate
    return Chromosome(np.logical_xor(c.mask, flips))


def mutate_single_gene(c: Chromosome, rate: float, rng: np.random.Generator) -> Chromosome:
    """Whole-chromosome mutation unit: with probability `rate`, negate one random gene."""
    if not (0.0 <= rate <= 1.0):
        raise ValueError(f"mutation rate must be in [0, 1], got {rate}")
    mask = c.mask.copy()
    if len(mask) > 0 and rng.random() < rate:
        mask[int(rng.integers(len(mask)))] ^= True
    return Chromosome(mask)


def breed_offspring(population: list[Chromosome], config: GaConfig,
                    rng: np.random.Generator) -> list[Chromosome]:
    """One generation of pairing, crossover and mutation: 2*crossovers offspring."""
    n = len(population[0].mask)
    offspring: list[Chromosome] = []
    for _ in range(config.crossovers_per_generation):
        pa = population[roulette_select(population, rng)]
        pb = population[roulette_select(population, rng)]
        cut = int(rng.integers(0, n + 1))
        for child in crossover_one_point(pa, pb, cut):
            if config.mutation_unit == "chromosome":
                child = mutate_single_gene(child, config.mutation_rate, rng)
            else:
                child = mutate(child, config.mutation_rate, rng)
            offspring.append(child)
    return offspring


def truncate_population(population: list[Chromosome], cap: int) -> list[Chromosome]:
    """Keep the `cap` best by (fitness, fewer features, earlier creation).

    The returned list preserves creation order so later truncations keep
    using creation rank as the final tie-break.
    """
    if len(population) <= cap:
        return population
    ranked = sorted(
        range(len(population)),
        key=lambda i: (population[i].fitness_alpha, population[i].selected_count, i),
    )
    return [population[i] for i in sorted(ranked[:cap])]


def _evaluate_all(chroms: list[Chromosome], fs: FeatureSet, grid: RadiusGrid,
                  correction: EdgeCorrection, threads: int, min_selected: int) -> None:
    pending = [c for c in chroms if c.fitness_alpha is None]
    if threads > 1 and len(pending) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            values = list(
                pool.map(lambda c: _mask_alpha(c.mask, fs, grid, correction, min_selected), pending)
            )
    else:
        values = [_mask_alpha(c.mask, fs, grid, correction, min_selected) for c in pending]
    for c, v in zip(pending, values):
        c.fitness_alpha = v


def _rank(c: Chromosome) -> tuple[float, int]:
    return (c.fitness_alpha, c.selected_count)


def evolve(
    fs: FeatureSet,
    config: GaConfig,
    grid: RadiusGrid,
    correction: EdgeCorrection = EdgeCorrection.ISOTROPIC,
    threads: int = 1,
    min_selected: int = 2,
) -> SelectionResult:
    """Run the generational loop and decode the best mask found.

    The initial population is the all-true mask (the input set) plus
    population_init - 1 random half-density masks. Each generation breeds
    2 * crossovers_per_generation offspring, evaluates them, and truncates
    back to population_max. History row 0 is the input set itself.
    Candidates selecting fewer than min_selected features are penalized,
    never chosen, so the decoded subset keeps at least that many (the
    all-true seed wins if nothing valid beats it).

    Randomness derives a separate stream per generation from rng_seed, and
    fitness evaluation is pure, so results are identical for a given
    (input, config) regardless of `threads`.
    """
    n = len(fs)
    if n < 2:
        raise InsufficientPointsError(f"selection needs at least 2 features, got {n}")
    entropy = config.rng_seed & 0xFFFFFFFFFFFFFFFF  # SeedSequence wants unsigned
    seeds = np.random.SeedSequence(entropy).spawn(config.generations + 1)
    init_rng = np.random.default_rng(seeds[0])

    population = [Chromosome(np.ones(n, dtype=bool))]
    for _ in range(config.population_init - 1):
        population.append(Chromosome(init_rng.random(n) < 0.5))
    _evaluate_all(population, fs, grid, correction, threads, min_selected)

    original_alpha = population[0].fitness_alpha
    best = population[0].copy()
    history = [GenerationRecord(0, original_alpha, n)]

    for gen in range(1, config.generations + 1):
        rng = np.random.default_rng(seeds[gen])
        offspring = breed_offspring(population, config, rng)
        _evaluate_all(offspring, fs, grid, correction, threads, min_selected)
        population.extend(offspring)
        population = truncate_population(population, config.population_max)

        gen_best = min(population, key=_rank)
        if _rank(gen_best) < _rank(best):
            best = gen_best.copy()
        tracked = best if config.elitism else gen_best
        history.append(GenerationRecord(gen, tracked.fitness_alpha, tracked.selected_count))

    final = best if config.elitism else min(population, key=_rank)
    return SelectionResult(
        refined=fs.subset(final.mask),
        history=history,
        original_alpha=original_alpha,
        refined_alpha=final.fitness_alpha,
        mask=final.mask.copy(),
    )
