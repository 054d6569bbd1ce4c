"""Genetic algorithm over RIS phase vectors (elitism, uniform mutation, SUS, two-point crossover)."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .analytic import RateModel
from .channel import TWO_PI, PhaseVector, ScenarioGeometry, SystemConfig, make_rng
from .errors import ConfigError

log = logging.getLogger(__name__)

BatchFitness = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class GaConfig:
    S_e: int = 4
    S_m: int = 8
    S_p: int = 8
    max_iters: int | None = None  # None -> 100 * N
    mutation_rate: float | None = None  # None -> 1 / N
    phase_grid: int | None = None  # None -> continuous phases
    seed: int = 0
    snapshot_every: int = 0
    patience: int | None = None  # early stop after this many stale generations
    restarts: int = 1  # independent runs; the fittest result is kept
    refine: bool = False  # polish the GA output with a local quasi-Newton ascent

    def __post_init__(self):
        if min(self.S_e, self.S_m, self.S_p) < 1:
            raise ConfigError("S_e, S_m and S_p must all be at least 1")
        if self.max_iters is not None and self.max_iters < 0:
            raise ConfigError("max_iters must be nonnegative")
        if self.mutation_rate is not None and not 0.0 < self.mutation_rate <= 1.0:
            raise ConfigError("mutation_rate must lie in (0, 1]")
        if self.phase_grid is not None and self.phase_grid < 1:
            raise ConfigError("phase_grid must be a positive integer")
        if self.patience is not None and self.patience < 1:
            raise ConfigError("patience must be positive")
        if self.restarts < 1:
            raise ConfigError("restarts must be at least 1")

    @property
    def population(self) -> int:
        return self.S_e + self.S_m + self.S_p

    def iterations(self, N: int) -> int:
        return 100 * N if self.max_iters is None else self.max_iters

    def rate_per_gene(self, N: int) -> float:
        return 1.0 / N if self.mutation_rate is None else self.mutation_rate


@dataclass
class GaTrace:
    best: list[float] = field(default_factory=list)
    mean: list[float] = field(default_factory=list)
    snapshots: list[tuple[int, np.ndarray]] = field(default_factory=list)

    def is_monotone(self) -> bool:
        return all(b >= a for a, b in zip(self.best, self.best[1:]))


@dataclass
class GaResult:
    best: PhaseVector
    fitness: float
    trace: GaTrace


def fitness_sum_rate(phases, geometry: ScenarioGeometry, config: SystemConfig) -> float:
    return float(RateModel(geometry, config).breakdown(phases).rate.sum())


def fitness_min_rate(phases, geometry: ScenarioGeometry, config: SystemConfig) -> float:
    return float(RateModel(geometry, config).breakdown(phases).rate.min())


def batch_objective(objective: str, model: RateModel) -> BatchFitness:
    """Vectorized fitness over a population of shape (S, N)."""
    if objective == "sum":
        return lambda pop: model.rates_batch(pop).sum(axis=-1)
    if objective == "min":
        return lambda pop: model.rates_batch(pop).min(axis=-1)
    raise ValueError(f"unknown objective {objective!r}; expected 'sum' or 'min'")


def random_phases(rng: np.random.Generator, shape, grid: int | None) -> np.ndarray:
    if grid is None:
        return rng.uniform(0.0, TWO_PI, size=shape)
    return rng.integers(0, grid, size=shape) * (TWO_PI / grid)


def stochastic_universal_sampling(fitness: np.ndarray, n: int, rng: np.random.Generator) -> np.ndarray:
    """Indices of ``n`` fitness-proportional picks using evenly spaced pointers.

    Fitness is shifted so the worst candidate keeps a small positive weight.
    """
    fitness = np.asarray(fitness, dtype=float)
    spread = fitness.max() - fitness.min()
    floor = 0.01 * spread if spread > 0 else 1.0
    weights = fitness - fitness.min() + floor
    edges = np.cumsum(weights)
    step = edges[-1] / n
    pointers = rng.uniform(0.0, step) + step * np.arange(n)
    return np.minimum(np.searchsorted(edges, pointers, side="right"), fitness.size - 1)


def two_point_crossover(p1: np.ndarray, p2: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Child takes the middle segment from ``p2``; cut points come from 1..N-1 without replacement.

    With N = 2 only one cut exists and the operator degenerates to one-point crossover.
    """
    N = p1.size
    child = p1.copy()
    if N < 2:
        return child
    cuts = np.sort(rng.choice(np.arange(1, N), size=min(2, N - 1), replace=False))
    lo = cuts[0]
    hi = cuts[1] if cuts.size > 1 else N
    child[lo:hi] = p2[lo:hi]
    return child


def evolve(fitness_fn: BatchFitness, N: int, cfg: GaConfig) -> GaResult:
    """Run the generational loop for a vectorized fitness function."""
    rng = make_rng(cfg.seed)
    S_e, S_m, S_p = cfg.S_e, cfg.S_m, cfg.S_p
    pm = cfg.rate_per_gene(N)
    pop = random_phases(rng, (cfg.population, N), cfg.phase_grid)
    trace = GaTrace()
    stale = 0
    q = 0
    while True:
        fit = np.asarray(fitness_fn(pop), dtype=float)
        order = np.argsort(-fit, kind="stable")
        pop, fit = pop[order], fit[order]
        if trace.best and fit[0] <= trace.best[-1]:
            stale += 1
        else:
            stale = 0
        trace.best.append(float(fit[0]))
        trace.mean.append(float(fit.mean()))
        if cfg.snapshot_every and q % cfg.snapshot_every == 0:
            trace.snapshots.append((q, pop[0].copy()))
        if q >= cfg.iterations(N) or (cfg.patience is not None and stale >= cfg.patience):
            break
        q += 1

        elites = pop[:S_e]
        # draw order per generation: mutation mask, mutation values, SUS offset, pairing, cut points
        mutants = pop[-S_m:].copy()
        mask = rng.random((S_m, N)) < pm
        fresh = random_phases(rng, (S_m, N), cfg.phase_grid)
        mutants[mask] = fresh[mask]

        middle, middle_fit = pop[S_e:S_e + S_p], fit[S_e:S_e + S_p]
        picks = stochastic_universal_sampling(middle_fit, 2 * S_p, rng)
        picks = rng.permutation(picks)
        offspring = np.stack([
            two_point_crossover(middle[picks[2 * j]], middle[picks[2 * j + 1]], rng)
            for j in range(S_p)
        ])
        pop = np.concatenate([elites, mutants, offspring])

    best = pop[0]
    if cfg.phase_grid is None:
        best = np.mod(best, TWO_PI)
    return GaResult(PhaseVector(best), float(fit[0]), trace)


def local_ascent(fitness_fn: BatchFitness, theta: np.ndarray, max_steps: int = 500,
                 h: float = 1e-6, tol: float = 1e-13) -> tuple[np.ndarray, float]:
    """Quasi-Newton (BFGS) ascent from ``theta``; only improving steps are accepted.

    Gradients are central differences evaluated as one batch of 2N phase
    vectors; each line search tries 40 halving step lengths in one batch.
    """
    theta = np.mod(np.asarray(theta, dtype=float), TWO_PI)
    N = theta.size
    eye = np.eye(N)
    alphas = 0.5 ** np.arange(40)

    def grad(x):
        pts = np.concatenate([x + h * eye, x - h * eye])
        f = np.asarray(fitness_fn(pts), dtype=float)
        return (f[:N] - f[N:]) / (2 * h)

    best = float(fitness_fn(theta[None])[0])
    g = grad(theta)
    Hinv = eye.copy()
    for _ in range(max_steps):
        d = Hinv @ g
        if d @ g <= 0:  # lost ascent direction: restart from steepest ascent
            Hinv, d = eye.copy(), g
        trial = theta + alphas[:, None] * d
        fit = np.asarray(fitness_fn(trial), dtype=float)
        j = int(np.argmax(fit))
        if not fit[j] > best + tol * max(1.0, abs(best)):
            if np.array_equal(Hinv, eye):
                break
            Hinv = eye.copy()
            continue
        step = trial[j] - theta
        theta, best = trial[j], float(fit[j])
        g_new = grad(theta)
        y = g - g_new  # ascent on f is descent on -f
        sy = step @ y
        if sy > 1e-300:
            rho = 1.0 / sy
            V = eye - rho * np.outer(step, y)
            Hinv = V @ Hinv @ V.T + rho * np.outer(step, step)
        g = g_new
    theta = np.mod(theta, TWO_PI)
    theta = np.where(theta >= TWO_PI, 0.0, theta)  # mod can round up to 2*pi
    return theta, float(fitness_fn(theta[None])[0])


def ga_optimize(objective, geometry: ScenarioGeometry, config: SystemConfig,
                ga_config: GaConfig = GaConfig()) -> GaResult:
    """Maximize ``'sum'`` (sum rate) or ``'min'`` (minimum user rate) over RIS phases.

    ``objective`` may also be a vectorized callable mapping (S, N) phases to (S,) fitness.
    With ``restarts > 1`` the GA runs from seeds spawned off ``ga_config.seed`` and the
    fittest run wins; ``refine`` polishes each run with ``local_ascent`` (continuous
    phases only). The returned trace is that of the winning GA run, before polishing.
    """
    if callable(objective):
        fitness_fn = objective
    else:
        fitness_fn = batch_objective(objective, RateModel(geometry, config))
    seeds = [ga_config.seed] if ga_config.restarts == 1 else [
        int(s.generate_state(1, np.uint64)[0])
        for s in np.random.SeedSequence(ga_config.seed).spawn(ga_config.restarts)]
    result = None
    for seed in seeds:
        run = evolve(fitness_fn, config.N, replace(ga_config, seed=seed))
        if ga_config.refine and ga_config.phase_grid is None:
            theta, fit = local_ascent(fitness_fn, run.best.theta)
            run = GaResult(PhaseVector(theta), fit, run.trace)
        if result is None or run.fitness > result.fitness:
            result = run
    log.debug("GA finished after %d generations, best fitness %.6g",
              len(result.trace.best) - 1, result.fitness)
    return result
