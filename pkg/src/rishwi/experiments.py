"""Parameter sweeps over N, M or the common HWI severity, and their CSV output.

CSV layout (UTF-8, LF line endings): ``#``-prefixed header lines carrying the
scenario hash, seed and angles, then one header row with ``COLUMNS`` and one
row per (sweep value, arm). Per-user quantities are ``;``-joined in user
order. Floats are written with 17 significant digits so they round-trip.
"""

from __future__ import annotations

import csv
import io
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .analytic import RateModel
from .channel import isqrt_exact
from .errors import ConfigError
from .ga import ga_optimize
from .montecarlo import estimate_ergodic_rate
from .scenario import Scenario

SWEEP_VARS = ("N", "M", "k_hwi")
ARMS = {
    "N": ("optimized", "random"),
    "M": ("optimized", "random", "optimized-no-direct", "random-no-direct"),
    "k_hwi": ("hwi-aware", "hwi-ignorant", "random"),
}
COLUMNS = (
    "sweep_var", "value", "arm", "objective", "seed",
    "sum_rate", "min_rate", "rates",
    "ga_fitness", "ga_generations",
    "mc_samples", "mc_rates", "mc_std_errors", "mc_max_abs_gap", "mc_tolerance", "mc_within",
)
N_RANDOM = 100
MC_TOLERANCE = 0.1


@dataclass
class SweepRow:
    sweep_var: str
    value: float
    arm: str
    objective: str
    seed: int
    rates: np.ndarray
    ga_fitness: float | None = None
    ga_generations: int | None = None
    mc_rates: np.ndarray | None = None
    mc_std_errors: np.ndarray | None = None
    mc_samples: int = 0
    phases: np.ndarray | None = None
    wall_time: float = 0.0  # kept in memory only; would break byte-identical output

    @property
    def sum_rate(self) -> float:
        return float(np.sum(self.rates))

    @property
    def min_rate(self) -> float:
        return float(np.min(self.rates))

    @property
    def mc_gap(self) -> float | None:
        if self.mc_rates is None:
            return None
        return float(np.max(np.abs(self.mc_rates - self.rates)))


@dataclass
class SweepResult:
    scenario: Scenario
    var: str
    values: list
    objective: str
    seed: int
    rows: list[SweepRow] = field(default_factory=list)

    def select(self, arm: str) -> list[SweepRow]:
        return [r for r in self.rows if r.arm == arm]

    def curve(self, arm: str, metric: str | None = None) -> np.ndarray:
        metric = metric or ("sum_rate" if self.objective == "sum" else "min_rate")
        return np.array([getattr(r, metric) for r in self.select(arm)])


def _check_values(var, values):
    if var not in SWEEP_VARS:
        raise ConfigError(f"unknown sweep variable {var!r}; expected one of {SWEEP_VARS}")
    out = []
    for v in values:
        if var in ("N", "M"):
            if float(v) != int(v) or int(v) < 1:
                raise ConfigError(f"{var} values must be positive integers, got {v}")
            isqrt_exact(int(v), var)  # raises DimensionError
            out.append(int(v))
        else:
            if not 0.0 <= float(v) <= 1.0:
                raise ConfigError(f"k_hwi values must lie in [0, 1], got {v}")
            out.append(float(v))
    return out


def _point_seeds(seed: int, j: int):
    """GA seed shared by every point and arm (paired comparisons); per-point random and MC streams."""
    ga = np.random.SeedSequence([int(seed)]).spawn(1)[0]
    rnd, mc = np.random.SeedSequence([int(seed), j]).spawn(2)
    return int(ga.generate_state(1, np.uint64)[0]), np.random.default_rng(rnd), int(mc.generate_state(1, np.uint64)[0])


def _run_point(scenario: Scenario, var, value, j, objective, seed, arms, mc_samples, n_random, mc_workers):
    geometry, config = scenario.geometry, scenario.config
    if var == "N":
        config = config.replace(N=value)
    elif var == "M":
        config = config.replace(M=value)
    else:
        config = config.replace(k_r=value, k_u=value, k_b=value)
    ga_seed, rnd_rng, mc_seed = _point_seeds(seed, j)
    ga_cfg = replace(scenario.ga, seed=ga_seed)
    no_direct = geometry.replace(xi=np.zeros(config.K))
    # one set of random designs per point, shared by every random arm
    random_pop = rnd_rng.uniform(0.0, 2 * np.pi, size=(n_random, config.N))
    rows = []
    for arm in arms:
        t0 = time.perf_counter()
        geo = no_direct if arm.endswith("no-direct") else geometry
        model = RateModel(geo, config)
        row = SweepRow(var, value, arm, objective, seed, rates=None)
        if arm.startswith("random"):
            row.rates = model.rates_batch(random_pop).mean(axis=0)
        else:
            design_cfg = config.replace(k_r=0.0, k_u=0.0, k_b=0.0) if arm == "hwi-ignorant" else config
            res = ga_optimize(objective, geo, design_cfg, ga_cfg)
            row.phases = res.best.theta
            row.rates = model.breakdown(res.best).rate
            row.ga_fitness = res.fitness
            row.ga_generations = len(res.trace.best) - 1
            if mc_samples:
                est = [estimate_ergodic_rate(k, res.best, geo, config, n_samples=mc_samples,
                                             seed=mc_seed, workers=mc_workers) for k in range(config.K)]
                row.mc_rates = np.array([e.mean for e in est])
                row.mc_std_errors = np.array([e.std_error for e in est])
                row.mc_samples = mc_samples
        row.wall_time = time.perf_counter() - t0
        rows.append(row)
    return rows


def run_sweep(scenario: Scenario, var: str, values, objective: str = "sum", seed: int = 0,
              arms=None, mc_samples: int = 0, n_random: int = N_RANDOM, workers: int = 1) -> SweepResult:
    """Evaluate every arm of the sweep at each value, GA-optimizing where the arm calls for it.

    ``k_hwi`` sets ``k_r = k_u = k_b`` to the swept value. Its ``hwi-ignorant``
    arm optimizes with all impairments zeroed (same GA seed as ``hwi-aware``)
    and is then scored under the true impairments. Random arms report the mean
    per-user rate of ``n_random`` uniform designs. All GA runs share one seed
    derived from ``seed``; random designs and MC draws use streams derived from
    ``(seed, rank of the value in sorted order)``. Rows therefore do not depend on ``workers``.
    """
    if objective not in ("sum", "min"):
        raise ConfigError(f"objective must be 'sum' or 'min', got {objective!r}")
    values = _check_values(var, values)
    arms = tuple(arms) if arms is not None else ARMS[var]
    unknown = set(arms) - set(ARMS[var])
    if unknown:
        raise ConfigError(f"arms {sorted(unknown)} not available for a {var} sweep")
    if mc_samples and mc_samples < 1000:
        raise ConfigError("mc_samples must be 0 or at least 1000")
    order = sorted(range(len(values)), key=lambda j: values[j])
    ordered = [values[j] for j in order]

    def job(j):
        return _run_point(scenario, var, ordered[j], j, objective, seed, arms, mc_samples, n_random, 1)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            chunks = list(pool.map(job, range(len(ordered))))
    else:
        chunks = [job(j) for j in range(len(ordered))]
    result = SweepResult(scenario, var, ordered, objective, seed)
    for chunk in chunks:
        result.rows.extend(chunk)
    return result


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return repr(float(x)) if math.isfinite(x) else str(float(x))
    if isinstance(x, np.ndarray):
        return ";".join(_fmt(v) for v in x.tolist())
    return str(x)


def to_csv(result: SweepResult) -> str:
    buf = io.StringIO()
    buf.write("# rishwi sweep\n")
    buf.write(f"# seed={result.seed} sweep_var={result.var} objective={result.objective}\n")
    for key, val in result.scenario.describe().items():
        buf.write(f"# {key}={val}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(COLUMNS)
    for r in result.rows:
        gap = r.mc_gap
        writer.writerow([
            r.sweep_var, _fmt(r.value), r.arm, r.objective, r.seed,
            _fmt(r.sum_rate), _fmt(r.min_rate), _fmt(np.asarray(r.rates, dtype=float)),
            _fmt(r.ga_fitness), _fmt(r.ga_generations),
            r.mc_samples, _fmt(r.mc_rates), _fmt(r.mc_std_errors), _fmt(gap),
            _fmt(MC_TOLERANCE) if gap is not None else "",
            _fmt(gap <= MC_TOLERANCE) if gap is not None else "",
        ])
    return buf.getvalue()


def emit(result: SweepResult, path) -> None:
    """Write the CSV; rewriting the same result gives the same bytes."""
    text = to_csv(result)
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise OSError(exc.errno, f"cannot write sweep output to {path}: {exc.strerror}") from exc


def read_csv(path) -> tuple[dict[str, str], list[dict[str, str]]]:
    """Parse an emitted file back into (header metadata, rows)."""
    meta, body = {}, []
    with open(path, encoding="utf-8", newline="") as fh:
        for line in fh:
            if line.startswith("#"):
                for part in line[1:].split():
                    if "=" in part:
                        k, v = part.split("=", 1)
                        meta[k] = v
            else:
                body.append(line)
    rows = list(csv.DictReader(body))
    return meta, rows
