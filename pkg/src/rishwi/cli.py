"""Command line entry point: ``rishwi {validate,sweep,optimize,asymptotic}``.

Exit codes: 0 success, 1 a validation check failed, 2 configuration error.
"""

from __future__ import annotations

import argparse
import csv
import io
import logging
import sys

import numpy as np

from . import __version__
from .analytic import RateModel, asymptotic_rate
from .channel import PhaseVector, make_rng
from .errors import ConfigError, DimensionError
from .experiments import SWEEP_VARS, emit, run_sweep, to_csv
from .ga import ga_optimize
from .montecarlo import estimate_ergodic_rate, estimate_moments
from .scenario import ScenarioFile, build_scenario

log = logging.getLogger("rishwi")

DESK_MC_SAMPLES = 20_000
PAPER_MC_SAMPLES = 100_000


def _values(text: str) -> list[float]:
    try:
        return [float(tok) for tok in text.split(",") if tok.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _nonneg_int(text: str) -> int:
    v = int(text)
    if v < 0:
        raise argparse.ArgumentTypeError("expected a nonnegative integer")
    return v


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--scenario", help="scenario file (defaults to the reference scenario)")
    common.add_argument("--seed", type=_nonneg_int, default=0, help="master seed (default 0)")
    common.add_argument("--mc-samples", type=_nonneg_int, default=None,
                        help="Monte-Carlo draws (default 2e4 at desk scale, 1e5 with --paper-scale; "
                             "sweeps skip MC unless given)")
    common.add_argument("--out", help="write CSV output here instead of stdout")
    common.add_argument("--paper-scale", action="store_true",
                        help="keep M=50, N=25, K=4 instead of the desk-scale M=16, N=16, K=2")
    common.add_argument("--workers", type=int, default=1, help="threads for sweep points / MC chunks")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="rishwi", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", parents=[common], help="check analytic moments and rates against Monte Carlo")
    p.add_argument("--z-max", type=float, default=3.0, help="allowed |z| for each moment (default 3)")
    p.add_argument("--rate-tol", type=float, default=0.1,
                   help="tolerance for the instantaneous-rate gap in bits/s/Hz (default 0.1)")
    p.add_argument("--strict-rate", action="store_true",
                   help="count the instantaneous-rate gap as a check (reported only by default)")

    p = sub.add_parser("sweep", parents=[common], help="rate versus N, M or the HWI severity")
    p.add_argument("--var", required=True, choices=SWEEP_VARS)
    p.add_argument("--values", required=True, type=_values)
    p.add_argument("--objective", choices=("sum", "min"), default="sum")
    p.add_argument("--arms", help="comma-separated subset of arms")
    p.add_argument("--random-designs", type=int, default=100, help="designs averaged by random arms")

    p = sub.add_parser("optimize", parents=[common], help="GA phase design for one scenario")
    p.add_argument("--objective", choices=("sum", "min"), default="sum")

    p = sub.add_parser("asymptotic", parents=[common], help="finite-M rate under p/M scaling versus its limit")
    p.add_argument("--M-values", type=_values, default=[64, 256, 1024, 4096])
    p.add_argument("--total-power-dbm", type=float, default=None,
                   help="total power p before division by M (default: scenario power of user 1)")
    return parser


def _load(args):
    doc = ScenarioFile.load(args.scenario) if args.scenario else ScenarioFile.parse("")
    scenario = build_scenario(doc, desk_scale=not args.paper_scale, seed=args.seed)
    if args.mc_samples is None:
        args.mc_samples = PAPER_MC_SAMPLES if args.paper_scale else DESK_MC_SAMPLES
    return scenario


def _write_table(args, header, rows, comments=()):
    buf = io.StringIO()
    for line in comments:
        buf.write(f"# {line}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    text = buf.getvalue()
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _f(x) -> str:
    return repr(float(x))


def cmd_validate(args) -> int:
    sc = _load(args)
    if args.mc_samples < 1000:
        raise ConfigError("--mc-samples must be at least 1000 for validation")
    g, c = sc.geometry, sc.config
    phases = PhaseVector.random(c.N, make_rng(args.seed))
    bd = RateModel(g, c).breakdown(phases)
    rows, failed = [], 0
    for k in range(c.K):
        mc = estimate_moments(k, phases, g, c, n_samples=args.mc_samples, seed=args.seed + 1 + k,
                              workers=args.workers)
        ref = {"signal": bd.e_signal[k], "noise": bd.e_noise[k], "fourth": bd.e_fourth[k]}
        for i in range(c.K):
            if i != k:
                ref[f"interf({i})"] = bd.e_interf[k, i]
                ref[f"cross({i})"] = bd.e_cross[k, i]
        for key, est in mc.items():
            z = est.z_score(ref[key])
            ok = abs(z) <= args.z_max
            failed += not ok
            rows.append([k, key, _f(ref[key]), _f(est.mean), _f(est.std_error), f"{z:.3f}", "pass" if ok else "FAIL"])
        ratio = estimate_ergodic_rate(k, phases, g, c, args.mc_samples, args.seed + 101 + k,
                                      mode="moment-ratio", workers=args.workers)
        z = ratio.z_score(bd.rate[k])
        ok = abs(z) <= args.z_max
        failed += not ok
        rows.append([k, "rate(moment-ratio)", _f(bd.rate[k]), _f(ratio.mean), _f(ratio.std_error),
                     f"{z:.3f}", "pass" if ok else "FAIL"])
        inst = estimate_ergodic_rate(k, phases, g, c, args.mc_samples, args.seed + 201 + k,
                                     workers=args.workers)
        gap = inst.mean - bd.rate[k]
        ok = abs(gap) <= args.rate_tol
        if args.strict_rate:
            failed += not ok
        verdict = "pass" if ok else ("FAIL" if args.strict_rate else "info")
        rows.append([k, "rate(instantaneous)", _f(bd.rate[k]), _f(inst.mean), _f(inst.std_error),
                     f"gap={gap:+.4f}", verdict])
    _write_table(args, ["user", "quantity", "analytic", "mc_mean", "mc_std_error", "z", "verdict"], rows,
                 [f"scenario_sha256={sc.source.digest()} seed={args.seed} mc_samples={args.mc_samples}"])
    print(f"{'FAILED' if failed else 'OK'}: {failed} check(s) failed", file=sys.stderr)
    return 1 if failed else 0


def cmd_sweep(args) -> int:
    mc_samples = args.mc_samples or 0  # sweeps validate by MC only on request
    sc = _load(args)
    arms = [a.strip() for a in args.arms.split(",")] if args.arms else None
    result = run_sweep(sc, args.var, args.values, args.objective, seed=args.seed, arms=arms,
                       mc_samples=mc_samples, n_random=args.random_designs, workers=args.workers)
    if args.out:
        emit(result, args.out)
    else:
        sys.stdout.write(to_csv(result))
    return 0


def cmd_optimize(args) -> int:
    sc = _load(args)
    res = ga_optimize(args.objective, sc.geometry, sc.config, sc.ga)
    rates = RateModel(sc.geometry, sc.config).breakdown(res.best).rate
    rows = [["theta", str(n), _f(t)] for n, t in enumerate(res.best.theta)]
    rows += [["rate", str(k), _f(r)] for k, r in enumerate(rates)]
    rows += [["fitness", args.objective, _f(res.fitness)], ["generations", "", str(len(res.trace.best) - 1)]]
    if args.mc_samples:
        for k in range(sc.config.K):
            est = estimate_ergodic_rate(k, res.best, sc.geometry, sc.config, args.mc_samples,
                                        args.seed + 1 + k, workers=args.workers)
            rows.append(["mc_rate", str(k), f"{_f(est.mean)}+-{_f(est.std_error)}"])
    _write_table(args, ["field", "index", "value"], rows,
                 [f"scenario_sha256={sc.source.digest()} seed={args.seed} objective={args.objective}"])
    return 0


def cmd_asymptotic(args) -> int:
    sc = _load(args)
    g = sc.geometry.replace(rho=0.0, epsilon=np.zeros(sc.config.K))
    p_total = (10 ** ((args.total_power_dbm - 30) / 10) if args.total_power_dbm is not None
               else float(sc.config.p[0]))
    phases = PhaseVector.random(sc.config.N, make_rng(args.seed))
    limits = [asymptotic_rate(k, g, sc.config, p_total) for k in range(sc.config.K)]
    rows = []
    for M in args.M_values:
        if M != int(M) or M < 1:
            raise ConfigError(f"M values must be positive integers, got {M}")
        cfg = sc.config.replace(M=int(M), p=tuple([p_total / M] * sc.config.K))
        r = RateModel(g, cfg).breakdown(phases).rate
        rows += [[int(M), k, _f(r[k]), _f(limits[k]), _f(r[k] - limits[k])] for k in range(sc.config.K)]
    _write_table(args, ["M", "user", "rate", "limit", "gap"], rows,
                 [f"scenario_sha256={sc.source.digest()} seed={args.seed} total_power_watt={p_total!r}"])
    return 0


COMMANDS = {"validate": cmd_validate, "sweep": cmd_sweep, "optimize": cmd_optimize, "asymptotic": cmd_asymptotic}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.workers < 1:
        parser.error("--workers must be at least 1")
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, DimensionError) as exc:
        print(f"rishwi: configuration error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"rishwi: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
