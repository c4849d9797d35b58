"""Command-line front end: one subcommand per experiment, CSV/JSON output, plot scripts.

Exit codes: 0 success, 2 a checked property failed, 1 usage error.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import io
import json
import math
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__

SCHEMA_VERSION = 1
CSV_HEADER = ["schema_version", "experiment", "seed", "version", "passed", "key", "value"]


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


@dataclass
class ResultRecord:
    experiment: str
    parameters: dict
    payload: dict
    seed: int | None = None
    passed: bool = True
    failures: list = field(default_factory=list)
    elapsed: float = 0.0
    version: str = __version__


# -- serialization -----------------------------------------------------------


def fmt_float(x) -> str:
    return format(float(x), ".17g")


def _plain(v):
    """Numbers to JSON-safe values with 17 significant digits kept."""
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        x = float(v)
        if math.isnan(x) or math.isinf(x):
            return fmt_float(x)
        return float(fmt_float(x))
    if isinstance(v, dict):
        return {str(k): _plain(x) for k, x in v.items()}
    if isinstance(v, (list, tuple, np.ndarray)):
        return [_plain(x) for x in v]
    if v is None:
        return None
    return str(v)


def _flatten(prefix, v, out):
    if isinstance(v, dict):
        for k, x in v.items():
            _flatten(f"{prefix}.{k}" if prefix else str(k), x, out)
    elif isinstance(v, (list, tuple, np.ndarray)):
        for i, x in enumerate(v):
            _flatten(f"{prefix}[{i}]", x, out)
    elif isinstance(v, (float, np.floating)) and not isinstance(v, bool):
        out.append((prefix, fmt_float(v)))
    else:
        out.append((prefix, "" if v is None else str(_plain(v))))


def record_dict(r: ResultRecord, timings: bool = False) -> dict:
    d = {
        "schema_version": SCHEMA_VERSION,
        "experiment": r.experiment,
        "version": r.version,
        "seed": r.seed,
        "passed": r.passed,
        "failures": list(r.failures),
        "parameters": _plain(r.parameters),
        "payload": _plain(r.payload),
    }
    if timings:
        d["elapsed"] = _plain(r.elapsed)
    return d


def to_json(records, timings: bool = False) -> str:
    return json.dumps([record_dict(r, timings) for r in records], indent=2, sort_keys=True) + "\n"


def to_csv(records, timings: bool = False) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in records:
        rows = []
        _flatten("parameters", r.parameters, rows)
        _flatten("payload", r.payload, rows)
        if timings:
            rows.append(("elapsed", fmt_float(r.elapsed)))
        for k, v in rows:
            w.writerow([SCHEMA_VERSION, r.experiment, "" if r.seed is None else r.seed, r.version, r.passed, k, v])
    return buf.getvalue()


PLOT_TEMPLATE = '''"""Plot numeric payload series from {data}. Run: python {script}"""
import csv
import json
from collections import defaultdict
from pathlib import Path

import matplotlib.pyplot as plt

here = Path(__file__).resolve().parent
path = here / "{data}"
series = defaultdict(list)
if path.suffix == ".json":
    for rec in json.loads(path.read_text()):
        for key, val in rec["payload"].items():
            if isinstance(val, list) and val and all(isinstance(v, (int, float)) for v in val):
                series[rec["experiment"] + ":" + key] = val
else:
    with open(path) as fh:
        for row in csv.DictReader(fh):
            key = row["key"]
            if key.startswith("payload.") and key.endswith("]"):
                try:
                    series[row["experiment"] + ":" + key.split("[")[0][8:]].append(float(row["value"]))
                except ValueError:
                    pass
for name, vals in series.items():
    plt.figure()
    plt.plot(range(len(vals)), vals, "o-")
    plt.title(name)
    plt.savefig(here / (name.replace(":", "_").replace(".", "_") + ".png"))
'''


def emit(records, fmt: str = "csv", path=None, plot: bool = False, timings: bool = False):
    """Write records as CSV or JSON (stdout when path is None); optionally a companion plot script."""
    text = to_json(records, timings) if fmt == "json" else to_csv(records, timings)
    if path is None:
        sys.stdout.write(text)
        return None
    path = Path(path)
    path.write_text(text)
    if plot:
        script = path.with_name(f"plot_{path.stem}.py")
        script.write_text(PLOT_TEMPLATE.format(data=path.name, script=script.name))
        return script
    return None


# -- experiments ---------------------------------------------------------------


def _check(rec: ResultRecord, ok: bool, invariant: str):
    if not ok:
        rec.passed = False
        rec.failures.append(invariant)


def run_count(a):
    from .counting import count_bruteforce, count_meet_in_middle

    out = []
    for N in a.N:
        fn = count_bruteforce if a.method == "brute" else count_meet_in_middle
        res = fn(N, a.b, threads=a.threads)
        rec = ResultRecord("count", {"N": N, "b": a.b, "method": a.method}, {"S": res.value})
        _check(rec, res.value >= (2 * N + 1) ** a.b, "counting: diagonal lower bound S >= (2N+1)^b")
        out.append(rec)
    return out


def run_weyl(a):
    from .expsum import weyl_bound_report

    out = []
    for N in a.N:
        r = weyl_bound_report(N, a.trials, a.seed)
        out.append(
            ResultRecord(
                "weyl",
                {"N": N, "trials": a.trials},
                {"included": r.included, "max_ratio": r.max_ratio, "mean_ratio": r.mean_ratio, "argmax_q": r.argmax_q},
                seed=a.seed,
            )
        )
    return out


def run_farey(a):
    from .arith import farey_count
    from .kernel import make_phi, supports_disjoint

    out = []
    for Q in a.Q:
        phi = make_phi(Q)
        disjoint = supports_disjoint(phi) if Q <= a.exact_limit else None
        rec = ResultRecord("farey", {"Q": Q}, {"fractions": farey_count(Q), "hat0": phi.hat0, "disjoint": disjoint})
        _check(rec, disjoint is not False, "kernel_decomp: support intervals pairwise disjoint")
        out.append(rec)
    return out


def run_decompose(a):
    from .kernel import verify_prop1

    rep = verify_prop1(a.N, lambda N: int(N**a.Q_power))
    rows = rep.rows
    rec = ResultRecord(
        "decompose",
        {"N": a.N, "Q_power": a.Q_power},
        {
            "Q": [r.Q for r in rows],
            "hat0": [r.hat0 for r in rows],
            "ratio1": [r.ratio1 for r in rows],
            "ratio2": [r.ratio2 for r in rows],
            "ratio2_log": [r.ratio2_log for r in rows],
            "drift1": rep.drift1,
            "drift2": rep.drift2,
            "drift2_log": rep.drift2_log,
        },
    )
    _check(rec, rep.passed, "kernel_decomp: kernel ratios vary by < factor 4 across N")
    return [rec]


def run_levelset(a):
    from .expsum import CoeffSequence
    from .levelset import verify_cor1

    rules = [("uniform", CoeffSequence.uniform, None)]
    rules += [(f"random{s}", (lambda N, s=s: CoeffSequence.random_unit(N, s)), s) for s in range(a.seed, a.seed + a.random)]
    out = []
    for label, rule, seed in rules:
        rep = verify_cor1(a.N, rule, gate_const=a.gate_const, label=label, threads=a.threads)
        rec = ResultRecord(
            "levelset",
            {"N": a.N, "sequence": label, "gate_const": a.gate_const},
            {"values": rep.values, "drift": rep.drift},
            seed=seed,
        )
        _check(rec, rep.passed, "levelset: gated |E|lambda^10/N varies by < factor 8 across N")
        out.append(rec)
    return out


def run_strichartz(a):
    from .counting import scaling_fit
    from .levelset import OptimizerConfig, estimate_Kp

    vals, out = [], []
    for N in a.N:
        starts = a.random_starts if N <= a.random_start_limit else 0
        cfg = OptimizerConfig(max_iter=a.max_iter, random_starts=starts, seed=a.seed, threads=a.threads)
        est = estimate_Kp(N, a.p, cfg)
        vals.append((N, est.lower_bound))
        rec = ResultRecord(
            "strichartz",
            {"N": N, "p": a.p, "max_iter": a.max_iter, "random_starts": starts},
            {"lower_bound": est.lower_bound, "iterations": est.iterations, "converged": est.converged,
             "start_values": est.start_values},
            seed=a.seed,
        )
        _check(rec, all(x <= y for x, y in zip(est.history, est.history[1:])), "levelset: optimizer objective non-decreasing")
        out.append(rec)
    if len(vals) >= 4:
        fit = scaling_fit(vals)
        out.append(ResultRecord("strichartz_fit", {"N": a.N, "p": a.p}, {"slope": fit.slope, "residual": fit.residual}))
    return out


def run_hua(a):
    from .levelset import verify_hua

    rep = verify_hua(a.N, gate_const=a.gate_const, threads=a.threads)
    rec = ResultRecord(
        "hua",
        {"N": a.N, "gate_const": a.gate_const},
        {"S": rep.counts, "slope": rep.fit.slope, "residual": rep.fit.residual,
         "gated_values": rep.gated.values, "gated_drift": rep.gated.drift, "monotone": rep.monotone},
    )
    _check(rec, rep.slope_ok, "levelset: Hua slope in [5.4, 6.3]")
    _check(rec, rep.monotone, "levelset: |G_lambda| non-increasing")
    return [rec]


def _solver_setup(a):
    from .gkdv import SobolevSpec, SolverConfig, make_hs_data, nonlinearity_from_name

    phi = make_hs_data(a.M, SobolevSpec(a.s, a.seed, a.amplitude))
    cfg = SolverConfig(nonlinearity_from_name(a.F), dt=a.dt, T=a.T, save_every=a.save_every)
    return phi, cfg


def run_solve(a):
    from .gkdv import solve, write_binary, write_text

    phi, cfg = _solver_setup(a)
    traj = solve(phi, cfg)
    if a.trajectory_bin:
        write_binary(traj, a.trajectory_bin)
    if a.trajectory_text:
        write_text(traj, a.trajectory_text)
    r = traj.report
    rec = ResultRecord(
        "solve",
        {"M": a.M, "F": a.F, "s": a.s, "amplitude": a.amplitude, "dt": a.dt, "T": a.T},
        {"mass_drift": r.mass_drift, "momentum_drift": r.momentum_drift, "reality_defect": r.max_reality_defect,
         "final_hs": traj.final.hs_norm(a.s), "initial_hs": phi.hs_norm(a.s)},
        seed=a.seed,
    )
    _check(rec, r.mass_drift <= 1e-10, "gkdv: mass drift <= 1e-10")
    return [rec]


def run_gauge(a):
    from dataclasses import replace

    from .gkdv import gauge_equivalence_check, gauge_round_trip_error, solve

    phi, cfg = _solver_setup(a)
    disc = gauge_equivalence_check(phi, cfg)
    rt = gauge_round_trip_error(solve(phi, replace(cfg, mean_removed=True)))
    rec = ResultRecord(
        "gauge",
        {"M": a.M, "F": a.F, "s": a.s, "amplitude": a.amplitude, "dt": a.dt, "T": a.T},
        {"discrepancy": disc, "round_trip": rt},
        seed=a.seed,
    )
    _check(rec, disc < 1e-6, "gkdv: gauge matched-run discrepancy < 1e-6")
    _check(rec, rt < 1e-9, "gkdv: gauge round trip < 1e-9")
    return [rec]


def run_xsb(a):
    from .gkdv import SobolevSpec, make_hs_data, nonlinearity_from_name
    from .xsb import linear_estimate_check, nonlinear_scaling_check, state_to_coeffs

    phi = make_hs_data(a.M, SobolevSpec(a.s, a.seed, a.amplitude))
    N_x = (a.M - 1) // 3
    deltas = tuple(a.deltas)
    lin = linear_estimate_check(state_to_coeffs(phi, N_x), a.s, deltas)
    nl = nonlinearity_from_name(a.F)
    power = int(a.F) if a.F.isdigit() else None
    sc = nonlinear_scaling_check(phi, nl, a.s, deltas, power=power, dt=a.dt)
    rec = ResultRecord(
        "xsb",
        {"M": a.M, "F": a.F, "s": a.s, "amplitude": a.amplitude, "deltas": list(a.deltas)},
        {"linear_ratios": lin.ratios, "linear_drift": lin.drift, "lhs": sc.lhs, "ys": sc.ys, "theta": sc.theta},
        seed=a.seed,
    )
    _check(rec, lin.passed, "xsb: linear estimate ratio drift <= 4")
    _check(rec, sc.passed, "xsb: fitted theta > 0")
    return [rec]


def run_all(a):
    ns = argparse.Namespace(**vars(a))
    out = []
    steps = [
        (run_count, dict(N=[1, 2, 3], b=2, method="mim")),
        (run_weyl, dict(N=[8], trials=50)),
        (run_farey, dict(Q=[4, 8], exact_limit=64)),
        (run_decompose, dict(N=[4, 6], Q_power=2.0)),
        (run_levelset, dict(N=[4, 8], random=1, gate_const=1.0)),
        (run_strichartz, dict(N=[2, 3], p=4, max_iter=20, random_starts=0, random_start_limit=0)),
        (run_hua, dict(N=[2, 3, 4, 5], gate_const=1.0)),
        (run_solve, dict(M=32, F="2", s=0.6, amplitude=0.1, dt=1e-3, T=0.01, save_every=10,
                         trajectory_bin=None, trajectory_text=None)),
        (run_gauge, dict(M=32, F="3", s=0.6, amplitude=0.1, dt=1e-4, T=0.005, save_every=10)),
        (run_xsb, dict(M=16, F="3", s=0.6, amplitude=0.3, dt=1e-4, deltas=(0.1, 0.05, 0.025))),
    ]
    for fn, over in steps:
        for k, v in over.items():
            setattr(ns, k, v)
        out.extend(fn(ns))
    return out


# -- argument handling ---------------------------------------------------------


def _solver_args(p, F="3", M=64, dt=1e-4, T=0.05, amplitude=0.1):
    p.add_argument("--M", type=int, default=M)
    p.add_argument("--F", default=F, help="nonlinearity: 0, sin, or an integer power k")
    p.add_argument("--s", type=float, default=0.6)
    p.add_argument("--amplitude", type=float, default=amplitude)
    p.add_argument("--dt", type=float, default=dt)
    p.add_argument("--T", type=float, default=T)
    p.add_argument("--save-every", dest="save_every", type=int, default=10)


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", help="key = value file with [section] headers; flags override it")
    common.add_argument("--format", choices=("csv", "json"), default="csv")
    common.add_argument("--output", help="output file (default: stdout)")
    common.add_argument("--plot", action="store_true", help="also write a plot script next to --output")
    common.add_argument("--timings", action="store_true", help="include elapsed seconds (not deterministic)")
    common.add_argument("--threads", type=int, default=None, help="worker threads (else $RESTRICTLAB_THREADS, else 1)")
    common.add_argument("--seed", type=int, default=0)

    parser = _Parser(prog="restrictlab", description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("count", parents=[common], help="exact S(N;b)")
    p.add_argument("--N", type=int, nargs="+", required=True)
    p.add_argument("--b", type=int, required=True)
    p.add_argument("--method", choices=("mim", "brute"), default="mim")
    p.set_defaults(func=run_count)

    p = sub.add_parser("weyl", parents=[common], help="Weyl-sum ratios at random minor-arc phases")
    p.add_argument("--N", type=int, nargs="+", default=[16])
    p.add_argument("--trials", type=int, default=200)
    p.set_defaults(func=run_weyl)

    p = sub.add_parser("farey", parents=[common], help="Farey cutoff statistics")
    p.add_argument("--Q", type=int, nargs="+", default=[4, 8, 16, 32])
    p.add_argument("--exact-limit", dest="exact_limit", type=int, default=64,
                   help="largest Q for the exact disjointness check")
    p.set_defaults(func=run_farey)

    p = sub.add_parser("decompose", parents=[common], help="kernel decomposition ratios")
    p.add_argument("--N", type=int, nargs="+", default=[8, 16, 32])
    p.add_argument("--Q-power", dest="Q_power", type=float, default=2.0, help="Q = N^power, power in [2, 3]")
    p.set_defaults(func=run_decompose)

    p = sub.add_parser("levelset", parents=[common], help="gated level-set decay")
    p.add_argument("--N", type=int, nargs="+", default=[8, 16, 32])
    p.add_argument("--random", type=int, default=5, help="number of random unit sequences")
    p.add_argument("--gate-const", dest="gate_const", type=float, default=1.0)
    p.set_defaults(func=run_levelset)

    p = sub.add_parser("strichartz", parents=[common], help="lower bounds for the L^p constant")
    p.add_argument("--N", type=int, nargs="+", default=[4, 8, 16, 32])
    p.add_argument("--p", type=float, default=10.0)
    p.add_argument("--max-iter", dest="max_iter", type=int, default=500)
    p.add_argument("--random-starts", dest="random_starts", type=int, default=2)
    p.add_argument("--random-start-limit", dest="random_start_limit", type=int, default=16,
                   help="use random starts only for N up to this")
    p.set_defaults(func=run_strichartz)

    p = sub.add_parser("hua", parents=[common], help="S(N;5) scaling and |G_lambda| profile")
    p.add_argument("--N", type=int, nargs="+", default=[4, 8, 12, 16, 24, 32, 40])
    p.add_argument("--gate-const", dest="gate_const", type=float, default=1.0)
    p.set_defaults(func=run_hua)

    p = sub.add_parser("solve", parents=[common], help="integrate gKdV and report conservation")
    _solver_args(p, F="1", M=256, dt=1e-4, T=0.1)
    p.add_argument("--trajectory-bin", dest="trajectory_bin")
    p.add_argument("--trajectory-text", dest="trajectory_text")
    p.set_defaults(func=run_solve)

    p = sub.add_parser("gauge", parents=[common], help="gauge-transform equivalence")
    _solver_args(p, F="3", M=256, dt=1e-5, T=0.05)
    p.set_defaults(func=run_gauge)

    p = sub.add_parser("xsb", parents=[common], help="Bourgain-space linear and nonlinear checks")
    _solver_args(p, F="3", M=32, dt=2e-5, T=0.0, amplitude=0.3)
    p.add_argument("--deltas", type=float, nargs="+", default=(0.2, 0.1, 0.05, 0.025))
    p.set_defaults(func=run_xsb)

    p = sub.add_parser("all", parents=[common], help="quick pass over every experiment")
    p.set_defaults(func=run_all)
    return parser


def _apply_config(parser, argv):
    """Install config-file values as subcommand defaults so explicit flags still win."""
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    pre.add_argument("command", nargs="?")
    known, _ = pre.parse_known_args(argv)
    if not known.config:
        return
    subs = parser._subparsers._group_actions[0].choices
    if known.command not in subs:
        return
    cp = configparser.ConfigParser()
    cp.optionxform = str  # keys are case-sensitive (N vs n)
    if not cp.read(known.config):
        raise UsageError(f"cannot read config file {known.config!r}")
    values = {}
    for section in ("common", known.command):
        if cp.has_section(section):
            values.update({k.replace("-", "_"): v for k, v in cp.items(section)})
    sub = subs[known.command]
    acts = {a.dest: a for a in sub._actions}
    defaults = {}
    for k, v in values.items():
        act = acts.get(k)
        if act is None or k in ("help", "config"):
            raise UsageError(f"unknown config key {k!r} for {known.command}")
        try:
            if isinstance(act, argparse._StoreTrueAction):
                defaults[k] = v.strip().lower() in ("1", "true", "yes", "on")
            elif act.nargs in ("+", "*"):
                conv = act.type or str
                defaults[k] = [conv(x) for x in v.replace(",", " ").split()]
            elif act.type is not None:
                defaults[k] = act.type(v)
            else:
                defaults[k] = v
        except (ValueError, argparse.ArgumentTypeError) as e:
            raise UsageError(f"bad value for {k!r}: {e}")
        if act.choices is not None and defaults[k] not in act.choices:
            raise UsageError(f"bad value for {k!r}: {v!r}")
        act.required = False
    sub.set_defaults(**defaults)


def validate(args):
    from ._parallel import thread_count

    if args.threads is not None and args.threads < 1:
        raise UsageError("--threads must be >= 1")
    args.threads = thread_count(args.threads)
    c = args.command
    if c in ("count",) and not 1 <= args.b <= 6:
        raise UsageError("--b must be in 1..6")
    for name in ("N", "Q"):
        vals = getattr(args, name, None)
        if vals is not None and (not vals or min(vals) < 1):
            raise UsageError(f"--{name} needs positive integers")
    if c == "decompose" and not 2 <= args.Q_power <= 3:
        raise UsageError("--Q-power must lie in [2, 3]")
    if c == "strichartz" and args.p < 2:
        raise UsageError("--p must be >= 2")
    if c in ("solve", "gauge", "xsb"):
        if args.M < 4 or args.M & (args.M - 1):
            raise UsageError("--M must be a power of two >= 4")
        if args.dt <= 0 or args.T < 0:
            raise UsageError("--dt must be > 0 and --T >= 0")
        if c == "xsb" and args.s <= 0.5:
            raise UsageError("--s must exceed 1/2")
    if args.plot and not args.output:
        raise UsageError("--plot needs --output")


def run(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        _apply_config(parser, argv)
        args = parser.parse_args(argv)
        validate(args)
    except UsageError as e:
        print(str(e), file=sys.stderr)
        return 1
    t0 = time.perf_counter()
    records = args.func(args)
    elapsed = time.perf_counter() - t0
    for r in records:
        r.elapsed = elapsed / max(1, len(records))
    emit(records, args.format, args.output, args.plot, args.timings)
    failed = [f"{r.experiment}: {f}" for r in records for f in r.failures]
    for f in failed:
        print(f"FAILED {f}", file=sys.stderr)
    return 2 if failed else 0


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
