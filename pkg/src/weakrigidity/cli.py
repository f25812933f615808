"""Command-line front end.

Each subcommand reads a scenario (a path or the name of a bundled one),
prints a JSON document (or CSV with ``--format csv``) and, with ``--out``,
also writes it to a directory. Exit codes: 0 success, 1 error, 2 for
``analyze`` on a framework that is not infinitesimally weakly rigid.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .dynamics import (
    read_positions_csv,
    simulate,
    write_trace,
)
from .equilibria import classify_equilibrium, monte_carlo_basin
from .errors import InvalidArgument, WeakRigidityError
from .rigidity import (
    classify,
    fw_jacobian_fd,
    partition_constraints,
    sample_configuration,
    weak_rigidity_matrix,
)
from .scenarios import bundled_names, load_scenario

GRADIENT_TOL = 1e-6


def _emit(doc, args, filename):
    """Print ``doc`` and, with ``--out``, write it next to other outputs."""
    if args.format == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        flat = {k: v for k, v in doc.items() if not isinstance(v, (list, dict))}
        w.writerow(list(flat))
        w.writerow([flat[k] for k in flat])
        text = buf.getvalue()
        filename = filename and filename.replace(".json", ".csv")
    else:
        text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    sys.stdout.write(text)
    if args.out and filename:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / filename).write_text(text)


def cmd_analyze(args) -> int:
    sc = load_scenario(args.scenario, strict=args.strict)
    report = classify(sc.spec, sc.positions, tol=args.tol_rank)
    doc = report.to_dict()
    doc["scenario"] = sc.name
    doc["nullity"] = sc.spec.d * sc.spec.n - report.rank
    if report.is_giwr and (args.partition or sc.experiment.get("parameters", {}).get("partition")):
        keep, rest = partition_constraints(sc.spec, sc.positions, tol=args.tol_rank)
        labels = sc.spec.constraint_labels()
        doc["minimal_subset"] = [labels[r] for r in keep]
        doc["remainder"] = [labels[r] for r in rest]
    _emit(doc, args, "analyze.json")
    return 0 if report.is_giwr else 2


def cmd_simulate(args) -> int:
    sc = load_scenario(args.scenario, strict=args.strict)
    simcfg = sc.sim_config(dt=args.dt, t_max=args.t_max, record_every=args.record_every)
    seed = args.seed if args.seed is not None else sc.seed
    P0 = sc.initial_positions(seed)
    t0 = time.perf_counter()
    trace = simulate(sc.spec, P0, simcfg)
    wall = time.perf_counter() - t0
    summary = trace.summary()
    summary.update(scenario=sc.name, seed=seed)
    if args.out:
        write_trace(trace, args.out, extra={"scenario": sc.name, "seed": seed})
        Path(args.out, "timing.json").write_text(json.dumps({"wall_time": wall}) + "\n")
    summary["wall_time"] = wall
    _emit(summary, args, None)
    return 0


def cmd_montecarlo(args) -> int:
    sc = load_scenario(args.scenario, strict=args.strict)
    params = sc.experiment.get("parameters", {})
    trials = args.trials if args.trials is not None else int(params.get("trials", 100))
    box = args.box if args.box is not None else float(params.get("box", 20.0))
    collinear = args.collinear or bool(params.get("collinear", False))
    seed = args.seed if args.seed is not None else sc.seed
    if trials < 0:
        raise InvalidArgument("trials must be non-negative")
    stats = monte_carlo_basin(sc.spec, trials, seed, sc.sim_config(), box=box, collinear=collinear)
    doc = stats.to_dict()
    doc["scenario"] = sc.name
    _emit(doc, args, "basin.json")
    return 0


def gradient_check(spec, samples, seed, jacobian=weak_rigidity_matrix, box=10.0) -> float:
    """Largest entry gap between ``jacobian`` and central differences."""
    if samples <= 0:
        raise InvalidArgument("samples must be positive")
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(samples):
        P = sample_configuration(spec, rng, box=box)
        worst = max(worst, float(np.max(np.abs(jacobian(spec, P) - fw_jacobian_fd(spec, P)))))
    return worst


def cmd_check_gradient(args, jacobian=weak_rigidity_matrix) -> int:
    sc = load_scenario(args.scenario, strict=args.strict)
    seed = args.seed if args.seed is not None else 0
    worst = gradient_check(sc.spec, args.samples, seed, jacobian)
    ok = worst <= GRADIENT_TOL
    doc = {"scenario": sc.name, "samples": args.samples, "seed": seed,
           "max_abs_error": worst, "tolerance": GRADIENT_TOL, "pass": ok}
    _emit(doc, args, "check_gradient.json")
    return 0 if ok else 1


def cmd_equilibrium(args) -> int:
    sc = load_scenario(args.scenario, strict=args.strict)
    simcfg = sc.sim_config()
    P = sc.positions
    if args.run:
        P = simulate(sc.spec, sc.initial_positions(args.seed), simcfg).final_positions
    rep = classify_equilibrium(sc.spec, P, gains=simcfg.gains)
    doc = rep.to_dict()
    doc["scenario"] = sc.name
    doc["positions"] = P.tolist()
    _emit(doc, args, "equilibrium.json")
    return 0


def cmd_plotdata(args) -> int:
    src = Path(args.trace_dir)
    pos_file = src / "positions.csv"
    err_file = src / "errors.csv"
    if not pos_file.is_file() or not err_file.is_file():
        raise InvalidArgument(f"{src}: positions.csv and errors.csv are required")
    times, P = read_positions_csv(pos_file)
    out = Path(args.out) if args.out else src / "plot"
    out.mkdir(parents=True, exist_ok=True)
    n, d = P.shape[1], P.shape[2]
    files = []
    for a in range(n):
        name = f"agent{a + 1}.dat"
        with open(out / name, "w") as fh:
            fh.write("# t " + " ".join("xyz"[:d]) + "\n")
            for t, row in zip(times, P[:, a]):
                fh.write(" ".join(format(v, ".17g") for v in (t, *row)) + "\n")
        files.append(name)
    series = {}
    with open(err_file, newline="") as fh:
        for row in csv.DictReader(fh):
            series.setdefault(row["constraint_id"], []).append((float(row["t"]), float(row["error"])))
    for label, rows in series.items():
        name = f"error_{label}.dat"
        with open(out / name, "w") as fh:
            fh.write("# t error log10|error|\n")
            for t, e in rows:
                lg = np.log10(abs(e)) if e != 0 else float("-inf")
                fh.write(f"{format(t, '.17g')} {format(e, '.17g')} {format(lg, '.17g')}\n")
        files.append(name)
    plot = ["set key outside", "set size ratio -1" if d == 2 else "set view equal xyz"]
    cmd = "plot" if d == 2 else "splot"
    cols = "2:3" if d == 2 else "2:3:4"
    plot.append(cmd + " " + ", \\\n  ".join(
        f"'agent{a + 1}.dat' using {cols} with lines title 'agent {a + 1}'" for a in range(n)))
    plot.append("pause -1")
    plot.append("set size noratio")
    plot.append("set logscale y")
    plot.append("plot " + ", \\\n  ".join(
        f"'error_{lab}.dat' using 1:(abs($2)) with lines title '{lab}'" for lab in series))
    plot.append("pause -1")
    (out / "plot.gp").write_text("\n".join(plot) + "\n")
    doc = {"trace_dir": str(src), "out": str(out), "agents": n, "samples": len(times),
           "error_series": len(series), "files": files + ["plot.gp"]}
    sys.stdout.write(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return 0


def _global_flags(parser, suppress):
    kw = {"default": argparse.SUPPRESS} if suppress else {}
    parser.add_argument("--out", help="directory for output files", **(kw or {"default": None}))
    parser.add_argument("--seed", type=int, help="override the scenario seed",
                        **(kw or {"default": None}))
    parser.add_argument("--strict", action="store_true", help="reject unknown scenario keys",
                        **(kw or {"default": False}))
    parser.add_argument("--tol-rank", type=float,
                        help="absolute singular-value cutoff for numerical rank",
                        **(kw or {"default": None}))
    parser.add_argument("--format", choices=("json", "csv"), **(kw or {"default": "json"}))


def build_parser() -> argparse.ArgumentParser:
    # global flags are accepted before or after the subcommand; the copy on
    # the subcommands must not reset values given before it
    common = argparse.ArgumentParser(add_help=False)
    _global_flags(common, suppress=True)

    parser = argparse.ArgumentParser(
        prog="weakrigidity",
        description="Weak rigidity analysis and formation-control simulation.",
    )
    _global_flags(parser, suppress=False)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", parents=[common], help="rank test of a scenario's configuration")
    p.add_argument("scenario")
    p.add_argument("--partition", action="store_true", help="also split off a minimal subset")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("simulate", parents=[common], help="integrate the gradient flow")
    p.add_argument("scenario")
    p.add_argument("--dt", type=float)
    p.add_argument("--t-max", type=float)
    p.add_argument("--record-every", type=int)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("montecarlo", parents=[common], help="basin study for three planar agents")
    p.add_argument("scenario")
    p.add_argument("--trials", type=int)
    p.add_argument("--box", type=float)
    p.add_argument("--collinear", action="store_true", help="draw collinear starts")
    p.set_defaults(func=cmd_montecarlo)

    p = sub.add_parser("check-gradient", parents=[common], help="compare R_W with finite differences")
    p.add_argument("scenario")
    p.add_argument("--samples", type=int, default=50)
    p.set_defaults(func=cmd_check_gradient)

    p = sub.add_parser("equilibrium", parents=[common], help="classify an equilibrium")
    p.add_argument("scenario")
    p.add_argument("--run", action="store_true", help="simulate first and classify the end state")
    p.set_defaults(func=cmd_equilibrium)

    p = sub.add_parser("plotdata", parents=[common], help="gnuplot data from a trace directory")
    p.add_argument("trace_dir")
    p.set_defaults(func=cmd_plotdata)

    p = sub.add_parser("list", parents=[common], help="names of bundled scenarios")
    p.set_defaults(func=lambda a: print("\n".join(bundled_names())) or 0)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return int(args.func(args))
    except (WeakRigidityError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
