"""Command-line front end: ``lqglab <subcommand> [options]``."""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .config import ConfigError, RunConfig, load_config, parse_config
from .experiments import analyze_field, run_experiment, sample_trial_field, summarize
from .gff import read_field, write_field
from .metric import build_graph, mollify, shortest_paths
from .report import (
    atom_table,
    coalescence_table,
    emit_report,
    gmc_table,
    read_csv_report,
    write_manifest,
    write_table,
)

__all__ = ["run_cli", "main", "build_parser"]

SUBCOMMANDS = ("sample-field", "metric", "profile", "gmc", "variation", "coalescence", "experiment", "report")


def build_parser():
    p = argparse.ArgumentParser(prog="lqglab", description="LQG distance-profile laboratory")
    sub = p.add_subparsers(dest="command", metavar="SUBCOMMAND")
    sub.required = True
    for name in SUBCOMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--config", type=Path, help="INI config file (defaults if omitted)")
        s.add_argument("--seed", type=int, help="master seed (overrides the config)")
        s.add_argument("--out", type=Path, default=Path("out"), help="output directory")
        s.add_argument("--trials", type=int, help="trial count (overrides the config)")
        s.add_argument("--format", choices=("json", "csv", "plotdata"), default="json")
        if name not in ("experiment", "report"):
            s.add_argument("--field", type=Path, help="LQGF field file; sampled from the seed if omitted")
            s.add_argument("--index", type=int, default=0, help="trial index used when sampling")
        if name == "report":
            s.add_argument("--summary", type=Path, required=True, help="summary.json or summary.csv")
    return p


def _config(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else parse_config("")
    return cfg.with_overrides(seed=args.seed, trials=args.trials)


def _field(args, trial):
    if args.field is not None:
        return read_field(args.field)
    return sample_trial_field(trial, args.index)


def _single(args, cfg):
    trial = cfg.trial
    out = args.out
    out.mkdir(parents=True, exist_ok=True)
    files = []
    if args.command == "sample-field":
        f = sample_trial_field(trial, args.index)
        path = out / "field.lqgf"
        write_field(f, path)
        files.append(path)
        return files
    field = _field(args, trial)
    if args.command == "metric":
        sm = mollify(field, trial.epsilon)
        g = build_graph(field, trial.params, trial.epsilon, trial.a_eps, smoothed=sm)
        z = trial.references[0]
        tree = shortest_paths(g, [field.spec.vertex(z.real, z.imag)])
        tp = out / "tree.lqgt"
        tp.write_bytes(tree.to_bytes())
        lo, hi = trial.span
        xs = field.spec.xs()
        sel = (xs >= lo - 1e-12) & (xs <= hi + 1e-12)
        rows = [(float(x), float(d)) for x, d in zip(xs[sel], tree.dist[: field.spec.nx][sel])]
        files += [tp, write_table(out / "distances.csv", ("x", "distance"), rows)]
        return files
    res = analyze_field(trial, field, args.index, field.seed)
    if args.command == "profile":
        files.append(write_table(out / "atoms.csv", *atom_table([res], ("profile",))))
    elif args.command == "variation":
        files.append(write_table(out / "atoms.csv", *atom_table([res])))
    elif args.command == "gmc":
        files.append(write_table(out / "gmc.csv", *gmc_table([res], trial.gmc_epsilon)))
    elif args.command == "coalescence":
        files.append(write_table(out / "coalescence.csv", *coalescence_table([res])))
    return files


def _experiment(args, cfg):
    trial = cfg.trial
    results = run_experiment(trial)
    summary = summarize(trial, results)
    out = args.out
    files = emit_report(summary, args.format, out)
    files.append(write_table(out / "gmc.csv", *gmc_table(results, trial.gmc_epsilon)))
    files.append(write_table(out / "atoms.csv", *atom_table(results)))
    files.append(write_table(out / "coalescence.csv", *coalescence_table(results)))
    return files, summary


def _report(args):
    import json
    path = args.summary
    if path.suffix == ".csv":
        d = read_csv_report(path)
    else:
        d = json.loads(path.read_text(encoding="utf-8"))
    return emit_report(d, args.format, args.out), d


def run_cli(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else 0
    try:
        if args.command == "report":
            files, d = _report(args)
            echo, seed = d.get("config_echo"), d.get("seed")
        else:
            cfg = _config(args)
            echo, seed = cfg.trial.as_dict(), cfg.seed
            if args.command == "experiment":
                files, _ = _experiment(args, cfg)
            else:
                files = _single(args, cfg)
        write_manifest(args.out, files, echo, seed)
    except ConfigError as exc:
        print(f"lqglab: error: config: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001  (reported as a single diagnostic line)
        msg = str(exc).replace("\n", " ")
        print(f"lqglab: error: {type(exc).__name__}: {msg}", file=sys.stderr)
        return 1
    return 0


def main():
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
