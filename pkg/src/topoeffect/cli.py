"""Command-line interface.

Every subcommand accepts ``--config FILE``: a plain-text file of ``key = value``
lines whose keys are flag names (``reps = 50``, ``n-big = 5000``). Flags given on
the command line override the file.
"""
import argparse
import csv
import io
import json
import sys
from pathlib import Path

from .diagrams import DiagramMetric, PersistenceDiagram
from .estimands import ObservationalSample, TopologicalEffectEstimator
from .exceptions import TopoEffectError
from .experiments import (
    DEFAULT_DELTAS,
    ExperimentConfig,
    emit_figure1_data,
    run_delta_sweep,
    run_noncommutation_demo,
    run_table1,
    sweep_to_csv,
    sweep_to_json,
)
from .filtrations import GridSpec, SummaryConfig, summarize
from .landscapes import LandscapeConfig
from .synthgen import Design2D, SeededRng, draw_observational_2d

COMMANDS = ("sweep", "table1", "fig1", "noncommute", "ph", "effect", "sample")


def _deltas(text):
    return tuple(float(v) for v in text.split(",") if v.strip())


def _common():
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", help="key = value file mirroring these flags")
    p.add_argument("--seed", type=int, default=20240601)
    p.add_argument("--reps", type=int, default=50, help="Monte Carlo replications")
    p.add_argument("--n", type=int, default=None,
                   help="sample size: per arm per stratum (sweep), total (table1, sample), "
                        "per cell (noncommute), per law (fig1)")
    p.add_argument("--delta", default=None,
                   help="separation; comma-separated list for sweep")
    p.add_argument("--metric", default="wasserstein:2", help="bottleneck or wasserstein:p")
    p.add_argument("--summary", default=None, help="vr0, kde[:bandwidth] or dtm[:m0]")
    p.add_argument("--policy", default="drop", help="essential class: drop or cap:<value>")
    p.add_argument("--layers", type=int, default=3, help="landscape layers K")
    p.add_argument("--grid", default=None, help="landscape grid lo:hi:n (frozen from a pilot if omitted)")
    p.add_argument("--out", default="-", help="output file, '-' for stdout")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--jobs", type=int, default=1, help="worker processes")
    p.add_argument("--n-big", type=int, default=5000, help="benchmark points per arm per stratum")
    p.add_argument("--truth-reps", type=int, default=20, help="benchmark replications")
    return p


def build_parser():
    parser = argparse.ArgumentParser(
        prog="topoeffect",
        description="Persistent-homology treatment effects and their synthetic experiments.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    common = _common()
    sub.add_parser("sweep", parents=[common], help="topological vs mean effect across separations")
    sub.add_parser("table1", parents=[common], help="confounded observational comparison")
    fig1 = sub.add_parser("fig1", parents=[common], help="motivating 1-D densities and diagrams")
    fig1.add_argument("--y-grid", default="-4:4:401", help="density curve grid lo:hi:n")
    sub.add_parser("noncommute", parents=[common], help="pooled vs stratum-averaged landscapes")
    ph = sub.add_parser("ph", parents=[common], help="diagram of a CSV point cloud")
    ph.add_argument("input", help="CSV with columns y1..yp")
    effect = sub.add_parser("effect", parents=[common], help="estimators on a CSV observational sample")
    effect.add_argument("input", help="CSV with columns t, z, y1..yp")
    sample = sub.add_parser("sample", parents=[common], help="export a synthetic observational sample")
    sample.add_argument("--with-counterfactuals", action="store_true")
    return parser


def read_config_file(path):
    """Parse ``key = value`` lines into argv tokens; ``#`` starts a comment."""
    tokens = []
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            key, _, value = line.partition(" ")
        key, value = key.strip().replace("_", "-"), value.strip()
        if not key:
            raise TopoEffectError(f"{path}:{lineno}: missing key")
        if key == "with-counterfactuals":
            if value.lower() in ("1", "true", "yes", "on"):
                tokens.append("--with-counterfactuals")
            continue
        # joined form so values such as "-3:3:61" are not taken for flags
        tokens.append(f"--{key}={value}")
    return tokens


def _expand_config(argv):
    argv = list(argv)
    if not argv or argv[0] not in COMMANDS:
        return argv
    for i, tok in enumerate(argv):
        if tok == "--config" and i + 1 < len(argv):
            path = argv[i + 1]
        elif tok.startswith("--config="):
            path = tok.split("=", 1)[1]
        else:
            continue
        # file values first so that later command-line flags win
        return [argv[0], *read_config_file(path), *argv[1:]]
    return argv


def _experiment_config(args, deltas=None, delta=None):
    design = Design2D(delta=1.0 if delta is None else delta)
    kwargs = {}
    if args.n is not None:
        kwargs["n_per_arm" if args.command == "sweep" else "n_total"] = args.n
    lcfg = LandscapeConfig(args.layers, GridSpec.parse(args.grid) if args.grid else None)
    return ExperimentConfig(
        design=design,
        deltas=deltas or DEFAULT_DELTAS,
        n_reps=args.reps,
        seed=args.seed,
        summary=SummaryConfig.parse(args.summary or "vr0", infinite_bar_policy=args.policy),
        lcfg=lcfg,
        metric=DiagramMetric.parse(args.metric),
        n_big=args.n_big,
        n_truth_reps=args.truth_reps,
        jobs=args.jobs,
        **kwargs,
    )


def _rows_csv(header, rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def _flatten(prefix, obj, out):
    if isinstance(obj, dict):
        for k, v in obj.items():
            _flatten(f"{prefix}.{k}" if prefix else str(k), v, out)
    elif isinstance(obj, list) and obj and isinstance(obj[0], dict):
        for i, v in enumerate(obj):
            _flatten(f"{prefix}[{i}]", v, out)
    else:
        out.append((prefix, json.dumps(obj) if isinstance(obj, list) else obj))
    return out


def _emit(args, text):
    if args.out == "-":
        sys.stdout.write(text)
    else:
        Path(args.out).write_text(text)


def cmd_sweep(args):
    deltas = _deltas(args.delta) if args.delta else DEFAULT_DELTAS
    rows = run_delta_sweep(_experiment_config(args, deltas=deltas))
    return sweep_to_csv(rows) if args.format == "csv" else sweep_to_json(rows) + "\n"


def cmd_table1(args):
    delta = float(args.delta) if args.delta else 1.0
    report = run_table1(_experiment_config(args, delta=delta))
    return report.to_csv() if args.format == "csv" else report.to_json() + "\n"


def cmd_fig1(args):
    data = emit_figure1_data(grid=GridSpec.parse(args.y_grid), n_samples=args.n or 5000,
                             seed=args.seed,
                             summary=SummaryConfig.parse(args.summary or "kde",
                                                         infinite_bar_policy=args.policy))
    if args.format == "json":
        return json.dumps(data.to_dict()) + "\n"
    if args.out != "-":
        Path(args.out).with_suffix(".diagrams.csv").write_text(data.diagrams_csv())
        return data.curves_csv()
    return data.curves_csv() + "\n" + data.diagrams_csv()


def cmd_noncommute(args):
    delta = float(args.delta) if args.delta else 1.0
    report = run_noncommutation_demo(_experiment_config(args, delta=delta), n_per_cell=args.n or 200)
    if args.format == "json":
        return json.dumps(report, indent=2) + "\n"
    return _rows_csv(["key", "value"], _flatten("", report, []))


def cmd_ph(args):
    cloud = _read_cloud(Path(args.input).read_text())
    config = SummaryConfig.parse(args.summary or "vr0", infinite_bar_policy=args.policy)
    diagram = summarize(cloud, config)
    return diagram.to_csv() if args.format == "csv" else diagram.to_json() + "\n"


def _read_cloud(text):
    reader = csv.DictReader(io.StringIO(text))
    cols = sorted((c for c in reader.fieldnames if c.startswith("y") and c[1:].isdigit()),
                  key=lambda c: int(c[1:]))
    if not cols:
        raise TopoEffectError("point-cloud CSV needs columns y1..yp")
    return [[float(r[c]) for c in cols] for r in reader]


def cmd_effect(args):
    sample = ObservationalSample.from_csv(Path(args.input).read_text())
    est = TopologicalEffectEstimator(
        summary=SummaryConfig.parse(args.summary or "vr0", infinite_bar_policy=args.policy),
        metric=args.metric, n_layers=args.layers, grid=args.grid,
    ).fit(sample.y, sample.t, sample.z)
    report = est.report()
    if args.format == "json":
        return json.dumps(report, indent=2) + "\n"
    return _rows_csv(["key", "value"], _flatten("", report, []))


def cmd_sample(args):
    delta = float(args.delta) if args.delta else 1.0
    sample = draw_observational_2d(Design2D(delta=delta), args.n or 600, SeededRng(args.seed))
    if args.format == "json":
        raise TopoEffectError("sample export is CSV only")
    return sample.to_csv(with_counterfactuals=args.with_counterfactuals)


HANDLERS = {
    "sweep": cmd_sweep,
    "table1": cmd_table1,
    "fig1": cmd_fig1,
    "noncommute": cmd_noncommute,
    "ph": cmd_ph,
    "effect": cmd_effect,
    "sample": cmd_sample,
}


def main(argv=None):
    parser = build_parser()
    argv = sys.argv[1:] if argv is None else argv
    try:
        args = parser.parse_args(_expand_config(argv))
        _emit(args, HANDLERS[args.command](args))
    except (TopoEffectError, OSError) as err:
        print(f"topoeffect: error: {err}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
