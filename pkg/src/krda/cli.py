"""Command-line interface: ``krda {gen,fit,transfer,eval,bench,plot}``.

Exit codes: 0 success, 1 runtime or data error, 2 usage error.  Every command
writes ``<out>.manifest.json`` next to its main output; passing that file back
through ``--config`` replays the run.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import math
import sys
import time
from pathlib import Path

from . import __version__
from .classifier import accuracy, auto_gamma, svm_fit
from .data import GmmSpec, MoonsSpec, gen_gmm, gen_moons, load_csv, save_csv
from .errors import DimensionMismatch, KrdaError
from .experiments import (
    PipelineConfig, circle_modes, csv_rows, gmm_rows, moons_rows, rows_to_csv, summary_to_csv,
)
from .nade import load_model, save_model
from .plot import scatter_svg
from .trainer import METRICS_HEADER, TrainConfig, fit_joint
from .transport import transfer_dataset

log = logging.getLogger("krda")

DEFAULT_ANGLES = "10,20,30,40,50,60,70,80,90"
DEFAULT_GMM_TASKS = "2:3,3:2,4:8"


class UsageError(Exception):
    pass


def _int_list(value) -> list:
    """Parse ``"200,400"``, ``"200..1000:200"`` or a JSON list into ints."""
    if isinstance(value, (list, tuple)):
        return [int(v) for v in value]
    if isinstance(value, int):
        return [value]
    out = []
    for part in str(value).split(","):
        part = part.strip()
        if ".." in part:
            rng, _, step = part.partition(":")
            lo, hi = (int(v) for v in rng.split(".."))
            out.extend(range(lo, hi + 1, int(step or 200)))
        elif part:
            out.append(int(part))
    return out


def _float_list(value) -> list:
    if isinstance(value, (list, tuple)):
        return [float(v) for v in value]
    return [float(v) for v in str(value).split(",") if v.strip()]


def _str_list(value) -> list:
    if isinstance(value, (list, tuple)):
        return [str(v) for v in value]
    return [v.strip() for v in str(value).split(",") if v.strip()]


def _gamma(value):
    return value if value == "auto" else float(value)


def _sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _write_manifest(args, inputs, outputs, started):
    config = {k: v for k, v in vars(args).items() if k not in ("func", "config", "verbose")}
    manifest = {
        "command": args.command,
        "config": config,
        "seed": config.get("seed"),
        "tool": "krda",
        "version": __version__,
        "inputs": {str(p): _sha256(p) for p in inputs if p},
        "outputs": [str(p) for p in outputs],
        "timings": {"elapsed_ms": int(round(1000 * (time.perf_counter() - started)))},
    }
    path = Path(str(outputs[0]) + ".manifest.json")
    path.write_text(json.dumps(manifest, indent=1, sort_keys=True) + "\n", encoding="utf-8")
    return path


def _require(args, *names):
    missing = [n for n in names if getattr(args, n, None) in (None, "")]
    if missing:
        raise UsageError("missing required option(s): " + ", ".join("--" + n.replace("_", "-") for n in missing))


def cmd_gen(args):
    _require(args, "out")
    if args.kind == "moons":
        ds = gen_moons(MoonsSpec(args.n, args.noise, args.rotation, args.seed))
    else:
        modes = args.modes_spec
        if modes is None:
            modes = circle_modes(args.modes, dim=args.dim, radius=args.radius, std=args.std,
                                 phase=math.radians(args.phase))
        ds = gen_gmm(GmmSpec(tuple((m[0], m[1], m[2]) for m in modes), args.n, args.seed))
    save_csv(ds, args.out)
    return [], [args.out]


def _train_config(args) -> TrainConfig:
    return TrainConfig(epochs=args.epochs, batch_size=args.batch_size, learning_rate=args.lr, seed=args.seed,
                       validation_fraction=args.val_fraction, patience=args.patience)


def cmd_fit(args):
    _require(args, "source", "target", "out")
    source, target = load_csv(args.source), load_csv(args.target)
    if source.d != target.d:
        raise DimensionMismatch(f"source has {source.d} feature columns but target has {target.d}")
    metrics_path = args.metrics or str(args.out) + ".metrics.csv"
    lines = [METRICS_HEADER]
    model = fit_joint(source, target, H=args.hidden, N=args.components, cfg=_train_config(args),
                      metrics=lines.append)
    save_model(model, args.out)
    Path(metrics_path).write_text("\n".join(lines) + "\n", encoding="utf-8")
    return [args.source, args.target], [args.out, metrics_path]


def cmd_transfer(args):
    _require(args, "model", "source", "out")
    model = load_model(args.model)
    source = load_csv(args.source)
    report = transfer_dataset(model, source, workers=args.workers)
    save_csv(source.with_features(report.transferred), args.out)
    outputs = [args.out]
    summary = {
        "n": int(source.n),
        "d": int(model.d),
        "max_residual": report.max_residual,
        "failures": [{"row": r, "component": c, "error": e} for r, c, e in report.failures],
        "min_quantile": float(report.quantiles.min()) if source.n else None,
        "max_quantile": float(report.quantiles.max()) if source.n else None,
    }
    if args.report:
        Path(args.report).write_text(json.dumps(summary, indent=1) + "\n", encoding="utf-8")
        outputs.append(args.report)
    print(json.dumps({"max_residual": summary["max_residual"], "failures": len(report.failures)}))
    return [args.model, args.source], outputs


def cmd_eval(args):
    _require(args, "train", "test")
    train, test = load_csv(args.train), load_csv(args.test)
    if train.labels is None:
        raise KrdaError(f"{args.train}: no 'label' column")
    if test.labels is None:
        raise KrdaError(f"{args.test}: no 'label' column")
    if train.d != test.d:
        raise DimensionMismatch(f"train has {train.d} feature columns but test has {test.d}")
    gamma = _gamma(args.gamma)
    clf = svm_fit(train, C=args.C, gamma=gamma, seed=args.seed)
    result = {
        "accuracy": accuracy(clf, test),
        "n_train": int(train.n),
        "n_test": int(test.n),
        "C": args.C,
        "gamma": auto_gamma(train.features) if gamma == "auto" else gamma,
        "support_vectors": int(clf.dual_coef.size),
    }
    text = json.dumps(result, indent=1)
    print(text)
    if args.out:
        Path(args.out).write_text(text + "\n", encoding="utf-8")
        return [args.train, args.test], [args.out]
    return [args.train, args.test], []


def cmd_bench(args):
    _require(args, "out")
    cfg = PipelineConfig(
        hidden=args.hidden, components=args.components, epochs=args.epochs, batch_size=args.batch_size,
        learning_rate=args.lr, patience=args.patience, validation_fraction=args.val_fraction,
        svm_C=args.C, svm_gamma=_gamma(args.gamma), noise=args.noise, test_n=args.test_n, workers=args.workers,
    )
    inputs = []
    if args.suite == "moons":
        rows = moons_rows(_float_list(args.angles), args.repeats, _int_list(args.train_n), cfg, args.seed)
    elif args.suite == "gmm":
        rows = gmm_rows(_str_list(args.tasks), args.repeats, _int_list(args.train_n), cfg, args.seed)
    else:
        _require(args, "source", "target", "test")
        inputs = [args.source, args.target, args.test]
        source, target, test = (load_csv(p) for p in inputs)
        if not source.d == target.d == test.d:
            raise DimensionMismatch(f"feature columns differ: source {source.d}, target {target.d}, test {test.d}")
        rows = csv_rows(source, target, test, args.repeats, cfg, args.seed)
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    Path(args.out).write_text(rows_to_csv(rows), encoding="utf-8")
    summary_path = args.summary or str(Path(args.out).with_suffix("")) + ".summary.csv"
    summary = summary_to_csv(rows)
    Path(summary_path).write_text(summary, encoding="utf-8")
    sys.stdout.write(summary)
    return inputs, [args.out, summary_path]


def cmd_plot(args):
    _require(args, "source", "target", "transferred", "out")
    clouds = [load_csv(p) for p in (args.source, args.target, args.transferred)]
    for path, ds in zip((args.source, args.target, args.transferred), clouds):
        if ds.d != 2:
            raise DimensionMismatch(f"{path}: plotting needs 2-D data, got d={ds.d}")
    svg = scatter_svg(*(c.features for c in clouds), arrows=args.arrows, seed=args.seed)
    Path(args.out).write_text(svg, encoding="utf-8")
    return [args.source, args.target, args.transferred], [args.out]


def _add_training_flags(p):
    p.add_argument("--components", type=int, default=5, help="mixture components per conditional")
    p.add_argument("--hidden", type=int, default=50, help="hidden size H")
    p.add_argument("--epochs", type=int, default=300)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--batch-size", type=int, default=64)
    p.add_argument("--patience", type=int, default=30, help="0 disables early stopping")
    p.add_argument("--val-fraction", type=float, default=0.1)


def build_parser():
    parser = argparse.ArgumentParser(prog="krda", description="Knothe-Rosenblatt domain adaptation")
    parser.add_argument("--version", action="version", version=f"krda {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    parsers = {}

    def add(name, func, help_):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", help="JSON file of option values (or a run manifest)")
        p.add_argument("-v", "--verbose", action="store_true")
        p.set_defaults(func=func)
        parsers[name] = p
        return p

    p = add("gen", cmd_gen, "generate a synthetic dataset")
    p.add_argument("kind", choices=["moons", "gmm"])
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.add_argument("--rotation", type=float, default=0.0, help="moons: rotation in degrees")
    p.add_argument("--noise", type=float, default=0.1, help="moons: Gaussian noise std")
    p.add_argument("--modes", type=int, default=2, help="gmm: number of modes on a circle")
    p.add_argument("--dim", type=int, default=2)
    p.add_argument("--radius", type=float, default=3.0)
    p.add_argument("--std", type=float, default=0.5)
    p.add_argument("--phase", type=float, default=0.0, help="gmm: angular offset of the first mode, degrees")
    p.set_defaults(modes_spec=None)

    p = add("fit", cmd_fit, "fit the joint source/target density model")
    p.add_argument("--source")
    p.add_argument("--target")
    p.add_argument("--out")
    p.add_argument("--metrics", help="per-epoch metrics CSV (default: <out>.metrics.csv)")
    p.add_argument("--seed", type=int, default=0)
    _add_training_flags(p)

    p = add("transfer", cmd_transfer, "transfer source rows into the target domain")
    p.add_argument("--model")
    p.add_argument("--source")
    p.add_argument("--out")
    p.add_argument("--report")
    p.add_argument("--workers", type=int, default=None)

    p = add("eval", cmd_eval, "train an SVM and report target accuracy")
    p.add_argument("--train")
    p.add_argument("--test")
    p.add_argument("--out")
    p.add_argument("--C", type=float, default=1.0)
    p.add_argument("--gamma", default="auto")
    p.add_argument("--seed", type=int, default=0)

    p = add("bench", cmd_bench, "run a repeated benchmark suite")
    p.add_argument("suite", choices=["moons", "gmm", "csv"])
    p.add_argument("--angles", default=DEFAULT_ANGLES)
    p.add_argument("--tasks", default=DEFAULT_GMM_TASKS, help="gmm: source:target mode counts")
    p.add_argument("--repeats", type=int, default=5)
    p.add_argument("--train-n", default="300", help="size list, e.g. 300 or 200..1000:200")
    p.add_argument("--test-n", type=int, default=1000)
    p.add_argument("--noise", type=float, default=0.1)
    p.add_argument("--source")
    p.add_argument("--target")
    p.add_argument("--test")
    p.add_argument("--out")
    p.add_argument("--summary")
    p.add_argument("--seed", type=int, default=0, help="master seed")
    p.add_argument("--C", type=float, default=1.0)
    p.add_argument("--gamma", default="auto")
    p.add_argument("--workers", type=int, default=1)
    _add_training_flags(p)

    p = add("plot", cmd_plot, "SVG scatter of source/target/transferred")
    p.add_argument("--source")
    p.add_argument("--target")
    p.add_argument("--transferred")
    p.add_argument("--out")
    p.add_argument("--arrows", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    return parser, parsers


def _load_config(path, parser):
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if isinstance(doc, dict) and isinstance(doc.get("config"), dict) and "command" in doc:
        doc = doc["config"]
    if not isinstance(doc, dict):
        raise UsageError(f"{path}: config must be a JSON object")
    known = {a.dest for a in parser._actions}
    cfg = {}
    for key, value in doc.items():
        dest = key.replace("-", "_")
        if dest in ("command", "kind", "suite"):
            continue  # positional; taken from the command line
        if dest == "modes" and isinstance(value, list):
            dest = "modes_spec"
        elif dest not in known and dest != "modes_spec":
            raise UsageError(f"{path}: unknown option {key!r}")
        cfg[dest] = value
    return cfg


def main(argv=None) -> int:
    parser, parsers = build_parser()
    args = parser.parse_args(argv)
    sub = parsers[args.command]
    try:
        if args.config:
            sub.set_defaults(**_load_config(args.config, sub))
            args = parser.parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        started = time.perf_counter()
        inputs, outputs = args.func(args)
        if outputs:
            _write_manifest(args, inputs, outputs, started)
    except UsageError as exc:
        sub.print_usage(sys.stderr)
        print(f"krda {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except (KrdaError, ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"krda {args.command}: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
