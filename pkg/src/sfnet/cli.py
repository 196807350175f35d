"""Command-line front end: gen, dataset, train, classify, predict.

Every command echoes its resolved configuration (including derived seeds) as
a single JSON line before doing any work, so a logged invocation can always
be replayed. Exit codes: 0 success, 1 user/configuration error, 2 broken
internal invariant.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import dataset as ds_mod
from . import generator as gen_mod
from . import graph as graph_mod
from . import mlp as mlp_mod
from . import pipeline as pipe_mod
from .errors import (
    CorruptDataset,
    InsufficientTail,
    InvariantViolation,
    NonFiniteParameters,
    SfnetError,
    ShapeMismatch,
)
from .seeding import derive_seed

OUTDIR_ENV = "SFNET_OUT"


def _echo_config(command: str, resolved: dict) -> None:
    print(f"config[{command}]: " + json.dumps(resolved, sort_keys=True))


def _parse_grid(text: str) -> list[float]:
    try:
        return [float(part) for part in text.split(",") if part.strip()]
    except ValueError as exc:
        raise SfnetError(f"bad grid value in {text!r}") from exc


def _load_query(args) -> graph_mod.AdjacencyMatrix:
    if args.matrix is not None:
        return graph_mod.load_matrix(args.matrix)
    if args.edges is None or args.nodes is None:
        raise SfnetError("provide --matrix FILE, or --edges FILE with --nodes N")
    return graph_mod.read_edge_list(args.edges, args.nodes)


def cmd_gen(args) -> int:
    beta = args.beta if args.beta is not None else round(1.0 - args.alpha - args.gamma, 12)
    if args.x_in is not None or args.x_out is not None:
        if args.x_in is None or args.x_out is None:
            raise SfnetError("--x-in and --x-out must be given together")
        gen_mod.ExponentTarget(args.x_in, args.x_out)
        params = gen_mod.params_from_targets(args.alpha, beta, args.gamma, args.x_in, args.x_out)
    else:
        if args.delta_in is None or args.delta_out is None:
            raise SfnetError("provide either --x-in/--x-out or --delta-in/--delta-out")
        params = gen_mod.GeneratorParams(args.alpha, beta, args.gamma, args.delta_in, args.delta_out)
    _echo_config("gen", {
        "alpha": params.alpha, "beta": params.beta, "gamma": params.gamma,
        "delta_in": params.delta_in, "delta_out": params.delta_out,
        "nodes": args.nodes, "seed": args.seed, "x_min": args.x_min, "out": str(args.out),
    })
    g = gen_mod.generate(params, args.nodes, args.seed)
    matrix = graph_mod.AdjacencyMatrix.from_graph(g)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    graph_mod.save_matrix(matrix, out.with_suffix(".bin"))
    graph_mod.write_edge_list(matrix, out.with_suffix(".edges"))
    stats = graph_mod.degree_statistics(g)

    def estimate(hist) -> str:
        try:
            return f"{graph_mod.estimate_tail_exponent(hist, args.x_min):.4f}"
        except InsufficientTail:
            return "n/a"

    print(
        f"stats: nodes={g.node_count} edges={g.edge_count} links={matrix.ones()} "
        f"x-in-estimate={estimate(stats.in_histogram)} x-out-estimate={estimate(stats.out_histogram)}"
    )
    return 0


def _subtypes_from_grids(x_in_grid: list[float] | None, x_out_grid: list[float] | None):
    if x_in_grid is None and x_out_grid is None:
        return None
    xs_in = x_in_grid if x_in_grid is not None else list(ds_mod.X_GRID)
    xs_out = x_out_grid if x_out_grid is not None else list(ds_mod.X_GRID)
    return [ds_mod.SubtypeLabel(a, b) for a in xs_in for b in xs_out]


def cmd_dataset(args) -> int:
    if args.kind == "ann1":
        subtypes = _subtypes_from_grids(
            _parse_grid(args.x_in_grid) if args.x_in_grid else None,
            _parse_grid(args.x_out_grid) if args.x_out_grid else None,
        )
        _echo_config("dataset", {
            "kind": "ann1", "side": args.side, "per_group": args.per_group, "seed": args.seed,
            "x_in_grid": sorted({st.x_in for st in subtypes}) if subtypes else list(ds_mod.X_GRID),
            "x_out_grid": sorted({st.x_out for st in subtypes}) if subtypes else list(ds_mod.X_GRID),
            "out": str(args.out),
        })
        ds = ds_mod.build_ann1_dataset(args.side, args.per_group, args.seed, subtypes=subtypes)
    else:
        predicted = ds_mod.SubtypeLabel(args.x_in, args.x_out)
        _echo_config("dataset", {
            "kind": "ann2", "side": args.side, "per_class": args.per_class, "seed": args.seed,
            "x_in": predicted.x_in, "x_out": predicted.x_out, "out": str(args.out),
        })
        ds = ds_mod.build_ann2_dataset(args.side, predicted, args.per_class, args.seed)
    ds_mod.save_dataset(ds, args.out)
    if args.manifest:
        ds_mod.write_manifest(ds, str(args.out) + ".manifest.csv")
    print(f"dataset: samples={len(ds)} side={ds.matrix_side} arity={ds.label_arity} file={args.out}")
    return 0


def cmd_train(args) -> int:
    ds = ds_mod.load_dataset(args.dataset)
    if ds.label_arity == mlp_mod.GROUP_COUNT:
        kind, builder = "ann1", mlp_mod.build_ann1
    elif ds.label_arity == 2:
        kind, builder = "ann2", mlp_mod.build_ann2
    else:
        raise CorruptDataset(f"dataset arity {ds.label_arity} matches no supported architecture")
    init_seed = args.init_seed if args.init_seed is not None else derive_seed(args.seed, 1)
    cfg = mlp_mod.TrainConfig(
        learning_rate=args.lr, batch_size=args.batch_size, epochs=args.epochs,
        seed=args.seed, validation_fraction=args.val_fraction, momentum=args.momentum,
    )
    _echo_config("train", {
        "kind": kind, "dataset": str(args.dataset), "out": str(args.out),
        "learning_rate": cfg.learning_rate, "batch_size": cfg.batch_size,
        "epochs": cfg.epochs, "seed": cfg.seed, "init_seed": init_seed,
        "validation_fraction": cfg.validation_fraction, "momentum": cfg.momentum,
    })
    model = builder(ds.matrix_side, seed=init_seed)
    model, history = mlp_mod.train(model, ds.inputs, ds.labels, cfg)
    mlp_mod.save_model(model, args.out)
    first = history.train_loss[0] if history.train_loss else float("nan")
    last = history.train_loss[-1] if history.train_loss else float("nan")
    print(f"train: kind={kind} epochs={cfg.epochs} first-loss={first:.6f} last-loss={last:.6f} file={args.out}")
    return 0


def cmd_classify(args) -> int:
    _echo_config("classify", {"model": str(args.model), "matrix": str(args.matrix)})
    model = mlp_mod.load_model(args.model)
    matrix = graph_mod.load_matrix(args.matrix)
    if model.input_size != matrix.size * matrix.size:
        raise ShapeMismatch(
            f"model expects {model.input_size} inputs, matrix provides {matrix.size * matrix.size}"
        )
    prediction = pipe_mod.predict_subtype(model, matrix)
    print(
        f"subtype: group={prediction.group.index} x_in={prediction.label.x_in} "
        f"x_out={prediction.label.x_out} probability={prediction.probability:.6f}"
    )
    return 0


def _resolve_predict_config(args) -> tuple[pipe_mod.PipelineConfig, dict]:
    file_cfg: dict = {}
    if args.config is not None:
        file_cfg = json.loads(Path(args.config).read_text())

    def pick(name, default):
        value = getattr(args, name, None)
        if value is not None:
            return value
        return file_cfg.get(name, default)

    master = int(pick("seed", 0))
    threshold = float(pick("threshold", 0.80))
    per_class = int(pick("per_class", 200))
    per_group = pick("per_group", None)
    m = int(pick("m", 0))

    x_in_grid = pick("x_in_grid", None)
    x_out_grid = pick("x_out_grid", None)
    if isinstance(x_in_grid, str):
        x_in_grid = _parse_grid(x_in_grid)
    if isinstance(x_out_grid, str):
        x_out_grid = _parse_grid(x_out_grid)
    subtypes = _subtypes_from_grids(x_in_grid, x_out_grid)
    if subtypes is None:
        # Default: every grid cell the generator can actually reach.
        subtypes = ds_mod.feasible_subtypes()

    budget_cfg = dict(file_cfg.get("budget", {}))
    if args.budget_mode is not None:
        budget_cfg["mode"] = args.budget_mode
    if args.max_candidates is not None:
        budget_cfg["max_candidates"] = args.max_candidates
    if args.ceiling is not None:
        budget_cfg["exhaustive_ceiling"] = args.ceiling
    budget = pipe_mod.CandidateBudget(
        mode=budget_cfg.get("mode", "sampled"),
        max_candidates=int(budget_cfg.get("max_candidates", 10_000)),
        seed=int(budget_cfg.get("seed", derive_seed(master, 31))),
        exhaustive_ceiling=int(budget_cfg.get("exhaustive_ceiling", 2 ** 20)),
    )

    def train_cfg(section: str, tag: int) -> mlp_mod.TrainConfig:
        block = dict(file_cfg.get(section, {}))
        block.setdefault("seed", derive_seed(master, tag))
        return mlp_mod.TrainConfig(**block)

    ann1_train = train_cfg("ann1", 13)
    ann2_train = train_cfg("ann2", 23)

    outdir = args.outdir or file_cfg.get("outdir") or os.environ.get(OUTDIR_ENV, "sfnet-out")
    config = pipe_mod.PipelineConfig(
        outdir=outdir,
        subtypes=subtypes,
        per_group=int(per_group) if per_group is not None else None,
        per_class=per_class,
        ann1_train=ann1_train,
        ann2_train=ann2_train,
        budget=budget,
        threshold=threshold,
        seed=master,
        ann1_checkpoint=pick("ann1_checkpoint", None),
        ann2_checkpoint=pick("ann2_checkpoint", None),
    )
    resolved = {
        "m": m,
        "seed": master,
        "threshold": threshold,
        "per_group": config.per_group,
        "per_class": per_class,
        "subtypes": [[st.x_in, st.x_out] for st in subtypes],
        "budget": {
            "mode": budget.mode,
            "max_candidates": budget.max_candidates,
            "seed": budget.seed,
            "exhaustive_ceiling": budget.exhaustive_ceiling,
        },
        "ann1": {
            "learning_rate": ann1_train.learning_rate, "batch_size": ann1_train.batch_size,
            "epochs": ann1_train.epochs, "seed": ann1_train.seed,
            "validation_fraction": ann1_train.validation_fraction, "momentum": ann1_train.momentum,
        },
        "ann2": {
            "learning_rate": ann2_train.learning_rate, "batch_size": ann2_train.batch_size,
            "epochs": ann2_train.epochs, "seed": ann2_train.seed,
            "validation_fraction": ann2_train.validation_fraction, "momentum": ann2_train.momentum,
        },
        "outdir": str(outdir),
        "ann1_checkpoint": str(config.ann1_checkpoint) if config.ann1_checkpoint else None,
        "ann2_checkpoint": str(config.ann2_checkpoint) if config.ann2_checkpoint else None,
    }
    return config, {"m": m, **resolved}


def cmd_predict(args) -> int:
    config, resolved = _resolve_predict_config(args)
    _echo_config("predict", resolved)
    query = _load_query(args)
    result = pipe_mod.run_pipeline(query, resolved["m"], config)
    outdir = Path(config.outdir)
    summary = {
        "predicted_group": result.prediction.group.index,
        "predicted_x_in": result.prediction.label.x_in,
        "predicted_x_out": result.prediction.label.x_out,
        "predicted_probability": result.prediction.probability,
        "accepted": len(result.report.accepted),
        "rejected": result.report.rejected_count,
        "zero_positions": result.report.zero_positions,
        "mode": result.report.mode,
        "threshold": result.report.threshold,
        "ann1_source": result.ann1_source,
        "ann2_source": result.ann2_source,
        "paths": {name: os.path.relpath(p, outdir) for name, p in result.paths.items()},
    }
    (outdir / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    print(
        f"predict: group={result.prediction.group.index} "
        f"probability={result.prediction.probability:.6f} "
        f"accepted={len(result.report.accepted)} rejected={result.report.rejected_count} "
        f"outdir={outdir}"
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sfnet",
        description="Directed scale-free network synthesis and completion search.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate one network and write matrix/edge-list files")
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--gamma", type=float, required=True)
    p.add_argument("--beta", type=float, default=None, help="defaults to 1 - alpha - gamma")
    p.add_argument("--x-in", type=float, default=None, help="target in-degree tail exponent")
    p.add_argument("--x-out", type=float, default=None, help="target out-degree tail exponent")
    p.add_argument("--delta-in", type=float, default=None, help="in-attachment offset (alternative to --x-in)")
    p.add_argument("--delta-out", type=float, default=None)
    p.add_argument("--nodes", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--x-min", type=int, default=5, help="tail cutoff for the exponent estimate")
    p.add_argument("--out", required=True, help="output prefix; writes .bin and .edges")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("dataset", help="build a labeled training corpus")
    p.add_argument("kind", choices=["ann1", "ann2"])
    p.add_argument("--side", type=int, required=True, help="matrix side (N+M)")
    p.add_argument("--per-group", type=int, default=None, help="ann1: samples per subtype (default: side)")
    p.add_argument("--per-class", type=int, default=None, help="ann2: samples per class")
    p.add_argument("--x-in", type=float, default=None, help="ann2: predicted in-exponent")
    p.add_argument("--x-out", type=float, default=None, help="ann2: predicted out-exponent")
    p.add_argument("--x-in-grid", default=None, help="ann1: comma-separated in-exponent grid")
    p.add_argument("--x-out-grid", default=None, help="ann1: comma-separated out-exponent grid")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--manifest", action="store_true", help="also write a CSV manifest")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_dispatch_dataset)

    p = sub.add_parser("train", help="train a classifier on a saved corpus")
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--lr", type=float, default=0.001)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--epochs", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--init-seed", type=int, default=None, help="weight init seed (default derived from --seed)")
    p.add_argument("--val-fraction", type=float, default=0.1)
    p.add_argument("--momentum", type=float, default=0.9)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("classify", help="predict the subtype of a saved matrix")
    p.add_argument("--model", required=True)
    p.add_argument("--matrix", required=True)
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("predict", help="run the full completion search")
    p.add_argument("--matrix", default=None, help="query as a binary matrix file")
    p.add_argument("--edges", default=None, help="query as an edge-list text file")
    p.add_argument("--nodes", type=int, default=None, help="node count for --edges input")
    p.add_argument("--m", type=int, default=None, help="number of missing nodes to pad")
    p.add_argument("--config", default=None, help="JSON config file; flags override it")
    p.add_argument("--outdir", default=None, help=f"output directory (default ${OUTDIR_ENV} or sfnet-out)")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--threshold", type=float, default=None)
    p.add_argument("--per-group", dest="per_group", type=int, default=None)
    p.add_argument("--per-class", dest="per_class", type=int, default=None)
    p.add_argument(
        "--budget-mode", choices=["exhaustive", "sampled"], default=None,
        help="exhaustive walks all 2^z completions (z = zero positions) up to the ceiling; "
             "sampled draws distinct seeded completions: uniform integers for z <= 62, "
             "a random XOR bit-flip walk beyond that",
    )
    p.add_argument("--max-candidates", type=int, default=None)
    p.add_argument("--ceiling", type=int, default=None, help="exhaustive-mode candidate ceiling (default 2^20)")
    p.set_defaults(func=cmd_predict)
    return parser


def _dispatch_dataset(args) -> int:
    if args.kind == "ann1":
        if args.per_group is None:
            args.per_group = args.side
    else:
        if args.per_class is None:
            raise SfnetError("ann2 datasets need --per-class")
        if args.x_in is None or args.x_out is None:
            raise SfnetError("ann2 datasets need --x-in and --x-out")
    return cmd_dataset(args)


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (InvariantViolation, NonFiniteParameters) as exc:
        print(f"error[{args.command}]: internal invariant violated: {exc}", file=sys.stderr)
        return 2
    except SfnetError as exc:
        print(f"error[{args.command}]: {exc}", file=sys.stderr)
        return 1
    except (OSError, json.JSONDecodeError, ValueError) as exc:
        print(f"error[{args.command}]: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
