"""Command-line entry points.

Subcommands: gen-data, train, eval, sweep, ablate, predict, trace, serve.
Exit codes: 0 success, 1 usage error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(1)


def _add_config_args(parser):
    parser.add_argument("--config", type=Path, default=None,
                        help="TOML config file (see README for the schema)")
    parser.add_argument("--variant", default=None, help="training variant id")
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--epochs1", type=int, default=None, dest="epochs_phase1")
    parser.add_argument("--epochs2", type=int, default=None, dest="epochs_phase2")
    parser.add_argument("--batch-size", type=int, default=None, dest="batch_size")
    parser.add_argument("--image-size", type=int, default=None, dest="image_size")
    parser.add_argument("--lambda-eta", type=float, default=None, dest="lambda_eta")


def _config_from_args(args):
    from .config import load_config

    overrides = {name: getattr(args, name, None)
                 for name in ("variant", "seed", "epochs_phase1", "epochs_phase2",
                              "batch_size", "image_size", "lambda_eta")}
    return load_config(args.config, overrides)


def build_parser() -> _Parser:
    parser = _Parser(prog="rallycast",
                     description="Next-shot forecasting: data, training, "
                                 "evaluation and what-if serving")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", parents=[], help="generate a synthetic tournament")
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--shots", type=int, default=2000)
    p.add_argument("--out", type=Path, required=True)

    p = sub.add_parser("train", help="train a model on a dataset")
    _add_config_args(p)
    p.add_argument("--data", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True,
                   help="output directory (checkpoint + loss CSV)")

    p = sub.add_parser("eval", help="evaluate a checkpoint on the test split")
    p.add_argument("--ckpt", type=Path, required=True)
    p.add_argument("--data", type=Path, required=True)
    p.add_argument("--out", type=Path, default=None, help="write the report JSON here")

    p = sub.add_parser("sweep", help="one-at-a-time hyperparameter sweep")
    _add_config_args(p)
    p.add_argument("--data", type=Path, required=True)
    p.add_argument("--parameter", required=True,
                   choices=["N", "l", "b", "image_size", "train_fraction", "lambda_eta"])
    p.add_argument("--values", required=True,
                   help="comma-separated values, e.g. 1,2,3,4")
    p.add_argument("--out", type=Path, required=True, help="CSV output path")

    p = sub.add_parser("ablate", help="train all seven variants and report")
    _add_config_args(p)
    p.add_argument("--data", type=Path, required=True)
    p.add_argument("--seeds", default="0,1,2")
    p.add_argument("--out", type=Path, required=True, help="CSV output path")

    p = sub.add_parser("predict", help="single-shot prediction from a checkpoint")
    p.add_argument("--ckpt", type=Path, required=True)
    p.add_argument("--player", required=True)
    p.add_argument("--shot", type=Path, required=True,
                   help="JSON file holding one dataset record")
    p.add_argument("--png", type=Path, default=None,
                   help="write the generated response map here")
    p.add_argument("--noise-seed", type=int, default=None)

    p = sub.add_parser("trace", help="episodic memory activation trace")
    p.add_argument("--ckpt", type=Path, required=True)
    p.add_argument("--player", required=True)
    p.add_argument("--shot", type=Path, required=True)
    p.add_argument("--level", choices=["leaf", "top"], default="leaf")

    p = sub.add_parser("serve", help="run the HTTP what-if service")
    p.add_argument("--ckpt", type=Path, required=True)
    p.add_argument("--data", type=Path, default=None,
                   help="dataset for base-context browsing")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)

    p = sub.add_parser("bench", help="compare conv kernel backends")
    p.add_argument("--image-size", type=int, default=64, dest="image_size")
    p.add_argument("--batch", type=int, default=16)
    return parser


def _cmd_gen_data(args) -> int:
    from .synth import default_policies, generate_tournament, write_dataset

    policies, tracked = default_policies()
    records = generate_tournament(seed=args.seed, policies=policies,
                                  n_shots=args.shots, tracked=tracked)
    write_dataset(args.out, records)
    print(f"wrote {len(records)} records to {args.out}")
    return 0


def _cmd_train(args) -> int:
    from .registry import ModelRegistry
    from .synth import chronological_split, load_dataset
    from .training import Trainer

    config = _config_from_args(args)
    records = load_dataset(args.data)
    train, _test, _val = chronological_split(records)
    args.out.mkdir(parents=True, exist_ok=True)
    registry = ModelRegistry(config)
    print(f"variant {config.variant}; parameters: {registry.parameter_report()}")
    trainer = Trainer(registry, config)
    report = trainer.fit(train, log=print)
    registry.save_checkpoint(args.out / "checkpoint.bin")
    report.write_csv(args.out / "losses.csv")
    print(f"checkpoint + loss CSV written under {args.out}")
    return 0


def _cmd_eval(args) -> int:
    from .evaluate import replay_evaluate
    from .registry import ModelRegistry
    from .synth import chronological_split, load_dataset

    registry = ModelRegistry.load_checkpoint(args.ckpt)
    records = load_dataset(args.data)
    _train, test, _val = chronological_split(records)
    report = replay_evaluate(registry, test)
    payload = json.dumps(report.to_json(), indent=2)
    print(payload)
    if args.out:
        args.out.write_text(payload + "\n")
    return 0


def _cmd_sweep(args) -> int:
    from .evaluate import sweep, write_sweep_csv
    from .synth import load_dataset

    config = _config_from_args(args)
    values = [float(v) if "." in v or args.parameter in ("train_fraction", "lambda_eta")
              else int(v) for v in args.values.split(",")]
    records = load_dataset(args.data)
    rows = sweep(args.parameter, values, records, config, log=print)
    write_sweep_csv(rows, args.out)
    print(f"sweep CSV written to {args.out}")
    return 0


def _cmd_ablate(args) -> int:
    from .evaluate import run_ablation_suite, write_ablation_csv
    from .synth import load_dataset

    config = _config_from_args(args)
    seeds = tuple(int(s) for s in args.seeds.split(","))
    records = load_dataset(args.data)
    rows = run_ablation_suite(records, config, seeds=seeds, log=print)
    write_ablation_csv(rows, args.out)
    for row in rows:
        print(f"{row.variant:16s} median mu {row.median_mu:.3f} m, "
              f"median macro AUC {row.median_auc}")
    print(f"ablation CSV written to {args.out}")
    return 0


def _load_record(path: Path):
    from .synth import ShotRecord

    payload = json.loads(path.read_text())
    return ShotRecord.from_json(payload)


def _cmd_predict(args) -> int:
    from .court import to_png_bytes
    from .registry import ModelRegistry

    registry = ModelRegistry.load_checkpoint(args.ckpt)
    record = _load_record(args.shot)
    ctx = registry.context_from_record(record, with_target=False, create_players=False)
    result = registry.predict_next_shot(args.player, ctx, mode="query",
                                        noise_seed=args.noise_seed)
    print(json.dumps(result.to_json(), indent=2))
    if args.png:
        args.png.write_bytes(to_png_bytes(result.response_map))
    return 0


def _cmd_trace(args) -> int:
    from .evaluate import memory_activation_trace
    from .registry import ModelRegistry

    registry = ModelRegistry.load_checkpoint(args.ckpt)
    record = _load_record(args.shot)
    ctx = registry.context_from_record(record, with_target=False, create_players=False)
    rows = memory_activation_trace(registry, args.player, ctx, level=args.level)
    print(json.dumps([{"slot": r.slot, "level": r.level, "weight": r.weight,
                       "timestamp": r.timestamp, "meta": r.meta} for r in rows],
                     indent=2))
    return 0


def _cmd_serve(args) -> int:
    import uvicorn

    from .server import build_app

    app = build_app(args.ckpt, dataset_path=args.data)
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return 0


def _cmd_bench(args) -> int:
    from .nn.kernels import BACKEND
    from .nn.kernels.bench import format_rows, run

    rows = run(image_size=args.image_size, batch=args.batch)
    print(f"active backend: {BACKEND}")
    print(format_rows(rows, args.image_size, args.batch))
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    handlers = {
        "gen-data": _cmd_gen_data,
        "train": _cmd_train,
        "eval": _cmd_eval,
        "sweep": _cmd_sweep,
        "ablate": _cmd_ablate,
        "predict": _cmd_predict,
        "trace": _cmd_trace,
        "serve": _cmd_serve,
        "bench": _cmd_bench,
    }
    try:
        return handlers[args.command](args)
    except KeyboardInterrupt:
        return 130
    except Exception as exc:  # noqa: BLE001 - single CLI failure boundary
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
