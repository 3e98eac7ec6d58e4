"""Command-line interface: synth, train, eval, ablate, gradcheck, inspect.

Every command exits 0 on success.  Failures print a one-line JSON error
record to stderr and exit 2 for configuration/data problems, 1 otherwise.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

from . import ablation, data, evaluation, gradcheck as gradcheck_mod, model, training
from .errors import ConfigError, DataError, PoseliftError, ShapeError
from .kernels import backend_name


def _load_json(path) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"{path}: cannot read config: {exc}") from exc


def _model_config_from_args(args, baseline: model.ModelConfig) -> model.ModelConfig:
    """Start from --config (or the command's baseline) and apply explicit flags."""
    cfg = model.ModelConfig.from_dict(_load_json(args.config)) if args.config else baseline
    overrides = {}
    for flag, field in (
        ("joints", "num_joints"), ("frames", "frames"), ("spatial_dim", "spatial_dim"),
        ("spatial_layers", "spatial_layers"), ("temporal_layers", "temporal_layers"),
        ("heads", "heads"),
    ):
        value = getattr(args, flag, None)
        if value is not None:
            overrides[field] = value
    if getattr(args, "no_cji", False):
        overrides["cji_enabled"] = False
    if getattr(args, "no_cfi", False):
        overrides["cfi_enabled"] = False
    if getattr(args, "full_cfi_maps", False):
        overrides["cfi_full_maps"] = True
    return dataclasses.replace(cfg, **overrides).validate()


def _add_model_flags(parser):
    parser.add_argument("--config", help="JSON file with model config fields")
    parser.add_argument("--joints", type=int)
    parser.add_argument("--frames", type=int)
    parser.add_argument("--spatial-dim", dest="spatial_dim", type=int)
    parser.add_argument("--spatial-layers", dest="spatial_layers", type=int)
    parser.add_argument("--temporal-layers", dest="temporal_layers", type=int)
    parser.add_argument("--heads", type=int)
    parser.add_argument("--no-cji", action="store_true")
    parser.add_argument("--no-cfi", action="store_true")
    parser.add_argument("--full-cfi-maps", action="store_true",
                        help="dense frame-mixing maps instead of per-joint blocks")


# ------------------------------------------------------------------ commands


def _cmd_synth(args) -> int:
    skeleton = data.default_skeleton(args.joints)
    actions = tuple(a.strip() for a in args.actions.split(",") if a.strip())
    if not actions:
        raise ConfigError("--actions must name at least one action")
    records = data.make_dataset(skeleton, args.seed, args.records, args.length,
                                actions=actions, amplitude=args.amplitude,
                                pose_scale=args.pose_scale)
    data.save_records(args.out, records)
    total = sum(r.length for r in records)
    print(f"wrote {len(records)} records ({total} frames) to {args.out}")
    return 0


def _train_config_from_args(args) -> training.TrainConfig:
    if args.config:
        payload = _load_json(args.config)
        cfg = training.TrainConfig.from_dict(payload)
    else:
        raise ConfigError("train requires --config (a JSON file with model+train fields)")
    overrides = {}
    for flag in ("dataset", "out_dir", "epochs", "batch_size", "lr0", "seed", "max_steps"):
        value = getattr(args, flag)
        if value is not None:
            overrides[flag] = value
    if args.no_flip_augment:
        overrides["flip_augment"] = False
    return dataclasses.replace(cfg, **overrides).validate()


def _cmd_train(args) -> int:
    cfg = _train_config_from_args(args)
    result = training.train(cfg)
    epochs = [e for e in result.log if e.get("event") == "epoch"]
    last = epochs[-1] if epochs else {}
    print(json.dumps({
        "checkpoint": result.checkpoint_path,
        "epochs_run": result.epochs_run,
        "steps": result.steps,
        "train_mpjpe": last.get("train_mpjpe"),
        "eval_mpjpe": last.get("eval_mpjpe"),
    }))
    return 0


def _cmd_eval(args) -> int:
    records = data.load_records(args.dataset)
    report = evaluation.evaluate_checkpoint(args.checkpoint, records,
                                            flip_ensemble=not args.no_flip,
                                            with_scale=not args.no_scale)
    if args.csv:
        Path(args.csv).parent.mkdir(parents=True, exist_ok=True)
        Path(args.csv).write_text(report.to_csv(), encoding="utf-8")
    if args.json:
        Path(args.json).parent.mkdir(parents=True, exist_ok=True)
        Path(args.json).write_text(json.dumps(report.to_json(), indent=2) + "\n", encoding="utf-8")
    if not args.csv and not args.json:
        sys.stdout.write(report.to_csv())
    return 0


def _cmd_ablate(args) -> int:
    base = training.TrainConfig.from_dict(_load_json(args.config))
    if args.out_dir:
        base = dataclasses.replace(base, out_dir=args.out_dir)
    seeds = tuple(int(s) for s in args.seeds.split(","))
    rows = [r.strip() for r in args.rows.split(",")] if args.rows else None
    results = ablation.ablate(base, rows=rows, seeds=seeds)
    ablation.write_ablation_csv(results, args.csv)
    print(f"wrote {len(results)} runs to {args.csv}")
    return 0


def _cmd_gradcheck(args) -> int:
    cfg = _model_config_from_args(args, gradcheck_mod.tiny_config())
    report = gradcheck_mod.gradcheck(cfg, seed=args.seed, eps=args.eps, tolerance=args.tol)
    for name, err in sorted(report.per_slot.items()):
        print(f"{'ok ' if err < report.tolerance else 'FAIL'} {err:.3e}  {name}")
    verdict = "PASS" if report.passed else "FAIL"
    print(f"{verdict}: max relative error {report.max_error:.3e} over "
          f"{len(report.per_slot)} slots ({report.node_count} graph nodes)")
    return 0 if report.passed else 1


def _cmd_inspect(args) -> int:
    if args.checkpoint:
        from .checkpoint import load_checkpoint
        _, cfg, extra = load_checkpoint(args.checkpoint)
        print(f"checkpoint extra: {json.dumps(extra)}")
    else:
        cfg = _model_config_from_args(args, model.ModelConfig(num_joints=17, frames=81))
    slots = model.param_slots(cfg)
    width = max(len(name) for name, _ in slots)
    for name, shape in slots:
        n = 1
        for s in shape:
            n *= s
        print(f"{name:<{width}}  {str(shape):>14}  {n:>10,}")
    total = model.param_count(cfg)
    print(f"{'total':<{width}}  {'':>14}  {total:>10,}  ({total / 1e6:.2f}M)")
    print(f"conv backend: {backend_name()}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="poselift",
                                     description="2D-to-3D pose lifting: train, evaluate, ablate.")
    parser.add_argument("--version", action="version", version="poselift 0.1.0")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic JSONL dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--records", type=int, default=8)
    p.add_argument("--length", type=int, default=120, help="frames per record")
    p.add_argument("--joints", type=int, default=17)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--amplitude", type=float, default=200.0)
    p.add_argument("--pose-scale", type=float, default=1.0,
                   help="unit scale for the 3D track (e.g. 0.001 for metres)")
    p.add_argument("--actions", default="walk,sit,wave,turn")
    p.set_defaults(fn=_cmd_synth)

    p = sub.add_parser("train", help="train a model from a JSON config")
    p.add_argument("--config", required=True)
    p.add_argument("--dataset")
    p.add_argument("--out-dir", dest="out_dir")
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", dest="batch_size", type=int)
    p.add_argument("--lr0", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--max-steps", dest="max_steps", type=int)
    p.add_argument("--no-flip-augment", action="store_true")
    p.set_defaults(fn=_cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a dataset")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--no-flip", action="store_true", help="disable flip ensembling")
    p.add_argument("--no-scale", action="store_true", help="rigid (scale-free) alignment for p_mpjpe")
    p.add_argument("--csv", help="write the per-action table here")
    p.add_argument("--json", help="write the JSON report here")
    p.set_defaults(fn=_cmd_eval)

    p = sub.add_parser("ablate", help="run the module-toggle lattice")
    p.add_argument("--config", required=True, help="base train config (JSON)")
    p.add_argument("--csv", required=True, help="output table")
    p.add_argument("--out-dir", dest="out_dir", help="override the runs directory")
    p.add_argument("--seeds", default="0")
    p.add_argument("--rows", help=f"comma list from: {','.join(l for l, _ in ablation.DEFAULT_ROWS)}")
    p.set_defaults(fn=_cmd_ablate)

    p = sub.add_parser("gradcheck", help="finite-difference check on a tiny model")
    _add_model_flags(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--eps", type=float, default=None,
                   help="pin a single step size (default: a small ladder per slot)")
    p.add_argument("--tol", type=float, default=gradcheck_mod.DEFAULT_TOLERANCE)
    p.set_defaults(fn=_cmd_gradcheck)

    p = sub.add_parser("inspect", help="print the parameter ledger for a config or checkpoint")
    _add_model_flags(p)
    p.add_argument("--checkpoint")
    p.set_defaults(fn=_cmd_inspect)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (ConfigError, DataError, ShapeError) as exc:
        sys.stderr.write(json.dumps({"error": type(exc).__name__, "message": str(exc)}) + "\n")
        return 2
    except PoseliftError as exc:
        sys.stderr.write(json.dumps({"error": type(exc).__name__, "message": str(exc)}) + "\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
