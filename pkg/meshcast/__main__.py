"""
Command-line entry point for meshcast.
"""

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import List, Optional

from pydantic import ValidationError

from .data.preprocess import preprocess
from .data.synth import synth_generate
from .data.volume import MODALITIES, VolumeRecord, load_dataset, write_case
from .model.checkpoint import load_checkpoint, save_checkpoint
from .model.flops import flops_estimate
from .sequence.base import SeqModuleKind
from .training.ablation import format_ablation, run_ablation, trend_holds
from .training.config import AblationGrid, TrainConfig, load_ablation_grid, load_train_config
from .training.evaluate import evaluate
from .training.segment import segment
from .training.trainer import prepare_data, train_tps
from .utils import format_table
from .utils.errors import ConfigError, MeshCastError
from .utils.logs import configure_logging

logger = logging.getLogger("meshcast")

SEQ_KINDS = ["lstm", "convlstm", "xlstm", "transformer", "mamba"]
SCHEDULES = ["tps", "ordered", "shuffled", "reverse"]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="meshcast", description="M-Net brain tumor segmentation")
    parser.add_argument("--log-level", default=None, help="Log level (default: MESHCAST_LOG_LEVEL or INFO)")
    sub = parser.add_subparsers(dest="command", required=True)

    def model_flags(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", type=Path, help="TrainConfig JSON file")
        p.add_argument("--seed", type=int, help="Override the configured seed")
        p.add_argument("--seq-kind", choices=SEQ_KINDS, help="Sequential module inside Mesh-Cast")
        p.add_argument("--phase", choices=SCHEDULES, help="Training schedule")
        p.add_argument("--frames", type=int, help="Frames per sequence (T)")

    train = sub.add_parser("train", help="Train an M-Net with the TPS schedule")
    model_flags(train)
    train.add_argument("--data-dir", type=Path, help="Case directories; synthetic cases when omitted")
    train.add_argument("--cache-dir", type=Path, help="Binary case cache for --data-dir")
    train.add_argument("--synth-cases", type=int, default=8, help="Synthetic cases when --data-dir is omitted")
    train.add_argument("--out-dir", type=Path, required=True, help="Checkpoint and run record destination")

    ev = sub.add_parser("eval", help="Evaluate a checkpoint")
    ev.add_argument("--checkpoint", type=Path, required=True)
    ev.add_argument("--data-dir", type=Path, required=True)
    ev.add_argument("--cache-dir", type=Path, help="Binary case cache for --data-dir")
    ev.add_argument("--missing", default="", help="Comma-separated modalities to zero, e.g. t1,t2")
    ev.add_argument("--threshold", type=float, default=0.5)
    ev.add_argument("--out-dir", type=Path, help="Write metrics.json here")

    seg = sub.add_parser("segment", help="Segment one case directory")
    seg.add_argument("--checkpoint", type=Path, required=True)
    seg.add_argument("--data-dir", type=Path, required=True, help="Case directory with the four modalities")
    seg.add_argument("--out", type=Path, required=True, help="Output .nii or .nii.gz")
    seg.add_argument("--threshold", type=float, default=0.5)

    ablate = sub.add_parser("ablate", help="Run the desk-scale ablation grid")
    ablate.add_argument("--config", type=Path, help="AblationGrid JSON file")
    ablate.add_argument("--seed", type=int, action="append", help="Seed (repeatable); overrides the grid")
    ablate.add_argument("--out-dir", type=Path, help="Write ablation.json here")

    synth = sub.add_parser("synth", help="Write synthetic cases as NIfTI")
    synth.add_argument("--out-dir", type=Path, required=True)
    synth.add_argument("--n-cases", type=int, default=8)
    synth.add_argument("--shape", type=int, nargs=3, default=[30, 160, 160], metavar=("D", "H", "W"))
    synth.add_argument("--seed", type=int, default=0)
    synth.add_argument("--plain", action="store_true", help="Write .nii instead of .nii.gz")

    flops = sub.add_parser("flops", help="Count forward-pass FLOPs")
    model_flags(flops)

    serve = sub.add_parser("serve", help="Run the MCP tool server")
    serve.add_argument("--port", type=int, default=8000, help="Port to run the server on")
    serve.add_argument("--host", type=str, default="127.0.0.1", help="Host to bind the server to")
    serve.add_argument("--stdio", action="store_true", help="Run in stdio mode for MCP")
    return parser


def resolve_config(args: argparse.Namespace) -> TrainConfig:
    """Load ``--config`` (or defaults) and apply the command-line overrides."""
    cfg = load_train_config(args.config) if args.config else TrainConfig()
    data = cfg.model_dump()
    if args.seed is not None:
        data["seed"] = args.seed
    if args.phase is not None:
        data["schedule"] = args.phase
    if args.seq_kind is not None:
        data["model"]["seq_kind"] = SeqModuleKind.model_validate(
            {**data["model"]["seq_kind"], "tag": args.seq_kind}).model_dump()
    if args.frames is not None:
        data["model"]["frames_T"] = args.frames
    return TrainConfig.model_validate(data)


def _load_records(args: argparse.Namespace, cfg: TrainConfig) -> List[VolumeRecord]:
    if args.data_dir is not None:
        return load_dataset(args.data_dir, cache_dir=args.cache_dir)
    height, width = cfg.model.image_size
    return synth_generate(args.synth_cases, (2 * cfg.frames, height, width), cfg.seed)


def cmd_train(args: argparse.Namespace) -> int:
    cfg = resolve_config(args)
    data = prepare_data(_load_records(args, cfg), cfg.frames, cfg.seed, tuple(cfg.model.image_size))
    args.out_dir.mkdir(parents=True, exist_ok=True)
    (args.out_dir / "config.json").write_text(cfg.model_dump_json(indent=2))
    (args.out_dir / "split.json").write_text(data.split.model_dump_json(indent=2))
    model, record = train_tps(cfg, data, args.out_dir)
    save_checkpoint(model, args.out_dir / "final.mckp")
    (args.out_dir / "run.json").write_text(record.model_dump_json(indent=2))
    if data.test:
        report = evaluate(model, data.test, threshold=cfg.threshold, frames=cfg.frames,
                          granularity=cfg.eval_granularity)
        (args.out_dir / "test_metrics.json").write_text(report.model_dump_json(indent=2))
    print(json.dumps({"best_epoch": record.best_epoch, "best_val_dice": record.best_val_dice,
                      "checkpoint": record.best_checkpoint}, indent=2))
    return 0


def cmd_eval(args: argparse.Namespace) -> int:
    missing = [m.strip() for m in args.missing.split(",") if m.strip()]
    unknown = sorted(set(missing) - set(MODALITIES))
    if unknown:
        raise ConfigError(f"Unknown modalities {unknown}; choose from {list(MODALITIES)}")
    model = load_checkpoint(args.checkpoint)
    size = tuple(model.config.image_size)
    records = [preprocess(r, size) for r in load_dataset(args.data_dir, cache_dir=args.cache_dir)]
    report = evaluate(model, records, threshold=args.threshold, missing_modalities=missing)
    text = report.model_dump_json(indent=2)
    if args.out_dir is not None:
        args.out_dir.mkdir(parents=True, exist_ok=True)
        (args.out_dir / "metrics.json").write_text(text)
    print(text)
    return 0


def cmd_segment(args: argparse.Namespace) -> int:
    model = load_checkpoint(args.checkpoint)
    print(segment(model, args.data_dir, args.out, args.threshold))
    return 0


def cmd_ablate(args: argparse.Namespace) -> int:
    grid = load_ablation_grid(args.config) if args.config else AblationGrid()
    if args.seed:
        grid = AblationGrid.model_validate({**grid.model_dump(), "seeds": args.seed})
    table = run_ablation(grid)
    if args.out_dir is not None:
        args.out_dir.mkdir(parents=True, exist_ok=True)
        (args.out_dir / "ablation.json").write_text(table.model_dump_json(indent=2))
    print(format_ablation(table))
    try:
        print(f"Trend M-Net(T+C, TPS) >= M-Net(T+C, Ordered) >= Backbone(Ordered): {trend_holds(table)}")
    except ConfigError as e:
        logger.info("Trend check skipped: %s", e)
    return 0


def cmd_synth(args: argparse.Namespace) -> int:
    for record in synth_generate(args.n_cases, tuple(args.shape), args.seed):
        print(write_case(record, args.out_dir, compress=not args.plain))
    return 0


def cmd_flops(args: argparse.Namespace) -> int:
    cfg = resolve_config(args)
    report = flops_estimate(cfg.model)
    rows = [[name, f"{count:,}"] for name, count in report.by_module.items()]
    rows.append(["total", f"{report.total:,}"])
    print(format_table(f"FLOPs for T={cfg.frames}, {cfg.model.image_size[0]}x{cfg.model.image_size[1]}",
                       ["Module", "FLOPs"], rows))
    return 0


def cmd_serve(args: argparse.Namespace) -> int:
    from .server import app

    if args.stdio:
        # Run in stdio mode for MCP
        app.run(transport="stdio")
    else:
        # Run as a web server
        import uvicorn

        uvicorn.run(app.sse_app(), host=args.host, port=args.port, log_level="info")
    return 0


COMMANDS = {
    "train": cmd_train,
    "eval": cmd_eval,
    "segment": cmd_segment,
    "ablate": cmd_ablate,
    "synth": cmd_synth,
    "flops": cmd_flops,
    "serve": cmd_serve,
}


def main(argv: Optional[List[str]] = None) -> int:
    """Run the meshcast command line; returns the process exit code."""
    args = build_parser().parse_args(argv)
    try:
        configure_logging(args.log_level)
    except (ValueError, MeshCastError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return ConfigError.exit_code
    try:
        return COMMANDS[args.command](args)
    except MeshCastError as e:
        logger.error("%s: %s", e.kind, e)
        return e.exit_code
    except ValidationError as e:
        logger.error("config error: %s", e)
        return ConfigError.exit_code


if __name__ == "__main__":
    sys.exit(main())
