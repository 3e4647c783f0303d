"""Command line interface: dataset building, training, evaluation, serving, benchmarks."""

import argparse
import json
import logging
import sys
from pathlib import Path

log = logging.getLogger("nextstroke")


def _add_build_dataset(sub):
    p = sub.add_parser("build-dataset", help="decompose and reorder an image/mask folder into a dataset")
    p.add_argument("--images", required=True, help="directory of reference images")
    p.add_argument("--masks", required=True, help="directory of segmentation masks (matched by filename)")
    p.add_argument("--out", required=True, help="output dataset directory")
    p.add_argument("--schedule", default="default", help="named schedule (default|mini) or a JSON file")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--resolution", type=int, default=256)
    p.add_argument("--split-ratio", type=float, default=0.95)
    p.add_argument("--sop-budget", type=int, default=4000)


def _cmd_build_dataset(args):
    from .dataset import NAMED_SCHEDULES, DecompositionSchedule, build_dataset

    if args.schedule in NAMED_SCHEDULES:
        schedule = NAMED_SCHEDULES[args.schedule]
    else:
        schedule = DecompositionSchedule.from_dict(json.loads(Path(args.schedule).read_text()))
    manifest = build_dataset(
        args.images,
        args.masks,
        args.out,
        schedule=schedule,
        split_ratio=args.split_ratio,
        seed=args.seed,
        workers=args.workers,
        resolution=args.resolution,
        sop_budget=args.sop_budget,
    )
    print(f"wrote {manifest}")


def _add_train(sub):
    p = sub.add_parser("train", help="train a suggestion model on a built dataset")
    p.add_argument("--manifest", required=True)
    p.add_argument("--config", default=None, help="JSON file with model/train settings")
    p.add_argument("--out", required=True)
    p.add_argument("--resume", default=None, help="checkpoint to resume weights from")
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)


def _cmd_train(args):
    import torch

    from .dataset import StrokeDataset, manifest_checksum
    from .model import ModelConfig, SuggestionModel, load_checkpoint, tiny_config
    from .objectives import FeatureConfig, LossWeights, dataset_feature_stats, save_feature_stats
    from .training import TrainConfig, train

    settings = json.loads(Path(args.config).read_text()) if args.config else {}
    model_settings = settings.get("model", {})
    if model_settings.get("preset") == "tiny":
        model_cfg = tiny_config(**{k: v for k, v in model_settings.items() if k != "preset"})
    elif model_settings:
        model_cfg = ModelConfig.from_dict(model_settings)
    else:
        model_cfg = ModelConfig()
    train_cfg = TrainConfig(**settings.get("train", {}))
    if args.epochs is not None:
        train_cfg.epochs = args.epochs
    if args.seed is not None:
        train_cfg.seed = args.seed
    weights = LossWeights(**settings.get("loss_weights", {}))
    feature_cfg = FeatureConfig(include_sigma_omega=False, **settings.get("features", {}))

    dataset = StrokeDataset(args.manifest)
    start_step = 0
    if args.resume:
        model, start_step = load_checkpoint(args.resume, expected_config=model_cfg)
    else:
        torch.manual_seed(train_cfg.seed)
        model = SuggestionModel(model_cfg)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    gaussian = dataset_feature_stats(dataset, feature_cfg, model_cfg.k, seed=train_cfg.seed)
    save_feature_stats(out / "feature_stats.npz", gaussian, feature_cfg, manifest_checksum(args.manifest))
    history = train(model, dataset, train_cfg, weights, feature_cfg, gaussian, out_dir=out, start_step=start_step)
    print(f"trained {len(history)} steps; final total loss {history[-1]['total']:.6f}")
    print(f"checkpoint at {out / 'checkpoint_last.pt'}")


def _add_eval(sub):
    p = sub.add_parser("eval", help="run the metric suite against a checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--protocol", default=None, help="JSON file overriding evaluation protocol fields")
    p.add_argument("--out", required=True, help="report file path")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--per-window", default=None, help="optional JSON dump of per-window values")
    p.add_argument("--heatmap-dir", default=None, help="optional directory for per-record heatmap PNGs")


def _cmd_eval(args):
    from . import png_io
    from .dataset import StrokeDataset
    from .metrics import EvalProtocol, evaluate, eval_windows, heatmap, model_sampler, write_report
    from .model import load_checkpoint

    model, _ = load_checkpoint(args.checkpoint)
    dataset = StrokeDataset(args.manifest)
    protocol = EvalProtocol(**json.loads(Path(args.protocol).read_text())) if args.protocol else EvalProtocol()
    report = evaluate(model, dataset, protocol, seed=args.seed)
    write_report(args.out, report)
    if args.per_window:
        Path(args.per_window).write_text(json.dumps(report["per_window"], indent=2))
    if args.heatmap_dir:
        import numpy as np
        import torch

        out_dir = Path(args.heatmap_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        rng = np.random.default_rng(args.seed)
        generator = torch.Generator().manual_seed(args.seed)
        for record in dataset.eval_records:
            image = dataset.load_image(record, model.cfg.image_size)
            windows = eval_windows(record, image, model.cfg.k, 1, rng)
            if windows:
                probs = heatmap(model_sampler(model), windows[0], protocol, generator)
                (out_dir / f"{record.id}.png").write_bytes(png_io.to_png_bytes(probs))
    print(f"wrote {args.out}")


def _add_serve(sub):
    p = sub.add_parser("serve", help="serve the interactive suggestion API")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--snapshot-dir", default=None)
    p.add_argument("--heatmap-samples", type=int, default=500)


def _cmd_serve(args):
    import uvicorn

    from .metrics import EvalProtocol
    from .model import load_checkpoint
    from .service import SuggestionService, create_app

    model, _ = load_checkpoint(args.checkpoint)
    protocol = EvalProtocol(heatmap_samples=args.heatmap_samples)
    service = SuggestionService(model=model, seed=args.seed, protocol=protocol, snapshot_dir=args.snapshot_dir)
    if args.snapshot_dir:
        restored = service.load_snapshot()
        if restored:
            log.info("restored %d session(s) from snapshot", restored)
    uvicorn.run(create_app(service), host=args.host, port=args.port, log_level="info")


def _add_init_model(sub):
    p = sub.add_parser("init-model", help="write a freshly initialized model checkpoint")
    p.add_argument("--out", required=True)
    p.add_argument("--preset", default="default", choices=("default", "tiny"))
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--image-size", type=int, default=None)


def _cmd_init_model(args):
    import torch

    from .model import ModelConfig, SuggestionModel, save_checkpoint, tiny_config

    torch.manual_seed(args.seed)
    if args.preset == "tiny":
        cfg = tiny_config(image_size=args.image_size or 64)
    else:
        cfg = ModelConfig(image_size=args.image_size or 256)
    save_checkpoint(args.out, SuggestionModel(cfg))
    print(f"wrote {args.out}")


def _add_bench(sub):
    p = sub.add_parser("bench-render", help="compare the numba and numpy render kernels")
    p.add_argument("--size", type=int, default=256)
    p.add_argument("--strokes", type=int, default=200)
    p.add_argument("--repeats", type=int, default=3)


def _cmd_bench(args):
    from .benchmark import format_benchmark, run_render_benchmark

    print(format_benchmark(run_render_benchmark(args.size, args.strokes, args.repeats)))


def main(argv=None):
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    parser = argparse.ArgumentParser(prog="nextstroke")
    sub = parser.add_subparsers(dest="command", required=True)
    _add_build_dataset(sub)
    _add_train(sub)
    _add_eval(sub)
    _add_serve(sub)
    _add_init_model(sub)
    _add_bench(sub)
    args = parser.parse_args(argv)
    handler = {
        "build-dataset": _cmd_build_dataset,
        "train": _cmd_train,
        "eval": _cmd_eval,
        "serve": _cmd_serve,
        "init-model": _cmd_init_model,
        "bench-render": _cmd_bench,
    }[args.command]
    return handler(args) or 0


if __name__ == "__main__":
    sys.exit(main())
