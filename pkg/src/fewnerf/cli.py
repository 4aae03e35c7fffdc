"""Command-line entry point: dataset generation, training, rendering,
evaluation, and ablation sweeps.

Exit codes: 0 success, 1 usage/config error, 2 data error, 3 numerical
abort.  Every command writes a ``manifest.json`` (resolved config, seed,
package version) beside its outputs so artifacts are reproducible.
"""

from __future__ import annotations

import argparse
import itertools
import json
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import __version__
from .dataset import (OracleScene, export_oracle_dataset, load_nerf_synthetic,
                      load_scene_file, write_image)
from .errors import ConfigError, DataError, NumericalAbort
from .field import load_checkpoint
from .geometry import Camera
from .trainer import MODES, TrainConfig, Trainer

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERICAL = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage problems exit with code 1
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _write_manifest(out_dir: Path, command: str, config: dict, seed) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = {"command": command, "config": config, "seed": seed,
                "version": __version__}
    with open(out_dir / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)


def _load_train_config(args) -> TrainConfig:
    spec = {}
    if args.config:
        try:
            with open(args.config) as fh:
                spec = json.load(fh)
        except OSError as exc:
            raise DataError(f"cannot open config {args.config}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise DataError(f"{args.config}: malformed config JSON: {exc}") from exc
    overrides = {
        "seed": args.seed,
        "mode": getattr(args, "mode", None),
        "iterations": getattr(args, "iters", None),
        "kappa": getattr(args, "kappa", None),
    }
    psi = getattr(args, "psi", None)
    if psi is not None:
        overrides["psi_deg"] = psi
    for key, value in overrides.items():
        if value is not None:
            spec[key] = value
    dataset_dir = spec.pop("dataset_dir", None)
    n_train = spec.pop("n_train_views", None)
    try:
        cfg = TrainConfig.from_dict(spec)
    except TypeError as exc:
        raise ConfigError(f"bad config field: {exc}") from exc
    return cfg, dataset_dir, n_train


def _cmd_gen_oracle(args) -> int:
    scene, views = load_scene_file(args.scene)
    out_dir = Path(args.out)
    export_oracle_dataset(
        scene, out_dir, n_train=args.n_train, n_test=args.n_test,
        resolution=args.resolution,
        camera_radius=args.camera_radius or views["camera_radius"],
        near=args.near or views["near"], far=args.far or views["far"],
        seed=args.seed if args.seed is not None else 0,
        fov_deg=views["fov_deg"],
    )
    _write_manifest(out_dir, "gen-oracle", {
        "scene": str(args.scene), "n_train": args.n_train, "n_test": args.n_test,
        "resolution": args.resolution,
    }, args.seed if args.seed is not None else 0)
    return EXIT_OK


def _cmd_train(args) -> int:
    cfg, dataset_dir, n_train = _load_train_config(args)
    dataset_dir = args.dataset or dataset_dir
    if dataset_dir is None:
        raise ConfigError("no dataset directory (set dataset_dir in the config or pass --dataset)")
    train_views = load_nerf_synthetic(dataset_dir, "train", max_views=n_train)
    try:
        heldout = load_nerf_synthetic(dataset_dir, "test")
    except DataError:
        heldout = None
    out_dir = Path(args.out) if args.out else Path("runs/latest")
    _write_manifest(out_dir, "train", cfg.to_dict(), cfg.seed)
    trainer = Trainer(cfg, train_views, heldout)
    trainer.train(out_dir=out_dir)
    print(f"checkpoint: {out_dir / 'checkpoint.ckpt'}")
    return EXIT_OK


def _camera_from_spec(path) -> Camera:
    try:
        with open(path) as fh:
            spec = json.load(fh)
    except OSError as exc:
        raise DataError(f"cannot open camera spec {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: malformed camera JSON: {exc}") from exc
    try:
        return Camera(
            camera_to_world=np.asarray(spec["camera_to_world"], dtype=np.float64)[:3, :],
            width=spec["width"], height=spec["height"], focal=spec["focal"],
            near=spec["near"], far=spec["far"],
        )
    except (KeyError, ValueError) as exc:
        raise DataError(f"{path}: invalid camera spec: {exc}") from exc


def _load_checkpoint_against_config(args):
    cfg, dataset_dir, n_train = _load_train_config(args)
    params, header = load_checkpoint(args.checkpoint)
    if header["config_hash"] != cfg.field.hash():
        raise DataError(
            "checkpoint was trained with a different field configuration "
            f"(checkpoint {header['config_hash']}, config {cfg.field.hash()}); refusing")
    return cfg, params, header, dataset_dir, n_train


def _cmd_render(args) -> int:
    cfg, params, header, dataset_dir, _ = _load_checkpoint_against_config(args)
    if args.camera:
        cam = _camera_from_spec(args.camera)
    else:
        dataset_dir = args.dataset or dataset_dir
        if dataset_dir is None:
            raise ConfigError("render needs --camera or --dataset/--index")
        views = load_nerf_synthetic(dataset_dir, args.split)
        if not 0 <= args.index < len(views):
            raise DataError(f"view index {args.index} out of range (split has {len(views)})")
        cam = views.cameras[args.index]
    # a dataset is unnecessary for rendering; a minimal one-image stand-in
    # satisfies the trainer's constructor
    from .dataset import ViewSet
    stub = ViewSet(cameras=[cam], images=np.zeros((1, cam.height, cam.width, 3)),
                   masks=np.ones((1, cam.height, cam.width), dtype=bool))
    trainer = Trainer(cfg, stub)
    trainer.set_params(params)
    image = trainer.render_camera(cam)
    out = Path(args.out)
    write_image(out, image)
    _write_manifest(out.parent, "render", {"checkpoint": str(args.checkpoint),
                                           "iteration": header["iteration"]}, cfg.seed)
    print(f"wrote {out}")
    return EXIT_OK


def _cmd_eval(args) -> int:
    cfg, params, header, dataset_dir, _ = _load_checkpoint_against_config(args)
    dataset_dir = args.dataset or dataset_dir
    if dataset_dir is None:
        raise ConfigError("eval needs a dataset directory")
    views = load_nerf_synthetic(dataset_dir, args.split)
    if len(views) == 0:
        raise DataError(f"split {args.split!r} of {dataset_dir} is empty")
    trainer = Trainer(cfg, views)
    trainer.set_params(params)
    report = trainer.evaluate(views)
    report["checkpoint"] = str(args.checkpoint)
    report["iteration"] = header["iteration"]
    report["metrics_log"] = str(Path(args.checkpoint).parent / "metrics.jsonl")
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
    _write_manifest(out.parent, "eval", {"checkpoint": str(args.checkpoint),
                                         "split": args.split}, cfg.seed)
    print(json.dumps(report["mean"], sort_keys=True))
    return EXIT_OK


SWEEPABLE = {"mode", "psi_deg", "kappa", "seed", "iterations", "jitter_sigma",
             "weights.lum", "weights.lum_aug", "weights.photo_aug"}


def _apply_sweep_value(spec: dict, key: str, value):
    if key not in SWEEPABLE:
        raise ConfigError(f"invalid sweep key {key!r}; allowed: {sorted(SWEEPABLE)}")
    if key.startswith("weights."):
        spec.setdefault("weights", {})[key.split(".", 1)[1]] = value
    else:
        spec[key] = value


def _cmd_ablate(args) -> int:
    try:
        with open(args.sweep) as fh:
            sweep = json.load(fh)
    except OSError as exc:
        raise DataError(f"cannot open sweep spec {args.sweep}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise DataError(f"{args.sweep}: malformed sweep JSON: {exc}") from exc
    axes = sweep.get("axes", {})
    for key in axes:
        if key not in SWEEPABLE:
            raise ConfigError(f"invalid sweep key {key!r}; allowed: {sorted(SWEEPABLE)}")

    cfg, dataset_dir, n_train = _load_train_config(args)
    dataset_dir = args.dataset or dataset_dir
    if dataset_dir is None:
        raise ConfigError("ablate needs a dataset directory")
    base_spec = cfg.to_dict()
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    names = sorted(axes)
    rows = []
    combos = list(itertools.product(*(axes[n] for n in names))) if names else []
    train_views = load_nerf_synthetic(dataset_dir, "train", max_views=n_train)
    heldout = load_nerf_synthetic(dataset_dir, "test")
    for combo in combos:
        spec = json.loads(json.dumps(base_spec))  # deep copy
        label = {}
        for key, value in zip(names, combo):
            _apply_sweep_value(spec, key, value)
            label[key] = value
        variant = TrainConfig.from_dict(spec)
        trainer = Trainer(variant, train_views, heldout)
        trainer.train(out_dir=None)
        mean = trainer.evaluate(heldout)["mean"]
        rows.append({"variant": label, **mean})

    header = names + ["psnr", "ssim", "masked_psnr", "average_err"]
    lines = ["| " + " | ".join(header) + " |",
             "| " + " | ".join(["---"] * len(header)) + " |"]
    for row in rows:
        cells = [str(row["variant"][n]) for n in names]
        cells += [f"{row[k]:.4f}" for k in ("psnr", "ssim", "masked_psnr", "average_err")]
        lines.append("| " + " | ".join(cells) + " |")
    table_md = "\n".join(lines) + "\n"
    (out_dir / "ablation.md").write_text(table_md)
    with open(out_dir / "ablation.json", "w") as fh:
        json.dump(rows, fh, indent=2, sort_keys=True)
    _write_manifest(out_dir, "ablate", {"axes": axes, "base": base_spec}, cfg.seed)
    print(table_md)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="fewnerf", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-oracle", help="generate an analytic oracle dataset")
    p.add_argument("scene", help="oracle scene JSON file")
    p.add_argument("--out", required=True)
    p.add_argument("--n-train", type=int, default=4)
    p.add_argument("--n-test", type=int, default=8)
    p.add_argument("--resolution", type=int, default=48)
    p.add_argument("--camera-radius", type=float, default=None)
    p.add_argument("--near", type=float, default=None)
    p.add_argument("--far", type=float, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=_cmd_gen_oracle)

    p = sub.add_parser("train", help="train a field on a dataset")
    p.add_argument("--config", default=None, help="JSON config; flags override fields")
    p.add_argument("--dataset", default=None)
    p.add_argument("--out", default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--mode", choices=MODES, default=None)
    p.add_argument("--psi", type=float, default=None, help="masking threshold, degrees")
    p.add_argument("--kappa", type=int, default=None)
    p.add_argument("--iters", type=int, default=None)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("render", help="render one view from a checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--config", default=None)
    p.add_argument("--camera", default=None, help="camera spec JSON")
    p.add_argument("--dataset", default=None)
    p.add_argument("--split", default="test")
    p.add_argument("--index", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=_cmd_render)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a dataset split")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--config", default=None)
    p.add_argument("--dataset", default=None)
    p.add_argument("--split", default="test")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("ablate", help="train and evaluate a sweep of variants")
    p.add_argument("--config", default=None)
    p.add_argument("--sweep", required=True, help="sweep spec JSON with an 'axes' object")
    p.add_argument("--dataset", default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=_cmd_ablate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"fewnerf: config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"fewnerf: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericalAbort as exc:
        print(f"fewnerf: numerical abort: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
