"""Command-line entry point: corpus | train | finetune | complete | reverse | eval | serve.

Option precedence is flags > --config JSON file > built-in defaults.
Every artifact-producing run writes a sidecar <out>.config.json with the
fully resolved configuration and seed.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .data import Corpus, CorpusSpec, build_corpus, write_manifest, read_manifest
from .evaluation import EvalConfig, evaluate
from .models import ArchDescriptor, ModelBundle, load_bundle, save_bundle
from .pngio import load_image, save_image
from .projection import ProjectionConfig, complete
from .sketch import get_style, SKETCH_TO_IMAGE, IMAGE_TO_SKETCH
from .toy import toy_descriptor, toy_train_config
from .training import TrainConfig, finetune, train


def _write_sidecar(out_path, payload: dict) -> None:
    sidecar = Path(str(out_path) + ".config.json")
    sidecar.write_text(json.dumps(payload, indent=2, sort_keys=True, default=str))


def _load_config_file(path) -> dict:
    if not path:
        return {}
    obj = json.loads(Path(path).read_text())
    if not isinstance(obj, dict):
        raise ValueError("config file must hold a JSON object")
    return obj


def _merged(args: argparse.Namespace, file_cfg: dict, key: str, default):
    """flags > config file > default; argparse stores None for absent flags."""
    flag = getattr(args, key, None)
    if flag is not None:
        return flag
    if key in file_cfg:
        return file_cfg[key]
    return default


def _styles_from_names(names: list[str]):
    return [get_style(n) for n in names]


# -- subcommand implementations ------------------------------------------------

def cmd_corpus(args) -> int:
    cfg = _load_config_file(args.config)
    spec = CorpusSpec(
        source=_merged(args, cfg, "source", "procedural"),
        count=_merged(args, cfg, "count", 256),
        resolution=_merged(args, cfg, "resolution", 32),
        styles=_styles_from_names(_merged(args, cfg, "styles", ["xdog-fine"])),
        crops_per_image=_merged(args, cfg, "crops", 0),
        hflip=bool(_merged(args, cfg, "hflip", False)),
        seed=_merged(args, cfg, "seed", 0),
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    corpus = build_corpus(spec)
    files = []
    for i in range(len(corpus)):
        name = f"joint_{i:05d}.png"
        save_image(out / name, corpus.joints[i])
        files.append(name)
    write_manifest(out / "manifest.json", spec, files)
    _write_sidecar(out / "manifest.json", {"spec": spec.to_json(), "seed": spec.seed})
    print(f"wrote {len(files)} joint images + manifest to {out}")
    return 0


def _corpus_from_args(args, cfg) -> Corpus:
    if args.corpus:
        spec, _files = read_manifest(args.corpus)
        return build_corpus(spec)
    spec = CorpusSpec(
        source="procedural",
        count=_merged(args, cfg, "count", 512),
        resolution=_merged(args, cfg, "resolution", 32),
        styles=[get_style(_merged(args, cfg, "style", "xdog-fine"))],
        seed=_merged(args, cfg, "corpus_seed", 11),
    )
    return build_corpus(spec)


def cmd_train(args) -> int:
    cfg = _load_config_file(args.config)
    corpus = _corpus_from_args(args, cfg)
    config = TrainConfig(
        epochs=_merged(args, cfg, "epochs", toy_train_config().epochs),
        batch_size=_merged(args, cfg, "batch_size", 16),
        g_lr=_merged(args, cfg, "g_lr", 2e-4),
        d_lr=_merged(args, cfg, "d_lr", 2e-4),
        beta1=_merged(args, cfg, "beta1", 0.5),
        seed=_merged(args, cfg, "seed", 0),
        checkpoint_every=_merged(args, cfg, "checkpoint_every", 0),
        checkpoint_dir=_merged(args, cfg, "checkpoint_dir", None),
        loss_log=args.loss_log,
    )
    descriptor = ArchDescriptor(image_size=corpus.resolution,
                                max_channels=_merged(args, cfg, "max_channels",
                                                     toy_descriptor().max_channels))
    print(f"training: {config.epochs} epochs, batch {config.batch_size}, "
          f"{len(corpus)} samples, descriptor {descriptor.image_size}x"
          f"{2 * descriptor.image_size} cmax={descriptor.max_channels}")
    bundle, loss_log = train(config, corpus, descriptor)
    save_bundle(bundle, args.out)
    _write_sidecar(args.out, {"train": config.to_json(),
                              "descriptor": descriptor.to_json(),
                              "corpus": corpus.spec.to_json()})
    if loss_log.rows:
        last = loss_log.rows[-1]
        print(f"done: {last[0]} steps, d_loss={last[1]:.4f} g_loss={last[2]:.4f}")
    print(f"bundle written to {args.out}")
    return 0


def cmd_finetune(args) -> int:
    cfg = _load_config_file(args.config)
    base = load_bundle(args.base)
    corpus = _corpus_from_args(args, cfg)
    config = TrainConfig(
        epochs=_merged(args, cfg, "epochs", 8),
        batch_size=_merged(args, cfg, "batch_size", 16),
        beta1=_merged(args, cfg, "beta1", 0.5),
        seed=_merged(args, cfg, "seed", 0),
        finetune_lr=_merged(args, cfg, "finetune_lr", 1e-5),
        loss_log=args.loss_log,
    )
    bundle, _ = finetune(base, config, corpus)
    save_bundle(bundle, args.out)
    _write_sidecar(args.out, {"finetune": config.to_json(), "base": str(args.base),
                              "corpus": corpus.spec.to_json()})
    print(f"finetuned bundle ({bundle.style}) written to {args.out}")
    return 0


def _projection_config(args, cfg, direction: str) -> ProjectionConfig:
    return ProjectionConfig(
        lam=_merged(args, cfg, "lam", 0.01),
        momentum=_merged(args, cfg, "momentum", 0.9),
        step_size=_merged(args, cfg, "step_size", 0.01),
        iterations=_merged(args, cfg, "iters", 500),
        init_candidates=_merged(args, cfg, "init_candidates", 10),
        clipping=_merged(args, cfg, "clipping", "stochastic"),
        direction=direction,
        seed=_merged(args, cfg, "seed", 0),
        kl_mode=_merged(args, cfg, "kl_mode", "mass"),
        frames_every=_merged(args, cfg, "frames_every", 0),
    )


def _run_completion(args, direction: str) -> int:
    cfg = _load_config_file(args.config)
    bundle = load_bundle(args.bundle)
    config = _projection_config(args, cfg, direction)
    grayscale = direction == SKETCH_TO_IMAGE
    source = args.sketch if grayscale else args.photo
    context = load_image(source, grayscale=grayscale)
    output, trace = complete(context, bundle, config)
    save_image(args.out, output)
    trace_path = args.trace or (str(args.out) + ".trace.csv")
    trace.to_csv(trace_path)
    if config.frames_every:
        frames_dir = Path(str(args.out) + ".frames")
        frames_dir.mkdir(parents=True, exist_ok=True)
        for it, frame in trace.frames:
            save_image(frames_dir / f"iter_{it:05d}.png", frame)
        strip = np.concatenate([f for _, f in trace.frames], axis=1)
        save_image(frames_dir / "strip.png", strip)
    _write_sidecar(args.out, {"projection": config.to_json(), "bundle": str(args.bundle),
                              "input": str(source)})
    print(f"completion written to {args.out} "
          f"(final contextual={trace.contextual[-1]:.4f}, "
          f"perceptual={trace.perceptual[-1]:.4f})")
    return 0


def cmd_complete(args) -> int:
    return _run_completion(args, SKETCH_TO_IMAGE)


def cmd_reverse(args) -> int:
    return _run_completion(args, IMAGE_TO_SKETCH)


def cmd_eval(args) -> int:
    cfg = _load_config_file(args.config)
    bundle = load_bundle(args.bundle)
    spec = CorpusSpec(
        source="procedural",
        count=_merged(args, cfg, "count", 50),
        resolution=bundle.descriptor.image_size,
        styles=[get_style(_merged(args, cfg, "style", "xdog-fine"))],
        seed=_merged(args, cfg, "corpus_seed", 4242),
    )
    if args.corpus:
        spec, _files = read_manifest(args.corpus)
    corpus = build_corpus(spec)
    config = EvalConfig(
        projection=_projection_config(args, cfg, SKETCH_TO_IMAGE),
        style_name=_merged(args, cfg, "style", "xdog-fine"),
        jobs=_merged(args, cfg, "jobs", 1),
        seed=_merged(args, cfg, "seed", 0),
    )
    montage_dir = None
    if args.montage_dir:
        montage_dir = Path(args.montage_dir)
        montage_dir.mkdir(parents=True, exist_ok=True)
    report = evaluate(bundle, corpus, config, montage_dir=montage_dir)
    report.write_json(args.out)
    if args.csv:
        report.write_csv(args.csv)
    _write_sidecar(args.out, {"eval": config.to_json(), "bundle": str(args.bundle),
                              "corpus": spec.to_json()})
    agg = report.aggregates
    print(f"evaluated {agg['count']} samples: mean SSIM {agg['ssim_mean']:.4f}, "
          f"mean re-extraction KL {agg['reextraction_kl_mean']:.4f}")
    print(f"report written to {args.out}")
    return 0


def cmd_serve(args) -> int:
    import uvicorn
    from .service import create_app

    app = create_app(bundle_path=args.bundle, workers=args.pool_size,
                     preview_every=args.preview_every, ui_dir=args.ui_dir)
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return 0


# -- parser ---------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sketchgan",
                                     description="Joint-image completion GAN toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("corpus", help="generate a corpus with manifest")
    p.add_argument("--out", required=True)
    p.add_argument("--config")
    p.add_argument("--source")
    p.add_argument("--count", type=int)
    p.add_argument("--resolution", type=int)
    p.add_argument("--styles", nargs="+")
    p.add_argument("--crops", type=int)
    p.add_argument("--hflip", action="store_const", const=True)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_corpus)

    p = sub.add_parser("train", help="train a bundle on a corpus")
    p.add_argument("--out", required=True)
    p.add_argument("--config")
    p.add_argument("--corpus", help="corpus manifest.json (default: procedural toy corpus)")
    p.add_argument("--count", type=int)
    p.add_argument("--resolution", type=int)
    p.add_argument("--corpus-seed", dest="corpus_seed", type=int)
    p.add_argument("--style")
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", dest="batch_size", type=int)
    p.add_argument("--g-lr", dest="g_lr", type=float)
    p.add_argument("--d-lr", dest="d_lr", type=float)
    p.add_argument("--beta1", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--max-channels", dest="max_channels", type=int)
    p.add_argument("--checkpoint-every", dest="checkpoint_every", type=int)
    p.add_argument("--checkpoint-dir", dest="checkpoint_dir")
    p.add_argument("--loss-log", dest="loss_log")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("finetune", help="finetune a bundle on another style")
    p.add_argument("--base", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--config")
    p.add_argument("--corpus")
    p.add_argument("--count", type=int)
    p.add_argument("--resolution", type=int)
    p.add_argument("--corpus-seed", dest="corpus_seed", type=int)
    p.add_argument("--style")
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", dest="batch_size", type=int)
    p.add_argument("--beta1", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--finetune-lr", dest="finetune_lr", type=float)
    p.add_argument("--loss-log", dest="loss_log")
    p.set_defaults(func=cmd_finetune)

    for name, helptext, func, input_flag in (
            ("complete", "generate the photo half from a sketch", cmd_complete, "--sketch"),
            ("reverse", "generate the sketch half from a photo", cmd_reverse, "--photo")):
        p = sub.add_parser(name, help=helptext)
        p.add_argument(input_flag, required=True, dest=input_flag.lstrip("-"))
        p.add_argument("--bundle", required=True)
        p.add_argument("--out", required=True)
        p.add_argument("--config")
        p.add_argument("--iters", type=int)
        p.add_argument("--lambda", dest="lam", type=float)
        p.add_argument("--momentum", type=float)
        p.add_argument("--step-size", dest="step_size", type=float)
        p.add_argument("--init-candidates", dest="init_candidates", type=int)
        p.add_argument("--clipping", choices=["stochastic", "hard"])
        p.add_argument("--kl-mode", dest="kl_mode", choices=["mass", "bernoulli"])
        p.add_argument("--seed", type=int)
        p.add_argument("--frames-every", dest="frames_every", type=int)
        p.add_argument("--trace")
        p.set_defaults(func=func)

    p = sub.add_parser("eval", help="score completions against ground truth")
    p.add_argument("--bundle", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--config")
    p.add_argument("--corpus")
    p.add_argument("--count", type=int)
    p.add_argument("--corpus-seed", dest="corpus_seed", type=int)
    p.add_argument("--style")
    p.add_argument("--iters", type=int)
    p.add_argument("--lambda", dest="lam", type=float)
    p.add_argument("--init-candidates", dest="init_candidates", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--jobs", type=int)
    p.add_argument("--csv")
    p.add_argument("--montage-dir", dest="montage_dir")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("serve", help="run the HTTP completion service")
    p.add_argument("--bundle", required=True)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8321)
    p.add_argument("--pool-size", dest="pool_size", type=int, default=2)
    p.add_argument("--preview-every", dest="preview_every", type=int, default=25)
    p.add_argument("--ui-dir", dest="ui_dir")
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except KeyboardInterrupt:
        return 130
    except Exception as exc:   # uniform runtime-failure exit code
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
