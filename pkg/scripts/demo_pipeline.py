#!/usr/bin/env python3
"""End-to-end demo: corpus -> train -> complete both directions -> montage.

Runs at a miniature scale (16x32 joints, ~1 minute) so the whole pipeline
can be eyeballed quickly; pass --full to use the reference toy bundle.
"""

import argparse
from pathlib import Path

import numpy as np

import sketchgan as sg
from sketchgan.data import CorpusSpec, build_corpus
from sketchgan.pngio import save_image
from sketchgan.toy import train_toy_bundle
from sketchgan.training import TrainConfig, train


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out-dir", default="demo_out")
    parser.add_argument("--full", action="store_true",
                        help="use the cached 32x64 toy bundle instead of the 1-minute model")
    parser.add_argument("--iters", type=int, default=300)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    if args.full:
        bundle = train_toy_bundle(cache_dir=Path(__file__).parent.parent / ".cache")
        test = build_corpus(CorpusSpec(count=4, resolution=32, seed=2025))
    else:
        spec = CorpusSpec(count=512, resolution=16, seed=11)
        corpus = build_corpus(spec)
        config = TrainConfig(epochs=40, batch_size=16, seed=7)
        descriptor = sg.ArchDescriptor(image_size=16, max_channels=64)
        print(f"training {config.epochs * (len(corpus) // config.batch_size)} steps "
              f"at {descriptor.image_size}x{2 * descriptor.image_size}...")
        bundle, loss_log = train(config, corpus, descriptor)
        last = loss_log.rows[-1]
        print(f"trained: d_loss {last[1]:.3f}, g_loss {last[2]:.3f}")
        test = build_corpus(CorpusSpec(count=4, resolution=16, seed=2025))

    size = bundle.descriptor.image_size
    for i in range(len(test)):
        joint = test.joints[i]
        sketch, photo = joint[:, :size, :1], joint[:, size:, :]

        forward, trace_f = sg.complete(sketch, bundle,
                                       sg.ProjectionConfig(iterations=args.iters,
                                                           seed=args.seed + i))
        reverse, trace_r = sg.complete(photo, bundle,
                                       sg.ProjectionConfig(iterations=args.iters,
                                                           seed=args.seed + i,
                                                           direction=sg.IMAGE_TO_SKETCH))
        montage = np.concatenate([joint, forward, reverse], axis=0)
        save_image(out_dir / f"demo_{i}.png", montage)
        print(f"sample {i}: sketch->image contextual {trace_f.contextual[0]:.3f} -> "
              f"{trace_f.contextual[-1]:.3f}; image->sketch {trace_r.contextual[0]:.3f} -> "
              f"{trace_r.contextual[-1]:.3f}")
    print(f"montages written to {out_dir}/ (rows: ground truth, sketch->image, image->sketch)")


if __name__ == "__main__":
    main()
