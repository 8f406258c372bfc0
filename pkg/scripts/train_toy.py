#!/usr/bin/env python3
"""Train (or load) the reference toy bundle and print a quality summary.

Pre-warms the same cache the test suite uses, so running this first makes
`pytest tests/test_acceptance.py` fast.
"""

import argparse
import logging
import time
from pathlib import Path

import numpy as np

import sketchgan as sg
from sketchgan.autodiff import Tensor
from sketchgan.toy import toy_corpus, train_toy_bundle


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--cache-dir", default=str(Path(__file__).parent.parent / ".cache"))
    parser.add_argument("--out", help="also save the bundle here")
    args = parser.parse_args()

    logging.basicConfig(level=logging.INFO, format="%(message)s")
    started = time.perf_counter()
    bundle = train_toy_bundle(cache_dir=args.cache_dir)
    print(f"bundle ready in {(time.perf_counter() - started) / 60:.1f} min "
          f"({bundle.meta['steps']} steps, style {bundle.style})")

    held = toy_corpus(count=64, seed=4242)
    sig = lambda t: 1.0 / (1.0 + np.exp(-t.data.astype(np.float64)))
    real = sig(bundle.discriminator.forward(Tensor(held.joints), train=False)).mean()
    rng = np.random.default_rng(123)
    fakes = bundle.generator.forward(Tensor(rng.uniform(-1, 1, (64, 100)).astype(np.float32)),
                                     train=False)
    fake = sig(bundle.discriminator.forward(Tensor(fakes.data), train=False)).mean()
    print(f"discriminator mean sigmoid: held-out real {real:.3f}, generated {fake:.3f} "
          f"(gap {real - fake:.3f})")

    sketch = held.joints[0][:, :32, :1]
    started = time.perf_counter()
    _, trace = sg.complete(sketch, bundle, sg.ProjectionConfig(iterations=500, seed=1))
    print(f"500-iteration projection: {time.perf_counter() - started:.1f}s, "
          f"contextual {trace.contextual[0]:.3f} -> {trace.contextual[-1]:.3f}")

    if args.out:
        sg.save_bundle(bundle, args.out)
        print(f"bundle saved to {args.out}")


if __name__ == "__main__":
    main()
