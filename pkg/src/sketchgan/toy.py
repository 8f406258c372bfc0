"""Reference desk-scale recipe: a 32x64 bundle trainable on a laptop CPU.

One canonical configuration shared by the acceptance tests, the demo
scripts, and anyone who wants a working bundle in ~10 minutes. Trained
bundles are cached by recipe fingerprint so repeated runs are free.
"""

from __future__ import annotations

import hashlib
import json
import logging
from pathlib import Path

from .data import CorpusSpec, Corpus, build_corpus
from .models import ArchDescriptor, ModelBundle, load_bundle, save_bundle
from .sketch import STYLE_PRESETS
from .training import TrainConfig, train

log = logging.getLogger(__name__)

TOY_STEPS = 8064     # 63 epochs x (2048/16) steps; >= 2000


def toy_descriptor() -> ArchDescriptor:
    # max_channels 128 keeps 8000+ steps near 20 CPU-minutes
    return ArchDescriptor(image_size=32, max_channels=128)


def toy_corpus_spec(count: int = 2048, seed: int = 11, style: str = "xdog-fine") -> CorpusSpec:
    return CorpusSpec(source="procedural", count=count, resolution=32,
                      styles=[STYLE_PRESETS[style]], seed=seed)


def toy_train_config(seed: int = 7) -> TrainConfig:
    return TrainConfig(epochs=63, batch_size=16, g_lr=2e-4, d_lr=2e-4,
                       beta1=0.5, seed=seed)


_RECIPE_VERSION = 2     # bump when procedural rendering or training changes


def _fingerprint(spec: CorpusSpec, config: TrainConfig, descriptor: ArchDescriptor) -> str:
    blob = json.dumps([_RECIPE_VERSION, spec.to_json(), config.to_json(),
                       descriptor.to_json()], sort_keys=True)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def train_toy_bundle(cache_dir=None, spec: CorpusSpec | None = None,
                     config: TrainConfig | None = None,
                     descriptor: ArchDescriptor | None = None) -> ModelBundle:
    """Train (or load from cache) the reference toy bundle."""
    spec = spec or toy_corpus_spec()
    config = config or toy_train_config()
    descriptor = descriptor or toy_descriptor()
    cache_path = None
    if cache_dir is not None:
        cache_path = Path(cache_dir) / f"toy-{_fingerprint(spec, config, descriptor)}.cgan"
        if cache_path.exists():
            log.info("loading cached toy bundle %s", cache_path)
            return load_bundle(cache_path)
    corpus = build_corpus(spec)
    bundle, _ = train(config, corpus, descriptor)
    if cache_path is not None:
        cache_path.parent.mkdir(parents=True, exist_ok=True)
        save_bundle(bundle, cache_path)
        log.info("cached toy bundle at %s", cache_path)
    return bundle


def toy_corpus(count: int = 512, seed: int = 11, style: str = "xdog-fine") -> Corpus:
    return build_corpus(toy_corpus_spec(count=count, seed=seed, style=style))
