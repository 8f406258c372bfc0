import os
import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import settings, HealthCheck

sys.path.insert(0, str(Path(__file__).parent))   # for gradcheck helper

settings.register_profile(
    "default", max_examples=25, deadline=None,
    suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

CACHE_DIR = Path(__file__).parent.parent / ".cache"


@pytest.fixture(scope="session")
def toy_bundle():
    """The trained reference bundle (2016 steps, ~5 min; disk-cached)."""
    from sketchgan.toy import train_toy_bundle
    return train_toy_bundle(cache_dir=CACHE_DIR)


@pytest.fixture(scope="session")
def toy_holdout():
    """Held-out corpus disjoint from the training corpus (different seed)."""
    from sketchgan.toy import toy_corpus
    return toy_corpus(count=64, seed=4242)


@pytest.fixture(scope="session")
def tiny_bundle():
    """Untrained 8x16 bundle for fast structural tests."""
    from sketchgan.models import ArchDescriptor, ModelBundle
    bundle = ModelBundle.initialize(ArchDescriptor(image_size=8, max_channels=32), seed=3)
    bundle.set_trainable(False)
    return bundle


@pytest.fixture(scope="session")
def style_pair_bundles():
    """(base, finetuned) 16x32 bundles: base trained on xdog-fine, then
    finetuned onto the inverted variant. Cached on disk (~5 min to build)."""
    from sketchgan.data import CorpusSpec, build_corpus
    from sketchgan.models import ArchDescriptor, load_bundle, save_bundle
    from sketchgan.sketch import STYLE_PRESETS, SketchStyle
    from sketchgan.training import TrainConfig, finetune, train

    base_path = CACHE_DIR / "style-pair-base-v2.cgan"
    tuned_path = CACHE_DIR / "style-pair-tuned-v2.cgan"
    if base_path.exists() and tuned_path.exists():
        return load_bundle(base_path), load_bundle(tuned_path)

    CACHE_DIR.mkdir(parents=True, exist_ok=True)
    descriptor = ArchDescriptor(image_size=16, max_channels=64)
    fine = STYLE_PRESETS["xdog-fine"]
    inverted = inverted_fine_style()
    corpus_a = build_corpus(CorpusSpec(count=512, resolution=16, styles=[fine], seed=21))
    corpus_b = build_corpus(CorpusSpec(count=512, resolution=16, styles=[inverted], seed=22))
    base, _ = train(TrainConfig(epochs=94, batch_size=16, seed=5), corpus_a, descriptor)
    save_bundle(base, base_path)
    tuned = load_bundle(base_path)   # finetune mutates; keep base intact
    tuned, _ = finetune(tuned, TrainConfig(epochs=63, batch_size=16, seed=6,
                                           finetune_lr=1e-4), corpus_b)
    save_bundle(tuned, tuned_path)
    return load_bundle(base_path), tuned


def inverted_fine_style():
    from sketchgan.sketch import SketchStyle
    return SketchStyle("xdog-fine-inv", sigma=0.7, sigma_ratio=1.6, phi=260.0,
                       epsilon=-0.003, invert=True)


@pytest.fixture()
def rng():
    return np.random.default_rng(0)
