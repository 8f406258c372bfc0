"""Adversarial training on joint images, plus the base-then-finetune recipe.

Alternating updates per batch: the discriminator maximizes
log D(x) + log(1 - D(G(z))), the generator minimizes the non-saturating
-log D(G(z)). All randomness (batch order, noise) derives from
(seed, epoch/step), so a checkpoint plus its step counter resumes
bit-exactly.
"""

from __future__ import annotations

import csv
import logging
import time
from dataclasses import dataclass, asdict
from pathlib import Path

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .data import Corpus, batches
from .models import ArchDescriptor, ModelBundle, save_bundle
from .optim import AdamState, adam_step, zero_grads

log = logging.getLogger(__name__)

_LOG_EPS = 1e-7


class TrainingDiverged(RuntimeError):
    pass


@dataclass
class TrainConfig:
    epochs: int = 200
    batch_size: int = 64
    g_lr: float = 2e-4
    d_lr: float = 2e-4
    beta1: float = 0.5
    seed: int = 0
    checkpoint_every: int = 0           # steps between checkpoints; 0 = off
    checkpoint_dir: str | None = None
    finetune_from: str | None = None
    finetune_lr: float = 1e-5
    loss_log: str | None = None

    def __post_init__(self):
        if self.epochs < 0 or self.batch_size < 1:
            raise ValueError("epochs must be >= 0 and batch_size >= 1")
        if min(self.g_lr, self.d_lr, self.finetune_lr) <= 0:
            raise ValueError("learning rates must be positive")

    def to_json(self) -> dict:
        return asdict(self)


class LossLog:
    """Append-only (step, d_loss, g_loss) records, optionally mirrored to CSV."""

    def __init__(self, path=None):
        self.rows: list[tuple[int, float, float]] = []
        self._path = Path(path) if path else None
        if self._path and not self._path.exists():
            self._path.write_text("step,d_loss,g_loss\n")

    def append(self, step: int, d_loss: float, g_loss: float) -> None:
        self.rows.append((step, d_loss, g_loss))
        if self._path:
            with open(self._path, "a", newline="") as fh:
                csv.writer(fh).writerow([step, repr(d_loss), repr(g_loss)])


def _noise(rng: np.random.Generator, n: int, dim: int) -> Tensor:
    return Tensor(rng.uniform(-1.0, 1.0, size=(n, dim)).astype(np.float32))


def _bce_real(logits: Tensor) -> Tensor:
    """-mean log sigmoid(logit): push logits up."""
    return ad.mul(ad.tensor_mean(ad.log(ad.clamp_min(ad.sigmoid(logits), _LOG_EPS))), -1.0)


def _bce_fake(logits: Tensor) -> Tensor:
    """-mean log(1 - sigmoid(logit)): push logits down."""
    return ad.mul(ad.tensor_mean(ad.log(ad.clamp_min(
        ad.sub(1.0, ad.sigmoid(logits)), _LOG_EPS))), -1.0)


def _opt_extras(opt_g: AdamState, opt_d: AdamState) -> dict[str, np.ndarray]:
    extras = {}
    for tag, opt in (("g", opt_g), ("d", opt_d)):
        for i, (m, v) in enumerate(zip(opt.m, opt.v)):
            extras[f"opt.{tag}.m.{i:03d}"] = m
            extras[f"opt.{tag}.v.{i:03d}"] = v
    return extras


def _restore_opt(bundle: ModelBundle, opt: AdamState, tag: str) -> None:
    for i in range(len(opt.m)):
        m_key, v_key = f"opt.{tag}.m.{i:03d}", f"opt.{tag}.v.{i:03d}"
        if m_key in bundle.extras:
            opt.m[i][...] = bundle.extras[m_key]
            opt.v[i][...] = bundle.extras[v_key]


def _run_training(bundle: ModelBundle, corpus: Corpus, config: TrainConfig,
                  g_lr: float, d_lr: float, start_epoch: int = 0,
                  start_batch: int = 0, loss_log: LossLog | None = None) -> LossLog:
    gen, disc = bundle.generator, bundle.discriminator
    bundle.set_trainable(True)
    g_params, d_params = gen.params(), disc.params()
    opt_g = AdamState.for_params(g_params, g_lr, config.beta1)
    opt_d = AdamState.for_params(d_params, d_lr, config.beta1)
    opt_g.step_count = int(bundle.meta.get("opt_g_t", 0))
    opt_d.step_count = int(bundle.meta.get("opt_d_t", 0))
    _restore_opt(bundle, opt_g, "g")
    _restore_opt(bundle, opt_d, "d")

    loss_log = loss_log or LossLog(config.loss_log)
    latent_dim = bundle.descriptor.latent_dim
    step = int(bundle.meta.get("steps", 0))
    started = time.perf_counter()

    for epoch in range(start_epoch, config.epochs):
        for batch_index, (joints, _tags) in enumerate(batches(corpus, config.batch_size,
                                                              epoch, config.seed)):
            if epoch == start_epoch and batch_index < start_batch:
                continue
            real = Tensor(joints)
            n = joints.shape[0]
            rng = np.random.default_rng(np.random.SeedSequence([config.seed, step, 0x7A1]))

            fake = gen.forward(_noise(rng, n, latent_dim), train=True)

            # discriminator step (fake detached); running stats track real
            # data only so inference normalization reflects the data
            # distribution, keeping held-out real scores calibrated
            zero_grads(d_params)
            d_loss = ad.add(_bce_real(disc.forward(real, train=True)),
                            _bce_fake(disc.forward(Tensor(fake.data), train=True,
                                                   update_stats=False)))
            d_loss.backward()
            adam_step(d_params, [p.grad for p in d_params], opt_d)

            # generator step (through the updated discriminator)
            zero_grads(g_params)
            zero_grads(d_params)
            g_loss = _bce_real(disc.forward(fake, train=True, update_stats=False))
            g_loss.backward()
            adam_step(g_params, [p.grad for p in g_params], opt_g)
            zero_grads(d_params)

            step += 1
            d_val, g_val = d_loss.item(), g_loss.item()
            if not (np.isfinite(d_val) and np.isfinite(g_val)):
                raise TrainingDiverged(
                    f"non-finite loss at step {step}: d_loss={d_val} g_loss={g_val}")
            loss_log.append(step, d_val, g_val)

            bundle.meta.update({"steps": step, "epoch": epoch,
                                "batch_index": batch_index + 1,
                                "opt_g_t": opt_g.step_count, "opt_d_t": opt_d.step_count})
            if config.checkpoint_every and step % config.checkpoint_every == 0:
                _write_checkpoint(bundle, opt_g, opt_d, config)
        bundle.meta["batch_index"] = 0
        bundle.meta["epoch"] = epoch + 1

    bundle.meta["train_seconds"] = round(time.perf_counter() - started, 3)
    bundle.extras = _opt_extras(opt_g, opt_d)
    bundle.set_trainable(False)
    return loss_log


def _write_checkpoint(bundle: ModelBundle, opt_g, opt_d, config: TrainConfig) -> None:
    if not config.checkpoint_dir:
        return
    directory = Path(config.checkpoint_dir)
    directory.mkdir(parents=True, exist_ok=True)
    bundle.extras = _opt_extras(opt_g, opt_d)
    path = directory / f"step_{bundle.meta['steps']:07d}.cgan"
    save_bundle(bundle, path)
    log.info("checkpoint written: %s", path)


def train(config: TrainConfig, corpus: Corpus,
          descriptor: ArchDescriptor) -> tuple[ModelBundle, LossLog]:
    """Train from scratch; returns an inference-ready bundle and the loss log."""
    if corpus.resolution != descriptor.image_size:
        raise ValueError(f"corpus resolution {corpus.resolution} does not match "
                         f"descriptor image_size {descriptor.image_size}")
    style = corpus.style_tags[0] if len(set(corpus.style_tags)) == 1 else "mixed"
    bundle = ModelBundle.initialize(descriptor, config.seed, style=style)
    bundle.meta.update({"seed": config.seed, "epochs": config.epochs,
                        "batch_size": config.batch_size})
    loss_log = _run_training(bundle, corpus, config, config.g_lr, config.d_lr)
    return bundle, loss_log


def finetune(base: ModelBundle, config: TrainConfig,
             corpus: Corpus) -> tuple[ModelBundle, LossLog]:
    """Continue from a trained bundle on a new style at the finetune rate."""
    if corpus.resolution != base.descriptor.image_size:
        raise ValueError(f"corpus resolution {corpus.resolution} does not match "
                         f"bundle image_size {base.descriptor.image_size}")
    style = corpus.style_tags[0] if len(set(corpus.style_tags)) == 1 else "mixed"
    base.meta = dict(base.meta, finetuned_from=base.style, epochs=config.epochs,
                     opt_g_t=0, opt_d_t=0)
    base.extras = {}     # fresh optimizer moments for the new objective
    base.style = style
    loss_log = _run_training(base, corpus, config, config.finetune_lr,
                             config.finetune_lr)
    return base, loss_log


def resume(checkpoint: ModelBundle, config: TrainConfig,
           corpus: Corpus) -> tuple[ModelBundle, LossLog]:
    """Continue a checkpointed run; reproduces the uninterrupted run bitwise."""
    start_epoch = int(checkpoint.meta.get("epoch", 0))
    start_batch = int(checkpoint.meta.get("batch_index", 0))
    loss_log = _run_training(checkpoint, corpus, config, config.g_lr, config.d_lr,
                             start_epoch=start_epoch, start_batch=start_batch)
    return checkpoint, loss_log
