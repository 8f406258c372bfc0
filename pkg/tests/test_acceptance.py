"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with `pytest tests/test_acceptance.py -s` to see the per-criterion
lines as they complete. The trained toy bundle (32x64, procedural
shapes, 4032 steps) is cached under .cache/ after the first run.
"""

import hashlib
import time
from contextlib import contextmanager

import numpy as np
import pytest

import sketchgan as sg
from sketchgan import autodiff as ad
from sketchgan.autodiff import Tensor
from sketchgan.data import CorpusSpec, build_corpus
from sketchgan.evaluation import ssim
from sketchgan.models import ArchDescriptor, ModelBundle, load_bundle, save_bundle
from sketchgan.projection import (ProjectionConfig, contextual_loss, corrupted_joint,
                                  initialize, project, total_loss)
from sketchgan.sketch import IMAGE_TO_SKETCH, SKETCH_TO_IMAGE, make_mask
from sketchgan.toy import TOY_STEPS, toy_corpus, toy_corpus_spec, toy_descriptor, \
    toy_train_config
from sketchgan.training import TrainConfig, train

from gradcheck import check_input_gradient


@contextmanager
def criterion(name):
    try:
        yield
    except BaseException:
        print(f"ACCEPTANCE {name}: FAIL")
        raise
    print(f"ACCEPTANCE {name}: PASS")


F64 = np.float64


def _t(x):
    return Tensor(np.asarray(x), dtype=F64)


def test_gradient_suite():
    """Every differentiable op: central FD at 64-bit, rel err < 1e-4, on at
    least 5 random shapes each; end-to-end d(total)/dz on a small untrained
    32-bit model at 1e-3. Total runtime under 2 minutes."""
    started = time.perf_counter()
    with criterion("gradient-suite"):
        rng = np.random.default_rng(2024)

        def shapes(n, rank_choices):
            out = []
            for _ in range(n):
                rank = rank_choices[rng.integers(len(rank_choices))]
                out.append(tuple(int(rng.integers(1, 5)) for _ in range(rank)))
            return out

        # elementwise and reductions, 5 random shapes each
        unary = {
            "tanh": ad.tanh,
            "sigmoid": ad.sigmoid,
            "lrelu": lambda t: ad.lrelu(t, 0.2),
            "log": lambda t: ad.log(ad.clamp_min(ad.add(ad.mul(t, t), 0.5), 1e-6)),
            "clamp_min": lambda t: ad.clamp_min(t, 0.3),
            "reshape": lambda t: ad.reshape(t, (-1,)),
            "sum": lambda t: t,
            "mean": ad.tensor_mean,
        }
        for name, op in unary.items():
            for shape in shapes(5, (1, 2, 3)):
                x = rng.standard_normal(shape) + (0.0 if name != "clamp_min" else 0.0)
                weight = rng.standard_normal(np.asarray(op(_t(x)).data).shape)
                check_input_gradient(
                    lambda t, op=op, w=weight: ad.tensor_sum(ad.mul(op(t), _t(w))), x)

        for name, op in {"add": ad.add, "sub": ad.sub, "mul": ad.mul, "div": ad.div}.items():
            for shape in shapes(5, (1, 2, 3)):
                other = rng.standard_normal(shape)
                if name == "div":
                    other = np.abs(other) + 0.5
                weight = rng.standard_normal(shape)
                a = rng.standard_normal(shape)
                check_input_gradient(
                    lambda t, op=op, o=other, w=weight:
                    ad.tensor_sum(ad.mul(op(t, _t(o)), _t(w))), a)
                check_input_gradient(
                    lambda t, op=op, o=other, w=weight:
                    ad.tensor_sum(ad.mul(op(_t(o), t), _t(w))), a)

        for _ in range(5):
            n, k, m = (int(rng.integers(1, 5)) for _ in range(3))
            a, b = rng.standard_normal((n, k)), rng.standard_normal((k, m))
            weight = rng.standard_normal((n, m))
            check_input_gradient(lambda t, b=b, w=weight:
                                 ad.tensor_sum(ad.mul(ad.matmul(t, _t(b)), _t(w))), a)
            check_input_gradient(lambda t, a=a, w=weight:
                                 ad.tensor_sum(ad.mul(ad.matmul(_t(a), t), _t(w))), b)

        for _ in range(5):
            x = rng.standard_normal((2, int(rng.integers(4, 8)), 3))
            cut = int(rng.integers(1, x.shape[1]))
            weight_l = rng.standard_normal((2, cut, 3))
            check_input_gradient(
                lambda t, c=cut, w=weight_l:
                ad.tensor_sum(ad.mul(ad.slice_axis(t, 1, 0, c), _t(w))), x)
            weight_c = rng.standard_normal((2, 2 * x.shape[1], 3))
            check_input_gradient(
                lambda t, w=weight_c:
                ad.tensor_sum(ad.mul(ad.concat([t, t], 1), _t(w))), x)

        conv_cases = [((1, 6, 6, 2), (3, 3, 2, 3), 1, "same"),
                      ((2, 5, 6, 1), (3, 3, 1, 2), 2, "same"),
                      ((1, 8, 8, 2), (5, 5, 2, 2), 2, "same"),
                      ((1, 6, 6, 3), (3, 3, 3, 1), 1, "valid"),
                      ((2, 7, 7, 2), (5, 5, 2, 1), 2, "valid")]
        for xs, ws, stride, padding in conv_cases:
            x, w = rng.standard_normal(xs), rng.standard_normal(ws) * 0.5
            probe = ad.conv2d(_t(x), _t(w), stride, padding)
            weight = rng.standard_normal(probe.data.shape)
            check_input_gradient(lambda t, w_=w, wt=weight, s=stride, p=padding:
                                 ad.tensor_sum(ad.mul(ad.conv2d(t, _t(w_), s, p), _t(wt))), x)
            check_input_gradient(lambda t, x_=x, wt=weight, s=stride, p=padding:
                                 ad.tensor_sum(ad.mul(ad.conv2d(_t(x_), t, s, p), _t(wt))), w)

        convt_cases = [((1, 2, 3, 2), (5, 5, 2, 2), 2), ((1, 3, 3, 1), (3, 3, 2, 1), 2),
                       ((2, 2, 2, 2), (5, 5, 1, 2), 2), ((1, 4, 2, 1), (5, 5, 2, 1), 2),
                       ((1, 2, 2, 3), (1, 1, 2, 3), 2)]
        for xs, ws, stride in convt_cases:
            x, w = rng.standard_normal(xs), rng.standard_normal(ws) * 0.5
            probe = ad.conv2d_transpose(_t(x), _t(w), stride)
            weight = rng.standard_normal(probe.data.shape)
            check_input_gradient(lambda t, w_=w, wt=weight, s=stride:
                                 ad.tensor_sum(ad.mul(ad.conv2d_transpose(t, _t(w_), s), _t(wt))), x)
            check_input_gradient(lambda t, x_=x, wt=weight, s=stride:
                                 ad.tensor_sum(ad.mul(ad.conv2d_transpose(_t(x_), t, s), _t(wt))), w)

        for mode_train in (True, False):
            for _ in range(5):
                c = int(rng.integers(1, 4))
                x = rng.standard_normal((int(rng.integers(2, 5)), 3, 3, c))
                gamma = rng.standard_normal(c) + 1.0
                beta = rng.standard_normal(c)
                weight = rng.standard_normal(x.shape)
                rm = rng.standard_normal(c) * 0.1
                rv = np.abs(rng.standard_normal(c)) + 0.5
                check_input_gradient(
                    lambda t, g=gamma, b=beta, w=weight, rm_=rm, rv_=rv, tr=mode_train:
                    ad.tensor_sum(ad.mul(
                        ad.batchnorm(t, _t(g), _t(b), rm_.copy(), rv_.copy(), tr), _t(w))), x)
                check_input_gradient(
                    lambda t, x_=x, b=beta, w=weight, rm_=rm, rv_=rv, tr=mode_train:
                    ad.tensor_sum(ad.mul(
                        ad.batchnorm(_t(x_), t, _t(b), rm_.copy(), rv_.copy(), tr), _t(w))), gamma)

        # end-to-end: d(total)/dz on a small untrained 32-bit model, the FD
        # evaluated with z at float64 through the same f32 weights
        bundle = ModelBundle.initialize(ArchDescriptor(image_size=8, max_channels=32), seed=5)
        bundle.set_trainable(False)
        sketch = np.where(rng.uniform(size=(8, 8, 1)) > 0.85, -1.0, 1.0).astype(np.float32)
        y, m = corrupted_joint(sketch, SKETCH_TO_IMAGE, 8)
        cfg = ProjectionConfig(iterations=0, seed=0)

        def total_of(z_values):
            render = sg.generate(bundle.generator, Tensor(z_values, dtype=F64))
            total, _c, _p = total_loss(y, render, m, bundle.discriminator, cfg)
            return total

        z0 = rng.uniform(-1, 1, 100)
        zt = Tensor(z0, requires_grad=True, dtype=F64)
        render = sg.generate(bundle.generator, zt)
        total, _c, _p = total_loss(y, render, m, bundle.discriminator, cfg)
        total.backward()
        h = 1e-4
        for i in rng.choice(100, 5, replace=False):
            plus, minus = z0.copy(), z0.copy()
            plus[i] += h
            minus[i] -= h
            fd = (total_of(plus).item() - total_of(minus).item()) / (2 * h)
            rel = abs(fd - zt.grad[i]) / max(abs(fd), abs(zt.grad[i]), 1e-8)
            assert rel < 1e-3, f"z[{i}]: rel err {rel:.2e}"

        elapsed = time.perf_counter() - started
        assert elapsed < 120.0, f"gradient suite took {elapsed:.0f}s"


def test_objective_identities(rng):
    """Masking locality exact; KL >= 0 and == 0 on equality; trace identity
    at 1e-6; composite half-exactness bitwise. Under 1 minute."""
    started = time.perf_counter()
    with criterion("objective-identities"):
        m = make_mask(SKETCH_TO_IMAGE, 8, 8)

        for _ in range(10):
            y = rng.uniform(-1, 1, (8, 16, 3)).astype(np.float32)
            gz = rng.uniform(-1, 1, (8, 16, 3)).astype(np.float32)
            base = contextual_loss(y, Tensor(gz), m).item()
            assert base >= -1e-9
            y2, gz2 = y.copy(), gz.copy()
            y2[:, 8:, :] = rng.uniform(-1, 1, (8, 8, 3))
            gz2[:, 8:, :] = rng.uniform(-1, 1, (8, 8, 3))
            assert contextual_loss(y2, Tensor(gz2), m).item() == base

            gz_eq = gz.copy()
            gz_eq[:, :8, :] = y[:, :8, :]
            assert contextual_loss(y, Tensor(gz_eq), m).item() == 0.0

        bundle = ModelBundle.initialize(ArchDescriptor(image_size=8, max_channels=32), seed=9)
        bundle.set_trainable(False)
        sketch = np.where(rng.uniform(size=(8, 8, 1)) > 0.85, -1.0, 1.0).astype(np.float32)
        for lam in (0.0, 0.01, 0.5):
            cfg = ProjectionConfig(iterations=8, seed=3, lam=lam)
            _, trace = sg.complete(sketch, bundle, cfg)
            for c, p, t in zip(trace.contextual, trace.perceptual, trace.total):
                assert abs(t - (c + lam * p)) <= 1e-6

        for _ in range(10):
            y = rng.uniform(-1, 1, (8, 16, 3)).astype(np.float32)
            render = rng.uniform(-1, 1, (8, 16, 3)).astype(np.float32)
            for direction in (SKETCH_TO_IMAGE, IMAGE_TO_SKETCH):
                mk = make_mask(direction, 8, 8)
                out = sg.composite(y, mk, render)
                c0, c1 = mk.context_columns()
                assert np.array_equal(out[:, c0:c1], y[:, c0:c1])
                other = [col for col in range(16) if not (c0 <= col < c1)]
                assert np.array_equal(out[:, other], render[:, other])

        elapsed = time.perf_counter() - started
        assert elapsed < 60.0, f"objective identities took {elapsed:.0f}s"


def test_projection_behavior_on_trained_bundle(toy_bundle, toy_holdout):
    """On the trained toy bundle: >=90% of 20 seeded completions end with
    contextual <= best-of-N initial; every intermediate z in [-1,1]; a
    500-iteration projection finishes in under 30 s."""
    with criterion("projection-behavior"):
        assert toy_bundle.meta["steps"] >= 2000
        assert toy_bundle.meta["steps"] >= TOY_STEPS
        if "train_seconds" in toy_bundle.meta:
            assert toy_bundle.meta["train_seconds"] < 1800.0

        z_violations = 0

        def watch(iteration, c, p, render, z_values):
            nonlocal z_violations
            if np.any(np.abs(z_values) > 1.0):
                z_violations += 1

        wins = 0
        for i in range(20):
            sketch = toy_holdout.joints[i][:, :32, :1]
            cfg = ProjectionConfig(iterations=150, seed=1000 + i)
            y, m = corrupted_joint(sketch, cfg.direction, 32)
            _, trace = project(y, m, toy_bundle, cfg, progress=watch)
            wins += trace.contextual[-1] <= trace.contextual[0]
        assert z_violations == 0
        assert wins >= 18, f"contextual decreased in only {wins}/20 runs"

        sketch = toy_holdout.joints[20][:, :32, :1]
        started = time.perf_counter()
        _, trace = sg.complete(sketch, toy_bundle, ProjectionConfig(iterations=500, seed=7))
        elapsed = time.perf_counter() - started
        assert len(trace) == 501
        assert elapsed < 30.0, f"500-iteration projection took {elapsed:.1f}s"
        print(f"  [info] 20/20-run wins: {wins}, 500-iter time {elapsed:.1f}s")


def test_initialization_exact_argmin(toy_bundle, toy_holdout):
    """The selected candidate is the brute-force argmin of contextual loss
    over the N=10 renders."""
    with criterion("initialization-argmin"):
        assert ProjectionConfig().init_candidates == 10
        for trial in range(3):
            sketch = toy_holdout.joints[30 + trial][:, :32, :1]
            y, m = corrupted_joint(sketch, SKETCH_TO_IMAGE, 32)
            seed_seq = np.random.SeedSequence([555 + trial, 0x9E07])
            picked = initialize(y, m, toy_bundle.generator, 10,
                                np.random.default_rng(seed_seq))
            replay = np.random.default_rng(np.random.SeedSequence([555 + trial, 0x9E07]))
            losses, candidates = [], []
            for _ in range(10):
                cand = sg.sample_latent(replay, 100)
                candidates.append(cand)
                render = sg.generate(toy_bundle.generator, Tensor(cand.values))
                losses.append(contextual_loss(y, render, m).item())
            best = int(np.argmin(losses))
            assert np.array_equal(picked.values, candidates[best].values)
            assert all(losses[best] <= other for other in losses)


def test_learning_signal(toy_bundle, toy_holdout):
    """Trained discriminator separates held-out real from generated by a
    mean sigmoid gap >= 0.1; trained completions beat untrained completions
    on mean SSIM over >= 50 test sketches (strict)."""
    with criterion("learning-signal"):
        rng = np.random.default_rng(97)
        sig = lambda t: 1.0 / (1.0 + np.exp(-t.data.astype(np.float64)))
        real_logits = toy_bundle.discriminator.forward(Tensor(toy_holdout.joints), train=False)
        noise = Tensor(rng.uniform(-1, 1, (64, 100)).astype(np.float32))
        fakes = toy_bundle.generator.forward(noise, train=False)
        fake_logits = toy_bundle.discriminator.forward(Tensor(fakes.data), train=False)
        gap = float(sig(real_logits).mean() - sig(fake_logits).mean())
        assert gap >= 0.1, f"sigmoid gap {gap:.3f} < 0.1"

        untrained = ModelBundle.initialize(toy_descriptor(), seed=123)
        untrained.set_trainable(False)
        test_corpus = toy_corpus(count=50, seed=31337)

        def mean_ssim(bundle):
            scores = []
            for i in range(50):
                joint = test_corpus.joints[i]
                cfg = ProjectionConfig(iterations=100, seed=4000 + i)
                out, _ = sg.complete(joint[:, :32, :1], bundle, cfg)
                scores.append(ssim(out[:, 32:, :], joint[:, 32:, :]))
            return float(np.mean(scores))

        trained_score = mean_ssim(toy_bundle)
        untrained_score = mean_ssim(untrained)
        assert trained_score > untrained_score, \
            f"trained {trained_score:.4f} <= untrained {untrained_score:.4f}"
        print(f"  [info] gap {gap:.3f}, SSIM trained {trained_score:.4f} "
              f"vs untrained {untrained_score:.4f}")


def test_bidirectionality(toy_bundle, toy_holdout):
    """image_to_sketch runs the same engine with the complementary mask;
    generated sketch halves are near-binary (>= 90% of pixels within 0.2
    of +-1) on the toy model."""
    with criterion("bidirectionality"):
        a = make_mask(SKETCH_TO_IMAGE, 32, 32)
        b = make_mask(IMAGE_TO_SKETCH, 32, 32)
        assert np.array_equal(a.values + b.values, np.ones_like(a.values))

        near_fracs = []
        for i in range(10):
            photo = toy_holdout.joints[i][:, 32:, :]
            cfg = ProjectionConfig(iterations=150, seed=7000 + i,
                                   direction=IMAGE_TO_SKETCH)
            out, _ = sg.complete(photo, toy_bundle, cfg)
            assert np.array_equal(out[:, 32:, :], photo)    # context copied
            sketch_half = out[:, :32, :]
            near = np.minimum(np.abs(sketch_half - 1.0), np.abs(sketch_half + 1.0)) <= 0.2
            near_fracs.append(float(near.mean()))
        pooled = float(np.mean(near_fracs))
        assert pooled >= 0.9, f"pooled near-binary fraction {pooled:.3f} < 0.9"
        print(f"  [info] near-binary pooled {pooled:.3f}, min {min(near_fracs):.3f}")


def test_reproducibility(tmp_path):
    """Same seeds: corpus bitwise identical, first-10-step losses bitwise
    identical, completion outputs bitwise identical; bundle round-trips."""
    with criterion("reproducibility"):
        spec = toy_corpus_spec(count=16, seed=77)
        corpus_a, corpus_b = build_corpus(spec), build_corpus(spec)
        assert np.array_equal(corpus_a.joints, corpus_b.joints)
        from sketchgan.pngio import unit_to_u8
        assert unit_to_u8(corpus_a.joints[0]).tobytes() == \
            unit_to_u8(corpus_b.joints[0]).tobytes()

        ten_step_corpus = build_corpus(toy_corpus_spec(count=160, seed=5))
        config = TrainConfig(epochs=1, batch_size=16, seed=13)
        logs = []
        for _ in range(2):
            _, loss_log = train(config, ten_step_corpus, toy_descriptor())
            assert len(loss_log.rows) == 10
            logs.append(loss_log.rows)
        assert logs[0] == logs[1]       # bitwise float equality

        bundle = ModelBundle.initialize(ArchDescriptor(image_size=8, max_channels=32), seed=3)
        bundle.set_trainable(False)
        rng = np.random.default_rng(0)
        sketch = np.where(rng.uniform(size=(8, 8, 1)) > 0.85, -1.0, 1.0).astype(np.float32)
        out_a, _ = sg.complete(sketch, bundle, ProjectionConfig(iterations=20, seed=9))
        out_b, _ = sg.complete(sketch, bundle, ProjectionConfig(iterations=20, seed=9))
        assert np.array_equal(out_a, out_b)

        path = tmp_path / "roundtrip.cgan"
        save_bundle(bundle, path)
        reloaded = load_bundle(path)
        digest = lambda b: hashlib.sha256(
            b"".join(arr.tobytes() for _, arr in sorted(b.named_arrays().items()))).hexdigest()
        assert digest(bundle) == digest(reloaded)


def test_ssim_unit(rng):
    """ssim(x,x) exactly 1.0; symmetry to 1e-12; single-window oracle
    agreement to 1e-10 on constant pairs."""
    with criterion("ssim-unit"):
        for _ in range(5):
            x = rng.uniform(-1, 1, (16, 16, 3))
            assert ssim(x, x) == 1.0
            y = rng.uniform(-1, 1, (16, 16, 3))
            assert abs(ssim(x, y) - ssim(y, x)) < 1e-12

        c1, c2 = 0.01 ** 2, 0.03 ** 2
        a, b = np.full((8, 8), 0.2), np.full((8, 8), 0.3)
        la, lb = (a + 1) / 2, (b + 1) / 2
        mu_a, mu_b = la.mean(), lb.mean()
        oracle = ((2 * mu_a * mu_b + c1) * (2 * 0.0 + c2)) / \
                 ((mu_a ** 2 + mu_b ** 2 + c1) * (0.0 + 0.0 + c2))
        assert abs(ssim(a, b) - oracle) < 1e-10
