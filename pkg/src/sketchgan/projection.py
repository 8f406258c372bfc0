"""Latent projection: complete a half-empty joint image through the GAN.

The corrupted joint image (context half filled, other half zeroed) is
mapped to the latent code whose render best matches the context, by
momentum descent on

    total(z) = contextual(z) + lambda * perceptual(z)

with generator and discriminator weights frozen; only z moves. The final
output composites the input context half with the render of the solution.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, asdict

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .models import GeneratorNet, DiscriminatorNet, ModelBundle, LatentVector, \
    sample_latent, generate, discriminate
from .optim import MomentumState, momentum_step
from .sketch import JointImage, Mask, make_mask, SKETCH_TO_IMAGE, IMAGE_TO_SKETCH, DIRECTIONS

KL_MASS = "mass"
KL_BERNOULLI = "bernoulli"


@dataclass
class ProjectionConfig:
    """Knobs of the completion optimization."""

    lam: float = 0.01
    momentum: float = 0.9
    step_size: float = 0.01
    iterations: int = 500
    init_candidates: int = 10
    clipping: str = "stochastic"        # "stochastic" | "hard"
    direction: str = SKETCH_TO_IMAGE
    seed: int = 0
    kl_mode: str = KL_MASS              # "mass" | "bernoulli"
    frames_every: int = 0               # 0 = no snapshot frames

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError("lambda must be >= 0")
        if self.init_candidates < 1:
            raise ValueError("need at least one init candidate")
        if self.iterations < 0:
            raise ValueError("iterations must be >= 0")
        if self.clipping not in ("stochastic", "hard"):
            raise ValueError(f"unknown clipping mode {self.clipping!r}")
        if self.direction not in DIRECTIONS:
            raise ValueError(f"unknown direction {self.direction!r}")
        if self.kl_mode not in (KL_MASS, KL_BERNOULLI):
            raise ValueError(f"unknown kl mode {self.kl_mode!r}")

    def to_json(self) -> dict:
        return asdict(self)


@dataclass
class ProjectionTrace:
    """Loss history including the initial point: iterations+1 entries."""

    contextual: list[float] = field(default_factory=list)
    perceptual: list[float] = field(default_factory=list)
    total: list[float] = field(default_factory=list)
    frames: list[tuple[int, np.ndarray]] = field(default_factory=list)

    def append(self, c: float, p: float, lam: float) -> None:
        self.contextual.append(c)
        self.perceptual.append(p)
        self.total.append(c + lam * p)

    def __len__(self):
        return len(self.total)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["iter", "contextual", "perceptual", "total"])
            for i, (c, p, t) in enumerate(zip(self.contextual, self.perceptual, self.total)):
                writer.writerow([i, repr(c), repr(p), repr(t)])


def _joint_pixels(y) -> np.ndarray:
    return y.pixels if isinstance(y, JointImage) else np.asarray(y, dtype=np.float32)


def mass_distribution(values: np.ndarray, eps: float = 1e-6) -> np.ndarray:
    """Stroke-intensity mass: map [-1,1] to (1-v)/2, smooth, normalize to 1."""
    s = (1.0 - values.astype(np.float32)) * np.float32(0.5) + np.float32(eps)
    return s / s.sum()


def contextual_loss(y, gz, m: Mask, eps: float = 1e-6, mode: str = KL_MASS):
    """KL divergence between the context halves of y and G(z).

    The context half of each joint image is read as stroke intensity
    (black=1, white=0). `mass` treats the whole half as one distribution
    over pixels, D_KL(input || generated); `bernoulli` averages per-pixel
    Bernoulli divergences. Differentiable w.r.t. gz; pixels outside the
    mask never contribute.
    """
    y_arr = _joint_pixels(y)
    gz_t = gz if isinstance(gz, Tensor) else Tensor(gz)
    if gz_t.data.shape != y_arr.shape:
        raise ValueError(f"joint shapes differ: {y_arr.shape} vs {gz_t.data.shape}")
    c0, c1 = m.context_columns()
    if m.values.shape[0] != y_arr.shape[0] or m.values.shape[1] != y_arr.shape[1]:
        raise ValueError(f"mask shape {m.values.shape} does not match joint {y_arr.shape}")

    p_half = y_arr[:, c0:c1, :]
    q_half = ad.slice_axis(gz_t, 1, c0, c1)

    if mode == KL_MASS:
        p = mass_distribution(p_half, eps)
        sq = ad.add(ad.mul(ad.sub(1.0, q_half), 0.5), eps)
        qn = ad.div(sq, ad.tensor_sum(sq))
        entropy_term = float(np.sum(p * np.log(p)))
        return ad.sub(entropy_term, ad.tensor_sum(ad.mul(Tensor(p), ad.log(qn))))

    # per-pixel Bernoulli alternative
    clip = np.float32(eps)
    p = np.clip((1.0 - p_half.astype(np.float32)) * 0.5, clip, 1.0 - clip)
    sq = ad.mul(ad.sub(1.0, q_half), 0.5)
    q = ad.clamp_min(sq, eps)
    q1 = ad.clamp_min(ad.sub(1.0, sq), eps)
    const = float(np.mean(p * np.log(p) + (1.0 - p) * np.log1p(-p)))
    cross = ad.tensor_mean(ad.add(ad.mul(Tensor(p), ad.log(q)),
                                  ad.mul(Tensor(1.0 - p), ad.log(q1))))
    return ad.sub(const, cross)


def perceptual_loss(d: DiscriminatorNet, gz, eps: float = 1e-7):
    """Adversarial realism term log(1 - D(G(z))), epsilon-clamped.

    Decreases toward log(eps) as the discriminator judges gz more real.
    """
    logit = discriminate(d, gz)
    fake_prob = ad.sub(1.0, ad.sigmoid(logit))
    return ad.log(ad.clamp_min(fake_prob, eps))


def total_loss(y, gz, m: Mask, d: DiscriminatorNet, config: ProjectionConfig):
    c = contextual_loss(y, gz, m, mode=config.kl_mode)
    p = perceptual_loss(d, gz)
    return ad.add(c, ad.mul(p, config.lam)), c, p


def initialize(y, m: Mask, g: GeneratorNet, n: int, rng: np.random.Generator,
               kl_mode: str = KL_MASS) -> LatentVector:
    """Best-of-n start: the sample whose render's context half is KL-closest."""
    if n < 1:
        raise ValueError("need at least one candidate")
    candidates = [sample_latent(rng, g.descriptor.latent_dim) for _ in range(n)]
    losses = []
    for cand in candidates:
        render = generate(g, Tensor(cand.values))
        losses.append(contextual_loss(y, render, m, mode=kl_mode).item())
    return candidates[int(np.argmin(losses))]   # ties: lowest index


def stochastic_clip(values: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Resample out-of-range components uniformly in [-1,1]; keep the rest."""
    out = values.copy()
    bad = np.abs(out) > 1.0
    if np.any(bad):
        out[bad] = rng.uniform(-1.0, 1.0, size=int(bad.sum())).astype(out.dtype)
    return out


def hard_clip(values: np.ndarray) -> np.ndarray:
    return np.clip(values, -1.0, 1.0)


def composite(y, m: Mask, gz_hat: np.ndarray) -> np.ndarray:
    """Context half copied from y bit-exactly, the rest from the render."""
    y_arr = _joint_pixels(y)
    gz_arr = gz_hat.data if isinstance(gz_hat, Tensor) else np.asarray(gz_hat, dtype=np.float32)
    if gz_arr.shape != y_arr.shape:
        raise ValueError(f"joint shapes differ: {y_arr.shape} vs {gz_arr.shape}")
    return np.where(m.values > 0.5, y_arr, gz_arr)


def project(y, m: Mask, bundle: ModelBundle, config: ProjectionConfig,
            progress=None) -> tuple[LatentVector, ProjectionTrace]:
    """Momentum descent on the combined objective, z clipped each step.

    Weights stay frozen (the bundle must be non-trainable); the trace
    records losses at the initial point and after every step, so it holds
    iterations+1 entries. `progress`, when given, is called at each
    recorded point as progress(iteration, contextual, perceptual, render, z)
    with the raw render G(z) and the current z values at that iteration.
    """
    trainable = [p for p in bundle.params() if p.requires_grad]
    if trainable:
        raise ValueError("projection needs a frozen bundle; call set_trainable(False)")
    rng = np.random.default_rng(np.random.SeedSequence([int(config.seed), 0x9E07]))
    start = initialize(y, m, bundle.generator, config.init_candidates, rng,
                       kl_mode=config.kl_mode)

    z = Tensor(start.values.copy(), requires_grad=True)
    state = MomentumState.for_params([z], config.step_size, config.momentum)
    trace = ProjectionTrace()

    def record(iteration: int, c, p, render) -> None:
        trace.append(c.item(), p.item(), config.lam)
        if config.frames_every and (iteration % config.frames_every == 0
                                    or iteration == config.iterations):
            trace.frames.append((iteration, composite(y, m, render.data)))
        if progress is not None:
            progress(iteration, trace.contextual[-1], trace.perceptual[-1],
                     render.data, z.data)

    for it in range(config.iterations):
        render = generate(bundle.generator, z)
        total, c, p = total_loss(y, render, m, bundle.discriminator, config)
        record(it, c, p, render)
        z.grad = None
        total.backward()
        momentum_step([z], [z.grad], state)
        z.data = stochastic_clip(z.data, rng) if config.clipping == "stochastic" \
            else hard_clip(z.data)

    final_render = generate(bundle.generator, Tensor(z.data))
    c = contextual_loss(y, final_render, m, mode=config.kl_mode)
    p = perceptual_loss(bundle.discriminator, final_render)
    record(config.iterations, c, p, final_render)
    return LatentVector(z.data.copy()), trace


def corrupted_joint(context_half: np.ndarray, direction: str, image_size: int) -> tuple[JointImage, Mask]:
    """Assemble y with the context half filled and the other half zeroed."""
    pixels = np.zeros((image_size, 2 * image_size, 3), dtype=np.float32)
    if direction == SKETCH_TO_IMAGE:
        sketch = np.asarray(context_half, dtype=np.float32)
        if sketch.ndim == 2:
            sketch = sketch[..., None]
        if sketch.shape != (image_size, image_size, 1):
            raise ValueError(f"sketch must be [{image_size},{image_size},1], got {sketch.shape}")
        pixels[:, :image_size, :] = np.repeat(sketch, 3, axis=2)
    else:
        photo = np.asarray(context_half, dtype=np.float32)
        if photo.shape != (image_size, image_size, 3):
            raise ValueError(f"photo must be [{image_size},{image_size},3], got {photo.shape}")
        pixels[:, image_size:, :] = photo
    return JointImage(pixels), make_mask(direction, image_size, image_size)


def complete(context_half: np.ndarray, bundle: ModelBundle, config: ProjectionConfig,
             progress=None) -> tuple[np.ndarray, ProjectionTrace]:
    """End-to-end completion in either direction: build y and the mask,
    project, composite. Returns the composited joint image and the trace."""
    size = bundle.descriptor.image_size
    arr = np.asarray(context_half)
    if arr.shape[0] != size or arr.shape[1] != size:
        raise ValueError(
            f"input is {arr.shape[0]}x{arr.shape[1]} but the bundle expects its "
            f"context half at {size}x{size}")
    y, m = corrupted_joint(arr, config.direction, size)
    z_hat, trace = project(y, m, bundle, config, progress=progress)
    render = generate(bundle.generator, Tensor(z_hat.values))
    return composite(y, m, render.data), trace
