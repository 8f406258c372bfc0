"""Generator and discriminator over joint sketch|photo images.

One resolution-parametric code path: a latent vector is projected to a
4x8 seed grid, then doubled by stride-2 transposed convolutions until it
reaches the joint resolution (H, 2H, 3). The discriminator mirrors this
with stride-2 convolutions back down to the seed grid and a single logit.
"""

from __future__ import annotations

import io
import json
import struct
from dataclasses import dataclass, field, asdict

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor

BUNDLE_MAGIC = b"CGAN"
BUNDLE_VERSION = 1


class FormatError(ValueError):
    """Malformed weight file; message names the offending field."""


@dataclass(frozen=True)
class ArchDescriptor:
    """Resolution/capacity knobs shared by both nets.

    image_size is the photo half; the joint image is (image_size,
    2*image_size, 3). The number of doubling stages follows from the 4x8
    seed grid, so only power-of-two multiples of 4 are valid sizes.
    """

    image_size: int = 64
    latent_dim: int = 100
    max_channels: int = 512
    seed_h: int = 4
    seed_w: int = 8
    kernel: int = 5
    lrelu_slope: float = 0.2

    def __post_init__(self):
        if self.seed_w != 2 * self.seed_h:
            raise ValueError("seed grid must have 2:1 aspect to match joint images")
        ratio = self.image_size / self.seed_h
        if ratio < 2 or ratio != 2 ** round(np.log2(ratio)):
            raise ValueError(
                f"image_size {self.image_size} not reachable from a {self.seed_h}x{self.seed_w} "
                f"seed by doubling; need seed_h * 2^n with n >= 1")
        if self.latent_dim < 1 or self.max_channels < 8:
            raise ValueError("latent_dim >= 1 and max_channels >= 8 required")

    @property
    def stages(self) -> int:
        return int(round(np.log2(self.image_size / self.seed_h)))

    @property
    def joint_shape(self) -> tuple[int, int, int]:
        return (self.image_size, 2 * self.image_size, 3)

    def stage_channels(self) -> list[int]:
        """Generator channel widths after each up-conv (last is RGB)."""
        n = self.stages
        return [self.max_channels >> (j + 1) for j in range(n - 1)] + [3]

    def to_json(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json(cls, obj: dict) -> "ArchDescriptor":
        return cls(**obj)


def full_scale_descriptor() -> ArchDescriptor:
    """64x128 joint resolution, the full-scale configuration."""
    return ArchDescriptor(image_size=64, max_channels=512)


def desk_descriptor(max_channels: int = 256) -> ArchDescriptor:
    """32x64 joint resolution, CPU-trainable in minutes."""
    return ArchDescriptor(image_size=32, max_channels=max_channels)


# -- latent vectors -----------------------------------------------------------

@dataclass
class LatentVector:
    """Code z in [-1,1]^dim, the optimization variable of the projection."""

    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float32).reshape(-1)
        if self.values.size == 0:
            raise ValueError("empty latent vector")
        if np.max(np.abs(self.values)) > 1.0 + 1e-6:
            raise ValueError("latent components must lie in [-1, 1]")

    @property
    def dim(self) -> int:
        return self.values.size


def sample_latent(rng: np.random.Generator, dim: int = 100) -> LatentVector:
    return LatentVector(rng.uniform(-1.0, 1.0, size=dim).astype(np.float32))


# -- parameter containers -----------------------------------------------------

class BatchNormLayer:
    def __init__(self, channels: int, rng: np.random.Generator):
        self.gamma = Tensor(rng.normal(1.0, 0.02, channels).astype(np.float32),
                            requires_grad=True)
        self.beta = Tensor(np.zeros(channels, dtype=np.float32), requires_grad=True)
        self.mean = np.zeros(channels, dtype=np.float32)
        self.var = np.ones(channels, dtype=np.float32)

    def __call__(self, x: Tensor, train: bool, update_stats=None) -> Tensor:
        return ad.batchnorm(x, self.gamma, self.beta, self.mean, self.var, train,
                            update_stats=update_stats)

    def params(self):
        return [self.gamma, self.beta]

    def arrays(self, prefix):
        return {f"{prefix}.gamma": self.gamma.data, f"{prefix}.beta": self.beta.data,
                f"{prefix}.mean": self.mean, f"{prefix}.var": self.var}


def _init_weight(rng, shape):
    return Tensor(rng.normal(0.0, 0.02, shape).astype(np.float32), requires_grad=True)


def _init_bias(channels):
    return Tensor(np.zeros(channels, dtype=np.float32), requires_grad=True)


class GeneratorNet:
    """Latent -> joint image in [-1,1]^(H x 2W x 3) via tanh."""

    def __init__(self, descriptor: ArchDescriptor, rng: np.random.Generator):
        self.descriptor = descriptor
        d = descriptor
        seed_units = d.seed_h * d.seed_w * d.max_channels
        self.fc_w = _init_weight(rng, (d.latent_dim, seed_units))
        self.fc_bn = BatchNormLayer(d.max_channels, rng)
        self.up_kernels: list[Tensor] = []
        self.up_bns: list[BatchNormLayer | None] = []
        in_ch = d.max_channels
        channels = d.stage_channels()
        for j, out_ch in enumerate(channels):
            self.up_kernels.append(_init_weight(rng, (d.kernel, d.kernel, out_ch, in_ch)))
            last = j == len(channels) - 1
            self.up_bns.append(None if last else BatchNormLayer(out_ch, rng))
            in_ch = out_ch
        self.out_bias = _init_bias(3)

    def forward(self, z: Tensor, train: bool = False) -> Tensor:
        d = self.descriptor
        if z.data.ndim != 2 or z.data.shape[1] != d.latent_dim:
            raise ValueError(f"latent batch must be [N,{d.latent_dim}], got {z.data.shape}")
        n = z.data.shape[0]
        h = ad.matmul(z, self.fc_w)
        h = ad.reshape(h, (n, d.seed_h, d.seed_w, d.max_channels))
        h = ad.lrelu(self.fc_bn(h, train), d.lrelu_slope)
        for kernel, bn in zip(self.up_kernels, self.up_bns):
            h = ad.conv2d_transpose(h, kernel, stride=2)
            if bn is not None:
                h = ad.lrelu(bn(h, train), d.lrelu_slope)
        return ad.tanh(ad.add(h, self.out_bias))

    def params(self) -> list[Tensor]:
        out = [self.fc_w] + self.fc_bn.params()
        for kernel, bn in zip(self.up_kernels, self.up_bns):
            out.append(kernel)
            if bn is not None:
                out.extend(bn.params())
        out.append(self.out_bias)
        return out

    def named_arrays(self) -> dict[str, np.ndarray]:
        arrays = {"g.fc.w": self.fc_w.data}
        arrays.update(self.fc_bn.arrays("g.fc.bn"))
        for j, (kernel, bn) in enumerate(zip(self.up_kernels, self.up_bns), 1):
            arrays[f"g.up{j}.k"] = kernel.data
            if bn is not None:
                arrays.update(bn.arrays(f"g.up{j}.bn"))
        arrays["g.out.b"] = self.out_bias.data
        return arrays


class DiscriminatorNet:
    """Joint image -> one realness logit (probability = sigmoid)."""

    def __init__(self, descriptor: ArchDescriptor, rng: np.random.Generator):
        self.descriptor = descriptor
        d = descriptor
        n = d.stages
        self.conv_kernels: list[Tensor] = []
        self.conv_bns: list[BatchNormLayer | None] = []
        in_ch = 3
        for j in range(n):
            out_ch = d.max_channels >> (n - 1 - j)
            self.conv_kernels.append(_init_weight(rng, (d.kernel, d.kernel, in_ch, out_ch)))
            # DCGAN convention: no normalization on the first conv
            self.conv_bns.append(None if j == 0 else BatchNormLayer(out_ch, rng))
            in_ch = out_ch
        self.conv1_bias = _init_bias(self.conv_kernels[0].data.shape[-1])
        seed_units = d.seed_h * d.seed_w * d.max_channels
        self.fc_w = _init_weight(rng, (seed_units, 1))
        self.fc_b = _init_bias(1)

    def forward(self, x: Tensor, train: bool = False, update_stats=None) -> Tensor:
        d = self.descriptor
        expected = (d.image_size, 2 * d.image_size, 3)
        if x.data.ndim != 4 or x.data.shape[1:] != expected:
            raise ValueError(f"discriminator input must be [N,{expected[0]},{expected[1]},3], "
                             f"got {x.data.shape}")
        h = x
        for j, (kernel, bn) in enumerate(zip(self.conv_kernels, self.conv_bns)):
            h = ad.conv2d(h, kernel, stride=2, padding="same")
            if j == 0:
                h = ad.add(h, self.conv1_bias)
            if bn is not None:
                h = bn(h, train, update_stats=update_stats)
            h = ad.lrelu(h, d.lrelu_slope)
        n = x.data.shape[0]
        flat = ad.reshape(h, (n, d.seed_h * d.seed_w * d.max_channels))
        return ad.add(ad.matmul(flat, self.fc_w), self.fc_b)

    def params(self) -> list[Tensor]:
        out = []
        for kernel, bn in zip(self.conv_kernels, self.conv_bns):
            out.append(kernel)
            if bn is not None:
                out.extend(bn.params())
        out.extend([self.conv1_bias, self.fc_w, self.fc_b])
        return out

    def named_arrays(self) -> dict[str, np.ndarray]:
        arrays = {}
        for j, (kernel, bn) in enumerate(zip(self.conv_kernels, self.conv_bns), 1):
            arrays[f"d.conv{j}.k"] = kernel.data
            if bn is not None:
                arrays.update(bn.arrays(f"d.conv{j}.bn"))
        arrays["d.conv1.b"] = self.conv1_bias.data
        arrays["d.fc.w"] = self.fc_w.data
        arrays["d.fc.b"] = self.fc_b.data
        return arrays


def generate(g: GeneratorNet, z) -> Tensor:
    """Render one joint image [H,2W,3]; differentiable when z is a grad Tensor."""
    if isinstance(z, LatentVector):
        z = Tensor(z.values)
    if z.data.ndim != 1:
        raise ValueError(f"generate takes a single latent vector, got shape {z.data.shape}")
    batch = ad.reshape(z, (1, z.data.shape[0]))
    out = g.forward(batch, train=False)
    return ad.reshape(out, out.data.shape[1:])


def discriminate(d: DiscriminatorNet, x) -> Tensor:
    """Score one joint image [H,2W,3] -> scalar logit."""
    if not isinstance(x, Tensor):
        x = Tensor(x)
    batch = ad.reshape(x, (1,) + tuple(x.data.shape))
    logit = d.forward(batch, train=False)
    return ad.reshape(logit, ())


# -- bundles ------------------------------------------------------------------

@dataclass
class ModelBundle:
    """Generator + discriminator weights with their descriptor and provenance."""

    generator: GeneratorNet
    discriminator: DiscriminatorNet
    descriptor: ArchDescriptor
    style: str = "xdog-fine"
    meta: dict = field(default_factory=dict)
    extras: dict = field(default_factory=dict)   # optimizer state in checkpoints

    @classmethod
    def initialize(cls, descriptor: ArchDescriptor, seed: int, style: str = "xdog-fine") -> "ModelBundle":
        rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0x6D6F64]))
        g = GeneratorNet(descriptor, rng)
        d = DiscriminatorNet(descriptor, rng)
        return cls(g, d, descriptor, style=style, meta={"seed": int(seed), "steps": 0})

    def params(self) -> list[Tensor]:
        return self.generator.params() + self.discriminator.params()

    def set_trainable(self, flag: bool) -> None:
        for p in self.params():
            p.requires_grad = flag

    def named_arrays(self) -> dict[str, np.ndarray]:
        arrays = {}
        arrays.update(self.generator.named_arrays())
        arrays.update(self.discriminator.named_arrays())
        arrays.update(self.extras)
        return arrays

    def load_arrays(self, arrays: dict[str, np.ndarray]) -> None:
        own = {}
        own.update(self.generator.named_arrays())
        own.update(self.discriminator.named_arrays())
        for name, target in own.items():
            if name not in arrays:
                raise FormatError(f"bundle missing array {name!r}")
            src = arrays[name]
            if src.shape != target.shape:
                raise FormatError(f"array {name!r} has shape {src.shape}, expected {target.shape}")
            target[...] = src
        self.extras = {k: v for k, v in arrays.items() if k not in own}

    def expect_image_size(self, image_size: int) -> None:
        if self.descriptor.image_size != image_size:
            raise ValueError(
                f"descriptor mismatch: bundle is {self.descriptor.image_size}x"
                f"{2 * self.descriptor.image_size}, runtime expects {image_size}x{2 * image_size}")


def save_bundle(bundle: ModelBundle, path) -> None:
    header = {
        "descriptor": bundle.descriptor.to_json(),
        "style": bundle.style,
        "meta": bundle.meta,
    }
    header_bytes = json.dumps(header, sort_keys=True).encode("utf-8")
    arrays = bundle.named_arrays()
    buf = io.BytesIO()
    buf.write(BUNDLE_MAGIC)
    buf.write(struct.pack("<H", BUNDLE_VERSION))
    buf.write(struct.pack("<I", len(header_bytes)))
    buf.write(header_bytes)
    buf.write(struct.pack("<I", len(arrays)))
    for name in sorted(arrays):
        arr = np.ascontiguousarray(arrays[name])
        if arr.dtype != np.float32:
            raise ValueError(f"bundle arrays must be float32, {name!r} is {arr.dtype}")
        name_bytes = name.encode("utf-8")
        buf.write(struct.pack("<H", len(name_bytes)))
        buf.write(name_bytes)
        buf.write(struct.pack("<B", 3) + b"f32")
        buf.write(struct.pack("<B", arr.ndim))
        buf.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
        buf.write(arr.astype("<f4", copy=False).tobytes())
    with open(path, "wb") as fh:
        fh.write(buf.getvalue())


def _read_exact(fh, n, what):
    data = fh.read(n)
    if len(data) != n:
        raise FormatError(f"truncated bundle while reading {what}")
    return data


def load_bundle(path) -> ModelBundle:
    """Read a weight file; returned params have requires_grad=False."""
    with open(path, "rb") as fh:
        magic = _read_exact(fh, 4, "magic")
        if magic != BUNDLE_MAGIC:
            raise FormatError(f"bad magic {magic!r}, expected {BUNDLE_MAGIC!r}")
        (version,) = struct.unpack("<H", _read_exact(fh, 2, "version"))
        if version != BUNDLE_VERSION:
            raise FormatError(f"unsupported format version {version}")
        (header_len,) = struct.unpack("<I", _read_exact(fh, 4, "header length"))
        try:
            header = json.loads(_read_exact(fh, header_len, "header"))
        except json.JSONDecodeError as exc:
            raise FormatError(f"header is not valid JSON: {exc}") from exc
        for key in ("descriptor", "style", "meta"):
            if key not in header:
                raise FormatError(f"header missing field {key!r}")
        try:
            descriptor = ArchDescriptor.from_json(header["descriptor"])
        except (TypeError, ValueError) as exc:
            raise FormatError(f"bad descriptor: {exc}") from exc
        (count,) = struct.unpack("<I", _read_exact(fh, 4, "array count"))
        arrays = {}
        for _ in range(count):
            (name_len,) = struct.unpack("<H", _read_exact(fh, 2, "array name length"))
            name = _read_exact(fh, name_len, "array name").decode("utf-8")
            (dtype_len,) = struct.unpack("<B", _read_exact(fh, 1, f"{name}: dtype tag"))
            dtype = _read_exact(fh, dtype_len, f"{name}: dtype tag").decode("ascii")
            if dtype != "f32":
                raise FormatError(f"array {name!r} has unsupported dtype {dtype!r}")
            (rank,) = struct.unpack("<B", _read_exact(fh, 1, f"{name}: rank"))
            dims = struct.unpack(f"<{rank}I", _read_exact(fh, 4 * rank, f"{name}: dims"))
            nbytes = 4 * int(np.prod(dims, dtype=np.int64)) if rank else 4
            raw = _read_exact(fh, nbytes, f"{name}: data")
            arrays[name] = np.frombuffer(raw, dtype="<f4").reshape(dims).astype(np.float32)
        if fh.read(1):
            raise FormatError("trailing bytes after last array")

    rng = np.random.default_rng(0)
    bundle = ModelBundle(GeneratorNet(descriptor, rng), DiscriminatorNet(descriptor, rng),
                         descriptor, style=header["style"], meta=header["meta"])
    bundle.load_arrays(arrays)
    bundle.set_trainable(False)
    return bundle
