"""Corpus construction: procedural shapes, folder ingestion, augmentation.

Every sample is derived from (seed, index) so streams are order-stable
and resumable; the same spec always yields the same corpus bit for bit.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image, ImageDraw

from .pngio import u8_to_unit
from .sketch import SketchStyle, STYLE_PRESETS, make_joint, xdog

log = logging.getLogger(__name__)

PRIMITIVES = ("ellipse", "triangle", "rounded_rect")
_SUPERSAMPLE = 4


@dataclass
class CorpusSpec:
    """What to build a corpus from and how to expand it."""

    source: str = "procedural"          # "procedural" or a folder path
    count: int = 256
    resolution: int = 32
    styles: list[SketchStyle] = field(default_factory=lambda: [STYLE_PRESETS["xdog-fine"]])
    crops_per_image: int = 0
    hflip: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.count <= 0:
            raise ValueError("corpus count must be positive")
        if not self.styles:
            raise ValueError("at least one sketch style required")

    def to_json(self) -> dict:
        return {
            "source": self.source,
            "count": self.count,
            "resolution": self.resolution,
            "styles": [s.to_json() for s in self.styles],
            "crops_per_image": self.crops_per_image,
            "hflip": self.hflip,
            "seed": self.seed,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "CorpusSpec":
        obj = dict(obj)
        obj["styles"] = [SketchStyle.from_json(s) for s in obj["styles"]]
        return cls(**obj)


def _hsv_to_rgb(h, s, v):
    i = int(h * 6.0) % 6
    f = h * 6.0 - int(h * 6.0)
    p, q, t = v * (1 - s), v * (1 - f * s), v * (1 - (1 - f) * s)
    rgb = [(v, t, p), (q, v, p), (p, v, t), (p, q, v), (t, p, v), (v, p, q)][i]
    return tuple(int(round(255 * c)) for c in rgb)


def render_primitive(resolution: int, rng: np.random.Generator) -> np.ndarray:
    """One anti-aliased colored primitive on a plain white background, [-1,1] RGB."""
    big = resolution * _SUPERSAMPLE
    canvas = Image.new("RGB", (big, big), (255, 255, 255))

    shape = PRIMITIVES[rng.integers(len(PRIMITIVES))]
    fill = _hsv_to_rgb(rng.uniform(), rng.uniform(0.55, 1.0), rng.uniform(0.45, 0.9))
    extent = rng.uniform(0.38, 0.68) * big
    angle = rng.uniform(0.0, 360.0)
    cx = big / 2 + rng.uniform(-0.12, 0.12) * big
    cy = big / 2 + rng.uniform(-0.12, 0.12) * big

    layer = Image.new("RGBA", (big, big), (0, 0, 0, 0))
    draw = ImageDraw.Draw(layer)
    half_w = extent / 2
    half_h = extent / 2 * rng.uniform(0.55, 1.0)
    c = big / 2
    if shape == "ellipse":
        draw.ellipse([c - half_w, c - half_h, c + half_w, c + half_h], fill=fill + (255,))
    elif shape == "triangle":
        pts = [(c, c - half_h), (c - half_w, c + half_h), (c + half_w, c + half_h)]
        draw.polygon(pts, fill=fill + (255,))
    else:
        radius = 0.25 * min(half_w, half_h) * 2
        draw.rounded_rectangle([c - half_w, c - half_h, c + half_w, c + half_h],
                               radius=radius, fill=fill + (255,))
    layer = layer.rotate(angle, resample=Image.BICUBIC, center=(c, c))
    canvas.paste(layer, (int(round(cx - c)), int(round(cy - c))), layer)
    small = canvas.resize((resolution, resolution), resample=Image.LANCZOS)
    return u8_to_unit(np.asarray(small, dtype=np.uint8))


def _sample_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(index)]))


def _style_for_index(spec: CorpusSpec, index: int) -> SketchStyle:
    return spec.styles[index % len(spec.styles)]


def generate_procedural(spec: CorpusSpec):
    """Yield `count` (photo, sketch) pairs of procedural primitives."""
    if spec.source != "procedural":
        raise ValueError("generate_procedural needs a procedural source spec")
    for i in range(spec.count):
        rng = _sample_rng(spec.seed, i)
        photo = render_primitive(spec.resolution, rng)
        sketch = xdog(photo, _style_for_index(spec, i))
        yield photo, sketch


def _resize_float(arr: np.ndarray, size: tuple[int, int]) -> np.ndarray:
    """Bilinear resize of [H,W,C] float data, channelwise."""
    channels = [
        np.asarray(Image.fromarray(arr[..., c].astype(np.float32), mode="F")
                   .resize((size[1], size[0]), resample=Image.BILINEAR))
        for c in range(arr.shape[2])
    ]
    return np.stack(channels, axis=2).astype(np.float32)


def ingest_folder(spec: CorpusSpec):
    """Yield (photo, sketch) pairs from image files, sorted by name.

    Files are center-cropped square, resized to the target resolution;
    undecodable files are skipped with a warning.
    """
    folder = Path(spec.source)
    files = sorted(p for p in folder.iterdir() if p.is_file())
    if not files:
        raise ValueError(f"no files in corpus folder {folder}")
    yielded = 0
    for i, path in enumerate(files):
        if yielded >= spec.count:
            break
        try:
            with Image.open(path) as img:
                img = img.convert("RGB")
                w, h = img.size
                side = min(w, h)
                left, top = (w - side) // 2, (h - side) // 2
                img = img.crop((left, top, left + side, top + side))
                img = img.resize((spec.resolution, spec.resolution), resample=Image.BILINEAR)
                photo = u8_to_unit(np.asarray(img, dtype=np.uint8))
        except Exception as exc:  # undecodable file
            log.warning("skipping %s: %s", path, exc)
            continue
        sketch = xdog(photo, _style_for_index(spec, i))
        yield photo, sketch
        yielded += 1
    if yielded == 0:
        raise ValueError(f"no decodable images in corpus folder {folder}")


def augment(pair, crops: int, flip: bool, rng: np.random.Generator):
    """Random-crop/flip expansion: crops * (2 if flip else 1) pairs.

    The photo and its sketch receive identical geometric transforms; the
    crop window is 90% of the source at a uniform offset, resized back.
    """
    photo, sketch = pair
    h, w = photo.shape[:2]
    crop_h, crop_w = max(1, round(0.9 * h)), max(1, round(0.9 * w))
    out = []
    for _ in range(crops):
        top = int(rng.integers(0, h - crop_h + 1))
        left = int(rng.integers(0, w - crop_w + 1))
        p = _resize_float(photo[top:top + crop_h, left:left + crop_w], (h, w))
        s = _resize_float(sketch[top:top + crop_h, left:left + crop_w], (h, w))
        s = np.clip(s, -1.0, 1.0)
        out.append((p, s))
        if flip:
            out.append((p[:, ::-1].copy(), s[:, ::-1].copy()))
    return out


@dataclass
class Corpus:
    """Materialized joint images ready for batching."""

    joints: np.ndarray          # [count, H, 2W, 3] float32
    style_tags: list[str]
    spec: CorpusSpec

    def __len__(self):
        return self.joints.shape[0]

    @property
    def resolution(self) -> int:
        return self.joints.shape[1]


def build_corpus(spec: CorpusSpec) -> Corpus:
    stream = generate_procedural(spec) if spec.source == "procedural" else ingest_folder(spec)
    joints, tags = [], []
    for i, (photo, sketch) in enumerate(stream):
        style = _style_for_index(spec, i)
        if spec.crops_per_image > 0:
            rng = _sample_rng(spec.seed, (i << 20) + 0xA06)
            expanded = augment((photo, sketch), spec.crops_per_image, spec.hflip, rng)
        else:
            expanded = [(photo, sketch)]
        for p, s in expanded:
            joints.append(make_joint(s, p).pixels)
            tags.append(style.name)
    return Corpus(np.stack(joints), tags, spec)


def batches(corpus: Corpus, batch_size: int, epoch: int, seed: int):
    """Deterministic per-epoch shuffle; final batch may be partial."""
    order = np.random.default_rng(np.random.SeedSequence([int(seed), int(epoch), 0xBA7C])) \
        .permutation(len(corpus))
    for start in range(0, len(corpus), batch_size):
        idx = order[start:start + batch_size]
        yield corpus.joints[idx], [corpus.style_tags[i] for i in idx]


def write_manifest(path, spec: CorpusSpec, files: list[str]) -> None:
    manifest = {"spec": spec.to_json(), "seed": spec.seed, "files": files}
    Path(path).write_text(json.dumps(manifest, indent=2, sort_keys=True))


def read_manifest(path) -> tuple[CorpusSpec, list[str]]:
    obj = json.loads(Path(path).read_text())
    return CorpusSpec.from_json(obj["spec"]), obj["files"]
