"""Sketch synthesis and joint-image plumbing.

Sketches are near-binary single-channel images in [-1,1]: background +1
(white), strokes toward -1. A joint image glues sketch (left half,
replicated to 3 channels) and photo (right half) side by side; a mask
selects one contiguous half as the context for completion.
"""

from __future__ import annotations

from dataclasses import dataclass, asdict

import numpy as np

SKETCH_TO_IMAGE = "sketch_to_image"
IMAGE_TO_SKETCH = "image_to_sketch"
DIRECTIONS = (SKETCH_TO_IMAGE, IMAGE_TO_SKETCH)

_LUMA = np.array([0.299, 0.587, 0.114], dtype=np.float32)


@dataclass(frozen=True)
class SketchStyle:
    """Difference-of-Gaussians stylization parameters.

    The response is the DoG detail g_sigma - g_{k*sigma} of the [0,1]
    luminance; values >= epsilon map to white, values below ramp to black
    through tanh(phi * (response - epsilon)). phi absorbs the sharpening
    gain of the extended operator, epsilon <= 0 keeps flat regions exactly
    white.
    """

    name: str
    sigma: float = 0.8
    sigma_ratio: float = 1.6
    phi: float = 220.0
    epsilon: float = -0.004
    invert: bool = False

    def __post_init__(self):
        if self.sigma <= 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")
        if self.sigma_ratio <= 1:
            raise ValueError(f"sigma_ratio must exceed 1, got {self.sigma_ratio}")

    def to_json(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json(cls, obj: dict) -> "SketchStyle":
        return cls(**obj)


STYLE_PRESETS = {
    "xdog-fine": SketchStyle("xdog-fine", sigma=0.7, sigma_ratio=1.6, phi=260.0, epsilon=-0.003),
    "xdog-coarse": SketchStyle("xdog-coarse", sigma=1.4, sigma_ratio=1.9, phi=400.0, epsilon=-0.012),
    "xdog-soft": SketchStyle("xdog-soft", sigma=1.0, sigma_ratio=1.6, phi=45.0, epsilon=-0.003),
}


def get_style(name: str) -> SketchStyle:
    try:
        return STYLE_PRESETS[name]
    except KeyError:
        raise ValueError(f"unknown sketch style {name!r}; options: {sorted(STYLE_PRESETS)}") from None


def gaussian_kernel1d(sigma: float) -> np.ndarray:
    radius = max(1, int(np.ceil(3.0 * sigma)))
    xs = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-0.5 * (xs / sigma) ** 2)
    return (k / k.sum()).astype(np.float32)


def gaussian_blur(img: np.ndarray, sigma: float) -> np.ndarray:
    """Separable Gaussian blur of a [H,W] map, edge-replicate boundary."""
    kernel = gaussian_kernel1d(sigma)
    radius = kernel.size // 2
    out = img.astype(np.float32)
    for axis in (0, 1):
        moved = np.moveaxis(out, axis, 0)
        padded = np.pad(moved, ((radius, radius),) + ((0, 0),) * (moved.ndim - 1), mode="edge")
        acc = np.zeros_like(moved)
        for t, w in enumerate(kernel):
            acc += w * padded[t:t + moved.shape[0]]
        out = np.moveaxis(acc, 0, axis)
    return out


def luminance(photo: np.ndarray) -> np.ndarray:
    """[H,W,3] in [-1,1] -> [H,W] luminance in [0,1]."""
    unit = (photo.astype(np.float32) + 1.0) / 2.0
    return unit @ _LUMA


def xdog(photo: np.ndarray, style: SketchStyle) -> np.ndarray:
    """Stylize a [-1,1] photo into a near-binary sketch [H,W,1] in [-1,1]."""
    if photo.ndim != 3 or photo.shape[2] != 3:
        raise ValueError(f"xdog expects an [H,W,3] photo, got {photo.shape}")
    lum = luminance(photo)
    narrow = gaussian_blur(lum, style.sigma)
    wide = gaussian_blur(lum, style.sigma * style.sigma_ratio)
    response = narrow - wide
    ramp = 1.0 + np.tanh(style.phi * (response - style.epsilon))
    out01 = np.where(response >= style.epsilon, 1.0, ramp)
    out = (2.0 * out01 - 1.0).astype(np.float32)
    if style.invert:
        out = -out
    return np.clip(out, -1.0, 1.0)[..., None]


# -- joint images ---------------------------------------------------------

@dataclass
class JointImage:
    """[H,2W,3] pixels in [-1,1]: sketch on the left, photo on the right."""

    pixels: np.ndarray

    def __post_init__(self):
        self.pixels = np.asarray(self.pixels, dtype=np.float32)
        h, w2, c = self.pixels.shape
        if c != 3 or w2 % 2 != 0:
            raise ValueError(f"joint image must be [H,2W,3], got {self.pixels.shape}")

    @property
    def image_size(self) -> int:
        return self.pixels.shape[1] // 2

    @property
    def sketch_half(self) -> np.ndarray:
        return self.pixels[:, :self.image_size, :]

    @property
    def photo_half(self) -> np.ndarray:
        return self.pixels[:, self.image_size:, :]


def make_joint(sketch: np.ndarray, photo: np.ndarray) -> JointImage:
    sketch = np.asarray(sketch, dtype=np.float32)
    if sketch.ndim == 2:
        sketch = sketch[..., None]
    if sketch.ndim != 3 or sketch.shape[2] != 1:
        raise ValueError(f"sketch must be [H,W,1], got {sketch.shape}")
    if photo.ndim != 3 or photo.shape[2] != 3:
        raise ValueError(f"photo must be [H,W,3], got {photo.shape}")
    if sketch.shape[:2] != photo.shape[:2]:
        raise ValueError(f"sketch {sketch.shape[:2]} and photo {photo.shape[:2]} sizes differ")
    left = np.repeat(sketch, 3, axis=2)
    return JointImage(np.concatenate([left, photo.astype(np.float32)], axis=1))


def split_joint(joint: JointImage) -> tuple[np.ndarray, np.ndarray]:
    """Inverse of make_joint: ([H,W,1] sketch, [H,W,3] photo)."""
    sketch = joint.sketch_half[:, :, :1].copy()
    photo = joint.photo_half.copy()
    return sketch, photo


# -- masks ------------------------------------------------------------------

@dataclass
class Mask:
    """[H,2W,1] binary map; ones mark the uncorrupted (context) half."""

    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float32)
        if self.values.ndim != 3 or self.values.shape[2] != 1:
            raise ValueError(f"mask must be [H,2W,1], got {self.values.shape}")

    def context_columns(self) -> tuple[int, int]:
        """(start, stop) of the all-ones half; validates the half structure."""
        w2 = self.values.shape[1]
        half = w2 // 2
        left = self.values[:, :half, :]
        right = self.values[:, half:, :]
        if np.all(left == 1.0) and np.all(right == 0.0):
            return 0, half
        if np.all(left == 0.0) and np.all(right == 1.0):
            return half, w2
        raise ValueError("mask must be all-ones on exactly one contiguous half")


def make_mask(direction: str, height: int, width: int) -> Mask:
    """Context mask for one photo-half size; width is the photo width."""
    if direction not in DIRECTIONS:
        raise ValueError(f"direction must be one of {DIRECTIONS}, got {direction!r}")
    values = np.zeros((height, 2 * width, 1), dtype=np.float32)
    if direction == SKETCH_TO_IMAGE:
        values[:, :width, :] = 1.0
    else:
        values[:, width:, :] = 1.0
    return Mask(values)
