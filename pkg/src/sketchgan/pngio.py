"""PNG read/write with the canonical u8 <-> [-1,1] pixel mapping.

Forward map: v = 2*(u/255) - 1. Inverse rounds half away from zero, so
u -> v -> u is the identity for every 8-bit value.
"""

from __future__ import annotations

import numpy as np
from PIL import Image


def u8_to_unit(u: np.ndarray) -> np.ndarray:
    return (2.0 * (u.astype(np.float32) / 255.0) - 1.0).astype(np.float32)


def unit_to_u8(v: np.ndarray) -> np.ndarray:
    scaled = (np.clip(v, -1.0, 1.0).astype(np.float64) + 1.0) / 2.0 * 255.0
    return np.floor(scaled + 0.5).astype(np.uint8)   # round half away from zero


def load_image(path, grayscale: bool = False) -> np.ndarray:
    """Read a PNG as float32 in [-1,1]; [H,W,1] grayscale or [H,W,3] RGB."""
    with Image.open(path) as img:
        img = img.convert("L" if grayscale else "RGB")
        arr = np.asarray(img, dtype=np.uint8)
    if grayscale:
        arr = arr[..., None]
    return u8_to_unit(arr)


def save_image(path, pixels: np.ndarray) -> None:
    """Write float [-1,1] pixels as 8-bit PNG; [H,W]/[H,W,1] gray or [H,W,3] RGB."""
    arr = unit_to_u8(np.asarray(pixels))
    if arr.ndim == 3 and arr.shape[2] == 1:
        arr = arr[..., 0]
    if arr.ndim == 2:
        Image.fromarray(arr, mode="L").save(path, format="PNG")
    elif arr.ndim == 3 and arr.shape[2] == 3:
        Image.fromarray(arr, mode="RGB").save(path, format="PNG")
    else:
        raise ValueError(f"cannot encode array of shape {pixels.shape} as PNG")
