"""Regenerates the SSIM reference fixtures with scikit-image.

Writes 20 deterministic RGBA image pairs to ../fixtures/ssim/ and their SSIM
values to ../fixtures/ssim/reference.json. The Rust test suite compares its
own SSIM against these frozen values.

Usage: python3 ssim_reference.py
"""

import json
from pathlib import Path

import numpy as np
from PIL import Image
from scipy.ndimage import gaussian_filter
from skimage.metrics import structural_similarity

OUT = Path(__file__).resolve().parent.parent / "fixtures" / "ssim"
SEED = 20240611


def textured(rng, h, w, c):
    base = rng.integers(0, 256, size=(h, w, c)).astype(np.float64)
    smooth = gaussian_filter(base, sigma=(2.0, 2.0, 0))
    yy, xx = np.mgrid[0:h, 0:w]
    wave = 60.0 * np.sin(xx / rng.uniform(2, 9))[..., None] * np.cos(yy / rng.uniform(2, 9))[..., None]
    return np.clip(smooth + wave, 0, 255)


def variant(rng, kind, a):
    if kind == "noise":
        return a + rng.normal(0, rng.uniform(3, 40), size=a.shape)
    if kind == "blur":
        return gaussian_filter(a, sigma=(rng.uniform(0.7, 2.5),) * 2 + (0,))
    if kind == "shift":
        return np.roll(a, shift=(int(rng.integers(1, 4)), int(rng.integers(1, 4))), axis=(0, 1))
    if kind == "contrast":
        return (a - 128.0) * rng.uniform(0.4, 1.4) + 128.0 + rng.uniform(-30, 30)
    if kind == "independent":
        return textured(rng, a.shape[0], a.shape[1], a.shape[2])
    raise ValueError(kind)


def main():
    rng = np.random.default_rng(SEED)
    OUT.mkdir(parents=True, exist_ok=True)
    kinds = ["noise", "blur", "shift", "contrast", "independent"]
    pairs = []
    for i in range(20):
        h = int(rng.integers(11, 49))
        w = int(rng.integers(11, 49))
        channels = 4 if i % 2 else 3
        kind = kinds[i % len(kinds)]
        a = textured(rng, h, w, 4)
        b = variant(rng, kind, a)
        a8 = np.clip(np.round(a), 0, 255).astype(np.uint8)
        b8 = np.clip(np.round(b), 0, 255).astype(np.uint8)
        if channels == 3:
            a8[..., 3] = 255
            b8[..., 3] = 255
        name_a, name_b = f"pair_{i:02}_a.png", f"pair_{i:02}_b.png"
        Image.fromarray(a8, "RGBA").save(OUT / name_a)
        Image.fromarray(b8, "RGBA").save(OUT / name_b)
        value = structural_similarity(
            a8[..., :channels].astype(np.float64),
            b8[..., :channels].astype(np.float64),
            gaussian_weights=True,
            sigma=1.5,
            use_sample_covariance=False,
            data_range=255,
            channel_axis=-1,
        )
        pairs.append({"a": name_a, "b": name_b, "channels": channels, "kind": kind, "ssim": float(value)})
    (OUT / "reference.json").write_text(json.dumps({"pairs": pairs}, indent=2) + "\n")


if __name__ == "__main__":
    main()
