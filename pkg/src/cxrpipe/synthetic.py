"""Synthetic oriented-stripe corpus for desk-scale pipeline checks.

Each class is a sinusoidal grating with its own orientation and spatial
frequency plus Gaussian pixel noise and a random phase, so texture
features separate the classes while raw intensity statistics do not.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .dataset import ClassLabel
from .imageio import quantize, write_png

# (orientation degrees, cycles per image side)
STRIPE_PARAMS: dict[ClassLabel, tuple[float, float]] = {
    ClassLabel.Normal: (0.0, 4.0),
    ClassLabel.LungOpacity: (45.0, 8.0),
    ClassLabel.Covid19: (90.0, 12.0),
    ClassLabel.ViralPneumonia: (135.0, 16.0),
}

DIR_NAMES: dict[ClassLabel, str] = {
    ClassLabel.Normal: "Normal",
    ClassLabel.LungOpacity: "Lung_Opacity",
    ClassLabel.Covid19: "COVID-19",
    ClassLabel.ViralPneumonia: "Viral_Pneumonia",
}


def stripe_image(
    label: ClassLabel, rng: np.random.Generator, side: int = 64
) -> np.ndarray:
    """One float grating image in [0, 255] for the class."""
    angle, freq = STRIPE_PARAMS[label]
    theta = np.deg2rad(angle + rng.uniform(-3.0, 3.0))
    cycles = freq * (1.0 + rng.uniform(-0.05, 0.05))
    phase = rng.uniform(0.0, 2.0 * np.pi)
    amp = rng.uniform(70.0, 90.0)
    yy, xx = np.mgrid[0:side, 0:side]
    t = (xx * np.cos(theta) + yy * np.sin(theta)) / side
    img = 128.0 + amp * np.sin(2.0 * np.pi * cycles * t + phase)
    img += rng.normal(0.0, 10.0, size=(side, side))
    return np.clip(img, 0.0, 255.0)


def make_corpus(
    root: str | Path,
    counts: dict[ClassLabel, int],
    side: int = 64,
    seed: int = 0,
) -> Path:
    """Write a class-per-directory PNG corpus under root; returns root.

    Deterministic: images are drawn from one seeded stream in label order.
    """
    root = Path(root)
    rng = np.random.Generator(np.random.PCG64(seed))
    for label in sorted(counts):
        class_dir = root / DIR_NAMES[label]
        class_dir.mkdir(parents=True, exist_ok=True)
        for i in range(counts[label]):
            img = stripe_image(label, rng, side)
            write_png(class_dir / f"{label.name.lower()}_{i:04d}.png", quantize(img))
    return root


def balanced_counts(total: int) -> dict[ClassLabel, int]:
    per = total // len(ClassLabel)
    return {label: per for label in ClassLabel}
