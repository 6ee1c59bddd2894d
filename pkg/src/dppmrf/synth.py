"""Synthetic porous-media phantoms and their corruption."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

SOLID_VALUE = 200
PORE_VALUE = 50
RINGING_AMPLITUDE = 15.0
# disc radii as fractions of the shorter image side
RADIUS_RANGE = (0.15, 0.25)


@dataclass(frozen=True)
class PhantomSpec:
    width: int = 128
    height: int = 128
    pore_fraction: float = 0.25
    seed: int = 0
    sp_rate: float = 0.0
    gauss_sigma: float = 0.0
    ringing: bool = False

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValueError("phantom dimensions must be positive")
        if not 0.0 <= self.pore_fraction < 1.0:
            raise ValueError("pore_fraction must lie in [0, 1)")
        if not 0.0 <= self.sp_rate <= 1.0:
            raise ValueError("sp_rate must lie in [0, 1]")
        if self.gauss_sigma < 0:
            raise ValueError("gauss_sigma must be non-negative")

    def _streams(self):
        phantom, noise = np.random.SeedSequence(self.seed).spawn(2)
        return np.random.default_rng(phantom), np.random.default_rng(noise)


def _disc(h, w, cy, cx, r):
    yy, xx = np.ogrid[:h, :w]
    return (yy - cy) ** 2 + (xx - cx) ** 2 <= r * r


def gen_phantom(spec: PhantomSpec) -> tuple[np.ndarray, np.ndarray]:
    """Union-of-discs pore phantom.

    Returns ``(truth, clean)``: ``truth`` is 1 for pore and 0 for solid,
    ``clean`` maps pore to 50 and solid to 200.  Discs are added until the
    pore fraction reaches the target; the last disc is shrunk so the result
    does not overshoot it by more than 0.01.
    """
    h, w = spec.height, spec.width
    rng, _ = spec._streams()
    truth = np.zeros((h, w), dtype=bool)
    target = spec.pore_fraction
    side = min(h, w)
    lo, hi = (max(1.0, f * side) for f in RADIUS_RANGE)
    total = h * w
    for _ in range(10_000):
        if truth.sum() / total >= target - 0.01:
            break
        cy, cx = rng.uniform(0, h), rng.uniform(0, w)
        r = rng.uniform(lo, hi)
        while True:
            grown = truth | _disc(h, w, cy, cx, r)
            if grown.sum() / total <= target + 0.01 or r <= 1.0:
                break
            r -= 0.5
        truth = grown
    clean = np.where(truth, PORE_VALUE, SOLID_VALUE).astype(np.uint8)
    return truth.astype(np.uint8), clean


def corrupt(clean: np.ndarray, spec: PhantomSpec) -> np.ndarray:
    """Salt-and-pepper, additive Gaussian noise and optional radial ringing."""
    _, rng = spec._streams()
    img = np.asarray(clean, dtype=np.float64).copy()
    h, w = img.shape
    u = rng.random((h, w))
    half = spec.sp_rate / 2.0
    img[u < half] = 0.0
    img[(u >= half) & (u < spec.sp_rate)] = 255.0
    if spec.gauss_sigma > 0:
        img += rng.normal(0.0, spec.gauss_sigma, (h, w))
    if spec.ringing:
        cy, cx = rng.uniform(0, h), rng.uniform(0, w)
        wavelength = rng.uniform(0.25, 0.5) * max(h, w)
        phase = rng.uniform(0, 2 * np.pi)
        yy, xx = np.mgrid[:h, :w]
        radius = np.hypot(yy - cy, xx - cx)
        img += RINGING_AMPLITUDE * np.sin(2 * np.pi * radius / wavelength + phase)
    return np.clip(np.rint(img), 0, 255).astype(np.uint8)


def make_dataset(spec: PhantomSpec) -> tuple[np.ndarray, np.ndarray]:
    """``(truth, noisy)`` pair for a spec."""
    truth, clean = gen_phantom(spec)
    return truth, corrupt(clean, spec)
