"""BPSK over AWGN with reproducible per-frame noise streams."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .gf2 import BitVector


@dataclass(frozen=True)
class FrameSignal:
    """One channel output frame: y = (1 - 2c) + sigma * w."""

    y: np.ndarray
    sigma: float
    snr_db: float


def snr_to_sigma(snr_db: float, n: int, k: int) -> float:
    """Noise standard deviation for an Eb/N0 value in dB at rate k/n."""
    if n <= 0 or k <= 0:
        raise ValueError("n and k must be positive")
    return math.sqrt(n / (2.0 * k * 10.0 ** (snr_db / 10.0)))


def frame_rng(seed: int, frame_index: int) -> np.random.Generator:
    """Independent stream for one frame.

    Streams are derived from (seed, frame_index) alone, so a campaign
    produces bit-identical frames regardless of batching or worker
    count.
    """
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(frame_index,)))


def transmit(c: BitVector, sigma: float, rng: np.random.Generator, snr_db: float = math.nan) -> FrameSignal:
    """Modulate a codeword to +-1 and add white Gaussian noise."""
    if sigma < 0:
        raise ValueError("sigma must be nonnegative")
    s = 1.0 - 2.0 * c.bits.astype(np.float64)
    if sigma == 0.0:
        return FrameSignal(y=s, sigma=0.0, snr_db=snr_db)
    return FrameSignal(y=s + sigma * rng.standard_normal(c.n), sigma=sigma, snr_db=snr_db)


def hard_decision(y) -> BitVector:
    """r_i = 1 iff y_i < 0; exact zeros map to bit 0."""
    y = np.asarray(y, dtype=np.float64)
    if not np.isfinite(y).all():
        raise ValueError("non-finite channel values")
    return BitVector((y < 0).astype(np.uint8))
