"""Counter-based random streams keyed by semantic coordinates.

Every random quantity in the library comes from its own Philox stream,
addressed by ``(seed, tag, *coordinates)``.  Site ``t`` of a stream is its
``t``-th draw, so a value depends only on where it sits (which edge, which
majority block, which site) and never on traversal order or thread count.
"""

from __future__ import annotations

import numpy as np

# Splitter tags
STREAM_TOPOLOGY = 0x544F504F
STREAM_LENGTHS = 0x4C454E47
STREAM_ROOT = 0x524F4F54
STREAM_EDGE = 0x45444745
STREAM_EDGE_TARGET = 0x54415247
STREAM_TIE = 0x54494553


def stream(seed: int, tag: int, *coords: int) -> np.random.Generator:
    """Generator for the stream at ``(seed, tag, *coords)``."""
    sequence = np.random.SeedSequence(entropy=seed, spawn_key=(tag, *coords))
    return np.random.Generator(np.random.Philox(sequence))


def sign_bits(seed: int, tag: int, *coords: int, size: int) -> np.ndarray:
    """``size`` fair ±1 values (int8) from the addressed stream."""
    bits = stream(seed, tag, *coords).integers(0, 2, size=size, dtype=np.int8)
    return (2 * bits - 1).astype(np.int8)
