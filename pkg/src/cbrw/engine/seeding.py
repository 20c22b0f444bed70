"""Deterministic derivation of independent random streams."""
from __future__ import annotations

import secrets
from dataclasses import dataclass

import numpy as np

_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class StreamSeed:
    master_seed: int
    stream_index: int = 0

    def __post_init__(self):
        for name in ("master_seed", "stream_index"):
            value = getattr(self, name)
            if not 0 <= value <= _MASK64:
                raise ValueError(f"{name} must be a 64-bit unsigned integer, got {value}")

    def generator(self) -> np.random.Generator:
        seq = np.random.SeedSequence(entropy=self.master_seed, spawn_key=(self.stream_index,))
        return np.random.Generator(np.random.PCG64(seq))

    def child(self, index: int) -> StreamSeed:
        return StreamSeed(self.master_seed, index)

    def spawn(self, *keys: int) -> StreamSeed:
        """Fresh master for a sub-experiment, keyed by this stream and ``keys``."""
        seq = np.random.SeedSequence(entropy=self.master_seed, spawn_key=(self.stream_index, *keys))
        return StreamSeed(int(seq.generate_state(1, dtype=np.uint64)[0]))


def parse_seed(text: str | int) -> int:
    """Accept ``123``, ``"123"`` or ``"0x7b"``."""
    value = text if isinstance(text, int) else int(str(text).strip(), 0)
    if not 0 <= value <= _MASK64:
        raise ValueError(f"seed out of 64-bit range: {text}")
    return value


def fresh_seed() -> int:
    return secrets.randbits(64)


def as_generator(rng: np.random.Generator | StreamSeed | int | None) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    if isinstance(rng, StreamSeed):
        return rng.generator()
    if rng is None:
        return StreamSeed(fresh_seed()).generator()
    return StreamSeed(int(rng)).generator()
