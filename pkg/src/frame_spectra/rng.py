"""Counter-based random streams.

A stream is addressed by ``(master_seed, key..., stream_index)``; the Philox
generator behind it depends only on that address, so trial ``i`` sees the same
draws whichever worker runs it and in whatever order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# stream domains, kept distinct so frames, subsets and baselines never share draws
FRAME = 1
SUBSET = 2
BASELINE = 3


@dataclass(frozen=True)
class RngStream:
    master_seed: int
    stream_index: int = 0
    key: tuple[int, ...] = ()

    def __post_init__(self) -> None:
        if not 0 <= self.master_seed < 2**64:
            raise ValueError("master_seed must be a 64-bit unsigned integer")
        if self.stream_index < 0 or any(k < 0 for k in self.key):
            raise ValueError("stream indices must be non-negative")

    def child(self, *key: int) -> "RngStream":
        return RngStream(self.master_seed, 0, self.key + tuple(key))

    def at(self, stream_index: int) -> "RngStream":
        return RngStream(self.master_seed, stream_index, self.key)

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(self.master_seed, spawn_key=self.key + (self.stream_index,))
        return np.random.Generator(np.random.Philox(ss))


def gaussian(gen: np.random.Generator, shape: tuple[int, ...], complex_: bool) -> np.ndarray:
    """Standard Gaussian array; complex entries are (g1 + i g2)/sqrt(2), unit variance."""
    if not complex_:
        return gen.standard_normal(shape)
    z = gen.standard_normal(shape + (2,))
    return (z[..., 0] + 1j * z[..., 1]) * np.sqrt(0.5)
