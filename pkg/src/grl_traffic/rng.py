"""Named, independent random streams derived from one root seed."""

from __future__ import annotations

import zlib

import numpy as np


def stream(root_seed: int, name: str) -> np.random.Generator:
    """Counter-based (Philox) generator keyed on ``(root_seed, name)``.

    Adding a new stream name never shifts the draws of existing streams.
    """
    key = np.random.SeedSequence([int(root_seed) & 0xFFFFFFFF, zlib.crc32(name.encode())])
    return np.random.Generator(np.random.Philox(key))


class Streams:
    def __init__(self, root_seed: int):
        self.root_seed = int(root_seed)
        self._cache: dict[str, np.random.Generator] = {}

    def __getitem__(self, name: str) -> np.random.Generator:
        if name not in self._cache:
            self._cache[name] = stream(self.root_seed, name)
        return self._cache[name]
