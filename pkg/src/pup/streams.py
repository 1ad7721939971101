"""Named random sub-streams derived from one run seed."""

from __future__ import annotations

import zlib

import numpy as np


def stream(seed: int, name: str, *extra: int) -> np.random.Generator:
    """Independent generator for ``(seed, name, *extra)``.

    The name is hashed with CRC32, which is stable across processes and
    platforms (unlike ``hash``).
    """
    return np.random.default_rng([int(seed), zlib.crc32(name.encode("utf-8")), *map(int, extra)])
