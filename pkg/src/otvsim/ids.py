"""64-bit content digests used as block and transaction identifiers."""

from __future__ import annotations

import hashlib
import struct


def digest64(*parts: bytes) -> int:
    h = hashlib.blake2b(digest_size=8)
    for p in parts:
        h.update(p)
    return int.from_bytes(h.digest(), "big")


def quantize_unit(x: float) -> int:
    """Fixed-point image of ``x`` in [0, 1] on 63 bits, so every party hashes the same bytes."""
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"{x} outside [0, 1]")
    return min(int(x * (1 << 63)), (1 << 63) - 1)


def coin_digest(item: int, x: float) -> int:
    """digest(item || x) with ``x`` quantized first."""
    return digest64(struct.pack(">QQ", item, quantize_unit(x)))


class IdSource:
    """Run-scoped generator of collision-free 64-bit ids.

    The counter is mixed into the digest together with a namespace tag.  A
    collision with an id already handed out is skipped by bumping the counter,
    which keeps ids unique without giving up their hash-like ordering.
    """

    def __init__(self, namespace: str, seed: int = 0):
        self._tag = namespace.encode()
        self._seed = struct.pack(">q", seed)
        self._counter = 0
        self._issued: set[int] = set()

    def next(self) -> int:
        while True:
            value = digest64(self._tag, self._seed, struct.pack(">Q", self._counter))
            self._counter += 1
            if value not in self._issued:
                self._issued.add(value)
                return value
