"""Bitmask vertex-set helpers.

Vertex sets are plain Python ints used as bit vectors over vertex ids
0..n-1.  Python's arbitrary-precision ints give word-parallel AND/OR and
``int.bit_count`` popcounts, which is what every hot loop here needs.
"""

from __future__ import annotations

from typing import Iterable, Iterator, List


def mask_of(vertices: Iterable[int]) -> int:
    """Bitmask with one bit set per vertex id."""
    m = 0
    for v in vertices:
        m |= 1 << v
    return m


def iter_bits(mask: int) -> Iterator[int]:
    """Yield set-bit indices in ascending order."""
    while mask:
        low = mask & -mask
        yield low.bit_length() - 1
        mask ^= low


def bit_list(mask: int) -> List[int]:
    return list(iter_bits(mask))


def sample_bits(mask: int, size: int, rng) -> int:
    """Random ``size``-subset of ``mask`` as a mask (all of it if smaller)."""
    members = bit_list(mask)
    if size >= len(members):
        return mask
    return mask_of(rng.sample(members, size))


def pick_bit(mask: int, rng) -> int:
    """Random set-bit index from a nonempty mask."""
    members = bit_list(mask)
    return members[rng.randrange(len(members))]


def take_bits(mask: int, size: int) -> int:
    """Mask of the ``size`` lowest set bits."""
    out = 0
    for v in iter_bits(mask):
        if size <= 0:
            break
        out |= 1 << v
        size -= 1
    return out
