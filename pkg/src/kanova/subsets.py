"""Subsets of the coordinate set ``I = {1, ..., d}`` encoded as integer bitmasks.

Bit ``i`` of a mask stands for coordinate ``i + 1``.  Internally every
function is 0-based; :func:`from_labels` and :func:`to_labels` convert to
and from the 1-based labels used in files and on the command line.
"""

from __future__ import annotations

from typing import Iterable, Iterator

from .errors import InvalidArgumentError

EMPTY = 0


def mask(coords: Iterable[int]) -> int:
    """Bitmask of 0-based coordinate indices."""
    m = 0
    for c in coords:
        if c < 0:
            raise InvalidArgumentError(f"negative coordinate index {c}")
        m |= 1 << int(c)
    return m


def from_labels(labels: Iterable[int]) -> int:
    """Bitmask of 1-based coordinate labels."""
    labels = list(labels)
    if any(int(l) < 1 for l in labels):
        raise InvalidArgumentError(f"coordinate labels are 1-based, got {labels}")
    return mask(int(l) - 1 for l in labels)


def to_labels(u: int) -> list[int]:
    return [c + 1 for c in members(u)]


def members(u: int) -> tuple[int, ...]:
    out = []
    i = 0
    while u:
        if u & 1:
            out.append(i)
        u >>= 1
        i += 1
    return tuple(out)


def card(u: int) -> int:
    return bin(u).count("1")


def full(d: int) -> int:
    return (1 << d) - 1


def all_subsets(d: int) -> range:
    return range(1 << d)


def subsets_of(u: int) -> Iterator[int]:
    """All sub-masks of ``u``, including ``0`` and ``u`` itself."""
    s = u
    while True:
        yield s
        if s == 0:
            return
        s = (s - 1) & u


def check(u: int, d: int) -> int:
    if u < 0 or u >= (1 << d):
        raise InvalidArgumentError(f"subset mask {u} is not a subset of a {d}-dimensional index set")
    return u


def fmt(u: int) -> str:
    labels = to_labels(u)
    return "{" + ",".join(map(str, labels)) + "}" if labels else "{}"
