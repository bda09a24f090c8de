"""Bounded candidate pool used by both construction and search."""

from __future__ import annotations

from bisect import bisect_right
from typing import Iterator, List, Optional, Tuple


class CandidatePool:
    """The ``capacity`` nearest (dist, id) pairs seen so far, kept sorted.

    Entries carry an expanded flag. ``_cursor`` always points at or before
    the first unexpanded entry, so finding the nearest unexpanded candidate
    is amortised O(1). Ties on distance resolve to the lower id.
    """

    __slots__ = ("capacity", "_keys", "_expanded", "_cursor")

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ValueError("pool capacity must be positive")
        self.capacity = capacity
        self._keys: List[Tuple[float, int]] = []
        self._expanded: List[bool] = []
        self._cursor = 0

    def __len__(self) -> int:
        return len(self._keys)

    def __iter__(self) -> Iterator[Tuple[float, int]]:
        return iter(self._keys)

    def __contains__(self, node: int) -> bool:
        return any(i == node for _, i in self._keys)

    def insert(self, dist: float, node: int) -> bool:
        """Add a candidate; returns False when it is too far to be kept."""
        key = (dist, node)
        keys = self._keys
        if len(keys) >= self.capacity and key >= keys[-1]:
            return False
        pos = bisect_right(keys, key)
        keys.insert(pos, key)
        self._expanded.insert(pos, False)
        if len(keys) > self.capacity:
            keys.pop()
            self._expanded.pop()
        if pos < self._cursor:
            self._cursor = pos
        return True

    def pop_nearest_unexpanded(self) -> Optional[Tuple[float, int]]:
        """Mark the nearest unexpanded entry as expanded and return it."""
        expanded = self._expanded
        c = self._cursor
        n = len(expanded)
        while c < n and expanded[c]:
            c += 1
        self._cursor = c
        if c >= n:
            return None
        expanded[c] = True
        return self._keys[c]

    def has_unexpanded(self) -> bool:
        return not all(self._expanded[self._cursor:])

    def shrink(self, capacity: int) -> None:
        """Lower the capacity, evicting the farthest entries."""
        if capacity < 1:
            raise ValueError("pool capacity must be positive")
        self.capacity = capacity
        del self._keys[capacity:]
        del self._expanded[capacity:]
        self._cursor = min(self._cursor, len(self._keys))

    def items(self) -> List[Tuple[float, int]]:
        return list(self._keys)

    def ids(self) -> List[int]:
        return [i for _, i in self._keys]

    def dists(self) -> List[float]:
        return [d for d, _ in self._keys]
