"""Request classification and caching-priority assignment.

Priorities are integers in ``[1, N]`` where a smaller number is more
cache-worthy, plus the :data:`WRITE_BUFFER` marker for update writes.
"""
from __future__ import annotations

import copy
import threading
from dataclasses import dataclass
from enum import Enum
from typing import Union

from .plan import QueryPlanTree, RandomAccessSummary, random_access_summary

WRITE_BUFFER = "write_buffer"

Priority = Union[int, str]


class ClassifyError(ValueError):
    pass


class RequestClass(str, Enum):
    SEQUENTIAL_READ = "sequential_read"
    SEQUENTIAL_WRITE = "sequential_write"
    RANDOM_READ = "random_read"
    RANDOM_WRITE = "random_write"
    TEMP_READ = "temp_read"
    TEMP_WRITE = "temp_write"
    TEMP_DELETE = "temp_delete"
    UPDATE = "update"

    @property
    def is_random(self) -> bool:
        return self in (RequestClass.RANDOM_READ, RequestClass.RANDOM_WRITE)

    @property
    def is_sequential_access(self) -> bool:
        """Whether the blocks of one request are contiguous on the device."""
        return self not in (RequestClass.RANDOM_READ, RequestClass.RANDOM_WRITE, RequestClass.UPDATE)

    @property
    def direction(self) -> str | None:
        if self is RequestClass.TEMP_DELETE:
            return None
        if self in (RequestClass.SEQUENTIAL_WRITE, RequestClass.RANDOM_WRITE,
                    RequestClass.TEMP_WRITE, RequestClass.UPDATE):
            return "write"
        return "read"


@dataclass(frozen=True)
class PriorityPolicy:
    """Caching priority configuration ``{N, t, b}`` plus the random range.

    ``b`` is a fraction of the cache (0.10 means 10%).
    """

    N: int = 8
    t: int = 7
    b: float = 0.10
    n1: int = 2
    n2: int = 6

    def __post_init__(self):
        if self.N <= 0:
            raise ClassifyError("N must be positive")
        if not 0 <= self.t <= self.N:
            raise ClassifyError("t must lie in [0, N]")
        if not 0.0 <= self.b <= 1.0:
            raise ClassifyError("b must lie in [0, 1]")
        if not 1 < self.n1 <= self.n2 <= self.N - 2:
            raise ClassifyError("random range must satisfy 1 < n1 <= n2 <= N-2")
        if self.n2 >= self.t:
            raise ClassifyError("random priorities must be cacheable (n2 < t)")

    @property
    def no_evict(self) -> int:
        """The "non-caching and non-eviction" priority."""
        return self.N - 1

    @property
    def evict(self) -> int:
        """The "non-caching and eviction" priority."""
        return self.N

    def is_caching(self, prio: Priority) -> bool:
        return prio == WRITE_BUFFER or prio < self.t

    @classmethod
    def from_dict(cls, d: dict) -> "PriorityPolicy":
        allowed = {"N", "t", "b_percent", "n1", "n2"}
        extra = set(d) - allowed
        if extra:
            raise ClassifyError(f"unknown policy keys: {sorted(extra)}")
        N = int(d.get("N", 8))
        return cls(
            N=N,
            t=int(d.get("t", N - 1)),
            b=float(d.get("b_percent", 10.0)) / 100.0,
            n1=int(d.get("n1", 2)),
            n2=int(d.get("n2", N - 2)),
        )

    def to_dict(self) -> dict:
        return {"N": self.N, "t": self.t, "b_percent": self.b * 100.0, "n1": self.n1, "n2": self.n2}


def priority_for_level(i: int, l_low: int, l_high: int, policy: PriorityPolicy) -> int:
    """Map an operator level onto the random priority range ``[n1, n2]``.

    Levels map one-to-one while the range is wide enough; otherwise they are
    scaled down and neighbouring levels may share a priority.
    """
    if not l_low <= i <= l_high:
        raise ClassifyError("level out of span")
    n1 = policy.n1
    c_prio = policy.n2 - policy.n1
    l_gap = l_high - l_low
    if c_prio == 0 or l_gap == 0:
        return n1
    if c_prio >= l_gap:
        return n1 + i - l_low
    return n1 + (c_prio * (i - l_low)) // l_gap


class ConcurrencyRegistry:
    """Object levels contributed by all running queries.

    ``H`` maps an object id to ``{level: count}``; ``g_low``/``g_high`` are the
    global minimum and maximum level over every entry (``None`` when empty).
    All methods are serialized through one lock.
    """

    def __init__(self):
        self._lock = threading.RLock()
        self.H: dict[str, dict[int, int]] = {}
        self.active_queries: dict[str, dict[str, int]] = {}
        self.g_low: int | None = None
        self.g_high: int | None = None

    def _recompute_span(self):
        levels = [lvl for entries in self.H.values() for lvl in entries]
        self.g_low = min(levels) if levels else None
        self.g_high = max(levels) if levels else None

    def register_query(self, query_id: str, summary: RandomAccessSummary) -> None:
        with self._lock:
            if query_id in self.active_queries:
                raise ClassifyError(f"query {query_id!r} already registered")
            contrib = dict(summary.per_object_min_level)
            for oid, lvl in contrib.items():
                entries = self.H.setdefault(oid, {})
                entries[lvl] = entries.get(lvl, 0) + 1
            self.active_queries[query_id] = contrib
            self._recompute_span()

    def register_plan(self, tree: QueryPlanTree, query_id: str | None = None) -> None:
        self.register_query(query_id if query_id is not None else tree.query_id,
                            random_access_summary(tree))

    def unregister_query(self, query_id: str) -> None:
        with self._lock:
            try:
                contrib = self.active_queries.pop(query_id)
            except KeyError:
                raise ClassifyError(f"query {query_id!r} is not registered") from None
            for oid, lvl in contrib.items():
                entries = self.H[oid]
                entries[lvl] -= 1
                if entries[lvl] == 0:
                    del entries[lvl]
                if not entries:
                    del self.H[oid]
            self._recompute_span()

    def entries(self, oid: str) -> list[tuple[int, int]]:
        with self._lock:
            return sorted(self.H.get(oid, {}).items())

    def lookup(self, oid: str) -> tuple[int, int, int] | None:
        """Consistent ``(min level of oid, g_low, g_high)`` or None if unknown."""
        with self._lock:
            entries = self.H.get(oid)
            if not entries:
                return None
            return min(entries), self.g_low, self.g_high

    def snapshot(self) -> dict:
        with self._lock:
            return {
                "H": copy.deepcopy(self.H),
                "active_queries": copy.deepcopy(self.active_queries),
                "g_low": self.g_low,
                "g_high": self.g_high,
            }

    def __len__(self):
        return len(self.active_queries)


def classify_request(cls: RequestClass | str, oid: str | None, registry: ConcurrencyRegistry,
                     policy: PriorityPolicy, eviction_scan: bool = False) -> Priority:
    """Caching priority of one request.

    ``eviction_scan`` marks the reads issued over a temporary file right
    before it is deleted on systems without TRIM; they carry the same
    priority as the delete command itself.
    """
    cls = RequestClass(cls)
    if eviction_scan:
        if cls is not RequestClass.TEMP_READ:
            raise ClassifyError("eviction_scan only applies to temp_read")
        return policy.evict
    if cls in (RequestClass.TEMP_READ, RequestClass.TEMP_WRITE):
        return 1
    if cls is RequestClass.TEMP_DELETE:
        return policy.evict
    if cls in (RequestClass.SEQUENTIAL_READ, RequestClass.SEQUENTIAL_WRITE):
        return policy.no_evict
    if cls is RequestClass.UPDATE:
        return WRITE_BUFFER
    found = registry.lookup(oid) if oid is not None else None
    if found is None:
        raise ClassifyError(f"object not registered: {oid!r}")
    level, g_low, g_high = found
    return priority_for_level(level, g_low, g_high, policy)
