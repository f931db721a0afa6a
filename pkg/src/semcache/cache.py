"""Priority-grouped SSD cache with selective allocation and eviction.

Cached blocks live in one of ``N`` priority groups (plus a write-buffer
group), each kept in LRU order, and in a hash index ``lbn -> (pbn, prio,
dirty)``. A request is applied block by block:

* a caching priority (``< t`` or write buffer) may allocate a slot, evicting
  the least recently used block of the numerically largest non-empty group
  when that group's priority is at least the incoming one;
* ``N - 1`` serves hits without touching the stored priority and never
  allocates;
* ``N`` never allocates and demotes cached blocks to group ``N`` so they are
  the first to go.

Update writes land in the write-buffer group, which is never a victim and is
flushed to the lower level as soon as it grows past ``floor(b * capacity)``.
"""
from __future__ import annotations

import heapq
import json
from collections import OrderedDict
from dataclasses import dataclass, field
from enum import Enum

from .classify import WRITE_BUFFER, Priority, PriorityPolicy


class CacheError(RuntimeError):
    pass


class CacheSaturated(CacheError):
    """Every cached block belongs to the write buffer."""


class CacheAction(str, Enum):
    HIT = "hit"
    READ_ALLOCATION = "read_allocation"
    WRITE_ALLOCATION = "write_allocation"
    BYPASS = "bypass"
    REALLOCATION = "reallocation"
    EVICTION = "eviction"
    WRITEBACK = "writeback"
    FLUSH = "flush"


@dataclass
class CacheBlockMeta:
    lbn: int
    pbn: int
    prio: Priority
    dirty: bool = False


@dataclass
class ActionRecord:
    seq: int
    lbn: int
    action: CacheAction
    prio: Priority | None
    dirty: bool
    group_sizes_after: dict | None = None

    def to_dict(self) -> dict:
        return {
            "seq": self.seq,
            "lbn": self.lbn,
            "action": self.action.value,
            "prio": self.prio,
            "dirty": self.dirty,
            "group_sizes_after": self.group_sizes_after,
        }


@dataclass
class BlockOutcome:
    lbn: int
    served_from: str  # "cache" or "lower_level"
    actions: list[ActionRecord] = field(default_factory=list)

    @property
    def kinds(self) -> list[CacheAction]:
        return [a.action for a in self.actions]


def _group_key(prio: Priority) -> str:
    return WRITE_BUFFER if prio == WRITE_BUFFER else str(prio)


class HybridCache:
    """Two-level cache state machine.

    Parameters
    ----------
    capacity_blocks : int
        Number of cache slots.
    policy : PriorityPolicy
        Priority configuration; ``policy.b`` sizes the write buffer.
    flush_retains : bool
        Keep flushed write-buffer blocks cached (clean, in the lowest caching
        group) instead of releasing them.
    keep_log : bool
        Record every action, with group sizes, in :attr:`log`.
    """

    def __init__(self, capacity_blocks: int, policy: PriorityPolicy | None = None,
                 flush_retains: bool = False, keep_log: bool = False):
        if capacity_blocks < 0:
            raise CacheError("capacity must be non-negative")
        self.capacity_blocks = capacity_blocks
        self.policy = policy or PriorityPolicy()
        self.flush_retains = flush_retains
        self.keep_log = keep_log
        self.write_buffer_limit = int(self.policy.b * capacity_blocks)
        # OrderedDict order is LRU first, MRU last.
        self.groups: dict[Priority, OrderedDict[int, None]] = {
            k: OrderedDict() for k in range(1, self.policy.N + 1)
        }
        self.groups[WRITE_BUFFER] = OrderedDict()
        self.index: dict[int, CacheBlockMeta] = {}
        self.free_list: list[int] = list(range(capacity_blocks))
        self.log: list[ActionRecord] = []
        self._seq = 0

    # -- bookkeeping -------------------------------------------------------

    def group_sizes(self) -> dict[str, int]:
        return {_group_key(k): len(g) for k, g in self.groups.items() if g}

    def _record(self, sink: list, lbn: int, action: CacheAction, prio, dirty) -> ActionRecord:
        rec = ActionRecord(self._seq, lbn, action, prio, dirty)
        self._seq += 1
        if self.keep_log:
            rec.group_sizes_after = self.group_sizes()
            self.log.append(rec)
        sink.append(rec)
        return rec

    def _check_prio(self, prio: Priority):
        if prio == WRITE_BUFFER:
            return
        if not isinstance(prio, int) or not 1 <= prio <= self.policy.N:
            raise CacheError(f"invalid priority {prio!r}")

    def _move(self, meta: CacheBlockMeta, prio: Priority):
        del self.groups[meta.prio][meta.lbn]
        meta.prio = prio
        self.groups[prio][meta.lbn] = None

    def _touch(self, meta: CacheBlockMeta):
        self.groups[meta.prio].move_to_end(meta.lbn)

    def __contains__(self, lbn: int) -> bool:
        return lbn in self.index

    def __len__(self) -> int:
        return len(self.index)

    # -- victim selection ----------------------------------------------------

    def select_victim(self) -> int:
        """LRU block of the numerically largest non-empty priority group."""
        for k in range(self.policy.N, 0, -1):
            group = self.groups[k]
            if group:
                return next(iter(group))
        if self.groups[WRITE_BUFFER]:
            raise CacheSaturated("cache saturated by write buffer")
        raise CacheError("no cached block to evict")

    def should_admit(self, prio: Priority) -> bool:
        """Selective allocation: is there room, or a block we may displace?"""
        if self.free_list:
            return True
        if prio == WRITE_BUFFER:
            return any(self.groups[k] for k in range(1, self.policy.N + 1))
        return any(self.groups[k] for k in range(prio, self.policy.N + 1))

    def evict(self, lbn: int, sink: list | None = None) -> list[ActionRecord]:
        sink = [] if sink is None else sink
        meta = self.index.get(lbn)
        if meta is None:
            raise CacheError(f"block {lbn} is not cached")
        if meta.dirty:
            self._record(sink, lbn, CacheAction.WRITEBACK, meta.prio, True)
        del self.groups[meta.prio][lbn]
        del self.index[lbn]
        heapq.heappush(self.free_list, meta.pbn)
        self._record(sink, lbn, CacheAction.EVICTION, meta.prio, meta.dirty)
        return sink

    def flush_write_buffer(self, sink: list | None = None) -> list[ActionRecord]:
        """Write back every write-buffer block and release its slot."""
        sink = [] if sink is None else sink
        retain_group = max(self.policy.t - 1, 1)
        for lbn in list(self.groups[WRITE_BUFFER]):
            meta = self.index[lbn]
            if meta.dirty:
                self._record(sink, lbn, CacheAction.WRITEBACK, WRITE_BUFFER, True)
                meta.dirty = False
            if self.flush_retains:
                self._move(meta, retain_group)
            else:
                del self.groups[WRITE_BUFFER][lbn]
                del self.index[lbn]
                heapq.heappush(self.free_list, meta.pbn)
            self._record(sink, lbn, CacheAction.FLUSH, WRITE_BUFFER, False)
        return sink

    def _maybe_flush(self, sink: list):
        if len(self.groups[WRITE_BUFFER]) > self.write_buffer_limit:
            self.flush_write_buffer(sink)

    # -- request processing --------------------------------------------------

    def _allocate(self, lbn: int, prio: Priority, direction: str, sink: list) -> bool:
        if not self.free_list:
            if not self.should_admit(prio):
                return False
            try:
                victim = self.select_victim()
            except CacheSaturated:
                return False
            self.evict(victim, sink)
        pbn = heapq.heappop(self.free_list)
        dirty = direction == "write"
        self.index[lbn] = CacheBlockMeta(lbn, pbn, prio, dirty)
        self.groups[prio][lbn] = None
        action = CacheAction.WRITE_ALLOCATION if dirty else CacheAction.READ_ALLOCATION
        self._record(sink, lbn, action, prio, dirty)
        return True

    def _access_block(self, lbn: int, direction: str, prio: Priority) -> BlockOutcome:
        policy = self.policy
        out = BlockOutcome(lbn, "cache")
        sink = out.actions
        meta = self.index.get(lbn)
        write = direction == "write"

        if meta is not None:
            if write:
                meta.dirty = True
            self._record(sink, lbn, CacheAction.HIT, meta.prio, meta.dirty)
            if policy.is_caching(prio):
                if meta.prio != prio:
                    self._move(meta, prio)
                    self._record(sink, lbn, CacheAction.REALLOCATION, prio, meta.dirty)
                else:
                    self._touch(meta)
                if prio == WRITE_BUFFER:
                    self._maybe_flush(sink)
            elif prio == policy.evict:
                if not write:
                    meta.dirty = False
                if meta.prio != prio:
                    self._move(meta, prio)
                    self._record(sink, lbn, CacheAction.REALLOCATION, prio, meta.dirty)
            elif meta.prio != policy.evict:
                # non-caching, non-eviction: keep the stored priority
                self._touch(meta)
            return out

        if policy.is_caching(prio) and self._allocate(lbn, prio, direction, sink):
            if not write:
                out.served_from = "lower_level"
            if prio == WRITE_BUFFER:
                self._maybe_flush(sink)
            return out

        out.served_from = "lower_level"
        self._record(sink, lbn, CacheAction.BYPASS, prio, False)
        return out

    def access(self, lbn: int, blocks: int, direction: str, prio: Priority) -> list[BlockOutcome]:
        """Apply a request over ``[lbn, lbn + blocks)`` in ascending order."""
        if blocks < 1:
            raise CacheError("empty block range")
        if direction not in ("read", "write"):
            raise CacheError(f"unknown direction {direction!r}")
        self._check_prio(prio)
        if prio == WRITE_BUFFER and direction == "read":
            raise CacheError("write-buffer priority on read")
        return [self._access_block(b, direction, prio) for b in range(lbn, lbn + blocks)]

    def trim(self, lbn: int, blocks: int) -> list[ActionRecord]:
        """Mark cached blocks in the range as dead: clean, first to evict."""
        sink: list[ActionRecord] = []
        evict_prio = self.policy.evict
        for b in range(lbn, lbn + blocks):
            meta = self.index.get(b)
            if meta is None:
                continue
            meta.dirty = False
            if meta.prio != evict_prio:
                self._move(meta, evict_prio)
                self._record(sink, b, CacheAction.REALLOCATION, evict_prio, False)
        return sink

    # -- inspection ----------------------------------------------------------

    def snapshot(self) -> dict:
        """Plain-data view of the state; group lists are MRU first."""
        return {
            "groups": {_group_key(k): list(reversed(g)) for k, g in self.groups.items() if g},
            "index": {lbn: (m.pbn, m.prio, m.dirty) for lbn, m in sorted(self.index.items())},
            "free": sorted(self.free_list),
        }

    def check_invariants(self):
        members = 0
        for k, group in self.groups.items():
            for lbn in group:
                meta = self.index.get(lbn)
                assert meta is not None and meta.prio == k, f"block {lbn} misfiled in group {k}"
            members += len(group)
        assert members == len(self.index)
        assert members + len(self.free_list) == self.capacity_blocks
        pbns = {m.pbn for m in self.index.values()}
        assert len(pbns) == len(self.index)
        assert pbns.isdisjoint(self.free_list)
        assert all(0 <= p < self.capacity_blocks for p in pbns)
        assert len(self.groups[WRITE_BUFFER]) <= self.write_buffer_limit

    def export_log(self, path):
        with open(path, "w") as fh:
            for rec in self.log:
                fh.write(json.dumps(rec.to_dict()) + "\n")
