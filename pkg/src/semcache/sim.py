"""Trace replay against four storage configurations.

Modes:

``hdd_only`` / ``ssd_only``
    Every request goes straight to one device.
``lru``
    One LRU-managed cache that admits every read and write.
``hstorage``
    Requests are classified from the running queries' plans and applied to
    the priority cache.

Timing is a closed loop: each stream has one outstanding request and issues
the next when it completes. The storage server serves requests first come,
first served; a request's service time is the sum of its SSD and HDD work.
Write-buffer flushes keep the server busy but do not delay the stream that
triggered them.
"""
from __future__ import annotations

import csv
import heapq
import io
import json
from collections import Counter, defaultdict
from dataclasses import dataclass, field, replace

from .cache import CacheAction, HybridCache
from .classify import (ClassifyError, ConcurrencyRegistry, PriorityPolicy, RequestClass,
                       WRITE_BUFFER, classify_request)
from .device import HDD_PROFILE, SSD_PROFILE, DeviceProfile, service_time
from .workload import Trace, save_trace

MODES = ("hdd_only", "ssd_only", "lru", "hstorage")
# Every LRU-mode request shares one caching priority, i.e. one LRU list.
_LRU_PRIO = 1


class SimError(RuntimeError):
    pass


@dataclass
class StorageConfig:
    mode: str
    cache_capacity_blocks: int = 0
    policy: PriorityPolicy = field(default_factory=PriorityPolicy)
    ssd: DeviceProfile = SSD_PROFILE
    hdd: DeviceProfile = HDD_PROFILE
    flush_retains: bool = False
    name: str | None = None

    def __post_init__(self):
        if self.mode not in MODES:
            raise SimError(f"unknown mode {self.mode!r}")
        if self.cache_capacity_blocks < 0:
            raise SimError("cache capacity must be non-negative")

    @property
    def label(self) -> str:
        return self.name or self.mode

    @classmethod
    def from_dict(cls, d: dict) -> "StorageConfig":
        allowed = {"mode", "name", "cache_capacity_blocks", "policy", "devices", "flush_retains"}
        extra = set(d) - allowed
        if extra:
            raise SimError(f"unknown config keys {sorted(extra)}")
        devices = d.get("devices", {})
        return cls(
            mode=d.get("mode", "hstorage"),
            cache_capacity_blocks=int(d.get("cache_capacity_blocks", 0)),
            policy=PriorityPolicy.from_dict(d.get("policy", {})),
            ssd=DeviceProfile.from_dict(devices["ssd"]) if "ssd" in devices else SSD_PROFILE,
            hdd=DeviceProfile.from_dict(devices["hdd"]) if "hdd" in devices else HDD_PROFILE,
            flush_retains=bool(d.get("flush_retains", False)),
            name=d.get("name"),
        )

    @classmethod
    def load(cls, path) -> "StorageConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self) -> dict:
        d = {
            "mode": self.mode,
            "cache_capacity_blocks": self.cache_capacity_blocks,
            "policy": self.policy.to_dict(),
            "devices": {"ssd": self.ssd.to_dict(), "hdd": self.hdd.to_dict()},
            "flush_retains": self.flush_retains,
        }
        if self.name:
            d["name"] = self.name
        return d

    def with_mode(self, mode: str) -> "StorageConfig":
        return StorageConfig(mode, self.cache_capacity_blocks, self.policy, self.ssd, self.hdd,
                             self.flush_retains, None)


@dataclass
class HitStats:
    accessed_blocks: int = 0
    cache_hits: int = 0
    allocated: int = 0
    bypassed: int = 0

    @property
    def misses(self) -> int:
        return self.accessed_blocks - self.cache_hits

    @property
    def hit_ratio(self) -> float:
        return self.cache_hits / self.accessed_blocks if self.accessed_blocks else 0.0

    def to_dict(self) -> dict:
        return {
            "accessed_blocks": self.accessed_blocks,
            "cache_hits": self.cache_hits,
            "allocated": self.allocated,
            "bypassed": self.bypassed,
            "hit_ratio": self.hit_ratio,
        }


@dataclass
class SimReport:
    mode: str
    name: str
    total_time_us: float = 0.0
    server_busy_us: float = 0.0
    totals: HitStats = field(default_factory=HitStats)
    per_class: dict[str, HitStats] = field(default_factory=lambda: defaultdict(HitStats))
    per_priority: dict[str, HitStats] = field(default_factory=lambda: defaultdict(HitStats))
    per_stream: dict[str, HitStats] = field(default_factory=lambda: defaultdict(HitStats))
    stream_time_us: dict[str, float] = field(default_factory=dict)
    counts: Counter = field(default_factory=Counter)

    def to_dict(self) -> dict:
        def table(d):
            return {k: v.to_dict() for k, v in sorted(d.items())}

        return {
            "mode": self.mode,
            "name": self.name,
            "total_time_us": self.total_time_us,
            "server_busy_us": self.server_busy_us,
            "totals": self.totals.to_dict(),
            "per_class": table(self.per_class),
            "per_priority": table(self.per_priority),
            "per_stream": {
                sid: {**st.to_dict(), "time_us": self.stream_time_us.get(sid, 0.0)}
                for sid, st in sorted(self.per_stream.items())
            },
            "counts": {k: self.counts.get(k, 0) for k in _COUNT_KEYS},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def metric_rows(self) -> list[tuple[str, str, float]]:
        """``(config, metric, value)`` rows for plotting."""
        rows = [
            (self.name, "total_time_us", self.total_time_us),
            (self.name, "hit_ratio", self.totals.hit_ratio),
            (self.name, "accessed_blocks", self.totals.accessed_blocks),
            (self.name, "cache_hits", self.totals.cache_hits),
        ]
        rows += [(self.name, k, self.counts.get(k, 0)) for k in _COUNT_KEYS]
        for sid in sorted(self.per_stream):
            rows.append((self.name, f"stream:{sid}:time_us", self.stream_time_us.get(sid, 0.0)))
            rows.append((self.name, f"stream:{sid}:hit_ratio", self.per_stream[sid].hit_ratio))
        for cls in sorted(self.per_class):
            rows.append((self.name, f"class:{cls}:hit_ratio", self.per_class[cls].hit_ratio))
        for prio in sorted(self.per_priority):
            rows.append((self.name, f"priority:{prio}:hit_ratio", self.per_priority[prio].hit_ratio))
        return rows

    def to_csv(self) -> str:
        return _rows_to_csv(self.metric_rows())


_COUNT_KEYS = ("read_allocations", "write_allocations", "reallocations", "bypasses",
               "evictions", "writebacks", "flushes", "trimmed_blocks")
_ACTION_COUNT = {
    CacheAction.READ_ALLOCATION: "read_allocations",
    CacheAction.WRITE_ALLOCATION: "write_allocations",
    CacheAction.REALLOCATION: "reallocations",
    CacheAction.BYPASS: "bypasses",
    CacheAction.EVICTION: "evictions",
    CacheAction.WRITEBACK: "writebacks",
    CacheAction.FLUSH: "flushes",
}


def _rows_to_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["config", "metric", "value"])
    w.writerows(rows)
    return buf.getvalue()


class _Work:
    """Blocks moved per (device, direction, sequential) for one request."""

    def __init__(self):
        self.blocks = Counter()
        self.async_blocks = Counter()

    def add(self, device, direction, sequential, n=1, deferred=False):
        (self.async_blocks if deferred else self.blocks)[(device, direction, sequential)] += n

    @staticmethod
    def _time(counter, profiles):
        return sum(service_time(profiles[dev], d, seq, n)
                   for (dev, d, seq), n in sorted(counter.items()) if n)

    def times(self, profiles) -> tuple[float, float]:
        return self._time(self.blocks, profiles), self._time(self.async_blocks, profiles)


def _prio_key(prio) -> str | None:
    return None if prio is None else str(prio)


class Simulator:
    """One replay of a trace under one configuration."""

    def __init__(self, config: StorageConfig, trace: Trace, keep_log: bool = False):
        self.config = config
        self.trace = trace
        self.report = SimReport(config.mode, config.label)
        self.registry = ConcurrencyRegistry()
        self.cache = None
        if config.mode in ("lru", "hstorage"):
            self.cache = HybridCache(config.cache_capacity_blocks, config.policy,
                                     flush_retains=config.flush_retains, keep_log=keep_log)
        self.profiles = {"ssd": config.ssd, "hdd": config.hdd}
        self.priorities: dict[int, object] = {}

    def _label_priority(self, rec):
        """Priority the request would get from the classifier (stats only in lru mode)."""
        try:
            return classify_request(rec.cls, rec.oid, self.registry, self.config.policy,
                                    eviction_scan=rec.eviction_scan)
        except ClassifyError:
            if self.config.mode == "hstorage":
                raise SimError(f"record {rec.seq}: object {rec.oid!r} is not registered "
                               f"by any running query") from None
            return None

    def _tally(self, rec, prio, hits, allocated, bypassed):
        keys = [self.report.totals, self.report.per_class[rec.cls.value],
                self.report.per_stream[rec.stream_id]]
        if prio is not None:
            keys.append(self.report.per_priority[_prio_key(prio)])
        for st in keys:
            st.accessed_blocks += hits + allocated + bypassed
            st.cache_hits += hits
            st.allocated += allocated
            st.bypassed += bypassed

    def _serve(self, rec) -> _Work:
        mode = self.config.mode
        work = _Work()
        seq = rec.cls.is_sequential_access
        self.report.per_stream.setdefault(rec.stream_id, HitStats())

        if rec.cls is RequestClass.TEMP_DELETE:
            if self.cache is not None:
                self.priorities[rec.seq] = self.config.policy.evict
            if mode == "hstorage":
                self.cache.trim(rec.lbn, rec.blocks)
                self.report.counts["trimmed_blocks"] += rec.blocks
            return work

        if mode in ("hdd_only", "ssd_only"):
            dev = "hdd" if mode == "hdd_only" else "ssd"
            work.add(dev, rec.direction, seq, rec.blocks)
            self._tally(rec, None, 0, 0, rec.blocks)
            return work

        prio = self._label_priority(rec)
        self.priorities[rec.seq] = prio
        cache_prio = prio if mode == "hstorage" else _LRU_PRIO
        outcomes = self.cache.access(rec.lbn, rec.blocks, rec.direction, cache_prio)
        hits = allocated = bypassed = 0
        for out in outcomes:
            kinds = out.kinds
            if CacheAction.HIT in kinds:
                hits += 1
                work.add("ssd", rec.direction, seq)
            elif CacheAction.READ_ALLOCATION in kinds:
                allocated += 1
                work.add("hdd", "read", seq)
                work.add("ssd", "write", seq)
            elif CacheAction.WRITE_ALLOCATION in kinds:
                allocated += 1
                work.add("ssd", "write", seq)
            else:
                bypassed += 1
                work.add("hdd", rec.direction, seq)
            for a in out.actions:
                name = _ACTION_COUNT.get(a.action)
                if name:
                    self.report.counts[name] += 1
                if a.action is CacheAction.WRITEBACK:
                    work.add("hdd", "write", False, deferred=a.prio == WRITE_BUFFER)
        self._tally(rec, prio, hits, allocated, bypassed)
        return work

    def run(self) -> SimReport:
        streams: dict[str, list] = {}
        for rec in self.trace.records:
            streams.setdefault(rec.stream_id, []).append(rec)
        plans = self.trace.plans
        order = {sid: i for i, sid in enumerate(streams)}
        pos = dict.fromkeys(streams, 0)
        heap = [(recs[0].time_hint or 0.0, order[sid], sid) for sid, recs in streams.items()]
        heapq.heapify(heap)
        server_free = 0.0
        busy = 0.0
        report = self.report

        while heap:
            ready, _, sid = heapq.heappop(heap)
            recs = streams[sid]
            i = pos[sid]
            rec = recs[i]
            if i == 0 and sid in plans and self.cache is not None:
                self.registry.register_plan(plans[sid], sid)
            work = self._serve(rec)
            sync_us, async_us = work.times(self.profiles)
            start = max(ready, server_free) if sync_us else ready
            end = start + sync_us
            server_free = max(server_free, end) + async_us
            busy += sync_us + async_us
            pos[sid] = i + 1
            if i + 1 < len(recs):
                nxt = max(end, recs[i + 1].time_hint or 0.0)
                heapq.heappush(heap, (nxt, order[sid], sid))
            else:
                report.stream_time_us[sid] = end
                if sid in self.registry.active_queries:
                    self.registry.unregister_query(sid)

        report.total_time_us = max(report.stream_time_us.values(), default=0.0)
        report.server_busy_us = busy
        return report


def run(config: StorageConfig, trace: Trace, action_log=None, classified_out=None) -> SimReport:
    """Replay ``trace`` under ``config``.

    ``action_log`` is an optional path receiving the cache's action log as
    JSON lines. ``classified_out`` receives the trace with each record's
    ``priority`` filled in. Both apply to the cache modes only.
    """
    sim = Simulator(config, trace, keep_log=action_log is not None)
    report = sim.run()
    if sim.cache is not None:
        if action_log is not None:
            sim.cache.export_log(action_log)
        if classified_out is not None:
            records = [replace(r, priority=sim.priorities.get(r.seq)) for r in trace.records]
            save_trace(Trace(trace.objects, trace.plans, records), classified_out)
    return report


@dataclass
class ComparisonReport:
    reports: list[SimReport]

    def rows(self) -> list[dict]:
        return [
            {
                "config": r.name,
                "mode": r.mode,
                "total_time_us": r.total_time_us,
                "accessed_blocks": r.totals.accessed_blocks,
                "cache_hits": r.totals.cache_hits,
                "hit_ratio": r.totals.hit_ratio,
                **{k: r.counts.get(k, 0) for k in _COUNT_KEYS},
            }
            for r in self.reports
        ]

    def to_csv(self) -> str:
        return _rows_to_csv([row for r in self.reports for row in r.metric_rows()])

    def to_json(self) -> str:
        return json.dumps({"configs": [r.to_dict() for r in self.reports]}, indent=2, sort_keys=True)

    def to_table(self) -> str:
        head = f"{'config':<14}{'time (s)':>12}{'hit ratio':>11}{'accessed':>11}{'hits':>10}" \
               f"{'evictions':>11}{'writebacks':>12}"
        lines = [head]
        for row in self.rows():
            lines.append(
                f"{row['config']:<14}{row['total_time_us'] / 1e6:>12.3f}{row['hit_ratio']:>11.1%}"
                f"{row['accessed_blocks']:>11}{row['cache_hits']:>10}"
                f"{row['evictions']:>11}{row['writebacks']:>12}"
            )
        return "\n".join(lines)


def compare(configs: list[StorageConfig], trace: Trace) -> ComparisonReport:
    return ComparisonReport([run(c, trace) for c in configs])
