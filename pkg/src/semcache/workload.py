"""Synthetic block-I/O workloads and the JSON-lines trace format.

A workload spec is one JSON document::

    {
      "format_version": 1,
      "objects": [{"oid": "orders", "kind": "table", "start_lbn": 0, "length_blocks": 4000}, ...],
      "queries": [
        {"query_id": "q1", "plan": {...plan root...}, "start_us": 0,
         "phases": [
           {"type": "scan", "object": "lineitem", "chunk_blocks": 8, "passes": 1},
           {"type": "random", "object": "orders", "index": "orders_pkey",
            "n_ops": 10000, "skew": 0.99},
           {"type": "temp_generate", "object": "tmp0", "chunk_blocks": 8},
           {"type": "temp_consume", "object": "tmp0", "passes": 2, "chunk_blocks": 8},
           {"type": "temp_delete", "object": "tmp0", "method": "trim"},
           {"type": "update", "object": "orders", "n_blocks": 100}
         ]}
      ],
      "interleave": {"mode": "round_robin", "chunk": 8}
    }

A random phase draws ``n_ops`` key ranks from a bounded Zipf distribution.
Each draw reads the table block holding that key; with an ``index`` it is
preceded by a read of the index block covering the key, so index and table
records alternate one to one. ``temp_delete`` with ``method: "scan"`` emits
eviction-scan reads over the temp extent instead of a single delete command.

A trace file starts with a header line carrying ``format_version``, the
object extents and the query plans, followed by one record per line.
"""
from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .classify import RequestClass
from .plan import QueryPlanTree

FORMAT_VERSION = 1
OBJECT_KINDS = ("table", "index", "temp")


class WorkloadError(ValueError):
    pass


class TraceFormatError(WorkloadError):
    pass


@dataclass(frozen=True)
class ObjectExtent:
    oid: str
    kind: str
    start_lbn: int
    length_blocks: int

    def __post_init__(self):
        if self.kind not in OBJECT_KINDS:
            raise WorkloadError(f"object {self.oid}: unknown kind {self.kind!r}")
        if self.start_lbn < 0 or self.length_blocks < 1:
            raise WorkloadError(f"object {self.oid}: bad extent")

    @property
    def end_lbn(self) -> int:
        return self.start_lbn + self.length_blocks

    def to_dict(self) -> dict:
        return {"oid": self.oid, "kind": self.kind, "start_lbn": self.start_lbn,
                "length_blocks": self.length_blocks}


@dataclass
class TraceRecord:
    seq: int
    stream_id: str
    cls: RequestClass
    oid: str | None
    lbn: int
    blocks: int
    direction: str | None
    time_hint: float | None = None
    eviction_scan: bool = False
    priority: int | str | None = None  # set only on classified output

    FIELDS = ("seq", "time_hint", "stream_id", "class", "oid", "lbn", "blocks", "direction",
              "eviction_scan", "priority")

    def to_dict(self) -> dict:
        d = {
            "seq": self.seq,
            "time_hint": self.time_hint,
            "stream_id": self.stream_id,
            "class": self.cls.value,
            "oid": self.oid,
            "lbn": self.lbn,
            "blocks": self.blocks,
            "direction": self.direction,
            "eviction_scan": self.eviction_scan,
        }
        if self.priority is not None:
            d["priority"] = self.priority
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TraceRecord":
        unknown = set(d) - set(cls.FIELDS)
        if unknown:
            raise TraceFormatError(f"unknown fields {sorted(unknown)}")
        try:
            rc = RequestClass(d["class"])
            rec = cls(
                seq=int(d["seq"]),
                stream_id=str(d["stream_id"]),
                cls=rc,
                oid=d.get("oid"),
                lbn=int(d["lbn"]),
                blocks=int(d["blocks"]),
                direction=d.get("direction"),
                time_hint=d.get("time_hint"),
                eviction_scan=bool(d.get("eviction_scan", False)),
                priority=d.get("priority"),
            )
        except KeyError as e:
            raise TraceFormatError(f"missing field {e.args[0]!r}") from None
        except ValueError as e:
            raise TraceFormatError(str(e)) from None
        if rec.direction != rc.direction:
            raise TraceFormatError(f"direction {rec.direction!r} does not match class {rc.value}")
        if rec.blocks < 1:
            raise TraceFormatError("blocks must be positive")
        if rec.eviction_scan and rc is not RequestClass.TEMP_READ:
            raise TraceFormatError("eviction_scan is only valid on temp_read")
        return rec


@dataclass
class Trace:
    objects: list[ObjectExtent] = field(default_factory=list)
    plans: dict[str, QueryPlanTree] = field(default_factory=dict)
    records: list[TraceRecord] = field(default_factory=list)

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def extent_map(self) -> dict[str, ObjectExtent]:
        return {o.oid: o for o in self.objects}

    def validate(self):
        """Check every record against the declared extents (when present)."""
        _check_disjoint(self.objects)
        for prev, rec in zip(self.records, self.records[1:]):
            if rec.seq <= prev.seq:
                raise WorkloadError(f"record {rec.seq}: seq must increase")
        if not self.objects:
            return
        extents = self.extent_map()
        for rec in self.records:
            ext = extents.get(rec.oid)
            if ext is None:
                raise WorkloadError(f"record {rec.seq}: unknown object {rec.oid!r}")
            if rec.lbn < ext.start_lbn or rec.lbn + rec.blocks > ext.end_lbn:
                raise WorkloadError(f"record {rec.seq}: lbn range outside extent of {rec.oid}")
            if rec.cls is RequestClass.TEMP_DELETE and (
                    rec.lbn != ext.start_lbn or rec.blocks != ext.length_blocks):
                raise WorkloadError(f"record {rec.seq}: temp_delete must cover the whole temp extent")

    def class_totals(self) -> dict[str, int]:
        """Blocks per request class."""
        totals = Counter()
        for rec in self.records:
            totals[rec.cls.value] += rec.blocks
        return dict(sorted(totals.items()))

    def header(self) -> dict:
        return {
            "format_version": FORMAT_VERSION,
            "objects": [o.to_dict() for o in self.objects],
            "plans": {qid: p.root.to_dict() for qid, p in self.plans.items() if p.root is not None},
        }


def _check_disjoint(objects):
    seen = set()
    spans = []
    for o in objects:
        if o.oid in seen:
            raise WorkloadError(f"duplicate object {o.oid!r}")
        seen.add(o.oid)
        spans.append((o.start_lbn, o.end_lbn, o.oid))
    spans.sort()
    for (_, end, a), (start, _, b) in zip(spans, spans[1:]):
        if start < end:
            raise WorkloadError(f"extents of {a!r} and {b!r} overlap")


# -- trace I/O ------------------------------------------------------------------

def save_trace(trace: Trace, path) -> None:
    with open(path, "w") as fh:
        fh.write(json.dumps(trace.header()) + "\n")
        for rec in trace.records:
            fh.write(json.dumps(rec.to_dict()) + "\n")


def load_trace(path) -> Trace:
    trace = Trace()
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                doc = json.loads(line)
            except json.JSONDecodeError as e:
                raise TraceFormatError(f"line {lineno}: {e.msg}") from None
            if not isinstance(doc, dict):
                raise TraceFormatError(f"line {lineno}: expected an object")
            try:
                if "format_version" in doc:
                    if lineno != 1 or trace.records:
                        raise TraceFormatError("header must be the first line")
                    _read_header(trace, doc)
                else:
                    trace.records.append(TraceRecord.from_dict(doc))
            except WorkloadError as e:
                raise TraceFormatError(f"line {lineno}: {e}") from None
    trace.validate()
    return trace


def _read_header(trace: Trace, doc: dict):
    unknown = set(doc) - {"format_version", "objects", "plans"}
    if unknown:
        raise TraceFormatError(f"unknown header fields {sorted(unknown)}")
    if doc["format_version"] != FORMAT_VERSION:
        raise TraceFormatError(f"unsupported format_version {doc['format_version']!r}")
    trace.objects = [ObjectExtent(**o) for o in doc.get("objects", [])]
    trace.plans = {qid: QueryPlanTree.from_dict(root, query_id=qid)
                   for qid, root in doc.get("plans", {}).items()}


# -- generation -----------------------------------------------------------------

def zipf_pmf(n: int, s: float) -> np.ndarray:
    """Bounded Zipf: P(rank k) proportional to 1 / (k + 1) ** s, k in [0, n)."""
    w = 1.0 / np.arange(1, n + 1, dtype=float) ** s
    return w / w.sum()


def _chunks(start, length, chunk):
    for off in range(0, length, chunk):
        yield start + off, min(chunk, length - off)


_PHASE_KEYS = {
    "scan": {"object", "chunk_blocks", "passes", "direction"},
    "random": {"object", "index", "n_ops", "skew", "direction"},
    "temp_generate": {"object", "chunk_blocks"},
    "temp_consume": {"object", "chunk_blocks", "passes"},
    "temp_delete": {"object", "method", "chunk_blocks"},
    "update": {"object", "n_blocks"},
}


@dataclass
class WorkloadSpec:
    objects: list[ObjectExtent]
    queries: list[dict]
    interleave: dict = field(default_factory=lambda: {"mode": "round_robin", "chunk": 8})

    @classmethod
    def from_dict(cls, doc: dict) -> "WorkloadSpec":
        if doc.get("format_version", FORMAT_VERSION) != FORMAT_VERSION:
            raise WorkloadError(f"unsupported format_version {doc['format_version']!r}")
        extra = set(doc) - {"format_version", "description", "objects", "queries", "interleave"}
        if extra:
            raise WorkloadError(f"unknown workload keys {sorted(extra)}")
        spec = cls(
            objects=[ObjectExtent(**o) for o in doc.get("objects", [])],
            queries=list(doc.get("queries", [])),
            interleave=dict(doc.get("interleave", {"mode": "round_robin", "chunk": 8})),
        )
        spec.validate()
        return spec

    @classmethod
    def load(cls, path) -> "WorkloadSpec":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def plans(self) -> dict[str, QueryPlanTree]:
        return {q["query_id"]: QueryPlanTree.from_dict(q["plan"], query_id=q["query_id"])
                for q in self.queries if q.get("plan")}

    def validate(self):
        _check_disjoint(self.objects)
        extents = {o.oid: o for o in self.objects}
        mode = self.interleave.get("mode")
        if mode not in ("serial", "round_robin"):
            raise WorkloadError(f"unknown interleave mode {mode!r}")
        if mode == "round_robin" and int(self.interleave.get("chunk", 8)) < 1:
            raise WorkloadError("round_robin chunk must be positive")
        qids = set()
        temp_owner = {}
        for q in self.queries:
            qid = q.get("query_id")
            if qid is None or qid in qids:
                raise WorkloadError(f"missing or duplicate query_id {qid!r}")
            qids.add(qid)
            extra = set(q) - {"query_id", "plan", "phases", "start_us"}
            if extra:
                raise WorkloadError(f"query {qid}: unknown keys {sorted(extra)}")
            temp_state = {}
            for ph in q.get("phases", []):
                kind = ph.get("type")
                if kind not in _PHASE_KEYS:
                    raise WorkloadError(f"query {qid}: unknown phase type {kind!r}")
                extra = set(ph) - _PHASE_KEYS[kind] - {"type"}
                if extra:
                    raise WorkloadError(f"query {qid}: unknown {kind} keys {sorted(extra)}")
                for key in ("object", "index"):
                    oid = ph.get(key)
                    if key == "object" and oid is None:
                        raise WorkloadError(f"query {qid}: {kind} phase without object")
                    if oid is not None and oid not in extents:
                        raise WorkloadError(f"query {qid}: unknown object {oid!r}")
                obj = extents[ph["object"]]
                if kind.startswith("temp_"):
                    if obj.kind != "temp":
                        raise WorkloadError(f"query {qid}: {obj.oid} is not a temp object")
                    if temp_owner.setdefault(obj.oid, qid) != qid:
                        raise WorkloadError(f"temp object {obj.oid} used by two queries")
                    state = temp_state.get(obj.oid)
                    allowed = {"temp_generate": (None,),
                               "temp_consume": ("generated", "consumed"),
                               "temp_delete": ("generated", "consumed")}[kind]
                    if state not in allowed:
                        raise WorkloadError(f"query {qid}: {kind} on {obj.oid} out of order")
                    temp_state[obj.oid] = {"temp_generate": "generated",
                                           "temp_consume": "consumed",
                                           "temp_delete": "deleted"}[kind]
                    if kind == "temp_delete" and ph.get("method", "trim") not in ("trim", "scan"):
                        raise WorkloadError(f"query {qid}: unknown temp_delete method")
                elif obj.kind == "temp":
                    raise WorkloadError(f"query {qid}: {kind} phase on temp object {obj.oid}")
                if kind == "random" and ph.get("index") is not None \
                        and extents[ph["index"]].kind != "index":
                    raise WorkloadError(f"query {qid}: {ph['index']} is not an index")
                if kind == "random" and int(ph.get("n_ops", 0)) < 0:
                    raise WorkloadError(f"query {qid}: negative n_ops")
            for oid, state in temp_state.items():
                if state != "deleted":
                    raise WorkloadError(f"query {qid}: temp object {oid} never deleted")
            if q.get("plan"):
                QueryPlanTree.from_dict(q["plan"], query_id=qid)

    def expected_volumes(self) -> dict[str, int]:
        """Blocks per request class implied by the phases."""
        ext = {o.oid: o for o in self.objects}
        vol = Counter()
        for q in self.queries:
            for ph in q.get("phases", []):
                kind, size = ph["type"], ext[ph["object"]].length_blocks
                if kind == "scan":
                    cls = "sequential_write" if ph.get("direction") == "write" else "sequential_read"
                    vol[cls] += size * int(ph.get("passes", 1))
                elif kind == "random":
                    cls = "random_write" if ph.get("direction") == "write" else "random_read"
                    per_op = 2 if ph.get("index") else 1
                    vol[cls] += per_op * int(ph.get("n_ops", 0))
                elif kind == "temp_generate":
                    vol["temp_write"] += size
                elif kind == "temp_consume":
                    vol["temp_read"] += size * int(ph.get("passes", 1))
                elif kind == "temp_delete":
                    if ph.get("method", "trim") == "scan":
                        vol["temp_read"] += size
                    else:
                        vol["temp_delete"] += size
                elif kind == "update":
                    vol["update"] += int(ph.get("n_blocks", 0))
        return dict(sorted((k, v) for k, v in vol.items() if v))


def _query_records(q: dict, extents: dict, rng: np.random.Generator) -> list[TraceRecord]:
    sid = q["query_id"]
    out: list[TraceRecord] = []

    def emit(cls, oid, lbn, blocks, eviction_scan=False):
        out.append(TraceRecord(0, sid, cls, oid, int(lbn), int(blocks), cls.direction,
                               eviction_scan=eviction_scan))

    for ph in q.get("phases", []):
        kind = ph["type"]
        obj = extents[ph["object"]]
        chunk = int(ph.get("chunk_blocks", 8))
        if kind == "scan":
            cls = RequestClass.SEQUENTIAL_WRITE if ph.get("direction") == "write" \
                else RequestClass.SEQUENTIAL_READ
            for _ in range(int(ph.get("passes", 1))):
                for lbn, n in _chunks(obj.start_lbn, obj.length_blocks, chunk):
                    emit(cls, obj.oid, lbn, n)
        elif kind == "random":
            cls = RequestClass.RANDOM_WRITE if ph.get("direction") == "write" \
                else RequestClass.RANDOM_READ
            n = obj.length_blocks
            cdf = np.cumsum(zipf_pmf(n, float(ph.get("skew", 0.99))))
            ranks = np.searchsorted(cdf, rng.random(int(ph.get("n_ops", 0))), side="right")
            ranks = np.minimum(ranks, n - 1)
            idx = extents[ph["index"]] if ph.get("index") else None
            for k in ranks.tolist():
                if idx is not None:
                    emit(cls, idx.oid, idx.start_lbn + k * idx.length_blocks // n, 1)
                emit(cls, obj.oid, obj.start_lbn + k, 1)
        elif kind == "temp_generate":
            for lbn, n in _chunks(obj.start_lbn, obj.length_blocks, chunk):
                emit(RequestClass.TEMP_WRITE, obj.oid, lbn, n)
        elif kind == "temp_consume":
            for _ in range(int(ph.get("passes", 1))):
                for lbn, n in _chunks(obj.start_lbn, obj.length_blocks, chunk):
                    emit(RequestClass.TEMP_READ, obj.oid, lbn, n)
        elif kind == "temp_delete":
            if ph.get("method", "trim") == "scan":
                for lbn, n in _chunks(obj.start_lbn, obj.length_blocks, chunk):
                    emit(RequestClass.TEMP_READ, obj.oid, lbn, n, eviction_scan=True)
            else:
                emit(RequestClass.TEMP_DELETE, obj.oid, obj.start_lbn, obj.length_blocks)
        elif kind == "update":
            offsets = rng.integers(0, obj.length_blocks, size=int(ph.get("n_blocks", 0)))
            for off in offsets.tolist():
                emit(RequestClass.UPDATE, obj.oid, obj.start_lbn + off, 1)
    if out and q.get("start_us") is not None:
        out[0].time_hint = float(q["start_us"])
    return out


def interleave(streams: list[list[TraceRecord]], mode: str = "round_robin", chunk: int = 8) -> list[TraceRecord]:
    """Merge per-query record lists, keeping each list's internal order."""
    if mode == "serial":
        merged = [r for s in streams for r in s]
    else:
        merged = []
        pos = [0] * len(streams)
        while any(p < len(s) for p, s in zip(pos, streams)):
            for i, s in enumerate(streams):
                merged.extend(s[pos[i]:pos[i] + chunk])
                pos[i] += chunk
    return merged


def generate_trace(spec: WorkloadSpec, seed: int = 0) -> Trace:
    """Deterministic trace for ``(spec, seed)``."""
    spec.validate()
    rng = np.random.default_rng(seed)
    extents = {o.oid: o for o in spec.objects}
    per_query = [_query_records(q, extents, rng) for q in spec.queries]
    merged = interleave(per_query, spec.interleave.get("mode", "round_robin"),
                        int(spec.interleave.get("chunk", 8)))
    records = [
        TraceRecord(i, r.stream_id, r.cls, r.oid, r.lbn, r.blocks, r.direction, r.time_hint,
                    r.eviction_scan)
        for i, r in enumerate(merged)
    ]
    trace = Trace(list(spec.objects), spec.plans(), records)
    trace.validate()
    return trace


def load_spec(path: str | Path) -> WorkloadSpec:
    return WorkloadSpec.load(path)
