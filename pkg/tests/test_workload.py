import json
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from semcache.classify import RequestClass
from semcache.workload import (ObjectExtent, Trace, TraceFormatError, TraceRecord, WorkloadError,
                               WorkloadSpec, generate_trace, interleave, load_trace, save_trace,
                               zipf_pmf)


def spec(objects, phases_by_query, interleave_=None):
    doc = {
        "format_version": 1,
        "objects": objects,
        "queries": [{"query_id": q, "phases": ph} for q, ph in phases_by_query.items()],
    }
    if interleave_:
        doc["interleave"] = interleave_
    return WorkloadSpec.from_dict(doc)


def obj(oid, start, length, kind="table"):
    return {"oid": oid, "kind": kind, "start_lbn": start, "length_blocks": length}


def test_scan_covers_extent_in_order():
    s = spec([obj("t", 0, 100)], {"q": [{"type": "scan", "object": "t", "chunk_blocks": 8}]})
    trace = generate_trace(s, 0)
    blocks = [b for r in trace for b in range(r.lbn, r.lbn + r.blocks)]
    assert blocks == list(range(100))
    assert {r.cls for r in trace} == {RequestClass.SEQUENTIAL_READ}
    assert trace.records[-1].blocks == 100 % 8


def test_temp_lifecycle_volumes():
    s = spec([obj("tmp", 500, 10, "temp")], {"q": [
        {"type": "temp_generate", "object": "tmp", "chunk_blocks": 1},
        {"type": "temp_consume", "object": "tmp", "chunk_blocks": 1, "passes": 2},
        {"type": "temp_delete", "object": "tmp"},
    ]})
    trace = generate_trace(s, 3)
    counts = Counter(r.cls.value for r in trace)
    assert counts == {"temp_write": 10, "temp_read": 20, "temp_delete": 1}
    last = trace.records[-1]
    assert (last.lbn, last.blocks, last.direction) == (500, 10, None)
    assert trace.class_totals() == {"temp_delete": 10, "temp_read": 20, "temp_write": 10}
    assert trace.class_totals() == s.expected_volumes()


def test_eviction_scan_delete():
    s = spec([obj("tmp", 0, 16, "temp")], {"q": [
        {"type": "temp_generate", "object": "tmp"},
        {"type": "temp_delete", "object": "tmp", "method": "scan"},
    ]})
    recs = generate_trace(s).records
    assert [r.eviction_scan for r in recs] == [False, False, True, True]


def test_zipf_head_frequency():
    n, ops = 1000, 100_000
    s = spec([obj("t", 0, n)], {"q": [{"type": "random", "object": "t", "n_ops": ops, "skew": 0.99}]})
    trace = generate_trace(s, 7)
    top = Counter(r.lbn for r in trace).most_common(1)[0]
    pmf = zipf_pmf(n, 0.99)
    assert top[0] == 0
    assert abs(top[1] / ops - pmf[0]) <= 0.10 * pmf[0]


def test_index_precedes_table_block():
    s = spec([obj("t", 0, 100), obj("i", 100, 10, "index")],
             {"q": [{"type": "random", "object": "t", "index": "i", "n_ops": 50}]})
    recs = generate_trace(s, 1).records
    assert len(recs) == 100
    for a, b in zip(recs[::2], recs[1::2]):
        assert a.oid == "i" and b.oid == "t"
        assert a.lbn == 100 + (b.lbn * 10) // 100


def test_generation_is_deterministic(load_workload):
    s = load_workload("concurrent_mix")
    a, b = generate_trace(s, 5), generate_trace(s, 5)
    assert [r.to_dict() for r in a] == [r.to_dict() for r in b]
    c = generate_trace(s, 6)
    assert [r.to_dict() for r in a] != [r.to_dict() for r in c]


def test_round_trip(tmp_path, load_workload):
    trace = generate_trace(load_workload("temp_with_scan"), 2)
    path = tmp_path / "t.jsonl"
    save_trace(trace, path)
    again = load_trace(path)
    assert [r.to_dict() for r in again] == [r.to_dict() for r in trace]
    assert again.header() == trace.header()
    save_trace(again, tmp_path / "u.jsonl")
    assert (tmp_path / "u.jsonl").read_bytes() == path.read_bytes()


def _write(tmp_path, lines):
    p = tmp_path / "bad.jsonl"
    p.write_text("\n".join(json.dumps(x) if not isinstance(x, str) else x for x in lines) + "\n")
    return p


GOOD = {"seq": 0, "time_hint": None, "stream_id": "s", "class": "sequential_read", "oid": "t",
        "lbn": 0, "blocks": 1, "direction": "read", "eviction_scan": False}


def test_unknown_fields_rejected(tmp_path):
    p = _write(tmp_path, [GOOD, dict(GOOD, seq=1, colour="red")])
    with pytest.raises(TraceFormatError, match="line 2.*unknown fields"):
        load_trace(p)


def test_malformed_lines_report_line_numbers(tmp_path):
    with pytest.raises(TraceFormatError, match="line 3"):
        load_trace(_write(tmp_path, [GOOD, dict(GOOD, seq=1), "{not json"]))
    with pytest.raises(TraceFormatError, match="line 1"):
        load_trace(_write(tmp_path, [dict(GOOD, direction="write")]))
    with pytest.raises(TraceFormatError, match="line 1"):
        load_trace(_write(tmp_path, [dict(GOOD, blocks=0)]))
    with pytest.raises(TraceFormatError):
        load_trace(_write(tmp_path, [dict(GOOD, **{"class": "teleport"})]))


def test_empty_trace_file(tmp_path):
    p = tmp_path / "empty.jsonl"
    p.write_text("")
    assert len(load_trace(p)) == 0


def test_out_of_extent_record_rejected(tmp_path):
    header = {"format_version": 1, "objects": [obj("t", 0, 10)], "plans": {}}
    with pytest.raises(WorkloadError):
        load_trace(_write(tmp_path, [header, dict(GOOD, lbn=8, blocks=4)]))


def test_spec_validation():
    with pytest.raises(WorkloadError, match="overlap"):
        spec([obj("a", 0, 10), obj("b", 5, 10)], {})
    with pytest.raises(WorkloadError):
        spec([obj("a", 0, 10)], {"q": [{"type": "scan", "object": "zzz"}]})
    with pytest.raises(WorkloadError, match="out of order"):
        spec([obj("tmp", 0, 4, "temp")], {"q": [{"type": "temp_consume", "object": "tmp"}]})
    with pytest.raises(WorkloadError, match="never deleted"):
        spec([obj("tmp", 0, 4, "temp")], {"q": [{"type": "temp_generate", "object": "tmp"}]})
    with pytest.raises(WorkloadError, match="unknown"):
        spec([obj("a", 0, 10)], {"q": [{"type": "scan", "object": "a", "speed": 3}]})
    with pytest.raises(WorkloadError):
        WorkloadSpec.from_dict({"objects": [], "queries": [], "extra": 1})
    with pytest.raises(WorkloadError):
        ObjectExtent("x", "view", 0, 1)


def test_bundled_specs_validate(load_workload):
    for name in ("scan_dominant", "temp_lifecycle", "temp_with_scan", "random_two_priority",
                 "concurrent_mix", "shared_table_updates"):
        s = load_workload(name)
        assert generate_trace(s, 0).class_totals() == s.expected_volumes()


def _rec(sid, i):
    return TraceRecord(0, sid, RequestClass.SEQUENTIAL_READ, "t", i, 1, "read")


@settings(max_examples=100, deadline=None)
@given(st.lists(st.integers(0, 30), min_size=1, max_size=5), st.integers(1, 9),
       st.sampled_from(["serial", "round_robin"]))
def test_interleave_is_order_preserving_permutation(sizes, chunk, mode):
    streams = [[_rec(f"s{k}", i) for i in range(n)] for k, n in enumerate(sizes)]
    merged = interleave(streams, mode, chunk)
    assert sorted((r.stream_id, r.lbn) for r in merged) == \
        sorted((r.stream_id, r.lbn) for s in streams for r in s)
    for k in range(len(sizes)):
        mine = [r.lbn for r in merged if r.stream_id == f"s{k}"]
        assert mine == list(range(sizes[k]))


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 500), st.floats(0.0, 2.0))
def test_zipf_pmf_is_a_distribution(n, s):
    p = zipf_pmf(n, s)
    assert p.shape == (n,) and np.isclose(p.sum(), 1.0)
    assert np.all(np.diff(p) <= 1e-15)


def test_trace_validation_checks_sequence():
    t = Trace([ObjectExtent("t", "table", 0, 10)], {}, [_rec("s", 0), _rec("s", 1)])
    with pytest.raises(WorkloadError):
        t.validate()
