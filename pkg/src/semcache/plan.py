"""Query plan trees and operator levels.

A plan is a tree of :class:`PlanOperator` nodes. Levels are counted upward
from the deepest leaf (level 0) to the root. Blocking operators (hash,
sort) force everything outside their own subtree to wait for them, so those
operators are re-leveled as if the blocking operator sat at level 0.

Plans are read from JSON documents with this node layout::

    {
      "id": "n1",                    # unique within the tree
      "kind": "index_scan",          # seq_scan | index_scan | hash | sort
                                     # | aggregate | join | other
      "object": "lineitem",          # table accessed (scans only)
      "index": "lineitem_pkey",      # index used (index scans, optional)
      "pattern": "random",           # sequential | random | none (optional)
      "blocking": false,             # optional, forced true for hash/sort
      "children": [ ... ]
    }

Unknown ``kind`` values are read as ``other``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterator


class PlanError(ValueError):
    """Raised for malformed plan trees."""


class OperatorKind(str, Enum):
    SEQ_SCAN = "seq_scan"
    INDEX_SCAN = "index_scan"
    HASH = "hash"
    SORT = "sort"
    AGGREGATE = "aggregate"
    JOIN = "join"
    OTHER = "other"


class AccessPattern(str, Enum):
    SEQUENTIAL = "sequential"
    RANDOM = "random"
    NONE = "none"


_BLOCKING_KINDS = {OperatorKind.HASH, OperatorKind.SORT}
_DEFAULT_PATTERN = {
    OperatorKind.SEQ_SCAN: AccessPattern.SEQUENTIAL,
    OperatorKind.INDEX_SCAN: AccessPattern.RANDOM,
}


@dataclass
class PlanOperator:
    id: str
    kind: OperatorKind = OperatorKind.OTHER
    accessed_object: str | None = None
    index_object: str | None = None
    access_pattern: AccessPattern = AccessPattern.NONE
    blocking: bool = False
    children: list["PlanOperator"] = field(default_factory=list)

    def __post_init__(self):
        self.kind = OperatorKind(self.kind)
        self.access_pattern = AccessPattern(self.access_pattern)
        if self.kind in _BLOCKING_KINDS:
            self.blocking = True
        if self.access_pattern is AccessPattern.SEQUENTIAL and self.kind is not OperatorKind.SEQ_SCAN:
            raise PlanError(f"operator {self.id}: sequential access requires seq_scan")
        if self.access_pattern is AccessPattern.RANDOM and self.kind is not OperatorKind.INDEX_SCAN:
            raise PlanError(f"operator {self.id}: random access requires index_scan")
        if (self.accessed_object is not None) != (self.access_pattern is not AccessPattern.NONE):
            raise PlanError(f"operator {self.id}: object must be given iff the operator accesses data")
        if self.index_object is not None and self.access_pattern is not AccessPattern.RANDOM:
            raise PlanError(f"operator {self.id}: only index scans carry an index object")

    @property
    def objects(self) -> tuple[str, ...]:
        """Objects touched by this operator (table first, then its index)."""
        return tuple(o for o in (self.accessed_object, self.index_object) if o is not None)

    def walk(self) -> Iterator["PlanOperator"]:
        stack = [self]
        while stack:
            op = stack.pop()
            yield op
            stack.extend(reversed(op.children))

    @classmethod
    def from_dict(cls, node: dict) -> "PlanOperator":
        if "id" not in node:
            raise PlanError("plan node without id")
        try:
            kind = OperatorKind(node.get("kind", "other"))
        except ValueError:
            kind = OperatorKind.OTHER
        pattern = node.get("pattern")
        if pattern is None:
            pattern = _DEFAULT_PATTERN.get(kind, AccessPattern.NONE)
        if kind in _BLOCKING_KINDS and node.get("blocking") is False:
            raise PlanError(f"operator {node['id']}: {kind.value} is always blocking")
        return cls(
            id=str(node["id"]),
            kind=kind,
            accessed_object=node.get("object"),
            index_object=node.get("index"),
            access_pattern=pattern,
            blocking=bool(node.get("blocking", False)),
            children=[cls.from_dict(c) for c in node.get("children", [])],
        )

    def to_dict(self) -> dict:
        node = {"id": self.id, "kind": self.kind.value}
        if self.accessed_object is not None:
            node["object"] = self.accessed_object
        if self.index_object is not None:
            node["index"] = self.index_object
        node["pattern"] = self.access_pattern.value
        node["blocking"] = self.blocking
        node["children"] = [c.to_dict() for c in self.children]
        return node


@dataclass
class QueryPlanTree:
    query_id: str
    root: PlanOperator | None

    def __post_init__(self):
        if self.root is None:
            return
        seen: set[str] = set()
        for op in self.root.walk():
            if op.id in seen:
                raise PlanError(f"duplicate operator id {op.id!r} in plan {self.query_id}")
            seen.add(op.id)

    def operators(self) -> list[PlanOperator]:
        return [] if self.root is None else list(self.root.walk())

    @classmethod
    def from_dict(cls, doc: dict, query_id: str | None = None) -> "QueryPlanTree":
        """Build a tree from ``{"query_id": ..., "root": {...}}`` or a bare root node."""
        if "root" in doc:
            qid = query_id if query_id is not None else doc.get("query_id", "q")
            root = doc["root"]
        else:
            qid = query_id if query_id is not None else "q"
            root = doc
        return cls(str(qid), PlanOperator.from_dict(root) if root else None)

    def to_dict(self) -> dict:
        return {"query_id": self.query_id, "root": self.root.to_dict() if self.root else None}

    @classmethod
    def load(cls, path) -> "QueryPlanTree":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


@dataclass
class LevelAssignment:
    raw_level: dict[str, int]
    effective_level: dict[str, int]
    l_low: int = 0
    l_high: int = 0

    @property
    def l_gap(self) -> int:
        return self.l_high - self.l_low


@dataclass
class RandomAccessSummary:
    per_object_min_level: dict[str, int]
    l_low: int = 0
    l_high: int = 0
    has_random: bool = True


def _random_span(tree: QueryPlanTree, levels: dict[str, int]) -> tuple[int, int]:
    vals = [levels[op.id] for op in tree.operators() if op.access_pattern is AccessPattern.RANDOM]
    if not vals:
        return 0, 0
    return min(vals), max(vals)


def compute_raw_levels(tree: QueryPlanTree) -> LevelAssignment:
    """Level every operator as ``height - depth``.

    The effective levels of the returned assignment are a copy of the raw
    ones; pass it through :func:`compute_effective_levels` to account for
    blocking operators.
    """
    if tree.root is None:
        raise PlanError("empty plan")
    depth: dict[str, int] = {}
    stack = [(tree.root, 0)]
    while stack:
        op, d = stack.pop()
        depth[op.id] = d
        stack.extend((c, d + 1) for c in op.children)
    height = max(depth.values())
    raw = {oid: height - d for oid, d in depth.items()}
    lo, hi = _random_span(tree, raw)
    return LevelAssignment(raw, dict(raw), lo, hi)


def compute_effective_levels(tree: QueryPlanTree, raw: LevelAssignment) -> LevelAssignment:
    """Re-level operators that have to wait for a blocking operator.

    Every operator outside a blocking operator's subtree runs after it, so
    its level is reduced by the blocking operator's raw level. When several
    blocking operators dominate an operator the largest raw level is used.
    """
    if tree.root is None:
        raise PlanError("empty plan")
    raw_levels = raw.raw_level
    ops = tree.operators()
    # (raw level, ids inside the subtree) per blocking operator
    blockers = [
        (raw_levels[op.id], {d.id for d in op.walk()})
        for op in ops
        if op.blocking and op is not tree.root
    ]
    effective = {}
    for op in ops:
        shift = max((lvl for lvl, inside in blockers if op.id not in inside), default=0)
        effective[op.id] = max(raw_levels[op.id] - shift, 0)
    lo, hi = _random_span(tree, effective)
    return LevelAssignment(dict(raw_levels), effective, lo, hi)


def assign_levels(tree: QueryPlanTree) -> LevelAssignment:
    return compute_effective_levels(tree, compute_raw_levels(tree))


def random_access_summary(tree: QueryPlanTree, levels: LevelAssignment | None = None) -> RandomAccessSummary:
    """Lowest effective level of the random operators touching each object.

    An index scan counts for both its table and its index. Sequential scans
    are ignored here even when they touch the same object.
    """
    if levels is None:
        levels = assign_levels(tree)
    per_object: dict[str, int] = {}
    for op in tree.operators():
        if op.access_pattern is not AccessPattern.RANDOM:
            continue
        lvl = levels.effective_level[op.id]
        for oid in op.objects:
            per_object[oid] = min(lvl, per_object.get(oid, lvl))
    if not per_object:
        return RandomAccessSummary({}, 0, 0, has_random=False)
    lo, hi = _random_span(tree, levels.effective_level)
    return RandomAccessSummary(per_object, lo, hi)


def load_plan(path: str | Path) -> QueryPlanTree:
    return QueryPlanTree.load(path)
