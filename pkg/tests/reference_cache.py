"""Brute-force reference model of the priority cache.

Keeps one flat record per cached block (priority, dirty flag, slot, and the
logical time it last entered or refreshed its group) and re-derives every
group, victim and free slot from those records on demand. Shares no code
with ``semcache.cache``.
"""

WB = "write_buffer"


class ReferenceCache:
    def __init__(self, capacity, N, t, b, flush_retains=False):
        self.capacity = capacity
        self.N = N
        self.t = t
        self.limit = int(b * capacity)
        self.flush_retains = flush_retains
        self.blocks = {}  # lbn -> {"prio", "dirty", "pbn", "stamp"}
        self.clock = 0

    def _now(self):
        self.clock += 1
        return self.clock

    def _caching(self, prio):
        return prio == WB or prio < self.t

    def groups(self):
        out = {}
        for lbn, b in self.blocks.items():
            out.setdefault(b["prio"], []).append((b["stamp"], lbn))
        return {
            (WB if k == WB else str(k)): [lbn for _, lbn in sorted(v, reverse=True)]
            for k, v in out.items()
        }

    def free_slots(self):
        used = {b["pbn"] for b in self.blocks.values()}
        return [p for p in range(self.capacity) if p not in used]

    def victim(self):
        cands = [(b["prio"], -b["stamp"], lbn) for lbn, b in self.blocks.items() if b["prio"] != WB]
        if not cands:
            return None
        return max(cands)[2]

    def _evict(self, lbn, acts):
        b = self.blocks.pop(lbn)
        if b["dirty"]:
            acts.append(("writeback", lbn))
        acts.append(("eviction", lbn))

    def _wb_count(self):
        return sum(1 for b in self.blocks.values() if b["prio"] == WB)

    def _flush(self, acts):
        wb = sorted((b["stamp"], lbn) for lbn, b in self.blocks.items() if b["prio"] == WB)
        for _, lbn in wb:
            b = self.blocks[lbn]
            if b["dirty"]:
                acts.append(("writeback", lbn))
            if self.flush_retains:
                b["dirty"] = False
                b["prio"] = max(self.t - 1, 1)
                b["stamp"] = self._now()
            else:
                del self.blocks[lbn]
            acts.append(("flush", lbn))

    def access(self, lbn, n, direction, prio):
        """Returns (served_from per block, flat action list)."""
        served, acts = [], []
        write = direction == "write"
        for x in range(lbn, lbn + n):
            b = self.blocks.get(x)
            if b is not None:
                if write:
                    b["dirty"] = True
                acts.append(("hit", x))
                served.append("cache")
                if self._caching(prio):
                    if b["prio"] != prio:
                        b["prio"] = prio
                        acts.append(("reallocation", x))
                    b["stamp"] = self._now()
                    if prio == WB and self._wb_count() > self.limit:
                        self._flush(acts)
                elif prio == self.N:
                    if not write:
                        b["dirty"] = False
                    if b["prio"] != self.N:
                        b["prio"] = self.N
                        b["stamp"] = self._now()
                        acts.append(("reallocation", x))
                elif b["prio"] != self.N:
                    b["stamp"] = self._now()
                continue

            admitted = False
            if self._caching(prio):
                if len(self.blocks) < self.capacity:
                    admitted = True
                else:
                    v = self.victim()
                    if v is not None and (prio == WB or self.blocks[v]["prio"] >= prio):
                        self._evict(v, acts)
                        admitted = True
            if admitted:
                pbn = self.free_slots()[0]
                self.blocks[x] = {"prio": prio, "dirty": write, "pbn": pbn, "stamp": self._now()}
                acts.append(("write_allocation" if write else "read_allocation", x))
                served.append("cache" if write else "lower_level")
                if prio == WB and self._wb_count() > self.limit:
                    self._flush(acts)
            else:
                acts.append(("bypass", x))
                served.append("lower_level")
        return served, acts

    def trim(self, lbn, n):
        acts = []
        for x in range(lbn, lbn + n):
            b = self.blocks.get(x)
            if b is None:
                continue
            b["dirty"] = False
            if b["prio"] != self.N:
                b["prio"] = self.N
                b["stamp"] = self._now()
                acts.append(("reallocation", x))
        return acts

    def snapshot(self):
        return {
            "groups": self.groups(),
            "index": {lbn: (b["pbn"], b["prio"], b["dirty"]) for lbn, b in sorted(self.blocks.items())},
            "free": self.free_slots(),
        }
