"""Drive the priority cache by hand and watch what it does."""
# %%
from semcache import WRITE_BUFFER, HybridCache, PriorityPolicy

cache = HybridCache(capacity_blocks=4, policy=PriorityPolicy(N=8, t=7, b=0.5, n1=2, n2=6))


def show(label, outcomes):
    acts = [f"{a.action.value}({a.lbn})" for o in outcomes for a in o.actions]
    print(f"{label:<34} {' '.join(acts)}")
    print(" " * 35, cache.snapshot()["groups"])


# %% Fill the cache with blocks of mixed priority.
show("read 0-1 at priority 2", cache.access(0, 2, "read", 2))
show("read 2-3 at priority 5", cache.access(2, 2, "read", 5))

# %% A full cache evicts from the largest-numbered group first.
show("read 10 at priority 3", cache.access(10, 1, "read", 3))

# %% Priority 4 may displace the last priority-5 block. A hit at a new
# priority moves the block to that group.
show("read 11 at priority 4", cache.access(11, 1, "read", 4))
show("read 11 at priority 1", cache.access(11, 1, "read", 1))

# %% Now every cached block outranks priority 4, so the request bypasses.
show("read 12 at priority 4", cache.access(12, 1, "read", 4))

# %% Sequential data (N-1) is served from cache on a hit but never admitted.
show("read 50 at priority 7", cache.access(50, 1, "read", 7))

# %% Temp data deleted: blocks drop to group N and leave first, clean.
cache.access(0, 1, "write", 1)
print("trim 0..1 ->", [r.action.value for r in cache.trim(0, 2)])
show("read 20 at priority 6", cache.access(20, 1, "read", 6))

# %% Updates accumulate in the write buffer and flush past b% of capacity.
show("update 30", cache.access(30, 1, "write", WRITE_BUFFER))
show("update 31", cache.access(31, 1, "write", WRITE_BUFFER))
show("update 32", cache.access(32, 1, "write", WRITE_BUFFER))
