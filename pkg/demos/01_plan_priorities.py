"""Walk a query plan from levels to caching priorities."""
# %%
from semcache import ConcurrencyRegistry, PriorityPolicy, QueryPlanTree, classify_request
from semcache.cli import data_path
from semcache.plan import assign_levels, random_access_summary

plan = QueryPlanTree.load(data_path("three_table_plan.json"))
levels = assign_levels(plan)

# %% Raw levels count up from the deepest leaf; a hash or sort resets
# everything above it.
for op in plan.operators():
    print(f"{op.id:<10} {op.kind.value:<11} raw={levels.raw_level[op.id]} "
          f"effective={levels.effective_level[op.id]}")

# %% Random operators contribute their lowest level per object.
summary = random_access_summary(plan, levels)
print(summary.per_object_min_level, "span", (summary.l_low, summary.l_high))

# %% Map levels onto priorities 2..5. Sequential reads stay at N-1.
policy = PriorityPolicy(N=8, t=7, n1=2, n2=5)
registry = ConcurrencyRegistry()
registry.register_plan(plan)
for oid in ("t.a", "t.b", "t.c"):
    print(oid, "random ->", classify_request("random_read", oid, registry, policy))
print("t.b sequential ->", classify_request("sequential_read", "t.b", registry, policy))

# %% A second query that touches t.a higher up widens the global span,
# which shifts everyone else's mapping.
from semcache.plan import RandomAccessSummary  # noqa: E402

registry.register_query("other", RandomAccessSummary({"t.a": 6}, 6, 6))
print("span now", (registry.g_low, registry.g_high))
print("t.b random ->", classify_request("random_read", "t.b", registry, policy))
registry.unregister_query("other")
