"""Replay a three-stream workload under every storage configuration."""
# %%
import numpy as np

from semcache import StorageConfig, WorkloadSpec, compare, generate_trace
from semcache.cli import data_path

spec = WorkloadSpec.load(data_path("workloads/concurrent_mix.json"))
trace = generate_trace(spec, seed=0)
print(len(trace), "requests;", trace.class_totals())

# %%
base = StorageConfig("hstorage", cache_capacity_blocks=512)
result = compare([base.with_mode(m) for m in ("hdd_only", "lru", "hstorage", "ssd_only")], trace)
print(result.to_table())

# %% Where the difference comes from: hit ratio per stream.
for rep in result.reports:
    ratios = {sid: round(st.hit_ratio, 3) for sid, st in sorted(rep.per_stream.items())}
    print(f"{rep.name:<9}", ratios)

# %% Speedup over the disk-only baseline.
times = np.array([r.total_time_us for r in result.reports])
for rep, s in zip(result.reports, times[0] / times):
    print(f"{rep.name:<9} x{s:5.2f}")
