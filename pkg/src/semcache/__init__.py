"""Semantics-driven priority caching for hybrid SSD/HDD storage.

Query plans drive a request classifier whose caching priorities steer a
priority-grouped SSD cache. A trace simulator compares it with device-only
and plain LRU setups.
"""
from .cache import BlockOutcome, CacheAction, CacheError, HybridCache
from .classify import (WRITE_BUFFER, ConcurrencyRegistry, PriorityPolicy, RequestClass,
                       classify_request, priority_for_level)
from .device import HDD_PROFILE, SSD_PROFILE, DeviceProfile, service_time
from .plan import (LevelAssignment, PlanOperator, QueryPlanTree, assign_levels,
                   compute_effective_levels, compute_raw_levels, random_access_summary)
from .sim import ComparisonReport, SimReport, StorageConfig, compare, run
from .workload import (ObjectExtent, Trace, TraceRecord, WorkloadSpec, generate_trace,
                       load_trace, save_trace)

__version__ = "0.1.0"
