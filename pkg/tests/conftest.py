import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from semcache.cli import data_path  # noqa: E402
from semcache.plan import QueryPlanTree  # noqa: E402
from semcache.workload import WorkloadSpec  # noqa: E402


@pytest.fixture
def example_plan():
    return QueryPlanTree.load(data_path("three_table_plan.json"))


@pytest.fixture
def load_workload():
    def _load(name):
        return WorkloadSpec.load(data_path(f"workloads/{name}.json"))
    return _load
