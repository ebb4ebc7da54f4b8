import pytest

import taskzoo
from evoplan.search import optimal_cost_oracle


@pytest.fixture
def flip_task():
    return taskzoo.flip_task()


@pytest.fixture
def truck_package():
    return taskzoo.truck_package_task()


@pytest.fixture
def unsolvable():
    return taskzoo.unsolvable_task()


@pytest.fixture(params=sorted(taskzoo.ENUMERABLE_FIXTURES))
def enumerable_task(request):
    """Each small fixture in turn, for sweep-style property tests."""
    return taskzoo.ENUMERABLE_FIXTURES[request.param]()


_oracle_cache = {}


def oracle_for(name: str):
    """Cached exact cost map for a named fixture."""
    if name not in _oracle_cache:
        task = taskzoo.ENUMERABLE_FIXTURES[name]()
        _oracle_cache[name] = (task, optimal_cost_oracle(task))
    return _oracle_cache[name]
