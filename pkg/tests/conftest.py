import functools

import pytest

from microplan.grid_model import builtin_case33
from microplan.planner import solve_two_stage

BETAS = (0.0, 0.2, 0.4, 0.6, 0.8, 1.0)
LOADS = (1.0, 1.2, 1.4, 1.6, 1.8, 2.0)


@functools.lru_cache(maxsize=None)
def case33(beta=0.4, load=1.0, price=1.0, lines=True, dv=None):
    p = builtin_case33().with_economics(critical_ratio=beta)
    if load != 1.0 or price != 1.0:
        p = p.scaled(load=load, price=price)
    if not lines:
        p = p.without_candidate_lines()
    if dv is not None:
        p = p.with_dv_bounds(dv)
    return p


@functools.lru_cache(maxsize=None)
def plan33(beta=0.4, load=1.0, price=1.0, lines=True, dv=None):
    return solve_two_stage(case33(beta, load, price, lines, dv))


@pytest.fixture(scope="session")
def base33():
    return case33()


@pytest.fixture(scope="session")
def base_plan33():
    return plan33()
