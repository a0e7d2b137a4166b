import pytest

from minwealth import ConsumptionSpec, MarketParams, solve

from golden import CANONICAL_CONSUMPTION, CANONICAL_MARKET

CASES = ("A", "B", "C")


def canonical(case: str) -> tuple[MarketParams, ConsumptionSpec]:
    c = CANONICAL_CONSUMPTION[case]
    market = MarketParams(rho=c["rho"], **CANONICAL_MARKET)
    return market, ConsumptionSpec(c_bar=c["c_bar"], kappa=c["kappa"], rho=c["rho"])


_SOLVED = {}


def solved(case: str):
    if case not in _SOLVED:
        _SOLVED[case] = solve(*canonical(case))
    return _SOLVED[case]


@pytest.fixture(params=CASES)
def case(request) -> str:
    return request.param


@pytest.fixture
def sol(case):
    return solved(case)


@pytest.fixture
def sol_a():
    return solved("A")


@pytest.fixture
def sol_b():
    return solved("B")


@pytest.fixture
def sol_c():
    return solved("C")
