import numpy as np
import pytest

from fppse.caseio import BUNDLED_CASES, parse_case
from fppse.network import Branch, Bus, BusKind, Network, build_admittance


def two_bus(y: complex = -1j, shunt: complex = 0j) -> Network:
    """Slack bus 1 and PQ bus 2 joined by one branch of series admittance ``y``."""
    return Network(
        (Bus(1, BusKind.SLACK), Bus(2, BusKind.PQ)),
        (Branch(1, 2, y, shunt, shunt),),
        name="two_bus",
    )


@pytest.fixture
def net2():
    return two_bus()


@pytest.fixture(scope="session")
def net14():
    return parse_case("case14")


@pytest.fixture(scope="session")
def y14(net14):
    return build_admittance(net14)


@pytest.fixture(scope="session")
def all_cases():
    return {name: parse_case(name) for name in BUNDLED_CASES}


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


def random_voltage(rng, n, spread=0.1):
    mag = rng.uniform(1 - spread, 1 + spread, n)
    return mag * np.exp(1j * rng.uniform(-np.pi, np.pi, n))


# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def acceptance_report():
    def report(number: int, title: str, passed: bool, detail: str = "") -> None:
        line = f"criterion {number} [{'PASS' if passed else 'FAIL'}] {title}" + (f": {detail}" if detail else "")
        ACCEPTANCE_LINES.append(line)
        print(line)

    return report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
