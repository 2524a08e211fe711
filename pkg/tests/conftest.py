import pytest

from expert_timing.solver import SolverConfig, solve

ACCEPTANCE_LINES: list[str] = []


def record(criterion: int, passed: bool, detail: str) -> None:
    ACCEPTANCE_LINES.append(f"criterion {criterion:>2}: {'PASS' if passed else 'FAIL'}  {detail}")
    print(ACCEPTANCE_LINES[-1])


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split(":")[0].split()[1])):
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def table10():
    return solve(SolverConfig(T=10, gamma=0.01, store_full_grid=True))


@pytest.fixture(scope="session")
def table100():
    return solve(SolverConfig(T=100, gamma=0.01, store_full_grid=True))


@pytest.fixture(scope="session")
def table1000():
    return solve(SolverConfig(T=1000, gamma=0.02))


@pytest.fixture(scope="session")
def table10k():
    return solve(SolverConfig(T=10_000, gamma=0.1))
