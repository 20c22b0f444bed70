import pytest

from cbrw.model import CbrwParams, CookieLayout, OffspringDistribution

D = OffspringDistribution.from_mapping

# a hair below 1 so validation passes while every move goes right in practice
ALMOST_SURE = 1.0 - 2.0**-52

BRW_08 = D({1: 0.9, 2: 0.1})


def params(mu_c, p_c, mu_0=BRW_08, p_0=0.8, layout=CookieLayout.HALF_LINE):
    return CbrwParams(D(mu_c) if isinstance(mu_c, dict) else mu_c, p_c, mu_0, p_0, layout)


@pytest.fixture
def march():
    return params({1: 1}, ALMOST_SURE, D({1: 1}), 0.5)


@pytest.fixture
def strongly_recurrent():
    return params({4: 1}, 0.9)


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def verdict():
    """Record one pass/fail line for an acceptance criterion, then assert it."""

    def record(label: str, ok: bool, detail: str) -> None:
        line = f"[{'PASS' if ok else 'FAIL'}] {label}: {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
