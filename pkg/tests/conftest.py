"""Shared high-precision oracles.

Oracles use mpmath at 50 digits and are independent of the production code
paths.  Values they produced once are frozen as literals in the tests; the
oracles themselves are also exercised live on a few points.
"""

from __future__ import annotations

import mpmath as mp
import pytest

mp.mp.dps = 50


def prabhakar_oracle(alpha, beta, gamma, z) -> float:
    a, b, g, zz = (mp.mpf(str(v)) for v in (alpha, beta, gamma, z))
    val = mp.nsum(lambda s: mp.rf(g, s) * zz**s / (mp.factorial(s) * mp.gamma(a * s + b)), [0, mp.inf])
    return float(val)


def taylor_oracle(f, n: int) -> list[float]:
    """First ``n + 1`` Taylor coefficients of ``f`` at ``u = 0``."""
    return [float(c) for c in mp.taylor(f, 0, n)]


@pytest.fixture(scope="session")
def oracle():
    class _O:
        prabhakar = staticmethod(prabhakar_oracle)
        taylor = staticmethod(taylor_oracle)

    return _O


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def criterion():
    """Record one acceptance line and assert it."""

    def report(number: int, passed: bool, detail: str) -> None:
        line = f"criterion {number}: {'PASS' if passed else 'FAIL'} {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        assert passed, line

    return report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
