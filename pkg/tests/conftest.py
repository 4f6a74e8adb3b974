"""Shared oracles.

``brute_force_loop`` re-implements the double-integrator closed loop in
original coordinates with plain arithmetic, without any lifting, so it can
be compared against the lifted implementation.
"""

import math

import pytest


def brute_force_loop(x1, x2, x1_bar, x2_bar, cmd, steps, rho1=0.0):
    """Return lists of (x1, x2) states and applied u for the switching policy."""
    xs, us, rhos = [(x1, x2)], [], []
    switched = False
    for k in range(steps):
        d0, d1, d2 = cmd(k), cmd(k + 1), cmd(k + 2)
        e1 = (x1 - d0) / x1_bar
        x2d = rho1 * x1_bar * e1 + d1 - x1
        e2 = (x2 - x2d) / x2_bar
        x1n = x1 + x2
        e1n = (x1n - d1) / x1_bar
        x2dn = rho1 * x1_bar * e1n + d2 - x1n
        dx = x2 + x1 - d0
        rho2 = 0.0 if (switched or abs(dx) < x2_bar) else 1.0 - x2_bar / (2.0 * abs(dx))
        switched = switched or rho2 == 0.0
        u = x2_bar * rho2 * e2 + x2dn - x2
        x1, x2 = x1n, x2 + u
        xs.append((x1, x2))
        us.append(u)
        rhos.append(rho2)
    return xs, us, rhos


@pytest.fixture
def oracle_loop():
    return brute_force_loop


def close(a, b, tol):
    return abs(a - b) <= tol * max(1.0, abs(a), abs(b))


def isclose_all(xs, ys, tol):
    return all(close(a, b, tol) for a, b in zip(xs, ys)) and len(xs) == len(ys)


def finite(v):
    return v is not None and math.isfinite(v)


# -- acceptance summary ---------------------------------------------------------

ACCEPTANCE_LINES = []


@pytest.fixture
def criterion():
    """Record one pass/fail line per acceptance criterion."""

    def record(number, title, passed, detail):
        line = f"criterion {number} [{'PASS' if passed else 'FAIL'}] {title}: {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
