import cmath

import numpy as np
import pytest


def naive_dft(x):
    """Textbook double loop, independent of the package's transform code."""
    k = len(x)
    return [sum(x[n] * cmath.exp(-2j * cmath.pi * j * n / k) for n in range(k)) for j in range(k)]


def direct_correlation(a, b):
    k = len(a)
    return [sum(a[i] * b[(i + s) % k] for i in range(k)) for s in range(k)]


def central_difference(f, x, h=1e-5):
    """Derivative of scalar f at every coordinate of array x (modified in place, restored)."""
    out = np.zeros_like(x)
    flat = x.reshape(-1)
    g = out.reshape(-1)
    for i in range(flat.size):
        old = flat[i]
        flat[i] = old + h
        up = f()
        flat[i] = old - h
        down = f()
        flat[i] = old
        g[i] = (up - down) / (2 * h)
    return out


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


_VERDICTS = []


@pytest.fixture
def verdict():
    """Record (and print) one PASS/FAIL line for an acceptance criterion."""
    def record(name, ok, detail=""):
        line = f"{'PASS' if ok else 'FAIL'}  {name}  {detail}".rstrip()
        _VERDICTS.append(line)
        print(line)
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if _VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in _VERDICTS:
            terminalreporter.write_line(line)
