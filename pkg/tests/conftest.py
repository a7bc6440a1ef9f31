import time
from fractions import Fraction

import numpy as np
import pytest

from omrkit import kernels


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(params=sorted(kernels.backends()))
def backend(request):
    """Each available kernel backend module in turn."""
    return kernels.backends()[request.param]


def between_class_variance(pixels, t):
    """Exact between-class variance w0*w1*(mu0-mu1)^2 straight from the pixel list."""
    pixels = [int(p) for p in pixels]
    c0 = [p for p in pixels if p <= t]
    c1 = [p for p in pixels if p > t]
    if not c0 or not c1:
        return Fraction(0)
    n = len(pixels)
    w0, w1 = Fraction(len(c0), n), Fraction(len(c1), n)
    mu0, mu1 = Fraction(sum(c0), len(c0)), Fraction(sum(c1), len(c1))
    return w0 * w1 * (mu0 - mu1) ** 2


_ACCEPTANCE = []


class _Criterion:
    def __init__(self, key, title, budget):
        self.key, self.title, self.budget = key, title, budget

    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, exc_type, exc, tb):
        elapsed = time.perf_counter() - self.t0
        ok = exc_type is None and elapsed < self.budget
        note = "" if exc_type is None else f"  ({exc_type.__name__}: {str(exc).splitlines()[0] if str(exc) else ''})"
        if exc_type is None and not ok:
            note = f"  (over the {self.budget:g}s budget)"
        _ACCEPTANCE.append(f"{'PASS' if ok else 'FAIL'}  {self.key:<4} {self.title:<44} {elapsed:7.2f}s{note}")
        if exc_type is None and not ok:
            raise AssertionError(f"{self.key} took {elapsed:.2f}s, budget {self.budget:g}s")
        return False


@pytest.fixture
def criterion():
    """``with criterion("C1", "title", budget_seconds):`` records a pass/fail line."""
    return _Criterion


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE, key=lambda s: int(s.split()[1][1:])):
            terminalreporter.write_line(line)
