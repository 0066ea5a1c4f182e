import math

import numpy as np
import pytest

from critlab.discretize import assemble
from critlab.geometry import (
    DomainSpec,
    ExhaustionSpec,
    build_interval_mesh,
    build_polygon_mesh,
    coordinate_is,
    geometric_window,
    tag_boundary,
)
from critlab.operator import laplace

PI = math.pi


def interval_system(a, b, n, op=None, robin=None):
    spec = DomainSpec.make_interval(a, b, robin=robin or (lambda p: False))
    return assemble(tag_boundary(build_interval_mesh(a, b, n), spec), op or laplace())


def square_system(side, h, op=None, robin=None):
    spec = DomainSpec.make_polygon([(0, 0), (side, 0), (side, side), (0, side)],
                                   robin=robin or (lambda p: False))
    return assemble(tag_boundary(build_polygon_mesh(spec.polygon, h), spec), op or laplace(2))


HALF_LINE = DomainSpec.make_interval(0.0, math.inf)
REAL_LINE = DomainSpec.make_interval(-math.inf, math.inf)


def half_line_exhaustion(h=0.125):
    """(0, 2^(k+1)) with Dirichlet at 0 and a cut at the right end."""
    return ExhaustionSpec(HALF_LINE, lambda k: ((0.0, 2.0 ** (k + 1)),), lambda k: h)


def real_line_exhaustion(h=0.125):
    return ExhaustionSpec(REAL_LINE, lambda k: ((-(2.0 ** k), 2.0 ** k),), lambda k: h)


def hardy_exhaustion(eta=0.02, base=16.0):
    """(base^-k, base^k) on a geometric lattice exp(j * eta)."""
    return ExhaustionSpec(HALF_LINE, geometric_window(base), lambda k: eta, grading="geometric")


def hardy_supercritical_exhaustion(h=0.01):
    return ExhaustionSpec(HALF_LINE, lambda k: ((1.0 / k, 40.0 * k),), lambda k: h)


@pytest.fixture
def robin_left():
    return coordinate_is(0.0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# acceptance lines collected by tests/test_acceptance.py
ACCEPTANCE = {}


def record(number, passed, detail):
    line = f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}"
    ACCEPTANCE[number] = line
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for number in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[number])
