import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import half_line_exhaustion, interval_system, real_line_exhaustion, square_system
from critlab.errors import (
    ConsistencyError,
    NonpositiveOperatorError,
    PolePlacementError,
    ResolutionError,
)
from critlab.green import (
    BALL,
    GREEN_LIMIT,
    GROUND_STATE,
    UNDECIDED,
    check_green_symmetry,
    dichotomy_verdict,
    green_bounded,
    green_minimal,
    minimal_growth_solution,
)
from critlab.geometry import coordinate_is
from critlab.operator import drift, laplace, shifted
from critlab.oracle import Oracle1DProblem, green1d


def test_dirichlet_kernel_on_coarse_mesh():
    g = green_bounded(interval_system(0.0, 1.0, 8), 0.25)
    assert g(np.array([[0.5]]))[0] == pytest.approx(0.125, abs=1e-14)
    assert g.pole_vertex == 2
    assert g.source_mode == "vertex-delta"


def test_neumann_dirichlet_kernel():
    s = interval_system(0.0, 1.0, 8, robin=coordinate_is(0.0))
    g = green_bounded(s, 0.25)
    assert g(np.array([[0.5]]))[0] == pytest.approx(0.5, abs=1e-13)
    assert g(np.array([[0.0]]))[0] == pytest.approx(0.75, abs=1e-13)


def test_green_matches_oracle_with_potential():
    from critlab.operator import CoefficientSet, OperatorSpec

    s = interval_system(0.0, 1.0, 200, op=OperatorSpec(CoefficientSet(c=2.0)))
    g = green_bounded(s, 0.3)
    ref = green1d(Oracle1DProblem((0.0, 1.0), c=2.0), 0.7, 0.3)
    assert g(np.array([[0.7]]))[0] == pytest.approx(ref, rel=1e-4)


def test_pole_errors():
    s = interval_system(0.0, 1.0, 8)
    with pytest.raises(PolePlacementError):
        green_bounded(s, 2.0)
    with pytest.raises(PolePlacementError):
        green_bounded(s, 0.0)
    with pytest.raises(PolePlacementError):
        green_bounded(s, 0.5, mode="nonsense")
    with pytest.raises(PolePlacementError):
        check_green_symmetry(s, 0.5, 0.51)


def test_nonpositive_operator():
    s = interval_system(0.0, math.pi, 100, op=shifted(laplace(), 2.0))
    with pytest.raises(NonpositiveOperatorError):
        green_bounded(s, 1.0)


def test_symmetry_drift():
    s = interval_system(0.0, 1.0, 50, op=drift([1.0]))
    assert check_green_symmetry(s, 0.2, 0.7) <= 1e-12
    a = green_bounded(s, 0.2)(np.array([[0.7]]))[0]
    b = green_bounded(s, 0.7)(np.array([[0.2]]))[0]
    assert abs(a - b) > 1e-3


def test_ball_source_unit_mass():
    s = interval_system(0.0, 1.0, 50)
    g = green_bounded(s, 0.5, mode=BALL, radius=0.1)
    assert g.source_mode == BALL
    # far from the source the ball average agrees with the point kernel
    point = green_bounded(s, 0.5)(np.array([[0.2]]))[0]
    assert g(np.array([[0.2]]))[0] == pytest.approx(point, rel=1e-10)


def test_green_positive_2d():
    s = square_system(1.0, 0.1)
    g = green_bounded(s, (0.5, 0.5))
    assert np.all(g.values.values > 0)
    assert check_green_symmetry(s, (0.5, 0.5), (0.3, 0.2)) <= 1e-12


def test_dichotomy_rule():
    assert dichotomy_verdict([math.nan, 0.004, 0.002], [0.1, 0.1]) == GREEN_LIMIT
    assert dichotomy_verdict([math.nan, 0.3, 0.2], [0.1, 0.01]) == GROUND_STATE
    assert dichotomy_verdict([math.nan, 0.3, 0.2], [0.1, 0.05]) == UNDECIDED
    assert dichotomy_verdict([math.nan, 0.03, 0.2], [0.1, 0.01]) == UNDECIDED
    assert dichotomy_verdict([math.nan, 0.001], [0.1]) == UNDECIDED


def test_half_line_green_values():
    t = green_minimal(half_line_exhaustion(), laplace(), 1.0, 2.0, 2.0, 4)
    # exact G_k(1, 2) on (0, 2^(k+1)) is 1 - 2^-k
    assert np.allclose(t.g_values, [1 - 2.0 ** -k for k in range(1, 5)], atol=1e-12)
    rows = t.csv_rows()
    assert [r[0] for r in rows] == [1, 2, 3, 4]
    assert math.isnan(rows[0][2])
    assert rows[-1][3] == t.verdict == UNDECIDED


def test_green_minimal_scale_invariance():
    a = green_minimal(half_line_exhaustion(), laplace(), 1.0, 2.0, 2.0, 3)
    b = green_minimal(half_line_exhaustion(), laplace(), 1.0, 2.0, 2.0, 3, scale=7.0)
    assert np.allclose(b.g_values, 7.0 * np.asarray(a.g_values))
    for p, q in zip(a.normalized_profiles, b.normalized_profiles):
        assert np.allclose(p, q, rtol=1e-12)


def test_green_minimal_probe_on_pole():
    with pytest.raises(PolePlacementError):
        green_minimal(half_line_exhaustion(), laplace(), 1.0, 1.0, 2.0, 2)


def test_green_minimal_monotone_check():
    # an exhaustion whose windows shrink violates monotonicity
    from critlab.geometry import ExhaustionSpec
    from conftest import HALF_LINE

    ex = ExhaustionSpec(HALF_LINE, lambda k: ((0.0, 16.0 / k),), lambda k: 0.125)
    with pytest.raises(ConsistencyError):
        green_minimal(ex, laplace(), 1.0, 2.0, 2.0, 3)


def test_minimal_growth_real_line():
    probes = np.array([1.5, 2.0, 3.0])
    t = minimal_growth_solution(real_line_exhaustion(0.01), laplace(), 0.0, 1.0, 4,
                                probes=probes)
    for k in (2, 3, 4):
        R = 2.0 ** k
        assert np.allclose(t.sampled[k - 1], (R - probes) / (R - 1.0), atol=1e-9)
    assert all(b < a for a, b in zip(t.increments[:-1], t.increments[1:]))
    # the left component is not normalised
    assert np.isnan(t.profiles[-1](np.array([[-1.0]]))[0])


def test_minimal_growth_resolution():
    with pytest.raises(ResolutionError):
        minimal_growth_solution(real_line_exhaustion(0.125), laplace(), 0.0, 1.0, 3)


@settings(max_examples=15, deadline=None)
@given(st.floats(0.05, 0.95), st.floats(0.05, 0.95))
def test_dirichlet_kernel_property(x, y):
    # P1 Green functions are nodally exact for -u'' in 1D
    n = 40
    s = interval_system(0.0, 1.0, n)
    xs, ys = round(x * n) / n, round(y * n) / n
    if xs in (0.0, 1.0) or ys in (0.0, 1.0):
        return
    g = green_bounded(s, ys)(np.array([[xs]]))[0]
    assert g == pytest.approx(min(xs, ys) * (1 - max(xs, ys)), abs=1e-12)


@settings(max_examples=15, deadline=None)
@given(st.floats(-4.0, 4.0), st.integers(1, 18), st.integers(1, 18))
def test_symmetry_property(b, i, j):
    if i == j:
        return
    s = interval_system(0.0, 1.0, 20, op=drift([b]))
    assert check_green_symmetry(s, i / 20, j / 20) <= 1e-10
