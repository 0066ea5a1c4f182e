import dataclasses

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import interval_system
from critlab.errors import ConfigError, EllipticityError, PositivityError, RobinDataError
from critlab.operator import (
    CoefficientSet,
    OperatorSpec,
    RobinData,
    adjoint,
    check_ellipticity,
    drift,
    ground_state_transform_matrices,
    hardy,
    laplace,
    shifted,
)
from critlab.spectral import principal_eigen

PTS = np.array([[0.1, 0.2], [0.5, 0.5], [2.0, -1.0]])


def test_ellipticity_identity():
    assert check_ellipticity(CoefficientSet(), PTS) == pytest.approx(1.0)


def test_ellipticity_diagonal():
    A = np.diag([2.0, 0.5])
    assert check_ellipticity(CoefficientSet(A=A), PTS) == pytest.approx(2.0)


def test_ellipticity_indefinite():
    with pytest.raises(EllipticityError) as info:
        check_ellipticity(CoefficientSet(A=np.array([[1.0, 2.0], [2.0, 1.0]])), PTS)
    assert info.value.point is not None


def test_ellipticity_nonsymmetric():
    with pytest.raises(EllipticityError):
        check_ellipticity(CoefficientSet(A=np.array([[1.0, 0.5], [0.0, 1.0]])), PTS)


def test_adjoint_swaps_drift_slots():
    op = OperatorSpec(CoefficientSet(bt=np.array([1.0]), bb=np.array([3.0])))
    adj = adjoint(op)
    assert adj.coefficients.bt is op.coefficients.bb
    assert adj.coefficients.bb is op.coefficients.bt


def test_adjoint_involution():
    op = drift([1.0, -2.0], dim=2)
    assert adjoint(adjoint(op)) == op


def test_drift_dimension_check():
    with pytest.raises(ConfigError):
        drift([1.0, 2.0], dim=1)


def test_shifted_potential():
    op = shifted(hardy(0.25), 2.0)
    x = np.array([[0.5], [2.0]])
    assert np.allclose(op.potential(x), [-1.0 - 2.0, -0.0625 - 2.0])
    assert shifted(op, 1.0).shift == 3.0


def test_symmetry_flag():
    x = np.array([[0.2], [0.7]])
    assert laplace().is_symmetric_at(x)
    assert not drift([1.0]).is_symmetric_at(x)
    sym = OperatorSpec(CoefficientSet(bt=np.array([1.0]), bb=np.array([1.0])))
    assert sym.is_symmetric_at(x)


def test_robin_ratio_requires_positive_beta():
    with pytest.raises(RobinDataError):
        RobinData(beta=0.0, gamma=1.0).ratio(np.zeros((1, 1)))
    assert RobinData(beta=2.0, gamma=1.0).ratio(np.zeros((2, 1))).tolist() == [0.5, 0.5]


def test_with_potential_adds():
    op = laplace().with_potential(lambda x: x[:, 0])
    assert np.allclose(op.potential(np.array([[3.0]])), [3.0])


def test_gst_constant_weight_is_identity():
    s = interval_system(0.0, 1.0, 20)
    t = ground_state_transform_matrices(s, np.ones(s.n_free))
    assert abs(t.K - s.K).max() == 0.0


def test_gst_quadratic_identity():
    s = interval_system(0.0, np.pi, 200)
    pair = principal_eigen(s)
    u = pair.u_c.values
    t = ground_state_transform_matrices(s, u)
    one = np.ones(s.n_free)
    lhs = one @ (t.K @ one)
    rhs = pair.lambda_c * (u @ (s.M @ u))
    assert lhs == pytest.approx(rhs, rel=1e-9)


def test_gst_requires_positive():
    s = interval_system(0.0, 1.0, 10)
    u = np.ones(s.n_free)
    u[3] = 0.0
    with pytest.raises(PositivityError):
        ground_state_transform_matrices(s, u)


@settings(max_examples=20, deadline=None)
@given(st.lists(st.floats(0.1, 10.0), min_size=9, max_size=9))
def test_gst_congruence_property(vals):
    s = interval_system(0.0, 1.0, 10, op=drift([0.7]))
    u = np.asarray(vals)
    t = ground_state_transform_matrices(s, u)
    D = np.diag(u)
    assert np.allclose(t.K.toarray(), D @ s.K.toarray() @ D, rtol=1e-12, atol=1e-12)
    assert np.allclose(t.M.toarray(), D @ s.M.toarray() @ D, rtol=1e-12, atol=1e-12)
    assert np.allclose(t.gst_weight, u)


@settings(max_examples=20, deadline=None)
@given(st.floats(-5, 5), st.floats(-5, 5))
def test_adjoint_involution_property(b1, b2):
    op = OperatorSpec(CoefficientSet(bt=np.array([b1]), bb=np.array([b2])))
    assert adjoint(adjoint(op)) == op
    assert dataclasses.replace(adjoint(op), name="x").coefficients.bt[0] == b2
