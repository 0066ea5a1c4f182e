"""Coefficient data of the operator pair (P, B).

    P u = -div(A grad u + u bt) + bb . grad u + c u      in the domain
    B u = beta (A grad u + u bt) . n + gamma u            on the Robin portion

Coefficients are either constants or vectorised callables taking an array of
points of shape (m, d).  They must be finite wherever they are sampled (the
quadrature points of the assembly); no integrability class is checked.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np
import scipy.sparse as sp

from .errors import ConfigError, EllipticityError, PositivityError

Field = Union[float, np.ndarray, Callable, None]


def _sample(value, x):
    x = np.atleast_2d(np.asarray(x, dtype=float))
    out = value(x) if callable(value) else value
    return np.asarray(out, dtype=float), x


def eval_matrix(value: Field, x) -> np.ndarray:
    """Evaluate a diffusion field at points; returns shape (m, d, d)."""
    out, x = _sample(1.0 if value is None else value, x)
    m, d = x.shape
    if out.ndim == 0 or out.shape == (m,):
        return np.broadcast_to(out.reshape(-1, 1, 1), (m, 1, 1)) * np.eye(d)
    return np.broadcast_to(out, (m, d, d)).copy()


def eval_vector(value: Field, x) -> np.ndarray:
    """Evaluate a drift field at points; returns shape (m, d)."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if value is None:
        return np.zeros_like(x)
    out, x = _sample(value, x)
    m, d = x.shape
    if d == 1 and out.shape in ((), (m,)):
        out = out.reshape(-1, 1)
    return np.broadcast_to(out, (m, d)).copy()


def eval_scalar(value: Field, x) -> np.ndarray:
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if value is None:
        return np.zeros(len(x))
    out, x = _sample(value, x)
    return np.broadcast_to(out, (len(x),)).copy()


@dataclass(frozen=True)
class CoefficientSet:
    A: Field = None
    bt: Field = None
    bb: Field = None
    c: Field = None
    theta_hint: Optional[float] = None


@dataclass(frozen=True)
class RobinData:
    beta: Field = 1.0
    gamma: Field = 0.0

    def ratio(self, x) -> np.ndarray:
        """gamma/beta at boundary points; beta must be positive there."""
        from .errors import RobinDataError

        beta = eval_scalar(self.beta, x)
        if np.any(~np.isfinite(beta)) or np.any(beta <= 0):
            raise RobinDataError("beta must be positive at every Robin quadrature point")
        return eval_scalar(self.gamma, x) / beta


@dataclass(frozen=True)
class OperatorSpec:
    """(P - shift * V, B).  ``V`` defaults to the constant weight 1."""

    coefficients: CoefficientSet = CoefficientSet()
    robin: RobinData = RobinData()
    shift: float = 0.0
    V: Field = 1.0
    name: str = ""

    def potential(self, x) -> np.ndarray:
        """Zeroth-order coefficient c - shift * V at points."""
        c = eval_scalar(self.coefficients.c, x)
        if self.shift:
            c = c - self.shift * eval_scalar(self.V, x)
        return c

    def is_symmetric_at(self, x) -> bool:
        co = self.coefficients
        if co.bt is co.bb:
            return True
        return bool(np.array_equal(eval_vector(co.bt, x), eval_vector(co.bb, x)))

    def with_potential(self, extra: Field) -> "OperatorSpec":
        """Operator with ``extra`` added to c (callables are combined pointwise)."""
        base = self.coefficients.c

        def c(x):
            return eval_scalar(base, x) + eval_scalar(extra, x)

        return dataclasses.replace(
            self, coefficients=dataclasses.replace(self.coefficients, c=c)
        )


def check_ellipticity(coeffs: CoefficientSet, sample_points) -> float:
    """Estimate the ellipticity constant from samples of A.

    Returns max over samples of max(lambda_max(A), 1/lambda_min(A)).
    """
    pts = np.atleast_2d(np.asarray(sample_points, dtype=float))
    if pts.size == 0:
        raise ConfigError("ellipticity check needs at least one sample point")
    A = eval_matrix(coeffs.A, pts)
    if np.max(np.abs(A - np.swapaxes(A, 1, 2))) > 1e-12:
        raise EllipticityError("diffusion matrix is not symmetric")
    eig = np.linalg.eigvalsh(A)
    bad = np.nonzero(eig[:, 0] <= 0)[0]
    if len(bad):
        p = pts[bad[0]]
        raise EllipticityError(f"A is not positive definite at {p.tolist()}", point=p)
    return float(np.max(np.maximum(eig[:, -1], 1.0 / eig[:, 0])))


def adjoint(spec: OperatorSpec) -> OperatorSpec:
    """Formal adjoint: the two drift slots are exchanged, all else unchanged."""
    co = spec.coefficients
    return dataclasses.replace(
        spec, coefficients=dataclasses.replace(co, bt=co.bb, bb=co.bt)
    )


def ground_state_transform_matrices(system, u):
    """Discrete ground state transform by diagonal congruence with D = diag(u).

    The returned system has K -> D K D, M -> D M D (likewise for the weighted and
    Robin mass matrices) and remembers ``u`` so that Green functions of the
    transformed system use the matching weighted point load.
    """
    u = np.asarray(getattr(u, "values", u), dtype=float)
    if u.shape != (system.n_free,):
        raise ValueError(f"expected {system.n_free} free-node values, got {u.shape}")
    if np.any(~(u > 0)):
        raise PositivityError("ground state transform needs u > 0 at every free node")
    D = sp.diags(u)
    weight = u if system.gst_weight is None else u * system.gst_weight
    return dataclasses.replace(
        system,
        K=(D @ system.K @ D).tocsr(),
        M=(D @ system.M @ D).tocsr(),
        M_V=(D @ system.M_V @ D).tocsr(),
        M_robin=(D @ system.M_robin @ D).tocsr(),
        gst_weight=weight,
    )


# ---------------------------------------------------------------------------
# catalogue


def laplace(dim: int = 1) -> OperatorSpec:
    return OperatorSpec(name="laplace")


def hardy(mu: float, dim: int = 1) -> OperatorSpec:
    """-Laplace - mu/|x|^2."""
    mu = float(mu)

    def c(x):
        return -mu / np.sum(x * x, axis=1)

    return OperatorSpec(CoefficientSet(c=c), name=f"hardy({mu!r})")


def drift(b, dim: int = 1) -> OperatorSpec:
    """Constant drift in the divergence slot (bt = b, bb = 0)."""
    b = np.atleast_1d(np.asarray(b, dtype=float))
    if b.shape != (dim,):
        raise ConfigError(f"drift vector must have {dim} components")
    return OperatorSpec(CoefficientSet(bt=b), name=f"drift({','.join(map(repr, b.tolist()))})")


def shifted(base: OperatorSpec, lam: float) -> OperatorSpec:
    """P - lam * V."""
    return dataclasses.replace(
        base, shift=base.shift + float(lam), name=f"shifted({base.name}, {float(lam)!r})"
    )


CATALOG = {
    "laplace": "laplace -- the Laplacian (A = I, no drift, c = 0)",
    "hardy": "hardy(mu) -- Hardy operator, c = -mu/|x|^2",
    "drift": "drift(b) -- constant drift b in the divergence slot",
    "shifted": "shifted(base, lambda) -- base operator minus lambda times the weight",
}
