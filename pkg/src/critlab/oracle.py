"""Closed-form and brute-force references for one-dimensional desk problems."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Tuple

import numpy as np
import scipy.linalg as sla
from scipy.optimize import bisect

from .errors import OracleError

DENSE_CAP = 400


@dataclass(frozen=True)
class Oracle1DProblem:
    """-(a u')' + c u on (alpha, beta) with constant a > 0 and c.

    ``left``/``right`` are ``("D",)`` for Dirichlet or ``("R", r)`` for the
    Robin condition with ratio r = gamma/beta, i.e. a u'(alpha) = r u(alpha)
    and a u'(beta) = -r u(beta).
    """

    interval: Tuple[float, float]
    left: tuple = ("D",)
    right: tuple = ("D",)
    a: float = 1.0
    c: float = 0.0

    def __post_init__(self):
        lo, hi = map(float, self.interval)
        if not (math.isfinite(lo) and math.isfinite(hi) and lo < hi):
            raise OracleError(f"degenerate interval {self.interval}")
        if not self.a > 0:
            raise OracleError("a must be positive")
        for side in (self.left, self.right):
            if side[0] == "R":
                if len(side) != 2 or not math.isfinite(float(side[1])):
                    raise OracleError(f"Robin ratio must be finite: {side}")
            elif tuple(side) != ("D",):
                raise OracleError(f"unknown boundary condition {side}")

    @property
    def length(self) -> float:
        return float(self.interval[1]) - float(self.interval[0])


def _sol(cond, a, s, t, kind):
    """Value and derivative (in t) of the solution meeting ``cond`` at t = 0.

    kind "trig": u'' = -s^2 u; "hyp": u'' = s^2 u; "lin": u'' = 0.
    """
    if kind == "lin":
        if cond[0] == "D":
            return t, np.ones_like(t)
        r = float(cond[1])
        return a + r * t, r * np.ones_like(t)
    if kind == "trig":
        sn, cs = np.sin(s * t), np.cos(s * t)
        dsn, dcs = s * cs, -s * sn
    else:
        sn, cs = np.sinh(s * t), np.cosh(s * t)
        dsn, dcs = s * cs, s * sn
    if cond[0] == "D":
        return sn, dsn
    r = float(cond[1])
    return a * s * cs + r * sn, a * s * dcs + r * dsn


def _char(p: Oracle1DProblem, s: float) -> float:
    """Right boundary residual of the left-adapted solution for u'' = -s^2 u."""
    u, du = _sol(p.left, p.a, s, np.array(p.length), "trig")
    if p.right[0] == "D":
        return float(u)
    return float(p.a * du + float(p.right[1]) * u)


def eig1d_transcendental(problem: Oracle1DProblem, index: int = 0) -> float:
    """(index+1)-th eigenvalue a s^2 + c by bisection on the characteristic equation.

    Assumes nonnegative Robin ratios, not both sides Neumann; then every
    eigenvalue is a s^2 + c with s > 0 and the roots are separated by at most
    pi/L.
    """
    L = problem.length
    for side in (problem.left, problem.right):
        if side[0] == "R" and float(side[1]) < 0:
            raise OracleError("negative Robin ratios are not supported")
    if problem.left[0] == "R" and problem.right[0] == "R" and \
            float(problem.left[1]) == 0 == float(problem.right[1]):
        raise OracleError("pure Neumann problem has the zero mode; not bracketed")
    s_max = (index + 1.5) * math.pi / L
    grid = np.linspace(1e-9 / L, s_max, 4000 * (index + 2))
    vals = np.array([_char(problem, s) for s in grid])
    signs = np.sign(vals)
    found = 0
    for i in range(len(grid) - 1):
        if signs[i] == 0:
            root = grid[i]
        elif signs[i] * signs[i + 1] < 0:
            root = bisect(lambda s: _char(problem, s), grid[i], grid[i + 1], xtol=1e-15,
                          rtol=4 * np.finfo(float).eps, maxiter=500)
        else:
            continue
        if found == index:
            return problem.a * root * root + problem.c
        found += 1
    raise OracleError(f"no sign change found for eigenvalue index {index} in (0, {s_max})")


def _green_solutions(p: Oracle1DProblem):
    ratio = p.c / p.a
    if ratio == 0:
        kind, s = "lin", 0.0
    elif ratio > 0:
        kind, s = "hyp", math.sqrt(ratio)
    else:
        kind, s = "trig", math.sqrt(-ratio)
    lo, hi = map(float, p.interval)

    def left(x):
        return _sol(p.left, p.a, s, np.asarray(x, dtype=float) - lo, kind)

    def right(x):
        u, du = _sol(p.right, p.a, s, hi - np.asarray(x, dtype=float), kind)
        return u, -du

    return left, right


def _two_solution_green(left, right, a, x, y, at):
    xm, xM = min(x, y), max(x, y)
    uL, duL = left(at)
    uR, duR = right(at)
    wr = a * (duL * uR - uL * duR)
    scale = a * math.hypot(uL, duL) * math.hypot(uR, duR)
    if not abs(wr) > 1e-12 * scale:
        raise OracleError("zero Wronskian: the problem is critical on the interval")
    return float(left(xm)[0] * right(xM)[0] / wr)


def green1d(problem: Oracle1DProblem, x: float, y: float) -> float:
    """G(x, y) = u_L(min) u_R(max) / (a W) for -(a u')' + c u = delta_y."""
    lo, hi = map(float, problem.interval)
    for z in (x, y):
        if not lo <= z <= hi:
            raise OracleError(f"point {z} outside {problem.interval}")
    left, right = _green_solutions(problem)
    return _two_solution_green(left, right, problem.a, float(x), float(y), 0.5 * (lo + hi))


def _hardy_basis(mu):
    """Two solutions (value, derivative) of -u'' - mu u / x^2 = 0 on x > 0."""
    d = 0.25 - mu
    if d > 0:
        q = math.sqrt(d)
        p1, p2 = 0.5 + q, 0.5 - q
        return [lambda x, p=p: (x ** p, p * x ** (p - 1)) for p in (p1, p2)]
    if d == 0:
        return [
            lambda x: (np.sqrt(x), 0.5 / np.sqrt(x)),
            lambda x: (np.sqrt(x) * np.log(x), (0.5 * np.log(x) + 1.0) / np.sqrt(x)),
        ]
    nu = math.sqrt(-d)

    def f1(x):
        c, s = np.cos(nu * np.log(x)), np.sin(nu * np.log(x))
        return np.sqrt(x) * c, (0.5 * c - nu * s) / np.sqrt(x)

    def f2(x):
        c, s = np.cos(nu * np.log(x)), np.sin(nu * np.log(x))
        return np.sqrt(x) * s, (0.5 * s + nu * c) / np.sqrt(x)

    return [f1, f2]


def hardy_green1d(mu: float, interval, x: float, y: float) -> float:
    """Dirichlet Green function of -u'' - mu u / x^2 on (alpha, beta), 0 < alpha."""
    lo, hi = map(float, interval)
    if not 0 < lo < hi:
        raise OracleError("need 0 < alpha < beta")
    f, g = _hardy_basis(float(mu))

    def vanish_at(z):
        fz, gz = f(z)[0], g(z)[0]

        def u(t):
            (fv, fd), (gv, gd) = f(t), g(t)
            return gz * fv - fz * gv, gz * fd - fz * gd

        return u

    return _two_solution_green(vanish_at(lo), vanish_at(hi), 1.0, float(x), float(y),
                               math.sqrt(lo * hi))


@dataclass(frozen=True)
class DenseReference:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    inverse: np.ndarray
    K: np.ndarray
    M: np.ndarray

    def resolvent(self, lam: float) -> np.ndarray:
        return np.linalg.inv(self.K - lam * self.M)


def dense_reference(system) -> DenseReference:
    """Full generalized spectrum of (K, M), ordered by real part, and K^{-1}."""
    n = system.n_free
    if n > DENSE_CAP:
        raise OracleError(f"dense reference limited to {DENSE_CAP} unknowns (got {n})")
    K, M = system.K.toarray(), system.M.toarray()
    w, V = sla.eig(K, M)
    order = np.lexsort((w.imag, w.real))
    return DenseReference(w[order], V[:, order], np.linalg.inv(K), K, M)
