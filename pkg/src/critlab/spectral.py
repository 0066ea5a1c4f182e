"""Resolvents, the principal eigenpair and related spectral quantities."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from ._linalg import Factor
from .discretize import (
    AssembledSystem,
    FEFunction,
    assemble,
    estimate_coercive_shift,
    mass_matrix,
    smallest_symmetric_eigenvalue,
)
from .errors import (
    ConsistencyError,
    CritError,
    NonConvergenceError,
    PositivityError,
    ResolventError,
    WeightError,
)
from .geometry import ExhaustionSpec, make_exhaustion

DEFAULT_TOL = 1e-10
DEFAULT_MAX_ITER = 10000


@dataclass(frozen=True)
class EigenPair:
    lambda_c: float
    u_c: FEFunction
    residual: float
    iterations: int


def _values(x):
    return np.asarray(getattr(x, "values", x), dtype=float)


def shifted_solve(system: AssembledSystem, lam: float, rhs) -> FEFunction:
    """Solve (K - lam M) u = M rhs by a direct sparse factorisation."""
    rhs = _values(rhs)
    b = system.M @ rhs
    if not np.any(b):
        return FEFunction(np.zeros(system.n_free), system)
    A = (system.K - lam * system.M).tocsc()
    fac = Factor(A)
    u = fac.solve(b)
    r = b - A @ u
    if np.linalg.norm(r) > 1e-12 * np.linalg.norm(b):
        u = u + fac.solve(r)
    return FEFunction(u, system)


def principal_eigen(system: AssembledSystem, tol: float = DEFAULT_TOL,
                    max_iter: int = DEFAULT_MAX_ITER) -> EigenPair:
    """Principal eigenpair by positivity-preserving inverse iteration.

    Starts from the all-ones vector with the coercive shift gamma_m, i.e. with
    T = (K + gamma_m M)^{-1} M, clamping negative entries to zero after every
    step.  While the iterate stays strictly positive, the shift is moved up to
    just below the lower Collatz-Wielandt bound min_i (K u)_i / (M u)_i, which
    never exceeds the principal eigenvalue for Z-matrices, so the iteration
    stays in the positive cone and converges in a handful of steps (Noda's
    iteration).  Any clamping event reverts to the fixed shift for good.
    """
    K, M = system.K.tocsc(), system.M.tocsc()
    n = system.n_free
    gamma_m = estimate_coercive_shift(system)
    s = -gamma_m
    fac = Factor(K - s * M, check=False)
    adaptive = True
    u = np.ones(n) / math.sqrt(M.sum())
    lam_prev = None
    residual = math.inf
    for it in range(1, max_iter + 1):
        Mu = M @ u
        y = fac.solve(Mu)
        lam = s + float(u @ Mu) / float(Mu @ y)
        clamped = y < 0
        y[clamped] = 0.0
        if not np.any(y > 0):
            raise PositivityError(
                f"iterate collapsed to zero after clamping at iteration {it}"
            )
        u = y / math.sqrt(float(y @ (M @ y)))
        Ku, Mu = K @ u, M @ u
        residual = float(np.linalg.norm(Ku - lam * Mu) / np.linalg.norm(Mu))
        if (lam_prev is not None and not clamped.any()
                and abs(lam - lam_prev) <= tol * max(1.0, abs(lam))):
            if np.all(u > 0):
                return EigenPair(lam, FEFunction(u, system), residual, it)
        lam_prev = lam
        if clamped.any():
            if adaptive and s != -gamma_m:
                s = -gamma_m
                fac = Factor(K - s * M, check=False)
            adaptive = False
            continue
        if adaptive and np.all(u > 0):
            ratio = Ku / Mu
            lo, hi = float(ratio.min()), float(ratio.max())
            target = lo - max(1e-2 * (hi - lo), 1e-12 * (1.0 + abs(lo)))
            if target > s and lo <= lam + tol * max(1.0, abs(lam)):
                try:
                    fac = Factor(K - target * M, check=False)
                    s = target
                except ResolventError:
                    adaptive = False
    raise NonConvergenceError(
        f"principal eigen iteration did not converge in {max_iter} iterations",
        iterations=max_iter,
        residual=residual,
    )


def adjoint_principal_eigen(system: AssembledSystem, tol: float = DEFAULT_TOL,
                            max_iter: int = DEFAULT_MAX_ITER) -> EigenPair:
    """Principal eigenpair of the transposed (adjoint) system.

    Cross-checked against the primal eigenvalue, which must agree within 2*tol.
    """
    adj = principal_eigen(system.transpose(), tol, max_iter)
    if system.symmetric:
        return adj
    prim = principal_eigen(system, tol, max_iter)
    if abs(adj.lambda_c - prim.lambda_c) > 2 * tol * max(1.0, abs(prim.lambda_c)):
        raise ConsistencyError(
            f"adjoint eigenvalue {adj.lambda_c!r} differs from {prim.lambda_c!r}"
        )
    return adj


def rayleigh_lambda(system: AssembledSystem) -> float:
    """Bottom of the symmetric part of the form: min phi^T K phi / phi^T M phi."""
    return smallest_symmetric_eigenvalue(system)


@dataclass(frozen=True)
class MaxPrincipleResult:
    holds: bool
    worst_ratio: float
    witness_rhs: Optional[np.ndarray] = None
    witness_solution: Optional[np.ndarray] = None


def check_max_principle(system: AssembledSystem, lam: float, trials: int = 100,
                        seed: int = 0) -> MaxPrincipleResult:
    """Probe the generalised maximum principle for (K - lam M) with random loads.

    Holds iff every solution satisfies min(u) >= -1e-8 max|u|.
    """
    fac = Factor((system.K - lam * system.M).tocsc())
    rng = np.random.default_rng(seed)
    loads = rng.random((system.n_free, trials))
    U = fac.solve(system.M @ loads)
    worst = 0.0
    for j in range(trials):
        u = U[:, j]
        scale = np.max(np.abs(u))
        if scale == 0:
            continue
        ratio = float(u.min() / scale)
        worst = min(worst, ratio)
        if ratio < -1e-8:
            return MaxPrincipleResult(False, ratio, loads[:, j].copy(), u.copy())
    return MaxPrincipleResult(True, worst)


def protter_weinberger(system: AssembledSystem, u, V=None) -> float:
    """Discrete inner infimum min_i (K u)_i / (M_V u)_i; a lower bound for lambda_0."""
    u = _values(u)
    if np.any(~(u > 0)):
        raise PositivityError("Protter-Weinberger quotient needs u > 0 on free nodes")
    if V is None:
        MV = system.M_V
    else:
        MV = mass_matrix(system.mesh, V)[system.free][:, system.free]
    den = MV @ u
    if np.any(~(den > 0)):
        raise WeightError("weighted mass (M_V u)_i must be positive at every free node")
    return float(np.min((system.K @ u) / den))


@dataclass
class Lambda0Trace:
    levels: List[Tuple[int, float]] = field(default_factory=list)
    last: float = math.nan
    extrapolated: float = math.nan
    increment: float = math.nan

    @property
    def values(self):
        return [v for _, v in self.levels]


def _aitken(a, b, c):
    d1, d2 = b - a, c - b
    den = d2 - d1
    if den == 0 or d1 == 0 or abs(d2 / d1) >= 1:
        return c
    return c - d2 * d2 / den


def lambda0_exhaustion(ex: ExhaustionSpec, op, k_max: int, tol: float = DEFAULT_TOL,
                       max_iter: int = DEFAULT_MAX_ITER, stop_below: Optional[float] = None
                       ) -> Lambda0Trace:
    """lambda_c on each exhaustion level and an estimate of the limit lambda_0.

    The limit is reported both as the last value and as a one-step
    (Aitken delta-squared) extrapolation.  ``stop_below`` ends the sweep once a
    level drops below that value.
    """
    if k_max < 2:
        raise CritError("lambda_0 estimation needs k_max >= 2")
    trace = Lambda0Trace()
    for k in range(1, k_max + 1):
        system = assemble(make_exhaustion(ex, k), op)
        try:
            lam = principal_eigen(system, tol, max_iter).lambda_c
        except NonConvergenceError as exc:
            raise NonConvergenceError(f"level {k}: {exc}", exc.iterations, exc.residual,
                                      level=k) from None
        if trace.levels and lam > trace.levels[-1][1] + 1e-8:
            raise ConsistencyError(
                f"lambda_c increased from {trace.levels[-1][1]!r} to {lam!r} at level {k}",
                level=k,
            )
        trace.levels.append((k, lam))
        if stop_below is not None and lam < stop_below:
            break
    vals = trace.values
    trace.last = vals[-1]
    trace.increment = vals[-1] - vals[-2] if len(vals) > 1 else math.nan
    trace.extrapolated = _aitken(*vals[-3:]) if len(vals) >= 3 else vals[-1]
    return trace


@dataclass(frozen=True)
class SpectralReport:
    lambda_c: float
    lambda_0: float
    Gamma: float
    Lambda: float
    pw_bound: float
    residual: float
    iterations: int

    def as_text(self) -> str:
        keys = ("lambda_c", "lambda_0", "Gamma", "Lambda", "pw_bound", "residual", "iterations")
        return "".join(f"{k} = {getattr(self, k)!r}\n" for k in keys)


def spectral_report(system: AssembledSystem, lambda_0: Optional[float] = None,
                    tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER) -> SpectralReport:
    pair = principal_eigen(system, tol, max_iter)
    Lam = rayleigh_lambda(system)
    pw = protter_weinberger(system, pair.u_c)
    return SpectralReport(
        lambda_c=pair.lambda_c,
        lambda_0=pair.lambda_c if lambda_0 is None else float(lambda_0),
        Gamma=pair.lambda_c,
        Lambda=Lam,
        pw_bound=pw,
        residual=pair.residual,
        iterations=pair.iterations,
    )
