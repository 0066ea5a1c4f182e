"""Subcritical / critical / supercritical classification and its certificates."""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
import scipy.linalg as sla

from ._linalg import Factor
from .discretize import AssembledSystem, FEFunction, _element_mass, _scatter, _gradients, assemble
from .errors import (
    ConsistencyError,
    DegeneratePairError,
    MisuseError,
    NonpositiveOperatorError,
    SymmetryRequiredError,
)
from .geometry import ExhaustionSpec, make_exhaustion
from .green import BALL, GROUND_STATE, GREEN_LIMIT, VERTEX, DichotomyTrace, green_minimal
from .operator import OperatorSpec, eval_matrix, shifted
from .spectral import DEFAULT_TOL, Lambda0Trace, lambda0_exhaustion, principal_eigen

SUBCRITICAL = "subcritical"
CRITICAL = "critical"
SUPERCRITICAL = "supercritical"
UNDECIDED = "undecided"

NEGATIVE_TOL = 1e-8
HARDY_RECHECK_TOL = 1e-6
NULL_CRITICAL = 0.15
NULL_SUBCRITICAL = 0.1
PROFILE_AGREEMENT = 0.02


# ---------------------------------------------------------------------------
# Hardy weights


@dataclass
class HardyWeight:
    element_values: np.ndarray
    nodal: np.ndarray
    mesh: object
    recheck_lambda: float = math.nan

    @property
    def recheck_passed(self) -> bool:
        return self.recheck_lambda >= -HARDY_RECHECK_TOL

    def __call__(self, x) -> np.ndarray:
        """P1 interpolant of the nodal weight; zero outside the mesh."""
        out = self.mesh.evaluate(self.nodal, x)
        return np.where(np.isnan(out), 0.0, out)


def _pair_angle(u, v):
    a, b = u / np.linalg.norm(u), v / np.linalg.norm(v)
    return 2.0 * math.asin(min(1.0, np.linalg.norm(a - b) / 2.0))


def hardy_weight(u, v, system: AssembledSystem, recheck: bool = True) -> HardyWeight:
    """W = 1/4 |grad log(v/u)|_A^2 from two positive (super)solutions u, v.

    Element values use the P1 gradient and A at the barycentre; elements with
    a nonpositive vertex value of u or v (e.g. on the Dirichlet boundary) get
    W = 0.  Nodal values are volume-weighted averages of adjacent elements.
    The recheck assembles P - W on the same mesh and records its lambda_c.
    """
    uf = np.asarray(getattr(u, "values", u), dtype=float)
    vf = np.asarray(getattr(v, "values", v), dtype=float)
    if np.any(~(uf > 0)) or np.any(~(vf > 0)):
        raise DegeneratePairError("u and v must be strictly positive on the free nodes")
    if _pair_angle(uf, vf) < 1e-6:
        raise DegeneratePairError("u and v are (numerically) parallel: no Hardy weight")
    mesh = system.mesh
    U, V = system.to_vertices(uf), system.to_vertices(vf)
    el = mesh.elements
    good = np.all(U[el] > 0, axis=1) & np.all(V[el] > 0, axis=1)
    logr = np.zeros(mesh.n_vertices)
    pos = (U > 0) & (V > 0)
    logr[pos] = np.log(V[pos] / U[pos])
    g, meas = _gradients(mesh)
    grad = np.einsum("eid,ei->ed", g, logr[el])
    A = eval_matrix(system.spec.coefficients.A, mesh.centroids())
    We = np.where(good, 0.25 * np.einsum("ed,edf,ef->e", grad, A, grad), 0.0)
    num = np.zeros(mesh.n_vertices)
    den = np.zeros(mesh.n_vertices)
    for j in range(el.shape[1]):
        np.add.at(num, el[:, j], meas * We)
        np.add.at(den, el[:, j], meas)
    W = HardyWeight(We, num / den, mesh)
    if recheck:
        W.recheck_lambda = recheck_hardy_weight(system, W)
    return W


def recheck_hardy_weight(system: AssembledSystem, W) -> float:
    """lambda_c of (P - W) on the mesh of ``system``."""
    spec = system.spec.with_potential(lambda x: -W(x))
    return principal_eigen(assemble(system.mesh, spec)).lambda_c


# ---------------------------------------------------------------------------
# null sequences


@dataclass
class NullSequenceTrace:
    window: tuple
    minima: List[float] = field(default_factory=list)
    minimizers: List[FEFunction] = field(default_factory=list)

    @property
    def decreasing(self) -> bool:
        m = self.minima
        return all(b < a for a, b in zip(m[:-1], m[1:]))


def _window_indicator(window, dim):
    if dim == 1:
        lo, hi = map(float, window)

        def ind(x):
            return ((x[:, 0] > lo) & (x[:, 0] < hi)).astype(float)

        return ind
    import shapely

    poly = shapely.Polygon(window)

    def ind(x):
        return shapely.contains_xy(poly, x[:, 0], x[:, 1]).astype(float)

    return ind


def window_mass(system: AssembledSystem, window):
    """Mass matrix of the probe window O on the free nodes."""
    mesh = system.mesh
    ind = _window_indicator(window, mesh.dim)
    inside = ind(mesh.centroids()) > 0
    Me = _element_mass(mesh, 1.0) * inside[:, None, None]
    return _scatter(mesh, Me, mesh.n_vertices)[system.free][:, system.free].tocsr()


def null_sequence_level(system: AssembledSystem, window):
    """C_O = min phi^T K phi over phi^T M_O phi = 1, and a nonnegative minimizer."""
    if not system.symmetric:
        raise SymmetryRequiredError("null sequences are defined for symmetric operators")
    lam = principal_eigen(system).lambda_c
    if lam < 0:
        raise NonpositiveOperatorError(f"lambda_c = {lam!r} < 0: the form is indefinite")
    MO = window_mass(system, window)
    S = np.nonzero(np.asarray(abs(MO).sum(axis=1)).ravel() > 0)[0]
    if not len(S):
        raise MisuseError("the probe window contains no free element")
    fac = Factor(system.K.tocsc())
    E = np.zeros((system.n_free, len(S)))
    E[S, np.arange(len(S))] = 1.0
    Z = fac.solve(E)
    B = 0.5 * (Z[S] + Z[S].T)
    MSS = MO[S][:, S].toarray()
    R = sla.cholesky(MSS)
    w, Q = sla.eigh(R @ B @ R.T)
    mu = 1.0 / w[-1]
    phiS = sla.solve_triangular(R, Q[:, -1])
    phi = np.abs(mu * (Z @ (MSS @ phiS)))
    phi /= math.sqrt(float(phi @ (MO @ phi)))
    return float(mu), FEFunction(phi, system)


def null_sequence(ex: ExhaustionSpec, op: OperatorSpec, window, k_max: int) -> NullSequenceTrace:
    """C_{O,k} along the exhaustion; tends to 0 exactly in the critical case."""
    trace = NullSequenceTrace(tuple(window))
    for k in range(1, k_max + 1):
        mu, phi = null_sequence_level(assemble(make_exhaustion(ex, k), op), window)
        trace.minima.append(mu)
        trace.minimizers.append(phi)
    return trace


# ---------------------------------------------------------------------------
# ground states


def _sample_profile(field_values: FEFunction, x1, probes):
    norm = float(field_values(np.atleast_2d(x1))[0])
    return field_values(probes) / norm


def ground_state(ex: ExhaustionSpec, op: OperatorSpec, k_max: int, x0, y0, x1, probes=None,
                 trace: Optional[DichotomyTrace] = None, assume_critical: bool = False,
                 radius: Optional[float] = None) -> FEFunction:
    """Normalised ground-state profile u_k / u_k(x1) at the final level.

    Cross-checks uniqueness with a second source (uniform on a ball around x0):
    the two normalised profiles must agree within 2% on the probes.
    """
    if trace is None:
        trace = green_minimal(ex, op, x0, y0, x1, k_max, probes)
    if trace.verdict != GROUND_STATE and not assume_critical:
        raise MisuseError(f"ground state requested but the dichotomy verdict is {trace.verdict}")
    if radius is None:
        radius = 0.25 * float(np.linalg.norm(trace.x1 - trace.x0))
    other = green_minimal(ex, op, trace.x0, trace.y0, trace.x1, len(trace.g_values),
                          trace.probes, mode=BALL, radius=radius)
    gap = float(np.nanmax(np.abs(other.normalized_profiles[-1] - trace.normalized_profiles[-1])))
    if gap > PROFILE_AGREEMENT:
        raise ConsistencyError(
            f"ground-state profiles from two sources differ by {gap:.3g} > {PROFILE_AGREEMENT}",
            level=len(trace.g_values),
        )
    return trace.final_profile


# ---------------------------------------------------------------------------
# classification


@dataclass
class ClassificationResult:
    verdict: str
    lambda0_estimate: float
    lambda_trace: Lambda0Trace
    dichotomy: Optional[DichotomyTrace] = None
    witness_level: Optional[int] = None
    green_value: Optional[float] = None
    hardy: Optional[HardyWeight] = None
    profile: Optional[FEFunction] = None
    null_trace: Optional[NullSequenceTrace] = None
    thresholds: dict = field(default_factory=dict)
    note: str = ""

    def as_text(self) -> str:
        lines = [
            ("verdict", self.verdict),
            ("lambda0_estimate", repr(self.lambda0_estimate)),
            ("lambda0_last", repr(self.lambda_trace.last)),
            ("levels", str(len(self.lambda_trace.levels))),
        ]
        if self.witness_level is not None:
            lines.append(("witness_level", str(self.witness_level)))
        if self.dichotomy is not None:
            lines.append(("dichotomy", self.dichotomy.verdict))
        if self.green_value is not None:
            lines.append(("green_value", repr(self.green_value)))
        if self.hardy is not None:
            lines.append(("hardy_recheck_lambda", repr(self.hardy.recheck_lambda)))
        if self.null_trace is not None:
            lines.append(("null_final", repr(self.null_trace.minima[-1])))
        for k, v in sorted(self.thresholds.items()):
            lines.append((f"threshold.{k}", repr(v)))
        if self.note:
            lines.append(("note", self.note))
        return "".join(f"{k} = {v}\n" for k, v in lines)


def classify(ex: ExhaustionSpec, op: OperatorSpec, k_max: int, x0, y0, x1, probes=None,
             window=None, tol: float = DEFAULT_TOL) -> ClassificationResult:
    """Classify (P, B) on the exhausted domain.

    1. lambda_c on every level; a negative value (< -1e-8) means supercritical.
    2. Otherwise the Green dichotomy at lambda = 0 decides: a finite limit
       means subcritical (a Hardy weight is built from the Green functions with
       poles x0 and y0), blow-up with a Cauchy profile means critical.
    3. For symmetric operators with a probe ``window`` the null-sequence minima
       must agree: final C_O < 0.15 for critical, all C_O >= 0.1 for
       subcritical.  Disagreement, or an undecided dichotomy, gives undecided.
    """
    if op.V is not None and not (np.isscalar(op.V) and float(op.V) == 1.0):
        raise MisuseError("classification expects the unit weight V = 1")
    thresholds = {"negative": NEGATIVE_TOL, "null_critical": NULL_CRITICAL,
                  "null_subcritical": NULL_SUBCRITICAL, "hardy_recheck": HARDY_RECHECK_TOL}
    lt = lambda0_exhaustion(ex, op, k_max, tol, stop_below=-NEGATIVE_TOL)
    res = ClassificationResult(UNDECIDED, lt.extrapolated, lt, thresholds=thresholds)
    if lt.last < -NEGATIVE_TOL:
        res.verdict = SUPERCRITICAL
        res.witness_level = lt.levels[-1][0]
        return res
    trace = green_minimal(ex, op, x0, y0, x1, k_max, probes)
    res.dichotomy = trace
    res.thresholds.update({f"dichotomy_{k}": v for k, v in trace.thresholds.items()})
    if trace.verdict == GREEN_LIMIT:
        res.verdict = SUBCRITICAL
        res.green_value = trace.g_values[-1]
        system = trace.fields[-1].values.system
        from .green import green_bounded

        v = green_bounded(system, y0, VERTEX, level=k_max).values
        res.hardy = hardy_weight(trace.fields[-1].values, v, system)
        if not res.hardy.recheck_passed:
            res.verdict = UNDECIDED
            res.note = "Hardy-weight recheck failed"
    elif trace.verdict == GROUND_STATE:
        res.verdict = CRITICAL
        res.profile = trace.final_profile
    else:
        res.note = "Green dichotomy undecided"
    if window is not None and res.verdict in (SUBCRITICAL, CRITICAL) and op_is_symmetric(ex, op):
        nt = null_sequence(ex, op, window, k_max)
        res.null_trace = nt
        if res.verdict == CRITICAL and not (nt.decreasing and nt.minima[-1] < NULL_CRITICAL):
            res.verdict = UNDECIDED
            res.note = "null-sequence minima do not vanish"
        elif res.verdict == SUBCRITICAL and min(nt.minima) < NULL_SUBCRITICAL:
            res.verdict = UNDECIDED
            res.note = "null-sequence minima are not bounded below"
    return res


def op_is_symmetric(ex: ExhaustionSpec, op: OperatorSpec) -> bool:
    return assemble(make_exhaustion(ex, 1), op).symmetric


# ---------------------------------------------------------------------------
# lambda scan


@dataclass
class ScanResult:
    lambdas: List[float]
    nonnegative: List[bool]
    lowest: List[float]

    def rows(self):
        return list(zip(self.lambdas, self.nonnegative, self.lowest))


def lambda_interval_scan(ex: ExhaustionSpec, op: OperatorSpec, V, lambdas, k_max: int
                         ) -> ScanResult:
    """Nonnegativity of P - lambda V for each lambda; the 'yes' set must be an interval."""
    lams = sorted(float(x) for x in lambdas)
    base = dataclasses.replace(op, V=V)
    verdicts, lows = [], []
    for lam in lams:
        lt = lambda0_exhaustion(ex, shifted(base, lam), k_max, stop_below=-NEGATIVE_TOL)
        lows.append(lt.last)
        verdicts.append(bool(lt.last >= -NEGATIVE_TOL))
    yes = [i for i, ok in enumerate(verdicts) if ok]
    if yes and not all(verdicts[yes[0]: yes[-1] + 1]):
        raise ConsistencyError("nonnegativity set in lambda is not an interval")
    return ScanResult(lams, verdicts, lows)
