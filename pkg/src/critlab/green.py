"""Green functions on bounded meshes and their exhaustion limits."""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from typing import List

import numpy as np

from ._linalg import Factor
from .discretize import AssembledSystem, FEFunction, assemble, mass_matrix
from .errors import (
    ConsistencyError,
    NonpositiveOperatorError,
    PolePlacementError,
    PositivityError,
    ResolutionError,
    ResolventError,
)
from .geometry import ExhaustionSpec, make_exhaustion

VERTEX = "vertex-delta"
BALL = "ball-average"

GREEN_LIMIT = "green-limit"
GROUND_STATE = "ground-state"
UNDECIDED = "undecided"

# Heuristic dichotomy thresholds: converged / growing relative increments and
# the Cauchy tolerance for normalised profiles.
THRESHOLDS = {"converged": 0.01, "growing": 0.05, "cauchy": 0.02}
MONOTONE_TOL = 1e-8


@dataclass(frozen=True)
class GreenField:
    pole: np.ndarray
    pole_vertex: int
    values: FEFunction
    source_mode: str = VERTEX
    radius: float = 0.0
    level: object = "bounded"

    def __call__(self, points) -> np.ndarray:
        return self.values(points)


def _as_point(x, dim):
    p = np.atleast_1d(np.asarray(x, dtype=float))
    if p.shape != (dim,):
        raise PolePlacementError(f"point {p.tolist()} does not have dimension {dim}")
    return p


def _pole_position(system: AssembledSystem, x0):
    """Snap ``x0`` to the nearest mesh vertex; it must be a free vertex."""
    mesh = system.mesh
    p = _as_point(x0, mesh.dim)
    if np.isnan(mesh.evaluate(np.zeros(mesh.n_vertices), p[None, :]))[0]:
        raise PolePlacementError(f"pole {p.tolist()} lies outside the mesh")
    v = mesh.nearest_vertex(p)
    pos = system.free_position(v)
    if pos < 0:
        raise PolePlacementError(
            f"pole {p.tolist()} snaps to a constrained (Dirichlet/Cut) vertex"
        )
    return p, v, pos


def _gst_scale(system, load):
    w = system.gst_weight
    return load if w is None else load * w * w


def _point_load(system, pos):
    b = np.zeros(system.n_free)
    b[pos] = 1.0
    return _gst_scale(system, b)


def _ball_load(system, p, v, radius):
    mesh = system.mesh
    dist = np.linalg.norm(mesh.vertices - p, axis=1)
    chi = (dist <= radius).astype(float)
    chi[v] = 1.0
    full = mass_matrix(mesh) @ chi
    b = full[system.free] / full.sum()
    return _gst_scale(system, b)


def _positive_solve(system, fac, b, transpose=False):
    u = fac.solve_transpose(b) if transpose else fac.solve(b)
    if not np.all(u > 0):
        from .spectral import principal_eigen

        lam = principal_eigen(system).lambda_c
        if lam <= 0:
            raise NonpositiveOperatorError(
                f"principal eigenvalue {lam!r} <= 0: no positive Green function"
            )
        raise PositivityError("Green function is not strictly positive on the free nodes")
    return u


def _factor(system):
    try:
        return Factor(system.K.tocsc())
    except ResolventError as exc:
        raise NonpositiveOperatorError(f"0 is (numerically) an eigenvalue: {exc}") from None


def green_bounded(system: AssembledSystem, x0, mode: str = VERTEX, radius: float = 0.0,
                  level="bounded") -> GreenField:
    """Green function G(., x0) of the assembled system.

    ``mode="vertex-delta"`` uses a unit load at the vertex nearest to x0;
    ``mode="ball-average"`` spreads unit mass uniformly over the vertices in
    the ball B(x0, radius) (the pole vertex is always included).
    """
    p, v, pos = _pole_position(system, x0)
    if mode == VERTEX:
        b = _point_load(system, pos)
    elif mode == BALL:
        if not radius >= 0:
            raise PolePlacementError("ball radius must be nonnegative")
        b = _ball_load(system, p, v, radius)
    else:
        raise PolePlacementError(f"unknown source mode {mode!r}")
    u = _positive_solve(system, _factor(system), b)
    return GreenField(p, v, FEFunction(u, system), mode, float(radius), level)


def check_green_symmetry(system: AssembledSystem, x, y) -> float:
    """|G_{P,B}(x, y) - G_{P*,B*}(y, x)| from K and from its transpose.

    G is solved with K and pole y, read at x; G* with K^T and pole x, read at y.
    """
    _, vx, px = _pole_position(system, x)
    _, vy, py = _pole_position(system, y)
    if vx == vy:
        raise PolePlacementError("symmetry check needs two distinct poles")
    adj = system.transpose()
    g = _factor(system).solve(_point_load(system, py))[px]
    g_adj = _factor(adj).solve(_point_load(adj, px))[py]
    return float(abs(g - g_adj))


# ---------------------------------------------------------------------------
# exhaustion limits


def _default_probes(ex: ExhaustionSpec, n=33):
    region = ex.region(1)
    if ex.base.kind == "interval":
        lo, hi = region
        mid, half = 0.5 * (lo + hi), 0.25 * (hi - lo)
        return np.linspace(mid - half, mid + half, n)[:, None]
    x0, y0, x1, y1 = region.bounds
    gx, gy = np.meshgrid(np.linspace(x0, x1, 9)[1:-1], np.linspace(y0, y1, 9)[1:-1])
    pts = np.column_stack([gx.ravel(), gy.ravel()])
    import shapely

    keep = shapely.contains_xy(region.buffer(-0.1 * math.sqrt(region.area)), pts[:, 0], pts[:, 1])
    return pts[keep]


def _check_probes_inside(system, x0, *points):
    """Probes must be free vertices of the first level, distinct from the pole."""
    _, v0, _ = _pole_position(system, x0)
    for p in points:
        if _pole_position(system, p)[1] == v0:
            raise PolePlacementError(f"probe {np.ravel(p).tolist()} coincides with the pole")


def _probe_array(ex, probes):
    if probes is None:
        return _default_probes(ex)
    dim = ex.base.dimension
    return np.asarray(probes, dtype=float).reshape(-1, dim)


def _increments(values):
    return [math.nan] + [(b - a) / b for a, b in zip(values[:-1], values[1:])]


def _sup_diff(a, b):
    d = np.abs(np.asarray(a) - np.asarray(b))
    d = d[np.isfinite(d)]
    return float(d.max()) if len(d) else math.nan


def dichotomy_verdict(increments, cauchy, thresholds=THRESHOLDS) -> str:
    """Verdict from the last two relative increments and profile Cauchy gaps."""
    inc = [i for i in increments if not math.isnan(i)]
    if len(inc) < 2:
        return UNDECIDED
    last = inc[-2:]
    if all(i < thresholds["converged"] for i in last):
        return GREEN_LIMIT
    if (all(i > thresholds["growing"] for i in last) and cauchy
            and cauchy[-1] <= thresholds["cauchy"]):
        return GROUND_STATE
    return UNDECIDED


@dataclass
class DichotomyTrace:
    x0: np.ndarray
    y0: np.ndarray
    x1: np.ndarray
    probes: np.ndarray
    g_values: List[float] = field(default_factory=list)
    normalized_profiles: List[np.ndarray] = field(default_factory=list)
    fields: List[GreenField] = field(default_factory=list)
    verdict: str = UNDECIDED
    thresholds: dict = field(default_factory=lambda: dict(THRESHOLDS))

    @property
    def increments(self) -> List[float]:
        return _increments(self.g_values)

    @property
    def cauchy(self) -> List[float]:
        p = self.normalized_profiles
        return [_sup_diff(a, b) for a, b in zip(p[:-1], p[1:])]

    def verdict_at(self, k: int) -> str:
        """Verdict using levels 1..k only."""
        return dichotomy_verdict(self.increments[:k], self.cauchy[: k - 1], self.thresholds)

    @property
    def final_profile(self) -> FEFunction:
        f = self.fields[-1]
        return FEFunction(f.values.values / float(f(self.x1[None, :])[0]), f.values.system)

    def csv_rows(self):
        inc = self.increments
        return [(k + 1, g, inc[k], self.verdict_at(k + 1)) for k, g in enumerate(self.g_values)]


def green_minimal(ex: ExhaustionSpec, op, x0, y0, x1, k_max: int, probes=None,
                  mode: str = VERTEX, radius: float = 0.0, scale: float = 1.0,
                  thresholds=None) -> DichotomyTrace:
    """Green functions G_k(., x0) on the exhaustion and the dichotomy verdict.

    Records G_k(x0, y0) per level, the profiles G_k(., x0)/G_k(x1, x0) sampled
    at ``probes`` and decides between a finite limit (green-limit) and
    blow-up with a Cauchy profile (ground-state).  ``scale`` multiplies the
    source, which leaves the normalised profiles unchanged.
    """
    dim = ex.base.dimension
    pts = _probe_array(ex, probes)
    trace = DichotomyTrace(_as_point(x0, dim), _as_point(y0, dim), _as_point(x1, dim), pts,
                           thresholds=dict(thresholds or THRESHOLDS))
    if k_max < 1:
        raise PolePlacementError("k_max must be at least 1")
    for k in range(1, k_max + 1):
        system = assemble(make_exhaustion(ex, k), op)
        if k == 1:
            _check_probes_inside(system, trace.x0, trace.y0, trace.x1)
        gf = green_bounded(system, x0, mode, radius, level=k)
        if scale != 1.0:
            gf = dataclasses.replace(gf, values=FEFunction(scale * gf.values.values, system))
        g = float(gf(trace.y0[None, :])[0])
        if trace.g_values and g < trace.g_values[-1] - MONOTONE_TOL * max(1.0, abs(g)):
            raise ConsistencyError(
                f"G_k(x0, y0) decreased from {trace.g_values[-1]!r} to {g!r} at level {k}",
                level=k,
            )
        norm = float(gf(trace.x1[None, :])[0])
        trace.g_values.append(g)
        trace.normalized_profiles.append(gf(pts) / norm)
        trace.fields.append(gf)
    trace.verdict = dichotomy_verdict(trace.increments, trace.cauchy, trace.thresholds)
    return trace


# ---------------------------------------------------------------------------
# minimal growth at infinity


@dataclass
class MinimalGrowthTrace:
    x0: np.ndarray
    x1: np.ndarray
    probes: np.ndarray
    profiles: List[FEFunction] = field(default_factory=list)
    sampled: List[np.ndarray] = field(default_factory=list)

    @property
    def increments(self) -> List[float]:
        s = self.sampled
        return [_sup_diff(a, b) for a, b in zip(s[:-1], s[1:])]


def _drop_free(system: AssembledSystem, drop_positions) -> AssembledSystem:
    keep = np.ones(system.n_free, dtype=bool)
    keep[drop_positions] = False
    idx = np.nonzero(keep)[0]

    def sub(X):
        return X[idx][:, idx].tocsr()

    w = None if system.gst_weight is None else system.gst_weight[idx]
    return dataclasses.replace(
        system, K=sub(system.K), M=sub(system.M), M_V=sub(system.M_V),
        M_robin=sub(system.M_robin), free=system.free[idx], gst_weight=w,
    )


def _component_mask(system: AssembledSystem, vertex: int) -> np.ndarray:
    """Free vertices connected to ``vertex`` through the sparsity graph of K."""
    from scipy.sparse.csgraph import connected_components

    _, labels = connected_components(system.K, directed=False)
    pos = system.free_position(vertex)
    return labels == labels[pos]


def minimal_growth_solution(ex: ExhaustionSpec, op, x0, x1, k_max: int, delta: float = 0.5,
                            probes=None) -> MinimalGrowthTrace:
    """Positive solutions in Omega_k minus a shrinking ball around x0.

    At level k the solution vanishes on the ball B(x0, delta/(k+1)) and on the
    cut boundary, and is driven by a unit-mass source uniform on the annulus
    B(x0, delta/k) minus B(x0, delta/(k+1)).  Profiles are normalised at x1.
    When removing the ball disconnects the mesh (always in 1D), values are only
    determined on the component containing x1; probes elsewhere read ``nan``.
    """
    dim = ex.base.dimension
    p0, p1 = _as_point(x0, dim), _as_point(x1, dim)
    pts = _probe_array(ex, probes)
    trace = MinimalGrowthTrace(p0, p1, pts)
    for k in range(1, k_max + 1):
        system = assemble(make_exhaustion(ex, k), op)
        if k == 1:
            _check_probes_inside(system, p0, p1)
        mesh = system.mesh
        r_in, r_out = delta / (k + 1), delta / k
        dist = np.linalg.norm(mesh.vertices - p0, axis=1)
        touching = np.any((dist[mesh.elements] >= r_in) & (dist[mesh.elements] <= r_out), axis=1)
        h_loc = mesh.element_diameters()[touching].max() if touching.any() else math.inf
        if not 2.0 * h_loc <= r_out - r_in:
            raise ResolutionError(
                f"level {k}: annulus of width {r_out - r_in:.3g} needs mesh size "
                f"<= {(r_out - r_in) / 2:.3g} near the pole (have {h_loc:.3g})"
            )
        inner = np.nonzero(dist[system.free] <= r_in)[0]
        sub = _drop_free(system, inner)
        chi = ((dist > r_in) & (dist < r_out)).astype(float)
        full = mass_matrix(mesh) @ chi
        b = full[sub.free] / full.sum()
        u = _factor(sub).solve(b)
        v1 = mesh.nearest_vertex(p1)
        if sub.free_position(v1) < 0:
            raise PolePlacementError("normalisation point x1 lies in the removed ball")
        comp = _component_mask(sub, v1)
        if not np.all(u[comp] > 0):
            raise PositivityError(f"level {k}: minimal-growth solution is not positive")
        u = u / float(FEFunction(u, sub)(p1[None, :])[0])
        u[~comp] = np.nan
        trace.profiles.append(FEFunction(u, sub))
        sampled = mesh.evaluate(sub.to_vertices(np.where(comp, u, 0.0)), pts)
        # probes in elements touching another component are undefined
        bad = np.zeros(mesh.n_vertices, dtype=bool)
        bad[sub.free[~comp]] = True
        sampled[_touches(mesh, pts, bad)] = np.nan
        trace.sampled.append(sampled)
    return trace


def _touches(mesh, pts, flagged):
    """Probes lying in an element that has a flagged vertex."""
    out = np.zeros(len(pts), dtype=bool)
    if not flagged.any():
        return out
    marker = mesh.evaluate(flagged.astype(float), pts)
    return ~(marker == 0.0)
