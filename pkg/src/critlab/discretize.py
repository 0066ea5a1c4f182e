"""P1 assembly of the bilinear form of (P, B) with Dirichlet elimination.

Row i of K is the form tested against the i-th hat function, column j the
trial hat function:  K[i, j] = B(phi_j, phi_i).  Quadrature:

* diffusion and drift terms: one point (barycentre) with exact P1 gradients;
* zeroth-order and weight terms: 2-point Gauss in 1D, vertex rule in 2D;
* Robin facets: gamma/beta at the facet midpoint times the facet P1 mass.

Swapping the two drift slots therefore transposes K exactly.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.sparse as sp

from ._linalg import DENSE_LIMIT, smallest_sym_eigenpair, symmetric_part
from .errors import DecompositionError, GeometryError
from .geometry import ROBIN, TAGS, MeshedDomain
from .operator import OperatorSpec, adjoint, eval_matrix, eval_scalar, eval_vector

_GAUSS = np.array([0.5 - 0.5 / np.sqrt(3.0), 0.5 + 0.5 / np.sqrt(3.0)])


@dataclass(frozen=True, eq=False)
class AssembledSystem:
    """Discrete form on the free (non-Dirichlet, non-Cut) vertices."""

    K: sp.csr_matrix
    M: sp.csr_matrix
    M_V: sp.csr_matrix
    M_robin: sp.csr_matrix
    free: np.ndarray
    mesh: MeshedDomain
    spec: OperatorSpec
    symmetric: bool
    gst_weight: Optional[np.ndarray] = None

    @property
    def n_free(self) -> int:
        return len(self.free)

    def to_vertices(self, values) -> np.ndarray:
        """Extend free-node values by zero to all mesh vertices."""
        out = np.zeros(self.mesh.n_vertices)
        out[self.free] = np.asarray(getattr(values, "values", values), dtype=float)
        return out

    def free_position(self, vertex: int) -> int:
        pos = np.searchsorted(self.free, vertex)
        if pos < len(self.free) and self.free[pos] == vertex:
            return int(pos)
        return -1

    def free_coordinates(self) -> np.ndarray:
        return self.mesh.vertices[self.free]

    def transpose(self) -> "AssembledSystem":
        """System of the adjoint pair; K is replaced by its transpose."""
        return dataclasses.replace(self, K=self.K.T.tocsr(), spec=adjoint(self.spec))


@dataclass(frozen=True, eq=False)
class FEFunction:
    values: np.ndarray
    system: AssembledSystem

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != (self.system.n_free,):
            raise ValueError(f"FEFunction needs {self.system.n_free} values, got {vals.shape}")
        object.__setattr__(self, "values", vals)

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.values, dtype=dtype)

    def full(self) -> np.ndarray:
        return self.system.to_vertices(self.values)

    def __call__(self, points) -> np.ndarray:
        return self.system.mesh.evaluate(self.full(), points)


def _gradients(mesh: MeshedDomain):
    v = mesh.vertices[mesh.elements]
    meas = mesh.element_measures()
    if np.any(meas <= 0):
        raise GeometryError("elements must have positive measure (2D: counter-clockwise)")
    if mesh.dim == 1:
        g = np.stack([-1.0 / meas, 1.0 / meas], axis=1)[:, :, None]
        return g, meas
    J = np.stack([v[:, 1] - v[:, 0], v[:, 2] - v[:, 0]], axis=-1)  # columns are edges
    Jinv = np.linalg.inv(J)  # rows: gradients of barycentric 1 and 2
    g = np.concatenate([-(Jinv[:, 0] + Jinv[:, 1])[:, None], Jinv], axis=1)
    return g, meas


def _element_mass(mesh: MeshedDomain, weight):
    """Element mass matrices for the weight field under the fixed quadrature."""
    v = mesh.vertices[mesh.elements]
    meas = mesh.element_measures()
    if mesh.dim == 1:
        x0, x1 = v[:, 0, 0], v[:, 1, 0]
        Me = np.zeros((len(meas), 2, 2))
        for xi in _GAUSS:
            phi = np.array([1.0 - xi, xi])
            w = eval_scalar(weight, (x0 + xi * (x1 - x0))[:, None])
            Me += (0.5 * meas * w)[:, None, None] * np.outer(phi, phi)
        return Me
    w = eval_scalar(weight, v.reshape(-1, 2)).reshape(-1, 3)
    Me = np.zeros((len(meas), 3, 3))
    idx = np.arange(3)
    Me[:, idx, idx] = (meas / 3.0)[:, None] * w
    return Me


def _scatter(mesh: MeshedDomain, local, n):
    conn = mesh.elements
    nl = conn.shape[1]
    rows = np.repeat(conn, nl, axis=1).ravel()
    cols = np.tile(conn, (1, nl)).ravel()
    return sp.coo_matrix((local.ravel(), (rows, cols)), shape=(n, n)).tocsr()


def mass_matrix(mesh: MeshedDomain, weight=1.0):
    """Full-vertex mass matrix for ``weight`` (constant or callable)."""
    Me = _element_mass(mesh, weight)
    _check_finite(Me, "weight")
    return _scatter(mesh, Me, mesh.n_vertices)


def laplace_stiffness(mesh: MeshedDomain):
    g, meas = _gradients(mesh)
    Ke = meas[:, None, None] * np.einsum("eid,ejd->eij", g, g)
    return _scatter(mesh, Ke, mesh.n_vertices)


def facet_mass(mesh: MeshedDomain, facets, weights):
    """Boundary mass over the given facets with per-facet constant weights."""
    n = mesh.n_vertices
    facets = np.asarray(facets, dtype=np.int64).reshape(-1, mesh.dim)
    if mesh.dim == 1:
        return sp.coo_matrix((weights, (facets[:, 0], facets[:, 0])), shape=(n, n)).tocsr()
    p = mesh.vertices[facets]
    ell = np.linalg.norm(p[:, 1] - p[:, 0], axis=1)
    loc = np.array([[2.0, 1.0], [1.0, 2.0]]) / 6.0
    vals = (ell * weights)[:, None, None] * loc
    rows = np.repeat(facets, 2, axis=1).ravel()
    cols = np.tile(facets, (1, 2)).ravel()
    return sp.coo_matrix((vals.ravel(), (rows, cols)), shape=(n, n)).tocsr()


def _check_finite(arr, what):
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"coefficient {what} is not finite at some quadrature point")


def assemble(mesh: MeshedDomain, spec: OperatorSpec) -> AssembledSystem:
    """Assemble K, M, M_V and the Robin boundary mass on the free vertices."""
    if any(t not in TAGS for t in mesh.tags):
        raise DecompositionError("every boundary facet must be tagged before assembly")
    co = spec.coefficients
    n = mesh.n_vertices
    d = mesh.dim
    g, meas = _gradients(mesh)
    cen = mesh.centroids()
    A = eval_matrix(co.A, cen)
    bt = eval_vector(co.bt, cen)
    bb = eval_vector(co.bb, cen)
    for arr, what in ((A, "A"), (bt, "bt"), (bb, "bb")):
        _check_finite(arr, what)

    Kd = meas[:, None, None] * np.einsum("eid,edf,ejf->eij", g, A, g)
    Kd = 0.5 * (Kd + np.swapaxes(Kd, 1, 2))
    w = (meas / (d + 1))[:, None, None]
    # grouped so that exchanging bt and bb yields the exact transpose
    Kb = w * np.einsum("eid,ed->ei", g, bt)[:, :, None] + w * np.einsum("ejd,ed->ej", g, bb)[:, None, :]
    Ke = Kd + Kb
    Me_c = _element_mass(mesh, spec.potential)
    _check_finite(Me_c, "c")
    K = _scatter(mesh, Ke + Me_c, n)
    M = _scatter(mesh, _element_mass(mesh, 1.0), n)
    M_V = mass_matrix(mesh, spec.V)

    rob = mesh.tagged(ROBIN)
    if len(rob):
        ratio = spec.robin.ratio(mesh.facet_midpoints()[rob])
        _check_finite(ratio, "gamma/beta")
        Mr = facet_mass(mesh, mesh.facets[rob], ratio)
    else:
        Mr = sp.csr_matrix((n, n))
    K = (K + Mr).tocsr()

    free = np.setdiff1d(np.arange(n), mesh.constrained_vertices())
    if len(free) == 0:
        raise GeometryError("no free vertices left after Dirichlet elimination")

    def restrict(X):
        X = X[free][:, free].tocsr()
        X.sum_duplicates()
        X.sort_indices()
        return X

    return AssembledSystem(
        K=restrict(K),
        M=restrict(M),
        M_V=restrict(M_V),
        M_robin=restrict(Mr),
        free=free,
        mesh=mesh,
        spec=spec,
        symmetric=spec.is_symmetric_at(cen),
    )


def quadratic_form(system: AssembledSystem, phi) -> float:
    """phi^T K phi."""
    phi = np.asarray(getattr(phi, "values", phi), dtype=float)
    if phi.shape != (system.n_free,):
        raise ValueError(f"expected {system.n_free} free-node values, got {phi.shape}")
    return float(phi @ (system.K @ phi))


def smallest_symmetric_eigenvalue(system: AssembledSystem) -> float:
    """Smallest eigenvalue of ((K + K^T)/2, M)."""
    return smallest_sym_eigenpair(symmetric_part(system.K), system.M)[0]


def estimate_coercive_shift(system: AssembledSystem) -> float:
    """gamma_m such that phi^T (K + gamma_m M) phi >= phi^T M phi for all phi."""
    lam = smallest_symmetric_eigenvalue(system)
    return max(0.0, -lam) + 1.0


def trace_inequality_probe(system: AssembledSystem, trials: int = 100, eps: float = 1.0,
                           seed: int = 0, samples=None, modes: int = 6) -> float:
    """Worst observed ratio  |u|^2_{L2(boundary)} / (eps |grad u|^2 + |u|^2 / eps).

    Without explicit ``samples`` the probe draws random combinations of the
    lowest Laplace modes on the free space, which keeps the ratio stable under
    mesh refinement.  Zero functions are skipped.
    """
    mesh = system.mesh
    free = system.free
    Mb = facet_mass(mesh, mesh.facets, np.ones(len(mesh.facets)))[free][:, free]
    L = laplace_stiffness(mesh)[free][:, free]
    M = system.M
    if samples is None:
        m = min(modes, system.n_free)
        if system.n_free <= DENSE_LIMIT:
            import scipy.linalg as sla

            _, V = sla.eigh(L.toarray(), M.toarray())
            basis = V[:, :m]
        else:
            import scipy.sparse.linalg as spla

            _, basis = spla.eigsh(L.tocsc(), k=m, M=M.tocsc(), sigma=0.0, which="LM",
                                  v0=np.ones(system.n_free))
        # fix eigenvector signs against a generic smooth function so that the
        # same random coefficients give the same functions on every mesh
        ref = np.exp(system.free_coordinates() @ np.array([0.37, 0.61])[: mesh.dim])
        sign = np.sign(basis.T @ (M @ ref))
        basis = basis * np.where(sign == 0, 1.0, sign)
        rng = np.random.default_rng(seed)
        samples = (basis @ rng.standard_normal((basis.shape[1], trials))).T
    worst = 0.0
    for u in np.atleast_2d(np.asarray(samples, dtype=float)):
        if not np.any(u):
            continue
        den = eps * (u @ (L @ u)) + (u @ (M @ u)) / eps
        worst = max(worst, float((u @ (Mb @ u)) / den))
    return worst


def write_matrix(A, stream) -> None:
    """Coordinate text dump: header ``% rows cols nnz`` then ``i j value`` lines."""
    C = sp.coo_matrix(A)
    order = np.lexsort((C.col, C.row))
    stream.write(f"% {C.shape[0]} {C.shape[1]} {C.nnz}\n")
    for r, c, v in zip(C.row[order], C.col[order], C.data[order]):
        stream.write(f"{int(r)} {int(c)} {float(v)!r}\n")


def read_matrix(stream):
    header = stream.readline().split()
    if len(header) != 4 or header[0] != "%":
        raise ValueError("missing '% rows cols nnz' header")
    rows, cols, nnz = map(int, header[1:])
    data = np.loadtxt(stream, ndmin=2) if nnz else np.zeros((0, 3))
    if len(data) != nnz:
        raise ValueError(f"expected {nnz} entries, found {len(data)}")
    return sp.coo_matrix(
        (data[:, 2], (data[:, 0].astype(int), data[:, 1].astype(int))), shape=(rows, cols)
    ).tocsr()
