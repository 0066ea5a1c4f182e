"""Sparse factorisation and symmetric eigenvalue helpers."""
from __future__ import annotations

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import NonConvergenceError, ResolventError

PIVOT_TOL = 1e-13
DENSE_LIMIT = 400


class Factor:
    """LU factorisation of a Jacobi-scaled sparse matrix.

    The pivot check runs on the scaled matrix so that graded meshes, whose
    diagonal spans many orders of magnitude, are not mistaken for singular ones.
    """

    def __init__(self, A, check=True, pivot_tol=PIVOT_TOL):
        A = sp.csc_matrix(A)
        d = np.abs(A.diagonal())
        d[d == 0] = 1.0
        self.scale = 1.0 / np.sqrt(d)
        S = sp.diags(self.scale)
        try:
            self.lu = spla.splu((S @ A @ S).tocsc())
        except RuntimeError as exc:
            raise ResolventError(f"matrix is singular: {exc}") from None
        piv = np.abs(self.lu.U.diagonal())
        self.pivot_ratio = float(piv.min() / piv.max())
        if check and not self.pivot_ratio >= pivot_tol:
            raise ResolventError(
                f"near-singular factorisation (pivot ratio {self.pivot_ratio:.3e})"
            )

    def _apply(self, b, trans):
        b = np.asarray(b, dtype=float)
        s = self.scale if b.ndim == 1 else self.scale[:, None]
        return s * self.lu.solve(s * b, trans=trans)

    def solve(self, b):
        return self._apply(b, "N")

    def solve_transpose(self, b):
        return self._apply(b, "T")


def symmetric_part(K):
    return ((K + K.T) * 0.5).tocsr()


def _gershgorin_lower_bound(Ks, M):
    """Lower bound for the smallest eigenvalue of (Ks, M), M a P1 mass matrix.

    Uses the lumped mass D (row sums of M) together with D/3 <= M <= D.
    """
    D = np.asarray(M.sum(axis=1)).ravel()
    diag = Ks.diagonal()
    off = np.asarray(abs(Ks).sum(axis=1)).ravel() - np.abs(diag)
    g = float(np.min((diag - off) / D))
    scale = float(np.max(np.abs(diag) / D))
    return (g if g >= 0 else 3.0 * g), scale


def _positive_definite(A):
    """True if the symmetric matrix A is certified positive definite.

    Uses an LDL^T-type factorisation without off-diagonal pivoting (SuperLU in
    symmetric mode); by Sylvester's law all pivots are positive iff A > 0.  Any
    factorisation failure or off-diagonal pivoting counts as "not certified".
    """
    A = sp.csc_matrix(A)
    d = np.abs(A.diagonal())
    d[d == 0] = 1.0
    S = sp.diags(1.0 / np.sqrt(d))
    try:
        lu = spla.splu((S @ A @ S).tocsc(), permc_spec="MMD_AT_PLUS_A", diag_pivot_thresh=0.0,
                       options=dict(SymmetricMode=True))
    except RuntimeError:
        return False, None
    if not np.array_equal(lu.perm_r, lu.perm_c) or not np.all(lu.U.diagonal() > 0):
        return False, None
    return True, lu


def smallest_sym_eigenpair(Ks, M, tol=1e-12, max_iter=500):
    """Smallest eigenpair of the symmetric pencil (Ks, M).

    Small pencils go to dense LAPACK.  Larger ones use shifted inverse
    iteration in which every accepted shift is certified to lie below the
    spectrum by an inertia count; the Rayleigh quotient gives the matching
    upper bound, and the iteration stops once the two meet.
    """
    n = Ks.shape[0]
    if n <= DENSE_LIMIT:
        w, V = sla.eigh(Ks.toarray(), M.toarray())
        return float(w[0]), V[:, 0]
    Ks, M = sp.csc_matrix(Ks), sp.csc_matrix(M)
    lo, scale = _gershgorin_lower_bound(Ks, M)
    lo -= 1e-8 * (scale + abs(lo))
    x = np.ones(n)
    x /= np.sqrt(x @ (M @ x))
    hi = float(x @ (Ks @ x))
    sigma = lo
    for _ in range(max_iter):
        ok, lu = _positive_definite(Ks - sigma * M)
        if not ok:
            sigma = lo + 0.5 * (sigma - lo)
            continue
        lo = sigma
        d = np.abs((Ks - sigma * M).diagonal())
        d[d == 0] = 1.0
        s = 1.0 / np.sqrt(d)
        y = s * lu.solve(s * (M @ x))
        y /= np.sqrt(y @ (M @ y))
        rq = float(y @ (Ks @ y))
        x = y
        hi = min(hi, rq)
        if hi - lo <= max(tol * max(1.0, abs(hi)), 1e-15 * scale):
            return hi, x
        sigma = rq - 1e-3 * (rq - lo)
    raise NonConvergenceError(
        f"symmetric eigensolver did not converge (bracket [{lo!r}, {hi!r}])"
    )
