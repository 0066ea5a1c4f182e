"""Meshes, boundary tagging and exhaustions.

Boundary facets carry one of three tags: ``"R"`` (Robin), ``"D"`` (Dirichlet)
or ``"C"`` (cut, i.e. artificial truncation boundary; treated as Dirichlet by
the assembly).  Freshly built meshes have untagged facets (empty string).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import shapely
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import Delaunay

from .errors import DecompositionError, GeometryError, TransversalityError

ROBIN, DIRICHLET, CUT = "R", "D", "C"
TAGS = (ROBIN, DIRICHLET, CUT)

BOUNDARY_TOL = 1e-12
ANGLE_TOL = 1e-6


def _never(point):
    return False


def _always(point):
    return True


def coordinate_is(value: float, axis: int = 0, tol: float = BOUNDARY_TOL):
    """Predicate selecting boundary points with ``point[axis] == value``."""

    def pred(point):
        return abs(point[axis] - value) <= tol * max(1.0, abs(value))

    pred.__name__ = f"coordinate_{axis}_is_{value!r}"
    return pred


# ---------------------------------------------------------------------------
# domain descriptions


@dataclass(frozen=True)
class DomainSpec:
    """A domain together with its Robin/Dirichlet decomposition.

    ``kind`` is one of ``"interval"`` (``interval=(a, b)``, infinite ends
    allowed), ``"polygon"`` (``polygon`` = vertex loop) or ``"halfspaces"``
    (``halfspaces`` = tuples ``(nx, ny, c)`` meaning ``nx*x + ny*y < c``).
    ``dirichlet`` defaults to the complement of ``robin``.
    """

    kind: str
    interval: Optional[tuple] = None
    polygon: Optional[tuple] = None
    halfspaces: Optional[tuple] = None
    robin: Callable = _never
    dirichlet: Optional[Callable] = None

    @classmethod
    def make_interval(cls, a, b, robin=_never, dirichlet=None):
        a, b = float(a), float(b)
        if not a < b:
            raise GeometryError(f"empty interval ({a}, {b})")
        return cls("interval", interval=(a, b), robin=robin, dirichlet=dirichlet)

    @classmethod
    def make_polygon(cls, vertices, robin=_never, dirichlet=None):
        poly = _validated_polygon(vertices)
        loop = tuple(tuple(map(float, p)) for p in np.asarray(poly.exterior.coords)[:-1])
        return cls("polygon", polygon=loop, robin=robin, dirichlet=dirichlet)

    @classmethod
    def make_halfspaces(cls, halfspaces, robin=_never, dirichlet=None):
        hs = tuple((float(nx), float(ny), float(c)) for nx, ny, c in halfspaces)
        if not hs:
            raise GeometryError("at least one half-space is required")
        return cls("halfspaces", halfspaces=hs, robin=robin, dirichlet=dirichlet)

    @property
    def dimension(self) -> int:
        return 1 if self.kind == "interval" else 2

    @property
    def bounded(self) -> bool:
        if self.kind == "interval":
            return all(math.isfinite(v) for v in self.interval)
        return self.kind == "polygon"

    def classify_point(self, point) -> str:
        """Return ``"R"`` or ``"D"`` for a boundary point."""
        point = np.atleast_1d(np.asarray(point, dtype=float))
        is_rob = bool(self.robin(point))
        if self.dirichlet is None:
            return ROBIN if is_rob else DIRICHLET
        is_dir = bool(self.dirichlet(point))
        if is_rob == is_dir:
            raise DecompositionError(
                f"boundary point {point.tolist()} satisfies "
                + ("both" if is_rob else "neither")
                + " of the Robin/Dirichlet predicates"
            )
        return ROBIN if is_rob else DIRICHLET

    def on_boundary(self, point, tol: float = BOUNDARY_TOL) -> bool:
        point = np.atleast_1d(np.asarray(point, dtype=float))
        scale = max(1.0, float(np.max(np.abs(point))))
        if self.kind == "interval":
            return any(
                math.isfinite(e) and abs(point[0] - e) <= tol * max(scale, abs(e))
                for e in self.interval
            )
        if self.kind == "polygon":
            ring = shapely.LinearRing(self.polygon)
            return ring.distance(shapely.Point(point)) <= tol * scale
        vals = [nx * point[0] + ny * point[1] - c for nx, ny, c in self.halfspaces]
        norms = [math.hypot(nx, ny) for nx, ny, _ in self.halfspaces]
        active = [abs(v) <= tol * scale * n for v, n in zip(vals, norms)]
        inside = [v <= tol * scale * n for v, n in zip(vals, norms)]
        return any(active) and all(inside)

    def contains(self, point) -> bool:
        point = np.atleast_1d(np.asarray(point, dtype=float))
        if self.kind == "interval":
            return self.interval[0] < point[0] < self.interval[1]
        if self.kind == "polygon":
            return bool(shapely.contains_xy(shapely.Polygon(self.polygon), point[0], point[1]))
        return all(nx * point[0] + ny * point[1] < c for nx, ny, c in self.halfspaces)


def _validated_polygon(vertices):
    pts = np.asarray(vertices, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) < 3:
        raise GeometryError("a polygon needs at least three 2D vertices")
    if np.allclose(pts[0], pts[-1]):
        pts = pts[:-1]
    ring = shapely.LinearRing(pts)
    if not ring.is_simple:
        raise GeometryError("polygon is self-intersecting")
    poly = shapely.Polygon(ring)
    if not poly.is_valid or poly.area <= 0:
        raise GeometryError("polygon is degenerate")
    return shapely.geometry.polygon.orient(poly, sign=1.0)


# ---------------------------------------------------------------------------
# meshes


def _freeze(a):
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class MeshedDomain:
    """Simplicial mesh with tagged boundary facets.

    ``vertices`` has shape (N, d), ``elements`` (E, d+1), ``facets`` (F, d).
    ``tags[i]`` is the tag of ``facets[i]`` (``""`` while untagged).
    """

    vertices: np.ndarray
    elements: np.ndarray
    facets: np.ndarray
    tags: tuple = field(default=())

    def __post_init__(self):
        object.__setattr__(self, "vertices", _freeze(np.asarray(self.vertices, dtype=float)))
        object.__setattr__(self, "elements", _freeze(np.asarray(self.elements, dtype=np.int64)))
        object.__setattr__(self, "facets", _freeze(np.asarray(self.facets, dtype=np.int64)))
        tags = tuple(self.tags) if self.tags else ("",) * len(self.facets)
        if len(tags) != len(self.facets):
            raise GeometryError("one tag per boundary facet is required")
        object.__setattr__(self, "tags", tags)
        if self.vertices.ndim != 2 or self.vertices.shape[1] not in (1, 2):
            raise GeometryError("vertices must have shape (N, 1) or (N, 2)")

    @property
    def dim(self) -> int:
        return self.vertices.shape[1]

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def h(self) -> float:
        return float(self.element_diameters().max())

    def element_measures(self) -> np.ndarray:
        v = self.vertices[self.elements]
        if self.dim == 1:
            return v[:, 1, 0] - v[:, 0, 0]
        e1, e2 = v[:, 1] - v[:, 0], v[:, 2] - v[:, 0]
        return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])

    def element_diameters(self) -> np.ndarray:
        v = self.vertices[self.elements]
        if self.dim == 1:
            return np.abs(v[:, 1, 0] - v[:, 0, 0])
        edges = [v[:, 1] - v[:, 0], v[:, 2] - v[:, 1], v[:, 0] - v[:, 2]]
        return np.max([np.linalg.norm(e, axis=1) for e in edges], axis=0)

    def centroids(self) -> np.ndarray:
        return self.vertices[self.elements].mean(axis=1)

    def facet_midpoints(self) -> np.ndarray:
        return self.vertices[self.facets].mean(axis=1)

    def facet_measures(self) -> np.ndarray:
        if self.dim == 1:
            return np.ones(len(self.facets))
        v = self.vertices[self.facets]
        return np.linalg.norm(v[:, 1] - v[:, 0], axis=1)

    def with_tags(self, tags) -> "MeshedDomain":
        return MeshedDomain(self.vertices, self.elements, self.facets, tuple(tags))

    def tagged(self, tag: str) -> np.ndarray:
        return np.array([i for i, t in enumerate(self.tags) if t == tag], dtype=np.int64)

    def boundary_measure(self, tag: str) -> float:
        idx = self.tagged(tag)
        return float(self.facet_measures()[idx].sum()) if len(idx) else 0.0

    def constrained_vertices(self) -> np.ndarray:
        """Vertices on Dirichlet or Cut facets (the zero-trace set), sorted."""
        idx = [i for i, t in enumerate(self.tags) if t in (DIRICHLET, CUT)]
        if not idx:
            return np.zeros(0, dtype=np.int64)
        return np.unique(self.facets[idx].ravel())

    def nearest_vertex(self, point) -> int:
        point = np.atleast_1d(np.asarray(point, dtype=float))
        return int(np.argmin(np.linalg.norm(self.vertices - point, axis=1)))

    def is_connected(self) -> bool:
        n_el, nv = self.elements.shape
        rows = np.repeat(np.arange(n_el), nv)
        graph = coo_matrix(
            (np.ones(rows.size), (rows, self.elements.ravel() + n_el)),
            shape=(n_el + self.n_vertices,) * 2,
        )
        used = np.zeros(n_el + self.n_vertices, dtype=bool)
        used[:n_el] = True
        used[self.elements.ravel() + n_el] = True
        _, labels = connected_components(graph, directed=False)
        return len(np.unique(labels[used])) == 1

    def evaluate(self, nodal, points) -> np.ndarray:
        """Evaluate the P1 interpolant of vertex values at ``points``.

        Points outside the mesh evaluate to ``nan``.
        """
        nodal = np.asarray(nodal, dtype=float)
        pts = np.asarray(points, dtype=float).reshape(-1, self.dim)
        if self.dim == 1:
            order = np.argsort(self.vertices[:, 0])
            xs, vals = self.vertices[order, 0], nodal[order]
            out = np.interp(pts[:, 0], xs, vals)
            out[(pts[:, 0] < xs[0] - 1e-12) | (pts[:, 0] > xs[-1] + 1e-12)] = np.nan
            return out
        v = self.vertices[self.elements]
        T = np.stack([v[:, 1] - v[:, 0], v[:, 2] - v[:, 0]], axis=-1)
        Tinv = np.linalg.inv(T)
        out = np.full(len(pts), np.nan)
        for i, p in enumerate(pts):
            lam = np.einsum("eij,ej->ei", Tinv, p - v[:, 0])
            bary = np.column_stack([1 - lam.sum(axis=1), lam])
            hit = np.nonzero(bary.min(axis=1) >= -1e-10)[0]
            if len(hit):
                e = hit[0]
                out[i] = bary[e] @ nodal[self.elements[e]]
        return out


def _boundary_facets_1d(elements):
    counts = np.bincount(elements.ravel())
    return np.nonzero(counts == 1)[0].reshape(-1, 1)


def _boundary_facets_2d(elements):
    edges = np.concatenate([elements[:, [0, 1]], elements[:, [1, 2]], elements[:, [2, 0]]])
    key = np.sort(edges, axis=1)
    uniq, inverse, counts = np.unique(key, axis=0, return_inverse=True, return_counts=True)
    inverse = inverse.ravel()
    once = counts[inverse] == 1
    # keep the element's own (counter-clockwise) orientation for boundary edges
    bnd = edges[once]
    order = np.lexsort((np.sort(bnd, axis=1)[:, 1], np.sort(bnd, axis=1)[:, 0]))
    return bnd[order]


def mesh_from_points_1d(points) -> MeshedDomain:
    xs = np.asarray(points, dtype=float)
    if xs.ndim != 1 or len(xs) < 2 or np.any(np.diff(xs) <= 0):
        raise GeometryError("interval vertices must be strictly increasing")
    n = len(xs)
    elements = np.column_stack([np.arange(n - 1), np.arange(1, n)])
    return MeshedDomain(xs.reshape(-1, 1), elements, _boundary_facets_1d(elements))


def build_interval_mesh(a: float, b: float, n: int) -> MeshedDomain:
    """Uniform mesh of ``[a, b]`` with ``n`` segments."""
    if not (math.isfinite(a) and math.isfinite(b)) or a >= b:
        raise GeometryError(f"invalid interval ({a}, {b})")
    if int(n) != n or n < 2:
        raise GeometryError(f"need at least 2 segments, got {n}")
    xs = a + (b - a) * np.arange(n + 1) / n
    xs[-1] = b
    return mesh_from_points_1d(xs)


def _grid_lines(coords, h):
    """Sorted coordinates refining the breakpoints ``coords`` to spacing <= h."""
    coords = np.unique(np.asarray(coords, dtype=float))
    lines = [coords[:1]]
    for lo, hi in zip(coords[:-1], coords[1:]):
        m = max(1, int(math.ceil((hi - lo) / h - 1e-9)))
        seg = lo + (hi - lo) * np.arange(1, m + 1) / m
        seg[-1] = hi
        lines.append(seg)
    return np.concatenate(lines)


def _crisscross(poly, h):
    xs0, ys0 = np.asarray(poly.exterior.coords).T
    xs, ys = _grid_lines(xs0, h), _grid_lines(ys0, h)
    ny = len(ys)
    cx = 0.5 * (xs[:-1] + xs[1:])
    cy = 0.5 * (ys[:-1] + ys[1:])
    CX, CY = np.meshgrid(cx, cy, indexing="ij")
    keep = shapely.contains_xy(poly, CX, CY)
    I, J = np.nonzero(keep)
    v00, v10, v11, v01 = I * ny + J, (I + 1) * ny + J, (I + 1) * ny + J + 1, I * ny + J + 1
    even = (I + J) % 2 == 0
    tris = np.concatenate(
        [
            np.column_stack([v00, v10, v11])[even],
            np.column_stack([v00, v11, v01])[even],
            np.column_stack([v00, v10, v01])[~even],
            np.column_stack([v10, v11, v01])[~even],
        ]
    )
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    verts = np.column_stack([X.ravel(), Y.ravel()])
    used = np.unique(tris)
    remap = -np.ones(len(verts), dtype=np.int64)
    remap[used] = np.arange(len(used))
    tris = remap[tris]
    # element order: by centroid, deterministic
    cen = verts[used][tris].mean(axis=1)
    order = np.lexsort((cen[:, 1], cen[:, 0]))
    return verts[used], tris[order]


def _delaunay_mesh(poly, h):
    ext = np.asarray(poly.exterior.coords)[:-1]
    bpts = []
    for p, q in zip(ext, np.roll(ext, -1, axis=0)):
        m = max(1, int(math.ceil(np.linalg.norm(q - p) / h - 1e-9)))
        t = np.arange(m)[:, None] / m
        bpts.append(p + t * (q - p))
    bpts = np.concatenate(bpts)
    minx, miny, maxx, maxy = poly.bounds
    gx = np.arange(minx, maxx + h, h)
    gy = np.arange(miny, maxy + h, h)
    GX, GY = np.meshgrid(gx, gy, indexing="ij")
    cand = np.column_stack([GX.ravel(), GY.ravel()])
    inside = shapely.contains_xy(poly, cand[:, 0], cand[:, 1])
    ring = poly.exterior
    dist = shapely.distance(ring, shapely.points(cand))
    cand = cand[inside & (dist > 0.45 * h)]
    pts = np.concatenate([bpts, cand])
    tri = Delaunay(pts)
    simp = tri.simplices
    cen = pts[simp].mean(axis=1)
    simp = simp[shapely.contains_xy(poly, cen[:, 0], cen[:, 1])]
    v = pts[simp]
    area = 0.5 * ((v[:, 1, 0] - v[:, 0, 0]) * (v[:, 2, 1] - v[:, 0, 1])
                  - (v[:, 1, 1] - v[:, 0, 1]) * (v[:, 2, 0] - v[:, 0, 0]))
    simp = np.where((area < 0)[:, None], simp[:, [0, 2, 1]], simp)
    nb = len(bpts)
    bnd = _boundary_facets_2d(simp)
    if len(bnd) != nb or np.any(bnd >= nb):
        raise GeometryError("could not produce a boundary-conforming triangulation")
    return pts, simp


def build_polygon_mesh(polygon, h_target: float) -> MeshedDomain:
    """Conforming P1 triangulation of a simple polygon.

    Rectilinear polygons (axis-aligned edges, which includes rectangles) get the
    structured criss-cross pattern with right isosceles-type triangles; other
    polygons are triangulated by Delaunay on boundary and lattice points.
    """
    if not h_target > 0:
        raise GeometryError("h_target must be positive")
    poly = polygon if isinstance(polygon, shapely.Polygon) else _validated_polygon(polygon)
    poly = shapely.geometry.polygon.orient(poly, sign=1.0)
    ext = np.asarray(poly.exterior.coords)
    d = np.diff(ext, axis=0)
    rectilinear = np.all((np.abs(d[:, 0]) <= 1e-14) | (np.abs(d[:, 1]) <= 1e-14))
    if rectilinear:
        verts, tris = _crisscross(poly, h_target)
    else:
        verts, tris = _delaunay_mesh(poly, h_target)
    mesh = MeshedDomain(verts, tris, _boundary_facets_2d(tris))
    if mesh.h > 2 * h_target * (1 + 1e-12):
        raise GeometryError(f"mesh diameter {mesh.h} exceeds 2*h_target")
    return mesh


def tag_boundary(mesh: MeshedDomain, spec: DomainSpec) -> MeshedDomain:
    """Tag every non-Cut facet Robin/Dirichlet by evaluating the predicates at its midpoint."""
    mids = mesh.facet_midpoints()
    tags = []
    for mid, tag in zip(mids, mesh.tags):
        if tag == CUT:
            tags.append(CUT)
            continue
        if not spec.on_boundary(mid):
            raise GeometryError(f"facet midpoint {mid.tolist()} is not on the domain boundary")
        tags.append(spec.classify_point(mid))
    out = mesh.with_tags(tags)
    if spec.bounded and not any(t in (DIRICHLET, CUT) for t in tags):
        raise DecompositionError("bounded domains need a nonempty Dirichlet portion")
    return out


# ---------------------------------------------------------------------------
# exhaustions


def dyadic_window(k, dim=1):
    """(-2^k, 2^k) in every coordinate."""
    r = 2.0 ** k
    return ((-r, r),) * dim


def geometric_window(base=4.0):
    """k -> (base^-k, base^k): windows for domains touching the origin."""

    def window(k):
        return ((float(base) ** -k, float(base) ** k),)

    return window


@dataclass(frozen=True)
class ExhaustionSpec:
    """Exhaustion Omega_k = Omega intersected with the box ``window(k)``.

    ``window(k)`` returns one ``(lo, hi)`` pair per coordinate and must be
    increasing in k; ``mesh_h(k)`` is the (nonincreasing) target mesh size.
    For ``grading="geometric"`` (1D, positive coordinates only) ``mesh_h`` is a
    relative spacing and vertices sit on the lattice ``exp(j * h)``.
    """

    base: DomainSpec
    window: Callable
    mesh_h: Callable
    grading: str = "uniform"

    def region(self, k):
        win = tuple(tuple(map(float, w)) for w in self.window(k))
        if self.base.kind == "interval":
            a, b = self.base.interval
            lo, hi = max(a, win[0][0]), min(b, win[0][1])
            if not lo < hi:
                raise GeometryError(f"level {k}: window does not meet the domain")
            return (lo, hi)
        (x0, x1), (y0, y1) = win
        box = shapely.box(x0, y0, x1, y1)
        if self.base.kind == "polygon":
            region = shapely.Polygon(self.base.polygon).intersection(box)
        else:
            region = _clip_box(box, self.base.halfspaces)
        if region.is_empty or region.area <= 0:
            raise GeometryError(f"level {k}: window does not meet the domain")
        if not isinstance(region, shapely.Polygon):
            raise GeometryError(f"level {k}: intersection with the window is disconnected")
        return shapely.geometry.polygon.orient(region, sign=1.0)


def _clip_box(box, halfspaces):
    pts = list(np.asarray(box.exterior.coords)[:-1])
    for nx, ny, c in halfspaces:
        out = []
        for i, p in enumerate(pts):
            q = pts[(i + 1) % len(pts)]
            fp, fq = nx * p[0] + ny * p[1] - c, nx * q[0] + ny * q[1] - c
            if fp <= 0:
                out.append(p)
            if (fp < 0 < fq) or (fq < 0 < fp):
                t = fp / (fp - fq)
                out.append(p + t * (q - p))
        pts = out
        if len(pts) < 3:
            return shapely.Polygon()
    return shapely.Polygon(pts)


def _interval_points(lo, hi, h, grading):
    if grading == "uniform":
        j = np.arange(math.floor(lo / h) + 1, math.ceil(hi / h))
        inner = j * h
    elif grading == "geometric":
        if lo <= 0:
            raise GeometryError("geometric grading needs a window in (0, inf)")
        j = np.arange(math.floor(math.log(lo) / h) + 1, math.ceil(math.log(hi) / h))
        inner = np.exp(j * h)
    else:
        raise GeometryError(f"unknown grading {grading!r}")
    inner = inner[(inner > lo) & (inner < hi)]
    # drop lattice points crowding the window ends
    if len(inner):
        left_gap = (inner[0] - lo) if grading == "uniform" else math.log(inner[0] / lo)
        right_gap = (hi - inner[-1]) if grading == "uniform" else math.log(hi / inner[-1])
        if left_gap < 0.25 * h:
            inner = inner[1:]
        if len(inner) and right_gap < 0.25 * h:
            inner = inner[:-1]
    return np.concatenate([[lo], inner, [hi]])


def make_exhaustion(spec: ExhaustionSpec, k: int) -> MeshedDomain:
    """Mesh of the k-th exhaustion domain with Robin/Dirichlet/Cut tags."""
    if k < 1:
        raise GeometryError("exhaustion levels start at k = 1")
    base = spec.base
    h = float(spec.mesh_h(k))
    region = spec.region(k)
    if base.kind == "interval":
        mesh = mesh_from_points_1d(_interval_points(region[0], region[1], h, spec.grading))
    else:
        mesh = build_polygon_mesh(region, h)
    if not mesh.is_connected():
        raise GeometryError(f"level {k}: exhaustion domain is disconnected")
    mids = mesh.facet_midpoints()
    pre = tuple("" if base.on_boundary(m) else CUT for m in mids)
    mesh = tag_boundary(mesh.with_tags(pre), base)
    check_transversality(mesh)
    return mesh


def check_transversality(mesh: MeshedDomain, tol: float = ANGLE_TOL) -> None:
    """Raise if a Cut facet meets a Robin facet tangentially."""
    if mesh.dim == 1:
        return
    cut = mesh.tagged(CUT)
    rob = mesh.tagged(ROBIN)
    if not len(cut) or not len(rob):
        return
    v = mesh.vertices
    for ci in cut:
        a = mesh.facets[ci]
        da = v[a[1]] - v[a[0]]
        for ri in rob:
            b = mesh.facets[ri]
            if not set(a.tolist()) & set(b.tolist()):
                continue
            db = v[b[1]] - v[b[0]]
            cosang = abs(da @ db) / (np.linalg.norm(da) * np.linalg.norm(db))
            angle = math.acos(min(1.0, cosang))
            if angle < tol:
                raise TransversalityError(
                    f"cut facet {a.tolist()} is tangent to Robin facet {b.tolist()}"
                )


def exhaustion_levels(spec: ExhaustionSpec, k_max: int):
    """Yield ``(k, mesh)`` for k = 1..k_max."""
    for k in range(1, k_max + 1):
        yield k, make_exhaustion(spec, k)


# ---------------------------------------------------------------------------
# text format


def write_mesh(mesh: MeshedDomain, stream) -> None:
    for p in mesh.vertices:
        stream.write("v " + " ".join(repr(float(c)) for c in p) + "\n")
    for e in mesh.elements:
        stream.write("e " + " ".join(str(int(i)) for i in e) + "\n")
    for f, t in zip(mesh.facets, mesh.tags):
        if t not in TAGS:
            raise GeometryError("only fully tagged meshes can be written")
        stream.write("b " + " ".join(str(int(i)) for i in f) + f" {t}\n")


def read_mesh(stream) -> MeshedDomain:
    verts, elems, facets, tags = [], [], [], []
    dim = None
    for lineno, line in enumerate(stream, 1):
        parts = line.split()
        if not parts:
            raise GeometryError(f"line {lineno}: empty record")
        kind, rest = parts[0], parts[1:]
        try:
            if kind == "v" and len(rest) in (1, 2):
                verts.append([float(x) for x in rest])
                dim = dim or len(rest)
                if len(rest) != dim:
                    raise ValueError
            elif kind == "e" and len(rest) in (2, 3):
                elems.append([int(i) for i in rest])
            elif kind == "b" and len(rest) in (2, 3) and rest[-1] in TAGS:
                facets.append([int(i) for i in rest[:-1]])
                tags.append(rest[-1])
            else:
                raise ValueError
        except ValueError:
            raise GeometryError(f"line {lineno}: malformed record {line.rstrip()!r}") from None
    if not verts or not elems:
        raise GeometryError("mesh file has no vertices or elements")
    nv = len(elems[0])
    if any(len(e) != nv for e in elems) or nv != dim + 1:
        raise GeometryError("element arity does not match the vertex dimension")
    if any(len(f) != dim for f in facets):
        raise GeometryError("facet arity does not match the vertex dimension")
    return MeshedDomain(np.array(verts), np.array(elems), np.array(facets).reshape(-1, dim), tuple(tags))
