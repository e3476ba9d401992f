"""Piecewise-linear immersed complexes and their metric-measure views.

A complex is either a polyline (``dim_m == 1``) or a triangle mesh
(``dim_m == 2``) sitting in a Euclidean space of dimension ``m + p``.
Everything downstream (volumes, spectra, intersection counts) is computed
from the vertex array and the simplex index array held here.
"""

from __future__ import annotations

import csv
import math
import re
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy import sparse
from scipy.sparse import csgraph
from scipy.spatial.distance import cdist

# Relative threshold below which a simplex is considered degenerate.
DEGENERATE_RTOL = 1e-12


class ComplexError(ValueError):
    """Raised for malformed or degenerate input geometry."""


def _simplex_measures(vertices: np.ndarray, simplices: np.ndarray) -> np.ndarray:
    p0 = vertices[simplices[:, 0]]
    e1 = vertices[simplices[:, 1]] - p0
    if simplices.shape[1] == 2:
        return np.linalg.norm(e1, axis=1)
    e2 = vertices[simplices[:, 2]] - p0
    # Gram determinant works in any ambient dimension.
    g11 = np.einsum("ij,ij->i", e1, e1)
    g22 = np.einsum("ij,ij->i", e2, e2)
    g12 = np.einsum("ij,ij->i", e1, e2)
    return 0.5 * np.sqrt(np.maximum(g11 * g22 - g12 * g12, 0.0))


def _edges(simplices: np.ndarray) -> np.ndarray:
    """Sorted vertex pairs of all triangle edges, one row per (triangle, edge)."""
    e = np.concatenate(
        [simplices[:, [0, 1]], simplices[:, [1, 2]], simplices[:, [2, 0]]]
    )
    return np.sort(e, axis=1)


@dataclass(frozen=True, eq=False)
class ImmersedComplex:
    """A polyline or triangle mesh immersed in R^(m+p).

    ``meta`` carries generator bookkeeping (e.g. spike axes) and is never
    used for numerics.
    """

    dim_m: int
    vertices: np.ndarray
    simplices: np.ndarray
    label: str = "complex"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        v = np.ascontiguousarray(np.asarray(self.vertices, dtype=float))
        s = np.ascontiguousarray(np.asarray(self.simplices, dtype=np.int64))
        if self.dim_m not in (1, 2):
            raise ComplexError("dim_m must be 1 or 2")
        if v.ndim != 2 or s.ndim != 2 or s.shape[1] != self.dim_m + 1:
            raise ComplexError("inconsistent ambient dimension or simplex arity")
        if v.shape[1] < self.dim_m + 1:
            raise ComplexError(
                f"ambient dimension {v.shape[1]} < m+1 = {self.dim_m + 1}"
            )
        if len(s) == 0:
            raise ComplexError("complex has no simplices")
        if s.min() < 0 or s.max() >= len(v):
            raise ComplexError("simplex index out of range")
        if not np.all(np.isfinite(v)):
            raise ComplexError("non-finite vertex coordinate")
        v.setflags(write=False)
        s.setflags(write=False)
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "simplices", s)

        meas = _simplex_measures(v, s)
        scale = max(float(np.ptp(v, axis=0).max()), 1e-300)
        if np.any(meas <= DEGENERATE_RTOL * scale**self.dim_m):
            raise ComplexError("zero-measure simplex")
        meas.setflags(write=False)
        object.__setattr__(self, "_measures", meas)

        if self.dim_m == 2:
            _, counts = np.unique(_edges(s), axis=0, return_counts=True)
            if counts.max() > 2:
                raise ComplexError("edge shared by more than two triangles")
        else:
            deg = np.bincount(s.ravel(), minlength=len(v))
            if deg.max() > 2:
                raise ComplexError("polyline vertex with more than two segments")

    # -- basic attributes -------------------------------------------------
    @property
    def codim_p(self) -> int:
        return self.vertices.shape[1] - self.dim_m

    @property
    def ambient_dim(self) -> int:
        return self.vertices.shape[1]

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_simplices(self) -> int:
        return len(self.simplices)

    @property
    def simplex_measures(self) -> np.ndarray:
        return self._measures

    @cached_property
    def barycenters(self) -> np.ndarray:
        return self.vertices[self.simplices].mean(axis=1)

    @cached_property
    def boundary_flags(self) -> np.ndarray:
        """True for simplices touching the boundary."""
        s = self.simplices
        if self.dim_m == 1:
            deg = np.bincount(s.ravel(), minlength=self.n_vertices)
            return (deg[s] == 1).any(axis=1)
        e = _edges(s)
        _, inv, counts = np.unique(e, axis=0, return_inverse=True, return_counts=True)
        on_bdry = counts[inv.ravel()] == 1
        return on_bdry.reshape(3, -1).any(axis=0)

    @property
    def is_closed(self) -> bool:
        return not bool(self.boundary_flags.any())

    @cached_property
    def max_edge_length(self) -> float:
        v, s = self.vertices, self.simplices
        if self.dim_m == 1:
            return float(self.simplex_measures.max())
        e = _edges(s)
        return float(np.linalg.norm(v[e[:, 0]] - v[e[:, 1]], axis=1).max())

    @cached_property
    def vertex_adjacency(self) -> sparse.csr_matrix:
        """Symmetric 0/1 vertex adjacency (edge graph)."""
        s = self.simplices
        if self.dim_m == 1:
            e = s
        else:
            e = _edges(s)
        n = self.n_vertices
        a = sparse.coo_matrix((np.ones(len(e)), (e[:, 0], e[:, 1])), shape=(n, n))
        a = (a + a.T).tocsr()
        a.data[:] = 1.0
        return a

    def scaled(self, t: float) -> "ImmersedComplex":
        return ImmersedComplex(
            self.dim_m, self.vertices * t, self.simplices, f"{self.label}*{t:g}", self.meta
        )

    def __repr__(self):
        return (
            f"ImmersedComplex({self.label!r}, m={self.dim_m}, p={self.codim_p}, "
            f"nv={self.n_vertices}, ns={self.n_simplices}, closed={self.is_closed})"
        )


def riemannian_volume(c: ImmersedComplex) -> float:
    """Total length (m=1) or area (m=2)."""
    return float(c.simplex_measures.sum())


# --- regions --------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Region:
    """A set of simplices of a particular complex, used as a removed domain D."""

    simplex_ids: np.ndarray
    volume_fraction: float

    @classmethod
    def from_simplices(cls, c: ImmersedComplex, ids: Iterable[int]) -> "Region":
        ids = np.unique(np.asarray(list(ids) if not isinstance(ids, np.ndarray) else ids, dtype=np.int64))
        if len(ids) and (ids.min() < 0 or ids.max() >= c.n_simplices):
            raise ComplexError("region simplex index out of range")
        frac = float(c.simplex_measures[ids].sum() / c.simplex_measures.sum())
        return cls(ids, frac)

    @classmethod
    def empty(cls) -> "Region":
        return cls(np.zeros(0, dtype=np.int64), 0.0)

    @classmethod
    def from_vertex_mask(cls, c: ImmersedComplex, mask: np.ndarray) -> "Region":
        """Simplices having at least one vertex in ``mask``."""
        return cls.from_simplices(c, np.flatnonzero(np.asarray(mask)[c.simplices].any(axis=1)))

    def mask(self, n_simplices: int) -> np.ndarray:
        m = np.zeros(n_simplices, dtype=bool)
        m[self.simplex_ids] = True
        return m

    def __len__(self):
        return len(self.simplex_ids)


def remove_region(c: ImmersedComplex, d: Region) -> ImmersedComplex:
    """Delete the region's simplices; unused vertices are dropped and reindexed."""
    if len(d) == 0:
        return c
    keep = ~d.mask(c.n_simplices)
    if not keep.any():
        raise ComplexError("region covers the whole complex")
    s = c.simplices[keep]
    used = np.unique(s)
    remap = np.full(c.n_vertices, -1, dtype=np.int64)
    remap[used] = np.arange(len(used))
    return ImmersedComplex(
        c.dim_m,
        c.vertices[used],
        remap[s],
        label=f"{c.label}-D[{len(d)}]",
        meta=dict(c.meta, removed_fraction=d.volume_fraction),
    )


# --- metric-measure view ----------------------------------------------------


@dataclass(frozen=True, eq=False)
class MetricMeasureSpace:
    """Finite metric-measure space on simplex barycenters.

    ``weights`` are simplex measures, zeroed outside the retained part when
    the space was built with a restriction.
    """

    points: np.ndarray
    weights: np.ndarray
    metric: str
    _dist: np.ndarray = field(repr=False)

    @property
    def size(self) -> int:
        return len(self.points)

    @property
    def total_weight(self) -> float:
        return float(self.weights.sum())

    def distance(self, i: int, j: int) -> float:
        return float(self._dist[i, j])

    def distance_matrix(self) -> np.ndarray:
        return self._dist

    @property
    def diameter(self) -> float:
        return float(self._dist.max())


def _dual_graph(c: ImmersedComplex) -> sparse.csr_matrix:
    """Simplices sharing a vertex, weighted by barycenter distance."""
    ns = c.n_simplices
    rows = np.repeat(np.arange(ns), c.simplices.shape[1])
    inc = sparse.csr_matrix(
        (np.ones(rows.size), (rows, c.simplices.ravel())), shape=(ns, c.n_vertices)
    )
    adj = (inc @ inc.T).tocoo()
    off = adj.row != adj.col
    i, j = adj.row[off], adj.col[off]
    b = c.barycenters
    w = np.linalg.norm(b[i] - b[j], axis=1)
    return sparse.csr_matrix((w, (i, j)), shape=(ns, ns))


def to_mm_space(
    c: ImmersedComplex,
    metric: str = "euclidean",
    restricted_to: Region | None = None,
) -> MetricMeasureSpace:
    """Barycenter metric-measure space of ``c``.

    ``restricted_to`` is the removed region D: its simplices keep their
    points but get weight zero, so the weights realize the Riemannian
    measure of the complement of D.
    """
    pts = c.barycenters
    w = c.simplex_measures.copy()
    if restricted_to is not None and len(restricted_to):
        w[restricted_to.simplex_ids] = 0.0
    if metric == "euclidean":
        dist = cdist(pts, pts)
    elif metric == "graph-geodesic":
        dist = csgraph.shortest_path(_dual_graph(c), method="D", directed=False)
        if np.isinf(dist).any():
            raise ComplexError("graph-geodesic metric needs a connected complex")
        # Geodesic paths are at least as long as chords; clamp round-off.
        dist = np.maximum(dist, cdist(pts, pts))
    else:
        raise ValueError(f"unknown metric {metric!r}")
    dist.setflags(write=False)
    w.setflags(write=False)
    return MetricMeasureSpace(pts, w, metric, dist)


# --- generators -------------------------------------------------------------


def make_circle(n: int, radius: float = 1.0) -> ImmersedComplex:
    if n < 3:
        raise ComplexError("circle needs at least 3 segments")
    t = 2 * np.pi * np.arange(n) / n
    v = radius * np.column_stack([np.cos(t), np.sin(t)])
    s = np.column_stack([np.arange(n), (np.arange(n) + 1) % n])
    return ImmersedComplex(1, v, s, label=f"circle({n})")


_PHI = (1 + 5**0.5) / 2
_ICO_V = np.array(
    [
        [-1, _PHI, 0], [1, _PHI, 0], [-1, -_PHI, 0], [1, -_PHI, 0],
        [0, -1, _PHI], [0, 1, _PHI], [0, -1, -_PHI], [0, 1, -_PHI],
        [_PHI, 0, -1], [_PHI, 0, 1], [-_PHI, 0, -1], [-_PHI, 0, 1],
    ]
)
_ICO_F = np.array(
    [
        [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
        [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
        [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
        [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
    ]
)


def icosahedron() -> tuple[np.ndarray, np.ndarray]:
    v = _ICO_V / np.linalg.norm(_ICO_V, axis=1, keepdims=True)
    return v, _ICO_F.copy()


def _icosphere_arrays(subdiv: int) -> tuple[np.ndarray, np.ndarray]:
    v, f = icosahedron()
    verts = list(v)
    for _ in range(subdiv):
        cache: dict[tuple[int, int], int] = {}

        def mid(a, b):
            key = (a, b) if a < b else (b, a)
            if key not in cache:
                p = verts[a] + verts[b]
                verts.append(p / np.linalg.norm(p))
                cache[key] = len(verts) - 1
            return cache[key]

        nf = []
        for a, b, c in f:
            ab, bc, ca = mid(a, b), mid(b, c), mid(c, a)
            nf += [[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]
        f = np.array(nf)
    return np.array(verts), f


def make_sphere(subdiv: int, radius: float = 1.0) -> ImmersedComplex:
    if subdiv < 0:
        raise ComplexError("subdivision level must be >= 0")
    v, f = _icosphere_arrays(subdiv)
    return ImmersedComplex(2, radius * v, f, label=f"sphere({subdiv})")


def make_ellipsoid(a: float, b: float, c: float, subdiv: int) -> ImmersedComplex:
    v, f = _icosphere_arrays(subdiv)
    return ImmersedComplex(2, v * np.array([a, b, c]), f, label=f"ellipsoid({a:g},{b:g},{c:g},{subdiv})")


def make_torus(R: float, r: float, res: int) -> ImmersedComplex:
    """Torus of revolution about the z axis, ``res`` x ``res`` quads."""
    if res < 3:
        raise ComplexError("torus needs res >= 3")
    if not 0 < r < R:
        raise ComplexError("torus needs 0 < r < R")
    u = 2 * np.pi * np.arange(res) / res
    uu, ww = np.meshgrid(u, u, indexing="ij")
    rad = R + r * np.cos(ww)
    v = np.column_stack([(rad * np.cos(uu)).ravel(), (rad * np.sin(uu)).ravel(), (r * np.sin(ww)).ravel()])
    i, j = np.meshgrid(np.arange(res), np.arange(res), indexing="ij")
    i1, j1 = (i + 1) % res, (j + 1) % res
    a, b, c, d = i * res + j, i1 * res + j, i1 * res + j1, i * res + j1
    f = np.concatenate([np.column_stack([a.ravel(), b.ravel(), c.ravel()]),
                        np.column_stack([a.ravel(), c.ravel(), d.ravel()])])
    return ImmersedComplex(2, v, f, label=f"torus({R:g},{r:g},{res})")


def _spread_axes(count: int) -> np.ndarray:
    """Farthest-first ordering of icosahedron vertices (deterministic)."""
    v, _ = icosahedron()
    order = [0]
    while len(order) < min(count, len(v)):
        d = np.min(np.linalg.norm(v[:, None] - v[order][None], axis=2), axis=1)
        order.append(int(np.argmax(d)))
    if count > len(v):
        raise ComplexError("at most 12 spikes are supported")
    return v[order]


def make_spiky_sphere(
    subdiv: int, spike_count: int, spike_height: float, spike_radius: float
) -> ImmersedComplex:
    """Unit icosphere with conical spikes.

    Spike axes sit on original icosahedron vertices, so each spike apex is a
    mesh vertex. Vertices within angular distance ``spike_radius`` of an axis
    are pushed out radially by ``spike_height * (1 - angle/spike_radius)``;
    everything else stays on the unit sphere.
    """
    if spike_height <= 0 or spike_radius <= 0:
        raise ComplexError("spike parameters must be positive")
    v, f = _icosphere_arrays(subdiv)
    axes = _spread_axes(spike_count)
    ang = np.arccos(np.clip(v @ axes.T, -1.0, 1.0))  # (nv, spikes)
    bump = np.clip(1.0 - ang / spike_radius, 0.0, None).max(axis=1)
    v = v * (1.0 + spike_height * bump)[:, None]
    label = f"spiky_sphere({subdiv},{spike_count},{spike_height:g},{spike_radius:g})"
    meta = {"spike_axes": axes.tolist(), "spike_radius": spike_radius}
    return ImmersedComplex(2, v, f, label=label, meta=meta)


def spike_region(c: ImmersedComplex) -> Region:
    """Simplices touching a perturbed vertex of a spiky sphere."""
    if "spike_axes" not in c.meta:
        raise ComplexError("complex carries no spike metadata")
    axes = np.asarray(c.meta["spike_axes"])
    u = c.vertices / np.linalg.norm(c.vertices, axis=1, keepdims=True)
    ang = np.arccos(np.clip(u @ axes.T, -1.0, 1.0))
    inside = (ang < c.meta["spike_radius"]).any(axis=1)
    return Region.from_vertex_mask(c, inside)


def cap_region(c: ImmersedComplex, axis: Sequence[float], angle: float) -> Region:
    """Simplices whose barycenter direction lies within ``angle`` of ``axis``."""
    axis = np.asarray(axis, float)
    axis = axis / np.linalg.norm(axis)
    b = c.barycenters
    u = b / np.linalg.norm(b, axis=1, keepdims=True)
    return Region.from_simplices(c, np.flatnonzero(u @ axis > math.cos(angle)))


_SHAPES = {
    "circle": make_circle,
    "sphere": make_sphere,
    "torus": make_torus,
    "ellipsoid": make_ellipsoid,
    "spiky_sphere": make_spiky_sphere,
}


def make_shape(kind: str, *args) -> ImmersedComplex:
    """Build a generator shape, e.g. ``make_shape("torus", 2, 0.5, 64)`` or
    ``make_shape("torus(2,0.5,64)")``."""
    if not args:
        kind, args = parse_shape(kind)
    try:
        gen = _SHAPES[kind]
    except KeyError:
        raise ComplexError(f"unknown shape {kind!r}; choose from {sorted(_SHAPES)}") from None
    int_params = {"circle": (0,), "sphere": (0,), "torus": (2,), "ellipsoid": (3,), "spiky_sphere": (0, 1)}
    args = [int(a) if i in int_params[kind] else float(a) for i, a in enumerate(args)]
    c = gen(*args)
    return c


def parse_shape(text: str) -> tuple[str, tuple]:
    m = re.fullmatch(r"\s*([a-z_]+)\s*\(([^)]*)\)\s*", text)
    if not m:
        raise ComplexError(f"cannot parse shape {text!r}; expected e.g. sphere(3)")
    args = tuple(float(a) for a in m.group(2).split(",") if a.strip())
    return m.group(1), args


# --- file formats -----------------------------------------------------------


def _fan(poly: Sequence[int]) -> list[list[int]]:
    return [[poly[0], poly[i], poly[i + 1]] for i in range(1, len(poly) - 1)]


def _read_off(path: Path) -> tuple[np.ndarray, np.ndarray]:
    tokens = []
    for line in path.read_text().splitlines():
        line = line.split("#", 1)[0].strip()
        if line:
            tokens.append(line.split())
    if not tokens or not tokens[0][0].endswith("OFF"):
        raise ComplexError("not an OFF file")
    head = tokens[0][1:] or tokens[1]
    body = tokens[1:] if tokens[0][1:] else tokens[2:]
    try:
        nv, nf = int(head[0]), int(head[1])
        v = np.array([[float(x) for x in row] for row in body[:nv]])
        f = []
        for row in body[nv : nv + nf]:
            k = int(row[0])
            f += _fan([int(x) for x in row[1 : 1 + k]])
    except (ValueError, IndexError) as exc:
        raise ComplexError(f"OFF parse failure: {exc}") from exc
    if len(v) != nv or v.ndim != 2:
        raise ComplexError("OFF parse failure: vertex count mismatch")
    return v, np.array(f, dtype=np.int64).reshape(-1, 3)


def _read_obj(path: Path) -> tuple[np.ndarray, np.ndarray]:
    v, f = [], []
    try:
        for line in path.read_text().splitlines():
            parts = line.split()
            if not parts:
                continue
            if parts[0] == "v":
                v.append([float(x) for x in parts[1:4]])
            elif parts[0] == "f":
                idx = [int(p.split("/")[0]) for p in parts[1:]]
                idx = [i - 1 if i > 0 else len(v) + i for i in idx]
                f += _fan(idx)
    except ValueError as exc:
        raise ComplexError(f"OBJ parse failure: {exc}") from exc
    return np.array(v, dtype=float), np.array(f, dtype=np.int64).reshape(-1, 3)


def _read_csv_polyline(path: Path) -> tuple[np.ndarray, np.ndarray]:
    with path.open(newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].lstrip().startswith("#")]
    try:
        v = np.array([[float(x) for x in r] for r in rows])
    except ValueError as exc:
        raise ComplexError(f"CSV parse failure: {exc}") from exc
    if v.ndim != 2:
        raise ComplexError("inconsistent ambient dimension in CSV rows")
    if len(v) > 1 and np.allclose(v[0], v[-1]):
        v = v[:-1]
    n = len(v)
    s = np.column_stack([np.arange(n), (np.arange(n) + 1) % n])
    return v, s


def load_complex(path: str | Path, format: str | None = None) -> ImmersedComplex:
    """Read an OFF/OBJ triangle mesh or a closed CSV polyline."""
    path = Path(path)
    fmt = (format or path.suffix.lstrip(".")).lower()
    if fmt == "off":
        v, s, m = *_read_off(path), 2
    elif fmt == "obj":
        v, s, m = *_read_obj(path), 2
    elif fmt in ("csv", "csv-polyline"):
        v, s, m = *_read_csv_polyline(path), 1
    else:
        raise ComplexError(f"unsupported format {fmt!r}")
    return ImmersedComplex(m, v, s, label=path.stem)


def write_off(c: ImmersedComplex, path: str | Path) -> None:
    lines = ["OFF", f"{c.n_vertices} {c.n_simplices} 0"]
    lines += [" ".join(repr(float(x)) for x in row) for row in c.vertices]
    lines += ["3 " + " ".join(str(int(i)) for i in row) for row in c.simplices]
    Path(path).write_text("\n".join(lines) + "\n")


def write_csv_polyline(c: ImmersedComplex, path: str | Path) -> None:
    order = c.simplices[:, 0]
    with Path(path).open("w", newline="") as fh:
        csv.writer(fh).writerows(c.vertices[order].tolist())
