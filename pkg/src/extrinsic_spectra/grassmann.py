"""Monte Carlo integral geometry on the Grassmannian of m-planes.

A p-plane orthogonal to an m-plane H is the fiber of the orthogonal
projection onto H over a point y in H, so counting its crossings with a
complex reduces to point location of y among the projected simplices.
All suprema over planes are approximated from below by stabbing through a
finite query set; every estimate here is therefore a lower bound of the
true directional index.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree
from scipy.spatial.distance import cdist

from .geom import ImmersedComplex, Region, riemannian_volume

TANGENT_TOL = 1e-9  # projection Jacobian below which a crossing is not transverse
EDGE_RTOL = 1e-10  # query-to-edge distance (relative) treated as ambiguous
MAX_REJITTER = 8


@dataclass(frozen=True, eq=False)
class GrassmannSample:
    basis: np.ndarray  # (m, m+p), orthonormal rows
    seed_id: int
    seed: int = 0

    @property
    def m(self) -> int:
        return self.basis.shape[0]

    @property
    def p(self) -> int:
        return self.basis.shape[1] - self.basis.shape[0]


@dataclass(frozen=True)
class IndexEstimate:
    kind: str
    value: float
    samples_grassmann: int
    samples_stabbing: int
    standard_error: float = 0.0
    radius_r: float | None = None
    epsilon: float | None = None
    chosen_region: Region | None = field(default=None, compare=False)
    seed: int = 0
    per_sample: tuple = field(default=(), repr=False, compare=False)

    def to_dict(self) -> dict:
        d = {
            "kind": self.kind,
            "value": float(self.value),
            "samples_grassmann": self.samples_grassmann,
            "samples_stabbing": self.samples_stabbing,
            "standard_error": float(self.standard_error),
            "radius_r": self.radius_r,
            "epsilon": self.epsilon,
            "seed": self.seed,
        }
        if self.chosen_region is not None:
            d["region_simplices"] = len(self.chosen_region)
            d["region_fraction"] = float(self.chosen_region.volume_fraction)
        return d


@dataclass(frozen=True)
class CroftonEstimate:
    dims: tuple[int, int]
    value: float
    samples: int
    anisotropy_spread: float
    standard_error: float
    frame_standard_error: float
    seed: int = 0

    @property
    def crofton_factor(self) -> float:
        """2 / I(G), the constant of the volume lemma."""
        return 2.0 / self.value

    def to_dict(self) -> dict:
        return {
            "dims": list(self.dims),
            "value": self.value,
            "samples": self.samples,
            "anisotropy_spread": self.anisotropy_spread,
            "standard_error": self.standard_error,
            "frame_standard_error": self.frame_standard_error,
            "seed": self.seed,
        }


# --- Haar sampling ---------------------------------------------------------------


def haar_bases(m: int, p: int, n: int, seed: int = 0) -> np.ndarray:
    """``n`` Haar-random m-planes in R^(m+p) as (n, m, m+p) orthonormal rows.

    Sample j depends only on (seed, j): the stream is filled sample by
    sample, so a longer run extends a shorter one.
    """
    if m < 1 or p < 1:
        raise ValueError("need m >= 1 and p >= 1")
    g = np.random.default_rng(seed).standard_normal((n, m + p, m))
    q, _ = np.linalg.qr(g)
    return np.ascontiguousarray(np.swapaxes(q, 1, 2))


def sample_haar(m: int, p: int, seed: int = 0, index: int = 0) -> GrassmannSample:
    return GrassmannSample(haar_bases(m, p, index + 1, seed)[index], index, seed)


def haar_samples(m: int, p: int, n: int, seed: int = 0) -> list[GrassmannSample]:
    return [GrassmannSample(b, j, seed) for j, b in enumerate(haar_bases(m, p, n, seed))]


def jacobian_factor(tangent_frame: np.ndarray, h: GrassmannSample | np.ndarray) -> float:
    """|det| of the projection of an oriented tangent m-frame onto H."""
    frame = np.atleast_2d(np.asarray(tangent_frame, dtype=float))
    basis = h.basis if isinstance(h, GrassmannSample) else np.atleast_2d(h)
    if not np.allclose(frame @ frame.T, np.eye(len(frame)), atol=1e-9):
        raise ValueError("tangent frame is not orthonormal")
    return float(abs(np.linalg.det(frame @ basis.T)))


def crofton_constant(m: int, p: int, n_samples: int = 100_000, n_frames: int = 8, seed: int = 0) -> CroftonEstimate:
    """Monte Carlo Grassmannian mean of the projection Jacobian.

    Each reference frame gets its own independent block of Haar samples so
    the spread across frames can be compared with the per-frame error.
    """
    per = max(1, n_samples // n_frames)
    frames = haar_bases(m, p, n_frames, seed=[seed, 1])
    means, pooled = [], []
    for f, frame in enumerate(frames):
        planes = haar_bases(m, p, per, seed=[seed, 2, f])
        jac = np.abs(np.linalg.det(np.einsum("ij,nkj->nik", frame, planes)))
        means.append(jac.mean())
        pooled.append(jac)
    pooled = np.concatenate(pooled)
    sd = float(pooled.std(ddof=1))
    return CroftonEstimate(
        (m, p),
        float(pooled.mean()),
        int(pooled.size),
        float(np.std(means, ddof=1)) if n_frames > 1 else 0.0,
        sd / math.sqrt(pooled.size),
        sd / math.sqrt(per),
        seed,
    )


def unit_ball_volume(m: int) -> float:
    return math.pi ** (m / 2) / math.gamma(m / 2 + 1)


# --- point location among projected simplices ------------------------------------


def _cell_pairs(lo: np.ndarray, hi: np.ndarray, queries: np.ndarray, ncell: int):
    """Candidate (query, simplex) pairs from a uniform grid over the bounding boxes."""
    dim = lo.shape[1]
    origin = lo.min(axis=0)
    extent = np.maximum(hi.max(axis=0) - origin, 1e-300)
    size = extent / ncell
    a = np.clip(np.floor((lo - origin) / size).astype(np.int64), 0, ncell - 1)
    b = np.clip(np.floor((hi - origin) / size).astype(np.int64), 0, ncell - 1)
    span = b - a + 1
    per = np.prod(span, axis=1)
    tri = np.repeat(np.arange(len(lo)), per)
    # local offset of each generated cell within its simplex's box
    start = np.repeat(np.cumsum(per) - per, per)
    local = np.arange(tri.size) - start
    key = np.zeros(tri.size, dtype=np.int64)
    stride = 1
    for d in range(dim):
        sd = span[tri, d]
        coord = a[tri, d] + local % sd
        local = local // sd
        key += coord * stride
        stride *= ncell
    order = np.argsort(key, kind="stable")
    key, tri = key[order], tri[order]

    qc = np.floor((queries - origin) / size).astype(np.int64)
    inside = np.all((qc >= 0) & (qc < ncell), axis=1)
    qkey = np.zeros(len(queries), dtype=np.int64)
    stride = 1
    for d in range(dim):
        qkey += np.clip(qc[:, d], 0, ncell - 1) * stride
        stride *= ncell
    s = np.searchsorted(key, qkey, "left")
    e = np.searchsorted(key, qkey, "right")
    cnt = np.where(inside, e - s, 0)
    q = np.repeat(np.arange(len(queries)), cnt)
    off = np.arange(q.size) - np.repeat(np.cumsum(cnt) - cnt, cnt)
    return q, tri[np.repeat(s, cnt) + off]


class ProjectedComplex:
    """A complex projected onto an m-plane H, ready for fiber queries."""

    def __init__(self, c: ImmersedComplex, basis: np.ndarray):
        self.c = c
        self.basis = np.asarray(basis)
        self.m = c.dim_m
        self.pv = c.vertices @ self.basis.T  # projected vertices (nv, m)
        pts = self.pv[c.simplices]  # (ns, m+1, m)
        if self.m == 1:
            signed = pts[:, 1, 0] - pts[:, 0, 0]
        else:
            e1, e2 = pts[:, 1] - pts[:, 0], pts[:, 2] - pts[:, 0]
            signed = 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])
        self.signed_measure = signed
        self.jacobian = np.abs(signed) / c.simplex_measures
        self.pts = pts
        self.lo, self.hi = pts.min(axis=1), pts.max(axis=1)
        self.scale = float(np.ptp(self.pv, axis=0).max()) or 1.0
        ns = c.n_simplices
        self.ncell = max(1, int(round(ns ** (1.0 / self.m))) if self.m == 2 else ns)

    def locate(self, queries: np.ndarray):
        """Hit pairs (query, simplex, barycentric coords) and a per-query ambiguity flag."""
        q, t = _cell_pairs(self.lo, self.hi, queries, self.ncell)
        y = queries[q]
        tol = EDGE_RTOL * self.scale
        tangent = self.jacobian[t] < TANGENT_TOL
        pts = self.pts[t]
        if self.m == 1:
            x0, x1 = pts[:, 0, 0], pts[:, 1, 0]
            with np.errstate(divide="ignore", invalid="ignore"):
                lam1 = (y[:, 0] - x0) / (x1 - x0)
            near = np.minimum(np.abs(y[:, 0] - x0), np.abs(y[:, 0] - x1)) < tol
            inside = (np.minimum(x0, x1) < y[:, 0]) & (y[:, 0] < np.maximum(x0, x1))
            bary = np.column_stack([1 - lam1, lam1])
        else:
            a, b, cc = pts[:, 0], pts[:, 1], pts[:, 2]
            area2 = 2 * self.signed_measure[t]
            sgn = np.where(area2 >= 0, 1.0, -1.0)

            def edge_fn(p0, p1):
                d = p1 - p0
                w = y - p0
                return d[:, 0] * w[:, 1] - d[:, 1] * w[:, 0], np.hypot(d[:, 0], d[:, 1])

            f0, l0 = edge_fn(b, cc)  # opposite vertex a
            f1, l1 = edge_fn(cc, a)
            f2, l2 = edge_fn(a, b)
            with np.errstate(divide="ignore", invalid="ignore"):
                # signed distances to the edge lines, positive inside
                dmin = np.minimum(np.minimum(sgn * f0 / l0, sgn * f1 / l1), sgn * f2 / l2)
                bary = np.column_stack([f0, f1, f2]) / area2[:, None]
            inside = dmin > 0
            near = np.abs(dmin) < tol
            if tangent.any():
                near[tangent] = self._near_segments(y[tangent], pts[tangent], tol)
        ambiguous_pair = np.where(tangent, inside | near, near)
        hit = inside & ~tangent & ~ambiguous_pair
        amb = np.zeros(len(queries), dtype=bool)
        amb[q[ambiguous_pair]] = True
        return q[hit], t[hit], bary[hit], amb

    @staticmethod
    def _near_segments(y, pts, tol):
        out = np.zeros(len(y), dtype=bool)
        for i, j in ((0, 1), (1, 2), (2, 0)):
            p, d = pts[:, i], pts[:, j] - pts[:, i]
            dd = np.einsum("ij,ij->i", d, d)
            with np.errstate(divide="ignore", invalid="ignore"):
                s = np.clip(np.einsum("ij,ij->i", y - p, d) / dd, 0, 1)
            s = np.where(dd > 0, s, 0.0)
            out |= np.linalg.norm(y - p - s[:, None] * d, axis=1) < tol
        return out


def facet_turning(c: ImmersedComplex) -> np.ndarray:
    """Per simplex, the sine of the largest principal angle to a simplex sharing a facet.

    This is the angular resolution of the complex: a plane meeting a simplex
    at a smaller angle cannot be told apart from a tangent one of the
    smooth surface the complex discretizes.
    """
    m = c.dim_m
    V = c.vertices[c.simplices]
    frames = np.linalg.qr(np.swapaxes(V[:, 1:] - V[:, :1], 1, 2))[0]  # (ns, d, m)
    faces, owner = [], []
    for drop in range(m + 1):
        faces.append(np.sort(np.delete(c.simplices, drop, axis=1), axis=1))
        owner.append(np.arange(c.n_simplices))
    faces = np.concatenate(faces)
    owner = np.concatenate(owner)
    _, inv = np.unique(faces, axis=0, return_inverse=True)
    inv = inv.ravel()
    order = np.argsort(inv, kind="stable")
    same = inv[order][1:] == inv[order][:-1]
    a, b = owner[order][:-1][same], owner[order][1:][same]
    sv = np.linalg.svd(np.swapaxes(frames[a], 1, 2) @ frames[b], compute_uv=False)
    sin = np.sqrt(np.clip(1.0 - sv.min(axis=1) ** 2, 0.0, 1.0))
    out = np.zeros(c.n_simplices)
    np.maximum.at(out, a, sin)
    np.maximum.at(out, b, sin)
    return out


def _cluster_ids(query, pos, joinable, reach, order=None):
    """Group consecutive grazing hits on the same stabbing plane.

    ``order`` optionally gives the hits sorted by (query, position), which
    is only used when the stabbing planes are lines.
    """
    n = len(query)
    if n == 0:
        return np.zeros(0, dtype=np.int64)
    if pos.shape[1] == 1:
        if order is None:
            order = np.lexsort((pos[:, 0], query))
        q, x, u, d = query[order], pos[order, 0], joinable[order], reach[order]
        join = (q[1:] == q[:-1]) & u[1:] & u[:-1] & (np.diff(x) < d[1:] + d[:-1])
        ids = np.empty(n, dtype=np.int64)
        ids[order] = np.cumsum(np.r_[True, ~join]) - 1
        return ids
    # higher codimension: single linkage inside each plane
    rows, cols = [], []
    cand = np.flatnonzero(joinable)
    for qq in np.unique(query[cand]):
        g = cand[query[cand] == qq]
        if len(g) < 2:
            continue
        dist = np.linalg.norm(pos[g, None] - pos[None, g], axis=2)
        i, j = np.nonzero(np.triu(dist < reach[g, None] + reach[None, g], 1))
        rows.append(g[i])
        cols.append(g[j])
    if not rows:
        return np.arange(n)
    rows, cols = np.concatenate(rows), np.concatenate(cols)
    graph = coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n))
    return connected_components(graph, directed=False)[1]


@dataclass(frozen=True, eq=False)
class FiberHits:
    """Transverse crossings of a family of stabbing planes orthogonal to H.

    A PL surface oscillates around the smooth one it approximates, so a
    plane almost tangent to it can cross it many times within one mesh
    cell. With ``merge_grazing`` such runs of unresolved crossings count as
    one crossing if odd and as two if even (or as their net orientation
    when that is larger); transverse crossings always count one each.
    """

    n_queries: int
    query: np.ndarray  # query index per hit
    simplex: np.ndarray  # simplex index per hit
    points: np.ndarray  # ambient hit point per hit
    dropped: int  # queries left ambiguous after re-jittering
    pos: np.ndarray | None = None  # coordinates inside the stabbing plane
    sign: np.ndarray | None = None  # crossing orientation, 0 if undefined
    unresolved: np.ndarray | None = None  # crossing angle below the facet resolution
    reach: np.ndarray | None = None  # diameter of the crossed simplex
    merge_grazing: bool = True

    @cached_property
    def _order(self) -> np.ndarray | None:
        if self.pos is None or self.pos.shape[1] != 1:
            return None
        return np.lexsort((self.pos[:, 0], self.query))

    def full_weights(self, removed: np.ndarray | None = None) -> np.ndarray:
        """Weight of every hit, zero for hits on removed simplices."""
        keep, w = self.weights(removed)
        out = np.zeros(len(self.query))
        out[keep] = w
        return out

    def weights(self, removed: np.ndarray | None = None) -> tuple[np.ndarray, np.ndarray]:
        """(kept hit ids, weight per kept hit); weights sum to the crossing count of each plane."""
        keep = np.arange(len(self.query)) if removed is None else np.flatnonzero(~removed[self.simplex])
        if not self.merge_grazing or self.unresolved is None or not self.unresolved[keep].any():
            return keep, np.ones(len(keep))
        order = self._order
        if order is not None and removed is not None:
            # the kept hits in sorted order, renumbered within the kept subset
            rank = np.full(len(self.query), -1)
            rank[keep] = np.arange(len(keep))
            order = rank[order]
            order = order[order >= 0]
        ids = _cluster_ids(self.query[keep], self.pos[keep], self.unresolved[keep], self.reach[keep], order)
        k = np.bincount(ids)
        net = np.abs(np.bincount(ids, weights=self.sign[keep]))
        count = np.where(k % 2 == 0, np.maximum(net, 2), np.maximum(net, 1))
        count = np.where(k > 0, count, 0)
        return keep, count[ids] / k[ids]

    def counts(self, removed: np.ndarray | None = None) -> np.ndarray:
        keep, w = self.weights(removed)
        return np.rint(np.bincount(self.query[keep], weights=w, minlength=self.n_queries))

    def index(self, removed: np.ndarray | None = None) -> int:
        if self.n_queries == 0:
            return 0
        return int(self.counts(removed).max(initial=0))


def stabbing_queries(c: ImmersedComplex, basis: np.ndarray, stab_budget: int, seed: int = 0,
                     plane_id: int = 0) -> np.ndarray:
    """Projected barycenters first, then ``stab_budget`` random points of random simplices."""
    base = c.barycenters @ basis.T
    if stab_budget <= 0:
        return base
    rng = np.random.default_rng([seed, plane_id, 1])
    sid = rng.integers(0, c.n_simplices, stab_budget)
    w = rng.dirichlet(np.ones(c.dim_m + 1), stab_budget)
    extra = np.einsum("nk,nkd->nd", w, c.vertices[c.simplices[sid]])
    return np.vstack([base, extra @ basis.T])


def fiber_hits(c: ImmersedComplex, basis: np.ndarray, stab_budget: int = 0, seed: int = 0,
               plane_id: int = 0, merge_grazing: bool = True, turning: np.ndarray | None = None) -> FiberHits:
    """Crossings of all stabbing planes, resolving tangential/edge cases by jitter."""
    basis = np.asarray(basis, dtype=float)
    proj = ProjectedComplex(c, basis)
    queries = np.array(stabbing_queries(c, basis, stab_budget, seed, plane_id), dtype=float)
    jitter = 1e-4 * float(np.median(c.simplex_measures)) ** (1.0 / c.dim_m)
    q, t, bary, amb = proj.locate(queries)
    keep_q, keep_t, keep_b = [q[~amb[q]]], [t[~amb[q]]], [bary[~amb[q]]]
    pending = np.flatnonzero(amb)
    for attempt in range(MAX_REJITTER):
        if pending.size == 0:
            break
        rng = np.random.default_rng([seed, plane_id, 2, attempt])
        # offsets depend on the query index only, keeping nested budgets nested
        offs = rng.standard_normal((len(queries), c.dim_m))[pending]
        queries[pending] += jitter * offs
        q2, t2, b2, amb2 = proj.locate(queries[pending])
        ok = ~amb2[q2]
        keep_q.append(pending[q2[ok]])
        keep_t.append(t2[ok])
        keep_b.append(b2[ok])
        pending = pending[amb2]
    q = np.concatenate(keep_q)
    t = np.concatenate(keep_t)
    bary = np.concatenate(keep_b)
    if pending.size:
        drop = np.isin(q, pending)
        q, t, bary = q[~drop], t[~drop], bary[~drop]
    pts = np.einsum("nk,nkd->nd", bary, c.vertices[c.simplices[t]])
    if turning is None:
        turning = facet_turning(c)
    # orthonormal coordinates of the stabbing plane
    comp = np.linalg.svd(basis, full_matrices=True)[2][c.dim_m:]
    sign = np.sign(proj.signed_measure[t]) if c.codim_p == 1 else np.zeros(len(t))
    diam = np.linalg.norm(c.vertices[c.simplices[t]][:, :, None] - c.vertices[c.simplices[t]][:, None], axis=3)
    return FiberHits(len(queries), q, t, pts, int(pending.size), pos=pts @ comp.T, sign=sign,
                     unresolved=proj.jacobian[t] < turning[t], reach=diam.max(axis=(1, 2)),
                     merge_grazing=merge_grazing)


def _check_dims(c: ImmersedComplex, h: GrassmannSample):
    if h.m != c.dim_m or h.basis.shape[1] != c.ambient_dim:
        raise ValueError(f"plane of dim {h.m} in R^{h.basis.shape[1]} does not match complex")


# --- index estimators -----------------------------------------------------------------


class IndexSampler:
    """Fiber crossings of ``c`` over a fixed, seeded set of Haar planes.

    The hits are computed once; mean, sup, local and perturbed indices are
    evaluated from them, so every estimator shares the same planes.
    """

    def __init__(self, c: ImmersedComplex, n_grassmann: int, stab_budget: int = 0, seed: int = 0,
                 merge_grazing: bool = True):
        self.c = c
        self.n_grassmann = n_grassmann
        self.stab_budget = stab_budget
        self.seed = seed
        self.planes = haar_samples(c.dim_m, c.codim_p, n_grassmann, seed)
        turning = facet_turning(c)
        self._pair_cache: dict = {}
        self.hits = [fiber_hits(c, h.basis, stab_budget, seed, h.seed_id, merge_grazing, turning)
                     for h in self.planes]

    def fiber_values(self, removed: np.ndarray | None = None) -> np.ndarray:
        return np.array([h.index(removed) for h in self.hits], dtype=float)

    def _estimate(self, kind, vals, **kw) -> IndexEstimate:
        se = float(vals.std(ddof=1) / math.sqrt(len(vals))) if len(vals) > 1 else 0.0
        value = float(vals.max()) if kind == "sup_index" else float(vals.mean())
        return IndexEstimate(kind, value, self.n_grassmann, self.stab_budget,
                             0.0 if kind == "sup_index" else se, seed=self.seed, per_sample=tuple(vals), **kw)

    def sup_index(self, removed=None) -> IndexEstimate:
        return self._estimate("sup_index", self.fiber_values(removed))

    def mean_index(self, removed=None) -> IndexEstimate:
        return self._estimate("mean_index", self.fiber_values(removed))

    def _local_pairs(self, r: float, centers: np.ndarray) -> list:
        """Per plane: (center of each pair key, key index per pair, hit per pair), cached."""
        key = (float(r), centers.shape, hash(centers.tobytes()))
        if key not in self._pair_cache:
            ctree = cKDTree(centers)
            out = []
            for h in self.hits:
                if len(h.query) == 0:
                    out.append(None)
                    continue
                pairs = ctree.sparse_distance_matrix(cKDTree(h.points), r, output_type="ndarray")
                if len(pairs) == 0:
                    out.append(None)
                    continue
                pk = pairs["i"].astype(np.int64) * h.n_queries + h.query[pairs["j"]]
                uk, inv = np.unique(pk, return_inverse=True)
                out.append((uk // h.n_queries, inv.ravel(), pairs["j"]))
            self._pair_cache[key] = out
        return self._pair_cache[key]

    def local_values(self, r: float, centers: np.ndarray, removed=None) -> np.ndarray:
        """(n_planes, n_centers) directional index of c cap B(x, r)."""
        centers = np.ascontiguousarray(centers, dtype=float)
        out = np.zeros((len(self.hits), len(centers)))
        for i, (h, pr) in enumerate(zip(self.hits, self._local_pairs(r, centers))):
            if pr is None:
                continue
            cen, inv, hit = pr
            cnt = np.bincount(inv, weights=h.full_weights(removed)[hit], minlength=len(cen))
            np.maximum.at(out[i], cen, cnt)
        return out

    def local_index(self, r: float, centers: np.ndarray | None = None, removed=None) -> IndexEstimate:
        if r <= 0:
            raise ValueError("radius must be positive")
        centers = self.c.vertices if centers is None else np.asarray(centers)
        vals = self.local_values(r, centers, removed)
        mean = vals.mean(axis=0)
        best = int(np.argmax(mean))
        col = vals[:, best]
        se = float(col.std(ddof=1) / math.sqrt(len(col))) if len(col) > 1 else 0.0
        return IndexEstimate("local", float(mean[best]), self.n_grassmann, self.stab_budget, se,
                             radius_r=r, seed=self.seed, per_sample=tuple(col))

    # -- perturbation search ------------------------------------------------------

    def multiplicity_scores(self, removed: np.ndarray) -> np.ndarray:
        """Share of each plane's maximal stabbing lines passing through each simplex."""
        score = np.zeros(self.c.n_simplices)
        for h in self.hits:
            keep, w = h.weights(removed)
            q, t = h.query[keep], h.simplex[keep]
            if q.size == 0:
                continue
            cnt = np.rint(np.bincount(q, weights=w, minlength=h.n_queries))
            top = cnt.max()
            at_max = cnt[q] == top
            n_top = np.count_nonzero(cnt == top)
            score += np.bincount(t[at_max], minlength=self.c.n_simplices) / n_top
        return score

    def eps_index(
        self,
        eps: float,
        r: float | None = None,
        strategy: str = "greedy-multiplicity",
        centers: np.ndarray | None = None,
        step: float = 0.0025,
    ) -> IndexEstimate:
        """Best (smallest) perturbed index found over removed regions of volume <= eps*Vol.

        The search path does not depend on ``eps``: removal batches of
        ``step * Vol`` are taken in a fixed order and the path is cut where
        the budget runs out, so a larger budget never does worse.
        """
        if not 0 <= eps < 1:
            raise ValueError("epsilon must lie in [0, 1)")
        c = self.c
        if centers is None and r is not None:
            centers = c.vertices
        vol = riemannian_volume(c)
        meas = c.simplex_measures

        def objective(removed):
            if r is None:
                return self.fiber_values(removed)
            vals = self.local_values(r, centers, removed)
            best = int(np.argmax(vals.mean(axis=0)))
            return vals[:, best]

        removed = np.zeros(c.n_simplices, dtype=bool)
        best_vals, best_removed = objective(removed), removed.copy()
        if strategy != "none" and eps > 0:
            path = (self._greedy_batches if strategy == "greedy-multiplicity" else self._cap_batches)(step * vol)
            for batch in path:
                trial = removed.copy()
                trial[batch] = True
                if meas[trial].sum() > eps * vol * (1 + 1e-12):
                    break
                removed = trial
                vals = objective(removed)
                if vals.mean() < best_vals.mean() - 1e-12:
                    best_vals, best_removed = vals, removed.copy()
        region = Region.from_simplices(c, np.flatnonzero(best_removed))
        se = float(best_vals.std(ddof=1) / math.sqrt(len(best_vals))) if len(best_vals) > 1 else 0.0
        kind = "eps_mean" if r is None else "eps_local"
        return IndexEstimate(kind, float(best_vals.mean()), self.n_grassmann, self.stab_budget, se,
                             radius_r=r, epsilon=eps, chosen_region=region, seed=self.seed,
                             per_sample=tuple(best_vals))

    def _greedy_batches(self, batch_area: float):
        c = self.c
        meas = c.simplex_measures
        removed = np.zeros(c.n_simplices, dtype=bool)
        while not removed.all():
            score = self.multiplicity_scores(removed) / meas
            score[removed] = -np.inf
            order = np.argsort(-score, kind="stable")
            order = order[np.isfinite(score[order]) & (score[order] > 0)]
            if order.size == 0:
                return
            take = np.searchsorted(np.cumsum(meas[order]), batch_area) + 1
            batch = order[:take]
            removed[batch] = True
            yield batch

    def _cap_batches(self, batch_area: float):
        """Grow Euclidean balls around the vertex with the highest multiplicity score."""
        c = self.c
        meas = c.simplex_measures
        removed = np.zeros(c.n_simplices, dtype=bool)
        bary = c.barycenters
        while not removed.all():
            score = self.multiplicity_scores(removed)
            score[removed] = 0
            if score.max() <= 0:
                return
            center = bary[int(np.argmax(score / meas))]
            d = np.linalg.norm(bary - center, axis=1)
            d[removed] = np.inf
            order = np.argsort(d, kind="stable")
            order = order[np.isfinite(d[order])]
            take = np.searchsorted(np.cumsum(meas[order]), batch_area) + 1
            batch = order[:take]
            removed[batch] = True
            yield batch


def fiber_index(c: ImmersedComplex, h: GrassmannSample, stab_budget: int = 0, seed: int = 0,
                merge_grazing: bool = True) -> IndexEstimate:
    _check_dims(c, h)
    hits = fiber_hits(c, h.basis, stab_budget, h.seed, h.seed_id, merge_grazing)
    return IndexEstimate("fiber", float(hits.index()), 1, stab_budget, seed=seed)


def sup_index(c, n_grassmann=64, stab_budget=0, seed=0, merge_grazing=True) -> IndexEstimate:
    return IndexSampler(c, n_grassmann, stab_budget, seed, merge_grazing).sup_index()


def mean_index(c, n_grassmann=64, stab_budget=0, seed=0, merge_grazing=True) -> IndexEstimate:
    return IndexSampler(c, n_grassmann, stab_budget, seed, merge_grazing).mean_index()


def local_index(c, r, n_grassmann=64, stab_budget=0, seed=0, centers=None, merge_grazing=True) -> IndexEstimate:
    return IndexSampler(c, n_grassmann, stab_budget, seed, merge_grazing).local_index(r, centers)


def eps_index(c, eps, r=None, strategy="greedy-multiplicity", n_grassmann=64, stab_budget=0, seed=0,
              centers=None, merge_grazing=True) -> IndexEstimate:
    return IndexSampler(c, n_grassmann, stab_budget, seed, merge_grazing).eps_index(eps, r, strategy, centers)


# --- shadows and ball growth --------------------------------------------------------


def projected_volume(c: ImmersedComplex, h: GrassmannSample | np.ndarray, grid_resolution: int = 256) -> float:
    """m-dimensional measure of the shadow of ``c`` on H.

    Triangle meshes are rasterized (cell centers tested for coverage);
    polylines use the exact union of projected intervals.
    """
    basis = h.basis if isinstance(h, GrassmannSample) else np.asarray(h)
    if grid_resolution < 64:
        raise ValueError("grid_resolution must be >= 64")
    proj = ProjectedComplex(c, basis)
    if c.dim_m == 1:
        lo, hi = np.sort(np.column_stack([proj.lo[:, 0], proj.hi[:, 0]]), axis=1).T
        order = np.argsort(lo)
        lo, hi = lo[order], hi[order]
        reach = np.maximum.accumulate(hi)
        gap = np.maximum(lo[1:] - reach[:-1], 0.0)
        return float(reach[-1] - lo[0] - gap.sum())
    origin = proj.lo.min(axis=0)
    extent = proj.hi.max(axis=0) - origin
    cell = extent / grid_resolution
    ax = [origin[d] + cell[d] * (np.arange(grid_resolution) + 0.5) for d in range(2)]
    gx, gy = np.meshgrid(*ax, indexing="ij")
    cells = np.column_stack([gx.ravel(), gy.ravel()])
    q, _, _, amb = proj.locate(cells)
    covered = np.zeros(len(cells), dtype=bool)
    covered[q] = True
    covered |= amb  # sitting on an edge of the shadow counts as covered
    return float(covered.sum() * cell[0] * cell[1])


def _segment_ball_length(a, b, x, s):
    d = b - a
    w = a - x
    dd = np.einsum("ij,ij->i", d, d)
    bq = np.einsum("ij,ij->i", w, d)
    cq = np.einsum("ij,ij->i", w, w) - s * s
    disc = bq * bq - dd * cq
    ok = disc > 0
    root = np.sqrt(np.where(ok, disc, 0.0))
    t0 = np.clip((-bq - root) / dd, 0, 1)
    t1 = np.clip((-bq + root) / dd, 0, 1)
    return np.where(ok, (t1 - t0) * np.sqrt(dd), 0.0)


def _disk_wedge_area(p, q, rad):
    """Signed area of disk(0, rad) intersected with triangle (0, p, q); 2D arrays."""
    d = q - p
    dd = np.einsum("ij,ij->i", d, d)
    bq = np.einsum("ij,ij->i", p, d)
    cq = np.einsum("ij,ij->i", p, p) - rad * rad
    disc = bq * bq - dd * cq
    root = np.sqrt(np.maximum(disc, 0.0))
    with np.errstate(divide="ignore", invalid="ignore"):
        t0 = np.clip((-bq - root) / dd, 0, 1)
        t1 = np.clip((-bq + root) / dd, 0, 1)
    crosses = (disc > 0) & (t1 > t0)
    t0 = np.where(crosses, t0, 0.0)
    t1 = np.where(crosses, t1, 0.0)
    u = p + t0[:, None] * d
    v = p + t1[:, None] * d

    def sector(a, b):
        ang = np.arctan2(a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0], np.einsum("ij,ij->i", a, b))
        return 0.5 * rad * rad * ang

    tri = 0.5 * (u[:, 0] * v[:, 1] - u[:, 1] * v[:, 0])
    inner = sector(p, u) + tri + sector(v, q)
    return np.where(crosses, inner, sector(p, q))


def _triangle_ball_area(tri: np.ndarray, x: np.ndarray, s: float) -> np.ndarray:
    """Exact area of each triangle (n, 3, d) inside the ball B(x, s)."""
    a = tri[:, 0]
    e1 = tri[:, 1] - a
    e1 /= np.linalg.norm(e1, axis=1, keepdims=True)
    e2 = tri[:, 2] - a
    e2 -= np.einsum("ij,ij->i", e2, e1)[:, None] * e1
    e2 /= np.linalg.norm(e2, axis=1, keepdims=True)
    w = x - a
    cx, cy = np.einsum("ij,ij->i", w, e1), np.einsum("ij,ij->i", w, e2)
    off2 = np.einsum("ij,ij->i", w, w) - cx**2 - cy**2
    rad2 = s * s - off2
    out = np.zeros(len(tri))
    live = rad2 > 0
    if not live.any():
        return out
    rad = np.sqrt(rad2[live])
    loc = tri[live] - a[live][:, None, :]
    px = np.einsum("nkd,nd->nk", loc, e1[live]) - cx[live][:, None]
    py = np.einsum("nkd,nd->nk", loc, e2[live]) - cy[live][:, None]
    total = np.zeros(live.sum())
    for i, j in ((0, 1), (1, 2), (2, 0)):
        total += _disk_wedge_area(np.column_stack([px[:, i], py[:, i]]),
                                  np.column_stack([px[:, j], py[:, j]]), rad[:, None][:, 0])
    out[live] = np.abs(total)
    return out


def ball_volume(c: ImmersedComplex, x: np.ndarray, s: float, tree: cKDTree | None = None,
                reach: float | None = None) -> float:
    """Exact measure of c cap B(x, s)."""
    x = np.asarray(x, dtype=float)
    if tree is None:
        tree = cKDTree(c.barycenters)
    if reach is None:
        reach = float(np.linalg.norm(c.vertices[c.simplices] - c.barycenters[:, None], axis=2).max())
    cand = np.asarray(tree.query_ball_point(x, s + reach), dtype=np.int64)
    if cand.size == 0:
        return 0.0
    v = c.vertices[c.simplices[cand]]
    if c.dim_m == 1:
        return float(_segment_ball_length(v[:, 0], v[:, 1], x, s).sum())
    return float(_triangle_ball_area(v, x, s).sum())


def ball_volumes(c: ImmersedComplex, centers: np.ndarray, radii: Sequence[float], chunk_pairs: int = 2_000_000) -> np.ndarray:
    """(n_centers, n_radii) exact measures of c cap B(x, s).

    Simplices with every vertex inside the ball count in full; only those
    straddling the sphere are clipped exactly.
    """
    centers = np.atleast_2d(np.asarray(centers, dtype=float))
    radii = np.asarray(radii, dtype=float)
    meas = c.simplex_measures
    bary = c.barycenters
    reach = float(np.linalg.norm(c.vertices[c.simplices] - bary[:, None], axis=2).max())
    out = np.zeros((len(centers), len(radii)))
    step = max(1, chunk_pairs // max(1, c.n_simplices))
    for lo in range(0, len(centers), step):
        X = centers[lo:lo + step]
        far = cdist(X, c.vertices)[:, c.simplices].max(axis=2)  # farthest vertex per simplex
        near = cdist(X, bary) - reach  # lower bound on the distance to each simplex
        for j, s in enumerate(radii):
            out[lo:lo + len(X), j] = (far <= s) @ meas
            ci, si = np.nonzero((near < s) & (far > s))
            if ci.size == 0:
                continue
            v = c.vertices[c.simplices[si]]
            if c.dim_m == 1:
                part = _segment_ball_length(v[:, 0], v[:, 1], X[ci], s)
            else:
                part = _triangle_ball_area(v, X[ci], s)
            out[lo:lo + len(X), j] += np.bincount(ci, weights=part, minlength=len(X))
    return out


@dataclass(frozen=True)
class BallGrowth:
    L_hat: float
    worst_center: int
    worst_radius: float
    theoretical_bound: float | None = None
    ratios: np.ndarray = field(default=None, repr=False, compare=False)


def default_radii(c: ImmersedComplex, count: int = 10, rho: float = math.inf) -> np.ndarray:
    lo = 2.0 * float(np.median(c.simplex_measures)) ** (1.0 / c.dim_m)
    hi = min(rho, float(np.ptp(c.vertices, axis=0).max()) * 1.8)
    lo = min(lo, hi)
    return np.geomspace(lo, hi, count)


def ball_growth_constant(
    c: ImmersedComplex,
    radii: Sequence[float] | None = None,
    centers: np.ndarray | str = "all",
    crofton: float | None = None,
    mean_idx: float | None = None,
    sample: int = 256,
    seed: int = 0,
) -> BallGrowth:
    """max over centers x and radii s of Vol(c cap B(x, s)) / s^m.

    ``centers`` is "all" (every vertex), "sample" (``sample`` vertices) or an
    explicit point array, e.g. the vertices of an unperturbed complex.
    When ``crofton`` (I(G)) and ``mean_idx`` are given, the integral-geometric
    bound 2 Vol(B^m) / I(G) * index is reported alongside.
    """
    radii = default_radii(c) if radii is None else np.asarray(radii, dtype=float)
    if np.any(radii <= 0):
        raise ValueError("radii must be positive")
    if isinstance(centers, str):
        pts = c.vertices
        if centers == "sample" and len(pts) > sample:
            pts = pts[np.sort(np.random.default_rng(seed).choice(len(pts), sample, replace=False))]
    else:
        pts = np.asarray(centers, dtype=float)
    ratios = ball_volumes(c, pts, radii) / radii**c.dim_m
    i, j = np.unravel_index(int(np.argmax(ratios)), ratios.shape)
    bound = None
    if crofton is not None and mean_idx is not None:
        bound = 2 * unit_ball_volume(c.dim_m) / crofton * mean_idx
    return BallGrowth(float(ratios[i, j]), int(i), float(radii[j]), bound, ratios)
