"""Coverings, capacitor packings and the explicit eigenvalue bound they feed.

Everything here works on a finite metric-measure space (simplex
barycenters weighted by simplex measure). Covers and packings are greedy,
so covering numbers come out as upper bounds and packings as feasible
witnesses; the properties the eigenvalue bound consumes (disjoint halos,
Lipschitz profiles) are checked exactly on the result.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .geom import ImmersedComplex, MetricMeasureSpace, Region, remove_region, riemannian_volume, to_mm_space
from .grassmann import IndexSampler, ball_growth_constant, crofton_constant, default_radii, unit_ball_volume
from .spectrum import assemble, rayleigh_quotient, solve_spectrum

KAPPA = 4
DILATATION_TOL = 1e-9


class CapacitorError(ValueError):
    pass


@dataclass(frozen=True)
class CoveringEstimate:
    kappa: int
    N_hat: int
    rho: float
    radii_tested: list
    per_radius: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class CapacitorFamily:
    n: int
    r: float
    centers: list
    cores: list  # point-index arrays A_i
    halos: list  # point-index arrays of the open r-neighbourhoods of A_i
    core_masses: list
    halo_masses: list
    mass_bound_ok: list | None = None  # core mass >= mu(X) / (2 N n), when N is known
    test_functions: list | None = None
    dilatations: list | None = None

    def halos_disjoint(self) -> bool:
        seen: set[int] = set()
        for h in self.halos:
            s = set(int(i) for i in h)
            if seen & s:
                return False
            seen |= s
        return True

    def to_dict(self) -> dict:
        d = {
            "n": self.n,
            "r": self.r,
            "centers": [int(x) for x in self.centers],
            "cores": [np.asarray(a).tolist() for a in self.cores],
            "halos": [np.asarray(a).tolist() for a in self.halos],
            "core_masses": [float(x) for x in self.core_masses],
            "halo_masses": [float(x) for x in self.halo_masses],
            "mass_bound_ok": self.mass_bound_ok,
        }
        if self.test_functions is not None:
            d["test_functions"] = [np.asarray(f).tolist() for f in self.test_functions]
            d["dilatations"] = [float(x) for x in self.dilatations]
        return d


@dataclass(frozen=True)
class ExplicitBound:
    k: int
    rho: float
    N: float
    L: float
    p: int
    mu_total: float
    nu_total: float
    rhs_value: float
    term_rho: float
    term_main: float
    L_source: str = "measured"

    def to_dict(self) -> dict:
        d = asdict(self)
        if math.isinf(self.rho):
            d["rho"] = "inf"
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


# --- covering ------------------------------------------------------------------------


def covering_radii(X: MetricMeasureSpace, rho: float, count: int = 12) -> np.ndarray:
    """A fixed geometric grid from 4 diam(X) down, cut at ``rho``.

    The grid does not depend on ``rho``, so a larger ``rho`` tests a
    superset of radii. Balls larger than 4 diam(X) are covered by one ball.
    """
    top = 4.0 * X.diameter
    grid = top * 2.0 ** (-0.5 * np.arange(count))
    radii = grid[grid <= rho * (1 + 1e-12)]
    if radii.size == 0:
        radii = np.array([rho])
    return radii


def greedy_net(dist: np.ndarray, radius: float) -> tuple[np.ndarray, np.ndarray]:
    """Greedy radius-net in index order, and the nearest net point of every point."""
    n = dist.shape[0]
    covered = np.zeros(n, dtype=bool)
    net = []
    while not covered.all():
        i = int(np.argmin(covered))  # first uncovered point
        net.append(i)
        covered |= dist[i] <= radius
    net = np.array(net)
    return net, net[np.argmin(dist[net], axis=0)]


def covering_number(X: MetricMeasureSpace, rho: float, radii_count: int = 12) -> CoveringEstimate:
    """Largest number of r/4-balls needed to cover a ball B(x, r), r <= rho, over all x.

    For each radius a greedy r/4-net of X is built once; each ball is then
    covered by the net points assigned to its members. This is a valid
    cover, so the result bounds the covering number from above.
    """
    if X.size == 0:
        raise CapacitorError("empty space")
    if not rho > 0:
        raise ValueError("rho must be positive")
    D = X.distance_matrix()
    radii = covering_radii(X, rho, radii_count)
    per = []
    for r in radii:
        _, owner = greedy_net(D, r / KAPPA)
        worst = 1
        for x in range(X.size):
            ball = owner[D[x] <= r]
            worst = max(worst, np.unique(ball).size)
        per.append(worst)
    return CoveringEstimate(KAPPA, int(max(per)), float(rho), [float(r) for r in radii], per)


# --- capacitors ----------------------------------------------------------------------


def build_capacitors(
    X: MetricMeasureSpace, n: int, r: float, gap: float = 0.0, N_hat: int | None = None
) -> CapacitorFamily:
    """Greedy densest-ball packing of ``n`` capacitors (B(x, r), r-neighbourhood).

    Candidates are taken in decreasing order of ball mass; a candidate is
    accepted when its core lies farther than 2r + gap from every accepted
    core, which keeps the halos disjoint with room ``gap`` between them.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    if not r > 0:
        raise ValueError("r must be positive")
    D = X.distance_matrix()
    w = X.weights
    inball = D < r
    mass = inball.astype(float) @ w
    order = np.lexsort((np.arange(X.size), -mass))
    cores, centers = [], []
    taken = np.zeros(X.size, dtype=bool)  # union of accepted cores
    for x in order:
        if len(cores) == n:
            break
        core = np.flatnonzero(inball[x])
        if taken.any() and D[np.ix_(core, np.flatnonzero(taken))].min() <= 2 * r + gap:
            continue
        cores.append(core)
        centers.append(int(x))
        taken[core] = True
    if len(cores) < n:
        raise CapacitorError(f"packing infeasible at radius r={r:g}: placed {len(cores)} of {n}")
    halos = [np.flatnonzero(D[:, a].min(axis=1) < r) for a in cores]
    fam = CapacitorFamily(
        n,
        float(r),
        centers,
        cores,
        halos,
        [float(w[a].sum()) for a in cores],
        [float(w[h].sum()) for h in halos],
    )
    if N_hat is not None:
        need = X.total_weight / (2 * N_hat * n)
        fam.mass_bound_ok = [m >= need for m in fam.core_masses]
    if not fam.halos_disjoint():
        raise CapacitorError("halos overlap")  # unreachable by the separation rule
    return fam


def profile(dist_to_core: np.ndarray, r: float) -> np.ndarray:
    return np.clip(1.0 - dist_to_core / r, 0.0, 1.0)


def build_test_functions(fam: CapacitorFamily, X: MetricMeasureSpace) -> CapacitorFamily:
    """f_i = clamp(1 - d(., A_i)/r, 0, 1), with its discrete dilatation."""
    D = X.distance_matrix()
    fs, dil = [], []
    near = D <= 2 * fam.r
    np.fill_diagonal(near, False)
    i, j = np.nonzero(near)
    for core in fam.cores:
        f = profile(D[:, core].min(axis=1), fam.r)
        with np.errstate(divide="ignore", invalid="ignore"):
            q = np.abs(f[i] - f[j]) / D[i, j]
        q = q[np.isfinite(q)]
        fs.append(f)
        dil.append(float(q.max()) if q.size else 0.0)
    fam.test_functions = fs
    fam.dilatations = dil
    if max(dil) > 1.0 / fam.r + DILATATION_TOL:
        raise CapacitorError("test function dilatation exceeds 1/r")
    return fam


def _vertex_functions(c: ImmersedComplex, fam: CapacitorFamily) -> list[np.ndarray]:
    """Vertex value = largest barycenter value over the incident simplices."""
    out = []
    for f in fam.test_functions:
        g = np.zeros(c.n_vertices)
        np.maximum.at(g, c.simplices.ravel(), np.repeat(f, c.simplices.shape[1]))
        out.append(g)
    return out


def capacitor_upper_bound(
    c: ImmersedComplex, n: int, r: float, metric: str = "euclidean", tol: float = 1e-8, seed: int = 0
) -> tuple[float, float]:
    """max Rayleigh quotient over n disjointly supported capacitor functions, and lambda_n.

    2n capacitors are packed and the n with the lightest halos kept. The
    packing gap keeps the vertex supports of different functions
    non-adjacent, so both mass and stiffness cross terms vanish and the
    min-max principle gives lambda_n <= bound.
    """
    X = to_mm_space(c, metric)
    gap = 3.0 * c.max_edge_length
    fam = build_test_functions(build_capacitors(X, 2 * n, r, gap=gap), X)
    keep = np.argsort(fam.halo_masses, kind="stable")[:n]
    ops = assemble(c)
    vf = _vertex_functions(c, fam)
    fs = [vf[i] for i in np.sort(keep)]
    F = np.column_stack(fs)
    for A in (ops.stiffness, ops.mass):
        G = F.T @ (A @ F)
        if np.abs(G - np.diag(np.diag(G))).max() > 1e-12 * np.abs(np.diag(G)).max():
            raise CapacitorError("capacitor supports interact")
    bound = max(rayleigh_quotient(ops, f) for f in fs)
    lam = solve_spectrum(ops, n, tol=tol, seed=seed)[n]
    return float(bound), float(lam)


# --- explicit bound --------------------------------------------------------------------


def explicit_rhs(k: int, rho: float, N: float, L: float, p: float, mu: float, nu: float) -> tuple[float, float]:
    """(term_rho, term_main) of the capacitor bound on lambda_k."""
    ratio = mu / nu
    term_rho = 0.0 if math.isinf(rho) else 16 * N / rho**2 * ratio
    term_main = 16 * N * (8 * N**2 * L) ** (2 / p) * ratio ** (1 + 2 / p) * (k / mu) ** (2 / p)
    return term_rho, term_main


def corollary_bound(
    c: ImmersedComplex,
    k: int,
    eps_region: Region | None = None,
    rho: float = math.inf,
    L_source: str = "measured",
    r: float | None = None,
    covering: CoveringEstimate | None = None,
    index_value: float | None = None,
    crofton: float | None = None,
    L_value: float | None = None,
    n_grassmann: int = 64,
    radii_count: int = 12,
    seed: int = 0,
) -> ExplicitBound:
    """Capacitor bound on lambda_k with measured covering number N and growth constant L.

    ``L_source`` selects L: "measured" (sup of ball volume / s^m over
    s <= rho), "crofton-mean-index" (2 Vol(B^m)/I(G) times the mean index of
    the retained part) or "crofton-local-index" (same with the r-local
    index; requires ``r``). ``index_value`` and ``crofton`` override the
    internally estimated index and I(G); ``L_value`` skips estimating L.
    """
    m = c.dim_m
    region = eps_region if eps_region is not None and len(eps_region) else None
    if covering is None:
        covering = covering_number(to_mm_space(c, "euclidean", restricted_to=region), rho, radii_count)
    N = covering.N_hat
    mu = riemannian_volume(c)
    kept = c if region is None else remove_region(c, region)
    nu = riemannian_volume(kept)
    if L_value is not None:
        L = L_value
    elif L_source == "measured":
        radii = default_radii(c, count=radii_count, rho=rho)
        L = ball_growth_constant(kept, radii, centers=c.vertices).L_hat
    elif L_source in ("crofton-mean-index", "crofton-local-index"):
        if index_value is None:
            sampler = IndexSampler(kept, n_grassmann, seed=seed)
            if L_source == "crofton-mean-index":
                index_value = sampler.mean_index().value
            else:
                if r is None:
                    raise ValueError("local index needs a radius r")
                index_value = sampler.local_index(r).value
        if crofton is None:
            crofton = crofton_constant(m, c.codim_p, 20_000, seed=seed).value
        L = 2 * unit_ball_volume(m) / crofton * index_value
    else:
        raise ValueError(f"unknown L source {L_source!r}")
    term_rho, term_main = explicit_rhs(k, rho, N, L, m, mu, nu)
    return ExplicitBound(k, float(rho), float(N), float(L), m, float(mu), float(nu),
                         term_rho + term_main, term_rho, term_main, L_source)
