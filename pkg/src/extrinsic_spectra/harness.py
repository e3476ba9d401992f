"""Experiment runner: evaluates every inequality on configured fixtures.

Each check becomes a ``BoundReport``. Checks whose constants are
existential in the statement are emitted as ratios with no verdict; all
others carry explicit constants and a holds/violated verdict.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from .capacitor import corollary_bound, covering_number
from .cpn import curve_area, curve_degree, curve_mesh, curve_spectrum, fs_conformal_factor, make_curve
from .geom import ImmersedComplex, load_complex, make_shape, riemannian_volume, to_mm_space
from .grassmann import (
    IndexSampler,
    ball_growth_constant,
    crofton_constant,
    default_radii,
    haar_samples,
    projected_volume,
    unit_ball_volume,
)
from .spectrum import mean_curvature_norms, spectrum_of

SPECTRAL_TOL = 0.02
INTEGRAL_TOL = 0.05
ALGEBRAIC_TOL = 1e-9

INEQUALITY_IDS = (
    "reilly",
    "cde-ratio",
    "ehi-ratio",
    "thm-a3-mean",
    "thm-a3-local",
    "cor-2.6",
    "vol-lemma",
    "ball-growth",
    "thm-1.2",
    "universal",
    "cheng-yang",
    "degree-volume",
    "normalized-cpn",
)
RATIO_ONLY = frozenset({"cde-ratio", "normalized-cpn", "ehi-ratio"})


class ConfigError(ValueError):
    pass


@dataclass
class BoundReport:
    inequality_id: str
    fixture: str
    k: int | None
    lhs: float
    rhs: float | str
    slack: float
    verdict: str
    tolerance: float = 0.0
    constants_used: dict = field(default_factory=dict)
    provenance: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return _jsonable(asdict(self))


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else ("inf" if x > 0 else "-inf" if x < 0 else "nan")
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    return x


def asserted(ineq: str, fixture: str, k, lhs: float, rhs: float, tol: float, constants=None, prov=None,
             equality: bool = False) -> BoundReport:
    """Verdict for lhs <= rhs, or |lhs - rhs| <= tol |rhs| when ``equality``."""
    lhs, rhs = float(lhs), float(rhs)
    if equality:
        ok = abs(lhs - rhs) <= tol * abs(rhs)
    else:
        ok = lhs <= rhs + tol * abs(rhs)
    return BoundReport(ineq, fixture, k, lhs, rhs, rhs - lhs, "holds" if ok else "violated", tol,
                       constants or {}, prov or {})


def ratio_only(ineq: str, fixture: str, k, ratio: float, constants=None, prov=None) -> BoundReport:
    return BoundReport(ineq, fixture, k, float(ratio), "ratio-only", float(ratio), "ratio-only", 0.0,
                       constants or {}, prov or {})


# --- spectral recursions -------------------------------------------------------------


def cheng_yang_bound(mu, n: float) -> list[dict]:
    """Per k: the quadratic hypothesis at k and the growth bound (1 + 4/n) k^(2/n) mu_1."""
    mu = np.asarray(mu, dtype=float)
    if mu.ndim != 1 or mu.size < 2:
        raise ValueError("need at least two values")
    if mu[0] <= 0:
        raise ValueError("sequence must be positive")
    if np.any(np.diff(mu) < 0):
        raise ValueError("sequence must be nondecreasing")
    out = []
    for k in range(1, mu.size):
        gap = mu[k] - mu[:k]
        lhs = float(np.sum(gap**2))
        rhs = float(4.0 / n * np.sum(mu[:k] * gap))
        out.append({
            "k": k,
            "hypothesis_lhs": lhs,
            "hypothesis_rhs": rhs,
            "hypothesis_holds": lhs <= rhs + ALGEBRAIC_TOL * max(1.0, abs(rhs)),
            "mu_next": float(mu[k]),
            "bound": (1 + 4.0 / n) * k ** (2.0 / n) * float(mu[0]),
        })
    return out


def universal_terms(spectrum, m: int, k: int) -> tuple[float, float]:
    lam = np.asarray(spectrum, dtype=float)
    if lam.ndim != 1 or np.any(np.diff(lam) < -1e-12 * max(1.0, np.abs(lam).max())):
        raise ValueError("spectrum must be a nondecreasing list")
    if not 1 <= k < lam.size:
        raise ValueError(f"need k+1 <= {lam.size} eigenvalues, got k={k}")
    cm = 2 * m * (m + 1)
    gap = lam[k] - lam[:k]
    return float(np.sum(gap**2)), float(2.0 / m * np.sum(gap * (lam[:k] + cm)))


def universal_inequality_residual(spectrum, m: int, k: int) -> float:
    """rhs - lhs of sum (l_{k+1} - l_i)^2 <= (2/m) sum (l_{k+1} - l_i)(l_i + 2m(m+1))."""
    lhs, rhs = universal_terms(spectrum, m, k)
    return rhs - lhs


# --- configuration ----------------------------------------------------------------


@dataclass
class ExperimentConfig:
    kind: str  # "euclidean" or "cpn"
    seed: int
    shape: str | None = None
    curve: object = None
    name: str | None = None
    metric: str = "euclidean"
    k_max: int = 20
    eps: float = 0.05
    r: float | None = None
    n_grassmann: int = 64
    stab_budget: int = 0
    crofton_samples: int = 100_000
    radii_count: int = 12
    local_centers: int = 128
    growth_centers: int = 1024
    proj_resolution: int = 128
    curve_subdiv: int = 4
    tol: float = 1e-8

    def __post_init__(self):
        if self.kind not in ("euclidean", "cpn"):
            raise ConfigError(f"unknown experiment kind {self.kind!r}")
        if self.kind == "euclidean" and not self.shape:
            raise ConfigError("euclidean experiment needs a shape")
        if self.kind == "cpn" and self.curve is None:
            raise ConfigError("cpn experiment needs a curve")
        if self.proj_resolution < 64:
            raise ConfigError("proj_resolution must be at least 64")
        for name in ("k_max", "n_grassmann", "crofton_samples", "radii_count", "local_centers",
                     "growth_centers", "proj_resolution", "curve_subdiv"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        if self.stab_budget < 0:
            raise ConfigError("stab_budget must be nonnegative")
        if not 0 <= self.eps < 1:
            raise ConfigError("eps must lie in [0, 1)")
        if self.r is not None and self.r <= 0:
            raise ConfigError("r must be positive")

    @classmethod
    def from_dict(cls, d: dict, defaults: dict | None = None) -> "ExperimentConfig":
        merged = {**(defaults or {}), **d}
        known = {f.name for f in fields(cls)}
        unknown = set(merged) - known
        if unknown:
            raise ConfigError(f"unknown config keys {sorted(unknown)}")
        if "seed" not in merged:
            raise ConfigError("seed is mandatory")
        try:
            return cls(**merged)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    @property
    def label(self) -> str:
        if self.name:
            return self.name
        return self.shape if self.kind == "euclidean" else str(self.curve)


@dataclass
class SuiteConfig:
    experiments: list
    output: str | None = None
    format: str = "jsonl"


def load_config(path: str | os.PathLike) -> SuiteConfig:
    """A JSON document: one experiment, or {"defaults", "experiments", "output", "format"}."""
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if "experiments" not in doc:
        doc = {"experiments": [doc]}
    defaults = doc.get("defaults", {})
    exps = [ExperimentConfig.from_dict(e, defaults) for e in doc["experiments"]]
    fmt = doc.get("format", "jsonl")
    if fmt not in ("jsonl", "csv"):
        raise ConfigError(f"unknown output format {fmt!r}")
    return SuiteConfig(exps, doc.get("output"), fmt)


def build_complex(shape: str) -> ImmersedComplex:
    if Path(shape).suffix.lower() in (".off", ".obj", ".csv"):
        return load_complex(shape)
    return make_shape(shape)


# --- euclidean submanifolds ---------------------------------------------------------


def _max_projected_volume(c: ImmersedComplex, n: int, seed: int, resolution: int) -> float:
    planes = haar_samples(c.dim_m, c.codim_p, n, seed=seed + 7)
    return max(projected_volume(c, h, resolution) for h in planes)


def verify_euclidean(cfg: ExperimentConfig) -> list[BoundReport]:
    c = build_complex(cfg.shape)
    m, p = c.dim_m, c.codim_p
    fx = cfg.label
    vol = riemannian_volume(c)
    prov = {"seed": cfg.seed, "mesh": c.label, "n_vertices": c.n_vertices, "n_simplices": c.n_simplices,
            "n_grassmann": cfg.n_grassmann, "stab_budget": cfg.stab_budget}
    spec = spectrum_of(c, cfg.k_max, tol=cfg.tol, seed=cfg.seed)
    lam = spec.eigenvalues
    crof = crofton_constant(m, p, cfg.crofton_samples, seed=cfg.seed)
    IG = crof.value
    sampler = IndexSampler(c, cfg.n_grassmann, cfg.stab_budget, cfg.seed)
    sup_i = sampler.sup_index().value
    mean_i = sampler.mean_index().value
    r = cfg.r if cfg.r is not None else 0.25 * float(np.ptp(c.vertices, axis=0).max())
    rng = np.random.default_rng([cfg.seed, 3])
    centers = c.vertices[np.sort(rng.choice(c.n_vertices, min(cfg.local_centers, c.n_vertices), replace=False))]
    base = {"I_G": IG, "sup_index": sup_i, "mean_index": mean_i}
    reports: list[BoundReport] = []

    # index-based normalized eigenvalues (existential constant)
    for k in range(2, cfg.k_max + 1):
        ratio = lam[k - 1] * vol ** (2 / m) / (sup_i ** (2 / m) * k ** (2 / m))
        reports.append(ratio_only("cde-ratio", fx, k, ratio, {"volume": vol, "sup_index": sup_i}, prov))

    # curvature-based checks
    if p == 1:
        hn = mean_curvature_norms(c)
        if cfg.k_max >= 2:
            reilly_rhs = m / vol * hn.l2_norm_sq
            reports.append(asserted("reilly", fx, 2, lam[1], reilly_rhs, SPECTRAL_TOL,
                                    {"H_l2_sq": hn.l2_norm_sq, "volume": vol}, prov))
        for k in range(2, cfg.k_max + 1):
            reports.append(ratio_only("ehi-ratio", fx, k, lam[k - 1] / (hn.linf_norm**2 * k ** (2 / m)),
                                      {"H_inf": hn.linf_norm}, prov))

    # volume lemma and ball growth
    max_proj = _max_projected_volume(c, cfg.n_grassmann, cfg.seed, cfg.proj_resolution)
    reports.append(asserted("vol-lemma", fx, None, vol, 2 / IG * mean_i * max_proj, INTEGRAL_TOL,
                            {**base, "max_projected_volume": max_proj}, prov))
    radii = default_radii(c, cfg.radii_count)
    growth = ball_growth_constant(c, radii, centers="sample", sample=cfg.growth_centers, seed=cfg.seed,
                                  crofton=IG, mean_idx=mean_i)
    reports.append(asserted("ball-growth", fx, None, growth.L_hat, growth.theoretical_bound, INTEGRAL_TOL,
                            {**base, "worst_radius": growth.worst_radius, "unit_ball_volume": unit_ball_volume(m)},
                            prov))

    # explicit capacitor bound with measured N and L
    X = to_mm_space(c, cfg.metric)
    cover_inf = covering_number(X, math.inf, cfg.radii_count)
    for k in range(1, cfg.k_max + 1):
        b = corollary_bound(c, k, None, math.inf, "measured", covering=cover_inf, L_value=growth.L_hat)
        reports.append(asserted("cor-2.6", fx, k, lam[k - 1], b.rhs_value, 0.0,
                                {"N": b.N, "L": b.L, "rho": "inf", "mu_over_nu": b.mu_total / b.nu_total}, prov))

    # index-based bound through the explicit chain: mean branch (rho = inf) and local branch (rho = r)
    beta = 16 * cover_inf.N_hat * (16 * cover_inf.N_hat**2 * unit_ball_volume(m) / IG) ** (2 / m)
    e_mean = sampler.eps_index(cfg.eps)
    cover_r = covering_number(X, r, cfg.radii_count)
    e_loc = sampler.eps_index(cfg.eps, r=r, centers=centers)
    for k in range(1, cfg.k_max + 1):
        b = corollary_bound(c, k, e_mean.chosen_region, math.inf, "crofton-mean-index", covering=cover_inf,
                            index_value=e_mean.value, crofton=IG)
        reports.append(asserted("thm-a3-mean", fx, k, lam[k - 1], b.rhs_value, 0.0,
                                {"beta_m": beta, "N": b.N, "eps": cfg.eps, "eps_index": e_mean.value,
                                 "removed_fraction": e_mean.chosen_region.volume_fraction, "I_G": IG}, prov))
        b = corollary_bound(c, k, e_loc.chosen_region, r, "crofton-local-index", r=r, covering=cover_r,
                            index_value=e_loc.value, crofton=IG)
        reports.append(asserted("thm-a3-local", fx, k, lam[k - 1], b.rhs_value, 0.0,
                                {"alpha_m": 16 * cover_r.N_hat, "N": b.N, "r": r, "eps": cfg.eps,
                                 "eps_local_index": e_loc.value,
                                 "removed_fraction": e_loc.chosen_region.volume_fraction, "I_G": IG}, prov))
    return reports


# --- complex curves -------------------------------------------------------------------


def verify_cpn(cfg: ExperimentConfig) -> list[BoundReport]:
    curve = make_curve(cfg.curve)
    mesh = curve_mesh(cfg.curve_subdiv)
    metric = fs_conformal_factor(curve, mesh)
    fx = cfg.label
    m = 1
    cm = 2 * m * (m + 1)
    prov = {"seed": cfg.seed, "mesh": mesh.label, "n_vertices": mesh.n_vertices, "curve": str(cfg.curve)}
    spec = curve_spectrum(metric, cfg.k_max + 1, tol=cfg.tol, seed=cfg.seed)
    lam = spec.eigenvalues
    area = curve_area(metric)
    deg = curve_degree(curve)
    reports = [asserted("degree-volume", fx, None, area, deg * math.pi, SPECTRAL_TOL,
                        {"degree": deg, "vol_CP1": math.pi}, prov, equality=True)]
    cy = cheng_yang_bound(lam + cm, 2 * m)
    for k in range(1, cfg.k_max + 1):
        bound = 2 * (m + 1) * (m + 2) * k ** (1 / m) - 2 * m * (m + 1)
        reports.append(asserted("thm-1.2", fx, k, lam[k], bound, SPECTRAL_TOL, {"m": m}, prov))
        reports.append(ratio_only("normalized-cpn", fx, k, lam[k] * area ** (1 / m) / (deg * k) ** (1 / m),
                                  {"degree": deg, "area": area}, prov))
        row = cy[k - 1]
        reports.append(asserted("cheng-yang", fx, k, row["mu_next"], row["bound"], SPECTRAL_TOL,
                                {"n": 2 * m, "shift": cm, "hypothesis_holds": row["hypothesis_holds"]}, prov))
        if k <= 15:
            lhs, rhs = universal_terms(lam, m, k)
            reports.append(asserted("universal", fx, k, lhs, rhs, ALGEBRAIC_TOL, {"c_m": cm}, prov))
    return reports


# --- running and output ---------------------------------------------------------------


def run_experiment(cfg: ExperimentConfig) -> list[BoundReport]:
    return verify_euclidean(cfg) if cfg.kind == "euclidean" else verify_cpn(cfg)


CSV_COLUMNS = ("fixture", "inequality_id", "k", "lhs", "rhs", "slack", "verdict", "tolerance")


def render(reports: list[BoundReport], fmt: str = "jsonl") -> str:
    if fmt == "jsonl":
        return "".join(json.dumps(r.to_dict(), sort_keys=True) + "\n" for r in reports)
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in reports:
            d = r.to_dict()
            w.writerow(["" if d[col] is None else d[col] for col in CSV_COLUMNS])
        return buf.getvalue()
    raise ConfigError(f"unknown output format {fmt!r}")


def emit_text(text: str, path: str | os.PathLike) -> Path:
    """Write a file atomically: a temporary file in the same directory, then rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def emit(reports: list[BoundReport], path: str | os.PathLike, fmt: str = "jsonl") -> Path:
    return emit_text(render(reports, fmt), path)


def run_suite(suite: SuiteConfig) -> list[BoundReport]:
    reports = []
    for cfg in suite.experiments:
        reports.extend(run_experiment(cfg))
    return reports


def run(config_path: str | os.PathLike, out: str | None = None, fmt: str | None = None) -> int:
    """Run every experiment of a config file and write the reports; 0 if no asserted check fails."""
    suite = load_config(config_path)
    reports = run_suite(suite)
    target = out or suite.output
    fmt = fmt or suite.format
    if target:
        emit(reports, target, fmt)
    return 1 if any(r.verdict == "violated" for r in reports) else 0
