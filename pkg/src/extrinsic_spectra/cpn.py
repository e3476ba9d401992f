"""Rational curves in CP^N with the pulled-back Fubini-Study metric.

A curve [p_0(z) : ... : p_N(z)] pulls the Fubini-Study metric back to
h(z)|dz|^2 with h = d/dz d/dzbar log sum |p_j|^2. The domain CP^1 is
meshed as the round sphere of radius 1/2, whose own metric is
(1 + |z|^2)^-2 |dz|^2 in the stereographic coordinate, so the pullback is
that round metric times the conformal factor h (1 + |z|^2)^2. In two
dimensions the Dirichlet energy is conformally invariant, which leaves the
stiffness matrix alone and scales only the mass.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import polynomial as P

from .geom import ImmersedComplex, make_sphere
from .spectrum import SpectrumResult, assemble, lumped_vertex_measure, solve_spectrum

ROOT_TOL = 1e-8


class CurveError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class HolomorphicCurve:
    """Polynomials p_j in ascending powers of the affine coordinate z."""

    coefficients: tuple
    label: str = ""

    def __post_init__(self):
        polys = tuple(np.trim_zeros(np.asarray(p, dtype=complex), "b") for p in self.coefficients)
        if len(polys) < 2:
            raise CurveError("a curve in CP^N needs at least two coordinates")
        if all(p.size == 0 for p in polys):
            raise CurveError("all polynomials are zero")
        object.__setattr__(self, "coefficients", polys)
        if self.degree_d < 1:
            raise CurveError("constant map is not an immersion")
        if self._common_root() is not None:
            raise CurveError("polynomials share a common factor (base point)")

    @property
    def degree_d(self) -> int:
        return max(p.size for p in self.coefficients) - 1

    @property
    def codim(self) -> int:
        return len(self.coefficients) - 1

    def _common_root(self):
        nonzero = [p for p in self.coefficients if p.size]
        pivot = min((p for p in nonzero if p.size > 1), key=len, default=None)
        if pivot is None:
            return None
        scale = max(np.abs(p).max() for p in nonzero)
        far = self.homogenized()
        for z in np.roots(pivot[::-1]):
            # large roots are tested in the chart w = 1/z to stay bounded
            if abs(z) <= 1:
                vals = [P.polyval(z, p) for p in nonzero]
            else:
                vals = [P.polyval(1 / z, p) for p in far if p.any()]
            if all(abs(v) <= ROOT_TOL * scale for v in vals):
                return z
        return None

    def homogenized(self) -> tuple:
        """Coefficients of w^d p_j(1/w), the chart around z = infinity."""
        d = self.degree_d
        return tuple(np.pad(p, (0, d + 1 - p.size))[::-1] for p in self.coefficients)

    def reparametrized(self, a: complex, b: complex) -> "HolomorphicCurve":
        """Precompose with the rotation z -> (a z + b) / (-conj(b) z + conj(a))."""
        if abs(abs(a) ** 2 + abs(b) ** 2 - 1) > 1e-12:
            raise CurveError("need |a|^2 + |b|^2 = 1")
        d = self.degree_d
        num = np.array([b, a])
        den = np.array([np.conj(a), -np.conj(b)])
        out = []
        for p in self.coefficients:
            acc = np.zeros(1, dtype=complex)
            for j, cj in enumerate(p):
                term = P.polymul(P.polypow(num, j), P.polypow(den, d - j))
                acc = P.polyadd(acc, cj * term)
            out.append(acc)
        return HolomorphicCurve(tuple(out), f"{self.label}o({a},{b})")


def rational_normal_curve(d: int) -> HolomorphicCurve:
    """[..: sqrt(C(d, j)) z^j :..], the degree-d Veronese embedding of CP^1."""
    coeffs = []
    for j in range(d + 1):
        c = np.zeros(j + 1)
        c[j] = math.sqrt(math.comb(d, j))
        coeffs.append(c)
    return HolomorphicCurve(tuple(coeffs), "identity" if d == 1 else f"rnc({d})")


def make_curve(spec) -> HolomorphicCurve:
    """Named curve ("identity", "veronese", "rnc(d)") or a list of coefficient lists.

    Coefficients may be numbers or [re, im] pairs.
    """
    if isinstance(spec, HolomorphicCurve):
        return spec
    if isinstance(spec, str):
        s = spec.strip().lower()
        if s == "identity":
            return rational_normal_curve(1)
        if s == "veronese":
            return rational_normal_curve(2)
        m = re.fullmatch(r"(?:rnc|veronese)\((\d+)\)", s)
        if m:
            return rational_normal_curve(int(m.group(1)))
        raise CurveError(f"unknown curve {spec!r}")
    polys = []
    for p in spec:
        polys.append([complex(*c) if isinstance(c, (list, tuple)) else complex(c) for c in p])
    return HolomorphicCurve(tuple(polys), "custom")


def fs_density(coefficients, z: np.ndarray) -> np.ndarray:
    """h(z) = (S sum|p'|^2 - |sum p' conj(p)|^2) / S^2 with S = sum |p|^2."""
    vals = np.array([P.polyval(z, p) if p.size else np.zeros_like(z) for p in coefficients])
    ders = np.array([P.polyval(z, P.polyder(p)) if p.size > 1 else np.zeros_like(z) for p in coefficients])
    S = (np.abs(vals) ** 2).sum(axis=0)
    if np.any(S <= 0):
        raise CurveError("curve has a base point on the sample set")
    cross = (ders * np.conj(vals)).sum(axis=0)
    return (S * (np.abs(ders) ** 2).sum(axis=0) - np.abs(cross) ** 2) / S**2


@dataclass(frozen=True, eq=False)
class ConformalMetric:
    base: ImmersedComplex
    factor: np.ndarray = field(repr=False)
    curve_label: str = ""


def sphere_coordinates(v: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Stereographic z from the north pole, and a mask of vertices using the chart w = 1/z."""
    u = v / np.linalg.norm(v, axis=1, keepdims=True)
    south = u[:, 2] <= 0  # |z| <= 1
    z = np.empty(len(u), dtype=complex)
    # z = (x + iy) / (1 - z3) in the southern half, w = 1/z = (x - iy) / (1 + z3) otherwise
    z[south] = (u[south, 0] + 1j * u[south, 1]) / (1 - u[south, 2])
    z[~south] = (u[~south, 0] - 1j * u[~south, 1]) / (1 + u[~south, 2])
    return z, ~south


def curve_mesh(subdiv: int = 4) -> ImmersedComplex:
    return make_sphere(subdiv, radius=0.5)


def fs_conformal_factor(curve: HolomorphicCurve, mesh: ImmersedComplex | None = None) -> ConformalMetric:
    """Pulled-back Fubini-Study density relative to the radius-1/2 round metric, per vertex."""
    mesh = curve_mesh() if mesh is None else mesh
    z, flipped = sphere_coordinates(mesh.vertices)
    factor = np.empty(len(z))
    for mask, coeffs in ((~flipped, curve.coefficients), (flipped, curve.homogenized())):
        if mask.any():
            factor[mask] = fs_density(coeffs, z[mask]) * (1 + np.abs(z[mask]) ** 2) ** 2
    if np.any(factor <= 1e-12):
        raise CurveError("pulled-back metric degenerates (branch point)")
    factor.setflags(write=False)
    return ConformalMetric(mesh, factor, curve.label)


def curve_area(metric: ConformalMetric) -> float:
    return float(metric.factor @ lumped_vertex_measure(metric.base))


def curve_spectrum(metric: ConformalMetric, k: int, tol: float = 1e-8, seed: int = 0) -> SpectrumResult:
    ops = assemble(metric.base, density=metric.factor)
    return solve_spectrum(ops, k, tol=tol, seed=seed, meta={"curve": metric.curve_label})


def curve_degree(curve: HolomorphicCurve) -> int:
    return curve.degree_d
