"""Acceptance criteria, one test per criterion at the stated tolerance.

Run ``pytest tests/test_acceptance.py -v``; the terminal summary prints a
PASS/FAIL line per criterion.
"""

import math
from pathlib import Path

import numpy as np
import pytest

from extrinsic_spectra import harness
from extrinsic_spectra.capacitor import (
    DILATATION_TOL,
    build_capacitors,
    build_test_functions,
    capacitor_upper_bound,
    corollary_bound,
    covering_number,
)
from extrinsic_spectra.cpn import (
    curve_area,
    curve_mesh,
    curve_spectrum,
    fs_conformal_factor,
    make_curve,
)
from extrinsic_spectra.geom import riemannian_volume, spike_region, to_mm_space
from extrinsic_spectra.grassmann import (
    IndexSampler,
    ball_growth_constant,
    crofton_constant,
    default_radii,
    haar_samples,
    projected_volume,
)
from extrinsic_spectra.spectrum import closed_form_spectrum, spectrum_of

CONFIGS = Path(__file__).resolve().parents[1] / "configs"
FIVE_SHAPES = ["circle(512)", "sphere(3)", "ellipsoid(1,2,3,3)", "torus(2,0.5,32)", "spiky_sphere(4,3,0.4,0.08)"]
SPIKY = "spiky_sphere(4,3,0.4,0.08)"
CURVES = ["identity", "veronese", "rnc(3)"]


def _report(n, ok, detail=""):
    print(f"criterion {n}: {'PASS' if ok else 'FAIL'} {detail}")
    assert ok, detail


def _rel(a, b):
    a, b = np.asarray(a, float), np.asarray(b, float)
    return np.abs(a - b) / np.where(b == 0, 1.0, np.abs(b))


def test_criterion_01_spectrum_oracles(get_shape):
    lam = spectrum_of(get_shape("circle(2048)"), 9).eigenvalues
    ref = np.array([0, 1, 1, 4, 4, 9, 9, 16, 16.0])
    ok_c = abs(lam[0]) < 1e-8 and np.all(_rel(lam[1:], ref[1:]) <= 0.005)
    lam_s = spectrum_of(get_shape("sphere(4)"), 10).eigenvalues
    ref_s = np.array([0, 2, 2, 2, 6, 6, 6, 6, 6, 12.0])
    ok_s = abs(lam_s[0]) < 1e-8 and np.all(_rel(lam_s[1:], ref_s[1:]) <= 0.02)
    _report(1, ok_c and ok_s, f"circle max rel {_rel(lam[1:], ref[1:]).max():.2e}, "
                              f"sphere max rel {_rel(lam_s[1:], ref_s[1:]).max():.2e}")


def test_criterion_02_crofton_constants():
    ok, notes = True, []
    for (m, p), exact in {(1, 1): 2 / math.pi, (2, 1): 0.5}.items():
        est = crofton_constant(m, p, 100_000, seed=0)
        close = abs(est.value - exact) <= 0.01 * exact
        flat = est.anisotropy_spread <= 2 * est.frame_standard_error
        ok &= close and flat
        notes.append(f"({m},{p}) I={est.value:.5f} spread={est.anisotropy_spread:.2e} se={est.frame_standard_error:.2e}")
    _report(2, ok, "; ".join(notes))


def test_criterion_03_exact_indices(get_shape):
    vals = {}
    for s in ("circle(512)", "sphere(3)", "ellipsoid(1,2,3,3)"):
        sampler = IndexSampler(get_shape(s), 64, seed=0)
        vals[s] = (sampler.sup_index().value, sampler.mean_index().value)
    torus = IndexSampler(get_shape("torus(2,0.5,64)"), 256, seed=0).sup_index().value
    ok = all(v == (2.0, 2.0) for v in vals.values()) and torus == 4.0
    _report(3, ok, f"{vals}, torus sup {torus}")


def test_criterion_04_volume_lemma(get_shape):
    worst = math.inf
    for s in FIVE_SHAPES:
        c = get_shape(s)
        IG = crofton_constant(c.dim_m, c.codim_p, 100_000, seed=0).value
        mean_i = IndexSampler(c, 64, seed=0).mean_index().value
        proj = max(projected_volume(c, h, 128) for h in haar_samples(c.dim_m, c.codim_p, 64, seed=7))
        rhs = 2 / IG * mean_i * proj
        worst = min(worst, (rhs - riemannian_volume(c)) / rhs)
    _report(4, worst >= -0.05, f"smallest relative slack {worst:.3f}")


def test_criterion_05_explicit_bound_end_to_end(get_shape):
    violations = 0
    for s in ("circle(512)", "sphere(3)", "torus(2,0.5,32)"):
        c = get_shape(s)
        lam = spectrum_of(c, 20).eigenvalues
        cover = covering_number(to_mm_space(c), math.inf)
        L = ball_growth_constant(c, default_radii(c, 12), centers="sample", sample=1024).L_hat
        for k in range(1, 21):
            b = corollary_bound(c, k, covering=cover, L_value=L)
            violations += lam[k - 1] > b.rhs_value
    _report(5, violations == 0, f"{violations} violations")


CAPACITOR_RADII = {"circle(512)": lambda n: 0.36 / n, "sphere(3)": lambda n: 0.1}


def test_criterion_06_capacitor_certificates(get_shape):
    ok, notes = True, []
    for s, radius in CAPACITOR_RADII.items():
        c = get_shape(s)
        X = to_mm_space(c)
        for n in (2, 3, 4):
            r = radius(n)
            fam = build_test_functions(build_capacitors(X, n, r), X)
            bound, lam = capacitor_upper_bound(c, n, r)
            good = fam.halos_disjoint() and max(fam.dilatations) <= 1 / r + DILATATION_TOL
            good &= bound >= lam - 1e-6 * lam
            ok &= good
            notes.append(f"{s} n={n} bound/lambda={bound / lam:.2f}")
    _report(6, ok, "; ".join(notes))


def test_criterion_07_perturbation_stability(get_shape):
    spiky, smooth = get_shape(SPIKY), get_shape("sphere(4)")
    spikes = spike_region(spiky).volume_fraction
    sampler = IndexSampler(spiky, 64, seed=0)
    sup_i = sampler.sup_index().value
    e = sampler.eps_index(0.05)
    IG = crofton_constant(2, 1, 100_000, seed=0).value
    smooth_i = IndexSampler(smooth, 64, seed=0).mean_index().value
    ratios = []
    for k in (1, 5, 20):
        b1 = corollary_bound(spiky, k, e.chosen_region, math.inf, "crofton-mean-index",
                             index_value=e.value, crofton=IG)
        b0 = corollary_bound(smooth, k, None, math.inf, "crofton-mean-index", index_value=smooth_i, crofton=IG)
        ratios.append(b1.rhs_value / b0.rhs_value)
    ok = spikes <= 0.03 and sup_i >= 4 and e.value <= 2 + e.standard_error and all(1 / 3 <= q <= 3 for q in ratios)
    _report(7, ok, f"spike area {spikes:.4f}, sup {sup_i}, eps-index {e.value}+-{e.standard_error:.3f}, "
                   f"bound ratios {np.round(ratios, 3).tolist()}")


@pytest.fixture(scope="module")
def curve_spectra():
    mesh = curve_mesh(4)
    out = {}
    for name in CURVES:
        metric = fs_conformal_factor(make_curve(name), mesh)
        out[name] = (curve_spectrum(metric, 21).eigenvalues, curve_area(metric))
    return out


def test_criterion_08_cp1_sharpness(curve_spectra):
    lam_id = curve_spectra["identity"][0]
    ok = abs(lam_id[1] - 8) <= 0.02 * 8
    worst = -math.inf
    for name in CURVES:
        lam = curve_spectra[name][0]
        for k in range(1, 21):
            worst = max(worst, lam[k] - (12 * k - 4))
    ok &= worst <= 0
    _report(8, ok, f"identity lambda_2 = {lam_id[1]:.4f}, largest excess over 12k-4 = {worst:.3f}")


def test_criterion_09_universal_and_cheng_yang(curve_spectra):
    worst = min(harness.universal_inequality_residual(lam, 1, k)
                for lam, _ in curve_spectra.values() for k in range(1, 16))
    exact = closed_form_spectrum("cpm(1)", 16)
    eq = []
    for k in (1, 4):
        lhs, rhs = harness.universal_terms(exact, 1, k)
        eq.append(abs(rhs - lhs) / abs(rhs))
    mu = np.asarray(exact) + 4
    cy = harness.cheng_yang_bound(mu, 2)
    cy_eq = mu[1] == 3 * mu[0] and abs(cy[0]["bound"] - mu[1]) <= 1e-12 and cy[0]["hypothesis_holds"]
    ok = worst >= -1e-9 and max(eq) < 1e-9 and cy_eq
    _report(9, ok, f"smallest residual {worst:.3e}, equality residuals {eq}, mu_2/mu_1 = {mu[1] / mu[0]}")


def test_criterion_10_degree_volume(curve_spectra):
    errs = [abs(curve_spectra[name][1] - d * math.pi) / (d * math.pi) for d, name in enumerate(CURVES, 1)]
    _report(10, max(errs) <= 0.01, f"relative area errors {np.round(errs, 5).tolist()}")


def test_criterion_11_determinism(tmp_path):
    suite = harness.load_config(CONFIGS / "fixtures.json")
    first = harness.render(harness.run_suite(suite), "jsonl").encode()
    harness.emit_text(first.decode(), tmp_path / "a.jsonl")
    harness.emit_text(harness.render(harness.run_suite(suite), "jsonl"), tmp_path / "b.jsonl")
    a, b = (tmp_path / "a.jsonl").read_bytes(), (tmp_path / "b.jsonl").read_bytes()
    _report(11, a == b and a == first, f"{len(a)} bytes per run")
