import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from extrinsic_spectra.geom import make_circle, make_ellipsoid, make_sphere, make_torus, riemannian_volume
from extrinsic_spectra.spectrum import (
    assemble,
    closed_form_spectrum,
    cpm_multiplicity,
    lumped_vertex_measure,
    mean_curvature_norms,
    mixed_voronoi_areas,
    rayleigh_quotient,
    solve_spectrum,
    spectrum_of,
)


def test_closed_forms():
    assert closed_form_spectrum("circle", 5) == [0, 1, 1, 4, 4]
    assert closed_form_spectrum("sphere(2)", 5) == [0, 0.5, 0.5, 0.5, 1.5]
    assert closed_form_spectrum("cpm(1)", 5) == [0, 8, 8, 8, 24]
    assert closed_form_spectrum("flat_torus", 3, 1, 2)[1] == pytest.approx(math.pi**2)
    with pytest.raises(ValueError):
        closed_form_spectrum("klein", 3)


def test_cpm_multiplicities():
    # CP^1 is the round sphere: 2j+1; CP^2 starts 1, 8, 27
    assert [cpm_multiplicity(j, 1) for j in range(4)] == [1, 3, 5, 7]
    assert [cpm_multiplicity(j, 2) for j in range(3)] == [1, 8, 27]


def test_mass_and_stiffness_structure():
    ops = assemble(make_sphere(2))
    K = ops.stiffness
    assert abs(K - K.T).max() < 1e-12
    assert np.allclose(K @ np.ones(ops.size), 0, atol=1e-10)
    assert ops.mass_diagonal.sum() == pytest.approx(riemannian_volume(make_sphere(2)))


def test_lumped_measure_sums_to_volume():
    c = make_torus(2, 0.5, 12)
    assert lumped_vertex_measure(c).sum() == pytest.approx(riemannian_volume(c))
    assert mixed_voronoi_areas(c).sum() == pytest.approx(riemannian_volume(c))


def test_dense_and_sparse_paths_agree():
    c = make_sphere(3)  # 642 vertices, above the dense limit
    ops = assemble(c)
    sparse_vals = solve_spectrum(ops, 12).eigenvalues
    from scipy.linalg import eigh
    dense = eigh(ops.stiffness.toarray(), ops.mass.toarray(), eigvals_only=True)[:12]
    assert np.allclose(sparse_vals, np.maximum(dense, 0), rtol=1e-7, atol=1e-8)


def test_one_based_indexing():
    res = spectrum_of(make_circle(128), 3)
    assert res[1] == pytest.approx(0, abs=1e-9)
    assert res[3] == res.eigenvalues[2]
    with pytest.raises(IndexError):
        res[0]


def test_invalid_k():
    with pytest.raises(ValueError):
        spectrum_of(make_circle(16), 0)


def test_ellipsoid_splits_first_multiplet():
    lam = spectrum_of(make_ellipsoid(1, 2, 3, 2), 4).eigenvalues
    assert lam[1] < lam[2] < lam[3]


def test_sphere_curvature_and_reilly_equality():
    c = make_sphere(4)
    h = mean_curvature_norms(c)
    assert h.linf_norm == pytest.approx(1, rel=1e-3)
    vol = riemannian_volume(c)
    lam2 = spectrum_of(c, 2)[2]
    assert lam2 == pytest.approx(2 / vol * h.l2_norm_sq, rel=0.02)


def test_circle_curvature():
    h = mean_curvature_norms(make_circle(256))
    assert h.linf_norm == pytest.approx(1, rel=1e-6)
    assert h.l2_norm_sq == pytest.approx(2 * math.pi, rel=1e-3)


def test_reilly_strict_on_ellipsoid():
    c = make_ellipsoid(1, 2, 3, 3)
    h = mean_curvature_norms(c)
    assert spectrum_of(c, 2)[2] < 2 / riemannian_volume(c) * h.l2_norm_sq


@given(st.floats(0.25, 4.0))
def test_eigenvalues_scale_inverse_square(t):
    c = make_sphere(1)
    base = spectrum_of(c, 6).eigenvalues
    scaled = spectrum_of(c.scaled(t), 6).eigenvalues
    assert np.allclose(scaled * t**2, base, rtol=1e-8, atol=1e-9)


@given(st.integers(0, 2**31 - 1))
def test_rayleigh_quotient_bounds(seed):
    ops = assemble(make_sphere(1))
    lam = solve_spectrum(ops, ops.size).eigenvalues
    f = np.random.default_rng(seed).standard_normal(ops.size)
    q = rayleigh_quotient(ops, f)
    assert lam[0] - 1e-9 <= q <= lam[-1] * (1 + 1e-9)
    f0 = f - (ops.mass_diagonal @ f) / ops.mass_diagonal.sum()
    assert rayleigh_quotient(ops, f0) >= lam[1] * (1 - 1e-9)


@given(st.integers(0, 2**31 - 1))
def test_eigenvalues_nonnegative_sorted(seed):
    n = 8 + seed % 60
    lam = spectrum_of(make_circle(n), min(n, 6), seed=seed).eigenvalues
    assert np.all(lam >= 0) and np.all(np.diff(lam) >= -1e-9)
