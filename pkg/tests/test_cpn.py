import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from extrinsic_spectra.cpn import (
    CurveError,
    HolomorphicCurve,
    curve_area,
    curve_degree,
    curve_mesh,
    curve_spectrum,
    fs_conformal_factor,
    fs_density,
    make_curve,
    rational_normal_curve,
    sphere_coordinates,
)


@pytest.fixture(scope="module")
def mesh():
    return curve_mesh(3)


def test_identity_factor_is_one(mesh):
    f = fs_conformal_factor(make_curve("identity"), mesh).factor
    assert np.allclose(f, 1.0)


@pytest.mark.parametrize("d", [1, 2, 3, 5])
def test_rational_normal_curve_factor_is_degree(d, mesh):
    f = fs_conformal_factor(rational_normal_curve(d), mesh).factor
    assert np.allclose(f, d)


def test_fs_density_identity_closed_form():
    z = np.array([0, 0.5 + 0.5j, 3j])
    h = fs_density(make_curve("identity").coefficients, z)
    assert np.allclose(h, (1 + np.abs(z) ** 2) ** -2)


def test_charts_cover_sphere(mesh):
    z, flipped = sphere_coordinates(mesh.vertices)
    assert np.all(np.abs(z) <= 1 + 1e-12)
    assert flipped.any() and (~flipped).any()


def test_curve_parsing():
    assert make_curve("veronese").degree_d == 2
    assert make_curve("rnc(4)").codim == 4
    c = make_curve([[1], [[0, 0], [2, 0]]])
    assert c.degree_d == 1 and curve_degree(c) == 1
    with pytest.raises(CurveError):
        make_curve("klein")


def test_invalid_curves():
    with pytest.raises(CurveError):
        HolomorphicCurve(([1, 1],))
    with pytest.raises(CurveError):
        HolomorphicCurve(([1], [2]))
    with pytest.raises(CurveError, match="common factor"):
        HolomorphicCurve(([-1, 1], [-1, 0, 1]))  # z - 1 divides both


def test_branch_point_rejected(mesh):
    with pytest.raises(CurveError, match="branch"):
        fs_conformal_factor(HolomorphicCurve(([1], [0, 0, 1])), curve_mesh(2))


def test_area_is_degree_times_pi(mesh):
    for d in (1, 2, 3):
        assert curve_area(fs_conformal_factor(rational_normal_curve(d), mesh)) == pytest.approx(d * math.pi, rel=0.01)


def test_veronese_spectrum_is_rescaled(mesh):
    a = curve_spectrum(fs_conformal_factor(make_curve("identity"), mesh), 9).eigenvalues
    b = curve_spectrum(fs_conformal_factor(make_curve("veronese"), mesh), 9).eigenvalues
    assert np.allclose(b, a / 2, rtol=1e-8, atol=1e-9)


def test_nonhomogeneous_factor_range(mesh):
    f = fs_conformal_factor(make_curve([[1], [0, 2]]), curve_mesh(4)).factor
    # [1 : 2z] is a Moebius dilation: factor 4(1+|z|^2)^2 / (1+4|z|^2)^2 spans [1/4, 4]
    assert f.min() == pytest.approx(0.25, rel=1e-2) and f.max() == pytest.approx(4, rel=1e-2)


FINE = curve_mesh(4)
unit_pairs = st.tuples(st.floats(-1, 1), st.floats(-1, 1), st.floats(-1, 1), st.floats(-1, 1)).filter(
    lambda t: sum(x * x for x in t) > 1e-3)


@given(unit_pairs)
def test_rotation_preserves_area_and_degree(t):
    v = np.array(t) / np.linalg.norm(t)
    a, b = complex(v[0], v[1]), complex(v[2], v[3])
    c = make_curve([[1, 0.5], [0, 1, 0.3]])
    r = c.reparametrized(a, b)
    assert r.degree_d == c.degree_d
    # the area of a degree-2 curve is 2 pi whatever the parametrization
    assert curve_area(fs_conformal_factor(r, FINE)) == pytest.approx(2 * math.pi, rel=0.015)


@pytest.mark.parametrize("ab", [(0, 1), (1j, 0)])
def test_mesh_symmetry_invariance(ab, mesh):
    # z -> -1/z and z -> -z map the icosphere onto itself up to vertex order
    c = make_curve([[1, 0.5], [0, 1, 0.3]])
    f0 = np.sort(fs_conformal_factor(c, mesh).factor)
    f1 = np.sort(fs_conformal_factor(c.reparametrized(*ab), mesh).factor)
    assert np.allclose(f0, f1, rtol=1e-9)


@given(st.lists(st.complex_numbers(max_magnitude=3, allow_nan=False, allow_infinity=False), min_size=2, max_size=4))
def test_density_nonnegative(coeffs):
    try:
        c = HolomorphicCurve(([1], coeffs))
    except CurveError:
        return
    z = np.exp(1j * np.linspace(0, 6, 40)) * np.linspace(0.1, 1, 40)
    assert np.all(fs_density(c.coefficients, z) >= -1e-12)
