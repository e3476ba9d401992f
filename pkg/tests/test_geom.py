import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from extrinsic_spectra.geom import (
    ComplexError,
    ImmersedComplex,
    Region,
    cap_region,
    load_complex,
    make_circle,
    make_shape,
    make_sphere,
    make_spiky_sphere,
    make_torus,
    remove_region,
    riemannian_volume,
    spike_region,
    to_mm_space,
    write_csv_polyline,
    write_off,
)


def test_circle_perimeter_is_inscribed_polygon():
    for n in (4, 7, 64):
        assert riemannian_volume(make_circle(n)) == pytest.approx(2 * n * math.sin(math.pi / n))


def test_icosphere_counts_and_area():
    for sd in range(4):
        c = make_sphere(sd)
        assert c.n_simplices == 20 * 4**sd
        assert c.is_closed
    assert riemannian_volume(make_sphere(4)) == pytest.approx(4 * math.pi, rel=5e-3)


def test_torus_area():
    assert riemannian_volume(make_torus(2, 0.5, 64)) == pytest.approx(4 * math.pi**2, rel=5e-3)


def test_shape_strings_round_trip():
    assert make_shape("torus(2,0.5,16)").label == make_torus(2, 0.5, 16).label
    with pytest.raises(ComplexError):
        make_shape("klein(3)")
    with pytest.raises(ComplexError):
        make_shape("circle(2)")


def test_degenerate_simplex_rejected():
    v = np.array([[0, 0, 0], [1, 0, 0], [2, 0, 0.0]])
    with pytest.raises(ComplexError, match="zero-measure"):
        ImmersedComplex(2, v, np.array([[0, 1, 2]]))


def test_nonmanifold_edge_rejected():
    v = np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, -1, 0], [0, 0, 1.0]])
    f = np.array([[0, 1, 2], [0, 1, 3], [0, 1, 4]])
    with pytest.raises(ComplexError):
        ImmersedComplex(2, v, f)


def test_need_codimension():
    with pytest.raises(ComplexError):
        ImmersedComplex(2, np.array([[0, 0], [1, 0], [0, 1.0]]), np.array([[0, 1, 2]]))


def test_remove_region_volume():
    c = make_sphere(3)
    d = cap_region(c, [0, 0, 1], 0.5)
    kept = remove_region(c, d)
    assert riemannian_volume(kept) == pytest.approx(riemannian_volume(c) * (1 - d.volume_fraction))
    assert not kept.is_closed
    with pytest.raises(ComplexError):
        remove_region(c, Region.from_simplices(c, range(c.n_simplices)))


def test_spiky_sphere_only_moves_caps():
    c = make_spiky_sphere(3, 3, 0.5, 0.3)
    r = np.linalg.norm(c.vertices, axis=1)
    moved = r > 1 + 1e-12
    assert moved.any() and np.allclose(r[~moved], 1)
    d = spike_region(c)
    assert 0 < d.volume_fraction < 0.2
    with pytest.raises(ComplexError):
        spike_region(make_sphere(2))


def test_mm_space_restriction_zeroes_weights():
    c = make_sphere(2)
    d = cap_region(c, [1, 0, 0], 0.6)
    X = to_mm_space(c, restricted_to=d)
    assert X.total_weight == pytest.approx(riemannian_volume(c) * (1 - d.volume_fraction))
    assert np.all(X.weights[d.simplex_ids] == 0)


def test_geodesic_metric_dominates_chord():
    c = make_sphere(2)
    eu = to_mm_space(c).distance_matrix()
    geo = to_mm_space(c, "graph-geodesic").distance_matrix()
    assert np.all(geo >= eu - 1e-12)
    # antipodal chord 2, great-circle pi; dual-graph paths sit in between-ish
    assert 2 - 1e-9 <= geo.max() <= 1.2 * math.pi


def test_off_and_csv_round_trip(tmp_path):
    c = make_torus(2, 0.5, 8)
    write_off(c, tmp_path / "t.off")
    back = load_complex(tmp_path / "t.off")
    assert np.allclose(back.vertices, c.vertices) and np.array_equal(back.simplices, c.simplices)
    circ = make_circle(12)
    write_csv_polyline(circ, tmp_path / "c.csv")
    assert riemannian_volume(load_complex(tmp_path / "c.csv")) == pytest.approx(riemannian_volume(circ))


def test_obj_quads_are_fanned(tmp_path):
    (tmp_path / "q.obj").write_text(
        "v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nv 0.5 0.5 1\nf 1 2 3 4\nf 1 2 5\nf 2 3 5\nf 3 4 5\nf 4 1 5\n")
    c = load_complex(tmp_path / "q.obj")
    assert c.n_simplices == 6 and c.is_closed


def test_bad_file_reports_error(tmp_path):
    (tmp_path / "bad.off").write_text("OFF\n3 1 0\n0 0 0\n")
    with pytest.raises(ComplexError):
        load_complex(tmp_path / "bad.off")


@given(st.floats(0.1, 10), st.integers(3, 200))
def test_circle_volume_scales_linearly(t, n):
    c = make_circle(n)
    assert riemannian_volume(c.scaled(t)) == pytest.approx(t * riemannian_volume(c), rel=1e-12)


@given(st.floats(0.2, 5))
def test_sphere_volume_scales_quadratically(t):
    c = make_sphere(1)
    assert riemannian_volume(c.scaled(t)) == pytest.approx(t**2 * riemannian_volume(c), rel=1e-12)
