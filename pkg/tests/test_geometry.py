import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.special import ellipe

from alrbem.geometry import (
    Circle, Ellipse, FlatBottomEllipse, FlatSlabRegion, convexity_report, make_contour, make_shell,
    shape_from_dict, shape_to_dict,
)


def test_circle_perimeter():
    c = make_contour(Circle(1.0), 64)
    assert abs(c.perimeter - 2 * np.pi) < 1e-12 * 2 * np.pi


def test_ellipse_perimeter():
    c = make_contour(Ellipse(4, 3), 128)
    assert c.perimeter == pytest.approx(16 * ellipe(1 - 9 / 16), rel=1e-12)
    assert c.perimeter == pytest.approx(22.1035, abs=5e-5)


def test_flat_bottom_has_straight_run():
    c = make_contour(FlatBottomEllipse(4, 3, cut=-2, rho=0.3), 256)
    flat = np.abs(c.curvature) < 1e-9
    run, best = 0, 0
    for f in np.concatenate([flat, flat]):
        run = run + 1 if f else 0
        best = max(best, run)
    assert best >= 20
    assert np.allclose(c.nodes[flat, 1], -2.0, atol=1e-14)


def test_convexity_reports():
    assert convexity_report(make_contour(Circle(1.0), 64)) == (True, pytest.approx(1.0), 0.0)
    strict, kmin, flat = convexity_report(make_contour(Ellipse(4, 3), 256))
    assert strict and kmin == pytest.approx(3 / 16, rel=1e-10) and flat == 0.0
    strict, _, flat = convexity_report(make_contour(FlatBottomEllipse(4, 3, cut=-2), 256))
    assert not strict and flat > 0.1


@pytest.mark.parametrize("shape", [Circle(2.0, (0.3, -0.1)), Ellipse(4, 3), FlatBottomEllipse(4, 3, -2)])
def test_unit_normals(shape):
    c = make_contour(shape, 128)
    assert np.allclose(np.hypot(*c.normals.T), 1.0, atol=1e-12)


def test_circle_curvature():
    c = make_contour(Circle(2.5), 64)
    assert np.allclose(c.curvature, 1 / 2.5, atol=1e-10)


@pytest.mark.parametrize("degree", [0, 3, 31])
def test_trapezoid_exact_for_trig_polynomials(degree):
    c = make_contour(Circle(1.0), 64)
    f = np.cos(degree * c.t) ** 2
    exact = 2 * np.pi if degree == 0 else np.pi
    assert abs(np.sum(c.weights * f) - exact) < 1e-12


def test_shell_orientations():
    g1, g2 = make_shell(Circle(1.0), Circle(2.0), 64)
    assert np.allclose(np.sum(g1.normals * g1.nodes, 1), -1.0)
    assert np.allclose(np.sum(g2.normals * g2.nodes, 1), 2.0)


def test_shell_rejects_bad_nesting():
    with pytest.raises(ValueError):
        make_shell(Circle(2.0), Circle(1.0), 64)
    with pytest.raises(ValueError):
        make_shell(Circle(1.0, (3.0, 0.0)), Circle(2.0), 64)
    with pytest.raises(ValueError):
        make_contour(Circle(1.0), 15)


def test_shape_dict_roundtrip():
    for s in (Circle(2.0, (1.0, 0.0)), Ellipse(4, 3), FlatBottomEllipse(4, 3, -2, 0.25)):
        assert shape_from_dict(shape_to_dict(s)) == s
    with pytest.raises(ValueError):
        shape_from_dict({"kind": "square"})


def test_slab_boxes_lie_in_the_right_regions():
    g1, g2 = make_shell(Circle(1.0, (0, 0.5)), FlatBottomEllipse(4, 3, cut=-2, rho=0.3), 128)
    assert FlatSlabRegion(-2.0, 2.0, 1.2).validate(g1, g2) == (True, True)
    assert FlatSlabRegion(-2.0, 3.9, 1.2).validate(g1, g2)[0] is False


@settings(max_examples=50)
@given(st.floats(-10, 10), st.integers(0, 2**31 - 1))
def test_mirror_is_involution(y1, seed):
    region = FlatSlabRegion(y1, 1.0, 1.0)
    pts = np.random.default_rng(seed).uniform(-10, 10, (1000, 2))
    back = region.mirror(region.mirror(pts))
    assert np.array_equal(back[:, 0], pts[:, 0])
    assert np.max(np.abs(back - pts)) <= 8 * np.finfo(float).eps * 30
    on_facet = np.column_stack([pts[:, 0], np.full(1000, y1)])
    assert np.array_equal(region.mirror(on_facet), on_facet)


def test_contour_csv(tmp_path):
    c = make_contour(Ellipse(2, 1), 32)
    path = tmp_path / "c.csv"
    c.to_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "# alrbem contour v1"
    data = np.loadtxt(path, delimiter=",", skiprows=2)
    assert np.allclose(data[:, 1:3], c.nodes)
