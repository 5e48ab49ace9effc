import numpy as np
import pytest

from alrbem.boundary_ops import fourier_mode
from alrbem.geometry import Circle, Ellipse, make_contour, make_shell
from alrbem.medium import MediumParams
from alrbem.oracle import AnnulusConfig, annulus_solve
from alrbem.transmission import (
    QuadSpec, SourceSpec, assemble_system, build_rhs, check_exterior, default_standoff,
    dirichlet_warnings, energy_balance, energy_residual, energy_terms, h1_norm, reduce_source,
    shell_quadrature, solve, solve_densities,
)

CONTRAST = MediumParams(omega=1.0, eta=0.5, b=1.0)  # tau = -2
SOURCE = SourceSpec("point", (6.0, 0.0))


@pytest.fixture(scope="module")
def concentric():
    g1, g2 = make_shell(Circle(2.0), Circle(4.0), 128)
    sol = solve(g1, g2, CONTRAST, SOURCE)
    ref = annulus_solve(AnnulusConfig(2.0, 4.0, 6.0), CONTRAST, SOURCE)
    return sol, ref


@pytest.fixture(scope="module")
def elliptic():
    g1, g2 = make_shell(Ellipse(1.5, 1.0), Ellipse(4, 3), 256)
    return solve(g1, g2, CONTRAST, SourceSpec("point", (5.0, 1.0)))


def ring(radius, n=50, seed=0):
    rng = np.random.default_rng(seed)
    r = radius[0] + (radius[1] - radius[0]) * rng.random(n)
    t = 2 * np.pi * rng.random(n)
    return np.column_stack([r * np.cos(t), r * np.sin(t)])


# source reduction ---------------------------------------------------------

def test_static_reduction_matches_grounded_image():
    g2 = make_contour(Circle(4.0), 256)
    z = np.array([5.0, 0.0])
    bd = reduce_source(SourceSpec("point", tuple(z)), g2, 0)
    assert np.abs(bd.f2).max() < 1e-10
    x, nu = g2.nodes, g2.normals
    zi = z * 16 / 25
    dn = lambda c: np.sum((x - c) * nu, 1) / np.sum((x - c) ** 2, 1)
    exact = -(dn(z) - dn(zi)) / (2 * np.pi)
    assert np.abs(bd.g2 - exact).max() < 1e-8
    far = bd.field([[1e7, 0.0]])[0]
    assert far == pytest.approx(np.log(5 / 4) / (2 * np.pi), abs=1e-7)


def test_helmholtz_reduction_enforces_dirichlet_condition():
    g2 = make_contour(Circle(4.0), 256)
    bd = reduce_source(SourceSpec("point", (5.0, 0.0)), g2, 1.0)
    assert np.abs(bd.f2).max() < 1e-10
    eps = np.array([0.02, 0.01, 0.005])
    rows = [bd.field(g2.nodes[::5] + e * g2.normals[::5], upsample="auto") for e in eps]
    limit = np.linalg.solve(np.vander(eps, 3), np.array(rows))[-1]
    assert np.abs(limit).max() < 1e-6 * np.abs(bd.g2).max()


def test_dipole_reduction_is_source_derivative():
    g2 = make_contour(Ellipse(4, 3), 256)
    z, p, h = np.array([5.0, 1.0]), np.array([0.6, 0.8]), 1e-4
    dip = reduce_source(SourceSpec("dipole", tuple(z), tuple(p)), g2, 1.0)
    plus = reduce_source(SourceSpec("point", tuple(z + h * p)), g2, 1.0)
    minus = reduce_source(SourceSpec("point", tuple(z - h * p)), g2, 1.0)
    fd = (plus.g2 - minus.g2) / (2 * h)
    assert np.abs(dip.g2 - fd).max() < 1e-5 * np.abs(fd).max()


def test_boundary_data_spectral_decay():
    g2 = make_contour(Circle(4.0), 256)
    bd = reduce_source(SOURCE, g2, 1.0)
    spec = np.abs(np.fft.fft(bd.g2))
    m = np.minimum(np.arange(256), 256 - np.arange(256))
    assert spec[m > 64].max() < 1e-8 * spec.max()


def test_sources_must_be_exterior():
    g2 = make_contour(Circle(4.0), 64)
    with pytest.raises(ValueError):
        check_exterior([SourceSpec("point", (1.0, 1.0))], g2)
    with pytest.raises(ValueError):
        reduce_source(SourceSpec("point", (0.0, 0.0, 5.0)), g2, 1.0)


# block system -------------------------------------------------------------

def test_order_minus_one_part_cancels_for_matched_wavenumbers():
    g1, g2 = make_shell(Ellipse(1.5, 1.0), Ellipse(4, 3), 64)
    sy = assemble_system(g1, g2, MediumParams(omega=1.0, eta=0.0, b=-1.0))
    assert sy.k_e == sy.k_i and sy.tau == -1
    o = sy.ops
    assert np.array_equal(o["e1"]["V"], o["i1"]["V"])
    remainder = o["i1"]["K"] @ o["e1"]["V"] - sy.tau * o["i1"]["V"] @ o["e1"]["Kstar"]
    assert np.array_equal(sy.matrix[:64, :64], remainder)


def test_smallest_singular_value_bounded_in_matched_norm():
    def order_one(n):
        m = np.abs(np.fft.fftfreq(n, 1 / n))
        return np.fft.ifft((1 + m)[:, None] * np.fft.fft(np.eye(n), axis=0), axis=0)

    smallest = []
    for n in (64, 128, 256):
        g1, g2 = make_shell(Ellipse(1.5, 1.0), Ellipse(4, 3), n)
        sy = assemble_system(g1, g2, MediumParams(omega=1.0, eta=-1.0, b=1.0))
        assert sy.tau == -0.5
        lam = np.zeros((2 * n, 2 * n), complex)
        lam[:n, :n] = lam[n:, n:] = order_one(n)
        smallest.append(np.linalg.svd(lam @ sy.matrix, compute_uv=False).min())
    assert min(smallest) > 0.1
    assert smallest[-1] > 0.9 * smallest[0]


def test_rejects_unsupported_configurations():
    g1, g2 = make_shell(Circle(1.0), Circle(2.0), 32)
    with pytest.raises(ValueError):
        assemble_system(g1, g2, MediumParams(omega=0.0, eta=0.5))
    with pytest.raises(ValueError):
        assemble_system(g2, g1, CONTRAST)
    with pytest.raises(ValueError):
        assemble_system(g1, g2, MediumParams(dim=3))


def test_dirichlet_eigenvalue_warning():
    g1, g2 = make_shell(Circle(1.0), Circle(2.404825557695773), 32)
    assert any("k_e" in m for m in dirichlet_warnings(g1, g2, MediumParams(omega=1.0, eta=0.5, b=1.0)))
    assert dirichlet_warnings(*make_shell(Circle(2.0), Circle(4.0), 32), CONTRAST) == []


# solution ------------------------------------------------------------------

def test_matches_series_in_every_region(concentric):
    sol, ref = concentric
    for reg, radii in (("core", (0.2, 1.35)), ("shell", (2.65, 3.35)), ("exterior", (4.7, 9.0))):
        pts = ring(radii)
        pts = pts[np.hypot(*(pts - SOURCE.location).T) > 0.3]
        ub, uo = sol.fields(pts, reg), ref.field(pts)
        assert np.abs(ub - uo).max() < 1e-6 * np.abs(uo).max(), reg


def test_modes_decouple_on_concentric_circles(concentric):
    sol, ref = concentric
    t = 2 * np.pi * np.arange(128) / 128
    pts = 3.0 * np.column_stack([np.cos(t), np.sin(t)])
    ub, uo = sol.fields(pts, "shell"), ref.field(pts)
    for n in range(8):
        assert abs(fourier_mode(ub, n) - fourier_mode(uo, n)) < 1e-6 * np.abs(uo).max()


def test_zero_source_gives_zero_solution():
    g1, g2 = make_shell(Circle(2.0), Circle(4.0), 128)
    sol = solve(g1, g2, CONTRAST, SourceSpec("point", (6.0, 0.0), amplitude=0.0))
    assert not np.any(sol.densities.phi) and not np.any(sol.densities.psi)
    assert not np.any(sol.fields(ring((2.7, 3.3)), "shell"))
    terms = energy_terms(solve(g1, g2, MediumParams(b=-1, eta=0.01j),
                               SourceSpec("point", (6.0, 0.0), amplitude=0.0)), 8.0)
    assert energy_balance(terms) == 0.0


def test_linear_in_source_amplitude():
    g1, g2 = make_shell(Ellipse(1.5, 1.0), Ellipse(4, 3), 64)
    cache = {}
    a = solve(g1, g2, CONTRAST, SourceSpec("point", (5.0, 1.0)), cache)
    b = solve(g1, g2, CONTRAST, SourceSpec("point", (5.0, 1.0), amplitude=2.0), cache)
    assert np.allclose(b.densities.phi, 2 * a.densities.phi, rtol=1e-13, atol=0)
    assert np.allclose(b.densities.psi, 2 * a.densities.psi, rtol=1e-13, atol=0)
    c = solve_densities(a.system, a.data.scaled(2.0))
    assert np.allclose(c.densities.psi, b.densities.psi, rtol=1e-13, atol=0)


def test_reciprocity():
    g1, g2 = make_shell(Ellipse(1.5, 1.0), Ellipse(4, 3), 128)
    za, zb = np.array([5.0, 1.0]), np.array([-1.0, 4.5])
    sa = solve(g1, g2, CONTRAST, SourceSpec("point", tuple(za)))
    sb = solve(g1, g2, CONTRAST, SourceSpec("point", tuple(zb)))
    ua = sa.fields(zb[None], "exterior", total=False)[0]
    ub = sb.fields(za[None], "exterior", total=False)[0]
    assert abs(ua - ub) < 1e-6 * abs(ua)


def _interface_residuals(sol, contour, inside, outside, tau_in, tau_out):
    eps = np.array([0.02, 0.01, 0.005])
    idx = np.arange(0, contour.n_nodes, 8)
    x, nu = contour.nodes[idx], contour.normals[idx]
    trace, flux = [], []
    for e in eps:
        ua, ga = sol.fields(x + e * nu, outside, gradient=True, upsample="auto")
        ub, gb = sol.fields(x - e * nu, inside, gradient=True, upsample="auto")
        trace.append(ua - ub)
        flux.append(tau_out * np.sum(ga * nu, 1) - tau_in * np.sum(gb * nu, 1))
    lim = lambda rows: np.linalg.solve(np.vander(eps, 3), np.array(rows))[-1]
    return (np.abs(lim(trace)).max() / np.abs(ua).max(),
            np.abs(lim(flux)).max() / np.abs(np.sum(ga * nu, 1)).max())


def test_trace_and_flux_continuity(elliptic):
    tau = CONTRAST.tau
    # gamma1 normals point into the core: "outside" of the shell side is the core
    t1, f1 = _interface_residuals(elliptic, elliptic.gamma1, "shell", "core", 1.0, tau)
    t2, f2 = _interface_residuals(elliptic, elliptic.gamma2, "shell", "exterior", 1.0, tau)
    assert t1 < 1e-4 and t2 < 1e-4
    assert f1 < 1e-3 and f2 < 1e-3


def test_fields_solve_the_pde(elliptic):
    h = 2e-3
    for reg, p0, k2 in (("core", (0.3, 0.2), 1.0), ("shell", (0.0, 2.2), CONTRAST.k_i_squared),
                        ("exterior", (0.0, 4.5), 1.0)):
        p0 = np.array(p0)
        pts = np.array([p0, p0 + (h, 0), p0 - (h, 0), p0 + (0, h), p0 - (0, h)])
        u = elliptic.fields(pts, reg)
        assert abs((u[1:].sum() - 4 * u[0]) / h**2 + k2 * u[0]) < 1e-6


def test_region_tags_and_standoff_enforced(concentric):
    sol, _ = concentric
    with pytest.raises(ValueError, match="wrong region"):
        sol.fields([[3.0, 0.0]], "core")
    with pytest.raises(ValueError, match="node spacings"):
        sol.fields([[2.01, 0.0]], "shell")


# norms ---------------------------------------------------------------------

def test_shell_quadrature_integrates_analytic_fields():
    g1, g2 = make_shell(Circle(1.0), Circle(2.0), 128)
    pts, w, method = shell_quadrature(g1, g2, 0.0)
    assert method == "chart"
    assert np.sqrt(w.sum()) == pytest.approx(np.sqrt(3 * np.pi), rel=1e-12)
    r = np.hypot(*pts.T)
    # |ln r|^2 + |grad ln r|^2; int_1^2 (ln r)^2 r dr = 2 ln(2)^2 - 2 ln 2 + 3/4
    exact = np.sqrt(2 * np.pi * np.log(2) + 2 * np.pi * (2 * np.log(2) ** 2 - 2 * np.log(2) + 0.75))
    assert np.sqrt(np.sum(w * (np.log(r) ** 2 + 1 / r**2))) == pytest.approx(exact, rel=1e-6)


def test_grid_and_chart_norms_agree(concentric):
    sol, ref = concentric
    chart = h1_norm(sol, quad=QuadSpec(method="chart"))
    grid = h1_norm(sol, quad=QuadSpec(method="grid", grid=400))
    assert chart.method == "chart" and grid.method == "grid"
    assert grid.value == pytest.approx(chart.value, rel=1e-2)
    d = default_standoff(sol)
    assert chart.value == pytest.approx(ref.h1_norm(2 + d, 4 - d), rel=1e-6)


def test_slab_norm_requires_region(concentric):
    with pytest.raises(ValueError):
        h1_norm(concentric[0], "slab-plus")


# power balance -------------------------------------------------------------

@pytest.fixture(scope="module")
def lossy():
    g1, g2 = make_shell(Circle(2.0), Circle(4.0), 128)
    sol = solve(g1, g2, MediumParams(omega=1.0, eta=0.01j, b=-1.0), SOURCE)
    return sol, energy_terms(sol, 8.0)


def test_energy_identity_holds(lossy):
    assert energy_balance(lossy[1]) < 1e-6


def test_energy_identity_detects_perturbed_shell_field(lossy):
    terms = dict(lossy[1])
    terms["shell"] *= 1.01**2
    assert energy_balance(terms) > 1e-3


def test_energy_identity_checks_its_inputs(lossy):
    with pytest.raises(ValueError):
        energy_residual(lossy[0], 3.0)
