"""Two-interface transmission problem with a negative shell, solved by boundary integrals.

Regions: the core ``D`` (inside the inner contour), the shell between the two
contours and the exterior.  The core and exterior fields are single layers at
the exterior wavenumber; the shell field is recovered from its Green
representation, so the only unknowns are one density per interface.

Exterior sources never enter a volume quadrature.  They are first turned into
interface data on the outer contour by solving an auxiliary exterior Dirichlet
problem, after which the total exterior field is the sum of that auxiliary
field and the scattered single layer.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.linalg as sla
from scipy.special import jn_zeros, roots_legendre

from .boundary_ops import (
    OperatorBlock, assemble_cross_ops, assemble_trace_ops, eval_layers,
)
from .geometry import Circle, Contour, FlatSlabRegion
from .kernels import green
from .medium import MediumParams, derive_wavenumbers

logger = logging.getLogger(__name__)

RESIDUAL_TOL = 1e-8
REGIONS = ("core", "shell", "exterior")


# ---------------------------------------------------------------------------
# Sources
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SourceSpec:
    """Point source ``amplitude * delta_z`` or dipole ``amplitude * p . grad delta_z``.

    The dipole field is ``amplitude * p . grad_z G(x - z)``.
    """

    kind: str = "point"
    location: tuple = (0.0, 0.0)
    moment: tuple | None = None
    amplitude: complex = 1.0

    def __post_init__(self):
        if self.kind not in ("point", "dipole"):
            raise ValueError(f"unknown source kind {self.kind!r}")
        if self.kind == "dipole":
            if self.moment is None or len(self.moment) != len(self.location):
                raise ValueError("a dipole needs a moment vector matching the location")
            if not np.any(np.asarray(self.moment, dtype=float)):
                raise ValueError("dipole moment must be nonzero")

    @property
    def dim(self) -> int:
        return len(self.location)

    @property
    def charge(self) -> complex:
        return complex(self.amplitude) if self.kind == "point" else 0j

    def field(self, k: complex, points, gradient: bool = False):
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        r = pts - np.asarray(self.location, dtype=float)
        amp = complex(self.amplitude)
        if self.kind == "point":
            ev = green(self.dim, k, r)
            val, grad = amp * ev.value, amp * ev.gradient
        else:
            p = np.asarray(self.moment, dtype=float)
            ev = green(self.dim, k, r, hessian=gradient)
            val = -amp * ev.gradient @ p
            grad = -amp * ev.hessian @ p if gradient else None
        return (val, grad) if gradient else val

    def shifted(self, dz) -> "SourceSpec":
        return replace(self, location=tuple(np.asarray(self.location, float) + dz))


def _as_sources(src) -> tuple[SourceSpec, ...]:
    if isinstance(src, SourceSpec):
        return (src,)
    out = tuple(src)
    if not out:
        raise ValueError("empty source list")
    return out


def check_exterior(sources, gamma2: Contour) -> None:
    locs = np.array([s.location for s in sources], dtype=float)
    if locs.shape[1] != 2:
        raise ValueError("interface reduction is planar; use the ball series in 3D")
    inside = gamma2.contains(locs)
    dist = gamma2.distance(locs)
    if np.any(inside) or np.any(dist <= 0):
        raise ValueError(f"source must lie strictly outside the outer interface (distance {dist.min():.3e})")


# ---------------------------------------------------------------------------
# Source reduction
# ---------------------------------------------------------------------------


@dataclass
class BoundaryData:
    """Interface jumps carried by the reduced source.

    ``f2, g2`` are the trace and normal derivative of the auxiliary exterior
    field on the outer contour; ``f1 = g1 = 0``.
    """

    f1: np.ndarray
    g1: np.ndarray
    f2: np.ndarray
    g2: np.ndarray
    sources: tuple
    k_e: complex
    gamma2: Contour
    chi: np.ndarray
    coupling: complex
    constant: complex = 0j
    condition_estimate: float = 1.0
    rhs_tilde: tuple | None = None

    def field(self, points, gradient: bool = False, upsample=1):
        """Auxiliary exterior field (free-space source plus Dirichlet correction)."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        val = np.zeros(len(pts), dtype=complex)
        grad = np.zeros((len(pts), 2), dtype=complex)
        for s in self.sources:
            out = s.field(self.k_e, pts, gradient)
            if gradient:
                val += out[0]
                grad += out[1]
            else:
                val += out
        if self.k_e == 0:
            layers = {"single": self.chi}
        else:
            layers = {"single": -1j * self.coupling * self.chi, "double": self.chi}
        out = eval_layers(self.gamma2, self.k_e, pts, want_gradient=gradient, upsample=upsample, **layers)
        if gradient:
            val += out[0]
            grad += out[1]
        else:
            val += out
        val += self.constant
        return (val, grad) if gradient else val

    def scaled(self, factor: complex) -> "BoundaryData":
        rhs = None if self.rhs_tilde is None else tuple(factor * r for r in self.rhs_tilde)
        return replace(self, f1=factor * self.f1, g1=factor * self.g1, f2=factor * self.f2,
                       g2=factor * self.g2, sources=tuple(replace(s, amplitude=factor * s.amplitude)
                                                          for s in self.sources),
                       chi=factor * self.chi, constant=factor * self.constant, rhs_tilde=rhs)


def reduce_source(src, gamma2: Contour, k_e: complex, n_inner: int | None = None) -> BoundaryData:
    """Turn exterior sources into interface data on ``gamma2``.

    The auxiliary field ``v`` solves the source problem outside ``gamma2`` with
    ``v = 0`` on it.  For ``k_e != 0`` the correction is the combined layer
    ``(D - i c S) chi``, which has no spurious resonances.  For the planar static
    kernel it is ``S chi + const`` with the total charge of ``v`` forced to
    vanish, which selects the bounded (grounded image) solution.
    """
    sources = _as_sources(src)
    check_exterior(sources, gamma2)
    k_e = complex(k_e)
    n = gamma2.n_nodes
    nodes, nu = gamma2.nodes, gamma2.normals
    inc = np.zeros(n, dtype=complex)
    dinc = np.zeros(n, dtype=complex)
    for s in sources:
        v, g = s.field(k_e, nodes, gradient=True)
        inc += v
        dinc += np.einsum("ij,ij->i", g, nu)
    if k_e == 0:
        total = sum(s.charge for s in sources)
        ops = assemble_trace_ops(gamma2, 0, which=("V", "Kstar"))
        V, Ks = ops["V"].matrix, ops["Kstar"].matrix
        mat = np.zeros((n + 1, n + 1), dtype=complex)
        mat[:n, :n] = V
        mat[:n, n] = 1.0
        mat[n, :n] = gamma2.weights
        rhs = np.concatenate([-inc, [-total]])
        lu = sla.lu_factor(mat)
        sol = sla.lu_solve(lu, rhs)
        chi, const = sol[:n], sol[n]
        cond = _cond_from_lu(lu, mat)
        f2 = inc + V @ chi + const
        g2 = dinc + Ks @ chi - 0.5 * chi
        coupling = 0j
    else:
        coupling = complex(max(abs(k_e), 1.0))
        ops = assemble_trace_ops(gamma2, k_e)
        V, K, Ks, N = (ops[x].matrix for x in ("V", "K", "Kstar", "N"))
        mat = 0.5 * np.eye(n) + K - 1j * coupling * V
        lu = sla.lu_factor(mat)
        chi = sla.lu_solve(lu, -inc)
        cond = _cond_from_lu(lu, mat)
        const = 0j
        f2 = inc + mat @ chi
        g2 = dinc + N @ chi - 1j * coupling * (Ks @ chi - 0.5 * chi)
    if cond > 1e10:
        logger.warning("auxiliary exterior solve is ill conditioned (cond ~ %.2e)", cond)
    m = n_inner if n_inner is not None else 0
    return BoundaryData(np.zeros(m, complex), np.zeros(m, complex), f2, g2, sources, k_e,
                        gamma2, chi, coupling, complex(const), cond)


def _cond_from_lu(lu, mat) -> float:
    anorm = np.linalg.norm(mat, 1)
    rcond, info = sla.lapack.zgecon(lu[0], anorm, norm="1")
    return float(np.inf if rcond == 0 else 1.0 / rcond)


# ---------------------------------------------------------------------------
# Block system
# ---------------------------------------------------------------------------


@dataclass
class Densities:
    phi: np.ndarray
    psi: np.ndarray

    def __post_init__(self):
        self.phi = np.asarray(self.phi, dtype=complex)
        self.psi = np.asarray(self.psi, dtype=complex)


@dataclass
class TransmissionSystem:
    block: OperatorBlock
    gamma1: Contour
    gamma2: Contour
    medium: MediumParams
    k_e: complex
    k_i: complex
    tau: complex
    ops: dict

    @property
    def matrix(self) -> np.ndarray:
        return self.block.matrix


def dirichlet_warnings(gamma1: Contour, gamma2: Contour, med: MediumParams, n_max: int = 60,
                       rel_tol: float = 1e-4) -> list[str]:
    """Compare real wavenumbers with circular Dirichlet eigenvalues (circles only)."""
    k_e, k_i, _ = derive_wavenumbers(med)
    out = []
    checks = [(k_i, gamma1, "k_i in the core"), (k_e, gamma2, "k_e in the outer domain")]
    for k, c, label in checks:
        if not isinstance(c.shape, Circle) or abs(k.imag) > 1e-12 or k.real <= 0:
            continue
        r = c.shape.radius
        for order in range(n_max):
            zeros = jn_zeros(order, max(1, int(k.real * r / np.pi) + 2))
            if np.any(np.abs(zeros / r - k.real) < rel_tol * k.real):
                out.append(f"{label}: k={k.real:.6g} is near a Dirichlet eigenvalue (order {order})")
    for msg in out:
        logger.warning(msg)
    return out


def _ops(c: Contour, k: complex, which, cache):
    key = (id(c), complex(k), which)
    if cache is not None and key in cache:
        return cache[key]
    ops = {name: b.matrix for name, b in assemble_trace_ops(c, k, which=which).items()}
    if cache is not None:
        cache[key] = ops
    return ops


def assemble_system(gamma1: Contour, gamma2: Contour, med: MediumParams,
                    cache: dict | None = None) -> TransmissionSystem:
    """Assemble the 2x2 block operator acting on ``(phi, psi)``.

    Parameters
    ----------
    gamma1, gamma2 : Contour
        Inner interface (normals into the core) and outer interface (outward normals).
    med : MediumParams
        Planar medium; ``k_e = 0`` is not supported by this formulation.
    cache : dict, optional
        Reused across calls to skip reassembling exterior-wavenumber blocks.
    """
    if med.dim != 2:
        raise ValueError("the boundary element solver is planar; use the ball series in 3D")
    if gamma1.orientation != -1 or gamma2.orientation != 1:
        raise ValueError("inner contour needs normals into the core and outer contour outward normals")
    k_e, k_i, tau = derive_wavenumbers(med)
    if k_e == 0:
        raise ValueError("k_e = 0 is not supported by the planar boundary element solver")
    dirichlet_warnings(gamma1, gamma2, med)
    ext = ("V", "Kstar")
    inn = ("V", "K")
    e1, e2 = _ops(gamma1, k_e, ext, cache), _ops(gamma2, k_e, ext, cache)
    i1, i2 = _ops(gamma1, k_i, inn, cache), _ops(gamma2, k_i, inn, cache)
    c12 = {k: b.matrix for k, b in assemble_cross_ops(gamma1, gamma2, k_i).items()}
    c21 = {k: b.matrix for k, b in assemble_cross_ops(gamma2, gamma1, k_i).items()}

    def diag_block(e, i):
        return 0.5 * (e["V"] + tau * i["V"]) + i["K"] @ e["V"] - tau * i["V"] @ e["Kstar"]

    def off_block(c, e_other):
        return 0.5 * tau * c["A"] - tau * c["A"] @ e_other["Kstar"] + c["R"] @ e_other["V"]

    n1, n2 = gamma1.n_nodes, gamma2.n_nodes
    mat = np.empty((n1 + n2, n1 + n2), dtype=complex)
    mat[:n1, :n1] = diag_block(e1, i1)
    mat[n1:, n1:] = diag_block(e2, i2)
    mat[:n1, n1:] = off_block(c12, e2)
    mat[n1:, :n1] = off_block(c21, e1)
    ops = {"e1": e1, "e2": e2, "i1": i1, "i2": i2, "c12": c12, "c21": c21}
    block = OperatorBlock(mat, f"{gamma1.name}+{gamma2.name}", f"{gamma1.name}+{gamma2.name}",
                          "transmission", k_i)
    return TransmissionSystem(block, gamma1, gamma2, med, k_e, k_i, tau, ops)


def build_rhs(system: TransmissionSystem, bd: BoundaryData) -> BoundaryData:
    """Fill ``bd.rhs_tilde`` for ``system`` (the flux jumps enter multiplied by ``tau``)."""
    o, tau = system.ops, system.tau
    n1 = system.gamma1.n_nodes
    f1 = bd.f1 if len(bd.f1) == n1 else np.zeros(n1, complex)
    g1 = bd.g1 if len(bd.g1) == n1 else np.zeros(n1, complex)
    f2, g2 = bd.f2, bd.g2
    r1 = -0.5 * f1 + o["i1"]["V"] @ (tau * g1) - o["i1"]["K"] @ f1 \
        + o["c12"]["A"] @ (tau * g2) - o["c12"]["R"] @ f2
    r2 = -0.5 * f2 + o["i2"]["V"] @ (tau * g2) - o["i2"]["K"] @ f2 \
        + o["c21"]["A"] @ (tau * g1) - o["c21"]["R"] @ f1
    return replace(bd, f1=f1, g1=g1, rhs_tilde=(r1, r2))


@dataclass
class TransmissionSolution:
    densities: Densities
    condition_estimate: float
    residual: float
    medium: MediumParams
    system: TransmissionSystem
    data: BoundaryData
    ok: bool = True
    _aux: dict = field(default_factory=dict, repr=False)

    @property
    def gamma1(self) -> Contour:
        return self.system.gamma1

    @property
    def gamma2(self) -> Contour:
        return self.system.gamma2

    def fields(self, points, regions=None, gradient=False, upsample=1, total=True):
        return reconstruct_fields(self, points, regions, gradient, upsample, total)


def solve_densities(system: TransmissionSystem, bd: BoundaryData) -> TransmissionSolution:
    """Dense LU solve with a 1-norm condition estimate and a relative residual check."""
    if bd.rhs_tilde is None:
        bd = build_rhs(system, bd)
    rhs = np.concatenate(bd.rhs_tilde)
    mat = system.matrix
    if rhs.shape[0] != mat.shape[0]:
        raise ValueError("right-hand side does not match the assembled system")
    lu = sla.lu_factor(mat)
    x = sla.lu_solve(lu, rhs)
    cond = _cond_from_lu(lu, mat)
    nrm = np.linalg.norm(rhs)
    res = float(np.linalg.norm(mat @ x - rhs) / nrm) if nrm > 0 else 0.0
    ok = res <= RESIDUAL_TOL
    if not ok:
        logger.warning("transmission solve residual %.2e exceeds %.0e (cond ~ %.2e)",
                       res, RESIDUAL_TOL, cond)
    n1 = system.gamma1.n_nodes
    sol = TransmissionSolution(Densities(x[:n1], x[n1:]), cond, res, system.medium, system, bd, ok)
    return sol


def solve(gamma1: Contour, gamma2: Contour, med: MediumParams, src, cache=None) -> TransmissionSolution:
    """Convenience wrapper: reduce, assemble, solve."""
    system = assemble_system(gamma1, gamma2, med, cache)
    bd = reduce_source(src, gamma2, system.k_e, gamma1.n_nodes)
    return solve_densities(system, build_rhs(system, bd))


# ---------------------------------------------------------------------------
# Field reconstruction
# ---------------------------------------------------------------------------


def classify_points(gamma1: Contour, gamma2: Contour, points) -> np.ndarray:
    pts = np.atleast_2d(points)
    in2 = gamma2.contains(pts)
    in1 = gamma1.contains(pts)
    return np.where(in1, "core", np.where(in2, "shell", "exterior"))


def _shell_densities(sol: TransmissionSolution):
    if "shell" not in sol._aux:
        o, tau = sol.system.ops, sol.system.tau
        d, bd = sol.densities, sol.data
        n1 = tau * (o["e1"]["Kstar"] @ d.phi - 0.5 * d.phi) + tau * bd.g1
        t1 = o["e1"]["V"] @ d.phi + bd.f1
        n2 = tau * (o["e2"]["Kstar"] @ d.psi - 0.5 * d.psi) + tau * bd.g2
        t2 = o["e2"]["V"] @ d.psi + bd.f2
        sol._aux["shell"] = (n1, t1, n2, t2)
    return sol._aux["shell"]


def reconstruct_fields(sol: TransmissionSolution, points, regions=None, gradient=False,
                       upsample=1, total=True):
    """Evaluate the field at ``points`` tagged with their regions.

    ``regions`` is a sequence of ``"core" | "shell" | "exterior"`` (inferred when
    omitted); a tag contradicting the geometry raises ``ValueError``.  In the
    exterior the total field is returned unless ``total=False``.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    actual = classify_points(sol.gamma1, sol.gamma2, pts)
    if regions is None:
        regions = actual
    else:
        regions = np.broadcast_to(np.asarray(regions), (len(pts),))
        bad = regions != actual
        if np.any(bad):
            raise ValueError(f"{bad.sum()} point(s) tagged with the wrong region, e.g. {pts[bad][0]} "
                             f"is in the {actual[bad][0]}")
    val = np.zeros(len(pts), dtype=complex)
    grad = np.zeros((len(pts), 2), dtype=complex)
    k_e, k_i = sol.system.k_e, sol.system.k_i
    g1, g2 = sol.gamma1, sol.gamma2

    def add(sel, terms):
        for c, k, layers in terms:
            out = eval_layers(c, k, pts[sel], want_gradient=gradient, upsample=upsample, **layers)
            if gradient:
                val[sel] += out[0]
                grad[sel] += out[1]
            else:
                val[sel] += out

    sel = regions == "core"
    if sel.any():
        add(sel, [(g1, k_e, {"single": sol.densities.phi})])
    sel = regions == "exterior"
    if sel.any():
        add(sel, [(g2, k_e, {"single": sol.densities.psi})])
        if total:
            out = sol.data.field(pts[sel], gradient, upsample)
            if gradient:
                val[sel] += out[0]
                grad[sel] += out[1]
            else:
                val[sel] += out
    sel = regions == "shell"
    if sel.any():
        n1, t1, n2, t2 = _shell_densities(sol)
        add(sel, [(g1, k_i, {"single": n1, "double": -t1}),
                  (g2, k_i, {"single": n2, "double": -t2})])
    return (val, grad) if gradient else val


# ---------------------------------------------------------------------------
# H1 norms
# ---------------------------------------------------------------------------


@dataclass
class NormReport:
    value: float
    l2: float
    grad_l2: float
    standoff: float
    n_points: int
    method: str

    def __float__(self):
        return self.value


@dataclass
class QuadSpec:
    """Quadrature controls for ``h1_norm``.

    ``standoff=None`` means three node spacings of the finer contour.
    """

    standoff: float | None = None
    n_radial: int = 16
    n_angular: int | None = None
    grid: int = 200
    upsample: object = "auto"
    slab: FlatSlabRegion | None = None
    exclusion: tuple | None = None  # (center, radius)
    box_spacing: float = 0.04
    method: str = "auto"  # auto | chart | grid (shell only)


def default_standoff(sol: TransmissionSolution) -> float:
    return 3.0 * max(sol.gamma1.node_spacing, sol.gamma2.node_spacing)


def shell_chart(gamma1: Contour, gamma2: Contour, standoff: float, n_radial: int, n_angular: int):
    """Nodes and weights of a blended chart between the offset inner and outer curves.

    Returns ``None`` when the chart folds over (nonpositive Jacobian).
    """
    t = 2 * np.pi * np.arange(n_angular) / n_angular
    xa, da, dda = gamma1.shape.evaluate(t)
    xb, db, ddb = gamma2.shape.evaluate(t)

    def offset(x, dx, ddx, delta):
        sp = np.hypot(dx[:, 0], dx[:, 1])
        out = np.column_stack([dx[:, 1], -dx[:, 0]]) / sp[:, None]
        kap = (dx[:, 0] * ddx[:, 1] - dx[:, 1] * ddx[:, 0]) / sp**3
        return x + delta * out, dx * (1 + delta * kap)[:, None]

    a, a1 = offset(xa, da, dda, standoff)
    b, b1 = offset(xb, db, ddb, -standoff)
    s, ws = roots_legendre(n_radial)
    s, ws = 0.5 * (s + 1), 0.5 * ws
    S = s[:, None, None]
    pts = (1 - S) * a[None] + S * b[None]
    ds = (b - a)[None]
    dt = (1 - S) * a1[None] + S * b1[None]
    jac = ds[..., 0] * dt[..., 1] - ds[..., 1] * dt[..., 0]
    if np.any(jac <= 0):
        return None
    w = ws[:, None] * jac * (2 * np.pi / n_angular)
    return pts.reshape(-1, 2), w.ravel()


def _grid(bounds, n):
    (x0, x1), (y0, y1) = bounds
    xs = x0 + (np.arange(n) + 0.5) * (x1 - x0) / n
    ys = y0 + (np.arange(n) + 0.5) * (y1 - y0) / n
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    area = (x1 - x0) * (y1 - y0) / n**2
    return np.column_stack([X.ravel(), Y.ravel()]), area


def _box_grid(bounds, spacing):
    (x0, x1), (y0, y1) = bounds
    nx = max(1, int(round((x1 - x0) / spacing)))
    ny = max(1, int(round((y1 - y0) / spacing)))
    hx, hy = (x1 - x0) / nx, (y1 - y0) / ny
    X, Y = np.meshgrid(x0 + hx * (np.arange(nx) + 0.5), y0 + hy * (np.arange(ny) + 0.5), indexing="ij")
    return np.column_stack([X.ravel(), Y.ravel()]), hx * hy


def _norm_from(sol, pts, w, region, upsample, standoff, method):
    if len(pts) == 0:
        return NormReport(0.0, 0.0, 0.0, standoff, 0, method)
    u, g = reconstruct_fields(sol, pts, region, gradient=True, upsample=upsample)
    l2 = float(np.sum(w * np.abs(u) ** 2))
    gl2 = float(np.sum(w * np.sum(np.abs(g) ** 2, axis=1)))
    return NormReport(float(np.sqrt(l2 + gl2)), float(np.sqrt(l2)), float(np.sqrt(gl2)),
                      standoff, len(pts), method)


def shell_quadrature(gamma1: Contour, gamma2: Contour, standoff: float, quad: QuadSpec | None = None):
    """Nodes and weights covering the shell shrunk by ``standoff``.

    Returns ``(points, weights, method)`` where ``method`` is ``"chart"`` (blended
    curvilinear chart, Gauss in the radial direction) or ``"grid"`` (midpoint
    rule on a masked ``grid x grid`` box).  ``quad.method="auto"`` prefers the
    chart and falls back to the grid when the chart folds.
    """
    quad = quad or QuadSpec()
    if quad.method not in ("auto", "chart", "grid"):
        raise ValueError(f"unknown quadrature method {quad.method!r}")
    if quad.method != "grid":
        n_ang = quad.n_angular or max(gamma1.n_nodes, gamma2.n_nodes)
        chart = shell_chart(gamma1, gamma2, standoff, quad.n_radial, n_ang)
        if chart is not None:
            return chart[0], chart[1], "chart"
        if quad.method == "chart":
            raise ValueError("the blended chart folds for this shell; use the grid method")
    poly = gamma2.polygon()
    bounds = ((poly[:, 0].min(), poly[:, 0].max()), (poly[:, 1].min(), poly[:, 1].max()))
    pts, area = _grid(bounds, quad.grid)
    keep = (classify_points(gamma1, gamma2, pts) == "shell") & (gamma1.distance(pts) >= standoff) \
        & (gamma2.distance(pts) >= standoff)
    pts = pts[keep]
    return pts, np.full(len(pts), area), "grid"


def h1_norm(sol: TransmissionSolution, region: str = "shell", quad: QuadSpec | None = None) -> NormReport:
    """H1 norm over the shell (shrunk by a standoff) or over the slab boxes.

    ``region`` is ``"shell"``, ``"slab-plus"`` (shell part of the box above
    the facet), ``"slab-minus"`` (exterior part of the box below it, minus the
    exclusion disc) or ``"slab"`` (the sum of the two).  The shell norm uses a
    blended curvilinear chart when it does not fold, else a midpoint rule on a
    masked grid; the slab boxes always use masked midpoint grids.  Points
    closer than the standoff to either interface are dropped.
    """
    quad = quad or QuadSpec()
    delta = default_standoff(sol) if quad.standoff is None else quad.standoff
    g1, g2 = sol.gamma1, sol.gamma2
    if region == "shell":
        pts, w, method = shell_quadrature(g1, g2, delta, quad)
        return _norm_from(sol, pts, w, "shell", quad.upsample, delta, method)
    if region == "slab":
        a = h1_norm(sol, "slab-plus", quad)
        b = h1_norm(sol, "slab-minus", quad)
        return NormReport(a.value + b.value, np.hypot(a.l2, b.l2), np.hypot(a.grad_l2, b.grad_l2),
                          delta, a.n_points + b.n_points, "slab")
    if quad.slab is None:
        raise ValueError("slab regions need QuadSpec.slab")
    if region in ("slab-plus", "slab-minus"):
        side, tag = ("plus", "shell") if region == "slab-plus" else ("minus", "exterior")
        pts, area = _box_grid(quad.slab.box(side), quad.box_spacing)
        keep = (classify_points(g1, g2, pts) == tag) & (g1.distance(pts) >= delta) \
            & (g2.distance(pts) >= delta)
        if quad.exclusion is not None:
            ctr, r1 = quad.exclusion
            keep &= np.hypot(*(pts - np.asarray(ctr, dtype=float)).T) >= r1
        pts = pts[keep]
        return _norm_from(sol, pts, np.full(len(pts), area), tag, quad.upsample, delta, "box")
    raise ValueError(f"unknown region {region!r}")


# ---------------------------------------------------------------------------
# Power balance
# ---------------------------------------------------------------------------


def _circle_flux(sol, center, radius, n):
    t = 2 * np.pi * np.arange(n) / n
    d = np.column_stack([np.cos(t), np.sin(t)])
    pts = np.asarray(center) + radius * d
    u, g = reconstruct_fields(sol, pts, "exterior", gradient=True, upsample="auto")
    dn = np.einsum("ij,ij->i", g, d)
    return complex(np.sum(dn * np.conj(u)) * radius * 2 * np.pi / n)


def energy_terms(sol: TransmissionSolution, R: float, n_circle: int = 512,
                 quad: QuadSpec | None = None) -> dict:
    """Terms of the imaginary-part energy balance.

    With ``F(C) = int_C d_n v conj(v)`` and real ``k_e``::

        Im F(|x| = R) - sum_z Im F(|x - z| = rho)
            = Im(1/tau) int |grad v2|^2 - Im(k_i^2/tau) int |v2|^2
    """
    if abs(complex(sol.system.k_e).imag) > 0:
        raise ValueError("the balance needs a real exterior wavenumber")
    g2 = sol.gamma2
    poly = g2.polygon()
    if R <= np.max(np.hypot(poly[:, 0], poly[:, 1])):
        raise ValueError("R must enclose the outer interface")
    locs = np.array([s.location for s in sol.data.sources], dtype=float)
    if np.any(np.hypot(locs[:, 0], locs[:, 1]) >= R):
        raise ValueError("R must enclose the sources")
    far = _circle_flux(sol, (0.0, 0.0), R, n_circle)
    near = 0j
    for z in locs:
        rho = 0.5 * float(g2.distance(z[None])[0])
        if len(locs) > 1:
            others = np.delete(locs, np.all(locs == z, axis=1), axis=0)
            rho = min(rho, 0.5 * np.hypot(*(others - z).T).min())
        near += _circle_flux(sol, z, rho, n_circle)
    quad = quad or QuadSpec(standoff=0.0, n_radial=16)
    tau, k_i = sol.system.tau, sol.system.k_i
    chart = shell_chart(sol.gamma1, g2, quad.standoff or 0.0, quad.n_radial,
                        quad.n_angular or 2 * max(sol.gamma1.n_nodes, g2.n_nodes))
    if chart is None:
        raise ValueError("shell chart folds; the balance needs a full-shell quadrature")
    pts, w = chart
    u, g = reconstruct_fields(sol, pts, "shell", gradient=True, upsample="auto")
    grad2 = float(np.sum(w * np.sum(np.abs(g) ** 2, axis=1)))
    val2 = float(np.sum(w * np.abs(u) ** 2))
    shell = (1 / tau).imag * grad2 - (k_i**2 / tau).imag * val2
    return {"far": far.imag, "near": near.imag, "shell": float(shell)}


def energy_balance(terms: dict) -> float:
    scale = max(abs(terms["far"]), abs(terms["near"]), abs(terms["shell"]))
    if scale == 0:
        return 0.0
    return abs(terms["far"] - terms["near"] - terms["shell"]) / scale


def energy_residual(sol: TransmissionSolution, R: float, **kw) -> float:
    """Normalized imbalance of the power identity (see ``energy_terms``)."""
    return energy_balance(energy_terms(sol, R, **kw))


__all__ = [
    "SourceSpec", "BoundaryData", "Densities", "TransmissionSystem", "TransmissionSolution",
    "NormReport", "QuadSpec", "reduce_source", "assemble_system", "build_rhs", "solve_densities",
    "solve", "reconstruct_fields", "classify_points", "h1_norm", "energy_terms", "energy_balance",
    "energy_residual", "dirichlet_warnings", "shell_chart", "shell_quadrature", "default_standoff",
]
