"""Separation-of-variables solutions for concentric circles and balls.

These are independent of the boundary element code and serve as reference
solutions and as the fast engine for loss sweeps.  Each angular mode couples
four radial coefficients (core, two in the shell, scattered) through continuity
of the field and the flux conditions at the two radii.

Radial bases are scaled to be of unit size at a reference radius so that very
high or very low orders neither overflow nor lose the ratios that matter.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.special import (
    eval_legendre, h1vp, hankel1, jv, jvp, roots_legendre,
    spherical_jn, spherical_yn,
)

from .medium import MediumParams, derive_wavenumbers
from .transmission import SourceSpec

logger = logging.getLogger(__name__)

M_MAX = 400
TAIL_TOL = 1e-10


# ---------------------------------------------------------------------------
# Critical radii
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CriticalRadii:
    r_star: float
    r_sharp: float
    r_crit: float
    resonant_annuli: tuple = ()


def critical_radii(r_c: float, r_s: float, r_0: float | None = None) -> CriticalRadii:
    """Source-distance thresholds for the matched-core annulus with ``eps = -1``.

    With ``r_0`` given, also the annuli where the resonant field concentrates;
    overlapping annuli are merged into one interval.
    """
    if not 0 < r_c < r_s:
        raise ValueError("need 0 < r_c < r_s")
    r_star = r_s**2 / r_c
    r_sharp = float(np.sqrt(r_s**3 / r_c))
    r_crit = r_s**3 / r_c**2
    annuli: tuple = ()
    if r_0 is not None:
        inner = (r_0 * (r_c / r_s) ** 2, r_s**2 / r_0)
        outer = (r_0 * r_c / r_s, r_s**3 / (r_c * r_0))
        if outer[0] <= inner[1]:
            annuli = ((inner[0], max(inner[1], outer[1])),)
        else:
            annuli = (inner, outer)
    return CriticalRadii(r_star, r_sharp, r_crit, annuli)


# ---------------------------------------------------------------------------
# Planar annulus
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AnnulusConfig:
    """Concentric core/shell geometry.

    ``sigma`` is only used by :func:`electrostatic_medium`, which turns it into
    the shell permittivity ``-1 + i sigma``.  ``modes=None`` lets the solver pick
    the truncation adaptively; an integer fixes it.
    """

    r_c: float
    r_s: float
    r_0: float = np.inf
    core_permittivity_matched: bool = True
    sigma: float = 0.0
    modes: int | None = None
    eps_core: float = 1.0

    def __post_init__(self):
        if not 0 < self.r_c < self.r_s:
            raise ValueError("need 0 < r_c < r_s")
        if self.r_0 <= self.r_s:
            raise ValueError("source radius must exceed the shell radius")
        if self.modes is not None and self.modes < 8:
            raise ValueError("at least 8 modes are required")

    @property
    def core_ratio(self) -> float:
        """Core coefficient relative to the exterior one."""
        return 1.0 if self.core_permittivity_matched else self.eps_core


def electrostatic_medium(sigma: float) -> MediumParams:
    """Quasi-static shell with relative permittivity ``-1 + i sigma``."""
    return MediumParams(omega=0.0, eta=1j * sigma, b=1.0)


def _polar(points):
    p = np.atleast_2d(np.asarray(points, dtype=float))
    return np.hypot(p[:, 0], p[:, 1]), np.arctan2(p[:, 1], p[:, 0])


def _source_coeffs_static(src: SourceSpec, n: np.ndarray, r_ref: float) -> np.ndarray:
    """Coefficients of the source field in ``(r / r_ref)**|n| e^{i n theta}`` for ``r < r_0``."""
    r0, th0 = _polar([src.location])
    r0, th0 = r0[0], th0[0]
    p = np.abs(n)
    safe = np.maximum(p, 1)
    f = np.where(p > 0, (r_ref / r0) ** p / (4 * np.pi * safe), 0.0)
    if src.kind == "point":
        c = f * np.exp(-1j * n * th0)
        c = np.where(p == 0, -np.log(r0) / (2 * np.pi), c)
    else:
        m = np.asarray(src.moment, dtype=float)
        er = np.array([np.cos(th0), np.sin(th0)])
        et = np.array([-np.sin(th0), np.cos(th0)])
        df = -p / r0 * f
        c = (m @ er * df + m @ et / r0 * (-1j * n) * f) * np.exp(-1j * n * th0)
        c = np.where(p == 0, -(m @ er) / (2 * np.pi * r0), c)
    return complex(src.amplitude) * c


def _source_coeffs_dynamic(src: SourceSpec, n: np.ndarray, k: complex, scale: np.ndarray) -> np.ndarray:
    """Coefficients in ``J_n(k r) * scale_n`` for ``r < r_0``."""
    r0, th0 = _polar([src.location])
    r0, th0 = r0[0], th0[0]
    f = 0.25j * hankel1(n, k * r0)
    if src.kind == "point":
        c = f * np.exp(-1j * n * th0)
    else:
        m = np.asarray(src.moment, dtype=float)
        er = np.array([np.cos(th0), np.sin(th0)])
        et = np.array([-np.sin(th0), np.cos(th0)])
        df = 0.25j * k * h1vp(n, k * r0)
        c = (m @ er * df + m @ et / r0 * (-1j * n) * f) * np.exp(-1j * n * th0)
    return complex(src.amplitude) * c / scale


@dataclass
class AnnulusSolution:
    """Mode coefficients and evaluators for the concentric annulus.

    Radial bases per mode ``n``::

        core      P1(r)
        shell     beta P2(r) + gamma Q2(r)
        exterior  source + delta Q3(r)
    """

    cfg: AnnulusConfig
    medium: MediumParams
    sources: tuple
    n: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray
    gamma: np.ndarray
    delta: np.ndarray
    static: bool
    k_e: complex
    k_i: complex
    truncated: bool = False
    condition: float = 1.0
    uniform: np.ndarray | None = None
    _basis: dict = field(default_factory=dict, repr=False)

    @property
    def n_modes(self) -> int:
        return int(np.max(np.abs(self.n)))

    # radial basis -----------------------------------------------------
    def _radial(self, which: str, r: np.ndarray, deriv: bool):
        """Matrix ``(len(r), n_modes)`` of a basis function or its r-derivative."""
        c, n = self.cfg, self.n
        r = np.asarray(r, dtype=float)[:, None]
        if self.static:
            p = np.abs(n)[None, :]
            if which in ("P1", "P2", "P3"):
                ref = c.r_c if which == "P1" else c.r_s
                val = (r / ref) ** p
                return p / r * val if deriv else val
            ref = c.r_c if which == "Q2" else c.r_s
            val = np.where(p > 0, (ref / r) ** p, 0.0)
            return -p / r * val if deriv else val
        k = self.k_e if which in ("P1", "P3", "Q3") else self.k_i
        ref = {"P1": c.r_c, "P2": c.r_s, "Q2": c.r_c, "P3": c.r_s, "Q3": c.r_s}[which]
        nn = n[None, :]
        if which.startswith("P"):
            s = np.abs(hankel1(n, k * ref))[None, :]
            return (k * jvp(nn, k * r) if deriv else jv(nn, k * r)) * s
        s = hankel1(n, k * ref)[None, :]
        return (k * h1vp(nn, k * r) if deriv else hankel1(nn, k * r)) / s

    def radial_functions(self, region: str, r, deriv: bool = False) -> np.ndarray:
        """Per-mode radial profiles (without the source part in the exterior)."""
        if region == "core":
            return self.alpha[None, :] * self._radial("P1", r, deriv)
        if region == "shell":
            return (self.beta[None, :] * self._radial("P2", r, deriv)
                    + self.gamma[None, :] * self._radial("Q2", r, deriv))
        if region == "exterior":
            return self.delta[None, :] * self._radial("Q3", r, deriv)
        raise ValueError(region)

    def region_of(self, r) -> np.ndarray:
        r = np.asarray(r)
        return np.where(r < self.cfg.r_c, "core", np.where(r <= self.cfg.r_s, "shell", "exterior"))

    # evaluation -------------------------------------------------------
    def field(self, points, gradient: bool = False, total: bool = True):
        """Field (and gradient) at points; exterior values include the source unless ``total=False``."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        r, th = _polar(pts)
        if np.any(r == 0):
            r = np.where(r == 0, 1e-300, r)
        reg = self.region_of(r)
        val = np.zeros(len(pts), dtype=complex)
        gr = np.zeros(len(pts), dtype=complex)
        gt = np.zeros(len(pts), dtype=complex)
        for name in ("core", "shell", "exterior"):
            sel = reg == name
            if not sel.any():
                continue
            e = np.exp(1j * np.outer(th[sel], self.n))
            f = self.radial_functions(name, r[sel])
            val[sel] = np.sum(f * e, axis=1)
            if gradient:
                df = self.radial_functions(name, r[sel], deriv=True)
                gr[sel] = np.sum(df * e, axis=1)
                gt[sel] = np.sum(1j * self.n[None, :] * f * e, axis=1) / r[sel]
        grad = np.column_stack([gr * np.cos(th) - gt * np.sin(th), gr * np.sin(th) + gt * np.cos(th)])
        ext = reg == "exterior"
        if total and ext.any():
            for s in self.sources:
                v, g = s.field(self.k_e, pts[ext], gradient=True)
                val[ext] += v
                grad[ext] += g
            if self.uniform is not None:
                val[ext] += -pts[ext] @ self.uniform
                grad[ext] += -self.uniform
        return (val, grad) if gradient else val

    def h1_norm(self, r_in: float | None = None, r_out: float | None = None) -> float:
        """H1 norm of the shell field over ``r_in < r < r_out`` (defaults: the whole shell)."""
        r1 = self.cfg.r_c if r_in is None else r_in
        r2 = self.cfg.r_s if r_out is None else r_out
        if not self.cfg.r_c <= r1 < r2 <= self.cfg.r_s:
            raise ValueError("integration radii must lie in the shell")
        if self.static:
            return float(np.sqrt(_static_shell_h1_sq(self, r1, r2)))
        return float(np.sqrt(_quad_shell_h1_sq(self, r1, r2)))


def _static_shell_h1_sq(sol: AnnulusSolution, r1: float, r2: float) -> float:
    c = sol.cfg
    total = 0.0
    for n, b, g in zip(sol.n, sol.beta, sol.gamma):
        p = abs(int(n))
        if p == 0:
            total += abs(b) ** 2 * 0.5 * (r2**2 - r1**2)
            continue
        grad = p * (abs(b) ** 2 * ((r2 / c.r_s) ** (2 * p) - (r1 / c.r_s) ** (2 * p))
                    + abs(g) ** 2 * ((c.r_c / r1) ** (2 * p) - (c.r_c / r2) ** (2 * p)))
        lb = abs(b) ** 2 * c.r_s**2 * ((r2 / c.r_s) ** (2 * p + 2) - (r1 / c.r_s) ** (2 * p + 2)) / (2 * p + 2)
        if p == 1:
            lg = abs(g) ** 2 * c.r_c**2 * np.log(r2 / r1)
        else:
            lg = abs(g) ** 2 * c.r_c**2 * ((c.r_c / r2) ** (2 * p - 2) - (c.r_c / r1) ** (2 * p - 2)) / (2 - 2 * p)
        cross = 2 * (b * np.conj(g)).real * (c.r_c / c.r_s) ** p * 0.5 * (r2**2 - r1**2)
        total += grad + lb + lg + cross
    return 2 * np.pi * total


def composite_gauss(a: float, b: float, panels: int = 16, order: int = 20):
    s, w = roots_legendre(order)
    edges = np.linspace(a, b, panels + 1)
    h = np.diff(edges)
    x = (edges[:-1, None] + 0.5 * h[:, None] * (s[None, :] + 1)).ravel()
    wt = (0.5 * h[:, None] * w[None, :]).ravel()
    return x, wt


def _quad_shell_h1_sq(sol: AnnulusSolution, r1: float, r2: float) -> float:
    r, w = composite_gauss(r1, r2)
    f = sol.radial_functions("shell", r)
    df = sol.radial_functions("shell", r, deriv=True)
    n2 = (sol.n.astype(float) ** 2)[None, :]
    dens = np.abs(df) ** 2 + (1 + n2 / r[:, None] ** 2) * np.abs(f) ** 2
    return float(2 * np.pi * np.sum(w[:, None] * r[:, None] * dens))


def _mode_systems(sol_like, n, tau, tau_core, rc, rs, radial):
    """Assemble per-mode 4x4 matrices with unknowns ``(alpha, beta, gamma, delta)``."""
    P1, dP1 = radial("P1", rc)
    P2c, dP2c = radial("P2", rc)
    Q2c, dQ2c = radial("Q2", rc)
    P2s, dP2s = radial("P2", rs)
    Q2s, dQ2s = radial("Q2", rs)
    Q3, dQ3 = radial("Q3", rs)
    m = len(n)
    A = np.zeros((m, 4, 4), dtype=complex)
    A[:, 0] = np.stack([P1, -P2c, -Q2c, 0 * P1], axis=1)
    A[:, 1] = np.stack([tau_core * dP1, -dP2c, -dQ2c, 0 * P1], axis=1)
    A[:, 2] = np.stack([0 * P1, P2s, Q2s, -Q3], axis=1)
    A[:, 3] = np.stack([0 * P1, dP2s, dQ2s, -tau * dQ3], axis=1)
    return A


def _solve_modes(cfg, med, sources, n, uniform, static, k_e, k_i, tau):
    stub = AnnulusSolution(cfg, med, sources, n, *(np.zeros(len(n), complex),) * 4, static, k_e, k_i)

    def radial(which, r):
        return stub._radial(which, [r], False)[0], stub._radial(which, [r], True)[0]

    tau_core = tau * cfg.core_ratio
    A = _mode_systems(stub, n, tau, tau_core, cfg.r_c, cfg.r_s, radial)
    P3, dP3 = radial("P3", cfg.r_s)
    s = np.zeros(len(n), dtype=complex)
    for src in sources:
        if static:
            s += _source_coeffs_static(src, n, cfg.r_s)
        else:
            scale = np.abs(hankel1(n, k_e * cfg.r_s))
            s += _source_coeffs_dynamic(src, n, k_e, scale)
    if uniform is not None:
        # -E . x = -(r_s/2) (E_x - i E_y) e^{i theta} (r/r_s) + c.c.
        ex, ey = uniform
        s += np.where(n == 1, -0.5 * cfg.r_s * (ex - 1j * ey), 0)
        s += np.where(n == -1, -0.5 * cfg.r_s * (ex + 1j * ey), 0)
    rhs = np.zeros((len(n), 4), dtype=complex)
    rhs[:, 2] = s * P3
    rhs[:, 3] = tau * s * dP3
    if static and np.any(n == 0):
        # the constant mode carries no flux: the incident constant passes through
        zero = n == 0
        A[zero] = np.eye(4)
        rhs[zero] = 0
        rhs[zero, 0] = rhs[zero, 1] = s[zero]
    coef = np.linalg.solve(A, rhs[..., None])[..., 0]
    cond = float(np.max(np.linalg.cond(A)))
    return coef, cond


def _max_order_dynamic(k_e, k_i, cfg, cap):
    """Largest order whose scaled bases stay finite."""
    n = np.arange(cap + 1)
    ok = np.ones(len(n), bool)
    for k in (k_e, k_i):
        for r in (cfg.r_c, cfg.r_s):
            with np.errstate(all="ignore"):
                h = hankel1(n, k * r)
                j = jv(n, k * r)
            ok &= np.isfinite(h) & (np.abs(h) < 1e280) & ((np.abs(j) > 1e-280) | (n == 0))
    bad = np.nonzero(~ok)[0]
    return cap if len(bad) == 0 else max(int(bad[0]) - 1, 8)


def annulus_solve(cfg: AnnulusConfig, med: MediumParams, src=None, uniform=None,
                  m_max: int = M_MAX) -> AnnulusSolution:
    """Mode-matching solution for the concentric annulus.

    Parameters
    ----------
    cfg : AnnulusConfig
    med : MediumParams
        ``omega = 0`` selects the harmonic bases, otherwise Bessel/Hankel.
    src : SourceSpec or sequence, optional
        Exterior sources with ``|z| > r_s``.
    uniform : (2,) array, optional
        Uniform background field ``E`` (potential ``-E . x``), static only.
    """
    if med.dim != 2:
        raise ValueError("annulus_solve is planar")
    sources = () if src is None else ((src,) if isinstance(src, SourceSpec) else tuple(src))
    for s in sources:
        if np.hypot(*s.location) <= cfg.r_s:
            raise ValueError("sources must lie outside the shell")
    k_e, k_i, tau = derive_wavenumbers(med)
    static = med.omega == 0
    if uniform is not None and not static:
        raise ValueError("a uniform background field is a static notion")
    uniform = None if uniform is None else np.asarray(uniform, dtype=float)
    cap = m_max if static else _max_order_dynamic(k_e, k_i, cfg, m_max)
    if cfg.modes is not None:
        m = min(cfg.modes, cap)
        adaptive = False
    else:
        m = min(16, cap)
        adaptive = True
    while True:
        n = np.arange(-m, m + 1)
        coef, cond = _solve_modes(cfg, med, sources, n, uniform, static, k_e, k_i, tau)
        mag = np.max(np.abs(coef), axis=1)
        tail = max(mag[0], mag[-1])
        small = tail <= TAIL_TOL * max(mag.max(), 1e-300)
        if not adaptive or small or m >= cap:
            break
        m = min(2 * m, cap)
    truncated = not small
    if truncated and adaptive:
        logger.info("annulus series truncated at %d modes (tail %.1e)", m, tail / max(mag.max(), 1e-300))
    return AnnulusSolution(cfg, med, sources, n, coef[:, 0], coef[:, 1], coef[:, 2], coef[:, 3],
                           static, k_e, k_i, truncated, cond, uniform)


# ---------------------------------------------------------------------------
# Concentric balls
# ---------------------------------------------------------------------------


def _sph_h(l, z, deriv=False):
    return spherical_jn(l, z, deriv) + 1j * spherical_yn(l, z, deriv)


@dataclass
class BallSolution:
    """Axisymmetric Legendre-mode solution for concentric balls (source on the z-axis)."""

    r_c: float
    r_s: float
    medium: MediumParams
    source: SourceSpec
    l: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray
    gamma: np.ndarray
    delta: np.ndarray
    static: bool
    k_e: complex
    k_i: complex
    condition: float = 1.0

    def _radial(self, which, r, deriv=False):
        r = np.asarray(r, dtype=float)[:, None]
        l = self.l[None, :]
        if self.static:
            if which.startswith("P"):
                ref = self.r_c if which == "P1" else self.r_s
                v = (r / ref) ** l
                return l / r * v if deriv else v
            ref = self.r_c if which == "Q2" else self.r_s
            v = (ref / r) ** (l + 1)
            return -(l + 1) / r * v if deriv else v
        k = self.k_e if which in ("P1", "P3", "Q3") else self.k_i
        ref = {"P1": self.r_c, "P2": self.r_s, "Q2": self.r_c, "P3": self.r_s, "Q3": self.r_s}[which]
        if which.startswith("P"):
            s = np.abs(_sph_h(self.l, k * ref))[None, :]
            return (k * spherical_jn(l, k * r, True) if deriv else spherical_jn(l, k * r)) * s
        s = _sph_h(self.l, k * ref)[None, :]
        return (k * _sph_h(l, k * r, True) if deriv else _sph_h(l, k * r)) / s

    def radial_functions(self, region, r, deriv=False):
        if region == "core":
            return self.alpha[None, :] * self._radial("P1", r, deriv)
        if region == "shell":
            return self.beta[None, :] * self._radial("P2", r, deriv) + \
                self.gamma[None, :] * self._radial("Q2", r, deriv)
        if region == "exterior":
            return self.delta[None, :] * self._radial("Q3", r, deriv)
        raise ValueError(region)

    def field(self, points, total: bool = True):
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        r = np.linalg.norm(pts, axis=1)
        ct = np.where(r > 0, pts[:, 2] / np.where(r > 0, r, 1), 1.0)
        reg = np.where(r < self.r_c, "core", np.where(r <= self.r_s, "shell", "exterior"))
        out = np.zeros(len(pts), dtype=complex)
        for name in ("core", "shell", "exterior"):
            sel = reg == name
            if sel.any():
                P = np.stack([eval_legendre(int(l), ct[sel]) for l in self.l], axis=1)
                out[sel] = np.sum(self.radial_functions(name, r[sel]) * P, axis=1)
        ext = reg == "exterior"
        if total and ext.any():
            out[ext] += self.source.field(self.k_e, pts[ext])
        return out

    def h1_norm(self, r_in=None, r_out=None) -> float:
        r1 = self.r_c if r_in is None else r_in
        r2 = self.r_s if r_out is None else r_out
        r, w = composite_gauss(r1, r2)
        f = self.radial_functions("shell", r)
        df = self.radial_functions("shell", r, deriv=True)
        ll = (self.l * (self.l + 1.0))[None, :]
        dens = np.abs(df) ** 2 + (1 + ll / r[:, None] ** 2) * np.abs(f) ** 2
        wl = (4 * np.pi / (2 * self.l + 1.0))[None, :]
        return float(np.sqrt(np.sum(w[:, None] * r[:, None] ** 2 * wl * dens)))


def ball_series_solve(r_c: float, r_s: float, med: MediumParams, src: SourceSpec,
                      L_max: int = 60) -> BallSolution:
    """Concentric-ball solution for a point source on the positive z-axis."""
    if not 0 < r_c < r_s:
        raise ValueError("need 0 < r_c < r_s")
    if src.kind != "point" or len(src.location) != 3:
        raise ValueError("ball series takes a 3D point source")
    x, y, z0 = src.location
    if abs(x) > 0 or abs(y) > 0 or z0 <= r_s:
        raise ValueError("source must sit on the positive z-axis outside the shell")
    if med.dim != 3:
        raise ValueError("ball series needs a three-dimensional medium")
    k_e, k_i, tau = derive_wavenumbers(med)
    static = med.omega == 0
    l = np.arange(L_max + 1)
    sol = BallSolution(r_c, r_s, med, src, l, *(np.zeros(len(l), complex),) * 4, static, k_e, k_i)
    if not static:
        good = np.ones(len(l), bool)
        for k in (k_e, k_i):
            for r in (r_c, r_s):
                with np.errstate(all="ignore"):
                    h = _sph_h(l, k * r)
                good &= np.isfinite(h) & (np.abs(h) < 1e280)
        l = l[: int(np.argmin(good)) if not good.all() else len(l)]
        sol.l = l

    def radial(which, r):
        return sol._radial(which, [r])[0], sol._radial(which, [r], True)[0]

    A = _mode_systems(sol, l, tau, tau, r_c, r_s, radial)
    P3, dP3 = radial("P3", r_s)
    amp = complex(src.amplitude)
    if static:
        s = amp * (r_s / z0) ** l / (4 * np.pi * z0)
    else:
        s = amp * 1j * k_e * (2 * l + 1) / (4 * np.pi) * _sph_h(l, k_e * z0) / np.abs(_sph_h(l, k_e * r_s))
    rhs = np.zeros((len(l), 4), dtype=complex)
    rhs[:, 2] = s * P3
    rhs[:, 3] = tau * s * dP3
    coef = np.linalg.solve(A, rhs[..., None])[..., 0]
    sol.alpha, sol.beta, sol.gamma, sol.delta = coef.T
    sol.condition = float(np.max(np.linalg.cond(A)))
    return sol


# ---------------------------------------------------------------------------
# Polarizable inclusion (cloaking)
# ---------------------------------------------------------------------------


def cylinder_polarizability(radius: float = 0.1, eps: float = 100.0) -> float:
    """Static polarizability of a thin dielectric cylinder in a unit background."""
    return 2 * np.pi * radius**2 * (eps - 1) / (eps + 1)


@dataclass
class CloakingScene:
    """Annulus in a uniform field, with and without a polarizable inclusion."""

    with_particle: AnnulusSolution
    without_particle: AnnulusSolution
    moment: np.ndarray
    bare_moment: np.ndarray
    location: np.ndarray

    def bare_signature(self, points):
        """Field of the inclusion alone in free space under the same uniform field."""
        return sum(SourceSpec("dipole", tuple(self.location), tuple(e), m).field(0, points)
                   for e, m in zip(np.eye(2), self.bare_moment))


def polarizable_dipole(cfg: AnnulusConfig, med: MediumParams, location, field_vec=(1.0, 0.0),
                       polarizability: float | None = None) -> CloakingScene:
    """Self-consistent moment of a small cylinder next to the annulus.

    The moment solves ``p = alpha (E_ext + M p)`` where ``E_ext`` is the local
    field from the background and its annulus response, and ``M p`` the field
    reflected back by the annulus.
    """
    if med.omega != 0:
        raise ValueError("polarizable inclusion model is static")
    alpha = cylinder_polarizability() if polarizability is None else polarizability
    loc = np.asarray(location, dtype=float)
    E0 = np.asarray(field_vec, dtype=float)
    base = annulus_solve(cfg, med, uniform=E0)
    _, g = base.field(loc[None], gradient=True)
    e_ext = -g[0]
    M = np.zeros((2, 2), dtype=complex)
    for j, e in enumerate(np.eye(2)):
        s = annulus_solve(cfg, med, SourceSpec("dipole", tuple(loc), tuple(e)))
        _, gs = s.field(loc[None], gradient=True, total=False)
        M[:, j] = -gs[0]
    p = np.linalg.solve(np.eye(2) - alpha * M, alpha * e_ext)
    srcs = [SourceSpec("dipole", tuple(loc), tuple(e), complex(pj)) for e, pj in zip(np.eye(2), p)]
    with_p = annulus_solve(cfg, med, srcs, uniform=E0)
    return CloakingScene(with_p, base, p, alpha * E0, loc)


__all__ = [
    "CriticalRadii", "critical_radii", "AnnulusConfig", "AnnulusSolution", "annulus_solve",
    "electrostatic_medium", "BallSolution", "ball_series_solve", "cylinder_polarizability",
    "CloakingScene", "polarizable_dipole", "composite_gauss",
]
