"""Nystrom discretization of layer operators on smooth closed curves.

Trace operators on one contour use the periodic logarithmic splitting rule:
each weakly singular kernel is written as ``L1 ln(4 sin^2((t-s)/2)) + L2`` with
smooth ``L1, L2``, the log part is integrated exactly against the
trigonometric interpolant and the rest by the trapezoid rule.  Operators
between two disjoint contours have smooth kernels and use plain trapezoid
sums.

Kernel conventions (``nu`` is the stored normal of the contour)::

    V  : G(x - y)                    K  : dG(x - y)/dnu(y)
    K* : dG(x - y)/dnu(x)            N  : d^2 G(x - y)/dnu(x) dnu(y)

``N`` is assembled from the Maue identity
``N = d/ds V d/ds + k^2 nu . V nu``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import hankel1, jv

from .geometry import Contour
from .kernels import EULER_GAMMA, green

TWO_PI = 2.0 * np.pi


@dataclass
class OperatorBlock:
    matrix: np.ndarray
    row_contour: str
    col_contour: str
    kind: str
    wavenumber: complex

    @property
    def shape(self):
        return self.matrix.shape

    def __matmul__(self, other):
        other = other.matrix if isinstance(other, OperatorBlock) else other
        return self.matrix @ other


def write_block(path, block) -> tuple[int, int]:
    """Dump a block as row-major little-endian float64 ``(re, im)`` pairs."""
    m = block.matrix if isinstance(block, OperatorBlock) else np.asarray(block)
    np.ascontiguousarray(m, dtype="<c16").tofile(path)
    return m.shape


def read_block(path, shape) -> np.ndarray:
    return np.fromfile(path, dtype="<c16").reshape(shape)


# ---------------------------------------------------------------------------
# Quadrature helpers
# ---------------------------------------------------------------------------


def log_weights(n: int) -> np.ndarray:
    """Matrix ``R`` with ``sum_j R_ij f(t_j) ~ int ln(4 sin^2((t_i - s)/2)) f(s) ds``."""
    m = np.arange(n)
    m = np.where(m > n // 2, n - m, m)
    spec = np.zeros(n)
    spec[1:] = -TWO_PI / n / np.maximum(m[1:], 1)
    spec[n // 2] = -4 * np.pi / n**2
    r = np.real(np.fft.ifft(spec)) * n
    idx = (np.arange(n)[:, None] - np.arange(n)[None, :]) % n
    return r[idx]


def diff_matrix(n: int) -> np.ndarray:
    """Spectral d/dt on ``n`` (even) equispaced periodic nodes."""
    i = np.arange(n)
    d = (i[:, None] - i[None, :]) % n
    h = TWO_PI / n
    with np.errstate(divide="ignore"):
        out = 0.5 * (-1.0) ** d / np.tan(d * h / 2)
    out[d == 0] = 0.0
    return out


def trig_upsample(values: np.ndarray, factor: int) -> np.ndarray:
    """Evaluate the trigonometric interpolant of periodic samples on a finer grid."""
    if factor == 1:
        return values
    n = values.shape[0]
    m = n * factor
    c = np.fft.fft(values, axis=0)
    out = np.zeros((m,) + values.shape[1:], dtype=complex)
    h = n // 2
    out[:h] = c[:h]
    out[m - h + 1:] = c[h + 1:]
    out[h] = 0.5 * c[h]
    out[m - h] = 0.5 * c[h]
    return np.fft.ifft(out, axis=0) * factor


# ---------------------------------------------------------------------------
# Trace operators on one contour
# ---------------------------------------------------------------------------


def _self_geometry(c: Contour):
    diff = c.nodes[:, None, :] - c.nodes[None, :, :]
    rho = np.hypot(diff[..., 0], diff[..., 1])
    np.fill_diagonal(rho, 1.0)
    dt = c.t[:, None] - c.t[None, :]
    log4sin = np.log(4 * np.sin(dt / 2) ** 2 + np.eye(c.n_nodes))
    return diff, rho, log4sin


def assemble_trace_ops(c: Contour, k: complex, which=("V", "K", "Kstar", "N")) -> dict:
    """Dense Nystrom matrices of ``V, K, K*, N`` on ``c`` at wavenumber ``k``."""
    if c.n_nodes < 16:
        raise ValueError("need at least 16 nodes")
    k = complex(k)
    if k.imag < 0:
        raise ValueError("Im k must be >= 0")
    n = c.n_nodes
    diff, rho, log4sin = _self_geometry(c)
    R = log_weights(n)
    h = TWO_PI / n
    speed = c.speed
    nu = c.normals
    diag = np.arange(n)
    # (x - y) . nu(y) / rho and (x - y) . nu(x) / rho
    cos_y = np.einsum("ijk,jk->ij", diff, nu) / rho
    cos_x = np.einsum("ijk,ik->ij", diff, nu) / rho
    # limit (x - y).nu / rho^2 on the diagonal is (x''.nu) / (2 |x'|^2)
    curv_term = np.einsum("ik,ik->i", c.d2, nu) / (4 * np.pi * speed**2)

    out = {}
    need_v = "V" in which or "N" in which
    if k == 0:
        if need_v:
            l1 = np.full((n, n), -1.0 / (4 * np.pi))
            l2 = -(np.log(rho**2) - log4sin) / (4 * np.pi)
            l2[diag, diag] = -np.log(speed) / (2 * np.pi)
            vmat = (R * l1 + h * l2) * speed[None, :]
        if "K" in which:
            kern = cos_y / (2 * np.pi * rho)
            kern[diag, diag] = curv_term
            out["K"] = h * kern * speed[None, :]
        if "Kstar" in which:
            kern = -cos_x / (2 * np.pi * rho)
            kern[diag, diag] = curv_term
            out["Kstar"] = h * kern * speed[None, :]
    else:
        z = k * rho
        if need_v:
            g = 0.25j * hankel1(0, z)
            l1 = -jv(0, z) / (4 * np.pi)
            l2 = g - l1 * log4sin
            l2[diag, diag] = 0.25j - (EULER_GAMMA + np.log(k * speed / 2)) / (2 * np.pi)
            l1[diag, diag] = -1.0 / (4 * np.pi)
            vmat = (R * l1 + h * l2) * speed[None, :]
        if "K" in which or "Kstar" in which:
            h1 = hankel1(1, z)
            j1 = jv(1, z)
            for name, cosv, sgn in (("K", cos_y, 1.0), ("Kstar", cos_x, -1.0)):
                if name not in which:
                    continue
                kern = sgn * 0.25j * k * h1 * cosv
                l1 = -sgn * k * j1 * cosv / (4 * np.pi)
                l2 = kern - l1 * log4sin
                l1[diag, diag] = 0.0
                l2[diag, diag] = curv_term
                out[name] = (R * l1 + h * l2) * speed[None, :]
    if "V" in which:
        out["V"] = vmat
    if "N" in which:
        ds = diff_matrix(n) / speed[:, None]
        nmat = ds @ vmat @ ds
        if k != 0:
            for a in range(2):
                nmat += k**2 * (nu[:, a][:, None] * vmat * nu[:, a][None, :])
        out["N"] = nmat
    return {name: OperatorBlock(m, c.name, c.name, name, k) for name, m in out.items()}


# ---------------------------------------------------------------------------
# Operators between disjoint contours and off-surface potentials
# ---------------------------------------------------------------------------


def _pair_kernels(targets, sources, src_normals, k, dim=2, tgt_normals=None,
                  want=("S",), grad=False):
    """Kernel matrices between target points and source nodes (no weights)."""
    r = targets[:, None, :] - sources[None, :, :]
    ev = green(dim, k, r, hessian=grad or "SS" in want)
    out = {}
    if "S" in want:
        out["S"] = ev.value
        if grad:
            out["S_grad"] = ev.gradient
    if "D" in want:
        out["D"] = -np.einsum("ijk,jk->ij", ev.gradient, src_normals)
        if grad:
            out["D_grad"] = -np.einsum("ijkl,jl->ijk", ev.hessian, src_normals)
    if "B" in want:
        out["B"] = np.einsum("ijk,ik->ij", ev.gradient, tgt_normals)
    if "SS" in want:
        out["SS"] = -np.einsum("ik,ijkl,jl->ij", tgt_normals, ev.hessian, src_normals)
    return out


def assemble_cross_ops(row: Contour, col: Contour, k: complex) -> dict:
    """Smooth cross-interface operators ``A, B, R, S`` (density on ``col``, traces on ``row``)."""
    if row.distance(col.nodes).min() <= 0 or col.distance(row.nodes).min() <= 0:
        raise ValueError("contours overlap")
    if np.any(row.contains(col.nodes)) and np.any(~row.contains(col.nodes)):
        raise ValueError("contours intersect")
    k = complex(k)
    kern = _pair_kernels(row.nodes, col.nodes, col.normals, k, tgt_normals=row.normals,
                         want=("S", "D", "B", "SS"))
    w = col.weights[None, :]
    names = {"A": "S", "B": "B", "R": "D", "S": "SS"}
    return {name: OperatorBlock(kern[key] * w, row.name, col.name, name, k)
            for name, key in names.items()}


def _auto_factor(dist, spacing, cap=1024):
    # aim for four refined spacings of clearance: trapezoid error ~ exp(-8 pi)
    f = np.ceil(4.0 * spacing / np.maximum(dist, 1e-300))
    return np.clip(f, 1, cap).astype(int)


def eval_layers(c: Contour, k: complex, points, single=None, double=None, want_gradient=False,
                upsample=1, chunk_pairs: int = 400_000):
    """Sum of a single layer with density ``single`` and a double layer with ``double``.

    Both layers share one kernel evaluation per target chunk.  Points closer
    than three (possibly refined) node spacings are refused.  ``upsample``
    refines the quadrature by trigonometric interpolation of the densities: an
    integer factor, or ``"auto"`` to choose one per point from its distance.

    Returns values, or ``(values, gradients)`` when ``want_gradient``.
    """
    if single is None and double is None:
        raise ValueError("no density given")
    points = np.atleast_2d(np.asarray(points, dtype=float))
    dist = c.distance(points)
    if upsample == "auto":
        factors = _auto_factor(dist, c.node_spacing)
    else:
        factors = np.full(len(points), int(upsample))
    too_close = dist < 3 * c.node_spacing / factors
    if np.any(too_close):
        raise ValueError(
            f"{too_close.sum()} evaluation point(s) within 3 node spacings of {c.name or 'contour'}: "
            f"min distance {dist.min():.3e}, limit {3 * c.node_spacing / factors.max():.3e}")
    vals = np.zeros(len(points), dtype=complex)
    grads = np.zeros((len(points), 2), dtype=complex)
    for f in np.unique(factors):
        sel = np.nonzero(factors == f)[0]
        cf = c.refine(int(f))
        sl = None if single is None else trig_upsample(np.asarray(single, complex), int(f)) * cf.weights
        dl = None if double is None else trig_upsample(np.asarray(double, complex), int(f)) * cf.weights
        step = max(1, chunk_pairs // cf.n_nodes)
        for s0 in range(0, len(sel), step):
            idx = sel[s0:s0 + step]
            r = points[idx][:, None, :] - cf.nodes[None, :, :]
            ev = green(2, k, r, hessian=want_gradient and dl is not None)
            if sl is not None:
                vals[idx] += ev.value @ sl
                if want_gradient:
                    grads[idx] += np.einsum("ijk,j->ik", ev.gradient, sl)
            if dl is not None:
                w = cf.normals * dl[:, None]
                vals[idx] -= np.einsum("ijk,jk->i", ev.gradient, w)
                if want_gradient:
                    grads[idx] -= np.einsum("ijkl,jl->ik", ev.hessian, w)
    if want_gradient:
        return vals, grads
    return vals


def eval_potential(kind: str, c: Contour, density, k: complex, points, want_gradient=False,
                   upsample=1):
    """Single (``kind="single"``) or double (``kind="double"``) layer potential off the contour.

    See :func:`eval_layers` for the standoff rule and ``upsample``.
    """
    if kind == "single":
        return eval_layers(c, k, points, single=density, want_gradient=want_gradient, upsample=upsample)
    if kind == "double":
        return eval_layers(c, k, points, double=density, want_gradient=want_gradient, upsample=upsample)
    raise ValueError(f"unknown potential kind {kind!r}")


def node_spacing_standoff(*contours, multiple: float = 3.0) -> float:
    return multiple * max(c.node_spacing for c in contours)


def fourier_mode(values, n_mode: int) -> complex:
    """Coefficient of ``exp(i n t)`` in equispaced periodic samples."""
    values = np.asarray(values)
    return complex(np.fft.fft(values)[n_mode % len(values)] / len(values))


__all__ = [
    "OperatorBlock", "assemble_trace_ops", "assemble_cross_ops", "eval_potential", "eval_layers",
    "log_weights", "diff_matrix", "trig_upsample", "write_block", "read_block",
    "fourier_mode", "node_spacing_standoff",
]
