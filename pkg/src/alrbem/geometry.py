"""Smooth closed parametric contours in the plane.

Every contour is sampled at ``n`` equispaced parameter values on ``[0, 2 pi)``;
the trapezoid rule on these nodes is spectrally accurate for smooth periodic
integrands, which is what the Nystrom discretization relies on.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.spatial import cKDTree

TWO_PI = 2.0 * np.pi

# ---------------------------------------------------------------------------
# Shapes
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Circle:
    radius: float
    center: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        if self.radius <= 0:
            raise ValueError("circle radius must be positive")

    def evaluate(self, t):
        c, s = np.cos(t), np.sin(t)
        r = self.radius
        x = np.stack([self.center[0] + r * c, self.center[1] + r * s], axis=-1)
        dx = np.stack([-r * s, r * c], axis=-1)
        ddx = np.stack([-r * c, -r * s], axis=-1)
        return x, dx, ddx

    @property
    def exact_perimeter(self):
        return TWO_PI * self.radius


@dataclass(frozen=True)
class Ellipse:
    a: float
    b: float
    center: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        if self.a <= 0 or self.b <= 0:
            raise ValueError("ellipse semiaxes must be positive")

    def evaluate(self, t):
        c, s = np.cos(t), np.sin(t)
        x = np.stack([self.center[0] + self.a * c, self.center[1] + self.b * s], axis=-1)
        dx = np.stack([-self.a * s, self.b * c], axis=-1)
        ddx = np.stack([-self.a * c, -self.b * s], axis=-1)
        return x, dx, ddx

    exact_perimeter = None


def _bump(x):
    out = np.zeros_like(x, dtype=float)
    pos = x > 0
    out[pos] = np.exp(-1.0 / x[pos])
    return out


def _bump_derivative(x):
    out = np.zeros_like(x, dtype=float)
    pos = x > 0
    out[pos] = np.exp(-1.0 / x[pos] - 2.0 * np.log(x[pos]))
    return out


def smooth_step(u, w):
    """C-infinity step rising from 0 at ``u = -w`` to 1 at ``u = w``.

    Symmetric: ``H(u) + H(-u) = 1``.  Returns ``(H, dH/du)``.
    """
    u = np.asarray(u, dtype=float)
    p, q = _bump(w + u), _bump(w - u)
    dp, dq = _bump_derivative(w + u), -_bump_derivative(w - u)
    den = p + q
    return p / den, (dp * q - p * dq) / den**2


_GL_X, _GL_W = np.polynomial.legendre.leggauss(80)


def smooth_ramp(s, w):
    """Convex C-infinity ramp: 0 for ``s <= -w``, ``s`` for ``s >= w``.

    Defined as the integral of :func:`smooth_step`; the transition is
    integrated with an 80-point Gauss-Legendre rule.
    """
    s = np.asarray(s, dtype=float)
    out = np.where(s >= w, s, 0.0)
    mid = (s > -w) & (s < w)
    if np.any(mid):
        sm = s[mid]
        half = 0.5 * (sm + w)
        u = -w + half[:, None] * (_GL_X[None, :] + 1.0)
        h, _ = smooth_step(u, w)
        out[mid] = half * (h @ _GL_W)
    return out


@dataclass(frozen=True)
class FlatBottomEllipse:
    """Ellipse whose lower part is cut flat at height ``cut``.

    The two corners are rounded by a convex C-infinity ramp acting over a
    vertical window of half-width ``rho``; below ``cut + ...`` the boundary is
    exactly the straight line ``y = cut``.
    """

    a: float
    b: float
    cut: float
    rho: float = 0.3
    center: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        if self.a <= 0 or self.b <= 0 or self.rho <= 0:
            raise ValueError("semiaxes and smoothing length must be positive")
        c = self.cut - self.center[1]
        if not (-self.b + self.rho < c < self.b - self.rho):
            raise ValueError("cut must leave room for the smoothing window inside the ellipse")

    def evaluate(self, t):
        c0 = self.cut - self.center[1]
        ct, st = np.cos(t), np.sin(t)
        s = self.b * st - c0
        g = smooth_ramp(s, self.rho)
        h, dh = smooth_step(s, self.rho)
        x = np.stack([self.center[0] + self.a * ct, self.center[1] + c0 + g], axis=-1)
        dx = np.stack([-self.a * st, h * self.b * ct], axis=-1)
        ddx = np.stack([-self.a * ct, dh * (self.b * ct) ** 2 - h * self.b * st], axis=-1)
        return x, dx, ddx

    @property
    def flat_half_width(self):
        """Half-length of the exactly straight part of the bottom."""
        c0 = self.cut - self.center[1]
        sin_t = (c0 - self.rho) / self.b
        return self.a * np.sqrt(1.0 - sin_t**2)

    exact_perimeter = None


SHAPES = {"circle": Circle, "ellipse": Ellipse, "flat_bottom_ellipse": FlatBottomEllipse}


def shape_from_dict(spec: dict):
    """Build a shape from a config mapping such as ``{"kind": "circle", "radius": 2}``."""
    spec = dict(spec)
    kind = spec.pop("kind")
    if kind not in SHAPES:
        raise ValueError(f"unknown shape kind {kind!r}")
    if "center" in spec:
        spec["center"] = tuple(float(v) for v in spec["center"])
    return SHAPES[kind](**spec)


def shape_to_dict(shape) -> dict:
    kind = next(k for k, v in SHAPES.items() if isinstance(shape, v))
    out = {"kind": kind}
    out.update({k: getattr(shape, k) for k in shape.__dataclass_fields__})
    out["center"] = list(out["center"])
    return out


# ---------------------------------------------------------------------------
# Contour
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Contour:
    """Sampled contour.

    ``normals`` are ``orientation`` times the outward normal of the region the
    curve encloses; the shell's inner boundary is built with ``orientation=-1``
    so that both interfaces carry the exterior normal of the shell.
    """

    shape: object
    n_nodes: int
    orientation: int
    t: np.ndarray
    nodes: np.ndarray
    d1: np.ndarray
    d2: np.ndarray
    speed: np.ndarray
    normals: np.ndarray
    curvature: np.ndarray
    weights: np.ndarray
    name: str = ""
    param_period: float = field(default=TWO_PI)

    @property
    def perimeter(self) -> float:
        return float(self.weights.sum())

    @property
    def node_spacing(self) -> float:
        return float(self.speed.max() * TWO_PI / self.n_nodes)

    def refine(self, factor: int) -> "Contour":
        if factor == 1:
            return self
        return make_contour(self.shape, self.n_nodes * factor, self.orientation, self.name)

    def polygon(self, factor: int = 4) -> np.ndarray:
        return self.refine(factor).nodes

    def contains(self, points) -> np.ndarray:
        """Even-odd point-in-polygon test against a refined polygon."""
        return points_in_polygon(np.atleast_2d(points), self.polygon())

    @cached_property
    def _tree(self) -> cKDTree:
        return cKDTree(self.polygon(16))

    def distance(self, points) -> np.ndarray:
        """Distance to the curve, to within the refined polygon's resolution."""
        d, _ = self._tree.query(np.atleast_2d(points))
        return d

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write("# alrbem contour v1\n")
            w = csv.writer(fh)
            w.writerow(["param", "x", "y", "nx", "ny", "curvature"])
            for row in zip(self.t, self.nodes[:, 0], self.nodes[:, 1],
                           self.normals[:, 0], self.normals[:, 1], self.curvature):
                w.writerow([f"{v:.16e}" for v in row])


def points_in_polygon(points: np.ndarray, poly: np.ndarray, chunk: int = 4096) -> np.ndarray:
    x0, y0 = poly[:, 0], poly[:, 1]
    x1, y1 = np.roll(x0, -1), np.roll(y0, -1)
    inside = np.zeros(len(points), dtype=bool)
    for start in range(0, len(points), chunk):
        px = points[start:start + chunk, 0][:, None]
        py = points[start:start + chunk, 1][:, None]
        crosses = (y0 > py) != (y1 > py)
        with np.errstate(divide="ignore", invalid="ignore"):
            xint = x0 + (py - y0) * (x1 - x0) / (y1 - y0)
        hit = crosses & (px < xint)
        inside[start:start + chunk] = (np.count_nonzero(hit, axis=1) % 2) == 1
    return inside


def make_contour(shape, n_nodes: int, orientation: int = 1, name: str = "") -> Contour:
    """Sample ``shape`` at ``n_nodes`` equispaced parameter values."""
    if n_nodes < 16 or n_nodes % 2:
        raise ValueError(f"n_nodes must be even and >= 16, got {n_nodes}")
    if orientation not in (1, -1):
        raise ValueError("orientation must be +1 or -1")
    t = TWO_PI * np.arange(n_nodes) / n_nodes
    x, dx, ddx = shape.evaluate(t)
    speed = np.hypot(dx[:, 0], dx[:, 1])
    if np.any(speed <= 0):
        raise ValueError("degenerate parametrization (zero speed)")
    outward = np.stack([dx[:, 1], -dx[:, 0]], axis=-1) / speed[:, None]
    curvature = (dx[:, 0] * ddx[:, 1] - dx[:, 1] * ddx[:, 0]) / speed**3
    weights = speed * TWO_PI / n_nodes
    for arr in (t, x, dx, ddx, speed, outward, curvature, weights):
        arr.setflags(write=False)
    return Contour(shape, n_nodes, orientation, t, x, dx, ddx, speed,
                   orientation * outward, curvature, weights, name)


def make_shell(inner, outer, n_inner: int, n_outer: int | None = None):
    """Contours ``(gamma1, gamma2)`` of the shell between ``inner`` and ``outer``.

    Both carry the exterior normal of the shell: ``gamma1`` points into the
    core, ``gamma2`` points to infinity.
    """
    n_outer = n_inner if n_outer is None else n_outer
    if isinstance(inner, Circle) and isinstance(outer, Circle) and inner.center == outer.center:
        if not inner.radius < outer.radius:
            raise ValueError("annulus needs r_c < r_s")
    g1 = make_contour(inner, n_inner, -1, "gamma1")
    g2 = make_contour(outer, n_outer, 1, "gamma2")
    if not np.all(g2.contains(g1.nodes)):
        raise ValueError("inner contour is not enclosed by the outer contour")
    if g2.distance(g1.nodes).min() <= 0:
        raise ValueError("contours touch")
    return g1, g2


def convexity_report(c: Contour, tol: float = 1e-8):
    """Return ``(strictly_convex, min_curvature, flat_fraction)``.

    Curvature is the signed curvature of the counter-clockwise parametrization.
    """
    kappa = c.curvature
    strictly = bool(np.all(kappa > tol) or np.all(kappa < -tol))
    flat = np.abs(kappa) < tol
    flat_fraction = float(c.weights[flat].sum() / c.perimeter)
    return strictly, float(kappa.min()), flat_fraction


# ---------------------------------------------------------------------------
# Flat slab next to a straight facet
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FlatSlabRegion:
    """Boxes on either side of a straight facet of the outer interface.

    The facet is ``{y = y1, |x - x0| < R0}``.  ``S+`` lies on the shell side
    (``y1 < y < y1 + a``), ``S-`` on the exterior side.
    """

    y1: float
    R0: float
    a: float
    x0: float = 0.0

    def __post_init__(self):
        if self.R0 <= 0 or self.a <= 0:
            raise ValueError("R0 and a must be positive")

    def mirror(self, points) -> np.ndarray:
        p = np.array(points, dtype=float, copy=True)
        p[..., 1] = self.y1 - (p[..., 1] - self.y1)
        return p

    def in_plus(self, points) -> np.ndarray:
        p = np.atleast_2d(points)
        return (np.abs(p[:, 0] - self.x0) < self.R0) & (p[:, 1] > self.y1) & (p[:, 1] < self.y1 + self.a)

    def in_minus(self, points) -> np.ndarray:
        p = np.atleast_2d(points)
        return (np.abs(p[:, 0] - self.x0) < self.R0) & (p[:, 1] < self.y1) & (p[:, 1] > self.y1 - self.a)

    def box(self, side: str, standoff: float = 0.0):
        """``((xmin, xmax), (ymin, ymax))`` of a box, shrunk by ``standoff`` from the facet."""
        xs = (self.x0 - self.R0, self.x0 + self.R0)
        if side == "plus":
            return xs, (self.y1 + standoff, self.y1 + self.a)
        if side == "minus":
            return xs, (self.y1 - self.a, self.y1 - standoff)
        raise ValueError(side)

    def validate(self, gamma1: Contour, gamma2: Contour, n_samples: int = 2000, seed: int = 0):
        """Check ``S+`` lies in the shell and ``S-`` in the exterior (sampled)."""
        rng = np.random.default_rng(seed)
        u = rng.uniform(-1, 1, size=(n_samples, 2))
        plus = np.column_stack([self.x0 + self.R0 * u[:, 0], self.y1 + self.a * 0.5 * (u[:, 1] + 1)])
        minus = self.mirror(plus)
        eps = 1e-9
        plus[:, 1] = np.clip(plus[:, 1], self.y1 + eps, None)
        minus[:, 1] = np.clip(minus[:, 1], None, self.y1 - eps)
        ok_plus = gamma2.contains(plus) & ~gamma1.contains(plus)
        ok_minus = ~gamma2.contains(minus)
        return bool(ok_plus.all()), bool(ok_minus.all())
