"""Loss sweeps, blow-up classification and diagnostics.

A sweep solves one problem for a list of loss parameters and records the
shell H1 norm (plus the facet-box norms for flat-facet geometries).  The rate
classifier fits ``log ||v2||`` against ``log |eta|``; the cutoffs are
configurable because any finite sweep needs them.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.stats import linregress

from .geometry import FlatSlabRegion, make_shell
from .medium import MediumParams
from .oracle import (
    M_MAX, AnnulusConfig, AnnulusSolution, annulus_solve, ball_series_solve, critical_radii,
)
from .transmission import QuadSpec, SourceSpec, h1_norm, reconstruct_fields, solve

logger = logging.getLogger(__name__)

CSV_VERSION = "alrbem sweep v1"
ENGINES = ("bem", "annulus-series", "ball-series")


# ---------------------------------------------------------------------------
# Problem description and records
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Problem:
    """Everything an eta sweep needs besides the eta values.

    ``engine="bem"`` uses ``inner``/``outer`` shapes discretized with
    ``n_nodes`` (outer) and ``n_inner`` nodes; the series engines use the radii
    ``r_c, r_s`` and a fixed mode cap ``modes``.  ``shell_norm=False`` skips
    the shell H1 norm of BEM solves (recorded as NaN) when only the facet-box
    norms are wanted.
    """

    engine: str
    medium: MediumParams
    sources: tuple
    inner: object = None
    outer: object = None
    n_nodes: int = 256
    n_inner: int | None = None
    r_c: float | None = None
    r_s: float | None = None
    modes: int = M_MAX
    slab: FlatSlabRegion | None = None
    exclusion_radius: float | None = None
    standoff: float | None = None
    far_radius: float | None = None
    shell_norm: bool = True

    def __post_init__(self):
        if self.engine not in ENGINES:
            raise ValueError(f"engine must be one of {ENGINES}")
        if isinstance(self.sources, SourceSpec):
            object.__setattr__(self, "sources", (self.sources,))
        if self.engine == "bem" and (self.inner is None or self.outer is None):
            raise ValueError("the bem engine needs inner and outer shapes")
        if self.engine != "bem" and (self.r_c is None or self.r_s is None):
            raise ValueError("series engines need r_c and r_s")

    @property
    def source_location(self) -> np.ndarray:
        return np.asarray(self.sources[0].location, dtype=float)

    def default_exclusion(self) -> float:
        """Half the distance from the first source to the facet line."""
        if self.exclusion_radius is not None:
            return self.exclusion_radius
        return 0.5 * abs(self.source_location[1] - self.slab.y1)


@dataclass
class SweepRecord:
    eta: complex
    shell_h1: float
    slab_h1: float | None = None
    condition_estimate: float = float("nan")
    far_norm: float = float("nan")
    truncation_or_nodes: int = 0
    error: str | None = None


# ---------------------------------------------------------------------------
# Per-point solves
# ---------------------------------------------------------------------------

_CONTOURS: dict = {}
_OPS_CACHE: dict = {}


def _contours(problem: Problem):
    key = (problem.inner, problem.outer, problem.n_nodes, problem.n_inner)
    if key not in _CONTOURS:
        n_in = problem.n_inner or problem.n_nodes
        _CONTOURS[key] = make_shell(problem.inner, problem.outer, n_in, problem.n_nodes)
    return _CONTOURS[key]


def _far_circle(radius: float, n: int = 256):
    t = 2 * np.pi * np.arange(n) / n
    return radius * np.column_stack([np.cos(t), np.sin(t)])


def solve_point(problem: Problem, eta: complex) -> SweepRecord:
    """Solve one sweep point; failures are recorded, never raised."""
    try:
        med = problem.medium.with_eta(eta)
        if problem.engine == "bem":
            return _bem_point(problem, med, eta)
        if problem.engine == "annulus-series":
            return _annulus_point(problem, med, eta)
        return _ball_point(problem, med, eta)
    except Exception as exc:  # noqa: BLE001 - a failed point must not abort the sweep
        logger.warning("sweep point eta=%s failed: %s", eta, exc)
        return SweepRecord(complex(eta), float("nan"), error=f"{type(exc).__name__}: {exc}")


def _bem_point(problem, med, eta):
    g1, g2 = _contours(problem)
    sol = solve(g1, g2, med, problem.sources, cache=_OPS_CACHE)
    shell = float("nan")
    if problem.shell_norm:
        shell = h1_norm(sol, "shell", QuadSpec(standoff=problem.standoff)).value
    slab = None
    if problem.slab is not None:
        q = QuadSpec(standoff=problem.standoff, slab=problem.slab,
                     exclusion=(tuple(problem.source_location), problem.default_exclusion()))
        slab = h1_norm(sol, "slab-plus", q).value + h1_norm(sol, "slab-minus", q).value
    poly = g2.polygon()
    far_r = problem.far_radius or 2.0 * float(np.max(np.hypot(poly[:, 0], poly[:, 1])))
    far_pts = _far_circle(far_r)
    far_pts = far_pts[np.min([np.hypot(*(far_pts - s.location).T) for s in problem.sources], axis=0) > 1e-3]
    far = reconstruct_fields(sol, far_pts, "exterior")
    return SweepRecord(complex(eta), float(shell), slab, sol.condition_estimate,
                       float(np.sqrt(np.mean(np.abs(far) ** 2))), g2.n_nodes)


def _annulus_point(problem, med, eta):
    r0 = min(float(np.hypot(*s.location)) for s in problem.sources)
    cfg = AnnulusConfig(problem.r_c, problem.r_s, r0, modes=problem.modes)
    sol = annulus_solve(cfg, med, problem.sources)
    far_r = problem.far_radius or 2.0 * max(problem.r_s, r0)
    far = sol.field(_far_circle(far_r))
    return SweepRecord(complex(eta), sol.h1_norm(), None, sol.condition,
                       float(np.sqrt(np.mean(np.abs(far) ** 2))), sol.n_modes)


def _ball_point(problem, med, eta):
    src = problem.sources[0]
    sol = ball_series_solve(problem.r_c, problem.r_s, med, src, L_max=min(problem.modes, 60))
    far_r = problem.far_radius or 2.0 * max(problem.r_s, float(np.linalg.norm(src.location)))
    ct, w = np.polynomial.legendre.leggauss(32)
    pts = far_r * np.column_stack([np.sqrt(1 - ct**2), np.zeros_like(ct), ct])
    far = sol.field(pts)
    return SweepRecord(complex(eta), sol.h1_norm(), None, sol.condition,
                       float(np.sqrt(np.sum(w * np.abs(far) ** 2) / 2)), int(sol.l.max()))


def eta_sweep(problem: Problem, eta_list: Sequence[complex], workers: int | None = None) -> list[SweepRecord]:
    """Solve ``problem`` for every eta; records come back sorted by decreasing ``|eta|``.

    With ``workers > 1`` the points run in a process pool.  Every point is an
    independent pure solve, so the records do not depend on the input order.
    """
    etas = [complex(e) for e in eta_list]
    if not etas:
        raise ValueError("eta_list is empty")
    if any(e.imag < 0 for e in etas):
        raise ValueError("all eta must have Im(eta) >= 0")
    etas = sorted(etas, key=lambda e: (-abs(e), e.real, e.imag))
    if workers and workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(solve_point, [problem] * len(etas), etas))
    else:
        records = [solve_point(problem, e) for e in etas]
    return records


# ---------------------------------------------------------------------------
# Classification
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Thresholds:
    alr_slope: float = -0.45
    growth_slope: float = -0.05
    bounded_ratio: float = 1.2
    max_stderr: float = 0.1
    scaled_growth_slope: float = -0.05

    def describe(self) -> str:
        return ("slope of log-norm vs log|eta|: ALR if <= alr_slope; weak-CALR if above that "
                "but the |eta|^(1/2)-scaled norms still grow over the smallest-|eta| step; w-ALR if "
                "slope <= growth_slope or last/first >= bounded_ratio; otherwise bounded; "
                "inconclusive if the slope standard error exceeds max_stderr")


@dataclass
class Classification:
    label: str
    fitted_slope: float
    slope_stderr: float
    ratio: float = float("nan")
    classes: tuple = ()
    thresholds: Thresholds = field(default_factory=Thresholds)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["classes"] = list(self.classes)
        out["thresholds"]["rationale"] = self.thresholds.describe()
        return out


def _norms_of(records, attr):
    eta = np.array([abs(r.eta) for r in records], dtype=float)
    vals = np.array([getattr(r, attr) if getattr(r, attr) is not None else np.nan for r in records],
                    dtype=float)
    ok = np.isfinite(vals) & (vals > 0) & (eta > 0)
    order = np.argsort(-eta[ok])
    return eta[ok][order], vals[ok][order]


def classify(records: Sequence[SweepRecord], thresholds: Thresholds | None = None,
             attr: str = "shell_h1") -> Classification:
    """Rate classification of a sweep.

    Parameters
    ----------
    records : sequence of SweepRecord
        At least four usable points spanning two decades of ``|eta|``.
    thresholds : Thresholds, optional
    attr : str
        Record field to classify (``"shell_h1"`` or ``"slab_h1"``).

    Notes
    -----
    ``classes`` lists every class the data supports.  The growth classes all
    imply w-ALR; ``label`` reports ALR first, then weak-CALR, then w-ALR.
    """
    th = thresholds or Thresholds()
    eta, vals = _norms_of(records, attr)
    if len(eta) < 4 or eta.max() / eta.min() < 100 * (1 - 1e-9):
        raise ValueError("need at least 4 records spanning 2 decades of |eta|")
    fit = linregress(np.log(eta), np.log(vals))
    s, se = float(fit.slope), float(fit.stderr)
    ratio = float(vals[-1] / vals[0])
    scaled = np.sqrt(eta) * vals
    tail = np.log(scaled[-1] / scaled[-2]) / np.log(eta[-1] / eta[-2])
    classes = []
    if s <= th.alr_slope:
        classes.append("ALR")
    if tail <= th.scaled_growth_slope:
        classes.append("weak-CALR")
    if classes or s <= th.growth_slope or ratio >= th.bounded_ratio:
        classes.append("w-ALR")
    if not classes:
        classes.append("bounded")
    label = classes[0]
    if se > th.max_stderr:
        label = "inconclusive"
    return Classification(label, s, se, ratio, tuple(classes), th)


def is_strictly_increasing(records: Sequence[SweepRecord], attr: str = "slab_h1") -> bool:
    _, vals = _norms_of(records, attr)
    return bool(len(vals) == len(records) and np.all(np.diff(vals) > 0))


# ---------------------------------------------------------------------------
# Diagnostics
# ---------------------------------------------------------------------------


def _as_evaluator(obj) -> Callable:
    if callable(obj) and not hasattr(obj, "field"):
        return obj
    if hasattr(obj, "field"):
        return obj.field
    raise TypeError("expected a callable or an object with a .field method")


def cloaking_metric(sol_with, sol_without, probe_radius: float, reference=None,
                    n_probe: int = 256) -> float:
    """Relative L2 difference of two exterior fields on a probe circle.

    The difference is normalized by ``reference`` (a field evaluator, e.g. the
    free-space signature of the inclusion) or, when omitted, by the field of
    ``sol_without``.  For annulus solutions the probe must lie beyond
    ``r_#`` (matched core) or ``r_crit`` (otherwise).
    """
    for obj in (sol_with, sol_without):
        if isinstance(obj, AnnulusSolution):
            cr = critical_radii(obj.cfg.r_c, obj.cfg.r_s)
            limit = cr.r_sharp if obj.cfg.core_permittivity_matched else cr.r_crit
            if probe_radius <= limit:
                raise ValueError(f"probe radius {probe_radius} must exceed {limit:.4g}")
    pts = _far_circle(probe_radius, n_probe)
    a = _as_evaluator(sol_with)(pts)
    b = _as_evaluator(sol_without)(pts)
    ref = _as_evaluator(reference)(pts) if reference is not None else b
    den = np.linalg.norm(ref)
    num = np.linalg.norm(a - b)
    if den == 0:
        return 0.0 if num == 0 else float("inf")
    return float(num / den)


def mirror_asymmetry(evaluator, region: FlatSlabRegion, z_minus, r1: float,
                     spacing: float = 0.05, standoff: float = 0.0) -> float:
    """``sup |u(x) - u(mirror x)| / sup |u|`` over the slab minus both exclusion discs.

    Points within ``standoff`` of the facet line are skipped (for solved fields
    that refuse near-interface evaluation).
    """
    ev = _as_evaluator(evaluator)
    zm = np.asarray(z_minus, dtype=float)
    zp = region.mirror(zm)
    (x0, x1), _ = region.box("plus")
    nx = max(2, int(round((x1 - x0) / spacing)))
    ny = max(2, int(round(region.a / spacing)))
    xs = x0 + (x1 - x0) * (np.arange(nx) + 0.5) / nx
    ys = region.y1 + region.a * (np.arange(ny) + 0.5) / ny
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    upper = np.column_stack([X.ravel(), Y.ravel()])
    upper = upper[upper[:, 1] - region.y1 >= standoff]
    lower = region.mirror(upper)
    keep = (np.hypot(*(upper - zp).T) >= r1) & (np.hypot(*(upper - zm).T) >= r1) \
        & (np.hypot(*(lower - zp).T) >= r1) & (np.hypot(*(lower - zm).T) >= r1)
    upper, lower = upper[keep], lower[keep]
    if len(upper) == 0:
        raise ValueError("exclusion discs cover the whole probe grid")
    uu, ul = ev(upper), ev(lower)
    scale = max(np.abs(uu).max(), np.abs(ul).max())
    if scale == 0:
        return 0.0
    return float(np.abs(uu - ul).max() / scale)


# ---------------------------------------------------------------------------
# Output
# ---------------------------------------------------------------------------

SWEEP_COLUMNS = ("eta_re", "eta_im", "abs_eta", "shell_h1", "slab_h1", "condition_estimate",
                 "far_norm", "truncation_or_nodes", "error")


def write_sweep_csv(path, records: Sequence[SweepRecord]) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(f"# {CSV_VERSION}\n")
        w = csv.writer(fh)
        w.writerow(SWEEP_COLUMNS)
        for r in records:
            num = lambda x: repr(float(x))
            w.writerow([num(r.eta.real), num(r.eta.imag), num(abs(r.eta)), num(r.shell_h1),
                        "" if r.slab_h1 is None else num(r.slab_h1), num(r.condition_estimate),
                        num(r.far_norm), int(r.truncation_or_nodes), r.error or ""])


def read_sweep_csv(path) -> list[SweepRecord]:
    with open(path) as fh:
        head = fh.readline().strip()
        if head != f"# {CSV_VERSION}":
            raise ValueError(f"unexpected header {head!r}")
        rows = list(csv.DictReader(fh))
    return [SweepRecord(complex(float(r["eta_re"]), float(r["eta_im"])), float(r["shell_h1"]),
                        float(r["slab_h1"]) if r["slab_h1"] else None, float(r["condition_estimate"]),
                        float(r["far_norm"]), int(r["truncation_or_nodes"]), r["error"] or None)
            for r in rows]


def sweep_summary(records: Sequence[SweepRecord], cls: Classification | None) -> dict:
    return {
        "format": CSV_VERSION,
        "n_records": len(records),
        "failures": sum(r.error is not None for r in records),
        "classification": None if cls is None else cls.to_dict(),
    }


def write_summary_json(path, summary: dict) -> None:
    def default(o):
        if isinstance(o, complex):
            return [o.real, o.imag]
        if isinstance(o, np.generic):
            return o.item()
        raise TypeError(type(o))

    with open(path, "w") as fh:
        json.dump(summary, fh, indent=2, default=default)


def log_spaced(start: float, stop: float, count: int, ray: str = "imag") -> list[complex]:
    """``count`` loss values with ``|eta|`` log-spaced from ``start`` to ``stop``.

    ``ray`` is ``"imag"`` (``eta = i t``) or ``"real-negative"`` (``eta = -t``).
    """
    mags = [float(f"{m:.12g}") for m in np.logspace(math.log10(start), math.log10(stop), count)]
    if ray == "imag":
        return [1j * m for m in mags]
    if ray == "real-negative":
        return [complex(-m) for m in mags]
    raise ValueError(f"unknown ray {ray!r}")


__all__ = [
    "Problem", "SweepRecord", "Thresholds", "Classification", "solve_point", "eta_sweep",
    "classify", "is_strictly_increasing", "cloaking_metric", "mirror_asymmetry",
    "write_sweep_csv", "read_sweep_csv", "sweep_summary", "write_summary_json", "log_spaced",
]
