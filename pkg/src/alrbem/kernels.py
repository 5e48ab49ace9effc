"""Outgoing fundamental solutions of ``-(Delta + k^2)`` in two and three dimensions.

Convention: ``-(Delta + k^2) G_k = delta``.  Hence the static planar kernel is
``-(1/2 pi) ln|x|`` and ``G_k`` for small ``k`` matches it up to the additive
constant ``i/4 - (ln(k/2) + gamma)/(2 pi)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import hankel1

EULER_GAMMA = 0.5772156649015329


@dataclass
class KernelEval:
    value: np.ndarray
    gradient: np.ndarray
    hessian: np.ndarray | None = None


def radial_derivatives(dim: int, k: complex, rho):
    """``(G, G', G'')`` as functions of the distance ``rho``."""
    rho = np.asarray(rho, dtype=float)
    k = complex(k)
    if dim == 2:
        if k == 0:
            g = -np.log(rho) / (2 * np.pi)
            g1 = -1.0 / (2 * np.pi * rho)
            g2 = 1.0 / (2 * np.pi * rho**2)
        else:
            z = k * rho
            h0 = hankel1(0, z)
            h1 = hankel1(1, z)
            g = 0.25j * h0
            g1 = -0.25j * k * h1
            g2 = -0.25j * k**2 * (h0 - h1 / z)
    elif dim == 3:
        if k == 0:
            g = 1.0 / (4 * np.pi * rho)
            g1 = -g / rho
            g2 = 2 * g / rho**2
        else:
            g = np.exp(1j * k * rho) / (4 * np.pi * rho)
            a = 1j * k - 1.0 / rho
            g1 = g * a
            g2 = g * (a**2 + 1.0 / rho**2)
    else:
        raise ValueError(f"dim must be 2 or 3, got {dim}")
    return g, g1, g2


def green(dim: int, k: complex, r, hessian: bool = False) -> KernelEval:
    """Value, gradient and optionally Hessian of ``G_k`` at offsets ``r``.

    ``r`` has shape ``(..., dim)``; the point ``r = 0`` is rejected.
    """
    if complex(k).imag < 0:
        raise ValueError("Im k must be >= 0 (outgoing branch)")
    r = np.asarray(r, dtype=float)
    if r.shape[-1] != dim:
        raise ValueError(f"offset vectors must have length {dim}")
    rho = np.linalg.norm(r, axis=-1)
    if np.any(rho == 0):
        raise ValueError("G_k is singular at r = 0")
    g, g1, g2 = radial_derivatives(dim, k, rho)
    rhat = r / rho[..., None]
    grad = g1[..., None] * rhat
    hess = None
    if hessian:
        outer = rhat[..., :, None] * rhat[..., None, :]
        eye = np.eye(dim)
        hess = g2[..., None, None] * outer + (g1 / rho)[..., None, None] * (eye - outer)
    return KernelEval(g, grad, hess)


def radiation_check(dim: int, k: complex, direction, radii) -> np.ndarray:
    """Scaled Sommerfeld residuals ``|(d_r - ik) G| * rho**((dim-1)/2)``.

    For ``k = 0`` in three dimensions the decay ``|G| rho**(dim-2)`` is
    returned instead; the planar static kernel has no decay to check.
    """
    direction = np.asarray(direction, dtype=float)
    direction = direction / np.linalg.norm(direction)
    radii = np.asarray(radii, dtype=float)
    pts = radii[:, None] * direction[None, :]
    ev = green(dim, k, pts)
    if complex(k) == 0:
        if dim == 2:
            raise ValueError("no decay condition for the planar static kernel")
        return np.abs(ev.value) * radii ** (dim - 2)
    dr = np.einsum("...i,i->...", ev.gradient, direction)
    return np.abs(dr - 1j * k * ev.value) * radii ** ((dim - 1) / 2)
