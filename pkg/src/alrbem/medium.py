"""Material and frequency parameters for the negative-shell transmission problem.

The shell Omega \\ D carries the coefficient ``a_i = a_e (-1 + eta)`` while the
core and the exterior carry ``a_e``.  Everything else (wavenumbers, flux ratio
``tau``) is derived on demand from the stored primitives.
"""

from __future__ import annotations

import cmath
import logging
import math
from dataclasses import dataclass

logger = logging.getLogger(__name__)

MU0_SI = 4e-7 * math.pi
EPS0_SI = 8.8541878128e-12

TAU_CONVENTIONS = ("inverse", "linear")


def upper_sqrt(z: complex) -> complex:
    """Square root on the branch ``Im >= 0``.

    Positive reals map to the positive real root; negative reals to ``+i|z|``.
    """
    w = cmath.sqrt(complex(z))
    if w.imag < 0 or (w.imag == 0 and w.real < 0):
        w = -w
    return w


@dataclass(frozen=True)
class MediumParams:
    """Primitives of the divergence-form problem.

    Parameters
    ----------
    omega : float
        Angular frequency, ``omega >= 0``.
    mu0 : float
        Permeability constant.  In the TE mapping this slot carries
        ``eps0 * mu0`` so that ``omega**2 * mu0 = k0**2``.
    a_e : float
        Coefficient in the core and the exterior (> 0).
    eta : complex
        Loss parameter, ``Im eta >= 0``.
    b : complex
        Sign factor of the zeroth-order term in the shell (+1 or -1 in the
        physical cases).
    dim : int
        Spatial dimension, 2 or 3.
    tau_convention : str
        ``"inverse"`` gives ``tau = 1/(-1 + eta)``; ``"linear"`` gives
        ``tau = -1 + eta``.  Both tend to -1 as eta -> 0.
    """

    omega: float = 1.0
    mu0: float = 1.0
    a_e: float = 1.0
    eta: complex = 0.0
    b: complex = -1.0
    dim: int = 2
    tau_convention: str = "inverse"

    def __post_init__(self):
        if self.omega < 0:
            raise ValueError(f"omega must be >= 0, got {self.omega}")
        if self.mu0 <= 0 or self.a_e <= 0:
            raise ValueError("mu0 and a_e must be positive")
        if complex(self.eta).imag < 0:
            raise ValueError(f"Im(eta) must be >= 0 for a passive shell, got {self.eta}")
        if self.dim not in (2, 3):
            raise ValueError(f"dim must be 2 or 3, got {self.dim}")
        if self.tau_convention not in TAU_CONVENTIONS:
            raise ValueError(f"unknown tau convention {self.tau_convention!r}")
        if self.tau_convention == "inverse" and complex(self.eta) == 1:
            raise ValueError("eta = 1 makes the shell coefficient vanish")
        if complex(self.b).imag != 0:
            logger.warning("complex b=%s: uniqueness is not guaranteed", self.b)

    @property
    def tau(self) -> complex:
        eta = complex(self.eta)
        if self.tau_convention == "linear":
            return -1.0 + eta
        if eta == 0:
            return complex(-1.0)
        return 1.0 / (-1.0 + eta)

    @property
    def a_i(self) -> complex:
        return self.a_e / self.tau

    @property
    def k_e_squared(self) -> complex:
        return complex(self.omega**2 * self.mu0 / self.a_e)

    @property
    def k_i_squared(self) -> complex:
        return self.omega**2 * self.mu0 * complex(self.b) / self.a_i

    @property
    def k_i0_squared(self) -> complex:
        """``k_i**2`` at eta = 0, i.e. ``-omega**2 mu0 b / a_e``."""
        return -self.omega**2 * self.mu0 * complex(self.b) / self.a_e

    def with_eta(self, eta: complex) -> "MediumParams":
        return MediumParams(self.omega, self.mu0, self.a_e, eta, self.b, self.dim,
                            self.tau_convention)


def derive_wavenumbers(params: MediumParams) -> tuple[complex, complex, complex]:
    """Return ``(k_e, k_i, tau)`` with both roots on the ``Im >= 0`` branch."""
    k_e = upper_sqrt(params.k_e_squared)
    k_i = upper_sqrt(params.k_i_squared)
    return k_e, k_i, params.tau


@dataclass(frozen=True)
class DrudeParams:
    """Drude fit ``eps(lam) = eps_inf - (lam/lam_p)**2 / (1 + i lam/lam_d)``.

    Lengths share one unit (metres by default).  The default damping wavelength
    is 30 um: with 30 nm the model gives roughly 5.45 + 0.58i at 331 nm instead
    of the quoted -1 + 0.07i.
    """

    eps_inf: float = 5.5
    lambda_p: float = 130e-9
    lambda_d: float = 30e-6

    def __post_init__(self):
        if min(self.eps_inf, self.lambda_p, self.lambda_d) <= 0:
            raise ValueError("Drude parameters must be strictly positive")


SILVER = DrudeParams()

DAMPING_NOTE = ("silver Drude fit uses lambda_d = 30 um; the frequently quoted "
                "30 nm does not give eps_r = -1 + 0.07i at 331 nm")


def drude_permittivity(lam: float, p: DrudeParams = SILVER) -> complex:
    """Relative permittivity of the Drude model at free-space wavelength ``lam``."""
    if lam <= 0:
        raise ValueError("wavelength must be positive")
    if p == SILVER:
        logger.info(DAMPING_NOTE)
    if math.isinf(p.lambda_d):
        return complex(p.eps_inf - (lam / p.lambda_p) ** 2)
    return p.eps_inf - (lam / p.lambda_p) ** 2 / (1 + 1j * lam / p.lambda_d)


def te_reduce(eps_r: complex, mu_r: complex, omega: float, units: str = "nondimensional"):
    """Map TE Maxwell data onto ``div(a grad H) + coeff H = 0``.

    Returns ``(a, coeff)`` with ``a = 1/eps_r`` and ``coeff = mu_r k0**2``.
    """
    if eps_r == 0:
        raise ValueError("eps_r = 0 has no TE reduction")
    if units == "si":
        k0_sq = omega**2 * EPS0_SI * MU0_SI
    elif units == "nondimensional":
        k0_sq = omega**2
    else:
        raise ValueError(f"unknown unit system {units!r}")
    return 1.0 / complex(eps_r), complex(mu_r) * k0_sq
