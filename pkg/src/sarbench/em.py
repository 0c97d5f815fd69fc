"""Electromagnetic primitives for the lossy tissue-equivalent liquid.

Conventions: time dependence e^{-iwt}, so a passive medium has Im(k) >= 0
and plane waves decay along their propagation direction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

C0 = 299_792_458.0  # m/s
EPS0 = 8.8541878128e-12  # F/m


@dataclass(frozen=True)
class MediumProperties:
    """Tissue-equivalent liquid at a single frequency (non-magnetic)."""

    frequency: float  # Hz
    relative_permittivity: float
    conductivity: float  # S/m
    density: float = 1000.0  # kg/m^3

    def __post_init__(self):
        if self.frequency <= 0:
            raise ValueError("frequency must be positive")
        if self.relative_permittivity < 1:
            raise ValueError("relative permittivity must be >= 1")
        if self.conductivity < 0:
            raise ValueError("conductivity must be >= 0")
        if self.density <= 0:
            raise ValueError("density must be positive")


def complex_wavenumber(medium: MediumProperties) -> complex:
    """Complex wavenumber k of the liquid, principal branch with Im(k) >= 0.

    k = (2*pi*f/c0) * sqrt(eps_r + i*sigma/(2*pi*f*eps0)), mu_r = 1.
    """
    omega = 2.0 * np.pi * medium.frequency
    eps_c = medium.relative_permittivity + 1j * medium.conductivity / (omega * EPS0)
    k = omega / C0 * np.sqrt(eps_c)
    if k.imag < 0:
        k = -k
    return complex(k)


def skin_depth(k: complex) -> float:
    """Distance over which a plane wave's amplitude decays by 1/e: 1/Im(k)."""
    if k.imag <= 0:
        raise ValueError("infinite skin depth: medium is lossless (Im(k) = 0)")
    return 1.0 / k.imag


def kz_component(kx, ky, k: complex):
    """z-component of the wave vector: kz^2 = k^2 - kx^2 - ky^2, Im(kz) >= 0.

    Accepts scalars or arrays for kx, ky. Ties (Im(kz) = 0) resolve to
    Re(kz) >= 0.
    """
    kz2 = k * k - np.asarray(kx, dtype=np.float64) ** 2 - np.asarray(ky, dtype=np.float64) ** 2
    kz = np.sqrt(np.asarray(kz2, dtype=np.complex128))
    flip = kz.imag < 0
    kz = np.where(flip, -kz, kz)
    # principal sqrt already gives Re >= 0 when Im == 0
    if np.ndim(kx) == 0 and np.ndim(ky) == 0:
        return complex(kz)
    return kz
