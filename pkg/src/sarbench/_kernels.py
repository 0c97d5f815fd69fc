"""Numba kernels for the dipole-grid field sums.

The closed-form field of a point dipole with moment p at distance R along
unit vector n is

    E = g(R) * [ (k^2 + ik/R - 1/R^2) p + (-k^2 - 3ik/R + 3/R^2) (n.p) n ],
    g(R) = exp(ikR) / (4 pi R),

i.e. the dyadic operator (k^2 I + grad grad) applied to g p.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

INV_4PI = 1.0 / (4.0 * math.pi)


@njit(cache=True, fastmath=True)
def dipole_sum(points, dip_pos, mom_re, mom_im, k_re, k_im, out):
    """Accumulate the dipole-grid field at arbitrary points.

    points: (P, 3) float64; dip_pos: (D, 3) float64;
    mom_re/mom_im: (D, 3) float64; out: (P, 3) complex128 (overwritten).
    Returns the smallest point-dipole distance encountered (singularity guard
    is enforced by the caller).
    """
    k2re = k_re * k_re - k_im * k_im
    k2im = 2.0 * k_re * k_im
    min_r = 1.0e300
    for p in range(points.shape[0]):
        x = points[p, 0]
        y = points[p, 1]
        z = points[p, 2]
        exr = 0.0
        exi = 0.0
        eyr = 0.0
        eyi = 0.0
        ezr = 0.0
        ezi = 0.0
        for d in range(dip_pos.shape[0]):
            dx = x - dip_pos[d, 0]
            dy = y - dip_pos[d, 1]
            dz = z - dip_pos[d, 2]
            r = math.sqrt(dx * dx + dy * dy + dz * dz)
            if r < min_r:
                min_r = r
            if r == 0.0:
                continue  # caller raises on guard violation
            inv_r = 1.0 / r
            nx = dx * inv_r
            ny = dy * inv_r
            nz = dz * inv_r
            amp = math.exp(-k_im * r) * inv_r * INV_4PI
            ph = k_re * r
            gre = amp * math.cos(ph)
            gim = amp * math.sin(ph)
            inv_r2 = inv_r * inv_r
            are = k2re - k_im * inv_r - inv_r2
            aim = k2im + k_re * inv_r
            bre = -k2re + 3.0 * k_im * inv_r + 3.0 * inv_r2
            bim = -k2im - 3.0 * k_re * inv_r
            agr = are * gre - aim * gim
            agi = are * gim + aim * gre
            bgr = bre * gre - bim * gim
            bgi = bre * gim + bim * gre
            pxr = mom_re[d, 0]
            pxi = mom_im[d, 0]
            pyr = mom_re[d, 1]
            pyi = mom_im[d, 1]
            pzr = mom_re[d, 2]
            pzi = mom_im[d, 2]
            ndr = nx * pxr + ny * pyr + nz * pzr
            ndi = nx * pxi + ny * pyi + nz * pzi
            bnr = bgr * ndr - bgi * ndi
            bni = bgr * ndi + bgi * ndr
            exr += agr * pxr - agi * pxi + bnr * nx
            exi += agr * pxi + agi * pxr + bni * nx
            eyr += agr * pyr - agi * pyi + bnr * ny
            eyi += agr * pyi + agi * pyr + bni * ny
            ezr += agr * pzr - agi * pzi + bnr * nz
            ezi += agr * pzi + agi * pzr + bni * nz
        out[p, 0] = complex(exr, exi)
        out[p, 1] = complex(eyr, eyi)
        out[p, 2] = complex(ezr, ezi)
    return min_r


@njit(cache=True, fastmath=True)
def dipole_kernel_tensor(off_x, off_y, dz, k_re, k_im, out):
    """Tabulate the six independent dipole-kernel components on an offset grid.

    off_x: (Lx,), off_y: (Ly,) lateral offsets (m); dz: scalar offset (m);
    out: (6, Lx, Ly) complex128 ordered (xx, xy, xz, yy, yz, zz).
    """
    k2re = k_re * k_re - k_im * k_im
    k2im = 2.0 * k_re * k_im
    dz2 = dz * dz
    for i in range(off_x.shape[0]):
        dx = off_x[i]
        dx2 = dx * dx
        for j in range(off_y.shape[0]):
            dy = off_y[j]
            r = math.sqrt(dx2 + dy * dy + dz2)
            inv_r = 1.0 / r
            nx = dx * inv_r
            ny = dy * inv_r
            nz = dz * inv_r
            amp = math.exp(-k_im * r) * inv_r * INV_4PI
            ph = k_re * r
            gre = amp * math.cos(ph)
            gim = amp * math.sin(ph)
            inv_r2 = inv_r * inv_r
            are = k2re - k_im * inv_r - inv_r2
            aim = k2im + k_re * inv_r
            bre = -k2re + 3.0 * k_im * inv_r + 3.0 * inv_r2
            bim = -k2im - 3.0 * k_re * inv_r
            agr = are * gre - aim * gim
            agi = are * gim + aim * gre
            bgr = bre * gre - bim * gim
            bgi = bre * gim + bim * gre
            out[0, i, j] = complex(agr + bgr * nx * nx, agi + bgi * nx * nx)
            out[1, i, j] = complex(bgr * nx * ny, bgi * nx * ny)
            out[2, i, j] = complex(bgr * nx * nz, bgi * nx * nz)
            out[3, i, j] = complex(agr + bgr * ny * ny, agi + bgi * ny * ny)
            out[4, i, j] = complex(bgr * ny * nz, bgi * ny * nz)
            out[5, i, j] = complex(agr + bgr * nz * nz, agi + bgi * nz * nz)
