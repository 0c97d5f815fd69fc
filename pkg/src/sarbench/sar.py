"""Pointwise and cube-averaged SAR, and the peak spatial-average search.

SAR(cube) = (1/V) * integral over the cube of |E|^2 sigma / rho, evaluated
by the 3D trapezoidal rule on lattice nodes. Field values are rms-valued
phasors, so no extra factor of 1/2 appears. The liquid is homogeneous:
sigma and rho are constants of the medium.

Cube sides: 10 mm for 1 g and 21.5 mm for 10 g at rho = 1000 kg/m^3. On a
grid the side is snapped to the nearest node multiple of the spacing (ties
round up); the oracle therefore evaluates 10 g cubes on its internal 0.5 mm
lattice, where 21.5 mm is exact.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .em import MediumProperties
from .fields import FieldGrid

SIDE_1G = 0.010  # m
SIDE_10G = 0.0215  # m
_ORACLE_STEP = 0.5e-3  # internal oracle lattice spacing, m


@dataclass(frozen=True)
class SarCube:
    side: float  # m
    corner: tuple[float, float, float]  # m


@dataclass(frozen=True)
class SarEstimate:
    value: float  # W/kg
    cube: SarCube
    mass: float  # g


def cube_side_for_mass(mass: float) -> float:
    if mass == 1.0:
        return SIDE_1G
    if mass == 10.0:
        return SIDE_10G
    raise ValueError(f"averaging mass must be 1 or 10 g, got {mass}")


def pointwise_sar(e_rms_sq: float, sigma: float, rho: float):
    """Local SAR |E|^2 * sigma / rho; accepts scalars or arrays."""
    if sigma < 0 or np.any(np.asarray(e_rms_sq) < 0):
        raise ValueError("inputs must be non-negative")
    if rho <= 0:
        raise ValueError("density must be positive")
    return e_rms_sq * sigma / rho


def _trapezoid_weights(n: int) -> np.ndarray:
    w = np.ones(n)
    w[0] = 0.5
    w[-1] = 0.5
    return w


def average_sar_cube(grid: FieldGrid, cube: SarCube, medium: MediumProperties) -> float:
    """Trapezoidal volume average of pointwise SAR over a node-aligned cube."""
    e2 = grid.e_rms_sq()
    start = []
    nodes = []
    for ax in range(3):
        h = grid.spacing[ax]
        q = (cube.corner[ax] - grid.origin[ax]) / h
        i0 = round(q)
        if abs(q - i0) > 1e-9:
            raise ValueError("cube corner is not aligned to grid nodes")
        m = cube.side / h
        mi = round(m)
        if abs(m - mi) > 1e-9 or mi < 1:
            raise ValueError("cube side is not a node multiple of the grid spacing")
        if i0 < 0 or i0 + mi >= grid.dims[ax]:
            raise ValueError("cube exceeds grid bounds")
        start.append(int(i0))
        nodes.append(int(mi) + 1)
    block = e2[
        start[0] : start[0] + nodes[0],
        start[1] : start[1] + nodes[1],
        start[2] : start[2] + nodes[2],
    ]
    wx = _trapezoid_weights(nodes[0])
    wy = _trapezoid_weights(nodes[1])
    wz = _trapezoid_weights(nodes[2])
    total = np.einsum("ijk,i,j,k->", block, wx, wy, wz)
    intervals = (nodes[0] - 1) * (nodes[1] - 1) * (nodes[2] - 1)
    return pointwise_sar(total / intervals, medium.conductivity, medium.density)


def _sliding_trapezoid_mean(e2: np.ndarray, windows: tuple[int, int, int]) -> np.ndarray:
    """Mean of the trapezoid rule over every cube position.

    windows[i] is the number of intervals of the cube along axis i. Returns
    an array of shape dims - windows.
    """
    a = e2
    for ax, m in enumerate(windows):
        c = np.cumsum(a, axis=ax)
        c = np.concatenate([np.zeros_like(np.take(c, [0], axis=ax)), c], axis=ax)
        n = a.shape[ax]
        full = np.take(c, range(m + 1, n + 1), axis=ax) - np.take(c, range(0, n - m), axis=ax)
        ends = np.take(a, range(0, n - m), axis=ax) + np.take(a, range(m, n), axis=ax)
        a = (full - 0.5 * ends) / m
    return a


def _snap_side(side: float, spacing: float) -> int:
    m = int(np.floor(side / spacing + 0.5))  # ties round up
    return max(m, 1)


def search_peak_cube(
    e2: np.ndarray,
    origin: tuple[float, float, float],
    h: float,
    side: float,
    mass: float,
    medium: MediumProperties,
) -> SarEstimate:
    """Exhaustive node-aligned cube search on an |E|^2 lattice.

    The cube side snaps to the nearest node multiple of h; ties in the peak
    value break toward the lexicographically smallest corner in (x, y, z).
    """
    m = _snap_side(side, h)
    if any(d <= m for d in e2.shape):
        raise ValueError(
            f"grid extent is smaller than the {side * 1e3:.1f} mm averaging cube"
        )
    averages = _sliding_trapezoid_mean(e2, (m, m, m))
    flat = int(np.argmax(averages))  # first occurrence = lexicographic (x, y, z)
    idx = np.unravel_index(flat, averages.shape)
    corner = tuple(origin[ax] + h * idx[ax] for ax in range(3))
    value = pointwise_sar(float(averages[idx]), medium.conductivity, medium.density)
    return SarEstimate(value=value, cube=SarCube(side=m * h, corner=corner), mass=mass)


def peak_spatial_average_sar(
    grid: FieldGrid, mass: float, medium: MediumProperties
) -> SarEstimate:
    """Exhaustive node-aligned cube search for the peak spatial-average SAR."""
    side = cube_side_for_mass(mass)
    spacing = grid.spacing
    if not (np.isclose(spacing[0], spacing[1]) and np.isclose(spacing[0], spacing[2])):
        raise ValueError("peak search requires an isotropic grid spacing")
    return search_peak_cube(grid.e_rms_sq(), grid.origin, spacing[0], side, mass, medium)


def oracle_peak_sar(scenario, resolution: float = 1e-3) -> tuple[SarEstimate, SarEstimate]:
    """Ground-truth peak SAR from the analytic field on the fine volume grid.

    The field is evaluated exactly on an internal 0.5 mm lattice spanning
    +/-100 mm laterally and the full liquid depth. The 1 g search runs on
    the sub-lattice at the requested resolution; the 10 g search runs on the
    0.5 mm lattice itself so the 21.5 mm cube lands exactly on nodes.
    """
    from . import sources

    if resolution > 2e-3 + 1e-12:
        raise ValueError("oracle resolution must be <= 2 mm")
    stride_f = resolution / _ORACLE_STEP
    stride = round(stride_f)
    if abs(stride_f - stride) > 1e-9 or stride < 1:
        raise ValueError("oracle resolution must be a multiple of 0.5 mm")

    geom = scenario.geometry
    z0, z1 = geom.volume_z_range
    nz = round((z1 - z0) / _ORACLE_STEP) + 1
    z_values = z0 + _ORACLE_STEP * np.arange(nz)
    e2 = sources.scenario_e2_lattice(scenario, z_values)
    half = (e2.shape[0] - 1) // 2
    origin = (-half * _ORACLE_STEP, -half * _ORACLE_STEP, z0)

    # 1 g on the requested-resolution subgrid; 10 g on the full 0.5 mm
    # lattice, where the 21.5 mm side is exactly 43 intervals
    est1 = search_peak_cube(
        e2[::stride, ::stride, ::stride],
        origin,
        stride * _ORACLE_STEP,
        SIDE_1G,
        1.0,
        scenario.medium,
    )
    est10 = search_peak_cube(e2, origin, _ORACLE_STEP, SIDE_10G, 10.0, scenario.medium)
    return est1, est10
