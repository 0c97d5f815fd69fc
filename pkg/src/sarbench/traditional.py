"""Simulated traditional single-probe measuring system.

The probe measures only the field amplitude |E| (isotropic, no tip
averaging). Workflow: coarse area scan on a plane at a fixed gap below the
phantom surface to locate local maxima, then a 3D zoom scan around each
maximum, separable interpolation to a fine grid with extrapolation of the
unmeasured slab between the first scan plane and the surface, and finally
the peak spatial-average SAR search on the refined amplitude grid.

Scan rules (f in GHz, lengths in mm):
    area spacing   <= 20 if f < 3 else 60/f
    probe gap      <= 5 if f < 3 else skin_depth * ln(2) / 2
    zoom spacing   <= min(24/f, 8)
    zoom size      >= 30 if f < 3 else 22
The constructed instrument is worst-case compliant: it uses the maximum
allowed spacings and gap and the minimum scan size. The f = 3 GHz boundary
takes the high-frequency branch. Vertical zoom spacing reuses the
horizontal value.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.interpolate import CubicSpline, interp1d

from . import em, sar, sources
from .em import MediumProperties
from .fields import FieldGrid, GridSpec

TARGET_RESOLUTION = 0.5e-3  # default refined-grid spacing, m


@dataclass(frozen=True)
class ScanConfig:
    area_spacing: float  # m
    probe_surface_gap: float  # m
    zoom_spacing: float  # m
    zoom_size: float  # m
    derived_from: tuple[float, float]  # (frequency Hz, skin depth m)


@dataclass(frozen=True)
class ScanResult:
    """Amplitude-only samples on a rectilinear scan block."""

    axes: tuple[np.ndarray, np.ndarray, np.ndarray]  # x, y, z nodes (m)
    amplitudes: np.ndarray  # (nx, ny, nz), V/m

    def __post_init__(self):
        if self.amplitudes.shape != tuple(len(a) for a in self.axes):
            raise ValueError("amplitude block does not match the scan axes")
        if np.any(self.amplitudes < 0):
            raise ValueError("amplitudes must be non-negative")

    def positions(self) -> np.ndarray:
        """All scan positions as (P, 3)."""
        xg, yg, zg = np.meshgrid(*self.axes, indexing="ij")
        return np.column_stack([xg.ravel(), yg.ravel(), zg.ravel()])


def scan_config(medium: MediumProperties) -> ScanConfig:
    f_ghz = medium.frequency / 1e9
    depth = em.skin_depth(em.complex_wavenumber(medium)) if medium.conductivity > 0 else np.inf
    if f_ghz < 3.0:
        area = 20e-3
        gap = 5e-3
        size = 30e-3
    else:
        area = 60e-3 / f_ghz
        gap = depth * np.log(2.0) / 2.0
        size = 22e-3
    zoom = min(24e-3 / f_ghz, 8e-3)
    return ScanConfig(
        area_spacing=area,
        probe_surface_gap=gap,
        zoom_spacing=zoom,
        zoom_size=size,
        derived_from=(medium.frequency, depth),
    )


def _probe_amplitude(scenario: sources.Scenario, points: np.ndarray) -> np.ndarray:
    field = sources.dipole_field(points, scenario)
    return np.sqrt(np.sum(np.abs(field) ** 2, axis=-1))


def _plateau_maxima(values: np.ndarray) -> list[tuple[int, int]]:
    """Grid nodes strictly above their 8 neighbors; flat plateaus that
    dominate their surroundings report one representative node each
    (lexicographically smallest)."""
    nx, ny = values.shape
    visited = np.zeros_like(values, dtype=bool)
    maxima: list[tuple[int, int]] = []
    for i in range(nx):
        for j in range(ny):
            if visited[i, j]:
                continue
            v = values[i, j]
            # flood the plateau of equal values
            stack = [(i, j)]
            visited[i, j] = True
            plateau = []
            dominated = False
            while stack:
                a, b = stack.pop()
                plateau.append((a, b))
                for da in (-1, 0, 1):
                    for db in (-1, 0, 1):
                        if da == 0 and db == 0:
                            continue
                        na, nb = a + da, b + db
                        if not (0 <= na < nx and 0 <= nb < ny):
                            continue
                        if values[na, nb] == v:
                            if not visited[na, nb]:
                                visited[na, nb] = True
                                stack.append((na, nb))
                        elif values[na, nb] > v:
                            dominated = True
            if not dominated:
                maxima.append(min(plateau))
    return sorted(maxima)


def _centered_axis(extent: float, spacing: float) -> np.ndarray:
    n = int(np.ceil(2.0 * extent / spacing - 1e-9)) + 1
    return (np.arange(n) - (n - 1) / 2.0) * spacing


def area_scan(
    scenario: sources.Scenario, config: ScanConfig
) -> tuple[ScanResult, list[tuple[float, float]]]:
    """Coarse 2D scan at the probe gap below the surface; returns the scan
    and the lateral coordinates of its local amplitude maxima."""
    geom = scenario.geometry
    ax = _centered_axis(geom.lateral_extent, config.area_spacing)
    z = geom.surface_z - config.probe_surface_gap
    xg, yg = np.meshgrid(ax, ax, indexing="ij")
    pts = np.column_stack([xg.ravel(), yg.ravel(), np.full(xg.size, z)])
    amp = _probe_amplitude(scenario, pts).reshape(xg.shape)
    scan = ScanResult(axes=(ax, ax, np.array([z])), amplitudes=amp[:, :, None])
    maxima = [(float(ax[i]), float(ax[j])) for i, j in _plateau_maxima(amp)]
    return scan, maxima


def zoom_scan(
    scenario: sources.Scenario, center: tuple[float, float], config: ScanConfig
) -> ScanResult:
    """3D scan of a zoom cube centered laterally on an area-scan maximum.

    The first plane sits at the probe gap below the surface; planes continue
    downward at the zoom spacing and are clipped to the liquid region.
    """
    geom = scenario.geometry
    if abs(center[0]) > geom.lateral_extent or abs(center[1]) > geom.lateral_extent:
        raise ValueError("zoom center lies outside the scan aperture")
    n = int(np.ceil(config.zoom_size / config.zoom_spacing - 1e-9)) + 1
    lateral = (np.arange(n) - (n - 1) / 2.0) * config.zoom_spacing
    xs = center[0] + lateral
    ys = center[1] + lateral
    z_top = geom.surface_z - config.probe_surface_gap
    zs = z_top - config.zoom_spacing * np.arange(n)
    zs = np.sort(zs[zs >= geom.volume_z_range[0] - 1e-12])
    xg, yg, zg = np.meshgrid(xs, ys, zs, indexing="ij")
    pts = np.column_stack([xg.ravel(), yg.ravel(), zg.ravel()])
    amp = _probe_amplitude(scenario, pts).reshape(xg.shape)
    return ScanResult(axes=(xs, ys, zs), amplitudes=amp)


def _axis_interpolator(method: str, nodes: np.ndarray, values: np.ndarray, axis: int):
    if method == "linear":
        if len(nodes) < 2:
            raise ValueError("linear interpolation needs at least 2 nodes per axis")
        return interp1d(nodes, values, axis=axis, kind="linear", fill_value="extrapolate")
    if method == "cubic_spline":
        if len(nodes) < 4:
            raise ValueError("cubic spline interpolation needs at least 4 nodes per axis")
        return CubicSpline(nodes, values, axis=axis, bc_type="natural", extrapolate=True)
    raise ValueError(f"unknown interpolation method {method!r}")


def interpolate_refine(
    scan: ScanResult,
    method: str,
    target_resolution: float = TARGET_RESOLUTION,
    surface_z: float | None = None,
) -> FieldGrid:
    """Separable per-axis refinement of a zoom block to a fine grid.

    The z axis is extended up to the phantom surface by extrapolating with
    the same per-axis method (the slab between the first measured plane and
    the surface cannot be scanned). Amplitudes are clamped at zero.
    """
    h = target_resolution
    xs, ys, zs = scan.axes
    fine_x = xs[0] + h * np.arange(int(np.floor((xs[-1] - xs[0]) / h + 1e-9)) + 1)
    fine_y = ys[0] + h * np.arange(int(np.floor((ys[-1] - ys[0]) / h + 1e-9)) + 1)
    z_hi = surface_z if surface_z is not None else zs[-1]
    n_z = int(np.floor((z_hi - zs[0]) / h + 1e-9)) + 1
    fine_z = z_hi - h * np.arange(n_z)[::-1]  # ascending, node at the surface

    a = _axis_interpolator(method, xs, scan.amplitudes, 0)(fine_x)
    a = _axis_interpolator(method, ys, a, 1)(fine_y)
    a = _axis_interpolator(method, zs, a, 2)(fine_z)
    a = np.clip(a, 0.0, None)
    spec = GridSpec(
        origin=(fine_x[0], fine_y[0], fine_z[0]),
        spacing=(h, h, h),
        dims=(len(fine_x), len(fine_y), len(fine_z)),
    )
    return FieldGrid(spec, a, amplitude_only=True)


def traditional_estimate(
    scenario: sources.Scenario,
    method: str,
    target_resolution: float = TARGET_RESOLUTION,
) -> tuple[sar.SarEstimate, sar.SarEstimate]:
    """Full traditional pipeline: area scan, zoom scans, refinement, peak SAR."""
    config = scan_config(scenario.medium)
    _, maxima = area_scan(scenario, config)
    if not maxima:
        raise ValueError("area scan found no local maxima (degenerate field)")
    best: dict[float, sar.SarEstimate] = {}
    for center in maxima:
        scan = zoom_scan(scenario, center, config)
        grid = interpolate_refine(
            scan, method, target_resolution, surface_z=scenario.geometry.surface_z
        )
        for mass in (1.0, 10.0):
            est = sar.peak_spatial_average_sar(grid, mass, scenario.medium)
            if mass not in best or est.value > best[mass].value:
                best[mass] = est
    return best[1.0], best[10.0]


def scan_result_to_csv(scan: ScanResult, path: str | Path) -> None:
    pts = scan.positions()
    amps = scan.amplitudes.ravel()
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["x_m", "y_m", "z_m", "amplitude_v_per_m"])
        for p, a in zip(pts, amps):
            writer.writerow([repr(p[0]), repr(p[1]), repr(p[2]), repr(a)])
