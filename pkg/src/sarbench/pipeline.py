"""High-level measurement pipelines shared by the CLI and the test suite.

The fast system measures (E_x, E_y) on the probe plane, reconstructs the
field over the compliance volume by plane-wave expansion and feeds |E|^2 to
the peak-SAR search. Search conventions match the oracle: 1 g cubes on a
1 mm sub-lattice, 10 g cubes on the 0.5 mm lattice where the 21.5 mm side is
exact.
"""

from __future__ import annotations

import numpy as np

from . import pwe, sar, sources
from .fields import GridSpec
from .sar import SarEstimate

FINE_STEP = 0.5e-3  # measuring-system fine-grid spacing, m


def standard_volume_spec(geometry: sources.Geometry, resolution: float = FINE_STEP) -> GridSpec:
    """The compliance volume: +/-lateral_extent, full liquid depth."""
    half = geometry.lateral_extent
    n_lat = round(2 * half / resolution) + 1
    z0, z1 = geometry.volume_z_range
    nz = round((z1 - z0) / resolution) + 1
    return GridSpec(
        origin=(-half, -half, z0),
        spacing=(resolution, resolution, resolution),
        dims=(n_lat, n_lat, nz),
    )


def peak_window_spec(
    geometry: sources.Geometry,
    corner: tuple[float, float, float],
    side: float,
    resolution: float = 1e-3,
    margin: float = 0.012,
) -> GridSpec:
    """A volume window around a known peak cube, clipped to the compliance volume.

    Used to keep per-trial Monte Carlo reconstructions cheap: restricting the
    lateral output points of the spectral evaluation is an exact restriction,
    not an approximation, so the search is only narrowed spatially.
    """
    z0, z1 = geometry.volume_z_range
    half = geometry.lateral_extent
    lo = []
    hi = []
    for ax in range(2):
        lo.append(max(-half, corner[ax] - margin))
        hi.append(min(half, corner[ax] + side + margin))
    lo.append(max(z0, corner[2] - margin))
    hi.append(z1)
    origin = []
    dims = []
    for ax in range(3):
        start = np.ceil(lo[ax] / resolution - 1e-9) * resolution
        n = int(np.floor((hi[ax] - start) / resolution + 1e-9)) + 1
        origin.append(start)
        dims.append(n)
    return GridSpec(origin=tuple(origin), spacing=(resolution,) * 3, dims=tuple(dims))


def _search_both_masses(
    e2: np.ndarray, spec: GridSpec, medium, one_g_stride: int
) -> tuple[SarEstimate, SarEstimate]:
    h = spec.spacing[0]
    origin = spec.origin
    sub = e2[::one_g_stride, ::one_g_stride, ::one_g_stride]
    est1 = sar.search_peak_cube(
        sub, origin, h * one_g_stride, sar.SIDE_1G, 1.0, medium
    )
    est10 = sar.search_peak_cube(e2, origin, h, sar.SIDE_10G, 10.0, medium)
    return est1, est10


def fast_system_estimate(
    scenario: sources.Scenario,
    delta: float,
    samples: pwe.PlanarSamples | None = None,
    counts: tuple[int, int] | None = None,
) -> tuple[SarEstimate, SarEstimate]:
    """Probe-array measurement, PWE reconstruction and peak-SAR search."""
    if samples is None:
        samples = sources.ideal_measurement(scenario)
    k = scenario.k
    max_freqs = (2 * np.pi / samples.pitch[0], 2 * np.pi / samples.pitch[1])
    policy = pwe.TruncationPolicy.for_reconstruction(delta, k, max_freqs)
    spec = standard_volume_spec(scenario.geometry, FINE_STEP)
    e2 = pwe.reconstruct_e2_volume(samples, spec, k, policy, counts=counts)
    stride = round(1e-3 / FINE_STEP)
    return _search_both_masses(e2, spec, scenario.medium, stride)


def fast_estimate_in_window(
    scenario: sources.Scenario,
    delta: float,
    samples: pwe.PlanarSamples,
    window: GridSpec,
    mass: float,
    counts: tuple[int, int] | None = None,
) -> SarEstimate:
    """Single-mass fast-system estimate over a restricted volume window."""
    k = scenario.k
    max_freqs = (2 * np.pi / samples.pitch[0], 2 * np.pi / samples.pitch[1])
    policy = pwe.TruncationPolicy.for_reconstruction(delta, k, max_freqs)
    e2 = pwe.reconstruct_e2_volume(samples, window, k, policy, counts=counts)
    side = sar.cube_side_for_mass(mass)
    return sar.search_peak_cube(e2, window.origin, window.spacing[0], side, mass, scenario.medium)
