"""Plane-wave-expansion reconstruction engine for the probe-array system.

Pipeline: planar samples -> zero-padded spectrum -> truncation -> spectral
propagation by exp(-i kz dz) -> inverse transform (on the probe lattice or
at arbitrary lateral points). The z field component is recovered from the
transversality identity Ex kx + Ey ky + Ez kz = 0.

Spectral bins are centered: kx[m] = m * kx_max / Mx for
m in [-(Mx-1)/2, (Mx-1)/2], with kx_max = 2*pi/pitch by default (sampling
at the Nyquist limit of the probe pitch). Every transform exists in two
interchangeable implementations, a zero-padded FFT and an explicit
linear-map evaluation; they agree to roundoff and are cross-checked in the
test suite.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
import scipy.fft as sfft

from .em import kz_component
from .fields import FieldGrid, GridSpec

KZ_FLOOR = 1e-9  # bins with |kz| < KZ_FLOOR * |k| contribute no Ez


@dataclass(frozen=True)
class PlanarSamples:
    """Complex (E_x, E_y) samples on the centered probe lattice."""

    plane_z: float  # m
    pitch: tuple[float, float]  # m
    counts: tuple[int, int]  # odd
    values: np.ndarray  # (2, Nx, Ny) complex
    center: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        if self.counts[0] % 2 == 0 or self.counts[1] % 2 == 0:
            raise ValueError("probe counts must be odd")
        if self.center != (0.0, 0.0):
            raise ValueError("the measurement domain center is the origin")
        if self.values.shape != (2, self.counts[0], self.counts[1]):
            raise ValueError(
                f"values shape {self.values.shape} != (2, {self.counts[0]}, {self.counts[1]})"
            )

    def axis(self, i: int) -> np.ndarray:
        n = self.counts[i]
        return (np.arange(n) - (n - 1) // 2) * self.pitch[i]


@dataclass(frozen=True)
class Spectrum:
    """Plane-wave coefficients on the centered (kx, ky) bin lattice."""

    counts: tuple[int, int]  # (Mx, My), odd
    max_freqs: tuple[float, float]  # (kx_max, ky_max), rad/m
    coefficients: np.ndarray  # (..., Mx, My) complex

    def __post_init__(self):
        if self.counts[0] % 2 == 0 or self.counts[1] % 2 == 0:
            raise ValueError("spectrum bin counts must be odd")
        if self.coefficients.shape[-2:] != self.counts:
            raise ValueError("coefficient array does not match bin counts")

    def kx(self) -> np.ndarray:
        m = np.arange(self.counts[0]) - (self.counts[0] - 1) // 2
        return m * self.max_freqs[0] / self.counts[0]

    def ky(self) -> np.ndarray:
        m = np.arange(self.counts[1]) - (self.counts[1] - 1) // 2
        return m * self.max_freqs[1] / self.counts[1]

    def radial_freq(self) -> np.ndarray:
        """sqrt(kx^2 + ky^2) per bin, shape (Mx, My)."""
        return np.hypot.outer(self.kx(), self.ky())

    def energy(self) -> float:
        return float(np.sum(np.abs(self.coefficients) ** 2))


@dataclass(frozen=True)
class TruncationPolicy:
    """Radial spectral cut: bins with sqrt(kx^2+ky^2) >= threshold are zeroed.

    threshold = |k| + (sqrt(kx_max^2 + ky_max^2) - |k|) * delta, so delta = 0
    keeps only the |k| disk and delta = 1 keeps the complete spectrum.
    """

    delta: float
    threshold: float  # rad/m

    @classmethod
    def for_reconstruction(
        cls, delta: float, k: complex, max_freqs: tuple[float, float]
    ) -> "TruncationPolicy":
        if not 0.0 <= delta <= 1.0:
            raise ValueError("delta must lie in [0, 1]")
        corner = float(np.hypot(max_freqs[0], max_freqs[1]))
        eps = abs(k) + (corner - abs(k)) * delta
        return cls(delta=delta, threshold=eps)


def default_counts(samples: PlanarSamples) -> tuple[int, int]:
    return (2 * samples.counts[0] + 1, 2 * samples.counts[1] + 1)


def _check_nyquist(samples: PlanarSamples, max_freqs: tuple[float, float]) -> None:
    for i in range(2):
        if 2.0 * np.pi / samples.pitch[i] < max_freqs[i] * (1.0 - 1e-12):
            warnings.warn(
                "probe pitch violates the Nyquist bound for the requested "
                "spectral band; the expansion may alias",
                stacklevel=3,
            )


def forward_spectrum(
    samples: PlanarSamples,
    counts: tuple[int, int] | None = None,
    max_freqs: tuple[float, float] | None = None,
    method: str = "fft",
) -> Spectrum:
    """Zero-padded discrete transform of the planar samples (both components)."""
    if counts is None:
        counts = default_counts(samples)
    if counts[0] % 2 == 0 or counts[1] % 2 == 0:
        raise ValueError("spectrum bin counts must be odd")
    default_freqs = (2.0 * np.pi / samples.pitch[0], 2.0 * np.pi / samples.pitch[1])
    if max_freqs is None:
        max_freqs = default_freqs
    _check_nyquist(samples, max_freqs)

    exact_default = np.allclose(max_freqs, default_freqs, rtol=1e-12, atol=0.0)
    if method == "fft" and exact_default:
        coeffs = _forward_fft(samples.values, samples.counts, counts)
    elif method in ("fft", "direct"):
        coeffs = _forward_direct(samples, counts, max_freqs)
    else:
        raise ValueError(f"unknown transform method {method!r}")
    return Spectrum(counts=counts, max_freqs=max_freqs, coefficients=coeffs)


def _centered_indices(n: int) -> np.ndarray:
    return np.arange(n) - (n - 1) // 2


def _forward_fft(values: np.ndarray, n_counts, m_counts) -> np.ndarray:
    mx, my = m_counts
    nx = _centered_indices(n_counts[0])
    ny = _centered_indices(n_counts[1])
    buf = np.zeros(values.shape[:-2] + (mx, my), dtype=np.complex128)
    buf[..., nx[:, None] % mx, ny[None, :] % my] = values
    out = sfft.fft2(buf, axes=(-2, -1))
    return np.roll(out, ((mx - 1) // 2, (my - 1) // 2), axis=(-2, -1))


def _forward_direct(samples: PlanarSamples, counts, max_freqs) -> np.ndarray:
    kx = _centered_indices(counts[0]) * max_freqs[0] / counts[0]
    ky = _centered_indices(counts[1]) * max_freqs[1] / counts[1]
    fx = np.exp(-1j * np.outer(kx, samples.axis(0)))
    fy = np.exp(-1j * np.outer(ky, samples.axis(1)))
    return np.einsum("mn,cnp,qp->cmq", fx, samples.values, fy, optimize=True)


def inverse_spectrum(
    spec: Spectrum, counts: tuple[int, int], pitch: tuple[float, float], method: str = "fft"
) -> np.ndarray:
    """Evaluate the inverse transform on the centered probe lattice.

    Returns an array shaped like the coefficients with the last two axes
    replaced by (Nx, Ny).
    """
    default_freqs = (2.0 * np.pi / pitch[0], 2.0 * np.pi / pitch[1])
    exact_default = np.allclose(spec.max_freqs, default_freqs, rtol=1e-12, atol=0.0)
    if method == "fft" and exact_default:
        return _inverse_fft(spec.coefficients, spec.counts, counts)
    if method in ("fft", "direct"):
        x = (_centered_indices(counts[0])) * pitch[0]
        y = (_centered_indices(counts[1])) * pitch[1]
        return evaluate_spectrum_at(spec, x, y)
    raise ValueError(f"unknown transform method {method!r}")


def _inverse_fft(coeffs: np.ndarray, m_counts, n_counts) -> np.ndarray:
    mx, my = m_counts
    std = np.roll(coeffs, (-((mx - 1) // 2), -((my - 1) // 2)), axis=(-2, -1))
    z = sfft.ifft2(std, axes=(-2, -1))
    nx = _centered_indices(n_counts[0])
    ny = _centered_indices(n_counts[1])
    return np.ascontiguousarray(z[..., nx[:, None] % mx, ny[None, :] % my])


def evaluate_spectrum_at(spec: Spectrum, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Inverse transform at arbitrary lateral coordinates (analytic in x, y)."""
    ax = np.exp(1j * np.outer(np.asarray(x, dtype=np.float64), spec.kx()))
    ay = np.exp(1j * np.outer(np.asarray(y, dtype=np.float64), spec.ky()))
    squeeze = spec.coefficients.ndim == 2
    coeffs = spec.coefficients[None] if squeeze else spec.coefficients
    out = np.einsum("xm,cmq,yq->cxy", ax, coeffs, ay, optimize=True)
    out /= spec.counts[0] * spec.counts[1]
    return out[0] if squeeze else out


def propagate_spectrum(spec: Spectrum, k: complex, dz: float) -> Spectrum:
    """Multiply each bin by the spectral propagator exp(-i kz dz)."""
    kz = kz_component(spec.kx()[:, None], spec.ky()[None, :], k)
    return replace(spec, coefficients=spec.coefficients * np.exp(-1j * kz * dz))


def truncate_spectrum(spec: Spectrum, policy: TruncationPolicy) -> Spectrum:
    keep = spec.radial_freq() < policy.threshold
    return replace(spec, coefficients=spec.coefficients * keep)


def recover_z_component(spec_x: Spectrum, spec_y: Spectrum, k: complex) -> Spectrum:
    """E_z bins from transversality of each expansion wave.

    Every wave e^{i(kx x + ky y - kz z)} is divergence-free, so its
    wavevector (kx, ky, -kz) is orthogonal to the field vector and
    E_z = (E_x kx + E_y ky) / kz. Bins with |kz| below KZ_FLOOR * |k| are
    zeroed (conservative handling of the kz ~ 0 singularity, which has
    measure zero in a lossy medium).
    """
    if spec_x.counts != spec_y.counts or spec_x.max_freqs != spec_y.max_freqs:
        raise ValueError("component spectra must share the same bin lattice")
    kx = spec_x.kx()[:, None]
    ky = spec_x.ky()[None, :]
    kz = kz_component(kx, ky, k)
    small = np.abs(kz) < KZ_FLOOR * abs(k)
    safe_kz = np.where(small, 1.0, kz)
    ez = (spec_x.coefficients * kx + spec_y.coefficients * ky) / safe_kz
    ez = np.where(small, 0.0, ez)
    return replace(spec_x, coefficients=ez)


def reconstruct_plane(
    samples: PlanarSamples,
    z_rec: float,
    k: complex,
    policy: TruncationPolicy,
    counts: tuple[int, int] | None = None,
    method: str = "fft",
) -> PlanarSamples:
    """Full pipeline onto the probe lattice at height z_rec (E_x, E_y)."""
    spec = forward_spectrum(samples, counts=counts, method=method)
    spec = truncate_spectrum(spec, policy)
    spec = propagate_spectrum(spec, k, z_rec - samples.plane_z)
    values = inverse_spectrum(spec, samples.counts, samples.pitch, method=method)
    return PlanarSamples(
        plane_z=z_rec, pitch=samples.pitch, counts=samples.counts, values=values
    )


def _volume_spectra(samples: PlanarSamples, k, policy, counts):
    spec = forward_spectrum(samples, counts=counts)
    spec = truncate_spectrum(spec, policy)
    sx = replace(spec, coefficients=spec.coefficients[0])
    sy = replace(spec, coefficients=spec.coefficients[1])
    sz = recover_z_component(sx, sy, k)
    stacked = np.stack([sx.coefficients, sy.coefficients, sz.coefficients])
    return replace(spec, coefficients=stacked)


def reconstruct_volume(
    samples: PlanarSamples,
    spec_grid: GridSpec,
    k: complex,
    policy: TruncationPolicy,
    counts: tuple[int, int] | None = None,
) -> FieldGrid:
    """Reconstruct the complex 3-vector field on a volume grid.

    Each requested z plane is obtained by spectral propagation from the
    measurement plane; lateral resampling evaluates the inverse transform at
    the requested coordinates directly (no interpolation).
    """
    spec3 = _volume_spectra(samples, k, policy, counts)
    values = np.empty((3,) + tuple(spec_grid.dims), dtype=np.complex128)
    x = spec_grid.axis(0)
    y = spec_grid.axis(1)
    for iz, z in enumerate(spec_grid.axis(2)):
        prop = propagate_spectrum(spec3, k, z - samples.plane_z)
        values[:, :, :, iz] = evaluate_spectrum_at(prop, x, y)
    return FieldGrid(spec_grid, values)


def reconstruct_e2_volume(
    samples: PlanarSamples,
    spec_grid: GridSpec,
    k: complex,
    policy: TruncationPolicy,
    counts: tuple[int, int] | None = None,
) -> np.ndarray:
    """|E|^2 of the reconstructed field, streamed plane by plane."""
    spec3 = _volume_spectra(samples, k, policy, counts)
    out = np.empty(tuple(spec_grid.dims))
    x = spec_grid.axis(0)
    y = spec_grid.axis(1)
    for iz, z in enumerate(spec_grid.axis(2)):
        prop = propagate_spectrum(spec3, k, z - samples.plane_z)
        plane = evaluate_spectrum_at(prop, x, y)
        out[:, :, iz] = np.sum(np.abs(plane) ** 2, axis=0)
    return out


def dump_spectrum_csv(spec: Spectrum, path: str | Path, components: tuple[str, ...]) -> None:
    """Write per-bin coefficients (one row per component and bin)."""
    coeffs = spec.coefficients[None] if spec.coefficients.ndim == 2 else spec.coefficients
    if coeffs.shape[0] != len(components):
        raise ValueError("component labels do not match the coefficient array")
    kx = spec.kx()
    ky = spec.ky()
    mx = _centered_indices(spec.counts[0])
    my = _centered_indices(spec.counts[1])
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["component", "m_x", "m_y", "k_x", "k_y", "re", "im"])
        for c, label in enumerate(components):
            for i in range(spec.counts[0]):
                for j in range(spec.counts[1]):
                    v = coeffs[c, i, j]
                    writer.writerow(
                        [label, mx[i], my[j], repr(kx[i]), repr(ky[j]), repr(v.real), repr(v.imag)]
                    )
