"""Regular-lattice field containers and their binary interchange format.

A FieldGrid stores either a complex 3-vector field (values shape
(3, nx, ny, nz)) or an amplitude-only field (values shape (nx, ny, nz),
real, as produced by the single-probe system).

Binary layout: little-endian float64, interleaved re/im for complex grids,
x-fastest ordering, accompanied by a JSON header describing the lattice.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

HEADER_SUFFIX = ".json"
DATA_SUFFIX = ".bin"
FORMAT_VERSION = 1


@dataclass(frozen=True)
class GridSpec:
    """Lattice request: origin (m), spacing (m) and node count per axis."""

    origin: tuple[float, float, float]
    spacing: tuple[float, float, float]
    dims: tuple[int, int, int]

    def __post_init__(self):
        if any(s <= 0 for s in self.spacing):
            raise ValueError("spacing must be positive")
        if any(d < 1 for d in self.dims):
            raise ValueError("dims must be >= 1")

    def axis(self, i: int) -> np.ndarray:
        return self.origin[i] + self.spacing[i] * np.arange(self.dims[i])

    @property
    def extent(self) -> tuple[float, float, float]:
        return tuple((d - 1) * s for d, s in zip(self.dims, self.spacing))


class FieldGrid:
    """Electric field sampled on a regular lattice."""

    def __init__(self, spec: GridSpec, values: np.ndarray, amplitude_only: bool = False):
        values = np.asarray(values)
        if amplitude_only:
            if values.shape != spec.dims:
                raise ValueError(f"amplitude grid shape {values.shape} != dims {spec.dims}")
            if np.iscomplexobj(values):
                raise ValueError("amplitude-only grid must be real")
            if np.any(values < 0):
                raise ValueError("amplitudes must be non-negative")
        else:
            if values.shape != (3,) + tuple(spec.dims):
                raise ValueError(f"vector grid shape {values.shape} != (3,)+dims {spec.dims}")
        self.spec = spec
        self.values = values
        self.amplitude_only = amplitude_only

    @property
    def origin(self):
        return self.spec.origin

    @property
    def spacing(self):
        return self.spec.spacing

    @property
    def dims(self):
        return self.spec.dims

    def e_rms_sq(self) -> np.ndarray:
        """|E|^2 per node (fields are stored as rms-valued phasors)."""
        if self.amplitude_only:
            return self.values.astype(np.float64) ** 2
        return np.sum(np.abs(self.values) ** 2, axis=0)

    def scaled(self, factor: float) -> "FieldGrid":
        return FieldGrid(self.spec, self.values * factor, self.amplitude_only)


def save_field_grid(grid: FieldGrid, path: str | Path) -> None:
    """Write <path>.bin (flat float64, x-fastest) and <path>.json header."""
    path = Path(path)
    data_path = path.with_suffix(DATA_SUFFIX)
    header_path = path.with_suffix(HEADER_SUFFIX)
    if grid.amplitude_only:
        # (nx, ny, nz) -> (nz, ny, nx) so x varies fastest on disk
        flat = np.ascontiguousarray(grid.values.transpose(2, 1, 0), dtype="<f8")
        components = 1
        complex_values = False
    else:
        v = grid.values.transpose(0, 3, 2, 1)  # (3, nz, ny, nx)
        inter = np.empty(v.shape + (2,), dtype="<f8")
        inter[..., 0] = v.real
        inter[..., 1] = v.imag
        flat = np.ascontiguousarray(inter)
        components = 3
        complex_values = True
    header = {
        "format_version": FORMAT_VERSION,
        "origin_m": list(grid.origin),
        "spacing_m": list(grid.spacing),
        "dims": list(grid.dims),
        "components": components,
        "complex": complex_values,
        "dtype": "<f8",
        "ordering": "x-fastest",
        "data_file": data_path.name,
    }
    data_path.write_bytes(flat.tobytes())
    header_path.write_text(json.dumps(header, indent=2) + "\n", encoding="utf-8")


def load_field_grid(path: str | Path) -> FieldGrid:
    path = Path(path)
    header = json.loads(path.with_suffix(HEADER_SUFFIX).read_text(encoding="utf-8"))
    if header["format_version"] != FORMAT_VERSION:
        raise ValueError(f"unsupported field-grid format version {header['format_version']}")
    spec = GridSpec(
        origin=tuple(header["origin_m"]),
        spacing=tuple(header["spacing_m"]),
        dims=tuple(header["dims"]),
    )
    raw = np.frombuffer(path.with_suffix(DATA_SUFFIX).read_bytes(), dtype="<f8")
    nx, ny, nz = spec.dims
    if header["complex"]:
        inter = raw.reshape(3, nz, ny, nx, 2)
        values = (inter[..., 0] + 1j * inter[..., 1]).transpose(0, 3, 2, 1)
        return FieldGrid(spec, np.ascontiguousarray(values), amplitude_only=False)
    values = raw.reshape(nz, ny, nx).transpose(2, 1, 0)
    return FieldGrid(spec, np.ascontiguousarray(values), amplitude_only=True)
