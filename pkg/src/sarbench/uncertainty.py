"""Monte Carlo uncertainty engine for the probe-array system.

Input-variable distributions (reference value indicated by *):
    probe position coordinate    * + U(-0.1, 0.1) mm, iid per probe and axis
    relative permittivity        * (1 + U(-0.1, 0.1)), one draw per trial
    conductivity                 * (1 + U(-0.1, 0.1)), one draw per trial
    coupling coefficient (dB)    |c| scaled by 10^(U(-2, 2)/20) per coefficient
    amplitude |E|                * (1 + N(0, 0.025)), iid per probe/component
    phase angle of E             * (1 + N(0, 0.025)) on the wrapped principal
                                 value, iid per probe/component

Coupling contaminates each probe with its 8 neighbours through per-offset
2x2 matrices; the self term has coefficient 1 and is never perturbed. The
y-polarized matrices derive from the x ones by the mirror symmetries
c^{y,x}[px, py] = c^{x,y}[px, -py] and c^{y,y}[px, py] = c^{x,x}[px, -py],
which the perturbed matrices preserve.

The perturbed quantities describe the true world (liquid properties, probe
placement) and the measurement chain; the reconstruction always assumes the
nominal medium and probe lattice.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import em, pipeline, pwe, sources
from .fields import GridSpec

ALL_FACTORS = ("position", "permittivity", "conductivity", "coupling", "amplitude", "phase")

# Reference coupling matrices, indexed [px + 1, py + 1] for px, py in {-1,0,1}.
# Center of the xx matrix is the unit self term.
COUPLING_XX_REF = np.array(
    [
        [-0.29 - 0.27j, -0.58 - 0.73j, -0.46 - 0.33j],
        [0.46 - 1.48j, 100.0 + 0.0j, 0.37 - 1.18j],
        [-0.33 - 0.24j, -0.65 - 0.83j, -0.24 - 0.21j],
    ]
) * 1e-2

COUPLING_XY_REF = np.array(
    [
        [-0.3 - 0.3j, -0.5 - 0.8j, -0.2 + 0.2j],
        [1.5 - 7.0j, 2.5 - 3.8j, 1.6 - 0.6j],
        [-0.5 - 1.0j, -0.5 - 0.7j, -0.1 + 0.3j],
    ]
) * 1e-3


@dataclass(frozen=True)
class CouplingMatrices:
    """Per-offset 2x2 coupling coefficients between a probe and its neighbours."""

    c_xx: np.ndarray  # (3, 3) complex
    c_xy: np.ndarray  # (3, 3) complex

    def __post_init__(self):
        if self.c_xx.shape != (3, 3) or self.c_xy.shape != (3, 3):
            raise ValueError("coupling matrices must be 3x3")

    @property
    def c_yx(self) -> np.ndarray:
        return self.c_xy[:, ::-1]

    @property
    def c_yy(self) -> np.ndarray:
        return self.c_xx[:, ::-1]

    @classmethod
    def identity(cls) -> "CouplingMatrices":
        xx = np.zeros((3, 3), dtype=complex)
        xx[1, 1] = 1.0
        return cls(c_xx=xx, c_xy=np.zeros((3, 3), dtype=complex))

    @classmethod
    def reference(cls) -> "CouplingMatrices":
        return cls(c_xx=COUPLING_XX_REF.copy(), c_xy=COUPLING_XY_REF.copy())


@dataclass(frozen=True)
class PerturbationSpec:
    """Half-widths / standard deviations of the input distributions."""

    probe_position_halfwidth: float = 0.1e-3  # m
    eps_rel_halfwidth: float = 0.1
    sigma_rel_halfwidth: float = 0.1
    coupling_db_halfwidth: float = 2.0
    amplitude_noise_sd: float = 0.025
    phase_noise_sd: float = 0.025
    enabled_factors: frozenset[str] = frozenset(ALL_FACTORS)

    def __post_init__(self):
        unknown = set(self.enabled_factors) - set(ALL_FACTORS)
        if unknown:
            raise ValueError(f"unknown factors: {sorted(unknown)}")
        for name in (
            "probe_position_halfwidth",
            "eps_rel_halfwidth",
            "sigma_rel_halfwidth",
            "coupling_db_halfwidth",
            "amplitude_noise_sd",
            "phase_noise_sd",
        ):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")

    def only(self, factor: str) -> "PerturbationSpec":
        return replace(self, enabled_factors=frozenset({factor}))

    def none(self) -> "PerturbationSpec":
        return replace(self, enabled_factors=frozenset())


@dataclass(frozen=True)
class Perturbation:
    """One concrete draw of every enabled factor (reference values otherwise)."""

    position_offsets: np.ndarray  # (n, n, 3) m
    eps_factor: float  # multiplies the relative permittivity
    sigma_factor: float  # multiplies the conductivity
    coupling: CouplingMatrices
    amplitude_factors: np.ndarray  # (2, n, n), multiplies |E| per component
    phase_factors: np.ndarray  # (2, n, n), multiplies the wrapped phase

    @classmethod
    def identity_for(cls, geometry: sources.Geometry) -> "Perturbation":
        n = geometry.probes_per_side
        return cls(
            position_offsets=np.zeros((n, n, 3)),
            eps_factor=1.0,
            sigma_factor=1.0,
            coupling=CouplingMatrices.identity(),
            amplitude_factors=np.ones((2, n, n)),
            phase_factors=np.ones((2, n, n)),
        )


def sample_perturbation(
    spec: PerturbationSpec, stream: np.random.Generator, geometry: sources.Geometry | None = None
) -> Perturbation:
    """Draw one perturbation; disabled factors stay at their reference values.

    Draw order is fixed so equal streams produce identical perturbations.
    """
    geometry = geometry or sources.Geometry()
    n = geometry.probes_per_side
    ident = Perturbation.identity_for(geometry)
    position = ident.position_offsets
    if "position" in spec.enabled_factors:
        position = stream.uniform(
            -spec.probe_position_halfwidth, spec.probe_position_halfwidth, size=(n, n, 3)
        )
    eps_factor = 1.0
    if "permittivity" in spec.enabled_factors:
        eps_factor = 1.0 + stream.uniform(-spec.eps_rel_halfwidth, spec.eps_rel_halfwidth)
    sigma_factor = 1.0
    if "conductivity" in spec.enabled_factors:
        sigma_factor = 1.0 + stream.uniform(-spec.sigma_rel_halfwidth, spec.sigma_rel_halfwidth)
    coupling = ident.coupling
    if "coupling" in spec.enabled_factors:
        coupling = _perturbed_coupling(spec.coupling_db_halfwidth, stream)
    amplitude = ident.amplitude_factors
    if "amplitude" in spec.enabled_factors:
        amplitude = 1.0 + spec.amplitude_noise_sd * stream.standard_normal((2, n, n))
    phase = ident.phase_factors
    if "phase" in spec.enabled_factors:
        phase = 1.0 + spec.phase_noise_sd * stream.standard_normal((2, n, n))
    return Perturbation(
        position_offsets=position,
        eps_factor=eps_factor,
        sigma_factor=sigma_factor,
        coupling=coupling,
        amplitude_factors=amplitude,
        phase_factors=phase,
    )


def _perturbed_coupling(db_halfwidth: float, stream: np.random.Generator) -> CouplingMatrices:
    """Reference matrices with each coefficient magnitude offset by up to
    +/- db_halfwidth dB (phase unchanged, self term never perturbed)."""
    xx = COUPLING_XX_REF.copy()
    xy = COUPLING_XY_REF.copy()
    for i in range(3):
        for j in range(3):
            if not (i == 1 and j == 1):
                xx[i, j] *= 10.0 ** (stream.uniform(-db_halfwidth, db_halfwidth) / 20.0)
    for i in range(3):
        for j in range(3):
            xy[i, j] *= 10.0 ** (stream.uniform(-db_halfwidth, db_halfwidth) / 20.0)
    return CouplingMatrices(c_xx=xx, c_xy=xy)


def apply_coupling(probe_fields: pwe.PlanarSamples, matrices: CouplingMatrices) -> pwe.PlanarSamples:
    """Mix each probe with its 8 neighbours through the per-offset matrices.

    The (0, 0) offset is the probe itself (unit xx/yy coefficient plus the
    cross-polarization term); neighbours beyond the array edge contribute
    nothing.
    """
    ex, ey = probe_fields.values[0], probe_fields.values[1]
    if ex.shape[0] < 3 or ex.shape[1] < 3:
        raise ValueError("coupling model needs at least a 3x3 probe array")
    out_x = np.zeros_like(ex)
    out_y = np.zeros_like(ey)
    c_yx = matrices.c_yx
    c_yy = matrices.c_yy
    for px in (-1, 0, 1):
        for py in (-1, 0, 1):
            nx = _shifted(ex, px, py)
            ny = _shifted(ey, px, py)
            out_x += matrices.c_xx[px + 1, py + 1] * nx + matrices.c_xy[px + 1, py + 1] * ny
            out_y += c_yx[px + 1, py + 1] * nx + c_yy[px + 1, py + 1] * ny
    return replace(probe_fields, values=np.stack([out_x, out_y]))


def _shifted(a: np.ndarray, px: int, py: int) -> np.ndarray:
    """Field of the neighbour at lattice offset (px, py), zero past the edge."""
    out = np.zeros_like(a)
    src_x = slice(max(px, 0), a.shape[0] + min(px, 0))
    dst_x = slice(max(-px, 0), a.shape[0] + min(-px, 0))
    src_y = slice(max(py, 0), a.shape[1] + min(py, 0))
    dst_y = slice(max(-py, 0), a.shape[1] + min(-py, 0))
    out[dst_x, dst_y] = a[src_x, src_y]
    return out


def perturb_measurement(
    scenario: sources.Scenario, perturbation: Perturbation
) -> pwe.PlanarSamples:
    """Simulate one noisy probe-array measurement.

    Order: (1) the liquid's true eps_r/sigma deviate, changing the true
    field; (2) the analytic field is taken at the perturbed probe positions;
    (3) neighbour coupling mixes the samples; (4) per-probe amplitude and
    phase noise corrupt the read-out.
    """
    geom = scenario.geometry
    medium = scenario.medium
    true_medium = em.MediumProperties(
        medium.frequency,
        medium.relative_permittivity * perturbation.eps_factor,
        medium.conductivity * perturbation.sigma_factor,
        medium.density,
    )
    true_scenario = replace(scenario, medium=true_medium)
    pts = geom.probe_positions() + perturbation.position_offsets
    n = geom.probes_per_side
    e = sources.dipole_field(pts.reshape(-1, 3), true_scenario).reshape(n, n, 3)
    samples = pwe.PlanarSamples(
        plane_z=geom.measurement_plane_z,
        pitch=(geom.probe_pitch, geom.probe_pitch),
        counts=(n, n),
        values=np.ascontiguousarray(np.moveaxis(e[:, :, :2], 2, 0)),
    )
    samples = apply_coupling(samples, perturbation.coupling)
    amp = np.abs(samples.values) * perturbation.amplitude_factors
    ang = np.angle(samples.values) * perturbation.phase_factors
    return replace(samples, values=amp * np.exp(1j * ang))


@dataclass(frozen=True)
class McSummary:
    """Box-plot statistics of one Monte Carlo run (1.5 IQR whisker rule)."""

    samples: np.ndarray
    q1: float
    median: float
    q3: float
    whisker_low: float
    whisker_high: float
    outliers: np.ndarray
    factor_label: str
    delta: float
    mass: float

    @property
    def iqr(self) -> float:
        return self.q3 - self.q1


def _summarize(values: np.ndarray, factor_label: str, delta: float, mass: float) -> McSummary:
    q1, med, q3 = np.percentile(values, [25.0, 50.0, 75.0])
    iqr = q3 - q1
    in_lo = values[values >= q1 - 1.5 * iqr]
    in_hi = values[values <= q3 + 1.5 * iqr]
    wlo = float(in_lo.min()) if in_lo.size else float(values.min())
    whi = float(in_hi.max()) if in_hi.size else float(values.max())
    outliers = values[(values < wlo) | (values > whi)]
    return McSummary(
        samples=values,
        q1=float(q1),
        median=float(med),
        q3=float(q3),
        whisker_low=wlo,
        whisker_high=whi,
        outliers=outliers,
        factor_label=factor_label,
        delta=delta,
        mass=mass,
    )


def monte_carlo(
    scenario: sources.Scenario,
    spec: PerturbationSpec,
    trials: int,
    delta: float,
    mass: float = 1.0,
    seed: int = 0,
    volume: GridSpec | None = None,
    factor_label: str | None = None,
) -> McSummary:
    """Monte Carlo propagation through measurement, reconstruction and SAR.

    Per-trial streams are spawned from the master seed, so results are
    deterministic and independent of evaluation order. The reconstruction
    volume defaults to a window around the unperturbed peak cube (an exact
    spatial restriction of the search; see pipeline.peak_window_spec).
    """
    if trials < 1:
        raise ValueError("at least one trial is required")
    geom = scenario.geometry
    reference_samples = sources.ideal_measurement(scenario)
    if volume is None:
        volume = default_mc_volume(scenario, mass, samples=reference_samples)
    needs_field = bool(
        {"position", "permittivity", "conductivity"} & spec.enabled_factors
    )
    streams = np.random.SeedSequence(seed).spawn(trials)
    values = np.empty(trials)
    for t in range(trials):
        rng = np.random.default_rng(streams[t])
        pert = sample_perturbation(spec, rng, geom)
        if needs_field:
            samples = perturb_measurement(scenario, pert)
        else:
            samples = apply_coupling(reference_samples, pert.coupling)
            amp = np.abs(samples.values) * pert.amplitude_factors
            ang = np.angle(samples.values) * pert.phase_factors
            samples = replace(samples, values=amp * np.exp(1j * ang))
        est = pipeline.fast_estimate_in_window(scenario, delta, samples, volume, mass)
        values[t] = est.value
    label = factor_label if factor_label is not None else _label_for(spec)
    return _summarize(values, label, delta, mass)


def _label_for(spec: PerturbationSpec) -> str:
    if spec.enabled_factors == frozenset(ALL_FACTORS):
        return "all"
    if not spec.enabled_factors:
        return "none"
    return "+".join(sorted(spec.enabled_factors))


def default_mc_volume(
    scenario: sources.Scenario,
    mass: float,
    samples: pwe.PlanarSamples | None = None,
    resolution: float = 1e-3,
) -> GridSpec:
    """Window around the unperturbed delta=0 peak cube."""
    if samples is None:
        samples = sources.ideal_measurement(scenario)
    full = pipeline.standard_volume_spec(scenario.geometry, resolution)
    est = pipeline.fast_estimate_in_window(scenario, 0.0, samples, full, mass)
    return pipeline.peak_window_spec(
        scenario.geometry, est.cube.corner, est.cube.side, resolution
    )


def factor_sweep(
    scenario: sources.Scenario,
    spec: PerturbationSpec,
    trials: int,
    deltas: list[float],
    mass: float = 1.0,
    seed: int = 0,
    factors: tuple[str, ...] | None = None,
    volume: GridSpec | None = None,
) -> list[McSummary]:
    """One Monte Carlo run per (factor, delta), plus an all-factors run.

    Runs derive independent streams from the master seed keyed by factor,
    with the same per-trial draws reused across deltas (common random
    numbers), so delta trends are not buried in sampling noise.
    """
    if factors is None:
        factors = tuple(f for f in ALL_FACTORS if f in spec.enabled_factors)
    if volume is None:
        volume = default_mc_volume(scenario, mass)
    summaries = []
    labels = list(factors) + ["all"]
    for fi, label in enumerate(labels):
        run_spec = spec.only(label) if label != "all" else spec
        for delta in deltas:
            run_seed = np.random.SeedSequence(seed, spawn_key=(fi,)).generate_state(1)[0]
            summaries.append(
                monte_carlo(
                    scenario,
                    run_spec,
                    trials,
                    delta,
                    mass,
                    seed=int(run_seed),
                    volume=volume,
                    factor_label=label,
                )
            )
    return summaries


def summary_to_json_dict(summary: McSummary) -> dict:
    return {
        "factor": summary.factor_label,
        "delta": summary.delta,
        "mass_g": summary.mass,
        "trials": int(summary.samples.size),
        "q1": summary.q1,
        "median": summary.median,
        "q3": summary.q3,
        "whisker_low": summary.whisker_low,
        "whisker_high": summary.whisker_high,
        "outliers": summary.outliers.tolist(),
    }


def export_mc_csv(summary: McSummary, path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["trial", "value_w_per_kg"])
        for i, v in enumerate(summary.samples):
            writer.writerow([i, repr(float(v))])


def export_mc_summary_json(summaries: list[McSummary], path: str | Path) -> None:
    doc = [summary_to_json_dict(s) for s in summaries]
    Path(path).write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")
