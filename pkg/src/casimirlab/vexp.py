"""Virtual frequency-modulation measurement campaigns.

Synthesises frequency-shift grids the way the real acquisition works: for
each applied voltage and repetition the shift is sampled densely along the
approach (sample_step), carries Gaussian noise at the instrument's quoted
frequency-shift error, and is then linearly interpolated onto the 1 nm
analysis grid.  Generation is deterministic for a fixed seed; per-stream
randomness is split by the counter rule
SeedSequence(seed, spawn_key=(voltage_index, repetition)).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np

from .electrostatics import gamma_over_c
from .errors import ConfigError, ModelError, ValidityDomainError
from .force_model import BetaTable, Geometry, pressure_to_gradient_sweep
from .optics import AU_DRUDE, Drude, PermittivityModel, Plasma

__all__ = [
    "V0Law",
    "CampaignSpec",
    "MeasurementGrid",
    "model_for_tag",
    "synthesize_campaign",
    "truth_curves",
    "reference_campaign",
    "reference_geometry",
    "save_grid",
    "load_grid",
]


@dataclass(frozen=True)
class V0Law:
    """Linear residual-potential law V0(a) = slope * a + intercept (SI)."""

    slope: float       # V/m
    intercept: float   # V

    @classmethod
    def from_mv(cls, slope_mv_per_nm: float, intercept_mv: float) -> "V0Law":
        # 1 mV/nm = 1e6 V/m
        return cls(slope=slope_mv_per_nm * 1e6, intercept=intercept_mv * 1e-3)

    def v0(self, a):
        return self.slope * np.asarray(a, dtype=float) + self.intercept

    @property
    def slope_mv_per_nm(self) -> float:
        return self.slope * 1e-6

    @property
    def intercept_mv(self) -> float:
        return self.intercept * 1e3


@dataclass(frozen=True)
class CampaignSpec:
    """Everything needed to synthesise one measurement set.

    The 21 applied voltages follow the acquisition pattern (10 varied + 11
    fixed); z0_true / c_true / v0_law are the hidden truth the calibration
    pipeline must recover; freq_systematic is the instrument's quoted
    frequency-shift error, used both as the synthetic per-sample noise
    scale and as the systematic error in the analysis budget.
    """

    voltages: tuple[float, ...]   # V, exactly 21 entries
    z0_true: float                # m
    c_true: float                 # s/kg
    v0_law: V0Law
    truth_tag: str                # 'drude' or 'plasma'
    amplitude: float              # m
    freq_systematic: float        # rad/s
    max_z_rel: float              # m, span of relative separations
    repetitions: int = 1
    sample_step: float = 0.14e-9  # m
    grid_step: float = 1.0e-9     # m
    drift_per_stream: float = 0.0 # m of separation drift per applied-voltage stream

    def __post_init__(self):
        if len(self.voltages) != 21:
            raise ModelError(f"campaign needs exactly 21 voltages, got {len(self.voltages)}")
        if self.repetitions < 1:
            raise ModelError("repetitions must be >= 1")
        if self.sample_step > self.grid_step:
            raise ModelError("sample_step must not exceed grid_step")
        if self.truth_tag not in ("drude", "plasma"):
            raise ModelError(f"unknown truth tag {self.truth_tag!r}")
        if not self.z0_true > 0 or not self.max_z_rel > 0:
            raise ModelError("z0_true and max_z_rel must be positive")


def model_for_tag(tag: str) -> PermittivityModel:
    """Default gold response for a zero-frequency tag."""
    if tag == "drude":
        return Drude(AU_DRUDE)
    if tag == "plasma":
        return Plasma(AU_DRUDE)
    raise ModelError(f"unknown model tag {tag!r}")


@dataclass
class MeasurementGrid:
    """Synthetic frequency-shift grid, indexed (voltage, repetition, separation)."""

    z_rel: np.ndarray             # m, relative separations on the analysis grid
    shifts: np.ndarray            # rad/s, shape (n_voltages, repetitions, n_sep)
    spec: CampaignSpec
    geometry: Geometry
    seed: int

    def __post_init__(self):
        if not np.all(np.isfinite(self.shifts)):
            raise ModelError("non-finite frequency shifts in grid")
        if np.any(np.diff(self.z_rel) <= 0):
            raise ModelError("separations must be strictly increasing")

    @property
    def separations(self) -> np.ndarray:
        """Truth absolute separations z0_true + z_rel (not visible to calibration)."""
        return self.spec.z0_true + self.z_rel

    @property
    def voltages(self) -> np.ndarray:
        return np.asarray(self.spec.voltages, dtype=float)


@lru_cache(maxsize=32)
def _truth_curves_cached(spec: CampaignSpec, geometry: Geometry):
    n_fine = math.ceil(spec.max_z_rel / spec.sample_step) + 1
    z_fine = spec.sample_step * np.arange(n_fine + 1)
    a_fine = spec.z0_true + z_fine
    geometry.check_separation(float(a_fine[0]))
    geometry.check_separation(float(a_fine[-1]))
    gamma_fine = spec.c_true * gamma_over_c(a_fine, geometry.R)
    sweep = pressure_to_gradient_sweep(
        model_for_tag(spec.truth_tag), geometry, BetaTable(), a_fine
    )
    return z_fine, gamma_fine, sweep.values


def truth_curves(spec: CampaignSpec, geometry: Geometry):
    """Densely sampled noiseless gamma(a) and F'(a) along the approach.

    Returns (z_rel_fine, gamma_fine, fprime_fine); cached per campaign so
    repeated seeds reuse the expensive theory evaluation.
    """
    return _truth_curves_cached(spec, geometry)


def synthesize_campaign(spec: CampaignSpec, geometry: Geometry, seed: int) -> MeasurementGrid:
    """Generate one synthetic measurement set.

    For every (voltage, repetition) stream the dense-approach shift is
    delta_omega = -gamma(a) (V - V0(a))^2 - C_true F'(a) + noise with
    V0(a) the linear law and noise ~ N(0, freq_systematic); the stream is
    then interpolated onto the grid_step separations.  Bit-identical for
    identical (spec, geometry, seed).
    """
    z_fine, gamma_fine, fprime_fine = truth_curves(spec, geometry)
    a_fine = spec.z0_true + z_fine
    v0_fine = spec.v0_law.v0(a_fine)
    base = -gamma_fine[None, :] * (np.asarray(spec.voltages)[:, None] - v0_fine[None, :]) ** 2
    base = base - spec.c_true * fprime_fine[None, :]

    n_grid = int(math.floor(spec.max_z_rel / spec.grid_step + 0.5)) + 1
    z_grid = spec.grid_step * np.arange(n_grid)
    if z_grid[-1] > z_fine[-1]:
        raise ValidityDomainError("analysis grid escapes the sampled approach")

    shifts = np.empty((21, spec.repetitions, n_grid))
    for vi in range(21):
        for rep in range(spec.repetitions):
            rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(vi, rep)))
            stream = base[vi] + rng.normal(0.0, spec.freq_systematic, z_fine.size)
            if spec.drift_per_stream != 0.0:
                off = spec.drift_per_stream * (rep * 21 + vi)
                v = spec.voltages[vi]
                g = np.interp(z_fine + off, z_fine, gamma_fine)
                f = np.interp(z_fine + off, z_fine, fprime_fine)
                v0 = spec.v0_law.v0(a_fine + off)
                stream = -g * (v - v0) ** 2 - spec.c_true * f \
                    + rng.normal(0.0, spec.freq_systematic, z_fine.size)
            shifts[vi, rep] = np.interp(z_grid, z_fine, stream)
    return MeasurementGrid(z_rel=z_grid, shifts=shifts, spec=spec, geometry=geometry, seed=seed)


def _varied_plus_fixed(lo: float, hi: float, fixed: float) -> tuple[float, ...]:
    """Ten voltages stepping across [lo, hi) plus eleven at the fixed value."""
    step = (hi - lo) / 10.0
    return tuple(lo + k * step for k in range(10)) + (fixed,) * 11


def reference_geometry(**overrides) -> Geometry:
    """Sphere-plate geometry of the source experiment."""
    kwargs = dict(R=43.466e-6, delta_s=1.13e-9, delta_p=1.08e-9, temperature=293.15)
    kwargs.update(overrides)
    return Geometry(**kwargs)


_CAMPAIGNS = {
    1: dict(
        voltages=_varied_plus_fixed(-0.040, 0.060, 0.010),
        z0_true=248.0e-9, c_true=6.485e5,
        v0_law=V0Law.from_mv(-8.48e-5, 10.7),
        amplitude=10e-9, freq_systematic=5.5e-2, max_z_rel=702e-9,
    ),
    2: dict(
        voltages=_varied_plus_fixed(-0.049, 0.051, 0.001),
        z0_true=240.2e-9, c_true=6.422e5,
        v0_law=V0Law.from_mv(-5.33e-4, 2.32),
        amplitude=10e-9, freq_systematic=5.5e-2, max_z_rel=710e-9,
    ),
    3: dict(
        voltages=_varied_plus_fixed(-0.049, 0.051, 0.001),
        z0_true=234.4e-9, c_true=6.529e5,
        v0_law=V0Law.from_mv(2.16e-4, 2.00),
        amplitude=10e-9, freq_systematic=5.5e-2, max_z_rel=716e-9,
    ),
    4: dict(
        voltages=_varied_plus_fixed(-0.092, 0.108, 0.008),
        z0_true=571.9e-9, c_true=6.342e5,
        v0_law=V0Law.from_mv(3.23e-4, 7.50),
        amplitude=20e-9, freq_systematic=4.0e-2, max_z_rel=728.1e-9,
    ),
}


def reference_campaign(n: int, truth_tag: str = "plasma") -> tuple[CampaignSpec, Geometry]:
    """Campaign spec and geometry replicating measurement set n (1..4).

    Sets 1-3 use the small 10 nm amplitude and run up to 950 nm absolute
    separation; set 4 uses 20 nm amplitude from 572 nm up to 1300 nm.
    The geometry validity bounds are widened just enough to cover each
    set's actual range.
    """
    if n not in _CAMPAIGNS:
        raise ConfigError(f"no such campaign preset: {n}")
    spec = CampaignSpec(truth_tag=truth_tag, **_CAMPAIGNS[n])
    if n == 4:
        geometry = reference_geometry(a_min=560e-9, max_aspect=0.0306)
    else:
        geometry = reference_geometry(a_min=230e-9)
    return spec, geometry


def save_grid(grid: MeasurementGrid, path) -> None:
    """Write a grid as '#'-commented text, one block per (voltage, repetition)."""
    spec, g = grid.spec, grid.geometry
    # metadata stays in SI with full-precision reprs so load_grid
    # reconstructs the exact spec; only the data columns use nm
    lines = [
        "# casimirlab measurement grid v1",
        f"# seed = {grid.seed}",
        f"# z0_true_m = {spec.z0_true!r}",
        f"# c_true = {spec.c_true!r}",
        f"# v0_slope_V_per_m = {spec.v0_law.slope!r}",
        f"# v0_intercept_V = {spec.v0_law.intercept!r}",
        f"# truth_tag = {spec.truth_tag}",
        f"# amplitude_m = {spec.amplitude!r}",
        f"# freq_systematic_rad_s = {spec.freq_systematic!r}",
        f"# repetitions = {spec.repetitions}",
        f"# sample_step_m = {spec.sample_step!r}",
        f"# grid_step_m = {spec.grid_step!r}",
        f"# max_z_rel_m = {spec.max_z_rel!r}",
        f"# drift_per_stream_m = {spec.drift_per_stream!r}",
        "# voltages_V = " + " ".join(repr(v) for v in spec.voltages),
        f"# R_m = {g.R!r}",
        f"# delta_s_m = {g.delta_s!r}",
        f"# delta_p_m = {g.delta_p!r}",
        f"# temperature_K = {g.temperature!r}",
        f"# max_aspect = {g.max_aspect!r}",
        f"# a_min_m = {g.a_min!r}",
        f"# a_max_m = {g.a_max!r}",
        "# columns: a_nm  delta_omega_rad_s",
    ]
    a_nm = grid.separations * 1e9
    for vi in range(grid.shifts.shape[0]):
        for rep in range(grid.shifts.shape[1]):
            lines.append(f"# block voltage_index = {vi} repetition = {rep}")
            for j in range(grid.z_rel.size):
                lines.append(f"{a_nm[j]:.6f} {float(grid.shifts[vi, rep, j])!r}")
    Path(path).write_text("\n".join(lines) + "\n")


def load_grid(path) -> MeasurementGrid:
    """Read a grid written by save_grid."""
    meta: dict[str, str] = {}
    blocks: list[list[float]] = []
    current: list[float] | None = None
    for raw in Path(path).read_text().splitlines():
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            body = line[1:].strip()
            if body.startswith("block"):
                current = []
                blocks.append(current)
            elif "=" in body:
                key, _, value = body.partition("=")
                meta[key.strip()] = value.strip()
            continue
        if current is None:
            raise ConfigError(f"{path}: data before first block header")
        current.append(float(line.split()[1]))

    try:
        spec = CampaignSpec(
            voltages=tuple(float(v) for v in meta["voltages_V"].split()),
            z0_true=float(meta["z0_true_m"]),
            c_true=float(meta["c_true"]),
            v0_law=V0Law(float(meta["v0_slope_V_per_m"]), float(meta["v0_intercept_V"])),
            truth_tag=meta["truth_tag"],
            amplitude=float(meta["amplitude_m"]),
            freq_systematic=float(meta["freq_systematic_rad_s"]),
            repetitions=int(meta["repetitions"]),
            sample_step=float(meta["sample_step_m"]),
            grid_step=float(meta["grid_step_m"]),
            max_z_rel=float(meta["max_z_rel_m"]),
            drift_per_stream=float(meta["drift_per_stream_m"]),
        )
        geometry = Geometry(
            R=float(meta["R_m"]),
            delta_s=float(meta["delta_s_m"]),
            delta_p=float(meta["delta_p_m"]),
            temperature=float(meta["temperature_K"]),
            max_aspect=float(meta["max_aspect"]),
            a_min=float(meta["a_min_m"]),
            a_max=float(meta["a_max_m"]),
        )
        seed = int(meta["seed"])
    except KeyError as exc:
        raise ConfigError(f"{path}: missing metadata key {exc.args[0]}") from None

    n_v, n_rep = 21, spec.repetitions
    if len(blocks) != n_v * n_rep:
        raise ConfigError(f"{path}: expected {n_v * n_rep} blocks, found {len(blocks)}")
    n_sep = len(blocks[0])
    shifts = np.empty((n_v, n_rep, n_sep))
    k = 0
    for vi in range(n_v):
        for rep in range(n_rep):
            if len(blocks[k]) != n_sep:
                raise ConfigError(f"{path}: ragged blocks")
            shifts[vi, rep] = blocks[k]
            k += 1
    z_rel = spec.grid_step * np.arange(n_sep)
    return MeasurementGrid(z_rel=z_rel, shifts=shifts, spec=spec, geometry=geometry, seed=seed)
