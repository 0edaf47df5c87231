"""Radiation pattern synthesis under the conventional and coupling-aware models."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import pandas as pd

from .errors import DegeneratePatternError, InvalidArgumentError, SideLobeNotFoundError
from .geometry import Direction, FeedPlacement, RisArray, feed_elevations, wavelength, wavenumber
from .network import ReflectionState, ScatteringMatrix, factor_coupled

TRACE_COLUMNS = ["theta_el_deg", "re", "im", "norm_db"]


@dataclass(frozen=True, eq=False)
class Scenario:
    """Frequency, feed placement, directivity exponents and array of one measurement setup."""

    frequency: float
    feed: FeedPlacement
    q_e: float
    q_f: float
    array: RisArray
    name: str = ""

    def __post_init__(self) -> None:
        if not self.frequency > 0:
            raise InvalidArgumentError(f"frequency must be positive, got {self.frequency}")
        if self.q_e < 0 or self.q_f < 0:
            raise InvalidArgumentError(f"directivity exponents must be >= 0 (q_e={self.q_e}, q_f={self.q_f})")

    @property
    def wavelength(self) -> float:
        return wavelength(self.frequency)

    @property
    def k0(self) -> float:
        return wavenumber(self.frequency)


@dataclass(frozen=True, eq=False)
class PatternGrid:
    """Elevation cut at a fixed azimuth, in degrees."""

    elevations: np.ndarray
    azimuth: float = 90.0

    def __post_init__(self) -> None:
        elevations = np.asarray(self.elevations, dtype=float).ravel()
        if elevations.size < 2:
            raise InvalidArgumentError("a pattern grid needs at least two elevations")
        if np.any(np.diff(elevations) <= 0):
            raise InvalidArgumentError("grid elevations must be strictly increasing")
        if elevations[0] < -90.0 or elevations[-1] > 90.0:
            raise InvalidArgumentError("grid elevations must lie in [-90, 90] degrees")
        elevations.setflags(write=False)
        object.__setattr__(self, "elevations", elevations)

    @classmethod
    def from_range(
        cls, el_min: float = -90.0, el_max: float = 90.0, step: float = 0.5, azimuth: float = 90.0
    ) -> PatternGrid:
        count = int(round((el_max - el_min) / step)) + 1
        return cls(elevations=np.linspace(el_min, el_max, count), azimuth=azimuth)

    @property
    def size(self) -> int:
        return self.elevations.size

    def matches(self, other: PatternGrid) -> bool:
        return (
            self.azimuth == other.azimuth
            and self.size == other.size
            and np.allclose(self.elevations, other.elevations, rtol=0.0, atol=1e-9)
        )


@dataclass(frozen=True, eq=False)
class PatternTrace:
    """Sampled complex field with its max-normalized magnitude in dB."""

    grid: PatternGrid
    field: np.ndarray
    normalized_db: np.ndarray

    @classmethod
    def from_field(cls, grid: PatternGrid, field: np.ndarray) -> PatternTrace:
        field = np.asarray(field, dtype=complex)
        if field.shape != (grid.size,):
            raise InvalidArgumentError(f"field has {field.size} samples for a grid of {grid.size}")
        magnitude = np.abs(field)
        peak = magnitude.max()
        if not peak > 0:
            raise DegeneratePatternError("pattern is identically zero and cannot be normalized")
        with np.errstate(divide="ignore"):
            normalized_db = 20.0 * np.log10(magnitude / peak)
        return cls(grid=grid, field=field, normalized_db=normalized_db)

    @property
    def magnitude(self) -> np.ndarray:
        """Linear magnitude normalized to a peak of 1."""
        magnitude = np.abs(self.field)
        return magnitude / magnitude.max()


def normalize(trace: PatternTrace) -> PatternTrace:
    return PatternTrace.from_field(trace.grid, trace.field)


def cos_taper(angles_rad: np.ndarray, exponent: float) -> np.ndarray:
    cosine = np.cos(angles_rad)
    # Exact zero at grazing angles, no back radiation.
    cosine = np.where(np.isclose(np.abs(angles_rad), np.pi / 2, rtol=0.0, atol=1e-15), 0.0, cosine)
    return np.clip(cosine, 0.0, None) ** exponent


def channel_in(scenario: Scenario) -> np.ndarray:
    """Feed-to-element channel: cos^q_f(theta_f,n) / r_n * exp(-j k0 r_n)."""
    positions = scenario.array.element_positions
    distances = np.linalg.norm(positions - scenario.feed.position, axis=-1)
    taper = cos_taper(feed_elevations(scenario.feed, positions), scenario.q_f)
    return taper / distances * np.exp(-1j * scenario.k0 * distances)


def _unit_vectors(azimuth: float, elevations: np.ndarray) -> np.ndarray:
    az = np.deg2rad(azimuth)
    el = np.deg2rad(elevations)
    return np.stack([np.sin(el) * np.cos(az), np.sin(el) * np.sin(az), np.cos(el)], axis=-1)


def steering_matrix(scenario: Scenario, grid: PatternGrid) -> np.ndarray:
    """(L, N) matrix whose rows are channel_out for each grid direction."""
    directions = _unit_vectors(grid.azimuth, grid.elevations)
    taper = cos_taper(np.deg2rad(grid.elevations), scenario.q_e)
    phase = scenario.k0 * directions @ scenario.array.element_positions.T
    return taper[:, None] * np.exp(1j * phase)


def channel_out(scenario: Scenario, direction: Direction) -> np.ndarray:
    """Element-to-direction channel: cos^q_e(theta_el) * exp(j k0 p_n^T u)."""
    u = _unit_vectors(direction.azimuth, np.array([direction.elevation]))
    taper = cos_taper(np.deg2rad(np.array([direction.elevation])), scenario.q_e)
    return (taper[:, None] * np.exp(1j * scenario.k0 * u @ scenario.array.element_positions.T))[0]


def _check_state(scenario: Scenario, theta: ReflectionState) -> None:
    if theta.size != scenario.array.size:
        raise InvalidArgumentError(f"reflection state has {theta.size} entries for {scenario.array.size} elements")


def pattern_conventional(scenario: Scenario, theta: ReflectionState, grid: PatternGrid) -> PatternTrace:
    """E = h_out^T Theta h_in on every grid direction."""
    _check_state(scenario, theta)
    field = steering_matrix(scenario, grid) @ (theta.effective * channel_in(scenario))
    return PatternTrace.from_field(grid, field)


def pattern_coupled(
    scenario: Scenario, theta: ReflectionState, s_ii: ScatteringMatrix, grid: PatternGrid
) -> PatternTrace:
    """E~ = h_out^T (Theta^-1 - S_II)^-1 h_in on every grid direction."""
    _check_state(scenario, theta)
    response = factor_coupled(theta, s_ii)
    field = steering_matrix(scenario, grid) @ response.apply(channel_in(scenario))
    return PatternTrace.from_field(grid, field)


def main_lobe_bounds(trace: PatternTrace) -> tuple[int, int]:
    """Indices of the nearest local minima on each side of the global maximum."""
    db = trace.normalized_db
    peak = int(np.argmax(db))
    left = peak
    while left > 0 and db[left - 1] <= db[left]:
        left -= 1
    right = peak
    while right < db.size - 1 and db[right + 1] <= db[right]:
        right += 1
    return left, right


def side_lobe_level(trace: PatternTrace) -> float:
    """Largest normalized level (dB) outside the main lobe."""
    left, right = main_lobe_bounds(trace)
    outside = np.concatenate([trace.normalized_db[:left], trace.normalized_db[right + 1 :]])
    if outside.size == 0:
        raise SideLobeNotFoundError("pattern decreases monotonically away from its peak")
    return float(outside.max())


def rms_error_db(trace: PatternTrace, reference_db: np.ndarray, floor_db: float = -60.0) -> float:
    """RMS difference in dB after clipping both patterns at `floor_db`."""
    reference_db = np.asarray(reference_db, dtype=float)
    if reference_db.shape != trace.normalized_db.shape:
        raise InvalidArgumentError("reference and trace have different lengths")
    model = np.maximum(trace.normalized_db, floor_db)
    reference = np.maximum(reference_db, floor_db)
    return float(np.sqrt(np.mean((model - reference) ** 2)))


def trace_to_frame(trace: PatternTrace) -> pd.DataFrame:
    return pd.DataFrame(
        {
            "theta_el_deg": trace.grid.elevations,
            "re": trace.field.real,
            "im": trace.field.imag,
            "norm_db": trace.normalized_db,
        },
        columns=TRACE_COLUMNS,
    )


def frame_to_trace(frame: pd.DataFrame, azimuth: float = 90.0) -> PatternTrace:
    grid = PatternGrid(elevations=frame["theta_el_deg"].to_numpy(dtype=float), azimuth=azimuth)
    return PatternTrace.from_field(grid, frame["re"].to_numpy(dtype=float) + 1j * frame["im"].to_numpy(dtype=float))
