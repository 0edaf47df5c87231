"""Estimation of the equivalent dipole parameters (h, d) from reference patterns.

The objective stacks normalized pattern samples of the coupled model for every
reference and sums squared distances to the reference samples; it is minimized
by an exhaustive 2D grid search with one optional local refinement.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Literal

import numpy as np
import structlog
from joblib import Parallel, delayed
from pydantic import BaseModel, ConfigDict, Field, model_validator

from .artifacts import read_reference_csv
from .errors import (
    AccuracyError,
    ConditioningError,
    DegenerateDataError,
    DegeneratePatternError,
    InvalidArgumentError,
    InvalidDataError,
)
from .geometry import RisArray, wavelength
from .network import CouplingModel, ReflectionState, assemble_z_ii, coupled_solve_from_impedance
from .pattern import PatternGrid, Scenario, channel_in, steering_matrix
from .settings import settings

logger = structlog.get_logger(__name__)

FitScale = Literal["linear", "db"]
FileScale = Literal["linear", "field-db", "power-db"]

# Samples in dB are clipped here so pattern nulls stay finite.
DB_FLOOR = -60.0
NORMALIZATION_TOLERANCE = 1e-9
REFINE_FACTOR = 10


def _to_scale(magnitude: np.ndarray, scale: FitScale) -> np.ndarray:
    """Max-normalize a linear magnitude vector and express it in `scale`."""
    normalized = magnitude / magnitude.max()
    if scale == "linear":
        return normalized
    if scale == "db":
        with np.errstate(divide="ignore"):
            return np.maximum(20.0 * np.log10(normalized), DB_FLOOR)
    raise InvalidArgumentError(f"unknown fit scale {scale!r}")


@dataclass(frozen=True, eq=False)
class ReferencePattern:
    """Normalized pattern samples recorded for one scenario and beamforming state."""

    scenario: Scenario
    theta: ReflectionState
    grid: PatternGrid
    samples: np.ndarray
    scale: FitScale = "linear"
    name: str = ""

    def __post_init__(self) -> None:
        samples = np.asarray(self.samples, dtype=float).ravel()
        if samples.shape != (self.grid.size,):
            raise InvalidArgumentError(f"{samples.size} samples for a grid of {self.grid.size}")
        if not np.all(np.isfinite(samples)):
            raise InvalidDataError("reference samples must be finite")
        if self.scale == "linear":
            if samples.min() < 0 or abs(samples.max() - 1.0) > NORMALIZATION_TOLERANCE:
                raise InvalidDataError("linear reference samples must lie in [0, 1] with maximum 1")
        elif self.scale == "db":
            if abs(samples.max()) > NORMALIZATION_TOLERANCE:
                raise InvalidDataError("dB reference samples must peak at 0 dB")
        else:
            raise InvalidArgumentError(f"unknown fit scale {self.scale!r}")
        if self.theta.size != self.scenario.array.size:
            raise InvalidArgumentError("reference beamforming state does not match the array")
        samples.setflags(write=False)
        object.__setattr__(self, "samples", samples)


class SearchBox(BaseModel):
    """Rectangular (h, d) search region in meters and the number of grid points per axis."""

    h_min: float = Field(..., gt=0, description="Smallest dipole length (m)")
    h_max: float = Field(..., gt=0, description="Largest dipole length (m)")
    d_min: float = Field(..., gt=0, description="Smallest dipole separation (m)")
    d_max: float = Field(..., gt=0, description="Largest dipole separation (m)")
    steps_h: int = Field(100, ge=2, description="Grid points along h")
    steps_d: int = Field(100, ge=2, description="Grid points along d")

    model_config = ConfigDict(extra="forbid", frozen=True)

    @model_validator(mode="after")
    def check_order(self) -> SearchBox:
        if self.h_max <= self.h_min or self.d_max <= self.d_min:
            raise ValueError("search bounds must satisfy min < max")
        return self

    @classmethod
    def default_for(cls, frequency: float, steps: int = 100) -> SearchBox:
        """[lambda/100, lambda] on both axes."""
        lam = wavelength(frequency)
        return cls(h_min=lam / 100, h_max=lam, d_min=lam / 100, d_max=lam, steps_h=steps, steps_d=steps)

    @property
    def h_values(self) -> np.ndarray:
        return np.linspace(self.h_min, self.h_max, self.steps_h)

    @property
    def d_values(self) -> np.ndarray:
        return np.linspace(self.d_min, self.d_max, self.steps_d)


@dataclass(frozen=True, eq=False)
class FitResult:
    h_hat: float
    d_hat: float
    residual: float
    grid_resolution: tuple[float, float]
    residual_surface: np.ndarray
    h_values: np.ndarray
    d_values: np.ndarray
    coarse_argmin: tuple[float, float]
    evaluations: int
    excluded_points: list[tuple[float, float]] = field(default_factory=list)
    refined_surface: np.ndarray | None = None
    refined_h_values: np.ndarray | None = None
    refined_d_values: np.ndarray | None = None

    def to_document(self, surface_csv_path: str | None = None) -> dict:
        return {
            "h_hat_m": self.h_hat,
            "d_hat_m": self.d_hat,
            "residual": self.residual,
            "grid": {
                "h_min_m": float(self.h_values[0]),
                "h_max_m": float(self.h_values[-1]),
                "d_min_m": float(self.d_values[0]),
                "d_max_m": float(self.d_values[-1]),
                "steps_h": int(self.h_values.size),
                "steps_d": int(self.d_values.size),
                "resolution_h_m": self.grid_resolution[0],
                "resolution_d_m": self.grid_resolution[1],
                "refined": self.refined_surface is not None,
            },
            "coarse_argmin": {"h_m": self.coarse_argmin[0], "d_m": self.coarse_argmin[1]},
            "evaluations": self.evaluations,
            "excluded_points": [{"h_m": h, "d_m": d} for h, d in self.excluded_points],
            "surface_csv_path": surface_csv_path,
        }


@dataclass(frozen=True, eq=False)
class _PreparedReference:
    """Per-reference quantities that do not depend on (h, d)."""

    array: RisArray
    frequency: float
    theta: ReflectionState
    h_in: np.ndarray
    steering: np.ndarray
    samples: np.ndarray
    scale: FitScale


def _prepare(
    scenario: Scenario, theta: ReflectionState, grid: PatternGrid, samples: np.ndarray, scale: FitScale
) -> _PreparedReference:
    return _PreparedReference(
        array=scenario.array,
        frequency=scenario.frequency,
        theta=theta,
        h_in=channel_in(scenario),
        steering=steering_matrix(scenario, grid),
        samples=samples,
        scale=scale,
    )


def _prepare_reference(reference: ReferencePattern) -> _PreparedReference:
    return _prepare(reference.scenario, reference.theta, reference.grid, reference.samples, reference.scale)


def _model_samples(prepared: _PreparedReference, model: CouplingModel) -> np.ndarray:
    z_ii = assemble_z_ii(prepared.array, model, prepared.frequency)
    response = coupled_solve_from_impedance(prepared.theta, z_ii, model.z0, prepared.h_in)
    magnitude = np.abs(prepared.steering @ response)
    if not magnitude.max() > 0:
        raise DegeneratePatternError("coupled pattern is identically zero")
    return _to_scale(magnitude, prepared.scale)


def _distance(prepared: list[_PreparedReference], model: CouplingModel) -> float:
    return float(sum(np.sum((_model_samples(ref, model) - ref.samples) ** 2) for ref in prepared))


def stack_samples(
    scenario: Scenario,
    theta: ReflectionState,
    h: float,
    d: float,
    grid: PatternGrid,
    scale: FitScale = "linear",
    model: CouplingModel | None = None,
) -> np.ndarray:
    """Normalized coupled-model pattern samples for the candidate (h, d)."""
    model = (model or CouplingModel(h=h, d=d)).with_parameters(h, d)
    prepared = _prepare(scenario, theta, grid, np.empty(0), scale)
    return _model_samples(prepared, model)


def objective(
    candidate: tuple[float, float],
    references: list[ReferencePattern],
    scale: FitScale = "linear",
    model: CouplingModel | None = None,
) -> float:
    """Sum over references of the squared distance between model and reference samples."""
    if not references:
        raise InvalidArgumentError("objective needs at least one reference")
    for reference in references:
        if reference.scale != scale:
            raise InvalidArgumentError(
                f"reference {reference.name!r} is stored in {reference.scale} scale, not {scale}"
            )
    h, d = candidate
    model = (model or CouplingModel(h=h, d=d)).with_parameters(h, d)
    return _distance([_prepare_reference(reference) for reference in references], model)


def _evaluate_row(
    prepared: list[_PreparedReference], model: CouplingModel, h: float, d_values: np.ndarray
) -> np.ndarray:
    row = np.empty(d_values.size)
    for j, d in enumerate(d_values):
        try:
            row[j] = _distance(prepared, model.with_parameters(float(h), float(d)))
        except (ConditioningError, AccuracyError, DegeneratePatternError):
            row[j] = np.nan
    return row


def _evaluate_surface(
    prepared: list[_PreparedReference], model: CouplingModel, h_values: np.ndarray, d_values: np.ndarray, n_jobs: int
) -> np.ndarray:
    rows = Parallel(n_jobs=n_jobs)(delayed(_evaluate_row)(prepared, model, h, d_values) for h in h_values)
    surface = np.vstack(rows)
    surface[~np.isfinite(surface)] = np.nan
    return surface


def _argmin(surface: np.ndarray) -> tuple[int, int]:
    """First minimum in row-major (h index, d index) order, ignoring excluded points."""
    if np.all(np.isnan(surface)):
        raise ConditioningError("fit_grid_search", float("inf"))
    i, j = np.unravel_index(int(np.nanargmin(surface)), surface.shape)
    return int(i), int(j)


def _refined_axis(values: np.ndarray, index: int) -> np.ndarray:
    step = values[1] - values[0]
    lo = values[max(index - 1, 0)]
    hi = values[min(index + 1, values.size - 1)]
    count = int(round((hi - lo) / (step / REFINE_FACTOR))) + 1
    return np.linspace(lo, hi, count)


def fit_grid_search(
    references: list[ReferencePattern],
    search: SearchBox,
    scale: FitScale = "linear",
    refine: bool = True,
    model: CouplingModel | None = None,
    n_jobs: int | None = None,
) -> FitResult:
    """Exhaustive (h, d) search minimizing `objective`, optionally refined x10 around the coarse argmin."""
    if not references:
        raise InvalidArgumentError("fit_grid_search needs at least one reference")
    for reference in references:
        if reference.scale != scale:
            raise InvalidArgumentError(
                f"reference {reference.name!r} is stored in {reference.scale} scale, not {scale}"
            )
    n_jobs = n_jobs or settings.get_threads()
    model = model or CouplingModel(h=search.h_min, d=search.d_min)
    prepared = [_prepare_reference(reference) for reference in references]

    h_values, d_values = search.h_values, search.d_values
    logger.info(
        "Starting grid search",
        references=len(references),
        steps_h=h_values.size,
        steps_d=d_values.size,
        workers=n_jobs,
        scale=scale,
    )
    surface = _evaluate_surface(prepared, model, h_values, d_values, n_jobs)
    i, j = _argmin(surface)
    coarse = (float(h_values[i]), float(d_values[j]))
    best = (coarse[0], coarse[1], float(surface[i, j]))
    excluded_index = np.argwhere(np.isnan(surface))
    excluded = [(float(h_values[a]), float(d_values[b])) for a, b in excluded_index]
    evaluations = surface.size
    resolution = (float(h_values[1] - h_values[0]), float(d_values[1] - d_values[0]))
    logger.info("Coarse search done", h=coarse[0], d=coarse[1], residual=best[2], excluded=len(excluded))

    refined_surface = refined_h = refined_d = None
    if refine:
        refined_h = _refined_axis(h_values, i)
        refined_d = _refined_axis(d_values, j)
        refined_surface = _evaluate_surface(prepared, model, refined_h, refined_d, n_jobs)
        evaluations += refined_surface.size
        resolution = (resolution[0] / REFINE_FACTOR, resolution[1] / REFINE_FACTOR)
        if not np.all(np.isnan(refined_surface)):
            a, b = _argmin(refined_surface)
            if refined_surface[a, b] <= best[2]:
                best = (float(refined_h[a]), float(refined_d[b]), float(refined_surface[a, b]))
        logger.info("Refined search done", h=best[0], d=best[1], residual=best[2])

    return FitResult(
        h_hat=best[0],
        d_hat=best[1],
        residual=best[2],
        grid_resolution=resolution,
        residual_surface=surface,
        h_values=h_values,
        d_values=d_values,
        coarse_argmin=coarse,
        evaluations=evaluations,
        excluded_points=excluded,
        refined_surface=refined_surface,
        refined_h_values=refined_h,
        refined_d_values=refined_d,
    )


def samples_from_file_scale(values: np.ndarray, file_scale: FileScale, fit_scale: FitScale) -> np.ndarray:
    """Convert raw file values into normalized samples in the fit scale."""
    values = np.asarray(values, dtype=float)
    if file_scale == "power-db":
        values = values / 2.0
        file_scale = "field-db"
    if file_scale == "field-db":
        magnitude = 10.0 ** ((values - values.max()) / 20.0)
    elif file_scale == "linear":
        if values.min() < 0:
            raise InvalidDataError("linear reference values must be non-negative")
        magnitude = values
    else:
        raise InvalidArgumentError(f"unknown file scale {file_scale!r}")
    if not magnitude.max() > 0:
        raise DegenerateDataError("reference pattern is identically zero")
    return _to_scale(magnitude, fit_scale)


def ingest_reference(
    path: Path | str,
    scale: FileScale,
    scenario: Scenario,
    theta: ReflectionState,
    fit_scale: FitScale = "linear",
    azimuth: float = 90.0,
    grid: PatternGrid | None = None,
) -> ReferencePattern:
    """Load a `theta_el_deg,value` reference CSV into a validated ReferencePattern."""
    frame = read_reference_csv(path)
    elevations = frame["theta_el_deg"].to_numpy(dtype=float)
    values = frame["value"].to_numpy(dtype=float)
    if elevations.size < 2 or np.any(np.diff(elevations) <= 0):
        raise InvalidDataError(f"{path}: elevation grid must be strictly increasing")
    if np.all(values == values[0]):
        raise DegenerateDataError(f"{path}: all samples are equal")
    try:
        file_grid = PatternGrid(elevations=elevations, azimuth=azimuth)
    except InvalidArgumentError as e:
        raise InvalidDataError(f"{path}: {e}") from e
    if grid is not None and not grid.matches(file_grid):
        raise InvalidDataError(f"{path}: elevation grid does not match the configured pattern grid")

    samples = samples_from_file_scale(values, scale, fit_scale)
    logger.info("Reference loaded", path=str(path), samples=samples.size, file_scale=scale, fit_scale=fit_scale)
    return ReferencePattern(
        scenario=scenario, theta=theta, grid=file_grid, samples=samples, scale=fit_scale, name=Path(path).name
    )


def synthesize_reference(
    scenario: Scenario,
    theta: ReflectionState,
    h: float,
    d: float,
    grid: PatternGrid,
    scale: FitScale = "linear",
    noise_db: float = 0.0,
    seed: int | None = None,
    model: CouplingModel | None = None,
) -> ReferencePattern:
    """Reference produced by the coupled model itself, optionally with Gaussian noise in dB."""
    if noise_db < 0:
        raise InvalidArgumentError(f"noise_db must be >= 0, got {noise_db}")
    samples = stack_samples(scenario, theta, h, d, grid, "linear", model)
    if noise_db > 0:
        rng = np.random.default_rng(seed)
        with np.errstate(divide="ignore"):
            db = np.maximum(20.0 * np.log10(samples), DB_FLOOR)
        samples = 10.0 ** ((db + rng.normal(0.0, noise_db, db.size)) / 20.0)
    return ReferencePattern(
        scenario=scenario,
        theta=theta,
        grid=grid,
        samples=_to_scale(samples, scale),
        scale=scale,
        name=f"synthetic h={h:g} d={d:g}",
    )
