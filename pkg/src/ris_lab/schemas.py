"""Pydantic schemas for scenario configuration files."""

from __future__ import annotations

from importlib import resources
from pathlib import Path

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .beamforming import UnitCellStates, cells_for_frequency
from .errors import ConfigError, InvalidArgumentError
from .geometry import Direction, RisArray, place_feed
from .network import Z0_DEFAULT, CouplingModel
from .pattern import PatternGrid, Scenario
from .rate import RX_DISTANCE_DEFAULT, LinkBudget

PRESETS = ("p1", "p2", "p3")


class ArrayConfig(BaseModel):
    """Schema for the planar array layout."""

    rows: int = Field(..., ge=1, description="Number of rows (along y)")
    cols: int = Field(..., ge=1, description="Number of columns (along x)")
    spacing_m: float = Field(..., gt=0, description="Element pitch in meters")

    model_config = ConfigDict(extra="forbid")


class FeedConfig(BaseModel):
    """Schema for the Tx horn placement."""

    incident_az_deg: float = Field(..., description="Azimuth of the feed seen from the array center")
    incident_el_deg: float = Field(..., ge=-90, le=90, description="Elevation of the feed from the array normal")
    distance_m: float = Field(..., gt=0, description="Feed distance from the array center in meters")

    model_config = ConfigDict(extra="forbid")


class CellsConfig(BaseModel):
    """Schema for measured ON/OFF unit-cell states."""

    phase_on_deg: float = Field(..., description="Reflection phase with the switch ON")
    phase_off_deg: float = Field(..., description="Reflection phase with the switch OFF")
    mag_on: float = Field(..., gt=0, le=1, description="Reflection magnitude with the switch ON")
    mag_off: float = Field(..., gt=0, le=1, description="Reflection magnitude with the switch OFF")

    model_config = ConfigDict(extra="forbid")


class CouplingConfig(BaseModel):
    """Schema for the equivalent dipole coupling model; h and d may be left out."""

    h_m: float | None = Field(None, gt=0, description="Equivalent dipole length in meters")
    d_m: float | None = Field(None, gt=0, description="Equivalent dipole separation in meters")
    z0_ohm: float = Field(Z0_DEFAULT, gt=0, description="Reference impedance in ohm")
    quadrature_points: int = Field(512, ge=64, description="Initial Gauss-Legendre order")

    model_config = ConfigDict(extra="forbid")


class BudgetConfig(BaseModel):
    """Schema for the link budget of rate evaluations."""

    p_t_dbm: float = Field(0.0, description="Transmit power in dBm")
    nf_db: float = Field(10.0, description="Noise figure in dB")
    n0_dbm_per_hz: float = Field(-174.0, description="Noise power density in dBm/Hz")
    rx_distance_m: float = Field(RX_DISTANCE_DEFAULT, gt=0, description="Receiver distance on the array normal")
    calibration: float = Field(1.0, gt=0, description="Amplitude factor applied to the Tx-to-RIS channel")

    model_config = ConfigDict(extra="forbid")


class GridConfig(BaseModel):
    """Schema for the elevation cut on which patterns are sampled."""

    el_min_deg: float = Field(-90.0, ge=-90, le=90)
    el_max_deg: float = Field(90.0, ge=-90, le=90)
    step_deg: float = Field(0.5, gt=0)
    azimuth_deg: float = Field(90.0, description="Azimuth of the cut")

    model_config = ConfigDict(extra="forbid")

    @model_validator(mode="after")
    def check_range(self) -> GridConfig:
        if self.el_max_deg <= self.el_min_deg:
            raise ValueError("el_max_deg must exceed el_min_deg")
        return self


class ScenarioConfig(BaseModel):
    """Schema for a complete scenario file."""

    name: str = Field("", description="Free-form scenario label")
    array: ArrayConfig
    frequency_hz: float = Field(..., gt=0, description="Signal frequency in Hz")
    feed: FeedConfig
    q_e: float = Field(1.0, ge=0, description="Element directivity exponent")
    q_f: float = Field(25.0, ge=0, description="Feed directivity exponent")
    cells: CellsConfig | None = None
    coupling: CouplingConfig = Field(default_factory=CouplingConfig)
    budget: BudgetConfig = Field(default_factory=BudgetConfig)
    grid: GridConfig = Field(default_factory=GridConfig)

    model_config = ConfigDict(extra="forbid")

    def build_array(self) -> RisArray:
        return RisArray(rows=self.array.rows, cols=self.array.cols, spacing=self.array.spacing_m)

    def build_scenario(self) -> Scenario:
        array = self.build_array()
        incident = Direction(azimuth=self.feed.incident_az_deg, elevation=self.feed.incident_el_deg)
        try:
            return Scenario(
                frequency=self.frequency_hz,
                feed=place_feed(array, incident, self.feed.distance_m),
                q_e=self.q_e,
                q_f=self.q_f,
                array=array,
                name=self.name,
            )
        except InvalidArgumentError as e:
            raise ConfigError(str(e)) from e

    def build_coupling_model(self) -> CouplingModel:
        """Coupling model; h and d are required here even though the file may omit them."""
        for key in ("h_m", "d_m"):
            if getattr(self.coupling, key) is None:
                raise ConfigError("required for coupled evaluation", key=f"coupling.{key}")
        return CouplingModel(
            h=self.coupling.h_m,
            d=self.coupling.d_m,
            z0=self.coupling.z0_ohm,
            quadrature_points=self.coupling.quadrature_points,
        )

    def build_budget(self, calibration: float | None = None) -> LinkBudget:
        return LinkBudget.from_db(
            p_t_dbm=self.budget.p_t_dbm,
            nf_db=self.budget.nf_db,
            n0_dbm_per_hz=self.budget.n0_dbm_per_hz,
            rx_distance=self.budget.rx_distance_m,
            calibration=self.budget.calibration if calibration is None else calibration,
        )

    def build_grid(self) -> PatternGrid:
        return PatternGrid.from_range(
            el_min=self.grid.el_min_deg,
            el_max=self.grid.el_max_deg,
            step=self.grid.step_deg,
            azimuth=self.grid.azimuth_deg,
        )

    def build_cells(self) -> UnitCellStates:
        """Cell states from the file, else the measurement row recorded at this frequency."""
        if self.cells is not None:
            return UnitCellStates(
                phase_on=self.cells.phase_on_deg,
                phase_off=self.cells.phase_off_deg,
                mag_on=self.cells.mag_on,
                mag_off=self.cells.mag_off,
                frequency=self.frequency_hz,
            )
        try:
            return cells_for_frequency(self.frequency_hz)
        except InvalidArgumentError as e:
            raise ConfigError(str(e), key="cells") from e


def _validated(raw: bytes | str, source: str) -> ScenarioConfig:
    try:
        return ScenarioConfig.model_validate_json(raw)
    except ValidationError as e:
        first = e.errors()[0]
        key = ".".join(str(part) for part in first["loc"]) or None
        raise ConfigError(f"{first['msg']} (in {source})", key=key) from e


def load_config(path: Path | str) -> ScenarioConfig:
    """Load and validate a scenario JSON file."""
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as e:
        raise ConfigError(f"cannot read scenario file {path}: {e.strerror}") from e
    return _validated(raw, str(path))


def load_preset(name: str) -> ScenarioConfig:
    """One of the bundled measurement scenarios p1, p2, p3."""
    name = name.lower()
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; choose one of {', '.join(PRESETS)}")
    raw = resources.files("ris_lab.data").joinpath("presets").joinpath(f"{name}.json").read_bytes()
    return _validated(raw, f"preset {name}")
