"""Per-element reflection designs: continuous phases and 1-bit quantization onto ON/OFF cell states."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from importlib import resources

import numpy as np
import orjson
from pydantic import BaseModel, ConfigDict, Field, model_validator

from .errors import DegenerateCellError, InvalidArgumentError
from .geometry import Direction, RisArray
from .network import ReflectionState
from .pattern import Scenario, channel_in, channel_out

PHASE_TOLERANCE_DEG = 1e-9
FREQUENCY_MATCH_HZ = 1e6


@dataclass(frozen=True)
class UnitCellStates:
    """Measured reflection of a unit cell with its PIN switch ON and OFF."""

    phase_on: float
    phase_off: float
    mag_on: float
    mag_off: float
    frequency: float | None = None

    def __post_init__(self) -> None:
        for name in ("mag_on", "mag_off"):
            value = getattr(self, name)
            if not 0.0 < value <= 1.0:
                raise InvalidArgumentError(f"{name} must lie in (0, 1], got {value}")
        object.__setattr__(self, "phase_on", float(self.phase_on) % 360.0)
        object.__setattr__(self, "phase_off", float(self.phase_off) % 360.0)


class UnitCellEntry(BaseModel):
    """One row of the bundled unit-cell table; magnitudes either linear or in dB."""

    frequency_hz: float | None = Field(None, gt=0)
    phase_on_deg: float
    phase_off_deg: float
    mag_on: float | None = Field(None, gt=0, le=1)
    mag_off: float | None = Field(None, gt=0, le=1)
    mag_on_db: float | None = Field(None, le=0)
    mag_off_db: float | None = Field(None, le=0)

    model_config = ConfigDict(extra="forbid")

    @model_validator(mode="after")
    def check_magnitudes(self) -> UnitCellEntry:
        if (self.mag_on is None) == (self.mag_on_db is None) or (self.mag_off is None) == (self.mag_off_db is None):
            raise ValueError("give each magnitude exactly once, either linear or in dB")
        return self

    def to_states(self) -> UnitCellStates:
        mag_on = self.mag_on if self.mag_on is not None else 10.0 ** (self.mag_on_db / 20.0)
        mag_off = self.mag_off if self.mag_off is not None else 10.0 ** (self.mag_off_db / 20.0)
        return UnitCellStates(
            phase_on=self.phase_on_deg,
            phase_off=self.phase_off_deg,
            mag_on=mag_on,
            mag_off=mag_off,
            frequency=self.frequency_hz,
        )


@lru_cache(maxsize=1)
def unit_cell_table() -> dict[str, UnitCellStates]:
    """Bundled cell states: the P1-P3 measurement rows and the 28 GHz unit-cell response."""
    raw = orjson.loads(resources.files("ris_lab.data").joinpath("unit_cells.json").read_bytes())
    return {name: UnitCellEntry.model_validate(entry).to_states() for name, entry in raw.items()}


def cells_for_frequency(frequency: float) -> UnitCellStates:
    """The measurement-table row recorded at `frequency` (within 1 MHz)."""
    for name, cells in unit_cell_table().items():
        if not name.startswith("P") or cells.frequency is None:
            continue
        if abs(cells.frequency - frequency) <= FREQUENCY_MATCH_HZ:
            return cells
    raise InvalidArgumentError(f"no unit-cell states recorded at {frequency / 1e9:.3f} GHz")


def continuous_phase_design(scenario: Scenario, target: Direction) -> ReflectionState:
    """Unit-magnitude phases that co-phase all element paths toward `target`."""
    path = channel_out(scenario, target) * channel_in(scenario)
    return ReflectionState(theta_diag=np.exp(-1j * np.angle(path)), label="continuous")


def on_state_mask(phases_deg: np.ndarray, cells: UnitCellStates) -> np.ndarray:
    """True where a phase lies in the circular interval (phase_off, phase_on], counterclockwise."""
    span = (cells.phase_on - cells.phase_off) % 360.0
    if span <= PHASE_TOLERANCE_DEG or span >= 360.0 - PHASE_TOLERANCE_DEG:
        raise DegenerateCellError(f"ON and OFF phases coincide ({cells.phase_on} deg)")
    offset = (np.asarray(phases_deg, dtype=float) - cells.phase_off) % 360.0
    offset = np.where(offset > 360.0 - PHASE_TOLERANCE_DEG, 0.0, offset)
    return (offset > PHASE_TOLERANCE_DEG) & (offset <= span + PHASE_TOLERANCE_DEG)


def quantize_one_bit(state: ReflectionState, cells: UnitCellStates) -> ReflectionState:
    """Map every element onto the ON or OFF cell state; magnitudes follow the state."""
    on = on_state_mask(state.phases_deg, cells)
    phases = np.where(on, cells.phase_on, cells.phase_off)
    magnitudes = np.where(on, cells.mag_on, cells.mag_off)
    return ReflectionState.from_polar(phases, magnitudes, amplification=state.amplification, label="quantized")


def state_pattern(state: ReflectionState, cells: UnitCellStates, array: RisArray) -> np.ndarray:
    """ON/OFF map of a quantized state laid out as rows x cols (row-major)."""
    if state.size != array.size:
        raise InvalidArgumentError(f"state has {state.size} entries for {array.size} elements")
    return on_state_mask(state.phases_deg, cells).reshape(array.rows, array.cols)
