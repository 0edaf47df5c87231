"""Test configuration and fixtures."""

import json
from collections.abc import Callable
from pathlib import Path
from typing import Any

import numpy as np
import pytest

from ris_lab.geometry import Direction, RisArray, place_feed
from ris_lab.network import CouplingModel
from ris_lab.pattern import PatternGrid, Scenario

PITCH = 0.00382  # m, prototype cell pitch
H_HAT = 0.0038
D_HAT = 0.0102


@pytest.fixture
def rng() -> np.random.Generator:
    """Seeded generator so random-instance tests are reproducible."""
    return np.random.default_rng(20240517)


@pytest.fixture
def small_array() -> RisArray:
    """4x4 array with the prototype pitch."""
    return RisArray(rows=4, cols=4, spacing=PITCH)


@pytest.fixture
def make_scenario(small_array: RisArray) -> Callable[..., Scenario]:
    """Factory for scenarios on the small array with a feed 0.18 m away."""

    def _make(
        frequency: float = 25e9,
        incident_el: float = 25.0,
        array: RisArray | None = None,
        q_e: float = 1.0,
        q_f: float = 25.0,
    ) -> Scenario:
        array = array or small_array
        feed = place_feed(array, Direction(azimuth=90.0, elevation=incident_el), 0.18)
        return Scenario(frequency=frequency, feed=feed, q_e=q_e, q_f=q_f, array=array)

    return _make


@pytest.fixture
def small_scenario(make_scenario: Callable[..., Scenario]) -> Scenario:
    """P2-like setup (25 GHz, feed at 25 degrees) on the 4x4 array."""
    return make_scenario()


@pytest.fixture
def coarse_grid() -> PatternGrid:
    """Elevation cut from -80 to 80 degrees in 2 degree steps."""
    return PatternGrid.from_range(-80.0, 80.0, 2.0)


@pytest.fixture
def coupling_model() -> CouplingModel:
    """Dipole model at the shipped (h, d) estimate."""
    return CouplingModel(h=H_HAT, d=D_HAT)


@pytest.fixture
def scenario_document() -> dict[str, Any]:
    """Scenario file contents for a 4x4 array at 25 GHz with a coarse grid."""
    return {
        "name": "small",
        "array": {"rows": 4, "cols": 4, "spacing_m": PITCH},
        "frequency_hz": 25e9,
        "feed": {"incident_az_deg": 90.0, "incident_el_deg": 25.0, "distance_m": 0.18},
        "q_e": 1.0,
        "q_f": 25.0,
        "cells": {"phase_on_deg": 221.0, "phase_off_deg": 74.0, "mag_on": 0.79, "mag_off": 0.94},
        "coupling": {"h_m": H_HAT, "d_m": D_HAT},
        "grid": {"el_min_deg": -80.0, "el_max_deg": 80.0, "step_deg": 2.0},
    }


@pytest.fixture
def write_config(tmp_path: Path, scenario_document: dict[str, Any]) -> Callable[..., Path]:
    """Write a scenario file, applying top-level overrides to the small document."""

    def _write(name: str = "scenario.json", **overrides: Any) -> Path:
        document = {**scenario_document, **overrides}
        path = tmp_path / name
        path.write_text(json.dumps(document))
        return path

    return _write
