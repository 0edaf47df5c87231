"""Acceptance checks on the bundled measurement scenarios.

These run the full 20x20 prototype and are deselected by `scripts/test.sh --fast`.
"""

import time
from dataclasses import replace

import numpy as np
import pytest

from ris_lab.beamforming import continuous_phase_design, quantize_one_bit
from ris_lab.fitting import SearchBox, fit_grid_search, synthesize_reference
from ris_lab.geometry import Direction, build_array
from ris_lab.network import CouplingModel, ReflectionState, scattering_matrix
from ris_lab.pattern import PatternGrid, pattern_conventional, pattern_coupled, side_lobe_level
from ris_lab.rate import (
    LinkBudget,
    calibrate_amplitude,
    designs_for,
    rx_channel,
    snr_coupled,
    snr_uncoupled,
    sweep_amplification,
    sweep_frequency,
    tx_channel,
)
from ris_lab.schemas import load_preset

pytestmark = pytest.mark.acceptance

BROADSIDE = Direction(azimuth=90.0, elevation=0.0)
# Measured p = 1 rates at 22.5 GHz, bps/Hz.
RATE_QUANTIZED_NO_MC = 20.5386
RATE_QUANTIZED_MC = 20.3952
RATE_CONTINUOUS_NO_MC = 21.9126
RATE_CONTINUOUS_MC = 21.8407


@pytest.fixture(scope="module")
def presets():
    return {name: load_preset(name) for name in ("p1", "p2", "p3")}


@pytest.fixture(scope="module")
def shipped_model(presets) -> CouplingModel:
    return presets["p1"].build_coupling_model()


@pytest.fixture(scope="module")
def p1_sweep(presets, shipped_model):
    config = presets["p1"]
    scenario = config.build_scenario()
    designs = designs_for(scenario, config.build_cells())
    p_values = np.logspace(0, 1, 50)
    return sweep_amplification(scenario, [designs["quantized"]], shipped_model, config.build_budget(), p_values)


class TestReductionIdentity:
    @pytest.mark.parametrize("rows", [2, 4, 20])
    def test_zero_coupling_matches_conventional(self, rows, make_scenario, rng) -> None:
        scenario = make_scenario(array=build_array(rows, rows, 0.00382))
        n = scenario.array.size
        grid = PatternGrid.from_range(-80.0, 80.0, 1.0)
        budget = LinkBudget.from_db()
        h_ri, h_it = rx_channel(scenario, budget), tx_channel(scenario, budget)
        zeros = np.zeros((n, n), dtype=complex)

        start = time.perf_counter()
        for _ in range(200):
            theta = ReflectionState.from_polar(
                rng.uniform(0, 360, n), rng.uniform(0.3, 1.0, n), amplification=rng.uniform(1.0, 10.0)
            )
            coupled = pattern_coupled(scenario, theta, zeros, grid)
            conventional = pattern_conventional(scenario, theta, grid)
            np.testing.assert_allclose(coupled.field, conventional.field, rtol=1e-12, atol=0)
            assert snr_coupled(h_ri, h_it, theta, zeros, budget) == pytest.approx(
                snr_uncoupled(h_ri, h_it, theta, budget), rel=1e-12
            )
        assert time.perf_counter() - start < 10.0


def test_coupling_raises_the_p3_side_lobe(presets, shipped_model) -> None:
    config = presets["p3"]
    scenario = config.build_scenario()
    grid = config.build_grid()
    theta = quantize_one_bit(continuous_phase_design(scenario, BROADSIDE), config.build_cells())
    s_ii = scattering_matrix(scenario.array, shipped_model, scenario.frequency)

    coupled = side_lobe_level(pattern_coupled(scenario, theta, s_ii, grid))
    conventional = side_lobe_level(pattern_conventional(scenario, theta, grid))
    assert coupled >= conventional + 1.0


class TestRateGaps:
    def test_gap_grows_with_amplification(self, p1_sweep) -> None:
        gap = p1_sweep["gap_bpshz"].to_numpy()
        assert np.all(gap > 0)
        assert np.all(np.diff(gap) >= -1e-9)
        assert gap[-1] / gap[0] > 5

    def test_gap_shrinks_with_frequency(self, presets, shipped_model) -> None:
        scenarios = [presets[name].build_scenario() for name in ("p1", "p2", "p3")]
        cells = [presets[name].build_cells() for name in ("p1", "p2", "p3")]
        frame = sweep_frequency(scenarios, shipped_model, presets["p1"].build_budget(), cells=cells)

        quantized = frame[frame["design"] == "quantized"]
        gaps = quantized["gap_bpshz"].to_numpy()
        assert gaps[0] > gaps[1] > gaps[2]
        for design in ("quantized", "continuous"):
            rates = frame.loc[frame["design"] == design, "rate_no_mc_bpshz"].to_numpy()
            assert np.all(np.diff(rates) < 0)

    def test_calibrated_levels(self, presets, shipped_model) -> None:
        config = presets["p1"]
        scenario = config.build_scenario()
        designs = designs_for(scenario, config.build_cells())
        budget = config.build_budget()
        calibration = calibrate_amplitude(RATE_QUANTIZED_NO_MC, scenario, designs["quantized"], budget)
        frame = sweep_amplification(
            scenario, list(designs.values()), shipped_model, replace(budget, calibration=calibration), [1.0]
        )

        achieved = frame.set_index("design")
        assert achieved.loc["quantized", "rate_no_mc_bpshz"] == pytest.approx(RATE_QUANTIZED_NO_MC, rel=1e-9)
        deltas = {
            "quantized_mc": achieved.loc["quantized", "rate_mc_bpshz"] - RATE_QUANTIZED_MC,
            "continuous_no_mc": achieved.loc["continuous", "rate_no_mc_bpshz"] - RATE_CONTINUOUS_NO_MC,
            "continuous_mc": achieved.loc["continuous", "rate_mc_bpshz"] - RATE_CONTINUOUS_MC,
        }
        print("calibrated rate deltas (bps/Hz):", deltas)
        assert all(abs(delta) <= 0.8 for delta in deltas.values())


class TestPerformance:
    def test_coupled_pattern_of_the_prototype(self, presets, shipped_model) -> None:
        config = presets["p1"]
        scenario = config.build_scenario()
        theta = continuous_phase_design(scenario, BROADSIDE)
        s_ii = scattering_matrix(scenario.array, shipped_model, scenario.frequency)

        start = time.perf_counter()
        trace = pattern_coupled(scenario, theta, s_ii, PatternGrid.from_range())
        assert time.perf_counter() - start < 1.0
        assert trace.grid.size == 361

    def test_amplification_sweep(self, presets, shipped_model) -> None:
        config = presets["p1"]
        scenario = config.build_scenario()
        designs = list(designs_for(scenario, config.build_cells()).values())

        start = time.perf_counter()
        frame = sweep_amplification(scenario, designs, shipped_model, config.build_budget(), np.logspace(0, 1, 50))
        assert time.perf_counter() - start < 30.0
        assert len(frame) == 100


@pytest.mark.slow
def test_full_fit_recovers_synthetic_parameters(presets) -> None:
    references = []
    for name in ("p1", "p2"):
        config = presets[name]
        scenario = config.build_scenario()
        theta = quantize_one_bit(continuous_phase_design(scenario, BROADSIDE), config.build_cells())
        references.append(synthesize_reference(scenario, theta, 0.0038, 0.0102, config.build_grid()))

    result = fit_grid_search(references, SearchBox.default_for(25e9))
    dh, dd = result.grid_resolution
    assert abs(result.h_hat - 0.0038) <= dh
    assert abs(result.d_hat - 0.0102) <= dd
