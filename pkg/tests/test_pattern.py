"""Tests for pattern synthesis, normalization and side-lobe analysis."""

import numpy as np
import pytest

from ris_lab.errors import DegeneratePatternError, InvalidArgumentError, SideLobeNotFoundError
from ris_lab.geometry import Direction, build_array, place_feed, wavelength
from ris_lab.network import ReflectionState, scattering_matrix
from ris_lab.pattern import (
    PatternGrid,
    PatternTrace,
    Scenario,
    channel_in,
    channel_out,
    cos_taper,
    frame_to_trace,
    main_lobe_bounds,
    normalize,
    pattern_conventional,
    pattern_coupled,
    rms_error_db,
    side_lobe_level,
    steering_matrix,
    trace_to_frame,
)


def trace_from_magnitudes(magnitudes: list[float]) -> PatternTrace:
    grid = PatternGrid(elevations=np.arange(len(magnitudes), dtype=float))
    return PatternTrace.from_field(grid, np.asarray(magnitudes, dtype=complex))


@pytest.fixture
def single_element_scenario() -> Scenario:
    array = build_array(1, 1, 0.004)
    feed = place_feed(array, Direction(0.0, 0.0), 0.2)
    return Scenario(frequency=25e9, feed=feed, q_e=1.0, q_f=25.0, array=array)


class TestGrid:
    def test_default_cut_has_361_points(self) -> None:
        grid = PatternGrid.from_range()
        assert grid.size == 361
        assert grid.elevations[0] == -90.0
        assert grid.elevations[-1] == 90.0
        assert grid.azimuth == 90.0

    def test_rejects_bad_grids(self) -> None:
        with pytest.raises(InvalidArgumentError):
            PatternGrid(elevations=np.array([0.0, 0.0, 1.0]))
        with pytest.raises(InvalidArgumentError):
            PatternGrid(elevations=np.array([-95.0, 0.0]))
        with pytest.raises(InvalidArgumentError):
            PatternGrid(elevations=np.array([0.0]))

    def test_matches(self) -> None:
        assert PatternGrid.from_range(-10, 10, 1).matches(PatternGrid(elevations=np.arange(-10.0, 10.5, 1.0)))
        assert not PatternGrid.from_range(-10, 10, 1).matches(PatternGrid.from_range(-10, 10, 2))


def test_cos_taper_clips_back_radiation() -> None:
    angles = np.deg2rad([0.0, 60.0, 90.0, 120.0, -90.0])
    np.testing.assert_allclose(cos_taper(angles, 1.0), [1.0, 0.5, 0.0, 0.0, 0.0], atol=1e-15)
    assert cos_taper(np.deg2rad(np.array([90.0])), 1.0)[0] == 0.0
    np.testing.assert_allclose(cos_taper(np.deg2rad([60.0]), 2.0), [0.25])


def test_single_element_pattern_follows_element_taper(single_element_scenario: Scenario) -> None:
    grid = PatternGrid(elevations=np.array([-60.0, 0.0, 60.0]))
    theta = ReflectionState(theta_diag=np.array([1.0]))
    trace = pattern_conventional(single_element_scenario, theta, grid)

    np.testing.assert_allclose(trace.normalized_db, [20 * np.log10(0.5), 0.0, 20 * np.log10(0.5)], atol=1e-12)
    np.testing.assert_allclose(trace.magnitude, [0.5, 1.0, 0.5])


def test_channel_in_spreading_and_phase(single_element_scenario: Scenario) -> None:
    h_in = channel_in(single_element_scenario)
    k0 = single_element_scenario.k0
    assert abs(h_in[0]) == pytest.approx(1 / 0.2)
    assert np.angle(h_in[0] * np.exp(1j * k0 * 0.2)) == pytest.approx(0.0, abs=1e-9)


def test_steering_rows_are_channel_out(small_scenario: Scenario, coarse_grid: PatternGrid) -> None:
    steering = steering_matrix(small_scenario, coarse_grid)
    assert steering.shape == (coarse_grid.size, small_scenario.array.size)
    index = 37
    expected = channel_out(small_scenario, Direction(coarse_grid.azimuth, coarse_grid.elevations[index]))
    np.testing.assert_allclose(steering[index], expected, atol=1e-12)


def test_normalization_is_idempotent(small_scenario: Scenario, coarse_grid: PatternGrid, rng) -> None:
    theta = ReflectionState.from_polar(rng.uniform(0, 360, small_scenario.array.size))
    trace = pattern_conventional(small_scenario, theta, coarse_grid)

    assert trace.normalized_db.max() == 0.0
    again = normalize(trace)
    np.testing.assert_array_equal(again.normalized_db, trace.normalized_db)


def test_zero_pattern_cannot_be_normalized(small_scenario: Scenario, coarse_grid: PatternGrid) -> None:
    theta = ReflectionState(theta_diag=np.zeros(small_scenario.array.size))
    with pytest.raises(DegeneratePatternError):
        pattern_conventional(small_scenario, theta, coarse_grid)


def test_state_size_must_match_array(small_scenario: Scenario, coarse_grid: PatternGrid) -> None:
    with pytest.raises(InvalidArgumentError):
        pattern_conventional(small_scenario, ReflectionState(theta_diag=np.ones(3)), coarse_grid)


def test_zero_coupling_reproduces_conventional_pattern(small_scenario: Scenario, coarse_grid: PatternGrid, rng) -> None:
    n = small_scenario.array.size
    for _ in range(20):
        theta = ReflectionState.from_polar(rng.uniform(0, 360, n), rng.uniform(0.5, 1.0, n), amplification=2.0)
        coupled = pattern_coupled(small_scenario, theta, np.zeros((n, n)), coarse_grid)
        conventional = pattern_conventional(small_scenario, theta, coarse_grid)
        np.testing.assert_allclose(coupled.field, conventional.field, rtol=1e-12, atol=0)


def test_coupled_pattern_approaches_conventional(
    small_scenario: Scenario, coarse_grid: PatternGrid, coupling_model
) -> None:
    theta = ReflectionState.from_polar(np.linspace(0, 300, small_scenario.array.size), 0.8)
    s_ii = scattering_matrix(small_scenario.array, coupling_model, small_scenario.frequency)
    conventional = pattern_conventional(small_scenario, theta, coarse_grid)

    errors = [
        np.linalg.norm(pattern_coupled(small_scenario, theta, scale * s_ii, coarse_grid).field - conventional.field)
        for scale in (1.0, 0.1, 0.01)
    ]
    assert errors[0] > errors[1] > errors[2] > 0


def test_coupling_changes_the_pattern(small_scenario: Scenario, coarse_grid: PatternGrid, coupling_model) -> None:
    theta = ReflectionState.from_polar(np.linspace(0, 300, small_scenario.array.size), 0.8)
    s_ii = scattering_matrix(small_scenario.array, coupling_model, small_scenario.frequency)
    coupled = pattern_coupled(small_scenario, theta, s_ii, coarse_grid)
    conventional = pattern_conventional(small_scenario, theta, coarse_grid)
    assert not np.allclose(coupled.field, conventional.field)


class TestSideLobes:
    def test_main_lobe_ends_at_nearest_minima(self) -> None:
        trace = trace_from_magnitudes([0.1, 0.5, 0.2, 1.0, 0.3, 0.6, 0.05])
        assert main_lobe_bounds(trace) == (2, 4)
        assert side_lobe_level(trace) == pytest.approx(20 * np.log10(0.6))

    def test_plateau_belongs_to_main_lobe(self) -> None:
        trace = trace_from_magnitudes([0.7, 0.2, 0.2, 1.0, 0.4, 0.9])
        assert main_lobe_bounds(trace) == (1, 4)
        assert side_lobe_level(trace) == pytest.approx(20 * np.log10(0.9))

    def test_monotone_pattern_has_no_side_lobe(self) -> None:
        with pytest.raises(SideLobeNotFoundError):
            side_lobe_level(trace_from_magnitudes([0.2, 0.5, 1.0, 0.4]))

    def test_uniform_line_array(self) -> None:
        frequency = 25e9
        array = build_array(20, 1, wavelength(frequency) / 2)
        feed = place_feed(array, Direction(0.0, 0.0), 1.0)
        scenario = Scenario(frequency=frequency, feed=feed, q_e=0.0, q_f=0.0, array=array)
        grid = PatternGrid.from_range(step=0.05)

        trace = PatternTrace.from_field(grid, steering_matrix(scenario, grid) @ np.ones(array.size))
        assert side_lobe_level(trace) == pytest.approx(-13.2, abs=0.1)


def test_rms_error_db() -> None:
    trace = trace_from_magnitudes([1.0, 0.1, 1e-5])
    assert rms_error_db(trace, trace.normalized_db) == 0.0
    # Both sides fall below the floor at the last sample.
    assert rms_error_db(trace, np.array([0.0, -20.0, -90.0])) == pytest.approx(0.0, abs=1e-12)
    assert rms_error_db(trace, np.array([0.0, -26.0, -60.0])) == pytest.approx(np.sqrt(36 / 3))
    with pytest.raises(InvalidArgumentError):
        rms_error_db(trace, np.zeros(2))


def test_frame_round_trip(small_scenario: Scenario, coarse_grid: PatternGrid) -> None:
    theta = ReflectionState.from_polar(np.zeros(small_scenario.array.size))
    trace = pattern_conventional(small_scenario, theta, coarse_grid)
    frame = trace_to_frame(trace)

    assert list(frame.columns) == ["theta_el_deg", "re", "im", "norm_db"]
    assert len(frame) == coarse_grid.size
    restored = frame_to_trace(frame)
    np.testing.assert_array_equal(restored.field, trace.field)
    np.testing.assert_array_equal(restored.normalized_db, trace.normalized_db)
