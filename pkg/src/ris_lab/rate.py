"""SISO achievable rate of the RIS-aided link with and without mutual coupling."""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass, replace

import numpy as np
import pandas as pd
import structlog
from joblib import Parallel, delayed

from .beamforming import UnitCellStates, cells_for_frequency, continuous_phase_design, quantize_one_bit
from .errors import InvalidArgumentError
from .geometry import Direction, angle_between, rx_position
from .network import CouplingModel, ReflectionState, ScatteringMatrix, factor_coupled, scattering_matrix
from .pattern import Scenario, channel_in, cos_taper
from .settings import settings

logger = structlog.get_logger(__name__)

SWEEP_COLUMNS = ["design", "frequency_hz", "p", "rate_no_mc_bpshz", "rate_mc_bpshz", "gap_bpshz"]
RX_DISTANCE_DEFAULT = 100.0  # m


def dbm_to_mw(value_dbm: float) -> float:
    return float(10.0 ** (value_dbm / 10.0))


@dataclass(frozen=True, eq=False)
class LinkBudget:
    """Transmit power, noise levels and receiver placement.

    Powers are in mW and noise variances per Hz, so rates come out in bps/Hz.
    `calibration` scales the Tx-to-RIS channel amplitude.
    """

    p_t: float
    sigma_r_sq: float
    sigma_0_sq: float
    rx_position: np.ndarray
    calibration: float = 1.0

    def __post_init__(self) -> None:
        for name in ("p_t", "sigma_r_sq", "sigma_0_sq", "calibration"):
            value = getattr(self, name)
            if not (np.isfinite(value) and value > 0):
                raise InvalidArgumentError(f"{name} must be finite and positive, got {value}")
        position = np.asarray(self.rx_position, dtype=float)
        if position.shape != (3,) or not np.all(np.isfinite(position)):
            raise InvalidArgumentError("rx_position must be a finite 3-vector")
        position.setflags(write=False)
        object.__setattr__(self, "rx_position", position)

    @classmethod
    def from_db(
        cls,
        p_t_dbm: float = 0.0,
        nf_db: float = 10.0,
        n0_dbm_per_hz: float = -174.0,
        rx_distance: float = RX_DISTANCE_DEFAULT,
        rx_direction: Direction | None = None,
        calibration: float = 1.0,
    ) -> LinkBudget:
        """sigma_r^2 = sigma_0^2 = 10^((NF + N0)/10) mW."""
        noise = dbm_to_mw(nf_db + n0_dbm_per_hz)
        return cls(
            p_t=dbm_to_mw(p_t_dbm),
            sigma_r_sq=noise,
            sigma_0_sq=noise,
            rx_position=rx_position(rx_distance, rx_direction),
            calibration=calibration,
        )


def _snr(signal: complex, cascade: np.ndarray, budget: LinkBudget) -> float:
    noise = budget.sigma_r_sq * float(np.vdot(cascade, cascade).real) + budget.sigma_0_sq
    return float(budget.p_t * abs(signal) ** 2 / noise)


def _check_channels(h_ri: np.ndarray, h_it: np.ndarray, theta: ReflectionState) -> tuple[np.ndarray, np.ndarray]:
    h_ri = np.asarray(h_ri, dtype=complex).ravel()
    h_it = np.asarray(h_it, dtype=complex).ravel()
    if not h_ri.size == h_it.size == theta.size:
        raise InvalidArgumentError(f"channel lengths {h_ri.size}, {h_it.size} do not match {theta.size} elements")
    return h_ri, h_it


def snr_coupled(
    h_ri: np.ndarray, h_it: np.ndarray, theta: ReflectionState, s_ii: ScatteringMatrix, budget: LinkBudget
) -> float:
    """P_T |h_RI M h_IT|^2 / (sigma_r^2 ||h_RI M||^2 + sigma_0^2) with M = (Theta^-1 - S_II)^-1."""
    h_ri, h_it = _check_channels(h_ri, h_it, theta)
    cascade = factor_coupled(theta, s_ii).apply_left(h_ri)
    return _snr(cascade @ h_it, cascade, budget)


def snr_uncoupled(h_ri: np.ndarray, h_it: np.ndarray, theta: ReflectionState, budget: LinkBudget) -> float:
    """P_T |h_RI Theta h_IT|^2 / (sigma_r^2 ||h_RI Theta||^2 + sigma_0^2)."""
    h_ri, h_it = _check_channels(h_ri, h_it, theta)
    cascade = h_ri * theta.effective
    return _snr(cascade @ h_it, cascade, budget)


def achievable_rate(gamma: float | np.ndarray) -> float | np.ndarray:
    """log2(1 + gamma) in bps/Hz."""
    gamma_arr = np.asarray(gamma, dtype=float)
    if np.any(gamma_arr < 0) or np.any(np.isnan(gamma_arr)):
        raise InvalidArgumentError("SNR must be non-negative")
    rate = np.log2(1.0 + gamma_arr)
    return float(rate) if rate.ndim == 0 else rate


def _hop_gain(scenario: Scenario) -> float:
    """lambda / (4 pi), applied once per hop."""
    return scenario.wavelength / (4.0 * np.pi)


def rx_channel(scenario: Scenario, budget: LinkBudget) -> np.ndarray:
    """RIS-to-Rx channel: lambda/(4 pi) cos^q_e(theta_n) / r_n exp(-j k0 r_n)."""
    rays = budget.rx_position - scenario.array.element_positions
    distances = np.linalg.norm(rays, axis=-1)
    if np.any(distances == 0.0):
        raise InvalidArgumentError("receiver coincides with an array element")
    taper = cos_taper(angle_between(rays, np.array([0.0, 0.0, 1.0])), scenario.q_e)
    return _hop_gain(scenario) * taper / distances * np.exp(-1j * scenario.k0 * distances)


def tx_channel(scenario: Scenario, budget: LinkBudget) -> np.ndarray:
    """Tx-to-RIS channel: the feed channel scaled by lambda/(4 pi) and the calibration factor."""
    return budget.calibration * _hop_gain(scenario) * channel_in(scenario)


def calibrate_amplitude(
    target_rate: float,
    scenario: Scenario,
    design: ReflectionState,
    budget: LinkBudget,
    s_ii: ScatteringMatrix | None = None,
) -> float:
    """Tx-hop amplitude factor c that makes `design` reach `target_rate`; gamma scales as c^2."""
    if not target_rate > 0:
        raise InvalidArgumentError(f"target rate must be positive, got {target_rate}")
    unit = replace(budget, calibration=1.0)
    h_it = tx_channel(scenario, unit)
    h_ri = rx_channel(scenario, unit)
    if s_ii is None:
        gamma = snr_uncoupled(h_ri, h_it, design, unit)
    else:
        gamma = snr_coupled(h_ri, h_it, design, s_ii, unit)
    if not gamma > 0:
        raise InvalidArgumentError("design delivers no signal; calibration is undefined")
    return float(np.sqrt((2.0**target_rate - 1.0) / gamma))


def designs_for(
    scenario: Scenario, cells: UnitCellStates, target: Direction | None = None
) -> dict[str, ReflectionState]:
    """Continuous and 1-bit designs steering toward `target` (the array normal by default)."""
    continuous = continuous_phase_design(scenario, target or Direction(azimuth=0.0, elevation=0.0))
    return {"quantized": quantize_one_bit(continuous, cells), "continuous": continuous}


def _rate_pair(
    h_ri: np.ndarray, h_it: np.ndarray, state: ReflectionState, s_ii: ScatteringMatrix, budget: LinkBudget
) -> tuple[float, float]:
    rate_no_mc = achievable_rate(snr_uncoupled(h_ri, h_it, state, budget))
    rate_mc = achievable_rate(snr_coupled(h_ri, h_it, state, s_ii, budget))
    return rate_no_mc, rate_mc


def _row(design: str, frequency: float, p: float, rates: tuple[float, float]) -> dict:
    rate_no_mc, rate_mc = rates
    return {
        "design": design,
        "frequency_hz": frequency,
        "p": p,
        "rate_no_mc_bpshz": rate_no_mc,
        "rate_mc_bpshz": rate_mc,
        "gap_bpshz": rate_no_mc - rate_mc,
    }


def sweep_amplification(
    scenario: Scenario,
    designs: Sequence[ReflectionState],
    model: CouplingModel,
    budget: LinkBudget,
    p_values: Sequence[float],
    n_jobs: int | None = None,
) -> pd.DataFrame:
    """Rates with and without coupling for every design scaled by every p, in input order."""
    p_values = [float(p) for p in p_values]
    if not p_values or any(not p >= 1.0 for p in p_values):
        raise InvalidArgumentError("amplification coefficients must be >= 1")
    s_ii = scattering_matrix(scenario.array, model, scenario.frequency)
    h_it = tx_channel(scenario, budget)
    h_ri = rx_channel(scenario, budget)
    cells = [(design, p) for design in designs for p in p_values]
    logger.info("Amplification sweep", designs=len(designs), points=len(p_values), frequency=scenario.frequency)

    rates = Parallel(n_jobs=n_jobs or settings.get_threads(), prefer="threads")(
        delayed(_rate_pair)(h_ri, h_it, design.amplified(p), s_ii, budget) for design, p in cells
    )
    rows = [_row(design.label, scenario.frequency, p, pair) for (design, p), pair in zip(cells, rates, strict=True)]
    return pd.DataFrame(rows, columns=SWEEP_COLUMNS)


def sweep_frequency(
    scenarios: Sequence[Scenario],
    model: CouplingModel,
    budget: LinkBudget,
    p: float = 1.0,
    cells: Sequence[UnitCellStates] | None = None,
) -> pd.DataFrame:
    """Quantized and continuous rates with and without coupling for every scenario.

    Each scenario re-evaluates S_II at its own frequency and, unless `cells` is
    given, quantizes with the measured cell states recorded at that frequency.
    The table has one row per scenario and design (2 x len(scenarios) rows), each
    carrying both rates and their gap.
    """
    if not scenarios:
        raise InvalidArgumentError("sweep_frequency needs at least one scenario")
    if any(scenario.array != scenarios[0].array for scenario in scenarios):
        raise InvalidArgumentError("all scenarios of a frequency sweep must share the array")
    if cells is not None and len(cells) != len(scenarios):
        raise InvalidArgumentError("one unit-cell table per scenario is required")

    frames = []
    for index, scenario in enumerate(scenarios):
        scenario_cells = cells[index] if cells is not None else cells_for_frequency(scenario.frequency)
        designs = designs_for(scenario, scenario_cells)
        frames.append(sweep_amplification(scenario, list(designs.values()), model, budget, [p], n_jobs=1))
    return pd.concat(frames, ignore_index=True)
