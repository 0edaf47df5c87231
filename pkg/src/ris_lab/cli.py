"""Command-line entry point: pattern, fit, validate, rate-sweep and convert."""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np
import pandas as pd
import structlog

from . import __version__
from .artifacts import read_matrix_csv, write_csv, write_json, write_matrix_csv
from .beamforming import continuous_phase_design, quantize_one_bit, state_pattern
from .errors import EXIT_OK, ConfigError, RisLabError, SideLobeNotFoundError
from .fitting import SearchBox, fit_grid_search, ingest_reference
from .geometry import Direction
from .logging_config import configure_logging
from .network import CouplingModel, ReflectionState, s_to_z, scattering_matrix, z_to_s
from .pattern import (
    PatternTrace,
    Scenario,
    pattern_conventional,
    pattern_coupled,
    rms_error_db,
    side_lobe_level,
    trace_to_frame,
)
from .rate import calibrate_amplitude, designs_for, sweep_amplification, sweep_frequency
from .schemas import PRESETS, ScenarioConfig, load_config, load_preset
from .settings import settings

logger = structlog.get_logger("ris_lab.cli")


def _load(source: str) -> ScenarioConfig:
    """A preset name or a scenario file path."""
    return load_preset(source) if source.lower() in PRESETS else load_config(source)


def _main_config(args: argparse.Namespace) -> ScenarioConfig:
    return load_preset(args.preset) if args.preset else load_config(args.config)


def _target(args: argparse.Namespace) -> Direction:
    try:
        return Direction(azimuth=args.target_az, elevation=args.target_el)
    except RisLabError as e:
        raise ConfigError(str(e), key="target") from e


def _design(config: ScenarioConfig, scenario: Scenario, design: str, target: Direction) -> ReflectionState:
    state = continuous_phase_design(scenario, target)
    if design == "quantized":
        state = quantize_one_bit(state, config.build_cells())
    return state


def _amplification(p: float) -> float:
    if not p >= 1.0:
        raise ConfigError(f"amplification coefficient must be >= 1, got {p}", key="p")
    return p


def _side_lobe(trace: PatternTrace) -> float | None:
    try:
        return side_lobe_level(trace)
    except SideLobeNotFoundError:
        return None


def cmd_pattern(args: argparse.Namespace) -> None:
    config = _main_config(args)
    scenario = config.build_scenario()
    grid = config.build_grid()
    state = _design(config, scenario, args.design, _target(args)).amplified(_amplification(args.amplification))

    if args.with_mc:
        model = config.build_coupling_model()
        s_ii = scattering_matrix(scenario.array, model, scenario.frequency)
        trace = pattern_coupled(scenario, state, s_ii, grid)
    else:
        trace = pattern_conventional(scenario, state, grid)
    write_csv(trace_to_frame(trace), args.out)
    logger.info(
        "Pattern generated",
        design=args.design,
        with_mc=args.with_mc,
        samples=grid.size,
        side_lobe_db=_side_lobe(trace),
    )

    if args.state_map:
        on = state_pattern(state, config.build_cells(), scenario.array)
        rows, cols = np.indices(on.shape)
        frame = pd.DataFrame({"row": rows.ravel(), "col": cols.ravel(), "on": on.ravel().astype(int)})
        write_csv(frame, args.state_map)


def _parse_search(text: str | None, config: ScenarioConfig, steps: int) -> SearchBox:
    if text is None:
        return SearchBox.default_for(config.frequency_hz, steps=steps)
    try:
        h_min, h_max, d_min, d_max = (float(value) for value in text.split(","))
        return SearchBox(h_min=h_min, h_max=h_max, d_min=d_min, d_max=d_max, steps_h=steps, steps_d=steps)
    except ValueError as e:
        raise ConfigError(f"expected h_min,h_max,d_min,d_max in meters, got {text!r}", key="search") from e


def cmd_fit(args: argparse.Namespace) -> None:
    if not args.reference:
        raise ConfigError("at least one reference pattern is required", key="reference")
    config = _main_config(args)
    target = _target(args)

    references = []
    for item in args.reference:
        path, _, source = item.partition("@")
        ref_config = _load(source) if source else config
        scenario = ref_config.build_scenario()
        grid = ref_config.build_grid()
        theta = _design(ref_config, scenario, args.design, target)
        references.append(
            ingest_reference(path, args.scale, scenario, theta, fit_scale=args.compare, azimuth=grid.azimuth, grid=grid)
        )

    search = _parse_search(args.search, config, args.steps)
    model = CouplingModel(
        h=search.h_min,
        d=search.d_min,
        z0=config.coupling.z0_ohm,
        quadrature_points=config.coupling.quadrature_points,
    )
    result = fit_grid_search(references, search, scale=args.compare, refine=not args.no_refine, model=model)

    out = Path(args.out)
    surface_path = out.with_suffix(".surface.csv")
    surface = pd.DataFrame(result.residual_surface, columns=[f"{d:.9g}" for d in result.d_values])
    surface.insert(0, "h_m", result.h_values)
    write_csv(surface, surface_path)
    write_json(result.to_document(surface_path.name), out)
    logger.info("Fit finished", h_hat=result.h_hat, d_hat=result.d_hat, residual=result.residual)


def cmd_validate(args: argparse.Namespace) -> None:
    config = _main_config(args)
    scenario = config.build_scenario()
    grid = config.build_grid()
    model = config.build_coupling_model()
    theta = _design(config, scenario, args.design, _target(args))
    reference = ingest_reference(
        args.reference, args.scale, scenario, theta, fit_scale="db", azimuth=grid.azimuth, grid=grid
    )

    s_ii = scattering_matrix(scenario.array, model, scenario.frequency)
    coupled = pattern_coupled(scenario, theta, s_ii, grid)
    conventional = pattern_conventional(scenario, theta, grid)
    reference_trace = PatternTrace.from_field(grid, 10.0 ** (reference.samples / 20.0))

    side_lobes = {
        "coupled": _side_lobe(coupled),
        "conventional": _side_lobe(conventional),
        "reference": _side_lobe(reference_trace),
    }
    reference_level = side_lobes["reference"]
    gaps = {
        name: None if side_lobes[name] is None or reference_level is None else side_lobes[name] - reference_level
        for name in ("coupled", "conventional")
    }
    report = {
        "reference": reference.name,
        "design": args.design,
        "coupling": {"h_m": model.h, "d_m": model.d},
        "rms_error_db": {
            "coupled": rms_error_db(coupled, reference.samples),
            "conventional": rms_error_db(conventional, reference.samples),
        },
        "side_lobe_level_db": side_lobes,
        "side_lobe_gap_db": gaps,
    }
    write_json(report, args.out)
    logger.info("Validation finished", **report["rms_error_db"])


def _p_values(args: argparse.Namespace) -> list[float]:
    if args.p_values:
        try:
            values = [float(value) for value in args.p_values.split(",")]
        except ValueError as e:
            raise ConfigError(f"cannot parse p list {args.p_values!r}", key="p") from e
    else:
        if args.points < 1:
            raise ConfigError("at least one sweep point is required", key="points")
        low, high = _amplification(args.p_min), _amplification(args.p_max)
        values = list(np.logspace(np.log10(low), np.log10(high), args.points))
    return [_amplification(p) for p in values]


def cmd_rate_sweep(args: argparse.Namespace) -> None:
    config = _main_config(args)
    model = config.build_coupling_model()
    budget = config.build_budget()

    if args.mode == "amplification":
        scenario = config.build_scenario()
        p_values = _p_values(args)
        designs = designs_for(scenario, config.build_cells())
        if args.calibrate_to is not None:
            reference_design = designs["quantized"].amplified(p_values[0])
            calibration = calibrate_amplitude(args.calibrate_to, scenario, reference_design, budget)
            budget = replace(budget, calibration=calibration)
            logger.info("Calibrated Tx amplitude", calibration=calibration, target_rate=args.calibrate_to)
        frame = sweep_amplification(scenario, list(designs.values()), model, budget, p_values)
    else:
        configs = [_load(source) for source in (args.scenario or PRESETS)]
        scenarios = [item.build_scenario() for item in configs]
        cells = [item.build_cells() for item in configs]
        if args.calibrate_to is not None:
            first = designs_for(scenarios[0], cells[0])["quantized"]
            calibration = calibrate_amplitude(args.calibrate_to, scenarios[0], first, budget)
            budget = replace(budget, calibration=calibration)
            logger.info("Calibrated Tx amplitude", calibration=calibration, target_rate=args.calibrate_to)
        frame = sweep_frequency(scenarios, model, budget, p=1.0, cells=cells)
    write_csv(frame, args.out)


def cmd_convert(args: argparse.Namespace) -> None:
    if not args.z0 > 0:
        raise ConfigError(f"reference impedance must be positive, got {args.z0}", key="z0")
    matrix = read_matrix_csv(args.matrix)
    converted = z_to_s(matrix, args.z0) if args.direction == "z2s" else s_to_z(matrix, args.z0)
    write_matrix_csv(converted, args.out)


def _add_scenario_source(parser: argparse.ArgumentParser) -> None:
    source = parser.add_mutually_exclusive_group(required=True)
    source.add_argument("--config", type=Path, help="Scenario JSON file")
    source.add_argument("--preset", choices=PRESETS, help="Bundled measurement scenario")


def _add_design(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--design", choices=["continuous", "quantized"], default="quantized")
    parser.add_argument("--target-az", type=float, default=90.0, help="Beam azimuth in degrees")
    parser.add_argument("--target-el", type=float, default=0.0, help="Beam elevation in degrees")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ris-lab", description="RIS mutual coupling modelling toolkit")
    parser.add_argument("--version", action="version", version=f"ris-lab {__version__}")
    parser.add_argument(
        "--log-level", type=str.upper, choices=["DEBUG", "INFO", "WARNING", "ERROR"], help="Override RIS_LAB_LOG_LEVEL"
    )
    commands = parser.add_subparsers(dest="command", required=True)

    pattern = commands.add_parser("pattern", help="Radiation pattern of a beamforming design")
    _add_scenario_source(pattern)
    _add_design(pattern)
    coupling = pattern.add_mutually_exclusive_group()
    coupling.add_argument(
        "--with-mc", dest="with_mc", action="store_true", default=True, help="Include mutual coupling (default)"
    )
    coupling.add_argument("--no-mc", dest="with_mc", action="store_false", help="Ignore mutual coupling")
    pattern.add_argument("--amplification", type=float, default=1.0, help="Amplification coefficient p")
    pattern.add_argument("--state-map", type=Path, help="Also write the ON/OFF element map")
    pattern.add_argument("--out", type=Path, required=True)
    pattern.set_defaults(handler=cmd_pattern)

    fit = commands.add_parser("fit", help="Estimate the dipole parameters (h, d) from reference patterns")
    _add_scenario_source(fit)
    _add_design(fit)
    fit.add_argument(
        "--reference",
        action="append",
        metavar="PATH[@SCENARIO]",
        help="Reference CSV, optionally with its own scenario file or preset (repeatable)",
    )
    fit.add_argument(
        "--scale", choices=["linear", "field-db", "power-db"], default="linear", help="Scale of the reference files"
    )
    fit.add_argument("--compare", choices=["linear", "db"], default="linear", help="Scale of the fit objective")
    fit.add_argument("--steps", type=int, default=100, help="Grid points per axis")
    fit.add_argument("--search", metavar="H_MIN,H_MAX,D_MIN,D_MAX", help="Search box in meters")
    fit.add_argument("--no-refine", action="store_true", help="Skip the local x10 refinement")
    fit.add_argument("--out", type=Path, required=True)
    fit.set_defaults(handler=cmd_fit)

    validate = commands.add_parser("validate", help="Compare coupled and conventional models against a reference")
    _add_scenario_source(validate)
    _add_design(validate)
    validate.add_argument("--reference", type=Path, required=True)
    validate.add_argument("--scale", choices=["linear", "field-db", "power-db"], default="linear")
    validate.add_argument("--out", type=Path, required=True)
    validate.set_defaults(handler=cmd_validate)

    sweep = commands.add_parser("rate-sweep", help="Achievable rate sweeps over p or frequency")
    _add_scenario_source(sweep)
    sweep.add_argument("--mode", choices=["amplification", "frequency"], default="amplification")
    sweep.add_argument("--p-min", type=float, default=1.0)
    sweep.add_argument("--p-max", type=float, default=10.0)
    sweep.add_argument("--points", type=int, default=50, help="Log-spaced p values")
    sweep.add_argument("--p-values", help="Explicit comma-separated p values")
    sweep.add_argument("--scenario", action="append", help="Scenario file or preset for frequency mode (repeatable)")
    sweep.add_argument("--calibrate-to", type=float, help="Tune the Tx amplitude so the first row reaches this rate")
    sweep.add_argument("--out", type=Path, required=True)
    sweep.set_defaults(handler=cmd_rate_sweep)

    convert = commands.add_parser("convert", help="Z <-> S conversion of a complex matrix CSV")
    convert.add_argument("--matrix", type=Path, required=True)
    convert.add_argument("--direction", choices=["z2s", "s2z"], required=True)
    convert.add_argument("--z0", type=float, default=50.0)
    convert.add_argument("--out", type=Path, required=True)
    convert.set_defaults(handler=cmd_convert)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging(args.log_level or settings.log_level, settings.log_format)
    try:
        args.handler(args)
    except RisLabError as e:
        logger.error("Command failed", command=args.command, error=str(e), exit_code=e.exit_code)
        print(f"ris-lab {args.command}: {e}", file=sys.stderr)
        return e.exit_code
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
