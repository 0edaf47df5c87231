#!/usr/bin/env python3
"""
Environment Configuration Validator

Checks that the RIS_LAB_* settings load and are consistent, and that the
bundled unit-cell table and measurement presets are readable.
"""

import os
import sys
from pathlib import Path


def check_env_file():
    """Report whether a .env file is present (it is optional)."""
    env_file = Path(".env")
    if env_file.exists():
        print(".env file found, RIS_LAB_* values in it override the defaults")
    else:
        print("ℹNo .env file, using process environment and defaults")


def validate_settings():
    """Validate settings can be loaded."""
    try:
        sys.path.insert(0, str(Path.cwd() / "src"))
        from ris_lab.settings import settings

        print("Settings loaded successfully")
        return settings
    except Exception as e:
        print(f"Failed to load settings: {e}")
        return None


def check_numerics(settings):
    """Check the conditioning thresholds and quadrature cap."""
    issues = []
    if settings.condition_warn >= settings.condition_limit:
        issues.append(
            f"RIS_LAB_CONDITION_WARN ({settings.condition_warn:g}) must be below "
            f"RIS_LAB_CONDITION_LIMIT ({settings.condition_limit:g})"
        )
    else:
        print(f"Condition thresholds: warn {settings.condition_warn:g}, reject {settings.condition_limit:g}")

    if settings.quadrature_cap < 512:
        issues.append(f"RIS_LAB_QUADRATURE_CAP ({settings.quadrature_cap}) is below the default starting order 512")
    else:
        print(f"Quadrature cap: {settings.quadrature_cap}")
    return issues


def check_threads(settings):
    """Compare the worker cap with the available cores."""
    cores = os.cpu_count() or 1
    threads = settings.get_threads()
    if threads > cores:
        print(f"RIS_LAB_THREADS={threads} exceeds the {cores} available cores")
    else:
        print(f"Grid evaluation uses {threads} of {cores} cores")


def check_bundled_data():
    """Load the unit-cell table and every preset."""
    try:
        from ris_lab.beamforming import unit_cell_table
        from ris_lab.schemas import PRESETS, load_preset

        table = unit_cell_table()
        print(f"Unit-cell table: {', '.join(sorted(table))}")
        for name in PRESETS:
            config = load_preset(name)
            print(f"Preset {name}: {config.frequency_hz / 1e9:g} GHz, {config.array.rows}x{config.array.cols} array")
        return True
    except Exception as e:
        print(f"Bundled data could not be loaded: {e}")
        return False


def main():
    """Main validation function."""
    print("🔍 Validating Environment Configuration\n")

    if not Path("src").exists():
        print("Please run this script from the project root directory")
        sys.exit(1)

    success = True

    check_env_file()
    print()

    settings = validate_settings()
    if not settings:
        sys.exit(1)
    print()

    issues = check_numerics(settings)
    if issues:
        print("Configuration issues found:")
        for issue in issues:
            print(f"   - {issue}")
        success = False
    print()

    check_threads(settings)
    print()

    if not check_bundled_data():
        success = False
    print()

    if success:
        print("Configuration validation passed!")
        print("\nTry it out:")
        print("   ris-lab pattern --preset p1 --out p1.csv")
    else:
        print("Configuration validation failed!")
        print("See ENVIRONMENT.md for the available settings.")
        sys.exit(1)


if __name__ == "__main__":
    main()
