"""Array layout, direction vectors and Tx/Rx placement in the RIS body frame.

The array lies in the x-y plane, centered at the origin, with its normal along +z.
Elevation is measured from the normal, azimuth from +x toward +y. Angles are in
degrees at every external interface and radians internally.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import InvalidArgumentError

SPEED_OF_LIGHT = 299_792_458.0  # m/s

Vector = np.ndarray


def wavelength(frequency: float) -> float:
    """Free-space wavelength in meters."""
    if frequency <= 0:
        raise InvalidArgumentError(f"frequency must be positive, got {frequency}")
    return SPEED_OF_LIGHT / frequency


def wavenumber(frequency: float) -> float:
    """Free-space wavenumber k0 = 2*pi/lambda in rad/m."""
    return 2.0 * np.pi / wavelength(frequency)


@dataclass(frozen=True)
class RisArray:
    """Uniform planar array of rows x cols unit cells with pitch `spacing` (meters).

    Rows run along y and columns along x; elements are ordered row-major starting
    from the (-x, -y) corner.
    """

    rows: int
    cols: int
    spacing: float

    def __post_init__(self) -> None:
        if self.rows < 1 or self.cols < 1:
            raise InvalidArgumentError(f"array dimensions must be >= 1, got {self.rows}x{self.cols}")
        if not self.spacing > 0:
            raise InvalidArgumentError(f"spacing must be positive, got {self.spacing}")

    @property
    def size(self) -> int:
        return self.rows * self.cols

    @cached_property
    def element_positions(self) -> Vector:
        """(N, 3) element positions in meters."""
        y = (np.arange(self.rows) - (self.rows - 1) / 2.0) * self.spacing
        x = (np.arange(self.cols) - (self.cols - 1) / 2.0) * self.spacing
        yy, xx = np.meshgrid(y, x, indexing="ij")
        positions = np.zeros((self.size, 3))
        positions[:, 0] = xx.ravel()
        positions[:, 1] = yy.ravel()
        positions.setflags(write=False)
        return positions

    def wavelength_fraction(self, frequency: float) -> float:
        """Cell pitch in wavelengths at `frequency`."""
        return self.spacing / wavelength(frequency)


def build_array(rows: int, cols: int, spacing: float) -> RisArray:
    """Build a centered rows x cols planar array with the given pitch."""
    return RisArray(rows=rows, cols=cols, spacing=spacing)


@dataclass(frozen=True)
class Direction:
    """Departure or arrival direction in degrees (elevation from the array normal)."""

    azimuth: float
    elevation: float

    def __post_init__(self) -> None:
        if not (np.isfinite(self.azimuth) and np.isfinite(self.elevation)):
            raise InvalidArgumentError("direction angles must be finite")
        if not -90.0 <= self.elevation <= 90.0:
            raise InvalidArgumentError(f"elevation must lie in [-90, 90] degrees, got {self.elevation}")
        object.__setattr__(self, "azimuth", float(self.azimuth) % 360.0)


def unit_vector(direction: Direction) -> Vector:
    """u = [sin(el) cos(az), sin(el) sin(az), cos(el)]."""
    az = np.deg2rad(direction.azimuth)
    el = np.deg2rad(direction.elevation)
    return np.array([np.sin(el) * np.cos(az), np.sin(el) * np.sin(az), np.cos(el)])


def angle_between(a: Vector, b: Vector) -> np.ndarray | float:
    """Angle in radians between vectors along the last axis, in [0, pi]."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    cross = np.linalg.norm(np.cross(a, b), axis=-1)
    dot = np.sum(a * b, axis=-1)
    return np.arctan2(cross, dot)


@dataclass(frozen=True, eq=False)
class FeedPlacement:
    """Tx horn position and boresight; the horn is aimed at the array center."""

    position: Vector
    boresight: Vector
    distance: float
    incident_direction: Direction


def place_feed(array: RisArray, incident: Direction, distance: float) -> FeedPlacement:
    """Put the feed `distance` meters from the array center along `incident`."""
    if not distance > 0:
        raise InvalidArgumentError(f"feed distance must be positive, got {distance}")
    position = distance * unit_vector(incident)
    boresight = -position / np.linalg.norm(position)
    position.setflags(write=False)
    boresight.setflags(write=False)
    return FeedPlacement(position=position, boresight=boresight, distance=distance, incident_direction=incident)


def feed_elevations(feed: FeedPlacement, positions: Vector) -> np.ndarray:
    """Angles (radians) between the horn boresight and the rays toward each position."""
    rays = np.atleast_2d(positions) - feed.position
    if np.any(np.linalg.norm(rays, axis=-1) == 0.0):
        raise InvalidArgumentError("feed coincides with an array element")
    return np.asarray(angle_between(rays, feed.boresight))


def feed_elevation_to_element(feed: FeedPlacement, p_n: Vector) -> float:
    """Elevation of the ray from the feed to element `p_n`, in the horn's frame."""
    return float(feed_elevations(feed, np.asarray(p_n, dtype=float))[0])


def rx_position(distance: float, direction: Direction | None = None) -> Vector:
    """Receiver position; on the array normal unless a direction is given."""
    if not distance > 0:
        raise InvalidArgumentError(f"receiver distance must be positive, got {distance}")
    return distance * unit_vector(direction or Direction(azimuth=0.0, elevation=0.0))
