"""Microwave network mathematics for the RIS as an N-port.

Reflection coefficients, Z <-> S conversion, the thin-dipole mutual impedance
Z(h, d), assembly of the array impedance matrix Z_II and the coupled RIS
response (Theta^-1 - S_II)^-1.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np
import structlog
from scipy.linalg import LinAlgWarning, get_lapack_funcs, lu_factor, lu_solve
from scipy.special import roots_legendre

from .errors import AccuracyError, ConditioningError, InvalidArgumentError
from .geometry import RisArray, wavenumber
from .settings import settings

logger = structlog.get_logger(__name__)

Z0_DEFAULT = 50.0
NEIGHBOR_TOLERANCE = 1e-9  # m
QUADRATURE_TARGET = 1e-3
QUADRATURE_FAILURE = 1e-2

# N x N complex arrays; the aliases document which representation a function expects.
ImpedanceMatrix = np.ndarray
ScatteringMatrix = np.ndarray


@dataclass(frozen=True)
class CouplingModel:
    """Equivalent side-by-side dipole model of two neighboring unit cells."""

    h: float
    d: float
    z0: float = Z0_DEFAULT
    quadrature_points: int = 512
    # None keeps the matched-input assumption Z_nn = z0.
    self_impedance: complex | None = None

    def __post_init__(self) -> None:
        if not (self.h > 0 and self.d > 0 and self.z0 > 0):
            raise InvalidArgumentError(f"h, d and z0 must be positive (h={self.h}, d={self.d}, z0={self.z0})")
        if self.quadrature_points < 64:
            raise InvalidArgumentError(f"quadrature_points must be >= 64, got {self.quadrature_points}")

    def with_parameters(self, h: float, d: float) -> CouplingModel:
        return replace(self, h=h, d=d)


@dataclass(frozen=True, eq=False)
class ReflectionState:
    """Diagonal reflection coefficients of a single-connected RIS, scaled by `amplification`."""

    theta_diag: np.ndarray
    amplification: float = 1.0
    label: str = ""

    def __post_init__(self) -> None:
        theta = np.asarray(self.theta_diag, dtype=complex).ravel()
        if not np.all(np.isfinite(theta)):
            raise InvalidArgumentError("reflection coefficients must be finite")
        if not self.amplification >= 1.0:
            raise InvalidArgumentError(f"amplification must be >= 1, got {self.amplification}")
        theta.setflags(write=False)
        object.__setattr__(self, "theta_diag", theta)

    @property
    def size(self) -> int:
        return self.theta_diag.size

    @property
    def effective(self) -> np.ndarray:
        """p * Theta_nn."""
        return self.amplification * self.theta_diag

    @property
    def phases_deg(self) -> np.ndarray:
        return np.mod(np.rad2deg(np.angle(self.theta_diag)), 360.0)

    @property
    def magnitudes(self) -> np.ndarray:
        return np.abs(self.theta_diag)

    def amplified(self, p: float) -> ReflectionState:
        return replace(self, amplification=p)

    @classmethod
    def from_polar(cls, phases_deg: np.ndarray, magnitudes: np.ndarray | float = 1.0, **kwargs) -> ReflectionState:
        theta = np.asarray(magnitudes, dtype=float) * np.exp(1j * np.deg2rad(np.asarray(phases_deg, dtype=float)))
        return cls(theta_diag=np.atleast_1d(theta), **kwargs)


def reflection_from_load(z_ris: complex, z0: float = Z0_DEFAULT) -> complex:
    """Theta = (Z_RIS - Z0) / (Z_RIS + Z0)."""
    if z_ris + z0 == 0:
        raise InvalidArgumentError(f"load {z_ris} ohm cancels the reference impedance {z0} ohm")
    return complex((z_ris - z0) / (z_ris + z0))


def load_from_reflection(theta: complex, z0: float = Z0_DEFAULT) -> complex:
    """Z_RIS = Z0 (1 + Theta) / (1 - Theta)."""
    if theta == 1:
        raise InvalidArgumentError("reflection coefficient 1 corresponds to an open circuit")
    return complex(z0 * (1 + theta) / (1 - theta))


def classify_load(z_ris: complex, z0: float = Z0_DEFAULT) -> str:
    """'quasi-passive' (|Theta| < 1), 'reactive' (|Theta| = 1) or 'active' (|Theta| > 1)."""
    resistance = complex(z_ris).real
    if abs(resistance) <= 1e-12 * z0:
        return "reactive"
    return "quasi-passive" if resistance > 0 else "active"


def reflection_from_state(phase_deg: float, magnitude: float) -> complex:
    return complex(magnitude * np.exp(1j * np.deg2rad(phase_deg)))


def _factor(matrix: np.ndarray, operation: str) -> tuple[tuple[np.ndarray, np.ndarray], float]:
    """LU-factor with partial pivoting and estimate the 1-norm condition number."""
    if not np.all(np.isfinite(matrix)):
        raise ConditioningError(operation, float("inf"))
    with warnings.catch_warnings():
        warnings.simplefilter("error", LinAlgWarning)
        try:
            lu, piv = lu_factor(matrix, check_finite=False)
        except LinAlgWarning as e:
            raise ConditioningError(operation, float("inf")) from e

    (gecon,) = get_lapack_funcs(("gecon",), (lu,))
    rcond, _ = gecon(lu, np.linalg.norm(matrix, 1), norm="1")
    condition = float("inf") if rcond <= 0 else 1.0 / float(rcond)
    if condition > settings.condition_limit:
        raise ConditioningError(operation, condition)
    if condition > settings.condition_warn:
        logger.warning("Ill-conditioned solve", operation=operation, condition=condition)
    return (lu, piv), condition


def _symmetrize_like(result: np.ndarray, source: np.ndarray) -> np.ndarray:
    if np.array_equal(source, source.T):
        return 0.5 * (result + result.T)
    return result


def z_to_s(z: ImpedanceMatrix, z0: float = Z0_DEFAULT) -> ScatteringMatrix:
    """S = (Z + Z0 I)^-1 (Z - Z0 I)."""
    z = np.asarray(z, dtype=complex)
    eye = np.eye(z.shape[0])
    factors, _ = _factor(z + z0 * eye, "z_to_s")
    return _symmetrize_like(lu_solve(factors, z - z0 * eye), z)


def s_to_z(s: ScatteringMatrix, z0: float = Z0_DEFAULT) -> ImpedanceMatrix:
    """Z = Z0 (I + S)(I - S)^-1."""
    s = np.asarray(s, dtype=complex)
    eye = np.eye(s.shape[0])
    factors, _ = _factor(eye - s, "s_to_z")
    # (I+S)(I-S)^-1 = ((I-S)^-T (I+S)^T)^T
    z = z0 * lu_solve(factors, (eye + s).T, trans=1).T
    return _symmetrize_like(z, s)


@lru_cache(maxsize=32)
def _legendre(n: int) -> tuple[np.ndarray, np.ndarray]:
    nodes, weights = roots_legendre(n)
    return nodes, weights


def _mutual_impedance_rule(h: float, d: float, k0: float, n: int) -> complex:
    # The integrand is even in z, so integrate [0, h/2] and double; this also
    # keeps the kink of sin(k0 (h/2 - |z|)) at the interval edge.
    nodes, weights = _legendre(n)
    half = h / 2.0
    z = 0.5 * half * (nodes + 1.0)
    r0 = np.sqrt(d * d + z * z)
    r1 = np.sqrt(d * d + (half - z) ** 2)
    r2 = np.sqrt(d * d + (half + z) ** 2)
    kernel = (
        -1j * np.exp(-1j * k0 * r1) / r1
        - 1j * np.exp(-1j * k0 * r2) / r2
        + 2j * np.cos(k0 * half) * np.exp(-1j * k0 * r0) / r0
    )
    integrand = -30.0 * np.sin(k0 * (half - z)) * kernel
    return complex(2.0 * 0.5 * half * np.dot(weights, integrand))


def _relative_change(current: complex, previous: complex) -> float:
    return abs(current - previous) / max(abs(current), np.finfo(float).tiny)


@lru_cache(maxsize=4096)
def mutual_impedance(h: float, d: float, frequency: float, quadrature_points: int = 512) -> complex:
    """Mutual impedance (ohm) of two parallel side-by-side thin dipoles of length h at distance d.

    Gauss-Legendre quadrature, doubled until two successive orders agree within
    0.1% in modulus or the order reaches `settings.quadrature_cap`.
    """
    if not (h > 0 and d > 0):
        raise InvalidArgumentError(f"dipole length and spacing must be positive (h={h}, d={d})")
    k0 = wavenumber(frequency)

    n = quadrature_points
    previous = _mutual_impedance_rule(h, d, k0, n)
    change = _relative_change(previous, _mutual_impedance_rule(h, d, k0, max(n // 2, 2)))
    while 2 * n <= settings.quadrature_cap:
        n *= 2
        current = _mutual_impedance_rule(h, d, k0, n)
        change = _relative_change(current, previous)
        previous = current
        if change < QUADRATURE_TARGET:
            return current

    if change > QUADRATURE_FAILURE:
        raise AccuracyError(f"mutual_impedance: quadrature did not converge (h={h}, d={d}, change={change:.2e})")
    logger.warning("Quadrature above target tolerance", h=h, d=d, order=n, change=change)
    return previous


@lru_cache(maxsize=16)
def neighbor_masks(array: RisArray) -> tuple[np.ndarray, np.ndarray]:
    """Boolean masks of edge neighbors (distance d) and diagonal neighbors (distance sqrt(2) d)."""
    positions = array.element_positions
    distances = np.linalg.norm(positions[:, None, :] - positions[None, :, :], axis=-1)
    edge = np.abs(distances - array.spacing) <= NEIGHBOR_TOLERANCE
    diagonal = np.abs(distances - np.sqrt(2.0) * array.spacing) <= NEIGHBOR_TOLERANCE
    edge.setflags(write=False)
    diagonal.setflags(write=False)
    return edge, diagonal


def assemble_z_ii(array: RisArray, model: CouplingModel, frequency: float) -> ImpedanceMatrix:
    """Array impedance matrix with nearest-neighbor mutual impedances only."""
    edge, diagonal = neighbor_masks(array)
    z_edge = mutual_impedance(model.h, model.d, frequency, model.quadrature_points)
    z_diagonal = mutual_impedance(model.h, np.sqrt(2.0) * model.d, frequency, model.quadrature_points)

    z = np.zeros((array.size, array.size), dtype=complex)
    z[edge] = z_edge
    z[diagonal] = z_diagonal
    np.fill_diagonal(z, model.z0 if model.self_impedance is None else model.self_impedance)
    return z


def scattering_matrix(array: RisArray, model: CouplingModel, frequency: float) -> ScatteringMatrix:
    """S_II of the array at `frequency`; Z(h, d) is re-evaluated per frequency."""
    return z_to_s(assemble_z_ii(array, model, frequency), model.z0)


def coupling_strength(s_ii: ScatteringMatrix) -> dict[str, float]:
    """Largest entry modulus and spectral norm of S_II."""
    s_ii = np.asarray(s_ii)
    return {
        "max_abs_entry": float(np.max(np.abs(s_ii))) if s_ii.size else 0.0,
        "spectral_norm": float(np.linalg.norm(s_ii, 2)) if s_ii.size else 0.0,
    }


class CoupledResponse:
    """Factorized (Theta^-1 - S_II)^-1, reusable across right-hand sides."""

    def __init__(self, theta: ReflectionState, s_ii: ScatteringMatrix) -> None:
        s_ii = np.asarray(s_ii, dtype=complex)
        if s_ii.shape != (theta.size, theta.size):
            raise InvalidArgumentError(f"S_II shape {s_ii.shape} does not match {theta.size} elements")
        effective = theta.effective
        if np.any(effective == 0):
            raise InvalidArgumentError("coupled_response: zero reflection coefficient cannot be inverted")

        self.size = theta.size
        self._diagonal: np.ndarray | None = None
        self._factors: tuple[np.ndarray, np.ndarray] | None = None
        if not np.any(s_ii):
            # Conventional model: the response is p*Theta exactly.
            self._diagonal = effective
            self.condition = float(np.max(np.abs(effective)) / np.min(np.abs(effective)))
        else:
            system = np.diag(1.0 / effective) - s_ii
            self._factors, self.condition = _factor(system, "coupled_response")

    def apply(self, x: np.ndarray) -> np.ndarray:
        """(Theta^-1 - S_II)^-1 x."""
        if self._diagonal is not None:
            return (self._diagonal * x.T).T
        return lu_solve(self._factors, x)

    def apply_left(self, y: np.ndarray) -> np.ndarray:
        """y^T (Theta^-1 - S_II)^-1, returned as a vector."""
        if self._diagonal is not None:
            return y * self._diagonal
        return lu_solve(self._factors, y, trans=1)

    def matrix(self) -> np.ndarray:
        if self._diagonal is not None:
            return np.diag(self._diagonal)
        return lu_solve(self._factors, np.eye(self.size, dtype=complex))


def factor_coupled(theta: ReflectionState, s_ii: ScatteringMatrix) -> CoupledResponse:
    return CoupledResponse(theta, s_ii)


def coupled_response(theta: ReflectionState, s_ii: ScatteringMatrix) -> np.ndarray:
    """(Theta^-1 - S_II)^-1 with Theta = p * diag(theta_diag)."""
    return factor_coupled(theta, s_ii).matrix()


def coupled_solve_from_impedance(
    theta: ReflectionState, z_ii: ImpedanceMatrix, z0: float, rhs: np.ndarray
) -> np.ndarray:
    """(Theta^-1 - S_II)^-1 rhs without forming S_II.

    With W = Z_II + Z0 I, S_II = I - 2 Z0 W^-1, so the system becomes
    (W (Theta^-1 - I) + 2 Z0 I) x = W rhs.
    """
    effective = theta.effective
    if np.any(effective == 0):
        raise InvalidArgumentError("coupled_response: zero reflection coefficient cannot be inverted")
    w = np.asarray(z_ii, dtype=complex) + z0 * np.eye(effective.size)
    system = w * (1.0 / effective - 1.0)[None, :]
    system[np.diag_indices_from(system)] += 2.0 * z0
    factors, _ = _factor(system, "coupled_response")
    return lu_solve(factors, w @ rhs)
