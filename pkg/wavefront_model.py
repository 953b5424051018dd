"""
Spherical-Wavefront Propagation Model
Propagation deltas, steering vectors, the communication channel and the
analytic derivative vectors for coplanar and non-coplanar targets
"""

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Tuple

import numpy as np

from array_geometry import AntennaLayout
from errors import (
    ContractViolationError,
    DegenerateGeometryError,
    InvalidGeometryError,
    SingularChannelError,
)

# closer than this to an element counts as coincident
COINCIDENCE_TOL = 1e-12


class TargetCase(str, Enum):
    COPLANAR = "coplanar"
    NONCOPLANAR = "noncoplanar"


@dataclass(frozen=True)
class TargetState:
    """Cylindrical position (rho, phi, y) of a sensing target or user"""
    rho: float
    phi: float
    y: float = 0.0

    def __post_init__(self):
        if self.rho < 0:
            raise InvalidGeometryError(f"rho must be non-negative, got {self.rho}")

    @property
    def case(self) -> TargetCase:
        return TargetCase.COPLANAR if self.y == 0 else TargetCase.NONCOPLANAR

    @property
    def parameter_names(self) -> Tuple[str, ...]:
        if self.case == TargetCase.COPLANAR:
            return ("rho", "phi")
        return ("rho", "phi", "y")

    @property
    def cartesian(self) -> np.ndarray:
        """[x, y, z] with the array in the x-z plane"""
        return np.array([self.rho * math.cos(self.phi), self.y, self.rho * math.sin(self.phi)])

    @property
    def range_from_origin(self) -> float:
        return math.hypot(self.rho, self.y)

    @classmethod
    def from_cartesian(cls, x: float, y: float, z: float) -> "TargetState":
        return cls(rho=math.hypot(x, z), phi=math.atan2(z, x), y=y)

    @classmethod
    def from_degrees(cls, rho: float, phi_deg: float, y: float = 0.0) -> "TargetState":
        return cls(rho=rho, phi=math.radians(phi_deg), y=y)

    def shifted(self, name: str, step: float) -> "TargetState":
        values = {"rho": self.rho, "phi": self.phi, "y": self.y}
        values[name] += step
        return TargetState(**values)


@dataclass(frozen=True)
class Scenario:
    wavelength: float  # metres
    noise_power: float  # watts
    snapshots: int = 1
    alpha_s: complex = 1.0 + 0.0j
    p_max: float = 1.0  # watts
    gamma_min: float = 0.0  # linear SINR threshold

    def __post_init__(self):
        if not self.wavelength > 0 or not self.noise_power > 0 or not self.p_max > 0:
            raise ContractViolationError("wavelength, noise power and power budget must be positive")
        if self.snapshots < 1:
            raise ContractViolationError(f"snapshots must be >= 1, got {self.snapshots}")
        if self.gamma_min < 0:
            raise ContractViolationError(f"SINR threshold must be non-negative, got {self.gamma_min}")

    @property
    def wavenumber(self) -> float:
        return 2.0 * math.pi / self.wavelength

    @property
    def sensing_gain(self) -> float:
        """2 |alpha_s|^2 L / sigma^2, the common factor of every FIM entry"""
        return 2.0 * abs(self.alpha_s) ** 2 * self.snapshots / self.noise_power

    @property
    def sinr_floor(self) -> float:
        """gamma_min * sigma^2, the required |h_c^H w|^2"""
        return self.gamma_min * self.noise_power


@dataclass(frozen=True)
class SteeringBundle:
    alpha: np.ndarray
    aux: Dict[str, np.ndarray] = field(default_factory=dict)
    scales: Dict[str, float] = field(default_factory=dict)  # per coordinate, multiplies j*k*aux
    derivs: Dict[str, np.ndarray] = field(default_factory=dict)


def element_distances(layout: AntennaLayout, point: np.ndarray) -> np.ndarray:
    return np.linalg.norm(layout.positions - point[None, :], axis=1)


def _check_target(target: TargetState) -> None:
    if target.case == TargetCase.NONCOPLANAR and target.rho == 0:
        raise DegenerateGeometryError("non-coplanar target on the array axis (rho = 0)")


def _circle_distances(layout: AntennaLayout, target: TargetState) -> Tuple[np.ndarray, np.ndarray]:
    """(phi_m - phi, in-plane distance rho_m) for every UCA element"""
    dphi = layout.angles - target.phi
    r = layout.radius
    rho_m = np.sqrt(np.maximum(r * r + target.rho ** 2 - 2.0 * r * target.rho * np.cos(dphi), 0.0))
    return dphi, rho_m


def propagation_delta_generic(layout: AntennaLayout, target: TargetState) -> np.ndarray:
    """||p_m - p|| - ||p|| from raw 3D coordinates"""
    p = target.cartesian
    return element_distances(layout, p) - float(np.linalg.norm(p))


def propagation_delta(layout: AntennaLayout, target: TargetState) -> np.ndarray:
    """Per-element path difference l_m relative to the array centre (metres)"""
    _check_target(target)
    if not layout.is_uca:
        return propagation_delta_generic(layout, target)

    _, rho_m = _circle_distances(layout, target)
    if target.case == TargetCase.COPLANAR:
        return rho_m - target.rho
    y2 = target.y ** 2
    return np.sqrt(rho_m ** 2 + y2) - math.sqrt(target.rho ** 2 + y2)


def steering(layout: AntennaLayout, target: TargetState, wavelength: float) -> np.ndarray:
    l = propagation_delta(layout, target)
    return np.exp(-1j * (2.0 * np.pi / wavelength) * l)


def comm_channel(layout: AntennaLayout, user: TargetState, wavelength: float) -> np.ndarray:
    """Free-space channel with per-element amplitude lambda / (4 pi d_m) and spherical phase"""
    d = element_distances(layout, user.cartesian)
    if np.any(d <= COINCIDENCE_TOL):
        raise SingularChannelError("user coincides with an array element")
    l = d - user.range_from_origin
    return (wavelength / (4.0 * np.pi * d)) * np.exp(-1j * (2.0 * np.pi / wavelength) * l)


def _require_uca(layout: AntennaLayout) -> None:
    if not layout.is_uca:
        raise ContractViolationError("auxiliary vectors are defined for circular arrays only")


def aux_coplanar(layout: AntennaLayout, target: TargetState) -> Tuple[np.ndarray, np.ndarray]:
    """(v1, v2): angle and distance auxiliary vectors for an in-plane target"""
    _require_uca(layout)
    if target.case != TargetCase.COPLANAR:
        raise ContractViolationError("aux_coplanar called for a non-coplanar target")
    dphi, rho_m = _circle_distances(layout, target)
    if np.any(rho_m <= COINCIDENCE_TOL):
        raise SingularChannelError("target coincides with an array element")

    r = layout.radius
    v1 = r * target.rho * np.sin(dphi) / rho_m
    v2 = (target.rho - r * np.cos(dphi)) / rho_m - 1.0
    return v1, v2


def aux_noncoplanar(layout: AntennaLayout, target: TargetState) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(v21, v22, v23): distance, angle and height auxiliary vectors for an out-of-plane target"""
    _require_uca(layout)
    if target.case != TargetCase.NONCOPLANAR:
        raise ContractViolationError("aux_noncoplanar called for a coplanar target")
    _check_target(target)

    dphi, rho_m = _circle_distances(layout, target)
    y2 = target.y ** 2
    d_m = np.sqrt(rho_m ** 2 + y2)
    d_0 = math.sqrt(target.rho ** 2 + y2)
    r = layout.radius

    v21 = target.rho / d_0 - (target.rho - r * np.cos(dphi)) / d_m
    v22 = np.sin(-dphi) / d_m
    v23 = 1.0 / d_0 - 1.0 / d_m
    return v21, v22, v23


def delta_gradient_generic(layout: AntennaLayout, target: TargetState) -> Dict[str, np.ndarray]:
    """d l_m / d u for every coordinate u, valid for any layout"""
    _check_target(target)
    p = target.cartesian
    diff = p[None, :] - layout.positions
    d = np.linalg.norm(diff, axis=1)
    if np.any(d <= COINCIDENCE_TOL):
        raise SingularChannelError("target coincides with an array element")

    c, s = math.cos(target.phi), math.sin(target.phi)
    d_0 = target.range_from_origin
    tangents = {
        "rho": (np.array([c, 0.0, s]), target.rho / d_0 if d_0 > 0 else 1.0),
        "phi": (np.array([-target.rho * s, 0.0, target.rho * c]), 0.0),
        "y": (np.array([0.0, 1.0, 0.0]), target.y / d_0 if d_0 > 0 else 0.0),
    }
    return {
        name: diff @ tangents[name][0] / d - tangents[name][1]
        for name in target.parameter_names
    }


def steering_bundle(
    layout: AntennaLayout,
    target: TargetState,
    wavelength: float,
    case: TargetCase = None,
) -> SteeringBundle:
    """Steering vector with its analytic derivatives for every estimated coordinate"""
    if case is not None and case != target.case:
        raise ContractViolationError(f"expected a {case.value} target, got {target.case.value}")

    alpha = steering(layout, target, wavelength)
    k = 2.0 * np.pi / wavelength

    if not layout.is_uca:
        # negated delta gradients play the role of auxiliary vectors with unit scale
        aux = {name: -g for name, g in delta_gradient_generic(layout, target).items()}
        scales = {name: 1.0 for name in aux}
        derivs = {name: 1j * k * aux[name] * alpha for name in aux}
        return SteeringBundle(alpha=alpha, aux=aux, scales=scales, derivs=derivs)

    if target.case == TargetCase.COPLANAR:
        v1, v2 = aux_coplanar(layout, target)
        aux = {"rho": v2, "phi": v1}
        scales = {"rho": -1.0, "phi": 1.0}
    else:
        v21, v22, v23 = aux_noncoplanar(layout, target)
        aux = {"rho": v21, "phi": v22, "y": v23}
        scales = {"rho": 1.0, "phi": -layout.radius * target.rho, "y": target.y}

    derivs = {name: 1j * k * scales[name] * aux[name] * alpha for name in target.parameter_names}
    return SteeringBundle(alpha=alpha, aux=aux, scales=scales, derivs=derivs)


def steering_derivatives(
    layout: AntennaLayout,
    target: TargetState,
    wavelength: float,
    case: TargetCase = None,
) -> Dict[str, np.ndarray]:
    return steering_bundle(layout, target, wavelength, case).derivs
