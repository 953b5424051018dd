"""
Antenna Array Geometry
Uniform circular and planar layouts in the y = 0 plane, centred on the origin
"""

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np

from errors import InvalidGeometryError


class ArrayKind(str, Enum):
    UCA = "uca"
    UPA = "upa"


@dataclass(frozen=True)
class AntennaLayout:
    positions: np.ndarray  # (count, 3) rows of [x, y, z] in metres
    kind: ArrayKind
    count: int
    radius: Optional[float] = None  # UCA only
    nx: Optional[int] = None  # UPA only
    nz: Optional[int] = None
    spacing: Optional[float] = None
    angles: Optional[np.ndarray] = field(default=None, repr=False)  # UCA element angles

    def __post_init__(self):
        self.positions.setflags(write=False)
        if self.angles is not None:
            self.angles.setflags(write=False)

    @property
    def is_uca(self) -> bool:
        return self.kind == ArrayKind.UCA

    @property
    def aperture(self) -> float:
        """Largest element-to-element extent: diameter for a UCA, diagonal for a UPA"""
        if self.is_uca:
            return 2.0 * self.radius
        return math.hypot((self.nx - 1) * self.spacing, (self.nz - 1) * self.spacing)


def uca_layout(n: int, radius: float) -> AntennaLayout:
    """n elements at angles 2*pi*m/n on a circle of the given radius in the x-z plane"""
    if n < 3:
        raise InvalidGeometryError(f"UCA needs at least 3 elements, got {n}")
    if not radius > 0:
        raise InvalidGeometryError(f"UCA radius must be positive, got {radius}")

    angles = 2.0 * np.pi * np.arange(n) / n
    positions = np.column_stack([
        radius * np.cos(angles),
        np.zeros(n),
        radius * np.sin(angles),
    ])
    return AntennaLayout(
        positions=positions, kind=ArrayKind.UCA, count=n, radius=float(radius), angles=angles
    )


def upa_layout(nx: int, nz: int, spacing: float) -> AntennaLayout:
    """Regular nx-by-nz grid in the x-z plane with its centroid at the origin"""
    if nx < 1 or nz < 1 or nx * nz < 2:
        raise InvalidGeometryError(f"UPA needs at least 2 elements, got {nx}x{nz}")
    if not spacing > 0:
        raise InvalidGeometryError(f"UPA spacing must be positive, got {spacing}")

    xs = (np.arange(nx) - (nx - 1) / 2.0) * spacing
    zs = (np.arange(nz) - (nz - 1) / 2.0) * spacing
    gx, gz = np.meshgrid(xs, zs, indexing="ij")
    positions = np.column_stack([gx.ravel(), np.zeros(nx * nz), gz.ravel()])
    return AntennaLayout(
        positions=positions, kind=ArrayKind.UPA, count=nx * nz, nx=nx, nz=nz, spacing=float(spacing)
    )


def upa_side_counts(n: int) -> tuple[int, int]:
    """ceil(sqrt(n)) by floor(n / ceil(sqrt(n))); the product never exceeds n"""
    nx = math.ceil(math.sqrt(n))
    return nx, n // nx


def upa_same_aperture(n: int, radius: float) -> AntennaLayout:
    """Square-ish UPA whose diagonal equals the UCA diameter 2*radius"""
    if n < 3:
        raise InvalidGeometryError(f"UPA benchmark needs at least 3 elements, got {n}")
    if not radius > 0:
        raise InvalidGeometryError(f"radius must be positive, got {radius}")
    nx, nz = upa_side_counts(n)
    spacing = 2.0 * radius / math.hypot(nx - 1, nz - 1)
    return upa_layout(nx, nz, spacing)


def upa_with_spacing(n: int, spacing: float) -> AntennaLayout:
    nx, nz = upa_side_counts(n)
    return upa_layout(nx, nz, spacing)


def radius_from_spacing(n: int, d: float) -> float:
    """UCA radius whose arc spacing between neighbours is d"""
    if n < 3:
        raise InvalidGeometryError(f"n must be at least 3, got {n}")
    if not d > 0:
        raise InvalidGeometryError(f"spacing must be positive, got {d}")
    return n * d / (2.0 * math.pi)


def rayleigh_distance(aperture: float, wavelength: float) -> float:
    """Near-field boundary 2 D^2 / lambda"""
    if not aperture > 0 or not wavelength > 0:
        raise InvalidGeometryError("aperture and wavelength must be positive")
    return 2.0 * aperture ** 2 / wavelength
