#!/usr/bin/env python3
"""
Test circular and planar antenna layouts
"""

import math

import numpy as np
import pytest

from array_geometry import (
    ArrayKind,
    radius_from_spacing,
    rayleigh_distance,
    uca_layout,
    upa_layout,
    upa_same_aperture,
    upa_side_counts,
    upa_with_spacing,
)
from errors import InvalidGeometryError
from scenario_defaults import ScenarioDefaults


def test_uca_elements_on_circle():
    """Elements sit on the circle in the y = 0 plane, first one on the x axis"""
    layout = uca_layout(16, 0.2)
    radii = np.hypot(layout.positions[:, 0], layout.positions[:, 2])
    assert layout.kind == ArrayKind.UCA
    assert layout.count == 16
    assert np.allclose(radii, 0.2, atol=1e-15)
    assert np.all(layout.positions[:, 1] == 0.0)
    assert np.allclose(layout.positions[0], [0.2, 0.0, 0.0])
    assert np.allclose(np.diff(layout.angles), 2 * math.pi / 16)


def test_uca_rejects_bad_parameters():
    with pytest.raises(InvalidGeometryError):
        uca_layout(2, 0.2)
    with pytest.raises(InvalidGeometryError):
        uca_layout(8, 0.0)
    with pytest.raises(InvalidGeometryError):
        uca_layout(8, -1.0)


def test_layout_arrays_are_read_only():
    layout = uca_layout(8, 0.1)
    with pytest.raises(ValueError):
        layout.positions[0, 0] = 1.0


def test_upa_centred_grid():
    layout = upa_layout(4, 3, 0.01)
    assert layout.kind == ArrayKind.UPA
    assert layout.count == 12
    assert np.allclose(layout.positions.mean(axis=0), 0.0, atol=1e-15)
    xs = np.unique(np.round(layout.positions[:, 0], 12))
    assert np.allclose(np.diff(xs), 0.01)
    assert np.all(layout.positions[:, 1] == 0.0)


def test_upa_side_counts_never_exceed_n():
    for n in (3, 10, 64, 100, 101, 256):
        nx, nz = upa_side_counts(n)
        assert nx * nz <= n
        assert nx == math.ceil(math.sqrt(n))
    assert upa_side_counts(64) == (8, 8)


def test_same_aperture_upa_matches_uca_diameter():
    radius = 0.2
    layout = upa_same_aperture(64, radius)
    corners = layout.positions[[0, -1]]
    assert math.isclose(layout.aperture, 2 * radius, rel_tol=1e-12)
    assert math.isclose(np.linalg.norm(corners[0] - corners[1]), 2 * radius, rel_tol=1e-12)
    assert math.isclose(uca_layout(64, radius).aperture, 2 * radius)


def test_half_wave_upa_spacing():
    wavelength = ScenarioDefaults.wavelength(ScenarioDefaults.CARRIER_HZ)
    layout = upa_with_spacing(100, wavelength / 2)
    assert layout.count == 100
    assert math.isclose(layout.spacing, wavelength / 2)


def test_radius_from_spacing_published_setup():
    """256 elements at half-wavelength spacing at 28 GHz give a circle of about 0.44 m diameter"""
    wavelength = ScenarioDefaults.wavelength(28e9)
    radius = radius_from_spacing(256, wavelength / 2)
    assert math.isclose(radius, 256 * wavelength / (4 * math.pi))
    assert 0.21 < radius < 0.23
    layout = uca_layout(256, radius)
    chord = np.linalg.norm(layout.positions[1] - layout.positions[0])
    assert math.isclose(chord, wavelength / 2, rel_tol=1e-4)


def test_rayleigh_distance():
    assert math.isclose(rayleigh_distance(0.4, 0.01), 32.0)
    with pytest.raises(InvalidGeometryError):
        rayleigh_distance(0.0, 0.01)


def main():
    tests = [
        test_uca_elements_on_circle,
        test_uca_rejects_bad_parameters,
        test_layout_arrays_are_read_only,
        test_upa_centred_grid,
        test_upa_side_counts_never_exceed_n,
        test_same_aperture_upa_matches_uca_diameter,
        test_half_wave_upa_spacing,
        test_radius_from_spacing_published_setup,
        test_rayleigh_distance,
    ]
    print("📐 Testing array geometry")
    print("=" * 50)
    failed = 0
    for test in tests:
        try:
            test()
            print(f"   ✅ {test.__name__}")
        except AssertionError as e:
            failed += 1
            print(f"   ❌ {test.__name__}: {e}")
    print(f"\n{len(tests) - failed}/{len(tests)} passed")
    return failed == 0


if __name__ == "__main__":
    main()
