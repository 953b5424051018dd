#!/usr/bin/env python3
"""
Test the upsilon mean and the complete elliptic integral
"""

import math

import numpy as np
import pytest
from scipy import special

from errors import DivergenceError
from special_functions import elliptic_k, elliptic_k_quadrature, mean_sin2_over_distance2, upsilon


def test_upsilon_known_values():
    assert upsilon(0.0) == 0.0
    assert abs(upsilon(1.0) - 2.0 / math.pi) < 1e-8
    assert abs(upsilon(1e3) - 1.0) < 1e-5


def test_upsilon_matches_grid_average():
    for a in (0.3, 0.8, 1.7, 4.0):
        x = np.linspace(0.0, 2 * math.pi, 20001)[:-1]
        grid = np.mean((a - np.cos(x)) / np.sqrt(1 - 2 * a * np.cos(x) + a * a))
        assert abs(upsilon(a) - grid) < 1e-6


def test_upsilon_rejects_negative():
    with pytest.raises(ValueError):
        upsilon(-0.5)


def test_elliptic_k_against_scipy():
    for k in np.linspace(0.0, 0.999, 40):
        # scipy takes the parameter m = k^2
        assert abs(elliptic_k(k) - special.ellipk(k * k)) < 1e-12
        assert abs(elliptic_k(k) - elliptic_k_quadrature(k)) < 1e-10


def test_elliptic_k_diverges_at_unit_modulus():
    with pytest.raises(DivergenceError):
        elliptic_k(1.0)
    with pytest.raises(DivergenceError):
        elliptic_k(-0.1)


def test_mean_sin2_over_distance2():
    for a in (0.5, 2.5):
        x = np.linspace(0.0, 2 * math.pi, 40001)[:-1]
        grid = np.mean(np.sin(x) ** 2 / (1 - 2 * a * np.cos(x) + a * a))
        assert abs(mean_sin2_over_distance2(a) - grid) < 1e-6


def main():
    tests = [
        test_upsilon_known_values,
        test_upsilon_matches_grid_average,
        test_upsilon_rejects_negative,
        test_elliptic_k_against_scipy,
        test_elliptic_k_diverges_at_unit_modulus,
        test_mean_sin2_over_distance2,
    ]
    print("🧮 Testing special functions")
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
