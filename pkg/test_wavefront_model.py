#!/usr/bin/env python3
"""
Test propagation deltas, steering vectors and their analytic derivatives
"""

import math

import numpy as np
import pytest

from array_geometry import uca_layout, upa_with_spacing
from errors import (
    ContractViolationError,
    DegenerateGeometryError,
    InvalidGeometryError,
    SingularChannelError,
)
from validation_suite import WAVELENGTH, derivative_error
from wavefront_model import (
    Scenario,
    TargetCase,
    TargetState,
    comm_channel,
    delta_gradient_generic,
    propagation_delta,
    propagation_delta_generic,
    steering,
    steering_bundle,
)


def test_target_state_case_and_coordinates():
    flat = TargetState.from_degrees(2.0, 90.0)
    assert flat.case == TargetCase.COPLANAR
    assert flat.parameter_names == ("rho", "phi")
    assert np.allclose(flat.cartesian, [0.0, 0.0, 2.0], atol=1e-15)

    lifted = TargetState(rho=3.0, phi=0.0, y=4.0)
    assert lifted.case == TargetCase.NONCOPLANAR
    assert lifted.parameter_names == ("rho", "phi", "y")
    assert lifted.range_from_origin == 5.0

    back = TargetState.from_cartesian(*lifted.cartesian)
    assert math.isclose(back.rho, 3.0) and math.isclose(back.y, 4.0) and abs(back.phi) < 1e-15


def test_target_state_rejects_negative_rho():
    with pytest.raises(InvalidGeometryError):
        TargetState(rho=-0.1, phi=0.0)


def test_scenario_contract():
    with pytest.raises(ContractViolationError):
        Scenario(wavelength=0.0, noise_power=1.0)
    with pytest.raises(ContractViolationError):
        Scenario(wavelength=0.01, noise_power=1.0, snapshots=0)
    scenario = Scenario(wavelength=0.01, noise_power=2.0, snapshots=4, alpha_s=0.5j, gamma_min=3.0)
    assert math.isclose(scenario.sensing_gain, 2 * 0.25 * 4 / 2.0)
    assert math.isclose(scenario.sinr_floor, 6.0)


def test_case_formulas_match_generic_distances():
    """Closed distance formulas agree with raw 3D geometry"""
    rng = np.random.default_rng(3)
    layout = uca_layout(16, 0.1)
    for _ in range(20):
        y = 0.0 if rng.random() < 0.5 else rng.uniform(-0.5, 0.5)
        target = TargetState(rho=rng.uniform(0.01, 1.0), phi=rng.uniform(-math.pi, math.pi), y=y)
        case = propagation_delta(layout, target)
        generic = propagation_delta_generic(layout, target)
        assert np.max(np.abs(case - generic)) < 1e-12


def test_steering_has_unit_modulus():
    alpha = steering(uca_layout(32, 0.1), TargetState(rho=0.4, phi=1.0, y=0.2), WAVELENGTH)
    assert np.allclose(np.abs(alpha), 1.0)


def test_noncoplanar_on_axis_is_degenerate():
    with pytest.raises(DegenerateGeometryError):
        propagation_delta(uca_layout(8, 0.1), TargetState(rho=0.0, phi=0.0, y=1.0))


def test_comm_channel_amplitude_and_coincidence():
    layout = uca_layout(8, 0.1)
    user = TargetState(rho=5.0, phi=-0.5)
    h = comm_channel(layout, user, WAVELENGTH)
    d = np.linalg.norm(layout.positions - user.cartesian[None, :], axis=1)
    assert np.allclose(np.abs(h), WAVELENGTH / (4 * math.pi * d))
    with pytest.raises(SingularChannelError):
        comm_channel(layout, TargetState(rho=0.1, phi=0.0), WAVELENGTH)


def test_auxiliary_vectors_match_generic_gradient():
    """scale * aux equals -dl/du on both circular paths"""
    layout = uca_layout(24, 0.15)
    for target in (TargetState(rho=0.6, phi=0.3), TargetState(rho=0.1, phi=2.0, y=-0.25)):
        bundle = steering_bundle(layout, target, WAVELENGTH)
        gradient = delta_gradient_generic(layout, target)
        for name in target.parameter_names:
            lhs = bundle.scales[name] * bundle.aux[name]
            assert np.allclose(lhs, -gradient[name], rtol=1e-9, atol=1e-12), name


def test_analytic_derivatives_match_finite_differences():
    rng = np.random.default_rng(5)
    targets = [
        TargetState(rho=0.3, phi=0.2),
        TargetState(rho=0.05, phi=-1.0),
        TargetState(rho=0.4, phi=2.5, y=0.1),
        TargetState(rho=0.02, phi=0.7, y=-0.3),
    ]
    for target in targets:
        assert derivative_error(uca_layout(int(rng.integers(8, 40)), 0.1), target) < 1e-4
        assert derivative_error(upa_with_spacing(36, WAVELENGTH / 2), target) < 1e-4


def test_bundle_rejects_wrong_case():
    layout = uca_layout(8, 0.1)
    with pytest.raises(ContractViolationError):
        steering_bundle(layout, TargetState(rho=0.3, phi=0.0), WAVELENGTH, case=TargetCase.NONCOPLANAR)


def main():
    tests = [
        test_target_state_case_and_coordinates,
        test_target_state_rejects_negative_rho,
        test_scenario_contract,
        test_case_formulas_match_generic_distances,
        test_steering_has_unit_modulus,
        test_noncoplanar_on_axis_is_degenerate,
        test_comm_channel_amplitude_and_coincidence,
        test_auxiliary_vectors_match_generic_gradient,
        test_analytic_derivatives_match_finite_differences,
        test_bundle_rejects_wrong_case,
    ]
    print("🌊 Testing wavefront model")
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
