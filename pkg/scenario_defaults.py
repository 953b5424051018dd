"""
Scenario Defaults for Near-Field Sensing Studies
Centralizes the published setup values and unit conversions
"""

import math


class ScenarioDefaults:
    """Central configuration for scenario constants and unit helpers"""

    SPEED_OF_LIGHT = 299_792_458.0  # m/s

    # Carrier and link budget
    CARRIER_HZ = 28e9
    NOISE_DBM = -113.0
    P_MAX_DBM = 25.0
    GAMMA_DB = 5.0
    SNAPSHOTS = 1
    ALPHA_S_MAGNITUDE = 1.0
    ALPHA_S_PHASE_DEG = 0.0

    # Array
    N_T = 256
    N_R = 100
    SPACING_WAVELENGTHS = 0.5  # element spacing in units of lambda

    # Target
    PHI_DEG = 30.0

    @classmethod
    def dbm_to_watts(cls, dbm: float) -> float:
        """P[W] = 10^((dBm - 30)/10)"""
        return 10.0 ** ((dbm - 30.0) / 10.0)

    @classmethod
    def watts_to_dbm(cls, watts: float) -> float:
        return 10.0 * math.log10(watts) + 30.0

    @classmethod
    def db_to_linear(cls, db: float) -> float:
        return 10.0 ** (db / 10.0)

    @classmethod
    def rate_to_sinr(cls, rate_bits: float) -> float:
        """Minimum SINR for a spectral-efficiency target, 2^R - 1"""
        return 2.0 ** rate_bits - 1.0

    @classmethod
    def wavelength(cls, carrier_hz: float) -> float:
        return cls.SPEED_OF_LIGHT / carrier_hz

    @classmethod
    def half_wave_spacing(cls, carrier_hz: float) -> float:
        return cls.SPACING_WAVELENGTHS * cls.wavelength(carrier_hz)


# Export main config class
__all__ = ["ScenarioDefaults"]
