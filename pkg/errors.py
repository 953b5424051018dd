"""
Exception hierarchy for the near-field sensing toolkit
"""

from typing import Any, Optional


class NfisacError(Exception):
    """Base class for all toolkit errors"""


class InvalidGeometryError(NfisacError):
    """Array layout parameters out of range"""


class DegenerateGeometryError(NfisacError):
    """Target on the array normal axis where the cylindrical chart breaks down"""


class SingularChannelError(NfisacError):
    """Zero element-to-point distance or rho = 0 where a 1/rho term is needed"""


class PoleError(NfisacError):
    """Closed form evaluated too close to rho = R"""


class DivergenceError(NfisacError):
    """Special function evaluated outside its domain of convergence"""


class ContractViolationError(NfisacError):
    """Inputs do not match the case an operation was called for"""


class InfeasibleScenarioError(NfisacError):
    """SINR threshold cannot be met within the power budget"""


class SubproblemError(NfisacError):
    """Inner convex solve failed; carries the last usable iterate"""

    def __init__(self, message: str, last_w: Optional[Any] = None):
        super().__init__(message)
        self.last_w = last_w


class ConfigError(NfisacError):
    """Invalid sweep configuration"""

    def __init__(self, message: str, field_path: str = ""):
        super().__init__(f"{field_path}: {message}" if field_path else message)
        self.field_path = field_path
