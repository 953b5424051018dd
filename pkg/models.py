from pydantic import BaseModel, Field, field_validator, model_validator
from typing import List, Optional
from enum import Enum

from scenario_defaults import ScenarioDefaults


class ArrayTypeEnum(str, Enum):
    UCA = "uca"
    UPA_HALF_WAVE = "upa_half_wave"
    UPA_SAME_APERTURE = "upa_same_aperture"


class MethodEnum(str, Enum):
    ISOTROPIC = "isotropic"
    ISOTROPIC_CLOSED = "isotropic_closed"
    CLOSED_FORM = "closed_form"
    VQF = "vqf"
    ORACLE = "oracle"


class SweepAxisEnum(str, Enum):
    N_R = "n_r"
    N_T = "n_t"
    P_MAX_DBM = "p_max_dbm"
    RHO = "rho"
    PHI_DEG = "phi_deg"
    Y = "y"
    FC_HZ = "fc_hz"
    GAMMA_DB = "gamma_db"


class ArraySpec(BaseModel):
    kind: ArrayTypeEnum = Field(ArrayTypeEnum.UCA, description="Array geometry shared by transmit and receive")
    n_t: int = Field(ScenarioDefaults.N_T, ge=3, description="Transmit element count")
    n_r: int = Field(ScenarioDefaults.N_R, ge=3, description="Receive element count")
    spacing_m: Optional[float] = Field(None, gt=0, description="Element spacing, defaults to half a wavelength")
    radius_m: Optional[float] = Field(None, gt=0, description="UCA radius, overrides spacing when given")


class TargetSpec(BaseModel):
    rho: List[float] = Field(..., min_length=1, description="Perpendicular distances in metres")
    phi_deg: List[float] = Field(default_factory=lambda: [ScenarioDefaults.PHI_DEG], min_length=1)
    y: List[float] = Field(default_factory=lambda: [0.0], min_length=1, description="Signed distances off the array plane")

    @field_validator("rho")
    @classmethod
    def non_negative(cls, values: List[float]) -> List[float]:
        if any(v < 0 for v in values):
            raise ValueError("rho values must be non-negative")
        return values


class UserSpec(BaseModel):
    rho: float = Field(5.0, ge=0, description="Communication user perpendicular distance")
    phi_deg: float = Field(-30.0, description="Communication user polar angle")
    y: float = Field(0.0, description="Communication user signed distance")


class SweepSpec(BaseModel):
    axis: SweepAxisEnum
    values: List[float] = Field(..., min_length=1)


class SweepConfig(BaseModel):
    name: str = Field("sweep", description="Run label")
    fc_hz: float = Field(ScenarioDefaults.CARRIER_HZ, gt=0)
    noise_dbm: float = Field(ScenarioDefaults.NOISE_DBM)
    snapshots: int = Field(ScenarioDefaults.SNAPSHOTS, ge=1)
    alpha_s_magnitude: float = Field(ScenarioDefaults.ALPHA_S_MAGNITUDE, gt=0)
    alpha_s_phase_deg: float = Field(ScenarioDefaults.ALPHA_S_PHASE_DEG)
    p_max_dbm: float = Field(ScenarioDefaults.P_MAX_DBM)
    gamma_db: Optional[float] = Field(None, description="Minimum SINR in dB")
    rate_min_bits: Optional[float] = Field(None, ge=0, description="Minimum rate, converted to SINR 2^R - 1")
    array: ArraySpec = Field(default_factory=ArraySpec)
    target: TargetSpec
    user: UserSpec = Field(default_factory=UserSpec)
    sweep: SweepSpec
    methods: List[MethodEnum] = Field(default_factory=lambda: [MethodEnum.ISOTROPIC], min_length=1)
    seed: int = Field(0, ge=0)
    oracle_budget: Optional[int] = Field(None, ge=1)
    output: Optional[str] = Field(None, description="CSV output path")

    model_config = {"extra": "forbid"}

    @model_validator(mode="after")
    def single_threshold(self) -> "SweepConfig":
        if self.gamma_db is not None and self.rate_min_bits is not None:
            raise ValueError("give either gamma_db or rate_min_bits, not both")
        if self.sweep.axis in (SweepAxisEnum.N_R, SweepAxisEnum.N_T):
            if any(v < 3 or v != int(v) for v in self.sweep.values):
                raise ValueError("element-count sweeps need integer values >= 3")
        if self.sweep.axis == SweepAxisEnum.FC_HZ and any(v <= 0 for v in self.sweep.values):
            raise ValueError("carrier frequencies must be positive")
        return self

    @property
    def gamma_linear(self) -> float:
        if self.rate_min_bits is not None:
            return ScenarioDefaults.rate_to_sinr(self.rate_min_bits)
        gamma_db = self.gamma_db if self.gamma_db is not None else ScenarioDefaults.GAMMA_DB
        return ScenarioDefaults.db_to_linear(gamma_db)


class ResultRow(BaseModel):
    sweep_axis: str
    sweep_value: float
    method: str
    rho: float
    phi_deg: float
    y: float
    crb_rho: Optional[float] = None
    crb_phi: Optional[float] = None
    crb_y: Optional[float] = None
    speb_m2: Optional[float] = None
    speb_db: Optional[float] = None
    speb_approx_m2: Optional[float] = None
    iterations: Optional[int] = None
    wall_time_ms: Optional[float] = None
    inside_circle: bool = False
    near_field: bool = False
    status: str = "ok"


RESULT_COLUMNS = list(ResultRow.model_fields.keys())
