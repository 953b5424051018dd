import os
from typing import Optional
from pydantic_settings import BaseSettings


class Settings(BaseSettings):
    # Application Settings
    log_level: str = "INFO"
    log_json: bool = True

    # Sweep execution
    threads: Optional[int] = None  # NFISAC_THREADS, defaults to os.cpu_count()
    record_timing: bool = False  # off keeps CSV output byte-identical across runs
    csv_float_format: str = "%.10e"

    # Closed-form guards
    pole_margin: float = 0.02  # refuse closed forms for |rho/R - 1| below this

    # Optimizer defaults
    vqf_tolerance: float = 1e-5
    vqf_max_iters: int = 100
    barrier_gap_tol: float = 1e-8
    oracle_budget: int = 100_000

    class Config:
        env_file = ".env"
        env_prefix = "NFISAC_"

    @property
    def worker_count(self) -> int:
        if self.threads is not None and self.threads > 0:
            return self.threads
        return os.cpu_count() or 1


settings = Settings()
