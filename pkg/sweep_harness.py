"""
Sweep Harness
Loads sweep configs, evaluates every (sweep value, target, method) point in a
worker pool and writes a deterministic CSV table
"""

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from itertools import product
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

import numpy as np
import orjson
import pandas as pd
from pydantic import ValidationError

from array_geometry import (
    AntennaLayout,
    radius_from_spacing,
    rayleigh_distance,
    uca_layout,
    upa_same_aperture,
    upa_with_spacing,
)
from beamformer_opt import (
    closed_form_beamformer,
    decomposition_vectors,
    evaluate_beamformer,
    isotropic_baseline,
    objective_terms,
    oracle_search,
    surrogate_objective,
    vqf_solve,
    BeamformerResult,
    Termination,
    align_phase,
)
from config import settings
from errors import ConfigError, NfisacError
from fisher_metrics import speb_weighted
from logging_config import get_logger
from models import RESULT_COLUMNS, ArrayTypeEnum, MethodEnum, ResultRow, SweepAxisEnum, SweepConfig
from scenario_defaults import ScenarioDefaults
from wavefront_model import Scenario, TargetState, comm_channel

logger = get_logger(__name__)


@dataclass(frozen=True)
class SweepPoint:
    index: int
    value: float
    scenario: Scenario
    layout_t: AntennaLayout
    layout_r: AntennaLayout
    target: TargetState
    user: TargetState
    seed: int

    @property
    def inside_circle(self) -> bool:
        return self.layout_t.is_uca and self.target.rho < self.layout_t.radius

    @property
    def near_field(self) -> bool:
        limit = rayleigh_distance(self.layout_t.aperture, self.scenario.wavelength)
        return self.target.range_from_origin < limit


def load_config(path: Union[str, Path]) -> SweepConfig:
    """Read a JSON sweep config; every failure surfaces as ConfigError with the field path"""
    try:
        raw = orjson.loads(Path(path).read_bytes())
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except orjson.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc}") from exc
    return parse_config(raw)


def parse_config(raw: Dict) -> SweepConfig:
    try:
        return SweepConfig.model_validate(raw)
    except ValidationError as exc:
        first = exc.errors()[0]
        field_path = ".".join(str(p) for p in first["loc"])
        raise ConfigError(first["msg"], field_path=field_path) from exc


def _layouts(config: SweepConfig, n_t: int, n_r: int, wavelength: float) -> Tuple[AntennaLayout, AntennaLayout]:
    spec = config.array
    spacing = spec.spacing_m if spec.spacing_m is not None else ScenarioDefaults.SPACING_WAVELENGTHS * wavelength
    if spec.kind == ArrayTypeEnum.UPA_HALF_WAVE:
        return upa_with_spacing(n_t, spacing), upa_with_spacing(n_r, spacing)
    radius = spec.radius_m if spec.radius_m is not None else radius_from_spacing(n_t, spacing)
    if spec.kind == ArrayTypeEnum.UPA_SAME_APERTURE:
        return upa_same_aperture(n_t, radius), upa_same_aperture(n_r, radius)
    return uca_layout(n_t, radius), uca_layout(n_r, radius)


def expand_points(config: SweepConfig) -> List[SweepPoint]:
    """Cartesian product of sweep values and target grid, in a fixed order"""
    axis = config.sweep.axis
    grid = {"rho": config.target.rho, "phi_deg": config.target.phi_deg, "y": config.target.y}
    if axis.value in grid:
        if len(grid[axis.value]) > 1:
            logger.warning("target_list_ignored", coordinate=axis.value, values=grid[axis.value])
        # the swept coordinate comes from the sweep values only
        grid[axis.value] = [grid[axis.value][0]]
    seeds = np.random.SeedSequence(config.seed)
    combos = list(product(config.sweep.values, grid["rho"], grid["phi_deg"], grid["y"]))
    children = seeds.spawn(len(combos))
    points = []
    for index, ((value, rho, phi_deg, y), child) in enumerate(zip(combos, children)):
        params = {
            "n_t": config.array.n_t,
            "n_r": config.array.n_r,
            "p_max_dbm": config.p_max_dbm,
            "rho": rho,
            "phi_deg": phi_deg,
            "y": y,
            "fc_hz": config.fc_hz,
            "gamma": config.gamma_linear,
        }
        if axis == SweepAxisEnum.GAMMA_DB:
            params["gamma"] = ScenarioDefaults.db_to_linear(value)
        else:
            params[axis.value] = value

        wavelength = ScenarioDefaults.wavelength(params["fc_hz"])
        scenario = Scenario(
            wavelength=wavelength,
            noise_power=ScenarioDefaults.dbm_to_watts(config.noise_dbm),
            snapshots=config.snapshots,
            alpha_s=config.alpha_s_magnitude * complex(np.exp(1j * math.radians(config.alpha_s_phase_deg))),
            p_max=ScenarioDefaults.dbm_to_watts(params["p_max_dbm"]),
            gamma_min=params["gamma"],
        )
        layout_t, layout_r = _layouts(config, int(params["n_t"]), int(params["n_r"]), wavelength)
        points.append(SweepPoint(
            index=index,
            value=float(value),
            scenario=scenario,
            layout_t=layout_t,
            layout_r=layout_r,
            target=TargetState.from_degrees(params["rho"], params["phi_deg"], params["y"]),
            user=TargetState.from_degrees(config.user.rho, config.user.phi_deg, config.user.y),
            seed=int(child.generate_state(1)[0]),
        ))
    return points


def _blank_row(config: SweepConfig, point: SweepPoint, method: MethodEnum) -> Dict:
    return {
        "sweep_axis": config.sweep.axis.value,
        "sweep_value": point.value,
        "method": method.value,
        "rho": point.target.rho,
        "phi_deg": math.degrees(point.target.phi),
        "y": point.target.y,
        "inside_circle": point.inside_circle,
        "near_field": point.near_field,
    }


def _fill_bounds(row: Dict, crbs: Dict[str, float], speb: float, speb_approx: Optional[float]) -> None:
    row["crb_rho"] = crbs.get("rho")
    row["crb_phi"] = crbs.get("phi")
    row["crb_y"] = crbs.get("y")
    row["speb_m2"] = speb
    row["speb_db"] = 10.0 * math.log10(speb) if speb is not None and 0 < speb < math.inf else None
    row["speb_approx_m2"] = speb_approx


def optimise_point(method: MethodEnum, config: SweepConfig, point: SweepPoint) -> BeamformerResult:
    decomp = decomposition_vectors(point.layout_t, point.layout_r, point.target, point.scenario)
    h_c = comm_channel(point.layout_t, point.user, point.scenario.wavelength)
    terms = objective_terms(decomp)

    if method == MethodEnum.VQF:
        return vqf_solve(decomp, h_c, point.scenario)

    if method == MethodEnum.CLOSED_FORM:
        w = align_phase(closed_form_beamformer(decomp.h_s, h_c, point.scenario), h_c)
        iterations = 0
    else:
        budget = config.oracle_budget or settings.oracle_budget
        w, _ = oracle_search(terms, h_c, point.scenario.sinr_floor, point.scenario.p_max, seed=point.seed, budget=budget)
        iterations = budget
    sinr_slack = abs(np.vdot(h_c, w)) ** 2 / point.scenario.noise_power - point.scenario.gamma_min
    return BeamformerResult(
        w=w,
        objective_trace=[surrogate_objective(w, terms)],
        iterations=iterations,
        termination=Termination.CONVERGED,
        tolerance=0.0,
        sinr_slack=sinr_slack,
        power_slack=point.scenario.p_max - float(np.vdot(w, w).real),
    )


def evaluate_point(config: SweepConfig, point: SweepPoint, method: MethodEnum) -> ResultRow:
    """One table row; solver failures are recorded in the status column"""
    row = _blank_row(config, point, method)
    started = time.perf_counter()
    try:
        if method in (MethodEnum.ISOTROPIC, MethodEnum.ISOTROPIC_CLOSED):
            report = isotropic_baseline(point.scenario, point.layout_t, point.layout_r, point.target)
            if method == MethodEnum.ISOTROPIC:
                _fill_bounds(row, report.crbs, report.speb, report.speb_approx)
            else:
                closed = {
                    name: report.closed_form.get(f"{name}_isotropic")
                    for name in point.target.parameter_names
                }
                if any(v is None for v in closed.values()):
                    row["status"] = "unavailable: closed forms need a circular array away from rho = R"
                else:
                    value = speb_weighted(closed, point.target)
                    _fill_bounds(row, closed, value, value)
        else:
            result = optimise_point(method, config, point)
            evaluate_beamformer(result, point.scenario, point.layout_t, point.layout_r, point.target)
            _fill_bounds(row, result.crbs, result.speb, result.objective)
            row["iterations"] = result.iterations
            if result.termination == Termination.STALLED:
                row["status"] = "stalled"
    except NfisacError as exc:
        row["status"] = f"{type(exc).__name__}: {exc}"
        logger.warning("point_failed", index=point.index, method=method.value, error=str(exc))

    if settings.record_timing:
        row["wall_time_ms"] = 1000.0 * (time.perf_counter() - started)
    return ResultRow(**row)


def run_sweep(config: SweepConfig, output: Optional[Union[str, Path]] = None) -> List[ResultRow]:
    """Evaluate every point and method; rows sorted by (sweep value, target, method)"""
    points = expand_points(config)
    jobs = [(point, method) for point in points for method in config.methods]
    logger.info("sweep_started", name=config.name, points=len(points), jobs=len(jobs), workers=settings.worker_count)

    with ThreadPoolExecutor(max_workers=settings.worker_count) as pool:
        rows = list(pool.map(lambda job: evaluate_point(config, *job), jobs))

    order = {method: i for i, method in enumerate(MethodEnum)}
    rows.sort(key=lambda r: (r.sweep_value, r.rho, r.phi_deg, r.y, order[MethodEnum(r.method)]))

    target = output or config.output
    if target:
        write_csv(rows, target)
    failures = sum(1 for r in rows if r.status != "ok")
    logger.info("sweep_finished", name=config.name, rows=len(rows), failures=failures)
    return rows


def rows_to_frame(rows: List[ResultRow]) -> pd.DataFrame:
    return pd.DataFrame([r.model_dump() for r in rows], columns=RESULT_COLUMNS)


def format_csv(rows: List[ResultRow]) -> str:
    """Fixed column order, one float format, empty cells for nulls"""
    frame = rows_to_frame(rows)
    frame["iterations"] = frame["iterations"].astype("Int64")
    return frame.to_csv(index=False, float_format=settings.csv_float_format, na_rep="", lineterminator="\n")


def write_csv(rows: List[ResultRow], path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(format_csv(rows), encoding="utf-8", newline="")
    return path
