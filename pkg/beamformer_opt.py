"""
Transmit Beamformer Optimization
Decomposition vectors, the closed-form single-ratio beamformer, the
quadratic-transform (VQF) iteration with its reduced-span barrier subproblem,
and a seeded brute-force span oracle
"""

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import linalg

from array_geometry import AntennaLayout
from config import settings
from errors import ContractViolationError, InfeasibleScenarioError, SubproblemError
from fisher_metrics import (
    FimReport,
    crb_coplanar_closed,
    crb_noncoplanar_closed,
    derivative_gram,
    direct_receive_stats,
    fim_report,
    isotropic_covariance,
    require_shared_circle,
    speb_weights,
)
from wavefront_model import Scenario, TargetCase, TargetState, steering_bundle

logger = logging.getLogger(__name__)

# barrier schedule
BARRIER_T0 = 1.0
BARRIER_MU = 10.0
NEWTON_MAX_STEPS = 100
ORACLE_TOP_K = 8
ORACLE_BATCH = 10_000
MONOTONE_SLACK = 1e-12


class Termination(str, Enum):
    CONVERGED = "converged"
    MAX_ITERS = "max_iters"
    SENSING_DOMINANT = "sensing_dominant"
    STALLED = "stalled"  # subproblem returned a worse point, previous iterate kept


@dataclass
class DecompositionSet:
    names: Tuple[str, ...]
    h_s: np.ndarray  # angle vector, h-bar_s out of plane
    alpha_rho: np.ndarray
    alpha_y: Optional[np.ndarray]
    angle_gain: float  # k^2 s_phi^2 N_r, so J_phi,phi ~ gain * angle_gain * |h_s^H w|^2
    weights: Dict[str, float]  # diag of (T T^T)^-1
    sensing_gain: float  # 2 |alpha_s|^2 L / sigma^2

    def vector(self, name: str) -> np.ndarray:
        return {"rho": self.alpha_rho, "phi": self.h_s, "y": self.alpha_y}[name]


@dataclass
class ObjectiveTerm:
    """One ratio numerator / |vector^H w|^2 of the surrogate SPEB"""
    name: str
    vector: np.ndarray
    numerator: float


@dataclass
class BeamformerResult:
    w: np.ndarray
    objective_trace: List[float]
    iterations: int
    termination: Termination
    tolerance: float
    sinr_slack: float  # |h_c^H w|^2 / sigma^2 - gamma_min
    power_slack: float  # P_max - ||w||^2
    fixed_point_residual: float = 0.0
    candidate_values: List[float] = field(default_factory=list)  # raw subproblem objectives, rejected ones included
    speb: Optional[float] = None  # full numeric FIM, filled by evaluate_beamformer
    crbs: Dict[str, float] = field(default_factory=dict)

    @property
    def objective(self) -> float:
        return self.objective_trace[-1]


def decomposition_vectors(
    layout_t: AntennaLayout,
    layout_r: AntennaLayout,
    target: TargetState,
    scenario: Scenario,
) -> DecompositionSet:
    """Rank-one vectors whose |v^H w|^2 stand in for each diagonal FIM entry"""
    require_shared_circle(layout_t, layout_r)
    names = target.parameter_names
    bundle_t = steering_bundle(layout_t, target, scenario.wavelength)
    bundle_r = steering_bundle(layout_r, target, scenario.wavelength)
    stats = direct_receive_stats(bundle_r, names)
    a_t = bundle_t.alpha
    n_t, n_r = layout_t.count, layout_r.count
    k = scenario.wavenumber

    # angle vector: centred transmit term plus the receive spread along a_t
    mean_r = stats.sums["phi"] / n_r
    spread_r = max(stats.gram("phi", "phi") / n_r - mean_r ** 2, 0.0)
    h_s = math.sqrt(spread_r) * a_t + (bundle_t.aux["phi"] - mean_r) * a_t
    angle_gain = k * k * bundle_t.scales["phi"] ** 2 * n_r

    def rayleigh_projection(name: str) -> np.ndarray:
        m = derivative_gram(scenario.wavelength, bundle_t, stats, bundle_t.scales, name, name)
        quotient = max(float(np.real(a_t.conj() @ m @ a_t)), 0.0)
        return math.sqrt(quotient) / n_t * a_t

    weights = dict(zip(names, speb_weights(target).tolist()))
    return DecompositionSet(
        names=names,
        h_s=h_s,
        alpha_rho=rayleigh_projection("rho"),
        alpha_y=rayleigh_projection("y") if "y" in names else None,
        angle_gain=angle_gain,
        weights=weights,
        sensing_gain=scenario.sensing_gain,
    )


def objective_terms(decomp: DecompositionSet, weights: Optional[Dict[str, float]] = None) -> List[ObjectiveTerm]:
    """Surrogate SPEB = sum of numerator / |v^H w|^2 over terms with nonzero weight"""
    weights = weights if weights is not None else decomp.weights
    terms = []
    for name in decomp.names:
        weight = weights.get(name, 0.0)
        if weight <= 0:
            continue
        gain = decomp.sensing_gain * (decomp.angle_gain if name == "phi" else 1.0)
        terms.append(ObjectiveTerm(name=name, vector=decomp.vector(name), numerator=weight / gain))
    if not terms:
        raise ContractViolationError("objective needs at least one positively weighted term")
    return terms


def surrogate_objective(w: np.ndarray, terms: Sequence[ObjectiveTerm]) -> float:
    total = 0.0
    for term in terms:
        power = abs(np.vdot(term.vector, w)) ** 2
        if power <= 0:
            return math.inf
        total += term.numerator / power
    return total


def _check_feasible(h_c: np.ndarray, sinr_floor: float, p_max: float) -> None:
    if sinr_floor > p_max * float(np.vdot(h_c, h_c).real):
        raise InfeasibleScenarioError(
            f"SINR floor {sinr_floor:.3e} exceeds the best achievable {p_max * np.vdot(h_c, h_c).real:.3e}"
        )


def _unit_phase(z: complex) -> complex:
    return z / abs(z) if abs(z) > 0 else 1.0 + 0.0j


def align_phase(w: np.ndarray, h_c: np.ndarray) -> np.ndarray:
    """Rotate w so h_c^H w is real and non-negative"""
    return w * np.conj(_unit_phase(np.vdot(h_c, w)))


def closed_form_beamformer(h_s: np.ndarray, h_c: np.ndarray, scenario: Scenario) -> np.ndarray:
    """Maximise |h_s^H w|^2 subject to |h_c^H w|^2 >= gamma sigma^2 and ||w||^2 <= P"""
    p = scenario.p_max
    floor = scenario.sinr_floor
    norm_s = float(np.linalg.norm(h_s))
    norm_c = float(np.linalg.norm(h_c))
    if norm_s == 0 or norm_c == 0:
        raise ContractViolationError("closed-form beamformer needs nonzero h_s and h_c")
    _check_feasible(h_c, floor, p)

    if p * abs(np.vdot(h_c, h_s)) ** 2 / norm_s ** 2 >= floor:
        return math.sqrt(p) * h_s / norm_s

    u_c = h_c / norm_c
    residual = h_s - np.vdot(u_c, h_s) * u_c
    norm_e = float(np.linalg.norm(residual))
    x_c_mag = math.sqrt(floor) / norm_c
    x_s_mag = math.sqrt(max(p - x_c_mag ** 2, 0.0))
    x_c = x_c_mag * _unit_phase(np.vdot(u_c, h_s))
    if norm_e == 0:
        return x_c * u_c
    e = residual / norm_e
    x_s = x_s_mag * _unit_phase(np.vdot(e, h_s))
    return x_c * u_c + x_s * e


def _is_dominant(h: np.ndarray, h_c: np.ndarray, scenario: Scenario) -> bool:
    return scenario.p_max * abs(np.vdot(h_c, h)) ** 2 / float(np.vdot(h, h).real) >= scenario.sinr_floor


def span_basis(vectors: Sequence[np.ndarray]) -> np.ndarray:
    """Orthonormal basis of the span of the (column-normalised) vectors"""
    columns = [v / np.linalg.norm(v) for v in vectors if np.linalg.norm(v) > 0]
    return linalg.orth(np.column_stack(columns))


@dataclass
class _ReducedProblem:
    """Subproblem in real coordinates z of the unit ball, w = sqrt(P) * B (z_re + j z_im)"""
    basis: np.ndarray
    gradients: np.ndarray  # rows G_i with bracket_i / s_i = G_i . z - 1
    omega: np.ndarray
    h_dir: Optional[np.ndarray]
    h_level: float
    p_max: float

    @property
    def dim(self) -> int:
        return self.basis.shape[1]

    def to_real(self, w: np.ndarray) -> np.ndarray:
        c = self.basis.conj().T @ w / math.sqrt(self.p_max)
        return np.concatenate([c.real, c.imag])

    def to_w(self, z: np.ndarray) -> np.ndarray:
        d = self.dim
        return math.sqrt(self.p_max) * (self.basis @ (z[:d] + 1j * z[d:]))

    def brackets(self, z: np.ndarray) -> np.ndarray:
        return self.gradients @ z - 1.0

    def strictly_feasible(self, z: np.ndarray) -> bool:
        if float(z @ z) >= 1.0 or np.any(self.brackets(z) <= 0):
            return False
        return self.h_dir is None or float(self.h_dir @ z) > self.h_level

    def objective(self, z: np.ndarray) -> float:
        return float(np.sum(self.omega / self.brackets(z)))

    def barrier(self, z: np.ndarray, t: float) -> float:
        value = t * self.objective(z) - math.log(1.0 - float(z @ z))
        if self.h_dir is not None:
            value -= math.log(float(self.h_dir @ z) - self.h_level)
        return value

    def derivatives(self, z: np.ndarray, t: float) -> Tuple[np.ndarray, np.ndarray]:
        u = self.brackets(z)
        g = self.gradients
        grad = -t * (self.omega / u ** 2) @ g
        hess = 2.0 * t * (g.T * (self.omega / u ** 3)) @ g
        q = 1.0 - float(z @ z)
        grad = grad + 2.0 * z / q
        hess = hess + 2.0 * np.eye(len(z)) / q + 4.0 * np.outer(z, z) / q ** 2
        if self.h_dir is not None:
            r = float(self.h_dir @ z) - self.h_level
            grad = grad - self.h_dir / r
            hess = hess + np.outer(self.h_dir, self.h_dir) / r ** 2
        return grad, hess


def _reduce(
    vectors: Sequence[np.ndarray],
    weights: Sequence[float],
    y_fixed: Sequence[complex],
    h_c: np.ndarray,
    sinr_floor: float,
    p_max: float,
    extra_basis: Optional[Sequence[np.ndarray]] = None,
) -> _ReducedProblem:
    basis = span_basis(list(vectors) + [h_c] + list(extra_basis or []))
    sqrt_p = math.sqrt(p_max)
    y = np.asarray(y_fixed, dtype=complex)
    levels = np.abs(y) ** 2 * np.asarray(weights, dtype=float)
    if np.any(levels <= 0):
        raise SubproblemError("auxiliary variables must be nonzero")

    rows = []
    for v, y_i, s_i in zip(vectors, y, levels):
        b = (basis.conj().T @ v) * y_i
        rows.append(2.0 * sqrt_p * np.concatenate([b.real, b.imag]) / s_i)
    omega = (1.0 / levels) / np.sum(1.0 / levels)

    h_dir, h_level = None, 0.0
    if sinr_floor > 0:
        h_red = basis.conj().T @ h_c
        eta = np.concatenate([h_red.real, h_red.imag])
        norm_eta = float(np.linalg.norm(eta))
        h_level = math.sqrt(sinr_floor) / (sqrt_p * norm_eta)
        if h_level >= 1.0:
            raise InfeasibleScenarioError("SINR half-space misses the power ball interior")
        h_dir = eta / norm_eta
    return _ReducedProblem(
        basis=basis, gradients=np.array(rows), omega=omega, h_dir=h_dir, h_level=h_level, p_max=p_max
    )


def _starting_point(problem: _ReducedProblem, w_start: Optional[np.ndarray]) -> np.ndarray:
    centre = np.zeros(2 * problem.dim) if problem.h_dir is None else 0.5 * (1.0 + problem.h_level) * problem.h_dir
    anchors = []
    if w_start is not None:
        anchors.append(problem.to_real(w_start))
    pull = problem.gradients.sum(axis=0)
    if np.linalg.norm(pull) > 0:
        anchors.append(0.9 * pull / np.linalg.norm(pull))

    for anchor in anchors:
        eps = 0.5
        for _ in range(60):
            z0 = (1.0 - eps) * anchor + eps * centre
            if problem.strictly_feasible(z0):
                return z0
            eps *= 0.5
    raise SubproblemError("no strictly feasible start, auxiliary variables are stale", last_w=w_start)


def _newton_centre(problem: _ReducedProblem, z: np.ndarray, t: float) -> np.ndarray:
    for _ in range(NEWTON_MAX_STEPS):
        grad, hess = problem.derivatives(z, t)
        try:
            step = np.linalg.solve(hess, -grad)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(hess, -grad, rcond=None)[0]
        decrement = float(-grad @ step)
        if decrement / 2.0 <= 1e-12:
            break
        current = problem.barrier(z, t)
        s = 1.0
        while s > 1e-20:
            candidate = z + s * step
            if problem.strictly_feasible(candidate) and problem.barrier(candidate, t) <= current - 0.25 * s * decrement:
                break
            s *= 0.5
        else:
            break
        z = candidate
    return z


def subproblem_solve(
    vectors: Sequence[np.ndarray],
    weights: Sequence[float],
    y_fixed: Sequence[complex],
    h_c: np.ndarray,
    sinr_floor: float,
    p_max: float,
    w_start: Optional[np.ndarray] = None,
    extra_basis: Optional[Sequence[np.ndarray]] = None,
    gap_tol: Optional[float] = None,
) -> np.ndarray:
    """Minimise sum 1 / [2 Re(y_i* v_i^H w) - |y_i|^2 T_i] over the feasible set.

    Feasible set is Re(h_c^H w) >= sqrt(sinr_floor), ||w||^2 <= p_max, solved by a
    log-barrier Newton method in the span of the vectors and h_c.
    """
    gap_tol = gap_tol if gap_tol is not None else settings.barrier_gap_tol
    problem = _reduce(vectors, weights, y_fixed, h_c, sinr_floor, p_max, extra_basis)
    constraints = 1 if problem.h_dir is None else 2

    z = _starting_point(problem, w_start)
    t = BARRIER_T0
    while True:
        z = _newton_centre(problem, z, t)
        if constraints / t < gap_tol:
            break
        t *= BARRIER_MU
    return problem.to_w(z)


def _normalised_start(initial_w: np.ndarray, h_c: np.ndarray, scenario: Scenario) -> np.ndarray:
    w = align_phase(np.asarray(initial_w, dtype=complex), h_c)
    power = float(np.vdot(w, w).real)
    if power > scenario.p_max:
        w = w * math.sqrt(scenario.p_max / power)
    if abs(np.vdot(h_c, w)) ** 2 < scenario.sinr_floor * (1.0 - 1e-9):
        raise ContractViolationError("initial beamformer violates the SINR floor")
    return w


def _slacks(w: np.ndarray, h_c: np.ndarray, scenario: Scenario) -> Tuple[float, float]:
    sinr = abs(np.vdot(h_c, w)) ** 2 / scenario.noise_power
    return sinr - scenario.gamma_min, scenario.p_max - float(np.vdot(w, w).real)


def vqf_solve(
    decomp: DecompositionSet,
    h_c: np.ndarray,
    scenario: Scenario,
    weights: Optional[Dict[str, float]] = None,
    tolerance: Optional[float] = None,
    max_iters: Optional[int] = None,
    initial_w: Optional[np.ndarray] = None,
) -> BeamformerResult:
    """Quadratic-transform iteration on the surrogate SPEB, started from the closed-form beam"""
    tolerance = tolerance if tolerance is not None else settings.vqf_tolerance
    max_iters = max_iters if max_iters is not None else settings.vqf_max_iters
    terms = objective_terms(decomp, weights)
    _check_feasible(h_c, scenario.sinr_floor, scenario.p_max)

    lead = next((t for t in terms if t.name == "phi"), terms[0])
    if initial_w is None:
        w = align_phase(closed_form_beamformer(lead.vector, h_c, scenario), h_c)
    else:
        w = _normalised_start(initial_w, h_c, scenario)

    trace = [surrogate_objective(w, terms)]
    if len(terms) == 1 and initial_w is None and _is_dominant(lead.vector, h_c, scenario):
        sinr_slack, power_slack = _slacks(w, h_c, scenario)
        return BeamformerResult(
            w=w, objective_trace=trace, iterations=0, termination=Termination.SENSING_DOMINANT,
            tolerance=tolerance, sinr_slack=sinr_slack, power_slack=power_slack,
        )

    vectors = [t.vector for t in terms]
    numerators = [t.numerator for t in terms]
    y = [np.vdot(v, w) / n for v, n in zip(vectors, numerators)]
    termination = Termination.MAX_ITERS
    iterations = 0
    candidates: List[float] = []
    for iterations in range(1, max_iters + 1):
        y = [np.vdot(v, w) / n for v, n in zip(vectors, numerators)]
        try:
            candidate = subproblem_solve(vectors, numerators, y, h_c, scenario.sinr_floor, scenario.p_max, w_start=w)
        except SubproblemError as exc:
            raise SubproblemError(f"iteration {iterations}: {exc}", last_w=w) from exc
        candidate = align_phase(candidate, h_c)
        value = surrogate_objective(candidate, terms)
        candidates.append(value)
        previous = trace[-1]
        if value > previous * (1.0 + MONOTONE_SLACK):
            logger.warning(
                "VQF subproblem increased the objective at iteration %d (%.6e -> %.6e), keeping previous beam",
                iterations, previous, value,
            )
            termination = Termination.STALLED
            break
        w = candidate
        trace.append(value)
        if abs(previous - value) <= tolerance * abs(value):
            termination = Termination.CONVERGED
            break

    y_now = np.array([np.vdot(v, w) / n for v, n in zip(vectors, numerators)])
    y_prev = np.array(y)
    residual = float(np.max(np.abs(y_now - y_prev) / np.maximum(np.abs(y_now), 1e-300)))
    sinr_slack, power_slack = _slacks(w, h_c, scenario)
    logger.debug("VQF stopped after %d iterations (%s), objective %.6e", iterations, termination.value, trace[-1])
    return BeamformerResult(
        w=w, objective_trace=trace, iterations=iterations, termination=termination, tolerance=tolerance,
        sinr_slack=sinr_slack, power_slack=power_slack, fixed_point_residual=residual,
        candidate_values=candidates,
    )


class _SpanOracle:
    """Feasibility-projected search over span coefficients"""

    def __init__(self, terms: Sequence[ObjectiveTerm], h_c: np.ndarray, sinr_floor: float, p_max: float):
        self.basis = span_basis([t.vector for t in terms] + [h_c])
        self.d = self.basis.shape[1]
        self.reduced = np.column_stack([self.basis.conj().T @ t.vector for t in terms])
        self.numerators = np.array([t.numerator for t in terms])
        h_red = self.basis.conj().T @ h_c
        self.h_norm = float(np.linalg.norm(h_red))
        self.h_hat = h_red / self.h_norm
        self.level = math.sqrt(sinr_floor) / self.h_norm
        self.p_max = p_max

    def project(self, c: np.ndarray) -> np.ndarray:
        c = np.atleast_2d(c)
        proj = c @ self.h_hat.conj()
        phase = np.where(np.abs(proj) > 0, np.conj(proj) / np.maximum(np.abs(proj), 1e-300), 1.0)
        c = c * phase[:, None]
        norms = np.linalg.norm(c, axis=1)
        c = np.where(norms[:, None] > 0, c / np.maximum(norms, 1e-300)[:, None], self.h_hat[None, :])
        c = c * math.sqrt(self.p_max)

        along = np.real(c @ self.h_hat.conj())
        short = along < self.level
        if np.any(short):
            perp = c[short] - along[short, None] * self.h_hat[None, :]
            perp_norm = np.linalg.norm(perp, axis=1)
            room = math.sqrt(max(self.p_max - self.level ** 2, 0.0))
            scale = np.where(perp_norm > 0, room / np.maximum(perp_norm, 1e-300), 0.0)
            c[short] = self.level * self.h_hat[None, :] + perp * scale[:, None]
        return c

    def values(self, c: np.ndarray) -> np.ndarray:
        powers = np.abs(c @ self.reduced.conj()) ** 2
        with np.errstate(divide="ignore"):
            return np.sum(self.numerators[None, :] / powers, axis=1)

    def to_real(self, c: np.ndarray) -> np.ndarray:
        return np.concatenate([c.real, c.imag], axis=-1)

    def from_real(self, x: np.ndarray) -> np.ndarray:
        return x[..., : self.d] + 1j * x[..., self.d:]

    def refine(self, c: np.ndarray, value: float) -> Tuple[np.ndarray, float]:
        """Compass search with step halving over the 2d real coordinates"""
        x = self.to_real(c)
        step = 0.25 * math.sqrt(self.p_max)
        directions = np.vstack([np.eye(2 * self.d), -np.eye(2 * self.d)])
        while step > 1e-12 * math.sqrt(self.p_max):
            polls = self.project(self.from_real(x[None, :] + step * directions))
            vals = self.values(polls)
            best = int(np.argmin(vals))
            if vals[best] < value:
                x, value = self.to_real(polls[best]), float(vals[best])
            else:
                step *= 0.5
        return self.from_real(x), value


def oracle_search(
    terms: Sequence[ObjectiveTerm],
    h_c: np.ndarray,
    sinr_floor: float,
    p_max: float,
    seed: int = 0,
    budget: Optional[int] = None,
) -> Tuple[np.ndarray, float]:
    """Seeded random multi-start plus compass refinement over the span of the terms and h_c"""
    budget = budget if budget is not None else settings.oracle_budget
    _check_feasible(h_c, sinr_floor, p_max)
    oracle = _SpanOracle(terms, h_c, sinr_floor, p_max)
    rng = np.random.Generator(np.random.Philox(seed))

    best_c = np.empty((0, oracle.d), dtype=complex)
    best_v = np.empty(0)
    remaining = budget
    while remaining > 0:
        n = min(ORACLE_BATCH, remaining)
        raw = rng.standard_normal((n, oracle.d)) + 1j * rng.standard_normal((n, oracle.d))
        c = oracle.project(raw)
        v = oracle.values(c)
        pool_c = np.vstack([best_c, c])
        pool_v = np.concatenate([best_v, v])
        keep = np.argsort(pool_v, kind="stable")[:ORACLE_TOP_K]
        best_c, best_v = pool_c[keep], pool_v[keep]
        remaining -= n

    winner_c, winner_v = best_c[0], float(best_v[0])
    for c, v in zip(best_c, best_v):
        refined_c, refined_v = oracle.refine(c, float(v))
        if refined_v < winner_v:
            winner_c, winner_v = refined_c, refined_v
    w = oracle.basis @ winner_c
    return w, winner_v


def evaluate_beamformer(
    result: BeamformerResult,
    scenario: Scenario,
    layout_t: AntennaLayout,
    layout_r: AntennaLayout,
    target: TargetState,
) -> FimReport:
    """Attach the full numeric SPEB and CRBs of the optimised beam to the result"""
    report = fim_report(scenario, layout_t, layout_r, target, w=result.w)
    result.speb = report.speb
    result.crbs = report.crbs
    return report


def isotropic_baseline(
    scenario: Scenario,
    layout_t: AntennaLayout,
    layout_r: AntennaLayout,
    target: TargetState,
) -> FimReport:
    """FIM report at R_x = (P/N_t) I with closed-form CRBs attached for circular arrays"""
    covariance = isotropic_covariance(scenario.p_max, layout_t.count)
    report = fim_report(scenario, layout_t, layout_r, target, covariance=covariance)
    if layout_t.is_uca and layout_r.is_uca:
        closed = crb_coplanar_closed if target.case == TargetCase.COPLANAR else crb_noncoplanar_closed
        report.closed_form = closed(scenario, layout_t, layout_r, target, covariance)
    return report
