"""
Fisher Information and Position Error Bounds
Numeric Slepian-Bangs FIM, nuisance elimination, closed-form CRBs and the SPEB
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple

import numpy as np

from array_geometry import AntennaLayout
from config import settings
from errors import ContractViolationError, DegenerateGeometryError, PoleError
from special_functions import elliptic_k, mean_sin2_over_distance2, upsilon
from wavefront_model import (
    Scenario,
    SteeringBundle,
    TargetCase,
    TargetState,
    steering_bundle,
)

logger = logging.getLogger(__name__)

NUISANCE = ("re_alpha", "im_alpha")
SINGULAR_COND = 1e12
SINGULAR_FLOOR = 1e-20  # nuisance block this far below the rest counts as empty


@dataclass
class FimReport:
    parameter_names: Tuple[str, ...]
    full_fim: np.ndarray
    position_fim: np.ndarray
    approx_fim: np.ndarray
    crbs: Dict[str, float]
    crbs_approx: Dict[str, float]
    speb: float
    speb_approx: float
    singular: bool = False
    nuisance_pinv: bool = False
    closed_form: Dict[str, Optional[float]] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, object]:
        return {
            "parameters": list(self.parameter_names),
            "crbs": self.crbs,
            "crbs_approx": self.crbs_approx,
            "speb": self.speb,
            "speb_approx": self.speb_approx,
            "singular": self.singular,
            "nuisance_pinv": self.nuisance_pinv,
            "closed_form": self.closed_form,
            "position_fim": self.position_fim.tolist(),
        }


@dataclass(frozen=True)
class ProjectionT:
    matrix: np.ndarray  # rows: gradients of (rho, phi, y) w.r.t. (x, z, y)

    @property
    def coplanar(self) -> np.ndarray:
        return self.matrix[:2, :2]

    def block(self, size: int) -> np.ndarray:
        return self.matrix[:size, :size]


@dataclass
class CoplanarNorms:
    """Closed-form receive-side sums for an in-plane target, with direct sums alongside"""
    v2_sum: float
    v2_sq: float  # N[3/2 - 2U] inside the circle, N[2 - R^2/(2 rho^2) - 2U] outside
    v2_sq_alt: float  # 2 rho^2 N / (R^2 - rho^2)
    v1_sq: float
    v2_sum_direct: float
    v2_sq_direct: float
    v1_sq_direct: float
    v1_v2_direct: float


@dataclass
class NoncoplanarNorms:
    gamma1: float
    gamma2: float
    v22_sq: float
    v23_sum: float
    v23_sq: float
    # no closed form for the distance vector, summed directly
    v21_sum: float
    v21_sq: float
    v22_sq_direct: float
    v23_sum_direct: float
    v23_sq_direct: float
    v22_sum: float
    v21_v22: float
    v22_v23: float
    v21_v23: float


@dataclass(frozen=True)
class ReceiveStats:
    """Sums of receive-side auxiliary vectors entering the derivative Gram matrices"""
    count: int
    sums: Dict[str, float]
    grams: Dict[Tuple[str, str], float]

    def gram(self, i: str, j: str) -> float:
        return self.grams.get((i, j), self.grams.get((j, i), 0.0))


def isotropic_covariance(p_total: float, n_t: int) -> np.ndarray:
    return (p_total / n_t) * np.eye(n_t, dtype=complex)


def covariance_factor(covariance: np.ndarray) -> np.ndarray:
    """F with F F^H = R_x, dropping null directions"""
    vals, vecs = np.linalg.eigh(0.5 * (covariance + covariance.conj().T))
    keep = vals > max(vals.max(initial=0.0), 0.0) * 1e-14
    return vecs[:, keep] * np.sqrt(vals[keep])[None, :]


def _parameter_blocks(
    bundle_t: SteeringBundle, bundle_r: SteeringBundle, factor: np.ndarray, names: Tuple[str, ...]
) -> Dict[str, np.ndarray]:
    """B_i F for every position coordinate, with B_i = alpha_s-free dA/du_i"""
    g = bundle_t.alpha.conj() @ factor
    blocks = {}
    for name in names:
        g_dot = bundle_t.derivs[name].conj() @ factor
        blocks[name] = np.outer(bundle_r.derivs[name], g) + np.outer(bundle_r.alpha, g_dot)
    return blocks


def fim_numeric(
    w: Optional[np.ndarray],
    scenario: Scenario,
    layout_t: AntennaLayout,
    layout_r: AntennaLayout,
    target: TargetState,
    covariance: Optional[np.ndarray] = None,
) -> np.ndarray:
    """Slepian-Bangs FIM over [position coords..., Re alpha_s, Im alpha_s].

    Rank-one R_x = w w^H when w is given, otherwise the supplied covariance.
    """
    names = target.parameter_names
    if w is not None:
        factor = np.asarray(w, dtype=complex).reshape(-1, 1)
    elif covariance is not None:
        factor = covariance_factor(covariance)
    else:
        raise ContractViolationError("fim_numeric needs a beamformer or a covariance")
    if factor.shape[0] != layout_t.count:
        raise ContractViolationError(f"beamformer length {factor.shape[0]} != N_t = {layout_t.count}")

    bundle_t = steering_bundle(layout_t, target, scenario.wavelength)
    bundle_r = steering_bundle(layout_r, target, scenario.wavelength)
    a = scenario.alpha_s
    blocks = _parameter_blocks(bundle_t, bundle_r, factor, names)
    amplitude = np.outer(bundle_r.alpha, bundle_t.alpha.conj() @ factor)

    columns = [a * blocks[name] for name in names] + [amplitude, 1j * amplitude]
    stacked = np.stack([c.ravel() for c in columns], axis=1)
    fim = (2.0 * scenario.snapshots / scenario.noise_power) * np.real(stacked.conj().T @ stacked)
    return 0.5 * (fim + fim.T)


def eliminate_nuisance(full_fim: np.ndarray, n_nuisance: int = len(NUISANCE)) -> Tuple[np.ndarray, bool]:
    """Schur complement over the trailing nuisance block; second value flags a pseudo-inverse"""
    n = full_fim.shape[0] - n_nuisance
    j_pp = full_fim[:n, :n]
    j_pn = full_fim[:n, n:]
    j_nn = full_fim[n:, n:]

    used_pinv = False
    negligible = np.max(np.abs(j_nn)) <= SINGULAR_FLOOR * np.max(np.abs(full_fim))
    if negligible or np.linalg.cond(j_nn) > SINGULAR_COND:
        logger.warning("Nuisance block singular, falling back to pseudo-inverse")
        inv_nn = np.linalg.pinv(j_nn)
        used_pinv = True
    else:
        inv_nn = np.linalg.inv(j_nn)
    schur = j_pp - j_pn @ inv_nn @ j_pn.T
    return 0.5 * (schur + schur.T), used_pinv


def approximate_fim(position_fim: np.ndarray, case: TargetCase) -> np.ndarray:
    """Diagonal in-plane, block (phi) + (rho, y) out of plane"""
    if case == TargetCase.COPLANAR:
        return np.diag(np.diag(position_fim))
    approx = np.diag(np.diag(position_fim))
    approx[0, 2] = position_fim[0, 2]
    approx[2, 0] = position_fim[2, 0]
    return approx


def _is_singular(matrix: np.ndarray) -> bool:
    return not np.all(np.isfinite(matrix)) or not np.any(matrix) or np.linalg.cond(matrix) > 1.0 / np.finfo(float).eps


def crbs_from_fim(fim: np.ndarray, names: Tuple[str, ...]) -> Dict[str, float]:
    if _is_singular(fim):
        return {name: math.inf for name in names}
    inv = np.linalg.inv(fim)
    return {name: float(inv[i, i]) for i, name in enumerate(names)}


def projection_t(target: TargetState) -> ProjectionT:
    """Jacobian of the cylindrical coordinates with respect to the Cartesian ones"""
    rho = target.rho
    if rho == 0:
        raise DegenerateGeometryError("projection undefined on the array axis (rho = 0)")
    x = rho * math.cos(target.phi)
    z = rho * math.sin(target.phi)
    matrix = np.array([
        [x / rho, z / rho, 0.0],
        [-z / rho ** 2, x / rho ** 2, 0.0],
        [0.0, 0.0, 1.0],
    ])
    return ProjectionT(matrix=matrix)


def speb(position_fim: np.ndarray, projection: ProjectionT) -> float:
    """tr(J_eta^-1) with J_eta = T^T J_p T; returns inf for a singular FIM"""
    t = projection.block(position_fim.shape[0])
    j_eta = t.T @ position_fim @ t
    if _is_singular(j_eta):
        return math.inf
    return float(np.trace(np.linalg.inv(j_eta)))


def speb_weights(target: TargetState) -> np.ndarray:
    """diag((T T^T)^-1): SPEB = CRB_rho + rho^2 CRB_phi (+ CRB_y) for any FIM"""
    return np.array([1.0, target.rho ** 2, 1.0])[: len(target.parameter_names)]


def speb_weighted(crbs: Dict[str, float], target: TargetState) -> float:
    weights = speb_weights(target)
    return float(sum(w * crbs[name] for w, name in zip(weights, target.parameter_names)))


def _near_pole(layout: AntennaLayout, target: TargetState) -> bool:
    return abs(target.rho / layout.radius - 1.0) < settings.pole_margin


def norms_coplanar(layout: AntennaLayout, target: TargetState) -> CoplanarNorms:
    bundle = steering_bundle(layout, target, 1.0, case=TargetCase.COPLANAR)
    v1, v2 = bundle.aux["phi"], bundle.aux["rho"]
    if _near_pole(layout, target):
        raise PoleError(f"rho/R = {target.rho / layout.radius:.4f} is inside the pole margin")

    n = layout.count
    r = layout.radius
    a = target.rho / r
    u = upsilon(a)
    if a < 1.0:
        v2_sq = n * (1.5 - 2.0 * u)
    else:
        v2_sq = n * (2.0 - 1.0 / (2.0 * a * a) - 2.0 * u)
    v1_sq = n * target.rho ** 2 * mean_sin2_over_distance2(a)

    return CoplanarNorms(
        v2_sum=n * (u - 1.0),
        v2_sq=v2_sq,
        v2_sq_alt=2.0 * target.rho ** 2 * n / (r * r - target.rho ** 2),
        v1_sq=v1_sq,
        v2_sum_direct=float(np.sum(v2)),
        v2_sq_direct=float(np.dot(v2, v2)),
        v1_sq_direct=float(np.dot(v1, v1)),
        v1_v2_direct=float(np.dot(v1, v2)),
    )


def norms_noncoplanar(layout: AntennaLayout, target: TargetState) -> NoncoplanarNorms:
    bundle = steering_bundle(layout, target, 1.0, case=TargetCase.NONCOPLANAR)
    v21, v22, v23 = bundle.aux["rho"], bundle.aux["phi"], bundle.aux["y"]

    n = layout.count
    r = layout.radius
    gamma1 = 2.0 * r * target.rho
    gamma2 = target.y ** 2 + target.rho ** 2 + r * r
    if not gamma2 > gamma1:
        raise ContractViolationError("gamma2 must exceed gamma1 for an out-of-plane target")

    root = math.sqrt(gamma2 ** 2 - gamma1 ** 2)
    d_0 = target.range_from_origin
    kk = elliptic_k(math.sqrt(2.0 * gamma1 / (gamma2 + gamma1)))
    s = math.sqrt(gamma2 + gamma1)

    return NoncoplanarNorms(
        gamma1=gamma1,
        gamma2=gamma2,
        v22_sq=n / gamma1 ** 2 * (gamma2 - root),
        v23_sum=n / d_0 - 2.0 * n * kk / (math.pi * s),
        v23_sq=n * (1.0 / d_0 ** 2 + 1.0 / root - 4.0 * kk / (math.pi * d_0 * s)),
        v21_sum=float(np.sum(v21)),
        v21_sq=float(np.dot(v21, v21)),
        v22_sq_direct=float(np.dot(v22, v22)),
        v23_sum_direct=float(np.sum(v23)),
        v23_sq_direct=float(np.dot(v23, v23)),
        v22_sum=float(np.sum(v22)),
        v21_v22=float(np.dot(v21, v22)),
        v22_v23=float(np.dot(v22, v23)),
        v21_v23=float(np.dot(v21, v23)),
    )


def direct_receive_stats(bundle_r: SteeringBundle, names: Tuple[str, ...]) -> ReceiveStats:
    aux = bundle_r.aux
    return ReceiveStats(
        count=len(bundle_r.alpha),
        sums={name: float(np.sum(aux[name])) for name in names},
        grams={(i, j): float(np.dot(aux[i], aux[j])) for i in names for j in names},
    )


def closed_receive_stats(layout_r: AntennaLayout, target: TargetState) -> ReceiveStats:
    """Receive sums from the norm identities, cross terms dropped as in the diagonal approximation"""
    if target.case == TargetCase.COPLANAR:
        norms = norms_coplanar(layout_r, target)
        return ReceiveStats(
            count=layout_r.count,
            sums={"rho": norms.v2_sum, "phi": 0.0},
            grams={("rho", "rho"): norms.v2_sq, ("phi", "phi"): norms.v1_sq},
        )
    norms = norms_noncoplanar(layout_r, target)
    return ReceiveStats(
        count=layout_r.count,
        sums={"rho": norms.v21_sum, "phi": 0.0, "y": norms.v23_sum},
        grams={
            ("rho", "rho"): norms.v21_sq,
            ("phi", "phi"): norms.v22_sq,
            ("y", "y"): norms.v23_sq,
            ("rho", "y"): norms.v21_v23,
        },
    )


def derivative_gram(
    wavelength: float,
    bundle_t: SteeringBundle,
    stats: ReceiveStats,
    scales: Dict[str, float],
    i: str,
    j: str,
) -> np.ndarray:
    """Transmit-side matrix M_ij with Re Tr(R_x M_ij) = [dA/du_i, dA/du_j] trace form"""
    k = 2.0 * math.pi / wavelength
    a = bundle_t.alpha
    x_i = bundle_t.aux[i] * a
    x_j = bundle_t.aux[j] * a
    outer = np.outer
    m = (
        stats.gram(i, j) * outer(a, a.conj())
        + stats.count * outer(x_i, x_j.conj())
        - stats.sums[i] * outer(a, x_j.conj())
        - stats.sums[j] * outer(x_i, a.conj())
    )
    return k * k * scales[i] * scales[j] * m


def require_shared_circle(layout_t: AntennaLayout, layout_r: AntennaLayout) -> None:
    """Gram assembly shares one coordinate scale between transmit and receive"""
    if layout_t.kind != layout_r.kind:
        raise ContractViolationError("transmit and receive arrays must be of the same kind")
    if layout_t.is_uca and layout_r.is_uca and not math.isclose(layout_t.radius, layout_r.radius, rel_tol=1e-12):
        raise ContractViolationError("transmit and receive circles must share one radius")


def _trace_fim(
    scenario: Scenario,
    bundle_t: SteeringBundle,
    stats: ReceiveStats,
    scales: Dict[str, float],
    covariance: np.ndarray,
    pairs,
) -> Dict[Tuple[str, str], float]:
    values = {}
    for i, j in pairs:
        m = derivative_gram(scenario.wavelength, bundle_t, stats, scales, i, j)
        values[(i, j)] = scenario.sensing_gain * float(np.real(np.trace(covariance @ m)))
    return values


def _inverse_or_inf(value: float) -> float:
    return 1.0 / value if value > 0 else math.inf


def _is_isotropic(covariance: np.ndarray) -> bool:
    n = covariance.shape[0]
    p = float(np.real(np.trace(covariance)))
    return p > 0 and np.allclose(covariance, (p / n) * np.eye(n), rtol=0.0, atol=1e-12 * p)


def _closed_setup(scenario: Scenario, layout_t: AntennaLayout, layout_r: AntennaLayout, target: TargetState, case: TargetCase):
    if not (layout_t.is_uca and layout_r.is_uca):
        raise ContractViolationError("closed-form bounds need circular arrays")
    require_shared_circle(layout_t, layout_r)
    bundle_t = steering_bundle(layout_t, target, scenario.wavelength, case=case)
    bundle_r = steering_bundle(layout_r, target, scenario.wavelength, case=case)
    try:
        stats = closed_receive_stats(layout_r, target)
        pole = False
    except PoleError:
        logger.warning("Target within the rho = R pole margin, using direct sums")
        stats = direct_receive_stats(bundle_r, target.parameter_names)
        pole = True
    return bundle_t, bundle_r, stats, pole


def crb_coplanar_closed(
    scenario: Scenario,
    layout_t: AntennaLayout,
    layout_r: AntennaLayout,
    target: TargetState,
    covariance: np.ndarray,
) -> Dict[str, Optional[float]]:
    """Diagonal-approximation CRBs for an in-plane target, plus the isotropic closed forms"""
    bundle_t, _, stats, pole = _closed_setup(scenario, layout_t, layout_r, target, TargetCase.COPLANAR)
    j = _trace_fim(scenario, bundle_t, stats, bundle_t.scales, covariance, [("rho", "rho"), ("phi", "phi")])
    result: Dict[str, Optional[float]] = {
        "rho": _inverse_or_inf(j[("rho", "rho")]),
        "phi": _inverse_or_inf(j[("phi", "phi")]),
        "rho_isotropic": None,
        "phi_isotropic": None,
    }
    if pole or not _is_isotropic(covariance):
        return result

    p = float(np.real(np.trace(covariance)))
    a = target.rho / layout_r.radius
    u = upsilon(a)
    base = (
        scenario.wavelength ** 2 * scenario.noise_power
        / (8.0 * math.pi ** 2 * abs(scenario.alpha_s) ** 2 * layout_r.count * p * scenario.snapshots)
    )
    if a <= 1.0:
        result["phi_isotropic"] = _inverse_or_inf(target.rho ** 2) * base
        result["rho_isotropic"] = base / (1.0 - 2.0 * u * u)
    else:
        result["phi_isotropic"] = base / layout_r.radius ** 2
        result["rho_isotropic"] = base / (2.0 - 1.0 / (a * a) - 2.0 * u * u)
    return result


def crb_noncoplanar_closed(
    scenario: Scenario,
    layout_t: AntennaLayout,
    layout_r: AntennaLayout,
    target: TargetState,
    covariance: np.ndarray,
) -> Dict[str, Optional[float]]:
    """Diagonal and (rho, y)-block CRBs for an out-of-plane target, plus isotropic closed forms"""
    bundle_t, _, stats, pole = _closed_setup(scenario, layout_t, layout_r, target, TargetCase.NONCOPLANAR)
    pairs = [("rho", "rho"), ("phi", "phi"), ("y", "y"), ("rho", "y")]
    j = _trace_fim(scenario, bundle_t, stats, bundle_t.scales, covariance, pairs)

    block = np.array([[j[("rho", "rho")], j[("rho", "y")]], [j[("rho", "y")], j[("y", "y")]]])
    block_crbs = crbs_from_fim(block, ("rho", "y"))
    result: Dict[str, Optional[float]] = {
        "rho": _inverse_or_inf(j[("rho", "rho")]),
        "phi": _inverse_or_inf(j[("phi", "phi")]),
        "y": _inverse_or_inf(j[("y", "y")]),
        "rho_block": block_crbs["rho"],
        "y_block": block_crbs["y"],
        "rho_isotropic": None,
        "phi_isotropic": None,
        "y_isotropic": None,
    }
    if pole or not _is_isotropic(covariance):
        return result

    p = float(np.real(np.trace(covariance)))
    n_r = layout_r.count
    norms = norms_noncoplanar(layout_r, target)
    g1, g2 = norms.gamma1, norms.gamma2
    root = math.sqrt(g2 ** 2 - g1 ** 2)
    kk = elliptic_k(math.sqrt(2.0 * g1 / (g2 + g1)))
    phi_y = 1.0 / root - 4.0 * kk ** 2 / (math.pi ** 2 * (g2 + g1))
    var_rho = norms.v21_sq / n_r - (norms.v21_sum / n_r) ** 2
    cov_rho_y = norms.v21_v23 / n_r - (norms.v21_sum / n_r) * (norms.v23_sum / n_r)
    # (rho, y) block of the isotropic FIM in units of 16 / base
    det = target.y ** 2 * (var_rho * phi_y - cov_rho_y ** 2)

    base = (
        scenario.wavelength ** 2 * scenario.noise_power
        / (math.pi ** 2 * abs(scenario.alpha_s) ** 2 * scenario.snapshots * p * n_r)
    )
    result["phi_isotropic"] = base / (4.0 * (g2 - root))
    result["rho_isotropic"] = _inverse_or_inf(16.0 * det) * target.y ** 2 * phi_y * base
    result["y_isotropic"] = _inverse_or_inf(16.0 * det) * var_rho * base
    return result


def fim_report(
    scenario: Scenario,
    layout_t: AntennaLayout,
    layout_r: AntennaLayout,
    target: TargetState,
    w: Optional[np.ndarray] = None,
    covariance: Optional[np.ndarray] = None,
) -> FimReport:
    """Full numeric FIM, nuisance-eliminated position block, its approximation, CRBs and SPEB"""
    names = target.parameter_names
    full = fim_numeric(w, scenario, layout_t, layout_r, target, covariance=covariance)
    position, used_pinv = eliminate_nuisance(full)
    approx = approximate_fim(position, target.case)
    projection = projection_t(target)

    report = FimReport(
        parameter_names=names,
        full_fim=full,
        position_fim=position,
        approx_fim=approx,
        crbs=crbs_from_fim(position, names),
        crbs_approx=crbs_from_fim(approx, names),
        speb=speb(position, projection),
        speb_approx=speb(approx, projection),
        singular=_is_singular(position),
        nuisance_pinv=used_pinv,
    )
    logger.debug("FIM assembled for %s target, speb=%.3e", target.case.value, report.speb)
    return report
