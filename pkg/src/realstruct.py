"""
Real structures on M, the residual involution r, and the fixed locus M'.

The three puncture placements give three formulas for sigma* on quadruples.
Fixedness is a class-level statement: q is fixed when some conjugator g
satisfies g Phi(q) g^-1 = q. Certificates keep that g so later stages can
linearize Phi at q without searching for it again.
"""

import enum
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple, Union

import numpy as np

import quat
import repvar
import tasks
from config import config
from errors import AntipodeError, ModuliError, NoConvergence, RankError, UnsupportedCase
from repvar import A1, B1, A2, B2, AmbientTangent, Quad, TangentFrame, Word

logger = logging.getLogger(__name__)

MPRIME_DIMENSION = 3


class PunctureCase(enum.Enum):
    LEFT = "left"
    MIDDLE = "middle"
    RIGHT = "right"


class InvolutionKind(enum.Enum):
    SIGMA = "sigma"
    R = "r"


@dataclass(frozen=True)
class FixedPointCertificate:
    """Witness that quad is a fixed class: conj_by(conjugator, Phi(quad)) ~ quad."""
    quad: Quad
    conjugator: quat.UnitQuaternion
    residual: float

    def is_valid(self, tol: Optional[float] = None) -> bool:
        tol = config.tolerances.TOL_FIXED if tol is None else tol
        return self.residual < tol

    def to_dict(self) -> dict:
        return {
            "quad": np.asarray(self.quad).tolist(),
            "conjugator": np.asarray(self.conjugator).tolist(),
            "residual": float(self.residual),
        }


@dataclass(frozen=True)
class NotFixed:
    """Failed fixedness test with the fingerprint gap (and residual if computed)."""
    gap: float
    residual: Optional[float] = None


def sigma_star(case: PunctureCase, q: Quad) -> Quad:
    """
    Induced real structure on quadruples.

    left:   [B1 A1 B1^-1, B1^-1, -B2 A2 B2^-1, B2^-1]
    middle: [B1 A1 B1^-1, B1^-1,  B2 A2 B2^-1, B2^-1]
    right:  [-B1 A1 B1^-1, B1^-1, B2 A2 B2^-1, B2^-1]
    """
    q = np.asarray(q, dtype=float)
    a1 = quat.conj_by(q[..., B1, :], q[..., A1, :])
    a2 = quat.conj_by(q[..., B2, :], q[..., A2, :])
    if case is PunctureCase.RIGHT:
        a1 = -a1
    elif case is PunctureCase.LEFT:
        a2 = -a2
    return np.stack([a1, quat.inverse(q[..., B1, :]), a2, quat.inverse(q[..., B2, :])], axis=-2)


def residual_r(q: Quad) -> Quad:
    """r(A1, B1, A2, B2) = (-A1, B1, A2, B2)."""
    out = np.array(q, dtype=float)
    out[..., A1, :] *= -1.0
    return out


def handle_swap(q: Quad) -> Quad:
    """(A1, B1, A2, B2) -> (A2, B2, A1, B1)."""
    q = np.asarray(q, dtype=float)
    return q[..., [A2, B2, A1, B1], :].copy()


def apply_involution(kind: InvolutionKind, case: PunctureCase, q: Quad) -> Quad:
    if kind is InvolutionKind.R:
        return residual_r(q)
    return sigma_star(case, q)


def sigma_star_pi1(gen: int, case: PunctureCase = PunctureCase.LEFT) -> Word:
    """Induced automorphism of pi_1 on generators (left puncture only)."""
    if case is not PunctureCase.LEFT:
        raise UnsupportedCase(f"no word formulas for the {case.value} puncture")
    a1, b1, a2, b2 = (repvar.generator(k) for k in range(4))
    if gen == A1:
        return a1
    if gen == B1:
        return b1.inverse()
    if gen == A2:
        return b1.inverse() * repvar.BOUNDARY_WORD * b2 * a2 * b2.inverse() * b1
    if gen == B2:
        return b1.inverse() * b2.inverse() * b1
    raise ValueError(f"unknown generator index {gen}")


def check_pi1_consistency(q: Quad) -> float:
    """Class distance between the word-level and quadruple-level sigma* (left)."""
    images = np.stack([repvar.evaluate_word(sigma_star_pi1(g), q) for g in range(4)])
    return repvar.class_distance(images, sigma_star(PunctureCase.LEFT, q))


def is_class_fixed(
    kind: InvolutionKind,
    case: PunctureCase,
    q: Quad,
    tol: Optional[float] = None,
) -> Union[FixedPointCertificate, NotFixed]:
    """Fingerprint screen, then conjugator recovery for a certificate."""
    tol = config.tolerances.TOL_FIXED if tol is None else tol
    image = apply_involution(kind, case, q)
    gap = repvar.fingerprint_gap(q, image)
    if gap > config.tolerances.FINGERPRINT_GAP:
        return NotFixed(gap=gap)
    g, _ = quat.solve_conjugator(image, q)
    residual = float(np.linalg.norm(repvar.conjugate_quad(g, image) - q))
    if residual >= tol:
        return NotFixed(gap=gap, residual=residual)
    return FixedPointCertificate(quad=np.array(q, dtype=float), conjugator=g, residual=residual)


def _aligned_image(kind: InvolutionKind, case: PunctureCase, q: Quad):
    image = apply_involution(kind, case, q)
    g, _ = quat.solve_conjugator(image, q)
    aligned = repvar.conjugate_quad(g, image)
    return g, aligned, float(np.linalg.norm(aligned - q))


def symmetrize(
    case: PunctureCase,
    q0: Quad,
    tol_fixed: Optional[float] = None,
    max_iter: Optional[int] = None,
    project_tol: Optional[float] = None,
) -> FixedPointCertificate:
    """
    Pull a variety point onto M' by geodesic midpoints.

    Each round replaces q by the per-factor midpoint of q and g sigma*(q) g^-1
    and projects back to the variety; the midpoint cancels the anti-invariant
    part of the displacement to first order.
    """
    tol_fixed = config.tolerances.TOL_FIXED if tol_fixed is None else tol_fixed
    max_iter = config.solver.SYMMETRIZE_MAX_ITER if max_iter is None else max_iter
    q = np.array(q0, dtype=float)
    gap = repvar.fingerprint_gap(q, sigma_star(case, q))
    if gap > config.tolerances.BASIN_GAP:
        raise NoConvergence(f"start outside the symmetrization basin (fingerprint gap {gap:.3f})")
    for iteration in range(max_iter + 1):
        g, aligned, residual = _aligned_image(InvolutionKind.SIGMA, case, q)
        if residual < tol_fixed:
            logger.debug(f"symmetrized in {iteration} rounds, residual {residual:.2e}")
            return FixedPointCertificate(quad=q, conjugator=g, residual=residual)
        try:
            q = repvar.project_to_variety(quat.geodesic_midpoint(q, aligned), tol=project_tol)
        except AntipodeError as exc:
            raise NoConvergence(f"symmetrization hit an antipode: {exc}") from exc
    raise NoConvergence(f"symmetrization did not converge in {max_iter} rounds")


def _fixed_class_residuals(kind, case, quads, gs):
    """Stacked residuals (log mu, g Phi(q) - q g) for batches of states."""
    logs = quat.log_su2(repvar.mu(quads))
    images = apply_involution(kind, case, quads)
    gb = np.broadcast_to(gs[..., None, :], images.shape)
    twist = quat.raw_mul(gb, images) - quat.raw_mul(quads, gb)
    return np.concatenate([logs, twist.reshape(twist.shape[:-2] + (16,))], axis=-1)


def solve_fixed_class(
    kind: InvolutionKind,
    case: PunctureCase,
    q0: Quad,
    g0: quat.UnitQuaternion,
    tol: Optional[float] = None,
    max_iter: Optional[int] = None,
) -> FixedPointCertificate:
    """
    Damped Gauss-Newton on the augmented unknowns (q, g).

    Equations: log mu(q) = 0 and g Phi(q) - q g = 0. The 19x15 Jacobian is
    taken by central differences along the 15 tangent directions, all 30
    perturbed states evaluated in one batch.
    """
    tol = config.solver.FIXED_SEARCH_TOL if tol is None else tol
    max_iter = config.solver.FIXED_SEARCH_MAX_ITER if max_iter is None else max_iter
    h = config.solver.JACOBIAN_STEP
    q = np.array(q0, dtype=float)
    g = quat.normalize(np.array(g0, dtype=float))
    basis = np.eye(15)

    def advance(q_, g_, delta):
        return repvar.retract(q_, delta[..., :12]), quat.mul(g_, quat.exp_su2(delta[..., 12:]))

    try:
        residual = _fixed_class_residuals(kind, case, q, g)
        norm = float(np.linalg.norm(residual))
        for iteration in range(max_iter):
            if norm < tol:
                break
            deltas = np.concatenate([h * basis, -h * basis])
            qs, gs = advance(np.broadcast_to(q, (len(deltas),) + q.shape), g[None], deltas)
            values = _fixed_class_residuals(kind, case, qs, gs)
            jac = ((values[:15] - values[15:]) / (2 * h)).T
            step = -np.linalg.lstsq(jac, residual, rcond=None)[0]
            scale = 1.0
            while scale >= 1.0 / 256:
                q_new, g_new = advance(q, g, scale * step)
                try:
                    res_new = _fixed_class_residuals(kind, case, q_new, g_new)
                    norm_new = float(np.linalg.norm(res_new))
                except AntipodeError:
                    norm_new = np.inf
                if norm_new < norm:
                    q, g, residual, norm = q_new, g_new, res_new, norm_new
                    break
                scale /= 2
            else:
                break
    except AntipodeError as exc:
        raise NoConvergence(f"fixed-class search hit an antipode: {exc}") from exc
    if norm >= tol:
        raise NoConvergence(f"fixed-class search stalled at residual {norm:.3e}")
    aligned = repvar.conjugate_quad(g, apply_involution(kind, case, q))
    return FixedPointCertificate(
        quad=q,
        conjugator=quat.canonical_sign(g),
        residual=float(np.linalg.norm(aligned - q)),
    )


def random_fixed_point(
    case: PunctureCase,
    rng: np.random.Generator,
    kind: InvolutionKind = InvolutionKind.SIGMA,
    attempts: Optional[int] = None,
) -> FixedPointCertificate:
    """Random fixed class: random variety point and conjugator, then solve_fixed_class."""
    attempts = config.solver.FIXED_SEARCH_ATTEMPTS if attempts is None else attempts
    for attempt in range(attempts):
        try:
            q0 = repvar.random_point(rng)
            cert = solve_fixed_class(kind, case, q0, quat.haar_sample(rng))
        except NoConvergence as exc:
            logger.debug(f"fixed-class attempt {attempt} failed: {exc}")
            continue
        if repvar.is_irreducible(cert.quad):
            return cert
    raise NoConvergence(f"no {kind.value}-fixed class after {attempts} attempts")


def involution_matrix(
    kind: InvolutionKind,
    case: PunctureCase,
    cert: FixedPointCertificate,
    frame: Optional[TangentFrame] = None,
) -> np.ndarray:
    """
    Differential of q -> g Phi(q) g^-1 at a fixed point, in the coordinates of
    the horizontal frame (6x6 for tangent_frame_M).
    """
    frame = repvar.tangent_frame_M(cert.quad) if frame is None else frame
    h = config.solver.INVOLUTION_STEP
    vectors = frame.vectors
    perturbed = repvar.retract(
        np.broadcast_to(cert.quad, (2 * len(vectors),) + cert.quad.shape),
        np.concatenate([h * vectors, -h * vectors]),
    )
    mapped = repvar.conjugate_quad(cert.conjugator, apply_involution(kind, case, perturbed))
    base = repvar.conjugate_quad(cert.conjugator, apply_involution(kind, case, cert.quad))
    moved = repvar.tangent_between(np.broadcast_to(base, mapped.shape), mapped)
    n = len(vectors)
    derivative = (moved[:n] - moved[n:]) / (2 * h)
    return vectors @ derivative.T


def linearized_involution(
    case: PunctureCase,
    cert: FixedPointCertificate,
    v: AmbientTangent,
    kind: InvolutionKind = InvolutionKind.SIGMA,
) -> AmbientTangent:
    """d(sigma*) at cert.quad applied to v, projected to the horizontal frame."""
    frame = repvar.tangent_frame_M(cert.quad)
    tau = involution_matrix(kind, case, cert, frame)
    return frame.vectors.T @ (tau @ frame.coordinates(v))


def invariant_subspace(tau: np.ndarray) -> np.ndarray:
    """Orthonormal basis (columns) of the +1 eigenspace of an involution matrix."""
    projector = 0.5 * (np.eye(len(tau)) + tau)
    left, singular, _ = np.linalg.svd(projector)
    return left[:, singular > 0.5]


def tangent_frame_Mprime(case: PunctureCase, cert: FixedPointCertificate) -> TangentFrame:
    """+1 eigenspace of the linearized sigma* inside tangent_frame_M: T M'."""
    frame = repvar.tangent_frame_M(cert.quad)
    tau = involution_matrix(InvolutionKind.SIGMA, case, cert, frame)
    invariant = invariant_subspace(tau)
    if invariant.shape[1] != MPRIME_DIMENSION:
        raise RankError(MPRIME_DIMENSION, invariant.shape[1], "tangent_frame_Mprime")
    return TangentFrame(base=cert.quad, vectors=invariant.T @ frame.vectors)


@dataclass(frozen=True)
class HandleSwapReport:
    """How exactly the handle swap turns the right-puncture sigma* into the left one."""
    samples: int
    max_intertwining_error: float
    max_variety_residual: float

    @property
    def valid(self) -> bool:
        return self.max_intertwining_error < 1e-12 and self.max_variety_residual < 1e-10


def verify_handle_swap(rng: np.random.Generator, samples: int = 20) -> HandleSwapReport:
    """swap(sigma_right(q)) against sigma_left(swap(q)) on random variety points."""
    worst_twist = 0.0
    worst_residual = 0.0
    for _ in range(samples):
        q = repvar.random_point(rng)
        lhs = handle_swap(sigma_star(PunctureCase.RIGHT, q))
        rhs = sigma_star(PunctureCase.LEFT, handle_swap(q))
        worst_twist = max(worst_twist, float(np.max(np.abs(lhs - rhs))))
        worst_residual = max(worst_residual, float(np.linalg.norm(repvar.constraint_residual(handle_swap(q)))))
    return HandleSwapReport(samples, worst_twist, worst_residual)


def nearest_s2_point(q: Quad) -> Tuple[Quad, float]:
    """
    Closest class of the form (j, i, e^{ia}, e^{ib}), the fixed torus of r in M.
    Returns (point, class distance).
    """
    q = np.asarray(q, dtype=float)
    g, _ = quat.solve_conjugator(q[[A1, B1]], np.stack([quat.J, quat.I]))
    aligned = repvar.conjugate_quad(g, q)
    a = float(np.arctan2(aligned[A2, 1], aligned[A2, 0]))
    b = float(np.arctan2(aligned[B2, 1], aligned[B2, 0]))
    point = repvar.make_quad(quat.J, quat.I, quat.complex_unit(a), quat.complex_unit(b))
    return point, repvar.class_distance(q, point)


@dataclass
class FixRCensus:
    """Landing sites of fixed-class searches for r from random starts on M."""
    searches: int
    landed: int = 0
    max_distance: float = 0.0
    outliers: List[Dict] = field(default_factory=list)
    failures: int = 0

    @property
    def passed(self) -> bool:
        return self.landed == self.searches and not self.outliers and self.failures == 0


def _fix_r_task(index: int, rng: np.random.Generator) -> Dict:
    attempts = config.solver.FIXED_SEARCH_ATTEMPTS
    for attempt in range(attempts):
        try:
            cert = solve_fixed_class(
                InvolutionKind.R, PunctureCase.LEFT, repvar.random_point(rng), quat.haar_sample(rng)
            )
        except ModuliError as exc:
            logger.debug(f"fix(r) search {index}, attempt {attempt}: {exc}")
            continue
        _, distance = nearest_s2_point(cert.quad)
        return {"search": index, "distance": distance, "fingerprint": repvar.fingerprint(cert.quad).tolist()}
    return {"search": index, "distance": None}


def fix_r_census(n: int, rng: np.random.Generator, workers: int = 1) -> FixRCensus:
    """Random r-fixed classes must all lie on the torus (j, i, e^{ia}, e^{ib})."""
    base_seed = int(rng.integers(0, 2 ** 63))
    census = FixRCensus(searches=n)
    for record in tasks.run_tasks(_fix_r_task, n, base_seed, workers):
        distance = record["distance"]
        if distance is None:
            census.failures += 1
            continue
        census.max_distance = max(census.max_distance, distance)
        if distance < config.tolerances.TOL_MATCH:
            census.landed += 1
        else:
            census.outliers.append(record)
    logger.info(f"fix(r) census: {census.landed}/{n} on the fixed torus, {len(census.outliers)} outliers")
    return census
