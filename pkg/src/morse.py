"""
The Morse-Bott function f' = tr(B1)/2 on the real moduli space M'.

Covers the gradient and Hessian of f' in tangent_frame_Mprime coordinates,
the explicit critical circles S1', S2', S3' for each puncture placement, the
circle action on M, RK4 gradient flow on M', and the census that flows random
fixed points to their limits and matches every limit against the known
critical families.
"""

import enum
import logging
from collections import Counter
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

import quat
import realstruct
import repvar
import tasks
from config import config
from errors import BoundaryError, ModuliError, NotCritical
from realstruct import FixedPointCertificate, InvolutionKind, PunctureCase
from repvar import A1, B1, A2, B2, AmbientTangent, Quad, TangentFrame

logger = logging.getLogger(__name__)


class CriticalFamily(enum.Enum):
    S1P = "S1p"
    S2P = "S2p"
    S3P = "S3p"

    @property
    def f_value(self) -> float:
        return {"S1p": -1.0, "S2p": 0.0, "S3p": 1.0}[self.value]

    @property
    def expected_index(self) -> int:
        return {"S1p": 0, "S2p": 1, "S3p": 2}[self.value]

    @property
    def branches(self) -> Tuple[int, ...]:
        return (1, -1) if self is CriticalFamily.S2P else (1,)


class Direction(enum.Enum):
    DOWN = "down"
    UP = "up"


# the two S2' circles are at least 2 apart in class distance; below this many
# samples per circle the chain_link radius can reach across
MIN_CIRCLE_SAMPLES = 6

# plane swept by A1 on S1'/S3': A1 = cos(t) e0 + sin(t) e1
_ROTATION_PLANE = {
    PunctureCase.LEFT: (quat.ONE, quat.I),
    PunctureCase.MIDDLE: (quat.ONE, quat.K),
    PunctureCase.RIGHT: (quat.I, quat.J),
}


def f(q: Quad) -> float:
    """tr(B1)/2, the real part of B1."""
    return float(np.asarray(q, dtype=float)[..., B1, 0])


def ambient_gradient(q: Quad) -> AmbientTangent:
    """Gradient of f in the left-translated metric: -imag(B1) in the B1 slot."""
    grad = np.zeros(12)
    grad[3 * B1:3 * B1 + 3] = -quat.imag(np.asarray(q, dtype=float)[B1])
    return grad


def grad_fprime(
    case: PunctureCase,
    cert: FixedPointCertificate,
    frame: Optional[TangentFrame] = None,
) -> AmbientTangent:
    frame = realstruct.tangent_frame_Mprime(case, cert) if frame is None else frame
    return frame.project(ambient_gradient(cert.quad))


def hessian_fprime(
    case: PunctureCase,
    cert: FixedPointCertificate,
    frame: Optional[TangentFrame] = None,
    tol_grad: Optional[float] = None,
) -> np.ndarray:
    """
    Hessian of f' in the tangent_frame_Mprime basis.

    Mixed second differences of f along q exp(h(+-e_a +-e_b)), each point
    pulled back onto the variety; the projection supplies the curvature term
    that a plain ambient Hessian would miss.
    """
    tol_grad = config.tolerances.TOL_GRAD if tol_grad is None else tol_grad
    frame = realstruct.tangent_frame_Mprime(case, cert) if frame is None else frame
    grad_norm = float(np.linalg.norm(grad_fprime(case, cert, frame)))
    if grad_norm >= tol_grad:
        raise NotCritical(grad_norm, tol_grad)
    h = config.solver.HESSIAN_STEP
    basis = frame.vectors

    def value(v):
        return f(repvar.project_to_variety(repvar.retract(cert.quad, h * v), tol=1e-14))

    dim = len(basis)
    hessian = np.zeros((dim, dim))
    for a in range(dim):
        for b in range(a, dim):
            plus, minus = basis[a] + basis[b], basis[a] - basis[b]
            hessian[a, b] = (value(plus) - value(minus) - value(-minus) + value(-plus)) / (4 * h * h)
            hessian[b, a] = hessian[a, b]
    return 0.5 * (hessian + hessian.T)


def split_spectrum(eigenvalues: np.ndarray, tol_eig: Optional[float] = None) -> Tuple[int, int, int]:
    """(negative, null, positive) counts with a threshold relative to the spectral radius."""
    tol_eig = config.tolerances.TOL_EIG if tol_eig is None else tol_eig
    scale = float(np.max(np.abs(eigenvalues))) if len(eigenvalues) else 0.0
    threshold = max(tol_eig * scale, config.tolerances.TOL_EIG_FLOOR)
    negative = int(np.sum(eigenvalues < -threshold))
    positive = int(np.sum(eigenvalues > threshold))
    return negative, len(eigenvalues) - negative - positive, positive


def classify_critical(
    case: PunctureCase,
    cert: FixedPointCertificate,
    tol_eig: Optional[float] = None,
) -> Tuple[int, int]:
    """(index, nullity) of the Hessian at a critical point."""
    eigenvalues = np.linalg.eigvalsh(hessian_fprime(case, cert))
    index, nullity, _ = split_spectrum(eigenvalues, tol_eig)
    return index, nullity


def critical_point(case: PunctureCase, family: CriticalFamily, angle: float, branch: int = 1) -> Quad:
    """
    Point of a critical circle.

    S1p/S3p rotate A1 in a case-dependent plane with B1 = -1/+1 and
    (A2, B2) = (i, j). S2p is (j, i, +-i, e^{i angle}) for the left puncture
    and (j, i, +-1, e^{i angle}) otherwise.
    """
    if branch not in (1, -1):
        raise ValueError(f"branch must be +1 or -1, got {branch}")
    if family is CriticalFamily.S2P:
        a2 = branch * (quat.I if case is PunctureCase.LEFT else quat.ONE)
        return repvar.make_quad(quat.J, quat.I, a2, quat.complex_unit(angle))
    e0, e1 = _ROTATION_PLANE[case]
    a1 = np.cos(angle) * e0 + np.sin(angle) * e1
    b1 = -quat.ONE if family is CriticalFamily.S1P else quat.ONE
    return repvar.make_quad(a1, b1, quat.I, quat.J)


def family_tangent(case: PunctureCase, family: CriticalFamily, angle: float, branch: int = 1) -> AmbientTangent:
    """Velocity of the critical circle at angle, left-translated to critical_point(angle)."""
    h = 1e-6
    base = critical_point(case, family, angle, branch)
    ahead = critical_point(case, family, angle + h, branch)
    behind = critical_point(case, family, angle - h, branch)
    return (repvar.tangent_between(base, ahead) - repvar.tangent_between(base, behind)) / (2 * h)


def rotation_angle(case: PunctureCase, a1: quat.UnitQuaternion) -> float:
    """Angle of A1 in the plane swept on S1'/S3'."""
    e0, e1 = _ROTATION_PLANE[case]
    return float(np.arctan2(np.dot(a1, e1), np.dot(a1, e0)))


def family_angles(samples: int) -> np.ndarray:
    return 2 * np.pi * np.arange(samples) / samples


def branch_invariant(case: PunctureCase, q: Quad) -> float:
    """Conjugation invariant positive on the + circle of S2' and negative on the - circle."""
    prints = repvar.fingerprint(q)
    if case is PunctureCase.LEFT:
        return float(-prints[7])  # tr(B1 A2)
    return float(prints[2])  # tr(A2)


def nearest_family_point(case: PunctureCase, family: CriticalFamily, q: Quad) -> Tuple[Quad, float, int]:
    """
    Closest member of a family to the class of q: conjugate q so that the
    family's frozen slots line up, read the free angle (and branch), rebuild.
    Returns (family point, class distance, branch).
    """
    q = np.asarray(q, dtype=float)
    if family is CriticalFamily.S2P:
        g, _ = quat.solve_conjugator(q[[A1, B1]], np.stack([quat.J, quat.I]))
        aligned = repvar.conjugate_quad(g, q)
        marker = aligned[A2, 1] if case is PunctureCase.LEFT else aligned[A2, 0]
        branch = 1 if marker >= 0 else -1
        angle = float(np.arctan2(aligned[B2, 1], aligned[B2, 0]))
    else:
        g, _ = quat.solve_conjugator(q[[A2, B2]], np.stack([quat.I, quat.J]))
        aligned = repvar.conjugate_quad(g, q)
        angle = rotation_angle(case, aligned[A1])
        branch = 1
    point = critical_point(case, family, angle, branch)
    return point, repvar.class_distance(q, point), branch


@dataclass(frozen=True)
class FamilyMatch:
    family: CriticalFamily
    branch: int
    distance: float

    @property
    def label(self) -> str:
        if self.family is CriticalFamily.S2P:
            return f"{self.family.value}{'+' if self.branch > 0 else '-'}"
        return self.family.value


def match_family(case: PunctureCase, q: Quad) -> FamilyMatch:
    """Best match of q among the three critical families."""
    best: Optional[FamilyMatch] = None
    for family in CriticalFamily:
        _, distance, branch = nearest_family_point(case, family, q)
        if best is None or distance < best.distance:
            best = FamilyMatch(family, branch, distance)
    return best


def circle_action(phi: float, q: Quad) -> Quad:
    """
    e^{i phi} . (A1, B1, A2, B2) = (A1 e^{i phi}, B1, A2, B2), applied after
    conjugating q so that B1 = cos(beta) + sin(beta) i with beta in (0, pi).
    """
    q = np.asarray(q, dtype=float)
    value = f(q)
    if abs(value) >= 1 - 1e-9:
        raise BoundaryError(f"circle action undefined at f = {value:.12f}")
    target = np.array([q[B1, 0], np.linalg.norm(q[B1, 1:]), 0.0, 0.0])
    g, _ = quat.solve_conjugator(q[B1], target)
    normal = repvar.conjugate_quad(g, q)
    normal[B1] = target
    normal[A1] = quat.mul(normal[A1], quat.complex_unit(phi))
    return normal


def sign_change(q: Quad) -> Quad:
    """(A1, B1, A2, B2) -> (A1, -B1, A2, B2); sends f to -f."""
    out = np.array(q, dtype=float)
    out[..., B1, :] *= -1.0
    return out


@dataclass(frozen=True)
class FlowResult:
    limit: Quad
    f_limit: float
    steps: int
    converged: bool
    grad_norm: float = float("nan")
    certificate: Optional[FixedPointCertificate] = None


def _advance(case: PunctureCase, q: Quad, v: AmbientTangent) -> FixedPointCertificate:
    moved = repvar.project_to_variety(repvar.retract(q, v), tol=config.solver.FLOW_PROJECT_TOL)
    return realstruct.symmetrize(
        case,
        moved,
        tol_fixed=config.solver.FLOW_SYMMETRIZE_TOL,
        project_tol=config.solver.FLOW_PROJECT_TOL,
    )


def flow(
    case: PunctureCase,
    cert: FixedPointCertificate,
    direction: Direction,
    max_steps: Optional[int] = None,
    tol_grad: Optional[float] = None,
) -> FlowResult:
    """
    RK4 integration of -grad f' (down) or +grad f' (up) on M'.

    Every stage is retracted, projected and re-symmetrized. A step that moves
    f the wrong way is retried at half the size, unless the expected change
    h |grad|^2 is already below rounding.
    """
    max_steps = config.solver.FLOW_MAX_STEPS if max_steps is None else max_steps
    tol_grad = config.tolerances.TOL_GRAD if tol_grad is None else tol_grad
    sign = -1.0 if direction is Direction.DOWN else 1.0
    h = config.solver.FLOW_INITIAL_STEP

    def field_at(c: FixedPointCertificate) -> AmbientTangent:
        return sign * grad_fprime(case, c)

    current = cert
    k1 = field_at(current)
    grad_norm = float(np.linalg.norm(k1))
    steps = 0
    while steps < max_steps:
        if grad_norm < tol_grad:
            return FlowResult(current.quad, f(current.quad), steps, True, grad_norm, current)
        if h < 1e-10:
            logger.warning(f"flow step collapsed at f = {f(current.quad):.6f}, |grad| = {grad_norm:.2e}")
            break
        steps += 1
        try:
            k2 = field_at(_advance(case, current.quad, 0.5 * h * k1))
            k3 = field_at(_advance(case, current.quad, 0.5 * h * k2))
            k4 = field_at(_advance(case, current.quad, h * k3))
            candidate = _advance(case, current.quad, h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4))
            k_next = field_at(candidate)
        except ModuliError as exc:
            logger.debug(f"flow stage failed at step {steps} (h = {h:.3g}): {exc}")
            h *= 0.5
            continue
        change = sign * (f(candidate.quad) - f(current.quad))
        if change < 0 and h * grad_norm ** 2 >= 1e-12:
            h *= 0.5
            continue
        current, k1 = candidate, k_next
        grad_norm = float(np.linalg.norm(k1))
        h = min(1.5 * h, config.solver.FLOW_MAX_STEP)
    return FlowResult(current.quad, f(current.quad), steps, grad_norm < tol_grad, grad_norm, current)


@dataclass
class CensusReport:
    """Where the flows from random points of M' ended up."""
    case: PunctureCase
    starts: int
    histogram: Dict[str, int] = field(default_factory=dict)
    family_counts: Dict[str, int] = field(default_factory=dict)
    index_mismatches: int = 0
    unmatched: List[dict] = field(default_factory=list)
    not_converged: int = 0
    failed_starts: int = 0
    max_f_deviation: float = 0.0

    @property
    def passed(self) -> bool:
        return (
            not self.unmatched
            and self.index_mismatches == 0
            and self.not_converged == 0
            and self.failed_starts == 0
            and self.max_f_deviation < 1e-6
        )


def _census_task(case: PunctureCase, index: int, rng: np.random.Generator) -> List[dict]:
    try:
        start = realstruct.random_fixed_point(case, rng)
    except ModuliError as exc:
        logger.warning(f"census start {index} failed: {exc}")
        return [{"start": index, "status": "failed_start", "error": str(exc)}]
    records = []
    for direction in Direction:
        result = flow(case, start, direction)
        record = {"start": index, "direction": direction.value, "f_limit": result.f_limit, "steps": result.steps}
        if not result.converged:
            record["status"] = "not_converged"
            records.append(record)
            continue
        match = match_family(case, result.limit)
        record.update(family=match.label, distance=match.distance)
        try:
            record["index"] = classify_critical(case, result.certificate)[0]
        except ModuliError as exc:
            record["index"] = None
            logger.warning(f"limit of start {index} could not be classified: {exc}")
        if match.distance < config.tolerances.TOL_MATCH:
            record["status"] = "matched"
            record["index_ok"] = record["index"] == match.family.expected_index
            record["f_deviation"] = abs(result.f_limit - match.family.f_value)
        else:
            record["status"] = "unmatched"
            record["fingerprint"] = repvar.fingerprint(result.limit).tolist()
        records.append(record)
    return records


def critical_census(
    case: PunctureCase,
    n: int,
    rng: np.random.Generator,
    workers: int = 1,
) -> CensusReport:
    """Flow n random fixed points down and up; classify and match every limit."""
    if n < 1:
        raise ValueError("census needs at least one start")
    base_seed = int(rng.integers(0, 2 ** 63))
    batches = tasks.run_tasks(lambda i, r: _census_task(case, i, r), n, base_seed, workers)
    report = CensusReport(case=case, starts=n)
    histogram: Counter = Counter()
    families: Counter = Counter()
    for record in (r for batch in batches for r in batch):
        status = record["status"]
        if status == "failed_start":
            report.failed_starts += 1
        elif status == "not_converged":
            report.not_converged += 1
        elif status == "unmatched":
            report.unmatched.append(record)
            histogram[f"{record['f_limit']:+.6f}"] += 1
        else:
            families[record["family"]] += 1
            histogram[f"{round(record['f_limit']):+d}"] += 1
            report.max_f_deviation = max(report.max_f_deviation, record["f_deviation"])
            if not record["index_ok"]:
                report.index_mismatches += 1
    report.histogram = dict(sorted(histogram.items()))
    report.family_counts = dict(sorted(families.items()))
    logger.info(f"census ({case.value}, n={n}): {report.family_counts}, unmatched {len(report.unmatched)}")
    return report


@dataclass(frozen=True)
class CriticalSubmanifold:
    name: str
    f_value: float
    index: int
    nullity: int
    components: int
    dim: int
    r_action: str
    r_on_negative_bundle: str

    def to_dict(self) -> dict:
        return dict(vars(self))


def chain_link(chains: List[List[Quad]]) -> float:
    """
    Linking radius for count_components: 1.5 times the widest class-distance
    gap between cyclically consecutive samples of any sampled circle.
    """
    widest = max(
        repvar.class_distance(chain[k], chain[(k + 1) % len(chain)])
        for chain in chains
        for k in range(len(chain))
    )
    return 1.5 * widest


def count_components(quads: List[Quad], link: float) -> int:
    """Clusters of sampled classes, joining any two closer than link."""
    parent = list(range(len(quads)))

    def root(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(len(quads)):
        for j in range(i + 1, len(quads)):
            if root(i) != root(j) and repvar.class_distance(quads[i], quads[j]) < link:
                parent[root(i)] = root(j)
    return len({root(i) for i in range(len(quads))})


def _holonomy(vectors: List[np.ndarray], overlap) -> Tuple[int, List[int]]:
    """
    Sign transported around a closed chain of samples. overlap(a, b) returns
    the (nonzero) pairing whose sign says whether b continues a.
    """
    signs = [1]
    for previous, current in zip(vectors, vectors[1:]):
        signs.append(signs[-1] * int(np.sign(overlap(previous, current))))
    return signs[-1] * int(np.sign(overlap(vectors[-1], vectors[0]))), signs


def _frame_overlap(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.linalg.det(b @ a.T))


@dataclass
class FamilyReport:
    """Numerical checks along the sampled critical circles of one family."""
    family: CriticalFamily
    samples: int
    max_constraint_residual: float = 0.0
    max_fixed_residual: float = 0.0
    max_grad_norm: float = 0.0
    max_f_error: float = 0.0
    classifications: Dict[str, int] = field(default_factory=dict)
    min_null_alignment: float = 1.0
    components: int = 0
    link: float = 0.0
    failures: List[str] = field(default_factory=list)

    @property
    def index(self) -> Optional[int]:
        if len(self.classifications) != 1:
            return None
        return int(next(iter(self.classifications)).split(",")[0])

    @property
    def nullity(self) -> Optional[int]:
        if len(self.classifications) != 1:
            return None
        return int(next(iter(self.classifications)).split(",")[1])

    @property
    def passed(self) -> bool:
        expected_components = 2 if self.family is CriticalFamily.S2P else 1
        return (
            not self.failures
            and self.max_constraint_residual < 1e-12
            and self.max_fixed_residual < config.tolerances.TOL_FIXED
            and self.max_grad_norm < 1e-8
            and self.max_f_error < 1e-12
            and self.index == self.family.expected_index
            and self.nullity == 1
            and self.min_null_alignment > 0.999
            and self.components == expected_components
        )


def family_report(case: PunctureCase, family: CriticalFamily, samples: Optional[int] = None) -> FamilyReport:
    """Residuals, gradient, Hessian signature and null direction along every circle."""
    samples = config.run.FAMILY_SAMPLES if samples is None else samples
    if samples < MIN_CIRCLE_SAMPLES:
        raise ValueError(f"family reports need at least {MIN_CIRCLE_SAMPLES} samples per circle, got {samples}")
    report = FamilyReport(family=family, samples=samples)
    classes: Counter = Counter()
    chains = []
    for branch in family.branches:
        chains.append([])
        for angle in family_angles(samples):
            q = critical_point(case, family, angle, branch)
            chains[-1].append(q)
            report.max_constraint_residual = max(
                report.max_constraint_residual, float(np.linalg.norm(repvar.constraint_residual(q)))
            )
            report.max_f_error = max(report.max_f_error, abs(f(q) - family.f_value))
            cert = realstruct.is_class_fixed(InvolutionKind.SIGMA, case, q)
            if not isinstance(cert, FixedPointCertificate):
                report.failures.append(f"not fixed at angle {angle:.4f}, branch {branch}")
                continue
            report.max_fixed_residual = max(report.max_fixed_residual, cert.residual)
            try:
                frame = realstruct.tangent_frame_Mprime(case, cert)
                report.max_grad_norm = max(
                    report.max_grad_norm, float(np.linalg.norm(grad_fprime(case, cert, frame)))
                )
                eigenvalues, eigenvectors = np.linalg.eigh(hessian_fprime(case, cert, frame))
            except ModuliError as exc:
                report.failures.append(f"angle {angle:.4f}, branch {branch}: {exc}")
                continue
            index, nullity, _ = split_spectrum(eigenvalues)
            classes[f"{index},{nullity}"] += 1
            tangent = frame.coordinates(family_tangent(case, family, angle, branch))
            null_vector = eigenvectors[:, int(np.argmin(np.abs(eigenvalues)))]
            alignment = abs(float(null_vector @ tangent)) / float(np.linalg.norm(tangent))
            report.min_null_alignment = min(report.min_null_alignment, alignment)
    report.classifications = dict(classes)
    report.link = chain_link(chains)
    report.components = count_components([q for chain in chains for q in chain], report.link)
    logger.info(f"{family.value} ({case.value}): classes {report.classifications}, components {report.components}")
    return report


@dataclass
class CircleOrientation:
    """Orientation data of T M' along one sampled critical circle."""
    label: str
    holonomy: int
    # r carries x(t) to x(t + pi); signs below are for that half turn
    transported_det: float = 1.0
    circle_sign: int = 1

    @property
    def normal_sign(self) -> int:
        """Orientation sign of dr on the normal bundle of the circle."""
        return int(np.sign(self.transported_det)) * self.circle_sign


@dataclass
class RActionEvidence:
    """Numeric evidence about how r acts on M' near the critical set."""
    case: PunctureCase
    samples: int
    rotation_distance: Dict[str, float] = field(default_factory=dict)
    s2_fixed_residual: float = 0.0
    s2_normal_deviation: float = 0.0
    s2_negative_flip: float = 0.0
    s2_det_range: Tuple[float, float] = (1.0, 1.0)
    s2_components: int = 0
    s2_branch_signs: Tuple[int, ...] = ()
    s2_negative_holonomy: Dict[str, int] = field(default_factory=dict)
    orientations: Dict[str, CircleOrientation] = field(default_factory=dict)
    failures: List[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "case": self.case.value,
            "samples": self.samples,
            "rotation_distance": dict(self.rotation_distance),
            "s2_fixed_residual": self.s2_fixed_residual,
            "s2_normal_deviation": self.s2_normal_deviation,
            "s2_negative_flip": self.s2_negative_flip,
            "s2_det_range": list(self.s2_det_range),
            "s2_components": self.s2_components,
            "s2_branch_signs": list(self.s2_branch_signs),
            "s2_negative_holonomy": dict(self.s2_negative_holonomy),
            "orientations": {
                label: {
                    "holonomy": o.holonomy,
                    "transported_det": o.transported_det,
                    "circle_sign": o.circle_sign,
                    "normal_sign": o.normal_sign,
                }
                for label, o in self.orientations.items()
            },
            "failures": list(self.failures),
        }


def _sigma_frames(case: PunctureCase, quads: List[Quad]):
    certs, frames = [], []
    for q in quads:
        cert = realstruct.is_class_fixed(InvolutionKind.SIGMA, case, q)
        if not isinstance(cert, FixedPointCertificate):
            raise NotCritical(float("inf"), config.tolerances.TOL_FIXED)
        certs.append(cert)
        frames.append(realstruct.tangent_frame_Mprime(case, cert))
    return certs, frames


def _rotated_circle(case: PunctureCase, family: CriticalFamily, samples: int, evidence: RActionEvidence) -> None:
    angles = family_angles(samples)
    quads = [critical_point(case, family, t) for t in angles]
    half = samples // 2
    evidence.rotation_distance[family.value] = max(
        repvar.class_distance(realstruct.residual_r(q), quads[(k + half) % samples]) for k, q in enumerate(quads)
    )
    _, frames = _sigma_frames(case, quads)
    vectors = [frame.vectors for frame in frames]
    holonomy, signs = _holonomy(vectors, _frame_overlap)
    # dr is the identity in left-translated coordinates along these circles
    transported = _frame_overlap(vectors[0], vectors[half]) * signs[half]
    start, end = family_tangent(case, family, 0.0), family_tangent(case, family, angles[half])
    circle_sign = int(np.sign(frames[half].coordinates(start) @ frames[half].coordinates(end)))
    evidence.orientations[family.value] = CircleOrientation(family.value, holonomy, transported, circle_sign)


def normal_plane(tangent: np.ndarray) -> np.ndarray:
    """Orthonormal basis (as columns) of the complement of the circle tangent in T M' frame coordinates."""
    # right singular vectors past the first span the orthogonal complement of the tangent row
    return np.linalg.svd(np.asarray(tangent, dtype=float)[None, :])[2][1:].T


def _fixed_circle(case: PunctureCase, branch: int, samples: int, evidence: RActionEvidence) -> List[Quad]:
    label = f"{CriticalFamily.S2P.value}{'+' if branch > 0 else '-'}"
    angles = family_angles(samples)
    quads = [critical_point(case, CriticalFamily.S2P, t, branch) for t in angles]
    certs, frames = _sigma_frames(case, quads)
    negatives = []
    dets = list(evidence.s2_det_range)
    for angle, cert, frame in zip(angles, certs, frames):
        r_cert = realstruct.is_class_fixed(InvolutionKind.R, case, cert.quad)
        if not isinstance(r_cert, FixedPointCertificate):
            evidence.failures.append(f"r moves {label} at angle {angle:.4f}")
            continue
        evidence.s2_fixed_residual = max(evidence.s2_fixed_residual, r_cert.residual)
        dr = realstruct.involution_matrix(InvolutionKind.R, case, r_cert, frame)
        tangent = frame.coordinates(family_tangent(case, CriticalFamily.S2P, angle, branch))
        normal = normal_plane(tangent)
        evidence.s2_normal_deviation = max(
            evidence.s2_normal_deviation, float(np.linalg.norm(normal.T @ dr @ normal + np.eye(2)))
        )
        eigenvalues, eigenvectors = np.linalg.eigh(hessian_fprime(case, cert, frame))
        negative = eigenvectors[:, int(np.argmin(eigenvalues))]
        evidence.s2_negative_flip = max(evidence.s2_negative_flip, float(np.linalg.norm(dr @ negative + negative)))
        determinant = float(np.linalg.det(dr))
        dets = [min(dets[0], determinant), max(dets[1], determinant)]
        negatives.append(frame.vectors.T @ negative)
    evidence.s2_det_range = (dets[0], dets[1])
    if len(negatives) == samples:
        evidence.s2_negative_holonomy[label] = _holonomy(negatives, lambda a, b: float(a @ b))[0]
    holonomy, _ = _holonomy([frame.vectors for frame in frames], _frame_overlap)
    evidence.orientations[label] = CircleOrientation(label, holonomy)
    return quads


def collect_r_evidence(case: PunctureCase, samples: Optional[int] = None) -> RActionEvidence:
    """
    How r acts near the critical set: half turns of S1'/S3', pointwise
    fixedness of S2' with dr = -1 on its normal plane, and orientation
    holonomies of T M' and of the S2' negative line bundle around each circle.
    """
    samples = config.run.FAMILY_SAMPLES if samples is None else samples
    if samples < MIN_CIRCLE_SAMPLES or samples % 2:
        raise ValueError(f"r evidence needs an even sample count >= {MIN_CIRCLE_SAMPLES}, got {samples}")
    evidence = RActionEvidence(case=case, samples=samples, s2_det_range=(np.inf, -np.inf))
    try:
        for family in (CriticalFamily.S1P, CriticalFamily.S3P):
            _rotated_circle(case, family, samples, evidence)
        chains = [_fixed_circle(case, branch, samples, evidence) for branch in CriticalFamily.S2P.branches]
    except ModuliError as exc:
        evidence.failures.append(str(exc))
        logger.error(f"r evidence collection failed: {exc}")
        return evidence
    quads = [q for chain in chains for q in chain]
    evidence.s2_components = count_components(quads, chain_link(chains))
    evidence.s2_branch_signs = tuple(sorted({int(np.sign(branch_invariant(case, q))) for q in quads}))
    logger.info(
        f"r evidence ({case.value}): normal deviation {evidence.s2_normal_deviation:.2e}, "
        f"S2' components {evidence.s2_components}"
    )
    return evidence


def critical_submanifolds(
    reports: Dict[CriticalFamily, FamilyReport],
    evidence: RActionEvidence,
) -> List[CriticalSubmanifold]:
    """Summaries of S1', S2', S3' sorted by index."""
    pieces = []
    for family, report in reports.items():
        if family is CriticalFamily.S2P:
            r_action = "trivial" if evidence.s2_fixed_residual < config.tolerances.TOL_FIXED else "unknown"
            r_negative = "reverses" if evidence.s2_negative_flip < 1e-4 else "preserves"
        else:
            moved = evidence.rotation_distance.get(family.value, np.inf) < 1e-7
            r_action = "rotation_by_pi" if moved else "unknown"
            if report.index == 0:
                r_negative = "not_applicable"
            else:
                orientation = evidence.orientations.get(family.value)
                r_negative = "preserves" if orientation and orientation.normal_sign > 0 else "reverses"
        pieces.append(CriticalSubmanifold(
            name=family.value,
            f_value=family.f_value,
            index=report.index if report.index is not None else -1,
            nullity=report.nullity if report.nullity is not None else -1,
            components=report.components,
            dim=1,
            r_action=r_action,
            r_on_negative_bundle=r_negative,
        ))
    return sorted(pieces, key=lambda piece: piece.index)
