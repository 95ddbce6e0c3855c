"""
Bookkeeping for the Morse-Bott spectral sequence of f' on M'.

Critical pieces are unions of circles, so the E1 page is a 3x2 grid of ranks.
The differentials that could be nonzero are listed in Differential; each one
is closed by a DifferentialCertificate whose premises carry the numeric
evidence they were checked against. Betti numbers are only read off a page
whose differentials are all certified to vanish.
"""

import enum
import logging
from dataclasses import dataclass, field
from math import comb
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

import morse
import quat
import realstruct
import repvar
import tasks
from config import config
from errors import IncompleteCertification, PremiseFailure, UnsupportedCase, UnsupportedTopology
from morse import CriticalFamily, CriticalSubmanifold, RActionEvidence
from realstruct import FixedPointCertificate, HandleSwapReport, InvolutionKind, PunctureCase

logger = logging.getLogger(__name__)

TOP_DEGREE = 3
TRANSVERSALITY_MIN = 0.1


class Differential(enum.Enum):
    D1_00_TO_10 = "d1_00_to_10"
    D1_10_TO_20 = "d1_10_to_20"
    D1_01_TO_11 = "d1_01_to_11"
    D1_11_TO_21 = "d1_11_to_21"
    D2_01_TO_20 = "d2_01_to_20"


@dataclass(frozen=True)
class E1Page:
    """ranks[p][q] = rank H^q of the critical piece of index p."""
    ranks: Tuple[Tuple[int, int], ...]
    notes: Tuple[str, ...] = ()

    @property
    def thresholds(self) -> Tuple[float, ...]:
        return tuple(j - 1.5 for j in range(len(self.ranks) + 1))

    @property
    def total_rank(self) -> int:
        return sum(sum(row) for row in self.ranks)

    def rank(self, p: int, q: int) -> int:
        if 0 <= p < len(self.ranks) and 0 <= q < len(self.ranks[p]):
            return self.ranks[p][q]
        return 0

    def to_dict(self) -> dict:
        return {
            "ranks": [list(row) for row in self.ranks],
            "thresholds": list(self.thresholds),
            "total_rank": self.total_rank,
            "notes": list(self.notes),
        }


@dataclass(frozen=True)
class Premise:
    name: str
    verified: bool
    evidence: Dict[str, object] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"name": self.name, "verified": self.verified, "evidence": dict(self.evidence)}


@dataclass(frozen=True)
class DifferentialCertificate:
    target: Differential
    premises: Tuple[Premise, ...]
    argument: str = ""

    @property
    def vanishes(self) -> bool:
        return bool(self.premises) and all(p.verified for p in self.premises)

    def first_failure(self) -> Optional[Premise]:
        return next((p for p in self.premises if not p.verified), None)

    def to_dict(self) -> dict:
        return {
            "target": self.target.value,
            "argument": self.argument,
            "premises": [p.to_dict() for p in self.premises],
            "vanishes": self.vanishes,
        }


@dataclass(frozen=True)
class BettiVector:
    b0: int
    b1: int
    b2: int
    b3: int

    def as_tuple(self) -> Tuple[int, int, int, int]:
        return (self.b0, self.b1, self.b2, self.b3)

    @property
    def euler_characteristic(self) -> int:
        return self.b0 - self.b1 + self.b2 - self.b3

    def __str__(self) -> str:
        return " ".join(str(b) for b in self.as_tuple())


@dataclass
class RPrimeReport:
    """Sweep of the embedded sphere (1, B1, i, j) and its meeting with S1'."""
    case: PunctureCase
    grid_n: int
    max_constraint_residual: float = 0.0
    max_fixed_residual: float = 0.0
    unfixed_points: int = 0
    intersections: List[List[float]] = field(default_factory=list)
    transversality: float = 0.0

    @property
    def intersection_count(self) -> int:
        return len(self.intersections)

    @property
    def valid(self) -> bool:
        return (
            self.max_constraint_residual < 1e-12
            and self.max_fixed_residual < config.tolerances.TOL_FIXED
            and self.unfixed_points == 0
            and self.intersection_count == 1
            and self.transversality > TRANSVERSALITY_MIN
        )

    def to_dict(self) -> dict:
        return {
            "case": self.case.value,
            "grid_n": self.grid_n,
            "max_constraint_residual": self.max_constraint_residual,
            "max_fixed_residual": self.max_fixed_residual,
            "unfixed_points": self.unfixed_points,
            "intersection_count": self.intersection_count,
            "intersections": [list(p) for p in self.intersections],
            "transversality": self.transversality,
            "valid": self.valid,
        }


def build_e1(crits: Sequence[CriticalSubmanifold]) -> E1Page:
    """E1 ranks from critical pieces that are disjoint unions of circles."""
    ranks = [[0, 0] for _ in range(TOP_DEGREE)]
    notes = []
    for piece in sorted(crits, key=lambda c: c.index):
        if piece.dim != 1 or piece.nullity != piece.dim:
            raise UnsupportedTopology(f"{piece.name} is not a nondegenerate union of circles (dim {piece.dim})")
        if not 0 <= piece.index < TOP_DEGREE:
            raise UnsupportedTopology(f"{piece.name} has index {piece.index} outside 0..{TOP_DEGREE - 1}")
        if piece.components < 1:
            raise UnsupportedTopology(f"{piece.name} has no components")
        ranks[piece.index][0] += piece.components
        ranks[piece.index][1] += piece.components
        if piece.name == CriticalFamily.S2P.value and piece.components != 2:
            notes.append(f"S2p has {piece.components} components, expected 2")
    page = E1Page(ranks=tuple(tuple(row) for row in ranks), notes=tuple(notes))
    logger.info(f"E1 page {page.ranks}, total rank {page.total_rank}")
    return page


@dataclass(frozen=True)
class RSigns:
    """How r* acts on each ingredient of the d1 maps, as +-1 (0 if undetermined)."""
    on_h0: Dict[str, int]
    on_h1: Dict[str, int]
    thom: Dict[str, int]


def r_signs(crits: Sequence[CriticalSubmanifold], evidence: RActionEvidence) -> RSigns:
    """
    r* on H^0 and H^1 of each circle family and on the orientation of its
    negative bundle (the Thom class). A half turn of a circle maps each
    component to itself and preserves its orientation when the tangent is
    carried forward; a pointwise fixed circle is acted on trivially.
    """
    by_name = {piece.name: piece for piece in crits}
    on_h0, on_h1, thom = {}, {}, {}
    for name, piece in by_name.items():
        if piece.r_action == "trivial":
            on_h0[name] = on_h1[name] = 1
        elif piece.r_action == "rotation_by_pi" and piece.components == 1:
            on_h0[name] = 1
            orientation = evidence.orientations.get(name)
            on_h1[name] = orientation.circle_sign if orientation else 0
        else:
            on_h0[name] = on_h1[name] = 0
        thom[name] = {"not_applicable": 1, "preserves": 1, "reverses": -1}.get(piece.r_on_negative_bundle, 0)
    return RSigns(on_h0, on_h1, thom)


def _premise(name: str, verified, **evidence) -> Premise:
    return Premise(name, bool(verified), {k: _plain(v) for k, v in evidence.items()})


def _plain(value):
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    if isinstance(value, tuple):
        return list(value)
    return value


def _anticommutation(name: str, factors: Dict[str, int]) -> Premise:
    product = int(np.prod(list(factors.values())))
    return _premise(name, product == -1, sign_product=product, **factors)


def _raise_first_failure(certs: Iterable[DifferentialCertificate]) -> None:
    for cert in certs:
        failure = cert.first_failure()
        if failure is not None:
            logger.error(f"{cert.target.value}: premise {failure.name} failed ({failure.evidence})")
            raise PremiseFailure(f"{cert.target.value}: {failure.name}", cert)


def certify_d1(
    page: E1Page,
    crits: Sequence[CriticalSubmanifold],
    evidence: RActionEvidence,
) -> List[DifferentialCertificate]:
    """
    Certificates for the four d1 maps.

    d1: E^{1,0} -> E^{2,0} and d1: E^{0,1} -> E^{1,1} commute with r* while the
    composed signs (r* on source, Thom twists, r* on target) multiply to -1, so
    d = -d and d vanishes into the free target. The other two vanish because
    M' is connected and orientable: H^0 and H^3 are both Z.
    """
    signs = r_signs(crits, evidence)
    by_name = {piece.name: piece for piece in crits}
    s1, s2, s3 = (by_name.get(f.value) for f in CriticalFamily)
    tol = config.tolerances
    holonomies = {label: o.holonomy for label, o in evidence.orientations.items()}
    s2_negative_orientable = _premise(
        "s2_negative_bundle_orientable",
        evidence.s2_negative_holonomy and all(h == 1 for h in evidence.s2_negative_holonomy.values()),
        holonomy=dict(evidence.s2_negative_holonomy),
    )
    s2_reversed = _premise(
        "r_reverses_s2_negative_line",
        evidence.s2_negative_flip < 1e-4 and evidence.s2_normal_deviation < 1e-4,
        negative_flip=evidence.s2_negative_flip,
        normal_deviation=evidence.s2_normal_deviation,
    )
    orientable = _premise(
        "m_prime_orientable",
        holonomies and all(h == 1 for h in holonomies.values()) and evidence.s2_det_range[0] > 0,
        holonomy=holonomies,
        det_dr_range=evidence.s2_det_range,
    )

    certs = [
        DifferentialCertificate(
            Differential.D1_00_TO_10,
            (
                _premise("minimum_index_zero", s1 is not None and s1.index == 0, index=s1.index if s1 else None),
                _premise("minimum_connected", s1 is not None and s1.components == 1,
                         components=s1.components if s1 else None),
                _premise("single_h0_class", page.rank(0, 0) == 1, rank=page.rank(0, 0)),
            ),
            "H^0(M') is nonzero, so the class of the connected minimum survives",
        ),
        DifferentialCertificate(
            Differential.D1_10_TO_20,
            (
                s2_reversed,
                s2_negative_orientable,
                _premise("r_preserves_s3_normal_orientation", signs.thom.get("S3p") == 1,
                         thom_sign=signs.thom.get("S3p")),
                _premise("r_trivial_on_h0", signs.on_h0.get("S2p") == 1 and signs.on_h0.get("S3p") == 1,
                         s2=signs.on_h0.get("S2p"), s3=signs.on_h0.get("S3p")),
                _anticommutation("anticommutes_with_r", {
                    "r_on_h0_s2": signs.on_h0.get("S2p", 0),
                    "thom_s2": signs.thom.get("S2p", 0),
                    "thom_s3": signs.thom.get("S3p", 0),
                    "r_on_h0_s3": signs.on_h0.get("S3p", 0),
                }),
            ),
            "d1 anticommutes with r* while r* is the identity on source and target",
        ),
        DifferentialCertificate(
            Differential.D1_01_TO_11,
            (
                _premise("r_half_turn_on_s1", evidence.rotation_distance.get("S1p", np.inf) < 1e-7,
                         distance=evidence.rotation_distance.get("S1p")),
                _premise("r_fixes_s2", evidence.s2_fixed_residual < tol.TOL_FIXED,
                         residual=evidence.s2_fixed_residual),
                s2_reversed,
                s2_negative_orientable,
                _anticommutation("anticommutes_with_r", {
                    "r_on_h1_s1": signs.on_h1.get("S1p", 0),
                    "thom_s1": signs.thom.get("S1p", 0),
                    "thom_s2": signs.thom.get("S2p", 0),
                    "r_on_h1_s2": signs.on_h1.get("S2p", 0),
                }),
            ),
            "d1 anticommutes with r* while r* is the identity on source and target",
        ),
        DifferentialCertificate(
            Differential.D1_11_TO_21,
            (
                orientable,
                _premise("maximum_connected", s3 is not None and s3.components == 1,
                         components=s3.components if s3 else None),
                _premise("single_top_class", page.rank(2, 1) == 1, rank=page.rank(2, 1)),
            ),
            "M' is a closed orientable 3-manifold, so H^3 = Z survives",
        ),
    ]
    if s2 is None:
        raise PremiseFailure("S2p missing from the critical data")
    _raise_first_failure(certs)
    return certs


def rprime_point(case: PunctureCase, b1: quat.UnitQuaternion) -> repvar.Quad:
    return repvar.make_quad(quat.ONE, b1, quat.I, quat.J)


def rprime_axes(case: PunctureCase) -> Tuple[np.ndarray, np.ndarray]:
    """Imaginary axes B1 may use on the sphere."""
    if case is PunctureCase.LEFT:
        return quat.J, quat.K
    if case is PunctureCase.MIDDLE:
        return quat.I, quat.J
    raise UnsupportedCase(f"no embedded sphere is constructed for the {case.value} puncture")


def _sweep_row(case: PunctureCase, theta: float, grid_n: int) -> dict:
    e1, e2 = rprime_axes(case)
    row = {"residual": 0.0, "fixed": 0.0, "unfixed": 0, "hits": []}
    for psi in 2 * np.pi * np.arange(grid_n) / grid_n:
        b1 = np.cos(theta) * quat.ONE + np.sin(theta) * (np.cos(psi) * e1 + np.sin(psi) * e2)
        q = rprime_point(case, b1)
        row["residual"] = max(row["residual"], float(np.linalg.norm(repvar.constraint_residual(q))))
        cert = realstruct.is_class_fixed(InvolutionKind.SIGMA, case, q)
        if isinstance(cert, FixedPointCertificate):
            row["fixed"] = max(row["fixed"], cert.residual)
        else:
            row["unfixed"] += 1
        _, distance, _ = morse.nearest_family_point(case, CriticalFamily.S1P, q)
        if distance < 1e-6:
            row["hits"].append(q)
    return row


def _transversality(case: PunctureCase, point: repvar.Quad) -> float:
    cert = realstruct.is_class_fixed(InvolutionKind.SIGMA, case, point)
    if not isinstance(cert, FixedPointCertificate):
        return 0.0
    frame = realstruct.tangent_frame_Mprime(case, cert)
    h = 1e-6
    directions = []
    for axis in rprime_axes(case):
        moved = rprime_point(case, quat.mul(point[repvar.B1], quat.exp_su2(h * quat.imag(axis))))
        directions.append(repvar.tangent_between(point, moved) / h)
    directions.append(morse.family_tangent(case, CriticalFamily.S1P, morse.rotation_angle(case, point[repvar.A1])))
    matrix = np.stack([frame.coordinates(d) for d in directions], axis=1)
    return float(np.linalg.svd(matrix, compute_uv=False)[-1])


def verify_rprime(case: PunctureCase, grid_n: Optional[int] = None, workers: int = 1) -> RPrimeReport:
    """
    Sweep B1 = cos t + sin t (cos s e1 + sin s e2) over a (t, s) grid with t
    running pole to pole, check every (1, B1, i, j) lies on the variety and is
    sigma*-fixed, collect the distinct classes on S1', and measure how the
    sphere and S1' meet there.
    """
    grid_n = config.run.GRID_N if grid_n is None else grid_n
    if grid_n < 16:
        raise ValueError(f"grid_n must be at least 16, got {grid_n}")
    rprime_axes(case)
    thetas = np.pi * np.arange(grid_n) / (grid_n - 1)
    rows = tasks.run_tasks(lambda i, _rng: _sweep_row(case, thetas[i], grid_n), grid_n, 0, workers)
    report = RPrimeReport(case=case, grid_n=grid_n)
    distinct: List[repvar.Quad] = []
    for row in rows:
        report.max_constraint_residual = max(report.max_constraint_residual, row["residual"])
        report.max_fixed_residual = max(report.max_fixed_residual, row["fixed"])
        report.unfixed_points += row["unfixed"]
        for hit in row["hits"]:
            if all(repvar.class_distance(hit, seen) > 1e-6 for seen in distinct):
                distinct.append(hit)
    report.intersections = [q.tolist() for q in distinct]
    if len(distinct) == 1:
        report.transversality = _transversality(case, distinct[0])
    logger.info(
        f"sphere sweep ({case.value}, {grid_n}x{grid_n}): {report.intersection_count} intersection(s), "
        f"transversality {report.transversality:.3f}"
    )
    return report


def certify_d2(
    page: E1Page,
    rprime: RPrimeReport,
    transfer: Optional[HandleSwapReport] = None,
    reference_page: Optional[E1Page] = None,
) -> DifferentialCertificate:
    """
    d2: E^{0,1} -> E^{2,0} vanishes when an embedded sphere of M' meets S1'
    transversally in exactly one point: its dual class restricts to a generator
    of H^1(S1'), so H^1(M') -> H^1(S1') is onto.

    With a handle-swap transfer the sphere report belongs to the left puncture;
    the swap identifies the two real moduli spaces, the left sequence
    collapses, and equal total ranks force every differential of this page to
    vanish.
    """
    premises = [
        _premise("sphere_on_variety", rprime.max_constraint_residual < 1e-12,
                 residual=rprime.max_constraint_residual),
        _premise("sphere_fixed", rprime.unfixed_points == 0 and rprime.max_fixed_residual < config.tolerances.TOL_FIXED,
                 residual=rprime.max_fixed_residual, unfixed=rprime.unfixed_points),
        _premise("single_intersection", rprime.intersection_count == 1, count=rprime.intersection_count),
        _premise("transverse", rprime.transversality > TRANSVERSALITY_MIN, min_singular_value=rprime.transversality),
    ]
    argument = "the sphere's dual class restricts to a generator of H^1(S1p)"
    if transfer is not None:
        reference_total = reference_page.total_rank if reference_page is not None else None
        premises += [
            _premise("handle_swap_intertwines", transfer.valid,
                     error=transfer.max_intertwining_error, residual=transfer.max_variety_residual),
            _premise("equal_total_rank", reference_total == page.total_rank,
                     page=page.total_rank, reference=reference_total),
        ]
        argument = f"transferred from the {rprime.case.value} puncture through the handle swap"
    cert = DifferentialCertificate(Differential.D2_01_TO_20, tuple(premises), argument)
    _raise_first_failure([cert])
    return cert


def betti(page: E1Page, certs: Iterable[DifferentialCertificate]) -> BettiVector:
    """Anti-diagonal sums of a page whose differentials all vanish."""
    closed = {cert.target for cert in certs if cert.vanishes}
    missing = [d.value for d in Differential if d not in closed]
    if missing:
        raise IncompleteCertification(missing)
    numbers = [sum(page.rank(p, n - p) for p in range(n + 1)) for n in range(TOP_DEGREE + 1)]
    return BettiVector(*numbers)


def compare_torus(b: BettiVector) -> bool:
    """True iff b matches the 3-torus: binomial(3, n)."""
    return b.as_tuple() == tuple(comb(TOP_DEGREE, n) for n in range(TOP_DEGREE + 1))
