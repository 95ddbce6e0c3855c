"""
Command-line front end of the real-moduli laboratory.

    real-moduli verify-all [--puncture left] [--seed 42] [--format json]
    real-moduli census --samples 500
    real-moduli betti [--skip-rprime]
    real-moduli check pi1-consistency

Exit codes: 0 every check passed, 1 a check failed, 2 bad usage or
configuration.
"""

import argparse
import logging
import sys
import time
from dataclasses import dataclass, field
from functools import cached_property
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

import morse
import quat
import realstruct
import repvar
import spectral
import tasks
from config import ARTIFACT_VERSION, SCHEMA_VERSION, config
from errors import ConfigError, ModuliError, UnknownCheck
from morse import CriticalFamily
from realstruct import PunctureCase
from report import JsonEncoder, TextFormatter

logger = logging.getLogger(__name__)

EXIT_PASS = 0
EXIT_FAIL = 1
EXIT_USAGE = 2

Evidence = Dict[str, Any]


@dataclass
class RunConfig:
    """Validated settings of one run."""
    puncture: PunctureCase = PunctureCase.LEFT
    seed: int = 42
    samples: int = 500
    tol_constraint: float = 1e-10
    tol_fixed: float = 1e-8
    tol_grad: float = 1e-7
    tol_eig: float = 1e-5
    grid_n: int = 64
    output_path: Optional[str] = None
    format: str = "text"
    workers: int = 1
    skip_rprime: bool = False

    def validate(self) -> "RunConfig":
        for name in ("tol_constraint", "tol_fixed", "tol_grad", "tol_eig"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive, got {getattr(self, name)}")
        if self.samples < 1:
            raise ConfigError(f"samples must be at least 1, got {self.samples}")
        if self.grid_n < 16:
            raise ConfigError(f"grid_n must be at least 16, got {self.grid_n}")
        if self.workers < 1:
            raise ConfigError(f"workers must be at least 1, got {self.workers}")
        if self.format not in ("text", "json"):
            raise ConfigError(f"unknown format {self.format!r}")
        if not 0 <= self.seed < 2 ** 64:
            raise ConfigError(f"seed must fit in 64 bits, got {self.seed}")
        return self

    def apply(self) -> None:
        """Push the tolerances into the shared configuration."""
        config.tolerances.TOL_CONSTRAINT = self.tol_constraint
        config.tolerances.TOL_FIXED = self.tol_fixed
        config.tolerances.TOL_GRAD = self.tol_grad
        config.tolerances.TOL_EIG = self.tol_eig

    def echo(self) -> Dict[str, Any]:
        return {
            "puncture": self.puncture.value,
            "seed": self.seed,
            "samples": self.samples,
            "tol_constraint": self.tol_constraint,
            "tol_fixed": self.tol_fixed,
            "tol_grad": self.tol_grad,
            "tol_eig": self.tol_eig,
            "grid_n": self.grid_n,
            "workers": self.workers,
        }


@dataclass
class CheckRecord:
    name: str
    passed: bool
    evidence: Evidence = field(default_factory=dict)
    wall_time_s: float = 0.0

    def to_dict(self) -> dict:
        return {"name": self.name, "passed": self.passed, "evidence": self.evidence, "wall_time_s": self.wall_time_s}


@dataclass
class VerificationReport:
    config: Dict[str, Any]
    checks: List[CheckRecord] = field(default_factory=list)
    betti: Optional[Tuple[int, int, int, int]] = None
    artifact_version: str = ARTIFACT_VERSION

    @property
    def verdict(self) -> bool:
        return bool(self.checks) and all(check.passed for check in self.checks)

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "artifact_version": self.artifact_version,
            "config": self.config,
            "checks": [check.to_dict() for check in self.checks],
            "betti": list(self.betti) if self.betti is not None else None,
            "verdict": self.verdict,
        }


class VerificationSession:
    """
    Runs checks for one configuration, computing shared intermediate results
    (family reports, r evidence, E1 page, certificates) once on demand.
    """

    def __init__(self, cfg: RunConfig):
        self.cfg = cfg
        self.case = cfg.puncture

    def rng_for(self, name: str) -> np.random.Generator:
        """Per-check generator so a check gives the same numbers alone or in a suite."""
        return tasks.task_rng(self.cfg.seed, CHECK_NAMES.index(name))

    @cached_property
    def family_reports(self) -> Dict[CriticalFamily, morse.FamilyReport]:
        return {family: morse.family_report(self.case, family) for family in CriticalFamily}

    @cached_property
    def r_evidence(self) -> morse.RActionEvidence:
        return morse.collect_r_evidence(self.case)

    @cached_property
    def critical_pieces(self) -> List[morse.CriticalSubmanifold]:
        return morse.critical_submanifolds(self.family_reports, self.r_evidence)

    @cached_property
    def page(self) -> spectral.E1Page:
        return spectral.build_e1(self.critical_pieces)

    @cached_property
    def d1_certificates(self) -> List[spectral.DifferentialCertificate]:
        return spectral.certify_d1(self.page, self.critical_pieces, self.r_evidence)

    @cached_property
    def handle_swap(self) -> Optional[realstruct.HandleSwapReport]:
        if self.case is not PunctureCase.RIGHT:
            return None
        return realstruct.verify_handle_swap(self.rng_for("rprime"))

    @cached_property
    def rprime(self) -> spectral.RPrimeReport:
        case = PunctureCase.LEFT if self.case is PunctureCase.RIGHT else self.case
        return spectral.verify_rprime(case, self.cfg.grid_n, self.cfg.workers)

    @cached_property
    def reference_page(self) -> Optional[spectral.E1Page]:
        if self.case is not PunctureCase.RIGHT:
            return None
        left = VerificationSession(RunConfig(**{**vars(self.cfg), "puncture": PunctureCase.LEFT}))
        left_certs = left.d1_certificates + [left.d2_certificate]
        spectral.betti(left.page, left_certs)
        return left.page

    @cached_property
    def d2_certificate(self) -> spectral.DifferentialCertificate:
        return spectral.certify_d2(self.page, self.rprime, self.handle_swap, self.reference_page)

    def certificates(self) -> List[spectral.DifferentialCertificate]:
        certs = list(self.d1_certificates)
        if not self.cfg.skip_rprime:
            certs.append(self.d2_certificate)
        return certs

    # checks ---------------------------------------------------------------

    def check_algebra(self) -> Tuple[bool, Evidence]:
        n = config.run.ALGEBRA_SAMPLES
        rng = self.rng_for("algebra")
        a, b, c = (quat.haar_sample(rng, (n,)) for _ in range(3))
        errors = {
            "associativity": np.abs(quat.raw_mul(quat.raw_mul(a, b), c) - quat.raw_mul(a, quat.raw_mul(b, c))).max(),
            "inverse": np.abs(quat.raw_mul(a, quat.inverse(a)) - quat.ONE).max(),
            "commutator_inverse": np.abs(quat.inverse(quat.commutator(a, b)) - quat.commutator(b, a)).max(),
            "conj_trace": np.abs(quat.trace(quat.conj_by(c, a)) - quat.trace(a)).max(),
            "log_exp": np.abs(quat.exp_su2(quat.log_su2(c)) - c).max(),
        }
        v = rng.standard_normal((n, 3))
        v *= (rng.uniform(0.0, np.pi - 0.1, n) / np.linalg.norm(v, axis=-1))[:, None]
        errors["exp_log"] = np.abs(quat.log_su2(quat.exp_su2(v)) - v).max()
        worst = 0.0
        for g, x, y in zip(quat.haar_sample(rng, (n,)), a, b):
            found, _ = quat.solve_conjugator([x, y], [quat.conj_by(g, x), quat.conj_by(g, y)])
            worst = max(worst, min(np.abs(found - g).max(), np.abs(found + g).max()))
        errors["conjugator_recovery"] = worst
        quads = quat.haar_sample(rng, (n, 4))
        for case in PunctureCase:
            twice = realstruct.sigma_star(case, realstruct.sigma_star(case, quads))
            errors[f"sigma_involution_{case.value}"] = np.abs(twice - quads).max()
            errors[f"f_sigma_invariance_{case.value}"] = np.abs(
                realstruct.sigma_star(case, quads)[:, repvar.B1, 0] - quads[:, repvar.B1, 0]).max()
        errors["r_involution"] = np.abs(realstruct.residual_r(realstruct.residual_r(quads)) - quads).max()
        errors["f_r_invariance"] = np.abs(realstruct.residual_r(quads)[:, repvar.B1, 0] - quads[:, repvar.B1, 0]).max()
        limits = {"exp_log": 1e-10, "log_exp": 1e-11, "conjugator_recovery": 1e-8}
        passed = all(err < limits.get(name, 1e-12) for name, err in errors.items())
        return passed, {"samples": n, **{name: float(err) for name, err in errors.items()}}

    def check_dimensions(self) -> Tuple[bool, Evidence]:
        n = config.run.DIMENSION_SAMPLES
        rng = self.rng_for("dimensions")
        failures_m = failures_mprime = 0
        for _ in range(n):
            try:
                repvar.tangent_frame_M(repvar.random_point(rng))
            except ModuliError as exc:
                logger.warning(f"tangent_frame_M failed: {exc}")
                failures_m += 1
            try:
                cert = realstruct.random_fixed_point(self.case, rng)
                realstruct.tangent_frame_Mprime(self.case, cert)
            except ModuliError as exc:
                logger.warning(f"tangent_frame_Mprime failed: {exc}")
                failures_mprime += 1
        evidence = {"samples": n, "dim_M": repvar.M_DIMENSION, "dim_M_prime": realstruct.MPRIME_DIMENSION,
                    "rank_failures_M": failures_m, "rank_failures_M_prime": failures_mprime}
        return failures_m == 0 and failures_mprime == 0, evidence

    def check_critical_families(self) -> Tuple[bool, Evidence]:
        evidence, passed = {}, True
        for family, report in self.family_reports.items():
            ok = (
                not report.failures
                and report.max_constraint_residual < 1e-12
                and report.max_fixed_residual < config.tolerances.TOL_FIXED
                and report.max_grad_norm < 1e-8
                and report.max_f_error < 1e-12
            )
            passed = passed and ok
            evidence[family.value] = {
                "constraint_residual": report.max_constraint_residual,
                "fixed_residual": report.max_fixed_residual,
                "grad_norm": report.max_grad_norm,
                "f_error": report.max_f_error,
                "components": report.components,
                "link": report.link,
                "failures": report.failures,
            }
        return passed, evidence

    def check_indices(self) -> Tuple[bool, Evidence]:
        evidence, passed = {}, True
        for family, report in self.family_reports.items():
            ok = (report.index == family.expected_index and report.nullity == 1
                  and report.min_null_alignment > 0.999)
            passed = passed and ok
            evidence[family.value] = {
                "classifications": report.classifications,
                "expected": f"{family.expected_index},1",
                "null_alignment": report.min_null_alignment,
            }
        return passed, evidence

    def check_r_action(self) -> Tuple[bool, Evidence]:
        ev = self.r_evidence
        passed = (
            not ev.failures
            and all(ev.rotation_distance.get(f.value, np.inf) < 1e-7 for f in (CriticalFamily.S1P, CriticalFamily.S3P))
            and ev.s2_fixed_residual < config.tolerances.TOL_FIXED
            and ev.s2_normal_deviation < 1e-4
            and ev.s2_components == 2
        )
        return passed, ev.to_dict()

    def check_fix_r_census(self) -> Tuple[bool, Evidence]:
        census = realstruct.fix_r_census(self.cfg.samples, self.rng_for("fix-r-census"), self.cfg.workers)
        return census.passed, {
            "searches": census.searches,
            "landed": census.landed,
            "max_distance": census.max_distance,
            "failures": census.failures,
            "outliers": census.outliers,
        }

    def check_critical_census(self) -> Tuple[bool, Evidence]:
        census = morse.critical_census(self.case, self.cfg.samples, self.rng_for("critical-census"), self.cfg.workers)
        return census.passed, {
            "starts": census.starts,
            "histogram": census.histogram,
            "families": census.family_counts,
            "index_mismatches": census.index_mismatches,
            "not_converged": census.not_converged,
            "failed_starts": census.failed_starts,
            "max_f_deviation": census.max_f_deviation,
            "unmatched": census.unmatched,
        }

    def check_rprime(self) -> Tuple[bool, Evidence]:
        evidence = {"sphere": self.rprime.to_dict()}
        passed = self.rprime.valid
        if self.handle_swap is not None:
            evidence["handle_swap"] = {
                "samples": self.handle_swap.samples,
                "intertwining_error": self.handle_swap.max_intertwining_error,
                "variety_residual": self.handle_swap.max_variety_residual,
            }
            passed = passed and self.handle_swap.valid
        return passed, evidence

    def check_pi1_consistency(self) -> Tuple[bool, Evidence]:
        n = config.run.PI1_SAMPLES
        rng = self.rng_for("pi1-consistency")
        worst = max(realstruct.check_pi1_consistency(repvar.random_point(rng)) for _ in range(n))
        return worst < 1e-8, {"samples": n, "max_distance": worst}

    def check_certificates(self) -> Tuple[bool, Evidence]:
        certs = self.certificates()
        evidence = {
            "e1_page": self.page.to_dict(),
            "pieces": [piece.to_dict() for piece in self.critical_pieces],
            "certificates": [cert.to_dict() for cert in certs],
        }
        return all(cert.vanishes for cert in certs), evidence

    def check_betti(self) -> Tuple[bool, Evidence]:
        numbers = spectral.betti(self.page, self.certificates())
        self.betti_vector = numbers
        return spectral.compare_torus(numbers), {
            "betti": list(numbers.as_tuple()),
            "euler_characteristic": numbers.euler_characteristic,
            "matches_torus": spectral.compare_torus(numbers),
        }

    def run_check(self, name: str) -> CheckRecord:
        if name not in CHECKS:
            raise UnknownCheck(f"unknown check {name!r}; known: {', '.join(CHECK_NAMES)}")
        started = time.perf_counter()
        try:
            passed, evidence = CHECKS[name](self)
        except ModuliError as exc:
            logger.error(f"check {name} raised {type(exc).__name__}: {exc}")
            passed, evidence = False, {"error": type(exc).__name__, "message": str(exc)}
        elapsed = time.perf_counter() - started
        logger.info(f"check {name}: {'pass' if passed else 'FAIL'} in {elapsed:.2f}s")
        return CheckRecord(name, bool(passed), evidence, elapsed)


CHECKS: Dict[str, Callable[[VerificationSession], Tuple[bool, Evidence]]] = {
    "algebra": VerificationSession.check_algebra,
    "dimensions": VerificationSession.check_dimensions,
    "critical-families": VerificationSession.check_critical_families,
    "indices": VerificationSession.check_indices,
    "r-action": VerificationSession.check_r_action,
    "fix-r-census": VerificationSession.check_fix_r_census,
    "rprime": VerificationSession.check_rprime,
    "pi1-consistency": VerificationSession.check_pi1_consistency,
    "certificates": VerificationSession.check_certificates,
    "betti": VerificationSession.check_betti,
    "critical-census": VerificationSession.check_critical_census,
}
CHECK_NAMES: Tuple[str, ...] = tuple(CHECKS)

VERIFY_ALL_ORDER = (
    "algebra", "dimensions", "critical-families", "indices", "r-action",
    "fix-r-census", "rprime", "certificates", "betti",
)
BETTI_CHAIN = ("certificates", "betti")


def _run(session: VerificationSession, names: Sequence[str]) -> VerificationReport:
    report = VerificationReport(config=session.cfg.echo())
    for name in names:
        if name == "pi1-consistency" and session.case is not PunctureCase.LEFT:
            continue
        report.checks.append(session.run_check(name))
    vector = getattr(session, "betti_vector", None)
    report.betti = vector.as_tuple() if vector is not None else None
    return report


def cmd_verify_all(cfg: RunConfig) -> VerificationReport:
    names = list(VERIFY_ALL_ORDER)
    if cfg.puncture is PunctureCase.LEFT:
        names.insert(names.index("rprime") + 1, "pi1-consistency")
    return _run(VerificationSession(cfg), names)


def cmd_census(cfg: RunConfig) -> VerificationReport:
    return _run(VerificationSession(cfg), ["critical-census"])


def cmd_betti(cfg: RunConfig) -> VerificationReport:
    return _run(VerificationSession(cfg), BETTI_CHAIN)


def cmd_check(name: str, cfg: RunConfig) -> VerificationReport:
    if name not in CHECKS:
        raise UnknownCheck(f"unknown check {name!r}; known: {', '.join(CHECK_NAMES)}")
    return _run(VerificationSession(cfg), [name])


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="real-moduli",
        description="Verify the topology of the real moduli space of a genus-2 M-curve",
    )
    subparsers = parser.add_subparsers(dest="command", required=True)
    common = argparse.ArgumentParser(add_help=False)
    defaults = config.run
    common.add_argument("--puncture", choices=[c.value for c in PunctureCase], default=defaults.PUNCTURE)
    common.add_argument("--seed", type=lambda s: int(s, 0), default=None,
                        help="base seed (default: $REAL_MODULI_SEED or 42)")
    common.add_argument("--samples", type=int, default=defaults.SAMPLES)
    common.add_argument("--grid-n", type=int, default=defaults.GRID_N)
    common.add_argument("--tol-constraint", type=float, default=config.tolerances.TOL_CONSTRAINT)
    common.add_argument("--tol-fixed", type=float, default=config.tolerances.TOL_FIXED)
    common.add_argument("--tol-grad", type=float, default=config.tolerances.TOL_GRAD)
    common.add_argument("--tol-eig", type=float, default=config.tolerances.TOL_EIG)
    common.add_argument("--format", choices=["text", "json"], default=defaults.FORMAT)
    common.add_argument("--out", default=None, help="write the report here instead of stdout")
    common.add_argument("--workers", type=int, default=defaults.WORKERS)
    common.add_argument("--verbose", "-v", action="store_true")

    subparsers.add_parser("verify-all", parents=[common], help="run the full verification suite")
    subparsers.add_parser("census", parents=[common], help="flow random points of M' to critical limits")
    betti_parser = subparsers.add_parser("betti", parents=[common], help="certify differentials and print Betti numbers")
    betti_parser.add_argument("--skip-rprime", action="store_true", help="leave d2 uncertified")
    check_parser = subparsers.add_parser("check", parents=[common], help="run a single named check")
    check_parser.add_argument("name", help=f"one of: {', '.join(CHECK_NAMES)}")
    return parser


def config_from_args(args: argparse.Namespace) -> RunConfig:
    try:
        seed = args.seed if args.seed is not None else config.default_seed()
    except ValueError as exc:
        raise ConfigError(f"invalid seed in environment: {exc}") from exc
    return RunConfig(
        puncture=PunctureCase(args.puncture),
        seed=seed,
        samples=args.samples,
        tol_constraint=args.tol_constraint,
        tol_fixed=args.tol_fixed,
        tol_grad=args.tol_grad,
        tol_eig=args.tol_eig,
        grid_n=args.grid_n,
        output_path=args.out,
        format=args.format,
        workers=args.workers,
        skip_rprime=getattr(args, "skip_rprime", False),
    ).validate()


def render(report: VerificationReport, fmt: str) -> str:
    if fmt == "json":
        return JsonEncoder.encode(report.to_dict()) + "\n"
    return TextFormatter.format_report(JsonEncoder.to_plain(report.to_dict()))


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Main entry point; returns the process exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_PASS if exc.code == 0 else EXIT_USAGE

    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
    )
    try:
        cfg = config_from_args(args)
        cfg.apply()
        if args.command == "verify-all":
            report = cmd_verify_all(cfg)
        elif args.command == "census":
            report = cmd_census(cfg)
        elif args.command == "betti":
            report = cmd_betti(cfg)
        else:
            report = cmd_check(args.name, cfg)
    except (ConfigError, UnknownCheck) as exc:
        logger.error(f"{type(exc).__name__}: {exc}")
        return EXIT_USAGE

    text = render(report, cfg.format)
    if cfg.output_path:
        try:
            with open(cfg.output_path, "w", encoding="utf-8") as handle:
                handle.write(text)
        except OSError as exc:
            logger.error(f"Failed to write report: {exc}")
            return EXIT_USAGE
        logger.info(f"report written to {cfg.output_path}")
    else:
        sys.stdout.write(text)
    return EXIT_PASS if report.verdict else EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
