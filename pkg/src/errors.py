"""
Exception hierarchy for the real-moduli laboratory.

Everything raised on purpose derives from ModuliError so the CLI can tell a
failed verification from a programming error.
"""

from typing import Any, Iterable, Optional


class ModuliError(Exception):
    """Base class for all deliberate failures."""


class AntipodeError(ModuliError):
    """Logarithm requested at -1, where the branch is undefined."""


class NoConvergence(ModuliError):
    """An iterative solver ran out of iterations or attempts."""


class DegenerateGauge(ModuliError):
    """Infinitesimal conjugations have rank < 3 (the tuple is reducible)."""


class RankError(ModuliError):
    """A tangent frame has the wrong dimension."""

    def __init__(self, expected: int, found: int, where: str = ""):
        self.expected = expected
        self.found = found
        super().__init__(f"{where or 'frame'}: expected rank {expected}, found {found}")


class UnsupportedCase(ModuliError):
    """Operation only defined for some puncture placements."""


class BoundaryError(ModuliError):
    """Circle action requested where B1 = +-1."""


class NotCritical(ModuliError):
    """Hessian requested away from a critical point."""

    def __init__(self, grad_norm: float, tol: float):
        self.grad_norm = grad_norm
        super().__init__(f"gradient norm {grad_norm:.3e} >= {tol:.1e}")


class UnsupportedTopology(ModuliError):
    """Critical piece is not a disjoint union of circles."""


class PremiseFailure(ModuliError):
    """A differential certificate has an unverified premise."""

    def __init__(self, premise: str, certificate: Optional[Any] = None):
        self.premise = premise
        self.certificate = certificate
        super().__init__(f"premise not verified: {premise}")


class IncompleteCertification(ModuliError):
    """Betti numbers requested without certificates for every differential."""

    def __init__(self, missing: Iterable[str]):
        self.missing = sorted(missing)
        super().__init__("uncertified differentials: " + ", ".join(self.missing))


class UnknownCheck(ModuliError):
    """CLI asked for a check that is not registered."""


class ConfigError(ModuliError):
    """Run configuration violates its invariants."""
