"""
The representation variety mu^-1(1) inside SU(2)^4 and its conjugation quotient.

A Quad is an array of shape (..., 4, 4): the rows are A1, B1, A2, B2 as unit
quaternions. Ambient tangent vectors are flat arrays of 12 reals, the
left-translated su(2) components (v1, u1, v2, u2) of a perturbation
X -> X exp(v) of each factor. The metric is the plain dot product of these
components, which is bi-invariant and so conjugation-invariant.
"""

import itertools
import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
from typing_extensions import TypeAlias

import quat
from config import config
from errors import AntipodeError, DegenerateGauge, NoConvergence, RankError

logger = logging.getLogger(__name__)

Quad: TypeAlias = np.ndarray
AmbientTangent: TypeAlias = np.ndarray

A1, B1, A2, B2 = 0, 1, 2, 3
GENERATOR_NAMES = ("a1", "b1", "a2", "b2")
M_DIMENSION = 6


def make_quad(a1, b1, a2, b2) -> Quad:
    """Stack four unit quaternions into a Quad."""
    return quat.normalize(np.stack([np.asarray(x, dtype=float) for x in (a1, b1, a2, b2)], axis=-2))


def mu(q: Quad) -> quat.UnitQuaternion:
    """mu(A1, B1, A2, B2) = -[A1, B1][A2, B2]."""
    q = np.asarray(q, dtype=float)
    c1 = quat.commutator(q[..., A1, :], q[..., B1, :])
    c2 = quat.commutator(q[..., A2, :], q[..., B2, :])
    return -quat.mul(c1, c2)


def constraint_residual(q: Quad) -> quat.Su2Vector:
    """log mu(q); zero exactly on the variety."""
    return quat.log_su2(mu(q))


def retract(q: Quad, v: AmbientTangent) -> Quad:
    """Move each factor along its left-translated tangent: X -> X exp(v)."""
    q = np.asarray(q, dtype=float)
    v = np.asarray(v, dtype=float).reshape(q.shape[:-2] + (4, 3))
    return quat.mul(q, quat.exp_su2(v))


def tangent_between(base: Quad, target: Quad) -> AmbientTangent:
    """Left-translated log of base^-1 target per factor, flattened."""
    rel = quat.mul(quat.inverse(base), target)
    logs = quat.log_su2(rel)
    return logs.reshape(logs.shape[:-2] + (12,))


# letters of -[A1,B1][A2,B2] as (slot, exponent)
_MU_LETTERS = ((A1, 1), (B1, 1), (A1, -1), (B1, -1), (A2, 1), (B2, 1), (A2, -1), (B2, -1))


def mu_jacobian(q: Quad) -> np.ndarray:
    """
    3x12 matrix J with mu(q exp(t v)) = mu(q) exp(t J v + O(t^2)).

    A letter X at position m contributes Ad(S_m^-1) where S_m is the product of
    the letters after it; a letter X^-1 contributes -Ad((X^-1 S_m)^-1).
    """
    q = np.asarray(q, dtype=float)
    letters = [q[slot] if exponent > 0 else quat.inverse(q[slot]) for slot, exponent in _MU_LETTERS]
    jac = np.zeros((3, 12))
    suffix = quat.ONE.copy()
    for (slot, exponent), letter in zip(reversed(_MU_LETTERS), reversed(letters)):
        if exponent > 0:
            block = quat.adjoint_matrix(suffix).T
        else:
            block = -quat.adjoint_matrix(quat.mul(letter, suffix)).T
        jac[:, 3 * slot:3 * slot + 3] += block
        suffix = quat.mul(letter, suffix)
    return jac


def numerical_mu_jacobian(q: Quad, step: float = 1e-6) -> np.ndarray:
    """Central-difference version of mu_jacobian, used to validate it."""
    base_inv = quat.inverse(mu(q))
    jac = np.zeros((3, 12))
    for column in range(12):
        e = np.zeros(12)
        e[column] = step
        plus = quat.log_su2(quat.mul(base_inv, mu(retract(q, e))))
        minus = quat.log_su2(quat.mul(base_inv, mu(retract(q, -e))))
        jac[:, column] = (plus - minus) / (2 * step)
    return jac


def project_to_variety(
    q0: Quad,
    tol: Optional[float] = None,
    max_iter: Optional[int] = None,
) -> Quad:
    """
    Gauss-Newton projection onto mu^-1(1).

    Each step solves J v = -log mu(q) in the minimum-norm sense and retracts by
    exp per factor, halving the step while the residual does not drop.
    """
    tol = config.tolerances.TOL_CONSTRAINT if tol is None else tol
    max_iter = config.solver.PROJECT_MAX_ITER if max_iter is None else max_iter
    q = np.array(q0, dtype=float)
    norm = float(np.linalg.norm(constraint_residual(q)))
    for iteration in range(max_iter):
        if norm < tol:
            logger.debug(f"projection converged in {iteration} iterations, residual {norm:.2e}")
            return q
        step = -np.linalg.lstsq(mu_jacobian(q), constraint_residual(q), rcond=None)[0]
        scale = 1.0
        accepted = False
        while scale >= 1.0 / 64:
            candidate = retract(q, scale * step)
            try:
                candidate_norm = float(np.linalg.norm(constraint_residual(candidate)))
            except AntipodeError:
                candidate_norm = np.inf
            if candidate_norm < norm:
                q, norm, accepted = candidate, candidate_norm, True
                break
            scale /= 2
        if not accepted:
            # stalled at round-off level
            if norm < 1e-12:
                return q
            raise NoConvergence(f"projection stalled at residual {norm:.3e}")
    if norm < tol:
        return q
    raise NoConvergence(f"projection did not converge in {max_iter} iterations (residual {norm:.3e})")


def random_point(rng: np.random.Generator, attempts: Optional[int] = None) -> Quad:
    """Haar-random 4-tuple projected onto the variety; retried on failure."""
    attempts = config.solver.RANDOM_POINT_ATTEMPTS if attempts is None else attempts
    for attempt in range(attempts):
        start = quat.haar_sample(rng, (4,))
        try:
            q = project_to_variety(start)
        except (NoConvergence, AntipodeError) as exc:
            logger.debug(f"random start {attempt} rejected: {exc}")
            continue
        if is_irreducible(q):
            return q
    raise NoConvergence(f"no variety point after {attempts} random starts")


def orthonormalize(
    vectors: Sequence[np.ndarray],
    against: Optional[Sequence[np.ndarray]] = None,
    drop_tol: Optional[float] = None,
) -> List[np.ndarray]:
    """
    Modified Gram-Schmidt in input order.

    Vectors are first made orthogonal to `against` (assumed orthonormal), then
    to the ones already accepted; anything shorter than drop_tol afterwards is
    dropped.
    """
    drop_tol = config.tolerances.ORTHO_DROP if drop_tol is None else drop_tol
    basis = [np.asarray(b, dtype=float) for b in (against or [])]
    accepted: List[np.ndarray] = []
    for vector in vectors:
        w = np.array(vector, dtype=float)
        for _ in range(2):
            for b in basis + accepted:
                w -= np.dot(b, w) * b
        norm = np.linalg.norm(w)
        if norm < drop_tol:
            continue
        accepted.append(w / norm)
    return accepted


def gauge_vectors(q: Quad) -> np.ndarray:
    """Raw infinitesimal conjugations X -> X (X^-1 u X - u) for u = i, j, k."""
    q = np.asarray(q, dtype=float)
    rows = []
    for u in (quat.I, quat.J, quat.K):
        moved = quat.conj_by(quat.inverse(q), np.broadcast_to(u, q.shape))
        rows.append((quat.imag(moved) - quat.imag(u)).reshape(12))
    return np.array(rows)


def gauge_directions(q: Quad) -> List[AmbientTangent]:
    """Orthonormal basis of the conjugation orbit's tangent space."""
    directions = orthonormalize(list(gauge_vectors(q)))
    if len(directions) < 3:
        raise DegenerateGauge(f"gauge directions have rank {len(directions)}")
    return directions


@dataclass(frozen=True)
class TangentFrame:
    """Orthonormal tangent vectors (rows of `vectors`, each of length 12) at `base`."""
    base: Quad
    vectors: np.ndarray

    @property
    def rank(self) -> int:
        return int(self.vectors.shape[0])

    def coordinates(self, v: AmbientTangent) -> np.ndarray:
        return self.vectors @ np.asarray(v, dtype=float)

    def project(self, v: AmbientTangent) -> AmbientTangent:
        return self.vectors.T @ self.coordinates(v)


def tangent_frame_M(q: Quad) -> TangentFrame:
    """Horizontal tangent space ker(d mu) minus gauge: a model of T[q] M."""
    jac_rows = orthonormalize(list(mu_jacobian(q)))
    normal = orthonormalize(gauge_directions(q), against=jac_rows)
    frame = orthonormalize(list(np.eye(12)), against=jac_rows + normal)
    if len(frame) != M_DIMENSION:
        raise RankError(M_DIMENSION, len(frame), "tangent_frame_M")
    return TangentFrame(base=np.array(q, dtype=float), vectors=np.array(frame))


def fingerprint(q: Quad) -> np.ndarray:
    """
    14 conjugation invariants: traces of the generators, of the ordered pairs
    X_i X_j (i < j) and of the triples X_i X_j X_k (i < j < k).
    """
    q = np.asarray(q, dtype=float)
    traces = [quat.trace(q[..., a, :]) for a in range(4)]
    for a, b in itertools.combinations(range(4), 2):
        traces.append(quat.trace(quat.raw_mul(q[..., a, :], q[..., b, :])))
    for a, b, c in itertools.combinations(range(4), 3):
        traces.append(quat.trace(quat.raw_mul(quat.raw_mul(q[..., a, :], q[..., b, :]), q[..., c, :])))
    return np.stack(traces, axis=-1)


def fingerprint_gap(p: Quad, q: Quad) -> float:
    return float(np.max(np.abs(fingerprint(p) - fingerprint(q))))


def conjugate_quad(g: quat.UnitQuaternion, q: Quad) -> Quad:
    return quat.conj_by(np.broadcast_to(g, np.shape(q)), q)


def class_distance(p: Quad, q: Quad) -> float:
    """|g p g^-1 - q| for the best conjugator g; zero iff same class."""
    g, _ = quat.solve_conjugator(p, q)
    return float(np.linalg.norm(conjugate_quad(g, p) - np.asarray(q, dtype=float)))


def is_irreducible(q: Quad, tol: float = 1e-8) -> bool:
    """True unless the entries share a common axis."""
    q = np.asarray(q, dtype=float)
    parts = [quat.imag(q[a]) for a in range(4)]
    for a, b in itertools.combinations(range(4), 2):
        parts.append(quat.imag(quat.mul(q[a], q[b])))
    singular = np.linalg.svd(np.array(parts), compute_uv=False)
    return int(np.sum(singular > tol)) >= 2


@dataclass(frozen=True)
class Word:
    """
    Freely reduced word in a1, b1, a2, b2 with an optional central sign.

    letters are (generator index, exponent) pairs with exponent +-1.
    """
    letters: Tuple[Tuple[int, int], ...] = ()
    sign: int = 1

    def __post_init__(self):
        reduced: List[Tuple[int, int]] = []
        for generator, exponent in self.letters:
            if generator not in range(4) or exponent not in (1, -1):
                raise ValueError(f"invalid letter {(generator, exponent)}")
            if reduced and reduced[-1] == (generator, -exponent):
                reduced.pop()
            else:
                reduced.append((generator, exponent))
        if self.sign not in (1, -1):
            raise ValueError(f"central sign must be +-1, got {self.sign}")
        object.__setattr__(self, "letters", tuple(reduced))

    @classmethod
    def parse(cls, text: str, sign: int = 1) -> "Word":
        """Parse whitespace separated tokens like 'a1 b1 a1^-1 b1^-1'."""
        letters = []
        for token in text.split():
            name, _, power = token.partition("^")
            if name not in GENERATOR_NAMES or power not in ("", "1", "-1"):
                raise ValueError(f"invalid token {token!r}")
            letters.append((GENERATOR_NAMES.index(name), -1 if power == "-1" else 1))
        return cls(tuple(letters), sign)

    def __mul__(self, other: "Word") -> "Word":
        return Word(self.letters + other.letters, self.sign * other.sign)

    def inverse(self) -> "Word":
        return Word(tuple((g, -e) for g, e in reversed(self.letters)), self.sign)

    def __str__(self) -> str:
        body = " ".join(GENERATOR_NAMES[g] + ("^-1" if e < 0 else "") for g, e in self.letters) or "1"
        return body if self.sign > 0 else f"-({body})"


def generator(index: int) -> Word:
    return Word(((index, 1),))


def commutator_word(x: Word, y: Word) -> Word:
    return x * y * x.inverse() * y.inverse()


# c = [a1, b1][a2, b2], the boundary loop
BOUNDARY_WORD = commutator_word(generator(A1), generator(B1)) * commutator_word(generator(A2), generator(B2))


def evaluate_word(w: Word, q: Quad) -> quat.UnitQuaternion:
    """Image of the word under a_k -> q[k], times the central sign."""
    q = np.asarray(q, dtype=float)
    factors = [q[..., g, :] if e > 0 else quat.inverse(q[..., g, :]) for g, e in w.letters]
    value = quat.product(*factors) if factors else np.broadcast_to(quat.ONE, q.shape[:-2] + (4,)).copy()
    return w.sign * value
