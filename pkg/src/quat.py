"""
Quaternion and su(2) arithmetic.

SU(2) elements are unit quaternions stored as float64 arrays of shape (..., 4)
in the order (w, x, y, z) for the basis (1, i, j, k). Tangent vectors at the
identity (pure imaginary quaternions) are arrays of shape (..., 3). Every
function broadcasts over leading axes so batches of points can be pushed
through in one call.
"""

import logging
from typing import Sequence, Tuple

import numpy as np
from typing_extensions import TypeAlias

from config import config
from errors import AntipodeError

logger = logging.getLogger(__name__)

UnitQuaternion: TypeAlias = np.ndarray
Su2Vector: TypeAlias = np.ndarray


def _constant(values) -> np.ndarray:
    arr = np.array(values, dtype=float)
    arr.setflags(write=False)
    return arr


ONE = _constant([1.0, 0.0, 0.0, 0.0])
I = _constant([0.0, 1.0, 0.0, 0.0])
J = _constant([0.0, 0.0, 1.0, 0.0])
K = _constant([0.0, 0.0, 0.0, 1.0])


def quaternion(w: float, x: float = 0.0, y: float = 0.0, z: float = 0.0) -> UnitQuaternion:
    """Build a unit quaternion from components (normalized)."""
    return normalize(np.array([w, x, y, z], dtype=float))


def complex_unit(angle: float, axis: UnitQuaternion = I) -> UnitQuaternion:
    """cos(angle) + sin(angle) * axis for a pure unit axis."""
    return normalize(np.cos(angle) * ONE + np.sin(angle) * np.asarray(axis, dtype=float))


def normalize(q: np.ndarray) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    return q / np.linalg.norm(q, axis=-1, keepdims=True)


def raw_mul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Hamilton product without renormalization (works for any quaternions)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    aw, ax, ay, az = np.moveaxis(a, -1, 0)
    bw, bx, by, bz = np.moveaxis(b, -1, 0)
    return np.stack([
        aw * bw - ax * bx - ay * by - az * bz,
        aw * bx + ax * bw + ay * bz - az * by,
        aw * by - ax * bz + ay * bw + az * bx,
        aw * bz + ax * by - ay * bx + az * bw,
    ], axis=-1)


def mul(a: UnitQuaternion, b: UnitQuaternion) -> UnitQuaternion:
    """Quaternion product, renormalized."""
    return normalize(raw_mul(a, b))


def product(*factors: UnitQuaternion) -> UnitQuaternion:
    """Left-to-right product of any number of factors."""
    result = np.broadcast_to(ONE, np.shape(factors[0])).copy() if factors else ONE.copy()
    for count, factor in enumerate(factors, start=1):
        result = raw_mul(result, factor)
        if count % 8 == 0:
            result = normalize(result)
    return normalize(result)


def inverse(q: UnitQuaternion) -> UnitQuaternion:
    """Inverse of a unit quaternion (its conjugate)."""
    q = np.asarray(q, dtype=float)
    return q * np.array([1.0, -1.0, -1.0, -1.0])


def conj_by(g: UnitQuaternion, x: UnitQuaternion) -> UnitQuaternion:
    """g x g^-1."""
    return normalize(raw_mul(raw_mul(g, x), inverse(g)))


def commutator(a: UnitQuaternion, b: UnitQuaternion) -> UnitQuaternion:
    """a b a^-1 b^-1."""
    return product(a, b, inverse(a), inverse(b))


def trace(q: UnitQuaternion) -> np.ndarray:
    """Matrix trace of the SU(2) element: twice the real part."""
    return 2.0 * np.asarray(q, dtype=float)[..., 0]


def imag(q: UnitQuaternion) -> Su2Vector:
    return np.asarray(q, dtype=float)[..., 1:]


def pure(v: Su2Vector) -> np.ndarray:
    """Embed an su(2) vector as a pure imaginary quaternion."""
    v = np.asarray(v, dtype=float)
    return np.concatenate([np.zeros(v.shape[:-1] + (1,)), v], axis=-1)


def exp_su2(v: Su2Vector) -> UnitQuaternion:
    """Lie exponential: cos|v| + sin|v| v/|v|."""
    v = np.asarray(v, dtype=float)
    theta = np.linalg.norm(v, axis=-1)
    small = theta < config.solver.SERIES_CUTOFF
    t2 = theta * theta
    safe = np.where(small, 1.0, theta)
    sinc = np.where(small, 1.0 - t2 / 6.0 + t2 * t2 / 120.0, np.sin(safe) / safe)
    cos = np.where(small, 1.0 - t2 / 2.0 + t2 * t2 / 24.0, np.cos(theta))
    return normalize(np.concatenate([cos[..., None], sinc[..., None] * v], axis=-1))


def log_su2(q: UnitQuaternion) -> Su2Vector:
    """Inverse of exp_su2 with |v| in [0, pi)."""
    q = np.asarray(q, dtype=float)
    w = q[..., 0]
    if np.any(np.abs(w + 1.0) < config.solver.ANTIPODE_TOL):
        raise AntipodeError("logarithm undefined at -1")
    vec = q[..., 1:]
    s = np.linalg.norm(vec, axis=-1)
    theta = np.arctan2(s, w)
    small = s < config.solver.SERIES_CUTOFF
    safe = np.where(small, 1.0, s)
    ratio = np.where(small, 1.0 + theta * theta / 6.0, theta / safe)
    return ratio[..., None] * vec


def geodesic_midpoint(a: UnitQuaternion, b: UnitQuaternion) -> UnitQuaternion:
    """a exp(log(a^-1 b) / 2)."""
    return mul(a, exp_su2(0.5 * log_su2(mul(inverse(a), b))))


def haar_sample(rng: np.random.Generator, size: Tuple[int, ...] = ()) -> UnitQuaternion:
    """Haar-uniform SU(2) elements from normalized Gaussian 4-vectors."""
    return normalize(rng.standard_normal(tuple(size) + (4,)))


def left_matrix(q: np.ndarray) -> np.ndarray:
    """Matrix L(q) with q * p = L(q) @ p."""
    w, x, y, z = np.asarray(q, dtype=float)
    return np.array([
        [w, -x, -y, -z],
        [x, w, -z, y],
        [y, z, w, -x],
        [z, -y, x, w],
    ])


def right_matrix(q: np.ndarray) -> np.ndarray:
    """Matrix R(q) with p * q = R(q) @ p."""
    w, x, y, z = np.asarray(q, dtype=float)
    return np.array([
        [w, -x, -y, -z],
        [x, w, z, -y],
        [y, -z, w, x],
        [z, y, -x, w],
    ])


def adjoint_matrix(q: UnitQuaternion) -> np.ndarray:
    """Rotation matrix of v -> q v q^-1 on su(2)."""
    w, x, y, z = np.moveaxis(np.asarray(q, dtype=float), -1, 0)
    rows = [
        [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
        [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
        [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
    ]
    return np.stack([np.stack(row, axis=-1) for row in rows], axis=-2)


def canonical_sign(g: UnitQuaternion) -> UnitQuaternion:
    """Pick the representative of +-g whose largest component is positive."""
    g = np.asarray(g, dtype=float)
    return g if g[np.argmax(np.abs(g))] >= 0 else -g


def solve_conjugator(
    xs: Sequence[UnitQuaternion],
    ys: Sequence[UnitQuaternion],
) -> Tuple[UnitQuaternion, float]:
    """
    Best g with g x_i g^-1 = y_i for all i.

    g x = y g is linear in g, so g is the least right singular vector of the
    stacked system (R(x_i) - L(y_i)) g = 0. The smallest singular value is
    returned as the residual; the caller decides what counts as zero.
    """
    xs = np.asarray(xs, dtype=float).reshape(-1, 4)
    ys = np.asarray(ys, dtype=float).reshape(-1, 4)
    if len(xs) != len(ys) or len(xs) == 0:
        raise ValueError("solve_conjugator needs two non-empty lists of equal length")
    system = np.concatenate([right_matrix(x) - left_matrix(y) for x, y in zip(xs, ys)])
    _, singular, vt = np.linalg.svd(system)
    g = canonical_sign(normalize(vt[-1]))
    return g, float(singular[-1])
