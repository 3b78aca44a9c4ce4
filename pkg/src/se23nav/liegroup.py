"""Primitives for the extended pose group SE_2(3) and its Lie algebra.

An extended pose packs attitude, linear velocity and position into one
5x5 matrix

    T(R, v, p) = [ R  v  p ]
                 [ 0  1  0 ]
                 [ 0  0  1 ]

with R a rotation from the body frame to the inertial frame and v, p
expressed in the inertial frame.  Tangent elements carry three vectors
(omega, alpha, nu): omega generates the rotation block through the hat
map, alpha sits in the velocity column and nu in the position column.

Conventions:
  * hat([x, y, z]) = [[0, -z, y], [z, 0, -x], [-y, x, 0]]
  * the matrix inner product is <<A, B>> = tr(A^T B), so that
    <<A, hat(u)>> = 2 u^T psi(A) for any square A and unit u
  * the attitude distance |R|_I = sqrt(tr(I - R) / 4) lies in [0, 1]

All numerical thresholds used for validation live in the ``Tolerances``
record below; nothing else in the package hard-codes a tolerance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError

__all__ = [
    "Tolerances",
    "TOL",
    "AngleAxis",
    "SE23",
    "TangentSE23",
    "hat",
    "vee",
    "proj_antisym",
    "psi",
    "angle_axis_to_rot",
    "rot_to_angle_axis",
    "rot_distance",
    "se23_identity",
    "se23_compose",
    "se23_inverse",
    "proj_se23",
    "proj_se23_gains",
    "adjoint",
    "exp_se23",
    "project_so3",
    "rot_to_quat",
    "quat_to_rot",
]


@dataclass(frozen=True)
class Tolerances:
    """Numerical thresholds shared by the whole package.

    orthonormal    accepted deviation of R^T R from the identity
    antisym        accepted symmetric residue when inverting the hat map
    unit_axis      accepted deviation of a rotation axis from unit norm
    small_angle    below this angle, series expansions replace closed forms
    on_group       accepted defect of a computed group element
    eig_rel_gap    relative gap under which eigenvalues count as repeated
    collinear_rel  relative size under which an eigenvalue of M counts as zero
    divergence     error-norm guard that aborts a simulation run
    """

    orthonormal: float = 1e-9
    antisym: float = 1e-9
    unit_axis: float = 1e-12
    small_angle: float = 1e-6
    on_group: float = 1e-9
    eig_rel_gap: float = 1e-7
    collinear_rel: float = 1e-9
    divergence: float = 1e6


TOL = Tolerances()

_I3 = np.eye(3)


def _as_vec3(x, name: str) -> np.ndarray:
    v = np.asarray(x, dtype=float)
    if v.shape != (3,):
        raise InvalidArgumentError(f"{name} must have shape (3,), got {v.shape}")
    return v


def _as_mat(x, shape, name: str) -> np.ndarray:
    m = np.asarray(x, dtype=float)
    if m.shape != shape:
        raise InvalidArgumentError(f"{name} must have shape {shape}, got {m.shape}")
    return m


@dataclass(frozen=True)
class AngleAxis:
    """Rotation angle in [0, pi] about a unit axis."""

    theta: float
    axis: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "axis", _as_vec3(self.axis, "axis"))
        object.__setattr__(self, "theta", float(self.theta))
        if not 0.0 <= self.theta <= math.pi + 1e-15:
            raise InvalidArgumentError(f"theta must lie in [0, pi], got {self.theta}")
        if abs(np.linalg.norm(self.axis) - 1.0) > TOL.unit_axis:
            raise InvalidArgumentError(
                f"axis must be unit norm within {TOL.unit_axis}, got |u|={np.linalg.norm(self.axis)!r}"
            )


@dataclass(frozen=True)
class SE23:
    """Extended pose T(R, v, p); construction only checks shapes."""

    rot: np.ndarray
    vel: np.ndarray
    pos: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "rot", _as_mat(self.rot, (3, 3), "rot"))
        object.__setattr__(self, "vel", _as_vec3(self.vel, "vel"))
        object.__setattr__(self, "pos", _as_vec3(self.pos, "pos"))

    def as_matrix(self) -> np.ndarray:
        T = np.eye(5)
        T[:3, :3] = self.rot
        T[:3, 3] = self.vel
        T[:3, 4] = self.pos
        return T

    @classmethod
    def from_matrix(cls, T) -> "SE23":
        T = _as_mat(T, (5, 5), "T")
        if np.max(np.abs(T[3:, :] - np.eye(5)[3:, :])) > TOL.on_group:
            raise InvalidArgumentError("bottom rows of an extended pose must equal [0 1 0; 0 0 1]")
        return cls(T[:3, :3], T[:3, 3], T[:3, 4])

    def __matmul__(self, other: "SE23") -> "SE23":
        return se23_compose(self, other)


@dataclass(frozen=True)
class TangentSE23:
    """Tangent element (omega, alpha, nu) of the extended pose group."""

    omega: np.ndarray
    alpha: np.ndarray
    nu: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "omega", _as_vec3(self.omega, "omega"))
        object.__setattr__(self, "alpha", _as_vec3(self.alpha, "alpha"))
        object.__setattr__(self, "nu", _as_vec3(self.nu, "nu"))

    def as_matrix(self) -> np.ndarray:
        U = np.zeros((5, 5))
        U[:3, :3] = hat(self.omega)
        U[:3, 3] = self.alpha
        U[:3, 4] = self.nu
        return U


def hat(w) -> np.ndarray:
    """Skew-symmetric matrix of a 3-vector (the so(3) hat map)."""
    w = _as_vec3(w, "w")
    return np.array(
        [
            [0.0, -w[2], w[1]],
            [w[2], 0.0, -w[0]],
            [-w[1], w[0], 0.0],
        ]
    )


def vee(A) -> np.ndarray:
    """Inverse of ``hat``; rejects matrices with a symmetric part.

    The symmetric residue is compared against ``TOL.antisym`` relative to
    the magnitude of A (with an absolute floor of 1), so both tiny and
    large well-formed inputs pass.
    """
    A = _as_mat(A, (3, 3), "A")
    scale = max(1.0, float(np.max(np.abs(A))))
    if np.max(np.abs(A + A.T)) > TOL.antisym * scale:
        raise InvalidArgumentError("vee requires an antisymmetric matrix")
    return np.array([A[2, 1], A[0, 2], A[1, 0]])


def proj_antisym(A) -> np.ndarray:
    """Antisymmetric part (A - A^T) / 2."""
    A = np.asarray(A, dtype=float)
    return 0.5 * (A - A.T)


def psi(A) -> np.ndarray:
    """Vector form of the antisymmetric part: psi(A) = vee((A - A^T)/2)."""
    A = _as_mat(A, (3, 3), "A")
    return 0.5 * np.array([A[2, 1] - A[1, 2], A[0, 2] - A[2, 0], A[1, 0] - A[0, 1]])


def _rodrigues(theta: float, axis: np.ndarray) -> np.ndarray:
    # axis assumed unit; no validation here (hot path + internal callers)
    K = hat(axis)
    return _I3 + math.sin(theta) * K + (1.0 - math.cos(theta)) * (K @ K)


def angle_axis_to_rot(aa: AngleAxis) -> np.ndarray:
    """Rotation matrix of an angle-axis pair (Rodrigues formula)."""
    return _rodrigues(aa.theta, aa.axis)


def rot_to_angle_axis(R) -> AngleAxis:
    """Angle-axis extraction with a stable branch near pi.

    The angle comes from atan2(|psi(R)|, (tr(R) - 1) / 2), which stays
    accurate over the whole range.  Away from pi the axis is psi(R)
    normalized; near pi it is recovered from the symmetric part
    (R + R^T)/2 - cos(theta) I = (1 - cos(theta)) u u^T, with the sign
    fixed by psi(R) when it is informative and by the convention that
    the largest-magnitude component is positive otherwise.
    """
    R = _as_mat(R, (3, 3), "R")
    s = psi(R)
    sin_theta = float(np.linalg.norm(s))
    cos_theta = 0.5 * (float(np.trace(R)) - 1.0)
    theta = math.atan2(sin_theta, cos_theta)
    if theta < TOL.small_angle:
        return AngleAxis(0.0, np.array([1.0, 0.0, 0.0]))
    if sin_theta > TOL.small_angle:
        axis = s / sin_theta
    else:
        # theta ~ pi: rank-one symmetric part carries the axis
        S = 0.5 * (R + R.T) - cos_theta * _I3
        col = int(np.argmax(np.diag(S)))
        axis = S[:, col]
        axis = axis / np.linalg.norm(axis)
        if sin_theta > 0 and float(s @ axis) < 0:
            axis = -axis
        elif axis[int(np.argmax(np.abs(axis)))] < 0:
            axis = -axis
    # guard against rounding pushing |u| off unit by more than the tolerance
    axis = axis / np.linalg.norm(axis)
    return AngleAxis(min(theta, math.pi), axis)


def rot_distance(R) -> float:
    """Normalized attitude distance |R|_I = sqrt(tr(I - R)/4), clamped to [0, 1]."""
    R = np.asarray(R, dtype=float)
    val = 0.25 * (3.0 - float(np.trace(R)))
    return math.sqrt(min(max(val, 0.0), 1.0))


def se23_identity() -> SE23:
    return SE23(np.eye(3), np.zeros(3), np.zeros(3))


def se23_compose(X1: SE23, X2: SE23) -> SE23:
    """Group product computed block-wise (equals the 5x5 matrix product)."""
    R = X1.rot @ X2.rot
    v = X1.rot @ X2.vel + X1.vel
    p = X1.rot @ X2.pos + X1.pos
    return SE23(R, v, p)


def se23_inverse(X: SE23) -> SE23:
    """Group inverse T(R^T, -R^T v, -R^T p)."""
    Rt = X.rot.T
    return SE23(Rt, -(Rt @ X.vel), -(Rt @ X.pos))


def proj_se23(A) -> TangentSE23:
    """Orthogonal projection of a 5x5 matrix onto the tangent space.

    Keeps the antisymmetric part of the top-left 3x3 block and the top
    three entries of columns four and five; everything else is dropped.
    The result is idempotent and preserves <<A, U>> for tangent U.
    """
    A = _as_mat(A, (5, 5), "A")
    return TangentSE23(psi(A[:3, :3]), A[:3, 3].copy(), A[:3, 4].copy())


def proj_se23_gains(A, k_r: float, K_v, K_p) -> TangentSE23:
    """Gain-weighted variant of ``proj_se23``.

    Scales the rotation part by the scalar k_r and maps the two column
    parts through the 3x3 gain matrices K_v and K_p.  With k_r = 1 and
    identity gains this reduces to ``proj_se23``.
    """
    A = _as_mat(A, (5, 5), "A")
    K_v = _as_mat(K_v, (3, 3), "K_v")
    K_p = _as_mat(K_p, (3, 3), "K_p")
    return TangentSE23(k_r * psi(A[:3, :3]), K_v @ A[:3, 3], K_p @ A[:3, 4])


def adjoint(X: SE23, U: TangentSE23) -> TangentSE23:
    """Adjoint action Ad_X U = X U X^{-1}, computed block-wise."""
    Rw = X.rot @ U.omega
    return TangentSE23(
        Rw,
        X.rot @ U.alpha - np.cross(Rw, X.vel),
        X.rot @ U.nu - np.cross(Rw, X.pos),
    )


def exp_se23(U: TangentSE23) -> SE23:
    """Exponential map of the extended pose group (closed form).

    Uses the Rodrigues formula for the rotation block and the so(3)
    left Jacobian for the two translational columns.  Below
    ``TOL.small_angle`` both series fall back to their Taylor
    expansions, so a nilpotent argument (omega = 0) maps to I + U
    exactly.
    """
    w = U.omega
    theta = float(np.linalg.norm(w))
    K = hat(w)
    K2 = K @ K
    if theta < TOL.small_angle:
        R = _I3 + K + 0.5 * K2
        J = _I3 + 0.5 * K + K2 / 6.0
    else:
        s, c = math.sin(theta), math.cos(theta)
        R = _I3 + (s / theta) * K + ((1.0 - c) / theta**2) * K2
        J = _I3 + ((1.0 - c) / theta**2) * K + ((theta - s) / theta**3) * K2
    return SE23(R, J @ U.alpha, J @ U.nu)


def project_so3(R) -> np.ndarray:
    """Closest rotation matrix in the Frobenius sense (polar projection)."""
    U, _, Vt = np.linalg.svd(np.asarray(R, dtype=float))
    D = U @ Vt
    if np.linalg.det(D) < 0:
        U = U.copy()
        U[:, -1] = -U[:, -1]
        D = U @ Vt
    return D


def rot_to_quat(R) -> np.ndarray:
    """Unit quaternion (w, x, y, z) of a rotation matrix, with w >= 0.

    Extraction picks the largest of the four squared components first,
    which avoids the cancellation the trace formula suffers near pi.
    """
    R = _as_mat(R, (3, 3), "R")
    tr = float(np.trace(R))
    diag = np.diag(R)
    choices = np.array([tr, diag[0], diag[1], diag[2]])
    k = int(np.argmax(choices))
    if k == 0:
        s = math.sqrt(tr + 1.0) * 2.0
        q = np.array(
            [0.25 * s,
             (R[2, 1] - R[1, 2]) / s,
             (R[0, 2] - R[2, 0]) / s,
             (R[1, 0] - R[0, 1]) / s]
        )
    else:
        i = k - 1
        j, l = (i + 1) % 3, (i + 2) % 3
        s = math.sqrt(max(1.0 + diag[i] - diag[j] - diag[l], 0.0)) * 2.0
        q = np.empty(4)
        q[0] = (R[l, j] - R[j, l]) / s
        q[1 + i] = 0.25 * s
        q[1 + j] = (R[j, i] + R[i, j]) / s
        q[1 + l] = (R[l, i] + R[i, l]) / s
    q /= np.linalg.norm(q)
    if q[0] < 0.0:
        q = -q
    return q


def quat_to_rot(q) -> np.ndarray:
    """Rotation matrix of a quaternion given as (w, x, y, z).

    The input is normalized, so quaternions reconstructed from rounded
    text still map onto the group.
    """
    q = np.asarray(q, dtype=float)
    if q.shape != (4,):
        raise InvalidArgumentError(f"quaternion must have shape (4,), got {q.shape}")
    n = float(np.linalg.norm(q))
    if n < TOL.unit_axis:
        raise InvalidArgumentError("quaternion has near-zero norm")
    w, x, y, z = q / n
    return np.array(
        [
            [1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - w * z), 2.0 * (x * z + w * y)],
            [2.0 * (x * y + w * z), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - w * x)],
            [2.0 * (x * z - w * y), 2.0 * (y * z + w * x), 1.0 - 2.0 * (x * x + y * y)],
        ]
    )
