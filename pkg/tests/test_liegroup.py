import math

import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings, strategies as st

from se23nav import (
    TOL,
    AngleAxis,
    SE23,
    TangentSE23,
    InvalidArgumentError,
    adjoint,
    angle_axis_to_rot,
    exp_se23,
    hat,
    project_so3,
    proj_antisym,
    proj_se23,
    proj_se23_gains,
    psi,
    quat_to_rot,
    rot_distance,
    rot_to_angle_axis,
    rot_to_quat,
    se23_compose,
    se23_identity,
    se23_inverse,
    vee,
)

E1 = np.array([1.0, 0.0, 0.0])
E3 = np.array([0.0, 0.0, 1.0])


def vec3(lo=-10.0, hi=10.0):
    return st.lists(
        st.floats(lo, hi, allow_nan=False, allow_infinity=False), min_size=3, max_size=3
    ).map(np.array)


def unit3():
    return vec3(-1.0, 1.0).filter(lambda v: np.linalg.norm(v) > 1e-2).map(
        lambda v: v / np.linalg.norm(v)
    )


def rotations():
    return st.tuples(st.floats(0.0, math.pi), unit3()).map(
        lambda tu: angle_axis_to_rot(AngleAxis(tu[0], tu[1]))
    )


def poses():
    return st.tuples(rotations(), vec3(), vec3()).map(lambda t: SE23(*t))


def tangents():
    return st.tuples(vec3(), vec3(), vec3()).map(lambda t: TangentSE23(*t))


# ---------------------------------------------------------------- hat / vee


@given(vec3())
def test_hat_vee_round_trip(w):
    np.testing.assert_allclose(vee(hat(w)), w, atol=1e-15)


@given(vec3(), vec3())
def test_hat_is_cross_product(w, x):
    np.testing.assert_allclose(hat(w) @ x, np.cross(w, x), atol=1e-9)


def test_vee_rejects_symmetric_part():
    A = np.array([[0.0, 1.0, 0.0], [-1.0, 0.0, 0.0], [0.0, 0.0, 0.0]])
    A[0, 1] += 1e-6  # break antisymmetry well past the tolerance
    with pytest.raises(InvalidArgumentError):
        vee(A)


def test_psi_worked_example():
    A = np.zeros((3, 3))
    A[0, 1] = 1.0
    np.testing.assert_allclose(psi(A), [0.0, 0.0, -0.5], atol=1e-15)


@given(
    st.lists(st.floats(-5, 5, allow_nan=False), min_size=9, max_size=9).map(
        lambda v: np.array(v).reshape(3, 3)
    ),
    unit3(),
)
def test_inner_product_identity(A, u):
    # <<A, hat(u)>> = 2 u^T psi(A) with <<A,B>> = tr(A^T B)
    lhs = np.trace(A.T @ hat(u))
    rhs = 2.0 * u @ psi(A)
    assert abs(lhs - rhs) < 1e-9 * max(1.0, abs(lhs))


@given(
    st.lists(st.floats(-5, 5, allow_nan=False), min_size=9, max_size=9).map(
        lambda v: np.array(v).reshape(3, 3)
    )
)
def test_proj_antisym_is_antisymmetric_half(A):
    P = proj_antisym(A)
    np.testing.assert_allclose(P + P.T, np.zeros((3, 3)), atol=1e-12)
    np.testing.assert_allclose(P, (A - A.T) / 2, atol=1e-15)


# ------------------------------------------------------------ rotations


def test_angle_axis_half_turn_about_x():
    R = angle_axis_to_rot(AngleAxis(math.pi, E1))
    np.testing.assert_allclose(R, np.diag([1.0, -1.0, -1.0]), atol=1e-15)


def test_angle_axis_quarter_turn_about_z():
    R = angle_axis_to_rot(AngleAxis(math.pi / 2, E3))
    np.testing.assert_allclose(
        R, [[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]], atol=1e-15
    )


def test_angle_axis_rejects_non_unit_axis():
    with pytest.raises(InvalidArgumentError):
        angle_axis_to_rot(AngleAxis(1.0, np.array([1.0, 1.0, 0.0])))


def test_pi_rotation_same_for_both_axis_signs():
    u = np.array([2.0, -1.0, 0.5])
    u = u / np.linalg.norm(u)
    Rp = angle_axis_to_rot(AngleAxis(math.pi, u))
    Rm = angle_axis_to_rot(AngleAxis(math.pi, -u))
    np.testing.assert_allclose(Rp, Rm, atol=1e-12)
    np.testing.assert_allclose(Rp, 2.0 * np.outer(u, u) - np.eye(3), atol=1e-12)


def test_rot_distance_worked_example():
    R = angle_axis_to_rot(AngleAxis(math.pi / 2, E3))
    assert abs(rot_distance(R) - math.sqrt(0.5)) < 1e-12


@given(st.floats(0.0, math.pi), unit3())
def test_rot_distance_angle_identity(theta, u):
    R = angle_axis_to_rot(AngleAxis(theta, u))
    assert abs(rot_distance(R) ** 2 - (1.0 - math.cos(theta)) / 2.0) < 1e-9


def test_rot_distance_clamped():
    # a slightly off-group matrix must not push the value outside [0, 1]
    R = np.diag([-1.0, -1.0, -1.0 - 1e-9])
    assert 0.0 <= rot_distance(R) <= 1.0
    assert rot_distance(np.eye(3) * (1 + 1e-12)) == 0.0


@given(st.floats(0.01, math.pi - 0.01), unit3())
@settings(max_examples=200)
def test_angle_axis_round_trip(theta, u):
    aa = rot_to_angle_axis(angle_axis_to_rot(AngleAxis(theta, u)))
    assert abs(aa.theta - theta) < 1e-9
    # axis recovered up to sign only when theta is exactly pi; here sign is fixed
    np.testing.assert_allclose(aa.axis, u, atol=1e-7)


def test_angle_axis_extraction_near_pi():
    u = np.array([0.6, -0.48, 0.64])
    u = u / np.linalg.norm(u)
    aa = rot_to_angle_axis(angle_axis_to_rot(AngleAxis(math.pi - 1e-9, u)))
    assert abs(aa.theta - (math.pi - 1e-9)) < 1e-7
    assert min(np.linalg.norm(aa.axis - u), np.linalg.norm(aa.axis + u)) < 1e-5


# ------------------------------------------------------------- group ops


@given(poses())
def test_inverse_matches_dense_5x5(X):
    Ti = np.linalg.inv(X.as_matrix())
    np.testing.assert_allclose(se23_inverse(X).as_matrix(), Ti, atol=1e-9)


@given(poses(), poses())
def test_compose_matches_dense_5x5(X1, X2):
    np.testing.assert_allclose(
        se23_compose(X1, X2).as_matrix(), X1.as_matrix() @ X2.as_matrix(), atol=1e-9
    )


@given(poses(), poses(), poses())
@settings(max_examples=60)
def test_group_axioms(X1, X2, X3):
    lhs = se23_compose(se23_compose(X1, X2), X3).as_matrix()
    rhs = se23_compose(X1, se23_compose(X2, X3)).as_matrix()
    np.testing.assert_allclose(lhs, rhs, atol=1e-9 * max(1.0, np.max(np.abs(lhs))))
    e = se23_identity()
    np.testing.assert_allclose(se23_compose(X1, e).as_matrix(), X1.as_matrix(), atol=1e-12)
    np.testing.assert_allclose(se23_compose(e, X1).as_matrix(), X1.as_matrix(), atol=1e-12)
    np.testing.assert_allclose(
        se23_compose(X1, se23_inverse(X1)).as_matrix(), np.eye(5), atol=1e-9
    )


def test_from_matrix_round_trip_and_bottom_rows():
    X = SE23(angle_axis_to_rot(AngleAxis(1.0, E3)), [1.0, 2.0, 3.0], [4.0, 5.0, 6.0])
    Y = SE23.from_matrix(X.as_matrix())
    np.testing.assert_allclose(Y.as_matrix(), X.as_matrix(), atol=0)
    bad = X.as_matrix()
    bad[3, 0] = 1e-6
    with pytest.raises(InvalidArgumentError):
        SE23.from_matrix(bad)


# ----------------------------------------------------------- projections


@given(
    st.lists(st.floats(-5, 5, allow_nan=False), min_size=25, max_size=25).map(
        lambda v: np.array(v).reshape(5, 5)
    )
)
def test_proj_se23_idempotent(A):
    U = proj_se23(A)
    V = proj_se23(U.as_matrix())
    np.testing.assert_allclose(V.as_matrix(), U.as_matrix(), atol=1e-12)


@given(
    st.lists(st.floats(-5, 5, allow_nan=False), min_size=25, max_size=25).map(
        lambda v: np.array(v).reshape(5, 5)
    ),
    tangents(),
)
def test_proj_se23_preserves_inner_product(A, U):
    # <<A, U>> = <<proj(A), U>> for tangent U
    lhs = np.trace(A.T @ U.as_matrix())
    rhs = np.trace(proj_se23(A).as_matrix().T @ U.as_matrix())
    assert abs(lhs - rhs) < 1e-9 * max(1.0, abs(lhs))


@given(
    st.lists(st.floats(-5, 5, allow_nan=False), min_size=25, max_size=25).map(
        lambda v: np.array(v).reshape(5, 5)
    )
)
def test_proj_se23_gains_reduces_to_plain(A):
    U = proj_se23(A)
    V = proj_se23_gains(A, 1.0, np.eye(3), np.eye(3))
    np.testing.assert_allclose(V.as_matrix(), U.as_matrix(), atol=1e-12)


def test_proj_se23_gains_scales_blocks():
    A = np.arange(25, dtype=float).reshape(5, 5)
    Kv = np.diag([2.0, 3.0, 4.0])
    Kp = np.diag([5.0, 6.0, 7.0])
    V = proj_se23_gains(A, 2.5, Kv, Kp)
    np.testing.assert_allclose(V.omega, 2.5 * psi(A[:3, :3]), atol=1e-12)
    np.testing.assert_allclose(V.alpha, Kv @ A[:3, 3], atol=1e-12)
    np.testing.assert_allclose(V.nu, Kp @ A[:3, 4], atol=1e-12)


# -------------------------------------------------------------- adjoint


@given(poses(), tangents())
@settings(max_examples=100)
def test_adjoint_matches_dense_conjugation(X, U):
    dense = X.as_matrix() @ U.as_matrix() @ np.linalg.inv(X.as_matrix())
    got = adjoint(X, U).as_matrix()
    np.testing.assert_allclose(got, dense, atol=1e-9 * max(1.0, np.max(np.abs(dense))))


@given(vec3(), tangents())
def test_adjoint_of_pure_translation_shifts_nu(p_c, U):
    X_c = SE23(np.eye(3), np.zeros(3), p_c)
    V = adjoint(X_c, U)
    np.testing.assert_allclose(V.omega, U.omega, atol=1e-12)
    np.testing.assert_allclose(V.alpha, U.alpha, atol=1e-12)
    np.testing.assert_allclose(V.nu, U.nu - hat(U.omega) @ p_c, atol=1e-9)


# ------------------------------------------------------------------ exp


def test_exp_zero_is_identity():
    X = exp_se23(TangentSE23(np.zeros(3), np.zeros(3), np.zeros(3)))
    np.testing.assert_allclose(X.as_matrix(), np.eye(5), atol=0)


def test_exp_nilpotent_is_exact():
    U = TangentSE23(np.zeros(3), [1.0, -2.0, 3.0], [0.5, 0.25, -0.125])
    X = exp_se23(U)
    np.testing.assert_allclose(X.as_matrix(), np.eye(5) + U.as_matrix(), atol=0)


@given(tangents())
@settings(max_examples=150)
def test_exp_matches_scaling_and_squaring(U):
    dense = scipy.linalg.expm(U.as_matrix())
    got = exp_se23(U).as_matrix()
    np.testing.assert_allclose(got, dense, atol=1e-9 * max(1.0, np.max(np.abs(dense))))


@given(unit3(), st.floats(1e-8, 10.0), vec3(), vec3())
@settings(max_examples=150)
def test_exp_stays_on_group(u, mag, a, n):
    X = exp_se23(TangentSE23(mag * u, a, n))
    R = X.rot
    assert np.max(np.abs(R.T @ R - np.eye(3))) < TOL.on_group
    assert abs(np.linalg.det(R) - 1.0) < TOL.on_group


def test_exp_small_angle_branch_continuity():
    u = np.array([1.0, 0.0, 0.0])
    a = np.array([1.0, 2.0, 3.0])
    below = exp_se23(TangentSE23(0.999e-6 * u, a, a)).as_matrix()
    above = exp_se23(TangentSE23(1.001e-6 * u, a, a)).as_matrix()
    # the inputs differ by 2e-9 in omega, so the outputs may too; anything
    # beyond that scale would indicate a jump between the two branches
    np.testing.assert_allclose(below, above, atol=1e-8)


# ------------------------------------------------- rotation re-projection


@given(rotations())
def test_project_so3_fixes_valid_rotations(R):
    np.testing.assert_allclose(project_so3(R), R, atol=1e-9)


@given(rotations())
def test_project_so3_cleans_small_drift(R):
    D = project_so3(R + 1e-6 * np.arange(9).reshape(3, 3))
    assert np.max(np.abs(D.T @ D - np.eye(3))) < 1e-12
    assert np.linalg.det(D) > 0
    assert np.max(np.abs(D - R)) < 1e-4


# --------------------------------------------------- quaternion conversion


def test_quat_of_identity():
    np.testing.assert_allclose(rot_to_quat(np.eye(3)), [1.0, 0.0, 0.0, 0.0])


def test_quat_quarter_turn_about_z():
    R = angle_axis_to_rot(AngleAxis(math.pi / 2, E3))
    h = math.sqrt(0.5)
    np.testing.assert_allclose(rot_to_quat(R), [h, 0.0, 0.0, h], atol=1e-15)


@given(rotations())
@settings(max_examples=200)
def test_quat_round_trip(R):
    q = rot_to_quat(R)
    assert abs(np.linalg.norm(q) - 1.0) < 1e-12
    assert q[0] >= 0.0
    np.testing.assert_allclose(quat_to_rot(q), R, atol=1e-12)


@given(unit3())
def test_quat_round_trip_near_pi(u):
    # the trace formula breaks down here; the largest-component pick must not
    R = angle_axis_to_rot(AngleAxis(math.pi - 1e-7, u))
    np.testing.assert_allclose(quat_to_rot(rot_to_quat(R)), R, atol=1e-12)


def test_quat_to_rot_normalizes_rounded_text():
    q = np.array([0.70710678, 0.0, 0.0, 0.70710678])  # 8 digits, as in a CSV
    R = quat_to_rot(q)
    np.testing.assert_allclose(R.T @ R, np.eye(3), atol=1e-15)


def test_quat_to_rot_rejects_zero_norm():
    with pytest.raises(InvalidArgumentError):
        quat_to_rot(np.zeros(4))
