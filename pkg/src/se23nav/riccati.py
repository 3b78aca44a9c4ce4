"""Continuous Riccati equation, gain extraction and observability tools.

The variable-gain observers carry a symmetric positive definite matrix P
solving

    dP/dt = A(t) P + P A(t)^T - P C^T Q C P + V

in a frame-decoupled coordinate set, with A built from the (bias
corrected) body angular rate and C = [I3 0 ...].  Three state layouts
exist:

  no-bias-6     (dp, dv),           A = [[-w^x, I], [0, -w^x]]
  gyro-bias-6   same layout, but A is evaluated at w_y - bhat_w
  full-bias-9   (dp, dv, db_a),     A = [[-w^x, I, 0], [0, -w^x, I], [0, 0, 0]]

Integration uses classical RK4 with symmetrization after every step; a
failed Cholesky factorization raises ``RiccatiDivergenceError`` carrying
the simulated time.  No automatic resets are attempted.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Union

import numpy as np

from .errors import InvalidArgumentError, RiccatiDivergenceError
from .liegroup import hat

__all__ = [
    "NO_BIAS_6",
    "GYRO_BIAS_6",
    "FULL_BIAS_9",
    "VARIANT_DIMS",
    "CreState",
    "build_a_matrix",
    "c_matrix",
    "cre_step",
    "cre_open_step",
    "measurement_update",
    "continuous_gain_matrix",
    "extract_gains",
    "gains_from_columns",
    "transition_factorization",
    "observability_gramian",
    "observability_matrix_check",
]

NO_BIAS_6 = "no-bias-6"
GYRO_BIAS_6 = "gyro-bias-6"
FULL_BIAS_9 = "full-bias-9"

VARIANT_DIMS = {NO_BIAS_6: 6, GYRO_BIAS_6: 6, FULL_BIAS_9: 9}

MatrixOrFn = Union[np.ndarray, Callable[[float], np.ndarray]]


def _eval(m: MatrixOrFn, t: float) -> np.ndarray:
    return m(t) if callable(m) else m


@dataclass
class CreState:
    """Riccati solution P together with its noise weights V and Q.

    V and Q may be constant arrays or callables of time.  P is kept
    symmetric by the stepping functions; consumers may rely on that.
    """

    P: np.ndarray
    V: MatrixOrFn
    Q: MatrixOrFn

    def __post_init__(self):
        self.P = np.asarray(self.P, dtype=float)
        n = self.P.shape[0]
        if self.P.shape != (n, n) or n not in (6, 9):
            raise InvalidArgumentError(f"P must be 6x6 or 9x9, got {self.P.shape}")

    @property
    def dim(self) -> int:
        return self.P.shape[0]


def build_a_matrix(variant: str, omega) -> np.ndarray:
    """State matrix of the error dynamics for the given layout.

    omega is the effective body angular rate: the raw gyro reading for
    the no-bias layout, the bias-corrected one otherwise.
    """
    w0, w1, w2 = (float(x) for x in np.asarray(omega, dtype=float))
    if variant in (NO_BIAS_6, GYRO_BIAS_6):
        A = np.zeros((6, 6))
    elif variant == FULL_BIAS_9:
        A = np.zeros((9, 9))
        A[3, 6] = A[4, 7] = A[5, 8] = 1.0
    else:
        raise InvalidArgumentError(f"unknown Riccati variant {variant!r}")
    # both leading diagonal blocks hold -hat(omega)
    for r in (0, 3):
        A[r, r + 1] = w2
        A[r, r + 2] = -w1
        A[r + 1, r] = -w2
        A[r + 1, r + 2] = w0
        A[r + 2, r] = w1
        A[r + 2, r + 1] = -w0
    A[0, 3] = A[1, 4] = A[2, 5] = 1.0
    return A


def c_matrix(variant: str) -> np.ndarray:
    n = VARIANT_DIMS.get(variant)
    if n is None:
        raise InvalidArgumentError(f"unknown Riccati variant {variant!r}")
    C = np.zeros((3, n))
    C[:, :3] = np.eye(3)
    return C


def _check_spd(P: np.ndarray, t: float) -> None:
    try:
        np.linalg.cholesky(P)
    except np.linalg.LinAlgError as exc:
        raise RiccatiDivergenceError(t) from exc


def _rk4_matrix(P, rhs, dt, t):
    k1 = rhs(t, P)
    k2 = rhs(t + 0.5 * dt, P + 0.5 * dt * k1)
    k3 = rhs(t + 0.5 * dt, P + 0.5 * dt * k2)
    k4 = rhs(t + dt, P + dt * k3)
    return P + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def cre_step(state: CreState, A, dt: float, t: float = 0.0) -> CreState:
    """One RK4 step of the full Riccati equation with A frozen over the step.

    The result is symmetrized and checked for positive definiteness.
    """
    A = np.asarray(A, dtype=float)
    n = state.dim
    C = np.zeros((3, n))
    C[:, :3] = np.eye(3)

    def rhs(s, P):
        G = P[:, :3] @ _eval(state.Q, s) @ P[:3, :]  # P C^T Q C P
        return A @ P + P @ A.T - G + _eval(state.V, s)

    P = _rk4_matrix(state.P, rhs, dt, t)
    P = 0.5 * (P + P.T)
    _check_spd(P, t + dt)
    return CreState(P=P, V=state.V, Q=state.Q)


def cre_open_step(state: CreState, A, dt: float, t: float = 0.0) -> CreState:
    """RK4 step of the open (prediction-only) equation dP = AP + PA^T + V."""
    A = np.asarray(A, dtype=float)

    def rhs(s, P):
        return A @ P + P @ A.T + _eval(state.V, s)

    P = _rk4_matrix(state.P, rhs, dt, t)
    P = 0.5 * (P + P.T)
    _check_spd(P, t + dt)
    return CreState(P=P, V=state.V, Q=state.Q)


def measurement_update(state: CreState, t: float = 0.0):
    """Discrete gain and covariance update at a measurement instant.

    Returns (L, new_state) with L = P C^T (C P C^T + Q^{-1})^{-1}.  The
    covariance is propagated in the symmetric product form
    (I - L C) P (I - L C)^T + L Q^{-1} L^T, which equals P - L C P for
    this gain but stays positive definite under strong updates where
    the plain difference would cancel to roundoff.
    """
    P = state.P
    Qinv = np.linalg.inv(_eval(state.Q, t))
    S = P[:3, :3] + Qinv
    L = np.linalg.solve(S.T, P[:, :3].T).T  # P C^T S^{-1}
    ILC = np.eye(state.dim)
    ILC[:, :3] -= L
    P_new = ILC @ P @ ILC.T + L @ Qinv @ L.T
    P_new = 0.5 * (P_new + P_new.T)
    _check_spd(P_new, t)
    return L, CreState(P=P_new, V=state.V, Q=state.Q)


def continuous_gain_matrix(state: CreState, t: float = 0.0) -> np.ndarray:
    """Continuous-time gain L = P C^T Q (an n x 3 block column)."""
    return state.P[:, :3] @ _eval(state.Q, t)


def gains_from_columns(L, R_hat, k_c: float):
    """Map a stacked gain column into the frame-aligned 3x3 observer gains.

    Rows of L come in 3x3 blocks ordered (position, velocity[, accel
    bias]); each maps through K = (1/k_c) R_hat L_i R_hat^T.  Returns
    (K_p, K_v) for a 6-row L and (K_p, K_v, K_a) for a 9-row one.  Used
    directly by the discrete measurement update, where L comes from
    ``measurement_update`` rather than from P C^T Q.
    """
    L = np.asarray(L, dtype=float)
    R_hat = np.asarray(R_hat, dtype=float)
    if L.shape not in ((6, 3), (9, 3)):
        raise InvalidArgumentError(f"L must be (6, 3) or (9, 3), got {L.shape}")
    blocks = [
        (R_hat @ L[i : i + 3] @ R_hat.T) / k_c for i in range(0, L.shape[0], 3)
    ]
    return tuple(blocks)


def extract_gains(P, Q, variant: str, R_hat, k_c: float):
    """Continuous-time observer gains from the Riccati solution.

    Forms L = P C^T Q and splits it into the frame-aligned gains
    (K_p, K_v) or (K_p, K_v, K_a) depending on the layout.
    """
    n = VARIANT_DIMS.get(variant)
    if n is None:
        raise InvalidArgumentError(f"unknown Riccati variant {variant!r}")
    P = np.asarray(P, dtype=float)
    if P.shape != (n, n):
        raise InvalidArgumentError(f"P must be {n}x{n} for {variant}, got {P.shape}")
    return gains_from_columns(P[:, :3] @ np.asarray(Q, dtype=float), R_hat, k_c)


def _integrate_rotation(omega_fn, t0: float, t1: float, dt: float) -> np.ndarray:
    """Solve dW/dt = -hat(omega(t)) W from t0 to t1, W(t0) = I (RK4)."""
    span = t1 - t0
    if span == 0.0:
        return np.eye(3)
    n = max(1, int(round(abs(span) / dt)))
    h = span / n
    W = np.eye(3)
    t = t0
    for _ in range(n):
        k1 = -hat(omega_fn(t)) @ W
        k2 = -hat(omega_fn(t + 0.5 * h)) @ (W + 0.5 * h * k1)
        k3 = -hat(omega_fn(t + 0.5 * h)) @ (W + 0.5 * h * k2)
        k4 = -hat(omega_fn(t + h)) @ (W + h * k3)
        W = W + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        t += h
    return W


def transition_factorization(omega_fn, t: float, tau: float, dt: float = 1e-3) -> np.ndarray:
    """Transition matrix of the 6-dimensional error dynamics, factorized.

    The rotational part of A commutes out, leaving

        Phi(t, tau) = [[W, (t - tau) W], [0, W]]

    with W the rotation solving dW/ds = -hat(omega(s)) W from tau to t.
    Only the rotation is integrated numerically, so the factorization is
    cheap and exact in the nilpotent part.
    """
    W = _integrate_rotation(omega_fn, tau, t, dt)
    Phi = np.zeros((6, 6))
    Phi[:3, :3] = W
    Phi[3:, 3:] = W
    Phi[:3, 3:] = (t - tau) * W
    return Phi


def observability_gramian(
    variant: str,
    omega_fn,
    t0: float,
    window: float,
    subintervals: int = 64,
    dt: float = 1e-3,
):
    """Windowed observability Gramian of the pair (A(t), C).

        W = (1/T) int_{t0}^{t0+T} Phi(s, t0)^T C^T C Phi(s, t0) ds

    evaluated with composite Simpson quadrature.  The 6-dimensional
    layouts use the factorized transition matrix; the 9-dimensional one
    integrates the transition ODE directly.  Returns the pair
    (W, lambda_min); a positive minimum eigenvalue is the uniform
    observability margin over the window.
    """
    if window <= 0:
        raise InvalidArgumentError("window must be positive")
    if subintervals % 2 != 0:
        raise InvalidArgumentError("subintervals must be even for Simpson quadrature")
    n = VARIANT_DIMS.get(variant)
    if n is None:
        raise InvalidArgumentError(f"unknown Riccati variant {variant!r}")

    h = window / subintervals
    nodes = [t0 + i * h for i in range(subintervals + 1)]
    weights = np.ones(subintervals + 1)
    weights[1:-1:2] = 4.0
    weights[2:-1:2] = 2.0
    weights *= h / 3.0

    acc = np.zeros((n, n))
    if n == 6:
        W_rot = np.eye(3)
        for i, s in enumerate(nodes):
            if i > 0:
                W_rot = _integrate_rotation(omega_fn, nodes[i - 1], s, dt) @ W_rot
            top = np.hstack([W_rot, (s - t0) * W_rot])  # C Phi(s, t0)
            acc += weights[i] * (top.T @ top)
    else:
        Phi = np.eye(9)
        for i, s in enumerate(nodes):
            if i > 0:
                Phi = _propagate_phi(variant, omega_fn, nodes[i - 1], s, dt) @ Phi
            top = Phi[:3, :]  # C Phi(s, t0)
            acc += weights[i] * (top.T @ top)
    G = acc / window
    return G, float(np.linalg.eigvalsh(G).min())


def _propagate_phi(variant, omega_fn, t0, t1, dt):
    """Transition matrix over [t0, t1] by direct RK4 on dPhi = A(t) Phi."""
    span = t1 - t0
    steps = max(1, int(round(abs(span) / dt)))
    h = span / steps
    n = VARIANT_DIMS[variant]
    Phi = np.eye(n)
    t = t0
    for _ in range(steps):
        k1 = build_a_matrix(variant, omega_fn(t)) @ Phi
        k2 = build_a_matrix(variant, omega_fn(t + 0.5 * h)) @ (Phi + 0.5 * h * k1)
        k3 = build_a_matrix(variant, omega_fn(t + 0.5 * h)) @ (Phi + 0.5 * h * k2)
        k4 = build_a_matrix(variant, omega_fn(t + h)) @ (Phi + h * k3)
        Phi = Phi + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        t += h
    return Phi


def observability_matrix_check(omega, omega_dot, bhat_omega=None, bhat_omega_dot=None) -> float:
    """Determinant of the 9x9 differential observability matrix.

    Built from the output map and its first two differential rows for
    the full-bias layout; block unipotent by construction, so the
    determinant equals one for every effective rate.  Returns the
    numerically computed determinant so callers can assert that.
    """
    w = np.asarray(omega, dtype=float)
    wd = np.asarray(omega_dot, dtype=float)
    if bhat_omega is not None:
        w = w - np.asarray(bhat_omega, dtype=float)
    if bhat_omega_dot is not None:
        wd = wd - np.asarray(bhat_omega_dot, dtype=float)
    wx = hat(w)
    O = np.zeros((9, 9))
    O[:3, :3] = np.eye(3)
    O[3:6, :3] = -wx
    O[3:6, 3:6] = np.eye(3)
    O[6:, :3] = wx @ wx - hat(wd)
    O[6:, 3:6] = -2.0 * wx
    O[6:, 6:] = np.eye(3)
    return float(np.linalg.det(O))
