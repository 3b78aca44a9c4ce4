"""Landmark-driven navigation observers on the extended pose group.

Five variants share one innovation path and one jump rule:

  fixed-gain             constant scalar translation gains, no bias states
  fixed-gain-gyro-bias   fixed gains plus the gyro-bias integrator
  cre                    translation gains from the 6-d Riccati solution
  cre-gyro-bias          Riccati gains plus the gyro-bias integrator
  cre-full-bias          9-d Riccati solution, gyro and accelerometer bias

The continuous flow integrates

    d/dt X_hat = f(X_hat, omega_y - bhat_w, a_y - bhat_a) - Delta X_hat

with RK4 and re-projects the rotation onto SO(3) after every step; the
correction tangent Delta is built from raw landmark residuals (no
denoising).  Riccati-gain variants co-integrate P and refresh the
translation gains at every integration stage.

When the measured cost gap mu_q reaches the configured threshold, the
estimate is premultiplied by the inverse of the selected reset element
(attitude flipped, velocity and position remapped consistently, biases
and P untouched).  Setting ``jumps_enabled`` False yields the purely
continuous observer used in the equilibrium studies.

``predict_step`` plus ``discrete_update`` implement the multi-rate
scheme: dead-reckoning with open-loop covariance between landmark
frames and a multiplicative exp-map correction at each frame.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np

from .errors import InvalidArgumentError, JumpCycleError, RiccatiDivergenceError
from .landmarks import (
    LandmarkSet,
    TransformationSet,
    gamma_select,
    hybrid_gap,
    mu_q,
)
from .liegroup import (
    SE23,
    TangentSE23,
    adjoint,
    exp_se23,
    hat,
    proj_se23,
    project_so3,
    psi,
    se23_compose,
    se23_identity,
    se23_inverse,
)
from .riccati import (
    FULL_BIAS_9,
    GYRO_BIAS_6,
    NO_BIAS_6,
    CreState,
    build_a_matrix,
    gains_from_columns,
    measurement_update,
)

__all__ = [
    "FIXED_GAIN",
    "FIXED_GAIN_GYRO_BIAS",
    "CRE",
    "CRE_GYRO_BIAS",
    "CRE_FULL_BIAS",
    "VARIANTS",
    "GainSet",
    "RiccatiSettings",
    "ObserverConfig",
    "ObserverState",
    "Innovation",
    "estimates_gyro_bias",
    "estimates_accel_bias",
    "uses_riccati_gains",
    "riccati_layout",
    "initial_state",
    "compute_innovation",
    "compute_innovation_stacked",
    "flow_step",
    "predict_step",
    "should_jump",
    "jump_step",
    "apply_jumps",
    "correction_update",
    "discrete_update",
]

FIXED_GAIN = "fixed-gain"
FIXED_GAIN_GYRO_BIAS = "fixed-gain-gyro-bias"
CRE = "cre"
CRE_GYRO_BIAS = "cre-gyro-bias"
CRE_FULL_BIAS = "cre-full-bias"

VARIANTS = (FIXED_GAIN, FIXED_GAIN_GYRO_BIAS, CRE, CRE_GYRO_BIAS, CRE_FULL_BIAS)

_RICCATI_LAYOUT = {
    CRE: NO_BIAS_6,
    CRE_GYRO_BIAS: GYRO_BIAS_6,
    CRE_FULL_BIAS: FULL_BIAS_9,
}
_GYRO_BIAS_VARIANTS = frozenset({FIXED_GAIN_GYRO_BIAS, CRE_GYRO_BIAS, CRE_FULL_BIAS})

ArrayOrFn = Union[np.ndarray, Callable[[float], np.ndarray]]


def estimates_gyro_bias(variant: str) -> bool:
    return variant in _GYRO_BIAS_VARIANTS


def estimates_accel_bias(variant: str) -> bool:
    return variant == CRE_FULL_BIAS


def uses_riccati_gains(variant: str) -> bool:
    return variant in _RICCATI_LAYOUT


def riccati_layout(variant: str) -> Optional[str]:
    """Riccati state layout tag for a variant, or None for fixed gains."""
    return _RICCATI_LAYOUT.get(variant)


def _at(value: ArrayOrFn, t: float):
    return value(t) if callable(value) else value


@dataclass(frozen=True, eq=False)
class GainSet:
    """Rotation gain and 3x3 translation gain matrices for one instant."""

    k_r: float
    K_v: np.ndarray
    K_p: np.ndarray
    K_a: Optional[np.ndarray] = None


@dataclass(frozen=True, eq=False)
class RiccatiSettings:
    """Initial covariance and noise weights for the Riccati-gain variants.

    V and Q may be constant arrays or callables of time, matching
    CreState.
    """

    P0: np.ndarray
    V: Union[np.ndarray, Callable[[float], np.ndarray]]
    Q: Union[np.ndarray, Callable[[float], np.ndarray]]


@dataclass(frozen=True, eq=False)
class ObserverConfig:
    """Immutable description of one observer instance.

    Scalar gains are shared by all variants; the fixed-gain variants use
    K_v = k_v I and K_p = k_p I while the Riccati variants derive the
    translation gains from P.  The jump rule needs both a transformation
    set and a threshold; ``jumps_enabled`` False drops the rule entirely
    and the two fields may then be omitted.
    """

    variant: str
    landmarks: LandmarkSet
    k_r: float = 1.0
    k_v: float = 3.0
    k_p: float = 3.0
    k_omega: float = 1.0
    gravity: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, -9.81]))
    transformations: Optional[TransformationSet] = None
    delta: Optional[float] = None
    jumps_enabled: bool = True
    riccati: Optional[RiccatiSettings] = None

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise InvalidArgumentError(f"unknown observer variant {self.variant!r}")
        for name in ("k_r", "k_v", "k_p", "k_omega"):
            if not getattr(self, name) > 0.0:
                raise InvalidArgumentError(f"{name} must be positive")
        g = np.asarray(self.gravity, dtype=float)
        if g.shape != (3,):
            raise InvalidArgumentError(f"gravity must have shape (3,), got {g.shape}")
        object.__setattr__(self, "gravity", g)
        if self.jumps_enabled:
            if self.transformations is None or self.delta is None:
                raise InvalidArgumentError(
                    "jumps_enabled requires a transformation set and a delta"
                )
            if not np.allclose(self.transformations.p_c, self.landmarks.p_c, atol=1e-9):
                raise InvalidArgumentError(
                    "transformation set was built for a different landmark centroid"
                )
            # re-derives the admissible range and rejects delta outside it
            hybrid_gap(self.landmarks, self.transformations, delta=self.delta)
        layout = riccati_layout(self.variant)
        if layout is not None:
            if self.riccati is None:
                raise InvalidArgumentError(
                    f"variant {self.variant!r} needs RiccatiSettings"
                )
            n = 9 if layout == FULL_BIAS_9 else 6
            P0 = np.asarray(self.riccati.P0, dtype=float)
            if P0.shape != (n, n):
                raise InvalidArgumentError(
                    f"P0 must be {n}x{n} for variant {self.variant!r}, got {P0.shape}"
                )
        elif self.riccati is not None:
            raise InvalidArgumentError(
                f"variant {self.variant!r} takes no RiccatiSettings"
            )


@dataclass
class ObserverState:
    """Estimate, bias states, covariance and the hybrid clock (t, j)."""

    X: SE23
    b_omega: np.ndarray
    b_a: np.ndarray
    cre: Optional[CreState] = None
    t: float = 0.0
    j: int = 0

    @property
    def jump_count(self) -> int:
        return self.j


def initial_state(
    config: ObserverConfig,
    X0: Optional[SE23] = None,
    b_omega0=None,
    b_a0=None,
    t0: float = 0.0,
) -> ObserverState:
    """Build a starting state consistent with the variant.

    Bias estimates default to zero; passing a nonzero value for a bias
    the variant does not estimate is rejected rather than silently
    frozen.
    """
    X0 = se23_identity() if X0 is None else X0
    bw = np.zeros(3) if b_omega0 is None else np.asarray(b_omega0, dtype=float)
    ba = np.zeros(3) if b_a0 is None else np.asarray(b_a0, dtype=float)
    if bw.shape != (3,) or ba.shape != (3,):
        raise InvalidArgumentError("bias initial values must have shape (3,)")
    if not estimates_gyro_bias(config.variant) and np.any(bw != 0.0):
        raise InvalidArgumentError(
            f"variant {config.variant!r} does not estimate the gyro bias"
        )
    if not estimates_accel_bias(config.variant) and np.any(ba != 0.0):
        raise InvalidArgumentError(
            f"variant {config.variant!r} does not estimate the accelerometer bias"
        )
    cre = None
    if config.riccati is not None:
        cre = CreState(
            P=np.array(config.riccati.P0, dtype=float),
            V=config.riccati.V,
            Q=config.riccati.Q,
        )
    return ObserverState(X=X0, b_omega=bw, b_a=ba, cre=cre, t=t0, j=0)


@dataclass(frozen=True, eq=False)
class Innovation:
    """Measured correction data for one instant.

    delta_r stacks the weighted outer products of the landmark
    residuals against the centered landmark positions and delta_p is
    their weighted sum; both are gain-free.  delta is the correction
    tangent entering the flow as d/dt X_hat = f(...) - delta X_hat.
    """

    delta: TangentSE23
    delta_r: np.ndarray
    delta_p: np.ndarray


def _residual_sums(X_hat: SE23, lms: LandmarkSet, y_meas):
    y = np.asarray(y_meas, dtype=float)
    ytil = lms.points - X_hat.pos - y @ X_hat.rot.T
    return ytil.T @ lms.weighted_centered, lms.weights @ ytil


def compute_innovation(X_hat: SE23, lms: LandmarkSet, y_meas, gains: GainSet) -> Innovation:
    """Correction tangent from one set of landmark measurements.

    y_meas holds the body-frame measurement rows aligned with
    lms.points.  Works unchanged under measurement noise; the residuals
    enter raw.
    """
    delta_r, delta_p = _residual_sums(X_hat, lms, y_meas)
    w = gains.k_r * psi(delta_r)  # vee of the scaled antisymmetric part
    delta = TangentSE23(
        omega=-w,
        alpha=-(gains.K_v @ delta_p),
        nu=-(gains.K_p @ delta_p - np.cross(w, lms.p_c)),
    )
    return Innovation(delta=delta, delta_r=delta_r, delta_p=delta_p)


def compute_innovation_stacked(
    X_hat: SE23, lms: LandmarkSet, y_meas, k_r: float, k_v: float, k_p: float
) -> TangentSE23:
    """Reference correction tangent via stacked homogeneous coordinates.

    Assembles the full 5x5 product of homogeneous landmark and
    measurement columns with the weight and gain matrices, projects it
    onto the algebra and maps it through the centroid-frame adjoint.
    Slower than ``compute_innovation`` and restricted to scalar
    translation gains; kept as an independent cross-check path.
    """
    n = len(lms)
    r = np.zeros((5, n))
    r[:3] = lms.points.T
    r[4] = 1.0
    b = np.zeros((5, n))
    b[:3] = np.asarray(y_meas, dtype=float).T
    b[4] = 1.0
    K_n = np.diag(lms.weights)
    K = np.zeros((5, 5))
    K[:3, :3] = k_r * np.eye(3)
    K[4, 3] = k_v
    K[4, 4] = k_p
    X_c = SE23(np.eye(3), np.zeros(3), lms.p_c)
    C_inv = se23_inverse(X_c).as_matrix()
    E = C_inv @ (r - X_hat.as_matrix() @ b) @ K_n @ r.T @ C_inv.T
    U = adjoint(X_c, proj_se23(E @ K))
    return TangentSE23(-U.omega, -U.alpha, -U.nu)


def _fixed_gainset(config: ObserverConfig, scale: float = 1.0) -> GainSet:
    return GainSet(
        k_r=config.k_r * scale,
        K_v=config.k_v * scale * np.eye(3),
        K_p=config.k_p * scale * np.eye(3),
    )


def _stage_gains(config: ObserverConfig, R, P, Q_now) -> GainSet:
    """Gains at one integration stage; Riccati variants read them off P."""
    if P is None:
        return _fixed_gainset(config)
    blocks = gains_from_columns(P[:, :3] @ Q_now, R, config.landmarks.k_c)
    K_a = blocks[2] if len(blocks) == 3 else None
    return GainSet(k_r=config.k_r, K_v=blocks[1], K_p=blocks[0], K_a=K_a)


def _check_spd(P: np.ndarray, t: float) -> np.ndarray:
    P = 0.5 * (P + P.T)
    try:
        np.linalg.cholesky(P)
    except np.linalg.LinAlgError as exc:
        raise RiccatiDivergenceError(t) from exc
    return P


def flow_step(
    state: ObserverState,
    omega_y: ArrayOrFn,
    accel_y: ArrayOrFn,
    dt: float,
    config: ObserverConfig,
    measurements: ArrayOrFn,
) -> ObserverState:
    """One RK4 step of the closed-loop observer flow.

    omega_y, accel_y and measurements may be plain arrays (held constant
    over the step) or callables of time, evaluated at the RK4 stage
    times.  Riccati-gain variants co-integrate P with the quadratic
    term.  The rotation estimate is re-orthonormalized by polar
    projection after the combination step.
    """
    lms = config.landmarks
    gyro_bias = estimates_gyro_bias(config.variant)
    accel_bias = estimates_accel_bias(config.variant)
    layout = riccati_layout(config.variant)
    cre = state.cre
    t0 = state.t

    def rates(t, R, v, p, bw, ba, P, w_y, a_y, y):
        w_eff = w_y - bw
        a_eff = a_y - ba
        Q_now = _at(cre.Q, t) if cre is not None else None
        gains = _stage_gains(config, R, P, Q_now)
        delta_r, delta_p = _residual_sums(SE23(R, v, p), lms, y)
        Pa = gains.k_r * 0.5 * (delta_r - delta_r.T)
        dR = R @ hat(w_eff) + Pa @ R
        dv = config.gravity + R @ a_eff + Pa @ v + gains.K_v @ delta_p
        dp = v + Pa @ (p - lms.p_c) + gains.K_p @ delta_p
        dbw = -config.k_omega * (R.T @ psi(delta_r)) if gyro_bias else None
        dba = -(R.T @ (gains.K_a @ delta_p)) if accel_bias else None
        dP = None
        if P is not None:
            A = build_a_matrix(layout, w_eff)
            dP = A @ P + P @ A.T - P[:, :3] @ Q_now @ P[:3, :] + _at(cre.V, t)
        return (dR, dv, dp, dbw, dba, dP)

    def shift(base, k, c):
        return tuple(
            b if d is None else b + c * d for b, d in zip(base, k)
        )

    y0 = (
        state.X.rot,
        state.X.vel,
        state.X.pos,
        state.b_omega,
        state.b_a,
        cre.P if cre is not None else None,
    )
    half = t0 + 0.5 * dt
    in0 = (_at(omega_y, t0), _at(accel_y, t0), _at(measurements, t0))
    inh = (_at(omega_y, half), _at(accel_y, half), _at(measurements, half))
    in1 = (_at(omega_y, t0 + dt), _at(accel_y, t0 + dt), _at(measurements, t0 + dt))

    k1 = rates(t0, *y0, *in0)
    k2 = rates(half, *shift(y0, k1, 0.5 * dt), *inh)
    k3 = rates(half, *shift(y0, k2, 0.5 * dt), *inh)
    k4 = rates(t0 + dt, *shift(y0, k3, dt), *in1)

    out = []
    for b, d1, d2, d3, d4 in zip(y0, k1, k2, k3, k4):
        if d1 is None:
            out.append(b)
        else:
            out.append(b + (dt / 6.0) * (d1 + 2.0 * d2 + 2.0 * d3 + d4))
    R_new, v_new, p_new, bw_new, ba_new, P_new = out

    cre_new = None
    if cre is not None:
        P_new = _check_spd(P_new, t0 + dt)
        cre_new = CreState(P=P_new, V=cre.V, Q=cre.Q)
    return ObserverState(
        X=SE23(project_so3(R_new), v_new, p_new),
        b_omega=bw_new,
        b_a=ba_new,
        cre=cre_new,
        t=t0 + dt,
        j=state.j,
    )


def predict_step(
    state: ObserverState,
    omega_y: ArrayOrFn,
    accel_y: ArrayOrFn,
    dt: float,
    config: ObserverConfig,
) -> ObserverState:
    """Dead-reckoning step between landmark frames.

    Integrates the inertial kinematics with the bias-corrected inputs
    and the open-loop covariance flow (no quadratic term, no landmark
    correction); biases are held constant.
    """
    layout = riccati_layout(config.variant)
    cre = state.cre
    t0 = state.t
    bw, ba = state.b_omega, state.b_a

    def rates(t, R, v, p, P, w_y, a_y):
        w_eff = w_y - bw
        dR = R @ hat(w_eff)
        dv = config.gravity + R @ (a_y - ba)
        dP = None
        if P is not None:
            A = build_a_matrix(layout, w_eff)
            dP = A @ P + P @ A.T + _at(cre.V, t)
        return (dR, dv, v, dP)

    y0 = (
        state.X.rot,
        state.X.vel,
        state.X.pos,
        cre.P if cre is not None else None,
    )
    half = t0 + 0.5 * dt
    in0 = (_at(omega_y, t0), _at(accel_y, t0))
    inh = (_at(omega_y, half), _at(accel_y, half))
    in1 = (_at(omega_y, t0 + dt), _at(accel_y, t0 + dt))

    def shift(base, k, c):
        return tuple(b if d is None else b + c * d for b, d in zip(base, k))

    k1 = rates(t0, *y0, *in0)
    k2 = rates(half, *shift(y0, k1, 0.5 * dt), *inh)
    k3 = rates(half, *shift(y0, k2, 0.5 * dt), *inh)
    k4 = rates(t0 + dt, *shift(y0, k3, dt), *in1)
    out = [
        b if d1 is None else b + (dt / 6.0) * (d1 + 2.0 * d2 + 2.0 * d3 + d4)
        for b, d1, d2, d3, d4 in zip(y0, k1, k2, k3, k4)
    ]
    R_new, v_new, p_new, P_new = out

    cre_new = None
    if cre is not None:
        P_new = _check_spd(P_new, t0 + dt)
        cre_new = CreState(P=P_new, V=cre.V, Q=cre.Q)
    return ObserverState(
        X=SE23(project_so3(R_new), v_new, p_new),
        b_omega=bw,
        b_a=ba,
        cre=cre_new,
        t=t0 + dt,
        j=state.j,
    )


def should_jump(state: ObserverState, measurements: ArrayOrFn, config: ObserverConfig) -> bool:
    """True when the measured cost gap reaches the threshold.

    The tie mu_q = delta jumps, so repeated evaluation at a fixed state
    either keeps jumping toward lower cost or settles strictly below
    the threshold.
    """
    if not config.jumps_enabled:
        return False
    y = _at(measurements, state.t)
    return mu_q(state.X, config.landmarks, y, config.transformations) >= config.delta


def jump_step(state: ObserverState, measurements: ArrayOrFn, config: ObserverConfig) -> ObserverState:
    """Apply one reset: premultiply by the selected element's inverse.

    Biases and covariance pass through unchanged; the jump counter
    increments.  Callers normally gate this behind ``should_jump``; the
    map itself is total.
    """
    if config.transformations is None:
        raise InvalidArgumentError("jump_step needs a transformation set")
    y = _at(measurements, state.t)
    X_q = gamma_select(state.X, config.landmarks, y, config.transformations)
    X_new = se23_compose(se23_inverse(X_q), state.X)
    return ObserverState(
        X=X_new,
        b_omega=state.b_omega,
        b_a=state.b_a,
        cre=state.cre,
        t=state.t,
        j=state.j + 1,
    )


def apply_jumps(state: ObserverState, measurements: ArrayOrFn, config: ObserverConfig) -> ObserverState:
    """Jump until the gap falls below the threshold, at most once per candidate.

    The reset strictly lowers the alignment cost under the threshold
    contract, so needing more than one pass over the candidate set in a
    single instant indicates a mis-configured threshold and raises
    JumpCycleError.
    """
    if not config.jumps_enabled:
        return state
    y = _at(measurements, state.t)
    for _ in range(len(config.transformations)):
        if not should_jump(state, y, config):
            return state
        state = jump_step(state, y, config)
    if should_jump(state, y, config):
        raise JumpCycleError(
            f"reset cycle at t={state.t:.6f}: cost gap still at or above "
            f"delta={config.delta} after {len(config.transformations)} resets"
        )
    return state


def correction_update(
    state: ObserverState,
    measurements,
    config: ObserverConfig,
    frame_dt: Optional[float] = None,
) -> ObserverState:
    """Frame correction without the jump rule (see discrete_update).

    Split out so simulation drivers can interleave their own jump
    bookkeeping between the correction and the resets.
    """
    y = _at(measurements, state.t)
    R_pred = state.X.rot
    cre_new = state.cre
    if uses_riccati_gains(config.variant):
        L, cre_new = measurement_update(state.cre, state.t)
        blocks = gains_from_columns(L, R_pred, config.landmarks.k_c)
        K_a = blocks[2] if len(blocks) == 3 else None
        gains = GainSet(k_r=config.k_r, K_v=blocks[1], K_p=blocks[0], K_a=K_a)
        k_omega_eff = config.k_omega
    else:
        if frame_dt is None or not frame_dt > 0.0:
            raise InvalidArgumentError(
                "fixed-gain variants need a positive frame_dt to discretize the gains"
            )
        gains = _fixed_gainset(config, scale=frame_dt)
        k_omega_eff = config.k_omega * frame_dt

    innov = compute_innovation(state.X, config.landmarks, y, gains)
    minus_delta = TangentSE23(
        -innov.delta.omega, -innov.delta.alpha, -innov.delta.nu
    )
    X_new = se23_compose(exp_se23(minus_delta), state.X)
    bw_new = state.b_omega
    ba_new = state.b_a
    if estimates_gyro_bias(config.variant):
        bw_new = state.b_omega - k_omega_eff * (R_pred.T @ psi(innov.delta_r))
    if estimates_accel_bias(config.variant):
        ba_new = state.b_a - R_pred.T @ (gains.K_a @ innov.delta_p)
    return ObserverState(
        X=X_new,
        b_omega=bw_new,
        b_a=ba_new,
        cre=cre_new,
        t=state.t,
        j=state.j,
    )


def discrete_update(
    state: ObserverState,
    measurements,
    config: ObserverConfig,
    frame_dt: Optional[float] = None,
) -> ObserverState:
    """Measurement-frame update of the multi-rate scheme.

    Riccati variants compute the discrete gain L from the predicted
    covariance, apply the multiplicative correction exp(-Delta) to the
    estimate, update the bias states from the same innovation, contract
    the covariance and finally evaluate the jump rule.  Fixed-gain
    variants discretize the continuous correction over the elapsed
    frame interval, which must be passed as frame_dt; with landmark
    frames at the integration rate this reproduces the continuous flow
    to first order in dt.
    """
    updated = correction_update(state, measurements, config, frame_dt)
    return apply_jumps(updated, _at(measurements, state.t), config)
