import math

import numpy as np
import pytest

from se23nav import (
    SE23,
    AngleAxis,
    CreState,
    GainSet,
    InvalidArgumentError,
    JumpCycleError,
    ObserverConfig,
    RiccatiDivergenceError,
    RiccatiSettings,
    angle_axis_to_rot,
    apply_jumps,
    build_landmark_set,
    build_transformation_set,
    compute_innovation,
    compute_innovation_stacked,
    cre_open_step,
    cre_step,
    discrete_update,
    flow_step,
    hat,
    hybrid_gap,
    initial_state,
    jump_step,
    predict_step,
    rot_distance,
    se23_compose,
    se23_inverse,
    should_jump,
)
from se23nav.landmarks import cost_upsilon
from se23nav.observers import riccati_layout
from se23nav.riccati import build_a_matrix

E = np.eye(3)
GRAVITY = np.array([0.0, 0.0, -9.81])


def bench_landmarks():
    d = [math.sqrt(1.5), 1.0, math.sqrt(0.5)]
    pts = []
    for j in range(3):
        pts.append(d[j] * E[j])
        pts.append(-d[j] * E[j])
    return build_landmark_set(np.array(pts), np.ones(6))


def offset_landmarks():
    """Six-point set with a nonzero centroid (exercises the p_c terms)."""
    rng = np.random.default_rng(99)
    pts = rng.normal(scale=1.2, size=(6, 3)) + np.array([0.8, -0.5, 1.1])
    return build_landmark_set(pts, np.array([1.0, 2.0, 0.5, 1.5, 1.0, 0.8]))


def rand_rot(rng, max_angle=math.pi):
    ax = rng.normal(size=3)
    ax /= np.linalg.norm(ax)
    return angle_axis_to_rot(AngleAxis(rng.uniform(1e-3, max_angle - 1e-3), ax))


def exact_measurements(lms, X):
    return (lms.points - X.pos) @ X.rot


def fixed_config(lms, **kw):
    tset = build_transformation_set(lms, 0.8 * math.pi, "eigenbasis")
    gap = hybrid_gap(lms, tset)
    base = dict(
        variant="fixed-gain",
        landmarks=lms,
        transformations=tset,
        delta=gap.delta,
        gravity=GRAVITY,
    )
    base.update(kw)
    return ObserverConfig(**base)


def cre_config(lms, variant="cre", **kw):
    n = 9 if variant == "cre-full-bias" else 6
    settings = RiccatiSettings(P0=0.5 * np.eye(n), V=np.eye(n), Q=10.0 * np.eye(3))
    return fixed_config(lms, variant=variant, riccati=settings, **kw)


# ---------------------------------------------------------------- configuration


def test_config_rejects_unknown_variant():
    with pytest.raises(InvalidArgumentError):
        fixed_config(bench_landmarks(), variant="adaptive")


def test_config_rejects_nonpositive_gains():
    with pytest.raises(InvalidArgumentError):
        fixed_config(bench_landmarks(), k_p=0.0)
    with pytest.raises(InvalidArgumentError):
        fixed_config(bench_landmarks(), k_omega=-1.0)


def test_config_jump_fields_required_together():
    lms = bench_landmarks()
    with pytest.raises(InvalidArgumentError):
        ObserverConfig(variant="fixed-gain", landmarks=lms)  # jumps on, no set
    # disabling jumps lifts the requirement
    cfg = ObserverConfig(variant="fixed-gain", landmarks=lms, jumps_enabled=False)
    assert cfg.delta is None


def test_config_rejects_out_of_range_delta():
    # admissible range is (0, (1 - cos theta) * separation constant)
    with pytest.raises(InvalidArgumentError):
        fixed_config(bench_landmarks(), delta=10.0)


def test_config_rejects_foreign_transformation_set():
    lms = bench_landmarks()
    other = offset_landmarks()
    tset_other = build_transformation_set(other, 0.8 * math.pi, "eigenbasis")
    with pytest.raises(InvalidArgumentError):
        fixed_config(lms, transformations=tset_other, delta=0.5)


def test_config_riccati_settings_pairing():
    lms = bench_landmarks()
    with pytest.raises(InvalidArgumentError):
        fixed_config(lms, variant="cre")  # missing settings
    with pytest.raises(InvalidArgumentError):
        fixed_config(
            lms,
            riccati=RiccatiSettings(P0=np.eye(6), V=np.eye(6), Q=np.eye(3)),
        )  # fixed-gain takes none
    with pytest.raises(InvalidArgumentError):
        fixed_config(lms, variant="cre-full-bias", riccati=RiccatiSettings(
            P0=np.eye(6), V=np.eye(6), Q=np.eye(3)
        ))  # 9-state layout needs a 9x9 P0


def test_initial_state_bias_gating():
    lms = bench_landmarks()
    cfg = fixed_config(lms)
    st = initial_state(cfg)
    assert st.t == 0.0 and st.j == 0 and st.cre is None
    np.testing.assert_array_equal(st.b_omega, 0.0)
    with pytest.raises(InvalidArgumentError):
        initial_state(cfg, b_omega0=np.array([0.1, 0.0, 0.0]))
    with pytest.raises(InvalidArgumentError):
        initial_state(cfg, b_a0=np.array([0.1, 0.0, 0.0]))
    st9 = initial_state(cre_config(lms, variant="cre-full-bias"),
                        b_omega0=np.array([0.1, 0.0, 0.0]))
    assert st9.cre is not None and st9.cre.P.shape == (9, 9)
    assert st9.jump_count == 0


def test_riccati_layout_mapping():
    assert riccati_layout("fixed-gain") is None
    assert riccati_layout("cre") == "no-bias-6"
    assert riccati_layout("cre-gyro-bias") == "gyro-bias-6"
    assert riccati_layout("cre-full-bias") == "full-bias-9"


# ---------------------------------------------------------------- innovation


def unit_gains():
    return GainSet(k_r=1.0, K_v=np.eye(3), K_p=np.eye(3))


def test_innovation_zero_at_truth():
    lms = offset_landmarks()
    rng = np.random.default_rng(3)
    X = SE23(rand_rot(rng), rng.normal(size=3), rng.normal(size=3))
    innov = compute_innovation(X, lms, exact_measurements(lms, X), unit_gains())
    np.testing.assert_allclose(innov.delta_r, 0.0, atol=1e-12)
    np.testing.assert_allclose(innov.delta_p, 0.0, atol=1e-12)
    np.testing.assert_allclose(innov.delta.omega, 0.0, atol=1e-12)
    np.testing.assert_allclose(innov.delta.alpha, 0.0, atol=1e-12)
    np.testing.assert_allclose(innov.delta.nu, 0.0, atol=1e-12)


def test_innovation_noise_free_closed_forms():
    # with exact measurements the residual sums reduce to
    # delta_r = (I - Rtil)^T M   and   delta_p = k_c Rtil^T (ptil - (I - Rtil) p_c)
    # where Rtil = R Rhat^T and ptil = p - Rtil phat
    lms = offset_landmarks()
    rng = np.random.default_rng(7)
    for _ in range(25):
        X = SE23(rand_rot(rng), rng.normal(size=3), rng.normal(size=3))
        Xh = SE23(rand_rot(rng), rng.normal(size=3), rng.normal(size=3))
        innov = compute_innovation(Xh, lms, exact_measurements(lms, X), unit_gains())
        Rtil = X.rot @ Xh.rot.T
        ptil = X.pos - Rtil @ Xh.pos
        np.testing.assert_allclose(
            innov.delta_r, (np.eye(3) - Rtil).T @ lms.m_matrix, atol=1e-9
        )
        np.testing.assert_allclose(
            innov.delta_p,
            lms.k_c * Rtil.T @ (ptil - (np.eye(3) - Rtil) @ lms.p_c),
            atol=1e-9,
        )


def test_innovation_pure_position_offset_decouples():
    # shifting only the position estimate leaves the rotation part at zero
    lms = offset_landmarks()
    rng = np.random.default_rng(11)
    X = SE23(rand_rot(rng), rng.normal(size=3), rng.normal(size=3))
    d = np.array([0.3, -0.7, 0.2])
    Xh = SE23(X.rot, X.vel, X.pos - d)
    innov = compute_innovation(Xh, lms, exact_measurements(lms, X), unit_gains())
    np.testing.assert_allclose(innov.delta_r, 0.0, atol=1e-12)
    np.testing.assert_allclose(innov.delta_p, lms.k_c * d, atol=1e-12)


def test_innovation_stacked_path_agrees():
    # the 5x5 homogeneous-coordinate assembly and the summed block path
    # are independent implementations of the same tangent
    lms = offset_landmarks()
    rng = np.random.default_rng(19)
    for _ in range(50):
        X = SE23(rand_rot(rng), rng.normal(size=3), rng.normal(size=3))
        Xh = SE23(rand_rot(rng), rng.normal(size=3), rng.normal(size=3))
        y = exact_measurements(lms, X) + rng.normal(scale=0.4, size=(len(lms), 3))
        k_r, k_v, k_p = 1.3, 2.0, 0.7
        gains = GainSet(k_r=k_r, K_v=k_v * np.eye(3), K_p=k_p * np.eye(3))
        a = compute_innovation(Xh, lms, y, gains).delta
        b = compute_innovation_stacked(Xh, lms, y, k_r, k_v, k_p)
        np.testing.assert_allclose(a.omega, b.omega, atol=1e-9)
        np.testing.assert_allclose(a.alpha, b.alpha, atol=1e-9)
        np.testing.assert_allclose(a.nu, b.nu, atol=1e-9)


# ---------------------------------------------------------------- flow


def hover_setup(lms):
    """Static truth pose; zero rate, accelerometer cancels gravity."""
    R0 = angle_axis_to_rot(AngleAxis(0.7, np.array([0.0, 1.0, 0.0])))
    p0 = np.array([1.0, -2.0, 3.0])
    X = SE23(R0, np.zeros(3), p0)
    omega = np.zeros(3)
    accel = -R0.T @ GRAVITY
    return X, omega, accel, exact_measurements(lms, X)


def test_flow_fixed_point_at_truth():
    lms = offset_landmarks()
    cfg = fixed_config(lms)
    X, omega, accel, y = hover_setup(lms)
    st = initial_state(cfg, X0=X)
    for _ in range(100):
        st = flow_step(st, omega, accel, 1e-3, cfg, y)
    assert rot_distance(X.rot @ st.X.rot.T) < 1e-12
    np.testing.assert_allclose(st.X.pos, X.pos, atol=1e-12)
    np.testing.assert_allclose(st.X.vel, X.vel, atol=1e-12)
    assert st.t == pytest.approx(0.1)


def test_flow_step_matches_dense_matrix_integration():
    # one RK4 step of the component-wise flow against a 5x5 matrix-ODE
    # step built from the stacked innovation path
    lms = offset_landmarks()
    cfg = fixed_config(lms, k_r=0.8, k_v=2.0, k_p=1.5)
    rng = np.random.default_rng(23)
    X = SE23(rand_rot(rng), rng.normal(size=3), rng.normal(size=3))
    Xh = SE23(rand_rot(rng), rng.normal(size=3), rng.normal(size=3))
    y = exact_measurements(lms, X)
    w = np.array([0.3, -0.2, 0.5])
    a = np.array([0.1, 0.4, -9.0])
    dt = 1e-3

    def dense_rhs(R, v, p):
        delta = compute_innovation_stacked(SE23(R, v, p), lms, y, 0.8, 2.0, 1.5)
        D = delta.as_matrix()
        f = np.zeros((5, 5))
        f[:3, :3] = R @ hat(w)
        f[:3, 3] = GRAVITY + R @ a
        f[:3, 4] = v
        dX = f - D @ SE23(R, v, p).as_matrix()
        return dX[:3, :3], dX[:3, 3], dX[:3, 4]

    s0 = (Xh.rot, Xh.vel, Xh.pos)
    k1 = dense_rhs(*s0)
    k2 = dense_rhs(*(b + 0.5 * dt * d for b, d in zip(s0, k1)))
    k3 = dense_rhs(*(b + 0.5 * dt * d for b, d in zip(s0, k2)))
    k4 = dense_rhs(*(b + dt * d for b, d in zip(s0, k3)))
    dense = [
        b + (dt / 6.0) * (d1 + 2.0 * d2 + 2.0 * d3 + d4)
        for b, d1, d2, d3, d4 in zip(s0, k1, k2, k3, k4)
    ]

    out = flow_step(initial_state(cfg, X0=Xh), w, a, dt, cfg, y)
    np.testing.assert_allclose(out.X.rot, dense[0], atol=1e-10)
    np.testing.assert_allclose(out.X.vel, dense[1], atol=1e-10)
    np.testing.assert_allclose(out.X.pos, dense[2], atol=1e-10)


def test_flow_gyro_bias_rate_formula():
    # db/dt = -k_w Rhat^T psi(delta_r): check one small step against an
    # Euler evaluation of that formula
    lms = offset_landmarks()
    cfg = fixed_config(lms, variant="fixed-gain-gyro-bias", k_omega=2.0)
    rng = np.random.default_rng(29)
    X = SE23(rand_rot(rng), rng.normal(size=3), rng.normal(size=3))
    Xh = SE23(rand_rot(rng), rng.normal(size=3), rng.normal(size=3))
    y = exact_measurements(lms, X)
    innov = compute_innovation(Xh, lms, y, unit_gains())
    from se23nav import psi

    expected_rate = -2.0 * (Xh.rot.T @ psi(innov.delta_r))
    dt = 1e-6
    out = flow_step(initial_state(cfg, X0=Xh), np.zeros(3), np.zeros(3), dt, cfg, y)
    # the midpoint stages shift the state by O(dt), so the recovered rate
    # agrees with the frozen-state formula only to that order
    np.testing.assert_allclose(out.b_omega / dt, expected_rate, atol=1e-4)


def test_flow_callable_inputs_match_constant_arrays():
    lms = bench_landmarks()
    cfg = fixed_config(lms)
    X, omega, accel, y = hover_setup(lms)
    rng = np.random.default_rng(31)
    Xh = SE23(rand_rot(rng, max_angle=1.0), rng.normal(size=3), rng.normal(size=3))
    a1 = flow_step(initial_state(cfg, X0=Xh), omega, accel, 1e-3, cfg, y)
    a2 = flow_step(
        initial_state(cfg, X0=Xh),
        lambda t: omega,
        lambda t: accel,
        1e-3,
        cfg,
        lambda t: y,
    )
    np.testing.assert_array_equal(a1.X.rot, a2.X.rot)
    np.testing.assert_array_equal(a1.X.pos, a2.X.pos)


def test_flow_cre_co_integration_at_truth():
    # with zero estimation error the estimate stays put while P follows
    # the same Riccati trajectory as the standalone stepper
    lms = offset_landmarks()
    cfg = cre_config(lms)
    X, omega, accel, y = hover_setup(lms)
    st = initial_state(cfg, X0=X)
    ref = CreState(P=0.5 * np.eye(6), V=np.eye(6), Q=10.0 * np.eye(3))
    A = build_a_matrix("no-bias-6", omega)
    for _ in range(200):
        st = flow_step(st, omega, accel, 1e-3, cfg, y)
        ref = cre_step(ref, A, 1e-3)
    assert rot_distance(X.rot @ st.X.rot.T) < 1e-10
    np.testing.assert_allclose(st.X.pos, X.pos, atol=1e-10)
    np.testing.assert_allclose(st.cre.P, ref.P, atol=1e-10)


def test_flow_riccati_divergence_carries_time():
    lms = bench_landmarks()
    settings = RiccatiSettings(P0=1e-3 * np.eye(6), V=-np.eye(6), Q=np.eye(3))
    cfg = fixed_config(lms, variant="cre", riccati=settings)
    X, omega, accel, y = hover_setup(lms)
    st = initial_state(cfg, X0=X)
    with pytest.raises(RiccatiDivergenceError) as info:
        for _ in range(100):
            st = flow_step(st, omega, accel, 0.05, cfg, y)
    assert info.value.time > 0.0


def test_predict_step_is_pure_dead_reckoning():
    lms = offset_landmarks()
    cfg = cre_config(lms)
    X, omega, accel, _ = hover_setup(lms)
    st = initial_state(cfg, X0=X)
    ref = CreState(P=0.5 * np.eye(6), V=np.eye(6), Q=10.0 * np.eye(3))
    A = build_a_matrix("no-bias-6", omega)
    for _ in range(100):
        st = predict_step(st, omega, accel, 1e-3, cfg)
        ref = cre_open_step(ref, A, 1e-3)
    assert rot_distance(X.rot @ st.X.rot.T) < 1e-12
    np.testing.assert_allclose(st.X.pos, X.pos, atol=1e-12)
    np.testing.assert_allclose(st.cre.P, ref.P, atol=1e-10)
    # open-loop covariance grows, it never contracts
    assert np.trace(st.cre.P) > np.trace(0.5 * np.eye(6))


# ---------------------------------------------------------------- jumps


def half_turn_state(lms, axis_index=0):
    """Truth at identity, estimate rotated half a turn about an eigenvector."""
    X = SE23(np.eye(3), np.zeros(3), np.zeros(3))
    u = lms.eigvecs[:, axis_index]
    Rtil = angle_axis_to_rot(AngleAxis(math.pi, u))
    Xh = SE23(Rtil.T @ X.rot, X.vel.copy(), X.pos.copy())
    return X, Xh


def test_should_jump_false_at_truth():
    lms = bench_landmarks()
    cfg = fixed_config(lms)
    X, _, _, y = hover_setup(lms)
    assert not should_jump(initial_state(cfg, X0=X), y, cfg)


def test_should_jump_true_at_half_turn():
    lms = bench_landmarks()
    cfg = fixed_config(lms)
    X, Xh = half_turn_state(lms)
    y = exact_measurements(lms, X)
    assert should_jump(initial_state(cfg, X0=Xh), y, cfg)


def test_should_jump_tie_triggers():
    lms = bench_landmarks()
    X = SE23(np.eye(3), np.zeros(3), np.zeros(3))
    Rtil = angle_axis_to_rot(AngleAxis(1.9, lms.eigvecs[:, 0]))
    Xh = SE23(Rtil.T, np.zeros(3), np.zeros(3))
    y = exact_measurements(lms, X)
    from se23nav.landmarks import mu_q

    tset = build_transformation_set(lms, 0.8 * math.pi, "eigenbasis")
    gap_value = mu_q(Xh, lms, y, tset)
    cfg = fixed_config(lms, delta=gap_value)  # exactly at the threshold
    assert should_jump(initial_state(cfg, X0=Xh), y, cfg)


def test_jump_step_explicit_form():
    lms = offset_landmarks()
    cfg = cre_config(lms)
    X, Xh = half_turn_state(lms, axis_index=1)
    y = exact_measurements(lms, X)
    st = initial_state(cfg, X0=Xh)
    out = jump_step(st, y, cfg)
    # recover the element the selector chose and check the component maps
    from se23nav.landmarks import gamma_select

    X_q = gamma_select(Xh, lms, y, cfg.transformations)
    R_q = X_q.rot
    np.testing.assert_allclose(out.X.rot, R_q.T @ Xh.rot, atol=1e-12)
    np.testing.assert_allclose(out.X.vel, R_q.T @ Xh.vel, atol=1e-12)
    np.testing.assert_allclose(
        out.X.pos, R_q.T @ (Xh.pos - (np.eye(3) - R_q) @ lms.p_c), atol=1e-12
    )
    assert out.j == st.j + 1
    assert out.cre is st.cre  # covariance passes through untouched
    assert out.b_omega is st.b_omega


def test_jump_drops_cost_by_gap():
    lms = bench_landmarks()
    cfg = fixed_config(lms)
    X, Xh = half_turn_state(lms)
    y = exact_measurements(lms, X)
    from se23nav.landmarks import mu_q

    gap = mu_q(Xh, lms, y, cfg.transformations)
    st = jump_step(initial_state(cfg, X0=Xh), y, cfg)
    drop = cost_upsilon(st.X, lms, y) - cost_upsilon(Xh, lms, y)
    np.testing.assert_allclose(drop, -gap, atol=1e-10)
    assert gap >= cfg.delta


def test_jump_preserves_translation_errors():
    # the recentred position error and the velocity error are invariant
    lms = offset_landmarks()
    cfg = fixed_config(lms)
    rng = np.random.default_rng(37)
    X = SE23(rand_rot(rng), rng.normal(size=3), rng.normal(size=3))
    u = lms.eigvecs[:, 0]
    Rtil = angle_axis_to_rot(AngleAxis(math.pi, u))
    Xh = SE23(
        Rtil.T @ X.rot,
        rng.normal(size=3),
        rng.normal(size=3),
    )
    y = exact_measurements(lms, X)

    def translation_errors(Xh_):
        Rt = X.rot @ Xh_.rot.T
        ptil = X.pos - Rt @ Xh_.pos
        vtil = X.vel - Rt @ Xh_.vel
        return ptil - (np.eye(3) - Rt) @ lms.p_c, vtil

    pe0, v0 = translation_errors(Xh)
    out = jump_step(initial_state(cfg, X0=Xh), y, cfg)
    pe1, v1 = translation_errors(out.X)
    np.testing.assert_allclose(pe1, pe0, atol=1e-10)
    np.testing.assert_allclose(v1, v0, atol=1e-10)


def test_apply_jumps_settles_below_threshold():
    lms = bench_landmarks()
    cfg = fixed_config(lms)
    X, Xh = half_turn_state(lms)
    y = exact_measurements(lms, X)
    out = apply_jumps(initial_state(cfg, X0=Xh), y, cfg)
    assert out.j >= 1
    assert not should_jump(out, y, cfg)


def test_apply_jumps_disabled_passthrough():
    lms = bench_landmarks()
    cfg = ObserverConfig(variant="fixed-gain", landmarks=lms, jumps_enabled=False)
    X, Xh = half_turn_state(lms)
    st = initial_state(cfg, X0=Xh)
    out = apply_jumps(st, exact_measurements(lms, X), cfg)
    assert out is st


def test_apply_jumps_cycle_guard():
    # heavily corrupted measurements can keep the gap above a tiny
    # threshold through more resets than there are candidates; the
    # guard must fail loudly instead of looping
    lms = bench_landmarks()
    cfg = fixed_config(lms, delta=1e-4)
    Rtil = angle_axis_to_rot(
        AngleAxis(
            2.9565472261818377,
            np.array([0.7542116579631601, 0.43072387785078753, 0.49562255400823013]),
        )
    )
    Xh = SE23(Rtil, np.zeros(3), np.zeros(3))
    noise = np.array(
        [
            [-0.27705470869790483, 1.1685018894329517, -1.9820410646276063],
            [1.375564860421147, -0.44741880686229357, 0.9447791845638502],
            [-2.0747745424444766, -0.3337937652963025, 0.679876205362563],
            [0.12098868123519786, 0.8136001192524737, -0.6989473943515787],
            [-0.4467059098146311, -0.522248186827198, 0.4069468383833522],
            [0.3708576515267401, -0.09718566032259277, -0.2103324952287752],
        ]
    )
    y = lms.points + noise  # truth at identity plus noise
    with pytest.raises(JumpCycleError):
        apply_jumps(initial_state(cfg, X0=Xh), y, cfg)


# ---------------------------------------------------------------- discrete update


def test_discrete_update_zero_innovation_contracts_covariance():
    lms = offset_landmarks()
    cfg = cre_config(lms, variant="cre-full-bias")
    X, _, _, y = hover_setup(lms)
    st = initial_state(cfg, X0=X)
    P_before = st.cre.P.copy()
    out = discrete_update(st, y, cfg)
    assert rot_distance(X.rot @ out.X.rot.T) < 1e-12
    np.testing.assert_allclose(out.X.pos, X.pos, atol=1e-12)
    np.testing.assert_allclose(out.b_omega, st.b_omega, atol=1e-12)
    np.testing.assert_allclose(out.b_a, st.b_a, atol=1e-12)
    assert np.trace(out.cre.P) < np.trace(P_before)
    assert np.linalg.eigvalsh(out.cre.P).min() > 0.0


def test_discrete_update_moves_position_toward_truth():
    lms = offset_landmarks()
    cfg = cre_config(lms)
    X, _, _, y = hover_setup(lms)
    d = np.array([0.05, -0.02, 0.04])
    st = initial_state(cfg, X0=SE23(X.rot, X.vel, X.pos - d))
    out = discrete_update(st, y, cfg)
    assert np.linalg.norm(out.X.pos - X.pos) < np.linalg.norm(d)
    # the step direction follows the position innovation gain
    moved = out.X.pos - st.X.pos
    assert np.dot(moved, d) > 0.0


def test_discrete_update_fixed_gain_needs_frame_dt():
    lms = bench_landmarks()
    cfg = fixed_config(lms)
    X, _, _, y = hover_setup(lms)
    st = initial_state(cfg, X0=SE23(X.rot, X.vel, X.pos - 0.1 * np.ones(3)))
    with pytest.raises(InvalidArgumentError):
        discrete_update(st, y, cfg)


def test_discrete_mode_approximates_flow_to_first_order():
    # predict + frame update against the continuous flow over one step:
    # the gap shrinks quadratically with the step size
    lms = offset_landmarks()
    X, omega, accel, y = hover_setup(lms)
    rng = np.random.default_rng(43)
    Xh = SE23(rand_rot(rng, max_angle=0.8), rng.normal(size=3), rng.normal(size=3))

    def gap(dt):
        cfg = fixed_config(lms, jumps_enabled=False, transformations=None, delta=None)
        st0 = initial_state(cfg, X0=Xh)
        flowed = flow_step(st0, omega, accel, dt, cfg, y)
        stepped = discrete_update(
            predict_step(st0, omega, accel, dt, cfg), y, cfg, frame_dt=dt
        )
        return max(
            np.abs(flowed.X.rot - stepped.X.rot).max(),
            np.abs(flowed.X.pos - stepped.X.pos).max(),
            np.abs(flowed.X.vel - stepped.X.vel).max(),
        )

    g1, g2 = gap(4e-3), gap(2e-3)
    assert 3.0 < g1 / g2 < 5.5


def test_discrete_update_applies_jump_rule():
    lms = bench_landmarks()
    cfg = cre_config(lms)
    X, Xh = half_turn_state(lms)
    y = exact_measurements(lms, X)
    out = discrete_update(initial_state(cfg, X0=Xh), y, cfg)
    assert out.j >= 1
