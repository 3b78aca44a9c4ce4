"""Hybrid nonlinear observers for landmark-aided inertial navigation.

The package estimates attitude, position, linear velocity and IMU
biases by integrating gyro and accelerometer readings on the extended
pose group and correcting with body-frame landmark measurements.  A
reset mechanism over a finite set of rotations removes the undesired
equilibria that pure flow-based designs on this group suffer from, and
an optional continuous Riccati equation supplies time-varying gains.

Layout:
  liegroup    group/algebra primitives on the extended pose group
  landmarks   weighted landmark geometry, reset candidates, gap rules
  riccati     continuous Riccati equation, gain extraction, observability
  observers   innovation, flow/jump/discrete steps of the estimators
  simkit      truth synthesis, measurement models, run harnesses
  cli         scenario files, CSV logs, command-line front end
"""

from .errors import (
    CollinearLandmarksError,
    ConfigurationUnsupportedError,
    DivergenceError,
    InsufficientLandmarksError,
    InvalidArgumentError,
    JumpCycleError,
    RiccatiDivergenceError,
    SchemaError,
    Se23NavError,
)
from .liegroup import (
    TOL,
    AngleAxis,
    SE23,
    TangentSE23,
    Tolerances,
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
from .landmarks import (
    EIGENBASIS,
    ORTHOGONAL_TRIPLE,
    HybridGap,
    LandmarkSet,
    TransformationSet,
    build_landmark_set,
    build_transformation_set,
    cost_upsilon,
    delta_m,
    delta_m_star,
    gamma_select,
    hybrid_gap,
    mu_q,
    undesired_rotations,
)
from .riccati import (
    FULL_BIAS_9,
    GYRO_BIAS_6,
    NO_BIAS_6,
    CreState,
    build_a_matrix,
    c_matrix,
    continuous_gain_matrix,
    cre_open_step,
    cre_step,
    extract_gains,
    gains_from_columns,
    measurement_update,
    observability_gramian,
    observability_matrix_check,
    transition_factorization,
)
from .observers import (
    CRE,
    CRE_FULL_BIAS,
    CRE_GYRO_BIAS,
    FIXED_GAIN,
    FIXED_GAIN_GYRO_BIAS,
    VARIANTS,
    GainSet,
    Innovation,
    ObserverConfig,
    ObserverState,
    RiccatiSettings,
    apply_jumps,
    compute_innovation,
    compute_innovation_stacked,
    correction_update,
    discrete_update,
    estimates_accel_bias,
    estimates_gyro_bias,
    flow_step,
    initial_state,
    jump_step,
    predict_step,
    riccati_layout,
    should_jump,
    uses_riccati_gains,
)
from .simkit import (
    CircleTrajectory,
    ConstantOmega,
    DecayFit,
    HoverTrajectory,
    InitialEstimate,
    JumpEvent,
    MeasurementStreams,
    RunLog,
    Scenario,
    SineOmega,
    TruthState,
    WaypointTrajectory,
    bundled_landmarks,
    compact_landmarks,
    default_initial_attitude,
    fit_decay_rate,
    jump_count_bound,
    lyapunov_eval,
    run_algorithm1,
    run_continuous,
    run_discrete_sequence,
    saddle_attitudes,
    saddle_initial_estimate,
    steady_state_norm,
    synthesize_measurements,
    synthesize_streams,
    synthesize_truth,
    validate_hybrid_domain,
)

__version__ = "0.1.0"
