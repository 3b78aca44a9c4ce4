"""Scenario files, CSV logs and the command-line front end.

Three subcommands cover the workflows the library supports end to end:

  simulate   run scenario files in either execution mode and write the
             estimate log plus a machine-readable run summary
  replay     drive the multi-rate observer from a recorded dataset
             directory (IMU samples, landmark map, landmark frames)
  diagnose   print the landmark-geometry and observability numbers that
             size a configuration before running anything

Scenario files are TOML with a fixed six-section schema documented in
docs/scenario.md.  Unknown sections or keys are rejected, so a typo
fails loudly instead of silently falling back to a default.  All file
values are SI units and radians.

Exit codes: 0 success, 2 schema or file-format problem, 3 divergence at
run time, 4 structurally unsupported configuration (degenerate landmark
geometry and the like).  The SE23NAV_VERBOSE environment variable turns
on informational logging; warnings always print to stderr.
"""

from __future__ import annotations

import argparse
import copy
import dataclasses
import hashlib
import json
import logging
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from .errors import (
    CollinearLandmarksError,
    ConfigurationUnsupportedError,
    DivergenceError,
    InsufficientLandmarksError,
    InvalidArgumentError,
    JumpCycleError,
    RiccatiDivergenceError,
    SchemaError,
)
from .landmarks import build_landmark_set, build_transformation_set, hybrid_gap
from .liegroup import SE23, quat_to_rot, rot_to_quat
from .observers import ObserverConfig, RiccatiSettings, initial_state, riccati_layout
from .riccati import VARIANT_DIMS, observability_gramian, observability_matrix_check
from .simkit import (
    CircleTrajectory,
    ConstantOmega,
    HoverTrajectory,
    InitialEstimate,
    Scenario,
    SineOmega,
    WaypointTrajectory,
    bundled_landmarks,
    compact_landmarks,
    default_initial_attitude,
    fit_decay_rate,
    run_algorithm1,
    run_continuous,
    run_discrete_sequence,
    synthesize_streams,
)

__all__ = [
    "EstimateTable",
    "LoadedScenario",
    "load_scenario",
    "write_estimates",
    "read_estimates",
    "write_estimate_table",
    "write_bundle",
    "read_bundle",
    "read_truth",
    "cmd_simulate",
    "cmd_replay",
    "cmd_diagnose",
    "main",
]

_log = logging.getLogger("se23nav")

_SNAP = 1e-9

_MODES = ("continuous", "algorithm1")
_VARIANTS = ("fixed-gain", "fixed-gain-gyro-bias", "cre", "cre-gyro-bias", "cre-full-bias")
_POLICIES = ("eigenbasis", "orthogonal-triple")
_SOURCES = ("bundled-wide", "bundled-compact", "explicit")


# --------------------------------------------------------------------------
# schema helpers
#
# TOML gives us typed values already; these helpers enforce the shape we
# expect and produce "section.key: why" diagnostics on mismatch.

_MISSING = object()


def _fail(where, msg):
    raise SchemaError(f"{where}: {msg}")


def _pop(sec, where, key, default=_MISSING):
    if key in sec:
        return sec.pop(key)
    if default is _MISSING:
        _fail(where, f"missing required key {key!r}")
    return default


def _reject_unknown(sec, where):
    if sec:
        names = ", ".join(sorted(sec))
        _fail(where, f"unknown key(s): {names}")


def _as_float(v, where, positive=False, nonneg=False):
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        _fail(where, f"expected a number, got {type(v).__name__}")
    v = float(v)
    if positive and not v > 0.0:
        _fail(where, f"must be positive, got {v}")
    if nonneg and v < 0.0:
        _fail(where, f"must be non-negative, got {v}")
    return v


def _as_int(v, where, minimum=None):
    if isinstance(v, bool) or not isinstance(v, int):
        _fail(where, f"expected an integer, got {type(v).__name__}")
    if minimum is not None and v < minimum:
        _fail(where, f"must be at least {minimum}, got {v}")
    return v


def _as_bool(v, where):
    if not isinstance(v, bool):
        _fail(where, f"expected true or false, got {type(v).__name__}")
    return v


def _as_str(v, where, choices=None):
    if not isinstance(v, str):
        _fail(where, f"expected a string, got {type(v).__name__}")
    if choices is not None and v not in choices:
        _fail(where, f"expected one of {', '.join(choices)}; got {v!r}")
    return v


def _as_numlist(v, where, length=None):
    if not isinstance(v, list) or any(
        isinstance(x, bool) or not isinstance(x, (int, float)) for x in v
    ):
        _fail(where, "expected a list of numbers")
    if length is not None and len(v) != length:
        _fail(where, f"expected {length} entries, got {len(v)}")
    return [float(x) for x in v]


def _as_vec3(v, where):
    return _as_numlist(v, where, length=3)


def _as_std3(v, where):
    """Noise scale: a single number or one value per axis."""
    if isinstance(v, list):
        out = _as_numlist(v, where, length=3)
    else:
        out = _as_float(v, where)
    bad = any(x < 0.0 for x in out) if isinstance(out, list) else out < 0.0
    if bad:
        _fail(where, "standard deviations must be non-negative")
    return out


def _as_points(v, where):
    if not isinstance(v, list) or not v:
        _fail(where, "expected a non-empty list of 3-element rows")
    return [_as_vec3(row, where) for row in v]


# --------------------------------------------------------------------------
# scenario loading


@dataclass(frozen=True)
class LoadedScenario:
    """A parsed scenario plus the normalized form used for hashing."""

    name: str
    scenario: Scenario
    mode: str
    normalized: dict


def _parse_toml(path: Path) -> dict:
    try:
        text = path.read_bytes()
    except FileNotFoundError:
        raise SchemaError(f"{path}: file not found")
    except IsADirectoryError:
        raise SchemaError(f"{path}: is a directory, expected a scenario file")
    try:
        return tomllib.loads(text.decode("utf-8"))
    except UnicodeDecodeError as e:
        raise SchemaError(f"{path}: not valid UTF-8 ({e})")
    except tomllib.TOMLDecodeError as e:
        # the decoder message carries line and column already
        raise SchemaError(f"{path}: {e}")


def _parse_trajectory(sec, ctx):
    where = f"{ctx}.kind"
    kind = _as_str(_pop(sec, ctx, "kind"), where, choices=("circle", "hover", "waypoints"))
    norm = {"kind": kind}
    if kind == "circle":
        radius = _as_float(_pop(sec, ctx, "radius", 10.0), f"{ctx}.radius", positive=True)
        rate = _as_float(_pop(sec, ctx, "rate", 0.8), f"{ctx}.rate")
        height = _as_float(_pop(sec, ctx, "height", 10.0), f"{ctx}.height")
        center = _pop(sec, ctx, "center", None)
        if center is not None:
            center = _as_vec3(center, f"{ctx}.center")
        traj = CircleTrajectory(radius=radius, rate=rate, height=height, center=center)
        norm.update(radius=radius, rate=rate, height=height, center=center)
    elif kind == "hover":
        point = _pop(sec, ctx, "point", None)
        if point is not None:
            point = _as_vec3(point, f"{ctx}.point")
        traj = HoverTrajectory(point=point)
        norm.update(point=point)
    else:
        times = _as_numlist(_pop(sec, ctx, "times"), f"{ctx}.times")
        points = _as_points(_pop(sec, ctx, "points"), f"{ctx}.points")
        try:
            traj = WaypointTrajectory(np.array(times), np.array(points))
        except InvalidArgumentError as e:
            _fail(ctx, str(e))
        norm.update(times=times, points=points)
    _reject_unknown(sec, ctx)
    return traj, norm


def _parse_imu(sec, ctx):
    rate_hz = _as_float(_pop(sec, ctx, "rate_hz", 1000.0), f"{ctx}.rate_hz", positive=True)
    kind = _as_str(
        _pop(sec, ctx, "omega_kind", "constant"),
        f"{ctx}.omega_kind",
        choices=("constant", "sine"),
    )
    norm = {"rate_hz": rate_hz, "omega_kind": kind}
    if kind == "constant":
        value = _as_vec3(_pop(sec, ctx, "omega", [0.0, 0.0, 0.0]), f"{ctx}.omega")
        omega = ConstantOmega(value)
        norm["omega"] = value
    else:
        offset = _as_vec3(_pop(sec, ctx, "omega_offset"), f"{ctx}.omega_offset")
        amp = _as_vec3(_pop(sec, ctx, "omega_amplitude"), f"{ctx}.omega_amplitude")
        srate = _as_float(_pop(sec, ctx, "omega_sine_rate"), f"{ctx}.omega_sine_rate")
        omega = SineOmega(offset, amp, srate)
        norm.update(omega_offset=offset, omega_amplitude=amp, omega_sine_rate=srate)
    gyro_bias = _as_vec3(_pop(sec, ctx, "gyro_bias", [0.0] * 3), f"{ctx}.gyro_bias")
    accel_bias = _as_vec3(_pop(sec, ctx, "accel_bias", [0.0] * 3), f"{ctx}.accel_bias")
    gyro_std = _as_std3(_pop(sec, ctx, "gyro_noise_std", 0.0), f"{ctx}.gyro_noise_std")
    accel_std = _as_std3(_pop(sec, ctx, "accel_noise_std", 0.0), f"{ctx}.accel_noise_std")
    norm.update(
        gyro_bias=gyro_bias,
        accel_bias=accel_bias,
        gyro_noise_std=gyro_std,
        accel_noise_std=accel_std,
    )
    _reject_unknown(sec, ctx)
    return omega, rate_hz, gyro_bias, accel_bias, gyro_std, accel_std, norm


def _parse_landmarks(sec, ctx):
    source = _as_str(
        _pop(sec, ctx, "source", "bundled-wide"), f"{ctx}.source", choices=_SOURCES
    )
    norm = {"source": source}
    if source == "explicit":
        points = _as_points(_pop(sec, ctx, "points"), f"{ctx}.points")
        weights = _pop(sec, ctx, "weights", None)
        if weights is None:
            weights = [1.0 / len(points)] * len(points)
        else:
            weights = _as_numlist(weights, f"{ctx}.weights", length=len(points))
        try:
            lms = build_landmark_set(np.array(points), np.array(weights))
        except InvalidArgumentError as e:
            _fail(ctx, str(e))
        norm.update(points=points, weights=weights)
    else:
        if "points" in sec or "weights" in sec:
            _fail(ctx, "points/weights are only valid with source = 'explicit'")
        lms = bundled_landmarks() if source == "bundled-wide" else compact_landmarks()
    rate_hz = _as_float(_pop(sec, ctx, "rate_hz", 20.0), f"{ctx}.rate_hz", positive=True)
    noise_std = _as_std3(_pop(sec, ctx, "noise_std", 0.0), f"{ctx}.noise_std")
    dropout = _as_float(_pop(sec, ctx, "dropout", 0.0), f"{ctx}.dropout", nonneg=True)
    if dropout >= 1.0:
        _fail(f"{ctx}.dropout", "must lie in [0, 1)")
    norm.update(rate_hz=rate_hz, noise_std=noise_std, dropout=dropout)
    _reject_unknown(sec, ctx)
    return lms, rate_hz, noise_std, dropout, norm


def _parse_observer(sec, ric_sec, lms, ctx, ric_ctx, force_no_jumps=False):
    variant = _as_str(_pop(sec, ctx, "variant"), f"{ctx}.variant", choices=_VARIANTS)
    k_r = _as_float(_pop(sec, ctx, "k_r", 1.0), f"{ctx}.k_r", positive=True)
    k_v = _as_float(_pop(sec, ctx, "k_v", 3.0), f"{ctx}.k_v", positive=True)
    k_p = _as_float(_pop(sec, ctx, "k_p", 3.0), f"{ctx}.k_p", positive=True)
    k_omega = _as_float(_pop(sec, ctx, "k_omega", 1.0), f"{ctx}.k_omega", positive=True)
    gravity = _as_vec3(_pop(sec, ctx, "gravity", [0.0, 0.0, -9.81]), f"{ctx}.gravity")
    jumps = _as_bool(_pop(sec, ctx, "jumps", True), f"{ctx}.jumps")
    policy = _as_str(
        _pop(sec, ctx, "reset_policy", "eigenbasis"), f"{ctx}.reset_policy",
        choices=_POLICIES,
    )
    reset_angle = _as_float(
        _pop(sec, ctx, "reset_angle", 0.8 * math.pi), f"{ctx}.reset_angle", positive=True
    )
    delta_fraction = _as_float(
        _pop(sec, ctx, "delta_fraction", 0.3), f"{ctx}.delta_fraction", positive=True
    )
    delta = _pop(sec, ctx, "delta", None)
    if delta is not None:
        delta = _as_float(delta, f"{ctx}.delta", positive=True)

    init_quat = _pop(sec, ctx, "init_quat", None)
    if init_quat is not None:
        init_quat = _as_numlist(init_quat, f"{ctx}.init_quat", length=4)
    init_position = _pop(sec, ctx, "init_position", None)
    if init_position is not None:
        init_position = _as_vec3(init_position, f"{ctx}.init_position")
    init_velocity = _pop(sec, ctx, "init_velocity", None)
    if init_velocity is not None:
        init_velocity = _as_vec3(init_velocity, f"{ctx}.init_velocity")
    init_gyro_bias = _pop(sec, ctx, "init_gyro_bias", None)
    if init_gyro_bias is not None:
        init_gyro_bias = _as_vec3(init_gyro_bias, f"{ctx}.init_gyro_bias")
    init_accel_bias = _pop(sec, ctx, "init_accel_bias", None)
    if init_accel_bias is not None:
        init_accel_bias = _as_vec3(init_accel_bias, f"{ctx}.init_accel_bias")
    _reject_unknown(sec, ctx)

    riccati = None
    ric_norm = None
    if variant.startswith("cre"):
        if ric_sec is None:
            _fail(ric_ctx, f"section required for variant {variant!r}")
        p0 = _as_float(_pop(ric_sec, ric_ctx, "p0"), f"{ric_ctx}.p0", positive=True)
        v = _as_float(_pop(ric_sec, ric_ctx, "v"), f"{ric_ctx}.v", positive=True)
        q = _as_float(_pop(ric_sec, ric_ctx, "q"), f"{ric_ctx}.q", positive=True)
        _reject_unknown(ric_sec, ric_ctx)
        n = VARIANT_DIMS[riccati_layout(variant)]
        riccati = RiccatiSettings(P0=p0 * np.eye(n), V=v * np.eye(n), Q=q * np.eye(3))
        ric_norm = {"p0": p0, "v": v, "q": q}
    elif ric_sec is not None:
        _fail(ric_ctx, f"section only applies to Riccati-gain variants, not {variant!r}")

    if force_no_jumps:
        jumps = False
    kwargs = dict(
        variant=variant,
        landmarks=lms,
        k_r=k_r,
        k_v=k_v,
        k_p=k_p,
        k_omega=k_omega,
        gravity=np.array(gravity),
        riccati=riccati,
    )
    effective_delta = None
    if jumps:
        # geometry problems (repeated moments under the eigenbasis policy,
        # and so on) propagate as configuration-unsupported, not schema
        tset = build_transformation_set(lms, reset_angle, policy)
        try:
            gap = hybrid_gap(lms, tset, fraction=delta_fraction, delta=delta)
        except InvalidArgumentError as e:
            _fail(ctx, str(e))
        effective_delta = gap.delta
        kwargs.update(transformations=tset, delta=gap.delta)
    else:
        kwargs.update(jumps_enabled=False)
    try:
        config = ObserverConfig(**kwargs)
    except InvalidArgumentError as e:
        _fail(ctx, str(e))

    init = None
    if any(
        x is not None
        for x in (init_quat, init_position, init_velocity, init_gyro_bias, init_accel_bias)
    ):
        X0 = None
        if any(x is not None for x in (init_quat, init_position, init_velocity)):
            R0 = np.eye(3)
            if init_quat is not None:
                try:
                    R0 = quat_to_rot(init_quat)
                except InvalidArgumentError as e:
                    _fail(f"{ctx}.init_quat", str(e))
            X0 = SE23(
                R0,
                np.array(init_velocity or [0.0] * 3),
                np.array(init_position or [0.0] * 3),
            )
        init = InitialEstimate(X=X0, b_omega=init_gyro_bias, b_a=init_accel_bias)

    norm = {
        "variant": variant,
        "k_r": k_r,
        "k_v": k_v,
        "k_p": k_p,
        "k_omega": k_omega,
        "gravity": gravity,
        "jumps": jumps,
        "reset_policy": policy,
        "reset_angle": reset_angle,
        "delta_fraction": delta_fraction,
        "delta": effective_delta,
        "init_quat": init_quat,
        "init_position": init_position,
        "init_velocity": init_velocity,
        "init_gyro_bias": init_gyro_bias,
        "init_accel_bias": init_accel_bias,
    }
    return config, init, norm, ric_norm


def _parse_run(sec, ctx):
    duration = _as_float(_pop(sec, ctx, "duration"), f"{ctx}.duration", positive=True)
    dt = _as_float(_pop(sec, ctx, "dt", 1e-3), f"{ctx}.dt", positive=True)
    seed = _as_int(_pop(sec, ctx, "seed", 0), f"{ctx}.seed", minimum=0)
    mode = _as_str(_pop(sec, ctx, "mode", "continuous"), f"{ctx}.mode", choices=_MODES)
    log_every = _as_int(_pop(sec, ctx, "log_every", 1), f"{ctx}.log_every", minimum=1)
    _reject_unknown(sec, ctx)
    norm = {"duration": duration, "dt": dt, "seed": seed, "mode": mode,
            "log_every": log_every}
    return duration, dt, seed, mode, log_every, norm


def load_scenario(path) -> LoadedScenario:
    """Parse and validate one scenario file.

    Raises SchemaError for anything malformed, with the offending
    section.key named; landmark-geometry problems raise their own error
    types so the command layer can map them to exit code 4.
    """
    path = Path(path)
    doc = _parse_toml(path)
    label = path.name

    def section(name, required=True):
        if name not in doc:
            if required:
                _fail(label, f"missing required section [{name}]")
            return None
        sec = doc.pop(name)
        if not isinstance(sec, dict):
            _fail(label, f"[{name}] must be a table")
        return dict(sec)

    traj_sec = section("trajectory")
    imu_sec = section("imu")
    lms_sec = section("landmarks")
    obs_sec = section("observer")
    ric_sec = section("riccati", required=False)
    run_sec = section("run")
    if doc:
        _fail(label, f"unknown section(s): {', '.join(sorted(doc))}")

    traj, traj_norm = _parse_trajectory(traj_sec, f"{label}: [trajectory]")
    omega, imu_rate, b_w, b_a, gyro_std, accel_std, imu_norm = _parse_imu(
        imu_sec, f"{label}: [imu]"
    )
    lms, lm_rate, lm_std, dropout, lms_norm = _parse_landmarks(
        lms_sec, f"{label}: [landmarks]"
    )
    config, init, obs_norm, ric_norm = _parse_observer(
        obs_sec, ric_sec, lms, f"{label}: [observer]", f"{label}: [riccati]"
    )
    duration, dt, seed, mode, log_every, run_norm = _parse_run(
        run_sec, f"{label}: [run]"
    )

    try:
        scenario = Scenario(
            trajectory=traj,
            omega=omega,
            landmarks=lms,
            observer=config,
            duration=duration,
            seed=seed,
            dt=dt,
            imu_rate_hz=imu_rate,
            landmark_rate_hz=lm_rate,
            gyro_noise_std=gyro_std,
            accel_noise_std=accel_std,
            landmark_noise_std=lm_std,
            b_omega=b_w,
            b_a=b_a,
            initial_estimate=init,
            dropout_fraction=dropout,
            log_every=log_every,
        )
    except InvalidArgumentError as e:
        _fail(label, str(e))

    normalized = {
        "trajectory": traj_norm,
        "imu": imu_norm,
        "landmarks": lms_norm,
        "observer": obs_norm,
        "riccati": ric_norm,
        "run": run_norm,
    }
    return LoadedScenario(
        name=path.stem, scenario=scenario, mode=mode, normalized=normalized
    )


def _config_hash(normalized: dict) -> str:
    canon = json.dumps(normalized, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()


# --------------------------------------------------------------------------
# estimate-log CSV

_BASE_COLUMNS = (
    "t", "j", "qw", "qx", "qy", "qz", "px", "py", "pz", "vx", "vy", "vz",
    "bwx", "bwy", "bwz", "bax", "bay", "baz", "mu_q", "jump_flag",
)
_ERR_COLUMNS = ("err_rot", "err_pos", "err_vel", "err_bw", "err_ba")
_INT_COLUMNS = frozenset(("j", "jump_flag"))


def _fmt_cell(name, value):
    if name in _INT_COLUMNS:
        return str(int(value))
    # 17 significant digits reproduce any double exactly on re-parse
    return format(float(value), ".17g")


@dataclass(frozen=True)
class EstimateTable:
    """Estimate-log CSV content as columns of float64."""

    columns: tuple
    data: np.ndarray

    def column(self, name: str) -> np.ndarray:
        try:
            i = self.columns.index(name)
        except ValueError:
            raise InvalidArgumentError(f"no column named {name!r}")
        return self.data[:, i]

    @property
    def has_errors(self) -> bool:
        return "err_rot" in self.columns


def _write_rows(path, columns, row_iter):
    with open(path, "w", newline="\n") as f:
        f.write(",".join(columns) + "\n")
        for row in row_iter:
            f.write(",".join(_fmt_cell(n, v) for n, v in zip(columns, row)) + "\n")


def write_estimates(path, log) -> None:
    """Emit a run log as the documented estimate CSV.

    Attitude is stored as a unit quaternion (w first, w >= 0).  Error
    columns appear only when the log carries ground truth.
    """
    columns = _BASE_COLUMNS + (_ERR_COLUMNS if log.has_truth else ())

    def rows():
        for k in range(len(log.t)):
            q = rot_to_quat(log.R_est[k])
            row = [
                log.t[k], log.j[k], q[0], q[1], q[2], q[3],
                log.p_est[k][0], log.p_est[k][1], log.p_est[k][2],
                log.v_est[k][0], log.v_est[k][1], log.v_est[k][2],
                log.b_omega_est[k][0], log.b_omega_est[k][1], log.b_omega_est[k][2],
                log.b_a_est[k][0], log.b_a_est[k][1], log.b_a_est[k][2],
                log.mu_q[k], log.jump_flag[k],
            ]
            if log.has_truth:
                row += [log.err_rot[k], log.err_pos[k], log.err_vel[k],
                        log.err_bw[k], log.err_ba[k]]
            yield row

    _write_rows(path, columns, rows())


def write_estimate_table(path, table: EstimateTable) -> None:
    """Re-emit a parsed table byte for byte (used by round-trip checks)."""
    _write_rows(path, table.columns, table.data)


def _read_csv(path, expected_header, min_rows=0):
    path = Path(path)
    try:
        lines = path.read_text().splitlines()
    except FileNotFoundError:
        raise SchemaError(f"{path}: file not found")
    if not lines:
        raise SchemaError(f"{path}:1: empty file, expected a header row")
    header = tuple(lines[0].split(","))
    if header != tuple(expected_header):
        raise SchemaError(
            f"{path}:1: header mismatch, expected {','.join(expected_header)}"
        )
    rows = np.empty((len(lines) - 1, len(header)))
    for i, line in enumerate(lines[1:], start=2):
        parts = line.split(",")
        if len(parts) != len(header):
            raise SchemaError(f"{path}:{i}: expected {len(header)} fields, got {len(parts)}")
        try:
            rows[i - 2] = [float(p) for p in parts]
        except ValueError as e:
            raise SchemaError(f"{path}:{i}: {e}")
    if len(rows) < min_rows:
        raise SchemaError(f"{path}: needs at least {min_rows} data row(s), got {len(rows)}")
    return rows


def read_estimates(path) -> EstimateTable:
    """Parse an estimate CSV back into columns.

    parse(emit(log)) is exact: every cell was printed with 17
    significant digits, which float64 round-trips.
    """
    path = Path(path)
    try:
        first = path.read_text().splitlines()[:1]
    except FileNotFoundError:
        raise SchemaError(f"{path}: file not found")
    with_err = bool(first) and first[0].split(",")[-1] == "err_ba"
    columns = _BASE_COLUMNS + (_ERR_COLUMNS if with_err else ())
    data = _read_csv(path, columns)
    return EstimateTable(columns=columns, data=data)


# --------------------------------------------------------------------------
# replay bundles

_IMU_HEADER = ("t", "wx", "wy", "wz", "ax", "ay", "az")
_WORLD_HEADER = ("id", "px", "py", "pz", "weight")
_OBS_HEADER = ("t", "id", "yx", "yy", "yz")
_TRUTH_HEADER = (
    "t", "qw", "qx", "qy", "qz", "px", "py", "pz", "vx", "vy", "vz",
    "bwx", "bwy", "bwz", "bax", "bay", "baz",
)


@dataclass(frozen=True)
class ReplayBundle:
    """Parsed dataset directory: IMU stream, landmark map, frames."""

    times: np.ndarray
    omega_y: np.ndarray
    accel_y: np.ndarray
    ids: tuple
    points: np.ndarray
    weights: np.ndarray
    frames: list  # (t, id tuple, y rows) in file order


def write_bundle(dir_path, streams, scenario) -> None:
    """Export synthesized streams as a replay dataset directory.

    Writes imu.csv, landmarks_world.csv and landmark_obs.csv in the
    documented schemas, plus truth.csv so a replay can rebuild the
    error columns.
    """
    d = Path(dir_path)
    d.mkdir(parents=True, exist_ok=True)
    n = len(streams.times)

    def imu_rows():
        for k in range(n):
            yield [streams.times[k], *streams.omega_y[k], *streams.accel_y[k]]

    _write_rows(d / "imu.csv", _IMU_HEADER, imu_rows())

    lms = scenario.landmarks

    def world_rows():
        for i in range(len(lms)):
            yield [i, *lms.points[i], lms.weights[i]]

    _write_rows(d / "landmarks_world.csv", _WORLD_HEADER, world_rows())

    def obs_rows():
        for t, y in streams.frames:
            for i in range(y.shape[0]):
                yield [t, i, *y[i]]

    _write_rows(d / "landmark_obs.csv", _OBS_HEADER, obs_rows())

    R_tab, v_tab, p_tab = streams.truth

    def truth_rows():
        for k in range(n):
            q = rot_to_quat(R_tab[k])
            yield [streams.times[k], *q, *p_tab[k], *v_tab[k],
                   *scenario.b_omega, *scenario.b_a]

    _write_rows(d / "truth.csv", _TRUTH_HEADER, truth_rows())


def read_bundle(dir_path) -> ReplayBundle:
    """Parse and validate a replay dataset directory."""
    d = Path(dir_path)
    if not d.is_dir():
        raise SchemaError(f"{d}: not a directory")

    imu = _read_csv(d / "imu.csv", _IMU_HEADER, min_rows=2)
    times = imu[:, 0]
    if np.any(np.diff(times) <= 0.0):
        k = int(np.argmax(np.diff(times) <= 0.0)) + 3  # header + 1-based + next row
        raise SchemaError(f"{d / 'imu.csv'}:{k}: timestamps must be strictly increasing")

    world = _read_csv(d / "landmarks_world.csv", _WORLD_HEADER)
    ids = []
    for k, row in enumerate(world, start=2):
        if row[0] != int(row[0]):
            raise SchemaError(f"{d / 'landmarks_world.csv'}:{k}: id must be an integer")
        ids.append(int(row[0]))
    if len(set(ids)) != len(ids):
        raise SchemaError(f"{d / 'landmarks_world.csv'}: duplicate landmark ids")

    obs = _read_csv(d / "landmark_obs.csv", _OBS_HEADER)
    if np.any(np.diff(obs[:, 0]) < 0.0):
        k = int(np.argmax(np.diff(obs[:, 0]) < 0.0)) + 3
        raise SchemaError(
            f"{d / 'landmark_obs.csv'}:{k}: timestamps must be non-decreasing"
        )
    known = set(ids)
    frames = []
    row = 0
    while row < len(obs):
        t = obs[row, 0]
        stop = row
        while stop < len(obs) and obs[stop, 0] == t:
            stop += 1
        frame_ids = []
        for k in range(row, stop):
            if obs[k, 1] != int(obs[k, 1]):
                raise SchemaError(f"{d / 'landmark_obs.csv'}:{k + 2}: id must be an integer")
            i = int(obs[k, 1])
            if i not in known:
                raise SchemaError(
                    f"{d / 'landmark_obs.csv'}:{k + 2}: id {i} not in landmarks_world.csv"
                )
            if i in frame_ids:
                raise SchemaError(
                    f"{d / 'landmark_obs.csv'}:{k + 2}: id {i} repeated within one frame"
                )
            frame_ids.append(i)
        frames.append((float(t), tuple(frame_ids), obs[row:stop, 2:5].copy()))
        row = stop

    return ReplayBundle(
        times=times,
        omega_y=imu[:, 1:4].copy(),
        accel_y=imu[:, 4:7].copy(),
        ids=tuple(ids),
        points=world[:, 1:4].copy(),
        weights=world[:, 4].copy(),
        frames=frames,
    )


def read_truth(path, times) -> tuple:
    """Ground-truth CSV aligned with the bundle's IMU timestamps.

    Returns (R, v, p, b_omega, b_a).  Biases are taken from the first
    row and treated as constants over the run.
    """
    rows = _read_csv(path, _TRUTH_HEADER, min_rows=1)
    if len(rows) != len(times) or np.max(np.abs(rows[:, 0] - times)) > _SNAP:
        raise SchemaError(f"{path}: timestamps do not match the bundle's imu.csv")
    R = np.stack([quat_to_rot(q) for q in rows[:, 1:5]])
    p = rows[:, 5:8].copy()
    v = rows[:, 8:11].copy()
    return R, v, p, rows[0, 11:14].copy(), rows[0, 14:17].copy()


# --------------------------------------------------------------------------
# summaries


def _decay_fit_summary(log):
    if not log.has_truth:
        return None
    start = log.jump_events[-1].t if log.jump_events else None
    try:
        fit = fit_decay_rate(log.t, log.err_rot, start_time=start)
    except InvalidArgumentError:
        return None
    return {"rate": fit.rate, "r_squared": fit.r_squared}


def _summarize(name, mode, config_hash, log, seed, extra=None) -> dict:
    out = {
        "name": name,
        "mode": mode,
        "variant": log.variant,
        "config_sha256": config_hash,
        "seed": seed,
        "rows": int(len(log.t)),
        "time_span": [float(log.t[0]), float(log.t[-1])],
        "jump_count": log.jump_count,
        "final_errors": None,
        "decay_fit": _decay_fit_summary(log),
        "p_bounds": None,
    }
    if log.has_truth:
        out["final_errors"] = {
            "rot": float(log.err_rot[-1]),
            "pos": float(log.err_pos[-1]),
            "vel": float(log.err_vel[-1]),
            "gyro_bias": float(log.err_bw[-1]),
            "accel_bias": float(log.err_ba[-1]),
        }
    if log.p_eig_min is not None:
        out["p_bounds"] = {
            "min": float(np.min(log.p_eig_min)),
            "max": float(np.max(log.p_eig_max)),
        }
    if extra:
        out.update(extra)
    return out


def _write_summary(path, summary) -> None:
    Path(path).write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")


# --------------------------------------------------------------------------
# simulate


def _classify_exit(exc) -> Optional[int]:
    if isinstance(exc, SchemaError):
        return 2
    if isinstance(
        exc,
        (CollinearLandmarksError, InsufficientLandmarksError, ConfigurationUnsupportedError),
    ):
        return 4
    if isinstance(exc, (DivergenceError, RiccatiDivergenceError, JumpCycleError)):
        return 3
    if isinstance(exc, (InvalidArgumentError, OSError)):
        return 2
    return None


def _simulate_one(path, out_dir, mode_override, seed_override, export_bundle):
    loaded = load_scenario(path)
    mode = mode_override or loaded.mode
    scen = loaded.scenario
    normalized = copy.deepcopy(loaded.normalized)
    normalized["run"]["mode"] = mode
    if seed_override is not None:
        scen = dataclasses.replace(scen, seed=seed_override)
        normalized["run"]["seed"] = seed_override
    digest = _config_hash(normalized)

    if export_bundle and mode != "algorithm1":
        raise SchemaError("--export-bundle requires algorithm1 mode")

    out_dir = Path(out_dir)
    extra = {}
    if mode == "continuous":
        log = run_continuous(scen)
    else:
        if export_bundle:
            streams = synthesize_streams(scen)
            out_dir.mkdir(parents=True, exist_ok=True)
            write_bundle(out_dir / f"{loaded.name}.bundle", streams, scen)
            extra["bundle"] = f"{loaded.name}.bundle"
        # the generator is counter-based, so this re-draws the same streams
        log = run_algorithm1(scen)
        extra["frames_applied"] = int(log.frame_flag.sum())

    out_dir.mkdir(parents=True, exist_ok=True)
    est_path = out_dir / f"{loaded.name}.estimates.csv"
    write_estimates(est_path, log)
    summary = _summarize(loaded.name, mode, digest, log, scen.seed, extra)
    _write_summary(out_dir / f"{loaded.name}.summary.json", summary)
    err = "" if not log.has_truth else f", final err_rot {summary['final_errors']['rot']:.3g}"
    return f"{loaded.name}: {len(log.t)} rows, {log.jump_count} jumps{err} -> {est_path}"


def _simulate_worker(job):
    path, out_dir, mode_override, seed_override, export_bundle = job
    try:
        return 0, _simulate_one(path, out_dir, mode_override, seed_override, export_bundle)
    except Exception as e:
        code = _classify_exit(e)
        if code is None:
            raise
        return code, f"{Path(path).stem}: error: {e}"


def cmd_simulate(args) -> int:
    """Run one or more scenario files and write logs plus summaries."""
    # validate everything up front so a malformed file produces no output
    for p in args.scenarios:
        load_scenario(p)

    jobs = [
        (str(p), str(args.out), args.mode, args.seed, args.export_bundle)
        for p in args.scenarios
    ]
    results = []
    if args.batch > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=args.batch) as pool:
            results = list(pool.map(_simulate_worker, jobs))
    else:
        for job in jobs:
            results.append(_simulate_worker(job))

    code = 0
    for rc, line in results:
        print(line)
        code = max(code, rc)
    return code


# --------------------------------------------------------------------------
# replay


_PLACEHOLDER_POINTS = np.eye(3)


@dataclass(frozen=True)
class _ReplayConfig:
    config: ObserverConfig
    init: Optional[InitialEstimate]
    log_every: int
    normalized: dict


def _load_replay_config(path, lms, force_no_jumps) -> _ReplayConfig:
    """Observer settings for a replay.

    Reads [observer], [riccati] and [run].log_every from a scenario
    file; the landmark geometry is bound to the bundle's map, so a
    [landmarks] section (and the other simulation-only sections) are
    ignored here.
    """
    path = Path(path)
    doc = _parse_toml(path)
    label = path.name
    if "observer" not in doc:
        _fail(label, "missing required section [observer]")
    obs_sec = dict(doc.pop("observer"))
    ric_sec = doc.pop("riccati", None)
    if ric_sec is not None:
        ric_sec = dict(ric_sec)
    log_every = 1
    if "run" in doc:
        run_sec = dict(doc.pop("run"))
        if "log_every" in run_sec:
            log_every = _as_int(run_sec["log_every"], f"{label}: [run].log_every", minimum=1)
    for name in list(doc):
        _log.info("replay ignores section [%s] in %s", name, label)
        doc.pop(name)
    config, init, obs_norm, ric_norm = _parse_observer(
        obs_sec, ric_sec, lms, f"{label}: [observer]", f"{label}: [riccati]",
        force_no_jumps=force_no_jumps,
    )
    normalized = {"observer": obs_norm, "riccati": ric_norm, "log_every": log_every}
    return _ReplayConfig(config=config, init=init, log_every=log_every, normalized=normalized)


def _replay_frames(bundle: ReplayBundle, cfg: ObserverConfig):
    """Turn bundle frames into run inputs, enforcing the n_min rule.

    Frames observing the full map become plain corrections (reset rule
    active).  Frames with at least three distinct landmarks but not all
    of them get an override configuration built on the sub-geometry,
    with resets suppressed.  Anything smaller, outside the IMU time
    range, or degenerate is skipped with a warning.
    """
    index_of = {i: k for k, i in enumerate(bundle.ids)}
    full = frozenset(bundle.ids)
    t0, t1 = bundle.times[0], bundle.times[-1]
    frames = []
    counts = {"applied": 0, "partial": 0, "skipped_short": 0,
              "skipped_degenerate": 0, "out_of_range": 0}
    sub_cache = {}

    for t, ids, y in bundle.frames:
        if t < t0 - _SNAP or t > t1 + _SNAP:
            counts["out_of_range"] += 1
            _log.warning("frame at t=%g lies outside the IMU record; skipped", t)
            continue
        if len(ids) < 3:
            counts["skipped_short"] += 1
            _log.warning("frame at t=%g has %d landmark(s), need 3; skipped", t, len(ids))
            continue
        order = sorted(range(len(ids)), key=lambda k: index_of[ids[k]])
        y_sorted = y[order]
        if frozenset(ids) == full:
            frames.append((t, y_sorted))
            counts["applied"] += 1
            continue
        key = frozenset(ids)
        if key not in sub_cache:
            rows = sorted(index_of[i] for i in ids)
            try:
                sub = build_landmark_set(bundle.points[rows], bundle.weights[rows])
            except (CollinearLandmarksError, InsufficientLandmarksError):
                sub_cache[key] = None
            else:
                sub_cache[key] = ObserverConfig(
                    variant=cfg.variant,
                    landmarks=sub,
                    k_r=cfg.k_r,
                    k_v=cfg.k_v,
                    k_p=cfg.k_p,
                    k_omega=cfg.k_omega,
                    gravity=cfg.gravity,
                    jumps_enabled=False,
                    riccati=cfg.riccati,
                )
        sub_cfg = sub_cache[key]
        if sub_cfg is None:
            counts["skipped_degenerate"] += 1
            _log.warning("frame at t=%g observes a degenerate subset; skipped", t)
            continue
        frames.append((t, y_sorted, sub_cfg))
        counts["applied"] += 1
        counts["partial"] += 1
    return frames, counts


def cmd_replay(args) -> int:
    """Run the multi-rate observer over a recorded dataset directory."""
    bundle = read_bundle(args.bundle)
    dead_reckoning = len(bundle.ids) == 0
    if dead_reckoning:
        if bundle.frames:
            raise SchemaError(
                f"{Path(args.bundle) / 'landmark_obs.csv'}: observations present "
                "but landmarks_world.csv is empty"
            )
        _log.warning("empty landmark map: dead-reckoning only, no corrections")
        # the observer still needs some geometry to be constructed; with no
        # frames it never influences the estimate
        lms = build_landmark_set(_PLACEHOLDER_POINTS, np.ones(3))
    else:
        lms = build_landmark_set(bundle.points, bundle.weights)

    rcfg = _load_replay_config(args.config, lms, force_no_jumps=dead_reckoning)
    frames, counts = _replay_frames(bundle, rcfg.config)

    truth = b_w = b_a = None
    if args.truth is not None:
        R, v, p, b_w, b_a = read_truth(args.truth, bundle.times)
        truth = (R, v, p)

    est = rcfg.init or InitialEstimate()
    X0 = est.X
    if X0 is None:
        R0 = np.eye(3) if dead_reckoning else default_initial_attitude(lms)
        X0 = SE23(R0, np.zeros(3), np.zeros(3))
    kwargs = {}
    if np.any(est.b_omega != 0.0):
        kwargs["b_omega0"] = est.b_omega
    if np.any(est.b_a != 0.0):
        kwargs["b_a0"] = est.b_a
    init = initial_state(rcfg.config, X0=X0, t0=float(bundle.times[0]), **kwargs)

    frame_times = [f[0] for f in frames]
    fallback = None
    if len(frame_times) > 1:
        fallback = float(np.min(np.diff(frame_times)))

    log = run_discrete_sequence(
        bundle.times,
        bundle.omega_y,
        bundle.accel_y,
        frames,
        rcfg.config,
        init,
        truth=truth,
        frame_dt_fallback=fallback,
        log_every=rcfg.log_every,
        b_omega_true=b_w,
        b_a_true=b_a,
    )

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    est_path = out_dir / "replay.estimates.csv"
    write_estimates(est_path, log)
    extra = {"frames": counts, "dead_reckoning": dead_reckoning}
    summary = _summarize(
        "replay", "algorithm1", _config_hash(rcfg.normalized), log, None, extra
    )
    _write_summary(out_dir / "replay.summary.json", summary)
    print(
        f"replay: {len(log.t)} rows, {counts['applied']} frames applied "
        f"({counts['partial']} partial), {log.jump_count} jumps -> {est_path}"
    )
    return 0


# --------------------------------------------------------------------------
# diagnose


def cmd_diagnose(args) -> int:
    """Print the geometry and observability numbers for a scenario."""
    loaded = load_scenario(args.scenario)
    scen = loaded.scenario
    lms = scen.landmarks
    cfg = scen.observer

    print(f"scenario {loaded.name}")
    print(f"landmarks: {len(lms)} points, weight sum {lms.k_c:.6g}")
    print(f"centroid: [{lms.p_c[0]:.6g}, {lms.p_c[1]:.6g}, {lms.p_c[2]:.6g}]")
    ev = lms.eigvals
    print(f"moment eigenvalues (desc): {ev[0]:.9g}, {ev[1]:.9g}, {ev[2]:.9g}")

    if cfg.jumps_enabled:
        tset = cfg.transformations
        gap = hybrid_gap(lms, tset, delta=cfg.delta)
        print(f"reset policy: {gap.policy}, angle {tset.theta:.6g} rad")
        print(f"separation constant: {gap.delta_m_star:.9g}")
        print(f"admissible threshold range: (0, {gap.ceiling:.9g})")
        print(f"configured threshold: {gap.delta:.9g}")
    else:
        print("reset rule disabled in this scenario")
        try:
            tset = build_transformation_set(lms, 0.8 * math.pi, "eigenbasis")
            gap = hybrid_gap(lms, tset)
        except ConfigurationUnsupportedError as e:
            print(f"reset sizing unavailable: {e}")
        else:
            print(f"separation constant (eigenbasis, 0.8 pi): {gap.delta_m_star:.9g}")
            print(f"admissible threshold range: (0, {gap.ceiling:.9g})")

    model = scen.omega
    window = min(scen.duration, 2.0)
    print(f"observability window: [0, {window:.6g}] s")
    for layout in (("no-bias-6"), ("gyro-bias-6"), ("full-bias-9")):
        _, lam = observability_gramian(layout, lambda s: model.omega(s), 0.0, window)
        print(f"gramian lambda_min [{layout}]: {lam:.6g}")

    h = 1e-6
    worst = 0.0
    for frac in (0.0, 0.25, 0.5, 0.75, 1.0):
        s = frac * scen.duration
        w = model.omega(s)
        wd = (model.omega(min(s + h, scen.duration)) - model.omega(max(s - h, 0.0))) / (2 * h)
        det = observability_matrix_check(w, wd)
        worst = max(worst, abs(det - 1.0))
    print(f"differential observability: max |det - 1| = {worst:.3g} over 5 spot checks")
    return 0


# --------------------------------------------------------------------------
# entry point


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="se23nav",
        description="Hybrid landmark-aided inertial navigation: simulate, replay, diagnose.",
    )
    sub = p.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run scenario files and write estimate logs")
    sim.add_argument("scenarios", nargs="+", metavar="SCENARIO", help="scenario file(s)")
    sim.add_argument("--out", required=True, help="output directory")
    sim.add_argument("--mode", choices=_MODES, default=None,
                     help="override the execution mode from the file")
    sim.add_argument("--seed", type=int, default=None,
                     help="override the random seed from the file")
    sim.add_argument("--batch", type=int, default=1, metavar="N",
                     help="run up to N scenarios in parallel worker processes")
    sim.add_argument("--export-bundle", action="store_true",
                     help="also write the sampled streams as a replay dataset "
                          "(algorithm1 mode only)")
    sim.set_defaults(func=cmd_simulate)

    rep = sub.add_parser("replay", help="run the observer over a recorded dataset")
    rep.add_argument("bundle", help="dataset directory (imu.csv, landmarks_world.csv, "
                                    "landmark_obs.csv)")
    rep.add_argument("config", help="scenario file providing [observer] settings")
    rep.add_argument("--out", required=True, help="output directory")
    rep.add_argument("--truth", default=None,
                     help="ground-truth CSV aligned with imu.csv; enables error columns")
    rep.set_defaults(func=cmd_replay)

    diag = sub.add_parser("diagnose", help="print geometry and observability numbers")
    diag.add_argument("scenario", help="scenario file")
    diag.set_defaults(func=cmd_diagnose)
    return p


def main(argv=None) -> int:
    level = logging.INFO if os.environ.get("SE23NAV_VERBOSE") else logging.WARNING
    logging.basicConfig(
        stream=sys.stderr, level=level, format="se23nav: %(levelname)s: %(message)s"
    )
    args = _build_parser().parse_args(argv)
    try:
        return args.func(args)
    except Exception as e:
        code = _classify_exit(e)
        if code is None:
            raise
        kind = {2: "schema", 3: "divergence", 4: "unsupported configuration"}[code]
        _log.error("%s: %s", kind, e)
        return code


if __name__ == "__main__":
    sys.exit(main())
