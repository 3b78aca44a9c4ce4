"""Weighted landmark geometry and the reset-candidate machinery.

A landmark set is a collection of known inertial-frame points p_i with
positive weights k_i.  Everything the observers need derives from the
weighted second-moment matrix about the weighted centroid,

    M = sum_i k_i (p_i - p_c)(p_i - p_c)^T,    p_c = (1/k_c) sum_i k_i p_i,

which must have rank at least two (three or more non-collinear points).
The reset mechanism compares the alignment cost of the current attitude
estimate against a finite set of rotated alternatives; the gap that
triggers a reset is sized from a separation constant computed out of
the spectrum of M.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    CollinearLandmarksError,
    ConfigurationUnsupportedError,
    InsufficientLandmarksError,
    InvalidArgumentError,
)
from .liegroup import SE23, TOL, angle_axis_to_rot, AngleAxis

__all__ = [
    "LandmarkSet",
    "TransformationSet",
    "HybridGap",
    "build_landmark_set",
    "delta_m",
    "delta_m_star",
    "cost_upsilon",
    "mu_q",
    "gamma_select",
    "build_transformation_set",
    "hybrid_gap",
    "undesired_rotations",
]

EIGENBASIS = "eigenbasis"
ORTHOGONAL_TRIPLE = "orthogonal-triple"


@dataclass(frozen=True)
class LandmarkSet:
    """Validated landmark geometry with cached derived quantities.

    points     (n, 3) inertial-frame landmark positions
    weights    (n,) positive weights
    k_c        sum of the weights
    p_c        weighted centroid
    m_matrix   weighted second moment about p_c (symmetric PSD)
    eigvals    eigenvalues of m_matrix, descending
    eigvecs    matching unit eigenvectors as columns, sign-normalized so
               the largest-magnitude component of each is positive
    """

    points: np.ndarray
    weights: np.ndarray
    k_c: float
    p_c: np.ndarray
    m_matrix: np.ndarray
    eigvals: np.ndarray
    eigvecs: np.ndarray
    # centered points and weighted centered points, cached for hot loops
    centered: np.ndarray = field(repr=False, default=None)
    weighted_centered: np.ndarray = field(repr=False, default=None)

    def __len__(self) -> int:
        return self.points.shape[0]


def build_landmark_set(points, weights) -> LandmarkSet:
    """Validate landmark positions and weights and cache the geometry.

    Raises
    ------
    InsufficientLandmarksError
        Fewer than three landmarks.
    CollinearLandmarksError
        The second-moment matrix has two (or three) zero eigenvalues
        relative to its largest one, i.e. the points are collinear or
        coincident.
    InvalidArgumentError
        Shape mismatch or non-positive weights.
    """
    pts = np.asarray(points, dtype=float)
    w = np.asarray(weights, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 3:
        raise InvalidArgumentError(f"points must have shape (n, 3), got {pts.shape}")
    if w.shape != (pts.shape[0],):
        raise InvalidArgumentError("weights must match the number of landmarks")
    if pts.shape[0] < 3:
        raise InsufficientLandmarksError(f"need at least 3 landmarks, got {pts.shape[0]}")
    if np.any(w <= 0):
        raise InvalidArgumentError("weights must be strictly positive")

    k_c = float(np.sum(w))
    p_c = (w @ pts) / k_c
    centered = pts - p_c
    M = (w[:, None] * centered).T @ centered
    M = 0.5 * (M + M.T)

    vals, vecs = np.linalg.eigh(M)
    order = np.argsort(vals)[::-1]
    vals = np.maximum(vals[order], 0.0)
    vecs = vecs[:, order]
    for j in range(3):
        col = vecs[:, j]
        if col[int(np.argmax(np.abs(col)))] < 0:
            vecs[:, j] = -col

    if vals[0] <= 0 or vals[1] < TOL.collinear_rel * vals[0]:
        raise CollinearLandmarksError(
            "landmarks are collinear: second-moment matrix has rank below 2 "
            f"(eigenvalues {vals})"
        )

    return LandmarkSet(
        points=pts,
        weights=w,
        k_c=k_c,
        p_c=p_c,
        m_matrix=M,
        eigvals=vals,
        eigvecs=vecs,
        centered=centered,
        weighted_centered=w[:, None] * centered,
    )


def delta_m(u, v, M) -> float:
    """Separation map u^T (tr(M_v) I - M_v) u with M_v = M (I - 2 v v^T).

    u is a candidate reset axis, v a unit eigenvector of M designating
    one of the undesired attitudes.
    """
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    M = np.asarray(M, dtype=float)
    M_v = M @ (np.eye(3) - 2.0 * np.outer(v, v))
    return float(u @ (np.trace(M_v) * np.eye(3) - M_v) @ u)


def _eig_descending(M: np.ndarray):
    vals, vecs = np.linalg.eigh(M)
    order = np.argsort(vals)[::-1]
    return np.maximum(vals[order], 0.0), vecs[:, order]


def _contains_eigenbasis(axes: np.ndarray, vecs: np.ndarray) -> bool:
    for j in range(3):
        e = vecs[:, j]
        if not any(
            min(np.linalg.norm(u - e), np.linalg.norm(u + e)) < 1e-8 for u in axes
        ):
            return False
    return True


def _has_orthonormal_triple(axes: np.ndarray) -> bool:
    unit = [u for u in axes if abs(np.linalg.norm(u) - 1.0) < 1e-9]
    for trio in itertools.combinations(unit, 3):
        a, b, c = trio
        if max(abs(a @ b), abs(a @ c), abs(b @ c)) < 1e-8:
            return True
    return False


def _eigenbasis_bound(vals: np.ndarray) -> float | None:
    """Lower bound on the separation constant when the axes include the
    eigenbasis of M.  Returns None when no case applies (a repeated pair
    that touches zero)."""
    lam1, lam2, lam3 = vals
    scale = max(lam1, 1e-300)
    rep12 = (lam1 - lam2) < TOL.eig_rel_gap * scale
    rep23 = (lam2 - lam3) < TOL.eig_rel_gap * scale
    zero3 = lam3 < TOL.collinear_rel * scale
    if rep12 and rep23:
        return (2.0 / 3.0) * lam1 if not zero3 else None
    if rep12 or rep23:
        if zero3:
            return None
        rep, other = (lam1, lam3) if rep12 else (lam2, lam1)
        return min(2.0 * rep, other)
    # all distinct; smallest eigenvalue may be zero; tr(M) - lambda_max
    return lam2 + lam3


def delta_m_star(M, axes) -> float:
    """Separation constant min over eigen-directions, max over axes.

    The value is checked against the applicable closed-form lower bound;
    when neither bound's precondition holds the configuration cannot
    guarantee escape from the undesired attitudes and
    ``ConfigurationUnsupportedError`` is raised.
    """
    M = np.asarray(M, dtype=float)
    axes = np.atleast_2d(np.asarray(axes, dtype=float))
    if axes.shape[1] != 3 or axes.shape[0] < 1:
        raise InvalidArgumentError("axes must have shape (k, 3) with k >= 1")
    vals, vecs = _eig_descending(M)

    value = min(
        max(delta_m(u, vecs[:, j], M) for u in axes) for j in range(3)
    )

    bound = None
    if _contains_eigenbasis(axes, vecs):
        bound = _eigenbasis_bound(vals)
    if bound is None and _has_orthonormal_triple(axes):
        b2 = (2.0 / 3.0) * (float(np.sum(vals)) - 2.0 * vals[0])
        if b2 > 0:
            bound = b2
    if bound is None:
        raise ConfigurationUnsupportedError(
            "landmark spectrum admits no separation bound for these axes "
            f"(eigenvalues {vals})"
        )
    assert value >= bound - 1e-9 * max(1.0, vals[0]), (value, bound)
    return float(value)


def _rotated_centered(X_hat: SE23, lms: LandmarkSet, y_meas):
    y = np.asarray(y_meas, dtype=float)
    y_c = (lms.weights @ y) / lms.k_c
    return (y - y_c) @ X_hat.rot.T  # rows: R_hat (y_i - y_c)


def cost_upsilon(X_hat: SE23, lms: LandmarkSet, y_meas) -> float:
    """Weighted alignment cost of an estimate against measured landmarks.

    y_meas holds the body-frame landmark measurements as rows.  Both the
    landmark positions and the measurements are centered on their own
    weighted means, so the cost depends only on the attitude estimate.
    """
    res = lms.centered - _rotated_centered(X_hat, lms, y_meas)
    return 0.5 * float(np.sum(lms.weights * np.einsum("ij,ij->i", res, res)))


def _candidate_costs_from(D, lms: LandmarkSet, tset: "TransformationSet"):
    # rows of D @ rotations[q]: R_q^T R_hat (y_i - y_c), one slab per candidate
    res = lms.centered - np.matmul(D, tset.rotations)
    return 0.5 * np.einsum("qij,qij,i->q", res, res, lms.weights)


def _candidate_costs(X_hat: SE23, lms: LandmarkSet, y_meas, tset: "TransformationSet"):
    """Alignment cost after applying each candidate reset, vectorized."""
    D = _rotated_centered(X_hat, lms, y_meas)
    return _candidate_costs_from(D, lms, tset)


def mu_q(X_hat: SE23, lms: LandmarkSet, y_meas, tset: "TransformationSet") -> float:
    """Reset gap: current cost minus the best cost over the candidate set."""
    D = _rotated_centered(X_hat, lms, y_meas)
    res = lms.centered - D
    cost_now = 0.5 * float(np.sum(lms.weights * np.einsum("ij,ij->i", res, res)))
    return cost_now - float(np.min(_candidate_costs_from(D, lms, tset)))


def _gamma_index(X_hat: SE23, lms: LandmarkSet, y_meas, tset: "TransformationSet") -> int:
    costs = _candidate_costs(X_hat, lms, y_meas, tset)
    # np.argmin already resolves exact ties to the lowest index
    return int(np.argmin(costs))


def gamma_select(X_hat: SE23, lms: LandmarkSet, y_meas, tset: "TransformationSet") -> SE23:
    """Candidate transformation with the lowest post-reset cost.

    Exact ties resolve to the lowest candidate index, which makes runs
    reproducible bit for bit.
    """
    return tset.elements[_gamma_index(X_hat, lms, y_meas, tset)]


@dataclass(frozen=True)
class TransformationSet:
    """Finite set of reset transformations built from a landmark set."""

    theta: float
    axes: np.ndarray          # (k, 3) rotation axes
    policy: str
    p_c: np.ndarray
    rotations: np.ndarray     # (k, 3, 3) rotations by theta about each axis
    elements: tuple           # matching extended poses T(R_q, 0, (I - R_q) p_c)

    def __len__(self) -> int:
        return len(self.elements)


def build_transformation_set(lms: LandmarkSet, theta: float, policy: str) -> TransformationSet:
    """Construct the reset candidates for a landmark set.

    policy "eigenbasis" uses the eigenvectors of M and requires the
    spectrum to be either all positive or fully distinct.  policy
    "orthogonal-triple" uses the canonical axes e1, e2, e3 and requires
    tr(M) - 2 lambda_max > 0.  Violations raise
    ``ConfigurationUnsupportedError``.
    """
    theta = float(theta)
    if not 0.0 < theta <= math.pi:
        raise InvalidArgumentError(f"theta must lie in (0, pi], got {theta}")
    vals = lms.eigvals
    scale = max(vals[0], 1e-300)
    if policy == EIGENBASIS:
        distinct = (vals[0] - vals[1]) >= TOL.eig_rel_gap * scale and (
            vals[1] - vals[2]
        ) >= TOL.eig_rel_gap * scale
        all_positive = vals[2] >= TOL.collinear_rel * scale
        if not (distinct or all_positive):
            raise ConfigurationUnsupportedError(
                "eigenbasis policy needs distinct eigenvalues or a positive "
                f"definite second moment, got eigenvalues {vals}"
            )
        axes = lms.eigvecs.T.copy()
    elif policy == ORTHOGONAL_TRIPLE:
        if float(np.sum(vals)) - 2.0 * vals[0] <= 0:
            raise ConfigurationUnsupportedError(
                "orthogonal-triple policy needs tr(M) > 2 lambda_max, got "
                f"eigenvalues {vals}"
            )
        axes = np.eye(3)
    else:
        raise InvalidArgumentError(f"unknown transformation policy {policy!r}")

    rotations = np.stack([angle_axis_to_rot(AngleAxis(theta, u)) for u in axes])
    elements = tuple(
        SE23(R_q, np.zeros(3), (np.eye(3) - R_q) @ lms.p_c) for R_q in rotations
    )
    return TransformationSet(
        theta=theta,
        axes=axes,
        policy=policy,
        p_c=lms.p_c.copy(),
        rotations=rotations,
        elements=elements,
    )


@dataclass(frozen=True)
class HybridGap:
    """Reset threshold delta and the quantities it was sized from."""

    delta: float
    delta_m_star: float
    ceiling: float            # (1 - cos(theta)) * delta_m_star, exclusive upper limit
    policy: str


def hybrid_gap(
    lms: LandmarkSet,
    tset: TransformationSet,
    fraction: float = 0.3,
    delta: float | None = None,
) -> HybridGap:
    """Size the reset threshold.

    Without an explicit delta the threshold is fraction * ceiling where
    ceiling = (1 - cos(theta)) * separation constant; an explicit delta
    is validated against (0, ceiling).
    """
    dm = delta_m_star(lms.m_matrix, tset.axes)
    ceiling = (1.0 - math.cos(tset.theta)) * dm
    if delta is None:
        if not 0.0 < fraction < 1.0:
            raise InvalidArgumentError(f"fraction must lie in (0, 1), got {fraction}")
        delta = fraction * ceiling
    if not 0.0 < delta < ceiling:
        raise InvalidArgumentError(
            f"delta must lie in (0, {ceiling}), got {delta}"
        )
    return HybridGap(delta=float(delta), delta_m_star=dm, ceiling=ceiling, policy=tset.policy)


def undesired_rotations(lms: LandmarkSet):
    """Representative undesired attitudes: half-turns about each eigen-direction.

    For repeated eigenvalues the undesired set is a continuum; the three
    canonical eigenvectors are returned as representatives.
    """
    out = []
    for j in range(3):
        u = lms.eigvecs[:, j]
        out.append((u.copy(), 2.0 * np.outer(u, u) - np.eye(3)))
    return out
