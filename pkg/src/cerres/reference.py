"""Phase-indexed reference trajectories and the online phase estimator.

The reference is recorded once from a fault-free rollout of the plant under
the frozen nominal controller. A phase-portrait estimator maps the dominant
joint's (q, qd) pair to a cyclic phase in [0, 1); lookups are nearest-neighbor
in circular distance, with an optional time-indexed mode.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyReferenceError, InvalidJointError, TooShortRolloutError

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class RefSample:
    q_d: np.ndarray
    qd_d: np.ndarray
    qdd_d: np.ndarray


@dataclass(frozen=True)
class ReferenceTrajectory:
    """Immutable phase-indexed reference; freely shared between episodes."""

    phases: np.ndarray   # (H,)  in [0, 1)
    q_d: np.ndarray      # (H, J)
    qd_d: np.ndarray     # (H, J)
    qdd_d: np.ndarray    # (H, J)
    dt: float

    @property
    def horizon(self) -> int:
        return self.phases.shape[0]


@dataclass
class PhaseEstimator:
    """Deterministic atan2 phase-portrait estimator with circular smoothing.

    Carries prev_phase between calls, so one instance serves exactly one
    kinematic stream.
    """

    dominant_joint: int
    velocity_scale: float
    smoothing: float = 0.90
    prev_phase: float | None = field(default=None)

    def copy(self) -> "PhaseEstimator":
        return PhaseEstimator(
            dominant_joint=self.dominant_joint,
            velocity_scale=self.velocity_scale,
            smoothing=self.smoothing,
            prev_phase=None,
        )


def estimate_phase(est: PhaseEstimator, q: np.ndarray, qd: np.ndarray) -> float:
    """Raw phase from atan2(-qd/scale, q), blended toward prev on the circle."""
    j = est.dominant_joint
    if j < 0 or j >= len(q):
        raise InvalidJointError(f"dominant joint {j} out of range for {len(q)} joints")
    angle = np.arctan2(-qd[j] / est.velocity_scale, q[j])
    raw = (angle / TWO_PI) % 1.0
    if est.prev_phase is None or est.smoothing == 0.0:
        phase = raw
    else:
        # shortest-arc blend avoids wrap artifacts near phase 0
        diff = (raw - est.prev_phase + 0.5) % 1.0 - 0.5
        phase = (est.prev_phase + (1.0 - est.smoothing) * diff) % 1.0
    est.prev_phase = phase
    return float(phase)


def circular_distance(a: float, b: float) -> float:
    d = abs(a - b)
    return min(d, 1.0 - d)


def build_reference(rollout, dt: float, estimator: PhaseEstimator) -> ReferenceTrajectory:
    """Record a reference from (q, qd) pairs; accelerations by finite differences.

    Phases are recorded in rollout order, not re-sorted. The last acceleration
    sample copies its predecessor.
    """
    if len(rollout) < 2:
        raise TooShortRolloutError(f"rollout needs at least 2 samples, got {len(rollout)}")
    if dt <= 0:
        raise TooShortRolloutError(f"dt must be positive, got {dt}")
    q = np.array([s[0] for s in rollout], dtype=float)
    qd = np.array([s[1] for s in rollout], dtype=float)
    qdd = np.empty_like(qd)
    qdd[:-1] = (qd[1:] - qd[:-1]) / dt
    qdd[-1] = qdd[-2]
    est = estimator.copy()
    phases = np.array([estimate_phase(est, q[i], qd[i]) for i in range(len(rollout))])
    return ReferenceTrajectory(phases=phases, q_d=q, qd_d=qd, qdd_d=qdd, dt=dt)


def estimator_from_rollout(rollout, smoothing: float = 0.90) -> PhaseEstimator:
    """Pick the largest-amplitude joint and normalize velocity to make the
    phase portrait roughly circular."""
    q = np.array([s[0] for s in rollout], dtype=float)
    qd = np.array([s[1] for s in rollout], dtype=float)
    j = int(np.argmax(np.max(np.abs(q), axis=0)))
    qd_amp = np.max(np.abs(qd[:, j]))
    scale = np.max(np.abs(q[:, j])) / qd_amp if qd_amp > 0 else 1.0
    return PhaseEstimator(dominant_joint=j, velocity_scale=float(scale), smoothing=smoothing)


def lookup_reference(ref: ReferenceTrajectory, phase: float) -> RefSample:
    """Nearest sample by circular distance; ties break to the lowest index."""
    if ref.horizon == 0:
        raise EmptyReferenceError("reference trajectory is empty")
    d = np.abs(ref.phases - phase)
    d = np.minimum(d, 1.0 - d)
    i = int(np.argmin(d))
    return RefSample(q_d=ref.q_d[i], qd_d=ref.qd_d[i], qdd_d=ref.qdd_d[i])


def lookup_by_step(ref: ReferenceTrajectory, step: int) -> RefSample:
    """Time-indexed mode: sample at step mod horizon."""
    if ref.horizon == 0:
        raise EmptyReferenceError("reference trajectory is empty")
    i = step % ref.horizon
    return RefSample(q_d=ref.q_d[i], qd_d=ref.qd_d[i], qdd_d=ref.qdd_d[i])


def save_reference_csv(ref: ReferenceTrajectory, path) -> None:
    J = ref.q_d.shape[1]
    header = (
        ["step", "phase"]
        + [f"q_{j}" for j in range(J)]
        + [f"qd_{j}" for j in range(J)]
        + [f"qdd_{j}" for j in range(J)]
    )
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(header)
        for i in range(ref.horizon):
            row = [i, repr(float(ref.phases[i]))]
            row += [repr(float(v)) for v in ref.q_d[i]]
            row += [repr(float(v)) for v in ref.qd_d[i]]
            row += [repr(float(v)) for v in ref.qdd_d[i]]
            w.writerow(row)


def load_reference_csv(path, dt: float) -> ReferenceTrajectory:
    with open(path, newline="") as f:
        rows = list(csv.reader(f))
    header, body = rows[0], rows[1:]
    J = sum(1 for h in header if h.startswith("q_"))
    phases = np.array([float(r[1]) for r in body])
    q = np.array([[float(v) for v in r[2 : 2 + J]] for r in body])
    qd = np.array([[float(v) for v in r[2 + J : 2 + 2 * J]] for r in body])
    qdd = np.array([[float(v) for v in r[2 + 2 * J : 2 + 3 * J]] for r in body])
    return ReferenceTrajectory(phases=phases, q_d=q, qd_d=qd, qdd_d=qdd, dt=dt)
