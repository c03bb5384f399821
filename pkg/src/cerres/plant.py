"""Desk-scale coupled-oscillator plant with a frozen nominal controller and
injectable faults.

Four joints with symmetric stiffness coupling track a periodic desired
trajectory under a computed-torque PD law. Faults (actuator scale/bias, mass,
damping, friction multipliers) activate inside a step window and never touch
the controller. Integration is semi-implicit Euler and fully deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, NonFiniteInputError
from .reference import RefSample

FAULT_FAMILIES = {
    # family -> (severity_lo, severity_hi)
    "actuator_scale": (0.4, 0.9),
    "actuator_bias": (-0.1, 0.1),
    "mass_multiplier": (1.2, 1.6),
    "damping_multiplier": (1.2, 2.2),
    "friction_multiplier": (0.1, 2.0),
}


@dataclass
class PlantState:
    q: np.ndarray
    qd: np.ndarray
    t: int
    dt: float


@dataclass(frozen=True)
class PlantModel:
    J: int
    inertia: np.ndarray
    damping: np.ndarray
    coupling: np.ndarray
    friction_coulomb: np.ndarray
    torque_limit: np.ndarray

    def __post_init__(self):
        if np.any(self.inertia <= 0):
            raise ConfigError("inertia must be positive")
        if not np.allclose(self.coupling, self.coupling.T):
            raise ConfigError("coupling matrix must be symmetric")
        if np.any(self.torque_limit <= 0):
            raise ConfigError("torque limits must be positive")


@dataclass(frozen=True)
class FaultSpec:
    family: str
    severity: float
    affected_joints: tuple = ()     # empty = all joints
    onset_step: int = 0
    removal_step: int | None = None

    def __post_init__(self):
        if self.family not in FAULT_FAMILIES:
            raise ConfigError(f"unknown fault family {self.family!r}")
        lo, hi = FAULT_FAMILIES[self.family]
        if not (lo <= self.severity <= hi):
            raise ConfigError(
                f"severity {self.severity} outside [{lo}, {hi}] for family {self.family!r}"
            )
        if self.removal_step is not None and self.onset_step > self.removal_step:
            raise ConfigError("fault onset must not come after removal")

    def active(self, step: int) -> bool:
        if step < self.onset_step:
            return False
        if self.removal_step is not None and step >= self.removal_step:
            return False
        return True

    def joint_mask(self, J: int) -> np.ndarray:
        mask = np.zeros(J, dtype=bool)
        if not self.affected_joints:
            mask[:] = True
        else:
            mask[list(self.affected_joints)] = True
        return mask

    @property
    def cell_id(self) -> str:
        return f"{self.family}:{self.severity:g}"


def plant_step(model: PlantModel, state: PlantState, torque: np.ndarray,
               fault: FaultSpec | None, step: int) -> PlantState:
    """One semi-implicit Euler step with fault-perturbed effective parameters."""
    torque = np.asarray(torque, dtype=float)
    if not np.all(np.isfinite(torque)):
        raise NonFiniteInputError("non-finite torque command")
    scale = np.ones(model.J)
    bias = np.zeros(model.J)
    inertia = model.inertia
    damping = model.damping
    friction = model.friction_coulomb
    if fault is not None and fault.active(step):
        mask = fault.joint_mask(model.J)
        if fault.family == "actuator_scale":
            scale = np.where(mask, fault.severity, 1.0)
        elif fault.family == "actuator_bias":
            bias = np.where(mask, fault.severity, 0.0)
        elif fault.family == "mass_multiplier":
            inertia = np.where(mask, inertia * fault.severity, inertia)
        elif fault.family == "damping_multiplier":
            damping = np.where(mask, damping * fault.severity, damping)
        elif fault.family == "friction_multiplier":
            friction = np.where(mask, friction * fault.severity, friction)
    u = np.clip(scale * torque + bias, -model.torque_limit, model.torque_limit)
    # smooth coulomb friction avoids sign chatter at qd ~ 0
    fric = friction * np.tanh(state.qd / 0.01)
    qdd = (u - damping * state.qd - model.coupling @ state.q - fric) / inertia
    qd_new = state.qd + state.dt * qdd
    q_new = state.q + state.dt * qd_new
    return PlantState(q=q_new, qd=qd_new, t=state.t + 1, dt=state.dt)


@dataclass(frozen=True)
class NominalGains:
    """Frozen after calibration; the stand-in for the fixed base policy."""

    Kp: np.ndarray
    Kd: np.ndarray


def nominal_action(model: PlantModel, state: PlantState, ref_sample: RefSample,
                   gains: NominalGains) -> np.ndarray:
    """Computed-torque PD: feedforward inertia/stiffness terms plus PD feedback."""
    e = ref_sample.q_d - state.q
    edot = ref_sample.qd_d - state.qd
    u = (
        model.inertia * ref_sample.qdd_d
        + model.coupling @ ref_sample.q_d
        + gains.Kp * e
        + gains.Kd * edot
    )
    return np.clip(u, -model.torque_limit, model.torque_limit)


def reward(state: PlantState, ref_sample: RefSample, action: np.ndarray) -> float:
    """Tracking cost with a small control penalty; 0 is the maximum."""
    e = ref_sample.q_d - state.q
    return float(-np.dot(e, e) - 0.01 * np.dot(action, action))


@dataclass(frozen=True)
class DesiredTrajectory:
    """Analytic periodic trajectory the frozen controller tracks internally."""

    amplitudes: np.ndarray
    phase_shift: np.ndarray
    period_steps: int
    dt: float

    def sample(self, step: int) -> RefSample:
        omega = 2.0 * np.pi / (self.period_steps * self.dt)
        th = omega * step * self.dt + self.phase_shift
        q = self.amplitudes * np.sin(th)
        qd = self.amplitudes * omega * np.cos(th)
        qdd = -self.amplitudes * omega * omega * np.sin(th)
        return RefSample(q_d=q, qd_d=qd, qdd_d=qdd)


def unforced_energy(model: PlantModel, state: PlantState) -> float:
    """Kinetic plus coupling-potential energy; dissipative with damping > 0."""
    return float(
        0.5 * np.dot(state.qd, model.inertia * state.qd)
        + 0.5 * np.dot(state.q, model.coupling @ state.q)
    )
