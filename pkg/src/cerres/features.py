"""Granule-style random feature expansion and dual-timescale trace filtering.

The controller input is projected through a fixed random matrix followed by a
rectifier, then filtered by a fast (excitatory) and a slow (inhibitory)
exponential trace. The effective activity is the difference of the two traces,
so steady-state input is nulled and only transients pass through.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatchError, InvalidDimensionError, NonFiniteInputError


@dataclass(frozen=True)
class FeatureExpansion:
    """Fixed random projection. V is sampled once and never mutated."""

    V: np.ndarray        # (M, input_dim)
    M: int
    input_dim: int
    seed: int
    init_std: float


def build_expansion(input_dim: int, M: int, seed: int, init_std: float = 0.04) -> FeatureExpansion:
    """Sample the projection matrix i.i.d. zero-mean Gaussian, deterministic in seed."""
    if M < 1 or input_dim < 1:
        raise InvalidDimensionError(f"need M >= 1 and input_dim >= 1, got M={M}, input_dim={input_dim}")
    if init_std <= 0:
        raise InvalidDimensionError(f"init_std must be positive, got {init_std}")
    rng = np.random.default_rng(seed)
    V = rng.normal(0.0, init_std, size=(M, input_dim))
    V.setflags(write=False)
    return FeatureExpansion(V=V, M=M, input_dim=input_dim, seed=seed, init_std=init_std)


def expand(exp: FeatureExpansion, x: np.ndarray) -> np.ndarray:
    """Rectified projection h = max(0, Vx)."""
    x = np.asarray(x, dtype=float)
    if x.shape != (exp.input_dim,):
        raise DimensionMismatchError(f"expected input of shape ({exp.input_dim},), got {x.shape}")
    if not np.all(np.isfinite(x)):
        raise NonFiniteInputError("non-finite entries in expansion input")
    return np.maximum(exp.V @ x, 0.0)


@dataclass
class TraceState:
    """Paired exponential filters; effective activity is phi_E - phi_I."""

    phi_E: np.ndarray
    phi_I: np.ndarray
    alpha_E: float
    alpha_I: float

    def __post_init__(self):
        if not (0.0 < self.alpha_I < self.alpha_E <= 1.0):
            raise InvalidDimensionError(
                f"need 0 < alpha_I < alpha_E <= 1, got alpha_E={self.alpha_E}, alpha_I={self.alpha_I}"
            )


def make_traces(M: int, dt: float, tau_E: float = 0.03, tau_I: float = 0.30) -> TraceState:
    """Traces at rest; filter rates alpha = clamp(dt/tau, 0, 1)."""
    alpha_E = min(max(dt / tau_E, 0.0), 1.0)
    alpha_I = min(max(dt / tau_I, 0.0), 1.0)
    return TraceState(phi_E=np.zeros(M), phi_I=np.zeros(M), alpha_E=alpha_E, alpha_I=alpha_I)


def trace_step(tr: TraceState, h: np.ndarray) -> tuple[TraceState, np.ndarray]:
    """Advance both traces one step and return the effective activity."""
    h = np.asarray(h, dtype=float)
    if h.shape != tr.phi_E.shape:
        raise DimensionMismatchError(f"expected activation of shape {tr.phi_E.shape}, got {h.shape}")
    phi_E = tr.phi_E + tr.alpha_E * (h - tr.phi_E)
    phi_I = tr.phi_I + tr.alpha_I * (h - tr.phi_I)
    new = TraceState(phi_E=phi_E, phi_I=phi_I, alpha_E=tr.alpha_E, alpha_I=tr.alpha_I)
    return new, phi_E - phi_I
