"""Performance-driven regulation of residual authority.

A reward EMA is compared against its running best (drop events) and against a
fault-free nominal baseline (soft gating). Events relax learning-rate, gain,
and tracking-gain multipliers toward bounded targets; absent events everything
decays back to nominal. The gain itself follows dissipative dynamics that pump
only while degradation persists.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import MissingBaselineError, NonFiniteInputError

EVENT_NONE = ""
EVENT_DROP = "drop"
EVENT_STAGNATION = "stagnation"


@dataclass
class PerformanceMonitor:
    rho: float = 0.10
    window: int = 50
    check_every: int = 20
    drop_threshold: float = -0.30
    stagnation_horizon: int = 100
    relative_drop: bool = True
    r_nom: float | None = None
    ema: float | None = None
    best: float | None = None
    steps_since_improvement: int = 0
    samples: int = 0


def ema_update(mon: PerformanceMonitor, R: float) -> PerformanceMonitor:
    """Advance the reward EMA and maintain the running best in place."""
    if not np.isfinite(R):
        raise NonFiniteInputError(f"non-finite reward {R}")
    if mon.ema is None:
        mon.ema = float(R)
    else:
        mon.ema = (1.0 - mon.rho) * mon.ema + mon.rho * float(R)
    mon.samples += 1
    if mon.best is None or mon.ema > mon.best:
        mon.best = mon.ema
        mon.steps_since_improvement = 0
    else:
        mon.steps_since_improvement += 1
    return mon


def _below(value: float, baseline: float, threshold: float, relative: bool) -> bool:
    if relative:
        return value < baseline + threshold * abs(baseline)
    return value < baseline + threshold


def drop_event(mon: PerformanceMonitor) -> bool:
    """EMA fell past the drop threshold relative to the historical best."""
    if mon.best is None or mon.samples < mon.window:
        return False
    return _below(mon.ema, mon.best, mon.drop_threshold, mon.relative_drop)


def stagnation_event(mon: PerformanceMonitor) -> bool:
    if mon.samples < mon.window:
        return False
    return mon.steps_since_improvement >= mon.stagnation_horizon


def degraded_vs_nominal(mon: PerformanceMonitor) -> bool:
    """EMA fell past the drop threshold relative to the fault-free baseline."""
    if mon.r_nom is None:
        raise MissingBaselineError("nominal reward baseline not set")
    if mon.ema is None:
        return False
    return _below(mon.ema, mon.r_nom, mon.drop_threshold, mon.relative_drop)


def gain_step(g: float, degraded: bool, kappa: float, lambda_meta: float, g_max: float) -> float:
    """g + kappa*[degraded] - lambda*g, clamped to [0, g_max]."""
    g = g + (kappa if degraded else 0.0) - lambda_meta * g
    return min(max(g, 0.0), g_max)


@dataclass
class MetaMultipliers:
    lr_mult: float = 1.0
    gain_mult: float = 1.0
    lambda_mult: float = 1.0
    confidence: float = 0.40
    c0: float = 0.40
    c_max: float = 0.70
    lr_bounds: tuple = (0.5, 2.0)
    gain_bounds: tuple = (0.5, 2.0)
    lambda_bounds: tuple = (0.7, 1.5)
    relax_rate: float = 0.05    # kappa, per check
    decay_rate: float = 0.01    # lambda_meta, per check


def _relax(value: float, target: float, rate: float, bounds: tuple) -> float:
    value = value + rate * (target - value)
    return min(max(value, bounds[0]), bounds[1])


def meta_step(mon: PerformanceMonitor, mults: MetaMultipliers, step: int) -> str:
    """Relax multipliers on check steps; returns the detected event label."""
    if step % mon.check_every != 0:
        return EVENT_NONE
    if drop_event(mon):
        # aggressive correction: bound extremes
        mults.lr_mult = _relax(mults.lr_mult, 2.0, mults.relax_rate, mults.lr_bounds)
        mults.gain_mult = _relax(mults.gain_mult, 2.0, mults.relax_rate, mults.gain_bounds)
        mults.lambda_mult = _relax(mults.lambda_mult, 1.5, mults.relax_rate, mults.lambda_bounds)
        mults.confidence = _relax(mults.confidence, mults.c_max, mults.relax_rate, (0.0, mults.c_max))
        return EVENT_DROP
    if stagnation_event(mon):
        # conservative retreat
        mults.lr_mult = _relax(mults.lr_mult, 0.5, mults.relax_rate, mults.lr_bounds)
        mults.gain_mult = _relax(mults.gain_mult, 1.0, mults.decay_rate, mults.gain_bounds)
        mults.lambda_mult = _relax(mults.lambda_mult, 1.0, mults.decay_rate, mults.lambda_bounds)
        mults.confidence = _relax(mults.confidence, mults.c0, mults.decay_rate, (0.0, mults.c_max))
        return EVENT_STAGNATION
    mults.lr_mult = _relax(mults.lr_mult, 1.0, mults.decay_rate, mults.lr_bounds)
    mults.gain_mult = _relax(mults.gain_mult, 1.0, mults.decay_rate, mults.gain_bounds)
    mults.lambda_mult = _relax(mults.lambda_mult, 1.0, mults.decay_rate, mults.lambda_bounds)
    mults.confidence = _relax(mults.confidence, mults.c0, mults.decay_rate, (0.0, mults.c_max))
    return EVENT_NONE


def soft_gate_step(mon: PerformanceMonitor, gate: float, kappa: float) -> float:
    """Relax the gate toward 1 under sustained degradation, else toward 0."""
    target = 1.0 if degraded_vs_nominal(mon) else 0.0
    gate = gate + kappa * (target - gate)
    return min(max(gate, 0.0), 1.0)
