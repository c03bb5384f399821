"""The full residual controller: feature pathway, microzone readout,
error-driven learning, and meta-regulated authority, assembled per config.

One instance runs exactly one episode. The step protocol is
compute action -> act -> observe reward -> update, driven by the harness.
All ablation switches from the config are honored here so the ablation
ladder can be exercised against the baselines.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .config import ExperimentConfig
from .features import build_expansion, expand, make_traces, trace_step
from .learning import LearnerConfig, composite_error, nlms_delta, update_heads
from .meta import (
    MetaMultipliers,
    PerformanceMonitor,
    drop_event,
    ema_update,
    gain_step,
    meta_step,
    soft_gate_step,
)
from .reference import estimate_phase, lookup_by_step, lookup_reference
from .residual import (
    AuthorityState,
    compute_residual,
    directional_gate,
    make_bank,
    microzone_weights,
    slow_contribution,
)


@dataclass
class MetaTraceRow:
    step: int
    ema: float
    best: float
    gate: float
    gain_mult: float
    lr_mult: float
    lambda_mult: float
    confidence: float
    event: str


class CerebellarController:
    """Residual pathway for one episode on top of a frozen nominal controller."""

    def __init__(self, cfg: ExperimentConfig, calibration, seed: int):
        self.cfg = cfg
        ab = cfg.ablation
        J = cfg.plant.joints
        self.J = J
        self.ab = ab
        self.reference = calibration.reference
        self.estimator = calibration.estimator.copy()

        self.input_dim = (2 if ab.no_reference_accel else 3) * J
        if ab.no_granule_expansion:
            self.expansion = None
            M = self.input_dim
        else:
            self.expansion = build_expansion(
                self.input_dim, cfg.features.M, cfg.features.seed, cfg.features.init_std
            )
            M = cfg.features.M
        self.M = M

        self.traces = None
        if not ab.no_temporal_filter:
            self.traces = make_traces(M, cfg.plant.dt, cfg.features.tau_E, cfg.features.tau_I)

        K = 1 if ab.no_microzones else cfg.zones.K
        width = cfg.zones.width if cfg.zones.width > 0 else None
        self.bank = make_bank(K, J, M, width, cfg.zones.min_weight, cfg.zones.w_max)

        lc = cfg.learn
        self.learner = LearnerConfig(
            eta_base=lc.eta_base, fast_scale=lc.fast_scale, slow_scale=lc.slow_scale,
            fast_decay=lc.fast_decay, slow_decay=lc.slow_decay,
            deadzone_theta=lc.deadzone_theta, momentum_beta=lc.momentum_beta,
            l2_gamma=lc.l2_gamma, epsilon=lc.epsilon, learning_start=lc.learning_start,
        )
        self.Lambda = np.full(J, lc.lam)
        self.momentum = np.zeros((J, M))

        au = cfg.authority
        self.g_dyn = au.g0
        self.meta_on = not ab.no_meta
        self.gating_on = self.meta_on and cfg.meta.soft_gating
        self.gate = 0.0 if self.gating_on else 1.0
        self.monitor = PerformanceMonitor(
            rho=cfg.meta.rho, window=cfg.meta.window, check_every=cfg.meta.check_every,
            drop_threshold=cfg.meta.drop_threshold, relative_drop=cfg.meta.relative_drop,
            stagnation_horizon=cfg.meta.stagnation_horizon,
            r_nom=getattr(calibration, "r_nom", None),
        )
        self.mults = MetaMultipliers(
            confidence=au.c0, c0=au.c0, c_max=au.c_max,
            lr_bounds=cfg.meta.lr_bounds, gain_bounds=cfg.meta.gain_bounds,
            lambda_bounds=cfg.meta.lambda_bounds,
            relax_rate=cfg.meta.kappa, decay_rate=cfg.meta.decay,
        )
        self.auth = AuthorityState(
            g=au.g0, g_max=au.g_max, c=au.c0, c_max=au.c_max,
            soft_gate=self.gate, tau_max=au.tau_max,
        )
        self.meta_trace: list[MetaTraceRow] = []

        # per-step intermediates for the observe() half
        self._ref_sample = None
        self._phi = None
        self._zone_w = None
        self._q = None
        self._qd = None

    # ------------------------------------------------------------------

    def _phase_and_ref(self, q: np.ndarray, qd: np.ndarray, step: int):
        if self.ab.time_indexed_reference:
            phase = ((step % self.reference.horizon) / self.reference.horizon
                     + self.ab.phase_offset) % 1.0
            return phase, lookup_by_step(self.reference, step)
        phase = estimate_phase(self.estimator, q, qd)
        phase = (phase + self.ab.phase_offset) % 1.0
        return phase, lookup_reference(self.reference, phase)

    def _features(self, q: np.ndarray, qd: np.ndarray, ref_sample) -> np.ndarray:
        if self.ab.no_reference_accel:
            x = np.concatenate([q, qd])
        else:
            x = np.concatenate([q, qd, ref_sample.qdd_d])
        h = x if self.expansion is None else expand(self.expansion, x)
        if self.traces is None:
            return h
        self.traces, phi = trace_step(self.traces, h)
        return phi

    def action(self, state, step: int, a_nom: np.ndarray) -> np.ndarray:
        phase, ref_sample = self._phase_and_ref(state.q, state.qd, step)
        phi = self._features(state.q, state.qd, ref_sample)
        zone_w = microzone_weights(self.bank, phase)

        if self.meta_on:
            self.auth.g = min(self.g_dyn * self.mults.gain_mult, self.auth.g_max)
            self.auth.c = self.mults.confidence
            self.auth.soft_gate = self.gate
        else:
            self.auth.g = self.cfg.authority.g0
            self.auth.c = 1.0
            self.auth.soft_gate = 1.0

        a_res = compute_residual(self.bank, self.auth, phi, phase, zone_w)
        if not self.ab.no_directional_gate:
            a_res = directional_gate(a_res, a_nom)

        self._ref_sample = ref_sample
        self._phi = phi
        self._zone_w = zone_w
        self._q = state.q
        self._qd = state.qd
        return a_res

    def slow_residual(self) -> np.ndarray:
        """Authority-scaled, pre-clip slow-pathway output of the current step."""
        return slow_contribution(self.bank, self.auth, self._phi, self._zone_w)

    def observe(self, state, step: int, R: float) -> None:
        lr_mult = self.mults.lr_mult if self.meta_on else 1.0
        lam_mult = self.mults.lambda_mult if self.meta_on else 1.0
        err = composite_error(self._q, self._qd, self._ref_sample, self.Lambda * lam_mult)
        r_norm = float(np.linalg.norm(err.r))
        eta = np.full(self.J, self.learner.eta_base * lr_mult)
        delta = nlms_delta(err.r, self._phi, eta, self.learner.epsilon)
        self.momentum = update_heads(
            self.bank, self._zone_w, delta, self.learner, self.momentum,
            step, r_norm, single_head=self.ab.no_fast_slow,
        )
        if not self.meta_on:
            return
        ema_update(self.monitor, R)
        degraded = drop_event(self.monitor)
        self.g_dyn = gain_step(
            self.g_dyn, degraded, self.cfg.meta.kappa_gain,
            self.cfg.meta.decay_gain, self.auth.g_max,
        )
        event = meta_step(self.monitor, self.mults, step)
        if step % self.monitor.check_every == 0:
            if self.gating_on and self.monitor.samples >= self.monitor.window:
                self.gate = soft_gate_step(self.monitor, self.gate, self.cfg.meta.kappa)
            self.meta_trace.append(MetaTraceRow(
                step=step, ema=self.monitor.ema, best=self.monitor.best,
                gate=self.gate, gain_mult=self.mults.gain_mult,
                lr_mult=self.mults.lr_mult, lambda_mult=self.mults.lambda_mult,
                confidence=self.mults.confidence, event=event,
            ))
