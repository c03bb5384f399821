"""Inference-time residual baselines sharing the simulator and nominal
controller: a raw-input normalized-LMS filter and a fixed-random-feature
(CMAC-style) linear readout.

Both adapt online from the composite tracking error with fixed
hyperparameters. Neither monitors reward nor adapts its own learning rate,
gain, or tracking gains; those code paths do not exist here.
"""

from __future__ import annotations

import numpy as np

from .config import ExperimentConfig
from .features import build_expansion, expand
from .learning import LearnerConfig, composite_error, nlms_delta, update_heads
from .reference import estimate_phase, lookup_by_step, lookup_reference
from .residual import AuthorityState, compute_residual, directional_gate, make_bank


class _ReferenceFollower:
    """Shared phase lookup and input assembly for the residual baselines."""

    def __init__(self, cfg: ExperimentConfig, calibration):
        self.reference = calibration.reference
        self.estimator = calibration.estimator.copy()
        self.time_indexed = cfg.ablation.time_indexed_reference
        self.phase_offset = cfg.ablation.phase_offset
        self.use_accel = not cfg.ablation.no_reference_accel

    def phase_and_ref(self, q, qd, step):
        if self.time_indexed:
            phase = ((step % self.reference.horizon) / self.reference.horizon
                     + self.phase_offset) % 1.0
            return phase, lookup_by_step(self.reference, step)
        phase = estimate_phase(self.estimator, q, qd)
        phase = (phase + self.phase_offset) % 1.0
        return phase, lookup_reference(self.reference, phase)

    def input_vector(self, q, qd, ref_sample):
        if self.use_accel:
            return np.concatenate([q, qd, ref_sample.qdd_d])
        return np.concatenate([q, qd])


class LmsBaseline:
    """Linear residual over raw inputs with the squared-norm NLMS rule.

    W_{t+1} = W_t + eta * r x^T / (||x||^2 + eps); residual = g W x, clipped.
    All parameters stay fixed for the whole deployment.
    """

    def __init__(self, cfg: ExperimentConfig, calibration, seed: int):
        J = cfg.plant.joints
        self.J = J
        self.D = (2 if cfg.ablation.no_reference_accel else 3) * J
        self.W = np.zeros((J, self.D))
        self.eta = cfg.baselines.lms_eta
        self.g = cfg.baselines.lms_gain
        self.Lambda = np.full(J, cfg.learn.lam)
        self.warmup = cfg.baselines.warmup
        self.tau_max = cfg.authority.tau_max
        self.epsilon = cfg.learn.epsilon
        self.use_directional_gate = not cfg.ablation.no_directional_gate
        self.follower = _ReferenceFollower(cfg, calibration)
        self._x = None
        self._ref_sample = None
        self._q = None
        self._qd = None

    def action(self, state, step, a_nom):
        _, ref_sample = self.follower.phase_and_ref(state.q, state.qd, step)
        x = self.follower.input_vector(state.q, state.qd, ref_sample)
        a_res = np.clip(self.g * (self.W @ x), -self.tau_max, self.tau_max)
        if self.use_directional_gate:
            a_res = directional_gate(a_res, a_nom)
        self._x = x
        self._ref_sample = ref_sample
        self._q = state.q
        self._qd = state.qd
        return a_res

    def observe(self, state, step, R):
        if step < self.warmup:
            return
        err = composite_error(self._q, self._qd, self._ref_sample, self.Lambda)
        denom = float(np.dot(self._x, self._x)) + self.epsilon
        self.W = self.W + self.eta * np.outer(err.r, self._x) / denom

    def frozen_parameters(self):
        return (self.eta, self.g, tuple(self.Lambda))


class CmacBaseline:
    """Fixed random rectifier features with a single linear readout head,
    adapted by the normalized LMS rule on the composite error.

    No performance gating, no temporal filtering, no meta-adaptation: the
    feature vector feeds the readout directly and (eta, g, Lambda) are fixed.
    """

    def __init__(self, cfg: ExperimentConfig, calibration, seed: int):
        J = cfg.plant.joints
        self.J = J
        self.input_dim = (2 if cfg.ablation.no_reference_accel else 3) * J
        if cfg.ablation.no_granule_expansion:
            self.expansion = None
            self.M = self.input_dim
        else:
            self.expansion = build_expansion(
                self.input_dim, cfg.features.M, cfg.features.seed, cfg.features.init_std
            )
            self.M = cfg.features.M
        self.bank = make_bank(1, J, self.M, min_weight=cfg.zones.min_weight,
                              w_max=cfg.zones.w_max)
        self.auth = AuthorityState(
            g=cfg.baselines.cmac_gain, g_max=cfg.authority.g_max,
            c=1.0, c_max=1.0, soft_gate=1.0, tau_max=cfg.authority.tau_max,
        )
        lc = cfg.learn
        self.learner = LearnerConfig(
            eta_base=cfg.baselines.cmac_eta, fast_scale=1.0, slow_scale=1.0,
            fast_decay=0.0, slow_decay=0.0, deadzone_theta=lc.deadzone_theta,
            momentum_beta=lc.momentum_beta, l2_gamma=lc.l2_gamma,
            epsilon=lc.epsilon, learning_start=cfg.baselines.warmup,
        )
        self.Lambda = np.full(J, cfg.learn.lam)
        self.momentum = np.zeros((J, self.M))
        self.follower = _ReferenceFollower(cfg, calibration)
        self.use_directional_gate = not cfg.ablation.no_directional_gate
        self._h = None
        self._zone_w = np.array([1.0])
        self._ref_sample = None
        self._q = None
        self._qd = None

    def action(self, state, step, a_nom):
        phase, ref_sample = self.follower.phase_and_ref(state.q, state.qd, step)
        x = self.follower.input_vector(state.q, state.qd, ref_sample)
        h = x if self.expansion is None else expand(self.expansion, x)
        a_res = compute_residual(self.bank, self.auth, h, phase, self._zone_w)
        if self.use_directional_gate:
            a_res = directional_gate(a_res, a_nom)
        self._h = h
        self._ref_sample = ref_sample
        self._q = state.q
        self._qd = state.qd
        return a_res

    def observe(self, state, step, R):
        err = composite_error(self._q, self._qd, self._ref_sample, self.Lambda)
        r_norm = float(np.linalg.norm(err.r))
        eta = np.full(self.J, self.learner.eta_base)
        delta = nlms_delta(err.r, self._h, eta, self.learner.epsilon)
        self.momentum = update_heads(
            self.bank, self._zone_w, delta, self.learner, self.momentum,
            step, r_norm, single_head=True,
        )

    def frozen_parameters(self):
        return (self.learner.eta_base, self.auth.g, tuple(self.Lambda))
