"""Error-driven local learning for the residual heads.

Composite tracking error r = edot + Lambda e drives a normalized LMS update,
smoothed by momentum and distributed to the fast and slow heads at distinct
rates. A deadzone on ||r|| and a learning-start step suppress drift when the
plant is near nominal.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatchError
from .residual import MicrozoneBank


@dataclass
class TrackingError:
    e: np.ndarray
    edot: np.ndarray
    r: np.ndarray
    Lambda: np.ndarray


@dataclass
class LearnerConfig:
    eta_base: float = 0.05
    fast_scale: float = 5.0
    slow_scale: float = 0.2
    fast_decay: float = 1e-3
    slow_decay: float = 0.0
    deadzone_theta: float = 0.25
    momentum_beta: float = 0.85
    l2_gamma: float = 4e-6
    epsilon: float = 1e-8
    learning_start: int = 200


def composite_error(q: np.ndarray, qd: np.ndarray, ref_sample, Lambda: np.ndarray) -> TrackingError:
    Lambda = np.asarray(Lambda, dtype=float)
    if not (q.shape == qd.shape == ref_sample.q_d.shape == Lambda.shape):
        raise DimensionMismatchError("joint dimension mismatch in composite_error")
    e = ref_sample.q_d - q
    edot = ref_sample.qd_d - qd
    return TrackingError(e=e, edot=edot, r=edot + Lambda * e, Lambda=Lambda)


def nlms_delta(r: np.ndarray, phi: np.ndarray, eta: np.ndarray, epsilon: float) -> np.ndarray:
    """Row j of the result is eta[j] * r[j] * phi^T / (||phi|| + epsilon)."""
    eta = np.asarray(eta, dtype=float)
    if eta.shape != r.shape:
        raise DimensionMismatchError("eta and r must have one entry per joint")
    denom = np.linalg.norm(phi) + epsilon
    return np.outer(eta * r, phi) / denom


def project_frobenius(W: np.ndarray, w_max: float) -> np.ndarray:
    n = np.linalg.norm(W)
    if n > w_max:
        return W * (w_max / n)
    return W


def update_heads(bank: MicrozoneBank, zone_weights: np.ndarray, delta: np.ndarray,
                 cfg: LearnerConfig, momentum: np.ndarray, step: int, r_norm: float,
                 single_head: bool = False) -> np.ndarray:
    """Apply the momentum-smoothed delta to each zone's heads in place.

    Before learning_start or inside the deadzone the bank and the momentum
    buffer are left untouched. Returns the updated momentum buffer.
    With single_head=True only the slow head is used, at unit scale and no
    decay (the no-fast/slow ablation).
    """
    if delta.shape != bank.W_fast.shape[1:]:
        raise DimensionMismatchError(f"delta shape {delta.shape} does not match heads")
    if step < cfg.learning_start or r_norm < cfg.deadzone_theta:
        return momentum
    m = cfg.momentum_beta * momentum + (1.0 - cfg.momentum_beta) * delta
    for k in range(bank.K):
        if single_head:
            bank.W_slow[k] = bank.W_slow[k] + (1.0 * zone_weights[k]) * m - cfg.l2_gamma * bank.W_slow[k]
        else:
            bank.W_fast[k] = (
                (1.0 - cfg.fast_decay) * bank.W_fast[k]
                + (cfg.fast_scale * zone_weights[k]) * m
                - cfg.l2_gamma * bank.W_fast[k]
            )
            bank.W_slow[k] = (
                (1.0 - cfg.slow_decay) * bank.W_slow[k]
                + (cfg.slow_scale * zone_weights[k]) * m
                - cfg.l2_gamma * bank.W_slow[k]
            )
        bank.W_fast[k] = project_frobenius(bank.W_fast[k], bank.w_max)
        bank.W_slow[k] = project_frobenius(bank.W_slow[k], bank.w_max)
    return m
