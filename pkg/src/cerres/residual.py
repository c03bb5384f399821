"""Phase-conditioned microzone residual readout with bounded authority.

The residual action is a convex phase-blend over per-zone fast and slow
readout heads, scaled by gate * confidence * gain and clipped elementwise.
Clipping happens last so the infinity-norm contract holds unconditionally.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatchError


@dataclass
class MicrozoneBank:
    """K zones with evenly spaced phase centers; each zone owns a fast and a
    slow J x M head. Heads are Frobenius-projected to w_max after updates."""

    K: int
    centers: np.ndarray          # (K,)
    width: float
    min_weight: float
    W_fast: np.ndarray           # (K, J, M)
    W_slow: np.ndarray           # (K, J, M)
    w_max: float


def make_bank(K: int, J: int, M: int, width: float | None = None,
              min_weight: float = 0.05, w_max: float = 5.0) -> MicrozoneBank:
    # default width 1/(2K): adjacent zones overlap at ~60% of peak
    if width is None:
        width = 1.0 / (2.0 * K)
    centers = np.arange(K) / K
    return MicrozoneBank(
        K=K, centers=centers, width=width, min_weight=min_weight,
        W_fast=np.zeros((K, J, M)), W_slow=np.zeros((K, J, M)), w_max=w_max,
    )


@dataclass
class AuthorityState:
    """Total residual authority: soft_gate * c * g, plus the elementwise clip."""

    g: float
    g_max: float
    c: float
    c_max: float
    soft_gate: float
    tau_max: float


def microzone_weights(bank: MicrozoneBank, phase: float) -> np.ndarray:
    """Gaussian kernel in circular phase distance, floored and normalized."""
    d = np.abs(bank.centers - phase)
    d = np.minimum(d, 1.0 - d)
    w = np.exp(-(d * d) / (2.0 * bank.width * bank.width))
    w = np.maximum(w, bank.min_weight)
    return w / w.sum()


def compute_residual(bank: MicrozoneBank, auth: AuthorityState, phi: np.ndarray,
                     phase: float, zone_weights: np.ndarray | None = None) -> np.ndarray:
    """Blend zone heads, scale by authority, clip elementwise to tau_max."""
    if phi.shape[0] != bank.W_fast.shape[2]:
        raise DimensionMismatchError(
            f"feature length {phi.shape[0]} does not match heads with M={bank.W_fast.shape[2]}"
        )
    if zone_weights is None:
        zone_weights = microzone_weights(bank, phase)
    J = bank.W_fast.shape[1]
    acc = np.zeros(J)
    for k in range(bank.K):
        acc = acc + zone_weights[k] * ((bank.W_fast[k] + bank.W_slow[k]) @ phi)
    scale = auth.soft_gate * auth.c * auth.g
    return np.clip(scale * acc, -auth.tau_max, auth.tau_max)


def slow_contribution(bank: MicrozoneBank, auth: AuthorityState, phi: np.ndarray,
                      zone_weights: np.ndarray) -> np.ndarray:
    """Authority-scaled slow-pathway output, pre-clip (consolidation target)."""
    J = bank.W_slow.shape[1]
    acc = np.zeros(J)
    for k in range(bank.K):
        acc = acc + zone_weights[k] * (bank.W_slow[k] @ phi)
    return auth.soft_gate * auth.c * auth.g * acc


def directional_gate(a_res: np.ndarray, a_nom: np.ndarray) -> np.ndarray:
    """Zero the whole residual when it globally opposes the nominal action."""
    if a_res.shape != a_nom.shape:
        raise DimensionMismatchError(f"shape mismatch {a_res.shape} vs {a_nom.shape}")
    if float(np.dot(a_res, a_nom)) >= 0.0:
        return a_res
    return np.zeros_like(a_res)


def compose_action(a_nom: np.ndarray, a_res: np.ndarray) -> np.ndarray:
    if a_nom.shape != a_res.shape:
        raise DimensionMismatchError(f"shape mismatch {a_nom.shape} vs {a_res.shape}")
    return a_nom + a_res


def save_head_csv(W: np.ndarray, path) -> None:
    """Snapshot one head stack (K, J, M) as `zone,row,col,value` rows."""
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["zone", "row", "col", "value"])
        K, J, M = W.shape
        for k in range(K):
            for j in range(J):
                for m in range(M):
                    w.writerow([k, j, m, repr(float(W[k, j, m]))])


def load_head_csv(path, K: int, J: int, M: int) -> np.ndarray:
    W = np.zeros((K, J, M))
    with open(path, newline="") as f:
        rows = list(csv.reader(f))[1:]
    for k, j, m, v in rows:
        W[int(k), int(j), int(m)] = float(v)
    return W
