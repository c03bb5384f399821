"""Consolidation of stabilized residual corrections into a static adapter.

Pairs of (effective activity, executed residual action) collected after the
episode transient are fit by ridge regression on the normal equations. The
adapter then plays back as a fixed linear map on top of the nominal
controller, with the residual pathway disabled.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatchError, EmptyEpisodeError, SingularSystemError


@dataclass
class ConsolidationDataset:
    phis: list = field(default_factory=list)
    taus: list = field(default_factory=list)
    transient_skip: int = 0
    fault_id: str = ""

    def add(self, step: int, phi: np.ndarray, tau: np.ndarray) -> None:
        if step >= self.transient_skip:
            self.phis.append(np.array(phi))
            self.taus.append(np.array(tau))

    def __len__(self) -> int:
        return len(self.phis)


@dataclass
class StaticAdapter:
    W_adapt: np.ndarray      # (J, M)
    ridge_lambda: float
    g: float = 1.0
    fault_id: str = ""


def residual_energy(residuals) -> float:
    """Time-averaged squared 2-norm of the residual actions."""
    if len(residuals) == 0:
        raise EmptyEpisodeError("cannot compute residual energy of an empty episode")
    arr = np.asarray(residuals, dtype=float)
    return float(np.mean(np.sum(arr * arr, axis=-1)))


def fit_adapter(ds: ConsolidationDataset, ridge_lambda: float, g: float = 1.0) -> StaticAdapter:
    """Solve (X^T X + lambda I) W^T = X^T Y for the adapter rows.

    X stacks features (N, M), Y stacks residual targets (N, J). With
    ridge_lambda = 0 a rank-deficient Gram matrix raises SingularSystemError.
    """
    if len(ds) == 0:
        raise EmptyEpisodeError("consolidation dataset is empty")
    if ridge_lambda < 0:
        raise ValueError(f"ridge_lambda must be nonnegative, got {ridge_lambda}")
    X = np.asarray(ds.phis, dtype=float)
    Y = np.asarray(ds.taus, dtype=float)
    M = X.shape[1]
    G = X.T @ X + ridge_lambda * np.eye(M)
    B = X.T @ Y
    if ridge_lambda == 0.0 and np.linalg.matrix_rank(G) < M:
        raise SingularSystemError("Gram matrix is rank-deficient and ridge_lambda is 0")
    try:
        Wt = np.linalg.solve(G, B)
    except np.linalg.LinAlgError as exc:
        raise SingularSystemError(str(exc)) from exc
    return StaticAdapter(W_adapt=Wt.T, ridge_lambda=ridge_lambda, g=g, fault_id=ds.fault_id)


def adapter_action(ad: StaticAdapter, phi: np.ndarray, tau_max: float = 0.15) -> np.ndarray:
    """g * W_adapt @ phi, clipped elementwise (parity with the residual clip)."""
    if phi.shape[0] != ad.W_adapt.shape[1]:
        raise DimensionMismatchError(
            f"feature length {phi.shape[0]} does not match adapter with M={ad.W_adapt.shape[1]}"
        )
    return np.clip(ad.g * (ad.W_adapt @ phi), -tau_max, tau_max)


def save_adapter(ad: StaticAdapter, path, meta: dict) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["row", "col", "value"])
        J, M = ad.W_adapt.shape
        for j in range(J):
            for m in range(M):
                w.writerow([j, m, repr(float(ad.W_adapt[j, m]))])
    side = dict(meta)
    side.setdefault("ridge_lambda", ad.ridge_lambda)
    side.setdefault("g", ad.g)
    side.setdefault("rows", ad.W_adapt.shape[0])
    side.setdefault("cols", ad.W_adapt.shape[1])
    with open(str(path) + ".meta", "w") as f:
        for k, v in side.items():
            f.write(f"{k}={v}\n")


def load_adapter(path) -> tuple[StaticAdapter, dict]:
    meta = {}
    with open(str(path) + ".meta") as f:
        for line in f:
            k, _, v = line.strip().partition("=")
            meta[k] = v
    J, M = int(meta["rows"]), int(meta["cols"])
    W = np.zeros((J, M))
    with open(path, newline="") as f:
        rows = list(csv.reader(f))[1:]
    for r, c, v in rows:
        W[int(r), int(c)] = float(v)
    ad = StaticAdapter(
        W_adapt=W,
        ridge_lambda=float(meta.get("ridge_lambda", 0.0)),
        g=float(meta.get("g", 1.0)),
        fault_id=meta.get("fault_id", ""),
    )
    return ad, meta
