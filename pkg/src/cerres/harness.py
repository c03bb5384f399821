"""Episode runner, severity sweeps, and the consolidation workflow.

Everything is deterministic given (config, seed, episode): the plant has no
process noise, so randomness enters only through the feature seed and a small
seeded jitter on the initial state.
"""

from __future__ import annotations

import csv
import os
import time
from dataclasses import dataclass, field

import numpy as np

from .baselines import CmacBaseline, LmsBaseline
from .config import ExperimentConfig
from .consolidation import (
    ConsolidationDataset,
    StaticAdapter,
    adapter_action,
    fit_adapter,
    residual_energy,
)
from .controller import CerebellarController
from .errors import ConfigError, CrossSeverityError, MissingArtifactError, NumericalDivergenceError
from .features import build_expansion, expand, make_traces, trace_step
from .plant import (
    DesiredTrajectory,
    FaultSpec,
    NominalGains,
    PlantModel,
    PlantState,
    nominal_action,
    plant_step,
    reward,
)
from .reference import (
    PhaseEstimator,
    ReferenceTrajectory,
    build_reference,
    estimate_phase,
    estimator_from_rollout,
    lookup_by_step,
    lookup_reference,
)


# --- calibration -------------------------------------------------------------

@dataclass
class Calibration:
    model: PlantModel
    gains: NominalGains
    desired: DesiredTrajectory
    reference: ReferenceTrajectory
    estimator: PhaseEstimator
    r_nom: float
    nominal_return: float
    nominal_rms: float


def build_model(cfg: ExperimentConfig) -> tuple[PlantModel, NominalGains, DesiredTrajectory]:
    p = cfg.plant
    J = p.joints
    coupling = np.full((J, J), 0.0)
    np.fill_diagonal(coupling, p.coupling_diag)
    for j in range(J - 1):
        coupling[j, j + 1] = p.coupling_off
        coupling[j + 1, j] = p.coupling_off
    model = PlantModel(
        J=J,
        inertia=np.array(p.inertia, dtype=float),
        damping=np.array(p.damping, dtype=float),
        coupling=coupling,
        friction_coulomb=np.array(p.friction, dtype=float),
        torque_limit=np.array(p.torque_limit, dtype=float),
    )
    gains = NominalGains(Kp=np.array(p.kp, dtype=float), Kd=np.array(p.kd, dtype=float))
    desired = DesiredTrajectory(
        amplitudes=np.array(p.amplitudes, dtype=float),
        phase_shift=np.array(p.phase_shift, dtype=float),
        period_steps=p.period_steps,
        dt=p.dt,
    )
    return model, gains, desired


def _initial_state(cfg: ExperimentConfig, desired: DesiredTrajectory,
                   seed: int | None, episode: int) -> PlantState:
    s0 = desired.sample(0)
    q = s0.q_d.copy()
    if seed is not None and cfg.plant.init_jitter > 0:
        rng = np.random.default_rng([seed, episode, 0x5EED])
        q = q + cfg.plant.init_jitter * rng.standard_normal(cfg.plant.joints)
    return PlantState(q=q, qd=s0.qd_d.copy(), t=0, dt=cfg.plant.dt)


def record_rollout(cfg: ExperimentConfig, model: PlantModel, gains: NominalGains,
                   desired: DesiredTrajectory) -> list:
    """Fault-free closed-loop rollout of one reference period, no jitter."""
    state = _initial_state(cfg, desired, None, 0)
    rollout = []
    for t in range(cfg.plant.period_steps):
        rollout.append((state.q.copy(), state.qd.copy()))
        a = nominal_action(model, state, desired.sample(t), gains)
        state = plant_step(model, state, a, None, t)
    return rollout


def calibrate(cfg: ExperimentConfig) -> Calibration:
    model, gains, desired = build_model(cfg)
    rollout = record_rollout(cfg, model, gains, desired)
    estimator = estimator_from_rollout(rollout)
    reference = build_reference(rollout, cfg.plant.dt, estimator)
    calib = Calibration(
        model=model, gains=gains, desired=desired, reference=reference,
        estimator=estimator, r_nom=0.0, nominal_return=0.0, nominal_rms=0.0,
    )
    # nominal reward baseline: mean per-step reward over fault-free episodes
    rates = []
    for ep_seed in range(cfg.sweep.calibration_episodes):
        res = run_episode(cfg, calib, "frozen", None, seed=ep_seed, episode=0)
        rates.append(res.return_ / cfg.plant.horizon)
    calib.r_nom = float(np.mean(rates))
    canonical = run_episode(cfg, calib, "frozen", None, seed=0, episode=0)
    calib.nominal_return = canonical.return_
    calib.nominal_rms = canonical.rms_error
    return calib


# --- episode execution -------------------------------------------------------

@dataclass
class EpisodeResult:
    return_: float
    rms_error: float
    e_res: float
    success: bool
    wall_clock: float
    meta_trace: list = field(default_factory=list)
    rewards: np.ndarray | None = None
    actions: np.ndarray | None = None
    residuals: np.ndarray | None = None
    gate_trace: np.ndarray | None = None


class AdapterPathway:
    """Feature pathway + static adapter playback; no gates, no learning."""

    def __init__(self, cfg: ExperimentConfig, calibration, seed: int, adapter: StaticAdapter):
        self.adapter = adapter
        self.tau_max = cfg.authority.tau_max
        self.reference = calibration.reference
        self.estimator = calibration.estimator.copy()
        J = cfg.plant.joints
        self.expansion = build_expansion(
            3 * J, cfg.features.M, cfg.features.seed, cfg.features.init_std
        )
        self.traces = make_traces(cfg.features.M, cfg.plant.dt, cfg.features.tau_E, cfg.features.tau_I)
        self.time_indexed = cfg.ablation.time_indexed_reference

    def residual(self, state, step) -> np.ndarray:
        if self.time_indexed:
            ref_sample = lookup_by_step(self.reference, step)
        else:
            phase = estimate_phase(self.estimator, state.q, state.qd)
            ref_sample = lookup_reference(self.reference, phase)
        x = np.concatenate([state.q, state.qd, ref_sample.qdd_d])
        h = expand(self.expansion, x)
        self.traces, phi = trace_step(self.traces, h)
        return adapter_action(self.adapter, phi, self.tau_max)


def _make_method(name: str, cfg: ExperimentConfig, calib: Calibration, seed: int,
                 adapter: StaticAdapter | None):
    if name == "frozen":
        return None
    if name == "ours":
        return CerebellarController(cfg, calib, seed)
    if name == "lms":
        return LmsBaseline(cfg, calib, seed)
    if name == "cmac":
        return CmacBaseline(cfg, calib, seed)
    if name == "adapter":
        if adapter is None:
            raise MissingArtifactError("method 'adapter' requires a fitted adapter")
        return _AdapterMethod(AdapterPathway(cfg, calib, seed, adapter))
    raise ConfigError(f"unknown method {name!r}")


class _AdapterMethod:
    def __init__(self, pathway: AdapterPathway):
        self.pathway = pathway

    def action(self, state, step, a_nom):
        return self.pathway.residual(state, step)

    def observe(self, state, step, R):
        pass


def run_episode(cfg: ExperimentConfig, calib: Calibration, method: str,
                fault: FaultSpec | None, seed: int, episode: int,
                base_adapter: StaticAdapter | None = None,
                adapter: StaticAdapter | None = None,
                record: bool = False,
                collect: ConsolidationDataset | None = None) -> EpisodeResult:
    """Closed loop for one episode; deterministic per (cfg, seed, episode).

    With base_adapter set, the adapter residual is folded into the base action
    before the selected method sees it (the base-plus-adapter configuration).
    """
    t0 = time.perf_counter()
    model, gains, desired = calib.model, calib.gains, calib.desired
    state = _initial_state(cfg, desired, seed, episode)
    ctl = _make_method(method, cfg, calib, seed, adapter)
    base_path = AdapterPathway(cfg, calib, seed, base_adapter) if base_adapter else None

    H = cfg.plant.horizon
    J = cfg.plant.joints
    total = 0.0
    sq_err = 0.0
    residuals = np.zeros((H, J))
    rewards = np.zeros(H)
    actions = np.zeros((H, J)) if record else None
    gate = np.zeros(H) if record else None

    for t in range(H):
        s_nom = desired.sample(t)
        a_nom = nominal_action(model, state, s_nom, gains)
        a_base = a_nom + base_path.residual(state, t) if base_path else a_nom
        a_res = ctl.action(state, t, a_base) if ctl is not None else np.zeros(J)
        a = a_base + a_res
        R = reward(state, s_nom, a)
        e = s_nom.q_d - state.q
        sq_err += float(np.dot(e, e))
        total += R
        rewards[t] = R
        residuals[t] = a_res
        if record:
            actions[t] = a
            if isinstance(ctl, CerebellarController):
                gate[t] = ctl.gate
        if collect is not None and isinstance(ctl, CerebellarController):
            collect.add(t, ctl._phi, a_res)
        new_state = plant_step(model, state, a, fault, t)
        if not (np.all(np.isfinite(new_state.q)) and np.all(np.isfinite(new_state.qd))):
            raise NumericalDivergenceError(
                f"non-finite plant state at step {t} (method={method})", step=t
            )
        if ctl is not None:
            ctl.observe(state, t, R)
        state = new_state

    return EpisodeResult(
        return_=total,
        rms_error=float(np.sqrt(sq_err / (H * J))),
        e_res=residual_energy(residuals),
        success=True,
        wall_clock=time.perf_counter() - t0,
        meta_trace=list(getattr(ctl, "meta_trace", [])),
        rewards=rewards,
        actions=actions,
        residuals=residuals if record else None,
        gate_trace=gate,
    )


# --- sweeps ------------------------------------------------------------------

RESULT_COLUMNS = [
    "family", "severity", "onset", "removal", "method", "seed", "episode",
    "return", "rms_error", "e_res", "success", "error",
]

SUMMARY_COLUMNS = [
    "family", "severity", "method", "n", "mean_return", "std_return",
    "mean_rms", "std_rms", "mean_eres", "rel_improvement",
]


def _fault_for(cfg: ExperimentConfig, family: str, severity: float) -> FaultSpec:
    removal = cfg.sweep.removal_step if cfg.sweep.removal_step >= 0 else None
    return FaultSpec(family=family, severity=severity,
                     onset_step=cfg.sweep.onset_step, removal_step=removal)


def run_cell(cfg: ExperimentConfig, calib: Calibration, family: str, severity: float,
             method: str, adapter: StaticAdapter | None = None,
             base_adapter: StaticAdapter | None = None) -> list[dict]:
    fault = _fault_for(cfg, family, severity)
    rows = []
    for seed in cfg.sweep.seeds:
        for ep in range(cfg.sweep.episodes):
            row = {
                "family": family, "severity": severity,
                "onset": fault.onset_step,
                "removal": fault.removal_step if fault.removal_step is not None else "",
                "method": method, "seed": seed, "episode": ep,
            }
            try:
                res = run_episode(cfg, calib, method, fault, seed, ep,
                                  adapter=adapter, base_adapter=base_adapter)
                row.update({
                    "return": res.return_, "rms_error": res.rms_error,
                    "e_res": res.e_res, "success": 1, "error": "",
                })
            except NumericalDivergenceError as exc:
                row.update({
                    "return": "", "rms_error": "", "e_res": "",
                    "success": 0, "error": f"divergence@{exc.step}",
                })
            rows.append(row)
    return rows


def summarize(rows: list[dict]) -> list[dict]:
    cells: dict[tuple, list[dict]] = {}
    for r in rows:
        if not r["success"]:
            continue
        cells.setdefault((r["family"], float(r["severity"]), r["method"]), []).append(r)
    frozen_means = {}
    for (fam, sev, method), rs in cells.items():
        if method == "frozen":
            frozen_means[(fam, sev)] = float(np.mean([float(x["return"]) for x in rs]))
    out = []
    for (fam, sev, method), rs in sorted(cells.items()):
        returns = np.array([float(x["return"]) for x in rs])
        rmss = np.array([float(x["rms_error"]) for x in rs])
        eres = np.array([float(x["e_res"]) for x in rs])
        base = frozen_means.get((fam, sev))
        rel = ""
        if base is not None and base != 0:
            rel = (float(np.mean(returns)) - base) / abs(base)
        out.append({
            "family": fam, "severity": sev, "method": method, "n": len(rs),
            "mean_return": float(np.mean(returns)), "std_return": float(np.std(returns)),
            "mean_rms": float(np.mean(rmss)), "std_rms": float(np.std(rmss)),
            "mean_eres": float(np.mean(eres)), "rel_improvement": rel,
        })
    return out


def _write_csv(path, columns, rows):
    with open(path, "w", newline="") as f:
        w = csv.DictWriter(f, fieldnames=columns)
        w.writeheader()
        for r in rows:
            w.writerow(r)


def run_sweep(cfg: ExperimentConfig, calib: Calibration, out_dir: str) -> tuple[list, list]:
    if not cfg.sweep.families or not cfg.sweep.severities:
        raise ConfigError("sweep grid is empty")
    cells = [
        (fam, sev, method)
        for fam in cfg.sweep.families
        for sev in cfg.sweep.severities
        for method in cfg.sweep.methods
    ]
    if cfg.sweep.workers > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=cfg.sweep.workers) as pool:
            chunks = list(pool.map(_cell_worker, [(cfg, fam, sev, m) for fam, sev, m in cells]))
    else:
        chunks = [run_cell(cfg, calib, fam, sev, m) for fam, sev, m in cells]
    rows = [r for chunk in chunks for r in chunk]
    rows.sort(key=lambda r: (r["family"], float(r["severity"]), r["method"],
                             int(r["seed"]), int(r["episode"])))
    os.makedirs(out_dir, exist_ok=True)
    _write_csv(os.path.join(out_dir, "results.csv"), RESULT_COLUMNS, rows)
    summary = summarize(rows)
    _write_csv(os.path.join(out_dir, "summary.csv"), SUMMARY_COLUMNS, summary)
    return rows, summary


def _cell_worker(args):
    cfg, fam, sev, method = args
    calib = calibrate(cfg)
    return run_cell(cfg, calib, fam, sev, method)


# --- consolidation workflow --------------------------------------------------

def collect_pairs(cfg: ExperimentConfig, calib: Calibration, fault: FaultSpec) -> ConsolidationDataset:
    ds = ConsolidationDataset(
        transient_skip=int(cfg.consolidation.transient_frac * cfg.plant.horizon),
        fault_id=fault.cell_id,
    )
    for seed in cfg.sweep.seeds:
        run_episode(cfg, calib, "ours", fault, seed, 0, collect=ds)
    return ds


def consolidate_cell(cfg: ExperimentConfig, calib: Calibration, family: str,
                     severity: float) -> StaticAdapter:
    fault = _fault_for(cfg, family, severity)
    ds = collect_pairs(cfg, calib, fault)
    if len(ds) == 0:
        raise MissingArtifactError("no stabilized pairs collected for consolidation")
    return fit_adapter(ds, cfg.consolidation.ridge_lambda, g=cfg.consolidation.adapter_gain)


def evaluate_adapter(cfg: ExperimentConfig, calib: Calibration, adapter: StaticAdapter,
                     family: str, severity: float, override: bool = False) -> dict:
    """Compare frozen / ours / adapter / ours-on-adapter on one fault cell.

    Refuses evaluation on a cell the adapter was not consolidated for unless
    override is set.
    """
    fault = _fault_for(cfg, family, severity)
    if adapter.fault_id and adapter.fault_id != fault.cell_id and not override:
        raise CrossSeverityError(
            f"adapter consolidated for {adapter.fault_id!r} but asked to evaluate "
            f"{fault.cell_id!r}; pass override to force"
        )
    out = {"family": family, "severity": severity}
    metrics = {}
    for label, kwargs in [
        ("frozen", dict(method="frozen")),
        ("ours", dict(method="ours")),
        ("adapter", dict(method="adapter", adapter=adapter)),
        ("ours_on_adapter", dict(method="ours", base_adapter=adapter)),
    ]:
        returns, eres = [], []
        for seed in cfg.sweep.seeds:
            res = run_episode(cfg, calib, fault=fault, seed=seed, episode=0, **kwargs)
            returns.append(res.return_)
            eres.append(res.e_res)
        metrics[label] = {
            "mean_return": float(np.mean(returns)),
            "mean_eres": float(np.mean(eres)),
        }
    out["metrics"] = metrics
    return out


def write_meta_trace(path, trace) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["step", "ema", "best", "gate", "gain_mult", "lr_mult",
                    "lambda_mult", "confidence", "event"])
        for row in trace:
            w.writerow([row.step, repr(row.ema), repr(row.best), repr(row.gate),
                        repr(row.gain_mult), repr(row.lr_mult), repr(row.lambda_mult),
                        repr(row.confidence), row.event])
