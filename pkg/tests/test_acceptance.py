"""End-to-end behavioral guarantees of the residual control stack.

Each test exercises one shipped guarantee through the public pipeline:
bounded authority, do-no-harm at nominal, authority decay, fault recovery,
baseline ordering, consolidation transfer, gated learning, trace nulling,
ablation-ladder equivalence, and post-removal withdrawal.
"""

import time

import numpy as np
import pytest

from cerres import config as cfgmod
from cerres import harness
from cerres.consolidation import fit_adapter
from cerres.controller import CerebellarController
from cerres.features import make_traces, trace_step
from cerres.meta import gain_step
from cerres.plant import FaultSpec, PlantState

FAULT = FaultSpec(family="actuator_scale", severity=0.6)
REL = 0.05  # tolerance against pinned regression values

ALL_FLAGS = (
    "no_granule_expansion", "no_temporal_filter", "no_microzones",
    "no_fast_slow", "no_meta", "no_directional_gate",
    "time_indexed_reference", "no_reference_accel",
)


def _state_on_path(calib, t, offset=0.0):
    s = calib.desired.sample(t)
    return PlantState(q=s.q_d + offset, qd=s.qd_d.copy(), t=t, dt=0.01)


# --- 1. bounded authority ----------------------------------------------------------

def test_residual_bounded_under_adversarial_fuzz(fast_cfg, calib):
    """10k ticks of random states and rewards never exceed the torque cap."""
    t0 = time.perf_counter()
    ctl = CerebellarController(fast_cfg, calib, seed=0)
    ctl.gate = 1.0  # force the authority path fully open
    rng = np.random.default_rng(99)
    cap = fast_cfg.authority.tau_max
    for t in range(10_000):
        s = PlantState(q=rng.uniform(-1.5, 1.5, 4), qd=rng.uniform(-3, 3, 4),
                       t=t, dt=0.01)
        a_res = ctl.action(s, t, rng.uniform(-1, 1, 4))
        assert np.max(np.abs(a_res)) <= cap + 1e-12
        ctl.observe(s, t, float(rng.uniform(-5, 0)))
    assert time.perf_counter() - t0 < 10.0


# --- 2. do-no-harm at nominal ------------------------------------------------------

def test_inactive_residual_is_bitwise_transparent(fast_cfg):
    """Fault-free: the learning stack reproduces the frozen loop exactly."""
    cfg = cfgmod.copy_config(fast_cfg)
    cfg.plant.horizon = 1000
    calib = harness.calibrate(cfg)
    t0 = time.perf_counter()
    frozen = harness.run_episode(cfg, calib, "frozen", None, 0, 0, record=True)
    ours = harness.run_episode(cfg, calib, "ours", None, 0, 0, record=True)
    assert np.array_equal(frozen.actions, ours.actions)
    assert ours.return_ - frozen.return_ == 0.0
    assert ours.e_res == 0.0
    assert time.perf_counter() - t0 < 5.0


# --- 3. authority decay ------------------------------------------------------------

def test_gain_decays_geometrically_without_degradation(fast_cfg):
    g0 = fast_cfg.authority.g0
    lam = fast_cfg.meta.decay_gain
    g = g0
    for t in range(1, 501):
        g = gain_step(g, False, fast_cfg.meta.kappa_gain, lam,
                      fast_cfg.authority.g_max)
        assert abs(g - g0 * (1.0 - lam) ** t) <= 1e-12


# --- 4 & 5. fault recovery and baseline ordering -----------------------------------

@pytest.fixture(scope="module")
def grid(fast_cfg, calib):
    """Mean return/RMS per method over the full seed x episode protocol."""
    out = {}
    for method in ("frozen", "ours", "lms", "cmac"):
        t0 = time.perf_counter()
        returns, rmss = [], []
        for seed in fast_cfg.sweep.seeds:
            for ep in range(fast_cfg.sweep.episodes):
                res = harness.run_episode(fast_cfg, calib, method, FAULT, seed, ep)
                returns.append(res.return_)
                rmss.append(res.rms_error)
        out[method] = {
            "return": float(np.mean(returns)),
            "rms": float(np.mean(rmss)),
            "elapsed": time.perf_counter() - t0,
        }
    return out


def test_recovery_beats_frozen_at_reference_severity(grid, regression):
    assert grid["ours"]["return"] > grid["frozen"]["return"]
    assert grid["ours"]["rms"] < grid["frozen"]["rms"]
    margin = grid["ours"]["return"] - grid["frozen"]["return"]
    assert margin == pytest.approx(regression["recovery_margin"], rel=REL)
    assert grid["frozen"]["elapsed"] + grid["ours"]["elapsed"] < 120.0


def test_recovery_ordering_against_baselines(grid, regression):
    m_lms = grid["ours"]["return"] - grid["lms"]["return"]
    m_cmac = grid["ours"]["return"] - grid["cmac"]["return"]
    assert m_lms > 0.0
    assert m_cmac > 0.0
    assert m_lms == pytest.approx(regression["ordering_margin_lms"], rel=REL)
    assert m_cmac == pytest.approx(regression["ordering_margin_cmac"], rel=REL)


def test_method_means_match_pinned_regression(grid, regression):
    for method in ("frozen", "ours", "lms", "cmac"):
        assert grid[method]["return"] == pytest.approx(
            regression["mean_return"][method], rel=REL)
        assert grid[method]["rms"] == pytest.approx(
            regression["mean_rms"][method], rel=REL)


# --- 6. consolidation --------------------------------------------------------------

def test_consolidated_adapter_absorbs_online_residual(fast_cfg, calib, regression):
    adapter = harness.consolidate_cell(fast_cfg, calib, FAULT.family, FAULT.severity)
    report = harness.evaluate_adapter(fast_cfg, calib, adapter,
                                      FAULT.family, FAULT.severity)
    m = report["metrics"]
    ratio = m["ours_on_adapter"]["mean_eres"] / m["ours"]["mean_eres"]
    assert ratio < 0.5
    assert m["ours"]["mean_eres"] == pytest.approx(regression["eres_ours"], rel=REL)
    assert m["ours_on_adapter"]["mean_eres"] == pytest.approx(
        regression["eres_ours_on_adapter"], rel=REL)
    assert m["adapter"]["mean_return"] > m["frozen"]["mean_return"]


def test_ridge_fit_matches_elimination_oracle():
    def solve(A, B):
        A = [list(map(float, r)) for r in A]
        B = [list(map(float, r)) for r in B]
        n = len(A)
        for c in range(n):
            p = max(range(c, n), key=lambda r: abs(A[r][c]))
            A[c], A[p] = A[p], A[c]
            B[c], B[p] = B[p], B[c]
            inv = 1.0 / A[c][c]
            A[c] = [v * inv for v in A[c]]
            B[c] = [v * inv for v in B[c]]
            for r in range(n):
                if r != c and A[r][c] != 0.0:
                    f = A[r][c]
                    A[r] = [a - f * b for a, b in zip(A[r], A[c])]
                    B[r] = [a - f * b for a, b in zip(B[r], B[c])]
        return np.array(B)

    rng = np.random.default_rng(31)
    X = rng.standard_normal((40, 7))
    Y = rng.standard_normal((40, 3))
    from cerres.consolidation import ConsolidationDataset
    ds = ConsolidationDataset()
    for i in range(40):
        ds.add(i, X[i], Y[i])
    ad = fit_adapter(ds, ridge_lambda=1.0)
    oracle = solve(X.T @ X + np.eye(7), X.T @ Y).T
    assert np.max(np.abs(ad.W_adapt - oracle)) <= 1e-9


# --- 7. gated learning -------------------------------------------------------------

def _drive(ctl, calib, steps):
    for t in range(steps):
        s = _state_on_path(calib, t, offset=0.2)
        ctl.action(s, t, np.ones(4))
        ctl.observe(s, t, -1.0)


def test_weights_frozen_before_learning_start(fast_cfg, calib):
    cfg = cfgmod.copy_config(fast_cfg)
    cfg.learn.learning_start = 10**9
    ctl = CerebellarController(cfg, calib, seed=0)
    _drive(ctl, calib, 300)
    assert np.array_equal(ctl.bank.W_fast, np.zeros_like(ctl.bank.W_fast))
    assert np.array_equal(ctl.bank.W_slow, np.zeros_like(ctl.bank.W_slow))


def test_weights_frozen_inside_deadzone(fast_cfg, calib):
    cfg = cfgmod.copy_config(fast_cfg)
    cfg.learn.deadzone_theta = 1e9
    ctl = CerebellarController(cfg, calib, seed=0)
    _drive(ctl, calib, 400)
    assert np.array_equal(ctl.bank.W_fast, np.zeros_like(ctl.bank.W_fast))
    assert np.array_equal(ctl.bank.W_slow, np.zeros_like(ctl.bank.W_slow))


# --- 8. trace nulling --------------------------------------------------------------

def test_opposed_traces_null_sustained_input(fast_cfg):
    traces = make_traces(16, fast_cfg.plant.dt, fast_cfg.features.tau_E,
                         fast_cfg.features.tau_I)
    h = np.full(16, 0.8)
    alpha_I = min(fast_cfg.plant.dt / fast_cfg.features.tau_I, 1.0)
    phi = None
    for _ in range(int(np.ceil(10.0 / alpha_I))):
        traces, phi = trace_step(traces, h)
    assert np.max(np.abs(phi)) < alpha_I * np.max(np.abs(h))


# --- 9. ablation ladder ------------------------------------------------------------

def test_fully_ablated_stack_collapses_to_fixed_feature_baseline(fast_cfg):
    cfg = cfgmod.copy_config(fast_cfg)
    for flag in ALL_FLAGS:
        setattr(cfg.ablation, flag, True)
    calib = harness.calibrate(cfg)
    ours = harness.run_episode(cfg, calib, "ours", FAULT, 0, 0, record=True)
    cmac = harness.run_episode(cfg, calib, "cmac", FAULT, 0, 0, record=True)
    assert np.array_equal(ours.residuals, cmac.residuals)
    assert np.array_equal(ours.actions, cmac.actions)
    assert ours.return_ == cmac.return_


# --- 10. post-removal withdrawal ---------------------------------------------------

def test_authority_withdraws_after_fault_removal(fast_cfg):
    cfg = cfgmod.copy_config(fast_cfg)
    cfg.plant.horizon = 3600
    cfg.learn.deadzone_theta = 0.05
    calib = harness.calibrate(cfg)
    fault = FaultSpec(family="actuator_scale", severity=0.6,
                      onset_step=800, removal_step=1500)
    ours = harness.run_episode(cfg, calib, "ours", fault, 0, 0, record=True)
    frozen = harness.run_episode(cfg, calib, "frozen", fault, 0, 0)

    # transparent before onset, strictly better afterwards
    assert np.array_equal(ours.rewards[:800], frozen.rewards[:800])
    assert float(np.mean(ours.rewards[800:])) > float(np.mean(frozen.rewards[800:]))

    gate = ours.gate_trace
    assert float(np.max(gate[:800])) == 0.0
    assert float(np.max(gate[800:1500])) > 0.5  # engages during the fault
    assert float(np.max(gate[-200:])) < 0.05    # withdraws after removal
