import csv
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fks import diagnostics as diag
from fks import spectral
from fks.model import ModelParams, Semilinearity
from fks.spectral import Grid
from fks.stepper import State, StepControl, integrate

from conftest import band_limited

SEMS = [Semilinearity.linear(), Semilinearity.affine(0.5), Semilinearity.ramped(0.3, 1.0, 0.5)]


def test_entropy_and_norms_closed_forms():
    x = Grid.of(64).x
    assert diag.entropy(np.ones(64)) == 0.0
    assert diag.integral(np.cos(x) ** 2) == pytest.approx(math.pi)
    # ||Lambda^s cos kx||^2 = pi k^{2s}
    assert diag.hs_norm(np.cos(3 * x), 0.5) ** 2 == pytest.approx(3 * math.pi)
    assert diag.hs_norm(np.cos(32 * x), 0.5) ** 2 == pytest.approx(2 * math.pi * 32)
    with pytest.raises(ValueError):
        diag.entropy(-np.ones(64))


def test_kernel_identity_single_mode_closed_form():
    x = Grid.of(64).x
    assert diag.kernel_quadratic_form(np.cos(2 * x)) == pytest.approx(2 * math.pi, rel=1e-12)


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_kernel_identity_random_fields(seed):
    u = band_limited(128, 30, np.random.default_rng(seed))
    ref = diag.hs_norm(u, 0.5) ** 2
    assert diag.kernel_quadratic_form(u) == pytest.approx(ref, rel=1e-6)


@pytest.mark.parametrize("sem", SEMS, ids=lambda s: s.kind)
def test_kernel_gamma_form_dominates(sem, rng):
    from fks.model import check_assumption1
    delta = check_assumption1(sem).delta
    for _ in range(3):
        u = band_limited(128, 20, rng, mean=1.2, amp=0.8)
        q = diag.kernel_quadratic_form(u, "gamma", sem)
        assert q >= delta * diag.hs_norm(u, 0.5) ** 2 - 1e-9
        if sem.kind != "ramped":
            assert q == pytest.approx(diag.dissipation(u, "gamma", sem), rel=1e-6)


def test_kernel_and_multiplier_converge_for_ramp():
    # the ramp is only piecewise smooth, so the two quadratures agree to O(dx^p)
    sem = Semilinearity.ramped(0.3, 1.0, 0.5)
    gaps = []
    for n in (64, 128, 256):
        x = Grid.of(n).x
        u = 1.2 + 0.8 * np.cos(x)
        gaps.append(abs(diag.kernel_quadratic_form(u, "gamma", sem)
                        - diag.dissipation(u, "gamma", sem)))
    assert gaps[2] < gaps[1] < gaps[0]


def test_kernel_cap():
    with pytest.raises(ValueError):
        diag.kernel_quadratic_form(np.ones(1024))


@pytest.mark.parametrize("m", [3, 5, 7])
def test_fd_weights_exact_on_polynomials(m, rng):
    t = np.sort(rng.uniform(0, 1, m))
    t0 = t[m // 2]
    w = diag.fd_weights(t, t0)
    for d in range(m):
        assert w @ t ** d == pytest.approx(d * t0 ** (d - 1) if d else 0.0, abs=1e-8)


def test_maxpoint_counterexample_for_factor_one():
    x = Grid.of(256).x
    u = np.cos(x) - 0.2 * np.cos(2 * x)
    rep = diag.check_maxpoint_inequalities(u)
    assert rep.margin_max < 0  # factor-one bound fails
    assert rep.sharp_margin_max >= 0 and not rep.violated


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_sharp_maxpoint_bounds_hold(seed):
    u = band_limited(128, 20, np.random.default_rng(seed), mean=0.0, amp=1.0)
    assert not diag.check_maxpoint_inequalities(u).violated


def test_lubo_precondition_and_tall_bump():
    x = Grid.of(256).x
    assert not diag.check_lubo(1 + 0.5 * np.cos(x)).precondition_met
    bump = 0.1 + np.exp(-x ** 2 / 0.02)
    rep = diag.check_lubo(bump)
    assert rep.precondition_met and rep.margin > 0 and not rep.flagged


def test_tricomi_residual(rng):
    for _ in range(5):
        assert diag.check_tricomi(band_limited(128, 60, rng)) <= 1e-10


def _fine_run(p, T=0.2, dt=1e-3, n=128):
    u0 = 1 + 0.5 * np.cos(Grid.of(n).x)
    return integrate(State(0.0, u0, p), StepControl(), T, cadence=1, fixed_dt=dt)


@pytest.mark.parametrize("coupling,r", [(False, 0.0), (True, 0.0), (True, 1.0)])
def test_balances_close_on_fine_runs(coupling, r):
    p = ModelParams(semilinearity=Semilinearity.affine(0.5), eps=1e-3, r=r, coupling=coupling)
    tr = _fine_run(p)
    w = list(zip(tr.times[50:55], tr.states[50:55]))
    assert diag.entropy_balance_residual(w, p) < 1e-8
    assert diag.l2_balance_residual(w, p) < 1e-8
    for which in ("entropy", "l2"):
        r_int = diag.integrated_balance_residual(tr.times, tr.states, p, which)
        assert r_int[0] == 0 and r_int.max() < 1e-9


def test_balance_detects_wrong_model():
    p = ModelParams(semilinearity=Semilinearity.affine(0.5), eps=1e-3)
    tr = _fine_run(p)
    wrong = p.model_copy(update={"r": 1.0})
    assert diag.integrated_balance_residual(tr.times, tr.states, wrong).max() > 1e-3


def test_balance_window_validation():
    p = ModelParams(semilinearity=Semilinearity.linear())
    with pytest.raises(ValueError):
        diag.entropy_balance_residual([(0.0, np.ones(8)), (1.0, np.ones(8))], p)


def test_weak_residual_small_and_decreasing():
    p = ModelParams(semilinearity=Semilinearity.affine(0.5), eps=1e-3, r=2.0)
    res = []
    for dt in (4e-3, 2e-3):
        tr = _fine_run(p, T=0.4, dt=dt)
        res.append(diag.weak_residual(tr.times, tr.states, p, 1))
    assert res[1] < 1e-7 and res[0] / res[1] > 4


def test_weak_residual_sees_wrong_equation():
    p = ModelParams(semilinearity=Semilinearity.affine(0.5), eps=1e-3)
    tr = _fine_run(p, T=0.4, dt=2e-3)
    bad = p.model_copy(update={"semilinearity": Semilinearity.affine(1.5)})
    assert diag.weak_residual(tr.times, tr.states, bad, 1) > 1e-3


def test_records_and_csv(tmp_path):
    p = ModelParams(semilinearity=Semilinearity.affine(0.5), eps=1e-3)
    tr = _fine_run(p, T=0.02)
    recs = diag.trajectory_records(tr.times, tr.states, p)
    assert math.isnan(recs[0].entropy_balance_residual)
    assert recs[5].entropy_balance_residual < 1e-6
    path = tmp_path / "d.csv"
    diag.write_csv(recs, path)
    rows = list(csv.reader(open(path)))
    assert rows[0] == diag.DiagnosticsRecord.columns()
    assert float(rows[3][2]) == recs[2].mean  # 17 digits round-trip
    assert len(rows) == len(recs) + 1


def test_record_handles_zero_density():
    u = np.maximum(np.cos(Grid.of(64).x), 0.0)
    rec = diag.compute_record(0.0, u, ModelParams(semilinearity=Semilinearity.affine(0.5)))
    assert math.isnan(rec.dissipation_gamma)
    assert math.isfinite(rec.entropy) and rec.min == 0.0
