import json

import numpy as np
import pytest

from fks.experiments import (CampaignRefused, SchemaError, ScenarioSpec, build_initial,
                             load_scenario, resume, run_scenario, sweep_resolution,
                             sweep_viscosity, validate_scenario, verify_theorem1,
                             verify_theorem3, verify_theorem_rlarge)
from fks.experiments import scenario as scen
from fks.experiments.campaigns import CAMPAIGN_CHECKS
from fks.experiments.checks import DEFAULT_TOL, REGISTRY
from fks.experiments.report import read_json, read_snapshot
from fks.experiments.sweeps import explore_subcritical


def doc(**kw):
    d = {"name": "t", "initial_condition": {"type": "cosine", "a": 1.0, "b": 0.5},
         "params": {"semilinearity": {"kind": "affine", "nu": 0.5}, "eps": 1e-3},
         "n": 64, "T": 0.5}
    d.update(kw)
    return d


def test_schema_file_matches_model():
    assert json.loads(scen.SCHEMA_PATH.read_text()) == scen.json_schema()


def test_registry_covers_check_names():
    names = set(ScenarioSpec.model_fields["checks"].annotation.__args__[0]
                .model_fields["name"].annotation.__args__)
    assert names == set(REGISTRY) == set(DEFAULT_TOL)
    for checks in CAMPAIGN_CHECKS.values():
        assert set(checks) <= names


@pytest.mark.parametrize("bad,field", [
    (doc(T=0.0), "T"),
    (doc(T=-1.0), "T"),
    (doc(n=100), "n"),
    (doc(initial_condition={"type": "cosine", "a": 0.2, "b": 0.5}), "initial_condition"),
    (doc(initial_condition={"type": "bump", "height": 1.0, "width": 0.5, "background": 2.0}),
     "initial_condition"),
    (doc(extra_field=1), "extra_field"),
    (doc(schema_version=2), "schema_version"),
    (doc(params={"semilinearity": {"kind": "affine"}}), "params"),
])
def test_schema_errors_list_fields(bad, field):
    with pytest.raises(SchemaError) as e:
        validate_scenario(bad)
    assert any(loc.startswith(field) for loc, _ in e.value.problems)


def test_initial_conditions():
    bump = build_initial(validate_scenario(doc(
        n=256, initial_condition={"type": "bump", "height": 5.0, "width": 0.6,
                                  "background": 0.5})))
    assert bump.max() == pytest.approx(5.0, rel=1e-14) and bump.min() >= 0.5 - 1e-12
    rnd = doc(initial_condition={"type": "random", "seed": 3, "band": 6, "amplitude": 2.0,
                                 "mean": 1.0, "min_clamp": 0.1})
    a = build_initial(validate_scenario(rnd))
    assert a.min() == pytest.approx(0.1)
    np.testing.assert_array_equal(a, build_initial(validate_scenario(rnd)))
    b = build_initial(validate_scenario({**rnd, "seed": 7}))
    assert not np.array_equal(a, b)
    moll = build_initial(validate_scenario(doc(mollify=0.1)))
    assert np.ptp(moll) == pytest.approx(np.exp(-0.1), rel=1e-12)


def test_overrides(tmp_path):
    p = tmp_path / "s.json"
    p.write_text(json.dumps(doc()))
    spec, applied = load_scenario(p, ["params.r=2", "initial_condition.b=0.25", "T=1"], seed=4)
    assert spec.params.r == 2 and spec.initial_condition.b == 0.25 and spec.T == 1
    assert spec.ctrl.c_cfl == 0.4 and spec.seed == 4
    assert applied == {"params.r": 2, "initial_condition.b": 0.25, "T": 1, "seed": 4}
    with pytest.raises(SchemaError, match="params.nope"):
        load_scenario(p, ["params.nope=1"])
    with pytest.raises(SchemaError):
        load_scenario(p, ["novalue"])
    with pytest.raises(SchemaError, match="file not found"):
        load_scenario(tmp_path / "missing.json")


def test_constant_one_scenario_all_checks_pass(tmp_path):
    checks = [{"name": n} for n in ("steady", "blowup_free", "nonnegativity",
                                     "positivity_floor", "ceiling", "mean_law", "maxpoint",
                                     "mass_conservation", "lubo", "tricomi")]
    spec = validate_scenario(doc(initial_condition={"type": "constant", "a": 1.0},
                                 params={"semilinearity": {"kind": "affine", "nu": 0.5},
                                         "r": 0.0, "eps": 1e-3},
                                 T=2.0, checks=checks))
    res = run_scenario(spec, tmp_path)
    assert [v.check for v in res.verdicts] == [c["name"] for c in checks]
    status = {v.check: v.status for v in res.verdicts}
    assert status.pop("lubo") == "precondition unmet"  # max u < 4 <u>
    assert set(status.values()) == {"pass"}
    assert res.exit_code == 0
    np.testing.assert_array_equal(res.trajectory.final_u, np.ones(64))


def test_outputs_and_determinism(tmp_path):
    spec = validate_scenario(doc(initial_condition={"type": "random", "seed": 1}, T=0.3,
                                 snapshot_every=20, checks=[{"name": "nonnegativity"}]))
    run_scenario(spec, tmp_path / "a", overrides={"T": 0.3})
    run_scenario(spec, tmp_path / "b")
    a, b = tmp_path / "a", tmp_path / "b"
    assert (a / "diagnostics.csv").read_bytes() == (b / "diagnostics.csv").read_bytes()
    index = read_json(a / "snapshots.json")
    assert index[0]["t"] == "0.0" and float(index[-1]["t"]) == 0.3
    for e in index:
        assert (a / e["file"]).read_bytes() == (b / e["file"]).read_bytes()
    meta = read_json(a / "meta.json")
    assert meta["overrides"] == {"T": 0.3}
    assert meta["derived"]["n1"] == pytest.approx(2 * np.pi)
    assert "surrogate" in meta["classifier"]
    verdicts = read_json(a / "verdicts.json")
    assert [v["check"] for v in verdicts["verdicts"]] == ["nonnegativity"]
    u = read_snapshot(a / index[-1]["file"])
    assert u.size == 64


def test_resume_reproduces_uninterrupted_run(tmp_path):
    spec = validate_scenario(doc(T=1.0, snapshot_every=50, cadence=5))
    full = run_scenario(spec, tmp_path / "full")
    # emulate an interruption: keep only the snapshots before t = 0.5
    part = tmp_path / "part"
    part.mkdir()
    index = [e for e in read_json(tmp_path / "full/snapshots.json") if float(e["t"]) < 0.5]
    for e in index:
        (part / e["file"]).write_bytes((tmp_path / "full" / e["file"]).read_bytes())
    (part / "snapshots.json").write_text(json.dumps(index))
    (part / "meta.json").write_bytes((tmp_path / "full/meta.json").read_bytes())
    cont = resume(part)
    assert cont.meta["resumed_from"]["step"] == index[-1]["step"]
    ref = dict(zip(full.trajectory.times, full.trajectory.states))
    matched = [t for t in cont.trajectory.times if t in ref]
    assert len(matched) > 5
    for t, u in zip(cont.trajectory.times, cont.trajectory.states):
        if t in ref:
            assert np.max(np.abs(u - ref[t])) <= 1e-12


def test_resume_extends_horizon(tmp_path):
    spec = validate_scenario(doc(T=0.2))
    run_scenario(spec, tmp_path)
    res = resume(tmp_path, T=0.4)
    assert res.trajectory.final_t == 0.4
    assert read_json(tmp_path / "meta.json")["scenario"]["T"] == 0.4


def test_theorem1_gate():
    spec = validate_scenario(doc(params={"semilinearity": {"kind": "constant", "c": 1.0}}))
    with pytest.raises(CampaignRefused, match="gamma"):
        verify_theorem1(spec)


def test_rlarge_gate_and_corollary_dispatch():
    weak = validate_scenario(doc(params={"semilinearity": {"kind": "constant", "c": 0.5},
                                         "r": 0.5}))
    with pytest.raises(CampaignRefused, match="large-r"):
        verify_theorem_rlarge(weak)
    small = validate_scenario(doc(params={"semilinearity": {"kind": "constant", "c": 1.0}}))
    with pytest.raises(CampaignRefused, match="corollary"):
        verify_theorem_rlarge(small)


@pytest.mark.parametrize("change,field", [
    ({"initial_condition": {"type": "cosine", "a": 1.2, "b": 0.5}}, "initial_condition"),
    ({"params": {"semilinearity": {"kind": "affine", "nu": 0.5}, "coupling": False}},
     "params.semilinearity.kind"),
    ({"params": {"semilinearity": {"kind": "linear"}}}, "params.coupling"),
])
def test_theorem3_validator(change, field):
    spec = validate_scenario(doc(**change))
    with pytest.raises(SchemaError) as e:
        verify_theorem3(spec)
    assert field in [loc for loc, _ in e.value.problems]


def test_theorem3_constant_one_has_zero_entropy():
    spec = validate_scenario(doc(initial_condition={"type": "constant", "a": 1.0}, T=1.0,
                                 params={"semilinearity": {"kind": "linear"},
                                         "coupling": False, "eps": 1e-3}))
    res = verify_theorem3(spec)
    assert all(v.status == "pass" for v in res.verdicts)
    assert res.trajectory is not None
    from fks.diagnostics import entropy
    assert all(entropy(u) == 0.0 for u in res.trajectory.states)


def test_campaign_verdicts_cover_activated_checks():
    spec = validate_scenario(doc(T=0.5, params={"semilinearity": {"kind": "affine", "nu": 0.5},
                                                "eps": 1e-3, "r": 2.0},
                                 checks=[{"name": "weak_residual", "options": {"horizon": 0.25}},
                                         {"name": "entropy_balance",
                                          "options": {"horizon": 0.25}}]))
    res = verify_theorem1(spec)
    assert [v.check for v in res.verdicts] == list(CAMPAIGN_CHECKS["theorem1"])
    assert all(v.status == "pass" for v in res.verdicts), [v for v in res.verdicts]


def test_blowup_sets_exit_code():
    spec = validate_scenario(doc(ctrl={"blowup_threshold": 1.2}, checks=[{"name": "blowup_free"}]))
    res = run_scenario(spec)
    assert res.classification == "blowup" and res.exit_code == 3
    assert res.verdicts[0].status == "fail"


def test_sweeps_on_steady_state_are_machine_zero():
    spec = validate_scenario(doc(initial_condition={"type": "constant", "a": 1.0}, T=0.5))
    v = sweep_viscosity(spec, [1e-2, 1e-3, 1e-4])
    assert max(v["differences"]) <= 1e-12 and v["status"] == "pass"
    r = sweep_resolution(spec, [16, 32, 64])
    assert max(r["differences"]) <= 1e-12 and r["status"] == "converged"


def test_pool_matches_serial(tmp_path):
    spec = validate_scenario(doc(T=0.3))
    a = sweep_viscosity(spec, [1e-2, 1e-3], jobs=1)
    b = sweep_viscosity(spec, [1e-2, 1e-3], jobs=2, out=tmp_path)
    assert a["differences"] == b["differences"]
    assert (tmp_path / "sweep_viscosity.csv").is_file()


def test_explore_subcritical_table(tmp_path):
    spec = validate_scenario(doc(T=0.2, params={"semilinearity": {"kind": "constant", "c": 1.0},
                                                "eps": 1e-3}))
    rep = explore_subcritical(spec, [0.8], [0.0, 1.5], out=tmp_path, eps_factor=0.1)
    assert [(c["alpha"], c["r"]) for c in rep["cells"]] == [(0.8, 0.0), (0.8, 1.5)]
    assert {"label_n", "label_2n", "label_eps", "stable"} <= set(rep["cells"][0])
    assert (tmp_path / "explore_subcritical.csv").is_file()
