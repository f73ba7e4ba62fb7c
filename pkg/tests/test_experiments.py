from __future__ import annotations

import json
import math

import numpy as np
import pytest

from synlearn.experiments import (
    ExperimentConfig,
    loglog_fit,
    run_accuracy_vs_shots,
    run_lep_comparison,
    run_shots_vs_p,
    shots_for_target,
    trial_seed,
)
from synlearn.faults import build_prior
from synlearn.lep import build_decoder, exact_lep


def _cfg(**kw):
    base = dict(instance="repetition_d3_r1", p_grid=[2e-3], shot_grid=[2_000, 8_000, 32_000], trials=8, seed=5)
    base.update(kw)
    return ExperimentConfig(**base)


def test_config_validation():
    with pytest.raises(ValueError, match="nonempty"):
        _cfg(p_grid=[])
    with pytest.raises(ValueError, match="trials"):
        _cfg(trials=0)
    cfg = ExperimentConfig.from_json(json.loads(json.dumps(_cfg().to_json())))
    assert cfg == _cfg()


def test_config_load_resolves_bundled(tmp_path):
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"instance": "repetition_d3_r3", "template": {"data_paulis": "X"}}))
    cfg = ExperimentConfig.load(path)
    assert cfg.circuit().n == 3 and cfg.label == "repetition_d3_r3"


def test_loglog_fit_exact_power_law():
    x = np.array([1e2, 1e3, 1e4])
    f = loglog_fit(x, 3 * x**-0.5)
    assert f.slope == pytest.approx(-0.5) and f.r2 == pytest.approx(1.0)
    assert 10**f.intercept == pytest.approx(3)


def test_trial_seed_distinct_and_stable():
    assert trial_seed(1, 2, 3) == trial_seed(1, 2, 3)
    assert len({trial_seed(1, 0, i) for i in range(100)}) == 100


def test_shots_for_target_interpolates():
    pts = [{"shots": 100, "tau_median": 1.0}, {"shots": 10_000, "tau_median": 0.1}]
    assert shots_for_target(pts, 0.316227766) == pytest.approx(1000, rel=1e-6)
    assert shots_for_target(pts, 0.01) is None


def test_noiseless_tau_is_zero(small_code):
    res = run_accuracy_vs_shots(_cfg(trials=3), noiseless=True, code=small_code)
    assert all(pt["tau_median"] < 1e-9 for pt in res.points)


def test_accuracy_medians_decrease(small_code):
    res = run_accuracy_vs_shots(_cfg(shot_grid=[1_000, 10_000, 100_000], trials=10), code=small_code)
    med = [pt["tau_median"] for pt in res.points]
    assert med[0] > med[1] > med[2]
    assert res.fit.slope < 0


def test_accuracy_deterministic(small_code):
    a = run_accuracy_vs_shots(_cfg(trials=4), code=small_code)
    b = run_accuracy_vs_shots(_cfg(trials=4), code=small_code, threads=2)
    assert a.to_json() == b.to_json()


def test_shots_vs_p_doubling_halves(small_code):
    cfg = _cfg(p_grid=[2e-3, 4e-3], shot_grid=[1_000, 3_000, 10_000, 30_000, 100_000], trials=16, tau_target=0.3)
    res = run_shots_vs_p(cfg, code=small_code)
    assert not res.extra["dropped_p"]
    n1, n2 = (pt["shots_needed"] for pt in res.points)
    assert n1 / n2 == pytest.approx(2.0, rel=0.35)


def test_shots_vs_p_drops_unreachable(small_code):
    res = run_shots_vs_p(_cfg(p_grid=[2e-3], tau_target=1e-6, trials=2), code=small_code)
    assert res.extra["dropped_p"] == [2e-3] and res.fit is None


def test_lep_comparison_rel_err_matches_binomial(small_code):
    cfg = _cfg(p_grid=[5e-3], shot_grid=[2_000], sampled_shot_grid=[20_000, 80_000], trials=400)
    res = run_lep_comparison(cfg, code=small_code)
    p_l = res.extra["p_true"]
    for pt in res.points:
        if pt["rel_err_sampled"] is not None:
            theory = math.sqrt((1 - p_l) / (p_l * pt["shots"]))
            assert pt["rel_err_sampled"] == pytest.approx(theory, rel=0.3)


def test_lep_estimators_unbiased(small_code):
    cfg = _cfg(p_grid=[5e-3], shot_grid=[20_000], sampled_shot_grid=[20_000], trials=40)
    res = run_lep_comparison(cfg, code=small_code)
    model = cfg.template.build(small_code, 5e-3)
    prior = build_prior(model)
    exact = exact_lep(model, small_code, build_decoder(small_code, prior, cfg.decoder_weight), cfg.logical)
    assert res.extra["p_true"] == pytest.approx(exact, rel=1e-6)
    (pt,) = res.points
    n = cfg.trials
    for key in ("predicted", "sampled"):
        sem = pt[f"rel_err_{key}"] * exact / math.sqrt(n)
        assert abs(pt[key] - exact) < 4 * sem


def test_scaling_result_write(tmp_path, small_code):
    res = run_accuracy_vs_shots(_cfg(trials=2), code=small_code)
    csv_path, js_path = res.write(tmp_path, "acc")
    header = csv_path.read_text().splitlines()[0].split(",")
    assert header == ["instance", "p", "shots", "trials", "seed", "tau_median", "tau_q25", "tau_q75"]
    assert json.loads(js_path.read_text())["fit"]["r2"] == res.fit.r2
