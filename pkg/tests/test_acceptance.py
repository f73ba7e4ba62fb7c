"""Acceptance criteria, one test each, with runtime budgets."""

from __future__ import annotations

import sys
import time
from pathlib import Path

import numpy as np
import pytest

from synlearn.circuit import load_bundled
from synlearn.estimator import draw_design, recover, rip_constant
from synlearn.experiments import ExperimentConfig, run_accuracy_vs_shots, run_lep_comparison, run_shots_vs_p
from synlearn.faults import FaultGenerator, FaultModel, FaultTemplate, build_prior, eigenvalues
from synlearn.learnability import analyze
from synlearn.lep import build_decoder, exact_lep, lab_frame_failure, predict_lep, rest_frame_failure, sample_lep
from synlearn.pauli import PauliString, SpacetimePauli
from synlearn.sampler import estimate_eigenvalue, sample_shots, shots_for_precision
from synlearn.spacetime import build_spacetime_code, propagate_backward

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


class Budget:
    def __init__(self, seconds: float):
        self.seconds = seconds

    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.t0
        if exc[0] is None:
            assert self.elapsed < self.seconds, f"took {self.elapsed:.1f} s, budget {self.seconds} s"


def _noiseless_y(code, model, design):
    meas = np.array([m.to_dense() for m in code.meas_gens], dtype=np.int64)
    bs = ((design.mu.astype(np.int64) @ meas) & 1).astype(np.uint8)
    return -np.log(eigenvalues(model, bs))


@pytest.mark.acceptance(1, "worked-example dimensions")
def test_ac1_worked_examples():
    with Budget(1.0):
        c = load_bundled("repetition_d3_r3")
        code = build_spacetime_code(c)
        d = code.dims
        assert (d.gauge_rank, d.M, d.k) == (32, 8, 1)
        for base, l in zip(["X1X2X3", "Z1"], code.logical_gens):
            assert l == propagate_backward(c, SpacetimePauli.at(PauliString.parse(base, 3), 6, 6))
        d2 = build_spacetime_code(load_bundled("bacon_shor_2x2")).dims
        assert (d2.gauge_rank, d2.M, d2.logical_count) == (16, 6, 2)
        d3 = build_spacetime_code(load_bundled("bacon_shor_3x3")).dims
        assert (d3.gauge_rank, d3.M, d3.k) == (72, 16, 1)
        assert d3.total - d3.gauge_rank - d3.M == 2


@pytest.mark.acceptance(2, "frame invariance of the failure test")
def test_ac2_frame_invariance(rep_code, rep_model, rep_prior):
    with Budget(10.0):
        dec = build_decoder(rep_code, rep_prior, 2)
        rng = np.random.default_rng(2)
        fire = rng.random((10_000, rep_model.K)) < 0.08
        faults = ((fire.astype(np.int64) @ rep_model.supports.astype(np.int64)) & 1).astype(np.uint8)
        hits = 0
        for l, base in zip(rep_code.logical_gens, rep_code.base_logicals):
            rest = rest_frame_failure(rep_code, dec, faults, l)
            lab = lab_frame_failure(rep_code, dec, faults, base)
            assert np.array_equal(rest, lab)
            hits += int(rest.sum())
        # the comparison covers both verdicts
        assert 0 < hits < 2 * len(faults)


@pytest.mark.acceptance(3, "noiseless recovery identity")
def test_ac3_noiseless_recovery():
    cases = [
        ("repetition_d3_r3", FaultTemplate(), 5e-4),
        ("repetition_d5_r3", FaultTemplate(), 1e-3),
        ("surface_d3_r1", FaultTemplate(data_paulis="XZ"), 1e-3),
        ("bacon_shor_2x2", FaultTemplate(data_paulis="XZ", measurement=0.0), 1e-3),
    ]
    with Budget(5.0):
        for name, template, p in cases:
            code = build_spacetime_code(load_bundled(name))
            model = template.build(code, p)
            report = analyze(model)
            model = FaultModel([g for i, g in enumerate(model.generators) if i not in set(report.invisible)], code)
            prior = build_prior(model)
            assert prior.K <= 200
            design = draw_design(code, prior, seed=0)
            res = recover(design, _noiseless_y(code, model, design))
            assert np.max(np.abs(res.q_bar - prior.q)) < 1e-10, name


@pytest.mark.acceptance(5, "noisy recovery bound over 100 seeds")
def test_ac5_noisy_recovery_bound(rep_code, rep_model, rep_prior):
    eps = 2e-3
    K = rep_prior.K
    with Budget(30.0):
        for seed in range(100):
            design = draw_design(rep_code, rep_prior, q_rows=16 * K, seed=seed)
            delta = rip_constant(design)
            assert delta < 1
            rng = np.random.default_rng(10_000 + seed)
            noise = eps * rng.choice([-1.0, 1.0], size=design.q)
            res = recover(design, _noiseless_y(rep_code, rep_model, design) + noise)
            bound = np.sqrt(1 + delta) / (1 - delta) * eps
            assert np.all(np.abs(res.q_bar - rep_prior.q) <= bound)


@pytest.mark.acceptance(4, "predicted, exact and sampled LEP agree")
def test_ac4_oracle_equivalence(small_code):
    with Budget(60.0):
        for p in (0.01, 0.03):
            model = FaultTemplate().build(small_code, p)
            assert model.K <= 14
            prior = build_prior(model)
            dec = build_decoder(small_code, prior, 2)
            for l in range(len(small_code.logical_gens)):
                exact = exact_lep(model, small_code, dec, l)
                pred = predict_lep(prior, small_code, dec, l, max_order=prior.K)
                assert abs(pred.value - exact) <= 1e-12
            exact = exact_lep(model, small_code, dec, 0)
            assert exact > 0
            s = sample_lep(model, small_code, dec, 0, 1_000_000, seed=4)
            assert s.ci_low <= exact <= s.ci_high


@pytest.mark.acceptance(6, "variance-aware shot count")
def test_ac6_variance_aware_sampling(rep_code):
    eps, tau = 0.01, 0.2
    S = shots_for_precision(eps, tau, 0.05)
    fault = SpacetimePauli.parse("X1@t0", rep_code.n, rep_code.T)
    model = FaultModel([FaultGenerator(fault, eps)], rep_code)
    syn = rep_code.syndrome_bits(fault)[0]
    mu = np.zeros_like(syn)
    mu[np.flatnonzero(syn)[0]] = 1
    with Budget(60.0):
        violations = 0
        for run in range(100):
            est = estimate_eigenvalue(sample_shots(model, S, seed=run), mu)
            violations += abs(est.bern_rate - eps) > tau * eps
        print(f"S = {S}, violations {violations}/100")
        assert violations <= 7


@pytest.mark.acceptance(7, "accuracy vs shots slope")
def test_ac7_accuracy_vs_shots(rep_code):
    cfg = ExperimentConfig.load(CONFIGS / "accuracy_vs_shots_repetition.json")
    with Budget(600.0):
        res = run_accuracy_vs_shots(cfg, code=rep_code)
    print(f"tau vs N slope {res.fit.slope:.3f}, r2 {res.fit.r2:.3f}")
    assert res.fit.r2 >= 0.9
    assert abs(res.fit.slope + 0.5) <= 0.3


@pytest.mark.acceptance(8, "shots vs p exponent")
def test_ac8_shots_vs_p(rep_code):
    cfg = ExperimentConfig.load(CONFIGS / "shots_vs_p_repetition.json")
    assert cfg.p_grid == [2e-4, 5e-4, 1e-3, 2e-3]
    with Budget(1200.0):
        res = run_shots_vs_p(cfg, code=rep_code)
    print(f"N vs p exponent {res.fit.slope:.3f}, r2 {res.fit.r2:.3f}, dropped {res.extra['dropped_p']}")
    assert not res.extra["dropped_p"]
    assert res.fit.r2 >= 0.9
    assert abs(res.fit.slope + 1.0) <= 0.2


@pytest.mark.acceptance(9, "predicted LEP needs fewer shots than sampled LEP")
def test_ac9_lep_sample_complexity(rep_code):
    cfg = ExperimentConfig.load(CONFIGS / "lep_comparison_repetition.json")
    assert cfg.p_grid == [5e-4]
    with Budget(1200.0):
        res = run_lep_comparison(cfg, code=rep_code)
    ex = res.extra
    print(f"shots for 10% rel err: predicted {ex['shots_needed_predicted']:.3g}, "
          f"sampled {ex['shots_needed_sampled']:.3g}, ratio {ex['ratio']:.1f}")
    assert ex["fit_predicted"]["r2"] >= 0.9 and ex["fit_sampled"]["r2"] >= 0.9
    assert ex["ratio"] >= 10


@pytest.mark.acceptance(10, "unlearnability witness")
def test_ac10_unlearnability_witness(rep_code):
    a = SpacetimePauli.parse("X2@t3", rep_code.n, rep_code.T)
    lx = rep_code.logical_gens[0]
    other = [SpacetimePauli.parse(s, rep_code.n, rep_code.T) for s in ("X1@t0", "X3@t5")]
    gens = [a, a * lx] + other

    def model(qa, qc):
        return FaultModel([FaultGenerator(s, q) for s, q in zip(gens, [qa, qc, 0.01, 0.01])], rep_code)

    with Budget(10.0):
        m1, m2 = model(0.01, 0.04), model(0.04, 0.01)
        r = analyze(m1)
        assert r.labels[1] == "C" and not r.logical_learnable
        p1, p2 = build_prior(m1), build_prior(m2)
        assert np.array_equal(p1.q, p2.q)
        assert np.array_equal(p1.representatives, p2.representatives)
        dec = build_decoder(rep_code, p1, 2)
        e1, e2 = exact_lep(m1, rep_code, dec, lx), exact_lep(m2, rep_code, dec, lx)
        assert abs(e1 - e2) > 1e-6


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-s"]))
