from __future__ import annotations

import math

import numpy as np
import pytest

from synlearn.faults import FaultGenerator, FaultModel, eigenvalues
from synlearn.pauli import SpacetimePauli
from synlearn.sampler import (
    SamplerError,
    ShotSet,
    estimate_eigenvalue,
    estimate_eigenvalues,
    resolve_threads,
    sample_shots,
    shots_for_precision,
)


def test_empty_model_gives_zero_shots(rep_code):
    ss = sample_shots(FaultModel([], rep_code), 1000, seed=1)
    assert len(ss) == 1000 and not ss.to_dense().any()


def test_single_generator_firing_rate(rep_code):
    m = FaultModel([FaultGenerator(SpacetimePauli.parse("X1@t0", 3, 6), 0.2)], rep_code)
    n = 100_000
    ss = sample_shots(m, n, seed=2)
    rate = ss.to_dense().any(axis=1).mean()
    assert abs(rate - 0.2) <= 3 * math.sqrt(0.2 * 0.8 / n)
    assert ss.logical.shape == (n,)


def test_repetition_eigenvalues_within_three_sigma(rep_code, rep_model):
    m = rep_model.scaled(20)
    n = 100_000
    ss = sample_shots(m, n, seed=3)
    mus = np.eye(rep_code.M, dtype=np.uint8)
    lam_hat = estimate_eigenvalues(ss, mus)
    meas = np.array([g.to_dense() for g in rep_code.meas_gens])
    lam = eigenvalues(m, meas)
    sigma = np.sqrt((1 - lam**2) / n)
    assert np.all(np.abs(lam_hat - lam) <= 3 * sigma)


def test_zero_mu_gives_one(rep_code, rep_model):
    ss = sample_shots(rep_model.scaled(50), 5000, seed=4)
    assert estimate_eigenvalue(ss, np.zeros(rep_code.M, dtype=np.uint8)).lambda_hat == 1.0


def test_no_fault_model_single_check(rep_code):
    ss = sample_shots(FaultModel([], rep_code), 100, seed=0)
    mu = np.zeros(rep_code.M, dtype=np.uint8)
    mu[3] = 1
    est = estimate_eigenvalue(ss, mu)
    assert est.lambda_hat == 1.0 and est.bern_rate == 0.0


def test_concatenation_is_weighted_mean(rep_code, rep_model):
    m = rep_model.scaled(40)
    a, b = sample_shots(m, 3000, seed=5), sample_shots(m, 7000, seed=6)
    mus = np.random.default_rng(0).integers(0, 2, size=(10, rep_code.M), dtype=np.uint8)
    whole = estimate_eigenvalues(a.concat(b), mus)
    parts = (3000 * estimate_eigenvalues(a, mus) + 7000 * estimate_eigenvalues(b, mus)) / 10000
    assert np.allclose(whole, parts, atol=1e-12)


def test_determinism_prefix_and_threads(rep_model):
    m = rep_model.scaled(30)
    a = sample_shots(m, 150_000, seed=9, threads=1)
    b = sample_shots(m, 150_000, seed=9, threads=3)
    c = sample_shots(m, 70_000, seed=9)
    assert np.array_equal(a.words, b.words) and np.array_equal(a.logical, b.logical)
    assert np.array_equal(a.words[:70_000], c.words)
    assert not np.array_equal(a.words, sample_shots(m, 150_000, seed=10).words)


def test_env_overrides_threads(monkeypatch):
    monkeypatch.setenv("SYNLEARN_THREADS", "4")
    assert resolve_threads(1) == 4
    monkeypatch.setenv("SYNLEARN_THREADS", "x")
    with pytest.raises(SamplerError):
        resolve_threads()


def test_sign_extended_models_rejected(rep_code):
    m = FaultModel([FaultGenerator(SpacetimePauli.parse("X1@t0", 3, 6), -0.01)], rep_code)
    with pytest.raises(SamplerError, match="quasi-probability"):
        sample_shots(m, 10)


def test_binary_roundtrip_and_errors(tmp_path, rep_model):
    ss = sample_shots(rep_model.scaled(100), 1234, seed=7)
    path = tmp_path / "shots.bin"
    ss.save(path)
    assert path.stat().st_size == 16 + 1234 * 1
    again = ShotSet.load(path)
    assert again.M == ss.M and np.array_equal(again.words, ss.words)
    bad = tmp_path / "bad.bin"
    bad.write_bytes(b"NOPE" + path.read_bytes()[4:])
    with pytest.raises(SamplerError, match="magic"):
        ShotSet.load(bad)
    short = tmp_path / "short.bin"
    short.write_bytes(path.read_bytes()[:-3])
    with pytest.raises(SamplerError, match="payload"):
        ShotSet.load(short)


def test_wide_syndromes_roundtrip(tmp_path):
    bits = np.random.default_rng(0).integers(0, 2, size=(50, 70), dtype=np.uint8)
    ss = ShotSet.from_dense(bits)
    ss.save(tmp_path / "w.bin")
    assert np.array_equal(ShotSet.load(tmp_path / "w.bin").to_dense(), bits)
    uniq, counts = ss.histogram()
    assert counts.sum() == 50


def test_csv_dump(tmp_path):
    ss = ShotSet.from_dense(np.array([[1, 0, 1], [0, 0, 0]], dtype=np.uint8))
    ss.to_csv(tmp_path / "s.csv")
    assert (tmp_path / "s.csv").read_text().splitlines() == ["shot,m0,m1,m2", "0,1,0,1", "1,0,0,0"]


def test_shots_for_precision_formula():
    assert shots_for_precision(0.01, 0.1, 0.05) == math.ceil(12 * 100 * 100 * math.log(20))
    assert shots_for_precision(0.01, 0.1, 0.05) == 359488


def test_shots_for_precision_scaling():
    base = shots_for_precision(0.01, 0.2, 0.05)
    assert abs(shots_for_precision(0.01, 0.1, 0.05) - 4 * base) <= 4
    assert abs(shots_for_precision(0.005, 0.2, 0.05) - 2 * base) <= 2


@pytest.mark.parametrize("args", [(0.6, 0.1, 0.05), (0.01, 1.5, 0.05), (0.01, 0.1, 0.0)])
def test_shots_for_precision_domain(args):
    with pytest.raises(ValueError):
        shots_for_precision(*args)
