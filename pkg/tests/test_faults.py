from __future__ import annotations

import itertools
import json

import numpy as np
import pytest

from synlearn.faults import (
    FaultGenerator,
    FaultModel,
    FaultModelError,
    FaultTemplate,
    PriorDistribution,
    build_prior,
    data_faults,
    effective_rate,
    eigenvalue,
    eigenvalues,
    error_rates_dense,
    measurement_faults,
)
from synlearn.gf2 import symplectic_twist
from synlearn.pauli import SpacetimePauli


def _gen(text, q, n, T):
    return FaultGenerator(SpacetimePauli.parse(text, n, T), q)


def full_distribution(model: FaultModel) -> dict[bytes, float]:
    """Enumerate every firing pattern of the generators."""
    out: dict[bytes, float] = {}
    K = model.K
    for pattern in itertools.product([0, 1], repeat=K):
        w = 1.0
        e = np.zeros(model.supports.shape[1], dtype=np.uint8)
        for j, fire in enumerate(pattern):
            w *= model.q[j] if fire else 1.0 - model.q[j]
            if fire:
                e ^= model.supports[j]
        out[e.tobytes()] = out.get(e.tobytes(), 0.0) + w
    return out


def walsh(dist: dict[bytes, float], b: np.ndarray, n: int) -> float:
    bt = symplectic_twist(b, n).astype(int)
    return sum(p * (-1) ** int(np.frombuffer(k, dtype=np.uint8).astype(int) @ bt % 2) for k, p in dist.items())


def test_generator_rejects_half_and_identity():
    with pytest.raises(FaultModelError, match="1-2q"):
        _gen("X1@t0", 0.5, 1, 0)
    with pytest.raises(FaultModelError, match="identity"):
        FaultGenerator(SpacetimePauli.identity(1, 0), 0.1)
    with pytest.raises(FaultModelError, match="finite"):
        _gen("X1@t0", float("nan"), 1, 0)


def test_duplicate_supports_rejected():
    with pytest.raises(FaultModelError, match="share"):
        FaultModel([_gen("X1@t0", 0.1, 1, 0), _gen("X1@t0", 0.2, 1, 0)])


def test_negative_q_allowed_but_not_sampleable():
    m = FaultModel([_gen("X1@t0", -0.01, 1, 0)])
    assert not m.is_sampleable


def test_eigenvalue_empty_model():
    m = FaultModel([], n=2, T=0)
    assert eigenvalue(m, SpacetimePauli.parse("X1@t0Z2@t0", 2, 0)) == 1.0


def test_eigenvalue_single_generator():
    m = FaultModel([_gen("X1@t0", 0.1, 1, 0)])
    assert eigenvalue(m, SpacetimePauli.parse("Z1@t0", 1, 0)) == pytest.approx(0.8)
    assert eigenvalue(m, SpacetimePauli.parse("X1@t0", 1, 0)) == 1.0


def test_eigenvalue_matches_dense_fourier_oracle():
    rng = np.random.default_rng(0)
    n, T = 4, 0
    m = FaultModel([_gen("X1@t0Z2@t0", 0.05, n, T), _gen("Y3@t0", 0.12, n, T), _gen("Z1@t0Z4@t0X2@t0", 0.2, n, T)])
    dist = full_distribution(m)
    bs = rng.integers(0, 2, size=(40, 2 * n), dtype=np.uint8)
    want = np.array([walsh(dist, b, n) for b in bs])
    got = np.array([eigenvalue(m, SpacetimePauli.from_dense(n, T, b)) for b in bs])
    assert np.max(np.abs(got - want)) < 1e-12
    assert np.max(np.abs(eigenvalues(m, bs) - want)) < 1e-12


def test_error_rates_empty():
    d = error_rates_dense(FaultModel([], n=1, T=0))
    assert d[SpacetimePauli.identity(1, 0)] == 1.0


def test_single_qubit_pauli_lindblad_relations():
    qx, qy, qz = 0.01, 0.02, 0.03
    m = FaultModel([_gen("X1@t0", qx, 1, 0), _gen("Y1@t0", qy, 1, 0), _gen("Z1@t0", qz, 1, 0)])
    d = error_rates_dense(m)
    p = {s: d[SpacetimePauli.parse(f"{s}1@t0", 1, 0)] for s in "XYZ"}
    assert p["X"] == pytest.approx(qx * (1 - qy) * (1 - qz) + (1 - qx) * qy * qz, abs=1e-15)
    lam_x = eigenvalue(m, SpacetimePauli.parse("X1@t0", 1, 0))
    assert lam_x == pytest.approx((1 - 2 * qy) * (1 - 2 * qz), abs=1e-15)
    assert lam_x == pytest.approx(1 - 2 * p["Y"] - 2 * p["Z"], abs=1e-15)


def test_dense_roundtrip_to_eigenvalues():
    rng = np.random.default_rng(1)
    n, T = 2, 2
    gens = []
    while len(gens) < 6:
        v = rng.integers(0, 2, size=2 * n * (T + 1), dtype=np.uint8)
        if v.any() and all(not np.array_equal(v, g.support.to_dense()) for g in gens):
            gens.append(FaultGenerator(SpacetimePauli.from_dense(n, T, v), float(rng.uniform(0.001, 0.2))))
    m = FaultModel(gens)
    d = error_rates_dense(m)
    assert sum(d.probs) == pytest.approx(1.0)
    for _ in range(30):
        b = SpacetimePauli.from_dense(n, T, rng.integers(0, 2, size=2 * n * (T + 1), dtype=np.uint8))
        assert abs(d.eigenvalue(b) - eigenvalue(m, b)) < 1e-12


def test_prior_distinct_syndromes(rep_code):
    m = FaultModel([_gen("X1@t0", 0.01, 3, 6), _gen("X3@t0", 0.02, 3, 6)], rep_code)
    prior = build_prior(m)
    assert prior.q.tolist() == [0.01, 0.02]


def test_prior_pair_shares_syndrome(rep_code):
    # X3 on slices 2 and 3 differ by the transport g(X3, 2), so they share a syndrome
    a = SpacetimePauli.parse("X3@t2", 3, 6)
    b = SpacetimePauli.parse("X3@t3", 3, 6)
    assert rep_code.syndrome_bits([a])[0].tolist() == rep_code.syndrome_bits([b])[0].tolist()
    m = FaultModel([FaultGenerator(a, 0.03), FaultGenerator(b, 0.05)], rep_code)
    prior = build_prior(m)
    assert prior.K == 1
    assert prior.q[0] == pytest.approx(0.03 + 0.05 - 2 * 0.03 * 0.05, abs=1e-15)


def test_prior_triple_by_direct_product(rep_code):
    gens = [SpacetimePauli.parse(f"X3@t{t}", 3, 6) for t in (2, 3)]
    gens.append(gens[0] * SpacetimePauli.parse("X3@t0X3@t1", 3, 6))  # gauge-dressed copy
    qs = [0.01, 0.04, 0.07]
    m = FaultModel([FaultGenerator(g, q) for g, q in zip(gens, qs)], rep_code)
    prior = build_prior(m)
    assert prior.K == 1
    odd = sum(
        np.prod([q if f else 1 - q for q, f in zip(qs, pat)])
        for pat in itertools.product([0, 1], repeat=3)
        if sum(pat) % 2
    )
    assert prior.q[0] == pytest.approx(odd, abs=1e-15)


def test_prior_rejects_zero_syndrome(rep_code):
    m = FaultModel([_gen("X3@t0X3@t1", 0.01, 3, 6)], rep_code)
    with pytest.raises(FaultModelError, match="zero syndrome"):
        build_prior(m)


def test_prior_json_roundtrip(rep_prior, rep_code):
    again = PriorDistribution.from_json(json.loads(json.dumps(rep_prior.to_json())), rep_code)
    assert np.array_equal(again.q, rep_prior.q)
    assert np.array_equal(again.syndromes, rep_prior.syndromes)


def test_effective_rate_identity_empty(rep_code):
    assert effective_rate(FaultModel([], rep_code), SpacetimePauli.identity(3, 6), 1) == 1.0


def _coset_mass_oracle(model, code, a):
    d = error_rates_dense(model)
    return sum(d.probs[i] for i in range(len(d)) if code.in_gauge((d.element(i) * a))[0])


@pytest.mark.parametrize("support", ["X1@t0", "X3@t0X3@t1"])
def test_effective_rate_gauge_element_dense_oracle(rep_code, support):
    m = FaultModel([_gen(support, 0.07, 3, 6)], rep_code)
    a = SpacetimePauli.parse("X3@t2X3@t3", 3, 6)
    assert rep_code.in_gauge(a)[0]
    got = effective_rate(m, a, 1)
    assert got == pytest.approx(_coset_mass_oracle(m, rep_code, a), abs=1e-15)
    if support == "X1@t0":
        assert got == pytest.approx(1 - 0.07)


def test_effective_rate_truncation_monotone(rep_model, rep_code):
    m = rep_model.scaled(20)
    a = SpacetimePauli.parse("X1@t2", 3, 6)
    vals = [effective_rate(m, a, k) for k in (1, 2, 3)]
    assert vals[0] <= vals[1] <= vals[2]


def test_templates(rep_code):
    c = rep_code.circuit
    assert len(data_faults(c, "X")) == 3 * 7
    meas = measurement_faults(c)
    assert len(meas) == 6
    syn = rep_code.syndrome_bits(meas)
    assert (syn.sum(axis=1) >= 1).all()
    m = FaultTemplate(prep=0.5, data=1.0, measurement=2.0).build(rep_code, 1e-3)
    assert m.K == 27
    assert sorted(set(np.round(m.q, 12))) == [5e-4, 1e-3, 2e-3]


def test_fault_json_roundtrip(tmp_path, rep_model, rep_code):
    rep_model.save(tmp_path / "f.json")
    again = FaultModel.load(tmp_path / "f.json", rep_code)
    assert np.array_equal(again.supports, rep_model.supports) and np.array_equal(again.q, rep_model.q)
    slices = FaultModel.from_json({"generators": [{"slices": {"0": "X1", "1": "X1"}, "q": 0.1}]}, rep_code)
    assert str(slices.generators[0].support) == "X1@t0X1@t1"
