from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from synlearn.gf2 import (
    BitMatrix,
    BitVec,
    RowSpace,
    gf2_nullspace,
    gf2_rank,
    gf2_solve,
    independent_rows,
    lstsq_solve,
    pack_bits,
    symplectic_form,
    symplectic_inner,
    unpack_bits,
)


def naive_rank(rows: list[list[int]]) -> int:
    """Textbook elimination on Python lists."""
    m = [list(r) for r in rows]
    rank, col = 0, 0
    ncols = len(m[0]) if m else 0
    while rank < len(m) and col < ncols:
        piv = next((i for i in range(rank, len(m)) if m[i][col]), None)
        if piv is None:
            col += 1
            continue
        m[rank], m[piv] = m[piv], m[rank]
        for i in range(len(m)):
            if i != rank and m[i][col]:
                m[i] = [a ^ b for a, b in zip(m[i], m[rank])]
        rank += 1
        col += 1
    return rank


def test_pack_roundtrip_across_word_boundary():
    rng = np.random.default_rng(0)
    for n in (1, 63, 64, 65, 130):
        bits = rng.integers(0, 2, size=(5, n), dtype=np.uint8)
        assert np.array_equal(unpack_bits(pack_bits(bits), n), bits)


def test_bitvec_basics():
    v = BitVec.from_indices(70, [0, 64, 69])
    assert v.weight() == 3 and v.support() == [0, 64, 69]
    assert (v ^ v) == BitVec.zeros(70)
    assert v.dot(BitVec.from_indices(70, [64])) == 1
    assert BitVec.from_str(str(v)) == v


def test_rank_identity():
    assert gf2_rank(BitMatrix.identity(4)) == 4


def test_rank_zero():
    assert gf2_rank(BitMatrix.zeros(3, 5)) == 0


def test_rank_repetition_commutation_matrix_matches_naive(rep_code, rep_model):
    mat = rep_code.syndrome_bits(rep_model.supports).T
    assert mat.shape[0] == 8
    assert gf2_rank(BitMatrix(mat)) == naive_rank(mat.tolist())


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 12), st.integers(1, 80), st.integers(0, 2**32 - 1))
def test_rank_random_matches_naive(r, c, seed):
    m = np.random.default_rng(seed).integers(0, 2, size=(r, c), dtype=np.uint8)
    assert gf2_rank(BitMatrix(m)) == naive_rank(m.tolist())


def test_solve_identity():
    e1 = BitVec.from_indices(4, [0])
    assert gf2_solve(BitMatrix.identity(4), e1) == e1


def test_solve_zero_matrix_inconsistent():
    assert gf2_solve(BitMatrix.zeros(3, 3), BitVec.from_indices(3, [1])) is None


def test_solve_random_full_row_rank_by_substitution():
    rng = np.random.default_rng(1)
    while True:
        m = rng.integers(0, 2, size=(10, 14), dtype=np.uint8)
        if naive_rank(m.tolist()) == 10:
            break
    rhs = rng.integers(0, 2, size=10, dtype=np.uint8)
    x = gf2_solve(BitMatrix(m), BitVec(rhs))
    assert np.array_equal((m.astype(int) @ x.to_array()) % 2, rhs)


def test_solve_length_mismatch_raises():
    with pytest.raises(ValueError, match="dimension mismatch"):
        gf2_solve(BitMatrix.identity(3), BitVec.zeros(4))


def test_nullspace_annihilates():
    m = np.random.default_rng(2).integers(0, 2, size=(6, 11), dtype=np.uint8)
    ns = gf2_nullspace(BitMatrix(m)).to_array()
    assert ns.shape[0] == 11 - naive_rank(m.tolist())
    assert not ((m.astype(int) @ ns.T.astype(int)) % 2).any()


def test_rowspace_membership_and_independent_rows():
    rng = np.random.default_rng(3)
    basis = rng.integers(0, 2, size=(4, 90), dtype=np.uint8)
    combo = basis[0] ^ basis[2]
    rows = np.vstack([basis, combo[None, :]])
    space = RowSpace(pack_bits(rows), 90)
    assert space.rank == naive_rank(rows.tolist())
    assert space.contains(pack_bits(combo[None, :]))[0]
    assert independent_rows(pack_bits(rows), 90) == list(range(space.rank))


def test_symplectic_single_qubit_anticommute():
    # layout [x|z]: X1 = (1,0), Z1 = (0,1)
    assert symplectic_inner(BitVec([1, 0]), BitVec([0, 1])) == 1


def test_symplectic_pairs_cancel():
    x1x2 = BitVec([1, 1, 0, 0])
    z1z2 = BitVec([0, 0, 1, 1])
    assert symplectic_inner(x1x2, z1z2) == 0


def test_symplectic_symmetric_sweep():
    rng = np.random.default_rng(4)
    om = symplectic_form(3).to_array().astype(int)
    for _ in range(1000):
        a, b = rng.integers(0, 2, size=(2, 6), dtype=np.uint8)
        ab = symplectic_inner(BitVec(a), BitVec(b))
        assert ab == symplectic_inner(BitVec(b), BitVec(a))
        assert ab == int(a @ om @ b) % 2


def test_lstsq_identity():
    rhs = np.array([1.0, -2.0, 3.0])
    assert np.allclose(lstsq_solve(np.eye(3), rhs).x, rhs)


def test_lstsq_overdetermined_consistent():
    a = np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])
    res = lstsq_solve(a, a @ np.array([2.0, -1.0]))
    assert np.allclose(res.x, [2.0, -1.0]) and res.residual < 1e-12


def test_lstsq_random_well_conditioned():
    rng = np.random.default_rng(5)
    a = rng.normal(size=(40, 12))
    x = rng.normal(size=12)
    assert np.max(np.abs(lstsq_solve(a, a @ x).x - x)) < 1e-10


def test_lstsq_rank_deficient_names_columns():
    a = np.ones((5, 2))
    with pytest.raises(np.linalg.LinAlgError, match="dependent columns"):
        lstsq_solve(a, np.ones(5))
