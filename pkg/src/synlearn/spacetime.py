"""Pauli propagation through a circuit and the circuit-to-spacetime-code map."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .circuit import CircuitSpec
from .gf2 import (
    BitMatrix,
    BitVec,
    RowSpace,
    gf2_nullspace,
    independent_rows,
    n_words,
    pack_bits,
    parity,
    rref_words,
    symplectic_twist,
    unpack_bits,
)
from .pauli import PauliString, SpacetimePauli


class CodeConstructionError(RuntimeError):
    pass


def _mod2(a: np.ndarray) -> np.ndarray:
    return (a & 1).astype(np.uint8)


@lru_cache(maxsize=64)
def _propagators(c: CircuitSpec) -> tuple[np.ndarray, np.ndarray]:
    """Dense forward and backward maps on column vectors of length ``2n(T+1)``."""
    n, T = c.n, c.T
    w = 2 * n
    N = w * (T + 1)
    step = [layer.dense().astype(np.int64) for layer in c.layers]
    inv = [layer.inverse().dense().astype(np.int64) for layer in c.layers]
    fwd = np.zeros((N, N), dtype=np.int64)
    bwd = np.zeros((N, N), dtype=np.int64)
    for i in range(T + 1):
        u = np.eye(w, dtype=np.int64)  # u_(t,i)
        v = np.eye(w, dtype=np.int64)  # u_(t,i)^{-1}
        for t in range(i, T + 1):
            fwd[t * w : (t + 1) * w, i * w : (i + 1) * w] = u
            # backward: slice i receives u_(t,i)^{-1} applied to slice t
            bwd[i * w : (i + 1) * w, t * w : (t + 1) * w] = v
            if t < T:
                u = (step[t] @ u) & 1
                v = (v @ inv[t]) & 1
    fwd = _mod2(fwd)
    bwd = _mod2(bwd)
    fwd.setflags(write=False)
    bwd.setflags(write=False)
    return fwd, bwd


def _apply(mat: np.ndarray, dense: np.ndarray) -> np.ndarray:
    return _mod2(np.asarray(dense, dtype=np.int64) @ mat.T.astype(np.int64))


def _check_dims(c: CircuitSpec, a: SpacetimePauli) -> None:
    if (a.n, a.T) != (c.n, c.T):
        raise ValueError(f"spacetime Pauli (n={a.n}, T={a.T}) does not match circuit (n={c.n}, T={c.T})")


def propagate_forward(c: CircuitSpec, a: SpacetimePauli) -> SpacetimePauli:
    """Forward cumulant: slice t is the product of ``u_(t,i)(a_i)`` over ``i <= t``."""
    _check_dims(c, a)
    return SpacetimePauli.from_dense(c.n, c.T, _apply(_propagators(c)[0], a.to_dense()))


def propagate_backward(c: CircuitSpec, a: SpacetimePauli) -> SpacetimePauli:
    """Backward cumulant: slice t is the product of ``u_(i,t)^{-1}(a_i)`` over ``i >= t``.

    This is the adjoint of :func:`propagate_forward` under the spacetime symplectic form.
    """
    _check_dims(c, a)
    return SpacetimePauli.from_dense(c.n, c.T, _apply(_propagators(c)[1], a.to_dense()))


def embed_dense(c: CircuitSpec, p: PauliString | np.ndarray, t: int) -> np.ndarray:
    bits = p.xz.to_array() if isinstance(p, PauliString) else np.asarray(p, dtype=np.uint8)
    out = np.zeros(2 * c.n * (c.T + 1), dtype=np.uint8)
    out[2 * c.n * t : 2 * c.n * (t + 1)] = bits
    return out


def _transport_dense(c: CircuitSpec, xz: np.ndarray, t: int) -> np.ndarray:
    image = _mod2(c.layers[t].dense().astype(np.int64) @ xz.astype(np.int64))
    return embed_dense(c, image, t + 1) ^ embed_dense(c, xz, t)


def pauli_transport(c: CircuitSpec, a: PauliString, t: int) -> SpacetimePauli:
    """``g(a, t)``: ``a`` on slice ``t`` times ``u_(t+1,t)(a)`` on slice ``t+1``."""
    if not 0 <= t < c.T:
        raise ValueError(f"transport time {t} outside 0..{c.T - 1}")
    if a.n != c.n:
        raise ValueError("qubit count mismatch")
    return SpacetimePauli.from_dense(c.n, c.T, _transport_dense(c, a.xz.to_array(), t))


def _rows_to_st(c: CircuitSpec, dense_rows: np.ndarray) -> list[SpacetimePauli]:
    return [SpacetimePauli.from_dense(c.n, c.T, r) for r in dense_rows]


def _span_words(paulis, n: int) -> np.ndarray:
    if not paulis:
        return np.zeros((0, n_words(2 * n)), dtype=np.uint64)
    return np.stack([p.xz.words for p in paulis])


def _symplectic_pairs(rows: np.ndarray, n: int) -> np.ndarray:
    """Symplectic Gram-Schmidt over a list of logical representatives (dense rows)."""
    rest = [r.copy() for r in rows]
    out = []

    def ip(a, b):
        return int((a @ symplectic_twist(b, n).astype(np.int64)) & 1)

    while rest:
        a = rest.pop(0)
        j = next((k for k, b in enumerate(rest) if ip(a, b)), None)
        if j is None:
            raise CodeConstructionError("logical representatives are symplectically degenerate")
        b = rest.pop(j)
        fixed = []
        for r in rest:
            r = r ^ (a if ip(r, b) else 0) ^ (b if ip(r, a) else 0)
            fixed.append(r.astype(np.uint8))
        rest = fixed
        out.extend([a, b])
    return np.array(out, dtype=np.uint8).reshape(-1, 2 * n)


def base_logicals(c: CircuitSpec) -> list[PauliString]:
    """Base-code logical representatives: validated user input, or a computed pairing basis."""
    n = c.n
    host_list = list(c.base_stabilizers) + list(c.gauge or ())
    host = RowSpace(_span_words(host_list, n), 2 * n)
    stab = RowSpace(_span_words(list(c.base_stabilizers), n), 2 * n)
    k2 = 2 * n - host.rank - stab.rank
    if c.logicals is not None:
        logs = list(c.logicals)
        words = np.vstack([stab.basis, _span_words(logs, n)]) if stab.rank else _span_words(logs, n)
        if len(independent_rows(words, 2 * n)) != stab.rank + len(logs) or len(logs) != k2:
            raise CodeConstructionError(
                f"supplied logicals must be {k2} representatives independent modulo the stabilizer group"
            )
        return logs
    if k2 == 0:
        return []
    host_dense = unpack_bits(host.basis, 2 * n) if host.rank else np.zeros((0, 2 * n), np.uint8)
    cent = gf2_nullspace(BitMatrix(symplectic_twist(host_dense, n))) if host.rank else BitMatrix.identity(2 * n)
    red, piv = rref_words(cent.data, 2 * n)
    cand = red[: len(piv)]
    pool = np.vstack([stab.basis, cand]) if stab.rank else cand
    keep = [i - stab.rank for i in independent_rows(pool, 2 * n) if i >= stab.rank]
    chosen = unpack_bits(cand[keep], 2 * n)
    paired = _symplectic_pairs(chosen, n)
    return [PauliString(n, BitVec(r)) for r in paired]


@dataclass(frozen=True)
class CodeDims:
    total: int
    gauge_rank: int
    gauge_raw: int
    perp_dim: int
    M: int
    M_raw: int
    k: int

    @property
    def logical_count(self) -> int:
        return 2 * self.k

    def as_dict(self) -> dict:
        return {
            "total": self.total,
            "gauge_rank": self.gauge_rank,
            "gauge_generators_raw": self.gauge_raw,
            "gauge_perp_dim": self.perp_dim,
            "measurement_generators": self.M,
            "measurement_generators_raw": self.M_raw,
            "k": self.k,
            "logical_generators": self.logical_count,
        }


class SpacetimeCode:
    """Spacetime subsystem code of a syndrome-extraction circuit.

    Holds generators of the gauge group, the measurement group (its commuting center) and
    backward-propagated bare logicals, plus packed matrices for fast syndrome and membership
    queries on batches of dense spacetime vectors.
    """

    def __init__(self, circuit, gauge_gens, meas_gens, logical_gens, base_logicals, dims, gauge_space):
        self.circuit = circuit
        self.n = circuit.n
        self.T = circuit.T
        self.gauge_gens: list[SpacetimePauli] = gauge_gens
        self.meas_gens: list[SpacetimePauli] = meas_gens
        self.logical_gens: list[SpacetimePauli] = logical_gens
        self.base_logicals: list[PauliString] = base_logicals
        self.dims: CodeDims = dims
        self._gauge_space: RowSpace = gauge_space
        n = self.n
        self._meas_tw = pack_bits(symplectic_twist(np.array([m.to_dense() for m in meas_gens]), n)) if meas_gens else None
        self._log_tw = (
            pack_bits(symplectic_twist(np.array([l.to_dense() for l in logical_gens]), n)) if logical_gens else None
        )
        g_dense = unpack_bits(gauge_space.basis, self.length) if gauge_space.rank else np.zeros((0, self.length), np.uint8)
        self._gauge_tw = pack_bits(symplectic_twist(g_dense, n)) if gauge_space.rank else None
        stab_rows = _span_words(list(circuit.base_stabilizers), n)
        self._stab_space = RowSpace(stab_rows, 2 * n)
        self._base_log_tw = (
            pack_bits(symplectic_twist(np.array([l.xz.to_array() for l in base_logicals]), n)) if base_logicals else None
        )

    @property
    def length(self) -> int:
        return 2 * self.n * (self.T + 1)

    @property
    def M(self) -> int:
        return len(self.meas_gens)

    @property
    def k(self) -> int:
        return self.dims.k

    # packed batch helpers; inputs are dense (rows, length) 0/1 arrays or SpacetimePauli lists

    def _words(self, a) -> np.ndarray:
        if isinstance(a, SpacetimePauli):
            if (a.n, a.T) != (self.n, self.T):
                raise ValueError("spacetime Pauli does not match the code dimensions")
            return a.bits.words[None, :]
        if isinstance(a, (list, tuple)) and a and isinstance(a[0], SpacetimePauli):
            return np.stack([self._words(x)[0] for x in a])
        dense = np.asarray(a, dtype=np.uint8)
        if dense.shape[-1] != self.length:
            raise ValueError(f"expected vectors of length {self.length}, got {dense.shape[-1]}")
        return pack_bits(dense.reshape(-1, self.length))

    @staticmethod
    def _pairity_matrix(words: np.ndarray, tw: np.ndarray | None) -> np.ndarray:
        if tw is None:
            return np.zeros((words.shape[0], 0), dtype=np.uint8)
        return parity(words[:, None, :] & tw[None, :, :])

    def syndrome_bits(self, a) -> np.ndarray:
        """``(rows, M)`` anticommutation bits against the measurement generators."""
        return self._pairity_matrix(self._words(a), self._meas_tw)

    def logical_bits(self, a) -> np.ndarray:
        """``(rows, 2k)`` anticommutation bits against the bare logical generators."""
        return self._pairity_matrix(self._words(a), self._log_tw)

    def gauge_commutation_bits(self, a) -> np.ndarray:
        return self._pairity_matrix(self._words(a), self._gauge_tw)

    def in_gauge(self, a) -> np.ndarray:
        return self._gauge_space.contains(self._words(a))

    def in_gauge_perp(self, a) -> np.ndarray:
        return ~self.gauge_commutation_bits(a).any(axis=-1)

    def terminal_in_logical_coset(self, terminal_xz: np.ndarray, base_logical: PauliString) -> np.ndarray:
        """Whether each dense n-qubit terminal Pauli lies in ``base_logical * S``."""
        words = pack_bits(np.asarray(terminal_xz, dtype=np.uint8).reshape(-1, 2 * self.n) ^ base_logical.xz.to_array())
        return self._stab_space.contains(words)

    def logical_matrix(self) -> np.ndarray:
        """``Omega_L[i, j] = <l_i, l_j>`` over the bare logical generators."""
        if not self.logical_gens:
            return np.zeros((0, 0), dtype=np.uint8)
        return self.logical_bits(self.logical_gens)

    def __repr__(self) -> str:
        d = self.dims
        return f"SpacetimeCode(n={self.n}, T={self.T}, gauge_rank={d.gauge_rank}, M={d.M}, k={d.k})"


def build_spacetime_code(c: CircuitSpec) -> SpacetimeCode:
    n, T = c.n, c.T
    N = 2 * n * (T + 1)
    _, bwd = _propagators(c)

    raw = []
    for t in range(T):
        checks = c.checks[t]
        if checks:
            tw = symplectic_twist(np.array([m.xz.to_array() for m in checks]), n)
            cent = gf2_nullspace(BitMatrix(tw)).to_array()
        else:
            cent = np.eye(2 * n, dtype=np.uint8)
        for a in cent:
            raw.append(_transport_dense(c, a, t))
        for m in checks:
            raw.append(embed_dense(c, m, t))
    for s in c.base_stabilizers:
        raw.append(embed_dense(c, s, T))
    raw = np.array(raw, dtype=np.uint8).reshape(-1, N)
    raw_words = pack_bits(raw) if len(raw) else np.zeros((0, n_words(N)), np.uint64)
    keep = independent_rows(raw_words, N)
    gauge_dense = raw[keep]
    gauge_space = RowSpace(raw_words, N)
    r = gauge_space.rank

    g_basis = unpack_bits(gauge_space.basis, N) if r else np.zeros((0, N), np.uint8)
    g_tw = symplectic_twist(g_basis, n)
    perp_dim = N - r
    if r:
        gram = _mod2(g_basis.astype(np.int64) @ g_tw.T.astype(np.int64))
        y = gf2_nullspace(BitMatrix(gram)).to_array()
        m_space_dense = _mod2(y.astype(np.int64) @ g_basis.astype(np.int64))
    else:
        m_space_dense = np.zeros((0, N), np.uint8)
    m_space = RowSpace(pack_bits(m_space_dense) if len(m_space_dense) else np.zeros((0, n_words(N)), np.uint64), N)
    dim_m = m_space.rank

    # explicit generators: backward-propagated checks, then the terminal perfect round
    cand = [embed_dense(c, m, t) for t in range(T) for m in c.checks[t]]
    cand += [embed_dense(c, s, T) for s in c.base_stabilizers]
    cand = _apply(bwd, np.array(cand, dtype=np.uint8).reshape(-1, N))
    m_raw = len(cand)
    if len(cand):
        in_m = m_space.contains(pack_bits(cand))
        cand = cand[in_m]
    if dim_m:
        pool = np.vstack([cand, unpack_bits(m_space.basis, N)]) if len(cand) else unpack_bits(m_space.basis, N)
        meas_dense = pool[independent_rows(pack_bits(pool), N)]
    else:
        meas_dense = np.zeros((0, N), np.uint8)
    if c.is_subsystem is False and len(cand) and len(independent_rows(pack_bits(cand), N)) != dim_m:
        raise CodeConstructionError("backward-propagated checks do not span the measurement group")

    logicals = base_logicals(c)
    log_dense = _apply(bwd, np.array([embed_dense(c, l, T) for l in logicals], dtype=np.uint8).reshape(-1, N))

    host = RowSpace(_span_words(list(c.base_stabilizers) + list(c.gauge or ()), n), 2 * n)
    stab = RowSpace(_span_words(list(c.base_stabilizers), n), 2 * n)
    k = (2 * n - host.rank - stab.rank) // 2
    if perp_dim - dim_m != 2 * k:
        raise CodeConstructionError(
            f"dimension identity failed: dim G^perp - M = {perp_dim - dim_m}, expected 2k = {2 * k}"
        )
    if len(log_dense):
        if (_mod2(log_dense.astype(np.int64) @ g_tw.T.astype(np.int64)) if r else np.zeros(1)).any():
            raise CodeConstructionError("a bare logical fails to commute with the gauge group")
        both = np.vstack([meas_dense, log_dense])
        if len(independent_rows(pack_bits(both), N)) != dim_m + len(log_dense):
            raise CodeConstructionError("bare logicals are not independent of the measurement group")

    dims = CodeDims(total=N, gauge_rank=r, gauge_raw=len(raw), perp_dim=perp_dim, M=dim_m, M_raw=m_raw, k=k)
    return SpacetimeCode(
        circuit=c,
        gauge_gens=_rows_to_st(c, gauge_dense),
        meas_gens=_rows_to_st(c, meas_dense),
        logical_gens=_rows_to_st(c, log_dense),
        base_logicals=logicals,
        dims=dims,
        gauge_space=gauge_space,
    )


def syndrome_of(code: SpacetimeCode, a: SpacetimePauli) -> BitVec:
    return BitVec(code.syndrome_bits(a)[0])
