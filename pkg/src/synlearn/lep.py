"""Decoder tables and logical error probabilities: predicted, exact and sampled.

A decoded residual ``r = fault * a_z`` has zero syndrome, so it lies in ``G * L`` for a unique
combination ``L`` of bare logicals.  Because the logical Gram matrix is invertible, ``r`` lies
in the coset ``G * l`` exactly when its anticommutation bits against the bare logical
generators equal those of ``l``; failure tests therefore reduce to comparing small bitmasks.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from ._enum import all_subsets_weight, all_subsets_xor, combination_blocks, xor_reduce
from .faults import FaultModel, PriorDistribution
from .gf2 import BitVec, get_bit, n_words, pack_bits, rref_words, unpack_bits
from .pauli import SpacetimePauli
from .sampler import sample_shots
from .spacetime import SpacetimeCode, _propagators

ENUM_GUARD_BITS = 20
WILSON_Z = 1.959963984540054


class DecodingError(RuntimeError):
    pass


def _mask(bits: np.ndarray) -> np.ndarray:
    bits = np.asarray(bits, dtype=np.uint64)
    if bits.ndim == 1:
        bits = bits[None, :]
    return (bits << np.arange(bits.shape[1], dtype=np.uint64)).sum(axis=1).astype(np.uint64)


class DecoderTable:
    """Lookup decoder over class representatives.

    Every syndrome reachable by at most ``max_weight`` representatives maps to the subset with
    the fewest members, ties broken lexicographically.  Other syndromes in the span of the
    class syndromes are resolved on demand by a GF(2) solve (``lazy`` entries, non-minimal).
    """

    def __init__(self, code: SpacetimeCode, classes: PriorDistribution, max_weight: int):
        if max_weight < 1:
            raise ValueError("max_weight must be at least 1")
        self.code = code
        self.classes = classes
        self.max_weight = max_weight
        self.M = code.M
        self.nw = n_words(self.M) if self.M else 1
        K = classes.K
        self._syn = pack_bits(classes.syndromes) if K else np.zeros((0, self.nw), np.uint64)
        self._log = _mask(classes.logicals) if K else np.zeros(0, np.uint64)
        self._build_table()
        self._build_solver()
        self.lazy: dict[bytes, tuple[int, ...]] = {}

    def _key(self, words: np.ndarray):
        if self.nw == 1:
            return words[:, 0]
        return np.ascontiguousarray(words).view(np.dtype((np.void, 8 * self.nw))).ravel()

    def _build_table(self) -> None:
        K = self.classes.K
        keys, subsets, logs = [], [], []
        seen = np.zeros(0, dtype=self._key(np.zeros((0, self.nw), np.uint64)).dtype)
        for w in range(0, min(self.max_weight, K) + 1):
            for combos in combination_blocks(K, w):
                syn = xor_reduce(self._syn, combos) if w else np.zeros((1, self.nw), np.uint64)
                k = self._key(syn)
                _, first = np.unique(k, return_index=True)
                first.sort()
                fresh = first[~np.isin(k[first], seen)]
                if fresh.size == 0:
                    continue
                seen = np.concatenate([seen, k[fresh]])
                keys.append(syn[fresh])
                pad = np.full((fresh.size, self.max_weight), -1, dtype=np.int64)
                pad[:, :w] = combos[fresh]
                subsets.append(pad)
                logs.append(xor_reduce(self._log, combos[fresh]) if w else np.zeros(1, np.uint64))
        syn = np.vstack(keys)
        self.subsets = np.vstack(subsets)
        logs = np.concatenate(logs)
        k = self._key(syn)
        order = np.argsort(k, kind="stable")
        self._keys = k[order]
        self._table_syn = syn[order]
        self.subsets = self.subsets[order]
        self._table_log = logs[order]

    def _build_solver(self) -> None:
        """Echelon form of the class syndromes with combination tracking."""
        K = self.classes.K
        if K == 0:
            self._piv, self._red, self._comb = [], np.zeros((0, self.nw), np.uint64), np.zeros((0, 1), np.uint64)
            return
        dense = np.hstack([self.classes.syndromes, np.eye(K, dtype=np.uint8)])
        red, piv = rref_words(pack_bits(dense), self.M + K)
        piv = [p for p in piv if p < self.M]
        rows = unpack_bits(red[: len(piv)], self.M + K)
        self._piv = piv
        self._red = pack_bits(rows[:, : self.M])
        self._comb = pack_bits(rows[:, self.M :])

    @property
    def completeness(self) -> str:
        return "full" if len(self._keys) == (1 << len(self._piv)) else "lazy"

    def __len__(self) -> int:
        return len(self._keys)

    def _lookup(self, words: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        k = self._key(words)
        idx = np.searchsorted(self._keys, k)
        idx = np.minimum(idx, len(self._keys) - 1)
        found = self._keys[idx] == k
        return idx, found

    def _solve(self, words: np.ndarray) -> np.ndarray:
        """Combination bits (packed over classes) solving ``z = sum y_c sigma_c``."""
        z = np.array(words, dtype=np.uint64, copy=True)
        comb = np.zeros((z.shape[0], self._comb.shape[1]), dtype=np.uint64)
        for i, p in enumerate(self._piv):
            hit = get_bit(z, p)
            z[hit] ^= self._red[i]
            comb[hit] ^= self._comb[i]
        if z.any():
            bad = BitVec.from_words(z[np.flatnonzero(z.any(axis=1))[0]], self.M)
            raise DecodingError(f"syndrome is outside the span of the class syndromes (remainder {bad})")
        return comb

    def logical_masks(self, words: np.ndarray) -> np.ndarray:
        """Logical bitmask of the correction for every packed syndrome row."""
        words = np.asarray(words, dtype=np.uint64).reshape(-1, self.nw)
        idx, found = self._lookup(words)
        out = np.where(found, self._table_log[idx], np.uint64(0))
        miss = np.flatnonzero(~found)
        if miss.size:
            uniq, inv = np.unique(words[miss], axis=0, return_inverse=True)
            comb = unpack_bits(self._solve(uniq), self.classes.K)
            vals = np.zeros(len(uniq), dtype=np.uint64)
            for j in range(self.classes.K):
                vals[comb[:, j].astype(bool)] ^= self._log[j]
            out[miss] = vals[inv.reshape(-1)]
            for u, c in zip(uniq, comb):
                self.lazy.setdefault(u.tobytes(), tuple(np.flatnonzero(c).tolist()))
        return out

    def subset_for(self, z: BitVec) -> tuple[tuple[int, ...], bool]:
        """Class indices of the correction for syndrome ``z`` and whether it came from the table."""
        if len(z) != self.M:
            raise ValueError(f"syndrome length {len(z)} does not match M={self.M}")
        words = z.words[None, :] if self.M else np.zeros((1, 1), np.uint64)
        idx, found = self._lookup(words)
        if found[0]:
            s = self.subsets[idx[0]]
            return tuple(int(c) for c in s[s >= 0]), True
        comb = unpack_bits(self._solve(words), self.classes.K)[0]
        sub = tuple(np.flatnonzero(comb).tolist())
        self.lazy.setdefault(words[0].tobytes(), sub)
        return sub, False

    def correction(self, z: BitVec) -> SpacetimePauli:
        sub, _ = self.subset_for(z)
        dense = np.zeros(self.code.length, dtype=np.uint8)
        for c in sub:
            dense ^= self.classes.representatives[c]
        return SpacetimePauli.from_dense(self.code.n, self.code.T, dense)

    def corrections_dense(self, words: np.ndarray) -> np.ndarray:
        """Dense correction for every packed syndrome row."""
        words = np.asarray(words, dtype=np.uint64).reshape(-1, self.nw)
        out = np.zeros((words.shape[0], self.code.length), dtype=np.uint8)
        idx, found = self._lookup(words)
        reps = self.classes.representatives
        for j in range(self.max_weight):
            col = np.where(found, self.subsets[idx, j], -1)
            sel = col >= 0
            out[sel] ^= reps[col[sel]]
        miss = np.flatnonzero(~found)
        if miss.size:
            comb = unpack_bits(self._solve(words[miss]), self.classes.K)
            out[miss] ^= ((comb.astype(np.int64) @ reps.astype(np.int64)) & 1).astype(np.uint8)
        return out

    def entries(self) -> dict[BitVec, tuple[int, ...]]:
        out = {}
        for syn, sub in zip(self._table_syn, self.subsets):
            out[BitVec.from_words(syn, self.M)] = tuple(int(c) for c in sub[sub >= 0])
        return out


def build_decoder(code: SpacetimeCode, classes: PriorDistribution, max_weight: int = 2) -> DecoderTable:
    return DecoderTable(code, classes, max_weight)


def _target_mask(code: SpacetimeCode, l) -> np.uint64:
    if isinstance(l, (int, np.integer)):
        l = code.logical_gens[int(l)]
    if not isinstance(l, SpacetimePauli):
        raise TypeError("logical must be a SpacetimePauli or an index into code.logical_gens")
    if not code.in_gauge_perp(l)[0]:
        raise ValueError(f"{l} does not commute with the gauge group, so it is not a bare logical")
    return _mask(code.logical_bits(l))[0]


class PredictedLEP(NamedTuple):
    value: float
    residual_bound: float
    max_order: int


def poisson_binomial_tail(q: np.ndarray, order: int) -> float:
    """``Pr[#fired > order]`` for independent events with probabilities ``q`` (clipped to [0, 1])."""
    q = np.clip(np.asarray(q, dtype=np.float64), 0.0, 1.0)
    pmf = np.zeros(len(q) + 1)
    pmf[0] = 1.0
    for j, qj in enumerate(q):
        pmf[1 : j + 2] = pmf[1 : j + 2] * (1.0 - qj) + pmf[: j + 1] * qj
        pmf[0] *= 1.0 - qj
    return float(math.fsum(pmf[order + 1 :]))


def predict_lep(classes: PriorDistribution, code: SpacetimeCode, dec: DecoderTable, l, max_order: int = 4) -> PredictedLEP:
    """Failure mass of class subsets of size at most ``max_order``, plus the neglected-mass bound."""
    target = _target_mask(code, l)
    K = classes.K
    if K == 0:
        return PredictedLEP(0.0, 0.0, max_order)
    q = classes.q
    base = float(np.prod(1.0 - q))
    ratio = q / (1.0 - q)
    syn = pack_bits(classes.syndromes)
    logs = _mask(classes.logicals)
    partial = []
    for w in range(0, min(max_order, K) + 1):
        for combos in combination_blocks(K, w):
            if w == 0:
                z = np.zeros((1, syn.shape[1]), np.uint64)
                lg = np.zeros(1, np.uint64)
            else:
                z = xor_reduce(syn, combos)
                lg = xor_reduce(logs, combos)
            fail = (lg ^ dec.logical_masks(z)) == target
            if fail.any():
                partial.append(float(np.prod(ratio[combos[fail]], axis=1).sum()))
    value = base * math.fsum(partial)
    bound = poisson_binomial_tail(q, max_order) if max_order < K else 0.0
    return PredictedLEP(value, bound, max_order)


def exact_lep(model: FaultModel, code: SpacetimeCode, dec: DecoderTable, l) -> float:
    """Full enumeration over firing patterns of the model's generators."""
    target = _target_mask(code, l)
    K = model.K
    if K > ENUM_GUARD_BITS:
        raise ValueError(f"exact enumeration over 2^{K} patterns exceeds the 2^{ENUM_GUARD_BITS} guard")
    if K == 0:
        return 0.0
    syn = all_subsets_xor(pack_bits(model.syndrome_bits()))
    lg = all_subsets_xor(_mask(model.logical_bits()))
    w = all_subsets_weight(model.q)
    fail = (lg ^ dec.logical_masks(syn)) == target
    return float(math.fsum(w[fail]))


class SampledLEP(NamedTuple):
    rate: float
    ci_low: float
    ci_high: float
    failures: int
    shots: int


def wilson_interval(failures: int, shots: int, z: float = WILSON_Z) -> tuple[float, float]:
    p = failures / shots
    denom = 1.0 + z * z / shots
    centre = (p + z * z / (2 * shots)) / denom
    half = z * math.sqrt(p * (1 - p) / shots + z * z / (4 * shots * shots)) / denom
    lo = 0.0 if failures == 0 else max(0.0, centre - half)
    hi = 1.0 if failures == shots else min(1.0, centre + half)
    return lo, hi


def failures_from_shots(shots, dec: DecoderTable, target) -> np.ndarray:
    return (shots.logical ^ dec.logical_masks(shots.words)) == target


def sample_lep(model: FaultModel, code: SpacetimeCode, dec: DecoderTable, l, shots: int, seed: int = 0,
               threads: int | None = None) -> SampledLEP:
    target = _target_mask(code, l)
    ss = sample_shots(model, shots, seed, threads)
    fails = int(failures_from_shots(ss, dec, target).sum())
    lo, hi = wilson_interval(fails, shots)
    return SampledLEP(fails / shots, lo, hi, fails, shots)


# Frame-explicit failure tests (used to cross-check the bitmask shortcut)

def rest_frame_failure(code: SpacetimeCode, dec: DecoderTable, faults: np.ndarray, l: SpacetimePauli) -> np.ndarray:
    """``fault * a_z * l`` in the gauge group, by GF(2) membership."""
    faults = np.asarray(faults, dtype=np.uint8).reshape(-1, code.length)
    z = pack_bits(code.syndrome_bits(faults))
    resid = faults ^ dec.corrections_dense(z)
    return code.in_gauge(resid ^ l.to_dense())


def lab_frame_failure(code: SpacetimeCode, dec: DecoderTable, faults: np.ndarray, base_logical) -> np.ndarray:
    """Terminal slice of the forward-propagated residual lies in ``l * S``."""
    faults = np.asarray(faults, dtype=np.uint8).reshape(-1, code.length)
    z = pack_bits(code.syndrome_bits(faults))
    resid = faults ^ dec.corrections_dense(z)
    fwd, _ = _propagators(code.circuit)
    w = 2 * code.n
    terminal = ((resid.astype(np.int64) @ fwd[-w:].T.astype(np.int64)) & 1).astype(np.uint8)
    return code.terminal_in_logical_coset(terminal, base_logical)


@dataclass
class LogicalReport:
    logical: str
    p_L_predicted: float
    truncation_order: int
    truncation_residual_bound: float
    p_L_true: float | None = None
    p_L_sampled: float | None = None
    sampled_shots: int | None = None
    sampled_ci: tuple[float, float] | None = None
    partition: str = "first generator in declaration order represents each syndrome class"
    extra: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        d = {
            "logical": self.logical,
            "p_L_predicted": self.p_L_predicted,
            "p_L_true": self.p_L_true,
            "p_L_sampled": self.p_L_sampled,
            "sampled_shots": self.sampled_shots,
            "sampled_ci": list(self.sampled_ci) if self.sampled_ci else None,
            "truncation_order": self.truncation_order,
            "truncation_residual_bound": self.truncation_residual_bound,
            "partition": self.partition,
        }
        d.update(self.extra)
        return d

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2)
