"""Pauli fault models in the character (Pauli-Lindblad) parameterization.

A model is a list of generators ``a`` with coefficients ``q_a``; the channel is the
convolution of the two-point factors ``(1 - q_a) delta_I + q_a delta_a``.  Eigenvalues are
``lambda_b = prod_{<a,b>=1} (1 - 2 q_a)``.
"""

from __future__ import annotations

import json
import math
from collections.abc import Mapping
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from ._enum import all_subsets_weight, combination_blocks, xor_reduce
from .circuit import CircuitSpec
from .gf2 import BitMatrix, BitVec, gf2_solve, independent_rows, pack_bits, parity, symplectic_twist
from .pauli import PauliString, SpacetimePauli
from .spacetime import SpacetimeCode, _transport_dense, embed_dense

DENSE_GUARD_BITS = 22
ENUM_GUARD_BITS = 20


class FaultModelError(ValueError):
    pass


@dataclass(frozen=True)
class FaultGenerator:
    support: SpacetimePauli
    q: float

    def __post_init__(self):
        q = float(self.q)
        if not math.isfinite(q):
            raise FaultModelError(f"coefficient for {self.support} is not finite")
        if 1.0 - 2.0 * q <= 0.0:
            raise FaultModelError(
                f"coefficient q={q} for {self.support} gives 1-2q <= 0; eigenvalues must stay positive"
                " (the learning theory assumes lambda > 0, i.e. p_I > 1/2)"
            )
        if self.support.is_identity():
            raise FaultModelError("a fault generator cannot be the identity")
        object.__setattr__(self, "q", q)


class FaultModel:
    """Immutable set of fault generators, optionally bound to a spacetime code."""

    def __init__(self, generators: Sequence[FaultGenerator], code: SpacetimeCode | None = None,
                 n: int | None = None, T: int | None = None):
        self.generators: tuple[FaultGenerator, ...] = tuple(generators)
        self.code = code
        if code is not None:
            n, T = code.n, code.T
        elif self.generators:
            n, T = self.generators[0].support.n, self.generators[0].support.T
        if n is None or T is None:
            raise FaultModelError("an empty model needs a code or explicit (n, T)")
        self.n, self.T = n, T
        seen = {}
        for i, g in enumerate(self.generators):
            if (g.support.n, g.support.T) != (n, T):
                raise FaultModelError(f"generator {g.support} does not match (n={n}, T={T})")
            key = g.support.bits
            if key in seen:
                raise FaultModelError(f"generators {seen[key]} and {i} share the support {g.support}")
            seen[key] = i
        self.q = np.array([g.q for g in self.generators], dtype=np.float64)
        self.q.setflags(write=False)
        length = 2 * n * (T + 1)
        self.supports = (
            np.array([g.support.to_dense() for g in self.generators], dtype=np.uint8)
            if self.generators else np.zeros((0, length), dtype=np.uint8)
        )
        self.supports.setflags(write=False)
        self._syn = None
        self._log = None

    @property
    def K(self) -> int:
        return len(self.generators)

    def __len__(self) -> int:
        return len(self.generators)

    @property
    def is_sampleable(self) -> bool:
        return bool((self.q >= 0).all())

    def _need_code(self) -> SpacetimeCode:
        if self.code is None:
            raise FaultModelError("this operation needs the model bound to a spacetime code")
        return self.code

    def syndrome_bits(self) -> np.ndarray:
        """``(K, M)`` syndrome bits of every generator."""
        if self._syn is None:
            code = self._need_code()
            self._syn = code.syndrome_bits(self.supports) if self.K else np.zeros((0, code.M), np.uint8)
            self._syn.setflags(write=False)
        return self._syn

    def logical_bits(self) -> np.ndarray:
        if self._log is None:
            code = self._need_code()
            self._log = code.logical_bits(self.supports) if self.K else np.zeros((0, 2 * code.k), np.uint8)
            self._log.setflags(write=False)
        return self._log

    def with_q(self, q: Iterable[float]) -> "FaultModel":
        q = list(q)
        if len(q) != self.K:
            raise FaultModelError("coefficient count does not match generator count")
        return FaultModel([FaultGenerator(g.support, v) for g, v in zip(self.generators, q)], self.code, self.n, self.T)

    def scaled(self, factor: float) -> "FaultModel":
        return self.with_q(self.q * factor)

    def bind(self, code: SpacetimeCode) -> "FaultModel":
        return FaultModel(self.generators, code, self.n, self.T)

    # file format

    def to_json(self) -> list[dict]:
        return [{"pauli": str(g.support), "q": g.q} for g in self.generators]

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=2) + "\n")

    @classmethod
    def from_json(cls, data, code: SpacetimeCode | None = None, n: int | None = None, T: int | None = None) -> "FaultModel":
        if code is not None:
            n, T = code.n, code.T
        if n is None or T is None:
            raise FaultModelError("parsing fault literals needs (n, T) or a code")
        entries = data["generators"] if isinstance(data, dict) else data
        gens = []
        for i, entry in enumerate(entries):
            if "q" not in entry:
                raise FaultModelError(f"fault entry {i} has no coefficient 'q'")
            if "pauli" in entry:
                support = SpacetimePauli.parse(entry["pauli"], n, T)
            elif "slices" in entry:
                slices = {int(t): PauliString.parse(p, n) for t, p in entry["slices"].items()}
                support = SpacetimePauli.from_slices(slices, n, T)
            else:
                raise FaultModelError(f"fault entry {i} needs 'pauli' or 'slices'")
            gens.append(FaultGenerator(support, float(entry["q"])))
        return cls(gens, code, n, T)

    @classmethod
    def load(cls, path: str | Path, code: SpacetimeCode | None = None, n: int | None = None, T: int | None = None) -> "FaultModel":
        return cls.from_json(json.loads(Path(path).read_text()), code, n, T)

    def __repr__(self) -> str:
        return f"FaultModel(K={self.K}, n={self.n}, T={self.T})"


def _twisted_words(dense: np.ndarray, n: int) -> np.ndarray:
    return pack_bits(symplectic_twist(np.asarray(dense, dtype=np.uint8), n))


def eigenvalue(model: FaultModel, b: SpacetimePauli) -> float:
    """``lambda_b = prod over generators anticommuting with b of (1 - 2 q_a)``."""
    if model.K == 0:
        return 1.0
    anti = parity(pack_bits(model.supports) & _twisted_words(b.to_dense(), model.n)[None, :]).astype(bool)
    return float(np.prod(1.0 - 2.0 * model.q[anti]))


def eigenvalues(model: FaultModel, bs: np.ndarray) -> np.ndarray:
    """Vectorized :func:`eigenvalue` over dense rows ``bs``; computed as exp of a log-sum."""
    bs = np.asarray(bs, dtype=np.uint8).reshape(-1, model.supports.shape[1])
    if model.K == 0:
        return np.ones(bs.shape[0])
    anti = parity(pack_bits(model.supports)[None, :, :] & _twisted_words(bs, model.n)[:, None, :])
    return np.exp(anti.astype(np.float64) @ np.log1p(-2.0 * model.q))


class DenseDistribution(Mapping):
    """Exact distribution over the subgroup spanned by the generators.

    Elements are indexed by coordinates in ``basis`` (bit ``j`` selects ``basis[j]``).
    """

    def __init__(self, n: int, T: int, basis: np.ndarray, probs: np.ndarray):
        self.n, self.T = n, T
        self.basis = basis
        self.probs = probs
        self._basis_t = BitMatrix(basis.T) if len(basis) else None

    def element(self, index: int) -> SpacetimePauli:
        bits = np.zeros(2 * self.n * (self.T + 1), dtype=np.uint8)
        for j in range(len(self.basis)):
            if index >> j & 1:
                bits ^= self.basis[j]
        return SpacetimePauli.from_dense(self.n, self.T, bits)

    def index_of(self, a: SpacetimePauli) -> int | None:
        if a.is_identity():
            return 0
        if self._basis_t is None:
            return None
        x = gf2_solve(self._basis_t, a.bits)
        if x is None:
            return None
        return sum(1 << j for j in x.support())

    def __getitem__(self, a: SpacetimePauli) -> float:
        idx = self.index_of(a)
        if idx is None:
            return 0.0
        return float(self.probs[idx])

    def __iter__(self):
        for i in range(len(self.probs)):
            yield self.element(i)

    def __len__(self) -> int:
        return len(self.probs)

    def eigenvalue(self, b: SpacetimePauli) -> float:
        """Walsh-Hadamard transform at ``b``."""
        if not len(self.basis):
            return float(self.probs.sum())
        beta = parity(pack_bits(self.basis) & _twisted_words(b.to_dense(), self.n)[None, :])
        mask = int(sum(int(v) << j for j, v in enumerate(beta)))
        idx = np.arange(len(self.probs), dtype=np.int64)
        signs = 1.0 - 2.0 * (np.bitwise_count(idx & mask) & 1)
        return float(signs @ self.probs)


def error_rates_dense(model: FaultModel) -> DenseDistribution:
    """Expand the convolution exactly on the subgroup spanned by the generators."""
    length = 2 * model.n * (model.T + 1)
    if model.K == 0:
        return DenseDistribution(model.n, model.T, np.zeros((0, length), np.uint8), np.ones(1))
    words = pack_bits(model.supports)
    keep = independent_rows(words, length)
    if len(keep) > DENSE_GUARD_BITS:
        raise FaultModelError(f"dense expansion needs 2^{len(keep)} entries, above the 2^{DENSE_GUARD_BITS} guard")
    basis = model.supports[keep]
    basis_t = BitMatrix(basis.T)
    probs = np.zeros(1 << len(keep))
    probs[0] = 1.0
    idx = np.arange(len(probs), dtype=np.int64)
    for g, q in zip(model.supports, model.q):
        x = gf2_solve(basis_t, BitVec(g))
        shift = sum(1 << j for j in x.support())
        probs = (1.0 - q) * probs + q * probs[idx ^ shift]
    return DenseDistribution(model.n, model.T, basis, probs)


class PriorClass(NamedTuple):
    representative: SpacetimePauli
    syndrome: BitVec
    q: float
    members: tuple[int, ...]


class PriorDistribution:
    """One class per distinct nonzero syndrome, coefficients aggregated by XOR semantics."""

    def __init__(self, classes: Sequence[PriorClass], code: SpacetimeCode):
        self.classes = list(classes)
        self.code = code
        keys = set()
        for c in self.classes:
            if not c.syndrome:
                raise FaultModelError(f"class {c.representative} has zero syndrome")
            if c.syndrome in keys:
                raise FaultModelError(f"duplicate class syndrome {c.syndrome}")
            if 1.0 - 2.0 * c.q <= 0.0:
                raise FaultModelError(f"class coefficient {c.q} is not below 1/2")
            keys.add(c.syndrome)
        self.q = np.array([c.q for c in self.classes], dtype=np.float64)
        length = code.length
        self.representatives = (
            np.array([c.representative.to_dense() for c in self.classes], dtype=np.uint8)
            if self.classes else np.zeros((0, length), np.uint8)
        )
        self.syndromes = (
            np.array([c.syndrome.to_array() for c in self.classes], dtype=np.uint8)
            if self.classes else np.zeros((0, code.M), np.uint8)
        )
        self.logicals = code.logical_bits(self.representatives) if self.classes else np.zeros((0, 2 * code.k), np.uint8)

    @property
    def K(self) -> int:
        return len(self.classes)

    def __len__(self) -> int:
        return len(self.classes)

    def with_q(self, q: Iterable[float]) -> "PriorDistribution":
        q = list(q)
        if len(q) != self.K:
            raise FaultModelError("coefficient count does not match class count")
        return PriorDistribution([c._replace(q=float(v)) for c, v in zip(self.classes, q)], self.code)

    def as_model(self) -> FaultModel:
        """The classes read as an independent-fault model on their representatives."""
        return FaultModel([FaultGenerator(c.representative, c.q) for c in self.classes], self.code)

    def to_json(self) -> list[dict]:
        return [
            {"representative": str(c.representative), "syndrome": str(c.syndrome), "q": c.q, "members": list(c.members)}
            for c in self.classes
        ]

    @classmethod
    def from_json(cls, data: Sequence[dict], code: SpacetimeCode) -> "PriorDistribution":
        """Rebuild from :meth:`to_json` output; syndromes are recomputed from the representatives."""
        reps = [SpacetimePauli.parse(d["representative"], code.n, code.T) for d in data]
        syn = code.syndrome_bits(reps) if reps else np.zeros((0, code.M), np.uint8)
        return cls(
            [PriorClass(r, BitVec(s), float(d["q"]), tuple(d.get("members", ()))) for r, s, d in zip(reps, syn, data)],
            code,
        )


def build_prior(model: FaultModel) -> PriorDistribution:
    code = model._need_code()
    syn = model.syndrome_bits()
    zero = [i for i in range(model.K) if not syn[i].any()]
    if zero:
        names = ", ".join(str(model.generators[i].support) for i in zero[:5])
        raise FaultModelError(
            f"{len(zero)} generator(s) have zero syndrome and cannot enter the prior: {names}"
        )
    groups: dict[bytes, list[int]] = {}
    for i in range(model.K):
        groups.setdefault(syn[i].tobytes(), []).append(i)
    classes = []
    for members in groups.values():
        if len(members) == 1:
            q = float(model.q[members[0]])
        else:
            q = 0.5 * (1.0 - float(np.prod(1.0 - 2.0 * model.q[members])))
        rep = model.generators[members[0]].support
        classes.append(PriorClass(rep, BitVec(syn[members[0]]), q, tuple(members)))
    return PriorDistribution(classes, code)


def effective_rate(model: FaultModel, a: SpacetimePauli, max_order: int) -> float:
    """Probability mass of the gauge coset ``aG``, i.e. ``sum_g p_{ag}`` (``|G|`` times ``p^eff_a``).

    Fault subsets up to ``max_order`` are enumerated; exact when ``max_order >= K``.
    """
    if max_order < 1:
        raise ValueError("max_order must be at least 1")
    code = model._need_code()
    K = model.K
    target = a.bits.words
    if K == 0:
        return float(code.in_gauge(a)[0])
    words = pack_bits(model.supports)
    q = model.q
    base = float(np.prod(1.0 - q))
    ratio = q / (1.0 - q)
    if max_order >= K and K <= ENUM_GUARD_BITS:
        from ._enum import all_subsets_xor

        elems = all_subsets_xor(words) ^ target
        hit = code._gauge_space.contains(elems)
        return float(all_subsets_weight(q)[hit].sum())
    total = 0.0
    for w in range(0, min(max_order, K) + 1):
        for combos in combination_blocks(K, w):
            elems = xor_reduce(words, combos) ^ target
            hit = code._gauge_space.contains(elems)
            if hit.any():
                total += base * float(np.prod(ratio[combos[hit]], axis=1).sum())
    return total


# Fault templates

def data_faults(c: CircuitSpec, paulis: str = "X", times: Iterable[int] | None = None) -> list[SpacetimePauli]:
    """Single-qubit faults ``P_q`` on slice ``t`` for every qubit, time and letter in ``paulis``."""
    times = range(c.T + 1) if times is None else times
    out = []
    for t in times:
        for q in range(c.n):
            for letter in paulis:
                out.append(SpacetimePauli.at(PauliString.parse(f"{letter}{q + 1}", c.n), t, c.T))
    return out


def _flip_pauli(check: PauliString) -> PauliString:
    """Single-qubit Pauli on the check's first support qubit that anticommutes with it."""
    q = check.support()[0]
    x, z = int(check.x[q]), int(check.z[q])
    letter = "X" if z else "Z"
    if x and z:
        letter = "X"
    return PauliString.parse(f"{letter}{q + 1}", check.n)


def measurement_faults(c: CircuitSpec) -> list[SpacetimePauli]:
    """One fault per measured check that flips that outcome alone: ``g(P, t)`` with ``P`` anticommuting with it."""
    out = []
    for t in range(c.T):
        for m in c.checks[t]:
            p = _flip_pauli(m)
            out.append(SpacetimePauli.from_dense(c.n, c.T, _transport_dense(c, p.xz.to_array(), t)))
    return out


@dataclass(frozen=True)
class FaultTemplate:
    """Per-location rate multipliers; each generator's ``q = multiplier * p / len(data_paulis)``."""

    data_paulis: str = "X"
    prep: float = 0.8
    data: float = 1.0
    measurement: float = 0.9

    @classmethod
    def from_json(cls, d: dict | None) -> "FaultTemplate":
        return cls(**(d or {}))

    def to_json(self) -> dict:
        return {"data_paulis": self.data_paulis, "prep": self.prep, "data": self.data, "measurement": self.measurement}

    def build(self, code: SpacetimeCode, p: float) -> FaultModel:
        c = code.circuit
        gens = []
        share = p / max(len(self.data_paulis), 1)
        if self.prep:
            gens += [FaultGenerator(s, self.prep * share) for s in data_faults(c, self.data_paulis, [0])]
        if self.data:
            gens += [FaultGenerator(s, self.data * share) for s in data_faults(c, self.data_paulis, range(1, c.T + 1))]
        if self.measurement:
            gens += [FaultGenerator(s, self.measurement * p) for s in measurement_faults(c)]
        return FaultModel(gens, code)
