"""Pauli strings and spacetime Paulis in the symplectic (phase-free) picture.

Pauli literal grammar: a concatenation of tokens ``{X|Y|Z}<k>`` with ``k`` a 1-based qubit
index, e.g. ``Z1Z2`` or ``X1Y3``; ``I`` (or the empty string) is the identity.  Spacetime
literals append a time tag to every token, ``{X|Y|Z}<k>@t<time>``, e.g. ``X1@t0Z2@t3``.
Whitespace between tokens is ignored.  Each (qubit) or (qubit, time) may appear once.
"""

from __future__ import annotations

import re
from typing import Iterable, Mapping

import numpy as np

from .gf2 import BitVec, pack_bits, parity, symplectic_twist

_TOKEN = re.compile(r"([XYZ])(\d+)")
_ST_TOKEN = re.compile(r"([XYZ])(\d+)@t(\d+)")


class PauliSyntaxError(ValueError):
    pass


def _scan(text: str, pattern: re.Pattern) -> list[re.Match]:
    body = text.strip()
    if body in ("", "I"):
        return []
    pos, out = 0, []
    while pos < len(body):
        if body[pos].isspace() or body[pos] == "*":
            pos += 1
            continue
        m = pattern.match(body, pos)
        if m is None:
            bad = re.match(r"\S+?(?=[XYZ]|\s|$)", body[pos:])
            token = bad.group(0) if bad else body[pos:]
            raise PauliSyntaxError(f"malformed Pauli literal token {token!r} in {text!r}")
        out.append(m)
        pos = m.end()
    return out


def _set(bits: np.ndarray, n: int, q: int, letter: str, offset: int = 0) -> None:
    if letter in "XY":
        bits[offset + q] = 1
    if letter in "ZY":
        bits[offset + n + q] = 1


def _letter(x: int, z: int) -> str:
    return "IXZY"[x | (z << 1)]


class PauliString:
    """n-qubit Pauli modulo phase; ``xz`` holds the x part followed by the z part."""

    __slots__ = ("n", "xz")

    def __init__(self, n: int, xz: BitVec):
        if len(xz) != 2 * n:
            raise ValueError(f"PauliString on {n} qubits needs {2 * n} bits, got {len(xz)}")
        self.n = n
        self.xz = xz

    @classmethod
    def identity(cls, n: int) -> "PauliString":
        return cls(n, BitVec.zeros(2 * n))

    @classmethod
    def from_xz(cls, x, z) -> "PauliString":
        x = np.asarray(x, dtype=np.uint8)
        z = np.asarray(z, dtype=np.uint8)
        return cls(len(x), BitVec(np.concatenate([x, z])))

    @classmethod
    def parse(cls, text: str, n: int) -> "PauliString":
        bits = np.zeros(2 * n, dtype=np.uint8)
        seen = set()
        for m in _scan(text, _TOKEN):
            q = int(m.group(2)) - 1
            if not 0 <= q < n:
                raise PauliSyntaxError(f"qubit index in token {m.group(0)!r} outside 1..{n}")
            if q in seen:
                raise PauliSyntaxError(f"qubit {q + 1} repeated in {text!r}")
            seen.add(q)
            _set(bits, n, q, m.group(1))
        return cls(n, BitVec(bits))

    @property
    def x(self) -> np.ndarray:
        return self.xz.to_array()[: self.n]

    @property
    def z(self) -> np.ndarray:
        return self.xz.to_array()[self.n :]

    def support(self) -> list[int]:
        a = self.xz.to_array()
        return np.flatnonzero(a[: self.n] | a[self.n :]).tolist()

    def weight(self) -> int:
        return len(self.support())

    def is_identity(self) -> bool:
        return not self.xz

    def inner(self, other: "PauliString") -> int:
        if other.n != self.n:
            raise ValueError("qubit count mismatch")
        twisted = pack_bits(symplectic_twist(other.xz.to_array(), self.n))
        return int(parity(self.xz.words & twisted))

    def commutes(self, other: "PauliString") -> bool:
        return self.inner(other) == 0

    def __mul__(self, other: "PauliString") -> "PauliString":
        if other.n != self.n:
            raise ValueError("qubit count mismatch")
        return PauliString(self.n, self.xz ^ other.xz)

    def __eq__(self, other) -> bool:
        return isinstance(other, PauliString) and self.n == other.n and self.xz == other.xz

    def __hash__(self) -> int:
        return hash(("P", self.n, self.xz))

    def __str__(self) -> str:
        a = self.xz.to_array()
        toks = [f"{_letter(a[q], a[self.n + q])}{q + 1}" for q in range(self.n) if a[q] or a[self.n + q]]
        return "".join(toks) or "I"

    def __repr__(self) -> str:
        return f"PauliString({self.n}, '{self}')"


class SpacetimePauli:
    """Element of the spacetime Pauli group: one n-qubit Pauli per slice ``t = 0..T``.

    Layout is slice-major, ``[x_0|z_0|x_1|z_1|...]``.
    """

    __slots__ = ("n", "T", "bits")

    def __init__(self, n: int, T: int, bits: BitVec):
        if T < 0:
            raise ValueError("T must be non-negative")
        if len(bits) != 2 * n * (T + 1):
            raise ValueError(f"expected {2 * n * (T + 1)} bits for n={n}, T={T}, got {len(bits)}")
        self.n = n
        self.T = T
        self.bits = bits

    @property
    def length(self) -> int:
        return 2 * self.n * (self.T + 1)

    @classmethod
    def identity(cls, n: int, T: int) -> "SpacetimePauli":
        return cls(n, T, BitVec.zeros(2 * n * (T + 1)))

    @classmethod
    def from_dense(cls, n: int, T: int, dense) -> "SpacetimePauli":
        return cls(n, T, BitVec(np.asarray(dense, dtype=np.uint8)))

    @classmethod
    def from_slices(cls, slices: Mapping[int, PauliString] | Iterable[PauliString], n: int, T: int) -> "SpacetimePauli":
        items = slices.items() if isinstance(slices, Mapping) else enumerate(slices)
        dense = np.zeros((T + 1, 2 * n), dtype=np.uint8)
        for t, p in items:
            if not 0 <= t <= T:
                raise ValueError(f"time {t} outside 0..{T}")
            if p.n != n:
                raise ValueError("qubit count mismatch")
            dense[t] ^= p.xz.to_array()
        return cls(n, T, BitVec(dense.reshape(-1)))

    @classmethod
    def at(cls, p: PauliString, t: int, T: int) -> "SpacetimePauli":
        """Embed ``p`` on slice ``t`` only."""
        return cls.from_slices({t: p}, p.n, T)

    @classmethod
    def parse(cls, text: str, n: int, T: int) -> "SpacetimePauli":
        dense = np.zeros((T + 1, 2 * n), dtype=np.uint8)
        seen = set()
        for m in _scan(text, _ST_TOKEN):
            q, t = int(m.group(2)) - 1, int(m.group(3))
            if not 0 <= q < n:
                raise PauliSyntaxError(f"qubit index in token {m.group(0)!r} outside 1..{n}")
            if not 0 <= t <= T:
                raise PauliSyntaxError(f"time in token {m.group(0)!r} outside 0..{T}")
            if (q, t) in seen:
                raise PauliSyntaxError(f"location {m.group(0)!r} repeated in {text!r}")
            seen.add((q, t))
            _set(dense[t], n, q, m.group(1))
        return cls(n, T, BitVec(dense.reshape(-1)))

    def to_dense(self) -> np.ndarray:
        return self.bits.to_array()

    def slice(self, t: int) -> PauliString:
        if not 0 <= t <= self.T:
            raise IndexError(f"time {t} outside 0..{self.T}")
        w = 2 * self.n
        return PauliString(self.n, BitVec(self.to_dense()[t * w : (t + 1) * w]))

    def slices(self) -> list[PauliString]:
        return [self.slice(t) for t in range(self.T + 1)]

    def _check(self, other: "SpacetimePauli") -> None:
        if not isinstance(other, SpacetimePauli):
            raise TypeError("expected SpacetimePauli")
        if (other.n, other.T) != (self.n, self.T):
            raise ValueError(f"shape mismatch: (n={self.n}, T={self.T}) vs (n={other.n}, T={other.T})")

    def __mul__(self, other: "SpacetimePauli") -> "SpacetimePauli":
        self._check(other)
        return SpacetimePauli(self.n, self.T, self.bits ^ other.bits)

    def inner(self, other: "SpacetimePauli") -> int:
        self._check(other)
        twisted = pack_bits(symplectic_twist(other.to_dense(), self.n))
        return int(parity(self.bits.words & twisted))

    def twisted_words(self) -> np.ndarray:
        return pack_bits(symplectic_twist(self.to_dense(), self.n))

    def is_identity(self) -> bool:
        return not self.bits

    def weight(self) -> int:
        d = self.to_dense().reshape(self.T + 1, 2, self.n)
        return int((d[:, 0] | d[:, 1]).sum())

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, SpacetimePauli)
            and (self.n, self.T) == (other.n, other.T)
            and self.bits == other.bits
        )

    def __hash__(self) -> int:
        return hash(("ST", self.n, self.T, self.bits))

    def __str__(self) -> str:
        d = self.to_dense().reshape(self.T + 1, 2, self.n)
        toks = []
        for t in range(self.T + 1):
            for q in range(self.n):
                if d[t, 0, q] or d[t, 1, q]:
                    toks.append(f"{_letter(d[t, 0, q], d[t, 1, q])}{q + 1}@t{t}")
        return "".join(toks) or "I"

    def __repr__(self) -> str:
        return f"SpacetimePauli(n={self.n}, T={self.T}, '{self}')"
