"""Bit-packed linear algebra over GF(2) plus a small dense real least-squares solver."""

from __future__ import annotations

from typing import Iterable, NamedTuple, Sequence

import numpy as np
import scipy.linalg

WORD_BITS = 64
_ONE = np.uint64(1)


def n_words(nbits: int) -> int:
    return (nbits + WORD_BITS - 1) // WORD_BITS


def pack_bits(bits) -> np.ndarray:
    """Pack a ``(..., n)`` 0/1 array into ``(..., n_words(n))`` little-endian uint64 words."""
    bits = np.asarray(bits, dtype=np.uint8)
    nbits = bits.shape[-1]
    nw = n_words(nbits)
    packed = np.packbits(bits & 1, axis=-1, bitorder="little")
    pad = nw * 8 - packed.shape[-1]
    if pad:
        widths = [(0, 0)] * (packed.ndim - 1) + [(0, pad)]
        packed = np.pad(packed, widths)
    packed = np.ascontiguousarray(packed)
    return packed.view("<u8").astype(np.uint64, copy=False)


def unpack_bits(words: np.ndarray, nbits: int) -> np.ndarray:
    """Inverse of :func:`pack_bits`; returns uint8 0/1 of shape ``(..., nbits)``."""
    words = np.ascontiguousarray(np.asarray(words, dtype="<u8"))
    as_bytes = words.view(np.uint8)
    return np.unpackbits(as_bytes, axis=-1, count=nbits, bitorder="little")


def parity(words: np.ndarray) -> np.ndarray:
    """Parity of the popcount along the last axis."""
    return (np.bitwise_count(words).sum(axis=-1, dtype=np.int64) & 1).astype(np.uint8)


def get_bit(words: np.ndarray, index: int) -> np.ndarray:
    w, b = divmod(index, WORD_BITS)
    return ((words[..., w] >> np.uint64(b)) & _ONE).astype(bool)


def _pad_mask(nbits: int) -> np.ndarray:
    nw = n_words(nbits)
    mask = np.full(nw, np.iinfo(np.uint64).max, dtype=np.uint64)
    rem = nbits % WORD_BITS
    if nw and rem:
        mask[-1] = (_ONE << np.uint64(rem)) - _ONE
    return mask


class BitVec:
    """Immutable packed bit vector. Bits are addressed by index; packing is internal."""

    __slots__ = ("_words", "_len")

    def __init__(self, bits: Iterable[int] | np.ndarray = ()):
        arr = np.asarray(list(bits) if not isinstance(bits, np.ndarray) else bits)
        if arr.ndim != 1:
            raise ValueError("BitVec expects a one-dimensional bit sequence")
        if arr.size and not np.isin(arr, (0, 1)).all():
            raise ValueError("BitVec entries must be 0 or 1")
        self._len = int(arr.size)
        self._words = pack_bits(arr.astype(np.uint8))
        self._words.setflags(write=False)

    @classmethod
    def from_words(cls, words: np.ndarray, length: int) -> "BitVec":
        words = np.array(words, dtype=np.uint64).reshape(-1)
        if words.size != n_words(length):
            raise ValueError("word count does not match length")
        obj = cls.__new__(cls)
        obj._len = int(length)
        obj._words = words & _pad_mask(length)
        obj._words.setflags(write=False)
        return obj

    @classmethod
    def zeros(cls, length: int) -> "BitVec":
        return cls.from_words(np.zeros(n_words(length), dtype=np.uint64), length)

    @classmethod
    def from_indices(cls, length: int, indices: Iterable[int]) -> "BitVec":
        bits = np.zeros(length, dtype=np.uint8)
        for i in indices:
            if not 0 <= i < length:
                raise IndexError(f"bit index {i} out of range for length {length}")
            bits[i] ^= 1
        return cls(bits)

    @classmethod
    def from_str(cls, text: str) -> "BitVec":
        return cls([int(ch) for ch in text.strip()])

    @property
    def words(self) -> np.ndarray:
        return self._words

    def __len__(self) -> int:
        return self._len

    def __getitem__(self, index: int) -> int:
        if index < 0:
            index += self._len
        if not 0 <= index < self._len:
            raise IndexError("bit index out of range")
        return int(get_bit(self._words, index))

    def __iter__(self):
        return iter(self.to_array().tolist())

    def to_array(self) -> np.ndarray:
        return unpack_bits(self._words, self._len)

    def support(self) -> list[int]:
        return np.flatnonzero(self.to_array()).tolist()

    def weight(self) -> int:
        return int(np.bitwise_count(self._words).sum())

    def _check(self, other: "BitVec") -> None:
        if not isinstance(other, BitVec):
            raise TypeError("expected BitVec")
        if other._len != self._len:
            raise ValueError(f"length mismatch: {self._len} vs {other._len}")

    def __xor__(self, other: "BitVec") -> "BitVec":
        self._check(other)
        return BitVec.from_words(self._words ^ other._words, self._len)

    def __and__(self, other: "BitVec") -> "BitVec":
        self._check(other)
        return BitVec.from_words(self._words & other._words, self._len)

    def dot(self, other: "BitVec") -> int:
        self._check(other)
        return int(parity(self._words & other._words))

    def __bool__(self) -> bool:
        return bool(self._words.any())

    def __eq__(self, other) -> bool:
        if not isinstance(other, BitVec):
            return NotImplemented
        return self._len == other._len and np.array_equal(self._words, other._words)

    def __hash__(self) -> int:
        return hash((self._len, self._words.tobytes()))

    def __str__(self) -> str:
        return "".join(map(str, self.to_array().tolist()))

    def __repr__(self) -> str:
        return f"BitVec('{self}')"


class BitMatrix:
    """Immutable row-major packed GF(2) matrix."""

    __slots__ = ("_data", "rows", "cols")

    def __init__(self, dense) -> None:
        arr = np.asarray(dense, dtype=np.uint8)
        if arr.ndim != 2:
            raise ValueError("BitMatrix expects a two-dimensional array")
        if arr.size and arr.max() > 1:
            raise ValueError("BitMatrix entries must be 0 or 1")
        self.rows, self.cols = (int(s) for s in arr.shape)
        self._data = pack_bits(arr) if self.cols else np.zeros((self.rows, 0), np.uint64)
        self._data.setflags(write=False)

    @classmethod
    def from_words(cls, data: np.ndarray, cols: int) -> "BitMatrix":
        data = np.array(data, dtype=np.uint64, ndmin=2)
        if data.shape[1] != n_words(cols):
            raise ValueError("word count does not match column count")
        obj = cls.__new__(cls)
        obj.rows, obj.cols = int(data.shape[0]), int(cols)
        obj._data = data & _pad_mask(cols)
        obj._data.setflags(write=False)
        return obj

    @classmethod
    def from_rows(cls, rows: Sequence[BitVec], cols: int | None = None) -> "BitMatrix":
        if not rows:
            if cols is None:
                raise ValueError("column count required for an empty row list")
            return cls.zeros(0, cols)
        cols = len(rows[0]) if cols is None else cols
        if any(len(r) != cols for r in rows):
            raise ValueError("all rows must have the same length")
        return cls.from_words(np.stack([r.words for r in rows]), cols)

    @classmethod
    def zeros(cls, rows: int, cols: int) -> "BitMatrix":
        return cls.from_words(np.zeros((rows, n_words(cols)), dtype=np.uint64), cols)

    @classmethod
    def identity(cls, n: int) -> "BitMatrix":
        return cls(np.eye(n, dtype=np.uint8))

    @property
    def data(self) -> np.ndarray:
        return self._data

    @property
    def shape(self) -> tuple[int, int]:
        return self.rows, self.cols

    def to_array(self) -> np.ndarray:
        if self.cols == 0:
            return np.zeros((self.rows, 0), dtype=np.uint8)
        return unpack_bits(self._data, self.cols)

    def row(self, i: int) -> BitVec:
        return BitVec.from_words(self._data[i], self.cols)

    def row_list(self) -> list[BitVec]:
        return [self.row(i) for i in range(self.rows)]

    @property
    def T(self) -> "BitMatrix":
        return BitMatrix(self.to_array().T)

    def __matmul__(self, other):
        if isinstance(other, BitVec):
            if len(other) != self.cols:
                raise ValueError(f"dimension mismatch: {self.cols} columns vs vector of {len(other)}")
            return BitVec(parity(self._data & other.words))
        if isinstance(other, BitMatrix):
            if other.rows != self.cols:
                raise ValueError("dimension mismatch in matrix product")
            prod = self.to_array().astype(np.int64) @ other.to_array().astype(np.int64)
            return BitMatrix((prod & 1).astype(np.uint8))
        return NotImplemented

    def vstack(self, other: "BitMatrix") -> "BitMatrix":
        if other.cols != self.cols:
            raise ValueError("column mismatch")
        return BitMatrix.from_words(np.vstack([self._data, other._data]), self.cols)

    def __eq__(self, other) -> bool:
        if not isinstance(other, BitMatrix):
            return NotImplemented
        return self.shape == other.shape and np.array_equal(self._data, other._data)

    def __hash__(self) -> int:
        return hash((self.shape, self._data.tobytes()))

    def __repr__(self) -> str:
        return f"BitMatrix({self.rows}x{self.cols})"


def rref_words(data: np.ndarray, ncols: int) -> tuple[np.ndarray, list[int]]:
    """Reduced row echelon form of packed rows; returns a new array and the pivot columns."""
    a = np.array(data, dtype=np.uint64, ndmin=2, copy=True)
    nrows = a.shape[0]
    pivots: list[int] = []
    r = 0
    for c in range(ncols):
        if r == nrows:
            break
        w, b = divmod(c, WORD_BITS)
        col = ((a[:, w] >> np.uint64(b)) & _ONE).astype(bool)
        below = np.flatnonzero(col[r:])
        if below.size == 0:
            continue
        p = r + int(below[0])
        if p != r:
            a[[r, p]] = a[[p, r]]
            col[[r, p]] = col[[p, r]]
        col[r] = False
        a[col] ^= a[r]
        pivots.append(c)
        r += 1
    return a, pivots


def gf2_rank(m: BitMatrix) -> int:
    if m.rows == 0 or m.cols == 0:
        return 0
    return len(rref_words(m.data, m.cols)[1])


def gf2_solve(m: BitMatrix, rhs: BitVec) -> BitVec | None:
    """Some ``x`` with ``m @ x == rhs``, or ``None`` when the system is inconsistent."""
    if len(rhs) != m.rows:
        raise ValueError(f"dimension mismatch: rhs has {len(rhs)} bits, matrix has {m.rows} rows")
    aug = np.concatenate([m.to_array(), rhs.to_array()[:, None]], axis=1)
    red, pivots = rref_words(pack_bits(aug), m.cols + 1)
    if pivots and pivots[-1] == m.cols:
        return None
    x = np.zeros(m.cols, dtype=np.uint8)
    if pivots:
        rhs_bits = get_bit(red[: len(pivots)], m.cols)
        x[pivots] = rhs_bits
    return BitVec(x)


def gf2_nullspace(m: BitMatrix) -> BitMatrix:
    """Basis (as rows) of ``{x : m @ x = 0}``."""
    if m.rows == 0:
        return BitMatrix.identity(m.cols)
    red, pivots = rref_words(m.data, m.cols)
    dense = unpack_bits(red[: len(pivots)], m.cols)
    free = [c for c in range(m.cols) if c not in set(pivots)]
    basis = np.zeros((len(free), m.cols), dtype=np.uint8)
    for k, f in enumerate(free):
        basis[k, f] = 1
        basis[k, pivots] = dense[:, f]
    return BitMatrix(basis) if free else BitMatrix.zeros(0, m.cols)


class RowSpace:
    """Row space of a packed matrix held in reduced echelon form for fast membership queries."""

    def __init__(self, rows: np.ndarray, ncols: int):
        rows = np.asarray(rows, dtype=np.uint64).reshape(-1, n_words(ncols))
        red, pivots = rref_words(rows, ncols)
        self.ncols = ncols
        self.pivots = pivots
        self.basis = red[: len(pivots)].copy()
        self.basis.setflags(write=False)

    @classmethod
    def from_matrix(cls, m: BitMatrix) -> "RowSpace":
        return cls(m.data, m.cols)

    @property
    def rank(self) -> int:
        return len(self.pivots)

    def reduce(self, vecs: np.ndarray) -> np.ndarray:
        v = np.array(vecs, dtype=np.uint64, ndmin=2, copy=True)
        for i, c in enumerate(self.pivots):
            v[get_bit(v, c)] ^= self.basis[i]
        return v

    def contains(self, vecs: np.ndarray) -> np.ndarray:
        return ~self.reduce(vecs).any(axis=-1)

    def contains_vec(self, v: BitVec) -> bool:
        return bool(self.contains(v.words)[0])

    def matrix(self) -> BitMatrix:
        return BitMatrix.from_words(self.basis, self.ncols) if self.rank else BitMatrix.zeros(0, self.ncols)


def independent_rows(rows: np.ndarray, ncols: int) -> list[int]:
    """Indices of a greedy, order-preserving maximal independent subset of packed rows."""
    rows = np.asarray(rows, dtype=np.uint64).reshape(-1, n_words(ncols))
    keep: list[int] = []
    basis: list[np.ndarray] = []
    pivots: list[int] = []
    for i, row in enumerate(rows):
        v = row.copy()
        for b, c in zip(basis, pivots):
            if get_bit(v, c):
                v ^= b
        if not v.any():
            continue
        bits = unpack_bits(v, ncols)
        c = int(np.flatnonzero(bits)[0])
        for k, b in enumerate(basis):
            if get_bit(b, c):
                basis[k] = b ^ v
        basis.append(v)
        pivots.append(c)
        keep.append(i)
    return keep


def symplectic_twist(bits: np.ndarray, n: int) -> np.ndarray:
    """Swap the x and z halves of every width-``2n`` slice of dense 0/1 vectors."""
    bits = np.asarray(bits, dtype=np.uint8)
    length = bits.shape[-1]
    if n <= 0 or length % (2 * n):
        raise ValueError(f"length {length} is not a whole number of 2*{n}-bit slices")
    shaped = bits.reshape(bits.shape[:-1] + (length // (2 * n), 2, n))
    return shaped[..., ::-1, :].reshape(bits.shape)


def symplectic_inner(a: BitVec, b: BitVec, n: int | None = None) -> int:
    """Symplectic form summed over slices of width ``2n`` laid out as ``[x|z]``.

    ``n`` defaults to ``len(a) // 2`` (a single slice).
    """
    if len(a) != len(b):
        raise ValueError(f"length mismatch: {len(a)} vs {len(b)}")
    if n is None:
        if len(a) % 2:
            raise ValueError("odd length cannot carry an x|z pairing")
        n = len(a) // 2
    twisted = symplectic_twist(b.to_array(), n)
    return int(parity(a.words & pack_bits(twisted)))


def symplectic_form(n: int) -> BitMatrix:
    """Omega for a single slice of ``n`` qubits in ``[x|z]`` layout."""
    om = np.zeros((2 * n, 2 * n), dtype=np.uint8)
    om[:n, n:] = np.eye(n, dtype=np.uint8)
    om[n:, :n] = np.eye(n, dtype=np.uint8)
    return BitMatrix(om)


# Real linear algebra

class LstsqResult(NamedTuple):
    x: np.ndarray
    residual: float
    singular_values: np.ndarray


def as_real_matrix(m) -> np.ndarray:
    """Validate a dense real matrix: two-dimensional, finite, float64."""
    arr = np.asarray(m, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError("expected a two-dimensional matrix")
    if not np.isfinite(arr).all():
        raise ValueError("matrix contains NaN or Inf entries")
    return arr


def lstsq_solve(m, rhs) -> LstsqResult:
    """Least-squares solution via column-pivoted QR.

    Raises ``np.linalg.LinAlgError`` naming the columns that make the normal matrix singular.
    """
    a = as_real_matrix(m)
    b = np.asarray(rhs, dtype=np.float64).reshape(-1)
    if b.shape[0] != a.shape[0]:
        raise ValueError(f"rhs length {b.shape[0]} does not match {a.shape[0]} rows")
    if not np.isfinite(b).all():
        raise ValueError("rhs contains NaN or Inf entries")
    ncols = a.shape[1]
    if a.shape[0] < ncols:
        raise np.linalg.LinAlgError(
            f"rank-deficient system: {a.shape[0]} rows for {ncols} columns; "
            f"columns {list(range(a.shape[0], ncols))} are undetermined"
        )
    q, r, perm = scipy.linalg.qr(a, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r))
    tol = max(a.shape) * np.finfo(np.float64).eps * (diag[0] if diag.size else 0.0)
    deficient = np.flatnonzero(diag <= tol)
    if deficient.size:
        cols = sorted(int(perm[i]) for i in range(int(deficient[0]), ncols))
        raise np.linalg.LinAlgError(f"rank-deficient normal matrix; dependent columns {cols}")
    z = scipy.linalg.solve_triangular(r, q.T @ b)
    x = np.empty(ncols)
    x[perm] = z
    resid = float(np.linalg.norm(a @ x - b))
    sv = np.linalg.svd(a, compute_uv=False)
    return LstsqResult(x, resid, sv)
