"""Monte Carlo syndrome shots and syndrome-eigenvalue estimation.

Shots are generated in fixed blocks of ``BLOCK`` indices.  Block ``b`` draws from a Philox
stream keyed on the seed with the block index in the counter, so shot ``i`` depends only on
``(seed, i)`` and results are identical for any thread count or total shot count.
"""

from __future__ import annotations

import csv
import math
import os
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np

from .faults import FaultModel
from .gf2 import BitVec, n_words, pack_bits, parity, unpack_bits
from .pauli import SpacetimePauli

BLOCK = 1 << 16
MAGIC = b"SYNS"
_HEADER = struct.Struct("<4sIQ")


class SamplerError(ValueError):
    pass


def resolve_threads(threads: int | None = None) -> int:
    """Thread count: ``SYNLEARN_THREADS`` overrides the argument; default 1."""
    env = os.environ.get("SYNLEARN_THREADS")
    if env:
        try:
            threads = int(env)
        except ValueError:
            raise SamplerError(f"SYNLEARN_THREADS={env!r} is not an integer") from None
    threads = 1 if threads is None else int(threads)
    if threads < 1:
        raise SamplerError("thread count must be positive")
    return threads


@dataclass(frozen=True)
class ShotRecord:
    bits: BitVec


class ShotSet:
    """Packed syndrome outcomes, one row per shot.

    ``logical`` optionally holds, per shot, the anticommutation bits of the fault against the
    bare logical generators (bit ``j`` for generator ``j``); it is used by the LEP sampler.
    """

    def __init__(self, words: np.ndarray, M: int, logical: np.ndarray | None = None):
        words = np.asarray(words, dtype=np.uint64).reshape(-1, n_words(M) if M else 1)
        self.words = words
        self.M = M
        self.logical = logical
        self._hist = None

    def __len__(self) -> int:
        return self.words.shape[0]

    @property
    def shots(self) -> int:
        return len(self)

    def __getitem__(self, i: int) -> ShotRecord:
        return ShotRecord(BitVec.from_words(self.words[i], self.M) if self.M else BitVec([]))

    def records(self):
        for i in range(len(self)):
            yield self[i]

    def to_dense(self) -> np.ndarray:
        if self.M == 0:
            return np.zeros((len(self), 0), dtype=np.uint8)
        return unpack_bits(self.words, self.M)

    @classmethod
    def from_dense(cls, bits) -> "ShotSet":
        bits = np.asarray(bits, dtype=np.uint8)
        if bits.ndim != 2:
            raise SamplerError("shot outcomes must be a two-dimensional array")
        return cls(pack_bits(bits) if bits.shape[1] else np.zeros((bits.shape[0], 1), np.uint64), bits.shape[1])

    def concat(self, other: "ShotSet") -> "ShotSet":
        if other.M != self.M:
            raise SamplerError("cannot concatenate shot sets with different M")
        logical = None
        if self.logical is not None and other.logical is not None:
            logical = np.concatenate([self.logical, other.logical])
        return ShotSet(np.vstack([self.words, other.words]), self.M, logical)

    def head(self, shots: int) -> "ShotSet":
        logical = None if self.logical is None else self.logical[:shots]
        return ShotSet(self.words[:shots], self.M, logical)

    def histogram(self) -> tuple[np.ndarray, np.ndarray]:
        """Distinct syndrome rows and their counts."""
        if self._hist is None:
            if self.words.shape[1] == 1:
                uniq, counts = np.unique(self.words[:, 0], return_counts=True)
                uniq = uniq[:, None]
            else:
                uniq, counts = np.unique(self.words, axis=0, return_counts=True)
            self._hist = (uniq, counts)
        return self._hist

    # binary and CSV dumps

    def save(self, path: str | Path) -> None:
        nbytes = (self.M + 7) // 8
        raw = np.ascontiguousarray(self.words.astype("<u8")).view(np.uint8)[:, :nbytes]
        with open(path, "wb") as fh:
            fh.write(_HEADER.pack(MAGIC, self.M, len(self)))
            fh.write(np.ascontiguousarray(raw).tobytes())

    @classmethod
    def load(cls, path: str | Path) -> "ShotSet":
        data = Path(path).read_bytes()
        if len(data) < _HEADER.size:
            raise SamplerError(f"{path}: truncated header")
        magic, M, S = _HEADER.unpack_from(data)
        if magic != MAGIC:
            raise SamplerError(f"{path}: bad magic {magic!r}")
        nbytes = (M + 7) // 8
        body = np.frombuffer(data, dtype=np.uint8, offset=_HEADER.size)
        if body.size != S * nbytes:
            raise SamplerError(f"{path}: expected {S * nbytes} payload bytes, found {body.size}")
        raw = np.zeros((S, n_words(M) * 8), dtype=np.uint8)
        raw[:, :nbytes] = body.reshape(S, nbytes)
        return cls(raw.view("<u8").astype(np.uint64), M)

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["shot"] + [f"m{i}" for i in range(self.M)])
            for i, row in enumerate(self.to_dense()):
                w.writerow([i] + row.tolist())


def _block_rng(seed: int, block: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=int(seed) % (1 << 128), counter=int(block) << 128))


def _sample_block(syn_words, log_mask, q, seed, block):
    rng = _block_rng(seed, block)
    out = np.zeros((BLOCK, syn_words.shape[1]), dtype=np.uint64)
    logical = np.zeros(BLOCK, dtype=np.uint64)
    counts = rng.binomial(BLOCK, q)
    for j, k in enumerate(counts):
        if k == 0:
            continue
        pos = rng.choice(BLOCK, size=int(k), replace=False, shuffle=False)
        out[pos] ^= syn_words[j]
        logical[pos] ^= log_mask[j]
    return out, logical


def sample_shots(model: FaultModel, shots: int, seed: int = 0, threads: int | None = None) -> ShotSet:
    """Fire every generator independently with probability ``q_a`` and record syndromes.

    The returned set also carries the logical anticommutation bits of each shot's fault.
    """
    if shots < 1:
        raise SamplerError("shots must be at least 1")
    if not model.is_sampleable:
        raise SamplerError("sign-extended models cannot be sampled directly; use quasi-probability flag")
    code = model._need_code()
    M = code.M
    nw = n_words(M) if M else 1
    if model.K:
        syn = model.syndrome_bits()
        syn_words = pack_bits(syn) if M else np.zeros((model.K, 1), np.uint64)
        lb = model.logical_bits()
        log_mask = (lb.astype(np.uint64) << np.arange(lb.shape[1], dtype=np.uint64)).sum(axis=1).astype(np.uint64)
    else:
        syn_words = np.zeros((0, nw), np.uint64)
        log_mask = np.zeros(0, np.uint64)
    nblocks = math.ceil(shots / BLOCK)
    q = model.q

    def work(b):
        return _sample_block(syn_words, log_mask, q, seed, b)

    nthreads = resolve_threads(threads)
    if nthreads > 1 and nblocks > 1:
        with ThreadPoolExecutor(max_workers=nthreads) as pool:
            parts = list(pool.map(work, range(nblocks)))
    else:
        parts = [work(b) for b in range(nblocks)]
    words = np.vstack([p[0] for p in parts])[:shots]
    logical = np.concatenate([p[1] for p in parts])[:shots]
    return ShotSet(words, M, logical)


class EigenvalueEstimate(NamedTuple):
    subject: SpacetimePauli | None
    lambda_hat: float
    shots: int
    bern_rate: float


def _mu_words(mus, M: int) -> np.ndarray:
    mus = np.asarray(mus, dtype=np.uint8)
    if mus.ndim == 1:
        mus = mus[None, :]
    if mus.shape[1] != M:
        raise SamplerError(f"selector length {mus.shape[1]} does not match M={M}")
    return pack_bits(mus)


def estimate_eigenvalues(shotset: ShotSet, mus) -> np.ndarray:
    """``lambda_hat`` for every selector row ``mu``: mean of ``(-1)^{<mu, shot>}``."""
    if len(shotset) == 0:
        raise SamplerError("empty shot set")
    mw = _mu_words(mus, shotset.M)
    uniq, counts = shotset.histogram()
    par = parity(uniq[:, None, :] & mw[None, :, :]).astype(np.float64)
    return (counts.astype(np.float64) @ (1.0 - 2.0 * par)) / len(shotset)


def estimate_eigenvalue(shotset: ShotSet, mu: BitVec | Sequence[int], subject: SpacetimePauli | None = None) -> EigenvalueEstimate:
    mu_arr = mu.to_array() if isinstance(mu, BitVec) else np.asarray(mu, dtype=np.uint8)
    lam = float(estimate_eigenvalues(shotset, mu_arr)[0])
    return EigenvalueEstimate(subject, lam, len(shotset), (1.0 - lam) / 2.0)


def shots_for_precision(eps_guess: float, tau: float, delta: float) -> int:
    """``ceil(12 / (eps * tau^2) * ln(1/delta))`` shots for relative precision ``tau`` on a Bernoulli rate."""
    if not 0.0 < eps_guess < 0.5:
        raise ValueError("eps_guess must lie in (0, 1/2)")
    if not 0.0 < tau < 1.0:
        raise ValueError("tau must lie in (0, 1)")
    if not 0.0 < delta < 1.0:
        raise ValueError("delta must lie in (0, 1)")
    return math.ceil(12.0 / (eps_guess * tau * tau) * math.log(1.0 / delta))
