"""Blocked subset enumeration shared by the fault-model and LEP modules."""

from __future__ import annotations

import itertools
from typing import Iterator

import numpy as np

DEFAULT_BLOCK = 1 << 17


def combination_blocks(K: int, w: int, block: int = DEFAULT_BLOCK) -> Iterator[np.ndarray]:
    """Yield ``(rows, w)`` int arrays covering all ``w``-subsets of ``range(K)`` in lexicographic order."""
    if w < 0 or w > K:
        return
    if w == 0:
        yield np.zeros((1, 0), dtype=np.int64)
        return
    it = itertools.combinations(range(K), w)
    while True:
        chunk = np.fromiter(
            itertools.chain.from_iterable(itertools.islice(it, block)), dtype=np.int64
        )
        if chunk.size == 0:
            return
        yield chunk.reshape(-1, w)


def xor_reduce(table: np.ndarray, combos: np.ndarray) -> np.ndarray:
    """XOR of ``table`` rows selected by each combination row."""
    out = np.zeros((combos.shape[0],) + table.shape[1:], dtype=table.dtype)
    for j in range(combos.shape[1]):
        out ^= table[combos[:, j]]
    return out


def all_subsets_xor(table: np.ndarray) -> np.ndarray:
    """XOR of every subset of rows; subset index bit ``j`` selects row ``j``."""
    out = np.zeros((1,) + table.shape[1:], dtype=table.dtype)
    for row in table:
        out = np.concatenate([out, out ^ row])
    return out


def all_subsets_weight(q: np.ndarray) -> np.ndarray:
    """Probability of each firing pattern under independent Bernoulli(q_j) events."""
    w = np.ones(1)
    for qj in q:
        w = np.concatenate([w * (1.0 - qj), w * qj])
    return w
