"""Learnability of a fault model from syndrome data: the A/B/C column partition."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .faults import FaultModel
from .gf2 import BitVec, pack_bits
from .pauli import SpacetimePauli


@dataclass(frozen=True)
class SyndromeClass:
    syndrome: BitVec
    members: tuple[int, ...]

    @property
    def representative(self) -> int:
        return self.members[0]


@dataclass
class LearnabilityReport:
    """Findings of :func:`analyze`.

    ``labels[i]`` is ``"A"`` (class representative), ``"B"`` (duplicate syndrome, gauge
    equivalent to its representative), ``"C"`` (duplicate syndrome, not gauge equivalent) or
    ``"invisible"`` (zero syndrome).  ``invisible_gauge[i]`` says whether an invisible
    generator lies in the gauge group (harmless) or carries a logical action.
    """

    classes: list[SyndromeClass]
    labels: list[str]
    physical_learnable: bool
    logical_learnable: bool
    unlearnable_pairs: list[tuple[int, int, SpacetimePauli]]
    invisible: list[int] = field(default_factory=list)
    invisible_gauge: dict[int, bool] = field(default_factory=dict)
    alternative_c_counts: list[list[int]] = field(default_factory=list)
    generator_names: list[str] = field(default_factory=list)

    @property
    def invisible_logical(self) -> list[int]:
        return [i for i in self.invisible if not self.invisible_gauge[i]]

    def count(self, label: str) -> int:
        return sum(1 for x in self.labels if x == label)

    def to_json(self) -> dict:
        return {
            "physical_learnable": self.physical_learnable,
            "logical_learnable": self.logical_learnable,
            "counts": {k: self.count(k) for k in ("A", "B", "C", "invisible")},
            "invisible_logical": [self.generator_names[i] for i in self.invisible_logical],
            "classes": [
                {
                    "syndrome": str(c.syndrome),
                    "members": [self.generator_names[i] for i in c.members],
                    "labels": [self.labels[i] for i in c.members],
                    "c_count_by_representative": self.alternative_c_counts[k],
                }
                for k, c in enumerate(self.classes)
            ],
            "unlearnable_pairs": [
                {"a": self.generator_names[a], "b": self.generator_names[b], "witness": str(w)}
                for a, b, w in self.unlearnable_pairs
            ],
        }

    def table(self) -> str:
        lines = [f"{'generator':<28} {'label':<10} syndrome"]
        for k, c in enumerate(self.classes):
            for i in c.members:
                lines.append(f"{self.generator_names[i]:<28} {self.labels[i]:<10} {c.syndrome}")
        for i in self.invisible:
            tag = "gauge" if self.invisible_gauge[i] else "logical"
            lines.append(f"{self.generator_names[i]:<28} {'invisible':<10} ({tag})")
        lines.append(
            f"physical_learnable={self.physical_learnable} logical_learnable={self.logical_learnable} "
            f"A={self.count('A')} B={self.count('B')} C={self.count('C')} invisible={len(self.invisible)}"
        )
        if self.invisible_logical:
            lines.append(
                f"warning: {len(self.invisible_logical)} zero-syndrome generator(s) act logically; "
                "their rates cannot be inferred from syndromes"
            )
        return "\n".join(lines)

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2)


def _witness(code, diff: np.ndarray) -> SpacetimePauli:
    """Bare-logical combination ``L`` with ``diff in G * L`` (``diff`` has zero syndrome)."""
    v = code.logical_bits(diff)[0].astype(np.int64)
    om = code.logical_matrix().astype(np.int64)
    # coordinates c solve  c @ om = v  over GF(2); om is invertible
    from .gf2 import BitMatrix, gf2_solve

    coords = gf2_solve(BitMatrix(om.T.astype(np.uint8)), BitVec(v.astype(np.uint8)))
    out = np.zeros(code.length, dtype=np.uint8)
    for j in coords.support():
        out ^= code.logical_gens[j].to_dense()
    return SpacetimePauli.from_dense(code.n, code.T, out)


def analyze(model: FaultModel) -> LearnabilityReport:
    code = model._need_code()
    syn = model.syndrome_bits()
    names = [str(g.support) for g in model.generators]
    K = model.K
    words = pack_bits(model.supports) if K else None
    labels = [""] * K
    groups: dict[bytes, list[int]] = {}
    invisible = []
    for i in range(K):
        if not syn[i].any():
            invisible.append(i)
        else:
            groups.setdefault(syn[i].tobytes(), []).append(i)
    invisible_gauge = {}
    if invisible:
        inside = code.in_gauge(model.supports[invisible])
        invisible_gauge = {i: bool(v) for i, v in zip(invisible, inside)}
        for i in invisible:
            labels[i] = "invisible"
    classes, pairs, alt = [], [], []
    for members in groups.values():
        cls = SyndromeClass(BitVec(syn[members[0]]), tuple(members))
        classes.append(cls)
        rep = members[0]
        labels[rep] = "A"
        if len(members) > 1:
            # gauge-equivalence matrix within the class: member i ~ member j iff w_i ^ w_j in G
            m = np.array(members)
            diffs = words[m][:, None, :] ^ words[m][None, :, :]
            eq = code._gauge_space.contains(diffs.reshape(-1, words.shape[1])).reshape(len(m), len(m))
            for j, b in enumerate(members[1:], start=1):
                if eq[0, j]:
                    labels[b] = "B"
                else:
                    labels[b] = "C"
                    diff = (model.supports[rep] ^ model.supports[b])[None, :]
                    pairs.append((rep, b, _witness(code, diff)))
            alt.append([int((~eq[r]).sum()) for r in range(len(m))])
        else:
            alt.append([0])
    physical = all(labels[i] == "A" for i in range(K)) and not invisible
    logical = not any(x == "C" for x in labels)
    return LearnabilityReport(
        classes=classes,
        labels=labels,
        physical_learnable=physical,
        logical_learnable=logical,
        unlearnable_pairs=pairs,
        invisible=invisible,
        invisible_gauge=invisible_gauge,
        alternative_c_counts=alt,
        generator_names=names,
    )


def unlearnable_correction_bound(report: LearnabilityReport, model: FaultModel, b: SpacetimePauli, eps_c: float) -> float:
    """Additive bound on the ``log lambda_b`` reconstruction error from unlearnable columns.

    Each C column is reduced against its class representative (column ``a * c``); invisible
    logical generators are reduced against the identity.  The bound is the number of reduced
    columns that anticommute with ``b``, times ``eps_c``.
    """
    code = model._need_code()
    if not code.in_gauge_perp(b)[0]:
        raise ValueError(f"{b} does not commute with the gauge group")
    reduced = []
    for a, c, _ in report.unlearnable_pairs:
        reduced.append(model.supports[a] ^ model.supports[c])
    for i in report.invisible_logical:
        reduced.append(model.supports[i])
    if not reduced:
        return 0.0
    bt = b.twisted_words()
    hits = (np.bitwise_count(pack_bits(np.array(reduced)) & bt[None, :]).sum(axis=1) & 1).sum()
    return float(hits) * eps_c
