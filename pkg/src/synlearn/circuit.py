"""Layered Clifford syndrome-extraction circuits and their JSON file format."""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from .gf2 import BitMatrix, BitVec, RowSpace, n_words, symplectic_form
from .pauli import PauliString, PauliSyntaxError


class CircuitError(ValueError):
    pass


def _gate_rows(mat: np.ndarray, n: int, name: str, qubits: Sequence[int]) -> None:
    """Left-multiply ``mat`` (in place) by the symplectic action of one gate."""
    name = name.upper()
    q = [int(k) - 1 for k in qubits]
    if any(not 0 <= k < n for k in q):
        raise CircuitError(f"gate {name} {list(qubits)} addresses a qubit outside 1..{n}")
    if name == "H":
        (a,) = q
        mat[[a, n + a]] = mat[[n + a, a]]
    elif name == "S":
        (a,) = q
        mat[n + a] ^= mat[a]
    elif name in ("CNOT", "CX"):
        c, t = q
        if c == t:
            raise CircuitError("CNOT control and target coincide")
        mat[t] ^= mat[c]
        mat[n + c] ^= mat[n + t]
    elif name == "CZ":
        a, b = q
        if a == b:
            raise CircuitError("CZ qubits coincide")
        mat[n + b] ^= mat[a]
        mat[n + a] ^= mat[b]
    elif name == "SWAP":
        a, b = q
        mat[[a, b]] = mat[[b, a]]
        mat[[n + a, n + b]] = mat[[n + b, n + a]]
    elif name == "I":
        pass
    else:
        raise CircuitError(f"unknown gate {name!r}; supported: H, S, CNOT, CZ, SWAP")


@dataclass(frozen=True)
class CliffordLayer:
    """Symplectic matrix acting on column vectors ``[x|z]``: ``v -> symp @ v``."""

    symp: BitMatrix

    def __post_init__(self):
        r, c = self.symp.shape
        if r != c or r % 2:
            raise CircuitError("Clifford layer must be a square 2n x 2n matrix")
        om = symplectic_form(r // 2)
        if self.symp.T @ om @ self.symp != om:
            raise CircuitError("layer matrix is not symplectic")

    @property
    def n(self) -> int:
        return self.symp.rows // 2

    @classmethod
    def identity(cls, n: int) -> "CliffordLayer":
        return cls(BitMatrix.identity(2 * n))

    @classmethod
    def from_gates(cls, n: int, gates: Sequence) -> "CliffordLayer":
        mat = np.eye(2 * n, dtype=np.uint8)
        for g in gates:
            parts = g.split() if isinstance(g, str) else list(g)
            if not parts:
                continue
            _gate_rows(mat, n, str(parts[0]), parts[1:])
        return cls(BitMatrix(mat))

    def dense(self) -> np.ndarray:
        return self.symp.to_array()

    def apply(self, p: PauliString) -> PauliString:
        return PauliString(p.n, self.symp @ p.xz)

    def inverse(self) -> "CliffordLayer":
        om = symplectic_form(self.n)
        return CliffordLayer(om @ self.symp.T @ om)

    def is_identity(self) -> bool:
        return self.symp == BitMatrix.identity(self.symp.rows)


def _span(paulis: Sequence[PauliString], n: int) -> RowSpace:
    if not paulis:
        return RowSpace(np.zeros((0, n_words(2 * n)), dtype=np.uint64), 2 * n)
    return RowSpace(np.stack([p.xz.words for p in paulis]), 2 * n)


def _commutation_violation(a: Sequence[PauliString], b: Sequence[PauliString]):
    for p in a:
        for q in b:
            if not p.commutes(q):
                return p, q
    return None


@dataclass(frozen=True)
class CircuitSpec:
    """Syndrome-extraction circuit on ``n`` qubits with ``T`` unitary layers.

    ``checks[t]`` lists the checks measured at half step ``t + 0.5``.  ``gauge`` is set for
    subsystem circuits (e.g. Bacon-Shor), whose checks are gauge operators rather than
    stabilizers; it lists generators of the base gauge group.
    """

    n: int
    T: int
    layers: tuple[CliffordLayer, ...]
    checks: tuple[tuple[PauliString, ...], ...]
    base_stabilizers: tuple[PauliString, ...]
    logicals: tuple[PauliString, ...] | None = None
    gauge: tuple[PauliString, ...] | None = None
    name: str = ""
    source: str | None = field(default=None, compare=False)

    def __post_init__(self):
        self.validate()

    @property
    def is_subsystem(self) -> bool:
        return self.gauge is not None

    def u_between(self, t_to: int, t_from: int) -> np.ndarray:
        """Dense symplectic matrix of ``u_{(t_to, t_from)}``."""
        m = np.eye(2 * self.n, dtype=np.int64)
        for t in range(t_from, t_to):
            m = (self.layers[t].dense().astype(np.int64) @ m) & 1
        return m.astype(np.uint8)

    def validate(self) -> None:
        n, T = self.n, self.T
        if n < 1:
            raise CircuitError("n must be positive")
        if T < 0 or T % 2:
            raise CircuitError(f"T must be a non-negative even integer, got {T}")
        if len(self.layers) != T:
            raise CircuitError(f"expected {T} layers, got {len(self.layers)}")
        if len(self.checks) != T:
            raise CircuitError(f"expected check lists for {T} steps, got {len(self.checks)}")
        for layer in self.layers:
            if layer.n != n:
                raise CircuitError("layer size does not match n")
        everything = list(self.base_stabilizers) + list(self.gauge or ()) + list(self.logicals or ())
        everything += [m for step in self.checks for m in step]
        if any(p.n != n for p in everything):
            raise CircuitError("Pauli qubit count does not match n")
        bad = _commutation_violation(self.base_stabilizers, self.base_stabilizers)
        if bad:
            raise CircuitError(f"base stabilizers {bad[0]} and {bad[1]} anticommute")
        stab = _span(self.base_stabilizers, n)
        if self.gauge is not None:
            host = _span(list(self.gauge) + list(self.base_stabilizers), n)
            bad = _commutation_violation(self.base_stabilizers, self.gauge)
            if bad:
                raise CircuitError(f"stabilizer {bad[0]} anticommutes with gauge generator {bad[1]}")
            host_name = "base gauge group"
        else:
            host = stab
            host_name = "base stabilizer group"
        for t, step in enumerate(self.checks):
            for i, a in enumerate(step):
                if a.is_identity():
                    raise CircuitError(f"identity check at step {t}.5")
                for b in step[i + 1 :]:
                    if not a.commutes(b):
                        raise CircuitError(f"checks {a} and {b} at step {t}.5 anticommute")
                    if set(a.support()) & set(b.support()):
                        raise CircuitError(f"checks {a} and {b} at step {t}.5 overlap in support")
                if not host.contains_vec(a.xz):
                    raise CircuitError(f"check {a} at step {t}.5 is not in the {host_name}")
                u = self.u_between(T, t)
                image = PauliString(n, BitVec((u.astype(np.int64) @ a.xz.to_array()) & 1))
                if not host.contains_vec(image.xz):
                    raise CircuitError(f"check {a} at step {t}.5 propagates to {image}, outside the {host_name}")
        if self.logicals is not None:
            commute_with = list(self.base_stabilizers) + list(self.gauge or ())
            for l in self.logicals:
                bad = _commutation_violation([l], commute_with)
                if bad:
                    raise CircuitError(f"logical {l} anticommutes with {bad[1]}")
                if host.contains_vec(l.xz):
                    raise CircuitError(f"logical {l} lies in the {host_name}")

    # file format

    def to_json(self) -> dict[str, Any]:
        out: dict[str, Any] = {"name": self.name, "n": self.n, "T": self.T}
        layers = []
        for layer in self.layers:
            layers.append([] if layer.is_identity() else {"symplectic": layer.dense().tolist()})
        out["layers"] = layers
        out["checks"] = [
            {"t": t, "generators": [str(p) for p in step]} for t, step in enumerate(self.checks) if step
        ]
        out["base_stabilizers"] = [str(p) for p in self.base_stabilizers]
        if self.gauge is not None:
            out["gauge"] = [str(p) for p in self.gauge]
        if self.logicals is not None:
            out["logicals"] = [str(p) for p in self.logicals]
        return out

    @classmethod
    def from_json(cls, data: dict[str, Any], text: str | None = None, source: str | None = None) -> "CircuitSpec":
        def where(token: str) -> str:
            if text is None:
                return ""
            idx = text.find(f'"{token}"')
            return f" (line {text.count(chr(10), 0, idx) + 1})" if idx >= 0 else ""

        def parse(token: str, n: int) -> PauliString:
            try:
                return PauliString.parse(token, n)
            except PauliSyntaxError as exc:
                raise CircuitError(f"{exc}{where(token)}") from None

        try:
            n, T = int(data["n"]), int(data["T"])
        except KeyError as exc:
            raise CircuitError(f"circuit file missing required key {exc}") from None
        raw_layers = data.get("layers") or [[] for _ in range(T)]
        if len(raw_layers) != T:
            raise CircuitError(f"expected {T} layers, got {len(raw_layers)}")
        layers = []
        for entry in raw_layers:
            if isinstance(entry, dict) and "symplectic" in entry:
                layers.append(CliffordLayer(BitMatrix(np.asarray(entry["symplectic"], dtype=np.uint8))))
            else:
                gates = entry.get("gates", []) if isinstance(entry, dict) else entry
                layers.append(CliffordLayer.from_gates(n, gates))
        checks: list[list[PauliString]] = [[] for _ in range(T)]
        for block in data.get("checks", []):
            t = int(block["t"])
            if not 0 <= t < T:
                raise CircuitError(f"check step t={t} outside 0..{T - 1}{where(block['generators'][0]) if block.get('generators') else ''}")
            checks[t].extend(parse(g, n) for g in block.get("generators", []))
        stabs = tuple(parse(g, n) for g in data.get("base_stabilizers", []))
        gauge = tuple(parse(g, n) for g in data["gauge"]) if data.get("gauge") is not None else None
        logicals = tuple(parse(g, n) for g in data["logicals"]) if data.get("logicals") is not None else None
        try:
            return cls(
                n=n,
                T=T,
                layers=tuple(layers),
                checks=tuple(tuple(s) for s in checks),
                base_stabilizers=stabs,
                logicals=logicals,
                gauge=gauge,
                name=str(data.get("name", "")),
                source=source,
            )
        except CircuitError as exc:
            msg = str(exc)
            for tok in re.findall(r"[XYZ]\d+(?:[XYZ]\d+)*", msg):
                loc = where(tok)
                if loc:
                    raise CircuitError(msg + loc) from None
            raise

    @classmethod
    def load(cls, path: str | Path) -> "CircuitSpec":
        path = Path(path)
        text = path.read_text()
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise CircuitError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from None
        return cls.from_json(data, text=text, source=str(path))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=2) + "\n")



def bundled_circuit_path(name: str) -> Path:
    """Path of a circuit file shipped in ``synlearn/data`` (``name`` without extension)."""
    from importlib.resources import files

    p = Path(str(files("synlearn") / "data" / f"{name}.json"))
    if not p.exists():
        available = sorted(q.stem for q in p.parent.glob("*.json"))
        raise FileNotFoundError(f"no bundled circuit {name!r}; available: {available}")
    return p


def load_bundled(name: str) -> CircuitSpec:
    return CircuitSpec.load(bundled_circuit_path(name))
