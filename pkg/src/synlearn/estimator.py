"""Compressed-sensing recovery of prior coefficients from syndrome eigenvalues.

Rows of the design are uniformly drawn selectors ``mu`` in F_2^M; each picks the product of
the measurement generators it selects.  For class representatives ``c`` the design entry is
``A[mu, c] = <mu . sigma(c)>`` and the eigenvalue model reads ``-log lambda_mu = A x`` with
``x_c = -log(1 - 2 q_c)``.  Writing ``H = 1 - 2A`` gives ``2y = s 1 - H x`` with
``s = sum(x)``; the augmented system ``[H | 1]`` is solved for ``(-x, s)`` by least squares.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from .faults import PriorDistribution
from .gf2 import BitVec, lstsq_solve, pack_bits, parity
from .sampler import ShotSet, estimate_eigenvalues


class EstimatorError(ValueError):
    pass


class NonPositiveEigenvalueError(EstimatorError):
    def __init__(self, rows: Sequence[int]):
        self.rows = list(rows)
        super().__init__(
            f"estimated eigenvalues <= 0 on design rows {self.rows[:20]}"
            f"{' ...' if len(self.rows) > 20 else ''}; the recovery assumes lambda > 0."
            " Increase the shot count (or pass clamp=True to floor at 1/shots and taint the result)."
        )


def default_q_rows(K: int) -> int:
    return max(4 * K, K + 16)


@dataclass(frozen=True)
class SubsampleDesign:
    """Selector rows ``mu`` and the induced 0/1 design ``A_res`` (rows x classes)."""

    mu: np.ndarray
    A: np.ndarray
    seed: int | None

    @property
    def q(self) -> int:
        return self.mu.shape[0]

    @property
    def K(self) -> int:
        return self.A.shape[1]

    @property
    def rows(self) -> list[BitVec]:
        return [BitVec(r) for r in self.mu]

    def signed(self) -> np.ndarray:
        return 1.0 - 2.0 * self.A

    def augmented(self) -> np.ndarray:
        return np.hstack([self.signed(), np.ones((self.q, 1))])


def _design_matrix(mu: np.ndarray, syndromes: np.ndarray) -> np.ndarray:
    if syndromes.shape[0] == 0:
        return np.zeros((mu.shape[0], 0))
    par = parity(pack_bits(mu)[:, None, :] & pack_bits(syndromes)[None, :, :])
    return par.astype(np.float64)


def draw_design(code, classes: PriorDistribution, q_rows: int | None = None, seed: int | None = 0) -> SubsampleDesign:
    K = classes.K
    M = code.M
    q_rows = default_q_rows(K) if q_rows is None else int(q_rows)
    if q_rows < K:
        raise EstimatorError(f"q_rows={q_rows} is below the class count K={K}")
    if M == 0:
        raise EstimatorError("the code has no measurement generators")
    rng = np.random.default_rng(seed)
    mu = rng.integers(0, 2, size=(q_rows, M), dtype=np.uint8)
    while True:
        zero = ~mu.any(axis=1)
        if not zero.any():
            break
        mu[zero] = rng.integers(0, 2, size=(int(zero.sum()), M), dtype=np.uint8)
    return SubsampleDesign(mu, _design_matrix(mu, classes.syndromes), seed)


def full_design(code, classes: PriorDistribution, include_zero: bool = True) -> SubsampleDesign:
    """Every selector in F_2^M (optionally including ``mu = 0``); only for small M."""
    M = code.M
    if M > 20:
        raise EstimatorError(f"full enumeration of 2^{M} selectors is too large")
    idx = np.arange(0 if include_zero else 1, 1 << M, dtype=np.int64)
    mu = ((idx[:, None] >> np.arange(M)) & 1).astype(np.uint8)
    return SubsampleDesign(mu, _design_matrix(mu, classes.syndromes), None)


def log_eigenvalues(lambda_hat, shots: int | None = None, clamp: bool = False) -> tuple[np.ndarray, list[int]]:
    """``y = -log lambda_hat``; non-positive rows raise, or are floored at ``1/shots`` when clamping."""
    lam = np.asarray(lambda_hat, dtype=np.float64).copy()
    bad = np.flatnonzero(lam <= 0).tolist()
    if bad:
        if not clamp:
            raise NonPositiveEigenvalueError(bad)
        if not shots:
            raise EstimatorError("clamping needs the shot count")
        lam[bad] = 1.0 / shots
    return -np.log(lam), bad


@dataclass
class RecoveryResult:
    x_bar: np.ndarray
    q_bar: np.ndarray
    residual: float
    condition: dict
    s_bar: float
    tainted_rows: list[int] = field(default_factory=list)
    provenance: dict = field(default_factory=dict)

    @property
    def tainted(self) -> bool:
        return bool(self.tainted_rows)

    def to_json(self) -> dict:
        return {
            "x_bar": self.x_bar.tolist(),
            "q_bar": self.q_bar.tolist(),
            "residual": self.residual,
            "s_bar": self.s_bar,
            "condition": self.condition,
            "tainted_rows": self.tainted_rows,
            "provenance": self.provenance,
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2)


def recover(design: SubsampleDesign, y_bar) -> RecoveryResult:
    y = np.asarray(y_bar, dtype=np.float64).reshape(-1)
    if y.shape[0] != design.q:
        raise EstimatorError(f"expected {design.q} observations, got {y.shape[0]}")
    bad = np.flatnonzero(~np.isfinite(y)).tolist()
    if bad:
        raise NonPositiveEigenvalueError(bad)
    K = design.K
    try:
        if design.q > K:
            sol = lstsq_solve(design.augmented(), 2.0 * y)
            x_bar, s_bar, form = -sol.x[:K], float(sol.x[K]), "augmented"
        else:
            # too few rows for the extra column: solve y = A x directly
            sol = lstsq_solve(design.A, y)
            x_bar, s_bar, form = sol.x, float(sol.x.sum()), "direct"
    except np.linalg.LinAlgError as exc:
        raise EstimatorError(f"{exc}; draw a larger design (increase q_rows)") from None
    q_bar = 0.5 * (1.0 - np.exp(-x_bar))
    sv = sol.singular_values if form == "augmented" else _singular_values(design.augmented())
    smin, smax = float(sv.min()), float(sv.max())
    cond = {
        "sigma_min": smin,
        "sigma_max": smax,
        "rip_constant": _rip_from_sv(sv, design.q),
        "rows": design.q,
        "classes": K,
        "formulation": form,
    }
    return RecoveryResult(x_bar, q_bar, sol.residual, cond, s_bar)


def _singular_values(m: np.ndarray) -> np.ndarray:
    """All ``ncols`` singular values, zero-padded when there are fewer rows than columns."""
    sv = np.linalg.svd(m, compute_uv=False)
    return np.concatenate([sv, np.zeros(max(0, m.shape[1] - sv.size))])


def _rip_from_sv(sv: np.ndarray, q: int) -> float:
    return float(max(sv.max() ** 2 / q - 1.0, 1.0 - sv.min() ** 2 / q))


def rip_constant(design: SubsampleDesign) -> float:
    """Operational restricted-isometry constant of the normalized augmented design."""
    return _rip_from_sv(_singular_values(design.augmented()), design.q)


def logical_pattern(classes: PriorDistribution, b) -> np.ndarray:
    """Anticommutation bits of ``b`` with every class representative."""
    from .gf2 import symplectic_twist

    dense = b.to_dense() if hasattr(b, "to_dense") else np.asarray(b, dtype=np.uint8)
    bt = pack_bits(symplectic_twist(dense, classes.code.n))
    return parity(pack_bits(classes.representatives) & bt[None, :])


def reconstruct_logical_eigenvalue(design: SubsampleDesign, result: RecoveryResult, l_pattern, eps: float = 0.0) -> tuple[float, float]:
    """``lambda_b = exp(-<l, x_bar>)`` and the multiplicative bound ``2 ||l||_2 eps / sqrt(1 - delta)``."""
    l = l_pattern.to_array() if isinstance(l_pattern, BitVec) else np.asarray(l_pattern)
    l = l.astype(np.float64).reshape(-1)
    if l.shape[0] != result.x_bar.shape[0]:
        raise EstimatorError(f"pattern length {l.shape[0]} does not match {result.x_bar.shape[0]} classes")
    delta = rip_constant(design)
    if delta >= 1.0:
        raise EstimatorError(f"design restricted-isometry constant {delta:.3f} >= 1; bound undefined")
    value = float(np.exp(-l @ result.x_bar))
    bound = 2.0 * float(np.linalg.norm(l)) * eps / np.sqrt(1.0 - delta)
    return value, bound


class PriorEstimator(BaseEstimator):
    """Estimate prior coefficients from syndrome shots.

    Parameters
    ----------
    classes : PriorDistribution
        Class structure (representatives and syndromes).  Its coefficients are ignored.
    q_rows : int, optional
        Number of subsampled selector rows; defaults to ``max(4K, K + 16)``.
    seed : int
        Seed of the design draw.
    clamp : bool
        Floor non-positive eigenvalue estimates at ``1/shots`` instead of raising; the fitted
        result is then marked as tainted.

    Attributes
    ----------
    design_ : SubsampleDesign
    lambda_hat_ : ndarray of shape (q_rows,)
    result_ : RecoveryResult
    coef_ : ndarray of shape (K,)
        Recovered prior coefficients ``q_bar``.
    rip_constant_ : float
    prior_ : PriorDistribution
        ``classes`` with the recovered coefficients.
    """

    def __init__(self, classes: PriorDistribution | None = None, q_rows: int | None = None, seed: int = 0, clamp: bool = False):
        self.classes = classes
        self.q_rows = q_rows
        self.seed = seed
        self.clamp = clamp

    def _shots(self, X) -> ShotSet:
        if isinstance(X, ShotSet):
            return X
        arr = check_array(X, dtype=np.uint8, ensure_min_features=1)
        if arr.size and arr.max() > 1:
            raise ValueError("shot outcomes must be 0/1")
        return ShotSet.from_dense(arr)

    def fit(self, X, y=None):
        if self.classes is None:
            raise ValueError("PriorEstimator needs the class structure (classes=...)")
        shots = self._shots(X)
        code = self.classes.code
        if shots.M != code.M:
            raise ValueError(f"shots have {shots.M} outcomes per row, the code has M={code.M}")
        self.n_features_in_ = shots.M
        self.design_ = draw_design(code, self.classes, self.q_rows, self.seed)
        self.lambda_hat_ = estimate_eigenvalues(shots, self.design_.mu)
        yv, tainted = log_eigenvalues(self.lambda_hat_, len(shots), self.clamp)
        self.result_ = recover(self.design_, yv)
        self.result_.tainted_rows = tainted
        self.result_.provenance = {"design_seed": self.seed, "q_rows": self.design_.q, "shots": len(shots)}
        self.coef_ = self.result_.q_bar
        self.rip_constant_ = self.result_.condition["rip_constant"]
        self.prior_ = self.classes.with_q(self.coef_)
        return self

    def predict_lep(self, decoder, logical, max_order: int = 4):
        check_is_fitted(self, "coef_")
        from .lep import predict_lep

        return predict_lep(self.prior_, self.classes.code, decoder, logical, max_order)
