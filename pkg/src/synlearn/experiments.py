"""Desk-scale scaling experiments: prior accuracy vs shots, shots vs p, LEP sample complexity."""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .circuit import CircuitSpec, bundled_circuit_path
from .estimator import draw_design, log_eigenvalues, recover
from .faults import FaultModel, FaultTemplate, build_prior, eigenvalues
from .lep import _mask, build_decoder, failures_from_shots, predict_lep
from .sampler import estimate_eigenvalues, resolve_threads, sample_shots
from .spacetime import SpacetimeCode, build_spacetime_code


@dataclass
class ExperimentConfig:
    instance: str
    template: FaultTemplate = field(default_factory=FaultTemplate)
    p_grid: list[float] = field(default_factory=lambda: [5e-4])
    shot_grid: list[int] = field(default_factory=lambda: [10_000, 30_000, 100_000, 300_000])
    sampled_shot_grid: list[int] | None = None
    tau_target: float = 0.25
    rel_err_target: float = 0.1
    trials: int = 20
    seed: int = 0
    max_order: int = 4
    q_rows: int | None = None
    decoder_weight: int = 3
    logical: int = 0
    experiments: list[str] = field(default_factory=lambda: ["accuracy_vs_shots", "shots_vs_p", "lep_comparison"])
    name: str = ""

    def __post_init__(self):
        if isinstance(self.template, dict):
            self.template = FaultTemplate.from_json(self.template)
        if not self.p_grid or not self.shot_grid:
            raise ValueError("p_grid and shot_grid must be nonempty")
        if self.trials < 1:
            raise ValueError("trials must be at least 1")
        if any(s < 1 for s in self.shot_grid):
            raise ValueError("shot counts must be positive")

    @classmethod
    def from_json(cls, d: dict) -> "ExperimentConfig":
        return cls(**d)

    @classmethod
    def load(cls, path: str | Path) -> "ExperimentConfig":
        path = Path(path)
        cfg = cls.from_json(json.loads(path.read_text()))
        inst = Path(cfg.instance)
        if not inst.is_absolute() and (path.parent / inst).exists():
            cfg.instance = str(path.parent / inst)
        return cfg

    def to_json(self) -> dict:
        d = asdict(self)
        d["template"] = self.template.to_json()
        return d

    def circuit(self) -> CircuitSpec:
        p = Path(self.instance)
        return CircuitSpec.load(p if p.suffix == ".json" and p.exists() else bundled_circuit_path(self.instance))

    @property
    def label(self) -> str:
        return self.name or Path(self.instance).stem


@dataclass
class Fit:
    slope: float
    intercept: float
    r2: float

    def to_json(self) -> dict:
        return asdict(self)


@dataclass
class ScalingResult:
    kind: str
    points: list[dict]
    fit: Fit | None
    extra: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {"kind": self.kind, "points": self.points, "fit": self.fit.to_json() if self.fit else None, "extra": self.extra}

    def write(self, out_dir: str | Path, stem: str) -> tuple[Path, Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        js = out / f"{stem}.json"
        js.write_text(json.dumps(self.to_json(), indent=2, default=float) + "\n")
        cs = out / f"{stem}.csv"
        rows = self.csv_rows()
        with open(cs, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=list(rows[0].keys()) if rows else ["empty"])
            w.writeheader()
            w.writerows(rows)
        return cs, js

    def csv_rows(self) -> list[dict]:
        return [dict(p) for p in self.points]


def loglog_fit(x: Sequence[float], y: Sequence[float]) -> Fit:
    lx, ly = np.log10(np.asarray(x, float)), np.log10(np.asarray(y, float))
    if lx.size < 2:
        return Fit(float("nan"), float("nan"), float("nan"))
    slope, intercept = np.polyfit(lx, ly, 1)
    pred = slope * lx + intercept
    ss_res = float(((ly - pred) ** 2).sum())
    ss_tot = float(((ly - ly.mean()) ** 2).sum())
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return Fit(float(slope), float(intercept), r2)


def trial_seed(*parts: int) -> int:
    return int(np.random.SeedSequence([int(p) for p in parts]).generate_state(1, dtype=np.uint64)[0])


def _map(fn: Callable, items: list, threads: int | None):
    n = resolve_threads(threads)
    if n > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=n) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


class _Instance:
    def __init__(self, cfg: ExperimentConfig, code: SpacetimeCode | None = None):
        self.cfg = cfg
        self.code = code or build_spacetime_code(cfg.circuit())

    def model(self, p: float) -> FaultModel:
        return self.cfg.template.build(self.code, p)


def _design(inst: _Instance, prior, seed: int, attempts: int = 50):
    """Draw a design, redrawing (before any data is seen) when the augmented system is rank-deficient."""
    for a in range(attempts):
        design = draw_design(inst.code, prior, inst.cfg.q_rows, seed if a == 0 else trial_seed(seed, a))
        m = design.augmented() if design.q > design.K else design.A
        if np.linalg.matrix_rank(m) == m.shape[1]:
            return design
    raise RuntimeError(f"no full-rank design in {attempts} draws; increase q_rows")


def _tau_trial(inst: _Instance, model: FaultModel, prior, shots: int, seed: int, noiseless: bool) -> float:
    design = _design(inst, prior, seed)
    if noiseless:
        mus = design.mu.astype(np.int64)
        meas = np.array([m.to_dense() for m in inst.code.meas_gens], dtype=np.int64)
        lam = eigenvalues(model, ((mus @ meas) & 1).astype(np.uint8))
    else:
        ss = sample_shots(model, shots, seed)
        lam = estimate_eigenvalues(ss, design.mu)
    y, _ = log_eigenvalues(lam, shots, clamp=True)
    res = recover(design, y)
    return float(np.max(np.abs(res.q_bar - prior.q) / prior.q))


def accuracy_points(inst: _Instance, p: float, p_index: int = 0, noiseless: bool = False,
                    threads: int | None = None) -> list[dict]:
    cfg = inst.cfg
    model = inst.model(p)
    prior = build_prior(model)
    points = []
    for ni, n_shots in enumerate(cfg.shot_grid):
        seeds = [trial_seed(cfg.seed, p_index, ni, t) for t in range(cfg.trials)]
        taus = np.array(_map(lambda s: _tau_trial(inst, model, prior, n_shots, s, noiseless), seeds, threads))
        q25, med, q75 = np.quantile(taus, [0.25, 0.5, 0.75])
        points.append({
            "instance": cfg.label, "p": p, "shots": int(n_shots), "trials": cfg.trials, "seed": cfg.seed,
            "tau_median": float(med), "tau_q25": float(q25), "tau_q75": float(q75),
        })
    return points


def run_accuracy_vs_shots(cfg: ExperimentConfig, noiseless: bool = False, threads: int | None = None,
                          code: SpacetimeCode | None = None) -> ScalingResult:
    """Median over trials of ``tau = max_c |q_bar_c - q_c| / q_c`` per shot count, fitted log-log."""
    inst = _Instance(cfg, code)
    p = cfg.p_grid[0]
    points = accuracy_points(inst, p, 0, noiseless, threads)
    fit = None
    if not noiseless:
        fit = loglog_fit([pt["shots"] for pt in points], [pt["tau_median"] for pt in points])
    extra = {"n_vs_tau_slope": (1.0 / fit.slope) if fit and fit.slope else None, "classes": build_prior(inst.model(p)).K}
    return ScalingResult("accuracy_vs_shots", points, fit, extra)


def shots_for_target(points: list[dict], tau_target: float) -> float | None:
    """Log-log interpolation of the first crossing of ``tau_target`` by the median curve."""
    n = [pt["shots"] for pt in points]
    t = [pt["tau_median"] for pt in points]
    for i in range(len(n) - 1):
        lo, hi = sorted((t[i], t[i + 1]))
        if lo <= tau_target <= hi and t[i] != t[i + 1]:
            a = (math.log(tau_target) - math.log(t[i])) / (math.log(t[i + 1]) - math.log(t[i]))
            return float(math.exp(math.log(n[i]) + a * (math.log(n[i + 1]) - math.log(n[i]))))
    return None


def run_shots_vs_p(cfg: ExperimentConfig, threads: int | None = None, code: SpacetimeCode | None = None) -> ScalingResult:
    """Shots needed to reach ``tau_target`` as a function of ``p``, fitted log-log."""
    inst = _Instance(cfg, code)
    points, dropped, curves = [], [], []
    for pi, p in enumerate(cfg.p_grid):
        curve = accuracy_points(inst, p, pi, threads=threads)
        curves.extend(curve)
        need = shots_for_target(curve, cfg.tau_target)
        if need is None:
            dropped.append(p)
            continue
        points.append({"instance": cfg.label, "p": p, "shots_needed": need, "tau_target": cfg.tau_target,
                       "trials": cfg.trials, "seed": cfg.seed})
    fit = loglog_fit([pt["p"] for pt in points], [pt["shots_needed"] for pt in points]) if len(points) >= 2 else None
    return ScalingResult("shots_vs_p", points, fit, {"dropped_p": dropped, "curves": curves})


def _predicted_trial(inst, model, prior, dec, target_l, shots, seed):
    cfg = inst.cfg
    design = _design(inst, prior, seed)
    ss = sample_shots(model, shots, seed)
    y, _ = log_eigenvalues(estimate_eigenvalues(ss, design.mu), shots, clamp=True)
    res = recover(design, y)
    return predict_lep(prior.with_q(res.q_bar), inst.code, dec, target_l, cfg.max_order).value


def _sampled_trial(model, dec, target, shots, seed):
    ss = sample_shots(model, shots, seed)
    return float(failures_from_shots(ss, dec, target).mean())


def n_for_rel_err(fit: Fit, target: float) -> float:
    return float(10 ** ((math.log10(target) - fit.intercept) / fit.slope))


def run_lep_comparison(cfg: ExperimentConfig, threads: int | None = None, code: SpacetimeCode | None = None) -> ScalingResult:
    """Relative std of predicted vs sampled LEP estimates against the reference value.

    The reference is the predicted LEP of the true prior at ``max_order`` (its neglected mass
    is reported); it equals the exact LEP whenever the model is learnable up to logical
    equivalence.
    """
    inst = _Instance(cfg, code)
    p = cfg.p_grid[0]
    model = inst.model(p)
    prior = build_prior(model)
    dec = build_decoder(inst.code, prior, cfg.decoder_weight)
    ref = predict_lep(prior, inst.code, dec, cfg.logical, cfg.max_order)
    p_true = ref.value
    target = _mask(inst.code.logical_bits(inst.code.logical_gens[cfg.logical]))[0]
    sampled_grid = cfg.sampled_shot_grid or cfg.shot_grid
    grid = sorted(set(cfg.shot_grid) | set(sampled_grid))
    points = []
    rel = {"predicted": ([], []), "sampled": ([], [])}
    for ni, n_shots in enumerate(grid):
        row = {"instance": cfg.label, "p": p, "shots": int(n_shots), "predicted": None, "sampled": None,
               "exact": p_true, "residual_bound": ref.residual_bound, "rel_err_predicted": None,
               "rel_err_sampled": None, "trials": cfg.trials, "seed": cfg.seed}
        seeds = [trial_seed(cfg.seed, 7, ni, t) for t in range(cfg.trials)]
        if n_shots in cfg.shot_grid:
            est = np.array(_map(lambda s: _predicted_trial(inst, model, prior, dec, cfg.logical, n_shots, s), seeds, threads))
            row["predicted"] = float(est.mean())
            row["rel_err_predicted"] = float(est.std(ddof=1) / p_true) if cfg.trials > 1 else None
        if n_shots in sampled_grid:
            est = np.array(_map(lambda s: _sampled_trial(model, dec, target, n_shots, s + 1), seeds, threads))
            row["sampled"] = float(est.mean())
            row["rel_err_sampled"] = float(est.std(ddof=1) / p_true) if cfg.trials > 1 else None
        for key in ("predicted", "sampled"):
            r = row[f"rel_err_{key}"]
            if r:
                rel[key][0].append(n_shots)
                rel[key][1].append(r)
        points.append(row)
    fits, need = {}, {}
    for key, (ns, rs) in rel.items():
        if len(ns) >= 2:
            fits[key] = loglog_fit(ns, rs)
            need[key] = n_for_rel_err(fits[key], cfg.rel_err_target)
    ratio = need["sampled"] / need["predicted"] if len(need) == 2 else None
    extra = {
        "p_true": p_true,
        "residual_bound": ref.residual_bound,
        "fit_predicted": fits["predicted"].to_json() if "predicted" in fits else None,
        "fit_sampled": fits["sampled"].to_json() if "sampled" in fits else None,
        "shots_needed_predicted": need.get("predicted"),
        "shots_needed_sampled": need.get("sampled"),
        "ratio": ratio,
        "rel_err_target": cfg.rel_err_target,
    }
    return ScalingResult("lep_comparison", points, fits.get("predicted"), extra)


RUNNERS = {
    "accuracy_vs_shots": run_accuracy_vs_shots,
    "shots_vs_p": run_shots_vs_p,
    "lep_comparison": run_lep_comparison,
}
