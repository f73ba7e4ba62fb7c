"""Command-line entry points: build-code, check-learnability, estimate, predict-lep, experiment, plot.

Exit codes: 0 success, 1 error, 2 domain verdict (model not learnable).
"""

from __future__ import annotations

import argparse
import hashlib
import json
import platform
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .circuit import CircuitSpec, bundled_circuit_path

EXIT_OK, EXIT_ERROR, EXIT_UNLEARNABLE = 0, 1, 2
DEFAULT_SEED = 20240611


class CliError(RuntimeError):
    pass


@dataclass(frozen=True)
class RunManifest:
    """Replay record written before any heavy computation."""

    command: str
    argv: list[str]
    config_hash: str
    seeds: dict
    versions: dict
    started: str
    outputs: list[str] = field(default_factory=list)

    def write(self, path: Path) -> Path:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(asdict(self), indent=2) + "\n")
        return path


def _versions() -> dict:
    import scipy
    import sklearn

    return {
        "synlearn": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "scikit-learn": sklearn.__version__,
    }


def _config_hash(args: argparse.Namespace, inputs: list[Path]) -> str:
    h = hashlib.sha256()
    for key, value in sorted(vars(args).items()):
        if key != "func":
            h.update(f"{key}={value}\n".encode())
    for p in inputs:
        h.update(p.read_bytes())
    return h.hexdigest()


def _manifest(args, argv, inputs: list[Path], outputs: list[Path], seeds: dict) -> None:
    if args.out is None:
        return
    out = Path(args.out)
    target = out / "manifest.json" if not out.suffix else out.with_name(out.stem + ".manifest.json")
    RunManifest(
        command=args.command,
        argv=list(argv),
        config_hash=_config_hash(args, inputs),
        seeds=seeds,
        versions=_versions(),
        started=time.strftime("%Y-%m-%dT%H:%M:%S%z"),
        outputs=[str(p) for p in outputs],
    ).write(target)


def resolve_circuit(name: str) -> Path:
    p = Path(name)
    if p.exists():
        return p
    try:
        return bundled_circuit_path(name)
    except FileNotFoundError as exc:
        raise CliError(f"circuit {name!r} is neither a file nor a bundled instance ({exc})") from None


def _load_code(circuit: str):
    from .spacetime import build_spacetime_code

    path = resolve_circuit(circuit)
    spec = CircuitSpec.load(path)
    spec.validate()
    return path, build_spacetime_code(spec)


def load_faults(path: Path, code):
    """Fault-model file, or a template file ``{"template": {...}, "p": ...}``."""
    from .faults import FaultModel, FaultTemplate

    data = json.loads(Path(path).read_text())
    if isinstance(data, dict) and "template" in data:
        if "p" not in data:
            raise CliError(f"{path}: template fault files need a global rate 'p'")
        return FaultTemplate.from_json(data["template"]).build(code, float(data["p"]))
    return FaultModel.from_json(data, code=code)


def _emit(obj: dict, out: str | None) -> None:
    text = json.dumps(obj, indent=2, default=float) + "\n"
    if out:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text)


def _select_logical(code, selector: str):
    from .pauli import SpacetimePauli

    if selector.isdigit():
        idx = int(selector)
        if idx >= len(code.logical_gens):
            raise CliError(f"logical index {idx} out of range (code has {len(code.logical_gens)})")
        return idx, str(code.base_logicals[idx])
    if "@" in selector:
        return SpacetimePauli.parse(selector, code.n, code.T), selector
    names = [str(b) for b in code.base_logicals]
    if selector in names:
        return names.index(selector), selector
    raise CliError(f"logical {selector!r} is not an index, a spacetime literal or one of {names}")


# commands

def cmd_build_code(args, argv) -> int:
    path = resolve_circuit(args.circuit)
    _manifest(args, argv, [path], [Path(args.out)] if args.out else [], {})
    _, code = _load_code(args.circuit)
    dims = code.dims.as_dict()
    out = {
        "circuit": str(path),
        "dims": dims,
        "gauge_generators": [str(g) for g in code.gauge_gens],
        "measurement_generators": [str(m) for m in code.meas_gens],
        "logical_generators": [str(l) for l in code.logical_gens],
        "base_logicals": [str(b) for b in code.base_logicals],
    }
    _emit(out, args.out)
    print(f"{'quantity':<28} value")
    for k, v in dims.items():
        print(f"{k:<28} {v}")
    return EXIT_OK


def cmd_check_learnability(args, argv) -> int:
    from .learnability import analyze

    _need(args, "faults")
    path = resolve_circuit(args.circuit)
    _manifest(args, argv, [path, Path(args.faults)], [Path(args.out)] if args.out else [], {})
    _, code = _load_code(args.circuit)
    report = analyze(load_faults(Path(args.faults), code))
    _emit(report.to_json(), args.out)
    print(report.table())
    return EXIT_OK if report.logical_learnable else EXIT_UNLEARNABLE


def cmd_estimate(args, argv) -> int:
    from .estimator import PriorEstimator
    from .faults import FaultModel, build_prior
    from .learnability import analyze
    from .sampler import sample_shots

    _need(args, "faults")
    path = resolve_circuit(args.circuit)
    _manifest(args, argv, [path, Path(args.faults)], [Path(args.out)] if args.out else [],
              {"shots": args.seed, "design": args.seed})
    _, code = _load_code(args.circuit)
    model = load_faults(Path(args.faults), code)
    report = analyze(model)
    if not report.logical_learnable and not args.force:
        print(report.table(), file=sys.stderr)
        print("refusing to estimate: the fault model is not learnable up to logical equivalence (use --force)",
              file=sys.stderr)
        return EXIT_UNLEARNABLE
    visible = [g for i, g in enumerate(model.generators) if i not in set(report.invisible)]
    if len(visible) < model.K:
        print(f"warning: {model.K - len(visible)} zero-syndrome generator(s) excluded from the prior", file=sys.stderr)
    model = FaultModel(visible, code)
    truth = build_prior(model)
    shots = sample_shots(model, args.shots, args.seed, args.threads)
    est = PriorEstimator(truth, q_rows=args.q_rows, seed=args.seed, clamp=args.clamp).fit(shots)
    out = {
        "circuit": str(path),
        "circuit_spec": code.circuit.to_json(),
        "faults": str(args.faults),
        "shots": args.shots,
        "seed": args.seed,
        "q_rows": est.design_.q,
        "classes": est.prior_.to_json(),
        "q_true": truth.q.tolist(),
        "max_relative_error": float(np.max(np.abs(est.coef_ - truth.q) / truth.q)) if truth.K else 0.0,
        "recovery": est.result_.to_json(),
        "learnability": {"logical_learnable": report.logical_learnable, "forced": bool(args.force)},
    }
    _emit(out, args.out)
    print(f"classes={truth.K} shots={args.shots} q_rows={est.design_.q} rip_constant={est.rip_constant_:.3f} "
          f"max_relative_error={out['max_relative_error']:.3g}" + (" (tainted)" if est.result_.tainted else ""))
    return EXIT_OK


def cmd_predict_lep(args, argv) -> int:
    from .faults import PriorDistribution, build_prior
    from .lep import LogicalReport, build_decoder, exact_lep, predict_lep, sample_lep
    from .spacetime import build_spacetime_code

    _need(args, "estimate")
    _manifest(args, argv, [Path(args.estimate)], [Path(args.out)] if args.out else [], {"sampled": args.seed})
    est = json.loads(Path(args.estimate).read_text())
    spec = CircuitSpec.from_json(est["circuit_spec"])
    code = build_spacetime_code(spec)
    prior = PriorDistribution.from_json(est["classes"], code)
    sel, name = _select_logical(code, args.logical)
    dec = build_decoder(code, prior, args.decoder_weight)
    pred = predict_lep(prior, code, dec, sel, args.max_order)
    rep = LogicalReport(name, pred.value, pred.max_order, pred.residual_bound)
    if args.faults:
        model = load_faults(Path(args.faults), code)
        truth = build_prior(model)
        if model.K <= 20:
            rep.p_L_true = exact_lep(model, code, dec, sel)
        else:
            rep.p_L_true = predict_lep(truth, code, dec, sel, min(truth.K, args.max_order + 1)).value
            rep.extra["p_L_true_method"] = f"true prior at order {min(truth.K, args.max_order + 1)}"
        if args.shots:
            s = sample_lep(model, code, dec, sel, args.shots, args.seed, args.threads)
            rep.p_L_sampled, rep.sampled_shots, rep.sampled_ci = s.rate, s.shots, (s.ci_low, s.ci_high)
    rep.extra["decoder"] = {"max_weight": dec.max_weight, "entries": len(dec)}
    _emit(rep.to_json(), args.out)
    print(rep.dumps())
    return EXIT_OK


def cmd_experiment(args, argv) -> int:
    from .experiments import RUNNERS, ExperimentConfig
    from .plotting import plot_csv

    _need(args, "config")
    cfg = ExperimentConfig.load(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    out = Path(args.out or "results")
    stems = [f"{cfg.label}_{kind}" for kind in cfg.experiments]
    planned = [out / f"{s}.{ext}" for s in stems for ext in ("csv", "json", "svg")]
    unknown = [k for k in cfg.experiments if k not in RUNNERS]
    if unknown:
        raise CliError(f"unknown experiment kinds {unknown}; choose from {sorted(RUNNERS)}")
    args.out = str(out)
    _manifest(args, argv, [Path(args.config)], planned, {"base": cfg.seed, "trials": cfg.trials})
    for kind, stem in zip(cfg.experiments, stems):
        res = RUNNERS[kind](cfg, threads=args.threads)
        csv_path, _ = res.write(out, stem)
        plot_csv(csv_path, out / f"{stem}.svg")
        fit = res.fit
        summary = f"{kind}: {len(res.points)} points"
        if fit:
            summary += f", slope {fit.slope:.3f}, r2 {fit.r2:.3f}"
        if res.extra.get("ratio"):
            summary += f", shot ratio {res.extra['ratio']:.1f}"
        print(summary)
    return EXIT_OK


def cmd_plot(args, argv) -> int:
    from .plotting import plot_csv

    _need(args, "csv")
    out = Path(args.out) if args.out else Path(args.csv).with_suffix(".svg")
    plot_csv(args.csv, out)
    print(out)
    return EXIT_OK


def _need(args, name: str) -> None:
    if getattr(args, name, None) is None:
        raise CliError(f"{args.command} requires --{name.replace('_', '-')}")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="synlearn", description="Learn logical error rates from syndrome data.")
    ap.add_argument("--version", action="version", version=f"synlearn {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, circuit=True):
        if circuit:
            p.add_argument("--circuit", required=True, help="circuit JSON file or bundled instance name")
        p.add_argument("--out", help="output file (or directory for experiment)")
        p.add_argument("--threads", type=int, default=None, help="worker threads (SYNLEARN_THREADS overrides)")
        return p

    p = common(sub.add_parser("build-code", help="spacetime code generators and dimension table"))
    p.set_defaults(func=cmd_build_code)

    p = common(sub.add_parser("check-learnability", help="A/B/C partition; exit 2 when unlearnable"))
    p.add_argument("--faults", help="fault-model or template JSON")
    p.set_defaults(func=cmd_check_learnability)

    p = common(sub.add_parser("estimate", help="sample syndromes and recover the prior"))
    p.add_argument("--faults")
    p.add_argument("--shots", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--q-rows", type=int, default=None)
    p.add_argument("--force", action="store_true", help="estimate even when the model is not learnable")
    p.add_argument("--clamp", action="store_true", help="floor non-positive eigenvalues at 1/shots")
    p.set_defaults(func=cmd_estimate)

    p = common(sub.add_parser("predict-lep", help="logical error probability from an estimate"), circuit=False)
    p.add_argument("--estimate", help="JSON written by estimate")
    p.add_argument("--logical", default="0", help="index, base logical literal or spacetime literal")
    p.add_argument("--max-order", type=int, default=4)
    p.add_argument("--decoder-weight", type=int, default=3)
    p.add_argument("--faults", help="true fault model, for the exact and sampled references")
    p.add_argument("--shots", type=int, default=0, help="sampled-LEP shots (needs --faults)")
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.set_defaults(func=cmd_predict_lep)

    p = common(sub.add_parser("experiment", help="run a scaling experiment config"), circuit=False)
    p.add_argument("--config", help="experiment config JSON")
    p.add_argument("--seed", type=int, default=None, help="override the config seed")
    p.set_defaults(func=cmd_experiment)

    p = common(sub.add_parser("plot", help="render an experiment CSV as SVG"), circuit=False)
    p.add_argument("--csv")
    p.set_defaults(func=cmd_plot)
    return ap


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_ERROR if exc.code else EXIT_OK
    try:
        return args.func(args, argv)
    except (ValueError, RuntimeError, OSError, KeyError, np.linalg.LinAlgError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
