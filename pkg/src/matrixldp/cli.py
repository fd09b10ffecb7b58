"""Command line front end: ``matrixldp <subcommand> ...``.

Single computations print JSON; sweeps write CSV files (plus the resolved
config) to the output directory, ``$MATRIXLDP_OUTPUT_DIR`` by default.
Exit codes: 0 success, 2 configuration error, 3 no hits or budget exceeded,
4 internal error.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import io
import json
import math
import os
import re
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .cutnorm import cut_distance, cut_distance_exact, cut_distance_heuristic
from .cutnorm import quotient_cut_distance
from .entrylaw import RateProfile, parse_law
from .errors import (
    AsymmetricInput,
    BudgetExceeded,
    InfeasibleGrid,
    NonUniformGrid,
    OutOfHull,
    TooLarge,
    ZeroHits,
)
from .jsolve import JProblem, solve_j
from .kernel import StepKernel, load_kernel, save_kernel, truncate
from .rate import rate_primal, rate_report, rate_truncated
from .sampler import (
    build_plan,
    estimate_kernel_event,
    estimate_spectrum_event,
    sample_matrix,
    sample_tilted,
)
from .spectral import (
    Spectrum,
    eig_symmetric,
    kernel_matrix,
    semicircle_check,
    spectrum_of_kernel,
    trace_moment,
)
from .regularity import weak_regularize

__all__ = ["ExperimentConfig", "run_ldp_sweep", "run_baselines", "main"]

ENV_OUTPUT_DIR = "MATRIXLDP_OUTPUT_DIR"
EXIT_OK, EXIT_CONFIG, EXIT_ACTIONABLE, EXIT_INTERNAL = 0, 2, 3, 4


def _default_output_dir() -> str:
    return os.environ.get(ENV_OUTPUT_DIR, ".")


@dataclass
class ExperimentConfig:
    """Everything a sweep needs; the output directory is not part of the hash."""

    law: str = "gaussian(sigma=1)"
    target: str = "constant(0.5)"
    spectrum: str | None = None
    n_values: list[int] = field(default_factory=lambda: [16, 32, 64])
    samples: int = 10_000
    delta: float = 0.1
    eps: float = 0.25
    ell: float = 3.0
    seeds: list[int] = field(default_factory=lambda: [0])
    output_dir: str = "."
    exact_cap: int = 16
    restarts: int = 8
    audit_fraction: float = 0.01
    trunc_samples: int = 1000

    def to_json(self) -> str:
        return json.dumps(dataclasses.asdict(self), sort_keys=True, indent=2) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        data = json.loads(text)
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    def config_hash(self) -> str:
        d = dataclasses.asdict(self)
        d.pop("output_dir")
        blob = json.dumps(d, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    def validate(self):
        parse_law(self.law)
        if not self.n_values or min(self.n_values) < 1:
            raise ValueError("n_values must be positive integers")
        if self.samples < 1 or self.trunc_samples < 0:
            raise ValueError("sample counts must be positive")
        for name in ("delta", "eps", "ell"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")


def load_target(spec: str) -> StepKernel:
    """``constant(c)`` or a kernel JSON file."""
    m = re.fullmatch(r"\s*constant\(\s*([^)]+)\)\s*", spec)
    if m:
        return StepKernel.constant(float(m.group(1)))
    return load_kernel(spec)


def load_spectrum(path: str) -> Spectrum:
    return Spectrum.from_dict(json.loads(Path(path).read_text()))


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return repr(x)


def _clean(obj):
    """JSON-safe copy: non-finite floats become the strings inf / -inf / nan."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (float, np.floating)) and not math.isfinite(obj):
        return _fmt(obj)
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def _emit(obj, out: str | None = None):
    text = json.dumps(_clean(obj), indent=2, sort_keys=True) + "\n"
    if out:
        Path(out).write_text(text)
    sys.stdout.write(text)


def _csv_text(cfg: ExperimentConfig, columns, rows) -> str:
    buf = io.StringIO()
    seeds = ",".join(str(s) for s in cfg.seeds)
    buf.write(f"# matrixldp {__version__} config_sha256={cfg.config_hash()} seeds={seeds}\n")
    buf.write(",".join(columns) + "\n")
    for row in rows:
        buf.write(",".join(_fmt(row[c]) for c in columns) + "\n")
    return buf.getvalue()


def _write_run(cfg, name, columns, rows):
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.json").write_text(cfg.to_json())
    path = out / name
    path.write_text(_csv_text(cfg, columns, rows))
    return path


SWEEP_COLUMNS = [
    "n", "samples", "hit_count", "rate_estimate", "std_error_log", "I_target",
    "ell", "delta", "seed", "ess", "I_target_ell", "trunc_mean", "trunc_tail",
]


def _trunc_diagnostics(law, n, ell, eps, count, seed, workers):
    """Mean of ``Δ(ℓ) = ||f_ℓ(k) - k||_HS^2`` and the frequency of ``Δ(ℓ) >= eps``."""
    if count == 0:
        return math.nan, math.nan

    def one(i):
        x = sample_matrix(law, n, seed, i)
        return truncate(StepKernel.uniform(x), ell)[1]

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            vals = np.array(list(pool.map(one, range(count))))
    else:
        vals = np.array([one(i) for i in range(count)])
    return float(np.mean(vals)), float(np.mean(vals >= eps))


def run_ldp_sweep(cfg: ExperimentConfig, workers: int = 1) -> Path:
    """Kernel-ball IS estimates for each (seed, n); rows are flushed per n."""
    cfg.validate()
    law = parse_law(cfg.law)
    profile = RateProfile(law)
    f = load_target(cfg.target)
    plan = build_plan(f, profile)
    i_target = rate_primal(f, profile)
    i_ell = rate_truncated(f, profile, cfg.ell)
    rows = []
    path = None
    for seed in cfg.seeds:
        for n in cfg.n_values:
            try:
                est = estimate_kernel_event(
                    law, f, cfg.delta, n, cfg.samples, seed, plan=plan, workers=workers,
                    restarts=cfg.restarts, exact_cap=cfg.exact_cap,
                    audit_fraction=cfg.audit_fraction,
                )
            except ZeroHits as e:
                est = e.estimate
            tm, tt = _trunc_diagnostics(law, n, cfg.ell, cfg.eps, cfg.trunc_samples,
                                        seed, workers)
            rows.append({
                "n": n, "samples": est.samples, "hit_count": est.hit_count,
                "rate_estimate": est.rate_estimate, "std_error_log": est.std_error_log,
                "I_target": i_target, "ell": cfg.ell, "delta": cfg.delta, "seed": seed,
                "ess": est.ess, "I_target_ell": i_ell, "trunc_mean": tm, "trunc_tail": tt,
            })
            path = _write_run(cfg, "ldp_sweep.csv", SWEEP_COLUMNS, rows)
    return path


BASELINE_COLUMNS = ["seed", "n", "ks_distance", "lambda_max_over_n", "law_mean", "sigma"]


def run_baselines(cfg: ExperimentConfig, workers: int = 1) -> Path:
    """Semicircle KS distance at sqrt(n) scale and lambda_max / n per (seed, n).

    The KS distance uses the centered matrix and the law's standard deviation.
    """
    cfg.validate()
    law = parse_law(cfg.law)
    sigma = math.sqrt(law.variance)
    jobs = [(s, n) for s in cfg.seeds for n in cfg.n_values]

    def one(job):
        seed, n = job
        x = sample_matrix(law, n, seed)
        eigs = eig_symmetric(x, "lapack")
        ks = semicircle_check(
            eig_symmetric(x - law.mean, "lapack") / math.sqrt(n), sigma
        ) if sigma > 0 else math.nan
        return {"seed": seed, "n": n, "ks_distance": ks,
                "lambda_max_over_n": float(eigs[-1]) / n, "law_mean": law.mean,
                "sigma": sigma}

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            rows = list(pool.map(one, jobs))
    else:
        rows = [one(j) for j in jobs]
    return _write_run(cfg, "baselines.csv", BASELINE_COLUMNS, rows)


def _config_from_args(args) -> ExperimentConfig:
    cfg = (ExperimentConfig.from_json(Path(args.config).read_text())
           if args.config else ExperimentConfig())
    for name in ("law", "target", "samples", "delta", "eps", "ell", "n_values", "seeds"):
        v = getattr(args, name, None)
        if v is not None:
            setattr(cfg, name, v)
    cfg.output_dir = args.output_dir or _default_output_dir()
    return cfg


def _cmd_sample(args):
    law = parse_law(args.law)
    if args.target:
        plan = build_plan(load_target(args.target), RateProfile(law))
        x, lr = sample_tilted(plan, args.n, args.seed, args.index)
        header = f"# log_likelihood_ratio={_fmt(lr)}\n"
    else:
        x, header = sample_matrix(law, args.n, args.seed, args.index), ""
    text = header + "\n".join(",".join(_fmt(v) for v in row) for row in x) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)


def _cmd_rate(args):
    k = load_target(args.kernel)
    profile = RateProfile(parse_law(args.law))
    g = load_target(args.dual_g) if args.dual_g else None
    out = rate_report(k, profile, g).to_dict()
    if args.ell is not None:
        out["truncated"] = rate_truncated(k, profile, args.ell)
        out["ell"] = args.ell
    _emit(out, args.out)


def _cmd_cutdist(args):
    k1, k2 = load_target(args.a), load_target(args.b)
    if args.mode == "quotient":
        val, perm = quotient_cut_distance(k1, k2, "exact", args.seed)
        _emit({"distance": val, "permutation": perm.tolist()}, args.out)
        return
    if args.mode == "quotient-local":
        val, perm = quotient_cut_distance(k1, k2, "local_search", args.seed)
        _emit({"distance": val, "permutation": perm.tolist()}, args.out)
        return
    if args.mode == "exact":
        val, w = cut_distance_exact(k1, k2, workers=args.workers)
    elif args.mode == "heuristic":
        val, w = cut_distance_heuristic(k1, k2, args.restarts, args.seed)
    else:
        val, w = cut_distance(k1, k2, restarts=args.restarts, seed=args.seed)
    _emit({"distance": val, "witness": w.to_dict(), "mode": args.mode}, args.out)


def _parse_range(text: str) -> list[int]:
    if ".." in text:
        lo, hi = text.split("..")
        return list(range(int(lo), int(hi) + 1))
    return [int(t) for t in text.split(",")]


def _cmd_spectrum(args):
    k = load_target(args.kernel)
    s = spectrum_of_kernel(k)
    out = {"eigenvalues": list(s.eigenvalues)}
    if args.moments:
        out["moments"] = {str(p): trace_moment(k, p) for p in _parse_range(args.moments)}
    if args.semicircle is not None:
        # sqrt(m) rescales kernel eigenvalues (eig(X) / m) to eig(X) / sqrt(m)
        eigs = eig_symmetric(kernel_matrix(k)) * math.sqrt(k.m)
        out["ks_distance"] = semicircle_check(eigs, args.semicircle)
    _emit(out, args.out)


def _cmd_tilt_estimate(args):
    law = parse_law(args.law)
    if args.spectrum:
        est = estimate_spectrum_event(law, load_spectrum(args.spectrum), args.delta,
                                      args.n, args.samples, args.seed, workers=args.workers)
    else:
        est = estimate_kernel_event(law, load_target(args.target), args.delta, args.n,
                                    args.samples, args.seed, workers=args.workers)
    out = est.to_dict()
    if args.csv:
        path = Path(args.csv)
        cols = list(out)
        new = not path.exists()
        with path.open("a") as fh:
            if new:
                fh.write(f"# matrixldp {__version__} seed={args.seed}\n")
                fh.write(",".join(cols) + "\n")
            fh.write(",".join(_fmt(out[c]) for c in cols) + "\n")
    _emit(out, args.out)


def _cmd_jsolve(args):
    profile = RateProfile(parse_law(args.law))
    problem = JProblem(load_spectrum(args.spectrum), args.grid, profile,
                       restarts=args.restarts)
    j, k, residual = solve_j(problem, args.seed, workers=args.workers)
    out_dir = Path(args.output_dir or _default_output_dir())
    out_dir.mkdir(parents=True, exist_ok=True)
    kfile = out_dir / args.kernel_file
    save_kernel(k, kfile)
    _emit({"J": j, "kernel_file": str(kfile), "residual": residual,
           "restarts_used": args.restarts}, args.out)


def _cmd_regularize(args):
    k = load_target(args.kernel)
    try:
        res = weak_regularize(k, args.eps, args.max_parts, args.seed)
    except BudgetExceeded as e:
        if e.result is not None:
            sys.stderr.write(json.dumps(_clean(e.result.to_dict())) + "\n")
        raise
    _emit(res.to_dict(), args.out)


def _cmd_sweep(args, runner):
    cfg = _config_from_args(args)
    path = runner(cfg, workers=args.workers)
    sys.stdout.write(f"{path}\n")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="matrixldp", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"matrixldp {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--workers", type=int, default=1)
    common.add_argument("--out", help="also write the JSON result here")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("sample", parents=[common], help="draw a base or tilted matrix")
    s.add_argument("--law", required=True)
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--index", type=int, default=0, help="sample index within the seed")
    s.add_argument("--target", help="tilt toward this kernel (file or constant(c))")
    s.set_defaults(func=_cmd_sample)

    s = sub.add_parser("rate", parents=[common], help="rate functional of a kernel")
    s.add_argument("--kernel", required=True)
    s.add_argument("--law", required=True)
    s.add_argument("--ell", type=float)
    s.add_argument("--dual-g")
    s.set_defaults(func=_cmd_rate)

    s = sub.add_parser("cutdist", parents=[common], help="cut distance of two kernels")
    s.add_argument("a")
    s.add_argument("b")
    s.add_argument("--mode", default="auto",
                   choices=["auto", "exact", "heuristic", "quotient", "quotient-local"])
    s.add_argument("--restarts", type=int, default=50)
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=_cmd_cutdist)

    s = sub.add_parser("spectrum", parents=[common], help="spectrum and trace moments")
    s.add_argument("--kernel", required=True)
    s.add_argument("--moments", help="powers, e.g. 2..6 or 2,4")
    s.add_argument("--semicircle", type=float, metavar="SIGMA")
    s.set_defaults(func=_cmd_spectrum)

    s = sub.add_parser("tilt-estimate", parents=[common], help="rare-event IS estimate")
    s.add_argument("--law", required=True)
    s.add_argument("--target", default="constant(0.5)")
    s.add_argument("--spectrum", help="spectral event target (JSON eigenvalues)")
    s.add_argument("--delta", type=float, required=True)
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--samples", type=int, default=10_000)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--csv", help="append the estimate as a CSV row")
    s.set_defaults(func=_cmd_tilt_estimate)

    s = sub.add_parser("jsolve", parents=[common], help="contracted rate J(S)")
    s.add_argument("--law", required=True)
    s.add_argument("--spectrum", required=True)
    s.add_argument("--grid", type=int, required=True)
    s.add_argument("--restarts", type=int, default=32)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--output-dir")
    s.add_argument("--kernel-file", default="k_star.json")
    s.set_defaults(func=_cmd_jsolve)

    s = sub.add_parser("regularize", parents=[common], help="weak regularity partition")
    s.add_argument("--kernel", required=True)
    s.add_argument("--eps", type=float, required=True)
    s.add_argument("--max-parts", type=int, default=256)
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=_cmd_regularize)

    for name, runner, help_ in [("ldp-sweep", run_ldp_sweep, "IS sweep over n"),
                                ("baselines", run_baselines, "semicircle and mean shift")]:
        s = sub.add_parser(name, parents=[common], help=help_)
        s.add_argument("--config", help="ExperimentConfig JSON")
        s.add_argument("--law")
        s.add_argument("--target")
        s.add_argument("--n-values", dest="n_values", type=int, nargs="+")
        s.add_argument("--seeds", type=int, nargs="+")
        s.add_argument("--samples", type=int)
        s.add_argument("--delta", type=float)
        s.add_argument("--eps", type=float)
        s.add_argument("--ell", type=float)
        s.add_argument("--output-dir")
        s.set_defaults(func=lambda a, r=runner: _cmd_sweep(a, r))
    return p


_CONFIG_ERRORS = (ValueError, KeyError, OSError, json.JSONDecodeError, OutOfHull,
                  AsymmetricInput, NonUniformGrid, InfeasibleGrid, TooLarge, TypeError)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.func(args)
    except (ZeroHits, BudgetExceeded) as e:
        sys.stderr.write(f"matrixldp: {e}\n")
        return EXIT_ACTIONABLE
    except _CONFIG_ERRORS as e:
        sys.stderr.write(f"matrixldp: {type(e).__name__}: {e}\n")
        return EXIT_CONFIG
    except Exception as e:  # noqa: BLE001
        sys.stderr.write(f"matrixldp: internal error: {type(e).__name__}: {e}\n")
        return EXIT_INTERNAL
    return EXIT_OK
