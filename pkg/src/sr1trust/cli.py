"""Command-line harness: train, solve-subproblem, bench.

Configs are flat JSON keyed by RunConfig field names; traces are CSV
with a fixed header.  Exit codes: 0 ok, 2 config error, 3 data error,
4 numerical defect.
"""

import argparse
import csv
import json
import sys
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from .dataset import load_dataset, subset
from .errors import ConfigError, DataError, NumericalError
from .lbfgs import minimize_lbfgs
from .lsr1 import CompactSR1
from .network import NetObjective, NetworkSpec, init_params
from .stochastic import BatchSchedule, MomentumState, minimize_stochastic
from .subproblem import solve_subproblem
from .trust_region import TRConfig, minimize

CSV_HEADER = [
    "iter", "wall_seconds", "train_loss", "test_loss", "grad_norm",
    "delta", "rho", "alpha", "batch_size", "full_loss",
]
METHODS = ("lsr1-tr", "lbfgs", "lssr1-tr")


@dataclass
class RunConfig:
    """Flat run description; JSON keys are exactly these field names."""

    method: str = "lsr1-tr"
    train_images: str = ""
    train_labels: str = ""
    test_images: str = ""
    test_labels: str = ""
    network: tuple = ()
    subset_size: int = 0
    test_subset_size: int = 0
    seed: int = 0
    labels_start_at_one: bool = False
    mu: float = 0.9
    time_budget_seconds: float = 0.0
    output: str = "."
    delta0: float = 1.0
    eps: float = 1e-5
    gamma0: float = 1.0
    tau1: float = 0.0
    tau2: float = 0.25
    tau3: float = 0.75
    eta1: float = 0.25
    eta2: float = 0.5
    eta3: float = 0.8
    eta4: float = 2.0
    memory: int = 8
    c1: float = 1e-4
    c2: float = 0.9
    max_iter: int = 1000
    max_ls_iter: int = 20
    n_b: int = 100
    overlap: float = 0.33
    growth: float = 1.5
    stall_tau: float = 1e-4
    full_eval_period: int = 10


def load_run_config(path):
    """Parse and validate a JSON config file into a RunConfig."""
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    known = {f.name: f for f in fields(RunConfig)}
    unknown = sorted(set(raw) - set(known))
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    coerced = {}
    for key, value in raw.items():
        default = known[key].default
        try:
            if key == "network":
                coerced[key] = tuple(int(v) for v in value)
            elif isinstance(default, bool):
                if not isinstance(value, bool):
                    raise TypeError("expected a boolean")
                coerced[key] = value
            elif isinstance(default, int):
                coerced[key] = int(value)
            elif isinstance(default, float):
                coerced[key] = float(value)
            else:
                coerced[key] = str(value)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"config key '{key}': {exc}") from exc
    cfg = RunConfig(**coerced)
    # revalidate ordering constraints up front, whatever the method
    _tr_config(cfg)
    BatchSchedule(
        n_b=cfg.n_b, overlap=cfg.overlap, growth=cfg.growth,
        stall_tau=cfg.stall_tau, full_eval_period=cfg.full_eval_period,
        rng_seed=cfg.seed,
    )
    MomentumState(mu=cfg.mu)
    return cfg


def _tr_config(cfg):
    return TRConfig(
        delta0=cfg.delta0, eps=cfg.eps, gamma0=cfg.gamma0, tau1=cfg.tau1,
        tau2=cfg.tau2, tau3=cfg.tau3, eta1=cfg.eta1, eta2=cfg.eta2,
        eta3=cfg.eta3, eta4=cfg.eta4, memory=cfg.memory, c1=cfg.c1,
        c2=cfg.c2, max_iter=cfg.max_iter, max_ls_iter=cfg.max_ls_iter,
    )


def _load_objectives(cfg):
    if not cfg.network or len(cfg.network) < 2:
        raise ConfigError("config needs a 'network' list of at least two widths")
    spec = NetworkSpec(cfg.network)
    if not cfg.train_images or not cfg.train_labels:
        raise ConfigError("config needs train_images and train_labels paths")
    train = load_dataset(
        cfg.train_images, cfg.train_labels, spec.n_classes,
        labels_start_at_one=cfg.labels_start_at_one,
    )
    if cfg.subset_size:
        train = subset(train, cfg.subset_size, cfg.seed)
    try:
        train_obj = NetObjective(spec, train.x, train.y_onehot)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    test_obj = None
    if cfg.test_images and cfg.test_labels:
        test = load_dataset(
            cfg.test_images, cfg.test_labels, spec.n_classes,
            labels_start_at_one=cfg.labels_start_at_one,
        )
        if cfg.test_subset_size:
            test = subset(test, cfg.test_subset_size, cfg.seed + 1)
        test_obj = NetObjective(spec, test.x, test.y_onehot)
    return spec, train_obj, test_obj


def _run_method(method, cfg, spec, train_obj, test_obj, time_budget):
    if method not in METHODS:
        raise ConfigError(f"unknown method '{method}' (expected one of {METHODS})")
    w0 = init_params(spec, cfg.seed)
    tr_cfg = _tr_config(cfg)
    test_losses = {}

    def callback(k, w, _record):
        if test_obj is not None and (k + 1) % cfg.full_eval_period == 0:
            test_losses[k] = test_obj.value(w)

    if method == "lsr1-tr":
        result = minimize(train_obj, w0, tr_cfg, callback=callback,
                          time_budget=time_budget)
    elif method == "lbfgs":
        result = minimize_lbfgs(train_obj, w0, tr_cfg, callback=callback,
                                time_budget=time_budget)
    else:
        sched = BatchSchedule(
            n_b=cfg.n_b, overlap=cfg.overlap, growth=cfg.growth,
            stall_tau=cfg.stall_tau, full_eval_period=cfg.full_eval_period,
            rng_seed=cfg.seed,
        )
        result = minimize_stochastic(
            train_obj, w0, tr_cfg, sched=sched, mom=MomentumState(mu=cfg.mu),
            callback=callback, time_budget=time_budget,
        )
    return result, test_losses


def _fmt(value):
    return "" if value is None else repr(float(value))


def _write_trace(path, trace, test_losses, period, fill_full_from_f):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_HEADER)
        for rec in trace:
            full = rec.full_loss
            if full is None and fill_full_from_f and (rec.iter + 1) % period == 0:
                full = rec.f
            writer.writerow([
                rec.iter, _fmt(rec.wall_seconds), _fmt(rec.f),
                _fmt(test_losses.get(rec.iter)), _fmt(rec.grad_norm),
                _fmt(rec.delta), _fmt(rec.rho), _fmt(rec.alpha),
                rec.batch_size, _fmt(full),
            ])


def _train_like(cfg, methods, out_dir, time_budget):
    spec, train_obj, test_obj = _load_objectives(cfg)
    out_dir.mkdir(parents=True, exist_ok=True)
    for method in methods:
        result, test_losses = _run_method(
            method, cfg, spec, train_obj, test_obj, time_budget
        )
        trace_path = out_dir / f"trace_{method}.csv"
        _write_trace(trace_path, result.trace, test_losses,
                     cfg.full_eval_period, fill_full_from_f=method != "lssr1-tr")
        final_full = train_obj.value(result.w)
        print(
            f"{method}: iterations={result.iterations} "
            f"train_loss={final_full:.6f} grad_norm={result.grad_norm:.3e} "
            f"converged={str(result.converged).lower()} trace={trace_path}"
        )
    return 0


def _cmd_train(args):
    cfg = _apply_overrides(load_run_config(args.config), args)
    return _train_like(
        cfg, [cfg.method], Path(cfg.output), _budget(cfg)
    )


def _cmd_bench(args):
    cfg = _apply_overrides(load_run_config(args.config), args)
    return _train_like(cfg, list(METHODS), Path(cfg.output), _budget(cfg))


def _budget(cfg):
    return cfg.time_budget_seconds if cfg.time_budget_seconds > 0 else None


def _apply_overrides(cfg, args):
    if args.seed is not None:
        cfg.seed = int(args.seed)
    if args.output is not None:
        cfg.output = args.output
    if args.time_budget is not None:
        cfg.time_budget_seconds = float(args.time_budget)
    return cfg


def _cmd_solve_subproblem(args):
    try:
        with open(args.fixture) as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read fixture {args.fixture}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"fixture is not valid JSON: {exc}") from exc
    try:
        g = np.asarray(raw["g"], dtype=float)
        delta = float(raw["delta"])
        gamma = float(raw["gamma"])
        psi = np.asarray(raw.get("psi", []), dtype=float)
        minv = np.asarray(raw.get("minv", []), dtype=float)
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad fixture field: {exc}") from exc
    if psi.size == 0:
        psi = np.zeros((g.size, 0))
        minv = np.zeros((0, 0))
    b = CompactSR1(gamma, psi, minv)
    sol = solve_subproblem(b, g, delta)
    p_norm = float(np.sqrt(sol.p_star @ sol.p_star))
    print(f"sigma_star={sol.sigma_star!r}")
    print(f"p_norm={p_norm!r}")
    print(f"q_value={sol.q_value!r}")
    print(f"hard_case={str(sol.hard_case).lower()}")
    print(f"newton_iters={sol.newton_iters}")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="sr1trust",
        description="Limited-memory SR1 trust-region training harness",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, handler, path_help in (
        ("train", _cmd_train, "JSON run config"),
        ("solve-subproblem", _cmd_solve_subproblem, "JSON subproblem fixture"),
        ("bench", _cmd_bench, "JSON run config (method field ignored)"),
    ):
        p = sub.add_parser(name)
        p.add_argument(
            "config" if name != "solve-subproblem" else "fixture", help=path_help
        )
        p.add_argument("--output", help="output directory for traces")
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--time-budget", type=float,
                       help="wall-clock budget in seconds")
        p.set_defaults(handler=handler)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.handler(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except NumericalError as exc:
        print(f"numerical defect: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
