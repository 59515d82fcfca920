"""Command-line interface.

Subcommands: simulate (write one dataset), fit (fit one model kind to a
saved dataset), experiment (run a factorial sweep), report (aggregate an
archive and render tables/figures). Exit codes: 0 success, 1 usage or
configuration error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
from pathlib import Path

from . import __version__
from .config import ConfigError, load_experiment_config, profile_config
from .dataio import load_dataset, save_dataset, save_fit
from .fields import GridSpec
from .harness import read_results, run_experiment
from .inference import fit as fit_model
from .inference import posterior_functional_draws, predict
from .metrics import abundance, mark_loglik_matrix, rmse, waic
from .models import ModelKind
from .report import report as render_report
from .sampling import make_dataset
from .scenarios import ScenarioSpec, derive_seed

__all__ = ["main"]


class _Parser(argparse.ArgumentParser):
    # usage problems exit 1, not argparse's default 2
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _build_parser() -> _Parser:
    parser = _Parser(prog="prefsim", description=__doc__)
    parser.add_argument("--version", action="version", version=f"prefsim {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="simulate one dataset and write it to files")
    sim.add_argument("--out", required=True, type=Path, help="output directory")
    sim.add_argument("--seed", type=int, default=20240601, help="master seed")
    sim.add_argument("--range", dest="spatial_range", type=float, default=0.5,
                     help="practical range of the field (domain units)")
    sim.add_argument("--prop-random", type=float, default=0.5,
                     help="fraction of samples placed uniformly")
    sim.add_argument("--n-total", type=int, default=100, help="total sample count")
    sim.add_argument("--replicate", type=int, default=0, help="replicate index")
    sim.add_argument("--grid-nx", type=int, default=32)
    sim.add_argument("--grid-ny", type=int, default=32)
    sim.add_argument("--eta", type=float, default=0.0, help="mark intercept")
    sim.add_argument("--tau", type=float, default=0.3, help="mark noise SD")
    sim.add_argument("--alpha-sim", type=float, default=1.5,
                     help="preferential sharing coefficient")
    sim.add_argument("--sigma", type=float, default=1.0, help="field marginal SD")
    sim.add_argument("--n-test", type=int, default=400, help="held-out test points")

    fitp = sub.add_parser("fit", help="fit one model kind to a saved dataset")
    fitp.add_argument("--data", required=True, type=Path,
                      help="directory written by `prefsim simulate`")
    fitp.add_argument("--model", required=True, choices=[k.value for k in ModelKind])
    fitp.add_argument("--out", required=True, type=Path, help="output directory")
    fitp.add_argument("--seed", type=int, default=0, help="start-jitter seed")
    fitp.add_argument("--waic-draws", type=int, default=1000)

    exp = sub.add_parser("experiment", help="run a factorial experiment")
    exp.add_argument("--out", required=True, type=Path, help="archive directory")
    exp.add_argument("--profile", choices=["desk", "full"], default="full",
                     help="built-in factor profile (default: full)")
    exp.add_argument("--config", type=Path,
                     help="flat YAML config; overrides profile keys")
    exp.add_argument("--seed", type=int, help="override the master seed")
    exp.add_argument("--resume", action="store_true",
                     help="skip (scenario, model) rows already archived (always on; "
                          "flag kept for explicit scripts)")
    exp.add_argument("--jobs", type=int, default=1, help="worker processes")

    rep = sub.add_parser("report", help="aggregate an archive and render tables/figures")
    rep.add_argument("--results", required=True, type=Path,
                     help="archive directory holding results.jsonl")
    rep.add_argument("--out", type=Path,
                     help="output directory (default: the archive directory)")
    return parser


def _cmd_simulate(args) -> int:
    spec = ScenarioSpec(
        spatial_range=args.spatial_range,
        prop_random=args.prop_random,
        n_total=args.n_total,
        replicate=args.replicate,
        grid=GridSpec(args.grid_nx, args.grid_ny),
        eta=args.eta,
        tau=args.tau,
        alpha_sim=args.alpha_sim,
        sigma=args.sigma,
        n_test=args.n_test,
    )
    files = save_dataset(make_dataset(spec, args.seed), args.out)
    for path in files:
        print(path)
    return 0


def _cmd_fit(args) -> int:
    d = load_dataset(args.data)
    grid = d.truth.grid
    kind = ModelKind(args.model)
    result = fit_model(kind, d, grid, seed=args.seed)

    draws = posterior_functional_draws(result, grid, args.waic_draws, args.seed + 1)
    w = waic(mark_loglik_matrix(result, d, grid, draws))
    pred = predict(result, d.test_locs, d, grid)
    extras = {
        "waic": w.waic,
        "p_eff": w.p_eff,
        "rmse": rmse(pred.mean, d.test_true),
        "abundance_ratio": abundance(draws, result.hyper_hat.eta, grid)
        / abundance(d.truth.values, d.sim_params.eta, grid),
    }
    args.out.mkdir(parents=True, exist_ok=True)
    path = save_fit(result, args.out / f"fit_{kind.value}.json", extras=extras)
    print(path)
    print(
        f"{kind.value}: log_evidence={result.log_evidence:.3f} "
        f"waic={w.waic:.2f} rmse={extras['rmse']:.4f} "
        f"abundance_ratio={extras['abundance_ratio']:.4f} "
        f"converged={result.converged}"
    )
    return 0


def _cmd_experiment(args) -> int:
    cfg = profile_config(args.profile)
    if args.config is not None:
        cfg = load_experiment_config(args.config, base=cfg)
    if args.seed is not None:
        cfg = dataclasses.replace(cfg, master_seed=args.seed)
    path = run_experiment(
        cfg, args.out, resume=True, jobs=max(1, args.jobs), progress=print
    )
    print(path)
    return 0


def _cmd_report(args) -> int:
    rows = read_results(args.results)
    outdir = args.out if args.out is not None else args.results
    for path in render_report(rows, outdir):
        print(path)
    return 0


_COMMANDS = {
    "simulate": _cmd_simulate,
    "fit": _cmd_fit,
    "experiment": _cmd_experiment,
    "report": _cmd_report,
}


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"prefsim: config error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:
        print(f"prefsim: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
