"""Command-line interface: simulate, fit, summarize and baseline subcommands.

Exit codes: 0 success, 1 input/validation error, 2 numerical failure. Output
files land in --outdir, the COMBOFIT_OUTDIR environment variable, or the
working directory, in that order of precedence; config-file values sit between
built-in defaults and explicit flags. Partial outputs are removed on failure.
"""

import argparse
import os
import sys
from dataclasses import dataclass
from pathlib import Path

from . import io as cio
from .baselines import BASELINE_METHODS, baseline_delta
from .data import LogConcGrid, SurfaceGrid
from .errors import CombofitError, ValidationError
from .mcmc import ChainConfig, chain_from_states, run_chains
from .model import GammaPrior, HalfCauchyPrior, InverseGammaPrior, PriorSpec
from .simulate import SimScenario, sample_plate
from .splines import SplineSpec
from .summaries import mse_surface, summarize_chains

OUTDIR_ENV = "COMBOFIT_OUTDIR"

FIT_DEFAULTS = {
    "iters": 100_000,
    "burn_in": None,
    "thin": 10,
    "adapt_start": 1000,
    "seed": 0,
    "chains": 1,
    "k1": 6,
    "k2": 6,
    "degree": 3,
    "ridge": 1e-4,
    "variance_prior": "hc",
    "hc_scale": 1.0,
    "ig_shape": 3.0,
    "ig_rate": 2.0,
    "lambda_shape": 0.01,
    "lambda_rate": 0.01,
    "b_shape": 0.01,
    "b_rate": 0.01,
    "linear_scale": "log10",
    "dss_threshold": 0.10,
    "bi_ec50_tolerance": 0.01,
    "fine_points": 100,
    "swap_interaction_labels": False,
}

_INT_KEYS = {"iters", "burn_in", "thin", "adapt_start", "seed", "chains",
             "k1", "k2", "degree", "fine_points"}


@dataclass(frozen=True)
class RunConfig:
    """Resolved options of one fit run."""

    iters: int
    burn_in: object
    thin: int
    adapt_start: int
    seed: int
    chains: int
    k1: int
    k2: int
    degree: int
    ridge: float
    variance_prior: str
    hc_scale: float
    ig_shape: float
    ig_rate: float
    lambda_shape: float
    lambda_rate: float
    b_shape: float
    b_rate: float
    linear_scale: str
    dss_threshold: float
    bi_ec50_tolerance: float
    fine_points: int
    swap_interaction_labels: bool

    def chain_config(self) -> ChainConfig:
        return ChainConfig(n_iter=self.iters, burn_in=self.burn_in, thin=self.thin,
                           adapt_start=self.adapt_start, seed=self.seed)

    def prior_spec(self) -> PriorSpec:
        if self.variance_prior == "hc":
            var_prior = HalfCauchyPrior(self.hc_scale)
        elif self.variance_prior == "ig":
            var_prior = InverseGammaPrior(self.ig_shape, self.ig_rate)
        else:
            raise ValidationError("variance_prior must be 'hc' or 'ig'")
        lam = GammaPrior(self.lambda_shape, self.lambda_rate)
        slope = GammaPrior(self.b_shape, self.b_rate)
        return PriorSpec(lambda1=lam, lambda2=lam, b1=slope, b2=slope,
                         variance_prior=var_prior, spline_penalty_ridge=self.ridge)

    def to_json_dict(self) -> dict:
        return {key: getattr(self, key) for key in FIT_DEFAULTS}


class _Parser(argparse.ArgumentParser):
    """argparse that reports usage problems as validation errors (exit 1)."""

    def error(self, message):
        raise ValidationError(message)


def _resolve_outdir(flag_value) -> Path:
    outdir = flag_value or os.environ.get(OUTDIR_ENV) or "."
    path = Path(outdir)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _merge_options(args, defaults: dict) -> dict:
    """defaults < config file < explicit CLI flags."""
    merged = dict(defaults)
    config_path = getattr(args, "config", None)
    if config_path:
        file_values = cio.read_json(config_path)
        unknown = set(file_values) - set(defaults)
        if unknown:
            raise ValidationError(f"unknown config keys: {sorted(unknown)}")
        merged.update(file_values)
    for key in defaults:
        flag_value = getattr(args, key, None)
        if flag_value is not None:
            merged[key] = flag_value
    for key in _INT_KEYS:
        if key in merged and merged[key] is not None:
            merged[key] = int(merged[key])
    return merged


class _OutputSet:
    """Tracks written files so a failed run leaves no partial output."""

    def __init__(self, outdir: Path):
        self.outdir = outdir
        self.written = []

    def path(self, name: str) -> Path:
        path = self.outdir / name
        self.written.append(path)
        return path

    def discard(self):
        for path in self.written:
            try:
                path.unlink()
            except OSError:
                pass


# ---------------------------------------------------------------------------
# Subcommands


def _add_model_flags(sub):
    sub.add_argument("--k1", type=int, help="spline basis size, drug 1 axis")
    sub.add_argument("--k2", type=int, help="spline basis size, drug 2 axis")
    sub.add_argument("--degree", type=int, help="spline degree")
    sub.add_argument("--ridge", type=float, help="penalty precision ridge")
    sub.add_argument("--linear-scale", dest="linear_scale",
                     choices=("log10", "natural"),
                     help="scale of the linear predictor terms")


def _add_summary_flags(sub):
    sub.add_argument("--dss-threshold", dest="dss_threshold", type=float)
    sub.add_argument("--bi-ec50-tolerance", dest="bi_ec50_tolerance", type=float)
    sub.add_argument("--fine-points", dest="fine_points", type=int)
    sub.add_argument("--swap-interaction-labels", dest="swap_interaction_labels",
                     action="store_const", const=True,
                     help="swap the synergistic/antagonistic naming of the "
                          "interaction volumes")


def build_parser() -> _Parser:
    parser = _Parser(prog="combofit",
                     description="Bayesian dose-response surfaces for drug combinations")
    subs = parser.add_subparsers(dest="command", required=True)

    fit = subs.add_parser("fit", help="run the MCMC fit on a plate CSV")
    fit.add_argument("--input", required=True, help="plate CSV")
    fit.add_argument("--outdir")
    fit.add_argument("--config", help="JSON file with default overrides")
    fit.add_argument("--truth", help="truth CSV from simulate; adds mse.json")
    fit.add_argument("--iters", type=int)
    fit.add_argument("--burn-in", dest="burn_in", type=int)
    fit.add_argument("--thin", type=int)
    fit.add_argument("--adapt-start", dest="adapt_start", type=int)
    fit.add_argument("--seed", type=int)
    fit.add_argument("--chains", type=int)
    fit.add_argument("--variance-prior", dest="variance_prior", choices=("hc", "ig"))
    fit.add_argument("--hc-scale", dest="hc_scale", type=float)
    fit.add_argument("--ig-shape", dest="ig_shape", type=float)
    fit.add_argument("--ig-rate", dest="ig_rate", type=float)
    fit.add_argument("--lambda-shape", dest="lambda_shape", type=float)
    fit.add_argument("--lambda-rate", dest="lambda_rate", type=float)
    fit.add_argument("--b-shape", dest="b_shape", type=float)
    fit.add_argument("--b-rate", dest="b_rate", type=float)
    _add_model_flags(fit)
    _add_summary_flags(fit)

    sim = subs.add_parser("simulate", help="generate a synthetic plate with truth")
    sim.add_argument("--scenario", type=int, required=True, choices=(1, 2, 3))
    sim.add_argument("--noise", choices=("normal", "t5"), default="normal")
    sim.add_argument("--nrep", type=int, default=3)
    sim.add_argument("--sigma-eps", dest="sigma_eps", type=float, default=0.05)
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--outdir")

    summ = subs.add_parser("summarize", help="recompute summaries from a samples CSV")
    summ.add_argument("--input", required=True, help="plate CSV of the original fit")
    summ.add_argument("--samples", required=True, help="samples CSV of the original fit")
    summ.add_argument("--outdir")
    summ.add_argument("--config", help="JSON file with default overrides")
    _add_model_flags(summ)
    _add_summary_flags(summ)

    base = subs.add_parser("baseline", help="classical reference surfaces")
    base.add_argument("--input", required=True, help="plate CSV")
    base.add_argument("--method", action="append", choices=BASELINE_METHODS,
                      help="repeatable; default: all methods")
    base.add_argument("--truth", help="truth CSV from simulate; adds MSE entries")
    base.add_argument("--outdir")
    return parser


def _surface_from_values(values, grid: LogConcGrid, label: str) -> SurfaceGrid:
    return SurfaceGrid(values=values, axis1=grid.logc1, axis2=grid.logc2, label=label)


def _check_truth_axes(truth: dict, grid: LogConcGrid):
    import numpy as np

    delta = truth["delta"]
    if (delta.axis1.size != grid.logc1.size or delta.axis2.size != grid.logc2.size
            or not np.allclose(delta.axis1, grid.logc1)
            or not np.allclose(delta.axis2, grid.logc2)):
        raise ValidationError("truth grid does not match the plate grid")


def _cmd_fit(args) -> int:
    options = _merge_options(args, FIT_DEFAULTS)
    run_cfg = RunConfig(**options)
    data = cio.ingest_plate(args.input)
    grid = LogConcGrid.from_dataset(data)
    spline = SplineSpec.for_grid(grid, k1=run_cfg.k1, k2=run_cfg.k2,
                                 degree=run_cfg.degree, penalty_ridge=run_cfg.ridge)
    chains = run_chains(data, run_cfg.chains, priors=run_cfg.prior_spec(),
                        spline=spline, config=run_cfg.chain_config(),
                        linear_scale=run_cfg.linear_scale)
    report = summarize_chains(
        chains, dss_threshold=run_cfg.dss_threshold,
        bi_ec50_tolerance=run_cfg.bi_ec50_tolerance,
        fine_points=run_cfg.fine_points,
        swap_interaction_labels=run_cfg.swap_interaction_labels)

    out = _OutputSet(_resolve_outdir(args.outdir))
    try:
        cio.write_samples_csv(out.path("samples.csv"), chains)
        mean = report.posterior_mean
        cio.write_surface_csv(out.path("surface_p.csv"),
                              _surface_from_values(mean["p"], grid, "p_mean"))
        cio.write_surface_csv(out.path("surface_p0.csv"),
                              _surface_from_values(mean["p0"], grid, "p0_mean"))
        cio.write_surface_csv(out.path("surface_delta.csv"),
                              _surface_from_values(mean["delta"], grid, "delta_mean"))
        payload = {"config": run_cfg.to_json_dict(),
                   "input": str(args.input),
                   "drug_names": list(data.drug_names),
                   "n_chains": run_cfg.chains}
        payload.update(report.to_json_dict())
        cio.write_json(out.path("summary.json"), payload)
        if args.truth:
            truth = cio.read_truth_csv(args.truth)
            _check_truth_axes(truth, grid)
            cio.write_json(out.path("mse.json"), {
                "mse_delta": mse_surface(mean["delta"], truth["delta"].values),
                "mse_p0": mse_surface(mean["p0"], truth["p0"].values),
                "mse_p": mse_surface(mean["p"], truth["p"].values),
            })
    except BaseException:
        out.discard()
        raise
    return 0


def _cmd_simulate(args) -> int:
    scenario = SimScenario(interaction_id=args.scenario, noise=args.noise,
                           n_rep=args.nrep, sigma_eps=args.sigma_eps, seed=args.seed)
    data, truths = sample_plate(scenario)
    out = _OutputSet(_resolve_outdir(args.outdir))
    try:
        cio.write_plate_csv(out.path("plate.csv"), data)
        cio.write_truth_csv(out.path("truth.csv"), truths)
    except BaseException:
        out.discard()
        raise
    return 0


def _cmd_summarize(args) -> int:
    options = _merge_options(args, FIT_DEFAULTS)
    run_cfg = RunConfig(**options)
    data = cio.ingest_plate(args.input)
    grid = LogConcGrid.from_dataset(data)
    spline = SplineSpec.for_grid(grid, k1=run_cfg.k1, k2=run_cfg.k2,
                                 degree=run_cfg.degree, penalty_ridge=run_cfg.ridge)
    samples = cio.read_samples_csv(args.samples)
    by_chain = {}
    for chain_index, state in samples:
        by_chain.setdefault(chain_index, []).append(state)
    chains = [chain_from_states(data, states, spline=spline,
                                linear_scale=run_cfg.linear_scale,
                                chain_index=chain_index)
              for chain_index, states in sorted(by_chain.items())]
    report = summarize_chains(
        chains, dss_threshold=run_cfg.dss_threshold,
        bi_ec50_tolerance=run_cfg.bi_ec50_tolerance,
        fine_points=run_cfg.fine_points,
        swap_interaction_labels=run_cfg.swap_interaction_labels)
    out = _OutputSet(_resolve_outdir(args.outdir))
    try:
        payload = {"input": str(args.input), "samples": str(args.samples)}
        payload.update(report.to_json_dict())
        cio.write_json(out.path("summary.json"), payload)
    except BaseException:
        out.discard()
        raise
    return 0


def _cmd_baseline(args) -> int:
    methods = args.method or list(BASELINE_METHODS)
    data = cio.ingest_plate(args.input)
    grid = LogConcGrid.from_dataset(data)
    truth = None
    if args.truth:
        truth = cio.read_truth_csv(args.truth)
        _check_truth_axes(truth, grid)
    out = _OutputSet(_resolve_outdir(args.outdir))
    try:
        summary = {}
        for method in methods:
            delta_hat, surface, info = baseline_delta(data, method, grid)
            cio.write_surface_csv(out.path(f"baseline_{method}.csv"), surface)
            cio.write_surface_csv(out.path(f"baseline_delta_{method}.csv"), delta_hat)
            entry = {}
            for key in ("fit1", "fit2"):
                if key in info:
                    fit = info[key]
                    entry[key] = {"m": fit.m, "lam": fit.lam, "rss": fit.rss,
                                  "lambda_at_bound": fit.lambda_at_bound}
            if "flagged_cells" in info:
                entry["flagged_cells"] = info["flagged_cells"]
            if "fell_back" in info:
                entry["fell_back"] = info["fell_back"]
            if truth is not None:
                entry["mse_delta"] = mse_surface(delta_hat.values, truth["delta"].values)
            summary[method] = entry
        cio.write_json(out.path("baseline_summary.json"), summary)
    except BaseException:
        out.discard()
        raise
    return 0


_COMMANDS = {"fit": _cmd_fit, "simulate": _cmd_simulate,
             "summarize": _cmd_summarize, "baseline": _cmd_baseline}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return _COMMANDS[args.command](args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except CombofitError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2


def entrypoint():
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
