"""Command-line interface tying the library together.

Every run validates its configuration up front, takes an exclusive lock
on the output directory, writes CSV artifacts plus SVG figures, and
leaves a manifest sufficient to reproduce the run.  Exit codes: 0 on
success, 2 for configuration errors, 3 for data errors, 4 for numerical
failures.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import asdict, dataclass, fields

import numpy as np

from . import bench, plots
from .data import Dataset, load_dataset
from .diagnostics import (Population, chen_assumption_suite, jacobian,
                          kl_oracle_fstar, markov_chain_from_jacobian,
                          phi_mean_map)
from .engine import (FiniteMixture, MixingVector, SupportSet, WeightSchedule,
                     pr_run, pr_run_averaged)
from .errors import (ConfigError, DataFormatError, DegenerateDataError,
                     DomainError, NumericalError, PrmixError)
from .kernels import Family, Kernel
from .reports import (output_lock, read_estimate, write_csv, write_estimate,
                      write_manifest)
from .select import AnnealConfig, GridSpec, anneal_select, exhaustive_select, refit

MODES = ("fit", "select", "bench-rate", "diagnose", "simulate", "plot")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4


@dataclass
class RunConfig:
    """Normalized settings for one CLI run."""

    mode: str
    out: str | None = None
    data: str | None = None
    format: str = "values"
    kernel: str | None = None
    sigma: float = 1.0
    grid: str | None = None
    include: tuple = ()
    gamma: float = 0.9
    seed: int = 0
    select_mode: str = "anneal"
    t0: float | None = None
    rho: float = 0.95
    steps: int = 50
    cap: int = 5000
    t_min: float = 1e-9
    permutations: int = 1
    shuffle: int | None = None
    drop_tail_bin: bool = False
    scenario: str | None = None
    support: str | None = None
    weights: str | None = None
    n: int | None = None
    gammas: str = "0.6,0.9"
    seeds: int = 20
    bench_cells: str | None = None
    estimate: str | None = None

    def validate(self) -> None:
        if self.mode not in MODES:
            raise ConfigError(f"unknown mode {self.mode!r}")
        needs_out = self.mode in ("fit", "select", "bench-rate", "diagnose", "simulate", "plot")
        if needs_out and not self.out:
            raise ConfigError("--out is required")
        if self.mode in ("fit", "select"):
            for name in ("data", "kernel", "grid"):
                if not getattr(self, name):
                    raise ConfigError(f"--{name} is required for mode {self.mode}")
        if self.mode == "bench-rate" and not self.scenario:
            raise ConfigError("--scenario is required for bench-rate")
        if self.mode == "diagnose" and not self.scenario:
            if not (self.kernel and self.support and self.weights and self.grid):
                raise ConfigError(
                    "diagnose needs --scenario, or --kernel/--support/--weights/--grid")
        if self.mode == "simulate":
            if self.n is None or self.n < 1:
                raise ConfigError("--n must be a positive count")
            if not self.scenario and not (self.kernel and self.support and self.weights):
                raise ConfigError("simulate needs --scenario or --kernel/--support/--weights")
        if self.mode == "plot" and not (self.bench_cells or self.estimate):
            raise ConfigError("plot needs --bench-cells and/or --estimate")
        if self.select_mode not in ("anneal", "exhaustive"):
            raise ConfigError(f"unknown selection mode {self.select_mode!r}")
        if self.kernel is not None and self.kernel not in tuple(f.value for f in Family):
            raise ConfigError(f"unknown kernel family {self.kernel!r}")
        if self.format not in ("values", "frequency"):
            raise ConfigError(f"unknown data format {self.format!r}")
        if self.permutations < 1:
            raise ConfigError("--permutations must be >= 1")
        try:
            WeightSchedule(self.gamma)
        except DomainError as exc:
            raise ConfigError(str(exc)) from None


def _parse_float_list(text: str, what: str) -> np.ndarray:
    try:
        vals = np.array([float(t) for t in text.split(",") if t.strip() != ""])
    except ValueError:
        raise ConfigError(f"could not parse {what} list {text!r}") from None
    if vals.size == 0:
        raise ConfigError(f"empty {what} list")
    return vals


def _build_grid(cfg: RunConfig) -> GridSpec:
    try:
        if ":" in cfg.grid:
            return GridSpec.from_string(cfg.grid, include=cfg.include)
        pts = _parse_float_list(cfg.grid, "grid")
        if len(cfg.include):
            pts = np.union1d(pts, np.asarray(cfg.include, dtype=float))
        return GridSpec.from_points(pts)
    except DomainError as exc:
        raise ConfigError(str(exc)) from None


def _build_kernel(cfg: RunConfig) -> Kernel:
    try:
        return Kernel(Family(cfg.kernel), cfg.sigma)
    except DomainError as exc:
        raise ConfigError(str(exc)) from None


def _load_data(cfg: RunConfig) -> Dataset:
    ds = load_dataset(cfg.data, fmt=cfg.format, expand_tail=not cfg.drop_tail_bin)
    if cfg.shuffle is not None:
        ds = ds.shuffled(cfg.shuffle)
    return ds


def _model_from_config(cfg: RunConfig) -> tuple[FiniteMixture, SupportSet]:
    if cfg.scenario:
        sc = bench.scenario_by_name(cfg.scenario)
        return sc.model, sc.fit_support
    kernel = _build_kernel(cfg)
    support = SupportSet(_parse_float_list(cfg.support, "support"))
    weights = _parse_float_list(cfg.weights, "weights")
    try:
        model = FiniteMixture(kernel=kernel, mixing=MixingVector(support, weights))
    except DomainError as exc:
        raise ConfigError(str(exc)) from None
    fit = SupportSet(_build_grid(cfg).points) if cfg.grid else support
    return model, fit


# ---------------------------------------------------------------------------
# mode implementations
# ---------------------------------------------------------------------------


def _run_fit(cfg: RunConfig, out) -> dict:
    ds = _load_data(cfg)
    kernel = _build_kernel(cfg)
    support = SupportSet(_build_grid(cfg).points)
    schedule = WeightSchedule(cfg.gamma)
    if cfg.permutations == 1:
        mixing = pr_run(ds.values, kernel, support, schedule).final
    else:
        mixing = pr_run_averaged(ds.values, kernel, support, schedule,
                                 n_permutations=cfg.permutations, seed=cfg.seed)
    write_estimate(out / "estimate.csv", mixing)
    mixture = FiniteMixture(kernel=kernel, mixing=mixing)
    plots.save_mixing_plot(mixing, out / "fit_mixing.svg")
    plots.save_mixture_plot(mixture, ds.values, out / "fit_mixture.svg")
    return {"n": ds.n, "dataset": ds.label, "support_size": len(support)}


def _run_select(cfg: RunConfig, out) -> dict:
    ds = _load_data(cfg)
    kernel = _build_kernel(cfg)
    grid = _build_grid(cfg)
    schedule = WeightSchedule(cfg.gamma)
    if cfg.select_mode == "exhaustive":
        result = exhaustive_select(ds.values, kernel, grid, schedule)
        write_csv(out / "selection_table.csv", ["support", "objective"],
                  ((";".join(repr(p) for p in pts), val) for pts, val in result.table))
    else:
        anneal_cfg = AnnealConfig(t0=cfg.t0, rho=cfg.rho, steps_per_temp=cfg.steps,
                                  max_evals=cfg.cap, seed=cfg.seed, t_min=cfg.t_min)
        result = anneal_select(ds.values, kernel, grid, schedule, anneal_cfg)
        write_csv(out / "anneal_trace.csv",
                  ["proposal", "temperature", "candidate_size", "candidate_value",
                   "accepted", "current_value", "best_value", "evaluations"],
                  result.anneal_trace)
    mixing, mixture = refit(ds.values, kernel, result.best, schedule)
    write_estimate(out / "estimate.csv", mixing)
    plots.save_mixing_plot(mixing, out / "fit_mixing.svg")
    plots.save_mixture_plot(mixture, ds.values, out / "fit_mixture.svg")
    return {
        "n": ds.n,
        "dataset": ds.label,
        "selected_support": [float(p) for p in result.best.points],
        "objective": result.best_value,
        "evaluations": result.n_evaluations,
        "capped": result.capped,
    }


def _run_bench(cfg: RunConfig, out) -> dict:
    sc = bench.scenario_by_name(cfg.scenario)
    gammas = tuple(float(g) for g in cfg.gammas.split(","))
    exp = bench.RateExperiment(scenario=sc, gammas=gammas, n_seeds=cfg.seeds,
                               base_seed=cfg.seed if cfg.seed else 1000)
    report = bench.rate_experiment(exp)
    write_csv(out / "bench_cells.csv", report.cell_fieldnames(), report.cells)
    slope_rows = []
    for s in report.summaries:
        slope_rows.append({
            "scenario": sc.name, "gamma": s.gamma,
            "slope_f": s.slope_f, "slope_f_stderr": s.slope_f_stderr,
            "slope_l1": s.slope_l1, "slope_kl": s.slope_kl,
            "reference_slope_f": s.reference_slope_f,
            "reference_slope_kl": s.reference_slope_kl,
            "report_only": sc.report_only or not report.interior,
        })
    write_csv(out / "bench_slopes.csv", list(slope_rows[0].keys()), slope_rows)
    plots.save_rate_plots(report.cells, out)
    return {"scenario": sc.name, "kstar": report.kstar, "interior": report.interior}


def _run_diagnose(cfg: RunConfig, out) -> dict:
    model, fit_support = _model_from_config(cfg)
    kernel = model.kernel
    schedule = WeightSchedule(cfg.gamma)
    pop = Population(model, fit_support, kernel)
    oracle = kl_oracle_fstar(model, fit_support, kernel, pop=pop)
    phi_norm = float(np.abs(phi_mean_map(oracle.fstar, model, kernel, pop=pop)).max())
    rows = [
        ("oracle.kstar", "", repr(oracle.kstar)),
        ("oracle.fstar", "", ";".join(repr(w) for w in oracle.fstar.weights)),
        ("oracle.interior", "", str(oracle.interior).lower()),
        ("oracle.restart_spread", "", repr(oracle.restart_spread)),
        ("equilibrium.sup_norm", "pass" if phi_norm < 1e-8 else "fail", repr(phi_norm)),
    ]
    n = cfg.n or 5000
    if oracle.interior:
        jac = jacobian(oracle.fstar, model, kernel, pop=pop)
        eigs = jac.eigenvalues
        rows.append(("jacobian.eigenvalues",
                     "pass" if bool(np.all(eigs < -1e-6)) else "fail",
                     ";".join(repr(e) for e in eigs)))
        mc = markov_chain_from_jacobian(jac)
        for name, ok in mc.checks.items():
            rows.append((f"markov.{name}", "pass" if ok else "fail", ""))
        data = bench.simulate(model, n, cfg.seed)
        trace = pr_run(data, kernel, fit_support, schedule, keep_path=True)
        chen = chen_assumption_suite(schedule, jac, trace, model, kernel, pop=pop)
        rows.extend(chen.rows())
        rows.append(("chen.passed", "pass" if chen.passed else "fail", ""))
    else:
        rows.append(("jacobian.skipped", "", "projection is on the simplex boundary"))
    write_csv(out / "diagnostics.csv", ["check", "status", "value"], rows)
    return {"scenario": cfg.scenario, "n": n, "interior": oracle.interior}


def _run_simulate(cfg: RunConfig, out) -> dict:
    model, _ = _model_from_config(cfg)
    values = bench.simulate(model, cfg.n, cfg.seed)
    write_csv(out / "sample.csv", ["value"], ([v] for v in values))
    return {"n": cfg.n, "seed": cfg.seed}


def _run_plot(cfg: RunConfig, out) -> dict:
    produced = []
    if cfg.bench_cells:
        cells = plots.read_bench_cells(cfg.bench_cells)
        produced += [str(p) for p in plots.save_rate_plots(cells, out)]
    if cfg.estimate:
        mixing = read_estimate(cfg.estimate)
        produced.append(str(plots.save_mixing_plot(mixing, out / "fit_mixing.svg")))
        if cfg.data and cfg.kernel:
            ds = _load_data(cfg)
            mixture = FiniteMixture(kernel=_build_kernel(cfg), mixing=mixing)
            produced.append(str(plots.save_mixture_plot(mixture, ds.values,
                                                        out / "fit_mixture.svg")))
    return {"figures": produced}


_MODE_RUNNERS = {
    "fit": _run_fit,
    "select": _run_select,
    "bench-rate": _run_bench,
    "diagnose": _run_diagnose,
    "simulate": _run_simulate,
    "plot": _run_plot,
}


def run(cfg: RunConfig) -> int:
    """Validate, lock the output directory, dispatch, write the manifest."""
    cfg.validate()
    started = time.time()
    with output_lock(cfg.out) as out:
        extra = _MODE_RUNNERS[cfg.mode](cfg, out)
        write_manifest(out, asdict(cfg), wall_time_s=time.time() - started,
                       extra={"result": extra})
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="prmix",
        description="Finite-mixture estimation by predictive recursion: "
                    "fitting, support selection, diagnostics, and rate benchmarks.")
    sub = parser.add_subparsers(dest="mode", required=True)

    def common(p, data=False, grid=False, anneal=False):
        p.add_argument("--out", help="output directory")
        p.add_argument("--config", help="JSON config file; overrides flags")
        p.add_argument("--gamma", type=float, default=0.9, help="gain decay exponent")
        p.add_argument("--seed", type=int, default=0)
        if data:
            p.add_argument("--data", help="data file, builtin:galaxy, or builtin:defaults")
            p.add_argument("--format", choices=("values", "frequency"), default="values")
            p.add_argument("--shuffle", type=int, default=None,
                           help="seeded permutation applied once to the data order")
            p.add_argument("--drop-tail-bin", action="store_true", dest="drop_tail_bin",
                           help="drop the truncated top bin of builtin:defaults")
        if grid:
            p.add_argument("--kernel", choices=tuple(f.value for f in Family))
            p.add_argument("--sigma", type=float, default=1.0)
            p.add_argument("--grid", help='"lower:upper:step" or comma-separated points')
            p.add_argument("--include", type=float, nargs="*", default=(),
                           help="points forced into the grid")
        if anneal:
            p.add_argument("--mode", dest="select_mode", choices=("exhaustive", "anneal"),
                           default="anneal")
            p.add_argument("--t0", type=float, default=None)
            p.add_argument("--rho", type=float, default=0.95)
            p.add_argument("--steps", type=int, default=50)
            p.add_argument("--cap", type=int, default=5000)

    p = sub.add_parser("fit", help="one recursion pass on a fixed support")
    common(p, data=True, grid=True)
    p.add_argument("--permutations", type=int, default=1,
                   help="average the estimate over this many data orderings")

    p = sub.add_parser("select", help="estimate the support by subset search")
    common(p, data=True, grid=True, anneal=True)

    p = sub.add_parser("bench-rate", help="convergence-rate benchmark on a scenario")
    common(p)
    p.add_argument("--scenario", help="benchmark scenario name")
    p.add_argument("--gammas", default="0.6,0.9")
    p.add_argument("--seeds", type=int, default=20)

    p = sub.add_parser("diagnose", help="mean-field and assumption diagnostics")
    common(p, grid=True)
    p.add_argument("--scenario", help="benchmark scenario name")
    p.add_argument("--support", help="true support points, comma separated")
    p.add_argument("--weights", help="true mixing weights, comma separated")
    p.add_argument("--n", type=int, default=None, help="synthetic run length")

    p = sub.add_parser("simulate", help="draw a synthetic sample")
    common(p, grid=True)
    p.add_argument("--scenario", help="benchmark scenario name")
    p.add_argument("--support", help="support points, comma separated")
    p.add_argument("--weights", help="mixing weights, comma separated")
    p.add_argument("--n", type=int, required=True)

    p = sub.add_parser("plot", help="render figures from existing artifacts")
    common(p, data=True, grid=True)
    p.add_argument("--bench-cells", dest="bench_cells", help="bench_cells.csv path")
    p.add_argument("--estimate", help="estimate.csv path")

    return parser


def config_from_args(args: argparse.Namespace) -> RunConfig:
    known = {f.name for f in fields(RunConfig)}
    values = {k: v for k, v in vars(args).items() if k in known and v is not None}
    values["mode"] = args.mode
    if getattr(args, "include", None):
        values["include"] = tuple(args.include)
    cfg = RunConfig(**values)
    config_path = getattr(args, "config", None)
    if config_path:
        try:
            with open(config_path, "r", encoding="utf-8") as fh:
                overrides = json.load(fh)
        except FileNotFoundError:
            raise ConfigError(f"config file {config_path} not found") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {config_path} is not valid JSON: {exc}") from None
        if not isinstance(overrides, dict):
            raise ConfigError("config file must hold a JSON object")
        for key, value in overrides.items():
            if key not in known:
                raise ConfigError(f"unknown config key {key!r}")
            if key == "include" and value is not None:
                value = tuple(value)
            setattr(cfg, key, value)
    return cfg


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = config_from_args(args)
        return run(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataFormatError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except DomainError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (DegenerateDataError, NumericalError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except PrmixError as exc:  # pragma: no cover - catch-all for new subtypes
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    raise SystemExit(main())
