"""Experiment orchestration: config files, deterministic Monte Carlo sweeps,
CSV emission with a JSON metadata sidecar.

Determinism contract: every output is a pure function of (config, master
seed).  Trials are keyed by (cell index, trial index) streams, results
are folded in grid order, and float formatting is fixed, so the CSV is
byte-identical at any worker count.
"""

from __future__ import annotations

import configparser
import hashlib
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .ensemble import EnsembleParams, EntryDistribution, RngStream, parse_distribution, sample_matrix
from .errors import ConfigError, ParameterError
from .spectra import DENSE_CAP, _SINGULAR_FLOOR, full_symmetric_spectrum, smallest_singular_value, spectral_norm
from .stats import SlopeFit, fit_loglog_slope, wilson_interval
from .structure import StructureConstants

SCHEMA_VERSION = 1
ARTIFACT_NAME = "ssrmlab"
ARTIFACT_VERSION = "0.1.0"

EXPERIMENT_KINDS = (
    "tail-sweep",
    "scaling",
    "norm-check",
    "distance-check",
    "smallball",
    "quadratic",
)


@dataclass(frozen=True)
class TailEstimate:
    """One (n, p, eps) cell of a tail sweep."""

    n: int
    p: float
    eps: float
    successes: int
    trials: int
    p_hat: float
    wilson_lo: float
    wilson_hi: float

    def __post_init__(self):
        if not 0 <= self.successes <= self.trials:
            raise ParameterError("successes must lie in [0, trials]")
        if not 0.0 <= self.wilson_lo <= self.p_hat + 1e-12 or not self.p_hat <= self.wilson_hi + 1e-12 <= 1.0 + 1e-12:
            raise ParameterError("interval must satisfy 0 <= lo <= p_hat <= hi <= 1")

    @classmethod
    def from_counts(cls, n: int, p: float, eps: float, successes: int, trials: int) -> "TailEstimate":
        lo, hi = wilson_interval(successes, trials)
        return cls(n, p, eps, successes, trials, successes / trials if trials else math.nan, lo, hi)


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str
    dist: EntryDistribution
    c_op: float
    constants: StructureConstants
    eps_grid: tuple[float, ...]
    n_grid: tuple[int, ...]
    p_grid: tuple[float, ...]
    trials: int
    master_seed: int
    workers: int
    out: str
    extras: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in EXPERIMENT_KINDS:
            raise ConfigError(f"unknown experiment kind {self.kind!r} (key experiment.kind)")
        if not self.n_grid or not self.p_grid or not self.eps_grid:
            raise ConfigError("grids must be nonempty (section [grid])")
        if self.trials < 1:
            raise ConfigError("experiment.trials must be >= 1")
        if self.workers < 1:
            raise ConfigError("experiment.workers must be >= 1")

    def cell_count(self) -> int:
        return len(self.n_grid) * len(self.p_grid)

    def params_for(self, n: int, p: float) -> EnsembleParams:
        return EnsembleParams(n=n, p=p, dist=self.dist, c_op=self.c_op)


def _dist_to_text(dist: EntryDistribution) -> str:
    if dist.kind == "two-point-general":
        return f"two-point:{dist.prob:.17g}"
    return dist.kind


def config_to_text(cfg: ExperimentConfig) -> str:
    """Serialize a config to the flat key-value format (lossless round-trip)."""
    cp = configparser.ConfigParser()
    cp["experiment"] = {
        "kind": cfg.kind,
        "trials": str(cfg.trials),
        "seed": str(cfg.master_seed),
        "workers": str(cfg.workers),
        "out": cfg.out,
    }
    cp["ensemble"] = {"dist": _dist_to_text(cfg.dist), "c_op": f"{cfg.c_op:.17g}"}
    cp["grid"] = {
        "n": ",".join(str(v) for v in cfg.n_grid),
        "p": ",".join(f"{v:.17g}" for v in cfg.p_grid),
        "eps": ",".join(f"{v:.17g}" for v in cfg.eps_grid),
    }
    c = cfg.constants
    cp["structure"] = {
        "c_s": f"{c.c_s:.17g}",
        "c_d": f"{c.c_d:.17g}",
        "c_oo": f"{c.c_oo:.17g}",
        "lambda": f"{c.lam:.17g}",
        "l": f"{c.L:.17g}",
        "delta0": f"{c.delta0:.17g}",
        "c_p": f"{c.c_p:.17g}",
    }
    if cfg.extras:
        cp["params"] = dict(cfg.extras)
    buf = io.StringIO()
    cp.write(buf)
    return buf.getvalue()


def _get(cp: configparser.ConfigParser, section: str, key: str, default: str | None = None) -> str:
    try:
        return cp[section][key]
    except KeyError:
        if default is not None:
            return default
        raise ConfigError(f"missing config key {section}.{key}") from None


def _parse_floats(text: str, where: str) -> tuple[float, ...]:
    try:
        return tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError as exc:
        raise ConfigError(f"bad numeric list at {where}: {text!r}") from exc


def config_from_text(text: str) -> ExperimentConfig:
    cp = configparser.ConfigParser()
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"unparseable config: {exc}") from exc
    kind = _get(cp, "experiment", "kind")

    def _int(section: str, key: str, default: str) -> int:
        raw = _get(cp, section, key, default)
        try:
            return int(raw)
        except ValueError as exc:
            raise ConfigError(f"bad integer at {section}.{key}: {raw!r}") from exc

    trials = _int("experiment", "trials", "1")
    seed = _int("experiment", "seed", "0")
    workers = _int("experiment", "workers", "1")
    out = _get(cp, "experiment", "out", "out.csv")
    try:
        dist = parse_distribution(_get(cp, "ensemble", "dist", "rademacher"))
    except ParameterError as exc:
        raise ConfigError(f"bad value at ensemble.dist: {exc}") from exc
    try:
        c_op = float(_get(cp, "ensemble", "c_op", "3.0"))
    except ValueError as exc:
        raise ConfigError("bad float at ensemble.c_op") from exc
    n_grid_f = _parse_floats(_get(cp, "grid", "n", ""), "grid.n")
    n_grid = tuple(int(v) for v in n_grid_f)
    p_grid = _parse_floats(_get(cp, "grid", "p", ""), "grid.p")
    eps_grid = _parse_floats(_get(cp, "grid", "eps", "0.001"), "grid.eps")
    kwargs = {}
    if cp.has_section("structure"):
        mapping = {
            "c_s": "c_s",
            "c_d": "c_d",
            "c_oo": "c_oo",
            "lambda": "lam",
            "l": "L",
            "delta0": "delta0",
            "c_p": "c_p",
        }
        for key, attr in mapping.items():
            if cp.has_option("structure", key):
                try:
                    kwargs[attr] = float(cp["structure"][key])
                except ValueError as exc:
                    raise ConfigError(f"bad float at structure.{key}") from exc
    try:
        constants = StructureConstants(**kwargs)
    except ParameterError as exc:
        raise ConfigError(f"invalid [structure] section: {exc}") from exc
    extras = dict(cp["params"]) if cp.has_section("params") else {}
    return ExperimentConfig(
        kind=kind,
        dist=dist,
        c_op=c_op,
        constants=constants,
        eps_grid=eps_grid,
        n_grid=n_grid,
        p_grid=p_grid,
        trials=trials,
        master_seed=seed,
        workers=workers,
        out=out,
        extras=extras,
    )


def load_config(path: str) -> ExperimentConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return config_from_text(fh.read())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path!r}: {exc}") from exc


# ---------------------------------------------------------------------------
# Trial workers (module level so they pickle for process pools).

def _extreme_values_for_trial(args) -> tuple[int, int, float, float]:
    """(cell, trial) -> (cell, trial, s_min, s_max) for one realization."""
    seed, cell, trial, n, p, dist_text, c_op = args
    params = EnsembleParams(n=n, p=p, dist=parse_distribution(dist_text), c_op=c_op)
    A = sample_matrix(params, RngStream(seed, (cell << 32) | trial))
    dense = A.to_dense()
    if n <= DENSE_CAP:
        evals = full_symmetric_spectrum(dense)
        smin = float(np.abs(evals).min())
        smax = float(np.abs(evals).max())
        if smin < _SINGULAR_FLOOR * max(smax, 1e-300):
            smin = 0.0
    else:
        smin = smallest_singular_value(dense)
        smax = spectral_norm(dense)
    return cell, trial, smin, smax


def _run_cells(cfg: ExperimentConfig, cells: list[tuple[int, int, float]]):
    """Run all trials for the given (cell_index, n, p) list, deterministic order.

    Returns {cell_index: [(s_min, s_max), ...]} with trials in index order.
    """
    tasks = [
        (cfg.master_seed, cell, t, n, p, _dist_to_text(cfg.dist), cfg.c_op)
        for cell, n, p in cells
        for t in range(cfg.trials)
    ]
    if cfg.workers == 1:
        results = [_extreme_values_for_trial(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(_extreme_values_for_trial, tasks, chunksize=8))
    out: dict[int, list[tuple[float, float]]] = {cell: [None] * cfg.trials for cell, _, _ in cells}
    for cell, trial, smin, smax in results:
        out[cell][trial] = (smin, smax)
    return out


def tail_sweep(cfg: ExperimentConfig) -> list[TailEstimate]:
    """Joint tail frequencies of {s_min <= eps sqrt(p/n)} and the norm event.

    One realization per (cell, trial) serves the whole eps grid, so
    success counts are exactly nondecreasing in eps within a cell.
    Infeasible cells with p < 1/n are rejected up front.
    """
    cells = []
    idx = 0
    for n in cfg.n_grid:
        for p in cfg.p_grid:
            if p < 1.0 / n:
                raise ParameterError(
                    f"infeasible cell n={n}, p={p:g}: sparsity below 1/n leaves empty rows"
                )
            cells.append((idx, n, p))
            idx += 1
    per_cell = _run_cells(cfg, cells)
    rows: list[TailEstimate] = []
    for cell, n, p in cells:
        vals = per_cell[cell]
        op_thr = cfg.c_op * math.sqrt(p * n)
        for eps in cfg.eps_grid:
            thr = eps * math.sqrt(p / n)
            successes = sum(1 for smin, smax in vals if smin <= thr and smax <= op_thr)
            rows.append(TailEstimate.from_counts(n, p, eps, successes, cfg.trials))
    return rows


@dataclass(frozen=True)
class ScalingCell:
    n: int
    p: float
    trials: int
    median_smin_scaled: float
    median_cond_over_n: float
    singular_count: int
    ratio_to_prev: float | None


@dataclass(frozen=True)
class ScalingReport:
    cells: tuple[ScalingCell, ...]


def scaling_consistency(cfg: ExperimentConfig) -> ScalingReport:
    """Medians of s_min sqrt(n/p) and of the condition number over n.

    Exactly singular realizations are counted separately, never folded
    into medians.  The ratio column compares consecutive n at fixed p.
    """
    if len(cfg.n_grid) < 1:
        raise ParameterError("scaling needs a nonempty n grid")
    cells = []
    idx = 0
    for p in cfg.p_grid:
        for n in cfg.n_grid:
            cells.append((idx, n, p))
            idx += 1
    per_cell = _run_cells(cfg, cells)
    out = []
    prev_by_p: dict[float, float] = {}
    for cell, n, p in cells:
        vals = per_cell[cell]
        smins = np.array([v[0] for v in vals])
        smaxs = np.array([v[1] for v in vals])
        nonsing = smins > 0
        singular_count = int((~nonsing).sum())
        med_smin = float(np.median(smins[nonsing]) * math.sqrt(n / p)) if nonsing.any() else math.nan
        conds = smaxs[nonsing] / smins[nonsing]
        med_cond = float(np.median(conds) / n) if nonsing.any() else math.nan
        ratio = None
        if p in prev_by_p and prev_by_p[p] > 0 and not math.isnan(med_smin):
            ratio = med_smin / prev_by_p[p]
        prev_by_p[p] = med_smin
        out.append(ScalingCell(n, p, cfg.trials, med_smin, med_cond, singular_count, ratio))
    return ScalingReport(tuple(out))


def exponent_fit(rows: list[TailEstimate]) -> SlopeFit | None:
    """Log-log slope of p_hat against eps over CI-solid cells.

    Returns None (the caller prints a diagnostic) when fewer than four
    eps points have p_hat > 0 with a Wilson interval excluding zero.
    """
    usable = [(r.eps, r.p_hat) for r in rows if r.p_hat > 0 and r.wilson_lo > 0 and r.eps > 0]
    if len(usable) < 4:
        return None
    xs, ys = zip(*usable)
    return fit_loglog_slope(xs, ys)


# ---------------------------------------------------------------------------
# CSV + sidecar emission.

def _fmt(value) -> str:
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return format(value, ".12g")
    return str(value)


def write_csv(path: str, schema: str, header: list[str], rows: list[list]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"# {ARTIFACT_NAME} {schema} v{SCHEMA_VERSION}\n")
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def artifact_version_string(cfg: ExperimentConfig) -> str:
    digest = hashlib.sha1(config_to_text(cfg).encode()).hexdigest()[:12]
    return f"{ARTIFACT_NAME}-{ARTIFACT_VERSION}+cfg.{digest}"


def write_sidecar(csv_path: str, cfg: ExperimentConfig, extra: dict | None = None) -> None:
    meta = {
        "artifact": artifact_version_string(cfg),
        "schema_version": SCHEMA_VERSION,
        "config": {
            "kind": cfg.kind,
            "dist": _dist_to_text(cfg.dist),
            "c_op": cfg.c_op,
            "n_grid": list(cfg.n_grid),
            "p_grid": list(cfg.p_grid),
            "eps_grid": list(cfg.eps_grid),
            "trials": cfg.trials,
            "seed": cfg.master_seed,
            "workers": cfg.workers,
            "extras": dict(cfg.extras),
        },
        "structure_constants": asdict(cfg.constants),
    }
    if extra:
        meta["results"] = extra
    with open(csv_path + ".meta.json", "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")


# ---------------------------------------------------------------------------
# run(): dispatch a named experiment from a config file.

def _run_tail_sweep(cfg: ExperimentConfig) -> dict:
    rows = tail_sweep(cfg)
    write_csv(
        cfg.out,
        "tail-sweep",
        ["n", "p", "eps", "successes", "trials", "p_hat", "wilson_lo", "wilson_hi"],
        [[r.n, r.p, r.eps, r.successes, r.trials, r.p_hat, r.wilson_lo, r.wilson_hi] for r in rows],
    )
    fit = exponent_fit(rows)
    extra = {"exponent_fit": None if fit is None else asdict(fit)}
    return extra


def _run_scaling(cfg: ExperimentConfig) -> dict:
    report = scaling_consistency(cfg)
    write_csv(
        cfg.out,
        "scaling",
        ["n", "p", "trials", "median_smin_scaled", "median_cond_over_n", "singular_count", "ratio_to_prev"],
        [
            [c.n, c.p, c.trials, c.median_smin_scaled, c.median_cond_over_n, c.singular_count,
             "" if c.ratio_to_prev is None else _fmt(c.ratio_to_prev)]
            for c in report.cells
        ],
    )
    return {}


def _run_norm_check(cfg: ExperimentConfig) -> dict:
    from .spectra import norm_bound_experiment

    cbar = float(cfg.extras.get("cbar", "2.0"))
    eps = float(cfg.extras.get("bvh_eps", "0.5"))
    n, p = cfg.n_grid[0], cfg.p_grid[0]
    rep = norm_bound_experiment(cfg.params_for(n, p), cfg.trials, cfg.master_seed, cbar=cbar, eps=eps)
    write_csv(
        cfg.out,
        "norm-check",
        ["trial", "norm", "norm_over_sqrt_pn", "omega_event", "bvh_bound", "bvh_satisfied"],
        [[r.trial, r.norm, r.norm_over_sqrt_pn, r.omega_event, r.bvh_bound, r.bvh_satisfied] for r in rep.rows],
    )
    return {
        "n": n,
        "p": p,
        "mean_ratio": rep.mean_ratio,
        "violation_fraction": rep.violation_fraction,
        "omega_fraction": rep.omega_fraction,
        "bvh_fraction": rep.bvh_fraction,
    }


def _run_distance_check(cfg: ExperimentConfig) -> dict:
    from .inverse_geometry import invertibility_via_distance_experiment

    n = cfg.n_grid[0]
    p = cfg.p_grid[0]
    eps = float(cfg.extras.get("eps", str(cfg.eps_grid[0])))
    M = int(cfg.extras.get("m", str(n // 2)))
    rho = float(cfg.extras.get("rho", str(cfg.constants.c_d)))
    rep = invertibility_via_distance_experiment(
        cfg.params_for(n, p), eps, M, rho, cfg.trials, cfg.master_seed
    )
    write_csv(
        cfg.out,
        "distance-check",
        ["trial", "s_min", "minimizer_incompressible", "lhs_event", "rhs_value"],
        [[r.trial, r.s_min, r.minimizer_incompressible, r.lhs_event, r.rhs_value] for r in rep.rows],
    )
    return {
        "lhs_hat": rep.lhs_hat,
        "lhs_ci": list(rep.lhs_ci),
        "rhs_hat": rep.rhs_hat,
        "rhs_halfwidth": rep.rhs_halfwidth,
        "holds_within_slack": rep.holds_within_slack,
    }


def _run_smallball(cfg: ExperimentConfig) -> dict:
    from .ensemble import sample_sparse_vector
    from .smallball import lcd_smallball_bound, levy_concentration_scalar
    from .structure import lcd

    n = cfg.n_grid[0]
    p = cfg.p_grid[0]
    x = np.full(n, 1.0 / math.sqrt(n))
    d = lcd(x, cfg.constants.L)
    # One sample set serves the whole eps grid (monotone estimates).
    sums = np.array(
        [
            float(x @ sample_sparse_vector(n, p, cfg.dist, RngStream(cfg.master_seed, t)))
            for t in range(cfg.trials)
        ]
    )
    rows = []
    ratios = []
    for eps in cfg.eps_grid:
        est = levy_concentration_scalar(sums, eps * math.sqrt(p))
        bracket = lcd_smallball_bound(x, cfg.constants.L, p, eps, d.value)
        rows.append([eps, est.value, est.ci_halfwidth, bracket])
        if bracket > 0:
            ratios.append(est.value / bracket)
    c_hat = max(ratios) if ratios else math.nan
    rows = [row + [row[1] <= c_hat * row[3] + 1e-12] for row in rows]
    write_csv(cfg.out, "smallball", ["eps", "estimate", "ci", "bound_bracket", "pass"], rows)
    return {"fitted_constant": c_hat, "lcd_value": d.value, "lcd_capped": d.capped}


def _run_quadratic(cfg: ExperimentConfig) -> dict:
    from .inverse_geometry import quadratic_smallball_experiment

    n = cfg.n_grid[0]
    p = cfg.p_grid[0]
    rep = quadratic_smallball_experiment(cfg.params_for(n, p), cfg.eps_grid, cfg.trials, cfg.master_seed)
    rows = []
    for eps, pz, pm in zip(rep.eps_grid, rep.p_hat_zero, rep.p_hat_median):
        rows.append([eps, pz, pm])
    write_csv(cfg.out, "quadratic", ["eps", "p_hat_zero", "p_hat_median"], rows)
    return {
        "excluded_singular": rep.excluded_singular,
        "slope_zero": None if rep.slope_zero is None else asdict(rep.slope_zero),
        "slope_median": None if rep.slope_median is None else asdict(rep.slope_median),
    }


_RUNNERS = {
    "tail-sweep": _run_tail_sweep,
    "scaling": _run_scaling,
    "norm-check": _run_norm_check,
    "distance-check": _run_distance_check,
    "smallball": _run_smallball,
    "quadratic": _run_quadratic,
}


def run(
    config_path: str,
    dry_run: bool = False,
    seed: int | None = None,
    workers: int | None = None,
    out: str | None = None,
    kind: str | None = None,
) -> int:
    """Dispatch the experiment named in the config; returns an exit status.

    Writes the CSV and a JSON sidecar next to it.  On any failed
    precondition the diagnostic goes to stderr and the status is nonzero.
    """
    import sys

    try:
        cfg = load_config(config_path)
        if seed is not None:
            cfg = replace(cfg, master_seed=seed)
        if workers is not None:
            cfg = replace(cfg, workers=workers)
        if out is not None:
            cfg = replace(cfg, out=out)
        if kind is not None and kind != cfg.kind:
            cfg = replace(cfg, kind=kind)
    except ParameterError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    if dry_run:
        print(
            f"dry-run: kind={cfg.kind} cells={cfg.cell_count()} "
            f"trials/cell={cfg.trials} eps points={len(cfg.eps_grid)} -> {cfg.out}"
        )
        return 0
    runner = _RUNNERS.get(cfg.kind)
    if runner is None:
        print(f"unknown experiment kind {cfg.kind!r}", file=sys.stderr)
        return 2
    try:
        extra = runner(cfg)
    except ParameterError as exc:
        print(f"precondition failed: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"cannot write output: {exc}", file=sys.stderr)
        return 1
    write_sidecar(cfg.out, cfg, extra)
    return 0
