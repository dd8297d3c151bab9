"""Batch experiments comparing the structural cost with the Gramian-based costs.

Two experiment kinds are supported.

``run_correlation``
    Draws one graph and target set, sweeps a grid of desired facility-location
    costs, hill-climbs to driver sets at each grid value and records how the
    volume and expected-energy costs of those sets follow the structural cost.
``run_headtohead``
    Draws many independent graphs (seed ``config.seed + index``), runs every
    requested method on each and records cost differences between method pairs.

Both return a table object that :func:`emit_outputs` writes to disk as CSV
plus SVG plots, alongside a JSON run manifest. CSV files contain no timing data, so rerunning an
experiment from its manifest reproduces them byte for byte.
"""
from __future__ import annotations

import csv
import json
import logging
import math
import time
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np
from joblib import Parallel, delayed
from scipy import linalg, stats

from . import plots
from .exceptions import ConfigError, DriverSelectError
from .flp import EXACT_MAX_NODES, ilp_constraint_matrix, solve_pmedian
from .graph import FAMILIES, gen_graph
from .selectors import (
    METHODS,
    SelectionProblem,
    _result,
    evaluate_costs,
    flp_select,
    greedy_select,
    hill_climb,
    lpgm_select,
)
from .structure import flp_set_cost

__all__ = [
    "SCHEMA_VERSION",
    "ExperimentConfig",
    "ComparisonRecord",
    "CorrelationRow",
    "CorrelationTable",
    "HeadToHeadTable",
    "DEFAULT_PAIRS",
    "make_problem",
    "run_method",
    "run_correlation",
    "run_headtohead",
    "check_ilp_size",
    "emit_outputs",
    "read_csv_rows",
]

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1

#: name -> (baseline method, compared method, cost). ``D = cost(baseline) - cost(compared)``,
#: so a positive ``D`` means the compared method found the cheaper set.
DEFAULT_PAIRS = {
    "D_greedy": ("flp", "greedy", "vol_cost"),
    "D_lpgm": ("flp", "lpgm", "expected_energy"),
}

LPGM_DEFAULTS = {"eta": 1e-2, "n_iter": 200, "m0": None}


@dataclass
class ExperimentConfig:
    """Everything needed to rerun an experiment.

    ``nu=None`` uses the Gershgorin rule ``gamma * (k_max + 1)`` on every drawn
    graph; the value actually used is stored with each realization. ``grid=None``
    lets :func:`run_correlation` build a linear grid of ``grid_points`` values.
    """

    family: str = "erdos_renyi"
    params: dict = field(default_factory=lambda: {"k_av": 6})
    directed: bool = False
    n: int = 50
    p: int = 20
    m: int = 10
    t_f: float = 1.0
    gamma: float = 1.0
    nu: float | None = None
    realizations: int = 200
    seed: int = 0
    methods: tuple = ("greedy", "flp")
    pairs: dict = field(default_factory=lambda: dict(DEFAULT_PAIRS))
    grid: tuple | None = None
    grid_points: int = 20
    climbs: int = 5
    epsilon: float | None = None
    max_iter: int = 10_000
    random_sets: int = 101
    bins: int = 20
    tie_tol: float = 1e-9
    flp_engine: str = "auto"
    lpgm: dict = field(default_factory=lambda: dict(LPGM_DEFAULTS))
    n_jobs: int = 1
    out: str | None = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ConfigError(f"unknown graph family {self.family!r}; choose from {FAMILIES}")
        for name in ("n", "p", "m", "realizations", "grid_points", "climbs", "bins"):
            value = getattr(self, name)
            if int(value) != value:
                raise ConfigError(f"{name} must be an integer, got {value!r}")
            setattr(self, name, int(value))
        if self.realizations < 1:
            raise ConfigError("realizations must be >= 1")
        if not 1 <= self.p <= self.n:
            raise ConfigError(f"need 1 <= p <= n, got p={self.p}, n={self.n}")
        if not 1 <= self.m <= self.n:
            raise ConfigError(f"need 1 <= m <= n, got m={self.m}, n={self.n}")
        self.t_f = float(self.t_f)
        if not self.t_f > 0:
            raise ConfigError(f"t_f must be positive, got {self.t_f}")
        self.methods = tuple(self.methods)
        unknown = set(self.methods) - set(METHODS)
        if unknown:
            raise ConfigError(f"unknown methods {sorted(unknown)}; choose from {METHODS}")
        if "lpgm" in self.methods and math.isinf(self.t_f):
            raise ConfigError("lpgm needs a finite t_f")
        self.pairs = {k: tuple(v) for k, v in self.pairs.items()}
        if self.grid is not None:
            self.grid = tuple(float(v) for v in self.grid)
            if not self.grid:
                raise ConfigError("target-cost grid must be nonempty")
        if self.epsilon is not None and not self.epsilon > 0:
            raise ConfigError("epsilon must be positive")
        self.lpgm = {**LPGM_DEFAULTS, **self.lpgm}

    def to_dict(self) -> dict:
        d = asdict(self)
        d["methods"] = list(self.methods)
        d["pairs"] = {k: list(v) for k, v in self.pairs.items()}
        d["grid"] = None if self.grid is None else list(self.grid)
        d["t_f"] = _jsonable(self.t_f)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        extra = set(d) - known
        if extra:
            raise ConfigError(f"unknown config fields {sorted(extra)}")
        d = dict(d)
        if isinstance(d.get("t_f"), str):
            d["t_f"] = float(d["t_f"])
        return cls(**d)


def _jsonable(x):
    if isinstance(x, float) and not math.isfinite(x):
        return repr(x)
    return x


def make_problem(config: ExperimentConfig, seed: int) -> SelectionProblem:
    """Graph and random target set of one realization, both derived from ``seed``."""
    g = gen_graph(config.family, config.n, config.params, config.directed, seed,
                  config.gamma, config.nu)
    rng = np.random.default_rng([seed, 1])
    targets = rng.choice(config.n, size=config.p, replace=False)
    return SelectionProblem(g, targets, config.m, config.t_f, seed)


def run_method(problem: SelectionProblem, method: str, config: ExperimentConfig):
    """Run one named method with the settings of ``config``."""
    if method == "greedy":
        return greedy_select(problem)
    if method == "flp":
        return flp_select(problem, engine=config.flp_engine)
    if method == "lpgm":
        lp = config.lpgm
        return lpgm_select(problem, eta=lp["eta"], n_iter=lp["n_iter"], m0=lp["m0"])
    if method == "hill":
        # aim at the cost of the FLP solution with a loose window
        target = solve_pmedian(problem.structure.cost, problem.m, engine="local").objective
        eps = config.epsilon or max(1e-6, 1e-2 * abs(target))
        run = hill_climb(problem, problem.m, target, eps, config.max_iter, problem.seed)
        if not run.found:
            raise DriverSelectError(f"hill climb did not reach FLP cost {target:.6g}")
        return _result(problem, run.drivers, "hill", {"iterations": run.iterations})
    raise ConfigError(f"unknown method {method!r}")


# --------------------------------------------------------------------------- correlation


@dataclass
class CorrelationRow:
    grid_index: int
    target_flp: float
    climb_seed: int
    found: bool
    iterations: int
    flp_cost: float
    vol_cost: float
    expected_energy: float
    drivers: tuple

    HEADER = ("grid_index", "target_flp", "climb_seed", "found", "iterations",
              "flp_cost", "vol_cost", "expected_energy", "drivers")

    def to_row(self) -> dict:
        return {
            "grid_index": str(self.grid_index),
            "target_flp": repr(self.target_flp),
            "climb_seed": str(self.climb_seed),
            "found": str(int(self.found)),
            "iterations": str(self.iterations),
            "flp_cost": repr(self.flp_cost) if self.found else "",
            "vol_cost": repr(self.vol_cost) if self.found else "",
            "expected_energy": repr(self.expected_energy) if self.found else "",
            "drivers": " ".join(map(str, self.drivers)),
        }


@dataclass
class CorrelationTable:
    config: ExperimentConfig
    rows: list
    grid: tuple
    epsilon: float
    fits: dict
    targets: tuple
    nu: float
    wall_time: float = 0.0
    kind: str = "correlation"

    def found_rows(self) -> list:
        return [r for r in self.rows if r.found]


def _fit(x, y) -> dict:
    """Least-squares line plus Pearson r; ``"n/a"`` when undefined."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    ok = np.isfinite(x) & np.isfinite(y)
    x, y = x[ok], y[ok]
    if x.size < 2 or np.ptp(x) == 0 or np.ptp(y) == 0:
        return {"n": int(x.size), "slope": "n/a", "intercept": "n/a", "pearson": "n/a"}
    fit = stats.linregress(x, y)
    return {"n": int(x.size), "slope": float(fit.slope), "intercept": float(fit.intercept),
            "pearson": float(fit.rvalue)}


def correlation_grid(problem: SelectionProblem, config: ExperimentConfig):
    """Linear grid from the local-search FLP objective to the median FLP of random m-sets."""
    cost = problem.structure.cost
    lo = solve_pmedian(cost, problem.m, engine="local").objective
    rng = np.random.default_rng([config.seed, 2])
    random_costs = [
        flp_set_cost(cost, rng.choice(problem.n, size=problem.m, replace=False))
        for _ in range(config.random_sets)
    ]
    hi = float(np.median(random_costs))
    return tuple(float(v) for v in np.linspace(lo, hi, config.grid_points))


def _default_epsilon(grid) -> float:
    if len(grid) > 1:
        spacing = (max(grid) - min(grid)) / (len(grid) - 1)
        if spacing > 0:
            return spacing / 4
    return max(1e-6, 1e-6 * abs(grid[0]))


def run_correlation(config: ExperimentConfig) -> CorrelationTable:
    """Hill-climb to sets along a grid of FLP costs and correlate the other costs with FLP.

    ``config.climbs`` independent climbs (seeds derived from ``config.seed``)
    are made per grid value. Climbs that do not reach their window are kept
    as rows with ``found = 0`` and left out of the fits.
    """
    t0 = time.perf_counter()
    problem = make_problem(config, config.seed)
    grid = config.grid if config.grid is not None else correlation_grid(problem, config)
    eps = config.epsilon if config.epsilon is not None else _default_epsilon(grid)
    rows = []
    for i, target in enumerate(grid):
        for c in range(config.climbs):
            climb_seed = config.seed + i * config.climbs + c
            run = hill_climb(problem, problem.m, target, eps, config.max_iter, climb_seed)
            if run.found:
                costs = evaluate_costs(problem, run.drivers)
                rows.append(CorrelationRow(i, target, climb_seed, True, run.iterations,
                                           costs["flp_cost"], costs["vol_cost"],
                                           costs["expected_energy"], run.drivers))
            else:
                logger.info("grid value %.6g: climb %d did not reach the window", target, c)
                rows.append(CorrelationRow(i, target, climb_seed, False, run.iterations,
                                           math.nan, math.nan, math.nan, ()))
    found = [r for r in rows if r.found]
    x = [r.flp_cost for r in found]
    fits = {
        "vol_cost": _fit(x, [r.vol_cost for r in found]),
        "expected_energy": _fit(x, [r.expected_energy for r in found]),
        "not_found": len(rows) - len(found),
    }
    return CorrelationTable(config, rows, tuple(grid), eps, fits, problem.targets,
                            problem.graph.nu, time.perf_counter() - t0)


# --------------------------------------------------------------------------- head to head


@dataclass
class ComparisonRecord:
    """One realization of a head-to-head run.

    ``results`` maps a method name to its driver set and three costs;
    ``differences`` maps a pair name (see :data:`DEFAULT_PAIRS`) to ``D``.
    """

    realization: int
    seed: int
    gamma: float
    nu: float
    t_f: float
    status: str = "ok"
    error: str = ""
    results: dict = field(default_factory=dict)
    differences: dict = field(default_factory=dict)
    schema_version: int = SCHEMA_VERSION

    @property
    def ok(self) -> bool:
        return self.status == "ok"

    @staticmethod
    def header(methods, pairs) -> list:
        cols = ["schema_version", "realization", "seed", "gamma", "nu", "t_f", "status", "error"]
        for m in methods:
            cols += [f"{m}_drivers", f"{m}_vol_cost", f"{m}_expected_energy", f"{m}_flp_cost"]
        return cols + list(pairs)

    def to_row(self, methods, pairs) -> dict:
        row = {
            "schema_version": str(self.schema_version),
            "realization": str(self.realization),
            "seed": str(self.seed),
            "gamma": repr(float(self.gamma)),
            "nu": repr(float(self.nu)),
            "t_f": repr(float(self.t_f)),
            "status": self.status,
            "error": self.error,
        }
        for m in methods:
            res = self.results.get(m)
            row[f"{m}_drivers"] = " ".join(map(str, res["drivers"])) if res else ""
            for key in ("vol_cost", "expected_energy", "flp_cost"):
                row[f"{m}_{key}"] = repr(float(res[key])) if res else ""
        for name in pairs:
            d = self.differences.get(name)
            row[name] = "" if d is None else repr(float(d))
        return row

    @classmethod
    def from_row(cls, row: dict, methods, pairs) -> "ComparisonRecord":
        results = {}
        for m in methods:
            if row.get(f"{m}_drivers", "") == "" and row.get(f"{m}_vol_cost", "") == "":
                continue
            results[m] = {
                "drivers": tuple(int(v) for v in row[f"{m}_drivers"].split()),
                "vol_cost": float(row[f"{m}_vol_cost"]),
                "expected_energy": float(row[f"{m}_expected_energy"]),
                "flp_cost": float(row[f"{m}_flp_cost"]),
            }
        differences = {name: float(row[name]) for name in pairs if row.get(name, "") != ""}
        return cls(int(row["realization"]), int(row["seed"]), float(row["gamma"]),
                   float(row["nu"]), float(row["t_f"]), row["status"], row["error"],
                   results, differences, int(row["schema_version"]))


def _realization(config: ExperimentConfig, index: int) -> ComparisonRecord:
    seed = config.seed + index
    nu = config.nu
    try:
        problem = make_problem(config, seed)
        nu = problem.graph.nu
        results = {}
        for method in config.methods:
            res = run_method(problem, method, config)
            results[method] = {
                "drivers": tuple(res.drivers),
                "vol_cost": res.vol_cost,
                "expected_energy": res.expected_energy,
                "flp_cost": res.flp_cost,
            }
    except (DriverSelectError, linalg.LinAlgError, ValueError) as exc:
        logger.warning("realization %d (seed %d) failed: %s", index, seed, exc)
        return ComparisonRecord(index, seed, config.gamma, math.nan if nu is None else nu,
                                config.t_f, "failed", f"{type(exc).__name__}: {exc}")
    differences = {}
    for name, (base, other, cost) in config.pairs.items():
        if base in results and other in results:
            differences[name] = results[base][cost] - results[other][cost]
    return ComparisonRecord(index, seed, config.gamma, nu, config.t_f, "ok", "", results, differences)


@dataclass
class HeadToHeadTable:
    config: ExperimentConfig
    records: list
    histograms: dict
    fractions: dict
    excluded: dict
    wall_time: float = 0.0
    kind: str = "headtohead"

    def values(self, name) -> np.ndarray:
        """Finite ``D`` values of pair ``name`` over successful realizations."""
        vals = [r.differences[name] for r in self.records if r.ok and name in r.differences]
        vals = np.asarray(vals, dtype=float)
        return vals[np.isfinite(vals)]


def _summarise(values, bins, tie_tol):
    if values.size == 0:
        return {"counts": [], "edges": []}, {"n": 0}
    lo, hi = float(values.min()), float(values.max())
    if lo == hi:
        lo, hi = lo - 0.5, hi + 0.5
    counts, edges = np.histogram(values, bins=bins, range=(lo, hi))
    scale = tie_tol * np.maximum(1.0, np.abs(values))
    pos = int(np.sum(values > scale))
    neg = int(np.sum(values < -scale))
    tie = int(values.size - pos - neg)
    n = int(values.size)
    fractions = {
        "n": n,
        "compared_wins": pos / n,
        "baseline_wins": neg / n,
        "ties": tie / n,
    }
    return {"counts": counts.tolist(), "edges": edges.tolist()}, fractions


def run_headtohead(config: ExperimentConfig) -> HeadToHeadTable:
    """Run every method on ``config.realizations`` independent problems and compare them.

    For each pair ``(baseline, compared, cost)`` the statistic
    ``D = cost(baseline set) - cost(compared set)`` is histogrammed, together
    with the fraction of realizations each side wins. Failed realizations and
    non-finite ``D`` values are excluded and counted.
    """
    pairs = {k: v for k, v in config.pairs.items()
             if v[0] in config.methods and v[1] in config.methods}
    if not pairs:
        raise ConfigError(f"methods {config.methods} contain no compared pair of {list(config.pairs)}")
    config.pairs = pairs
    t0 = time.perf_counter()
    records = Parallel(n_jobs=config.n_jobs)(
        delayed(_realization)(config, i) for i in range(config.realizations)
    )
    records = sorted(records, key=lambda r: r.realization)
    failed = sum(not r.ok for r in records)
    histograms, fractions, excluded = {}, {}, {"failed": failed}
    for name in pairs:
        vals = [r.differences.get(name, math.nan) for r in records if r.ok]
        excluded[f"{name}_nonfinite"] = int(sum(not math.isfinite(v) for v in vals))
        h, f = _summarise(np.array([v for v in vals if math.isfinite(v)]), config.bins,
                          config.tie_tol)
        histograms[name] = h
        fractions[name] = f
    return HeadToHeadTable(config, records, histograms, fractions, excluded,
                           time.perf_counter() - t0)


# --------------------------------------------------------------------------- accounting


def check_ilp_size(n: int, p: int) -> int:
    """Nonzero count of the p-median ILP constraint matrix (equals ``n + 3 n p``)."""
    return int(ilp_constraint_matrix(n, p).nnz)


# --------------------------------------------------------------------------- outputs


def _write_csv(path: Path, header, rows) -> None:
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(header), lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)


def read_csv_rows(path) -> list:
    """Rows of a CSV written by :func:`emit_outputs`, as dicts of strings."""
    with Path(path).open(newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def _defaults_used(config) -> dict:
    return {
        "nu_rule": "gamma * (k_max + 1)" if config.nu is None else "fixed",
        "flp_exact_max_nodes": EXACT_MAX_NODES,
        "flp_engine": config.flp_engine,
        "rank_tol": "p * eps * lambda_max",
        "lpgm": {**config.lpgm, "m0": config.lpgm["m0"] if config.lpgm["m0"] is not None else "m",
                 "B0": "m random versors + U(0, 1e-3) noise", "step": "halving backtrack"},
        "hill_max_iter": config.max_iter,
        "targets": "uniform random p-subset per realization",
    }


def _manifest(table) -> dict:
    from . import __version__

    config = table.config
    man = {
        "schema_version": SCHEMA_VERSION,
        "kind": table.kind,
        "library": "driverselect",
        "version": __version__,
        "config": config.to_dict(),
        "gamma": config.gamma,
        "t_f": _jsonable(config.t_f),
        "defaults": _defaults_used(config),
        "wall_time_s": table.wall_time,
    }
    if table.kind == "correlation":
        man["runs"] = [{"seed": config.seed, "gamma": config.gamma, "nu": table.nu,
                        "t_f": _jsonable(config.t_f)}]
        man["grid"] = list(table.grid)
        man["epsilon"] = table.epsilon
        man["targets"] = list(table.targets)
        man["fits"] = table.fits
    else:
        man["runs"] = [{"realization": r.realization, "seed": r.seed, "gamma": r.gamma,
                        "nu": _jsonable(float(r.nu)), "t_f": _jsonable(float(r.t_f))}
                       for r in table.records]
        man["histograms"] = table.histograms
        man["fractions"] = table.fractions
        man["excluded"] = table.excluded
    return man


def emit_outputs(table, out_dir, formats=("csv", "json", "svg")) -> list:
    """Write the CSV, JSON manifest and SVG plots of an experiment table.

    Returns the written paths. CSV floats use ``repr`` so they parse back
    exactly.

    Raises
    ------
    ConfigError
        For an unknown format or an output directory that cannot be created.
    """
    formats = tuple(formats)
    bad = set(formats) - {"csv", "json", "svg"}
    if bad:
        raise ConfigError(f"unknown output formats {sorted(bad)}")
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"cannot create output directory {out}: {exc}") from exc
    written = []
    kind = table.kind
    if "csv" in formats:
        path = out / f"{kind}.csv"
        if kind == "correlation":
            _write_csv(path, CorrelationRow.HEADER, [r.to_row() for r in table.rows])
        else:
            methods, pairs = table.config.methods, list(table.config.pairs)
            _write_csv(path, ComparisonRecord.header(methods, pairs),
                       [r.to_row(methods, pairs) for r in table.records])
            hist_path = out / f"{kind}_histogram.csv"
            hist_rows = []
            for name, h in table.histograms.items():
                for c, lo, hi in zip(h["counts"], h["edges"][:-1], h["edges"][1:]):
                    hist_rows.append({"statistic": name, "bin_lo": repr(lo), "bin_hi": repr(hi),
                                      "count": str(c)})
            _write_csv(hist_path, ("statistic", "bin_lo", "bin_hi", "count"), hist_rows)
            written.append(hist_path)
        written.insert(0, path)
    if "json" in formats:
        path = out / "manifest.json"
        path.write_text(json.dumps(_manifest(table), indent=2, sort_keys=True) + "\n",
                        encoding="utf-8")
        written.append(path)
    if "svg" in formats:
        if kind == "correlation":
            found = table.found_rows()
            x = [r.flp_cost for r in found]
            for key, label in (("vol_cost", "volume cost"), ("expected_energy", "expected energy")):
                path = out / f"correlation_{key}.svg"
                plots.scatter_svg(path, x, [getattr(r, key) for r in found],
                                  "FLP cost", label, fit=table.fits[key])
                written.append(path)
        else:
            for name, h in table.histograms.items():
                path = out / f"histogram_{name}.svg"
                plots.histogram_svg(path, h["counts"], h["edges"], name)
                written.append(path)
    return written
