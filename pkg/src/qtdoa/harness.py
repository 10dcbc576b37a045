"""Monte Carlo campaigns: configuration, sensor sampling, execution and result files.

Every random draw is keyed by ``(master_seed, stream, trial)``, so a trial
yields the same sensor and the same noise regardless of execution order or
worker count.  Trial ``l`` uses one sensor position for every noise level
and mode.
"""
from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from functools import lru_cache
from pathlib import Path

import numpy as np
import yaml

from .conic import SolverSettings, Status
from .core import (TESTBED_ANCHORS, TESTBED_PAIRS, AnchorSet, RangingScenario, ValidationError,
                   truth_vector)
from .crlb import MIN_DIFFERENCE, UnboundedBoundError, fisher_information, jensen_bound, mean_error
from .noise import NoiseMode, NoiseSpec, measure
from .solver import DEFAULT_DELTA, localize

SENSOR_STREAM = 0
MAX_SENSOR_RETRIES = 100
RESULT_HEADER = ("trial", "eta", "mode", "x0", "x1", "x2", "xhat0", "xhat1", "xhat2",
                 "error_m", "bound_m", "status", "iters", "seconds")
SUMMARY_HEADER = ("eta", "mode", "trials", "successes", "success_rate", "me_m", "me_stderr_m",
                  "mean_bound_m", "bound_unavailable", "bias_norm_m", "mean_iters", "mean_seconds")
SUCCESS_STATUSES = (Status.OPTIMAL.value, "fallback")


class ConfigError(ValueError):
    """Problem with a configuration file or mapping; the message names the key."""


@dataclass(frozen=True)
class ExperimentConfig:
    Dx: float = 2.0
    Da: float = 1.0
    anchors: tuple = TESTBED_ANCHORS
    pairs: tuple = TESTBED_PAIRS
    eta_grid: tuple = (0.0, 0.01, 0.02, 0.03, 0.04)
    trials: int = 2000
    delta: float = DEFAULT_DELTA
    modes: tuple = (NoiseMode.QUANTUM, NoiseMode.CLASSICAL)
    master_seed: int = 20240101
    weighted: bool = False
    kappa: float = 1.0
    solver: SolverSettings = field(default_factory=SolverSettings)

    def __post_init__(self):
        set_ = lambda k, v: object.__setattr__(self, k, v)
        set_("anchors", tuple(tuple(float(c) for c in a) for a in self.anchors))
        set_("pairs", tuple((int(i), int(j)) for i, j in self.pairs))
        set_("eta_grid", tuple(float(e) for e in self.eta_grid))
        set_("modes", tuple(NoiseMode.parse(m) for m in self.modes))
        if isinstance(self.solver, dict):
            set_("solver", SolverSettings(**self.solver))
        if not self.Dx >= self.Da > 0:
            raise ConfigError(f"need Dx >= Da > 0, got Dx={self.Dx}, Da={self.Da}")
        pos = np.array(self.anchors)
        if pos.ndim != 2 or pos.shape[1] != 3:
            raise ConfigError("anchors: expected a list of 3-D points")
        if np.any(np.abs(pos) > self.Da):
            raise ConfigError(f"anchors: every coordinate must lie in [-Da, Da] = [-{self.Da}, {self.Da}]")
        if self.trials < 1:
            raise ConfigError("trials: must be at least 1")
        if not self.eta_grid or any(not 0 <= e < 1 for e in self.eta_grid):
            raise ConfigError("eta_grid: values must lie in [0, 1)")
        if not self.modes or len(set(self.modes)) != len(self.modes):
            raise ConfigError("modes: must be a non-empty list without repeats")
        if self.delta < 0:
            raise ConfigError("delta: must be non-negative")
        if not self.kappa > 0:
            raise ConfigError("kappa: must be positive")
        try:
            self.scenario()
        except ValidationError as exc:
            raise ConfigError(f"pairs: {exc}") from None

    def anchor_set(self) -> AnchorSet:
        return _anchor_set(self.anchors)

    def scenario(self) -> RangingScenario:
        return _scenario(self.pairs, len(self.anchors))

    def to_dict(self) -> dict:
        return {
            "Dx": self.Dx, "Da": self.Da,
            "anchors": [list(a) for a in self.anchors],
            "pairs": [list(p) for p in self.pairs],
            "eta_grid": list(self.eta_grid),
            "trials": self.trials,
            "delta": self.delta,
            "modes": [m.value for m in self.modes],
            "master_seed": self.master_seed,
            "weighted": self.weighted,
            "kappa": self.kappa,
            "solver": asdict(self.solver),
        }


@lru_cache(maxsize=16)
def _anchor_set(anchors: tuple) -> AnchorSet:
    return AnchorSet(np.array(anchors))


@lru_cache(maxsize=16)
def _scenario(pairs: tuple, n: int) -> RangingScenario:
    return RangingScenario.from_pairs(pairs, n=n)


REQUIRED_KEYS = ("Dx", "Da", "anchors", "pairs", "eta_grid", "trials", "delta", "modes", "master_seed")
OPTIONAL_KEYS = ("weighted", "kappa", "solver")
_NUMERIC = {"Dx": float, "Da": float, "trials": int, "delta": float, "master_seed": int, "kappa": float}


def config_from_dict(data) -> ExperimentConfig:
    if not isinstance(data, dict):
        raise ConfigError("configuration must be a mapping of keys to values")
    unknown = sorted(set(data) - set(REQUIRED_KEYS) - set(OPTIONAL_KEYS))
    if unknown:
        raise ConfigError(f"unknown configuration key(s): {', '.join(unknown)}")
    missing = [k for k in REQUIRED_KEYS if k not in data]
    if missing:
        raise ConfigError(f"missing required configuration key(s): {', '.join(missing)}")
    kwargs = {}
    for key, value in data.items():
        if key in _NUMERIC:
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise ConfigError(f"{key}: expected a number, got {value!r}")
            if _NUMERIC[key] is int and value != int(value):
                raise ConfigError(f"{key}: expected an integer, got {value!r}")
            value = _NUMERIC[key](value)
        elif key == "weighted" and not isinstance(value, bool):
            raise ConfigError(f"weighted: expected true or false, got {value!r}")
        elif key == "solver":
            if not isinstance(value, dict):
                raise ConfigError("solver: expected a mapping")
            names = {f.name for f in fields(SolverSettings)}
            bad = sorted(set(value) - names)
            if bad:
                raise ConfigError(f"unknown solver key(s): {', '.join(bad)}")
            try:
                value = SolverSettings(**value)
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"solver: {exc}") from None
        kwargs[key] = value
    try:
        return ExperimentConfig(**kwargs)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None


def read_config(path) -> ExperimentConfig:
    text = Path(path).read_text()
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f" at line {mark.line + 1}, column {mark.column + 1}" if mark else ""
        raise ConfigError(f"{path}: invalid YAML{where}: {getattr(exc, 'problem', exc)}") from None
    try:
        return config_from_dict(data)
    except ConfigError as exc:
        raise ConfigError(f"{path}: {exc}") from None


def write_config(config: ExperimentConfig, path) -> None:
    Path(path).write_text(yaml.safe_dump(config.to_dict(), sort_keys=False, default_flow_style=None))


# -- sampling and trials --------------------------------------------------------------

def sample_sensor(config: ExperimentConfig, trial_index: int) -> np.ndarray | None:
    """Uniform sensor in ``[-Dx, Dx]^3``, redrawn while any true difference is nearly zero.

    Returns ``None`` when the retry budget is exhausted.
    """
    rng = np.random.default_rng(np.random.SeedSequence([config.master_seed, SENSOR_STREAM, trial_index]))
    anchors, scenario = config.anchor_set(), config.scenario()
    for _ in range(MAX_SENSOR_RETRIES + 1):
        x = rng.uniform(-config.Dx, config.Dx, 3)
        if np.min(np.abs(truth_vector(x, anchors, scenario))) >= MIN_DIFFERENCE:
            return x
    return None


@dataclass
class TrialRecord:
    trial: int
    eta: float
    mode: str
    x: tuple
    x_hat: tuple
    error: float
    bound: float
    status: str
    iterations: int
    seconds: float

    @property
    def succeeded(self) -> bool:
        return self.status in SUCCESS_STATUSES

    def row(self) -> list[str]:
        return [str(self.trial), repr(self.eta), self.mode, *map(repr, self.x), *map(repr, self.x_hat),
                repr(self.error), repr(self.bound), self.status, str(self.iterations), repr(self.seconds)]

    @classmethod
    def from_row(cls, row: dict) -> "TrialRecord":
        f = lambda k: float(row[k])
        return cls(int(row["trial"]), f("eta"), row["mode"], (f("x0"), f("x1"), f("x2")),
                   (f("xhat0"), f("xhat1"), f("xhat2")), f("error_m"), f("bound_m"), row["status"],
                   int(row["iters"]), f("seconds"))


def geometry_bound(x, config: ExperimentConfig, eta: float) -> float:
    """Jensen bound at this geometry; 0 at eta = 0 and NaN when unavailable."""
    if eta == 0:
        return 0.0
    try:
        return jensen_bound(fisher_information(x, config.anchor_set(), config.scenario(), eta))
    except (UnboundedBoundError, ValidationError):
        return math.nan


def run_trial(config: ExperimentConfig, trial: int, eta: float, mode: NoiseMode, x=None) -> TrialRecord:
    mode = NoiseMode.parse(mode)
    nan3 = (math.nan,) * 3
    if x is None:
        x = sample_sensor(config, trial)
    if x is None:
        return TrialRecord(trial, eta, mode.value, nan3, nan3, math.nan, math.nan, "skipped", 0, 0.0)
    anchors, scenario = config.anchor_set(), config.scenario()
    batch = measure(x, anchors, scenario, NoiseSpec(eta, mode, config.master_seed, trial))
    bound = geometry_bound(x, config, eta)
    try:
        sol = localize(anchors, scenario, batch.values, delta=config.delta, settings=config.solver,
                       weighted=config.weighted)
    except (ValueError, ArithmeticError, np.linalg.LinAlgError):
        return TrialRecord(trial, eta, mode.value, tuple(map(float, x)), nan3, math.nan, bound, "error", 0, 0.0)
    status = "fallback" if sol.fallback else sol.status.value
    x_hat = tuple(map(float, sol.x_hat))
    error = float(np.linalg.norm(np.asarray(x_hat) - x))
    return TrialRecord(trial, eta, mode.value, tuple(map(float, x)), x_hat, error, bound, status,
                       sol.iterations, sol.solve_seconds)


def _run_chunk(args):
    config, items = args
    return [run_trial(config, *item) for item in items]


def run_campaign(config: ExperimentConfig, workers: int = 1, progress=None) -> list[TrialRecord]:
    """Run every (eta, mode, trial) cell; records are ordered by eta, mode, then trial."""
    sensors = [sample_sensor(config, t) for t in range(config.trials)]
    items = [(t, eta, mode, sensors[t]) for eta in config.eta_grid for mode in config.modes
             for t in range(config.trials)]
    order = {(eta, mode.value): i for i, (eta, mode) in
             enumerate((e, m) for e in config.eta_grid for m in config.modes)}
    if workers > 1:
        chunks = [items[i::workers] for i in range(workers)]
        with ProcessPoolExecutor(workers) as pool:
            records = [r for part in pool.map(_run_chunk, [(config, c) for c in chunks]) for r in part]
    else:
        records = []
        for k, item in enumerate(items):
            records.append(run_trial(config, *item))
            if progress is not None:
                progress(k + 1, len(items))
    records.sort(key=lambda r: (order[(r.eta, r.mode)], r.trial))
    return records


# -- aggregation and files ---------------------------------------------------------------

@dataclass
class SummaryRow:
    eta: float
    mode: str
    trials: int
    successes: int
    success_rate: float
    me: float
    me_stderr: float
    mean_bound: float
    bound_unavailable: int
    bias_norm: float
    mean_iters: float
    mean_seconds: float

    def row(self) -> list[str]:
        return [repr(self.eta), self.mode, str(self.trials), str(self.successes),
                *(repr(float(v)) for v in (self.success_rate, self.me, self.me_stderr, self.mean_bound)),
                str(self.bound_unavailable),
                *(repr(float(v)) for v in (self.bias_norm, self.mean_iters, self.mean_seconds))]


def summarize(records: list[TrialRecord]) -> list[SummaryRow]:
    """One row per (eta, mode); cells without a successful trial report NaN statistics."""
    if not records:
        raise ValidationError("cannot summarize an empty record list")
    cells: dict[tuple, list[TrialRecord]] = {}
    for r in records:
        cells.setdefault((r.eta, r.mode), []).append(r)
    rows = []
    for (eta, mode), recs in sorted(cells.items()):
        ok = [r for r in recs if r.succeeded]
        bounds = np.array([r.bound for r in recs if r.status != "skipped"])
        finite = bounds[np.isfinite(bounds)]
        mean_bound = float(finite.mean()) if finite.size else math.nan
        if ok:
            truths = np.array([r.x for r in ok])
            est = np.array([r.x_hat for r in ok])
            errs = np.linalg.norm(est - truths, axis=1)
            me = mean_error(truths, est)
            se = float(errs.std(ddof=1) / np.sqrt(len(ok))) if len(ok) > 1 else math.nan
            bias = float(np.linalg.norm((est - truths).mean(axis=0)))
            iters = float(np.mean([r.iterations for r in ok]))
            secs = float(np.mean([r.seconds for r in ok]))
        else:
            me = se = bias = iters = secs = math.nan
        rows.append(SummaryRow(eta, mode, len(recs), len(ok), len(ok) / len(recs), me, se, mean_bound,
                               int(bounds.size - finite.size), bias, iters, secs))
    return rows


def write_results(records: list[TrialRecord], summary: list[SummaryRow] | None, path,
                  summary_path=None) -> None:
    """Write trial records as CSV and, when given, the summary table next to them."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RESULT_HEADER)
        for r in records:
            w.writerow(r.row())
    if summary is not None:
        summary_path = Path(summary_path) if summary_path else path.with_suffix(".summary.csv")
        summary_path.write_text(format_summary(summary))


def format_summary(summary: list[SummaryRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SUMMARY_HEADER)
    for row in summary:
        w.writerow(row.row())
    return buf.getvalue()


def read_results(path) -> list[TrialRecord]:
    with Path(path).open(newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != RESULT_HEADER:
            raise ValidationError(f"{path}: unexpected header {reader.fieldnames}")
        records = []
        for lineno, row in enumerate(reader, start=2):
            try:
                records.append(TrialRecord.from_row(row))
            except (TypeError, ValueError) as exc:
                raise ValidationError(f"{path}, line {lineno}: {exc}") from None
    return records


def with_overrides(config: ExperimentConfig, **changes) -> ExperimentConfig:
    """Copy of ``config`` with the non-None entries of ``changes`` applied."""
    return replace(config, **{k: v for k, v in changes.items() if v is not None})
