"""Experiment engine: policy x horizon grids under common random numbers.

Every sample ``i`` draws one nature outcome at the largest horizon; every
policy and every horizon plays against a truncation of that same outcome, and
the bounds are computed on it as well.  Regret is reported paired per sample
against T * max_a theta_a, so the TS bound row is identically zero.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
import yaml

from .bounds import mean_and_stderr, nature_stream, regret_benchmark
from .dp import DEFAULT_STATE_BUDGET, GENERIC_STATE_BUDGET, state_count
from .errors import BudgetExceededError, NumericalError, ValidationError
from .inner import DEFAULT_LATTICE_BUDGET, PenaltyKind, lattice_cost, solve_inner
from .models import BETA, GAUSSIAN, BetaBelief, BeliefVector, GaussianBelief, sample_outcome
from .policies import PolicyKind, run_episode
from .rng import RngStream

log = logging.getLogger(__name__)

JOBS_ENV = "IRS_JOBS"
CSV_FIELDS = ("kind", "name", "T", "value", "stderr", "regret", "regret_bound",
              "runtime_ms", "regret_stderr")
BENCHMARK_NAME = "ts-quadrature"


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------

def _float_list(value, K: int, name: str) -> list[float]:
    if isinstance(value, (int, float)):
        return [float(value)] * K
    if not isinstance(value, (list, tuple)):
        raise ValidationError(f"model.{name} must be a number or a list")
    vals = [float(v) for v in value]
    if len(vals) == 1:
        vals = vals * K
    if len(vals) != K:
        raise ValidationError(f"model.{name} has {len(vals)} entries, expected {K}")
    return vals


def build_prior(model: dict) -> BeliefVector:
    """Belief vector from a model mapping (family plus per-arm parameters)."""
    if not isinstance(model, dict):
        raise ValidationError("model must be a mapping")
    family = str(model.get("family", "")).lower()
    beta_keys = {"alpha", "beta"}
    gauss_keys = {"mean", "variance", "noise_variance", "noise_sd"}
    known = {"family", "arms"} | beta_keys | gauss_keys
    unknown = set(model) - known
    if unknown:
        raise ValidationError(f"unknown model keys: {sorted(unknown)}")
    lengths = [len(v) for k, v in model.items()
               if k in beta_keys | gauss_keys and isinstance(v, (list, tuple)) and len(v) > 1]
    K = int(model.get("arms", max(lengths, default=0)))
    if K < 1:
        raise ValidationError("model needs at least one arm (set 'arms' or list parameters)")
    if family == BETA:
        if set(model) & gauss_keys:
            raise ValidationError("Gaussian parameters given for a Beta model")
        return BetaBelief(_float_list(model.get("alpha", 1.0), K, "alpha"),
                          _float_list(model.get("beta", 1.0), K, "beta"))
    if family == GAUSSIAN:
        if set(model) & beta_keys:
            raise ValidationError("Beta parameters given for a Gaussian model")
        if "noise_sd" in model and "noise_variance" in model:
            raise ValidationError("give noise_sd or noise_variance, not both")
        if "noise_sd" in model:
            noise = [s * s for s in _float_list(model["noise_sd"], K, "noise_sd")]
        else:
            noise = _float_list(model.get("noise_variance", 1.0), K, "noise_variance")
        return GaussianBelief(_float_list(model.get("mean", 0.0), K, "mean"),
                              _float_list(model.get("variance", 1.0), K, "variance"), noise)
    raise ValidationError(f"model.family must be 'beta' or 'gaussian', got {family!r}")


@dataclass
class ExperimentConfig:
    model: dict
    horizons: list[int]
    policies: list[str]
    penalties: list[str]
    samples: int
    seed: int
    jobs: int = 1
    lattice_budget: float = DEFAULT_LATTICE_BUDGET
    record_timing: bool = False
    output: dict = field(default_factory=dict)

    def __post_init__(self):
        self.prior = build_prior(self.model)
        if isinstance(self.horizons, int):
            self.horizons = [self.horizons]
        self.horizons = [int(t) for t in self.horizons]
        if any(t < 1 for t in self.horizons):
            raise ValidationError("horizons must be positive")
        if any(b <= a for a, b in zip(self.horizons, self.horizons[1:])):
            raise ValidationError("horizons must be strictly increasing")
        self.policies = [PolicyKind.parse(p).value for p in self.policies]
        self.penalties = [PenaltyKind.parse(z).value for z in self.penalties]
        if len(set(self.policies)) != len(self.policies) or len(set(self.penalties)) != len(self.penalties):
            raise ValidationError("policies and penalties must not repeat")
        if PolicyKind.OPT.value in self.policies and self.prior.family != BETA:
            raise ValidationError("the opt policy is available for Beta models only")
        if int(self.samples) != self.samples or self.samples < 2:
            raise ValidationError("samples must be an integer >= 2")
        self.samples = int(self.samples)
        if self.seed is None or int(self.seed) != self.seed:
            raise ValidationError("an integer seed is required")
        self.seed = int(self.seed)
        if int(self.jobs) < 1:
            raise ValidationError("jobs must be >= 1")
        self.jobs = int(self.jobs)
        if not isinstance(self.output, dict):
            raise ValidationError("output must be a mapping")

    @property
    def t_max(self) -> int:
        return self.horizons[-1] if self.horizons else 0

    @classmethod
    def from_dict(cls, data: dict) -> ExperimentConfig:
        if not isinstance(data, dict):
            raise ValidationError("config must be a mapping")
        required = ("model", "horizons", "samples", "seed")
        missing = [k for k in required if k not in data]
        if missing:
            raise ValidationError(f"config is missing {missing}")
        allowed = set(required) | {"policies", "penalties", "jobs", "lattice_budget",
                                   "record_timing", "output"}
        unknown = set(data) - allowed
        if unknown:
            raise ValidationError(f"unknown config keys: {sorted(unknown)}")
        try:
            return cls(model=data["model"], horizons=data["horizons"],
                       policies=list(data.get("policies", [])),
                       penalties=list(data.get("penalties", [])),
                       samples=data["samples"], seed=data["seed"], jobs=data.get("jobs", 1),
                       lattice_budget=float(data.get("lattice_budget", DEFAULT_LATTICE_BUDGET)),
                       record_timing=bool(data.get("record_timing", False)),
                       output=dict(data.get("output", {}) or {}))
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ValidationError):
                raise
            raise ValidationError(f"malformed config: {exc}") from exc

    @classmethod
    def load(cls, path, overrides: dict | None = None) -> ExperimentConfig:
        """Read a YAML (or JSON, a YAML subset) config file.

        Non-None entries of ``overrides`` replace top-level keys.
        """
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ValidationError(f"cannot read config {path}: {exc}") from exc
        try:
            data = yaml.safe_load(text)
        except yaml.YAMLError as exc:
            raise ValidationError(f"config {path} is not valid YAML: {exc}") from exc
        if isinstance(data, dict) and overrides:
            data.update({k: v for k, v in overrides.items() if v is not None})
        return cls.from_dict(data)


# ---------------------------------------------------------------------------
# Result table
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Row:
    kind: str
    name: str
    T: int
    value: float | None
    stderr: float | None
    regret: float | None = None
    regret_bound: float | None = None
    runtime_ms: float | None = None
    regret_stderr: float | None = None


@dataclass(frozen=True)
class Failure:
    kind: str
    name: str
    T: int
    status: str
    message: str


def _fmt(x) -> str:
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return ""
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    return f"{float(x):.6g}"


def _parse_num(s):
    return None if s in ("", None) else float(s)


@dataclass
class RegretTable:
    rows: list[Row] = field(default_factory=list)
    failures: list[Failure] = field(default_factory=list)

    def get(self, kind: str, name: str, T: int) -> Row:
        for row in self.rows:
            if row.kind == kind and row.name == name and row.T == T:
                return row
        raise KeyError((kind, name, T))

    def rounded(self) -> RegretTable:
        """The table as it reads back after export (6 significant digits)."""
        rows = [Row(r.kind, r.name, r.T, *[_parse_num(_fmt(getattr(r, f))) for f in CSV_FIELDS[3:]])
                for r in self.rows]
        return RegretTable(rows, list(self.failures))

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_FIELDS)
        for r in self.rows:
            writer.writerow([r.kind, r.name, str(r.T)] + [_fmt(getattr(r, f)) for f in CSV_FIELDS[3:]])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> RegretTable:
        reader = csv.DictReader(io.StringIO(text))
        rows = [Row(d["kind"], d["name"], int(d["T"]),
                    *[_parse_num(d.get(f, "")) for f in CSV_FIELDS[3:]]) for d in reader]
        return cls(rows)

    def to_json(self) -> str:
        rows = []
        for r in self.rows:
            d = {"kind": r.kind, "name": r.name, "T": r.T}
            for f in CSV_FIELDS[3:]:
                d[f] = _parse_num(_fmt(getattr(r, f)))
            rows.append(d)
        payload = {"fields": list(CSV_FIELDS), "rows": rows,
                   "failures": [asdict(f) for f in self.failures]}
        return json.dumps(payload, indent=2) + "\n"

    @classmethod
    def from_json(cls, text: str) -> RegretTable:
        data = json.loads(text)
        rows = [Row(d["kind"], d["name"], int(d["T"]), *[d.get(f) for f in CSV_FIELDS[3:]])
                for d in data["rows"]]
        failures = [Failure(**f) for f in data.get("failures", [])]
        return cls(rows, failures)


def export(table: RegretTable, fmt: str, path=None) -> str:
    """Serialize to csv or json; writes to ``path`` when given."""
    if fmt == "csv":
        text = table.to_csv()
    elif fmt == "json":
        text = table.to_json()
    else:
        raise ValidationError(f"unknown export format {fmt!r}")
    if path is not None:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(text)
    return text


def write_curves(table: RegretTable, out_dir) -> list[Path]:
    """One CSV per policy/bound with columns T, regret, stderr."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    series: dict[tuple[str, str], list[Row]] = {}
    for row in table.rows:
        if row.kind in ("policy", "bound"):
            series.setdefault((row.kind, row.name), []).append(row)
    written = []
    for (kind, name), rows in series.items():
        path = out / f"{kind}_{name}.csv"
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(("T", "regret", "stderr"))
        for r in rows:
            gap = r.regret if kind == "policy" else r.regret_bound
            writer.writerow((r.T, _fmt(gap), _fmt(r.regret_stderr)))
        path.write_text(buf.getvalue())
        written.append(path)
    return written


# ---------------------------------------------------------------------------
# Running
# ---------------------------------------------------------------------------

def nature_digest(outcome) -> str:
    h = hashlib.sha256()
    h.update(np.ascontiguousarray(outcome.theta, dtype=np.float64).tobytes())
    h.update(np.ascontiguousarray(outcome.rewards, dtype=np.float64).tobytes())
    return h.hexdigest()


def policy_stream(master: RngStream, name: str, T: int, index: int) -> RngStream:
    return master.child("policy", name, int(T), int(index))


def _precheck(config: ExperimentConfig) -> dict:
    """Cells refused up front because their solver budget is exceeded."""
    skipped = {}
    K = config.prior.K
    for T in config.horizons:
        cost = lattice_cost(K, T)
        if cost > config.lattice_budget:
            msg = f"lattice needs {cost:.3g} cell operations (budget {config.lattice_budget:.3g})"
            if PolicyKind.IRS_V_EMAX.value in config.policies:
                skipped[("policy", PolicyKind.IRS_V_EMAX.value, T)] = msg
            if PenaltyKind.IRS_V_EMAX.value in config.penalties:
                skipped[("bound", PenaltyKind.IRS_V_EMAX.value, T)] = msg
        if PolicyKind.OPT.value in config.policies:
            limit = DEFAULT_STATE_BUDGET if K == 2 else GENERIC_STATE_BUDGET
            states = state_count(K, T)
            if states > limit:
                skipped[("policy", PolicyKind.OPT.value, T)] = \
                    f"exact DP needs {states:.3g} states (budget {limit:.3g})"
    return skipped


def _run_chunk(config: ExperimentConfig, indices: list[int], skip: set) -> list[dict]:
    master = RngStream(config.seed)
    prior = config.prior
    out = []
    broken = dict.fromkeys(skip, "")
    for i in indices:
        nature = sample_outcome(prior, config.t_max, nature_stream(master, i))
        res = {"index": i, "digest": nature_digest(nature), "wts": {}, "cells": {}, "errors": {}}
        for T in config.horizons:
            view = nature.truncate(T)
            res["wts"][T] = T * float(np.max(view.theta))
            for name in config.policies:
                key = ("policy", name, T)
                if key in broken:
                    continue
                t0 = time.perf_counter()
                try:
                    rec = run_episode(name, T, prior, view, policy_stream(master, name, T, i),
                                      budget=config.lattice_budget)
                except (BudgetExceededError, NumericalError, ValidationError, ArithmeticError) as exc:
                    broken[key] = res["errors"][key] = f"{type(exc).__name__}: {exc}"
                    continue
                res["cells"][key] = (rec.realized_mean_payoff, time.perf_counter() - t0)
            for name in config.penalties:
                key = ("bound", name, T)
                if key in broken:
                    continue
                t0 = time.perf_counter()
                try:
                    value = solve_inner(name, view, T, prior, config.lattice_budget).value
                except (BudgetExceededError, NumericalError, ValidationError, ArithmeticError) as exc:
                    broken[key] = res["errors"][key] = f"{type(exc).__name__}: {exc}"
                    continue
                res["cells"][key] = (value, time.perf_counter() - t0)
        out.append(res)
    return out


def resolve_jobs(config: ExperimentConfig, jobs: int | None = None) -> int:
    if jobs is not None:
        n = int(jobs)
    elif os.environ.get(JOBS_ENV):
        try:
            n = int(os.environ[JOBS_ENV])
        except ValueError:
            raise ValidationError(f"{JOBS_ENV} must be an integer") from None
    else:
        n = config.jobs
    if n < 1:
        raise ValidationError("worker count must be >= 1")
    return n


@dataclass
class ExperimentResult:
    table: RegretTable
    nature_digests: list[str]


def run_experiment_detailed(config: ExperimentConfig, jobs: int | None = None,
                            progress: Callable[[int, int], None] | None = None) -> ExperimentResult:
    n_jobs = resolve_jobs(config, jobs)
    pre = _precheck(config)
    S = config.samples
    if not config.horizons:
        return ExperimentResult(RegretTable(), [])
    chunk = max(1, math.ceil(S / (4 * n_jobs)))
    chunks = [list(range(s, min(S, s + chunk))) for s in range(0, S, chunk)]
    results: list[dict] = []
    if n_jobs == 1:
        for c in chunks:
            results.extend(_run_chunk(config, c, set(pre)))
            if progress:
                progress(len(results), S)
    else:
        with ProcessPoolExecutor(max_workers=n_jobs) as pool:
            futures = [pool.submit(_run_chunk, config, c, set(pre)) for c in chunks]
            for fut in futures:
                results.extend(fut.result())
                if progress:
                    progress(len(results), S)
    results.sort(key=lambda r: r["index"])
    table = _aggregate(config, results, pre)
    return ExperimentResult(table, [r["digest"] for r in results])


def run_experiment(config: ExperimentConfig, jobs: int | None = None,
                   progress: Callable[[int, int], None] | None = None) -> RegretTable:
    """Run every (policy, T) and (penalty, T) cell on S shared outcomes."""
    return run_experiment_detailed(config, jobs, progress).table


def _aggregate(config: ExperimentConfig, results: list[dict], pre: dict) -> RegretTable:
    failures = []
    errors = {}
    for res in results:
        for key, msg in res["errors"].items():
            errors.setdefault(key, f"sample {res['index']}: {msg}")
    rows = []
    for T in config.horizons:
        wts = np.array([r["wts"][T] for r in results])
        cells = [("policy", p) for p in config.policies] + [("bound", z) for z in config.penalties]
        for kind, name in cells:
            key = (kind, name, T)
            if key in pre:
                failures.append(Failure(kind, name, T, "skipped", pre[key]))
                continue
            if key in errors:
                status = "skipped" if "BudgetExceededError" in errors[key] else "failed"
                failures.append(Failure(kind, name, T, status, errors[key]))
                continue
            vals = np.array([r["cells"][key][0] for r in results])
            secs = np.array([r["cells"][key][1] for r in results])
            value, se = mean_and_stderr(vals)
            gap, gap_se = mean_and_stderr(wts - vals)
            runtime = float(np.median(secs) * 1e3) if config.record_timing else None
            if kind == "policy":
                rows.append(Row(kind, name, T, value, se, regret=gap, runtime_ms=runtime,
                                regret_stderr=gap_se))
            else:
                rows.append(Row(kind, name, T, value, se, regret_bound=gap, runtime_ms=runtime,
                                regret_stderr=gap_se))
        rows.append(Row("benchmark", BENCHMARK_NAME, T, regret_benchmark(T, config.prior), 0.0))
    for f in failures:
        log.warning("%s %s at T=%d %s: %s", f.kind, f.name, f.T, f.status, f.message)
    return RegretTable(rows, failures)
