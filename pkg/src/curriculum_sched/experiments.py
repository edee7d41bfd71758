"""Multi-seed comparison of data-ordering strategies.

A suite runs every strategy on the same dataset with the same list of
seeds. For a given seed all strategies share the data split, the training
restriction and the model initialisation; only the epoch orders differ.
Results are reduced into per-strategy mean/median/SD tables and
seed-paired t-tests, and emitted as CSV, JSON or a markdown table.
"""

from __future__ import annotations

import csv
import io
import json
import math
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from functools import lru_cache
from itertools import combinations
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import datagen
from .datagen import LabeledDataset, Split, SynthSpec
from .metrics import (
    aggregate_posterior,
    paired_t_test,
    weighted_f1,
    within_group_misprediction_rate,
)
from .model import DivergenceError, EpochRecord, Hyperparams, init_classifier, predict_proba, train
from .scheduler import (
    CounterWindow,
    CountUnit,
    CurriculumScheduler,
    CurriculumSpec,
    Direction,
    EpochOrder,
    SamplingMode,
    Scheme,
)

SCHEMA_VERSION = 1
RANDOM = "random"
METRICS = ("fine_f1", "coarse_f1")

RUN_COLUMNS = (
    "strategy", "seed", "status", "fine_f1", "coarse_f1", "coarse_f1_fine_argmax",
    "within_group_mispred_rate", "fine_accuracy", "best_epoch", "epochs_run", "error",
)
SUMMARY_COLUMNS = (
    "strategy", "n_runs", "n_failed",
    "fine_f1_mean", "fine_f1_median", "fine_f1_sd",
    "coarse_f1_mean", "coarse_f1_median", "coarse_f1_sd",
    "within_group_mispred_rate_mean",
)
PVALUE_COLUMNS = ("metric", "strategy_a", "strategy_b", "n_pairs", "mean_diff", "t", "p_value", "flag")
TRAJECTORY_COLUMNS = (
    "strategy", "seed", "epoch", "learning_rate", "train_loss", "val_loss", "val_f1",
    "prob_sum_error", "max_prob_deviation",
)


class ConfigError(ValueError):
    """Malformed or inconsistent suite configuration."""


class ReportError(RuntimeError):
    """A report cannot be produced or written."""


@dataclass(frozen=True)
class Strategy:
    """A named ordering strategy; ``scheme="random"`` is the shuffle baseline.

    Curriculum parameters left as ``None`` are filled from the dataset
    taxonomy (difficulty ranking, agreement scores) when the run starts.
    """

    name: str
    scheme: str
    direction: str = Direction.CURRICULUM.value
    rank_order: tuple[int, ...] | None = None
    agreement_scores: tuple[float, ...] | None = None
    decay_scale: float = 10.0
    counter_window: str = CounterWindow.EPOCH.value
    count_unit: str = CountUnit.MEMBERSHIP.value

    def __post_init__(self) -> None:
        if self.scheme != RANDOM:
            Scheme(self.scheme)
            Direction(self.direction)
        if self.rank_order is not None:
            object.__setattr__(self, "rank_order", tuple(self.rank_order))
        if self.agreement_scores is not None:
            object.__setattr__(self, "agreement_scores", tuple(self.agreement_scores))

    @property
    def is_random(self) -> bool:
        return self.scheme == RANDOM

    def resolve(self, taxonomy) -> CurriculumSpec | None:
        if self.is_random:
            return None
        return CurriculumSpec(
            scheme=Scheme(self.scheme),
            direction=Direction(self.direction),
            rank_order=self.rank_order if self.rank_order is not None else taxonomy.difficulty_rank,
            agreement_scores=(
                self.agreement_scores if self.agreement_scores is not None else taxonomy.agreement
            ),
            decay_scale=self.decay_scale,
            counter_window=CounterWindow(self.counter_window),
            count_unit=CountUnit(self.count_unit),
        )


def named_strategy(name: str, **overrides) -> Strategy:
    """Build one of the canonical arms: ``random``, ``uniform``, ``rank``,
    ``anti-rank``, ``frequency``, ``anti-frequency``, ``agreement``,
    ``anti-agreement``."""
    if name == RANDOM:
        return Strategy(RANDOM, RANDOM, **overrides)
    anti = name.startswith("anti-")
    scheme = name[5:] if anti else name
    try:
        Scheme(scheme)
    except ValueError:
        raise ConfigError(f"unknown strategy {name!r}") from None
    if anti and scheme == Scheme.UNIFORM.value:
        raise ConfigError("anti-uniform is the same as uniform")
    direction = Direction.ANTI_CURRICULUM if anti else Direction.CURRICULUM
    return Strategy(name, scheme, direction.value, **overrides)


STANDARD_STRATEGIES = (
    "random", "uniform", "frequency", "anti-frequency",
    "rank", "anti-rank", "agreement", "anti-agreement",
)


@dataclass(frozen=True)
class RunConfig:
    strategy: Strategy
    dataset: SynthSpec | str
    hyperparams: Hyperparams = field(default_factory=Hyperparams)
    training_fraction: float = 1.0
    seeds: tuple[int, ...] = tuple(range(10))
    sampling_mode: str = SamplingMode.WITH_REPLACEMENT.value
    output_dir: str | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))
        if not self.seeds:
            raise ConfigError("at least one seed is required")
        if len(set(self.seeds)) != len(self.seeds):
            raise ConfigError("seeds must be distinct")
        if not 0.0 < self.training_fraction <= 1.0:
            raise ConfigError("training_fraction must lie in (0, 1]")
        SamplingMode(self.sampling_mode)


@dataclass
class RunResult:
    strategy: str
    seed: int
    status: str = "ok"
    fine_f1: float = math.nan
    coarse_f1: float = math.nan
    coarse_f1_fine_argmax: float = math.nan
    within_group_mispred_rate: float = math.nan
    fine_accuracy: float = math.nan
    best_epoch: int = -1
    epochs_run: int = 0
    error: str = ""
    trajectory: list[EpochRecord] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.status == "ok"


@dataclass
class StrategySummary:
    strategy: str
    n_runs: int
    n_failed: int
    fine_f1_mean: float
    fine_f1_median: float
    fine_f1_sd: float
    coarse_f1_mean: float
    coarse_f1_median: float
    coarse_f1_sd: float
    within_group_mispred_rate_mean: float


@dataclass
class Comparison:
    metric: str
    strategy_a: str
    strategy_b: str
    n_pairs: int
    mean_diff: float
    t: float
    p_value: float
    flag: str = ""


@dataclass
class RunReport:
    runs: list[RunResult]
    summaries: list[StrategySummary]
    comparisons: list[Comparison]
    meta: dict = field(default_factory=dict)

    def summary(self, strategy: str) -> StrategySummary:
        for s in self.summaries:
            if s.strategy == strategy:
                return s
        raise KeyError(strategy)

    def comparison(self, a: str, b: str, metric: str = "fine_f1") -> Comparison:
        for c in self.comparisons:
            if c.metric == metric and {c.strategy_a, c.strategy_b} == {a, b}:
                return c
        raise KeyError((a, b, metric))

    def to_dict(self) -> dict:
        return _jsonable({
            "schema_version": SCHEMA_VERSION,
            "meta": self.meta,
            "runs": [asdict(r) for r in self.runs],
            "summaries": [asdict(s) for s in self.summaries],
            "comparisons": [asdict(c) for c in self.comparisons],
        })

    @classmethod
    def from_dict(cls, data: dict) -> "RunReport":
        if data.get("schema_version") != SCHEMA_VERSION:
            raise ReportError(f"unsupported report schema {data.get('schema_version')}")
        runs = []
        for r in data["runs"]:
            r = _unjson(r)
            r["trajectory"] = [EpochRecord(**_unjson(t)) for t in r["trajectory"]]
            runs.append(RunResult(**r))
        return cls(
            runs,
            [StrategySummary(**_unjson(s)) for s in data["summaries"]],
            [Comparison(**_unjson(c)) for c in data["comparisons"]],
            data.get("meta", {}),
        )


def _jsonable(obj):
    if isinstance(obj, float):
        return None if math.isnan(obj) else obj if math.isfinite(obj) else ("inf" if obj > 0 else "-inf")
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.generic):
        return _jsonable(obj.item())
    return obj


_FLOAT_FIELDS = {
    "fine_f1", "coarse_f1", "coarse_f1_fine_argmax", "within_group_mispred_rate", "fine_accuracy",
    "fine_f1_mean", "fine_f1_median", "fine_f1_sd", "coarse_f1_mean", "coarse_f1_median",
    "coarse_f1_sd", "within_group_mispred_rate_mean", "mean_diff", "t", "p_value",
    "learning_rate", "train_loss", "val_loss", "val_f1", "prob_sum_error", "max_prob_deviation",
}


def _unjson(d: dict) -> dict:
    out = {}
    for k, v in d.items():
        if k in _FLOAT_FIELDS:
            v = math.nan if v is None else float(v)
        out[k] = v
    return out


# -- running -----------------------------------------------------------------


def baseline_random_order(n: int, rng: np.random.Generator) -> EpochOrder:
    """A fresh uniform permutation; no probabilities, no counters."""
    if n < 1:
        raise ValueError("need at least one sample")
    return EpochOrder(rng.permutation(n), with_replacement=False)


@lru_cache(maxsize=8)
def _load_dataset(source) -> LabeledDataset:
    if isinstance(source, SynthSpec):
        return datagen.generate(source)
    return datagen.load_csv(source)


def run_one(config: RunConfig, seed: int) -> RunResult:
    """Train and evaluate one (strategy, seed) work unit."""
    name = config.strategy.name
    base = _load_dataset(config.dataset)
    init_seq, restrict_seq, order_seq = np.random.SeedSequence(seed).spawn(3)
    data = datagen.restrict_training(base, config.training_fraction, np.random.default_rng(restrict_seq))
    taxonomy = data.taxonomy
    Xtr, ytr = data.part(Split.TRAIN)
    Xva, yva = data.part(Split.VAL)
    Xte, yte = data.part(Split.TEST)
    m = taxonomy.n_fine
    state = init_classifier(Xtr.shape[1], m, config.hyperparams, np.random.default_rng(init_seq))
    order_rng = np.random.default_rng(order_seq)

    curriculum = config.strategy.resolve(taxonomy)
    if curriculum is None:
        def next_order(epoch):
            return baseline_random_order(len(ytr), order_rng)
        probe = None
    else:
        scheduler = CurriculumScheduler(curriculum, ytr, m, config.sampling_mode)

        def next_order(epoch):
            return scheduler.next_order(order_rng)

        def probe():
            p = scheduler.state.probabilities
            return abs(float(p.sum()) - 1.0), float(np.abs(p - 1.0 / p.shape[0]).max())

    result = RunResult(name, seed)
    try:
        outcome = train(state, Xtr, ytr, Xva, yva, next_order, probe)
    except (DivergenceError, FloatingPointError) as exc:
        result.status = "diverged"
        result.error = str(exc)
        return result

    groups = np.asarray(taxonomy.coarse_groups)
    posterior = predict_proba(state.params, Xte)
    fine_pred = posterior.argmax(axis=1)
    coarse_true = groups[yte]
    coarse_pred = aggregate_posterior(posterior, groups, taxonomy.n_coarse).argmax(axis=1)
    result.fine_f1 = weighted_f1(yte, fine_pred, m)
    result.coarse_f1 = weighted_f1(coarse_true, coarse_pred, taxonomy.n_coarse)
    result.coarse_f1_fine_argmax = weighted_f1(coarse_true, groups[fine_pred], taxonomy.n_coarse)
    result.within_group_mispred_rate = within_group_misprediction_rate(yte, fine_pred, groups)
    result.fine_accuracy = float(np.mean(fine_pred == yte))
    result.best_epoch = outcome.best_epoch
    result.epochs_run = len(outcome.trajectory)
    result.trajectory = outcome.trajectory
    return result


def _run_unit(args) -> RunResult:
    config, seed = args
    return run_one(config, seed)


def summarize(values: Sequence[float]) -> tuple[float, float, float]:
    """Mean, median and sample SD (K-1 denominator; NaN below two values)."""
    vals = [float(v) for v in values]
    if not vals:
        return math.nan, math.nan, math.nan
    mean = statistics.fmean(vals)
    median = statistics.median(vals)
    sd = statistics.stdev(vals) if len(vals) > 1 else math.nan
    return mean, median, sd


def _validate_suite(configs: Sequence[RunConfig]) -> None:
    if not configs:
        raise ConfigError("empty suite")
    names = [c.strategy.name for c in configs]
    if len(set(names)) != len(names):
        raise ConfigError(f"duplicate strategy names: {names}")
    first = configs[0]
    for c in configs[1:]:
        if c.dataset != first.dataset:
            raise ConfigError("all strategies must share one dataset")
        if set(c.seeds) != set(first.seeds):
            raise ConfigError(
                f"seed sets differ between {first.strategy.name!r} and {c.strategy.name!r}; "
                "paired tests need matching seeds"
            )
        if c.training_fraction != first.training_fraction:
            raise ConfigError("all strategies must share the training fraction")


def run_suite(configs: Sequence[RunConfig], parallel: int = 1) -> RunReport:
    """Run every (strategy, seed) pair and reduce to a report."""
    _validate_suite(configs)
    units = [(c, s) for c in configs for s in c.seeds]
    if parallel > 1:
        with ProcessPoolExecutor(max_workers=parallel) as pool:
            runs = list(pool.map(_run_unit, units))
    else:
        runs = [_run_unit(u) for u in units]
    meta = {
        "strategies": [asdict(c.strategy) for c in configs],
        "seeds": list(configs[0].seeds),
        "training_fraction": configs[0].training_fraction,
        "sampling_mode": configs[0].sampling_mode,
        "hyperparams": configs[0].hyperparams.to_dict(),
        "dataset": (
            configs[0].dataset.to_dict() if isinstance(configs[0].dataset, SynthSpec)
            else {"path": str(configs[0].dataset)}
        ),
    }
    return build_report(runs, [c.strategy.name for c in configs], meta)


def build_report(runs: list[RunResult], order: Sequence[str], meta: dict | None = None) -> RunReport:
    summaries = []
    for name in order:
        mine = [r for r in runs if r.strategy == name]
        ok = [r for r in mine if r.ok]
        fine = summarize([r.fine_f1 for r in ok])
        coarse = summarize([r.coarse_f1 for r in ok])
        rates = [r.within_group_mispred_rate for r in ok if not math.isnan(r.within_group_mispred_rate)]
        summaries.append(StrategySummary(
            name, len(ok), len(mine) - len(ok), *fine, *coarse,
            statistics.fmean(rates) if rates else math.nan,
        ))

    comparisons = []
    for metric in METRICS:
        for a, b in combinations(order, 2):
            comparisons.append(_compare(runs, metric, a, b))
    return RunReport(runs, summaries, comparisons, dict(meta or {}))


def _compare(runs: list[RunResult], metric: str, a: str, b: str) -> Comparison:
    left = {r.seed: getattr(r, metric) for r in runs if r.strategy == a and r.ok}
    right = {r.seed: getattr(r, metric) for r in runs if r.strategy == b and r.ok}
    seeds = sorted(set(left) & set(right))
    xa = [left[s] for s in seeds]
    xb = [right[s] for s in seeds]
    mean_diff = statistics.fmean(x - y for x, y in zip(xa, xb)) if seeds else math.nan
    if len(seeds) < 2:
        return Comparison(metric, a, b, len(seeds), mean_diff, math.nan, math.nan, "insufficient_pairs")
    res = paired_t_test(xa, xb)
    flag = "zero_variance" if res.degenerate else ""
    return Comparison(metric, a, b, len(seeds), mean_diff, res.statistic, res.p_value, flag)


# -- configuration -----------------------------------------------------------


def parse_config(data: dict, base_dir: Path | None = None) -> list[RunConfig]:
    """Turn a schema-v1 suite document into one RunConfig per strategy."""
    if "schema_version" not in data:
        raise ConfigError("schema_version is required")
    if data["schema_version"] != SCHEMA_VERSION:
        raise ConfigError(f"unsupported schema_version {data['schema_version']}")
    known = {"schema_version", "name", "dataset", "model", "training_fraction", "seeds",
             "sampling_mode", "strategies", "output_dir"}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown config fields: {sorted(unknown)}")
    ds = data.get("dataset", {})
    if "path" in ds:
        path = Path(ds["path"])
        if base_dir is not None and not path.is_absolute():
            path = base_dir / path
        dataset: SynthSpec | str = str(path)
    else:
        try:
            dataset = SynthSpec.from_dict(ds)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"dataset: {exc}") from exc
    try:
        hyper = Hyperparams.from_dict(data.get("model", {}))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"model: {exc}") from exc
    strategies = []
    for entry in data.get("strategies", STANDARD_STRATEGIES):
        try:
            if isinstance(entry, str):
                strategies.append(named_strategy(entry))
            else:
                entry = dict(entry)
                name = entry.pop("name")
                if "scheme" in entry:
                    strategies.append(Strategy(name, **entry))
                else:
                    strategies.append(replace(named_strategy(name), **entry))
        except (TypeError, ValueError, KeyError) as exc:
            raise ConfigError(f"strategy {entry!r}: {exc}") from exc
    common = dict(
        dataset=dataset,
        hyperparams=hyper,
        training_fraction=float(data.get("training_fraction", 1.0)),
        seeds=tuple(data.get("seeds", range(10))),
        sampling_mode=data.get("sampling_mode", SamplingMode.WITH_REPLACEMENT.value),
        output_dir=data.get("output_dir"),
    )
    try:
        configs = [RunConfig(strategy=s, **common) for s in strategies]
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    _validate_suite(configs)
    return configs


def load_config(path) -> list[RunConfig]:
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    return parse_config(data, path.parent)


# -- emission ----------------------------------------------------------------


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _csv(header: Iterable[str], rows: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(list(header))
    for row in rows:
        writer.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def runs_csv(report: RunReport) -> str:
    return _csv(RUN_COLUMNS, ([getattr(r, c) for c in RUN_COLUMNS] for r in report.runs))


def summary_csv(report: RunReport) -> str:
    return _csv(SUMMARY_COLUMNS, ([getattr(s, c) for c in SUMMARY_COLUMNS] for s in report.summaries))


def pvalues_csv(report: RunReport) -> str:
    return _csv(PVALUE_COLUMNS, ([getattr(c, k) for k in PVALUE_COLUMNS] for c in report.comparisons))


def trajectories_csv(report: RunReport) -> str:
    rows = (
        [r.strategy, r.seed, *(getattr(t, c) for c in TRAJECTORY_COLUMNS[2:])]
        for r in report.runs
        for t in r.trajectory
    )
    return _csv(TRAJECTORY_COLUMNS, rows)


def _md_num(x: float, digits: int = 4) -> str:
    return "n/a" if math.isnan(x) else f"{x:.{digits}f}"


def _md_p(x: float) -> str:
    if math.isnan(x):
        return "n/a"
    return f"{x:.3g}" if x >= 1e-3 else f"{x:.2e}"


def markdown_table(report: RunReport) -> str:
    lines = [
        "| F1-score | Fine mean | Fine median | Fine SD | Coarse mean | Coarse median | Coarse SD |",
        "|---|---|---|---|---|---|---|",
    ]
    for s in report.summaries:
        lines.append(
            f"| {s.strategy} | {_md_num(s.fine_f1_mean)} | {_md_num(s.fine_f1_median)} | "
            f"{_md_num(s.fine_f1_sd)} | {_md_num(s.coarse_f1_mean)} | "
            f"{_md_num(s.coarse_f1_median)} | {_md_num(s.coarse_f1_sd)} |"
        )
    lines += ["", "| metric | A | B | pairs | mean diff (A-B) | t | p-value | flag |",
              "|---|---|---|---|---|---|---|---|"]
    for c in report.comparisons:
        lines.append(
            f"| {c.metric} | {c.strategy_a} | {c.strategy_b} | {c.n_pairs} | "
            f"{_md_num(c.mean_diff)} | {_md_num(c.t, 3)} | {_md_p(c.p_value)} | {c.flag} |"
        )
    return "\n".join(lines) + "\n"


def report_emit(report: RunReport, out_dir, fmt: str = "csv") -> list[Path]:
    """Write ``report`` to ``out_dir`` as ``csv`` (four files), ``json`` or ``md``."""
    if not report.runs:
        raise ReportError("nothing to report")
    fmt = {"markdown": "md", "markdown-table": "md"}.get(fmt, fmt)
    if fmt == "csv":
        files = {
            "runs.csv": runs_csv(report),
            "summary.csv": summary_csv(report),
            "pvalues.csv": pvalues_csv(report),
            "trajectories.csv": trajectories_csv(report),
        }
    elif fmt == "json":
        files = {"report.json": json.dumps(report.to_dict(), indent=1, sort_keys=True) + "\n"}
    elif fmt == "md":
        files = {"report.md": markdown_table(report)}
    else:
        raise ReportError(f"unknown format {fmt!r}")
    out = Path(out_dir)
    written = []
    try:
        out.mkdir(parents=True, exist_ok=True)
        for name, text in files.items():
            path = out / name
            path.write_text(text, encoding="utf-8", newline="")
            written.append(path)
    except OSError as exc:
        raise ReportError(f"cannot write to {out}: {exc}") from exc
    return written


def load_report(in_dir) -> RunReport:
    path = Path(in_dir) / "report.json"
    if not path.exists():
        raise ReportError(f"{path} not found; run the suite first")
    return RunReport.from_dict(json.loads(path.read_text(encoding="utf-8")))
