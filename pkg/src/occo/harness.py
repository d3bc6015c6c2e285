"""Experiment runner, CSV output and trace verification."""

from __future__ import annotations

import csv
import json
import math
import os
import tempfile
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Optional

import numpy as np

from .domain import Box, StrategyPair
from .environments import DEFAULT_BOX, Environment, normalize_case
from .learners import DUAL_GAP, LEARNERS, Doubling, IOMDA, LagPredictor, NeIOMDA, OptIOMDA, make_learner
from .metrics import CERTIFICATE_TOL, MetricsAccumulator, check_certificate
from .payoff import rho_distance
from .saddle import SolverConfig

METRICS = (
    "avg_dual_gap",
    "avg_ne_regret",
    "avg_tracking_error",
    "avg_residual",
    "eta",
    "path_length",
    "bound_rhs",
)
CSV_HEADER = ("round", "metric", "value")
PREFIX_TOL = 1e-12
RAW_DELTA_TOL = 1e-9


class ExperimentError(RuntimeError):
    def __init__(self, message: str, round_index: int | None = None):
        prefix = f"round {round_index}: " if round_index is not None else ""
        super().__init__(prefix + message)
        self.round_index = round_index


@dataclass
class ExperimentConfig:
    """One run: environment case, learner and schedule parameters."""

    case: str = "I"
    algo: str = "iomda"
    lag: Optional[int] = None
    rounds: int = 10_000
    epsilon: float = 0.1
    initial_P: float = 1.0
    seed: int = 0
    tol: float = 1e-9
    max_iters: int = 10_000
    doubling: bool = True
    out: Optional[str] = None

    def __post_init__(self):
        self.case = normalize_case(self.case)
        if self.algo not in LEARNERS:
            raise ValueError(f"unknown algo {self.algo!r}; choose from {sorted(LEARNERS)}")
        self.rounds = int(self.rounds)
        if self.rounds < 1:
            raise ValueError("rounds must be at least 1")
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if not self.initial_P > 0:
            raise ValueError("initial_P must be positive")
        if self.optimistic:
            self.lag = 1 if self.lag is None else int(self.lag)
            if self.lag < 1:
                raise ValueError("predictor lag must be at least 1")
        elif self.lag is not None:
            self.lag = None

    @property
    def optimistic(self) -> bool:
        return LEARNERS[self.algo].optimistic

    @property
    def label(self) -> str:
        return f"{self.algo}-lag{self.lag}" if self.optimistic else self.algo

    @property
    def solver(self) -> SolverConfig:
        return SolverConfig(tol=self.tol, max_iters=self.max_iters)


@dataclass
class RoundRecord:
    round: int
    play: StrategyPair
    competitor: StrategyPair
    saddle: StrategyPair
    eta: float
    stage: int
    dual_gap: float
    ne_sum: float
    residual: float
    tracking_error: float
    path_length: float
    bound_rhs: float
    certificate_ok: bool

    def metric(self, name: str) -> float:
        t = self.round
        return {
            "avg_dual_gap": self.dual_gap / t,
            "avg_ne_regret": abs(self.ne_sum) / t,
            "avg_tracking_error": self.tracking_error / t,
            "avg_residual": self.residual / t,
            "eta": self.eta,
            "path_length": self.path_length,
            "bound_rhs": self.bound_rhs,
        }[name]


@dataclass
class RunTrace:
    """Sampled records of a run plus whole-run diagnostics.

    ``violations`` must be empty for a passing run; the remaining fields hold
    the worst observed value of each structural invariant.
    """

    config: ExperimentConfig
    records: list = field(default_factory=list)
    final: Optional[MetricsAccumulator] = None
    violations: list = field(default_factory=list)
    transitions: list = field(default_factory=list)
    eta_increase: float = 0.0  # largest within-stage relative increase of eta
    min_raw_delta: float = math.inf
    prefix_error: float = 0.0
    rho_excess: float = -math.inf  # max of delta - 2 rho(f, h)

    @property
    def rounds(self) -> list[int]:
        return [r.round for r in self.records]

    def series(self, metric: str) -> np.ndarray:
        return np.array([r.metric(metric) for r in self.records])

    def value_at(self, metric: str, round_index: int) -> float:
        for r in self.records:
            if r.round == round_index:
                return r.metric(metric)
        raise KeyError(f"round {round_index} was not sampled")


def log_spaced_rounds(T: int, per_decade: int = 40) -> list[int]:
    """Rounds ``1..T`` sampled log-uniformly, always including 1, T and powers of ten."""
    n = int(math.ceil(per_decade * math.log10(max(T, 1)))) + 1
    pts = {int(round(v)) for v in np.logspace(0, math.log10(max(T, 1)), n)}
    pts.update(10**k for k in range(int(math.log10(max(T, 1))) + 1))
    pts.update((1, T))
    return sorted(p for p in pts if 1 <= p <= T)


def _inner(learner):
    return learner.inner if isinstance(learner, Doubling) else learner


def run_experiment(cfg: ExperimentConfig, X: Box = DEFAULT_BOX, Y: Box = DEFAULT_BOX,
                   environment: Optional[Environment] = None, sample_rounds: Optional[Iterable[int]] = None,
                   residual: bool = True) -> RunTrace:
    """Play `cfg.rounds` rounds and return the sampled trace.

    Round order: play (from the prediction, if any) -> reveal the payoff ->
    learner update -> reveal the comparator -> path length and possible
    stage doubling -> metrics and certificates.
    """
    rng = np.random.default_rng(cfg.seed)
    start = StrategyPair(X.sample(rng), Y.sample(rng))
    env = environment if environment is not None else Environment(cfg.case, X, Y)
    learner = make_learner(cfg.algo, X, Y, start, initial_P=cfg.initial_P, doubling=cfg.doubling,
                           epsilon=cfg.epsilon, solver=cfg.solver)
    predictor = LagPredictor(cfg.lag, X.dim, Y.dim) if cfg.optimistic else None
    sample = set(sample_rounds) if sample_rounds is not None else set(log_spaced_rounds(cfg.rounds))

    trace = RunTrace(config=cfg)
    acc = MetricsAccumulator()
    dual_gap_kind = LEARNERS[cfg.algo].kind == DUAL_GAP
    stage_start = 0.0  # metric (dual gap or signed NE sum) when the current stage began
    stage_eta = math.nan
    stage = 0
    prev_f = None

    for t in range(1, cfg.rounds + 1):
        try:
            h = predictor.predict() if predictor is not None else None
            play = learner.play(h)
            eta = learner.eta
            rnd = env.reveal(t, play)
            f = rnd.payoff
            learner.update(f)
            inner = _inner(learner)

            if predictor is not None:
                rho_h = rho_distance(f, h, X, Y)
                acc.predictor_variability += rho_h
                trace.min_raw_delta = min(trace.min_raw_delta, inner.raw_deltas[-1])
                trace.rho_excess = max(trace.rho_excess, inner.deltas[-1] - 2.0 * rho_h)
                if inner.deltas[-1] > 2.0 * rho_h + RAW_DELTA_TOL:
                    trace.violations.append(f"round {t}: correction exceeds twice the prediction error")
                predictor.push(f)
            if prev_f is not None:
                acc.temporal_variability += rho_distance(f, prev_f, X, Y)
            prev_f = f

            if not math.isnan(stage_eta) and eta > stage_eta:
                trace.eta_increase = max(trace.eta_increase, eta / stage_eta - 1.0)
            stage_eta = eta

            comparator = rnd.competitor if dual_gap_kind else rnd.saddle
            transitioned = learner.observe(comparator)
            acc.record(f, play, rnd.competitor, rnd.saddle, X, Y, residual=residual)
        except Exception as exc:  # attach the round index
            if isinstance(exc, ExperimentError):
                raise
            raise ExperimentError(f"{type(exc).__name__}: {exc}", t) from exc

        if isinstance(inner, (IOMDA,)):
            trace.prefix_error = max(trace.prefix_error, abs(inner.Delta_sum - inner.sigma_max))

        metric = acc.dual_gap if dual_gap_kind else acc.ne_sum
        if isinstance(learner, Doubling) and transitioned:
            stage_bound = learner.last_closed_bound
        else:
            stage_bound = inner.bound_rhs()
        stage_metric = metric - stage_start
        stage_cert = check_certificate(stage_metric if dual_gap_kind else abs(stage_metric), stage_bound)
        if not stage_cert.satisfied:
            trace.violations.append(
                f"round {t}: stage {stage} certificate {stage_cert.metric:.6g} > {stage_cert.bound:.6g}")
        bound = learner.bound_rhs()
        total = check_certificate(acc.dual_gap if dual_gap_kind else abs(acc.ne_sum), bound)
        if not total.satisfied:
            trace.violations.append(f"round {t}: run certificate {total.metric:.6g} > {total.bound:.6g}")

        if t in sample:
            trace.records.append(RoundRecord(
                round=t, play=play, competitor=rnd.competitor, saddle=rnd.saddle, eta=eta, stage=stage,
                dual_gap=acc.dual_gap, ne_sum=acc.ne_sum, residual=acc.residual,
                tracking_error=acc.tracking_error, path_length=acc.P if dual_gap_kind else acc.P_inf,
                bound_rhs=bound, certificate_ok=stage_cert.satisfied and total.satisfied,
            ))
        if isinstance(learner, Doubling) and transitioned:
            stage += 1
            stage_start = metric
            stage_eta = math.nan
            trace.transitions.append(t)

    trace.final = acc
    return trace


# -- output -------------------------------------------------------------------

def _fmt(v: float) -> str:
    return "{:.17g}".format(float(v))


def atomic_write(path, text: str) -> None:
    """Write `text` to `path` via a temporary file and rename."""
    path = Path(path)
    if path.parent and not path.parent.exists():
        path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def trace_rows(trace: RunTrace) -> list[tuple[int, str, float]]:
    rows = [(r.round, m, r.metric(m)) for r in trace.records for m in METRICS]
    rows.sort(key=lambda row: (row[1], row[0]))
    return rows


def _csv_text(header, rows) -> str:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt(v) if isinstance(v, float) else str(v) for v in row))
    return "\n".join(lines) + "\n"


def emit_csv(trace: RunTrace, path, metadata: bool = True) -> None:
    """Write ``round,metric,value`` rows; a ``.meta.json`` sidecar keeps the config."""
    try:
        atomic_write(path, _csv_text(CSV_HEADER, trace_rows(trace)))
        if metadata:
            meta = {
                "config": asdict(trace.config),
                "label": trace.config.label,
                "kind": LEARNERS[trace.config.algo].kind,
                "transitions": trace.transitions,
                "violations": trace.violations,
            }
            atomic_write(meta_path(path), json.dumps(meta, indent=2, sort_keys=True) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc


def meta_path(path) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".meta.json")


def read_csv(path) -> dict[str, list[tuple[int, float]]]:
    """Parse a run CSV into ``{metric: [(round, value), ...]}``."""
    out: dict[str, list[tuple[int, float]]] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if tuple(header or ()) != CSV_HEADER:
            raise ValueError(f"{path}: expected header {','.join(CSV_HEADER)}")
        for lineno, row in enumerate(reader, start=2):
            if len(row) != 3:
                raise ValueError(f"{path}:{lineno}: expected 3 fields")
            out.setdefault(row[1], []).append((int(row[0]), float(row[2])))
    return out


def compare_runs(traces: list[RunTrace]) -> list[tuple[str, int, str, float]]:
    """Long-format table ``(algo, round, metric, value)`` over runs sharing one round grid."""
    if not traces:
        return []
    grid = traces[0].rounds
    for tr in traces[1:]:
        if tr.rounds != grid:
            raise ValueError(f"round grids differ between {traces[0].config.label} and {tr.config.label}")
    return [(tr.config.label, r, m, v) for tr in traces for (r, m, v) in trace_rows(tr)]


def emit_comparison(traces: list[RunTrace], path) -> None:
    atomic_write(path, _csv_text(("algo",) + CSV_HEADER, compare_runs(traces)))


# -- verification ---------------------------------------------------------------

@dataclass
class Verification:
    errors: list = field(default_factory=list)  # malformed file
    violations: list = field(default_factory=list)  # certificate or invariant failures

    @property
    def ok(self) -> bool:
        return not self.errors and not self.violations


def verify_csv(path) -> Verification:
    """Re-check a run CSV: layout, averages, certificates and step-size monotonicity."""
    res = Verification()
    try:
        data = read_csv(path)
    except (OSError, ValueError) as exc:
        res.errors.append(str(exc))
        return res
    if not data:
        return res
    missing = set(METRICS) - set(data)
    if missing:
        res.errors.append(f"missing metrics: {sorted(missing)}")
        return res
    grid = [r for r, _ in data[METRICS[0]]]
    for m in METRICS:
        rounds = [r for r, _ in data[m]]
        if rounds != grid:
            res.errors.append(f"{m}: round grid differs from {METRICS[0]}")
        if any(b <= a for a, b in zip(rounds, rounds[1:])):
            res.errors.append(f"{m}: rounds not strictly increasing")
        if any(not math.isfinite(v) for _, v in data[m]):
            res.errors.append(f"{m}: non-finite value")
    if res.errors:
        return res

    meta = None
    if meta_path(path).exists():
        meta = json.loads(meta_path(path).read_text(encoding="utf-8"))
    if meta is None:
        res.errors.append("no metadata sidecar; certificates not checked")
        return res
    metric = "avg_dual_gap" if meta["kind"] == DUAL_GAP else "avg_ne_regret"
    for (r, avg), (_, bound) in zip(data[metric], data["bound_rhs"]):
        total = avg * r
        if total > bound + CERTIFICATE_TOL + 1e-12 * abs(bound):
            res.violations.append(f"round {r}: {metric} * round = {total:.6g} exceeds bound {bound:.6g}")
    transitions = meta.get("transitions", [])
    etas = data["eta"]
    for (r0, e0), (r1, e1) in zip(etas, etas[1:]):
        crossed = any(r0 <= tr < r1 for tr in transitions)
        if not crossed and e1 > e0:
            res.violations.append(f"eta increased between rounds {r0} and {r1} within a stage")
    for v in meta.get("violations", []):
        res.violations.append(f"recorded: {v}")
    return res


# -- figure suites --------------------------------------------------------------

FIGURES = {
    "3": {
        "cases": ("I", "II", "III", "IV"),
        "runs": (("iomda", None), ("optiomda", 1), ("optiomda", 3), ("optiomda", 4)),
        "metrics": ("avg_dual_gap",),
    },
    "4": {
        "cases": ("I", "II", "III"),
        "runs": (("ne-iomda", None), ("ne-optiomda", 1), ("ne-optiomda", 3), ("ne-optiomda", 4)),
        "metrics": ("avg_ne_regret", "avg_tracking_error"),
    },
}


def suite_configs(figure: str, **overrides) -> dict[str, list[ExperimentConfig]]:
    panel = FIGURES[str(figure)]
    return {
        case: [ExperimentConfig(case=case, algo=algo, lag=lag, **overrides) for algo, lag in panel["runs"]]
        for case in panel["cases"]
    }


def _run(cfg: ExperimentConfig) -> RunTrace:
    return run_experiment(cfg)


def run_suite(figure: str, out_dir, jobs: int = 1, plot: bool = True, **overrides) -> dict[str, list[RunTrace]]:
    """Run every panel of a figure; writes per-run CSVs, one comparison CSV per case and optional PNGs."""
    figure = str(figure)
    if figure not in FIGURES:
        raise ValueError(f"unknown figure {figure!r}; choose from {sorted(FIGURES)}")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    configs = suite_configs(figure, **overrides)
    flat = [c for cs in configs.values() for c in cs]
    if jobs > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=jobs) as pool:
            traces = list(pool.map(_run, flat))
    else:
        traces = [_run(c) for c in flat]
    by_case: dict[str, list[RunTrace]] = {}
    for tr in traces:
        by_case.setdefault(tr.config.case, []).append(tr)
        emit_csv(tr, out_dir / f"fig{figure}_case{tr.config.case}_{tr.config.label}.csv")
    for case, trs in by_case.items():
        emit_comparison(trs, out_dir / f"fig{figure}_case{case}.csv")
        if plot:
            from .plotting import plot_panel

            for m in FIGURES[figure]["metrics"]:
                plot_panel(trs, m, out_dir / f"fig{figure}_case{case}_{m}.png", title=f"Case {case}")
    return by_case
