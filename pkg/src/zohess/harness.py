"""Benchmark runner: error distributions, timing decomposition, CSV output."""
from __future__ import annotations

import csv
import io
import logging
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

from .estimators import ESTIMATOR_KEYS, NoiseModel, budgeted_estimate, estimation_error, granule
from .manifold import chart_from_key
from .oracle import analytic_hessian, objective_from_key
from .sampling import RngStream, stream_id_for

log = logging.getLogger(__name__)

CSV_COLUMNS = ("estimator", "manifold", "delta", "rep", "error", "evals",
               "t_sample_s", "t_eval_s", "t_comp_s")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    manifold: str = "graph-flat"
    objective: str = "paper-test"
    n: int = 8
    m: int = 3840
    deltas: tuple[float, ...] = (0.05, 0.1, 0.2)
    noise_variance: float = 0.0025
    repetitions: int = 100
    estimators: tuple[str, ...] = ESTIMATOR_KEYS
    seed: int = 0
    output: str = "bench.csv"
    record_timings: bool = False
    workers: int = 1

    def validate(self) -> "ExperimentConfig":
        try:
            chart = chart_from_key(self.manifold, self.n)
            objective_from_key(self.objective, chart)
            NoiseModel(self.noise_variance)
            for d in self.deltas:
                chart.validate_step(d)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if self.repetitions < 1:
            raise ConfigError("repetitions must be >= 1")
        if not self.deltas:
            raise ConfigError("at least one step size is required")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must fit in an unsigned 64-bit integer")
        for est in self.estimators:
            if est not in ESTIMATOR_KEYS:
                raise ConfigError(f"unknown estimator {est!r}")
            if self.m < granule(est, self.n):
                raise ConfigError(f"budget m={self.m} below the minimum {granule(est, self.n)} for {est!r}")
        return self


@dataclass(frozen=True)
class ExperimentRecord:
    estimator: str
    manifold: str
    delta: float
    rep: int
    error: float
    evals: int
    t_sample_s: float | None = None
    t_eval_s: float | None = None
    t_comp_s: float | None = None


# -- config files ------------------------------------------------------------------

_FIELD_TYPES = {f.name: f.type for f in fields(ExperimentConfig)}
_ALIASES = {"delta": "deltas", "noise_var": "noise_variance", "sigma2": "noise_variance",
            "reps": "repetitions", "estimator": "estimators"}


def _coerce(name: str, raw) -> object:
    kind = _FIELD_TYPES[name]
    try:
        if kind.startswith("tuple[float"):
            items = raw if isinstance(raw, (list, tuple)) else str(raw).split(",")
            return tuple(float(x) for x in items if str(x).strip())
        if kind.startswith("tuple[str"):
            items = raw if isinstance(raw, (list, tuple)) else str(raw).split(",")
            return tuple(str(x).strip() for x in items if str(x).strip())
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
        if kind == "bool":
            if isinstance(raw, bool):
                return raw
            text = str(raw).strip().lower()
            if text not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(raw)
            return text in ("true", "1", "yes")
        return str(raw).strip()
    except (TypeError, ValueError):
        raise ConfigError(f"bad value for {name}: {raw!r}") from None


def config_from_mapping(mapping: dict, base: ExperimentConfig | None = None) -> ExperimentConfig:
    """Build a config from ``{key: value}`` pairs; unknown keys are an error."""
    updates = {}
    for key, raw in mapping.items():
        name = _ALIASES.get(key.replace("-", "_"), key.replace("-", "_"))
        if name not in _FIELD_TYPES:
            raise ConfigError(f"unknown config key {key!r}")
        updates[name] = _coerce(name, raw)
    return replace(base or ExperimentConfig(), **updates)


def parse_config_text(text: str) -> dict:
    """Parse flat ``key = value`` lines; ``#`` starts a comment, values may be quoted."""
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        value = value.strip("[]").strip()
        if len(value) >= 2 and value[0] == value[-1] and value[0] in "\"'":
            value = value[1:-1]
        value = ",".join(v.strip().strip("\"'") for v in value.split(","))
        out[key] = value
    return out


def load_config(path) -> ExperimentConfig:
    return config_from_mapping(parse_config_text(Path(path).read_text()))


def config_lines(config: ExperimentConfig) -> list[str]:
    """The config as ``key = value`` lines (round-trips through :func:`parse_config_text`)."""
    lines = []
    for key, value in asdict(config).items():
        if isinstance(value, (tuple, list)):
            value = ", ".join(repr(v) if isinstance(v, float) else str(v) for v in value)
        elif isinstance(value, float):
            value = repr(value)
        lines.append(f"{key} = {value}")
    return lines


# -- experiments ---------------------------------------------------------------------


def _run_one(config: ExperimentConfig, estimator: str, delta: float, rep: int) -> ExperimentRecord:
    chart = chart_from_key(config.manifold, config.n)
    p = chart.base_point()
    objective = objective_from_key(config.objective, chart)
    truth = analytic_hessian(objective, chart, p)
    rng = RngStream(config.seed, stream_id_for(estimator, delta, rep))
    noise = NoiseModel(config.noise_variance)
    est = budgeted_estimate(estimator, objective, chart, p, config.m, delta, noise, rng)
    times = (None, None, None)
    if config.record_timings:
        t = est.wall_times
        times = (t.sampling, t.evaluation, t.computation)
    return ExperimentRecord(estimator, config.manifold, delta, rep,
                            estimation_error(est.form, truth), est.evaluations_used, *times)


def run_bias_experiment(config: ExperimentConfig) -> list[ExperimentRecord]:
    """``repetitions`` error records for every (estimator, delta), sorted by (estimator, delta, rep).

    Every repetition owns the stream ``(seed, hash(estimator, delta, rep))``, so the
    output does not depend on ``workers``.
    """
    config.validate()
    tasks = [(est, d, r) for est in config.estimators for d in config.deltas
             for r in range(config.repetitions)]
    log.info("running %d estimations on %s", len(tasks), config.manifold)
    if config.workers > 1:
        with ProcessPoolExecutor(config.workers) as pool:
            records = list(pool.map(_run_one, *zip(*[(config, *t) for t in tasks]),
                                    chunksize=max(1, len(tasks) // (4 * config.workers))))
    else:
        records = [_run_one(config, *t) for t in tasks]
    return sorted(records, key=lambda r: (r.estimator, r.delta, r.rep))


def median_errors(records) -> dict[tuple[str, float], float]:
    groups: dict[tuple[str, float], list[float]] = {}
    for r in records:
        groups.setdefault((r.estimator, r.delta), []).append(r.error)
    return {k: statistics.median(v) for k, v in groups.items()}


# -- timing ------------------------------------------------------------------------------

TIMING_COLUMNS = ("sampling", "sampling+evaluation", "sampling+evaluation+computation")


def run_timing(config: ExperimentConfig | None = None) -> dict[str, dict[str, tuple[float, float]]]:
    """Cumulative phase timings per estimator: ``{est: {column: (mean, std)}}``.

    Defaults follow the timing table setup: m = 10000, delta = 0.05, n = 8,
    10 repeats, estimators "new" and "stein".
    """
    if config is None:
        config = ExperimentConfig(m=10_000, deltas=(0.05,), repetitions=10, estimators=("new", "stein"))
    config.validate()
    chart = chart_from_key(config.manifold, config.n)
    p = chart.base_point()
    noise = NoiseModel(config.noise_variance)
    delta = config.deltas[0]
    summary = {}
    for est in config.estimators:
        if est not in ("new", "stein"):
            raise ConfigError(f"timing supports 'new' and 'stein', not {est!r}")
        cols = {c: [] for c in TIMING_COLUMNS}
        for rep in range(config.repetitions):
            objective = objective_from_key(config.objective, chart)
            rng = RngStream(config.seed, stream_id_for("timing", est, delta, rep))
            t = budgeted_estimate(est, objective, chart, p, config.m, delta, noise, rng).wall_times
            cols["sampling"].append(t.sampling)
            cols["sampling+evaluation"].append(t.sampling + t.evaluation)
            cols["sampling+evaluation+computation"].append(t.sampling + t.evaluation + t.computation)
        summary[est] = {c: (statistics.fmean(v), statistics.stdev(v) if len(v) > 1 else 0.0)
                        for c, v in cols.items()}
    return summary


def format_timing(summary) -> str:
    width = max(len(c) for c in TIMING_COLUMNS)
    lines = [" " * 8 + " | ".join(c.ljust(width) for c in TIMING_COLUMNS)]
    for est, cols in summary.items():
        cells = [f"{m:.4f} ± {s:.4f}".ljust(width) for m, s in (cols[c] for c in TIMING_COLUMNS)]
        lines.append(est.ljust(8) + " | ".join(cells))
    return "\n".join(lines)


# -- CSV -----------------------------------------------------------------------------------


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def emit_csv(records, path, config: ExperimentConfig | None = None) -> Path:
    """Write records with the config echoed as leading ``#`` comment lines."""
    records = list(records)
    if not records:
        raise ValueError("no records to write")
    buf = io.StringIO()
    buf.write("# zohess bench\n")
    seed = config.seed if config is not None else "unknown"
    buf.write(f"# seed = {seed}; streams: Philox(SeedSequence(seed, spawn_key=(stream_id, lane))), "
              "stream_id = blake2b64(repr(estimator), repr(delta), repr(rep)), lane 0 directions, lane 1 noise\n")
    if config is not None:
        for line in config_lines(config):
            buf.write(f"# {line}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for r in records:
        writer.writerow([_cell(getattr(r, c)) for c in CSV_COLUMNS])
    path = Path(path)
    try:
        path.write_text(buf.getvalue())
    except OSError as exc:
        raise ValueError(f"cannot write {path}: {exc}") from exc
    return path


def read_csv(path) -> tuple[list[ExperimentRecord], list[str]]:
    """Parse a file written by :func:`emit_csv`; returns ``(records, comment_lines)``."""
    comments, body = [], []
    for line in Path(path).read_text().splitlines():
        (comments if line.startswith("#") else body).append(line)
    reader = csv.DictReader(body)
    records = []
    for row in reader:
        opt = {k: (float(row[k]) if row[k] != "" else None) for k in ("t_sample_s", "t_eval_s", "t_comp_s")}
        records.append(ExperimentRecord(row["estimator"], row["manifold"], float(row["delta"]),
                                        int(row["rep"]), float(row["error"]), int(row["evals"]), **opt))
    return records, comments
