"""
Experiment configs, runners and result files.

Configs are YAML documents validated into `ExperimentConfig` (unknown keys
rejected). `run_and_report` runs one command and writes its files
atomically: everything lands under temporary names first and is moved into
place only when the whole run succeeded.

Files:
- trace CSV    j,param,uniform_error,l2_error (one row per greedy iteration)
- plot CSV     z,f,R,f_minus_R on the evaluation grid
- result JSON  approximant (c0, poles, residues), per-iteration data,
               config echo, seed, schema_version
- compare.csv  j then param/error per algorithm (compare command)
- sweep.csv / sweep.json (precond-demo command)
"""

from __future__ import annotations

import csv
import io
import json
import logging
import os
from enum import Enum
from pathlib import Path
from typing import Any, Dict, Iterable, List, NamedTuple, Optional, Sequence, Tuple

import yaml
from pydantic import Field, ValidationError, model_validator
from typing_extensions import Self

from ratgreedy.analysis import GridSpec, log_grid
from ratgreedy.domain import (
    AnyDictionary,
    BuiltinTarget,
    DictionarySpec,
    FrozenModel,
    GreedyTrace,
    Interval,
    NormalizedPoleDictionary,
    PlainPoleDictionary,
)
from ratgreedy.errors import ConfigError, first_error_key, flatten_validation_errors
from ratgreedy.greedy import (
    Algorithm,
    ImprovedMode,
    PsoConfig,
    TKind,
    WcgaConfig,
    run_improved_oga,
    run_oga,
    run_wcga,
)
from ratgreedy.operators import to_partial_fraction
from ratgreedy.precond import PrecondSettings, SweepRow, sweep, sweep_summary
from ratgreedy.settings import get_settings

logger = logging.getLogger(__name__)

SCHEMA_VERSION = "1.0"
TRACE_COLUMNS = ("j", "param", "uniform_error", "l2_error")
PLOT_COLUMNS = ("z", "f", "R", "f_minus_R")
SWEEP_COLUMNS = tuple(SweepRow.model_fields)
COMPARE_ALGORITHMS = (Algorithm.OGA, Algorithm.IMPROVED_OGA, Algorithm.WCGA)


# -----------------------------------------------------------------------------
# Config schema
# -----------------------------------------------------------------------------
class Command(str, Enum):
    """CLI commands an experiment config can drive."""

    APPROX = "approx"
    COMPARE = "compare"
    PRECOND_DEMO = "precond-demo"


class OutputFormat(str, Enum):
    CSV = "csv"
    JSON = "json"


class WcgaSettings(FrozenModel):
    """WCGA knobs settable from a config; n and target_error come from the top level."""

    t_kind: TKind = TKind.INV_SQRT
    t_value: float = Field(1.0, gt=0.0, le=1.0)
    m: int = Field(100, ge=1)
    workers: int = Field(1, ge=1, le=64)

    def build(self, n: int, target_error: Optional[float]) -> WcgaConfig:
        return WcgaConfig(
            t_kind=self.t_kind,
            t_value=self.t_value,
            m=self.m,
            workers=self.workers,
            max_terms=n,
            target_error=target_error,
        )


class ExperimentConfig(FrozenModel):
    """One experiment; eval_interval defaults to fit_interval."""

    command: Command = Command.APPROX
    target: Optional[BuiltinTarget] = None
    fit_interval: Optional[Interval] = None
    eval_interval: Optional[Interval] = None
    dictionary: DictionarySpec = Field(default_factory=NormalizedPoleDictionary)
    algorithm: Algorithm = Algorithm.IMPROVED_OGA
    n: int = Field(12, ge=1)
    mode: ImprovedMode = ImprovedMode.FINAL_ONLY
    target_error: Optional[float] = Field(None, gt=0.0)
    pso: PsoConfig = Field(default_factory=PsoConfig)
    wcga: WcgaSettings = Field(default_factory=WcgaSettings)
    grid: GridSpec = Field(default_factory=GridSpec)
    output_dir: Optional[Path] = None
    seed: Optional[int] = Field(None, ge=0)
    formats: Tuple[OutputFormat, ...] = (OutputFormat.CSV, OutputFormat.JSON)
    precond: PrecondSettings = Field(default_factory=PrecondSettings)

    @model_validator(mode="before")
    @classmethod
    def _default_eval_interval(cls, data: Any) -> Any:
        if isinstance(data, dict) and data.get("eval_interval") is None and "fit_interval" in data:
            data = {**data, "eval_interval": data["fit_interval"]}
        return data

    @model_validator(mode="after")
    def _check(self) -> Self:
        if self.command is not Command.PRECOND_DEMO:
            if self.target is None:
                raise ValueError(f"command {self.command.value} needs a target")
            if self.fit_interval is None:
                raise ValueError(f"command {self.command.value} needs a fit_interval")
        if not self.formats:
            raise ValueError("formats must name at least one of csv, json")
        if (
            self.command is Command.APPROX
            and self.algorithm is Algorithm.IMPROVED_OGA
            and self.mode is ImprovedMode.FINAL_ONLY
            and self.target_error is not None
        ):
            raise ValueError("target_error with improved_oga needs mode every_step")
        return self


def _validate(data: Dict[str, Any]) -> ExperimentConfig:
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as exc:
        key = first_error_key(exc)
        raise ConfigError(
            f"invalid config entry '{key}'" if key else "invalid config",
            key=key,
            details=flatten_validation_errors(exc),
        ) from exc


def parse_config(text: str) -> ExperimentConfig:
    """Validate a YAML config document, filling defaults."""
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError("config is not valid YAML", details=str(exc)) from exc
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError("config must be a mapping of keys to values")
    return _validate(data)


def load_config(path: Path) -> ExperimentConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}", details=str(exc)) from exc
    return parse_config(text)


def serialize_config(cfg: ExperimentConfig) -> str:
    """YAML text that parses back to an equal config."""
    return yaml.safe_dump(cfg.model_dump(mode="json", exclude_none=True), sort_keys=False)


def apply_overrides(
    cfg: ExperimentConfig,
    *,
    command: Optional[Command] = None,
    output_dir: Optional[Path] = None,
    seed: Optional[int] = None,
    n: Optional[int] = None,
) -> ExperimentConfig:
    """CLI flags over file keys; the result is validated again."""
    data = cfg.model_dump(mode="json", exclude_none=True)
    if command is not None:
        data["command"] = Command(command).value
    if output_dir is not None:
        data["output_dir"] = str(output_dir)
    if seed is not None:
        data["seed"] = seed
    if n is not None:
        data["n"] = n
    return _validate(data)


# -----------------------------------------------------------------------------
# Running algorithms
# -----------------------------------------------------------------------------
def wcga_dictionary(dictionary: AnyDictionary) -> AnyDictionary:
    """WCGA uses unnormalized poles; power dictionaries pass through."""
    if isinstance(dictionary, NormalizedPoleDictionary):
        return PlainPoleDictionary(window=dictionary.window)
    return dictionary


def run_algorithm(
    cfg: ExperimentConfig,
    algorithm: Algorithm,
    seed: int,
    mode: Optional[ImprovedMode] = None,
) -> GreedyTrace:
    """Run one greedy driver as configured."""
    if cfg.target is None or cfg.fit_interval is None:
        raise ConfigError("a greedy run needs target and fit_interval", key="target")
    pso = cfg.pso.model_copy(update={"seed": seed})
    common = {"eval_on": cfg.eval_interval, "grid": cfg.grid}
    logger.info("Running %s on %s (n=%d, seed=%d)", algorithm.value, cfg.target.label, cfg.n, seed)

    if algorithm is Algorithm.OGA:
        return run_oga(
            cfg.target,
            cfg.dictionary,
            cfg.fit_interval,
            cfg.n,
            pso,
            target_error=cfg.target_error,
            **common,
        )
    if algorithm is Algorithm.IMPROVED_OGA:
        mode = mode or cfg.mode
        early = cfg.target_error if mode is ImprovedMode.EVERY_STEP else None
        return run_improved_oga(
            cfg.target,
            cfg.dictionary,
            cfg.fit_interval,
            cfg.n,
            pso,
            mode,
            target_error=early,
            **common,
        )
    return run_wcga(
        cfg.target,
        wcga_dictionary(cfg.dictionary),
        cfg.fit_interval,
        cfg.wcga.build(cfg.n, cfg.target_error),
        **common,
    )


# -----------------------------------------------------------------------------
# Writers
# -----------------------------------------------------------------------------
def _fmt(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, float):
        return f"{value:.17g}"
    return str(value)


def _csv_text(columns: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])
    return buffer.getvalue()


def _json_text(document: Dict[str, Any]) -> str:
    return json.dumps(document, sort_keys=True, indent=2) + "\n"


def trace_csv(trace: GreedyTrace) -> str:
    return _csv_text(
        TRACE_COLUMNS,
        ((it.j, it.param, it.uniform_error, it.l2_error) for it in trace.iterations),
    )


def plot_csv(target: Any, on: Interval, grid: GridSpec, trace: GreedyTrace) -> str:
    z = log_grid(on, grid.n_points)
    f = target(z)
    r = trace.final(z)
    return _csv_text(PLOT_COLUMNS, zip(z.tolist(), f.tolist(), r.tolist(), (f - r).tolist()))


def approximant_document(trace: GreedyTrace) -> Optional[Dict[str, Any]]:
    """Partial-fraction form of the final approximant; None for power bases."""
    if not trace.final.basis or not all(g.is_pole for g in trace.final.basis):
        return None
    pf = to_partial_fraction(trace.final)
    return {"c0": pf.c0, "poles": list(pf.poles), "residues": list(pf.residues)}


def trace_document(trace: GreedyTrace) -> Dict[str, Any]:
    return {
        "algorithm": trace.algorithm,
        "mode": trace.mode,
        "approximant": approximant_document(trace),
        "basis": [
            {"kind": g.kind.value, "param": g.param, "scale": g.scale, "coeff": c}
            for g, c in zip(trace.final.basis, trace.final.coeffs)
        ],
        "final_uniform_error": trace.final_error if trace.iterations else None,
        "flags": list(trace.flags),
        "iterations": [it.model_dump(mode="json") for it in trace.iterations],
    }


def _config_echo(cfg: ExperimentConfig) -> Dict[str, Any]:
    return cfg.model_dump(mode="json", exclude_none=True, exclude={"output_dir"})


def compare_csv(traces: Dict[str, GreedyTrace]) -> str:
    names = list(traces)
    columns = ["j"] + [f"{name}_{field}" for name in names for field in ("param", "error")]
    depth = max((len(t.iterations) for t in traces.values()), default=0)
    rows = []
    for j in range(depth):
        row: List[Any] = [j + 1]
        for name in names:
            its = traces[name].iterations
            row += [its[j].param, its[j].uniform_error] if j < len(its) else [None, None]
        rows.append(row)
    return _csv_text(columns, rows)


class _StagedWriter:
    """Stage files as hidden temporaries; move them into place on commit."""

    def __init__(self, out_dir: Path):
        self.out_dir = out_dir
        self._staged: List[Tuple[Path, Path]] = []

    def add(self, name: str, text: str) -> None:
        final = self.out_dir / name
        tmp = self.out_dir / f".{name}.tmp"
        tmp.write_text(text, encoding="utf-8")
        self._staged.append((tmp, final))

    def commit(self) -> List[Path]:
        written = []
        for tmp, final in self._staged:
            os.replace(tmp, final)
            written.append(final)
            logger.info("Wrote %s", final)
        self._staged.clear()
        return written

    def discard(self) -> None:
        for tmp, _ in self._staged:
            tmp.unlink(missing_ok=True)
        self._staged.clear()


class RunReport(NamedTuple):
    exit_code: int
    files: Tuple[Path, ...]


def _write_approx(cfg: ExperimentConfig, seed: int, writer: _StagedWriter) -> None:
    trace = run_algorithm(cfg, cfg.algorithm, seed)
    if OutputFormat.CSV in cfg.formats:
        writer.add("trace.csv", trace_csv(trace))
        writer.add("plot.csv", plot_csv(cfg.target, cfg.eval_interval, cfg.grid, trace))
    if OutputFormat.JSON in cfg.formats:
        document = {
            "schema_version": SCHEMA_VERSION,
            "command": cfg.command.value,
            "seed": seed,
            "target": cfg.target.label if cfg.target else None,
            "config": _config_echo(cfg),
            **trace_document(trace),
        }
        writer.add("result.json", _json_text(document))


def _write_compare(cfg: ExperimentConfig, seed: int, writer: _StagedWriter) -> None:
    # Improved OGA runs every_step here so each row j carries a minimax error.
    traces = {
        algorithm.value: run_algorithm(cfg, algorithm, seed, ImprovedMode.EVERY_STEP)
        for algorithm in COMPARE_ALGORITHMS
    }
    if OutputFormat.CSV in cfg.formats:
        for name, trace in traces.items():
            writer.add(f"trace_{name}.csv", trace_csv(trace))
        writer.add("compare.csv", compare_csv(traces))
    if OutputFormat.JSON in cfg.formats:
        document = {
            "schema_version": SCHEMA_VERSION,
            "command": cfg.command.value,
            "seed": seed,
            "target": cfg.target.label if cfg.target else None,
            "config": _config_echo(cfg),
            "runs": {name: trace_document(trace) for name, trace in traces.items()},
        }
        writer.add("compare.json", _json_text(document))


def _write_precond(cfg: ExperimentConfig, seed: int, writer: _StagedWriter) -> None:
    pso = cfg.pso.model_copy(update={"seed": seed})
    rows = sweep(cfg.precond, pso, cfg.grid, seed)
    if OutputFormat.CSV in cfg.formats:
        writer.add(
            "sweep.csv",
            _csv_text(SWEEP_COLUMNS, ([getattr(row, c) for c in SWEEP_COLUMNS] for row in rows)),
        )
    if OutputFormat.JSON in cfg.formats:
        document = {
            "schema_version": SCHEMA_VERSION,
            "command": cfg.command.value,
            "seed": seed,
            "config": _config_echo(cfg),
            "rows": [row.model_dump(mode="json") for row in rows],
            "summary": sweep_summary(rows),
        }
        writer.add("sweep.json", _json_text(document))


_RUNNERS = {
    Command.APPROX: _write_approx,
    Command.COMPARE: _write_compare,
    Command.PRECOND_DEMO: _write_precond,
}


def run_and_report(cfg: ExperimentConfig) -> RunReport:
    """
    Run the configured command and write its result files.

    Seed and output directory fall back to Settings.DEFAULT_SEED and
    Settings.OUTPUT_DIR. On any error the staged files are removed and the
    exception propagates.
    """
    settings = get_settings()
    seed = cfg.seed if cfg.seed is not None else settings.DEFAULT_SEED
    out_dir = Path(cfg.output_dir or settings.OUTPUT_DIR)
    out_dir.mkdir(parents=True, exist_ok=True)

    writer = _StagedWriter(out_dir)
    try:
        _RUNNERS[cfg.command](cfg, seed, writer)
    except BaseException:
        writer.discard()
        raise
    return RunReport(0, tuple(writer.commit()))


# -----------------------------------------------------------------------------
# Readers
# -----------------------------------------------------------------------------
def load_result(path: Path) -> Dict[str, Any]:
    """Read a result JSON file, rejecting unknown major schema versions."""
    try:
        document = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read result {path}", details=str(exc)) from exc
    version = str(document.get("schema_version", ""))
    if version.split(".")[0] != SCHEMA_VERSION.split(".")[0]:
        raise ConfigError(
            f"unsupported schema_version '{version}'",
            key="schema_version",
            details=f"expected {SCHEMA_VERSION.split('.')[0]}.x",
        )
    return document


def read_trace_csv(path: Path) -> List[Dict[str, float]]:
    """Rows of a trace CSV as floats keyed by column name."""
    with Path(path).open(newline="", encoding="utf-8") as handle:
        reader = csv.DictReader(handle)
        if tuple(reader.fieldnames or ()) != TRACE_COLUMNS:
            raise ConfigError(f"unexpected trace columns {reader.fieldnames}", key="columns")
        return [{k: float(v) for k, v in row.items()} for row in reader]

