# tests/integration/test_experiment_config.py
"""
Integration tests for experiment configs, result writers and readers.

Runs use tiny PSO and grid settings so every greedy call stays fast.
"""

from __future__ import annotations

import json
from pathlib import Path

import pytest

from ratgreedy import experiment
from ratgreedy.domain import (
    Approximant,
    Element,
    ElementKind,
    GreedyTrace,
    IterationRecord,
    NegativePowerDictionary,
    NormalizedPoleDictionary,
    PlainPoleDictionary,
    PoleWindow,
)
from ratgreedy.errors import ConfigError, QuadratureError
from ratgreedy.experiment import (
    SWEEP_COLUMNS,
    TRACE_COLUMNS,
    Command,
    apply_overrides,
    approximant_document,
    compare_csv,
    load_config,
    load_result,
    parse_config,
    read_trace_csv,
    run_and_report,
    serialize_config,
    wcga_dictionary,
)
from ratgreedy.greedy import Algorithm, ImprovedMode

REPO_ROOT = Path(__file__).resolve().parents[2]
CONFIG_DIR = REPO_ROOT / "configs"

TINY_APPROX = """
command: approx
target: {kind: two_term, s: 0.1, t: 1.0, alpha: 0.5, beta: -0.5}
fit_interval: {lo: 1.0e-6, hi: 1.0}
algorithm: oga
n: 2
pso: {swarm_size: 12, iterations: 20}
grid: {n_points: 300, refine_iters: 20, n_peaks: 4}
wcga: {m: 8}
"""


def _tiny(output_dir: Path, **extra: object) -> experiment.ExperimentConfig:
    cfg = parse_config(TINY_APPROX)
    return apply_overrides(cfg, output_dir=output_dir, **extra)  # type: ignore[arg-type]


def _trace(algorithm: str, errors: list[float]) -> GreedyTrace:
    records = tuple(
        IterationRecord(j=j + 1, param=-(10.0 ** -(j + 1)), coeffs=(1.0,) * (j + 1), uniform_error=e, l2_error=e)
        for j, e in enumerate(errors)
    )
    return GreedyTrace(algorithm=algorithm, iterations=records)


# ---------------------------------------------------------------------------
# Parsing
# ---------------------------------------------------------------------------
@pytest.mark.integration
@pytest.mark.parametrize("name", ["example1.yaml", "example2.yaml", "example3.yaml", "precond.yaml"])
def test_shipped_configs_load(name: str) -> None:
    """Every config in configs/ validates."""
    cfg = load_config(CONFIG_DIR / name)
    if cfg.command is Command.PRECOND_DEMO:
        assert cfg.precond.max_terms == 20
    else:
        assert cfg.target is not None and cfg.fit_interval is not None


@pytest.mark.integration
def test_eval_interval_defaults_to_fit_interval() -> None:
    cfg = parse_config(TINY_APPROX)
    assert cfg.eval_interval == cfg.fit_interval


@pytest.mark.integration
def test_example1_keeps_separate_intervals() -> None:
    cfg = load_config(CONFIG_DIR / "example1.yaml")
    assert cfg.fit_interval.lo == pytest.approx(1e-8)
    assert cfg.eval_interval.lo == pytest.approx(1e-6)
    assert cfg.mode is ImprovedMode.FINAL_ONLY


@pytest.mark.integration
@pytest.mark.parametrize("name", ["example1.yaml", "example2.yaml", "example3.yaml", "precond.yaml"])
def test_serialized_config_parses_back_equal(name: str) -> None:
    cfg = load_config(CONFIG_DIR / name)
    assert parse_config(serialize_config(cfg)) == cfg


@pytest.mark.error
def test_unknown_key_is_reported_by_name() -> None:
    with pytest.raises(ConfigError) as exc_info:
        parse_config(TINY_APPROX + "bogus: 1\n")
    assert exc_info.value.key == "bogus"
    assert exc_info.value.exit_code == 1


@pytest.mark.error
def test_malformed_yaml_is_a_config_error() -> None:
    with pytest.raises(ConfigError, match="YAML"):
        parse_config("command: [approx\n")


@pytest.mark.error
def test_non_mapping_config_is_rejected() -> None:
    with pytest.raises(ConfigError, match="mapping"):
        parse_config("- approx\n- compare\n")


@pytest.mark.error
def test_approx_without_target_is_rejected() -> None:
    with pytest.raises(ConfigError):
        parse_config("command: approx\nfit_interval: {lo: 0.0, hi: 1.0}\n")


@pytest.mark.error
def test_final_only_with_target_error_is_rejected() -> None:
    text = TINY_APPROX.replace("algorithm: oga", "algorithm: improved_oga\nmode: final_only\ntarget_error: 0.1")
    with pytest.raises(ConfigError):
        parse_config(text)


@pytest.mark.error
def test_bad_interval_names_its_key() -> None:
    text = TINY_APPROX.replace("{lo: 1.0e-6, hi: 1.0}", "{lo: 1.0, hi: 0.5}")
    with pytest.raises(ConfigError) as exc_info:
        parse_config(text)
    assert exc_info.value.key == "fit_interval"


@pytest.mark.error
def test_missing_config_file(tmp_path: Path) -> None:
    with pytest.raises(ConfigError, match="cannot read"):
        load_config(tmp_path / "absent.yaml")


# ---------------------------------------------------------------------------
# Overrides
# ---------------------------------------------------------------------------
@pytest.mark.integration
def test_overrides_take_precedence_over_file_keys(tmp_path: Path) -> None:
    cfg = parse_config(TINY_APPROX + "seed: 4\n")
    updated = apply_overrides(cfg, command=Command.COMPARE, output_dir=tmp_path, seed=9, n=5)
    assert updated.command is Command.COMPARE
    assert updated.seed == 9 and updated.n == 5
    assert updated.output_dir == tmp_path
    assert apply_overrides(cfg) == cfg


@pytest.mark.error
def test_override_n_zero_is_a_config_error() -> None:
    with pytest.raises(ConfigError) as exc_info:
        apply_overrides(parse_config(TINY_APPROX), n=0)
    assert exc_info.value.key == "n"


@pytest.mark.unit
def test_wcga_dictionary_maps_normalized_to_plain_poles() -> None:
    window = PoleWindow(left=-50.0, right=-1e-6)
    mapped = wcga_dictionary(NormalizedPoleDictionary(window=window))
    assert isinstance(mapped, PlainPoleDictionary)
    assert mapped.window == window
    power = NegativePowerDictionary()
    assert wcga_dictionary(power) is power


# ---------------------------------------------------------------------------
# Writers
# ---------------------------------------------------------------------------
@pytest.mark.unit
def test_compare_csv_pads_shorter_runs() -> None:
    text = compare_csv({"oga": _trace("oga", [0.5, 0.25, 0.125]), "wcga": _trace("wcga", [0.75])})
    lines = text.splitlines()
    assert lines[0] == "j,oga_param,oga_error,wcga_param,wcga_error"
    assert len(lines) == 4
    assert lines[3].startswith("3,") and lines[3].endswith(",,")
    assert lines[1].split(",")[2] == "0.5"


@pytest.mark.unit
def test_approximant_document_is_none_for_power_bases() -> None:
    final = Approximant(basis=(Element(kind=ElementKind.NEGATIVE_POWER, param=0.3),), coeffs=(1.0,))
    trace = GreedyTrace(algorithm="oga", final=final)
    assert approximant_document(trace) is None


@pytest.mark.unit
def test_approximant_document_for_poles() -> None:
    final = Approximant(
        basis=(Element(kind=ElementKind.PLAIN_POLE, param=-2.0, scale=3.0),),
        coeffs=(0.5,),
    )
    doc = approximant_document(GreedyTrace(algorithm="wcga", final=final))
    assert doc is not None
    assert doc["c0"] == 0.0
    assert doc["poles"] == [-2.0]
    assert doc["residues"] == pytest.approx([1.5])


# ---------------------------------------------------------------------------
# Readers
# ---------------------------------------------------------------------------
@pytest.mark.error
def test_load_result_rejects_other_major_versions(tmp_path: Path) -> None:
    path = tmp_path / "result.json"
    path.write_text(json.dumps({"schema_version": "2.0"}))
    with pytest.raises(ConfigError) as exc_info:
        load_result(path)
    assert exc_info.value.key == "schema_version"


@pytest.mark.integration
def test_load_result_accepts_minor_versions(tmp_path: Path) -> None:
    path = tmp_path / "result.json"
    path.write_text(json.dumps({"schema_version": "1.3", "extra": True}))
    assert load_result(path)["extra"] is True


@pytest.mark.error
def test_load_result_rejects_malformed_json(tmp_path: Path) -> None:
    path = tmp_path / "result.json"
    path.write_text("{not json")
    with pytest.raises(ConfigError):
        load_result(path)


@pytest.mark.error
def test_read_trace_csv_checks_the_header(tmp_path: Path) -> None:
    path = tmp_path / "trace.csv"
    path.write_text("j,pole,error\n1,-1,0.5\n")
    with pytest.raises(ConfigError):
        read_trace_csv(path)


# ---------------------------------------------------------------------------
# run_and_report
# ---------------------------------------------------------------------------
@pytest.mark.integration
def test_approx_writes_trace_plot_and_result(tmp_path: Path) -> None:
    out = tmp_path / "run"
    report = run_and_report(_tiny(out))

    assert report.exit_code == 0
    assert sorted(p.name for p in report.files) == ["plot.csv", "result.json", "trace.csv"]
    assert list(out.glob(".*")) == []

    trace_text = (out / "trace.csv").read_text()
    assert trace_text.splitlines()[0] == ",".join(TRACE_COLUMNS) == "j,param,uniform_error,l2_error"
    rows = read_trace_csv(out / "trace.csv")
    assert [row["j"] for row in rows] == [1.0, 2.0]
    assert all(row["param"] < 0.0 for row in rows)

    plot_lines = (out / "plot.csv").read_text().splitlines()
    assert plot_lines[0] == "z,f,R,f_minus_R"
    assert len(plot_lines) == 301

    result = load_result(out / "result.json")
    assert result["schema_version"] == "1.0"
    assert result["algorithm"] == "oga"
    assert result["seed"] == 0
    assert "output_dir" not in result["config"]
    assert all(p < 0.0 for p in result["approximant"]["poles"])
    assert result["final_uniform_error"] == rows[-1]["uniform_error"]


@pytest.mark.integration
def test_json_only_format(tmp_path: Path) -> None:
    cfg = parse_config(TINY_APPROX + "formats: [json]\n")
    report = run_and_report(apply_overrides(cfg, output_dir=tmp_path))
    assert [p.name for p in report.files] == ["result.json"]


@pytest.mark.integration
def test_output_dir_falls_back_to_settings(output_dir: Path) -> None:
    report = run_and_report(parse_config(TINY_APPROX))
    assert all(p.parent == output_dir for p in report.files)


@pytest.mark.integration
def test_same_seed_gives_identical_files(tmp_path: Path) -> None:
    first = run_and_report(_tiny(tmp_path / "a", seed=3))
    second = run_and_report(_tiny(tmp_path / "b", seed=3))
    for a, b in zip(first.files, second.files):
        assert a.name == b.name
        assert a.read_bytes() == b.read_bytes()


@pytest.mark.integration
def test_compare_writes_one_trace_per_algorithm(tmp_path: Path) -> None:
    report = run_and_report(_tiny(tmp_path, command=Command.COMPARE))
    names = {p.name for p in report.files}
    assert names == {
        "trace_oga.csv",
        "trace_improved_oga.csv",
        "trace_wcga.csv",
        "compare.csv",
        "compare.json",
    }
    header = (tmp_path / "compare.csv").read_text().splitlines()[0]
    assert header == (
        "j,oga_param,oga_error,improved_oga_param,improved_oga_error,wcga_param,wcga_error"
    )
    document = load_result(tmp_path / "compare.json")
    assert set(document["runs"]) == {a.value for a in (Algorithm.OGA, Algorithm.IMPROVED_OGA, Algorithm.WCGA)}
    assert document["runs"]["improved_oga"]["mode"] == ImprovedMode.EVERY_STEP.value


@pytest.mark.integration
def test_precond_demo_writes_sweep_files(tmp_path: Path) -> None:
    cfg = parse_config(
        """
command: precond-demo
precond: {mu: [1.0], K: [1.0], n: [8], max_terms: 5}
pso: {swarm_size: 12, iterations: 20}
grid: {n_points: 300, refine_iters: 20, n_peaks: 4}
"""
    )
    report = run_and_report(apply_overrides(cfg, output_dir=tmp_path))
    assert sorted(p.name for p in report.files) == ["sweep.csv", "sweep.json"]
    lines = (tmp_path / "sweep.csv").read_text().splitlines()
    assert lines[0] == ",".join(SWEEP_COLUMNS)
    assert len(lines) == 2
    document = load_result(tmp_path / "sweep.json")
    assert len(document["rows"]) == 1
    assert document["rows"][0]["poles_negative"] is True


@pytest.mark.error
def test_failed_run_leaves_no_files(tmp_path: Path, monkeypatch: pytest.MonkeyPatch) -> None:
    def failing(*args: object, **kwargs: object) -> GreedyTrace:
        raise QuadratureError("no convergence", last_estimate=1.0, error_estimate=1.0)

    monkeypatch.setattr(experiment, "run_algorithm", failing)
    out = tmp_path / "run"
    with pytest.raises(QuadratureError):
        run_and_report(_tiny(out))
    assert list(out.iterdir()) == []


@pytest.mark.error
def test_failure_after_staging_discards_partial_output(
    tmp_path: Path, monkeypatch: pytest.MonkeyPatch
) -> None:
    def failing_plot(*args: object, **kwargs: object) -> str:
        raise FloatingPointError("overflow in plot")

    monkeypatch.setattr(experiment, "plot_csv", failing_plot)
    out = tmp_path / "run"
    with pytest.raises(FloatingPointError):
        run_and_report(_tiny(out))
    assert list(out.iterdir()) == []
