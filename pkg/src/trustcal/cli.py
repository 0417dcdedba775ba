"""Command-line front door: train, select-cases, simulate, metrics, serve,
replay, make-data. Every subcommand is reproducible from (inputs, config,
seed) and fails with a one-line machine-parsable error."""
from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from . import data_gen
from .ai_model import AiModel, calibration_report, select_task_cases, train, TaskCaseSet
from .config import Config, load_config
from .dataset import canonical_schema, load_dataset, split
from .metrics import TrialLog, build_report
from .service import ServiceContext, SessionService, create_app, verify_replay


def _fail(code: str, message: str) -> None:
    click.echo(f"error: {code}: {message}", err=True)
    sys.exit(1)


def _load(config_path: str | None, seed: int | None) -> Config:
    try:
        cfg = load_config(config_path)
    except Exception as exc:
        _fail("bad_config", str(exc))
    if seed is not None:
        import dataclasses
        cfg = dataclasses.replace(cfg, split_seed=seed,
                                  sim=dataclasses.replace(cfg.sim, seed=seed))
    return cfg


def _prepared_split(data: str, cfg: Config):
    schema = canonical_schema()
    instances = load_dataset(data, schema)
    return split(instances, cfg.train_fraction, cfg.split_seed, schema=schema)


@click.group()
def main():
    """Correctness-likelihood estimation and trust-calibration toolkit."""


@main.command("make-data")
@click.option("--out", required=True, type=click.Path())
@click.option("--rows", default=data_gen.DEFAULT_ROWS, show_default=True)
@click.option("--seed", default=20230501, show_default=True)
def make_data(out: str, rows: int, seed: int):
    """Write the bundled Adult-style corpus CSV."""
    path = data_gen.write_corpus(out, n=rows, seed=seed)
    click.echo(f"wrote {rows} rows to {path}")


@main.command("train")
@click.option("--config", "config_path", type=click.Path(exists=True))
@click.option("--data", required=True, type=click.Path(exists=True))
@click.option("--out", required=True, type=click.Path())
@click.option("--seed", type=int)
def train_command(config_path, data, out, seed):
    """Train the assisting classifier; writes model JSON + calibration report."""
    cfg = _load(config_path, seed)
    try:
        prepared = _prepared_split(data, cfg)
        model = train(prepared, cfg.ai)
        report = calibration_report(model, list(prepared.test))
    except Exception as exc:
        _fail("train_failed", str(exc))
    out_path = Path(out)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    model.save(out_path)
    report_path = out_path.with_suffix(".calibration.json")
    report_path.write_text(json.dumps(report.to_dict(), indent=2))
    click.echo(f"model -> {out_path}")
    click.echo(f"calibration report -> {report_path} "
               f"(ECE {report.expected_calibration_error:.4f})")


@main.command("select-cases")
@click.option("--config", "config_path", type=click.Path(exists=True))
@click.option("--data", required=True, type=click.Path(exists=True))
@click.option("--model", "model_path", required=True, type=click.Path(exists=True))
@click.option("--out", required=True, type=click.Path())
@click.option("--seed", type=int)
def select_cases(config_path, data, model_path, out, seed):
    """Pick the 40 experimental task cases under the composition constraints."""
    cfg = _load(config_path, seed)
    try:
        prepared = _prepared_split(data, cfg)
        model = AiModel.load(model_path, prepared.schema)
        case_set = select_task_cases(model, prepared, seed=cfg.sim.seed,
                                     config=cfg.cases)
    except Exception as exc:
        _fail("selection_failed", str(exc))
    Path(out).parent.mkdir(parents=True, exist_ok=True)
    case_set.save(out)
    click.echo(f"task cases -> {out}")
    for coverage in case_set.coverage:
        click.echo(f"  coverage {coverage.feature}: {coverage.fraction:.0%} of common values")


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True))
@click.option("--data", required=True, type=click.Path(exists=True))
@click.option("--out", required=True, type=click.Path())
@click.option("--seed", type=int)
def simulate(config_path, data, out, seed):
    """Run the synthetic-agent experiment; writes ExperimentResult JSON."""
    cfg = _load(config_path, seed)
    try:
        from .sim import prepare_environment, run_experiment
        schema = canonical_schema()
        instances = load_dataset(data, schema)
        env = prepare_environment(cfg, instances)
        result = run_experiment(cfg.sim, env)
    except Exception as exc:
        _fail("simulation_failed", str(exc))
    Path(out).parent.mkdir(parents=True, exist_ok=True)
    Path(out).write_text(json.dumps(result.to_dict(), indent=2))
    click.echo(result.summary_text())
    click.echo(f"result -> {out}")


@main.command("metrics")
@click.option("--config", "config_path", type=click.Path(exists=True))
@click.option("--logs", "logs_path", required=True, type=click.Path(exists=True),
              help="Exported trial logs (service export JSON or a JSON list).")
@click.option("--out", required=True, type=click.Path())
@click.option("--seed", type=int)
def metrics_cmd(config_path, logs_path, out, seed):
    """Compute the objective measures from exported trial logs."""
    cfg = _load(config_path, seed)
    try:
        data = json.loads(Path(logs_path).read_text())
        if isinstance(data, dict) and "sessions" in data:
            raw_logs = [log for s in data["sessions"] for log in s["trial_logs"]]
        else:
            raw_logs = data
        logs = [TrialLog.from_dict(entry) for entry in raw_logs]
        report = build_report(logs, threshold=cfg.cases.confidence_threshold)
    except Exception as exc:
        _fail("metrics_failed", str(exc))
    Path(out).parent.mkdir(parents=True, exist_ok=True)
    Path(out).write_text(json.dumps(report.to_dict(), indent=2))
    click.echo(report.to_text())
    click.echo(f"report -> {out}")


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True))
@click.option("--data", required=True, type=click.Path(exists=True))
@click.option("--model", "model_path", type=click.Path(exists=True),
              help="Pretrained model JSON; trains in-process when omitted.")
@click.option("--cases", "cases_path", type=click.Path(exists=True),
              help="Task-case JSON; selects in-process when omitted.")
@click.option("--data-dir", envvar="TRUSTCAL_DATA_DIR", default="./trustcal-data",
              show_default=True)
@click.option("--port", default=8000, show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--seed", type=int)
def serve(config_path, data, model_path, cases_path, data_dir, port, host, seed):
    """Start the session service (blocks)."""
    cfg = _load(config_path, seed)
    try:
        prepared = _prepared_split(data, cfg)
        model = AiModel.load(model_path, prepared.schema) if model_path \
            else train(prepared, cfg.ai)
        if cases_path:
            case_set = TaskCaseSet.from_json(json.loads(Path(cases_path).read_text()))
        else:
            case_set = select_task_cases(model, prepared, seed=cfg.sim.seed,
                                         config=cfg.cases)
        context = ServiceContext.build(prepared, model, case_set, cfg)
        service = SessionService(context, data_dir)
        app = create_app(service)
    except Exception as exc:
        _fail("serve_failed", str(exc))
    import uvicorn
    click.echo(f"serving on http://{host}:{port} (data dir: {data_dir})")
    uvicorn.run(app, host=host, port=port, log_level="warning")


@main.command()
@click.option("--export", "export_path", required=True, type=click.Path(exists=True))
def replay(export_path):
    """Validate event sourcing: re-fold exported event streams and compare."""
    try:
        data = json.loads(Path(export_path).read_text())
        problems = verify_replay(data)
    except Exception as exc:
        _fail("replay_failed", str(exc))
    if problems:
        _fail("replay_mismatch", "; ".join(problems))
    click.echo(f"replay ok: {len(data['sessions'])} session(s) reconstructed exactly")


if __name__ == "__main__":
    main()
