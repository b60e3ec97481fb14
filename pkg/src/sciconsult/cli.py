"""Command-line interface for the consult service.

Every API endpoint has a mirror subcommand here, plus two local-only
commands: ``validate-data`` for checking JSONL datasets against the unified
template and ``serve`` for running the HTTP server.
"""

from __future__ import annotations

import dataclasses
import functools
import json
import sys
import time
from contextlib import contextmanager
from pathlib import Path

import click
import yaml

from .config import AppConfig, load_config
from .data_template import SPLIT_ROLES, TASK_KINDS, load_split, validate_for_task
from .errors import BadRequestError, SciConsultError, ServiceError
from .service import ConsultService

_POLL_INTERVAL_S = 0.05


def _echo(payload) -> None:
    click.echo(json.dumps(payload, indent=2, sort_keys=True))


def _fail(exc: SciConsultError) -> None:
    body = {
        "code": getattr(exc, "code", "error"),
        "message": str(exc),
        "details": getattr(exc, "details", []),
    }
    click.echo(json.dumps(body, indent=2, sort_keys=True), err=True)
    sys.exit(1)


def handle_errors(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except ServiceError as exc:
            _fail(exc)
        except SciConsultError as exc:
            _fail(exc)

    return wrapper


def _parse_pairs(pairs: tuple[str, ...], option: str) -> dict:
    """Turn repeated ``KEY=VALUE`` options into a dict, parsing values as YAML."""
    out = {}
    for pair in pairs:
        key, sep, raw = pair.partition("=")
        if not sep or not key:
            raise click.BadParameter(f"expected KEY=VALUE, got {pair!r}", param_hint=option)
        try:
            out[key] = yaml.safe_load(raw)
        except yaml.YAMLError:
            out[key] = raw
    return out


@contextmanager
def _service(ctx: click.Context):
    service = ConsultService(ctx.obj["config"])
    try:
        yield service
    finally:
        service.shutdown()


def _wait_for_job(service: ConsultService, session_id: str, job_id: str) -> dict:
    while True:
        record = service.get_job(session_id, job_id)
        if record["status"] in ("succeeded", "failed"):
            return record
        time.sleep(_POLL_INTERVAL_S)


def _finish_submission(service, session_id: str, submission: dict, wait: bool) -> None:
    if wait:
        _echo(_wait_for_job(service, session_id, submission["job_id"]))
    else:
        _echo(submission)


@click.group()
@click.option("--config", "config_path", type=click.Path(), default=None,
              help="Path to a YAML config file.")
@click.option("--cassette-dir", type=click.Path(), default=None,
              help="Replay arXiv traffic from this cassette directory.")
@click.pass_context
def main(ctx, config_path, cassette_dir):
    """Questionnaire-driven modeling consultant."""
    try:
        config = load_config(config_path) if config_path else AppConfig()
    except SciConsultError as exc:
        _fail(exc)
    if cassette_dir is not None:
        config = dataclasses.replace(config, cassette_dir=cassette_dir)
    ctx.obj = {"config": config}


@main.command("create-session")
@click.pass_context
@handle_errors
def create_session(ctx):
    """Start a new consultation session."""
    with _service(ctx) as service:
        _echo(service.create_session())


@main.command("get-session")
@click.argument("session_id")
@click.pass_context
@handle_errors
def get_session(ctx, session_id):
    """Show a session, including answers, jobs, and artifacts."""
    with _service(ctx) as service:
        _echo(service.get_session(session_id))


@main.command("save-answers")
@click.argument("session_id")
@click.option("--answer", "answers", multiple=True, metavar="QID=VALUE",
              help="Set one answer; value is parsed as YAML. Repeatable.")
@click.option("--description", default=None, help="Project description text.")
@click.option("--accept", "accepted", multiple=True, metavar="QID",
              help="Accept a pending Smart Fill suggestion. Repeatable.")
@click.option("--edit", "edits", multiple=True, metavar="QID=VALUE",
              help="Override an accepted suggestion's value. Repeatable.")
@click.pass_context
@handle_errors
def save_answers(ctx, session_id, answers, description, accepted, edits):
    """Save answers and/or resolve Smart Fill suggestions."""
    answer_map = _parse_pairs(answers, "--answer")
    edit_map = _parse_pairs(edits, "--edit")
    with _service(ctx) as service:
        _echo(service.save_answers(
            session_id,
            answers=answer_map or None,
            project_description=description,
            accepted_suggestions=list(accepted) or None,
            edits=edit_map or None,
        ))


@main.command("smartfill")
@click.argument("session_id")
@click.option("--wait/--no-wait", default=True,
              help="Block until the job finishes (default) or just enqueue.")
@click.pass_context
@handle_errors
def smartfill(ctx, session_id, wait):
    """Run Smart Fill to draft answers for unanswered questions."""
    with _service(ctx) as service:
        submission = service.run_smartfill(session_id)
        _finish_submission(service, session_id, submission, wait)


@main.command("recommend")
@click.argument("session_id")
@click.option("--strategy", default=None,
              type=click.Choice(["abstract_only", "full_paper", "summaries"]))
@click.option("--k", type=int, default=None, help="Search query budget.")
@click.option("--n", type=int, default=None, help="Shortlist size cap.")
@click.option("--full-paper-id", "full_paper_ids", multiple=True,
              help="Paper id to read in full (full_paper strategy only).")
@click.option("--full-paper-mode", default=None, type=click.Choice(["pdf", "text"]))
@click.option("--force", is_flag=True, help="Skip the required-answers gate.")
@click.option("--wait/--no-wait", default=True)
@click.pass_context
@handle_errors
def recommend(ctx, session_id, strategy, k, n, full_paper_ids, full_paper_mode,
              force, wait):
    """Run the literature search and recommendation pipeline."""
    with _service(ctx) as service:
        submission = service.run_recommendation(
            session_id,
            strategy=strategy,
            k=k,
            n=n,
            full_paper_ids=list(full_paper_ids) or None,
            full_paper_mode=full_paper_mode,
            force=force,
        )
        _finish_submission(service, session_id, submission, wait)


@main.command("get-recommendation")
@click.argument("session_id")
@click.pass_context
@handle_errors
def get_recommendation(ctx, session_id):
    """Show the latest recommendation document."""
    with _service(ctx) as service:
        _echo(service.get_recommendation(session_id))


@main.command("prototype")
@click.argument("session_id")
@click.option("--tool", "tool_name", required=True, help="Registered tool name.")
@click.option("--task", required=True, type=click.Choice(list(TASK_KINDS)))
@click.option("--input-uri", required=True, help="Dataset directory or file URI.")
@click.option("--output-uri", default="", help="Where to write artifacts.")
@click.option("--param", "params", multiple=True, metavar="NAME=VALUE",
              help="Hyperparameter override. Repeatable.")
@click.option("--metric", "metrics", multiple=True, help="Metric name. Repeatable.")
@click.option("--compute-profile", default="local")
@click.option("--wait/--no-wait", default=True)
@click.pass_context
@handle_errors
def prototype(ctx, session_id, tool_name, task, input_uri, output_uri, params,
              metrics, compute_profile, wait):
    """Train and evaluate a baseline with one of the safe tools."""
    request = {
        "tool_name": tool_name,
        "task": task,
        "input_uri": input_uri,
        "output_uri": output_uri,
        "hyperparameters": _parse_pairs(params, "--param"),
        "metric_names": list(metrics),
        "compute_profile": compute_profile,
    }
    with _service(ctx) as service:
        submission = service.run_prototype(session_id, request)
        _finish_submission(service, session_id, submission, wait)


@main.command("get-job")
@click.argument("session_id")
@click.argument("job_id")
@click.pass_context
@handle_errors
def get_job(ctx, session_id, job_id):
    """Show one job record."""
    with _service(ctx) as service:
        _echo(service.get_job(session_id, job_id))


@main.command("get-prototype-result")
@click.argument("session_id")
@click.argument("job_id")
@click.pass_context
@handle_errors
def get_prototype_result(ctx, session_id, job_id):
    """Show the result payload of a finished prototype run."""
    with _service(ctx) as service:
        _echo(service.get_prototype_result(session_id, job_id))


@main.command("feedback")
@click.argument("session_id")
@click.option("--rating", "ratings", multiple=True, metavar="ASPECT=N",
              help="Integer rating for one aspect. Repeatable.")
@click.option("--text", default="", help="Free-form feedback text.")
@click.pass_context
@handle_errors
def feedback(ctx, session_id, ratings, text):
    """Record user feedback on the consultation."""
    rating_map = _parse_pairs(ratings, "--rating")
    with _service(ctx) as service:
        _echo(service.submit_feedback(session_id, ratings=rating_map, text=text))


@main.command("list-tools")
@click.pass_context
@handle_errors
def list_tools(ctx):
    """List the available prototype tools and their parameters."""
    with _service(ctx) as service:
        _echo({"tools": service.tools_payload()})


@main.command("show-schema")
@click.pass_context
@handle_errors
def show_schema(ctx):
    """Print the questionnaire schema."""
    with _service(ctx) as service:
        _echo(service.schema_payload())


@main.command("validate-data")
@click.argument("path", type=click.Path(exists=True))
@click.option("--task", required=True, type=click.Choice(list(TASK_KINDS)))
@handle_errors
def validate_data(path, task):
    """Check JSONL dataset files against the unified data template.

    PATH may be a single .jsonl file or a directory holding per-role files
    (train.jsonl, validation.jsonl, test.jsonl).
    """
    target = Path(path)
    if target.is_dir():
        jobs = [(target / f"{role}.jsonl", role) for role in SPLIT_ROLES
                if (target / f"{role}.jsonl").exists()]
        if not jobs:
            raise BadRequestError(f"no train/validation/test .jsonl files in {target}")
    else:
        role = target.stem if target.stem in SPLIT_ROLES else "test"
        jobs = [(target, role)]

    problems = 0
    for file_path, role in jobs:
        split, violations = load_split(file_path, role)
        report = validate_for_task(split, task)
        problems += len(violations) + len(report.findings)
        click.echo(f"{file_path} ({role}): {len(split.records)} records, "
                   f"{len(violations)} template violations, "
                   f"{len(report.findings)} task findings")
        for v in violations:
            where = f"line {v.line_number}" if v.line_number else "file"
            rec = f" record={v.record_id}" if v.record_id else ""
            click.echo(f"  {where} [{v.code}]{rec}: {v.message}")
        for finding in report.findings:
            rec = f" record={finding.record_id}" if finding.record_id else ""
            click.echo(f"  task [{finding.code}]{rec}: {finding.message}")
    click.echo("OK" if problems == 0 else f"FAILED: {problems} problem(s)")
    sys.exit(0 if problems == 0 else 1)


@main.command("serve")
@click.option("--host", default="127.0.0.1")
@click.option("--port", type=int, default=8000)
@click.pass_context
@handle_errors
def serve(ctx, host, port):
    """Run the HTTP API server."""
    import uvicorn

    from .api import create_app

    service = ConsultService(ctx.obj["config"])
    uvicorn.run(create_app(service), host=host, port=port)


if __name__ == "__main__":
    main()
