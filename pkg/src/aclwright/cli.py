"""Command-line entry points.

`gen` builds a scenario file, `run` drives the whole pipeline over it,
`detect`/`plan`/`verify` stop at the corresponding stage, and `serve`
hosts the HTTP API for the operator console.
"""

from __future__ import annotations

import json
import os
import sys
from pathlib import Path

import click

from . import comprehension as comp
from .deploy import STRATEGIES
from .pipeline import Session, record_to_json, run_pipeline
from .scenarios import Scenario, ScenarioError, ScenarioParams, generate_scenario

TEMPLATES = ("campus", "cloud", "fig2", "fig3")


def load_scenario(spec: str, seed: int, **params) -> Scenario:
    """`spec` is either a template name or a path to a scenario JSON file."""
    if spec in TEMPLATES:
        return generate_scenario(ScenarioParams(template=spec, seed=seed, **params))
    path = Path(spec)
    if not path.exists():
        raise click.ClickException(
            f"{spec!r} is neither a template ({', '.join(TEMPLATES)}) "
            "nor an existing scenario file")
    with open(path) as f:
        return Scenario.from_json(json.load(f))


def make_backend(kind: str, scenario: Scenario, cfg: comp.BackendConfig):
    if kind == "live":
        if not cfg.endpoint:
            raise click.ClickException(
                "--backend live requires ACLW_LLM_ENDPOINT to be set")
        return comp.HttpChatBackend(cfg)
    return comp.MockChatBackend(aliases=scenario.aliases)


def emit(doc, out: str | None, name: str):
    if out:
        path = Path(out)
        path.mkdir(parents=True, exist_ok=True)
        target = path / name
        with open(target, "w") as f:
            json.dump(doc, f, indent=2, sort_keys=True)
        click.echo(str(target))
    else:
        json.dump(doc, sys.stdout, indent=2, sort_keys=True)
        click.echo()


scenario_opt = click.option("--scenario", "-s", default="fig2", show_default=True,
                            help="template name or scenario JSON file")
seed_opt = click.option("--seed", default=0, show_default=True, type=int)
backend_opt = click.option("--backend", default="mock", show_default=True,
                           type=click.Choice(["mock", "live"]))
strategy_opt = click.option("--strategy", default="xumi", show_default=True,
                            type=click.Choice(list(STRATEGIES)))
out_opt = click.option("--out", default=None, metavar="DIR",
                       help="run directory for artifacts")


@click.group()
def main():
    """Conflict-aware ACL configuration pipeline."""


@main.command()
@scenario_opt
@seed_opt
@out_opt
@click.option("--rules-per-acl", default=20, show_default=True, type=int)
@click.option("--permit", "num_permit", default=0, type=int)
@click.option("--deny", "num_deny", default=0, type=int)
@click.option("--protect", "num_protect", default=0, type=int)
@click.option("--apps", "num_apps", default=3, show_default=True, type=int)
@click.option("--conflict-ratio", default=None, type=float,
              help="target mean conflict ratio, hit within 0.05")
def gen(scenario, seed, out, rules_per_acl, num_permit, num_deny, num_protect,
        num_apps, conflict_ratio):
    """Generate a scenario and write it as JSON."""
    try:
        sc = load_scenario(scenario, seed, rules_per_acl=rules_per_acl,
                           num_permit=num_permit, num_deny=num_deny,
                           num_protect=num_protect, num_apps=num_apps,
                           target_conflict_ratio=conflict_ratio)
    except ScenarioError as e:
        raise click.ClickException(str(e))
    emit(sc.to_json(), out, "scenario.json")


@main.command()
@scenario_opt
@seed_opt
@backend_opt
@strategy_opt
@out_opt
@click.option("--auto-approve/--no-auto-approve", default=True, show_default=True)
def run(scenario, seed, backend, strategy, out, auto_approve):
    """Run the full pipeline and print the report."""
    sc = load_scenario(scenario, seed)
    cfg = comp.BackendConfig.from_env()
    report = run_pipeline(sc, make_backend(backend, sc, cfg), cfg,
                          strategy=strategy, auto_approve=auto_approve,
                          out_dir=out)
    json.dump(report, sys.stdout, indent=2, sort_keys=True)
    click.echo()
    if report.get("status") == "awaiting-review":
        click.echo("stopped at review gate; rerun with --auto-approve or "
                   "use `aclwright serve`", err=True)
    elif not report["verified"]:
        raise click.ClickException("verification failed")


def _comprehend_all(sc: Scenario, backend, cfg, out):
    session = Session(sc, backend, cfg, run_dir=Path(out) if out else None)
    ids = []
    for spec in sc.intents:
        if spec.action == "protect":
            continue
        rec = session.submit_intent(spec.text)
        session.approve(rec.id)
        ids.append(rec.id)
    return session, ids


@main.command()
@scenario_opt
@seed_opt
@backend_opt
@out_opt
@click.option("--full-sets", is_flag=True,
              help="include exact hex bit-strings per conflict record")
def detect(scenario, seed, backend, out, full_sets):
    """Comprehend and approve every intent, then report conflicts."""
    sc = load_scenario(scenario, seed)
    cfg = comp.BackendConfig.from_env()
    session, ids = _comprehend_all(sc, make_backend(backend, sc, cfg), cfg, out)
    report = []
    for intent_id in ids:
        rec = session.detect(intent_id)
        det = rec.detection
        for r in det.records:
            row = record_to_json(r, session.env, det.atomizer, full=full_sets)
            row["intent_id"] = intent_id
            report.append(row)
    emit(report, out, "conflicts.json")


@main.command()
@scenario_opt
@seed_opt
@backend_opt
@strategy_opt
@out_opt
@click.option("--all-strategies", is_flag=True, help="compare every strategy")
def plan(scenario, seed, backend, strategy, out, all_strategies):
    """Compute a deployment plan (without applying it)."""
    sc = load_scenario(scenario, seed)
    cfg = comp.BackendConfig.from_env()
    session, ids = _comprehend_all(sc, make_backend(backend, sc, cfg), cfg, out)
    for intent_id in ids:
        session.detect(intent_id)
    if all_strategies:
        doc = {s: session.plan(s).to_json() for s in STRATEGIES}
        for s in STRATEGIES:
            click.echo(f"{s}: {doc[s]['total_rules']} rules "
                       f"on {doc[s]['num_placements']} interfaces", err=True)
        emit(doc, out, "plans.json")
    else:
        emit(session.plan(strategy).to_json(), out, f"plan-{strategy}.json")


@main.command()
@scenario_opt
@seed_opt
@backend_opt
@strategy_opt
@out_opt
def verify(scenario, seed, backend, strategy, out):
    """Plan, apply, and verify; exit nonzero on violations."""
    sc = load_scenario(scenario, seed)
    cfg = comp.BackendConfig.from_env()
    session, ids = _comprehend_all(sc, make_backend(backend, sc, cfg), cfg, out)
    for intent_id in ids:
        session.detect(intent_id)
    session.plan(strategy)
    session.apply(strategy)
    report = session.verify()
    emit(report.to_json(), out, "verification.json")
    if not report.ok:
        raise click.ClickException("verification failed")


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8640, show_default=True, type=int)
@click.option("--data-dir", default=None, metavar="DIR",
              help="where session artifacts are persisted "
                   "(default: ACLW_DATA_DIR)")
def serve(host, port, data_dir):
    """Host the operator console API."""
    import uvicorn

    from .service import create_app
    app = create_app(data_dir=data_dir or os.environ.get("ACLW_DATA_DIR"))
    uvicorn.run(app, host=host, port=port, log_level="info")


if __name__ == "__main__":
    main()
