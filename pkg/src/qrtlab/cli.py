"""Batch front door: load an instance, run analyses, emit deterministic reports.

Exit codes: 0 when everything passes or is inconclusive, 1 when any
verdict fails, 2 for configuration or instance errors. Identical
(spec, config, seed) runs produce byte-identical JSON.
"""

from __future__ import annotations

import json
import sys
from dataclasses import dataclass
from typing import Optional

import click

from . import __version__
from .engine import ClosureCapError
from .measures import build_measure
from .model import QrtInstance, SpecError, free_states, load_instance
from .preorder import equivalence_classes, maximal_set, minimal_set, preorder_matrix
from .rates import INF, estimate_rate, replication_classify
from .theorems import theorem_suite, values_summary

KNOWN_COMMANDS = ("preorder", "rates", "measures", "theorems")


@dataclass
class RunConfig:
    spec_path: str
    commands: tuple[str, ...] = ("theorems",)
    n_max: int = 3
    closure_depth: Optional[int] = None
    seed: int = 42
    output_format: str = "json"
    output_path: Optional[str] = None


def _sanitize(obj):
    """Make a report JSON-safe and deterministic (inf -> 'inf', tuples -> lists)."""
    if isinstance(obj, dict):
        return {str(k): _sanitize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_sanitize(v) for v in obj]
    if isinstance(obj, float):
        if obj == INF:
            return "inf"
        if obj == -INF:
            return "-inf"
        return obj
    if isinstance(obj, (str, int, bool)) or obj is None:
        return obj
    return str(obj)


def _cmd_preorder(q: QrtInstance, config: RunConfig) -> tuple[dict, int]:
    payload = {}
    for level in range(1, min(config.n_max, q.max_level) + 1):
        rel = preorder_matrix(q, level)
        quo = equivalence_classes(rel)
        ms = maximal_set(rel)
        fs = free_states(q, level)
        payload[f"level_{level}"] = {
            "roster": list(rel.roster),
            "reaches": [[bool(v) for v in row] for row in rel.reaches],
            "classes": [[rel.roster[i] for i in c] for c in quo.classes],
            "maximal": list(ms.states),
            "minimal": list(minimal_set(rel)),
            "free": list(fs.states),
            "note": rel.depth_note,
        }
    return payload, 0


def _cmd_rates(q: QrtInstance, config: RunConfig) -> tuple[dict, int]:
    roster = q.roster(1)
    pairs = {}
    for phi in roster:
        for psi in roster:
            est = estimate_rate(q, phi, psi, config.n_max)
            pairs[f"{phi}->{psi}"] = {
                "lower": str(est.lower),
                "upper": est.upper_desc,
                "unbounded": est.unbounded,
                "witnesses": [w.to_json() for w in est.witnesses],
                "note": est.horizon_note,
            }
    replication = {}
    for s in roster:
        v = replication_classify(q, s, config.n_max)
        replication[s] = {
            "verdict": v.verdict,
            "is_free": v.is_free,
            "catalytically_replicable": v.catalytically_replicable,
            "witness": v.witness.to_json() if v.witness else None,
        }
    return {"pairs": pairs, "replication": replication}, 0


def _cmd_measures(q: QrtInstance, config: RunConfig) -> tuple[dict, int]:
    payload = {"values": values_summary(q, config.n_max), "declared": {}}
    failures = 0
    from .measures import (
        check_additivity_family,
        check_consistency,
        check_monotonicity,
        check_value_monotonicity,
        free_spec_from_instance,
        regularized_rer_estimate,
        uniqueness_report,
    )
    from .rates import collect_rate_witnesses

    vm = check_value_monotonicity(q, config.n_max, seed=config.seed)
    payload["value_monotonicity"] = {"verdict": vm.verdict, "note": vm.note,
                                     "counterexample": vm.counterexample}
    if vm.verdict == "FAIL":
        failures += 1
    if q.flavor == "numeric" and q.rer_free is not None:
        spec1 = free_spec_from_instance(q)
        reg = {}
        for s in q.roster(1):
            r = regularized_rer_estimate(q.state_matrix(s), spec1,
                                         n_max=min(config.n_max, q.max_level))
            reg[s] = {"per_copy": r.per_copy, "running_min": r.running_min}
        payload["regularized_rer"] = reg

    pool = None
    for decl in q.measures:
        measure = build_measure(q, decl)
        entry = {"values": {}}
        for s in q.roster(1):
            state = s if q.flavor == "discrete" else q.state_matrix(s)
            entry["values"][s] = measure(q, 1, state)
        mono = check_monotonicity(measure, q, sample_count=100, seed=config.seed)
        entry["monotonicity"] = {"verdict": mono.verdict, "counterexample": mono.counterexample}
        add = check_additivity_family(measure, q, seed=config.seed)
        entry["additivity"] = {k: v.verdict for k, v in add.verdicts.items()}
        if pool is None:
            pool = collect_rate_witnesses(q, levels=(1,), n_max=min(config.n_max, 2))
        cons = check_consistency(measure, q, pool, config.n_max)
        entry["consistency"] = {"verdict": cons.verdict, "counterexample": cons.counterexample}
        uniq = uniqueness_report(measure, q, n_max=config.n_max)
        entry["uniqueness"] = {
            "entries": [vars(e) for e in uniq.entries],
            "hypotheses": uniq.hypotheses,
            "conflict_detector_fired": uniq.conflict_detector_fired,
        }
        for v in (mono.verdict, cons.verdict, *entry["additivity"].values()):
            if v == "FAIL":
                failures += 1
        if not uniq.ok:
            failures += 1
        payload["declared"][measure.name] = entry
    return payload, failures


def _cmd_theorems(q: QrtInstance, config: RunConfig) -> tuple[dict, int]:
    verdicts = theorem_suite(q, config.n_max, config.seed)
    failures = sum(1 for v in verdicts if v.status == "FAIL")
    return {
        "verdicts": [v.to_json() for v in verdicts],
        "values": values_summary(q, config.n_max),
    }, failures


_COMMANDS = {
    "preorder": _cmd_preorder,
    "rates": _cmd_rates,
    "measures": _cmd_measures,
    "theorems": _cmd_theorems,
}


def run(config: RunConfig) -> tuple[dict, int]:
    """Execute the configured commands and assemble the report."""
    if not config.commands:
        return {"schema": 1, "error": "no commands requested"}, 2
    unknown = [c for c in config.commands if c not in _COMMANDS]
    if unknown:
        return {"schema": 1, "error": f"unknown commands: {unknown}"}, 2
    if config.n_max < 1:
        return {"schema": 1, "error": "n_max must be >= 1"}, 2
    try:
        q = load_instance(config.spec_path, closure_depth=config.closure_depth)
    except (SpecError, OSError) as exc:
        return {"schema": 1, "error": str(exc)}, 2

    report = {
        "schema": 1,
        "tool": {"name": "qrtlab", "version": __version__},
        "seed": config.seed,
        "n_max": config.n_max,
        "instance": {
            "digest": q.digest(),
            "flavor": q.flavor,
            "max_level": q.max_level,
            "closure_depth": q.closure_depth,
        },
        "commands": list(config.commands),
        "results": {},
    }
    failures = 0
    try:
        for cmd in config.commands:
            payload, fails = _COMMANDS[cmd](q, config)
            report["results"][cmd] = payload
            failures += fails
    except ClosureCapError as exc:
        return {"schema": 1, "error": str(exc)}, 2
    return _sanitize(report), 1 if failures else 0


def render_json(report: dict) -> str:
    return json.dumps(report, sort_keys=True, indent=2) + "\n"


def render_text(report: dict) -> str:
    lines = []

    def walk(prefix, obj):
        if isinstance(obj, dict):
            for k in sorted(obj):
                walk(f"{prefix}{k}." if prefix else f"{k}.", obj[k])
        elif isinstance(obj, list):
            for i, v in enumerate(obj):
                walk(f"{prefix}{i}.", v)
        else:
            lines.append(f"{prefix[:-1]} = {obj}")

    walk("", report)
    return "\n".join(lines) + "\n"


@click.group()
@click.version_option(__version__, prog_name="qrtlab")
def main():
    """Analyze finite quantum resource theory instances."""


@main.command(name="run")
@click.option("--spec", "spec_path", required=True,
              type=click.Path(exists=True, dir_okay=False),
              help="Instance document (JSON).")
@click.option("--cmd", "commands", default="theorems", show_default=True,
              help="Comma-separated: preorder,rates,measures,theorems.")
@click.option("--n-max", default=3, show_default=True, help="Copy horizon for rate searches.")
@click.option("--closure-depth", default=None, type=int,
              help="Override the instance's numeric closure depth.")
@click.option("--seed", default=42, show_default=True, help="Seed for all sampling.")
@click.option("--format", "output_format", type=click.Choice(["json", "text"]),
              default="json", show_default=True)
@click.option("--out", "output_path", default=None, type=click.Path(dir_okay=False),
              help="Write the report here instead of stdout.")
def run_command(spec_path, commands, n_max, closure_depth, seed, output_format, output_path):
    """Run analyses on an instance and emit a deterministic report."""
    config = RunConfig(
        spec_path=spec_path,
        commands=tuple(c.strip() for c in commands.split(",") if c.strip()),
        n_max=n_max,
        closure_depth=closure_depth,
        seed=seed,
        output_format=output_format,
        output_path=output_path,
    )
    report, code = run(config)
    text = render_json(report) if output_format == "json" else render_text(report)
    if output_path:
        with open(output_path, "w", encoding="utf-8") as fh:
            fh.write(text)
        if "error" in report:
            click.echo(f"error: {report['error']}", err=True)
    else:
        click.echo(text, nl=False)
    sys.exit(code)


if __name__ == "__main__":
    main()
