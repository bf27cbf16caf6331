"""Stage orchestration: match, profile, map, transform, repair, then report."""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator

from . import mapper, matcher, profiler, repairer, transformer
from .config import ConfigError, RunConfig, load_config
from .evaluate import MetricsReport, evaluate
from .ingest import load_relation, write_relation
from .model import ContextRelationship, Relation, validate_relationship

SCORE_DIGITS = 6


@dataclass
class PipelineResult:
    tables: dict[str, Relation]
    report: dict
    timings: dict[str, float] = field(default_factory=dict)
    metrics: MetricsReport | None = None

    @property
    def relation(self) -> Relation:
        return next(iter(self.tables.values()))

    def __iter__(self) -> Iterator:
        return iter((self.relation, self.report))


def _r(x: float | None) -> float | None:
    return None if x is None else round(x, SCORE_DIGITS)


def _load_all(cfg: RunConfig) -> tuple[dict[str, Relation], list[tuple[Relation, ContextRelationship]]]:
    null_tokens = cfg.params.null_tokens
    sources = {}
    for s in cfg.sources:
        sources[s.name] = load_relation(s.path, s.dialect, null_tokens, s.name)
    contexts = []
    for c in cfg.contexts:
        rel = load_relation(c.source.path, c.source.dialect, null_tokens, c.source.name)
        problems = validate_relationship(c.relationship, [rel], cfg.target)
        if problems:
            raise ConfigError(f"context {c.source.name}: " + "; ".join(problems))
        contexts.append((rel, c.relationship))
    return sources, contexts


def run(cfg: RunConfig) -> PipelineResult:
    timings: dict[str, float] = {}
    clock = time.perf_counter()

    def lap(stage: str):
        nonlocal clock
        now = time.perf_counter()
        timings[stage] = round(now - clock, 4)
        clock = now

    p = cfg.params
    tg = cfg.toggles
    sources, contexts = _load_all(cfg)
    lap("load")

    # matching
    matches = matcher.CorrespondenceSet()
    for name in sorted(sources):
        src = sources[name]
        if tg.matching and contexts:
            m = matcher.match(src, cfg.target, contexts, p)
        else:
            m = matcher.schema_match(src, cfg.target)
        matches = matcher.combine(matches, m)
    lap("matching")

    # profiling and mapping
    fks = profiler.discover_foreign_keys(sources.values(), matches.values(), p.match_lb)
    clusters = mapper.cluster_sources(sources.values(), fks)
    map_contexts = contexts if tg.mapping else []
    selected = mapper.select_mappings(clusters, matches, map_contexts, sources, cfg.target, p)
    tables = mapper.run_mappings(selected, sources, cfg.target)
    lap("mapping")

    # transformation
    rules_by_table: dict[str, list[transformer.TransformRule]] = {}
    harvested: dict[str, dict[str, int]] = {}
    if tg.transformation and contexts:
        ctx_fds = {ctx.name: profiler.discover_fds(ctx, 1) for ctx, _ in contexts}
        for name, inst in tables.items():
            if not len(inst):
                continue
            rules, counts = transformer.learn_rules(
                inst, name, contexts, profiler.discover_fds(inst, 1), ctx_fds, p.kfolds, p.seed
            )
            rules_by_table[name] = rules
            harvested[name] = counts
            tables[name] = transformer.apply_transforms(inst, rules)
    lap("transformation")

    # repair
    repair_report: dict[str, dict] = {}
    if tg.repair and (contexts or cfg.fds):
        tuned = {}
        for ctx, rel in contexts:
            tuned[ctx.name] = repairer.tune_cfds(ctx, p)
        for name, inst in tables.items():
            sets, dropped, per_ctx = [], 0, {}
            for ctx, rel in contexts:
                if rel.target_table != name:
                    continue
                rewritten, d = repairer.rewrite_to_target(tuned[ctx.name], rel)
                dropped += d
                per_ctx[ctx.name] = {"discovered": len(tuned[ctx.name]), "rewritten": len(rewritten)}
                sets.append((rel.ctype, rewritten))
            cfds, conflicts = repairer.merge_cfds(sets)
            fds = [profiler.FunctionalDependency(name, lhs, rhs) for t, lhs, rhs in cfg.fds if t == name]
            result = repairer.repair_relation(inst, [*cfds, *fds])
            tables[name] = result.relation
            repair_report[name] = {
                "contexts": per_ctx,
                "cfds": len(cfds),
                "dropped_unmapped": dropped,
                "conflicts_discarded": conflicts,
                "total_cost": result.total_cost,
                "ops": [op.as_dict() for op in result.ops],
                "unresolved_rows": result.unresolved,
                "greedy_rows": result.inexact,
            }
    lap("repair")

    metrics = None
    ev_report = None
    if cfg.evaluation is not None:
        ev = cfg.evaluation
        truth = load_relation(ev.ground_truth, ev.dialect, p.null_tokens, "ground_truth")
        metrics = evaluate(tables[ev.table], truth, ev.keys, ev.excluded_marker)
        ev_report = {"table": ev.table, "keys": list(ev.keys), **metrics.as_dict()}
    lap("evaluation")

    report = {
        "toggles": tg.as_dict(),
        "seed": p.seed,
        "sources": {n: {"attributes": list(r.attributes), "tuples": len(r)} for n, r in sorted(sources.items())},
        "contexts": [
            {"name": ctx.name, "type": rel.ctype.value, "target_table": rel.target_table, "tuples": len(ctx)}
            for ctx, rel in contexts
        ],
        "matches": [
            {
                "source": str(c.source),
                "target": str(c.target),
                "score": _r(c.score),
                "provenance": sorted(c.provenance),
            }
            for c in matches.correspondences()
        ],
        "foreign_keys": sorted(f"{fk.source} -> {fk.target} ({fk.shared})" for fk in fks),
        "clusters": [sorted(c.members) for c in clusters],
        "mappings": [
            {
                "table": m.table,
                "anchor": m.anchor,
                "tgd": m.to_tgd(cfg.target, sources),
                "threshold": m.threshold_used,
                "verification_score": _r(m.verification_score),
                "correspondences": len(m.projection),
            }
            for m in selected
        ],
        "transformation": {
            name: {
                "examples": harvested.get(name, {}),
                "rules": [
                    {
                        "column": r.source_column,
                        "guard": r.guard,
                        "program": transformer.format_program(r.program),
                        "support": r.support,
                        "consistency": _r(r.consistency),
                        "context": r.context,
                    }
                    for r in rules
                ],
            }
            for name, rules in sorted(rules_by_table.items())
        },
        "repair": repair_report,
        "output": {n: len(r) for n, r in tables.items()},
        "evaluation": ev_report,
    }
    return PipelineResult(tables, report, timings, metrics)


def format_report(report: dict) -> str:
    lines = ["wrangling report", "================", ""]
    lines.append("toggles: " + ", ".join(f"{k}={'on' if v else 'off'}" for k, v in report["toggles"].items()))
    lines.append(f"seed: {report['seed']}")
    lines.append("")
    lines.append("matches:")
    for m in report["matches"]:
        lines.append(f"  {m['source']} -> {m['target']}  {m['score']:.3f}  [{', '.join(m['provenance'])}]")
    lines.append("")
    lines.append("foreign keys:")
    lines.extend(f"  {fk}" for fk in report["foreign_keys"] or ["(none)"])
    lines.append("")
    lines.append("mappings:")
    for m in report["mappings"]:
        score = "-" if m["verification_score"] is None else f"{m['verification_score']:.3f}"
        lines.append(f"  [{m['table']} via {m['anchor']}, t={m['threshold']}, score={score}]")
        lines.append(f"    {m['tgd']}")
    lines.append("")
    lines.append("transformation rules:")
    any_rule = False
    for table, info in report["transformation"].items():
        for r in info["rules"]:
            any_rule = True
            lines.append(
                f"  {table}.{r['column']} when shape={r['guard']!r}: {r['program']}"
                f"  (support {r['support']}, consistency {r['consistency']}, from {r['context']})"
            )
    if not any_rule:
        lines.append("  (none)")
    lines.append("")
    lines.append("repairs:")
    any_op = False
    for table, info in report["repair"].items():
        lines.append(f"  {table}: {info['cfds']} CFDs, total cost {info['total_cost']}")
        for op in info["ops"]:
            any_op = True
            lines.append(f"    row {op['row']} {op['attribute']}: {op['old']!r} -> {op['new']!r} (cost {op['cost']})")
        if info["unresolved_rows"]:
            lines.append(f"    unresolved rows: {info['unresolved_rows']}")
    if not report["repair"]:
        lines.append("  (stage skipped)")
    elif not any_op:
        lines.append("    (no changes)")
    lines.append("")
    lines.append("output tuples: " + ", ".join(f"{k}={v}" for k, v in report["output"].items()))
    ev = report.get("evaluation")
    if ev:
        lines.append("")
        lines.append(f"evaluation on {ev['table']} (keys {', '.join(ev['keys'])}):")
        lines.append(f"  TP={ev['TP']} FP={ev['FP']} FN={ev['FN']} TN={ev['TN']}")
        for k in ("precision", "recall", "f1", "accuracy", "npv"):
            lines.append(f"  {k}: {ev[k]:.6f}" if k in ev else f"  {k}: undefined")
    return "\n".join(lines) + "\n"


def write_outputs(result: PipelineResult, out: Path) -> None:
    out.mkdir(parents=True, exist_ok=True)
    for name, rel in result.tables.items():
        write_relation(rel, out / f"{name}.csv")
    (out / "report.json").write_text(
        json.dumps(result.report, indent=2, sort_keys=True, ensure_ascii=False) + "\n", encoding="utf-8"
    )
    (out / "report.txt").write_text(format_report(result.report), encoding="utf-8")
    (out / "timings.json").write_text(json.dumps(result.timings, indent=2) + "\n", encoding="utf-8")


def run_pipeline(
    config_path: str | Path,
    out: str | Path | None = None,
    toggles: dict[str, bool] | None = None,
    seed: int | None = None,
) -> PipelineResult:
    """Load a config file, run every stage and optionally write outputs to ``out``."""
    cfg = load_config(config_path).with_overrides(toggles, seed)
    result = run(cfg)
    if out is not None:
        write_outputs(result, Path(out))
    return result

