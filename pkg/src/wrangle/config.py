"""JSON run configuration: target schema, sources, context, toggles, parameters."""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .ingest import CsvDialect
from .model import (
    ContextRelationship,
    ContextType,
    ModelError,
    PipelineConfig,
    TargetSchema,
    TargetTable,
    normalize_name,
)

STAGES = ("matching", "mapping", "transformation", "repair")


class ConfigError(ValueError):
    """The configuration document is malformed or inconsistent."""


@dataclass(frozen=True)
class StageToggle:
    matching: bool = True
    mapping: bool = True
    transformation: bool = True
    repair: bool = True

    def with_overrides(self, overrides: dict[str, bool]) -> "StageToggle":
        unknown = set(overrides) - set(STAGES)
        if unknown:
            raise ConfigError(f"unknown stage(s) {sorted(unknown)}; expected one of {list(STAGES)}")
        return dataclasses.replace(self, **overrides)

    def as_dict(self) -> dict[str, bool]:
        return dataclasses.asdict(self)


@dataclass(frozen=True)
class SourceSpec:
    name: str
    path: Path
    dialect: CsvDialect = CsvDialect()


@dataclass(frozen=True)
class ContextSpec:
    source: SourceSpec
    relationship: ContextRelationship


@dataclass(frozen=True)
class EvaluationSpec:
    ground_truth: Path
    keys: tuple[str, ...]
    table: str
    excluded_marker: str | None = None
    dialect: CsvDialect = CsvDialect()


@dataclass(frozen=True)
class RunConfig:
    path: Path
    target: TargetSchema
    sources: tuple[SourceSpec, ...]
    contexts: tuple[ContextSpec, ...] = ()
    toggles: StageToggle = StageToggle()
    params: PipelineConfig = PipelineConfig()
    evaluation: EvaluationSpec | None = None
    fds: tuple[tuple[str, tuple[str, ...], str], ...] = field(default=())

    def with_overrides(self, toggles: dict[str, bool] | None = None, seed: int | None = None) -> "RunConfig":
        cfg = self
        if toggles:
            cfg = dataclasses.replace(cfg, toggles=cfg.toggles.with_overrides(toggles))
        if seed is not None:
            cfg = dataclasses.replace(cfg, params=dataclasses.replace(cfg.params, seed=seed))
        return cfg


def _require(doc: dict, key: str, kind: type, where: str) -> Any:
    if key not in doc:
        raise ConfigError(f"{where}: missing required key {key!r}")
    value = doc[key]
    if not isinstance(value, kind):
        raise ConfigError(f"{where}.{key}: expected {kind.__name__}, got {type(value).__name__}")
    return value


def _dialect(doc: dict | None, where: str) -> CsvDialect:
    if doc is None:
        return CsvDialect()
    if not isinstance(doc, dict):
        raise ConfigError(f"{where}.dialect: expected object")
    allowed = {f.name for f in dataclasses.fields(CsvDialect)}
    unknown = set(doc) - allowed
    if unknown:
        raise ConfigError(f"{where}.dialect: unknown keys {sorted(unknown)}")
    try:
        return CsvDialect(**doc)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}.dialect: {exc}") from exc


def _source(doc: Any, base: Path, where: str) -> SourceSpec:
    if not isinstance(doc, dict):
        raise ConfigError(f"{where}: expected object")
    path = base / _require(doc, "path", str, where)
    name = doc.get("name", path.stem)
    if not isinstance(name, str) or not name:
        raise ConfigError(f"{where}.name: expected non-empty string")
    return SourceSpec(name, path, _dialect(doc.get("dialect"), where))


def _target(doc: Any) -> TargetSchema:
    if not isinstance(doc, dict):
        raise ConfigError("target: expected object")
    tables = []
    for i, t in enumerate(_require(doc, "tables", list, "target")):
        where = f"target.tables[{i}]"
        if not isinstance(t, dict):
            raise ConfigError(f"{where}: expected object")
        name = _require(t, "name", str, where)
        attrs = _require(t, "attributes", list, where)
        if not all(isinstance(a, str) for a in attrs):
            raise ConfigError(f"{where}.attributes: expected list of strings")
        tables.append(TargetTable(name, tuple(normalize_name(a) for a in attrs)))
    try:
        return TargetSchema(tuple(tables))
    except ModelError as exc:
        raise ConfigError(f"target: {exc}") from exc


def _params(doc: Any) -> PipelineConfig:
    if doc is None:
        return PipelineConfig()
    if not isinstance(doc, dict):
        raise ConfigError("params: expected object")
    allowed = {f.name for f in dataclasses.fields(PipelineConfig)}
    unknown = set(doc) - allowed
    if unknown:
        raise ConfigError(f"params: unknown keys {sorted(unknown)}")
    doc = dict(doc)
    if "null_tokens" in doc:
        doc["null_tokens"] = frozenset(doc["null_tokens"])
    try:
        return PipelineConfig(**doc)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"params: {exc}") from exc


def _toggles(doc: Any) -> StageToggle:
    if doc is None:
        return StageToggle()
    if not isinstance(doc, dict) or not all(isinstance(v, bool) for v in doc.values()):
        raise ConfigError("toggles: expected object of booleans")
    return StageToggle().with_overrides(doc)


def parse_config(doc: Any, base: Path, path: Path | None = None) -> RunConfig:
    if not isinstance(doc, dict):
        raise ConfigError("configuration root must be an object")
    known = {"target", "sources", "context", "toggles", "params", "evaluation", "fds"}
    unknown = set(doc) - known
    if unknown:
        raise ConfigError(f"unknown top-level keys {sorted(unknown)}")
    target = _target(_require(doc, "target", dict, "config"))
    sources = tuple(
        _source(s, base, f"sources[{i}]") for i, s in enumerate(_require(doc, "sources", list, "config"))
    )
    if not sources:
        raise ConfigError("sources: at least one source is required")
    contexts = []
    for i, c in enumerate(doc.get("context") or []):
        where = f"context[{i}]"
        spec = _source(c, base, where)
        try:
            ctype = ContextType(_require(c, "type", str, where))
        except ValueError:
            raise ConfigError(f"{where}.type: expected reference, master or example") from None
        table = c.get("target_table", target.tables[0].name)
        amap = _require(c, "attribute_map", dict, where)
        pairs = tuple((normalize_name(k), normalize_name(v)) for k, v in amap.items())
        contexts.append(ContextSpec(spec, ContextRelationship(spec.name, table, pairs, ctype)))
    names = [s.name for s in sources] + [c.source.name for c in contexts]
    dupes = sorted({n for n in names if names.count(n) > 1})
    if dupes:
        raise ConfigError(f"duplicate relation names {dupes}")
    evaluation = None
    if doc.get("evaluation") is not None:
        ev = doc["evaluation"]
        if not isinstance(ev, dict):
            raise ConfigError("evaluation: expected object")
        keys = _require(ev, "keys", list, "evaluation")
        table = ev.get("table", target.tables[0].name)
        try:
            target.table(table)
        except KeyError:
            raise ConfigError(f"evaluation.table: unknown target table {table!r}") from None
        marker = ev.get("excluded_marker")
        evaluation = EvaluationSpec(
            base / _require(ev, "ground_truth", str, "evaluation"),
            tuple(normalize_name(k) for k in keys),
            table,
            normalize_name(marker) if marker else None,
            _dialect(ev.get("dialect"), "evaluation"),
        )
    fds = []
    for i, fd in enumerate(doc.get("fds") or []):
        where = f"fds[{i}]"
        if not isinstance(fd, dict):
            raise ConfigError(f"{where}: expected object")
        table = fd.get("table", target.tables[0].name)
        lhs = tuple(normalize_name(a) for a in _require(fd, "lhs", list, where))
        rhs = normalize_name(_require(fd, "rhs", str, where))
        try:
            attrs = target.table(table).attributes
        except KeyError:
            raise ConfigError(f"{where}.table: unknown target table {table!r}") from None
        if not lhs or any(a not in attrs for a in (*lhs, rhs)) or rhs in lhs:
            raise ConfigError(f"{where}: lhs/rhs must be distinct attributes of {table}")
        fds.append((table, lhs, rhs))
    return RunConfig(
        path=path or base,
        target=target,
        sources=sources,
        contexts=tuple(contexts),
        toggles=_toggles(doc.get("toggles")),
        params=_params(doc.get("params")),
        evaluation=evaluation,
        fds=tuple(fds),
    )


def load_config(path: str | Path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror or exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    try:
        return parse_config(doc, path.parent, path)
    except ConfigError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
