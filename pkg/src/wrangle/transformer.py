"""Example harvesting, programming-by-example synthesis and rule application.

Programs concatenate at most ``MAX_ATOMS`` atoms. An atom is either a constant
string or a substring of the input delimited by two position specs. A position
spec names a boundary of a maximal character-class run: ``(cls, occ, edge)``
where ``occ`` counts runs of ``cls`` from the left (1, 2, ...) or the right
(-1, -2, ...) and ``edge`` picks the run's first character (``b``) or the
position just past its last one (``e``). The classes ``start`` and ``end``
denote the string boundaries.
"""

from __future__ import annotations

import random
from collections import defaultdict
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from .matcher import CorrespondenceSet
from .model import ContextRelationship, ContextType, Relation, Value, normalize_cell
from .profiler import FunctionalDependency
from .strings import ALPHA, DIGIT, PUNCT, SPACE, runs, shape

MAX_ATOMS = 4
DEFAULT_LIMIT = 50
CONSISTENCY = 0.8
MIN_UNVALIDATED = 3

CLASSES = ("start", "end", "ws", "punct", "alpha", "digit")
_RUN_CLASS = {"ws": SPACE, "punct": PUNCT, "alpha": ALPHA, "digit": DIGIT}


@dataclass(frozen=True, order=True)
class TransformExample:
    input: str
    output: str
    witness: tuple[str, str] = ("", "")

    def __post_init__(self):
        if self.input is None or self.output is None:
            raise ValueError("example input and output must be non-null")

    @property
    def is_identity(self) -> bool:
        return self.input == self.output


@dataclass(frozen=True)
class Pos:
    cls: str
    occ: int = 0
    edge: str = "b"

    def __post_init__(self):
        if self.cls not in CLASSES:
            raise ValueError(f"unknown token class {self.cls!r}")
        if self.cls in _RUN_CLASS and (self.occ == 0 or self.edge not in ("b", "e")):
            raise ValueError("run positions need a non-zero occurrence and edge b or e")

    def key(self) -> tuple:
        occ = (0, self.occ) if self.occ > 0 else (1, -self.occ)
        return (CLASSES.index(self.cls), occ, self.edge)

    def locate(self, s: str) -> int | None:
        if self.cls == "start":
            return 0
        if self.cls == "end":
            return len(s)
        found = [(a, b) for c, a, b in runs(s) if c == _RUN_CLASS[self.cls]]
        idx = self.occ - 1 if self.occ > 0 else self.occ
        if not -len(found) <= idx < len(found):
            return None
        a, b = found[idx]
        return a if self.edge == "b" else b

    def __str__(self) -> str:
        if self.cls in ("start", "end"):
            return self.cls
        return f"{self.cls}[{self.occ}].{'begin' if self.edge == 'b' else 'end'}"


@dataclass(frozen=True)
class Const:
    text: str

    def key(self) -> tuple:
        return (1, self.text)

    def run(self, s: str) -> str | None:
        return self.text

    def __str__(self) -> str:
        return repr(self.text)


@dataclass(frozen=True)
class Substring:
    start: Pos
    end: Pos

    def key(self) -> tuple:
        return (0, self.start.key(), self.end.key())

    def run(self, s: str) -> str | None:
        i, j = self.start.locate(s), self.end.locate(s)
        if i is None or j is None or i >= j:
            return None
        return s[i:j]

    def __str__(self) -> str:
        return f"sub({self.start}, {self.end})"


Atom = Const | Substring
Program = tuple[Atom, ...]


def run_program(program: Program, s: str) -> str | None:
    """Evaluate ``program`` on ``s``; ``None`` when a position cannot be located."""
    parts = []
    for atom in program:
        out = atom.run(s)
        if out is None:
            return None
        parts.append(out)
    return "".join(parts)


def program_key(program: Program) -> tuple:
    n_const = sum(isinstance(a, Const) for a in program)
    return (len(program), n_const, tuple(a.key() for a in program))


def format_program(program: Program) -> str:
    return " ++ ".join(str(a) for a in program)


IDENTITY: Program = (Substring(Pos("start"), Pos("end")),)


def is_identity_program(program: Program) -> bool:
    return program == IDENTITY


@dataclass(frozen=True)
class TransformRule:
    program: Program
    source_column: str
    target_attribute: str
    guard: str | None = None
    support: int = 0
    context: str = ""
    consistency: float = 1.0

    def apply(self, value: Value) -> Value:
        if value is None:
            return None
        if self.guard is not None and shape(value) != self.guard:
            return value
        out = run_program(self.program, value)
        return value if out is None else out

    def describe(self) -> str:
        guard = f" when shape = {self.guard!r}" if self.guard is not None else ""
        return f"{self.source_column} := {format_program(self.program)}{guard}"


# -- synthesis ---------------------------------------------------------------------

def position_specs(s: str, p: int) -> list[Pos]:
    """Every position spec that locates ``p`` in ``s``, in preference order."""
    out = []
    if p == 0:
        out.append(Pos("start"))
    if p == len(s):
        out.append(Pos("end"))
    by_class: dict[str, list[tuple[int, int]]] = defaultdict(list)
    for c, a, b in runs(s):
        by_class[c].append((a, b))
    for name in ("ws", "punct", "alpha", "digit"):
        found = by_class.get(_RUN_CLASS[name], [])
        n = len(found)
        for idx, (a, b) in enumerate(found):
            for edge, at in (("b", a), ("e", b)):
                if at == p:
                    out.append(Pos(name, idx + 1, edge))
                    out.append(Pos(name, idx - n, edge))
    return sorted(out, key=Pos.key)


def _segment_atoms(x: str, y: str) -> dict[int, list[tuple[Atom, int]]]:
    """Atoms producing ``y[i:j]`` from ``x``, grouped by ``i``, each with its ``j``."""
    specs = {p: position_specs(x, p) for p in range(len(x) + 1)}
    out: dict[int, list[tuple[Atom, int]]] = {}
    for i in range(len(y)):
        atoms: list[tuple[Atom, int]] = []
        for j in range(i + 1, len(y) + 1):
            piece = y[i:j]
            atoms.append((Const(piece), j))
            start = x.find(piece)
            while start >= 0:
                for p1 in specs[start]:
                    for p2 in specs[start + len(piece)]:
                        atoms.append((Substring(p1, p2), j))
                start = x.find(piece, start + 1)
        # duplicates arise when one piece occurs at a position twice over
        seen = set()
        uniq = []
        for a, j in atoms:
            if (a, j) not in seen:
                seen.add((a, j))
                uniq.append((a, j))
        out[i] = sorted(uniq, key=lambda aj: aj[0].key())
    return out


def synthesize(
    examples: Iterable[TransformExample], limit: int = DEFAULT_LIMIT, max_atoms: int = MAX_ATOMS
) -> list[Program]:
    """Programs consistent with every example, best first, at most ``limit`` of them.

    Ranking is (number of atoms, number of constants, atom-wise structural order).
    Adjacent constants are never emitted; they would merge into one.
    """
    exs = sorted(set(examples))
    if not exs:
        return []
    inputs: dict[str, str] = {}
    for e in exs:
        if inputs.setdefault(e.input, e.output) != e.output:
            return []
    if any(e.output == "" for e in exs):
        return []
    first, rest = exs[0], exs[1:]
    atoms_at = _segment_atoms(first.input, first.output)
    goal = tuple(len(e.output) for e in exs)
    cache: dict[tuple[Atom, int], str | None] = {}

    def out_on(atom: Atom, k: int) -> str | None:
        key = (atom, k)
        if key not in cache:
            cache[key] = atom.run(rest[k].input)
        return cache[key]

    def successors(state: tuple[int, ...]) -> list[tuple[Atom, tuple[int, ...]]]:
        succ = []
        for atom, j in atoms_at.get(state[0], ()):
            nxt = [j]
            for k, e in enumerate(rest):
                o = out_on(atom, k)
                pos = state[k + 1]
                if o is None or not o or not e.output.startswith(o, pos):
                    break
                nxt.append(pos + len(o))
            else:
                succ.append((atom, tuple(nxt)))
        return succ

    succ_memo: dict[tuple[int, ...], list] = {}

    def edges(state):
        if state not in succ_memo:
            succ_memo[state] = successors(state)
        return succ_memo[state]

    feasible_memo: dict[tuple, bool] = {}

    def feasible(state, atoms_left, consts_left, prev_const) -> bool:
        if atoms_left == 0:
            return state == goal and consts_left == 0
        key = (state, atoms_left, consts_left, prev_const)
        if key not in feasible_memo:
            ok = False
            for atom, nxt in edges(state):
                is_c = isinstance(atom, Const)
                if is_c and (prev_const or consts_left == 0):
                    continue
                if feasible(nxt, atoms_left - 1, consts_left - is_c, is_c):
                    ok = True
                    break
            feasible_memo[key] = ok
        return feasible_memo[key]

    results: list[Program] = []

    def walk(state, atoms_left, consts_left, prev_const, prefix):
        if len(results) >= limit:
            return
        if atoms_left == 0:
            results.append(tuple(prefix))
            return
        for atom, nxt in edges(state):
            is_c = isinstance(atom, Const)
            if is_c and (prev_const or consts_left == 0):
                continue
            if not feasible(nxt, atoms_left - 1, consts_left - is_c, is_c):
                continue
            prefix.append(atom)
            walk(nxt, atoms_left - 1, consts_left - is_c, is_c, prefix)
            prefix.pop()
            if len(results) >= limit:
                return

    start = tuple(0 for _ in exs)
    for n_atoms in range(1, max_atoms + 1):
        for n_consts in range(0, (n_atoms + 1) // 2 + 1):
            if feasible(start, n_atoms, n_consts, False):
                walk(start, n_atoms, n_consts, False, [])
            if len(results) >= limit:
                return results
    return results


def validate_kfold(
    examples: Iterable[TransformExample], k: int = 3, seed: int = 0
) -> tuple[Program | None, float]:
    """Cross-validated selection of the top-ranked program.

    Returns (program or None, consistency). With fewer examples than folds the
    validation is skipped: the top program is accepted when at least
    ``MIN_UNVALIDATED`` examples support it, and the consistency reported is 1.0
    for an accepted rule and 0.0 otherwise.
    """
    if k < 2:
        raise ValueError("k must be at least 2")
    exs = sorted(set(examples))
    full = synthesize(exs, limit=1)
    if len(exs) < k:
        if len(exs) >= MIN_UNVALIDATED and full:
            return full[0], 1.0
        return None, 0.0
    order = list(exs)
    random.Random(seed).shuffle(order)
    folds = [order[i::k] for i in range(k)]
    scores = []
    for i, held in enumerate(folds):
        train = [e for j, f in enumerate(folds) if j != i for e in f]
        progs = synthesize(train, limit=1)
        if not progs:
            scores.append(0.0)
            continue
        ok = sum(run_program(progs[0], e.input) == e.output for e in held)
        scores.append(ok / len(held))
    consistency = sum(scores) / k
    if full and consistency >= CONSISTENCY:
        return full[0], consistency
    return None, consistency


# -- example harvesting ---------------------------------------------------------

def _norm(v: Value) -> Value:
    v = normalize_cell(v)
    return v.casefold() if v is not None else None


def generate_examples(
    source: Relation,
    context: Relation,
    rel: ContextRelationship,
    matches: CorrespondenceSet,
    fds_s: Iterable[FunctionalDependency],
    fds_d: Iterable[FunctionalDependency],
    lb: float = 0.5,
) -> dict[tuple[str, str], set[TransformExample]]:
    """Align source and context tuples on FD determinants and pair up dependents.

    Keys of the result are (source column, target attribute).
    """
    matched: dict[str, set[str]] = defaultdict(set)
    for c in matches.values():
        if c.source.relation == source.name and c.target.table == rel.target_table and c.score > lb:
            matched[c.source.attribute].add(c.target.attribute)
    single_s = [fd for fd in fds_s if fd.relation == source.name and len(fd.lhs) == 1]
    single_d = [fd for fd in fds_d if fd.relation == context.name and len(fd.lhs) == 1]
    out: dict[tuple[str, str], set[TransformExample]] = defaultdict(set)
    for fd1 in sorted(single_s):
        s_i, s_n = fd1.lhs[0], fd1.rhs
        for fd2 in sorted(single_d):
            d_j, d_m = fd2.lhs[0], fd2.rhs
            t_j, t_m = rel.target_of(d_j), rel.target_of(d_m)
            if t_j is None or t_m is None:
                continue
            if t_j.attribute not in matched[s_i] or t_m.attribute not in matched[s_n]:
                continue
            ctx_by_det: dict[str, list[tuple[str, str]]] = defaultdict(list)
            ji, mi = context.index(d_j), context.index(d_m)
            for row in context:
                key = _norm(row[ji])
                if key is not None and row[mi] is not None:
                    ctx_by_det[key].append((row[ji], row[mi]))
            si, ni = source.index(s_i), source.index(s_n)
            for row in source:
                key = _norm(row[si])
                if key is None or row[ni] is None:
                    continue
                for det, dep in ctx_by_det.get(key, ()):
                    out[(s_n, t_m.attribute)].add(TransformExample(row[ni], dep, (row[si], det)))
    return dict(out)


def cluster_examples(examples: Iterable[TransformExample]) -> dict[tuple[str, str], list[TransformExample]]:
    """Group by (input shape, output shape); one example per distinct input/output pair."""
    groups: dict[tuple[str, str], list[TransformExample]] = defaultdict(list)
    seen = set()
    for e in sorted(set(examples)):
        if (e.input, e.output) in seen:
            continue
        seen.add((e.input, e.output))
        groups[(shape(e.input), shape(e.output))].append(e)
    return dict(sorted(groups.items()))


def rules_for_column(
    column: str,
    target_attribute: str,
    examples: Iterable[TransformExample],
    k: int = 3,
    seed: int = 0,
    context: str = "",
) -> list[TransformRule]:
    """One guarded rule per input-shape cluster that passes validation."""
    rules = []
    for (in_shape, _), group in cluster_examples(examples).items():
        if all(e.is_identity for e in group):
            continue
        program, consistency = validate_kfold(group, k, seed)
        if program is None or is_identity_program(program):
            continue
        rules.append(
            TransformRule(program, column, target_attribute, in_shape, len(group), context, consistency)
        )
    return rules


def select_rules(
    candidates: Iterable[tuple[ContextType, TransformRule]]
) -> list[TransformRule]:
    """Keep one rule per (column, guard): larger support first, then context priority."""
    best: dict[tuple[str, str | None], tuple[ContextType, TransformRule]] = {}
    for ctype, rule in candidates:
        key = (rule.source_column, rule.guard)
        cur = best.get(key)
        if cur is None or (-rule.support, ctype.priority) < (-cur[1].support, cur[0].priority):
            best[key] = (ctype, rule)
    return [best[k][1] for k in sorted(best, key=lambda k: (k[0], k[1] or ""))]


def apply_transforms(source: Relation, selected: Sequence[TransformRule]) -> Relation:
    by_col: dict[str, list[TransformRule]] = defaultdict(list)
    for r in selected:
        by_col[r.source_column].append(r)
    if not by_col:
        return source
    idx = {c: source.index(c) for c in by_col}
    rows = []
    for row in source:
        row = list(row)
        for col, rules in by_col.items():
            v = row[idx[col]]
            for r in rules:
                if v is not None and (r.guard is None or shape(v) == r.guard):
                    row[idx[col]] = r.apply(v)
                    break
        rows.append(tuple(row))
    return source.with_tuples(rows)


def identity_matches(rel: Relation, table: str) -> CorrespondenceSet:
    """Each attribute of a target-shaped relation corresponds to itself."""
    from .matcher import Correspondence
    from .model import AttributeRef, TargetAttr

    return CorrespondenceSet(
        Correspondence(AttributeRef(rel.name, a), TargetAttr(table, a), 1.0, {"identity"})
        for a in rel.attributes
    )


def learn_rules(
    instance: Relation,
    table: str,
    contexts: Sequence[tuple[Relation, ContextRelationship]],
    fds_instance: Iterable[FunctionalDependency],
    fds_context: Mapping[str, Iterable[FunctionalDependency]],
    k: int = 3,
    seed: int = 0,
) -> tuple[list[TransformRule], dict[str, int]]:
    """Harvest examples against every context and pick rules for ``instance``.

    Returns the selected rules and the number of harvested examples per column.
    """
    matches = identity_matches(instance, table)
    fds_instance = list(fds_instance)
    candidates = []
    harvested: dict[str, int] = defaultdict(int)
    for ctx, rel in contexts:
        if rel.target_table != table:
            continue
        pairs = generate_examples(instance, ctx, rel, matches, fds_instance, fds_context.get(ctx.name, ()))
        for (col, t_attr), exs in sorted(pairs.items()):
            if col != t_attr:
                continue
            harvested[col] += len(exs)
            for rule in rules_for_column(col, t_attr, exs, k, seed, ctx.name):
                candidates.append((rel.ctype, rule))
    return select_rules(candidates), dict(sorted(harvested.items()))
