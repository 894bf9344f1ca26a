"""Bounded temporal queries over finite traces of proposition sets.

Each predicted world state is abstracted into a set of named propositions
drawn from a fixed ten-atom alphabet; catalogs of weighted, severity-rated
formulas are evaluated against the predicted trace and combined into a
criticality report.

Semantics (finite trace, n = len(trace) - 1, bounds truncate at n):

    X f        strong next: false at the trace boundary
    F[<=k] f   exists j in [i, min(i+k, n)] with f at j
    G[<=k] f   for all j in [i, min(i+k, n)] f at j   (truncation-optimistic)
    f U[<=k] g exists j in [i, min(i+k, n)] with g at j and f on [i, j)

Concrete syntax, tightest first: unary (!, X, F[<=k], G[<=k]), then
U[<=k] (non-chaining), then &, then |.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from importlib import resources
from typing import Iterable, Sequence, Union

import numpy as np

from ._kernel import ATOM_BIT, ATOM_ORDER, impl
from .road import Road
from .world import SimParams, WorldState

ALPHABET: tuple[str, ...] = ATOM_ORDER

PropositionSet = frozenset[str]


# --- AST ---------------------------------------------------------------

@dataclass(frozen=True)
class Atom:
    name: str


@dataclass(frozen=True)
class Const:
    value: bool


@dataclass(frozen=True)
class Not:
    child: "Formula"


@dataclass(frozen=True)
class And:
    left: "Formula"
    right: "Formula"


@dataclass(frozen=True)
class Or:
    left: "Formula"
    right: "Formula"


@dataclass(frozen=True)
class Next:
    child: "Formula"


@dataclass(frozen=True)
class Finally:
    bound: int
    child: "Formula"


@dataclass(frozen=True)
class Globally:
    bound: int
    child: "Formula"


@dataclass(frozen=True)
class Until:
    bound: int
    left: "Formula"
    right: "Formula"


Formula = Union[Atom, Const, Not, And, Or, Next, Finally, Globally, Until]


class QuerySyntaxError(Exception):
    def __init__(self, message: str, position: int):
        super().__init__(f"{message} at position {position}")
        self.position = position


class NonChainingUntil(QuerySyntaxError):
    def __init__(self, position: int):
        super().__init__("U[<=k] does not chain; parenthesize", position)


class UnknownAtom(Exception):
    def __init__(self, name: str, context: str = ""):
        where = f" in {context}" if context else ""
        super().__init__(f"unknown atom {name!r}{where}")
        self.name = name


# --- Parser ------------------------------------------------------------

_SYMBOLS = {"!", "&", "|", "(", ")", "[", "]"}


def _lex(text: str) -> list[tuple[str, str, int]]:
    """Tokens as (kind, value, position); kinds: ident, int, sym, le, eof."""
    toks = []
    i, n = 0, len(text)
    while i < n:
        c = text[i]
        if c.isspace():
            i += 1
            continue
        if c.isalpha():
            j = i + 1
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            toks.append(("ident", text[i:j], i))
            i = j
        elif c.isdigit():
            j = i + 1
            while j < n and text[j].isdigit():
                j += 1
            toks.append(("int", text[i:j], i))
            i = j
        elif text.startswith("<=", i):
            toks.append(("le", "<=", i))
            i += 2
        elif c in _SYMBOLS:
            toks.append(("sym", c, i))
            i += 1
        else:
            raise QuerySyntaxError(f"unexpected character {c!r}", i)
    toks.append(("eof", "", n))
    return toks


class _Parser:
    def __init__(self, toks: list[tuple[str, str, int]]):
        self.toks = toks
        self.i = 0

    @property
    def tok(self) -> tuple[str, str, int]:
        return self.toks[self.i]

    def advance(self) -> tuple[str, str, int]:
        t = self.toks[self.i]
        self.i += 1
        return t

    def match_sym(self, sym: str) -> bool:
        kind, value, _ = self.tok
        if kind == "sym" and value == sym:
            self.i += 1
            return True
        return False

    def expect(self, kind: str, value: str | None = None) -> tuple[str, str, int]:
        k, v, pos = self.tok
        if k != kind or (value is not None and v != value):
            want = value if value is not None else kind
            raise QuerySyntaxError(f"expected {want!r}, found {v or k!r}", pos)
        return self.advance()

    def peek_is_bound(self) -> bool:
        k, v, _ = self.tok
        return k == "sym" and v == "["

    def parse_bound(self) -> int:
        self.expect("sym", "[")
        self.expect("le")
        _, digits, _ = self.expect("int")
        self.expect("sym", "]")
        return int(digits)

    def parse_or(self) -> Formula:
        node = self.parse_and()
        while self.match_sym("|"):
            node = Or(node, self.parse_and())
        return node

    def parse_and(self) -> Formula:
        node = self.parse_until()
        while self.match_sym("&"):
            node = And(node, self.parse_until())
        return node

    def parse_until(self) -> Formula:
        node = self.parse_unary()
        kind, value, pos = self.tok
        if kind == "ident" and value == "U":
            self.advance()
            bound = self.parse_bound()
            node = Until(bound, node, self.parse_unary())
            kind, value, pos = self.tok
            if kind == "ident" and value == "U":
                raise NonChainingUntil(pos)
        return node

    def parse_unary(self) -> Formula:
        kind, value, pos = self.tok
        if kind == "sym" and value == "!":
            self.advance()
            return Not(self.parse_unary())
        if kind == "ident":
            if value == "X":
                self.advance()
                return Next(self.parse_unary())
            if value in ("F", "G"):
                # Only an operator when a bound follows; a bare F/G is an atom.
                nk, nv, _ = self.toks[self.i + 1]
                if nk == "sym" and nv == "[":
                    self.advance()
                    bound = self.parse_bound()
                    child = self.parse_unary()
                    return Finally(bound, child) if value == "F" else Globally(bound, child)
            if value == "true":
                self.advance()
                return Const(True)
            if value == "false":
                self.advance()
                return Const(False)
            self.advance()
            return Atom(value)
        if kind == "sym" and value == "(":
            self.advance()
            node = self.parse_or()
            self.expect("sym", ")")
            return node
        raise QuerySyntaxError(f"expected formula, found {value or kind!r}", pos)


def parse_query(text: str) -> Formula:
    parser = _Parser(_lex(text))
    node = parser.parse_or()
    kind, value, pos = parser.tok
    if kind != "eof":
        raise QuerySyntaxError(f"trailing input {value!r}", pos)
    return node


# --- Pretty printer ----------------------------------------------------

_LEVEL_OR, _LEVEL_AND, _LEVEL_UNTIL, _LEVEL_UNARY = 1, 2, 3, 4


def _level(node: Formula) -> int:
    if isinstance(node, Or):
        return _LEVEL_OR
    if isinstance(node, And):
        return _LEVEL_AND
    if isinstance(node, Until):
        return _LEVEL_UNTIL
    return 5 if isinstance(node, (Atom, Const)) else _LEVEL_UNARY


def format_query(node: Formula, min_level: int = 0) -> str:
    """Render with minimal parentheses; reparses to a structurally equal AST."""
    if _level(node) < min_level:
        return f"({format_query(node)})"
    if isinstance(node, Atom):
        return node.name
    if isinstance(node, Const):
        return "true" if node.value else "false"
    if isinstance(node, Not):
        return f"!{format_query(node.child, _LEVEL_UNARY)}"
    if isinstance(node, Next):
        return f"X {format_query(node.child, _LEVEL_UNARY)}"
    if isinstance(node, Finally):
        return f"F[<={node.bound}] {format_query(node.child, _LEVEL_UNARY)}"
    if isinstance(node, Globally):
        return f"G[<={node.bound}] {format_query(node.child, _LEVEL_UNARY)}"
    if isinstance(node, Until):
        left = format_query(node.left, _LEVEL_UNARY)
        right = format_query(node.right, _LEVEL_UNARY)
        return f"{left} U[<={node.bound}] {right}"
    if isinstance(node, And):
        return f"{format_query(node.left, _LEVEL_AND)} & {format_query(node.right, _LEVEL_UNTIL)}"
    if isinstance(node, Or):
        return f"{format_query(node.left, _LEVEL_OR)} | {format_query(node.right, _LEVEL_AND)}"
    raise TypeError(f"not a formula: {node!r}")


# --- Compilation and evaluation ----------------------------------------

_OPC = {
    "false": 0, "true": 1, "atom": 2, "not": 3, "and": 4,
    "or": 5, "next": 6, "finally": 7, "globally": 8, "until": 9,
}


@dataclass(frozen=True)
class Program:
    op: np.ndarray
    arg: np.ndarray
    left: np.ndarray
    right: np.ndarray
    root: int


def formula_atoms(node: Formula) -> frozenset[str]:
    if isinstance(node, Atom):
        return frozenset((node.name,))
    if isinstance(node, Const):
        return frozenset()
    if isinstance(node, (Not, Next, Finally, Globally)):
        return formula_atoms(node.child)
    return formula_atoms(node.left) | formula_atoms(node.right)


def compile_formula(node: Formula, atom_bit: dict[str, int]) -> Program:
    op: list[int] = []
    arg: list[int] = []
    left: list[int] = []
    right: list[int] = []

    def walk(f: Formula) -> int:
        if isinstance(f, Const):
            return emit(_OPC["true"] if f.value else _OPC["false"], 0, -1, -1)
        if isinstance(f, Atom):
            return emit(_OPC["atom"], atom_bit[f.name], -1, -1)
        if isinstance(f, Not):
            return emit(_OPC["not"], 0, walk(f.child), -1)
        if isinstance(f, Next):
            return emit(_OPC["next"], 0, walk(f.child), -1)
        if isinstance(f, Finally):
            return emit(_OPC["finally"], f.bound, walk(f.child), -1)
        if isinstance(f, Globally):
            return emit(_OPC["globally"], f.bound, walk(f.child), -1)
        if isinstance(f, And):
            return emit(_OPC["and"], 0, walk(f.left), walk(f.right))
        if isinstance(f, Or):
            return emit(_OPC["or"], 0, walk(f.left), walk(f.right))
        if isinstance(f, Until):
            return emit(_OPC["until"], f.bound, walk(f.left), walk(f.right))
        raise TypeError(f"not a formula: {f!r}")

    def emit(o: int, a: int, l: int, r: int) -> int:
        op.append(o)
        arg.append(a)
        left.append(l)
        right.append(r)
        return len(op) - 1

    root = walk(node)
    return Program(
        op=np.asarray(op, dtype=np.int64),
        arg=np.asarray(arg, dtype=np.int64),
        left=np.asarray(left, dtype=np.int64),
        right=np.asarray(right, dtype=np.int64),
        root=root,
    )


def trace_to_bits(trace: Sequence[Iterable[str]], atom_bit: dict[str, int]) -> np.ndarray:
    out = np.zeros(len(trace), dtype=np.int64)
    for i, atoms in enumerate(trace):
        mask = 0
        for a in atoms:
            bit = atom_bit.get(a)
            if bit is not None:
                mask |= 1 << bit
        out[i] = mask
    return out


def evaluate(formula: Formula, trace: Sequence[Iterable[str]], i: int = 0) -> bool:
    """Evaluate at index i. Atoms need not come from the fixed alphabet."""
    if not 0 <= i < len(trace):
        raise IndexError(f"index {i} outside trace of length {len(trace)}")
    names = sorted(formula_atoms(formula))
    atom_bit = {name: b for b, name in enumerate(names)}
    prog = compile_formula(formula, atom_bit)
    bits = trace_to_bits(trace, atom_bit)
    return bool(impl.eval_kernel(prog.op, prog.arg, prog.left, prog.right,
                                 prog.root, bits, i))


# --- State abstraction -------------------------------------------------

def abstract(state: WorldState, road: Road, params: SimParams) -> PropositionSet:
    """Proposition set describing `state` on `road` (fixed concept definitions)."""
    bits = impl.abstract_kernel(
        road.pack, state.position, state.lane, state.speed, state.sensor_health,
        params.dt, params.a_max, params.high_speed_threshold,
        params.obstacle_horizon)
    return bits_to_atoms(bits)


def bits_to_atoms(bits: int) -> PropositionSet:
    return frozenset(name for name, b in ATOM_BIT.items() if bits >> b & 1)


def atoms_to_bits(atoms: Iterable[str]) -> int:
    mask = 0
    for a in atoms:
        mask |= 1 << ATOM_BIT[a]
    return mask


# --- Catalogs ----------------------------------------------------------

class CatalogError(Exception):
    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


@dataclass(frozen=True)
class CatalogEntry:
    name: str
    severity: int
    weight: float
    formula: Formula


@dataclass(frozen=True)
class QueryCatalog:
    entries: tuple[CatalogEntry, ...]

    def __post_init__(self) -> None:
        names = [e.name for e in self.entries]
        if len(names) != len(set(names)):
            raise ValueError("catalog entry names must be unique")
        for e in self.entries:
            if not 1 <= e.severity <= 5:
                raise ValueError(f"{e.name}: severity must be in 1..5")
            if e.weight <= 0:
                raise ValueError(f"{e.name}: weight must be positive")
            for atom in formula_atoms(e.formula):
                if atom not in ATOM_BIT:
                    raise UnknownAtom(atom, f"catalog entry {e.name!r}")


def parse_catalog(text: str) -> QueryCatalog:
    """One entry per line: `NAME : SEVERITY : WEIGHT : FORMULA`; `#` comments."""
    entries = []
    seen: set[str] = set()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split(":", 3)
        if len(parts) != 4:
            raise CatalogError("expected NAME : SEVERITY : WEIGHT : FORMULA", lineno)
        name = parts[0].strip()
        if not name:
            raise CatalogError("empty entry name", lineno)
        if name in seen:
            raise CatalogError(f"duplicate entry name {name!r}", lineno)
        seen.add(name)
        try:
            severity = int(parts[1].strip())
        except ValueError:
            raise CatalogError(f"severity {parts[1].strip()!r} is not an integer", lineno)
        try:
            weight = float(parts[2].strip())
        except ValueError:
            raise CatalogError(f"weight {parts[2].strip()!r} is not a number", lineno)
        try:
            formula = parse_query(parts[3])
        except QuerySyntaxError as exc:
            raise CatalogError(f"bad formula: {exc}", lineno) from exc
        entries.append(CatalogEntry(name, severity, weight, formula))
    try:
        return QueryCatalog(tuple(entries))
    except (ValueError, UnknownAtom) as exc:
        raise CatalogError(str(exc), 0) from exc


def default_catalog() -> QueryCatalog:
    text = resources.files("handover.data").joinpath("default.catalog").read_text("utf-8")
    return parse_catalog(text)


# --- Scoring -----------------------------------------------------------

class Level(enum.Enum):
    LOW = "LOW"
    ELEVATED = "ELEVATED"
    CRITICAL = "CRITICAL"


@dataclass(frozen=True)
class QueryMatch:
    name: str
    severity: int
    weight: float
    matched: bool
    step: int | None   # earliest witness step, for matched entries


@dataclass(frozen=True)
class CriticalityReport:
    results: tuple[QueryMatch, ...]
    score: float
    level: Level
    time_to_critical: float | None

    @property
    def matched(self) -> tuple[QueryMatch, ...]:
        return tuple(r for r in self.results if r.matched)


DEFAULT_THRESHOLDS = (2.0, 5.0)


def score_trace(trace: Sequence[Iterable[str]], catalog: QueryCatalog,
                thresholds: tuple[float, float] = DEFAULT_THRESHOLDS,
                dt: float = 1.0) -> CriticalityReport:
    """Evaluate every catalog entry anchored at step 0 and combine.

    score = sum of severity*weight over matched entries; LOW below theta1,
    ELEVATED in [theta1, theta2), CRITICAL at or above theta2.
    """
    if len(trace) == 0:
        raise ValueError("trace must be non-empty")
    theta1, theta2 = thresholds
    if theta1 > theta2:
        raise ValueError("thresholds must satisfy theta1 <= theta2")
    for entry in catalog.entries:
        for atom in formula_atoms(entry.formula):
            if atom not in ATOM_BIT:
                raise UnknownAtom(atom, f"catalog entry {entry.name!r}")
    bits = trace_to_bits(trace, ATOM_BIT)
    results = []
    score = 0.0
    earliest: int | None = None
    for entry in catalog.entries:
        prog = compile_formula(entry.formula, ATOM_BIT)
        step = int(impl.earliest_kernel(prog.op, prog.arg, prog.left,
                                        prog.right, prog.root, bits))
        matched = step >= 0
        results.append(QueryMatch(entry.name, entry.severity, entry.weight,
                                  matched, step if matched else None))
        if matched:
            score += entry.severity * entry.weight
            if earliest is None or step < earliest:
                earliest = step
    if score >= theta2:
        level = Level.CRITICAL
    elif score >= theta1:
        level = Level.ELEVATED
    else:
        level = Level.LOW
    ttc = earliest * dt if (level is not Level.LOW and earliest is not None) else None
    return CriticalityReport(tuple(results), score, level, ttc)
