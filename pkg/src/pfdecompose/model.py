"""In-memory problem-frames model and its structural checks.

All types are frozen dataclasses built from tuples, frozensets and plain
dicts. Nothing in the package mutates a model after construction.

Diagram pairs (for correlations, hints and similarity overrides) are
unordered and keyed by ``frozenset({a, b})``; use :func:`pair` to build one.
"""

from __future__ import annotations

import enum
import re
from collections import Counter
from dataclasses import dataclass, field
from itertools import combinations
from typing import Iterable, Mapping

IDENT_RE = re.compile(r"[A-Za-z][A-Za-z0-9_]*\Z")

Pair = frozenset


def pair(a: str, b: str) -> frozenset:
    """Unordered key for two diagram ids."""
    return frozenset((a, b))


def ordered(key: frozenset, order: Mapping[str, int]) -> tuple[str, ...]:
    """Members of a pair key sorted by position in ``order`` (unknown ids last, by name)."""
    return tuple(sorted(key, key=lambda x: (order.get(x, len(order)), x)))


class DomainKind(enum.Enum):
    MACHINE = "machine"
    BIDDABLE = "biddable"
    CAUSAL = "causal"
    LEXICAL = "lexical"

    @property
    def letter(self) -> str | None:
        return _KIND_LETTERS.get(self)

    @classmethod
    def from_letter(cls, letter: str) -> "DomainKind":
        for kind, value in _KIND_LETTERS.items():
            if value == letter:
                return kind
        raise ValueError(f"unknown domain kind letter {letter!r}")


_KIND_LETTERS = {
    DomainKind.BIDDABLE: "B",
    DomainKind.CAUSAL: "C",
    DomainKind.LEXICAL: "X",
}


class CorrelationLevel(enum.Enum):
    HIGH = "high"
    LOW = "low"
    NONE = "none"


class Severity(enum.Enum):
    ERROR = "error"
    WARNING = "warning"


@dataclass(frozen=True)
class DomainNode:
    id: str
    name: str
    kind: DomainKind
    facilities: frozenset = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "facilities", frozenset(self.facilities))


@dataclass(frozen=True)
class Requirement:
    id: str
    text: str
    constrains: frozenset = frozenset()
    refers: frozenset = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "constrains", frozenset(self.constrains))
        object.__setattr__(self, "refers", frozenset(self.refers))


@dataclass(frozen=True)
class Interface:
    endpoints: frozenset
    phenomena: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "endpoints", frozenset(self.endpoints))
        object.__setattr__(self, "phenomena", tuple(self.phenomena))


@dataclass(frozen=True)
class ProblemDiagram:
    id: str
    title: str
    machine: DomainNode
    domains: tuple[DomainNode, ...] = ()
    requirements: tuple[Requirement, ...] = ()
    interfaces: tuple[Interface, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "domains", tuple(self.domains))
        object.__setattr__(self, "requirements", tuple(self.requirements))
        object.__setattr__(self, "interfaces", tuple(self.interfaces))

    def domain(self, domain_id: str) -> DomainNode | None:
        if self.machine.id == domain_id:
            return self.machine
        for d in self.domains:
            if d.id == domain_id:
                return d
        return None

    def domain_ids(self) -> tuple[str, ...]:
        return tuple(d.id for d in self.domains)


@dataclass(frozen=True)
class CorrelationMatrix:
    """Analyst correlation judgments. Unstated pairs read as ``NONE``.

    Explicit ``NONE`` entries are dropped on construction so two matrices
    that answer every lookup identically also compare equal.
    """

    entries: dict = field(default_factory=dict)

    def __post_init__(self):
        cleaned = {}
        for key, level in dict(self.entries).items():
            level = CorrelationLevel(level)
            if level is not CorrelationLevel.NONE:
                cleaned[frozenset(key)] = level
        object.__setattr__(self, "entries", cleaned)

    def level(self, a: str, b: str) -> CorrelationLevel:
        return self.entries.get(pair(a, b), CorrelationLevel.NONE)

    def __len__(self):
        return len(self.entries)


@dataclass(frozen=True)
class MergeHint:
    pair: frozenset
    accepted: bool
    note: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "pair", frozenset(self.pair))


@dataclass(frozen=True)
class SimilarityOverride:
    pairwise: dict
    global_count: int

    def __post_init__(self):
        object.__setattr__(
            self, "pairwise", {frozenset(k): v for k, v in dict(self.pairwise).items()}
        )

    def count(self, a: str, b: str) -> int:
        return self.pairwise[pair(a, b)]


@dataclass(frozen=True)
class Model:
    name: str = ""
    facilities: dict = field(default_factory=dict)
    diagrams: tuple[ProblemDiagram, ...] = ()
    correlations: CorrelationMatrix = field(default_factory=CorrelationMatrix)
    hints: tuple[MergeHint, ...] = ()
    similarity_override: SimilarityOverride | None = None

    def __post_init__(self):
        facilities = self.facilities
        if not isinstance(facilities, Mapping):
            facilities = {f: "" for f in facilities}
        object.__setattr__(self, "facilities", dict(facilities))
        object.__setattr__(self, "diagrams", tuple(self.diagrams))
        object.__setattr__(self, "hints", tuple(self.hints))
        if not isinstance(self.correlations, CorrelationMatrix):
            object.__setattr__(self, "correlations", CorrelationMatrix(self.correlations))

    @property
    def diagram_ids(self) -> tuple[str, ...]:
        return tuple(d.id for d in self.diagrams)

    def diagram(self, diagram_id: str) -> ProblemDiagram:
        for d in self.diagrams:
            if d.id == diagram_id:
                return d
        raise KeyError(diagram_id)

    def order(self) -> dict[str, int]:
        """Position of each diagram id; the first occurrence wins."""
        index = {}
        for i, d in enumerate(self.diagrams):
            index.setdefault(d.id, i)
        return index


def facility_set(diagram: ProblemDiagram) -> frozenset:
    """Union of facilities over all domains of ``diagram``, machine included."""
    result = set(diagram.machine.facilities)
    for d in diagram.domains:
        result |= d.facilities
    return frozenset(result)


@dataclass(frozen=True)
class Diagnostic:
    severity: Severity
    subject: str
    message: str
    diagram: str | None = None
    # Location hint for tools that map diagnostics back to source text:
    # ("diagram" | "domain" | "requirement" | "interface" | "facility" |
    #  "correlation" | "hint" | "similarity" | "model", key).
    where: tuple = ()

    def __str__(self):
        return f"{self.severity.value}: {self.message}"


def validate(model: Model) -> list[Diagnostic]:
    """Check every structural invariant of ``model``.

    Violations are returned, never raised. The list is empty iff the model
    is well formed; warnings alone do not make it invalid.
    """
    diags: list[Diagnostic] = []

    def report(sev, subject, message, diagram=None, where=()):
        diags.append(Diagnostic(sev, subject, message, diagram, where))

    E, W = Severity.ERROR, Severity.WARNING

    for did, n in Counter(model.diagram_ids).items():
        if n > 1:
            report(E, did, f"duplicate diagram id {did!r}", did, ("diagram", did))

    for fid in model.facilities:
        if not IDENT_RE.match(fid):
            report(E, fid, f"invalid facility id {fid!r}", None, ("facility", fid))

    req_owner: dict[str, str] = {}
    seen_kinds: dict[str, tuple[DomainKind, str]] = {}
    for diagram in model.diagrams:
        diags.extend(_validate_diagram(diagram, model.facilities))
        for r in diagram.requirements:
            first = req_owner.setdefault(r.id, diagram.id)
            if first != diagram.id:
                report(E, r.id,
                       f"requirement id {r.id!r} already used in diagram {first!r}",
                       diagram.id, ("requirement", diagram.id, r.id))
        for d in diagram.domains:
            prev = seen_kinds.setdefault(d.id, (d.kind, diagram.id))
            if prev[0] is not d.kind and d.kind is not DomainKind.MACHINE:
                report(W, d.id,
                       f"domain {d.id!r} is {d.kind.value} here but "
                       f"{prev[0].value} in diagram {prev[1]!r}",
                       diagram.id, ("domain", diagram.id, d.id))

    known = set(model.diagram_ids)

    def check_pair(key, what, where):
        ids = sorted(key)
        if len(ids) != 2:
            report(E, ids[0] if ids else "", f"{what} pairs a diagram with itself", ids[0] if ids else None, where)
            return False
        ok = True
        for i in ids:
            if i not in known:
                report(E, i, f"{what} references unknown diagram {i!r}", None, where)
                ok = False
        return ok

    for key, level in model.correlations.entries.items():
        check_pair(key, "correlation", ("correlation", key))

    hint_seen = set()
    for hint in model.hints:
        where = ("hint", hint.pair)
        if not check_pair(hint.pair, "merge hint", where):
            continue
        a, b = ordered(hint.pair, model.order())
        if hint.pair in hint_seen:
            report(E, a, f"duplicate merge hint for {a} and {b}", a, where)
        hint_seen.add(hint.pair)
        level = model.correlations.level(a, b)
        if level is not CorrelationLevel.LOW:
            report(E, a,
                   f"merge hint for {a} and {b} requires low correlation, found {level.value}",
                   a, where)

    ov = model.similarity_override
    if ov is not None:
        if ov.global_count < 0:
            report(E, "similarity-all", "global shared count is negative", None, ("similarity-all",))
        for key, value in ov.pairwise.items():
            if not check_pair(key, "similarity override", ("similarity", key)):
                continue
            a, b = ordered(key, model.order())
            if value < 0:
                report(E, a, f"negative shared count for {a} and {b}", a, ("similarity", key))
            elif value < ov.global_count:
                report(E, a,
                       f"shared count {value} for {a} and {b} is below the "
                       f"global count {ov.global_count}",
                       a, ("similarity", key))
        for a, b in combinations(model.diagram_ids, 2):
            if a != b and pair(a, b) not in ov.pairwise:
                report(E, a, f"similarity override is missing the pair {a} {b}", a,
                       ("similarity-all",))

    order = model.order()
    diags.sort(key=lambda d: (
        -1 if d.diagram is None else order.get(d.diagram, len(order)),
        d.subject, d.message,
    ))
    return diags


def _validate_diagram(diagram: ProblemDiagram, facilities: Mapping[str, str]) -> Iterable[Diagnostic]:
    E = Severity.ERROR
    did = diagram.id
    out = []

    def report(subject, message, where):
        out.append(Diagnostic(E, subject, message, did, where))

    if not IDENT_RE.match(did):
        report(did, f"invalid diagram id {did!r}", ("diagram", did))
    if diagram.machine.kind is not DomainKind.MACHINE:
        report(diagram.machine.id, f"machine of {did} has kind {diagram.machine.kind.value}",
               ("domain", did, diagram.machine.id))

    all_nodes = (diagram.machine,) + diagram.domains
    for node in diagram.domains:
        if node.kind is DomainKind.MACHINE:
            report(node.id, f"{did} declares a second machine domain {node.id!r}",
                   ("domain", did, node.id))
    for node_id, n in Counter(n.id for n in all_nodes).items():
        if n > 1:
            report(node_id, f"duplicate domain id {node_id!r} in {did}", ("domain", did, node_id))
    for node in all_nodes:
        if not IDENT_RE.match(node.id):
            report(node.id, f"invalid domain id {node.id!r}", ("domain", did, node.id))
        for f in sorted(node.facilities - facilities.keys()):
            report(node.id, f"domain {node.id!r} uses undeclared facility {f!r}",
                   ("domain", did, node.id))

    node_ids = {n.id for n in all_nodes}
    for n, count in Counter(r.id for r in diagram.requirements).items():
        if count > 1:
            report(n, f"duplicate requirement id {n!r} in {did}", ("requirement", did, n))
    for r in diagram.requirements:
        where = ("requirement", did, r.id)
        if not r.constrains and not r.refers:
            report(r.id, f"requirement {r.id!r} neither constrains nor refers to a domain", where)
        for x in sorted(r.constrains & r.refers):
            report(r.id, f"requirement {r.id!r} both constrains and refers to {x!r}", where)
        for x in sorted((r.constrains | r.refers) - node_ids):
            report(r.id, f"requirement {r.id!r} references unknown domain {x!r}", where)
        if diagram.machine.id in r.constrains:
            report(r.id, f"requirement {r.id!r} constrains the machine domain", where)

    for i, itf in enumerate(diagram.interfaces):
        ends = sorted(itf.endpoints)
        where = ("interface", did, i)
        subject = " -- ".join(ends)
        if len(ends) != 2:
            report(subject, f"interface in {did} must join two distinct domains", where)
        for x in ends:
            if x not in node_ids:
                report(subject, f"interface references unknown domain {x!r}", where)
        if not itf.phenomena:
            report(subject, f"interface {subject} in {did} has no phenomena", where)
    return out


def has_errors(diagnostics: Iterable) -> bool:
    return any(d.severity is Severity.ERROR for d in diagnostics)
