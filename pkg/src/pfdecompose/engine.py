"""Decomposition of a problem-frames model into microservices.

The pipeline is:

1. high-correlation pairs must share a service (``mandatory_edges``);
2. pairs whose shared facility count exceeds the count shared by *all*
   diagrams share a service (``similarity_edges``);
3. accepted analyst hints on low-correlation pairs share a service
   (``hint_edges``);
4. services are the connected components of those edges (``partition``);
5. a problem domain used by several services is owned by the one with the
   most member diagrams using it and replicated elsewhere
   (``assign_domains``);
6. each service's diagrams are folded into one diagram (``merge_group``).
"""

from __future__ import annotations

import logging
from collections import defaultdict
from dataclasses import dataclass, field
from itertools import combinations
from typing import Iterable, Sequence

import numpy as np

from .model import (
    CorrelationLevel,
    DomainKind,
    DomainNode,
    Interface,
    Model,
    ProblemDiagram,
    Severity,
    facility_set,
    has_errors,
    ordered,
    pair,
    validate,
)

log = logging.getLogger(__name__)

CORRELATION_HIGH = "correlation-high"
FACILITY_THRESHOLD = "facility-threshold"
HINT_ACCEPTED = "hint-accepted"
REASONS = (CORRELATION_HIGH, FACILITY_THRESHOLD, HINT_ACCEPTED)


class ModelValidationError(ValueError):
    def __init__(self, diagnostics):
        self.diagnostics = list(diagnostics)
        errors = [d for d in self.diagnostics if d.severity is Severity.ERROR]
        super().__init__("; ".join(d.message for d in errors) or "invalid model")


class MergeConflictError(ValueError):
    pass


@dataclass(frozen=True)
class FacilitySimilarity:
    """Shared-facility counts per diagram pair plus the count shared by all."""

    order: tuple[str, ...]
    pairwise: dict
    global_count: int

    def count(self, a: str, b: str) -> int:
        return self.pairwise[pair(a, b)]

    def pairs(self):
        return list(combinations(self.order, 2))

    def matrix(self) -> np.ndarray:
        """Symmetric count matrix in diagram order; the diagonal is zero."""
        n = len(self.order)
        out = np.zeros((n, n), dtype=int)
        for i, j in combinations(range(n), 2):
            out[i, j] = out[j, i] = self.count(self.order[i], self.order[j])
        return out


@dataclass(frozen=True)
class MergeEdge:
    pair: tuple[str, str]
    reason: str


@dataclass(frozen=True)
class TraceRecord:
    step: str
    message: str
    severity: str = "info"

    def __str__(self):
        return f"[{self.step}] {self.severity}: {self.message}"


@dataclass(frozen=True)
class DomainAssignment:
    domain: str
    counts: dict
    owner: str
    tied: bool = False


@dataclass(frozen=True)
class Microservice:
    id: str
    members: tuple[str, ...]
    owned_domains: tuple[str, ...]
    replicated_domains: tuple[str, ...]
    merged: ProblemDiagram


@dataclass(frozen=True)
class DecompositionResult:
    microservices: tuple[Microservice, ...] = ()
    assignments: tuple[DomainAssignment, ...] = ()
    edges: tuple[MergeEdge, ...] = ()
    trace: tuple[TraceRecord, ...] = ()
    similarity: FacilitySimilarity | None = field(default=None, compare=False)

    def service_of(self, diagram_id: str) -> Microservice:
        for ms in self.microservices:
            if diagram_id in ms.members:
                return ms
        raise KeyError(diagram_id)

    def warnings(self) -> list[TraceRecord]:
        return [t for t in self.trace if t.severity == "warning"]


def _require(model: Model, *ids: str):
    known = set(model.diagram_ids)
    for i in ids:
        if i not in known:
            raise KeyError(f"unknown diagram {i!r}")


def correlation(model: Model, pi: str, pj: str) -> CorrelationLevel:
    if pi == pj:
        raise ValueError(f"correlation of {pi!r} with itself is undefined")
    _require(model, pi, pj)
    return model.correlations.level(pi, pj)


def _edge(model_order, a, b, reason) -> MergeEdge:
    return MergeEdge(ordered(pair(a, b), model_order), reason)


def mandatory_edges(model: Model) -> list[MergeEdge]:
    order = model.order()
    return [_edge(order, a, b, CORRELATION_HIGH)
            for a, b in combinations(model.diagram_ids, 2)
            if model.correlations.level(a, b) is CorrelationLevel.HIGH]


def _no_override(model: Model):
    if model.similarity_override is not None:
        raise ValueError("model declares a similarity override; counts are not computed")


def pairwise_shared_count(model: Model, pi: str, pj: str) -> int:
    """Number of facilities used by both diagrams."""
    if pi == pj:
        raise ValueError("a diagram is not paired with itself")
    _no_override(model)
    _require(model, pi, pj)
    return len(facility_set(model.diagram(pi)) & facility_set(model.diagram(pj)))


def global_shared_count(model: Model) -> int:
    """Number of facilities used by every diagram; 0 for an empty model."""
    _no_override(model)
    if not model.diagrams:
        log.warning("global shared facility count of an empty model is taken as 0")
        return 0
    common = facility_set(model.diagrams[0])
    for d in model.diagrams[1:]:
        common &= facility_set(d)
    return len(common)


def _incidence(model: Model) -> np.ndarray:
    facilities = sorted(set(model.facilities).union(*(facility_set(d) for d in model.diagrams)))
    column = {f: i for i, f in enumerate(facilities)}
    out = np.zeros((len(model.diagrams), len(facilities)), dtype=np.int64)
    for row, d in enumerate(model.diagrams):
        for f in facility_set(d):
            out[row, column[f]] = 1
    return out


def build_similarity(model: Model) -> FacilitySimilarity:
    """Shared-facility counts, either declared by the model or computed.

    Computed counts come from the diagram/facility incidence matrix: the
    Gram matrix gives every pairwise count at once and the all-ones columns
    give the global count.
    """
    ids = model.diagram_ids
    ov = model.similarity_override
    if ov is not None:
        problems = [d for d in validate(model)
                    if d.severity is Severity.ERROR and d.where[:1] in (("similarity",), ("similarity-all",))]
        if problems:
            raise ModelValidationError(problems)
        return FacilitySimilarity(ids, {pair(a, b): ov.count(a, b) for a, b in combinations(ids, 2)},
                                  ov.global_count)

    if not ids:
        return FacilitySimilarity((), {}, global_shared_count(model))
    a = _incidence(model)
    gram = a @ a.T
    common = int(np.all(a == 1, axis=0).sum()) if a.shape[1] else 0
    pairwise = {pair(ids[i], ids[j]): int(gram[i, j]) for i, j in combinations(range(len(ids)), 2)}
    return FacilitySimilarity(ids, pairwise, common)


def similarity_edges(sim: FacilitySimilarity) -> list[MergeEdge]:
    order = {d: i for i, d in enumerate(sim.order)}
    return [_edge(order, a, b, FACILITY_THRESHOLD)
            for a, b in sim.pairs() if sim.count(a, b) > sim.global_count]


def hint_edges(model: Model) -> list[MergeEdge]:
    order = model.order()
    return [_edge(order, *tuple(h.pair), HINT_ACCEPTED) for h in model.hints if h.accepted]


class _UnionFind:
    def __init__(self, items):
        self.parent = {x: x for x in items}

    def find(self, x):
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, a, b) -> bool:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        self.parent[rb] = ra
        return True


def partition(ids: Sequence[str], edges: Iterable[MergeEdge]) -> list[tuple[str, ...]]:
    """Connected components of ``ids`` under ``edges``.

    Each component keeps the order of ``ids``, and components are ordered by
    their first member.
    """
    uf = _UnionFind(ids)
    for e in edges:
        a, b = e.pair
        if a not in uf.parent or b not in uf.parent:
            raise KeyError(f"edge {a}-{b} leaves the diagram set")
        uf.union(a, b)
    groups: dict[str, list[str]] = {}
    for i in ids:
        groups.setdefault(uf.find(i), []).append(i)
    return [tuple(g) for g in groups.values()]


def service_ids(groups) -> list[str]:
    return [f"M{k}" for k in range(1, len(groups) + 1)]


def _usage(groups, model: Model):
    """Per problem domain: member diagrams using it, by group index."""
    usage: dict[str, dict[int, list[str]]] = defaultdict(lambda: defaultdict(list))
    first_seen: dict[str, int] = {}
    for g, members in enumerate(groups):
        for did in members:
            for dom in model.diagram(did).domains:
                usage[dom.id][g].append(did)
                first_seen.setdefault(dom.id, len(first_seen))
    return usage, first_seen


def assign_domains(groups, model: Model) -> list[DomainAssignment]:
    """Ownership for every problem domain used by two or more groups.

    Machine domains are not shared domains and are never assigned. Ties go
    to the group that comes first and are flagged.
    """
    names = service_ids(groups)
    usage, first_seen = _usage(groups, model)
    out = []
    for dom in sorted(usage, key=first_seen.__getitem__):
        per_group = usage[dom]
        if len(per_group) < 2:
            continue
        counts = {names[g]: len(per_group[g]) for g in sorted(per_group)}
        best = max(counts.values())
        winners = [m for m, c in counts.items() if c == best]
        out.append(DomainAssignment(dom, counts, winners[0], len(winners) > 1))
    return out


def merge_group(group: Sequence[str], model: Model, service_id: str = "M") -> ProblemDiagram:
    """Fold the member diagrams of one service into a single diagram.

    Each member's machine is replaced by one machine named ``service_id``;
    interfaces and requirement arcs that touched a member machine are
    rewired to it.
    """
    if not group:
        raise ValueError("cannot merge an empty group")
    diagrams = [model.diagram(d) for d in group]

    domains: dict[str, DomainNode] = {}
    origin: dict[str, str] = {}
    machine_facilities = set()
    requirements = []
    interfaces: dict[tuple, Interface] = {}

    for d in diagrams:
        machine_facilities |= d.machine.facilities
        for dom in d.domains:
            prev = domains.get(dom.id)
            if prev is None:
                domains[dom.id] = dom
                origin[dom.id] = d.id
            elif prev.kind is not dom.kind:
                raise MergeConflictError(
                    f"domain {dom.id!r} is {prev.kind.value} in {origin[dom.id]} "
                    f"but {dom.kind.value} in {d.id}")
            else:
                domains[dom.id] = DomainNode(prev.id, prev.name, prev.kind,
                                             prev.facilities | dom.facilities)

    if service_id in domains:
        raise MergeConflictError(f"service machine id {service_id!r} collides with a problem domain")

    for d in diagrams:
        rename = lambda x, d=d: service_id if x == d.machine.id else x
        for r in d.requirements:
            requirements.append(type(r)(r.id, r.text,
                                        frozenset(map(rename, r.constrains)),
                                        frozenset(map(rename, r.refers))))
        for itf in d.interfaces:
            ends = frozenset(map(rename, itf.endpoints))
            key = (ends, frozenset(itf.phenomena))
            interfaces.setdefault(key, Interface(ends, itf.phenomena))

    machine = DomainNode(service_id, f"{service_id} service", DomainKind.MACHINE,
                         frozenset(machine_facilities))
    title = "; ".join(d.title for d in diagrams)
    return ProblemDiagram(service_id, title, machine, tuple(domains.values()),
                          tuple(requirements), tuple(interfaces.values()))


def decompose(model: Model) -> DecompositionResult:
    """Run the whole pipeline and record every decision in the trace."""
    diagnostics = validate(model)
    if has_errors(diagnostics):
        raise ModelValidationError(diagnostics)
    if not model.diagrams:
        return DecompositionResult()

    trace: list[TraceRecord] = []
    ids = model.diagram_ids
    order = model.order()

    def note(step, message, severity="info"):
        trace.append(TraceRecord(step, message, severity))

    for d in diagnostics:
        note("validate", d.message, "warning")

    mandatory = mandatory_edges(model)
    for e in mandatory:
        note("correlation", f"{e.pair[0]} and {e.pair[1]} are highly correlated and must share a service")

    sim = build_similarity(model)
    source = "declared" if model.similarity_override is not None else "computed"
    note("similarity", f"{source} global shared facility count is {sim.global_count}")
    if sim.global_count == 0 and len(ids) > 1:
        note("similarity", "no facility is shared by every diagram; any shared facility merges a pair",
             "warning")
    similar = similarity_edges(sim)
    for e in similar:
        note("similarity", f"{e.pair[0]} and {e.pair[1]} share {sim.count(*e.pair)} facilities "
                           f"(> {sim.global_count}) and share a service")

    rule_groups = partition(ids, mandatory + similar)
    rule_index = {d: g for g, members in enumerate(rule_groups) for d in members}

    accepted = hint_edges(model)
    for h in model.hints:
        a, b = ordered(h.pair, order)
        suffix = f": {h.note}" if h.note else ""
        if not h.accepted:
            note("hint", f"merge of {a} and {b} rejected by the analyst{suffix}")
        elif rule_index[a] == rule_index[b]:
            note("hint", f"accepted merge of {a} and {b} is already implied by the "
                         f"correlation and facility rules{suffix}", "warning")
        else:
            note("hint", f"{a} and {b} share a service by analyst decision{suffix}")

    edges = mandatory + similar + accepted
    groups = partition(ids, edges)
    names = service_ids(groups)
    for name, members in zip(names, groups):
        note("partition", f"{name} = {{{', '.join(members)}}}")

    assignments = assign_domains(groups, model)
    usage, first_seen = _usage(groups, model)
    owned: dict[str, list[str]] = {n: [] for n in names}
    replicated: dict[str, list[str]] = {n: [] for n in names}
    owner_of = {a.domain: a.owner for a in assignments}
    for dom in sorted(usage, key=first_seen.__getitem__):
        users = [names[g] for g in sorted(usage[dom])]
        owner = owner_of.get(dom, users[0])
        owned[owner].append(dom)
        for m in users:
            if m != owner:
                replicated[m].append(dom)
    for a in assignments:
        counts = ", ".join(f"{m}={c}" for m, c in a.counts.items())
        if a.tied:
            note("assign", f"{a.domain} is used equally often ({counts}); tie broken in favour of {a.owner}",
                 "warning")
        else:
            note("assign", f"{a.domain} assigned to {a.owner} ({counts})")
        others = [m for m in a.counts if m != a.owner]
        note("assign", f"{a.domain} replicated in {', '.join(others)}")

    services = []
    for name, members in zip(names, groups):
        merged = merge_group(members, model, name)
        services.append(Microservice(name, members, tuple(owned[name]),
                                     tuple(replicated[name]), merged))

    return DecompositionResult(tuple(services), tuple(assignments), tuple(edges), tuple(trace), sim)
