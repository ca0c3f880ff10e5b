"""DOT graphs, JSON and plain-text tables for models and decompositions.

DOT notation for problem diagrams:

* machine: box with a double border (``peripheries=2``);
* problem domains: boxes, the kind letter (B, C or X) in the label;
* requirements: dashed ellipses;
* ``constrains`` arcs: dashed arrows from requirement to domain;
* ``refers`` arcs: dashed lines without arrowheads;
* interfaces: solid lines labelled with their phenomena.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

from .engine import DecompositionResult, FacilitySimilarity
from .model import CorrelationLevel, DomainKind, Model, ProblemDiagram, ordered


def dot_quote(text: str) -> str:
    """A DOT double-quoted string; quotes, backslashes and newlines escaped."""
    out = (str(text).replace("\\", "\\\\").replace('"', '\\"')
           .replace("\r\n", "\\n").replace("\n", "\\n").replace("\r", "\\n"))
    return f'"{out}"'


def _domain_label(node) -> str:
    if node.kind is DomainKind.MACHINE:
        return node.name
    return f"{node.name}\n[{node.kind.letter}]"


def _diagram_body(diagram: ProblemDiagram, prefix: str, indent: str,
                  annotate=None) -> list[str]:
    """Node and edge statements for one diagram; ids are prefixed to stay unique."""
    nid = lambda kind, x: dot_quote(f"{prefix}{kind}:{x}")
    lines = []
    m = diagram.machine
    lines.append(f"{indent}{nid('d', m.id)} [shape=box, peripheries=2, "
                 f"label={dot_quote(_domain_label(m))}];")
    for dom in diagram.domains:
        label = _domain_label(dom)
        attrs = "shape=box"
        if annotate:
            extra_label, extra_attrs = annotate(dom)
            label += extra_label
            attrs += extra_attrs
        lines.append(f"{indent}{nid('d', dom.id)} [{attrs}, label={dot_quote(label)}];")
    for r in diagram.requirements:
        lines.append(f"{indent}{nid('r', r.id)} [shape=ellipse, style=dashed, "
                     f"label={dot_quote(r.text)}];")

    position = {m.id: 0}
    position.update((dom.id, i + 1) for i, dom in enumerate(diagram.domains))
    for r in diagram.requirements:
        for x in sorted(r.constrains, key=lambda x: position.get(x, len(position))):
            lines.append(f"{indent}{nid('r', r.id)} -> {nid('d', x)} [style=dashed];")
        for x in sorted(r.refers, key=lambda x: position.get(x, len(position))):
            lines.append(f"{indent}{nid('r', r.id)} -> {nid('d', x)} [style=dashed, dir=none];")
    for itf in diagram.interfaces:
        a, b = ordered(itf.endpoints, position)
        lines.append(f"{indent}{nid('d', a)} -> {nid('d', b)} "
                     f"[dir=none, label={dot_quote(', '.join(itf.phenomena))}];")
    return lines


def render_diagram_dot(diagram: ProblemDiagram) -> str:
    lines = [f"digraph {dot_quote(diagram.id)} {{",
             f"  label={dot_quote(f'{diagram.id}: {diagram.title}')};",
             "  labelloc=t;",
             "  node [fontname=Helvetica];",
             "  edge [fontname=Helvetica, fontsize=10];"]
    lines += _diagram_body(diagram, "", "  ")
    lines.append("}")
    return "\n".join(lines) + "\n"


def render_architecture_dot(result: DecompositionResult) -> str:
    """One cluster per microservice; replicated domains point at their owner."""
    lines = ["digraph architecture {",
             "  compound=true;",
             "  node [fontname=Helvetica];",
             "  edge [fontname=Helvetica, fontsize=10];"]
    owner = {}
    for ms in result.microservices:
        for dom in ms.owned_domains:
            owner[dom] = ms.id
    shared = {a.domain for a in result.assignments}

    for ms in result.microservices:
        replicas = set(ms.replicated_domains)

        def annotate(dom, replicas=replicas):
            if dom.id in replicas:
                return f"\n(replica of {owner[dom.id]})", ", style=dashed"
            if dom.id in shared:
                return "\n(owner)", ", style=bold"
            return "", ""

        lines.append(f"  subgraph {dot_quote('cluster_' + ms.id)} {{")
        lines.append(f"    label={dot_quote(f'{ms.id}: ' + ', '.join(ms.members))};")
        lines += _diagram_body(ms.merged, f"{ms.id}/", "    ", annotate)
        lines.append("  }")

    for ms in result.microservices:
        for dom in ms.replicated_domains:
            src = dot_quote(f"{ms.id}/d:{dom}")
            dst = dot_quote(f"{owner[dom]}/d:{dom}")
            lines.append(f"  {src} -> {dst} [style=dotted, label=\"replica\"];")
    lines.append("}")
    return "\n".join(lines) + "\n"


# -- tables ------------------------------------------------------------------

def _table(header: list[str], rows: list[list[str]]) -> str:
    if not rows:
        return ""
    widths = [max(len(r[i]) for r in [header] + rows) for i in range(len(header))]
    fmt = lambda row: "| " + " | ".join(c.ljust(w) for c, w in zip(row, widths)) + " |"
    rule = "|-" + "-|-".join("-" * w for w in widths) + "-|"
    return "\n".join([fmt(header), rule] + [fmt(r) for r in rows]) + "\n"


def correlation_table(model: Model) -> str:
    ids = list(model.diagram_ids)
    rows = []
    for i, a in enumerate(ids):
        row = [a]
        for j, b in enumerate(ids):
            if j < i:
                row.append("")
            elif j == i:
                row.append("/")
            else:
                level = model.correlations.level(a, b)
                row.append("/" if level is CorrelationLevel.NONE else level.value)
        rows.append(row)
    return _table([""] + ids, rows)


def similarity_table(sim: FacilitySimilarity) -> str:
    """Shared-facility counts; a trailing ``*`` marks counts above the global count."""
    ids = list(sim.order)
    rows = []
    for i, a in enumerate(ids):
        row = [a]
        for j, b in enumerate(ids):
            if j < i:
                row.append("")
            elif j == i:
                row.append("/")
            else:
                c = sim.count(a, b)
                row.append(f"{c}*" if c > sim.global_count else str(c))
        rows.append(row)
    return _table([""] + ids, rows)


def _domain_name(model: Model, domain_id: str) -> str:
    for d in model.diagrams:
        for node in d.domains:
            if node.id == domain_id:
                return node.name
    return domain_id


def assignment_table(model: Model, result: DecompositionResult) -> str:
    services = [ms.id for ms in result.microservices]
    rows = []
    for a in result.assignments:
        cells = []
        for ms in result.microservices:
            using = [d for d in ms.members if a.domain in model.diagram(d).domain_ids()]
            cells.append(", ".join(using) or "/")
        owner = a.owner + (" (tie)" if a.tied else "")
        rows.append([_domain_name(model, a.domain)] + cells + [owner])
    return _table(["Problem domain"] + services + ["Owner"], rows)


def summary_table(model: Model, result: DecompositionResult) -> str:
    rows = []
    for ms in result.microservices:
        for d in ms.members:
            rows.append([ms.id, d, model.diagram(d).title])
    return _table(["Microservice", "Diagram", "Requirement"], rows)


@dataclass(frozen=True)
class ReportDocument:
    correlation_table: str
    similarity_table: str
    assignment_table: str
    summary: str

    def render(self) -> str:
        parts = [("Requirements per microservice", self.summary),
                 ("Correlation between problem diagrams", self.correlation_table),
                 ("Shared hardware facilities (* = above the global count)", self.similarity_table),
                 ("Problem diagrams per microservice for shared problem domains",
                  self.assignment_table)]
        out = []
        for title, body in parts:
            out.append(title)
            out.append("=" * len(title))
            out.append(body.rstrip("\n") if body else "(empty)")
            out.append("")
        return "\n".join(out)


def emit_report(model: Model, sim: FacilitySimilarity | None, result: DecompositionResult) -> ReportDocument:
    if sim is None:
        sim = result.similarity or FacilitySimilarity((), {}, 0)
    return ReportDocument(
        correlation_table=correlation_table(model),
        similarity_table=similarity_table(sim),
        assignment_table=assignment_table(model, result),
        summary=summary_table(model, result),
    )


# -- JSON --------------------------------------------------------------------

def result_dict(result: DecompositionResult) -> dict:
    return {
        "microservices": [
            {
                "id": ms.id,
                "members": list(ms.members),
                "owned_domains": list(ms.owned_domains),
                "replicated_domains": list(ms.replicated_domains),
                "requirements": [r.id for r in ms.merged.requirements],
            }
            for ms in result.microservices
        ],
        "assignments": [
            {"domain": a.domain, "counts": dict(a.counts), "owner": a.owner, "tied": a.tied}
            for a in result.assignments
        ],
        "edges": [{"pair": list(e.pair), "reason": e.reason} for e in result.edges],
        "trace": [{"step": t.step, "severity": t.severity, "message": t.message}
                  for t in result.trace],
    }


def emit_json(result: DecompositionResult) -> str:
    """Compact JSON, keys in a fixed order, no trailing newline."""
    return json.dumps(result_dict(result), separators=(",", ":"), ensure_ascii=False)
