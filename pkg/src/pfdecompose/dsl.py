"""Reader and writer for the line-oriented ``.pfm`` model format.

Grammar (``#`` starts a comment, blank lines are ignored)::

    pfm-version 1
    model <string>
    facility <id> [<string>]
    diagram <id> <string> {
      machine <id> [<string>] [facilities [<id>, ...]]
      domain <id> <string> kind <B|C|X> [facilities [<id>, ...]]
      requirement <id> <string> [constrains [<id>, ...]] [refers [<id>, ...]]
      interface <id> -- <id> phenomena [<string>, ...]
    }
    correlation <id> <id> <high|low>
    hint merge <id> <id> <accepted|rejected> [<string>]
    similarity <id> <id> <int>
    similarity-all <int>

Strings are double quoted; ``\\"``, ``\\\\``, ``\\n``, ``\\t`` and ``\\r`` are
the recognised escapes.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

from .model import (
    IDENT_RE,
    CorrelationLevel,
    CorrelationMatrix,
    DomainKind,
    DomainNode,
    Interface,
    MergeHint,
    Model,
    ProblemDiagram,
    Requirement,
    Severity,
    SimilarityOverride,
    ordered,
    pair,
    validate,
)

FORMAT_VERSION = 1


@dataclass(frozen=True, order=True)
class SourceSpan:
    line: int
    column: int
    length: int = 0

    def __post_init__(self):
        if self.line < 1 or self.column < 1 or self.length < 0:
            raise ValueError(f"invalid span {self.line}:{self.column}+{self.length}")


@dataclass(frozen=True)
class ParseDiagnostic:
    span: SourceSpan
    severity: Severity
    message: str
    expected: tuple[str, ...] | None = None

    def format(self, path: str = "<input>") -> str:
        return (f"{path}:{self.span.line}:{self.span.column}: "
                f"{self.severity.value}: {self.message}")


class PfmParseError(ValueError):
    """Raised by :func:`parse` when the source has at least one error."""

    def __init__(self, diagnostics):
        self.diagnostics = list(diagnostics)
        first = next(d for d in self.diagnostics if d.severity is Severity.ERROR)
        super().__init__(first.format())


# -- lexer -------------------------------------------------------------------

WORD, STRING, INT = "word", "string", "integer"
LBRACE, RBRACE, LBRACKET, RBRACKET = "'{'", "'}'", "'['", "']'"
COMMA, DASHDASH, NEWLINE, EOF = "','", "'--'", "end of line", "end of input"

_PUNCT = {"{": LBRACE, "}": RBRACE, "[": LBRACKET, "]": RBRACKET, ",": COMMA}
_ESCAPES = {'"': '"', "\\": "\\", "n": "\n", "t": "\t", "r": "\r"}


@dataclass(frozen=True)
class Token:
    kind: str
    value: object
    span: SourceSpan

    def describe(self) -> str:
        if self.kind == WORD:
            return repr(self.value)
        if self.kind == STRING:
            return "string"
        if self.kind == INT:
            return f"integer {self.value}"
        return self.kind


def _end_span(source: str) -> SourceSpan:
    lines = source.replace("\r\n", "\n").replace("\r", "\n").split("\n")
    while len(lines) > 1 and lines[-1] == "":
        lines.pop()
    return SourceSpan(len(lines), len(lines[-1]) + 1, 0)


def tokenize(source: str) -> tuple[list[Token], list[ParseDiagnostic]]:
    tokens: list[Token] = []
    diags: list[ParseDiagnostic] = []
    i, n = 0, len(source)
    line, col = 1, 1

    def err(span, message):
        diags.append(ParseDiagnostic(span, Severity.ERROR, message))

    while i < n:
        c = source[i]
        if c == "\r" or c == "\n":
            tokens.append(Token(NEWLINE, None, SourceSpan(line, col, 0)))
            i += 2 if source.startswith("\r\n", i) else 1
            line, col = line + 1, 1
        elif c in " \t\f\v":
            i += 1
            col += 1
        elif c == "#":
            while i < n and source[i] not in "\r\n":
                i += 1
                col += 1
        elif c in _PUNCT:
            tokens.append(Token(_PUNCT[c], c, SourceSpan(line, col, 1)))
            i += 1
            col += 1
        elif c == "-" and source.startswith("--", i):
            tokens.append(Token(DASHDASH, "--", SourceSpan(line, col, 2)))
            i += 2
            col += 2
        elif c == '"':
            start, start_col = i, col
            i += 1
            col += 1
            chars = []
            closed = False
            while i < n and source[i] not in "\r\n":
                ch = source[i]
                if ch == '"':
                    closed = True
                    i += 1
                    col += 1
                    break
                if ch == "\\":
                    nxt = source[i + 1] if i + 1 < n else ""
                    if nxt in _ESCAPES and nxt:
                        chars.append(_ESCAPES[nxt])
                        i += 2
                        col += 2
                        continue
                    err(SourceSpan(line, col, 1), "unknown escape sequence in string")
                    i += 1
                    col += 1
                    continue
                chars.append(ch)
                i += 1
                col += 1
            span = SourceSpan(line, start_col, i - start)
            if not closed:
                err(span, "unterminated string")
            tokens.append(Token(STRING, "".join(chars), span))
        elif c.isdigit() and c.isascii():
            j = i
            while j < n and source[j].isdigit() and source[j].isascii():
                j += 1
            tokens.append(Token(INT, int(source[i:j]), SourceSpan(line, col, j - i)))
            col += j - i
            i = j
        elif c.isascii() and c.isalpha():
            j = i + 1
            while j < n and (source[j].isascii() and (source[j].isalnum() or source[j] == "_")):
                j += 1
            # hyphenated keywords such as ``similarity-all``
            while (j + 1 < n and source[j] == "-" and source[j + 1].isascii()
                   and source[j + 1].isalpha()):
                j += 2
                while j < n and source[j].isascii() and source[j].isalpha():
                    j += 1
            tokens.append(Token(WORD, source[i:j], SourceSpan(line, col, j - i)))
            col += j - i
            i = j
        else:
            err(SourceSpan(line, col, 1), f"illegal character {c!r}")
            i += 1
            col += 1
    tokens.append(Token(EOF, None, _end_span(source)))
    return tokens, diags


# -- parser ------------------------------------------------------------------

class _SyntaxError(Exception):
    def __init__(self, diagnostic):
        self.diagnostic = diagnostic


_KIND_LETTERS = ("B", "C", "X")
_TOP_KEYWORDS = ("pfm-version", "model", "facility", "diagram", "correlation",
                 "hint", "similarity", "similarity-all")
_BODY_KEYWORDS = ("machine", "domain", "requirement", "interface", "}")


class _Parser:
    def __init__(self, source: str):
        self.tokens, self.diags = tokenize(source)
        self.pos = 0
        self.spans: dict[tuple, SourceSpan] = {}

        self.name = ""
        self.facilities: dict[str, str] = {}
        self.diagrams: list[ProblemDiagram] = []
        self.correlations: dict = {}
        self.hints: list[MergeHint] = []
        self.similarity: dict = {}
        self.similarity_all: int | None = None
        self.requirement_ids: dict[str, str] = {}
        self.seen_header = set()
        # ids whose declaring line failed after the id was read; references
        # to them are not reported again
        self.pending: str | None = None
        self.broken_diagrams: set[str] = set()
        self.broken_domains: set[tuple[str, str]] = set()
        # facility references are resolved once every declaration is known
        self.facility_refs: list[tuple[str, SourceSpan]] = []

    # token helpers

    @property
    def tok(self) -> Token:
        return self.tokens[self.pos]

    def advance(self) -> Token:
        t = self.tokens[self.pos]
        if t.kind != EOF:
            self.pos += 1
        return t

    def error(self, span, message, expected=None):
        self.diags.append(ParseDiagnostic(span, Severity.ERROR, message,
                                          tuple(expected) if expected else None))

    def fail(self, message, expected=None, token=None):
        token = token or self.tok
        raise _SyntaxError(ParseDiagnostic(
            token.span, Severity.ERROR, message,
            tuple(expected) if expected else None))

    def expect(self, kind, what=None) -> Token:
        if self.tok.kind != kind:
            what = what or kind
            self.fail(f"expected {what}, found {self.tok.describe()}", [what])
        return self.advance()

    def expect_word(self, *choices) -> Token:
        if self.tok.kind != WORD or self.tok.value not in choices:
            if len(choices) == 1:
                msg = f"expected {choices[0]!r}, found {self.tok.describe()}"
            else:
                msg = (f"expected one of {{{', '.join(choices)}}}, "
                       f"found {self.tok.describe()}")
            self.fail(msg, choices)
        return self.advance()

    def at_word(self, value) -> bool:
        return self.tok.kind == WORD and self.tok.value == value

    def ident(self, what="identifier") -> Token:
        t = self.tok
        if t.kind != WORD:
            self.fail(f"expected {what}, found {t.describe()}", [what])
        if not IDENT_RE.match(t.value):
            self.fail(f"invalid identifier {t.value!r}", [what])
        return self.advance()

    def end_of_line(self):
        if self.tok.kind not in (NEWLINE, EOF):
            self.fail(f"expected end of line, found {self.tok.describe()}", [NEWLINE])
        self.advance()

    def skip_line(self):
        while self.tok.kind not in (NEWLINE, EOF):
            self.advance()
        self.advance()

    def skip_newlines(self):
        while self.tok.kind == NEWLINE:
            self.advance()

    def bracket_list(self, item):
        self.expect(LBRACKET)
        items = []
        if self.tok.kind != RBRACKET:
            items.append(item())
            while self.tok.kind == COMMA:
                self.advance()
                items.append(item())
        self.expect(RBRACKET)
        return items

    # grammar

    def run(self):
        while True:
            self.skip_newlines()
            if self.tok.kind == EOF:
                break
            self.pending = None
            try:
                self.statement()
            except _SyntaxError as e:
                self.diags.append(e.diagnostic)
                if self.pending is not None:
                    self.broken_diagrams.add(self.pending)
                self.skip_line()
        self.check_override()

    def statement(self):
        t = self.tok
        if t.kind != WORD or t.value not in _TOP_KEYWORDS:
            self.fail(f"expected a statement, found {t.describe()}", _TOP_KEYWORDS)
        handler = getattr(self, "stmt_" + t.value.replace("-", "_"))
        handler()

    def header_once(self, token):
        if token.value in self.seen_header:
            self.error(token.span, f"duplicate {token.value!r} statement")
            return False
        self.seen_header.add(token.value)
        return True

    def stmt_pfm_version(self):
        kw = self.advance()
        v = self.expect(INT, "version number")
        self.end_of_line()
        if v.value != FORMAT_VERSION:
            self.error(v.span, f"unsupported format version {v.value}; expected {FORMAT_VERSION}")
        self.header_once(kw)

    def stmt_model(self):
        kw = self.advance()
        name = self.expect(STRING, "model name string")
        self.end_of_line()
        if self.header_once(kw):
            self.name = name.value

    def stmt_facility(self):
        self.advance()
        fid = self.ident("facility id")
        desc = self.advance().value if self.tok.kind == STRING else ""
        self.end_of_line()
        if fid.value in self.facilities:
            self.error(fid.span, f"duplicate facility {fid.value!r}")
            return
        self.facilities[fid.value] = desc
        self.spans[("facility", fid.value)] = fid.span

    def stmt_correlation(self):
        self.advance()
        a, b = self.ident("diagram id"), self.ident("diagram id")
        level = self.expect_word("high", "low")
        self.end_of_line()
        key = pair(a.value, b.value)
        if key in self.correlations:
            self.error(a.span, f"duplicate correlation for {a.value} and {b.value}")
            return
        self.correlations[key] = CorrelationLevel(level.value)
        self.spans[("correlation", key)] = a.span

    def stmt_hint(self):
        self.advance()
        self.expect_word("merge")
        a, b = self.ident("diagram id"), self.ident("diagram id")
        verdict = self.expect_word("accepted", "rejected")
        note = self.advance().value if self.tok.kind == STRING else None
        self.end_of_line()
        key = pair(a.value, b.value)
        if ("hint", key) in self.spans:
            self.error(a.span, f"duplicate merge hint for {a.value} and {b.value}")
            return
        self.hints.append(MergeHint(key, verdict.value == "accepted", note))
        self.spans[("hint", key)] = a.span

    def stmt_similarity(self):
        self.advance()
        a, b = self.ident("diagram id"), self.ident("diagram id")
        count = self.expect(INT, "integer")
        self.end_of_line()
        key = pair(a.value, b.value)
        if key in self.similarity:
            self.error(a.span, f"duplicate similarity for {a.value} and {b.value}")
            return
        self.similarity[key] = count.value
        self.spans[("similarity", key)] = a.span

    def stmt_similarity_all(self):
        kw = self.advance()
        count = self.expect(INT, "integer")
        self.end_of_line()
        if self.header_once(kw):
            self.similarity_all = count.value
            self.spans[("similarity-all",)] = kw.span

    def stmt_diagram(self):
        kw = self.advance()
        did = self.ident("diagram id")
        self.pending = did.value
        title = self.expect(STRING, "diagram title string")
        self.expect(LBRACE)
        self.end_of_line()
        self.pending = None

        machine = None
        domains: list[DomainNode] = []
        requirements: list[Requirement] = []
        interfaces: list[Interface] = []
        local_spans: dict[tuple, SourceSpan] = {}
        node_ids: set[str] = set()
        closed = False

        while True:
            self.skip_newlines()
            t = self.tok
            if t.kind == EOF:
                self.error(kw.span, f"diagram {did.value} is missing its closing '}}'")
                break
            self.pending = None
            if t.kind == RBRACE:
                self.advance()
                closed = True
                break
            try:
                if t.kind != WORD or t.value not in _BODY_KEYWORDS:
                    self.fail(f"expected a diagram element, found {t.describe()}",
                              _BODY_KEYWORDS)
                if t.value == "machine":
                    node, span = self.machine()
                    if machine is not None:
                        self.error(span, f"diagram {did.value} already has machine {machine.id!r}")
                        continue
                    if node.id in node_ids:
                        self.error(span, f"duplicate domain id {node.id!r} in {did.value}")
                        continue
                    machine = node
                    node_ids.add(node.id)
                    local_spans[("domain", node.id)] = span
                elif t.value == "domain":
                    node, span = self.domain()
                    if node.id in node_ids:
                        self.error(span, f"duplicate domain id {node.id!r} in {did.value}")
                        continue
                    domains.append(node)
                    node_ids.add(node.id)
                    local_spans[("domain", node.id)] = span
                elif t.value == "requirement":
                    req, span = self.requirement()
                    first = self.requirement_ids.get(req.id)
                    if first is not None:
                        where = "this diagram" if first == did.value else f"diagram {first}"
                        self.error(span, f"duplicate requirement id {req.id!r} (already in {where})")
                        continue
                    self.requirement_ids[req.id] = did.value
                    requirements.append(req)
                    local_spans[("requirement", req.id)] = span
                else:
                    itf, span = self.interface()
                    local_spans[("interface", len(interfaces))] = span
                    interfaces.append(itf)
            except _SyntaxError as e:
                self.diags.append(e.diagnostic)
                if self.pending is not None:
                    self.broken_domains.add((did.value, self.pending))
                self.skip_line()

        if closed:
            try:
                self.end_of_line()
            except _SyntaxError as e:
                self.diags.append(e.diagnostic)
                self.skip_line()

        if machine is None:
            self.error(did.span, f"diagram {did.value} has no machine domain",
                       ["machine"])
            machine = DomainNode(f"{did.value}Machine", "", DomainKind.MACHINE)
        if any(d.id == did.value for d in self.diagrams):
            self.error(did.span, f"duplicate diagram id {did.value!r}")
            return
        self.spans[("diagram", did.value)] = did.span
        for key, span in local_spans.items():
            self.spans[(key[0], did.value) + key[1:]] = span
        self.diagrams.append(ProblemDiagram(
            did.value, title.value, machine, domains, requirements, interfaces))

    def facility_list(self):
        def item():
            t = self.ident("facility id")
            self.facility_refs.append((t.value, t.span))
            return t.value
        return self.bracket_list(item)

    def machine(self):
        self.advance()
        mid = self.ident("machine id")
        self.pending = mid.value
        name = self.advance().value if self.tok.kind == STRING else mid.value
        facilities = []
        if self.at_word("facilities"):
            self.advance()
            facilities = self.facility_list()
        self.end_of_line()
        return DomainNode(mid.value, name, DomainKind.MACHINE, facilities), mid.span

    def domain(self):
        self.advance()
        did = self.ident("domain id")
        self.pending = did.value
        name = self.expect(STRING, "domain name string")
        self.expect_word("kind")
        k = self.tok
        if k.kind != WORD or k.value not in _KIND_LETTERS:
            self.fail(f"invalid domain kind {k.describe()}; expected one of "
                      f"{{{', '.join(_KIND_LETTERS)}}}", _KIND_LETTERS)
        self.advance()
        facilities = []
        if self.at_word("facilities"):
            self.advance()
            facilities = self.facility_list()
        self.end_of_line()
        node = DomainNode(did.value, name.value, DomainKind.from_letter(k.value), facilities)
        return node, did.span

    def requirement(self):
        self.advance()
        rid = self.ident("requirement id")
        text = self.expect(STRING, "requirement text string")
        constrains, refers = [], []
        if self.at_word("constrains"):
            self.advance()
            constrains = self.bracket_list(lambda: self.ident("domain id").value)
        if self.at_word("refers"):
            self.advance()
            refers = self.bracket_list(lambda: self.ident("domain id").value)
        if self.tok.kind not in (NEWLINE, EOF):
            self.fail(f"expected 'constrains', 'refers' or end of line, found "
                      f"{self.tok.describe()}", ["constrains", "refers", NEWLINE])
        self.end_of_line()
        return Requirement(rid.value, text.value, constrains, refers), rid.span

    def interface(self):
        self.advance()
        a = self.ident("domain id")
        self.expect(DASHDASH)
        b = self.ident("domain id")
        self.expect_word("phenomena")
        phenomena = self.bracket_list(lambda: self.expect(STRING, "phenomenon string").value)
        self.end_of_line()
        return Interface((a.value, b.value), phenomena), a.span

    def check_override(self):
        if self.similarity and self.similarity_all is None:
            first = min(self.spans[("similarity", k)] for k in self.similarity)
            self.error(first, "similarity override is incomplete: missing 'similarity-all'",
                       ["similarity-all"])

    # assembly

    def build(self) -> Model:
        override = None
        if self.similarity or self.similarity_all is not None:
            override = SimilarityOverride(dict(self.similarity), self.similarity_all or 0)
        return Model(
            name=self.name,
            facilities=dict(self.facilities),
            diagrams=tuple(self.diagrams),
            correlations=CorrelationMatrix(self.correlations),
            hints=tuple(self.hints),
            similarity_override=override,
        )

    def is_cascade(self, diag) -> bool:
        for x in self.broken_diagrams:
            if diag.message.endswith(f"unknown diagram {x!r}"):
                return True
        for did, x in self.broken_domains:
            if diag.diagram == did and diag.message.endswith(f"unknown domain {x!r}"):
                return True
        return False

    def locate(self, where: tuple) -> SourceSpan:
        span = self.spans.get(where)
        if span is None and len(where) > 2:
            span = self.spans.get(where[:2])
        if span is None and where[:1] == ("similarity-all",):
            span = self.spans.get(("similarity-all",))
            if span is None and self.similarity:
                span = min(self.spans[("similarity", k)] for k in self.similarity)
        return span or SourceSpan(1, 1, 0)


def _run(source: str) -> tuple[Model | None, list[ParseDiagnostic]]:
    p = _Parser(source)
    p.run()
    model = p.build()

    for fid, span in p.facility_refs:
        if fid not in p.facilities:
            p.error(span, f"unknown facility {fid!r}")
    for d in validate(model):
        if "undeclared facility" in d.message:
            continue  # reported above with the exact token span
        if p.is_cascade(d):
            continue
        p.diags.append(ParseDiagnostic(p.locate(d.where), d.severity, d.message))

    diags = sorted(p.diags, key=lambda d: (d.span, d.severity.value, d.message))
    if any(d.severity is Severity.ERROR for d in diags):
        return None, diags
    return model, diags


def check(source: str) -> list[ParseDiagnostic]:
    """All diagnostics for ``source``, errors and warnings, in source order."""
    return _run(source)[1]


def parse(source: str) -> Model:
    """Parse ``.pfm`` text into a validated :class:`Model`.

    Raises :class:`PfmParseError` carrying every diagnostic if the source
    contains an error. Warnings alone do not prevent a model being returned;
    use :func:`check` to see them.
    """
    model, diags = _run(source)
    if model is None:
        raise PfmParseError(diags)
    return model


def load(path) -> Model:
    return parse(Path(path).read_text(encoding="utf-8"))


# -- serializer --------------------------------------------------------------

def quote(text: str) -> str:
    out = (text.replace("\\", "\\\\").replace('"', '\\"')
           .replace("\n", "\\n").replace("\t", "\\t").replace("\r", "\\r"))
    return f'"{out}"'


def _ids(items) -> str:
    return "[" + ", ".join(sorted(items)) + "]"


def _serialize_diagram(d: ProblemDiagram) -> list[str]:
    lines = [f"diagram {d.id} {quote(d.title)} {{"]
    m = d.machine
    parts = [f"  machine {m.id}"]
    if m.name != m.id:
        parts.append(quote(m.name))
    if m.facilities:
        parts.append("facilities " + _ids(m.facilities))
    lines.append(" ".join(parts))
    for dom in d.domains:
        line = f"  domain {dom.id} {quote(dom.name)} kind {dom.kind.letter}"
        if dom.facilities:
            line += " facilities " + _ids(dom.facilities)
        lines.append(line)
    for r in d.requirements:
        line = f"  requirement {r.id} {quote(r.text)}"
        if r.constrains or not r.refers:
            line += " constrains " + _ids(r.constrains)
        if r.refers:
            line += " refers " + _ids(r.refers)
        lines.append(line)
    position = {m.id: 0}
    position.update((dom.id, i + 1) for i, dom in enumerate(d.domains))
    for itf in d.interfaces:
        a, b = ordered(itf.endpoints, position)
        phen = ", ".join(quote(p) for p in itf.phenomena)
        lines.append(f"  interface {a} -- {b} phenomena [{phen}]")
    lines.append("}")
    return lines


def serialize(model: Model) -> str:
    """Canonical ``.pfm`` text for ``model``; ``parse`` of the result equals ``model``."""
    order = model.order()
    lines = [f"pfm-version {FORMAT_VERSION}", f"model {quote(model.name)}"]

    if model.facilities:
        lines.append("")
        for fid in sorted(model.facilities):
            desc = model.facilities[fid]
            lines.append(f"facility {fid} {quote(desc)}" if desc else f"facility {fid}")

    for d in model.diagrams:
        lines.append("")
        lines.extend(_serialize_diagram(d))

    pair_key = lambda k: tuple(order.get(x, len(order)) for x in ordered(k, order)) + tuple(ordered(k, order))

    if model.correlations.entries:
        lines.append("")
        for key in sorted(model.correlations.entries, key=pair_key):
            a, b = ordered(key, order)
            lines.append(f"correlation {a} {b} {model.correlations.entries[key].value}")

    if model.hints:
        lines.append("")
        for h in model.hints:
            a, b = ordered(h.pair, order)
            line = f"hint merge {a} {b} {'accepted' if h.accepted else 'rejected'}"
            if h.note is not None:
                line += " " + quote(h.note)
            lines.append(line)

    ov = model.similarity_override
    if ov is not None:
        lines.append("")
        for key in sorted(ov.pairwise, key=pair_key):
            a, b = ordered(key, order)
            lines.append(f"similarity {a} {b} {ov.pairwise[key]}")
        lines.append(f"similarity-all {ov.global_count}")

    return "\n".join(lines) + "\n"
