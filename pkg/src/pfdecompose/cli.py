"""Command-line entry point.

Exit codes: 0 success, 1 parse/validation/decomposition or I/O failure,
2 usage error. Diagnostics go to stderr as ``path:line:col: severity: message``.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass, field
from pathlib import Path

from . import dsl, engine, export
from .model import Model, Severity

COMMANDS = ("validate", "decompose", "render", "report")
FORMATS = ("dot", "json", "tables")


@dataclass(frozen=True)
class CliConfig:
    command: str
    input_path: Path
    output_dir: Path = Path(".")
    formats: frozenset = field(default_factory=lambda: frozenset(FORMATS))
    strict: bool = False


def _format_list(text: str) -> frozenset:
    chosen = {f.strip() for f in text.split(",") if f.strip()}
    unknown = chosen - set(FORMATS)
    if unknown or not chosen:
        raise argparse.ArgumentTypeError(
            f"unknown format {', '.join(sorted(unknown)) or repr(text)}; "
            f"choose from {', '.join(FORMATS)}")
    return frozenset(chosen)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pfdecompose",
        description="Decompose a problem-frames model (.pfm) into microservices.")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", required=True)
    helps = {
        "validate": "parse and check a model",
        "decompose": "write architecture.dot, M<k>.dot, result.json and report.txt",
        "render": "write one DOT file per problem diagram",
        "report": "print the correlation, similarity and assignment tables",
    }
    for name in COMMANDS:
        p = sub.add_parser(name, help=helps[name])
        p.add_argument("input", type=Path, help="model file (.pfm)")
        p.add_argument("--strict", action="store_true", help="treat warnings as errors")
        if name in ("decompose", "render"):
            p.add_argument("-o", "--output-dir", type=Path, default=Path("."),
                           help="directory for output files (default: current directory)")
        if name == "decompose":
            p.add_argument("--format", type=_format_list, default=frozenset(FORMATS),
                           help="comma-separated subset of dot,json,tables (default: all)")
    return parser


def _load(config: CliConfig, err) -> Model | None:
    path = config.input_path
    try:
        source = path.read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        print(f"{path}: error: cannot read input: {getattr(exc, 'strerror', None) or exc}", file=err)
        return None
    diagnostics = dsl.check(source)
    for d in diagnostics:
        print(d.format(str(path)), file=err)
    failed = any(d.severity is Severity.ERROR or config.strict for d in diagnostics)
    if failed:
        return None
    return dsl.parse(source)


def _outputs(config: CliConfig, model, err) -> dict[str, str] | None:
    if config.command == "render":
        return {f"{d.id}.dot": export.render_diagram_dot(d) for d in model.diagrams}

    try:
        result = engine.decompose(model)
    except (engine.ModelValidationError, engine.MergeConflictError) as exc:
        print(f"{config.input_path}: error: {exc}", file=err)
        return None
    warnings = result.warnings()
    for t in warnings:
        if t.step != "validate":  # already reported with a source location
            print(f"{config.input_path}: warning: {t.message}", file=err)
    if config.strict and warnings:
        return None

    files = {}
    if "dot" in config.formats:
        files["architecture.dot"] = export.render_architecture_dot(result)
        for ms in result.microservices:
            files[f"{ms.id}.dot"] = export.render_diagram_dot(ms.merged)
    if "json" in config.formats:
        files["result.json"] = export.emit_json(result) + "\n"
    if "tables" in config.formats:
        files["report.txt"] = export.emit_report(model, result.similarity, result).render()
    return files


def _write_all(directory: Path, files: dict[str, str], err) -> bool:
    written = []
    try:
        directory.mkdir(parents=True, exist_ok=True)
        for name, text in files.items():
            target = directory / name
            target.write_text(text, encoding="utf-8", newline="\n")
            written.append(target)
    except OSError as exc:
        for target in written:
            target.unlink(missing_ok=True)
        print(f"{directory}: error: cannot write output: {exc.strerror or exc}", file=err)
        return False
    return True


def run(config: CliConfig, out=None, err=None) -> int:
    out = out or sys.stdout
    err = err or sys.stderr
    model = _load(config, err)
    if model is None:
        return 1
    if config.command == "validate":
        return 0
    if config.command == "report":
        try:
            result = engine.decompose(model)
        except (engine.ModelValidationError, engine.MergeConflictError) as exc:
            print(f"{config.input_path}: error: {exc}", file=err)
            return 1
        if config.strict and result.warnings():
            for t in result.warnings():
                print(f"{config.input_path}: warning: {t.message}", file=err)
            return 1
        out.write(export.emit_report(model, result.similarity, result).render())
        return 0

    files = _outputs(config, model, err)
    if files is None:
        return 1
    return 0 if _write_all(config.output_dir, files, err) else 1


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    config = CliConfig(
        command=args.command,
        input_path=args.input,
        output_dir=getattr(args, "output_dir", Path(".")),
        formats=getattr(args, "format", frozenset(FORMATS)),
        strict=args.strict,
    )
    return run(config)


if __name__ == "__main__":
    sys.exit(main())
