"""Find every function and method definition in Python source."""

from __future__ import annotations

import ast
import logging
from dataclasses import dataclass, field
from typing import Iterator

from .ingest import FileSnapshot

log = logging.getLogger(__name__)

FunctionNode = (ast.FunctionDef, ast.AsyncFunctionDef)


class ParseError(Exception):
    def __init__(self, file_path: str, message: str) -> None:
        super().__init__(f"{file_path}: {message}")
        self.file_path = file_path
        self.message = message


@dataclass(frozen=True, order=True)
class MethodIdentity:
    file_path: str
    scope_path: tuple[str, ...]
    name: str

    def qualname(self) -> str:
        return ".".join((*self.scope_path, self.name))

    def __str__(self) -> str:
        return f"{self.file_path}::{self.qualname()}"


@dataclass
class MethodRecord:
    identity: MethodIdentity
    source_text: str
    start_line: int
    end_line: int
    col_offset: int = 0
    is_async: bool = False
    docstring: str | None = None
    decorators: tuple[str, ...] = ()
    node: ast.AST | None = field(default=None, repr=False, compare=False)

    @property
    def name(self) -> str:
        return self.identity.name

    def syntax(self) -> ast.FunctionDef | ast.AsyncFunctionDef:
        """The parsed definition, re-parsed from ``source_text`` if needed."""
        if self.node is None:
            self.node = parse_definition(self.source_text, self.col_offset)
        return self.node


def parse_definition(source_text: str, col_offset: int = 0):
    """Parse a lone definition whose first line was cut at ``col_offset``."""
    if col_offset:
        # continuation lines keep their original indentation; nest under a dummy block
        tree = ast.parse("if 1:\n" + " " * col_offset + source_text)
        node = tree.body[0].body[0]
    else:
        node = ast.parse(source_text).body[0]
    if not isinstance(node, FunctionNode):
        raise ValueError("source is not a function definition")
    return node


def normalize_newlines(source: str) -> str:
    return source.replace("\r\n", "\n").replace("\r", "\n")


def _decorator_name(node: ast.expr) -> str:
    if isinstance(node, ast.Call):
        node = node.func
    try:
        return ast.unparse(node)
    except Exception:  # noqa: BLE001
        return type(node).__name__


def _walk_defs(node: ast.AST, scope: tuple[str, ...]) -> Iterator[tuple[tuple[str, ...], ast.AST]]:
    for child in ast.iter_child_nodes(node):
        if isinstance(child, FunctionNode):
            yield scope, child
            yield from _walk_defs(child, scope + (child.name,))
        elif isinstance(child, ast.ClassDef):
            yield from _walk_defs(child, scope + (child.name,))
        else:
            yield from _walk_defs(child, scope)


def extract_methods(source: str, file_path: str) -> list[MethodRecord]:
    """One record per ``def``/``async def`` in ``source``, in document order.

    Raises ParseError for source that does not parse.
    """
    source = normalize_newlines(source)
    try:
        tree = ast.parse(source, filename=file_path)
    except (SyntaxError, ValueError) as exc:
        raise ParseError(file_path, str(exc)) from exc

    lines = source.split("\n")
    records = []
    for scope, node in _walk_defs(tree, ()):
        text = ast.get_source_segment(source, node)
        if not text:
            continue
        records.append(
            MethodRecord(
                identity=MethodIdentity(file_path, scope, node.name),
                source_text=text,
                start_line=node.lineno,
                end_line=node.end_lineno,
                col_offset=len(lines[node.lineno - 1].encode()[: node.col_offset].decode()),
                is_async=isinstance(node, ast.AsyncFunctionDef),
                docstring=ast.get_docstring(node, clean=False),
                decorators=tuple(_decorator_name(d) for d in node.decorator_list),
                node=node,
            )
        )
    records.sort(key=lambda r: (r.start_line, r.col_offset))
    return records


def extract_snapshot(
    snap: FileSnapshot, skipped: list[ParseError] | None = None
) -> dict[MethodIdentity, MethodRecord]:
    """Methods of every file in the snapshot; the last duplicate definition wins.

    Unparseable files are logged, appended to ``skipped`` and ignored.
    """
    methods: dict[MethodIdentity, MethodRecord] = {}
    for path in sorted(snap.files):
        try:
            records = extract_methods(snap.files[path], path)
        except ParseError as exc:
            log.warning("skipping %s at %s: %s", path, snap.revision[:12], exc.message)
            if skipped is not None:
                skipped.append(exc)
            continue
        for rec in records:
            methods.pop(rec.identity, None)
            methods[rec.identity] = rec
    return methods
