"""The 23 size, method-type and content features computed for each method."""

from __future__ import annotations

import ast
import io
import math
import re
import tokenize
from dataclasses import astuple, dataclass, fields
from typing import Callable, Iterator, TypeVar

from .extract import FunctionNode, MethodRecord

T = TypeVar("T")


@dataclass(frozen=True)
class FeatureVector:
    code_loc: int
    char_length: int
    tokens: int
    docstring_words: int
    method_name_words: int
    is_getter: bool
    is_setter: bool
    is_IsHas: bool
    is_test: bool
    is_in_test_code: bool
    is_private: bool
    is_dunder_method: bool
    has_return: bool
    param_count: int
    number_of_variable: int
    call_expression_count: int
    number_of_print: int
    comment_ratio: float
    cyclomatic_complexity: int
    halstead_volume: float
    max_nesting_depth: int
    uses_try_except: bool
    uses_constants: bool

    def as_floats(self) -> list[float]:
        return [float(v) for v in astuple(self)]

    def as_dict(self) -> dict[str, int | float | bool]:
        return {name: getattr(self, name) for name in FEATURE_NAMES}

    @classmethod
    def from_dict(cls, data: dict) -> "FeatureVector":
        missing = [n for n in FEATURE_NAMES if n not in data]
        if missing:
            raise ValueError(f"missing features: {', '.join(missing)}")
        values = {}
        for f in fields(cls):
            raw = data[f.name]
            if f.type == "bool":
                values[f.name] = bool(raw)
            elif f.type == "int":
                values[f.name] = int(raw)
            else:
                values[f.name] = float(raw)
        return cls(**values)


FEATURE_NAMES: tuple[str, ...] = tuple(f.name for f in fields(FeatureVector))

_CONSTANT_NAME = re.compile(r"^[A-Z][A-Z0-9_]+$")
_DUNDER = re.compile(r"^__.*__$")
_NEST_NODES = (ast.If, ast.For, ast.AsyncFor, ast.While, ast.Try, ast.With, ast.AsyncWith)
_SCOPE_NODES = FunctionNode + (ast.ClassDef,)
_SKIP_TOKENS = {
    tokenize.COMMENT,
    tokenize.NL,
    tokenize.NEWLINE,
    tokenize.INDENT,
    tokenize.DEDENT,
    tokenize.ENDMARKER,
    tokenize.ENCODING,
}


def split_name_words(name: str) -> int:
    """Count snake_case / CamelCase words in an identifier.

    >>> split_name_words("getHTTPResponse")
    3
    """
    count = 0
    for part in name.split("_"):
        if not part:
            continue
        count += 1
        for i in range(1, len(part)):
            c = part[i]
            if not c.isupper():
                continue
            prev = part[i - 1]
            if prev.islower() or prev.isdigit():
                count += 1
            elif prev.isupper() and i + 1 < len(part) and part[i + 1].islower():
                count += 1
    return count


def _body_nodes(func: ast.AST) -> Iterator[ast.AST]:
    """Every node under the body statements (signature and decorators excluded)."""
    for stmt in func.body:
        yield from ast.walk(stmt)


def _docstring_node(func) -> ast.Expr | None:
    if func.body:
        first = func.body[0]
        if (
            isinstance(first, ast.Expr)
            and isinstance(first.value, ast.Constant)
            and isinstance(first.value.value, str)
        ):
            return first
    return None


def count_params(func) -> int:
    a = func.args
    return (
        len(a.posonlyargs)
        + len(a.args)
        + len(a.kwonlyargs)
        + (a.vararg is not None)
        + (a.kwarg is not None)
    )


def _flatten_targets(target: ast.AST) -> Iterator[str]:
    if isinstance(target, ast.Name):
        yield target.id
    elif isinstance(target, (ast.Tuple, ast.List)):
        for elt in target.elts:
            yield from _flatten_targets(elt)
    elif isinstance(target, ast.Starred):
        yield from _flatten_targets(target.value)


def count_variables(func) -> int:
    names: set[str] = set()
    for node in _body_nodes(func):
        if isinstance(node, ast.Assign):
            for t in node.targets:
                names.update(_flatten_targets(t))
        elif isinstance(node, ast.AnnAssign):
            names.update(_flatten_targets(node.target))
    return len(names)


def _is_elif(node: ast.If) -> bool:
    if len(node.orelse) != 1 or not isinstance(node.orelse[0], ast.If):
        return False
    inner = node.orelse[0]
    return inner.lineno > node.lineno and inner.col_offset == node.col_offset


def _nesting(node: ast.AST, level: int) -> int:
    best = level
    if isinstance(node, ast.If):
        for child in node.body:
            best = max(best, _nesting_stmt(child, level + 1))
        if _is_elif(node):
            best = max(best, _nesting(node.orelse[0], level))
        else:
            for child in node.orelse:
                best = max(best, _nesting_stmt(child, level + 1))
        return max(best, level + 1)
    if isinstance(node, _NEST_NODES):
        best = level + 1
        for child in ast.iter_child_nodes(node):
            best = max(best, _nesting_stmt(child, level + 1))
        return best
    for child in ast.iter_child_nodes(node):
        best = max(best, _nesting_stmt(child, level))
    return best


def _nesting_stmt(node: ast.AST, level: int) -> int:
    if isinstance(node, _SCOPE_NODES):
        return level
    return _nesting(node, level)


def max_nesting_depth(func) -> int:
    return max((_nesting_stmt(stmt, 0) for stmt in func.body), default=0)


def _cc_nodes(node: ast.AST) -> Iterator[ast.AST]:
    # nested definitions are scored in their own records
    for child in ast.iter_child_nodes(node):
        if isinstance(child, _SCOPE_NODES):
            continue
        yield child
        yield from _cc_nodes(child)


def cyclomatic_complexity(rec: MethodRecord) -> int:
    """1 + decision points of the method body, 1 if the body cannot be analysed."""
    try:
        func = rec.syntax()
        score = 1
        for stmt in func.body:
            if isinstance(stmt, _SCOPE_NODES):
                continue
            for node in (stmt, *_cc_nodes(stmt)):
                if isinstance(node, (ast.If, ast.For, ast.AsyncFor, ast.While,
                                     ast.ExceptHandler, ast.IfExp, ast.Assert)):
                    score += 1
                elif isinstance(node, ast.BoolOp):
                    score += len(node.values) - 1
                elif isinstance(node, ast.comprehension):
                    score += 1 + len(node.ifs)
        return score
    except Exception:  # noqa: BLE001
        return 1


def halstead_counts(func) -> tuple[list, list]:
    """Operator and operand occurrences in the body, docstring excluded."""
    operators: list = []
    operands: list = []
    doc = _docstring_node(func)
    for stmt in func.body:
        if stmt is doc:
            continue
        for node in ast.walk(stmt):
            if isinstance(node, ast.Assign):
                operators.extend(["Assign"] * len(node.targets))
            elif isinstance(node, ast.AnnAssign):
                if node.value is not None:
                    operators.append("Assign")
            elif isinstance(node, ast.AugAssign):
                operators.append("AugAssign." + type(node.op).__name__)
            elif isinstance(node, (ast.BinOp, ast.UnaryOp)):
                operators.append(type(node.op).__name__)
            elif isinstance(node, ast.BoolOp):
                operators.extend([type(node.op).__name__] * (len(node.values) - 1))
            elif isinstance(node, ast.Compare):
                operators.extend(type(op).__name__ for op in node.ops)
            elif isinstance(node, ast.Subscript):
                operators.append("Subscript")
            elif isinstance(node, ast.Attribute):
                operators.append("Attribute")
                operands.append(("name", node.attr))
            elif isinstance(node, ast.Call):
                operators.append("Call")
            elif isinstance(node, ast.Name):
                operands.append(("name", node.id))
            elif isinstance(node, ast.Constant):
                operands.append(("const", type(node.value).__name__, repr(node.value)))
    return operators, operands


def halstead_volume(rec: MethodRecord) -> float:
    """N * log2(n) over operator and operand occurrences; 0.0 on failure."""
    try:
        operators, operands = halstead_counts(rec.syntax())
        total = len(operators) + len(operands)
        distinct = len(set(operators)) + len(set(operands))
        if distinct == 0:
            return 0.0
        return total * math.log2(distinct)
    except Exception:  # noqa: BLE001
        return 0.0


@dataclass(frozen=True)
class LineScan:
    tokens: int
    code_lines: frozenset[int]
    comment_lines: frozenset[int]
    total_lines: int


def scan_lines(rec: MethodRecord) -> LineScan:
    """Tokenize the method once; line numbers are 1-based within ``source_text``."""
    text = rec.source_text
    total = len(text.split("\n"))
    padded = " " * rec.col_offset + text + "\n"
    code: set[int] = set()
    comments: set[int] = set()
    count = 0
    try:
        for tok in tokenize.generate_tokens(io.StringIO(padded).readline):
            if tok.type == tokenize.COMMENT:
                comments.add(tok.start[0])
                continue
            if tok.type in _SKIP_TOKENS:
                continue
            count += 1
            code.update(range(tok.start[0], tok.end[0] + 1))
    except (tokenize.TokenError, IndentationError, SyntaxError):
        code.clear()
        comments.clear()
        count = 0
        for i, line in enumerate(text.split("\n"), start=1):
            stripped = line.strip()
            if stripped.startswith("#"):
                comments.add(i)
            elif stripped:
                code.add(i)
                count += len(stripped.split())
    comment_only = frozenset(comments - code)
    return LineScan(count, frozenset(c for c in code if c <= total), comment_only, total)


def count_tokens(rec: MethodRecord) -> int:
    return scan_lines(rec).tokens


def _safe(fn: Callable[[], T], default: T) -> T:
    try:
        return fn()
    except Exception:  # noqa: BLE001
        return default


def compute_features(rec: MethodRecord) -> FeatureVector:
    """Feature vector for one extracted method. Never raises."""
    name = rec.name
    lowered = name.lower()
    scan = _safe(lambda: scan_lines(rec), LineScan(0, frozenset(), frozenset(), 1))
    func = _safe(rec.syntax, None)

    doc_lines: set[int] = set()
    if func is not None:
        doc = _docstring_node(func)
        if doc is not None:
            base = func.lineno
            doc_lines = set(range(doc.lineno - base + 1, doc.end_lineno - base + 2)) - {1}
    code_loc = len(scan.code_lines - doc_lines)

    docstring = rec.docstring
    if docstring is None and func is not None:
        docstring = ast.get_docstring(func, clean=False)
    body = list(_body_nodes(func)) if func is not None else []
    calls = [n for n in body if isinstance(n, ast.Call)]
    dunder = bool(_DUNDER.match(name))

    return FeatureVector(
        code_loc=code_loc,
        char_length=len(rec.source_text),
        tokens=scan.tokens,
        docstring_words=len(docstring.split()) if docstring else 0,
        method_name_words=split_name_words(name),
        is_getter=bool(re.match(r"get", name, re.IGNORECASE)),
        is_setter=bool(re.match(r"set", name, re.IGNORECASE)),
        is_IsHas=bool(re.match(r"(is|has)", name, re.IGNORECASE)),
        is_test="test" in lowered,
        is_in_test_code="test" in lowered or "test" in rec.identity.file_path.lower(),
        is_private=name.startswith("_") and not dunder,
        is_dunder_method=dunder,
        has_return=any(isinstance(n, ast.Return) and n.value is not None for n in body),
        param_count=_safe(lambda: count_params(func), 0),
        number_of_variable=_safe(lambda: count_variables(func), 0),
        call_expression_count=len(calls),
        number_of_print=sum(
            1 for c in calls if isinstance(c.func, ast.Name) and c.func.id == "print"
        ),
        comment_ratio=len(scan.comment_lines) / scan.total_lines if scan.total_lines else 0.0,
        cyclomatic_complexity=cyclomatic_complexity(rec),
        halstead_volume=halstead_volume(rec),
        max_nesting_depth=_safe(lambda: max_nesting_depth(func), 0),
        uses_try_except=any(isinstance(n, ast.Try) for n in body),
        uses_constants=any(
            isinstance(n, ast.Name) and _CONSTANT_NAME.match(n.id) for n in body
        ),
    )
