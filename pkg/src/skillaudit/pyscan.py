"""AST helpers for scanning Python scripts."""

from __future__ import annotations

import ast
from dataclasses import dataclass


@dataclass(frozen=True)
class CallSite:
    qualname: str
    line: int
    node: ast.Call


class _Aliases(ast.NodeVisitor):
    def __init__(self):
        self.names: dict[str, str] = {}

    def visit_Import(self, node: ast.Import):
        for a in node.names:
            if a.asname:
                self.names[a.asname] = a.name
            else:
                top = a.name.split(".")[0]
                self.names[top] = top

    def visit_ImportFrom(self, node: ast.ImportFrom):
        if node.level or not node.module:
            return
        for a in node.names:
            self.names[a.asname or a.name] = f"{node.module}.{a.name}"


def import_aliases(tree: ast.AST) -> dict[str, str]:
    v = _Aliases()
    v.visit(tree)
    return v.names


def imported_modules(tree: ast.AST) -> list[tuple[str, int]]:
    """Top-level package names of absolute imports with their line numbers."""
    out = []
    for node in ast.walk(tree):
        if isinstance(node, ast.Import):
            out.extend((a.name.split(".")[0], node.lineno) for a in node.names)
        elif isinstance(node, ast.ImportFrom) and not node.level and node.module:
            out.append((node.module.split(".")[0], node.lineno))
    return out


def dotted(expr: ast.AST) -> str | None:
    parts = []
    while isinstance(expr, ast.Attribute):
        parts.append(expr.attr)
        expr = expr.value
    if isinstance(expr, ast.Name):
        parts.append(expr.id)
        return ".".join(reversed(parts))
    return None


def qualify(name: str, aliases: dict[str, str]) -> str:
    head, _, rest = name.partition(".")
    base = aliases.get(head, head)
    return f"{base}.{rest}" if rest else base


def calls(tree: ast.AST, aliases: dict[str, str] | None = None) -> list[CallSite]:
    aliases = import_aliases(tree) if aliases is None else aliases
    out = []
    for node in ast.walk(tree):
        if isinstance(node, ast.Call):
            name = dotted(node.func)
            if name:
                out.append(CallSite(qualify(name, aliases), node.lineno, node))
    out.sort(key=lambda c: (c.line, c.node.col_offset))
    return out


def is_literal(node: ast.AST) -> bool:
    """True for constants and containers built only from constants."""
    if isinstance(node, ast.Constant):
        return True
    if isinstance(node, (ast.Tuple, ast.List, ast.Set)):
        return all(is_literal(e) for e in node.elts)
    if isinstance(node, ast.Dict):
        return all(k is not None and is_literal(k) for k in node.keys) and all(is_literal(v) for v in node.values)
    return False


def contains_call_to(node: ast.AST, names: set[str], aliases: dict[str, str]) -> bool:
    for sub in ast.walk(node):
        if isinstance(sub, ast.Call):
            name = dotted(sub.func)
            if name and qualify(name, aliases) in names:
                return True
    return False


_EXIT_CALLS = {"sys.exit", "exit", "quit", "os._exit", "os.abort"}


def _exits_loop(body: list[ast.stmt], aliases: dict[str, str]) -> bool:
    stack: list[tuple[ast.AST, bool]] = [(stmt, False) for stmt in body]
    while stack:
        node, nested = stack.pop()
        if isinstance(node, (ast.Return, ast.Raise)):
            return True
        if isinstance(node, ast.Break) and not nested:
            return True
        if isinstance(node, ast.Call):
            name = dotted(node.func)
            if name and qualify(name, aliases) in _EXIT_CALLS:
                return True
        if isinstance(node, (ast.FunctionDef, ast.AsyncFunctionDef, ast.ClassDef, ast.Lambda)):
            continue
        # a break inside a nested loop only leaves that loop
        inner = nested or isinstance(node, (ast.For, ast.AsyncFor, ast.While))
        stack.extend((child, inner) for child in ast.iter_child_nodes(node))
    return False


def unbounded_loops(tree: ast.AST, aliases: dict[str, str] | None = None) -> list[ast.While]:
    """``while <truthy constant>`` loops with no break/return/raise/exit."""
    aliases = import_aliases(tree) if aliases is None else aliases
    out = []
    for node in ast.walk(tree):
        if isinstance(node, ast.While) and isinstance(node.test, ast.Constant) and node.test.value:
            if not _exits_loop(node.body, aliases):
                out.append(node)
    out.sort(key=lambda n: n.lineno)
    return out


def defined_functions(tree: ast.AST) -> set[str]:
    return {
        n.name for n in ast.walk(tree) if isinstance(n, (ast.FunctionDef, ast.AsyncFunctionDef))
    }


def source_line(text: str, line: int) -> str:
    lines = text.splitlines()
    return lines[line - 1] if 0 < line <= len(lines) else ""
