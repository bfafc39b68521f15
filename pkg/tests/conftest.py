"""Shared fixtures: tiny on-disk skills built from text."""

from __future__ import annotations

import textwrap
from pathlib import Path

import pytest

from skillaudit.config import default_config
from skillaudit.harness import ExecutionRecord

BASIC_FRONTMATTER = {
    "name": "demo",
    "description": "Summarises a research request into a structured markdown brief.",
    "category": "3",
    "version": "1.0.0",
    "outputs": "summary:markdown",
    "output_format": "markdown",
}

BASIC_SCRIPT = '''\
"""Echo a markdown summary for the request on stdin."""
import sys


def main():
    text = sys.stdin.read().strip()
    print("# Summary")
    print(f"summary: {text}")


if __name__ == "__main__":
    main()
'''


def write_skill(
    root: Path,
    name: str = "demo",
    frontmatter: dict | None = None,
    body: str = "# Demo\n\n## Instructions\n\n1. Read the request.\n",
    files: dict[str, str] | None = None,
) -> Path:
    """Create ``root/name`` with a SKILL.md and optional extra files."""
    d = root / name
    d.mkdir(parents=True)
    fm = dict(BASIC_FRONTMATTER if frontmatter is None else frontmatter)
    head = "".join(f"{k}: {v}\n" for k, v in fm.items())
    (d / "SKILL.md").write_text(f"---\n{head}---\n{textwrap.dedent(body)}", encoding="utf-8")
    for rel, text in (files or {}).items():
        p = d / rel
        p.parent.mkdir(parents=True, exist_ok=True)
        p.write_text(textwrap.dedent(text), encoding="utf-8")
    return d


def record(input_id: str = "i1", transcript: str = "", status: int | str = 0, **kw) -> ExecutionRecord:
    crashed = status != 0
    return ExecutionRecord(input_id, transcript, kw.pop("produced", ()), status, kw.pop("duration", 0.1), crashed, **kw)


@pytest.fixture
def config():
    return default_config()


@pytest.fixture
def skill_factory(tmp_path):
    def make(**kw):
        return write_skill(tmp_path, **kw)

    return make


# ---------------------------------------------------------------- acceptance reporting

ACCEPTANCE: dict[int, tuple[str, bool, float, str]] = {}


class _Criterion:
    def __init__(self, number: int, title: str, budget: float | None):
        self.number, self.title, self.budget = number, title, budget
        self.detail = ""

    def __enter__(self):
        import time

        self._start = time.perf_counter()
        return self

    def __exit__(self, exc_type, exc, tb):
        import time

        elapsed = time.perf_counter() - self._start
        ok = exc_type is None and (self.budget is None or elapsed <= self.budget)
        detail = self.detail if exc is None else f"{exc_type.__name__}: {str(exc).splitlines()[0] if str(exc) else ''}"
        if exc_type is None and not ok:
            detail = f"took {elapsed:.2f}s, budget {self.budget:.0f}s"
        ACCEPTANCE[self.number] = (self.title, ok, elapsed, detail)
        if exc_type is None and not ok:
            raise AssertionError(detail)
        return False


@pytest.fixture
def criterion():
    return _Criterion


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        title, ok, elapsed, detail = ACCEPTANCE[n]
        line = f"criterion {n:>2} {'PASS' if ok else 'FAIL'}  {title} ({elapsed:.2f}s)"
        terminalreporter.write_line(line + (f"  [{detail}]" if detail else ""))
