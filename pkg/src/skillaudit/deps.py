"""Offline dependency-conflict detection for bundled requirement files.

Every constraint on a package is turned into a version interval; a package
whose intervals have an empty intersection cannot be installed.
"""

from __future__ import annotations

import fnmatch
import re
from dataclasses import dataclass, field

from packaging.requirements import InvalidRequirement, Requirement
from packaging.utils import canonicalize_name
from packaging.version import InvalidVersion, Version

from .config import Config, default_config
from .model import SkillArtifact, _split_list


@dataclass(frozen=True)
class Constraint:
    package: str  # canonical name
    spec: str
    source: str  # file path or "SKILL.md"
    line: int


@dataclass
class Interval:
    low: Version | None = None
    low_inclusive: bool = True
    high: Version | None = None
    high_inclusive: bool = True
    excluded: set[Version] = field(default_factory=set)

    def intersect(self, other: "Interval") -> "Interval":
        out = Interval(excluded=self.excluded | other.excluded)
        out.low, out.low_inclusive = _tighter_low(
            (self.low, self.low_inclusive), (other.low, other.low_inclusive)
        )
        out.high, out.high_inclusive = _tighter_high(
            (self.high, self.high_inclusive), (other.high, other.high_inclusive)
        )
        return out

    def is_empty(self) -> bool:
        if self.low is None or self.high is None:
            return False
        if self.low > self.high:
            return True
        if self.low == self.high:
            return not (self.low_inclusive and self.high_inclusive) or self.low in self.excluded
        return False


def _tighter_low(a, b):
    if a[0] is None:
        return b
    if b[0] is None:
        return a
    if a[0] != b[0]:
        return a if a[0] > b[0] else b
    return a[0], a[1] and b[1]


def _tighter_high(a, b):
    if a[0] is None:
        return b
    if b[0] is None:
        return a
    if a[0] != b[0]:
        return a if a[0] < b[0] else b
    return a[0], a[1] and b[1]


def _bump(release: tuple[int, ...], keep: int) -> Version:
    head = list(release[:keep]) or [0]
    head[-1] += 1
    return Version(".".join(str(x) for x in head))


def interval_for(op: str, version: str) -> Interval:
    """Interval admitted by one PEP 440 clause such as ``>=1.2``."""
    if op in ("==", "!=") and version.endswith(".*"):
        base = Version(version[:-2])
        iv = Interval(low=base, high=_bump(base.release, len(base.release)), high_inclusive=False)
        return iv if op == "==" else Interval()  # wildcard exclusions are ignored
    v = Version(version)
    if op in ("==", "==="):
        return Interval(low=v, high=v)
    if op == "!=":
        return Interval(excluded={v})
    if op == ">=":
        return Interval(low=v)
    if op == ">":
        return Interval(low=v, low_inclusive=False)
    if op == "<=":
        return Interval(high=v)
    if op == "<":
        return Interval(high=v, high_inclusive=False)
    if op == "~=":
        keep = max(len(v.release) - 1, 1)
        return Interval(low=v, high=_bump(v.release, keep), high_inclusive=False)
    raise ValueError(f"unsupported operator {op}")


_COMMENT = re.compile(r"\s+#.*$")


def _requirement_lines(text: str):
    for lineno, line in enumerate(text.splitlines(), 1):
        line = _COMMENT.sub("", line).strip()
        if not line or line.startswith(("#", "-")):
            continue  # options such as -r / --index-url are not followed
        yield lineno, line


def collect_constraints(artifact: SkillArtifact, config: Config | None = None) -> tuple[list[Constraint], list[str]]:
    """All declared requirement constraints plus unparseable lines."""
    config = config or default_config()
    patterns = config.get_list("artifact", "dependency_files")
    constraints: list[Constraint] = []
    bad: list[str] = []

    def add(text: str, source: str, lineno: int) -> None:
        try:
            req = Requirement(text)
        except InvalidRequirement:
            bad.append(f"{source}:{lineno}: {text}")
            return
        constraints.append(Constraint(canonicalize_name(req.name), str(req.specifier), source, lineno))

    for key in config.get_list("artifact", "dependency_keys"):
        for item in _split_list(artifact.frontmatter.get(key, "")):
            add(item, "SKILL.md", 0)
    for rec in artifact.reference_files:
        name = rec.path.rsplit("/", 1)[-1]
        if any(fnmatch.fnmatch(name.lower(), p.lower()) for p in patterns):
            for lineno, line in _requirement_lines(artifact.read(rec.path)):
                add(line, rec.path, lineno)
    return constraints, bad


def declared_packages(artifact: SkillArtifact, config: Config | None = None) -> set[str]:
    return {c.package for c in collect_constraints(artifact, config)[0]}


@dataclass(frozen=True)
class Conflict:
    package: str
    constraints: tuple[Constraint, ...]

    def describe(self) -> str:
        parts = [f"{c.spec or '*'} ({c.source}:{c.line})" for c in self.constraints]
        return f"{self.package}: no version satisfies " + " and ".join(parts)


def find_conflicts(constraints: list[Constraint]) -> list[Conflict]:
    by_pkg: dict[str, list[Constraint]] = {}
    for c in constraints:
        by_pkg.setdefault(c.package, []).append(c)
    conflicts = []
    for pkg in sorted(by_pkg):
        merged = Interval()
        for c in by_pkg[pkg]:
            for clause in filter(None, (s.strip() for s in c.spec.split(","))):
                m = re.match(r"(===|==|!=|~=|>=|<=|>|<)\s*(.+)", clause)
                if not m:
                    continue
                try:
                    merged = merged.intersect(interval_for(m.group(1), m.group(2)))
                except InvalidVersion:
                    continue
        if merged.is_empty():
            conflicts.append(Conflict(pkg, tuple(by_pkg[pkg])))
    return conflicts
