"""Skill artifacts: manifest parsing, discovery, mode and complexity."""

from __future__ import annotations

import enum
import os
import stat
from dataclasses import dataclass, field
from pathlib import Path

from .config import Config, default_config
from .errors import (
    EmptyFile,
    MissingFrontmatter,
    MissingRequiredField,
    NoManifest,
    UnclassifiableMode,
    UnreadableFile,
)

FRONTMATTER_DELIM = "---"
REQUIRED_FIELDS = ("name", "description")


class Category(enum.IntEnum):
    EvidenceInsight = 1
    ProtocolDesign = 2
    DataAnalysis = 3
    AcademicWriting = 4
    Other = 5

    @classmethod
    def parse(cls, value: "Category | int | str") -> "Category":
        if isinstance(value, Category):
            return value
        if isinstance(value, int):
            return cls(value)
        text = str(value).strip()
        if text.isdigit():
            return cls(int(text))
        key = text.replace("-", "").replace("_", "").replace(" ", "").lower()
        for member in cls:
            if member.name.lower() == key:
                return member
        raise ValueError(f"unknown category {value!r}")

    @property
    def label(self) -> str:
        return {
            1: "Evidence Insight",
            2: "Protocol Design",
            3: "Data Analysis",
            4: "Academic Writing",
            5: "Other",
        }[self.value]


class ExecutionMode(str, enum.Enum):
    A = "A"  # prompt-only
    B = "B"  # script-based
    D = "D"  # script plus external API


class ComplexityTier(str, enum.Enum):
    Simple = "Simple"
    Moderate = "Moderate"
    Complex = "Complex"

    @property
    def dynamic_test_count(self) -> int:
        return _TEST_COUNTS[self]

    @property
    def order(self) -> int:
        return list(ComplexityTier).index(self)


_TEST_COUNTS = {ComplexityTier.Simple: 3, ComplexityTier.Moderate: 5, ComplexityTier.Complex: 7}


@dataclass(frozen=True)
class SkillManifest:
    name: str
    description: str
    declared_inputs: tuple[str, ...]
    declared_outputs: tuple[tuple[str, str | None], ...]
    body: str
    frontmatter_raw: dict[str, str] = field(hash=False)

    @property
    def output_names(self) -> list[str]:
        seen: list[str] = []
        for name, _ in self.declared_outputs:
            if name not in seen:
                seen.append(name)
        return seen

    def output_type_conflicts(self) -> dict[str, list[str]]:
        """Output names declared more than once with different types."""
        types: dict[str, list[str]] = {}
        for name, typ in self.declared_outputs:
            if typ is None:
                continue
            types.setdefault(name, [])
            if typ not in types[name]:
                types[name].append(typ)
        return {name: t for name, t in types.items() if len(t) > 1}


@dataclass(frozen=True)
class FileRecord:
    path: str  # posix path relative to the skill root
    size: int
    dialect: str | None = None  # scripts only


@dataclass(frozen=True)
class ApiDeclaration:
    key: str
    value: str
    kind: str  # "endpoint" | "credential"


@dataclass
class SkillArtifact:
    skill_id: str
    root: Path
    manifest: SkillManifest | None
    manifest_text: str
    script_files: list[FileRecord]
    reference_files: list[FileRecord]
    api_declarations: list[ApiDeclaration]
    category: Category
    manifest_error: str | None = None
    directories: list[str] = field(default_factory=list)

    @property
    def frontmatter(self) -> dict[str, str]:
        if self.manifest is not None:
            return self.manifest.frontmatter_raw
        try:
            return split_frontmatter(self.manifest_text)[0]
        except MissingFrontmatter:
            return {}

    @property
    def body(self) -> str:
        if self.manifest is not None:
            return self.manifest.body
        try:
            return split_frontmatter(self.manifest_text)[1]
        except MissingFrontmatter:
            return self.manifest_text

    def read(self, rel: str) -> str:
        try:
            return (self.root / rel).read_text(encoding="utf-8", errors="replace")
        except OSError as exc:
            raise UnreadableFile(self.root / rel) from exc

    def script_texts(self) -> list[tuple[FileRecord, str]]:
        return [(f, self.read(f.path)) for f in self.script_files]


# ---------------------------------------------------------------- manifest


def split_frontmatter(text: str) -> tuple[dict[str, str], str]:
    """Split ``text`` into (frontmatter mapping, body)."""
    lines = text.lstrip("﻿").splitlines(keepends=True)
    if not lines or lines[0].strip() != FRONTMATTER_DELIM:
        raise MissingFrontmatter("manifest does not start with a '---' frontmatter block")
    for end in range(1, len(lines)):
        if lines[end].strip() == FRONTMATTER_DELIM:
            break
    else:
        raise MissingFrontmatter("frontmatter block is not closed")
    raw: dict[str, str] = {}
    for line in lines[1:end]:
        stripped = line.strip()
        if not stripped or stripped.startswith("#") or line[:1].isspace():
            continue  # nested values are not supported
        key, sep, value = stripped.partition(":")
        if sep and key.strip():
            raw[key.strip()] = value.strip()
    return raw, "".join(lines[end + 1 :])


def _unquote(value: str) -> str:
    if len(value) >= 2 and value[0] == value[-1] and value[0] in "\"'":
        return value[1:-1]
    return value


def _split_list(value: str) -> list[str]:
    value = _unquote(value.strip())
    if value.startswith("[") and value.endswith("]"):
        value = value[1:-1]
    return [_unquote(v.strip()) for v in value.split(",") if v.strip()]


def parse_manifest(text: str) -> SkillManifest:
    if text == "":
        raise EmptyFile("manifest is empty")
    raw, body = split_frontmatter(text)
    for key in REQUIRED_FIELDS:
        if not _unquote(raw.get(key, "")).strip():
            raise MissingRequiredField(key)
    outputs: list[tuple[str, str | None]] = []
    for item in _split_list(raw.get("outputs", "")):
        name, sep, typ = item.partition(":")
        outputs.append((name.strip(), (typ.strip() or None) if sep else None))
    return SkillManifest(
        name=_unquote(raw["name"]).strip(),
        description=_unquote(raw["description"]).strip(),
        declared_inputs=tuple(_split_list(raw.get("inputs", ""))),
        declared_outputs=tuple(outputs),
        body=body,
        frontmatter_raw=dict(raw),
    )


def emit_manifest(manifest: SkillManifest) -> str:
    lines = [FRONTMATTER_DELIM]
    for key, value in manifest.frontmatter_raw.items():
        lines.append(f"{key}: {value}")
    lines.append(FRONTMATTER_DELIM)
    return "\n".join(lines) + "\n" + manifest.body


# ---------------------------------------------------------------- discovery

_SKIP_DIRS = {"__pycache__", ".git", ".hg", ".svn"}


def _dialect_for(path: Path, config: Config) -> str | None:
    ext_map = {k.lower(): v for k, v in config.get_map("artifact", "script_extensions").items()}
    dialect = ext_map.get(path.suffix.lower())
    if dialect:
        return dialect
    try:
        with path.open("rb") as fh:
            head = fh.readline(256)
    except OSError as exc:
        raise UnreadableFile(path) from exc
    if head.startswith(b"#!"):
        interp = head[2:].decode("utf-8", "replace").strip().split()
        words = [os.path.basename(w) for w in interp]
        if words and words[0] == "env" and len(words) > 1:
            words = words[1:]
        name = words[0].lower() if words else ""
        for prefix, tag in config.get_map("artifact", "shebang_dialects").items():
            if name.startswith(prefix):
                return tag
        return "unknown"
    if path.stat().st_mode & (stat.S_IXUSR | stat.S_IXGRP | stat.S_IXOTH):
        return "unknown"
    return None


def discover_skill(
    path: str | Path, category: Category | int | str, config: Config | None = None
) -> SkillArtifact:
    config = config or default_config()
    root = Path(path)
    manifest_name = config.get("artifact", "manifest_name")
    manifest_path = root / manifest_name
    if not root.is_dir() or not manifest_path.is_file():
        raise NoManifest(f"{root} has no {manifest_name}")
    try:
        text = manifest_path.read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise UnreadableFile(manifest_path) from exc

    manifest: SkillManifest | None = None
    error: str | None = None
    try:
        manifest = parse_manifest(text)
    except (EmptyFile, MissingFrontmatter, MissingRequiredField) as exc:
        error = f"{type(exc).__name__}: {exc}"

    scripts: list[FileRecord] = []
    refs: list[FileRecord] = []
    dirs: list[str] = []
    for dirpath, dirnames, filenames in os.walk(root):
        dirnames[:] = sorted(d for d in dirnames if d not in _SKIP_DIRS)
        here = Path(dirpath)
        for d in dirnames:
            dirs.append((here / d).relative_to(root).as_posix())
        for name in sorted(filenames):
            full = here / name
            if not full.is_file() or full.is_symlink():
                continue
            rel = full.relative_to(root).as_posix()
            if rel == manifest_name:
                continue
            try:
                size = full.stat().st_size
            except OSError as exc:
                raise UnreadableFile(full) from exc
            dialect = _dialect_for(full, config)
            if dialect is None:
                refs.append(FileRecord(rel, size))
            else:
                scripts.append(FileRecord(rel, size, dialect))

    raw = manifest.frontmatter_raw if manifest else _lenient_frontmatter(text)
    apis: list[ApiDeclaration] = []
    for key in config.get_list("artifact", "api_keys"):
        for value in _split_list(raw.get(key, "")):
            kind = "credential" if "env" in key or "credential" in key else "endpoint"
            apis.append(ApiDeclaration(key, value, kind))

    return SkillArtifact(
        skill_id=root.resolve().name,
        root=root,
        manifest=manifest,
        manifest_text=text,
        script_files=scripts,
        reference_files=refs,
        api_declarations=apis,
        category=Category.parse(category),
        manifest_error=error,
        directories=dirs,
    )


def _lenient_frontmatter(text: str) -> dict[str, str]:
    try:
        return split_frontmatter(text)[0]
    except MissingFrontmatter:
        return {}


def manifest_category(path: str | Path, config: Config | None = None) -> Category | None:
    """Category named by the manifest's ``category`` key, if any."""
    config = config or default_config()
    try:
        text = (Path(path) / config.get("artifact", "manifest_name")).read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError):
        return None
    value = _lenient_frontmatter(text).get("category")
    if not value:
        return None
    try:
        return Category.parse(_unquote(value))
    except ValueError:
        return None


# ---------------------------------------------------------------- mode / tier


def classify_mode(artifact: SkillArtifact) -> ExecutionMode:
    has_scripts = bool(artifact.script_files)
    has_apis = bool(artifact.api_declarations)
    if not has_scripts and not has_apis:
        return ExecutionMode.A
    if has_scripts and not has_apis:
        return ExecutionMode.B
    if has_scripts and has_apis:
        return ExecutionMode.D
    raise UnclassifiableMode(
        f"{artifact.skill_id}: API declarations without any script (no such execution mode)"
    )


def branching_depth(body: str, config: Config | None = None) -> int:
    config = config or default_config()
    patterns = config.get_patterns("complexity", "branch_patterns")
    return sum(1 for line in body.splitlines() if any(p.search(line) for p in patterns))


def complexity_features(artifact: SkillArtifact, config: Config | None = None) -> tuple[int, int, int]:
    """(reference file count, manifest word count, branching depth)."""
    return (
        len(artifact.reference_files),
        len(artifact.manifest_text.split()),
        branching_depth(artifact.body, config),
    )


def tier_for(references: int, words: int, depth: int, config: Config | None = None) -> ComplexityTier:
    config = config or default_config()
    c = "complexity"
    if (
        references >= config.get_int(c, "complex_min_references")
        or words >= config.get_int(c, "complex_min_words")
        or depth >= config.get_int(c, "complex_min_depth")
    ):
        return ComplexityTier.Complex
    if (
        references <= config.get_int(c, "simple_max_references")
        and words < config.get_int(c, "simple_words_below")
        and depth <= config.get_int(c, "simple_max_depth")
    ):
        return ComplexityTier.Simple
    return ComplexityTier.Moderate


def estimate_complexity(artifact: SkillArtifact, config: Config | None = None) -> ComplexityTier:
    return tier_for(*complexity_features(artifact, config), config=config)
