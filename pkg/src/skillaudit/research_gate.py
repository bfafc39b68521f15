"""Veto Gate 2: scientific-integrity checks M1-M4 over dynamic outputs."""

from __future__ import annotations

import ast
import re
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

from .config import Config, default_config
from .gates import Evidence, GateResult, Verdict, VetoDimension, VetoFinding, finding
from .harness import ExecutionRecord
from .model import Category

# resolver(identifier) -> True (exists) / False (does not exist) / None (unknown)
Resolver = Callable[[str], "bool | None"]

_TRAILING = ".,;:)]}>'\""


def normalize_identifier(kind: str, value: str) -> str:
    value = value.strip().rstrip(_TRAILING)
    if kind == "doi":
        return "doi:" + value.lower()
    if kind == "pmid":
        return "pmid:" + re.sub(r"\D", "", value)
    return f"{kind}:{value.upper()}"


def load_reference_bundle(path: str | Path) -> set[str]:
    """One identifier per line: a DOI, ``PMID:123`` or an NCT number."""
    ids = set()
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if line.lower().startswith("doi:"):
            line = line[4:].strip()
        if line.lower().startswith("pmid"):
            ids.add(normalize_identifier("pmid", line))
        elif line.upper().startswith("NCT"):
            ids.add(normalize_identifier("nct", line))
        else:
            ids.add(normalize_identifier("doi", line))
    return ids


@dataclass
class ResearchContext:
    """Run-level inputs for gate 2 beyond the transcripts themselves."""

    reference_bundle: set[str] | None = None
    declared_packages: set[str] = field(default_factory=set)
    resolver: Resolver | None = None
    config: Config = field(default_factory=default_config)


def _line_of(text: str, pos: int) -> int:
    return text.count("\n", 0, pos) + 1


def _identifiers(text: str, config: Config):
    for kind, pattern in config.get_map("gate2", "identifier_patterns").items():
        for m in re.finditer(pattern, text, re.I):
            raw = m.group(1) if m.groups() else m.group(0)
            yield kind, raw.rstrip(_TRAILING), m.start()


def check_m1(records: Sequence[ExecutionRecord], ctx: ResearchContext) -> VetoFinding:
    cfg = ctx.config
    doi_ok = re.compile(cfg.get("gate2", "doi_syntax"))
    p_re = re.compile(cfg.get("gate2", "pvalue_pattern"), re.I)
    n_re = re.compile(cfg.get("gate2", "total_sample_size_pattern"), re.I)
    ev: list[Evidence] = []
    warn: list[Evidence] = []
    for rec in records:
        text = rec.transcript
        for kind, raw, pos in _identifiers(text, cfg):
            line = _line_of(text, pos)
            if kind == "doi" and not doi_ok.match(raw):
                ev.append(Evidence.make("M1.invalid_identifier", rec.input_id, line, raw))
                continue
            norm = normalize_identifier(kind, raw)
            if ctx.reference_bundle is not None:
                if norm not in ctx.reference_bundle:
                    ev.append(Evidence.make("M1.unknown_identifier", rec.input_id, line, f"{raw} not in reference bundle"))
                continue
            resolved = ctx.resolver(norm) if ctx.resolver else None
            if resolved is False:
                ev.append(Evidence.make("M1.unknown_identifier", rec.input_id, line, f"{raw} does not resolve"))
            elif resolved is None:
                warn.append(Evidence.make("M1.unverified_identifier", rec.input_id, line, raw))
        for m in p_re.finditer(text):
            try:
                value = float(m.group(1))
            except ValueError:
                continue
            if value <= 0.0 or value > 1.0:
                ev.append(Evidence.make("M1.impossible_pvalue", rec.input_id, _line_of(text, m.start()), m.group(0)))
        sizes = {}
        for m in n_re.finditer(text):
            digits = m.group(1).replace(",", "")
            if digits.isdigit():
                sizes.setdefault(int(digits), m.start())
        if len(sizes) > 1:
            first = min(sizes.values())
            ev.append(
                Evidence.make(
                    "M1.inconsistent_sample_size",
                    rec.input_id,
                    _line_of(text, first),
                    "total sample size reported as " + ", ".join(str(n) for n in sorted(sizes)),
                )
            )
    return finding(VetoDimension.M1, ev, warnings=tuple(warn))


def check_m2(records: Sequence[ExecutionRecord], category: Category, ctx: ResearchContext) -> VetoFinding:
    cfg = ctx.config
    diagnosis = cfg.get_patterns("gate2", "diagnosis_patterns")
    disclaimers = cfg.get_patterns("gate2", "disclaimer_patterns")
    needs_disclaimer = str(category.value) in cfg.get_list("gate2", "disclaimer_categories")
    ev: list[Evidence] = []
    for rec in records:
        text = rec.transcript
        for p in diagnosis:
            m = p.search(text)
            if m:
                ev.append(Evidence.make("M2.diagnostic_conclusion", rec.input_id, _line_of(text, m.start()),
                                        text[m.start(): m.start() + 160]))
                break
        if needs_disclaimer and text.strip() and not any(p.search(text) for p in disclaimers):
            ev.append(Evidence.make("M2.missing_disclaimer", rec.input_id, None, "no medical/research-use disclaimer in output"))
    return finding(VetoDimension.M2, ev)


_SENTENCE = re.compile(r"(?<=[.!?])\s+|\n+")
_NEGATION = re.compile(r"\b(?:not|cannot|no\s+evidence|does\s+not|do\s+not)\b", re.I)


def check_m3(records: Sequence[ExecutionRecord], ctx: ResearchContext) -> VetoFinding:
    causal = ctx.config.get_patterns("gate2", "causal_patterns")
    correlational = ctx.config.get_patterns("gate2", "correlational_patterns")
    ev: list[Evidence] = []
    for rec in records:
        text = rec.transcript
        pos = 0
        for sentence in _SENTENCE.split(text):
            start = text.find(sentence, pos)
            pos = max(start, pos)
            if _NEGATION.search(sentence):
                continue
            if any(p.search(sentence) for p in correlational) and any(p.search(sentence) for p in causal):
                ev.append(Evidence.make("M3.causal_from_correlation", rec.input_id, _line_of(text, pos), sentence))
    return finding(VetoDimension.M3, ev)


def code_blocks(text: str, languages: list[str]) -> list[tuple[str, str, int]]:
    """Fenced code blocks as (language, code, line of the opening fence)."""
    out = []
    langs = {l.lower() for l in languages}
    for m in re.finditer(r"^```[ \t]*([A-Za-z0-9_+-]*)[^\n]*\n(.*?)^```", text, re.S | re.M):
        lang = m.group(1).lower()
        if lang in langs:
            out.append((lang, m.group(2), _line_of(text, m.start())))
    return out


def _import_names(packages: set[str], config: Config) -> set[str]:
    aliases = {k.lower(): v for k, v in config.get_map("gate2", "import_aliases").items()}
    names = set()
    for pkg in packages:
        names.add(pkg.replace("-", "_").lower())
        if pkg.lower() in aliases:
            names.add(aliases[pkg.lower()].lower())
    return names


def check_m4(records: Sequence[ExecutionRecord], category: Category, ctx: ResearchContext) -> VetoFinding:
    cfg = ctx.config
    langs = cfg.get_list("gate2", "code_fence_languages")
    allowed = _import_names(ctx.declared_packages, cfg)
    ev: list[Evidence] = []
    n_blocks = 0
    for rec in records:
        for lang, code, line in code_blocks(rec.transcript, langs):
            n_blocks += 1
            if lang not in ("python", "py"):
                continue
            try:
                tree = ast.parse(code)
            except SyntaxError as exc:
                ev.append(Evidence.make("M4.syntax_error", rec.input_id, line + (exc.lineno or 0), f"{exc.msg}: {exc.text or ''}"))
                continue
            for node in ast.walk(tree):
                mods = []
                if isinstance(node, ast.Import):
                    mods = [a.name.split(".")[0] for a in node.names]
                elif isinstance(node, ast.ImportFrom) and not node.level and node.module:
                    mods = [node.module.split(".")[0]]
                for mod in mods:
                    if mod not in sys.stdlib_module_names and mod.lower() not in allowed:
                        ev.append(Evidence.make("M4.undeclared_dependency", rec.input_id, line + node.lineno,
                                                f"import {mod} is not a declared dependency"))
    if n_blocks == 0 and category in (Category.EvidenceInsight, Category.AcademicWriting):
        return VetoFinding(VetoDimension.M4, Verdict.NOT_APPLICABLE, note="no generated code")
    return finding(VetoDimension.M4, ev)


def check_research_dimension(
    records: Sequence[ExecutionRecord],
    category: Category,
    dim: VetoDimension,
    ctx: ResearchContext | None = None,
) -> VetoFinding:
    ctx = ctx or ResearchContext()
    if dim is VetoDimension.M1:
        return check_m1(records, ctx)
    if dim is VetoDimension.M2:
        return check_m2(records, category, ctx)
    if dim is VetoDimension.M3:
        return check_m3(records, ctx)
    if dim is VetoDimension.M4:
        return check_m4(records, category, ctx)
    raise ValueError(f"{dim} is not a gate-2 dimension")


def run_gate2(
    records: Sequence[ExecutionRecord], category: Category, ctx: ResearchContext | None = None
) -> GateResult:
    dims = (VetoDimension.M1, VetoDimension.M2, VetoDimension.M3, VetoDimension.M4)
    if category is Category.Other:
        return GateResult(
            2, tuple(VetoFinding(d, Verdict.NOT_APPLICABLE, note="gate 2 covers categories 1-4 only") for d in dims)
        )
    return GateResult(2, tuple(check_research_dimension(records, category, d, ctx) for d in dims))
