"""Rule-judge predicates referenced by the rubric config.

Static predicates look at the artifact; dynamic predicates look at one
execution record. Each returns True (full criterion points) or False (zero).
"""

from __future__ import annotations

import ast
import json
import re
import sys
from dataclasses import dataclass
from functools import cached_property
from typing import Callable

from . import pyscan
from .config import Config
from .deps import collect_constraints
from .harness import ExecutionRecord, _present
from .model import SkillArtifact, SkillManifest

_I = re.I | re.M


def _rx(pattern: str) -> re.Pattern[str]:
    return re.compile(pattern, _I)


HARD_STOP = _rx(
    r"sys\.exit\(\s*(?:[1-9]|[\"'])|raise\s+SystemExit\(\s*(?:[1-9]|[\"'])|^\s*exit\s+[1-9]"
    r"|\bstop\s*\(|process\.exit\(\s*[1-9]|raise\s+(?:ValueError|TypeError|KeyError)\b"
)
EXCEPTION_HANDLING = _rx(r"^\s*except\b|\btryCatch\s*\(|^\s*trap\s|\bcatch\s*\(")
FUZZY = _rx(r"difflib|get_close_matches|\bfuzz|auto-?correct|closest\s+match|did\s+you\s+mean")
GUIDANCE_WORDS = _rx(r"\b(?:please|try|check|make\s+sure|ensure|hint)\b")
ERROR_CONTEXT = _rx(r"error|raise|stderr|except|stop\(|exit")
ERROR_CODES = _rx(r"\berror_code\b|\berrorCode\b|\bERR_[A-Z_]+\b|[\"']E\d{3,4}[\"']")
SLEEP = _rx(r"\btime\.sleep\s*\(|\bSys\.sleep\s*\(|^\s*sleep\s+\d")
LIMITS = _rx(r"\blimit|\bmaximum\b|\bat\s+most\b|\bup\s+to\s+\d")
SECRET = re.compile(
    r"(?i)(?:api[_-]?key|secret|token|password)\s*[:=]\s*[\"'][A-Za-z0-9_\-]{8,}[\"']|\bsk-[A-Za-z0-9]{20,}|\bAKIA[0-9A-Z]{16}\b"
)
SHELL = _rx(r"shell\s*=\s*True|\bos\.system\s*\(|\bos\.popen\s*\(")
PROVENANCE = _rx(r"\bsource[sd]?\b|\bprovenance\b|retrieved\s+from|\breference")
STRUCTURED = _rx(r"\bjson\b|\bcsv\b|\btable\b|\btsv\b")
INSTALLS = _rx(r"pip\s+install|install\.packages\s*\(|npm\s+install|conda\s+install")
ABS_PATH = re.compile(r"[\"'](?:/(?:home|Users|usr|etc|tmp|var|opt|root|data|mnt)/|[A-Za-z]:\\\\)")
COMPAT = _rx(r"\bpython\s*\d|\brequires\b|compatib|tested\s+with|\bR\s*>=?\s*\d")
INSTRUCTIONS = _rx(r"^#+\s*(?:instructions|usage|workflow|procedure|steps|how\s+to)")
EXAMPLES = _rx(r"\bexamples?\b")


@dataclass
class StaticContext:
    artifact: SkillArtifact
    config: Config

    @cached_property
    def scripts(self) -> list[tuple[str, str, str | None]]:
        return [(rec.path, text, rec.dialect) for rec, text in self.artifact.script_texts()]

    @cached_property
    def script_text(self) -> str:
        return "\n".join(t for _, t, _ in self.scripts)

    @cached_property
    def trees(self) -> list[tuple[str, ast.AST]]:
        out = []
        for path, text, dialect in self.scripts:
            if dialect == "python":
                try:
                    out.append((path, ast.parse(text)))
                except SyntaxError:
                    pass
        return out

    @property
    def body(self) -> str:
        return self.artifact.body

    @property
    def fm(self) -> dict[str, str]:
        return self.artifact.frontmatter

    @property
    def manifest(self) -> SkillManifest | None:
        return self.artifact.manifest

    @cached_property
    def third_party_imports(self) -> set[str]:
        local = {p.rsplit("/", 1)[-1].rsplit(".", 1)[0] for p, _, _ in self.scripts}
        mods = set()
        for _, tree in self.trees:
            for mod, _ in pyscan.imported_modules(tree):
                if mod not in sys.stdlib_module_names and mod not in local and mod != "__future__":
                    mods.add(mod)
        return mods

    @cached_property
    def declared_import_names(self) -> set[str]:
        aliases = {k.lower(): v for k, v in self.config.get_map("gate2", "import_aliases").items()}
        names = set()
        for c in collect_constraints(self.artifact, self.config)[0]:
            names.add(c.package.replace("-", "_"))
            names.add(aliases.get(c.package, c.package).replace("-", "_"))
        return {n.lower() for n in names}


StaticPredicate = Callable[[StaticContext], bool]
STATIC: dict[str, StaticPredicate] = {}


def static(fn: StaticPredicate) -> StaticPredicate:
    STATIC[fn.__name__] = fn
    return fn


@static
def has_declared_outputs(c: StaticContext) -> bool:
    return bool(c.manifest and c.manifest.declared_outputs)


@static
def has_instructions_section(c: StaticContext) -> bool:
    return bool(INSTRUCTIONS.search(c.body))


@static
def has_examples(c: StaticContext) -> bool:
    return bool(EXAMPLES.search(c.body))


@static
def has_declared_inputs(c: StaticContext) -> bool:
    return bool(c.manifest and c.manifest.declared_inputs)


@static
def graceful_degradation(c: StaticContext) -> bool:
    if not c.scripts:
        return bool(re.search(r"\bfall\s*back|\bgracefully\b", c.body, re.I))
    return bool(EXCEPTION_HANDLING.search(c.script_text)) and not HARD_STOP.search(c.script_text)


@static
def hard_stop_on_invalid(c: StaticContext) -> bool:
    if not c.scripts:
        return bool(re.search(r"\b(?:halt|stop|abort)\b.{0,60}\b(?:invalid|malformed)", c.body, re.I | re.S))
    return bool(HARD_STOP.search(c.script_text))


@static
def dependencies_pinned(c: StaticContext) -> bool:
    constraints = collect_constraints(c.artifact, c.config)[0]
    if not constraints:
        return not c.third_party_imports
    return all(k.spec for k in constraints)


@static
def inline_recovery_guidance(c: StaticContext) -> bool:
    if not c.scripts:
        return bool(re.search(r"^#+\s*troubleshoot", c.body, _I))
    return any(ERROR_CONTEXT.search(line) and GUIDANCE_WORDS.search(line) for line in c.script_text.splitlines())


@static
def structured_error_codes(c: StaticContext) -> bool:
    if not c.scripts:
        return bool(re.search(r"\berror\s+codes?\b", c.body, re.I))
    return bool(ERROR_CODES.search(c.script_text))


@static
def no_sleep_calls(c: StaticContext) -> bool:
    return not SLEEP.search(c.script_text)


@static
def bounded_loops(c: StaticContext) -> bool:
    if any(pyscan.unbounded_loops(tree) for _, tree in c.trees):
        return False
    loops = c.config.get_patterns("gate1", "text_loop_patterns")
    return not any(p.search(t) for _, t, d in c.scripts if d != "python" for p in loops)


@static
def declares_limits(c: StaticContext) -> bool:
    return bool(LIMITS.search(c.body))


@static
def scripts_define_functions(c: StaticContext) -> bool:
    for _, text, dialect in c.scripts:
        if dialect == "python":
            if not re.search(r"^\s*def\s+\w+", text, re.M):
                return False
        elif not re.search(r"\bfunction\b|^\s*\w+\s*\(\)\s*\{|^\s*def\s", text, re.M):
            return False
    return True


@static
def has_version(c: StaticContext) -> bool:
    return bool(c.fm.get("version", "").strip())


@static
def scripts_documented(c: StaticContext) -> bool:
    for _, text, _ in c.scripts:
        has_comment = any(ln.strip().startswith(("#", "//")) and not ln.startswith("#!") for ln in text.splitlines())
        if not has_comment and '"""' not in text:
            return False
    return True


@static
def description_informative(c: StaticContext) -> bool:
    desc = c.manifest.description if c.manifest else ""
    return len(desc) >= 40 and len(desc.split()) >= 6


@static
def auto_corrects_inputs(c: StaticContext) -> bool:
    return bool(FUZZY.search(c.script_text) or FUZZY.search(c.body))


@static
def rejects_fuzzy_input(c: StaticContext) -> bool:
    return not auto_corrects_inputs(c)


@static
def documents_output_format(c: StaticContext) -> bool:
    return bool(c.fm.get("output_format")) or bool(re.search(r"^#+\s*output", c.body, _I))


@static
def no_hardcoded_secrets(c: StaticContext) -> bool:
    return not SECRET.search(c.script_text) and not SECRET.search(c.artifact.manifest_text)


@static
def no_shell_true(c: StaticContext) -> bool:
    return not SHELL.search(c.script_text)


@static
def records_provenance(c: StaticContext) -> bool:
    return bool(PROVENANCE.search(c.body) or PROVENANCE.search(c.script_text))


@static
def structured_output_declared(c: StaticContext) -> bool:
    fmt = c.fm.get("output_format", "").lower()
    return fmt in ("json", "csv", "tsv") or bool(STRUCTURED.search(c.body))


@static
def no_runtime_installs(c: StaticContext) -> bool:
    return not INSTALLS.search(c.script_text)


@static
def imports_declared(c: StaticContext) -> bool:
    return all(m.lower() in c.declared_import_names for m in c.third_party_imports)


@static
def no_absolute_paths(c: StaticContext) -> bool:
    return not ABS_PATH.search(c.script_text)


@static
def installable(c: StaticContext) -> bool:
    if not c.third_party_imports:
        return True
    return bool(collect_constraints(c.artifact, c.config)[0])


@static
def states_compatibility(c: StaticContext) -> bool:
    return bool(c.fm.get("compatibility") or c.fm.get("license") or COMPAT.search(c.body))


# ---------------------------------------------------------------- dynamic


@dataclass
class DynamicContext:
    record: ExecutionRecord
    manifest: SkillManifest | None
    config: Config

    @property
    def text(self) -> str:
        return self.record.transcript


DynamicPredicate = Callable[[DynamicContext], bool]
DYNAMIC: dict[str, DynamicPredicate] = {}


def dynamic(fn: DynamicPredicate) -> DynamicPredicate:
    DYNAMIC[fn.__name__] = fn
    return fn


def _matches(pattern: str, text: str) -> bool:
    return bool(re.search(pattern, text, _I))


@dynamic
def outputs_present(c: DynamicContext) -> bool:
    if not c.text.strip():
        return False
    names = c.manifest.output_names if c.manifest else []
    return all(_present(n, c.record) for n in names)


@dynamic
def clean_exit(c: DynamicContext) -> bool:
    return not c.record.crashed and not _matches(r"Traceback \(most recent call last\)|^error:", c.text)


@dynamic
def within_time_budget(c: DynamicContext) -> bool:
    return c.record.duration <= c.config.get_float("judge", "efficiency_budget_seconds")


@dynamic
def stays_in_scope(c: DynamicContext) -> bool:
    return bool(c.text.strip()) and not _matches(
        r"as an ai language model|i cannot help|i'?m unable to|lorem ipsum", c.text
    )


@dynamic
def documents_search_strategy(c: DynamicContext) -> bool:
    return _matches(r"pubmed|embase|cochrane|web of science|scopus|search (?:strategy|terms|string)", c.text)


@dynamic
def grades_evidence(c: DynamicContext) -> bool:
    return _matches(r"\bGRADE\b|risk of bias|certainty of (?:the )?evidence|level of evidence|quality of evidence", c.text)


@dynamic
def cites_identifiers(c: DynamicContext) -> bool:
    return _matches(r"\b10\.\d{4,9}/\S+|\bPMID:?\s*\d{4,9}", c.text)


@dynamic
def states_design(c: DynamicContext) -> bool:
    return _matches(
        r"randomi[sz]ed|\bcohort\b|case-control|cross-sectional|crossover|cluster|stepped-wedge|non-inferiority|study design",
        c.text,
    )


@dynamic
def plans_sample_size(c: DynamicContext) -> bool:
    return _matches(r"sample size|power calculation|statistical power|\bpower\b.{0,30}\d+\s*%", c.text)


@dynamic
def defines_endpoints(c: DynamicContext) -> bool:
    return _matches(r"primary (?:outcome|endpoint)", c.text)


def python_blocks(text: str) -> list[str]:
    return re.findall(r"```(?:python|py)[^\n]*\n(.*?)```", text, re.S | re.I)


@dynamic
def executable_code(c: DynamicContext) -> bool:
    if c.record.produced_files:
        return True
    for block in python_blocks(c.text):
        try:
            ast.parse(block)
            return True
        except SyntaxError:
            continue
    return False


@dynamic
def reports_methods(c: DynamicContext) -> bool:
    return _matches(
        r"t-test|wilcoxon|mann-whitney|regression|anova|chi-square|\bcox\b|kaplan-meier|fisher|deseq|edger|limma|"
        r"meta-analysis|random-effects|shannon|simpson|enrichment",
        c.text,
    )


@dynamic
def reports_statistics(c: DynamicContext) -> bool:
    return _matches(
        r"\bp\s*[=<]\s*0?\.\d|95\s*%\s*ci|confidence interval|hazard ratio|odds ratio|effect size|\bfdr\b",
        c.text,
    )


@dynamic
def formal_register(c: DynamicContext) -> bool:
    return bool(c.text.strip()) and not _matches(r"\b(?:gonna|wanna|kinda|lol|awesome|super cool)\b", c.text)


@dynamic
def has_manuscript_sections(c: DynamicContext) -> bool:
    heads = re.findall(
        r"^(?:#+\s*|\*\*)?(introduction|background|methods|results|discussion|conclusions?|abstract)\b",
        c.text,
        _I,
    )
    return len({h.lower() for h in heads}) >= 2


@dynamic
def has_references(c: DynamicContext) -> bool:
    return _matches(r"^#*\s*references\b|\[\d+\]|\bet al\.", c.text)


@dynamic
def structured_transcript(c: DynamicContext) -> bool:
    text = c.text.strip()
    try:
        json.loads(text)
        return True
    except ValueError:
        pass
    return _matches(r"^\|.*\|\s*$\n^\|[\s:|-]+\|\s*$", text) or len(re.findall(r"^#+\s", text, re.M)) >= 2


@dynamic
def includes_usage_notes(c: DynamicContext) -> bool:
    return _matches(r"\bnotes?\b|\bcaveats?\b|next steps|limitations|\busage\b", c.text)
