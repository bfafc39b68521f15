"""Veto Gate 1: structural hard-gate checks T1-T4."""

from __future__ import annotations

import ast
import re
from fractions import Fraction
from typing import Protocol, Sequence

from .config import Config, default_config
from .deps import collect_constraints, find_conflicts
from .errors import MissingSmokeRuns
from .gates import Evidence, GateResult, Verdict, VetoDimension, VetoFinding, finding
from .model import ExecutionMode, FileRecord, SkillArtifact, _split_list, classify_mode
from . import pyscan

GATE1_ORDER = (VetoDimension.T2, VetoDimension.T3, VetoDimension.T4, VetoDimension.T1)


class SmokeRunner(Protocol):
    def smoke_runs(self, artifact: SkillArtifact) -> list: ...


# ---------------------------------------------------------------- T2


def _function_defined(name: str, texts: list[tuple[FileRecord, str]]) -> bool:
    pats = [
        rf"^\s*(?:async\s+)?def\s+{re.escape(name)}\s*\(",
        rf"^\s*{re.escape(name)}\s*(?:<-|=)\s*function\b",
        rf"\bfunction\s+{re.escape(name)}\b",
        rf"^\s*{re.escape(name)}\s*\(\)\s*\{{",
    ]
    return any(re.search(p, text, re.MULTILINE) for _, text in texts for p in pats)


def check_t2(artifact: SkillArtifact, config: Config | None = None) -> VetoFinding:
    ev: list[Evidence] = []
    if artifact.manifest_error:
        ev.append(Evidence.make("T2.manifest_schema", "SKILL.md", 1, artifact.manifest_error))
    if artifact.manifest is not None:
        for name, types in sorted(artifact.manifest.output_type_conflicts().items()):
            ev.append(
                Evidence.make(
                    "T2.output_types", "SKILL.md", None, f"output '{name}' declared as {', '.join(types)}"
                )
            )
    fm = artifact.frontmatter
    script_paths = {f.path for f in artifact.script_files}
    entry = fm.get("entrypoint", "").strip().strip("\"'")
    if entry and entry not in script_paths:
        ev.append(
            Evidence.make("T2.entrypoint_missing", "SKILL.md", None, f"entrypoint '{entry}' is not a bundled script")
        )
    functions = _split_list(fm.get("functions", ""))
    if functions:
        texts = artifact.script_texts()
        if not texts:
            where = "scripts/" if "scripts" in artifact.directories else "SKILL.md"
            ev.append(
                Evidence.make(
                    "T2.unimplemented",
                    where,
                    None,
                    f"declared functions {', '.join(functions)} but no script implements them",
                )
            )
        else:
            for fn in functions:
                if not _function_defined(fn, texts):
                    ev.append(Evidence.make("T2.unimplemented", "SKILL.md", None, f"declared function '{fn}' not defined"))
    return finding(VetoDimension.T2, ev)


# ---------------------------------------------------------------- T3


def _family(qualname: str) -> str:
    for fam in ("numpy.random", "torch", "tensorflow.random", "random"):
        if qualname == fam or qualname.startswith(fam + "."):
            return fam
    return qualname.rsplit(".", 1)[0]


_GENERATOR_CTORS = {"numpy.random.default_rng", "numpy.random.RandomState", "random.Random", "numpy.random.Generator"}


def _seed_is_fixed(call: ast.Call, clocks: set[str], aliases: dict[str, str]) -> bool:
    args = list(call.args) + [k.value for k in call.keywords]
    if not args:
        return False
    arg = args[0]
    if isinstance(arg, ast.Constant) and arg.value is None:
        return False
    return not pyscan.contains_call_to(arg, clocks, aliases)


def _scan_python_t3(rec: FileRecord, text: str, config: Config) -> list[Evidence] | None:
    try:
        tree = ast.parse(text)
    except SyntaxError:
        return None
    aliases = pyscan.import_aliases(tree)
    random_calls = set(config.get_list("gate1", "random_calls")) | _GENERATOR_CTORS
    seed_calls = set(config.get_list("gate1", "seed_calls"))
    clocks = set(config.get_list("gate1", "clock_calls"))
    sites = pyscan.calls(tree, aliases)
    seeded: set[str] = set()
    ev: list[Evidence] = []
    for site in sites:
        if site.qualname in seed_calls:
            if _seed_is_fixed(site.node, clocks, aliases):
                seeded.add(_family(site.qualname))
            else:
                ev.append(
                    Evidence.make(
                        "T3.clock_seed", rec.path, site.line, pyscan.source_line(text, site.line)
                    )
                )
    for site in sites:
        if site.qualname in _GENERATOR_CTORS:
            if not _seed_is_fixed(site.node, clocks, aliases):
                ev.append(Evidence.make("T3.unseeded_rng", rec.path, site.line, pyscan.source_line(text, site.line)))
        elif site.qualname in random_calls and _family(site.qualname) not in seeded:
            ev.append(Evidence.make("T3.unseeded_rng", rec.path, site.line, pyscan.source_line(text, site.line)))
    for loop in pyscan.unbounded_loops(tree, aliases):
        ev.append(Evidence.make("T3.unbounded_loop", rec.path, loop.lineno, pyscan.source_line(text, loop.lineno)))
    return sorted(set(ev), key=lambda e: (e.line or 0, e.rule))


def _scan_text_t3(rec: FileRecord, text: str, config: Config) -> list[Evidence]:
    rand = config.get_patterns("gate1", "text_random_patterns")
    seeds = config.get_patterns("gate1", "text_seed_patterns")
    loops = config.get_patterns("gate1", "text_loop_patterns")
    exits = config.get_patterns("gate1", "text_exit_patterns")
    lines = text.splitlines()
    ev: list[Evidence] = []
    seeded = any(p.search(text) for p in seeds)
    for i, line in enumerate(lines, 1):
        code = line.split("#", 1)[0] if rec.dialect in ("shell", "r", "perl", "ruby") else line
        if not seeded and any(p.search(code) for p in rand):
            ev.append(Evidence.make("T3.unseeded_rng", rec.path, i, line))
        if any(p.search(code) for p in loops):
            rest = "\n".join(lines[i:])
            if not any(p.search(rest) for p in exits):
                ev.append(Evidence.make("T3.unbounded_loop", rec.path, i, line))
    return ev


def check_t3(artifact: SkillArtifact, config: Config | None = None) -> VetoFinding:
    config = config or default_config()
    ev: list[Evidence] = []
    for rec, text in artifact.script_texts():
        found = _scan_python_t3(rec, text, config) if rec.dialect == "python" else None
        ev.extend(found if found is not None else _scan_text_t3(rec, text, config))
    return finding(VetoDimension.T3, ev)


# ---------------------------------------------------------------- T4


def _scan_python_t4(rec: FileRecord, text: str, config: Config) -> list[Evidence] | None:
    try:
        tree = ast.parse(text)
    except SyntaxError:
        return None
    sinks = set(config.get_list("gate1", "eval_sinks"))
    ev = []
    for site in pyscan.calls(tree):
        if site.qualname in sinks:
            args = site.node.args
            if not args or not pyscan.is_literal(args[0]):
                ev.append(Evidence.make("T4.dynamic_eval", rec.path, site.line, pyscan.source_line(text, site.line)))
    return ev


def _scan_text_t4(rec: FileRecord, text: str, config: Config) -> list[Evidence]:
    pats = config.get_patterns("gate1", "text_eval_patterns")
    return [
        Evidence.make("T4.dynamic_eval", rec.path, i, line)
        for i, line in enumerate(text.splitlines(), 1)
        if any(p.search(line) for p in pats)
    ]


def check_t4(artifact: SkillArtifact, config: Config | None = None) -> VetoFinding:
    config = config or default_config()
    ev: list[Evidence] = []
    for rec, text in artifact.script_texts():
        found = _scan_python_t4(rec, text, config) if rec.dialect == "python" else None
        ev.extend(found if found is not None else _scan_text_t4(rec, text, config))
    injection = config.get_patterns("gate1", "injection_patterns")
    body_offset = artifact.manifest_text.count("\n") - artifact.body.count("\n")
    for i, line in enumerate(artifact.body.splitlines(), 1):
        for p in injection:
            if p.search(line):
                ev.append(Evidence.make("T4.prompt_injection", "SKILL.md", i + body_offset, line))
                break
    return finding(VetoDimension.T4, ev)


# ---------------------------------------------------------------- T1


def dependency_evidence(artifact: SkillArtifact, config: Config | None = None) -> list[Evidence]:
    constraints, _ = collect_constraints(artifact, config)
    ev = []
    for conflict in find_conflicts(constraints):
        first = conflict.constraints[0]
        ev.append(
            Evidence.make("T1.dependency_conflict", first.source, first.line or None, conflict.describe())
        )
    return ev


def check_t1(
    artifact: SkillArtifact,
    smoke: Sequence | None,
    config: Config | None = None,
    mode: ExecutionMode | None = None,
) -> VetoFinding:
    config = config or default_config()
    mode = mode or classify_mode(artifact)
    ev = dependency_evidence(artifact, config)
    if ev:
        return finding(VetoDimension.T1, ev, note="dependency resolution failed; smoke runs not attempted")
    if mode is ExecutionMode.A:
        return VetoFinding(VetoDimension.T1, Verdict.PASS, note="prompt-only skill; no smoke runs required")
    if not smoke:
        raise MissingSmokeRuns(f"{artifact.skill_id}: T1 needs smoke runs for mode {mode.value}")
    crashed = [r for r in smoke if r.crashed]
    rate = Fraction(len(crashed), len(smoke))
    limit = Fraction(str(config.get("gate1", "max_crash_rate")))
    metrics = {"crash_rate": float(rate), "crashes": float(len(crashed)), "runs": float(len(smoke))}
    if rate > limit:
        ev = [
            Evidence.make(
                "T1.crash_rate",
                r.input_id,
                None,
                f"crash rate {len(crashed)}/{len(smoke)} exceeds {float(limit):.2f}; exit={r.exit_status}; "
                + (r.stderr or r.transcript)[-120:],
            )
            for r in crashed
        ]
    return finding(VetoDimension.T1, ev, metrics=metrics)


def check_structural_dimension(
    artifact: SkillArtifact,
    dim: VetoDimension,
    smoke: Sequence | None = None,
    config: Config | None = None,
) -> VetoFinding:
    if dim is VetoDimension.T1:
        return check_t1(artifact, smoke, config)
    if dim is VetoDimension.T2:
        return check_t2(artifact, config)
    if dim is VetoDimension.T3:
        return check_t3(artifact, config)
    if dim is VetoDimension.T4:
        return check_t4(artifact, config)
    raise ValueError(f"{dim} is not a gate-1 dimension")


def run_gate1(artifact: SkillArtifact, harness: SmokeRunner | None, config: Config | None = None) -> GateResult:
    """Static scans first; smoke executions only when they all pass."""
    config = config or default_config()
    mode = classify_mode(artifact)
    findings = {
        VetoDimension.T2: check_t2(artifact, config),
        VetoDimension.T3: check_t3(artifact, config),
        VetoDimension.T4: check_t4(artifact, config),
    }
    static_failed = any(f.failed for f in findings.values())
    dep_ev = dependency_evidence(artifact, config)
    if dep_ev:
        findings[VetoDimension.T1] = finding(
            VetoDimension.T1, dep_ev, note="dependency resolution failed; smoke runs not attempted"
        )
    elif static_failed and mode is not ExecutionMode.A:
        findings[VetoDimension.T1] = VetoFinding(
            VetoDimension.T1, Verdict.NOT_APPLICABLE, note="smoke runs skipped after a static veto"
        )
    else:
        smoke = harness.smoke_runs(artifact) if mode is not ExecutionMode.A and harness is not None else None
        findings[VetoDimension.T1] = check_t1(artifact, smoke, config, mode)
    return GateResult(1, tuple(findings[d] for d in (VetoDimension.T1, VetoDimension.T2, VetoDimension.T3, VetoDimension.T4)))
