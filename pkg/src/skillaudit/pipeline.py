"""End-to-end audit of one skill and batch audits over a directory of skills."""

from __future__ import annotations

import datetime as _dt
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from .config import Config, default_config
from .deps import declared_packages
from .gates import GateResult
from .harness import AssertionCheck, DynamicHarness, ExecutionRecord, run_assertions
from .judge import OutputJudge, RuleJudge
from .model import Category, SkillArtifact, classify_mode, discover_skill, estimate_complexity, manifest_category
from .report import MODE_A_CAVEAT, ZERO_TIMESTAMP, AuditReport, ReportMeta, build_report, emit_json, emit_markdown
from .research_gate import ResearchContext, load_reference_bundle, run_gate2
from .rubric import EffectiveRubric, effective_rubric
from .scoring import (
    DynamicScorecard,
    FinalAssessment,
    StaticScorecard,
    aggregate_dynamic,
    assign_disposition,
    compute_final,
    compute_static_score,
    weights_for_mode,
)
from .static_gate import run_gate1
from .errors import InputError

log = logging.getLogger(__name__)
REFERENCE_BUNDLE_NAME = "reference_bundle.txt"


@dataclass
class AuditSettings:
    config: Config = field(default_factory=default_config)
    judge: OutputJudge | None = None
    judge_name: str = "rule"
    framework_version: str | None = None
    seed: int = 42
    deterministic: bool = False
    reference_bundle: set[str] | None = None

    def __post_init__(self):
        if self.judge is None:
            self.judge = RuleJudge(self.config)
        if self.framework_version is None:
            self.framework_version = self.config.default_version


@dataclass
class AuditOutcome:
    """Everything the pipeline produced for one skill, before serialization."""

    artifact: SkillArtifact
    assessment: FinalAssessment
    report: AuditReport
    records: list[ExecutionRecord] = field(default_factory=list)
    rubric: EffectiveRubric | None = None
    static: StaticScorecard | None = None
    dynamic: list[DynamicScorecard] | None = None


def _now(deterministic: bool) -> str:
    if deterministic:
        return ZERO_TIMESTAMP
    return _dt.datetime.now(_dt.timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def resolve_category(path: Path, category: Category | int | str | None, config: Config) -> Category:
    if category is not None:
        return Category.parse(category)
    found = manifest_category(path, config)
    if found is None:
        raise InputError(f"{path}: no category given and none declared in the manifest")
    return found


def audit_skill(path: str | Path, category=None, settings: AuditSettings | None = None) -> AuditOutcome:
    """Gate 1, then (if it passes) the dynamic phase, gate 2 and scoring."""
    s = settings or AuditSettings()
    cfg = s.config
    started = _now(s.deterministic)
    path = Path(path)
    artifact = discover_skill(path, resolve_category(path, category, cfg), cfg)
    mode = classify_mode(artifact)
    tier = estimate_complexity(artifact, cfg)
    harness = DynamicHarness(cfg, s.seed, generator=s.judge)
    gate1 = run_gate1(artifact, harness, cfg)
    rubric = effective_rubric(artifact.category, mode, s.framework_version, cfg)
    flags = (MODE_A_CAVEAT,) if mode.value == "A" else ()
    meta_kw = dict(
        skill_id=artifact.skill_id,
        framework_version=f"skill-auditor@{s.framework_version}",
        judge=s.judge_name,
        category=int(artifact.category),
        mode=mode.value,
        tier=tier.value,
        n_inputs=tier.dynamic_test_count,
        seed=s.seed,
        notes=rubric.notes,
        overridden=rubric.overridden,
        flags=flags,
    )
    if not gate1.passed:
        assessment = FinalAssessment(None, None, None, assign_disposition(None, gate1, None), gate1, None, True)
        report = build_report(ReportMeta(started_at=started, finished_at=_now(s.deterministic), **meta_kw), assessment)
        return AuditOutcome(artifact, assessment, report, rubric=rubric)

    records = harness.records_for(artifact)
    ctx = ResearchContext(
        reference_bundle=s.reference_bundle, declared_packages=declared_packages(artifact, cfg), config=cfg
    )
    gate2 = run_gate2(records, artifact.category, ctx)
    static = compute_static_score(artifact, rubric, s.judge)
    cards = [s.judge.judge_output(r, rubric, artifact.manifest, artifact.skill_id) for r in records]
    assertions: dict[str, list[AssertionCheck]] = {r.input_id: run_assertions(r, artifact.manifest) for r in records}
    d_bar = aggregate_dynamic(cards)
    ws, wd = weights_for_mode(mode.value, cfg)
    final = compute_final(static.s_static, d_bar, ws, wd)
    assessment = FinalAssessment(
        static.s_static, d_bar, final, assign_disposition(final, gate1, gate2), gate1, gate2, not gate2.passed
    )
    report = build_report(
        ReportMeta(started_at=started, finished_at=_now(s.deterministic), **meta_kw),
        assessment, static, cards, assertions, rubric,
    )
    return AuditOutcome(artifact, assessment, report, records, rubric, static, cards)


def find_skills(root: str | Path, manifest_name: str = "SKILL.md") -> list[Path]:
    """Skill directories under ``root`` (any depth), sorted by path."""
    root = Path(root)
    return sorted(p.parent for p in root.rglob(manifest_name) if "__pycache__" not in p.parts)


def write_report(report: AuditReport, out_dir: str | Path) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    target = out / f"{report.skill_id}.json"
    target.write_bytes(emit_json(report))
    (out / f"{report.skill_id}.md").write_text(emit_markdown(report), encoding="utf-8")
    return target


def batch_audit(
    root: str | Path,
    out_dir: str | Path,
    settings: AuditSettings | None = None,
    workers: int | None = None,
    category=None,
) -> list[AuditOutcome]:
    """Audit every skill under ``root`` in parallel and write one report each.

    A ``reference_bundle.txt`` at the corpus root is used when the settings
    do not already carry a bundle.
    """
    s = settings or AuditSettings()
    root = Path(root)
    if s.reference_bundle is None and (root / REFERENCE_BUNDLE_NAME).is_file():
        s.reference_bundle = load_reference_bundle(root / REFERENCE_BUNDLE_NAME)
    workers = workers or s.config.get_int("batch", "workers")
    skills = find_skills(root, s.config.get("artifact", "manifest_name"))
    ids = [p.resolve().name for p in skills]
    if len(set(ids)) != len(ids):
        raise InputError("skill directory names must be unique within a batch")

    def one(path: Path) -> AuditOutcome:
        log.info("auditing %s", path)
        return audit_skill(path, category, s)

    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        outcomes = list(pool.map(one, skills))
    for o in outcomes:
        write_report(o.report, out_dir)
    return outcomes
