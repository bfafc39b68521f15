"""Audit reports: canonical JSON, Markdown rendering and optimization guidance."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from .gates import Evidence, GateResult, Verdict, VetoDimension, VetoFinding
from .harness import AssertionCheck
from .rubric import EffectiveRubric
from .scoring import Disposition, DynamicScorecard, FinalAssessment, StaticScorecard

ZERO_TIMESTAMP = "1970-01-01T00:00:00Z"
SCHEMA_VERSION = 1
GUIDANCE_THRESHOLD = 0.5
MODE_A_CAVEAT = "mode_a_generator_caveat"
NUMBERING_NOTE = (
    "Scene overrides 2.1, 2.3 and 5.2 are attached to the static criterion ids; "
    "the same numbers could also be read as dynamic Layer 1 items."
)

_VETO_REMEDIATION = {
    VetoDimension.T1: "Make the skill run cleanly: resolve dependency conflicts and fix the crashing inputs listed in the evidence.",
    VetoDimension.T2: "Align SKILL.md with the bundle: complete the frontmatter, keep output types consistent and implement every declared script or function.",
    VetoDimension.T3: "Seed every random number generator with a fixed constant and give every loop an exit condition.",
    VetoDimension.T4: "Remove dynamic code evaluation and any instruction that overrides the agent or exposes credentials.",
    VetoDimension.M1: "Cite only verifiable identifiers and report statistics exactly as computed; never present mock data as real results.",
    VetoDimension.M2: "Frame outputs as research support: avoid diagnostic conclusions and include the required medical disclaimer.",
    VetoDimension.M3: "Describe correlational findings as associations and reserve causal language for designs that support it.",
    VetoDimension.M4: "Make generated code parse and import only declared dependencies.",
}


def score(x: float) -> float:
    """One-decimal score representation used throughout reports."""
    return round(float(x), 1) + 0.0


def stat(x: float) -> float:
    """Nine-significant-digit representation for statistics and metrics."""
    x = float(x)
    if not math.isfinite(x):
        return x
    return float(f"{x:.9g}") + 0.0


@dataclass(frozen=True)
class CriterionResult:
    id: str
    group: str  # quality dimension (static) or "layer1"/"layer2" (dynamic)
    points: float
    max: float

    @property
    def fraction(self) -> float:
        return self.points / self.max if self.max else 0.0


@dataclass(frozen=True)
class DimensionSubtotal:
    dimension: str
    points: float
    max: float


@dataclass(frozen=True)
class StaticSection:
    s_static: float
    criteria: tuple[CriterionResult, ...]
    dimensions: tuple[DimensionSubtotal, ...]


@dataclass(frozen=True)
class DynamicSection:
    input_id: str
    layer1: float
    layer2: float
    total: float
    criteria: tuple[CriterionResult, ...]
    assertions: tuple[AssertionCheck, ...] = ()


@dataclass(frozen=True)
class GuidanceItem:
    target: str  # criterion id, veto dimension or "dimension:<name>"
    deficit: str
    remediation: str


@dataclass(frozen=True)
class AuditReport:
    skill_id: str
    framework_version: str
    judge: str
    started_at: str
    finished_at: str
    category: int
    mode: str
    tier: str
    n_inputs: int
    gate1: tuple[VetoFinding, ...]
    gate2: tuple[VetoFinding, ...] | None
    static: StaticSection | None
    dynamic: tuple[DynamicSection, ...] | None
    s_static: float | None
    d_bar: float | None
    final: float | None
    disposition: str
    vetoed: bool
    vetoed_at: int | None
    guidance: tuple[GuidanceItem, ...]
    rubric_notes: tuple[str, ...] = ()
    overridden: tuple[str, ...] = ()
    flags: tuple[str, ...] = ()
    seed: int = 42

    def __post_init__(self):
        if self.vetoed_at == 1 and (self.static is not None or self.dynamic is not None):
            raise ValueError("a gate-1 veto short-circuits scoring; no scorecards allowed")
        if self.disposition != Disposition.ProductionReady.name and not self.guidance:
            raise ValueError("guidance is required whenever the disposition is not ProductionReady")

    @property
    def disposition_enum(self) -> Disposition:
        return Disposition.parse(self.disposition)

    # ------------------------------------------------------------ dict form

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "skill_id": self.skill_id,
            "framework_version": self.framework_version,
            "judge": self.judge,
            "seed": self.seed,
            "timestamps": {"started_at": self.started_at, "finished_at": self.finished_at},
            "artifact": {"category": self.category, "mode": self.mode, "tier": self.tier, "n_inputs": self.n_inputs},
            "gates": {
                "gate1": [_finding_dict(f) for f in self.gate1],
                "gate2": None if self.gate2 is None else [_finding_dict(f) for f in self.gate2],
            },
            "static": None if self.static is None else {
                "s_static": self.static.s_static,
                "criteria": [_crit_dict(c) for c in self.static.criteria],
                "dimensions": [
                    {"dimension": d.dimension, "points": d.points, "max": d.max} for d in self.static.dimensions
                ],
            },
            "dynamic": None if self.dynamic is None else [
                {
                    "input_id": d.input_id,
                    "layer1": d.layer1,
                    "layer2": d.layer2,
                    "total": d.total,
                    "criteria": [_crit_dict(c) for c in d.criteria],
                    "assertions": [{"name": a.name, "passed": a.passed, "detail": a.detail} for a in d.assertions],
                }
                for d in self.dynamic
            ],
            "assessment": {
                "s_static": self.s_static,
                "d_bar": self.d_bar,
                "final": self.final,
                "disposition": self.disposition,
                "vetoed": self.vetoed,
                "vetoed_at": self.vetoed_at,
            },
            "guidance": [
                {"target": g.target, "deficit": g.deficit, "remediation": g.remediation} for g in self.guidance
            ],
            "rubric": {"notes": list(self.rubric_notes), "overridden": list(self.overridden)},
            "flags": list(self.flags),
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "AuditReport":
        st = d["static"]
        dyn = d["dynamic"]
        a = d["assessment"]
        return cls(
            skill_id=d["skill_id"],
            framework_version=d["framework_version"],
            judge=d["judge"],
            started_at=d["timestamps"]["started_at"],
            finished_at=d["timestamps"]["finished_at"],
            category=d["artifact"]["category"],
            mode=d["artifact"]["mode"],
            tier=d["artifact"]["tier"],
            n_inputs=d["artifact"]["n_inputs"],
            gate1=tuple(_finding_from(f) for f in d["gates"]["gate1"]),
            gate2=None if d["gates"]["gate2"] is None else tuple(_finding_from(f) for f in d["gates"]["gate2"]),
            static=None if st is None else StaticSection(
                st["s_static"],
                tuple(_crit_from(c) for c in st["criteria"]),
                tuple(DimensionSubtotal(x["dimension"], x["points"], x["max"]) for x in st["dimensions"]),
            ),
            dynamic=None if dyn is None else tuple(
                DynamicSection(
                    x["input_id"], x["layer1"], x["layer2"], x["total"],
                    tuple(_crit_from(c) for c in x["criteria"]),
                    tuple(AssertionCheck(c["name"], c["passed"], c["detail"]) for c in x["assertions"]),
                )
                for x in dyn
            ),
            s_static=a["s_static"],
            d_bar=a["d_bar"],
            final=a["final"],
            disposition=a["disposition"],
            vetoed=a["vetoed"],
            vetoed_at=a["vetoed_at"],
            guidance=tuple(GuidanceItem(g["target"], g["deficit"], g["remediation"]) for g in d["guidance"]),
            rubric_notes=tuple(d["rubric"]["notes"]),
            overridden=tuple(d["rubric"]["overridden"]),
            flags=tuple(d["flags"]),
            seed=d["seed"],
        )


def _evidence_dict(e: Evidence) -> dict:
    return {"rule": e.rule, "location": e.location, "line": e.line, "excerpt": e.excerpt}


def _finding_dict(f: VetoFinding) -> dict:
    return {
        "dimension": f.dimension.value,
        "name": f.dimension.display_name,
        "verdict": f.verdict.value,
        "evidence": [_evidence_dict(e) for e in f.evidence],
        "warnings": [_evidence_dict(e) for e in f.warnings],
        "metrics": dict(f.metrics),
        "note": f.note,
    }


def _finding_from(d: Mapping) -> VetoFinding:
    return VetoFinding(
        VetoDimension(d["dimension"]),
        Verdict(d["verdict"]),
        tuple(Evidence(**e) for e in d["evidence"]),
        dict(d["metrics"]),
        tuple(Evidence(**e) for e in d["warnings"]),
        d["note"],
    )


def _crit_dict(c: CriterionResult) -> dict:
    return {"id": c.id, "group": c.group, "points": c.points, "max": c.max}


def _crit_from(d: Mapping) -> CriterionResult:
    return CriterionResult(d["id"], d["group"], d["points"], d["max"])


def _normalise_finding(f: VetoFinding) -> VetoFinding:
    return VetoFinding(f.dimension, f.verdict, f.evidence, {k: stat(v) for k, v in f.metrics.items()}, f.warnings, f.note)


# ---------------------------------------------------------------- building


@dataclass(frozen=True)
class ReportMeta:
    skill_id: str
    framework_version: str
    judge: str
    category: int
    mode: str
    tier: str
    n_inputs: int
    started_at: str = ZERO_TIMESTAMP
    finished_at: str = ZERO_TIMESTAMP
    seed: int = 42
    notes: tuple[str, ...] = ()
    overridden: tuple[str, ...] = ()
    flags: tuple[str, ...] = field(default=())


def _static_section(card: StaticScorecard) -> StaticSection:
    crits = tuple(
        CriterionResult(cid, card.dimensions[cid], score(card.points[cid]), score(card.weights[cid]))
        for cid in card.scores
    )
    subs = tuple(DimensionSubtotal(d, score(p), score(m)) for d, (p, m) in card.dimension_subtotals.items())
    return StaticSection(score(card.s_static), crits, subs)


def _dynamic_section(card: DynamicScorecard, rubric: EffectiveRubric | None, checks: Sequence[AssertionCheck]) -> DynamicSection:
    maxima: dict[str, tuple[str, float]] = {}
    if rubric is not None:
        maxima.update({c.id: ("layer1", c.points) for c in rubric.layer1})
        maxima.update({c.id: ("layer2", c.points) for c in rubric.layer2})
    crits = tuple(
        CriterionResult(cid, maxima.get(cid, ("dynamic", pts))[0], score(pts), score(maxima.get(cid, ("", pts))[1]))
        for cid, pts in card.criteria.items()
    )
    l1, l2 = score(card.layer1), score(card.layer2)
    return DynamicSection(card.input_id, l1, l2, score(l1 + l2), crits, tuple(checks))


def derive_guidance(
    assessment: FinalAssessment,
    static: StaticSection | None,
    dynamic: Sequence[DynamicSection] | None,
    rubric: EffectiveRubric | None,
) -> list[GuidanceItem]:
    """Remediation items for weak criteria, every FAIL and the weakest dimension."""
    items: list[GuidanceItem] = []
    for gate in (assessment.gate1, assessment.gate2):
        if gate is None:
            continue
        for f in gate.findings:
            if f.failed:
                rules = sorted({e.rule for e in f.evidence})
                items.append(
                    GuidanceItem(
                        f.dimension.value,
                        f"{f.dimension.display_name} FAIL ({', '.join(rules)})",
                        _VETO_REMEDIATION[f.dimension],
                    )
                )
    texts: dict[str, str] = {}
    if rubric is not None:
        texts.update({c.id: f"{c.title}: {c.guidance}".strip(": ") for c in rubric.static})
        texts.update({c.id: f"{c.title}: {c.guidance}".strip(": ") for c in rubric.dynamic})
    if static is not None:
        for c in static.criteria:
            if c.fraction < GUIDANCE_THRESHOLD:
                items.append(GuidanceItem(c.id, f"{c.points}/{c.max} points ({c.group})", texts.get(c.id, f"Address criterion {c.id}.")))
    if dynamic:
        sums: dict[str, list[float]] = {}
        for d in dynamic:
            for c in d.criteria:
                acc = sums.setdefault(c.id, [0.0, 0.0])
                acc[0] += c.points
                acc[1] += c.max
        for cid, (pts, mx) in sums.items():
            if mx and pts / mx < GUIDANCE_THRESHOLD:
                items.append(
                    GuidanceItem(cid, f"mean {score(pts / len(dynamic))} of {score(mx / len(dynamic))} points across inputs",
                                 texts.get(cid, f"Address criterion {cid}."))
                )
    if assessment.disposition is not Disposition.ProductionReady:
        weakest = _weakest_dimension(static)
        if weakest is not None:
            d = weakest
            pct = 100.0 * d.points / d.max if d.max else 0.0
            items.append(
                GuidanceItem(
                    f"dimension:{d.dimension}",
                    f"lowest-scoring dimension at {score(pct)}%",
                    f"Prioritise {d.dimension}: it has the most headroom toward the next release band.",
                )
            )
        elif not items:
            items.append(GuidanceItem("final", "final score below the Production Ready band",
                                      "Raise static and dynamic scores toward 85 or above."))
    return items


def _weakest_dimension(static: StaticSection | None) -> DimensionSubtotal | None:
    if static is None or not static.dimensions:
        return None
    return min(static.dimensions, key=lambda d: (d.points / d.max if d.max else 0.0, d.dimension))


def build_report(
    meta: ReportMeta,
    assessment: FinalAssessment,
    static: StaticScorecard | None = None,
    dynamic: Sequence[DynamicScorecard] | None = None,
    assertions: Mapping[str, Sequence[AssertionCheck]] | None = None,
    rubric: EffectiveRubric | None = None,
) -> AuditReport:
    vetoed_at = None
    if not assessment.gate1.passed:
        vetoed_at = 1
        static, dynamic = None, None
    elif assessment.gate2 is not None and not assessment.gate2.passed:
        vetoed_at = 2
    st = _static_section(static) if static is not None else None
    dyn = None
    if dynamic is not None:
        assertions = assertions or {}
        dyn = tuple(_dynamic_section(c, rubric, assertions.get(c.input_id, ())) for c in dynamic)
    guidance = derive_guidance(assessment, st, dyn, rubric)
    opt = lambda v: None if v is None else score(v)  # noqa: E731
    return AuditReport(
        skill_id=meta.skill_id,
        framework_version=meta.framework_version,
        judge=meta.judge,
        started_at=meta.started_at,
        finished_at=meta.finished_at,
        category=int(meta.category),
        mode=meta.mode,
        tier=meta.tier,
        n_inputs=meta.n_inputs,
        gate1=tuple(_normalise_finding(f) for f in assessment.gate1.findings),
        gate2=None if assessment.gate2 is None else tuple(_normalise_finding(f) for f in assessment.gate2.findings),
        static=st,
        dynamic=dyn,
        s_static=opt(assessment.s_static),
        d_bar=opt(assessment.d_bar),
        final=opt(assessment.final),
        disposition=assessment.disposition.name,
        vetoed=assessment.vetoed,
        vetoed_at=vetoed_at,
        guidance=tuple(guidance),
        rubric_notes=tuple(meta.notes) + (NUMBERING_NOTE,) if meta.overridden else tuple(meta.notes),
        overridden=tuple(meta.overridden),
        flags=tuple(meta.flags),
        seed=meta.seed,
    )


# ---------------------------------------------------------------- emitters


def emit_json(report: AuditReport) -> bytes:
    """Canonical bytes: sorted keys, UTF-8, two-space indent, trailing newline."""
    text = json.dumps(report.to_dict(), sort_keys=True, ensure_ascii=False, indent=2, allow_nan=False)
    return (text + "\n").encode("utf-8")


def parse_json(data: bytes | str) -> AuditReport:
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    return AuditReport.from_dict(json.loads(data))


def _fmt(x: float | None) -> str:
    return "n/a" if x is None else f"{x:.1f}"


def emit_markdown(report: AuditReport) -> str:
    disp = report.disposition_enum
    badge = "REJECT (veto)" if report.vetoed else disp.label.upper()
    lines = [
        f"# Audit report: {report.skill_id}",
        "",
        f"> **Disposition: {badge}**",
        "",
        "## Summary",
        "",
        f"- Framework: {report.framework_version} (judge: {report.judge}, seed {report.seed})",
        f"- Category: {report.category}, mode {report.mode}, complexity {report.tier}, {report.n_inputs} test inputs",
        f"- Static score: {_fmt(report.s_static)}; dynamic mean: {_fmt(report.d_bar)}; final: {_fmt(report.final)}",
        f"- Audited: {report.started_at} to {report.finished_at}",
    ]
    if report.flags:
        lines.append(f"- Flags: {', '.join(report.flags)}")
    lines += ["", "## Gates", ""]
    for title, findings in (("Gate 1 (technical)", report.gate1), ("Gate 2 (research)", report.gate2)):
        lines.append(f"### {title}")
        lines.append("")
        if findings is None:
            lines += ["Not evaluated.", ""]
            continue
        lines += ["| Dimension | Verdict | Evidence |", "|---|---|---|"]
        for f in findings:
            ev = "; ".join(
                f"`{e.rule}` {e.location}{'' if e.line is None else ':' + str(e.line)}: {e.excerpt}" for e in f.evidence
            ) or f.note
            ev = ev.replace("|", "\\|")
            lines.append(f"| {f.dimension.value} {f.dimension.display_name} | {f.verdict.value} | {ev} |")
        warns = [e for f in findings for e in f.warnings]
        if warns:
            lines.append("")
            lines += [f"- WARN `{e.rule}` {e.location}: {e.excerpt}" for e in warns]
        lines.append("")
    lines += ["## Scores", ""]
    if report.static is None:
        lines += ["Scoring skipped (vetoed at gate 1).", ""]
    else:
        lines += ["| Dimension | Points | Max |", "|---|---|---|"]
        lines += [f"| {d.dimension} | {d.points:.1f} | {d.max:.1f} |" for d in report.static.dimensions]
        lines += ["", f"S_static = {report.static.s_static:.1f}", ""]
    if report.dynamic:
        lines += ["| Input | Layer 1 | Layer 2 | Total | Assertions passed |", "|---|---|---|---|---|"]
        for d in report.dynamic:
            ok = sum(a.passed for a in d.assertions)
            lines.append(f"| {d.input_id} | {d.layer1:.1f} | {d.layer2:.1f} | {d.total:.1f} | {ok}/{len(d.assertions)} |")
        lines.append("")
    lines += ["## Disposition", "", f"{disp.label}" + (" (vetoed at gate %d)" % report.vetoed_at if report.vetoed else ""), ""]
    if report.rubric_notes:
        lines += ["## Rubric notes", ""] + [f"- {n}" for n in report.rubric_notes] + [""]
    lines += ["## Guidance", ""]
    if report.guidance:
        lines += [f"- [ ] **{g.target}**: {g.deficit}. {g.remediation}" for g in report.guidance]
    else:
        lines.append("No remediation required.")
    return "\n".join(lines) + "\n"
