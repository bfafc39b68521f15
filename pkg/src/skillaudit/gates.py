"""Veto dimensions, findings and gate results shared by both veto gates."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

EXCERPT_LIMIT = 200


class VetoDimension(str, enum.Enum):
    T1 = "T1"
    T2 = "T2"
    T3 = "T3"
    T4 = "T4"
    M1 = "M1"
    M2 = "M2"
    M3 = "M3"
    M4 = "M4"

    @property
    def display_name(self) -> str:
        return _NAMES[self]

    @property
    def gate(self) -> int:
        return 1 if self.value.startswith("T") else 2


_NAMES = {
    VetoDimension.T1: "Operational Stability",
    VetoDimension.T2: "Structural Consistency",
    VetoDimension.T3: "Result Determinism",
    VetoDimension.T4: "System Security",
    VetoDimension.M1: "Scientific Integrity",
    VetoDimension.M2: "Practice Boundaries",
    VetoDimension.M3: "Methodological Baseline",
    VetoDimension.M4: "Code Usability",
}

GATE1_DIMENSIONS = (VetoDimension.T1, VetoDimension.T2, VetoDimension.T3, VetoDimension.T4)
GATE2_DIMENSIONS = (VetoDimension.M1, VetoDimension.M2, VetoDimension.M3, VetoDimension.M4)


class Verdict(str, enum.Enum):
    PASS = "PASS"
    FAIL = "FAIL"
    NOT_APPLICABLE = "NOT_APPLICABLE"


def excerpt(text: str) -> str:
    text = " ".join(text.split())
    return text[:EXCERPT_LIMIT]


@dataclass(frozen=True)
class Evidence:
    rule: str
    location: str  # file path relative to the skill root, or an input id
    line: int | None
    excerpt: str

    @classmethod
    def make(cls, rule: str, location: str, line: int | None, text: str) -> "Evidence":
        return cls(rule, location, line, excerpt(text))


@dataclass(frozen=True)
class VetoFinding:
    dimension: VetoDimension
    verdict: Verdict
    evidence: tuple[Evidence, ...] = ()
    metrics: dict[str, float] = field(default_factory=dict, hash=False)
    warnings: tuple[Evidence, ...] = ()
    note: str = ""

    def __post_init__(self):
        if self.verdict is Verdict.FAIL and not self.evidence:
            raise ValueError(f"{self.dimension.value} FAIL without evidence")
        rate = self.metrics.get("crash_rate")
        if rate is not None and not 0.0 <= rate <= 1.0:
            raise ValueError("crash_rate outside [0, 1]")

    @property
    def failed(self) -> bool:
        return self.verdict is Verdict.FAIL


@dataclass(frozen=True)
class GateResult:
    gate: int
    findings: tuple[VetoFinding, ...]

    @property
    def passed(self) -> bool:
        return not any(f.failed for f in self.findings)

    def finding(self, dim: VetoDimension) -> VetoFinding | None:
        for f in self.findings:
            if f.dimension is dim:
                return f
        return None

    @property
    def failed_dimensions(self) -> list[VetoDimension]:
        return [f.dimension for f in self.findings if f.failed]


def finding(dim: VetoDimension, evidence: list[Evidence], **kw) -> VetoFinding:
    """FAIL when there is evidence, PASS otherwise."""
    verdict = Verdict.FAIL if evidence else Verdict.PASS
    return VetoFinding(dim, verdict, tuple(evidence), **kw)
