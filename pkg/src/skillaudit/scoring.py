"""Static and dynamic scorecards, final score and release disposition."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Sequence

from .errors import OutOfRange, WrongCardinality
from .gates import GateResult
from .rubric import LAYER1_TOTAL, LAYER2_TOTAL, EffectiveRubric

STATIC_WEIGHT = 0.4
DYNAMIC_WEIGHT = 0.6
ALLOWED_CARD_COUNTS = (3, 5, 7)

# lower bounds of the half-open score bands
PRODUCTION_READY_MIN = 85.0
LIMITED_RELEASE_MIN = 75.0
BETA_ONLY_MIN = 60.0


class Disposition(enum.IntEnum):
    Reject = 0
    BetaOnly = 1
    LimitedRelease = 2
    ProductionReady = 3

    @property
    def label(self) -> str:
        return {0: "Reject", 1: "Beta Only", 2: "Limited Release", 3: "Production Ready"}[self.value]

    @classmethod
    def parse(cls, value: "Disposition | int | str") -> "Disposition":
        if isinstance(value, Disposition):
            return value
        if isinstance(value, int):
            return cls(value)
        text = str(value).strip()
        if text.lstrip("-").isdigit():
            return cls(int(text))
        key = text.replace(" ", "").replace("_", "").replace("-", "").lower()
        for member in cls:
            if member.name.lower() == key:
                return member
        raise ValueError(f"unknown disposition {value!r}")

    @property
    def band_midpoint(self) -> float:
        return {0: 30.0, 1: 67.5, 2: 80.0, 3: 92.5}[self.value]


def disposition_for_score(score: float) -> Disposition:
    if score >= PRODUCTION_READY_MIN:
        return Disposition.ProductionReady
    if score >= LIMITED_RELEASE_MIN:
        return Disposition.LimitedRelease
    if score >= BETA_ONLY_MIN:
        return Disposition.BetaOnly
    return Disposition.Reject


@dataclass(frozen=True)
class StaticScorecard:
    """Per-criterion fulfilment in [0, 1] with criterion weights as maxima."""

    scores: dict[str, float] = field(hash=False)
    weights: dict[str, float] = field(hash=False)
    dimensions: dict[str, str] = field(hash=False)  # criterion id -> dimension

    def __post_init__(self):
        if set(self.scores) != set(self.weights):
            raise ValueError("scores and weights must cover the same criteria")
        for cid, s in self.scores.items():
            if not 0.0 <= s <= 1.0:
                raise ValueError(f"criterion {cid} score {s} outside [0, 1]")

    @property
    def points(self) -> dict[str, float]:
        return {cid: self.scores[cid] * self.weights[cid] for cid in self.scores}

    @property
    def dimension_subtotals(self) -> dict[str, tuple[float, float]]:
        """dimension -> (points, maximum)."""
        out: dict[str, list[float]] = {}
        for cid, pts in self.points.items():
            acc = out.setdefault(self.dimensions[cid], [0.0, 0.0])
            acc[0] += pts
            acc[1] += self.weights[cid]
        return {d: (v[0], v[1]) for d, v in out.items()}

    @property
    def s_static(self) -> float:
        total = math.fsum(self.weights.values())
        return 100.0 * math.fsum(self.points.values()) / total


@dataclass(frozen=True)
class DynamicScorecard:
    input_id: str
    layer1: float
    layer2: float
    criteria: dict[str, float] = field(default_factory=dict, hash=False, compare=True)

    def __post_init__(self):
        if not 0.0 <= self.layer1 <= LAYER1_TOTAL:
            raise ValueError(f"layer 1 points {self.layer1} outside [0, 40]")
        if not 0.0 <= self.layer2 <= LAYER2_TOTAL:
            raise ValueError(f"layer 2 points {self.layer2} outside [0, 60]")

    @property
    def total(self) -> float:
        return self.layer1 + self.layer2

    @classmethod
    def from_points(cls, input_id: str, rubric: EffectiveRubric, points: dict[str, float]) -> "DynamicScorecard":
        l1 = math.fsum(points[c.id] for c in rubric.layer1)
        l2 = math.fsum(points[c.id] for c in rubric.layer2)
        return cls(input_id, l1, l2, dict(points))


@dataclass(frozen=True)
class FinalAssessment:
    s_static: float | None
    d_bar: float | None
    final: float | None
    disposition: "Disposition"
    gate1: GateResult
    gate2: GateResult | None
    vetoed: bool

    def __post_init__(self):
        failed = not self.gate1.passed or (self.gate2 is not None and not self.gate2.passed)
        if self.vetoed != failed:
            raise ValueError("vetoed must equal 'some gate has a FAIL'")
        if self.vetoed and self.disposition is not Disposition.Reject:
            raise ValueError("a vetoed skill must be rejected")


def aggregate_dynamic(cards: Sequence[DynamicScorecard]) -> float:
    """Mean dynamic total. Only DynamicScorecards are accepted."""
    for card in cards:
        if not isinstance(card, DynamicScorecard):
            raise TypeError(f"aggregate_dynamic accepts DynamicScorecard only, got {type(card).__name__}")
    if len(cards) not in ALLOWED_CARD_COUNTS:
        raise WrongCardinality(f"expected 3, 5 or 7 dynamic scorecards, got {len(cards)}")
    return math.fsum(c.total for c in cards) / len(cards)


def compute_final(
    s_static: float, d_bar: float, static_weight: float = STATIC_WEIGHT, dynamic_weight: float = DYNAMIC_WEIGHT
) -> float:
    for name, v in (("static score", s_static), ("dynamic mean", d_bar)):
        if not (0.0 <= v <= 100.0):
            raise OutOfRange(f"{name} {v} outside [0, 100]")
    return static_weight * s_static + dynamic_weight * d_bar


def assign_disposition(final: float | None, gate1: GateResult | None, gate2: GateResult | None) -> Disposition:
    if (gate1 is not None and not gate1.passed) or (gate2 is not None and not gate2.passed):
        return Disposition.Reject
    if final is None:
        return Disposition.Reject
    return disposition_for_score(final)


def weights_for_mode(mode: str, config=None) -> tuple[float, float]:
    """(static, dynamic) weights; a per-mode config entry overrides the default."""
    if config is None:
        return STATIC_WEIGHT, DYNAMIC_WEIGHT
    static = config.get_float("scoring", "static_weight")
    dyn = config.get_float("scoring", "dynamic_weight")
    per_mode = {}
    for line in config.get_list("scoring", "mode_static_weights"):
        key, _, val = line.replace("=", ":").partition(":")
        per_mode[key.strip()] = float(val)
    if mode in per_mode:
        static = per_mode[mode]
        dyn = 1.0 - static
    return static, dyn


def compute_static_score(artifact, rubric: EffectiveRubric, judge) -> StaticScorecard:
    """Score every static criterion through ``judge`` and normalise to 0-100."""
    scores = judge.score_static(artifact, rubric)
    return StaticScorecard(
        scores={c.id: scores[c.id] for c in rubric.static},
        weights={c.id: c.weight for c in rubric.static},
        dimensions={c.id: c.dimension for c in rubric.static},
    )
