"""Rater ingestion, consensus, optimization flags and the agreement study."""

from __future__ import annotations

import csv
import enum
import io
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from . import stats
from .errors import BothAbsent, DegenerateMatrix, IncompleteRatings, InputError, SkillMismatch, UnknownSkillInReports
from .model import Category
from .scoring import Disposition, disposition_for_score

RATINGS_HEADER = ("skill_id", "rater_id", "score", "disposition", "high_risk")
HIST_BIN_WIDTH = 5.0
BETA_FLAG_SCORE = 65.0


class HighRisk(str, enum.Enum):
    Y = "Y"
    N = "N"
    Unclear = "Unclear"


class OptimizationCriterion(str, enum.Enum):
    C1 = "consensusReject"
    C2 = "betaBelow65"
    C3 = "adjudicationRequired"
    C4 = "rankGapGE2"
    C5 = "highRiskYOrUnclear"


@dataclass(frozen=True)
class RatingRecord:
    skill_id: str
    rater_id: str
    score: float | None
    disposition: Disposition
    high_risk: HighRisk
    sub_rater: str = ""

    def __post_init__(self):
        if self.score is not None and not 0.0 <= self.score <= 100.0:
            raise InputError(f"{self.skill_id}/{self.rater_id}: score {self.score} outside [0, 100]")
        if self.high_risk is HighRisk.Unclear:
            raise InputError("individual raters record Y or N only")


@dataclass(frozen=True)
class ConsensusRecord:
    skill_id: str
    score: float
    disposition: Disposition
    high_risk: HighRisk
    adjudicated: bool


@dataclass(frozen=True)
class SystemResult:
    """The parts of an audit report the study needs."""

    skill_id: str
    category: int
    final: float | None
    disposition: Disposition
    vetoed_at: int | None = None


@dataclass(frozen=True)
class OptimizationFlags:
    skill_id: str
    criteria: frozenset[OptimizationCriterion]

    @property
    def flagged(self) -> bool:
        return bool(self.criteria)

    def codes(self) -> list[str]:
        return sorted(c.name for c in self.criteria)


# ---------------------------------------------------------------- consensus


def derive_consensus_score(s1: float | None, s2: float | None) -> float:
    if s1 is None and s2 is None:
        raise BothAbsent("neither rater gave a score")
    if s1 is None:
        return float(s2)
    if s2 is None:
        return float(s1)
    return (float(s1) + float(s2)) / 2


def adjudicate_disposition(d1, d2, consensus_score: float) -> tuple[Disposition, bool]:
    """Resolve two expert dispositions.

    Equal: kept, not adjudicated. One rank apart: the one matching the
    disposition implied by the consensus score, else the one whose band
    midpoint lies nearer to it (lower rank on an exact tie). Two or more
    ranks apart: the lower-release disposition.
    """
    d1, d2 = Disposition.parse(d1), Disposition.parse(d2)
    if d1 == d2:
        return d1, False
    if abs(d1 - d2) >= 2:
        return min(d1, d2), True
    implied = disposition_for_score(consensus_score)
    if implied in (d1, d2):
        return implied, True
    lo, hi = min(d1, d2), max(d1, d2)
    if abs(hi.band_midpoint - consensus_score) < abs(lo.band_midpoint - consensus_score):
        return hi, True
    return lo, True


def consensus_high_risk(f1, f2) -> HighRisk:
    f1, f2 = HighRisk(f1), HighRisk(f2)
    if f1 is HighRisk.Y and f2 is HighRisk.Y:
        return HighRisk.Y
    if f1 is HighRisk.N and f2 is HighRisk.N:
        return HighRisk.N
    return HighRisk.Unclear


def build_consensus(r1: RatingRecord, r2: RatingRecord) -> ConsensusRecord:
    if r1.skill_id != r2.skill_id:
        raise SkillMismatch(f"{r1.skill_id} vs {r2.skill_id}")
    score = derive_consensus_score(r1.score, r2.score)
    disp, adjudicated = adjudicate_disposition(r1.disposition, r2.disposition, score)
    return ConsensusRecord(r1.skill_id, score, disp, consensus_high_risk(r1.high_risk, r2.high_risk), adjudicated)


def flag_optimization(consensus: ConsensusRecord, system: SystemResult) -> OptimizationFlags:
    if consensus.skill_id != system.skill_id:
        raise SkillMismatch(f"consensus for {consensus.skill_id} paired with report for {system.skill_id}")
    C = OptimizationCriterion
    out = set()
    if consensus.disposition is Disposition.Reject:
        out.add(C.C1)
    if consensus.disposition is Disposition.BetaOnly and consensus.score < BETA_FLAG_SCORE:
        out.add(C.C2)
    if consensus.adjudicated:
        out.add(C.C3)
    if abs(int(system.disposition) - int(consensus.disposition)) >= 2:
        out.add(C.C4)
    if consensus.high_risk in (HighRisk.Y, HighRisk.Unclear):
        out.add(C.C5)
    return OptimizationFlags(consensus.skill_id, frozenset(out))


# ---------------------------------------------------------------- ingestion


def read_ratings(path: str | Path) -> dict[str, tuple[RatingRecord, RatingRecord]]:
    """Two rater records per skill, ordered by rater id.

    An optional ``sub_rater`` column is carried along but unused.
    """
    text = Path(path).read_text(encoding="utf-8-sig")
    reader = csv.DictReader(io.StringIO(text))
    missing = set(RATINGS_HEADER) - set(reader.fieldnames or ())
    if missing:
        raise InputError(f"ratings CSV lacks columns {sorted(missing)}")
    by_skill: dict[str, list[RatingRecord]] = {}
    for lineno, row in enumerate(reader, start=2):
        try:
            score_cell = (row["score"] or "").strip()
            rec = RatingRecord(
                skill_id=row["skill_id"].strip(),
                rater_id=row["rater_id"].strip(),
                score=float(score_cell) if score_cell else None,
                disposition=Disposition.parse(row["disposition"]),
                high_risk=HighRisk(row["high_risk"].strip().upper()),
                sub_rater=(row.get("sub_rater") or "").strip(),
            )
        except (ValueError, AttributeError) as exc:
            raise InputError(f"{path}:{lineno}: {exc}") from exc
        by_skill.setdefault(rec.skill_id, []).append(rec)
    out = {}
    for sid, recs in sorted(by_skill.items()):
        if len(recs) != 2 or recs[0].rater_id == recs[1].rater_id:
            raise IncompleteRatings(f"{sid}: expected two distinct raters, found {len(recs)} records")
        a, b = sorted(recs, key=lambda r: r.rater_id)
        out[sid] = (a, b)
    return out


def load_system_results(report_dir: str | Path) -> dict[str, SystemResult]:
    out = {}
    for p in sorted(Path(report_dir).glob("*.json")):
        d = json.loads(p.read_text(encoding="utf-8"))
        a = d["assessment"]
        out[d["skill_id"]] = SystemResult(
            d["skill_id"], int(d["artifact"]["category"]), a["final"], Disposition.parse(a["disposition"]),
            a.get("vetoed_at"),
        )
    return out


# ---------------------------------------------------------------- tables


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, int):
        return str(x)
    if isinstance(x, float):
        if math.isnan(x):
            return "NA"
        return f"{x:.9g}"
    return str(x)


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(v) for v in r])
    path.write_text(buf.getvalue(), encoding="utf-8")


@dataclass(frozen=True)
class AgreementRow:
    """One row of an agreement table; None marks a statistic that could not be computed."""

    comparison: str  # "expert_vs_expert" | "system_vs_consensus"
    stratum: str  # "all" or "category_<n>"
    n: int  # skills in the stratum (rank statistics use all of them)
    n_scores: int  # complete score pairs
    icc: float | None = None
    icc_low: float | None = None
    icc_high: float | None = None
    kappa: float | None = None
    bias: float | None = None
    sd_signed: float | None = None
    abs_mean: float | None = None
    abs_median: float | None = None
    abs_sd: float | None = None
    abs_max: float | None = None
    loa_low: float | None = None
    loa_high: float | None = None
    wilcoxon_w: float | None = None
    wilcoxon_p: float | None = None
    wilcoxon_method: str = ""
    exact_agreement: float | None = None
    within_one: float | None = None
    flags: str = ""

    HEADER = (
        "comparison", "stratum", "n", "n_scores", "icc", "icc_ci_low", "icc_ci_high", "kappa_w", "bias", "sd_signed_diff",
        "abs_diff_mean", "abs_diff_median", "abs_diff_sd", "abs_diff_max", "loa_low", "loa_high",
        "wilcoxon_w", "wilcoxon_p", "wilcoxon_method", "exact_agreement", "within_one_rank", "flags",
    )

    def values(self) -> tuple:
        return (
            self.comparison, self.stratum, self.n, self.n_scores, self.icc, self.icc_low, self.icc_high, self.kappa, self.bias,
            self.sd_signed, self.abs_mean, self.abs_median, self.abs_sd, self.abs_max, self.loa_low, self.loa_high,
            self.wilcoxon_w, self.wilcoxon_p, self.wilcoxon_method, self.exact_agreement, self.within_one, self.flags,
        )


def agreement_row(
    comparison: str,
    stratum: str,
    a_scores: Sequence[float | None],
    b_scores: Sequence[float | None],
    a_ranks: Sequence[int],
    b_ranks: Sequence[int],
    with_tests: bool,
) -> AgreementRow:
    """Score statistics use complete pairs only; rank statistics use every pair."""
    pairs = [(a, b) for a, b in zip(a_scores, b_scores) if a is not None and b is not None]
    xa = [p[0] for p in pairs]
    xb = [p[1] for p in pairs]
    flags = []
    kw: dict = {}
    if len(pairs) >= 2:
        try:
            r = stats.icc_2_1(stats.RatingsMatrix.from_columns(xa, xb))
            kw.update(icc=r.icc, icc_low=r.ci_low, icc_high=r.ci_high)
        except DegenerateMatrix:
            flags.append("icc_degenerate")
    else:
        flags.append("too_few_score_pairs")
    if pairs:
        s = stats.abs_diff_summary(xa, xb)
        kw.update(abs_mean=s.mean, abs_median=s.median, abs_sd=s.sd, abs_max=s.max)
    if with_tests and len(pairs) >= 2:
        ba = stats.bland_altman(xa, xb)
        kw.update(bias=ba.bias, sd_signed=ba.sd_delta, loa_low=ba.loa_low, loa_high=ba.loa_high)
        wx = stats.wilcoxon_signed_rank([x - y for x, y in pairs])
        kw.update(wilcoxon_w=wx.w, wilcoxon_p=wx.p, wilcoxon_method=wx.method)
        if wx.all_zero:
            flags.append("wilcoxon_all_zero")
    elif len(pairs) >= 2:
        kw.update(sd_signed=stats.signed_diff_sd(xa, xb), bias=math.fsum(x - y for x, y in pairs) / len(pairs))
    if a_ranks:
        k = stats.weighted_kappa_linear(a_ranks, b_ranks)
        kw["kappa"] = k.kappa
        if k.degenerate:
            flags.append("kappa_degenerate")
        rc = stats.rank_confusion(a_ranks, b_ranks)
        kw.update(exact_agreement=rc.exact, within_one=rc.within_one)
    return AgreementRow(comparison, stratum, len(a_ranks), len(pairs), flags=";".join(flags), **kw)


@dataclass(frozen=True)
class StudyResult:
    consensus: dict[str, ConsensusRecord]
    system: dict[str, SystemResult]
    baseline: AgreementRow
    system_row: AgreementRow
    strata: tuple[AgreementRow, ...]
    flags: tuple[OptimizationFlags, ...]
    files: tuple[str, ...]


def _histogram(deltas: Sequence[float], width: float = HIST_BIN_WIDTH) -> list[tuple[float, float, int]]:
    if not deltas:
        return []
    lo = math.floor(min(deltas) / width) * width
    hi = math.floor(max(deltas) / width) * width
    bins = []
    edge = lo
    while edge <= hi:
        count = sum(1 for d in deltas if edge <= d < edge + width)
        bins.append((edge, edge + width, count))
        edge += width
    return bins


def run_study(
    ratings: str | Path | Mapping[str, tuple[RatingRecord, RatingRecord]],
    system_reports: str | Path | Mapping[str, SystemResult],
    out: str | Path,
) -> StudyResult:
    """Expert baseline, system-vs-consensus agreement, strata, flags and plot data.

    Skills rejected at gate 1 have no numeric score: they drop out of the
    score statistics but still count as Reject in the rank statistics.
    """
    rated = read_ratings(ratings) if not isinstance(ratings, Mapping) else dict(ratings)
    systems = load_system_results(system_reports) if not isinstance(system_reports, Mapping) else dict(system_reports)
    unknown = sorted(set(systems) - set(rated))
    if unknown:
        raise UnknownSkillInReports(f"reports for unrated skills: {', '.join(unknown)}")
    missing = sorted(set(rated) - set(systems))
    if missing:
        raise IncompleteRatings(f"no system report for: {', '.join(missing)}")
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    ids = sorted(rated)
    cons = {sid: build_consensus(*rated[sid]) for sid in ids}

    def rows_for(subset: list[str], label: str) -> tuple[AgreementRow, AgreementRow]:
        base = agreement_row(
            "expert_vs_expert", label,
            [rated[s][0].score for s in subset], [rated[s][1].score for s in subset],
            [int(rated[s][0].disposition) for s in subset], [int(rated[s][1].disposition) for s in subset],
            with_tests=False,
        )
        sysrow = agreement_row(
            "system_vs_consensus", label,
            [systems[s].final for s in subset], [cons[s].score for s in subset],
            [int(systems[s].disposition) for s in subset], [int(cons[s].disposition) for s in subset],
            with_tests=True,
        )
        return base, sysrow

    baseline, system_row = rows_for(ids, "all")
    base_strata, sys_strata = [], []
    for cat in Category:
        subset = [s for s in ids if systems[s].category == cat.value]
        if subset:
            b, r = rows_for(subset, f"category_{cat.value}")
            base_strata.append(b)
            sys_strata.append(r)
    strata = base_strata + sys_strata
    flags = tuple(flag_optimization(cons[s], systems[s]) for s in ids)

    files = []

    def emit(name: str, header, rows) -> None:
        write_csv(out / name, header, rows)
        files.append(name)

    emit("baseline_agreement.csv", AgreementRow.HEADER, [baseline.values()])
    emit("system_agreement.csv", AgreementRow.HEADER, [system_row.values()])
    emit("stratified.csv", AgreementRow.HEADER, [r.values() for r in strata])
    emit(
        "flags.csv",
        ("skill_id", "flagged", *[c.name for c in OptimizationCriterion]),
        [(f.skill_id, f.flagged, *[c in f.criteria for c in OptimizationCriterion]) for f in flags],
    )
    emit(
        "consensus.csv",
        ("skill_id", "score", "disposition", "high_risk", "adjudicated"),
        [(c.skill_id, c.score, c.disposition.name, c.high_risk.value, c.adjudicated) for c in cons.values()],
    )
    scored = [s for s in ids if systems[s].final is not None]
    deltas = [systems[s].final - cons[s].score for s in scored]
    emit("delta_histogram.csv", ("bin_low", "bin_high", "count"), _histogram(deltas))
    emit(
        "bland_altman_points.csv",
        ("skill_id", "mean", "delta"),
        [(s, (systems[s].final + cons[s].score) / 2, systems[s].final - cons[s].score) for s in scored],
    )
    for name, a, b in (
        ("confusion_baseline.csv", [int(rated[s][0].disposition) for s in ids], [int(rated[s][1].disposition) for s in ids]),
        ("confusion_system.csv", [int(systems[s].disposition) for s in ids], [int(cons[s].disposition) for s in ids]),
    ):
        grid = stats.rank_confusion(a, b).grid
        emit(name, ("row\\col", *[d.name for d in Disposition]), [(d.name, *grid[d]) for d in Disposition])
    (out / "summary.md").write_text(_summary(baseline, system_row, strata, flags, len(ids)), encoding="utf-8")
    files.append("summary.md")
    return StudyResult(cons, systems, baseline, system_row, tuple(strata), flags, tuple(files))


def _cell(x) -> str:
    return "n/a" if x is None else _fmt(round(x, 3) if isinstance(x, float) else x)


def _summary(baseline: AgreementRow, system: AgreementRow, strata, flags, n: int) -> str:
    lines = [
        "# Agreement study",
        "",
        f"Skills: {n}. Flagged for optimization: {sum(f.flagged for f in flags)}.",
        "",
        "| Comparison | Stratum | n | n (scores) | ICC(2,1) [95% CI] | kappa_w | bias | SD diff | mean abs diff | Wilcoxon p | exact | within 1 |",
        "|---|---|---|---|---|---|---|---|---|---|---|---|",
    ]
    for r in (baseline, system, *strata):
        ci = "n/a" if r.icc is None else f"{_cell(r.icc)} [{_cell(r.icc_low)}, {_cell(r.icc_high)}]"
        lines.append(
            f"| {r.comparison} | {r.stratum} | {r.n} | {r.n_scores} | {ci} | {_cell(r.kappa)} | {_cell(r.bias)} | {_cell(r.sd_signed)} | "
            f"{_cell(r.abs_mean)} | {_cell(r.wilcoxon_p)} | {_cell(r.exact_agreement)} | {_cell(r.within_one)} |"
        )
    lines += ["", "Per-category rows are descriptive only.", ""]
    return "\n".join(lines)
