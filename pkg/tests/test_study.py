import csv
import itertools

import pytest
from hypothesis import given, strategies as st

from skillaudit.errors import BothAbsent, IncompleteRatings, InputError, SkillMismatch, UnknownSkillInReports
from skillaudit.scoring import Disposition
from skillaudit.study import (
    ConsensusRecord,
    HighRisk,
    OptimizationCriterion as C,
    RatingRecord,
    SystemResult,
    adjudicate_disposition,
    build_consensus,
    consensus_high_risk,
    derive_consensus_score,
    flag_optimization,
    read_ratings,
    run_study,
)

D = Disposition
REPRESENTATIVE_SCORES = (30.0, 64.0, 73.75, 80.0, 92.0)
BANDS = [(D.Reject, 0.0, 60.0), (D.BetaOnly, 60.0, 75.0), (D.LimitedRelease, 75.0, 85.0), (D.ProductionReady, 85.0, 100.01)]


def oracle_adjudicate(d1, d2, x):
    """Written from the rule text, independently of the implementation."""
    if d1 == d2:
        return d1, False
    if abs(d1 - d2) >= 2:
        return min(d1, d2), True
    implied = next(d for d, lo, hi in BANDS if lo <= x < hi)
    if implied in (d1, d2):
        return implied, True
    mids = {d: (lo + min(hi, 100.0)) / 2 for d, lo, hi in BANDS}
    lo, hi = sorted((d1, d2))
    return (hi if abs(mids[hi] - x) < abs(mids[lo] - x) else lo), True


@pytest.mark.parametrize("d1, d2", list(itertools.product(D, D)))
@pytest.mark.parametrize("x", REPRESENTATIVE_SCORES)
def test_adjudication_exhaustive(d1, d2, x):
    assert adjudicate_disposition(d1, d2, x) == oracle_adjudicate(d1, d2, x)


def test_adjudication_examples():
    assert adjudicate_disposition(D.LimitedRelease, D.BetaOnly, 76.0) == (D.LimitedRelease, True)
    assert adjudicate_disposition(D.ProductionReady, D.BetaOnly, 79.0) == (D.BetaOnly, True)
    assert adjudicate_disposition(D.Reject, D.Reject, 50.0) == (D.Reject, False)
    # neither matches the implied Reject: BetaOnly's midpoint 67.5 is nearer than 80
    assert adjudicate_disposition(D.BetaOnly, D.LimitedRelease, 40.0) == (D.BetaOnly, True)
    # exact midpoint tie between 67.5 and 80 goes to the lower rank
    assert adjudicate_disposition("BetaOnly", "LimitedRelease", 73.75) == (D.BetaOnly, True)


@given(st.sampled_from(list(D)), st.floats(0, 100))
def test_consensus_idempotent(d, x):
    assert adjudicate_disposition(d, d, x) == (d, False)


def test_consensus_score():
    assert derive_consensus_score(82, 74) == 78.0
    assert derive_consensus_score(None, 59.6) == 59.6
    assert derive_consensus_score(61.0, None) == 61.0
    with pytest.raises(BothAbsent):
        derive_consensus_score(None, None)


@pytest.mark.parametrize(
    "f1, f2, out",
    [("Y", "Y", HighRisk.Y), ("Y", "N", HighRisk.Unclear), ("N", "Y", HighRisk.Unclear), ("N", "N", HighRisk.N)],
)
def test_high_risk_mapping(f1, f2, out):
    assert consensus_high_risk(f1, f2) is out


def test_rating_record_validation():
    with pytest.raises(InputError):
        RatingRecord("S1", "E1", 101.0, D.Reject, HighRisk.N)
    with pytest.raises(InputError):
        RatingRecord("S1", "E1", 50.0, D.Reject, HighRisk.Unclear)


def test_build_consensus_checks_skill():
    a = RatingRecord("S1", "E1", 70.0, D.BetaOnly, HighRisk.N)
    b = RatingRecord("S2", "E2", 70.0, D.BetaOnly, HighRisk.N)
    with pytest.raises(SkillMismatch):
        build_consensus(a, b)


# ---------------------------------------------------------------- flags


def cons(score=70.0, disp=D.BetaOnly, risk=HighRisk.N, adjudicated=False, sid="S1"):
    return ConsensusRecord(sid, score, disp, risk, adjudicated)


def system(disp=D.BetaOnly, sid="S1"):
    return SystemResult(sid, 1, 70.0, disp)


@pytest.mark.parametrize(
    "consensus, sysres, expected",
    [
        (cons(), system(), set()),
        (cons(disp=D.Reject, score=40.0), system(D.Reject), {C.C1}),
        (cons(score=63.0), system(), {C.C2}),
        (cons(score=64.999), system(), {C.C2}),
        (cons(score=65.0), system(), set()),
        (cons(adjudicated=True), system(), {C.C3}),
        (cons(), system(D.ProductionReady), {C.C4}),
        (cons(), system(D.LimitedRelease), set()),
        (cons(risk=HighRisk.Y), system(), {C.C5}),
        (cons(risk=HighRisk.Unclear), system(), {C.C5}),
    ],
)
def test_flags(consensus, sysres, expected):
    assert flag_optimization(consensus, sysres).criteria == expected


def test_flags_skill_mismatch():
    with pytest.raises(SkillMismatch):
        flag_optimization(cons(sid="S1"), system(sid="S2"))


# ---------------------------------------------------------------- ingestion and study


def write_ratings(path, rows, header=("skill_id", "rater_id", "score", "disposition", "high_risk")):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)
    return path


def test_read_ratings(tmp_path):
    p = write_ratings(
        tmp_path / "r.csv",
        [("S1", "E2", "", "2", "n", "b"), ("S1", "E1", "71.5", "Limited Release", "Y", "a")],
        header=("skill_id", "rater_id", "score", "disposition", "high_risk", "sub_rater"),
    )
    (a, b) = read_ratings(p)["S1"]
    assert (a.rater_id, a.score, a.disposition, a.high_risk, a.sub_rater) == ("E1", 71.5, D.LimitedRelease, HighRisk.Y, "a")
    assert (b.score, b.disposition) == (None, D.LimitedRelease)


@pytest.mark.parametrize(
    "rows, exc",
    [
        ([("S1", "E1", "70", "BetaOnly", "N")], IncompleteRatings),
        ([("S1", "E1", "70", "BetaOnly", "N"), ("S1", "E1", "71", "BetaOnly", "N")], IncompleteRatings),
        ([("S1", "E1", "seventy", "BetaOnly", "N"), ("S1", "E2", "71", "BetaOnly", "N")], InputError),
        ([("S1", "E1", "70", "Maybe", "N"), ("S1", "E2", "71", "BetaOnly", "N")], InputError),
    ],
)
def test_read_ratings_errors(tmp_path, rows, exc):
    with pytest.raises(exc):
        read_ratings(write_ratings(tmp_path / "r.csv", rows))


def _ten_skill_fixture(tmp_path, constant=False):
    rows, systems = [], {}
    for i in range(10):
        sid = f"S{i + 1:03d}"
        s1 = 70.0 if constant else 50.0 + 4 * i
        s2 = 70.0 if constant else 52.0 + 4 * i - (i % 3)
        for rid, s in (("E1", s1), ("E2", s2)):
            disp = D.BetaOnly if constant else D(min(3, i // 3))
            rows.append((sid, rid, f"{s}", disp.name, "N"))
        final = None if i == 0 else 48.0 + 4.5 * i
        disp = D.Reject if final is None else D(min(3, i // 3))
        systems[sid] = SystemResult(sid, i % 5 + 1, final, disp, 1 if final is None else None)
    return write_ratings(tmp_path / "ratings.csv", rows), systems


def test_run_study_outputs(tmp_path):
    ratings, systems = _ten_skill_fixture(tmp_path)
    res = run_study(ratings, systems, tmp_path / "out")
    for name in res.files:
        assert (tmp_path / "out" / name).stat().st_size > 0
    assert len(res.files) == 10
    assert res.baseline.n == res.baseline.n_scores == 10
    assert res.system_row.n == 10 and res.system_row.n_scores == 9  # gate-1 veto has no score
    assert [r.stratum for r in res.strata[:5]] == [f"category_{c}" for c in range(1, 6)]
    assert sum(r.n for r in res.strata[5:]) == 10
    with open(tmp_path / "out" / "flags.csv") as fh:
        assert len(list(csv.DictReader(fh))) == 10
    with open(tmp_path / "out" / "bland_altman_points.csv") as fh:
        assert len(list(csv.DictReader(fh))) == 9


def test_run_study_constant_raters_flagged(tmp_path):
    ratings, systems = _ten_skill_fixture(tmp_path, constant=True)
    res = run_study(ratings, systems, tmp_path / "out")
    assert res.baseline.icc is None
    assert set(res.baseline.flags.split(";")) == {"icc_degenerate", "kappa_degenerate"}
    assert "NA" not in (tmp_path / "out" / "baseline_agreement.csv").read_text().splitlines()[0]


def test_run_study_is_deterministic(tmp_path):
    ratings, systems = _ten_skill_fixture(tmp_path)
    run_study(ratings, systems, tmp_path / "a")
    run_study(ratings, systems, tmp_path / "b")
    for f in sorted((tmp_path / "a").iterdir()):
        assert f.read_bytes() == (tmp_path / "b" / f.name).read_bytes()


def test_run_study_input_contract(tmp_path):
    ratings, systems = _ten_skill_fixture(tmp_path)
    extra = dict(systems, S999=SystemResult("S999", 1, 50.0, D.Reject))
    with pytest.raises(UnknownSkillInReports):
        run_study(ratings, extra, tmp_path / "o1")
    fewer = {k: v for k, v in systems.items() if k != "S001"}
    with pytest.raises(IncompleteRatings):
        run_study(ratings, fewer, tmp_path / "o2")
