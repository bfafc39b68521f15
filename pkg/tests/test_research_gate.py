import pytest

from skillaudit.gates import Verdict, VetoDimension
from skillaudit.model import Category
from skillaudit.research_gate import (
    ResearchContext,
    check_m1,
    check_m2,
    check_m3,
    check_m4,
    check_research_dimension,
    code_blocks,
    load_reference_bundle,
    normalize_identifier,
    run_gate2,
)

from conftest import record

BUNDLE = {"doi:10.1000/real.1", "pmid:12345678", "nct:NCT01234567"}
DISCLAIMER = "For research use only; this is not medical advice."


def ctx(**kw):
    return ResearchContext(**{"reference_bundle": BUNDLE, **kw})


def rules(f):
    return sorted({e.rule for e in f.evidence})


def test_normalize_identifier():
    assert normalize_identifier("doi", "10.1000/ABC.1).") == "doi:10.1000/abc.1"
    assert normalize_identifier("pmid", "PMID: 12345678") == "pmid:12345678"
    assert normalize_identifier("nct", "nct01234567") == "nct:NCT01234567"


def test_load_reference_bundle(tmp_path):
    p = tmp_path / "b.txt"
    p.write_text("# refs\ndoi:10.1000/Real.1\nPMID:12345678\nNCT01234567  # trial\n\n")
    assert load_reference_bundle(p) == BUNDLE


# ---------------------------------------------------------------- M1


@pytest.mark.parametrize(
    "text, expected",
    [
        ("See doi 10.1000/real.1 and PMID 12345678 and NCT01234567.", []),
        ("See 10.5555/mock.2024.0042.", ["M1.unknown_identifier"]),
        ("Result p = 0.000 was reported.", ["M1.impossible_pvalue"]),
        ("Result p = 1.2 was reported.", ["M1.impossible_pvalue"]),
        ("Result p = 1.0 was reported, p < 0.05 too.", []),
        ("We enrolled N = 120 participants. Later N = 118.", ["M1.inconsistent_sample_size"]),
        ("Overall N = 120; subgroup n = 60.", []),
    ],
)
def test_m1_rules(text, expected):
    assert rules(check_m1([record(transcript=text)], ctx())) == expected


def test_m1_without_bundle_uses_resolver():
    rec = [record(transcript="See 10.1000/other.9.")]
    assert check_m1(rec, ResearchContext(resolver=lambda _: False)).failed
    unresolved = check_m1(rec, ResearchContext())
    assert unresolved.verdict is Verdict.PASS
    assert [w.rule for w in unresolved.warnings] == ["M1.unverified_identifier"]


def test_m1_evidence_points_at_line():
    f = check_m1([record("q7", "line one\nline two p = 0.000\n")], ctx())
    assert (f.evidence[0].location, f.evidence[0].line) == ("q7", 2)


# ---------------------------------------------------------------- M2


@pytest.mark.parametrize(
    "text, category, expected",
    [
        (f"The patient has diabetes. {DISCLAIMER}", Category.ProtocolDesign, ["M2.diagnostic_conclusion"]),
        ("A trial protocol with endpoints.", Category.ProtocolDesign, ["M2.missing_disclaimer"]),
        (f"A trial protocol with endpoints. {DISCLAIMER}", Category.ProtocolDesign, []),
        ("A methods paragraph.", Category.AcademicWriting, []),
    ],
)
def test_m2_rules(text, category, expected):
    assert rules(check_m2([record(transcript=text)], category, ctx())) == expected


# ---------------------------------------------------------------- M3


@pytest.mark.parametrize(
    "text, failed",
    [
        ("This observational study shows coffee causes longevity.", True),
        ("Smoking is associated with cancer and leads to earlier death.", True),
        ("Smoking is associated with cancer. Trials show smoking causes cancer.", False),
        ("The correlation does not prove that one causes the other.", False),
    ],
)
def test_m3_same_sentence_rule(text, failed):
    assert check_m3([record(transcript=text)], ctx()).failed is failed


# ---------------------------------------------------------------- M4


def test_code_blocks_finds_fenced_python():
    text = "intro\n```python\nimport os\n```\n```r\nx <- 1\n```\n"
    blocks = code_blocks(text, ["python", "r"])
    assert [(lang, line) for lang, _, line in blocks] == [("python", 2), ("r", 5)]


@pytest.mark.parametrize(
    "code, declared, expected",
    [
        ("import json\nprint(json.dumps({}))", set(), []),
        ("import pandas as pd", set(), ["M4.undeclared_dependency"]),
        ("import pandas as pd", {"pandas"}, []),
        ("from sklearn.linear_model import LinearRegression", {"scikit-learn"}, []),
        ("def broken(:\n    pass", set(), ["M4.syntax_error"]),
    ],
)
def test_m4_rules(code, declared, expected):
    text = f"```python\n{code}\n```\n"
    f = check_m4([record(transcript=text)], Category.DataAnalysis, ctx(declared_packages=declared))
    assert rules(f) == expected


def test_m4_not_applicable_without_code_for_writing():
    f = check_m4([record(transcript="Prose only.")], Category.AcademicWriting, ctx())
    assert f.verdict is Verdict.NOT_APPLICABLE


# ---------------------------------------------------------------- gate


def test_gate2_other_category_is_not_applicable():
    g = run_gate2([record(transcript="p = 0.000")], Category.Other, ctx())
    assert g.passed
    assert {f.verdict for f in g.findings} == {Verdict.NOT_APPLICABLE}


def test_gate2_reports_all_four_dimensions():
    g = run_gate2([record(transcript=f"Clean text. {DISCLAIMER}")], Category.EvidenceInsight, ctx())
    assert [f.dimension.value for f in g.findings] == ["M1", "M2", "M3", "M4"]
    assert g.passed


def test_single_dimension_entry_point():
    f = check_research_dimension([record(transcript="p = 2")], Category.DataAnalysis, VetoDimension.M1, ctx())
    assert f.failed
