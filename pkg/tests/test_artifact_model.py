import pytest
from hypothesis import given, strategies as st

from skillaudit.errors import EmptyFile, MissingFrontmatter, MissingRequiredField, NoManifest, UnclassifiableMode
from skillaudit.model import (
    Category,
    ComplexityTier,
    ExecutionMode,
    classify_mode,
    discover_skill,
    emit_manifest,
    estimate_complexity,
    manifest_category,
    parse_manifest,
    tier_for,
)

from conftest import BASIC_SCRIPT, write_skill


def test_parse_manifest_reads_fields_and_outputs():
    m = parse_manifest("---\nname: x\ndescription: 'does y'\ninputs: [a, b]\noutputs: t:csv, u\n---\nbody\n")
    assert m.name == "x" and m.description == "does y"
    assert m.declared_inputs == ("a", "b")
    assert m.declared_outputs == (("t", "csv"), ("u", None))
    assert m.body == "body\n"


@pytest.mark.parametrize(
    "text, exc",
    [
        ("", EmptyFile),
        ("no frontmatter here\n", MissingFrontmatter),
        ("---\nname: x\n", MissingFrontmatter),
        ("---\nname: x\n---\n", MissingRequiredField),
        ("---\ndescription: d\n---\n", MissingRequiredField),
    ],
)
def test_parse_manifest_errors(text, exc):
    with pytest.raises(exc):
        parse_manifest(text)


_key = st.from_regex(r"[a-z][a-z_]{0,8}", fullmatch=True).filter(lambda k: k not in ("name", "description"))
_val = st.from_regex(r"[A-Za-z0-9][A-Za-z0-9 .]{0,20}", fullmatch=True).map(str.strip)


@given(st.dictionaries(_key, _val, max_size=5), st.text(alphabet="abc #\n", max_size=40))
def test_manifest_round_trip(extra, body):
    fm = {"name": "n", "description": "d", **extra}
    text = "---\n" + "".join(f"{k}: {v}\n" for k, v in fm.items()) + "---\n" + body
    m = parse_manifest(text)
    again = parse_manifest(emit_manifest(m))
    assert again.frontmatter_raw == m.frontmatter_raw
    assert again.body == m.body


def test_discover_lists_scripts_and_references(tmp_path):
    d = write_skill(tmp_path, files={"scripts/main.py": BASIC_SCRIPT, "references/a.md": "ref\n", "tool": "#!/usr/bin/env bash\necho\n"})
    art = discover_skill(d, 3)
    dialects = {f.path: f.dialect for f in art.script_files}
    assert dialects == {"scripts/main.py": "python", "tool": "shell"}
    assert [f.path for f in art.reference_files] == ["references/a.md"]
    assert art.category is Category.DataAnalysis


def test_discover_without_manifest(tmp_path):
    with pytest.raises(NoManifest):
        discover_skill(tmp_path, 1)


def test_discover_keeps_broken_manifest_for_gate(tmp_path):
    d = write_skill(tmp_path, frontmatter={"name": "x", "category": "5"})
    art = discover_skill(d, 5)
    assert art.manifest is None
    assert "MissingRequiredField" in art.manifest_error
    assert manifest_category(d) is Category.Other


@pytest.mark.parametrize(
    "scripts, api, mode",
    [(False, False, ExecutionMode.A), (True, False, ExecutionMode.B), (True, True, ExecutionMode.D)],
)
def test_classify_mode(tmp_path, scripts, api, mode):
    fm = {"name": "x", "description": "d"}
    if api:
        fm["api_endpoint"] = "https://api.example.org/v1"
    d = write_skill(tmp_path, frontmatter=fm, files={"scripts/run.py": BASIC_SCRIPT} if scripts else None)
    assert classify_mode(discover_skill(d, 1)) is mode


def test_api_without_scripts_is_unclassifiable(tmp_path):
    d = write_skill(tmp_path, frontmatter={"name": "x", "description": "d", "api_endpoint": "https://a.example"})
    with pytest.raises(UnclassifiableMode):
        classify_mode(discover_skill(d, 1))


@pytest.mark.parametrize(
    "refs, words, depth, tier",
    [
        (0, 100, 0, ComplexityTier.Simple),
        (1, 799, 1, ComplexityTier.Simple),
        (2, 100, 0, ComplexityTier.Moderate),
        (0, 800, 0, ComplexityTier.Moderate),
        (0, 100, 2, ComplexityTier.Moderate),
        (5, 0, 0, ComplexityTier.Complex),
        (0, 3000, 0, ComplexityTier.Complex),
        (0, 0, 5, ComplexityTier.Complex),
    ],
)
def test_tier_thresholds(refs, words, depth, tier):
    assert tier_for(refs, words, depth) is tier


@given(st.integers(0, 10), st.integers(0, 5000), st.integers(0, 10))
def test_tier_is_monotone(refs, words, depth):
    base = tier_for(refs, words, depth).order
    assert tier_for(refs + 1, words, depth).order >= base
    assert tier_for(refs, words + 100, depth).order >= base
    assert tier_for(refs, words, depth + 1).order >= base


@pytest.mark.parametrize("n_refs, count", [(0, 3), (2, 5), (5, 7)])
def test_tier_sets_dynamic_input_count(tmp_path, n_refs, count):
    files = {f"references/r{i}.md": "x\n" for i in range(n_refs)}
    d = write_skill(tmp_path, files=files)
    assert estimate_complexity(discover_skill(d, 3)).dynamic_test_count == count


@pytest.mark.parametrize("value, cat", [(1, Category.EvidenceInsight), ("DataAnalysis", Category.DataAnalysis), ("5", Category.Other)])
def test_category_parse(value, cat):
    assert Category.parse(value) is cat
