import socket
import threading

import pytest
from hypothesis import given, settings, strategies as st

from skillaudit.errors import InsufficientBank, JudgeUnavailable
from skillaudit.harness import (
    TIMEOUT,
    DynamicHarness,
    ExecutionRecord,
    SandboxLimits,
    TestInput,
    execute_skill,
    load_input_banks,
    run_assertions,
    select_test_inputs,
)
from skillaudit.judge import RuleJudge
from skillaudit.model import Category, ExecutionMode, discover_skill

from conftest import BASIC_FRONTMATTER, BASIC_SCRIPT, record, write_skill

INPUT = TestInput("t1", Category.DataAnalysis, "compare two groups")


@pytest.fixture
def listener():
    """A local TCP listener; yields its port."""
    srv = socket.socket()
    srv.bind(("127.0.0.1", 0))
    srv.listen(4)
    stop = threading.Event()

    def accept():
        srv.settimeout(0.2)
        while not stop.is_set():
            try:
                conn, _ = srv.accept()
                conn.close()
            except OSError:
                pass

    t = threading.Thread(target=accept, daemon=True)
    t.start()
    yield srv.getsockname()[1]
    stop.set()
    t.join()
    srv.close()


def _connect_script(port):
    return f"import socket\ns = socket.create_connection(('127.0.0.1', {port}), timeout=2)\nprint('connected')\n"


def test_record_invariants():
    with pytest.raises(ValueError):
        ExecutionRecord("i", "", (), 1, 0.1, False)
    with pytest.raises(ValueError):
        ExecutionRecord("i", "", (), 0, -1.0, False)
    assert ExecutionRecord("i", "", (), TIMEOUT, 1.0, True).crashed


def test_banks_cover_every_category():
    banks = load_input_banks()
    for cat in Category:
        ids = [t.input_id for t in banks[cat]]
        assert len(ids) >= 7 and len(set(ids)) == len(ids)


@settings(max_examples=30, deadline=None)
@given(st.sampled_from([3, 5, 7]), st.integers(0, 10_000))
def test_selection_is_seeded_and_distinct(tmp_path_factory, n, seed):
    d = write_skill(tmp_path_factory.mktemp("s"))
    art = discover_skill(d, 3)
    a = select_test_inputs(art, n, seed)
    assert a == select_test_inputs(art, n, seed)
    assert len(a) == n and len({t.input_id for t in a}) == n
    assert all(t.category is Category.DataAnalysis for t in a)


def test_selection_rejects_small_bank(tmp_path):
    art = discover_skill(write_skill(tmp_path), 3)
    with pytest.raises(InsufficientBank):
        select_test_inputs(art, 3, 1, banks={Category.DataAnalysis: [INPUT]})


def test_sandbox_captures_stdout_and_files(tmp_path):
    script = BASIC_SCRIPT.replace('print("# Summary")', 'print("# Summary"); open("out.csv", "w").write("a,b\\n")')
    art = discover_skill(write_skill(tmp_path, files={"scripts/main.py": script}), 3)
    rec = execute_skill(art, INPUT)
    assert rec.exit_status == 0 and not rec.crashed
    assert "summary: compare two groups" in rec.transcript
    assert [p for p, _ in rec.produced_files] == ["out.csv"]
    assert not (art.root / "out.csv").exists()  # ran in a copy


def test_sandbox_nonzero_exit_is_crash(tmp_path):
    art = discover_skill(write_skill(tmp_path, files={"scripts/main.py": "import sys\nsys.exit(4)\n"}), 3)
    rec = execute_skill(art, INPUT)
    assert rec.crashed and rec.exit_status == 4


@pytest.mark.slow
def test_sandbox_timeout(tmp_path):
    art = discover_skill(write_skill(tmp_path, files={"scripts/main.py": "import time\ntime.sleep(30)\n"}), 3)
    rec = execute_skill(art, INPUT, SandboxLimits(timeout_seconds=0.5))
    assert rec.exit_status == TIMEOUT and rec.crashed and rec.duration < 10


def test_mode_b_network_is_blocked(tmp_path, listener):
    art = discover_skill(write_skill(tmp_path, files={"scripts/main.py": _connect_script(listener)}), 3)
    rec = execute_skill(art, INPUT)
    assert rec.crashed
    assert "blocked by audit sandbox" in rec.stderr


def test_mode_d_declared_host_is_allowed(tmp_path, listener):
    fm = {**BASIC_FRONTMATTER, "api_endpoint": f"http://127.0.0.1:{listener}/v1"}
    d = write_skill(tmp_path, frontmatter=fm, files={"scripts/main.py": _connect_script(listener)})
    rec = execute_skill(discover_skill(d, 3), INPUT)
    assert not rec.crashed, rec.stderr
    assert "connected" in rec.transcript


def test_mode_a_needs_generator(tmp_path):
    art = discover_skill(write_skill(tmp_path), 3)
    with pytest.raises(JudgeUnavailable):
        execute_skill(art, INPUT)


def test_mode_a_uses_example_output_block(tmp_path):
    body = "# Demo\n\n## Example Output\n\n````markdown\n# Summary\n\n```python\nx = 1\n```\n\nAnswer to {prompt}\n````\n"
    art = discover_skill(write_skill(tmp_path, body=body), 3)
    rec = execute_skill(art, INPUT, judge=RuleJudge())
    assert rec.transcript == "# Summary\n\n```python\nx = 1\n```\n\nAnswer to compare two groups\n"


def test_assertions_check_outputs_and_format(tmp_path):
    art = discover_skill(write_skill(tmp_path), 3)
    good = run_assertions(record(transcript="# Summary\nsummary: x"), art.manifest)
    assert all(c.passed for c in good)
    bad = run_assertions(record(transcript="nothing"), art.manifest)
    assert {c.name for c in bad if not c.passed} == {"output:summary", "format:markdown"}


def test_harness_caches_records(tmp_path):
    art = discover_skill(write_skill(tmp_path, files={"scripts/main.py": BASIC_SCRIPT}), 3)
    h = DynamicHarness(seed=5)
    first = h.records_for(art)
    assert h.smoke_runs(art) is first
    assert len(first) == 3
