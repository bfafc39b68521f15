"""Dynamic execution: test-input selection, sandboxed runs, assertion checks."""

from __future__ import annotations

import hashlib
import json
import os
import random
import re
import shutil
import signal
import subprocess
import sys
import tempfile
import time
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Protocol
from urllib.parse import urlparse

from .config import Config, default_config
from .errors import InsufficientBank, SandboxSetupFailure
from .model import (
    Category,
    ExecutionMode,
    FileRecord,
    SkillArtifact,
    SkillManifest,
    classify_mode,
    estimate_complexity,
)

TIMEOUT = "timeout"
ALLOWED_COUNTS = (3, 5, 7)


@dataclass(frozen=True)
class TestInput:
    input_id: str
    category: Category
    prompt: str
    args: tuple[str, ...] = ()
    fixtures: tuple[str, ...] = ()

    __test__ = False  # not a pytest class


@dataclass(frozen=True)
class ExecutionRecord:
    input_id: str
    transcript: str
    produced_files: tuple[tuple[str, str], ...]  # (relative path, sha256)
    exit_status: int | str  # process exit code, or TIMEOUT
    duration: float
    crashed: bool
    stderr: str = ""

    def __post_init__(self):
        expected = self.exit_status == TIMEOUT or self.exit_status != 0
        if self.crashed != expected:
            raise ValueError("crashed must match a nonzero or timeout exit status")
        if self.duration < 0:
            raise ValueError("negative duration")


@dataclass(frozen=True)
class AssertionCheck:
    name: str
    passed: bool
    detail: str = ""


@dataclass(frozen=True)
class SandboxLimits:
    timeout_seconds: float = 120.0
    max_output_bytes: int = 512 * 1024 * 1024

    @classmethod
    def from_config(cls, config: Config) -> "SandboxLimits":
        return cls(
            timeout_seconds=config.get_float("sandbox", "timeout_seconds"),
            max_output_bytes=config.get_int("sandbox", "max_output_bytes"),
        )


class Generator(Protocol):
    """Produces a Mode A transcript from manifest instructions plus a prompt."""

    def generate(self, artifact: SkillArtifact, test_input: TestInput) -> str: ...


# ---------------------------------------------------------------- inputs


def load_input_banks(path: str | Path | None = None) -> dict[Category, list[TestInput]]:
    if path is None:
        raw = json.loads((resources.files("skillaudit") / "data" / "input_banks.json").read_text("utf-8"))
    else:
        raw = json.loads(Path(path).read_text("utf-8"))
    banks: dict[Category, list[TestInput]] = {}
    for key, items in raw.items():
        cat = Category.parse(key)
        banks[cat] = [
            TestInput(i["input_id"], cat, i.get("prompt", ""), tuple(i.get("args", ())), tuple(i.get("fixtures", ())))
            for i in items
        ]
    return banks


def select_test_inputs(
    artifact: SkillArtifact,
    n: int,
    seed: int,
    banks: dict[Category, list[TestInput]] | None = None,
) -> list[TestInput]:
    """Seeded shuffle of the category bank, first ``n`` entries."""
    if n not in ALLOWED_COUNTS:
        raise ValueError(f"test count must be one of {ALLOWED_COUNTS}, got {n}")
    banks = banks if banks is not None else load_input_banks()
    bank = sorted(banks.get(artifact.category, []), key=lambda t: t.input_id)
    if len(bank) < max(n, 7):
        raise InsufficientBank(f"category {artifact.category.value} bank has {len(bank)} inputs, need {max(n, 7)}")
    rng = random.Random(f"{artifact.skill_id}:{seed}")
    rng.shuffle(bank)
    return bank[:n]


# ---------------------------------------------------------------- sandbox

_NETWORK_GUARD = '''\
import os as _os
import socket as _socket

_allowed = set(h for h in _os.environ.get("SKILLAUDIT_ALLOWED_HOSTS", "").split(",") if h)
for _h in list(_allowed):
    try:
        for _info in _socket.getaddrinfo(_h, None):
            _allowed.add(_info[4][0])
    except Exception:
        pass


def _check(sock, address):
    if getattr(_socket, "AF_UNIX", None) is not None and sock.family == _socket.AF_UNIX:
        return
    host = address[0] if isinstance(address, tuple) and address else None
    if host is None or str(host) not in _allowed:
        raise PermissionError("network access to %s blocked by audit sandbox" % (host,))


_connect = _socket.socket.connect
_connect_ex = _socket.socket.connect_ex
_sendto = _socket.socket.sendto


def connect(self, address):
    _check(self, address)
    return _connect(self, address)


def connect_ex(self, address):
    _check(self, address)
    return _connect_ex(self, address)


def sendto(self, data, *rest):
    _check(self, rest[-1])
    return _sendto(self, data, *rest)


_socket.socket.connect = connect
_socket.socket.connect_ex = connect_ex
_socket.socket.sendto = sendto
'''

_ENTRY_NAMES = ("main", "run", "cli", "__main__")


def entry_script(artifact: SkillArtifact) -> FileRecord | None:
    scripts = artifact.script_files
    if not scripts:
        return None
    declared = artifact.frontmatter.get("entrypoint", "").strip().strip("\"'")
    for rec in scripts:
        if rec.path == declared:
            return rec
    for stem in _ENTRY_NAMES:
        for rec in scripts:
            if Path(rec.path).stem == stem:
                return rec
    python = [r for r in scripts if r.dialect == "python"]
    return (python or scripts)[0]


def _command(rec: FileRecord, path: Path) -> list[str]:
    interp = {
        "python": [sys.executable],
        "shell": ["bash"],
        "r": ["Rscript"],
        "javascript": ["node"],
        "perl": ["perl"],
        "ruby": ["ruby"],
    }.get(rec.dialect or "", [])
    return [*interp, str(path)]


def allowed_hosts(artifact: SkillArtifact, mode: ExecutionMode) -> list[str]:
    if mode is not ExecutionMode.D:
        return []
    hosts = []
    for decl in artifact.api_declarations:
        if decl.kind != "endpoint":
            continue
        parsed = urlparse(decl.value if "//" in decl.value else "//" + decl.value)
        if parsed.hostname:
            hosts.append(parsed.hostname)
    return sorted(set(hosts))


def _digests(root: Path) -> dict[str, str]:
    out = {}
    for p in sorted(root.rglob("*")):
        if p.is_file() and "__pycache__" not in p.parts:
            out[p.relative_to(root).as_posix()] = hashlib.sha256(p.read_bytes()).hexdigest()
    return out


def _sandbox_env(config: Config, guard_dir: Path, hosts: list[str], test_input: TestInput) -> dict[str, str]:
    env = {k: os.environ[k] for k in config.get_list("sandbox", "env_passthrough") if k in os.environ}
    env.update(
        PYTHONPATH=str(guard_dir),
        PYTHONHASHSEED="0",
        PYTHONDONTWRITEBYTECODE="1",
        PYTHONIOENCODING="utf-8",
        SKILLAUDIT_ALLOWED_HOSTS=",".join(hosts),
        SKILL_INPUT_ID=test_input.input_id,
        SKILL_INPUT_PROMPT=test_input.prompt,
        no_proxy="*",
    )
    return env


def run_in_sandbox(
    artifact: SkillArtifact,
    test_input: TestInput,
    limits: SandboxLimits,
    mode: ExecutionMode,
    config: Config | None = None,
) -> ExecutionRecord:
    config = config or default_config()
    entry = entry_script(artifact)
    if entry is None:
        raise SandboxSetupFailure(f"{artifact.skill_id}: no script to execute")
    with tempfile.TemporaryDirectory(prefix="skillaudit-") as tmp:
        tmpdir = Path(tmp)
        work = tmpdir / "skill"
        guard = tmpdir / "guard"
        try:
            shutil.copytree(artifact.root, work, ignore=shutil.ignore_patterns("__pycache__"))
            guard.mkdir()
            (guard / "sitecustomize.py").write_text(_NETWORK_GUARD, encoding="utf-8")
            for fixture in test_input.fixtures:
                src = Path(fixture)
                shutil.copy(src, work / src.name)
        except OSError as exc:
            raise SandboxSetupFailure(str(exc)) from exc
        before = _digests(work)
        cmd = _command(entry, work / entry.path)
        env = _sandbox_env(config, guard, allowed_hosts(artifact, mode), test_input)
        start = time.monotonic()
        try:
            proc = subprocess.Popen(
                [*cmd, *test_input.args],
                cwd=work,
                env=env,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                stderr=subprocess.PIPE,
                start_new_session=True,
            )
        except OSError as exc:
            raise SandboxSetupFailure(f"cannot start {cmd[0]}: {exc}") from exc
        try:
            out, err = proc.communicate(test_input.prompt.encode("utf-8"), timeout=limits.timeout_seconds)
            status: int | str = proc.returncode
        except subprocess.TimeoutExpired:
            _kill(proc)
            out, err = proc.communicate()
            status = TIMEOUT
        duration = time.monotonic() - start
        after = _digests(work)
    produced = tuple(sorted((p, d) for p, d in after.items() if before.get(p) != d))
    cap = limits.max_output_bytes
    return ExecutionRecord(
        input_id=test_input.input_id,
        transcript=out[:cap].decode("utf-8", "replace"),
        produced_files=produced,
        exit_status=status,
        duration=duration,
        crashed=status == TIMEOUT or status != 0,
        stderr=err[-65536:].decode("utf-8", "replace"),
    )


def _kill(proc: subprocess.Popen) -> None:
    try:
        os.killpg(proc.pid, signal.SIGKILL)
    except (ProcessLookupError, PermissionError):
        proc.kill()


def execute_skill(
    artifact: SkillArtifact,
    test_input: TestInput,
    limits: SandboxLimits | None = None,
    judge: Generator | None = None,
    config: Config | None = None,
) -> ExecutionRecord:
    config = config or default_config()
    limits = limits or SandboxLimits.from_config(config)
    mode = classify_mode(artifact)
    if mode is ExecutionMode.A:
        if judge is None:
            from .errors import JudgeUnavailable

            raise JudgeUnavailable("prompt-only skills need a judge-backed generator")
        start = time.monotonic()
        text = judge.generate(artifact, test_input)
        return ExecutionRecord(test_input.input_id, text, (), 0, time.monotonic() - start, False)
    return run_in_sandbox(artifact, test_input, limits, mode, config)


# ---------------------------------------------------------------- assertions


def _present(name: str, record: ExecutionRecord) -> bool:
    pattern = re.compile(r"(?<![A-Za-z0-9])" + re.escape(name).replace(r"\_", "[ _-]") + r"(?![A-Za-z0-9])", re.I)
    if pattern.search(record.transcript):
        return True
    return any(Path(p).stem.lower() == name.lower() for p, _ in record.produced_files)


def _format_ok(fmt: str, record: ExecutionRecord) -> tuple[bool, str]:
    text = record.transcript.strip()
    fmt = fmt.lower()
    if fmt == "json":
        try:
            json.loads(text)
            return True, "transcript parses as JSON"
        except ValueError:
            return any(p.endswith(".json") for p, _ in record.produced_files), "no JSON transcript"
    if fmt == "csv":
        ok = any(p.endswith(".csv") for p, _ in record.produced_files) or (
            len(text.splitlines()) >= 2 and all("," in ln for ln in text.splitlines()[:2])
        )
        return ok, "CSV output" if ok else "no CSV output"
    if fmt in ("markdown", "md"):
        ok = bool(re.search(r"^#{1,6}\s", text, re.M))
        return ok, "markdown headings" if ok else "no markdown heading"
    return bool(text), f"unchecked format '{fmt}'"


def run_assertions(record: ExecutionRecord, manifest: SkillManifest | None) -> list[AssertionCheck]:
    checks = []
    if manifest is not None:
        for name in manifest.output_names:
            ok = _present(name, record)
            checks.append(AssertionCheck(f"output:{name}", ok, "present" if ok else "missing from transcript and files"))
    nonempty = bool(record.transcript.strip()) or bool(record.produced_files)
    checks.append(AssertionCheck("non_empty_output", nonempty, "" if nonempty else "no transcript and no files"))
    fmt = manifest.frontmatter_raw.get("output_format", "").strip() if manifest else ""
    if fmt:
        ok, detail = _format_ok(fmt, record)
        checks.append(AssertionCheck(f"format:{fmt}", ok, detail))
    return checks


# ---------------------------------------------------------------- harness


@dataclass
class DynamicHarness:
    """Runs the dynamic phase; records are cached so gate-1 smoke runs are reused."""

    config: Config = field(default_factory=default_config)
    seed: int = 42
    generator: Generator | None = None
    limits: SandboxLimits | None = None
    banks: dict[Category, list[TestInput]] | None = None
    _cache: dict[str, list[ExecutionRecord]] = field(default_factory=dict, repr=False)

    def inputs_for(self, artifact: SkillArtifact) -> list[TestInput]:
        n = estimate_complexity(artifact, self.config).dynamic_test_count
        return select_test_inputs(artifact, n, self.seed, self.banks)

    def records_for(self, artifact: SkillArtifact) -> list[ExecutionRecord]:
        key = str(Path(artifact.root).resolve())
        if key not in self._cache:
            limits = self.limits or SandboxLimits.from_config(self.config)
            self._cache[key] = [
                execute_skill(artifact, t, limits, self.generator, self.config) for t in self.inputs_for(artifact)
            ]
        return self._cache[key]

    smoke_runs = records_for
