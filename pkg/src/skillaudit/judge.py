"""Output judges: a deterministic rule judge and an HTTP model-judge client.

Both expose the same three operations:

* ``judge_output(record, rubric, manifest, skill_id)`` -> DynamicScorecard
* ``score_static(artifact, rubric)`` -> {criterion id: fraction in [0, 1]}
* ``generate(artifact, test_input)`` -> transcript text (Mode A generator)
"""

from __future__ import annotations

import json
import math
import os
import re
import threading
import urllib.error
import urllib.request
from dataclasses import dataclass, field
from typing import Protocol, Sequence

from .config import Config, default_config
from .errors import ConfigError, JudgeUnavailable, MalformedJudgeResponse
from .harness import ExecutionRecord, TestInput
from .model import SkillArtifact, SkillManifest
from .predicates import DYNAMIC, STATIC, DynamicContext, StaticContext
from .rubric import DynamicCriterion, EffectiveRubric
from .scoring import DynamicScorecard


class OutputJudge(Protocol):
    def judge_output(
        self,
        record: ExecutionRecord,
        rubric: EffectiveRubric,
        manifest: SkillManifest | None = None,
        skill_id: str = "",
    ) -> DynamicScorecard: ...

    def score_static(self, artifact: SkillArtifact, rubric: EffectiveRubric) -> dict[str, float]: ...

    def generate(self, artifact: SkillArtifact, test_input: TestInput) -> str: ...


_EXAMPLE_BLOCK = re.compile(
    r"^#+\s*example\s+output[^\n]*\n+(?:[^\n`]*\n)*?(`{3,})[^\n]*\n(.*?)^\1[ \t]*$", re.I | re.M | re.S
)


@dataclass
class RuleJudge:
    """Scores each criterion 0 or full points through its named predicate."""

    config: Config = field(default_factory=default_config)

    def _dynamic_predicate(self, crit: DynamicCriterion):
        try:
            return DYNAMIC[crit.predicate]
        except KeyError:
            raise ConfigError(f"criterion {crit.id} names unknown predicate {crit.predicate!r}") from None

    def judge_output(
        self,
        record: ExecutionRecord,
        rubric: EffectiveRubric,
        manifest: SkillManifest | None = None,
        skill_id: str = "",
    ) -> DynamicScorecard:
        ctx = DynamicContext(record, manifest, self.config)
        points = {c.id: (c.points if self._dynamic_predicate(c)(ctx) else 0.0) for c in rubric.dynamic}
        return DynamicScorecard.from_points(record.input_id, rubric, points)

    def score_static(self, artifact: SkillArtifact, rubric: EffectiveRubric) -> dict[str, float]:
        ctx = StaticContext(artifact, self.config)
        out = {}
        for crit in rubric.static:
            try:
                pred = STATIC[crit.predicate]
            except KeyError:
                raise ConfigError(f"criterion {crit.id} names unknown predicate {crit.predicate!r}") from None
            out[crit.id] = 1.0 if pred(ctx) else 0.0
        return out

    def generate(self, artifact: SkillArtifact, test_input: TestInput) -> str:
        """Render the manifest's "Example Output" block for this prompt.

        Stands in for a model when a prompt-only skill is audited offline.
        ``{prompt}`` and ``{input_id}`` placeholders in the block are filled in.
        """
        m = _EXAMPLE_BLOCK.search(artifact.body)
        if not m:
            return f"{artifact.skill_id} response to: {test_input.prompt}\n"
        text = m.group(2)
        return text.replace("{prompt}", test_input.prompt).replace("{input_id}", test_input.input_id)


def _rubric_payload(criteria: Sequence) -> dict:
    return {
        "criteria": [
            {"id": c.id, "max": float(getattr(c, "points", getattr(c, "weight", 0.0))), "guidance": c.guidance}
            for c in criteria
        ]
    }


def validate_response(payload: object, criteria: Sequence) -> dict[str, float]:
    """Strict check of a judge reply; anything unexpected is rejected."""
    if not isinstance(payload, dict):
        raise MalformedJudgeResponse("response is not a JSON object")
    points = payload.get("points")
    rationale = payload.get("rationale")
    if not isinstance(points, dict) or not isinstance(rationale, dict):
        raise MalformedJudgeResponse("response needs 'points' and 'rationale' objects")
    expected = {c.id: float(getattr(c, "points", getattr(c, "weight", 0.0))) for c in criteria}
    if set(points) != set(expected):
        missing = sorted(set(expected) - set(points))
        extra = sorted(set(points) - set(expected))
        raise MalformedJudgeResponse(f"criterion ids differ (missing {missing}, unexpected {extra})")
    if set(rationale) != set(expected) or not all(isinstance(v, str) for v in rationale.values()):
        raise MalformedJudgeResponse("rationale must give one string per criterion")
    out = {}
    for cid, value in points.items():
        if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
            raise MalformedJudgeResponse(f"points for {cid} is not a finite number")
        if not 0.0 <= value <= expected[cid]:
            raise MalformedJudgeResponse(f"points for {cid} ({value}) outside [0, {expected[cid]}]")
        out[cid] = float(value)
    return out


@dataclass
class RemoteJudge:
    """JSON-over-HTTP client for a model judge endpoint.

    Requests are bounded by ``max_in_flight`` concurrent calls, each with a
    timeout and one retry on transport failure. Replies that do not match the
    wire contract raise MalformedJudgeResponse and are never retried.
    """

    endpoint: str
    token: str | None = None
    timeout: float = 60.0
    max_in_flight: int = 4
    _gate: threading.BoundedSemaphore = field(init=False, repr=False)

    def __post_init__(self):
        self._gate = threading.BoundedSemaphore(self.max_in_flight)

    @classmethod
    def from_config(cls, config: Config | None = None) -> "RemoteJudge":
        config = config or default_config()
        endpoint = config.get("judge", "endpoint").strip()
        if not endpoint:
            raise ConfigError("no judge endpoint configured ([judge] endpoint)")
        token_var = config.get("judge", "credential_env").strip()
        return cls(
            endpoint=endpoint,
            token=os.environ.get(token_var) if token_var else None,
            timeout=config.get_float("judge", "timeout_seconds"),
            max_in_flight=config.get_int("judge", "max_in_flight"),
        )

    def _post(self, body: dict) -> object:
        data = json.dumps(body, sort_keys=True).encode("utf-8")
        headers = {"Content-Type": "application/json", "Accept": "application/json"}
        if self.token:
            headers["Authorization"] = f"Bearer {self.token}"
        last: Exception | None = None
        with self._gate:
            for _ in range(2):
                req = urllib.request.Request(self.endpoint, data=data, headers=headers, method="POST")
                try:
                    with urllib.request.urlopen(req, timeout=self.timeout) as resp:
                        raw = resp.read()
                except (urllib.error.URLError, TimeoutError, ConnectionError, OSError) as exc:
                    last = exc
                    continue
                try:
                    return json.loads(raw.decode("utf-8"))
                except (UnicodeDecodeError, ValueError) as exc:
                    raise MalformedJudgeResponse(f"response is not JSON: {exc}") from exc
        raise JudgeUnavailable(f"judge endpoint {self.endpoint} unreachable: {last}")

    def _score(self, skill_id: str, input_id: str, transcript: str, criteria: Sequence) -> dict[str, float]:
        body = {
            "skill_id": skill_id,
            "input_id": input_id,
            "transcript": transcript,
            "rubric": _rubric_payload(criteria),
        }
        return validate_response(self._post(body), criteria)

    def judge_output(
        self,
        record: ExecutionRecord,
        rubric: EffectiveRubric,
        manifest: SkillManifest | None = None,
        skill_id: str = "",
    ) -> DynamicScorecard:
        points = self._score(skill_id, record.input_id, record.transcript, rubric.dynamic)
        return DynamicScorecard.from_points(record.input_id, rubric, points)

    def score_static(self, artifact: SkillArtifact, rubric: EffectiveRubric) -> dict[str, float]:
        parts = [artifact.manifest_text]
        for rec, text in artifact.script_texts():
            parts.append(f"\n--- {rec.path} ---\n{text}")
        points = self._score(artifact.skill_id, "static", "".join(parts), rubric.static)
        return {c.id: points[c.id] / c.weight for c in rubric.static}

    def generate(self, artifact: SkillArtifact, test_input: TestInput) -> str:
        reply = self._post(
            {
                "task": "generate",
                "skill_id": artifact.skill_id,
                "input_id": test_input.input_id,
                "instructions": artifact.body,
                "prompt": test_input.prompt,
            }
        )
        if not isinstance(reply, dict) or not isinstance(reply.get("text"), str):
            raise MalformedJudgeResponse("generate reply needs a 'text' string")
        return reply["text"]


def make_judge(kind: str, config: Config | None = None) -> OutputJudge:
    config = config or default_config()
    if kind == "rule":
        return RuleJudge(config)
    if kind == "remote":
        return RemoteJudge.from_config(config)
    raise ConfigError(f"unknown judge {kind!r}; expected 'rule' or 'remote'")
