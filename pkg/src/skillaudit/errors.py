"""Exception hierarchy shared by the audit engine and the study harness."""

from __future__ import annotations


class AuditError(Exception):
    """Base class; the CLI maps subclasses of InputError to exit code 2."""


class InputError(AuditError):
    """Problems with user-supplied files or arguments."""


# manifest / artifact
class EmptyFile(InputError):
    pass


class MissingFrontmatter(InputError):
    pass


class MissingRequiredField(InputError):
    def __init__(self, field: str):
        super().__init__(f"missing required manifest field: {field}")
        self.field = field


class NoManifest(InputError):
    pass


class UnreadableFile(InputError):
    def __init__(self, path):
        super().__init__(f"cannot read {path}")
        self.path = path


class UnclassifiableMode(InputError):
    pass


class ConfigError(InputError):
    pass


# gates / harness
class MissingSmokeRuns(AuditError):
    pass


class InsufficientBank(AuditError):
    pass


class SandboxSetupFailure(AuditError):
    pass


class JudgeUnavailable(AuditError):
    pass


class MalformedJudgeResponse(AuditError):
    pass


# scoring
class WrongCardinality(AuditError):
    pass


class UnknownCriterion(AuditError):
    pass


class OutOfRange(AuditError):
    pass


# statistics
class DegenerateMatrix(AuditError):
    pass


class LengthMismatch(InputError):
    pass


# study harness
class BothAbsent(InputError):
    pass


class SkillMismatch(InputError):
    pass


class IncompleteRatings(InputError):
    pass


class UnknownSkillInReports(InputError):
    pass


class UnknownDefect(InputError):
    pass
