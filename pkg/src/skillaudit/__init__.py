"""Pre-deployment audits for agent skills, plus expert-agreement statistics."""

from .model import Category, ComplexityTier, ExecutionMode, SkillArtifact, SkillManifest, discover_skill, parse_manifest
from .pipeline import AuditSettings, audit_skill, batch_audit
from .report import AuditReport, emit_json, emit_markdown, parse_json
from .scoring import Disposition, assign_disposition, compute_final

__all__ = [
    "AuditReport",
    "AuditSettings",
    "Category",
    "ComplexityTier",
    "Disposition",
    "ExecutionMode",
    "SkillArtifact",
    "SkillManifest",
    "assign_disposition",
    "audit_skill",
    "batch_audit",
    "compute_final",
    "discover_skill",
    "emit_json",
    "emit_markdown",
    "parse_json",
    "parse_manifest",
]
__version__ = "0.1.0"
