"""Rubric manifest, scene overrides and effective-rubric resolution."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, replace

from .config import Config, default_config
from .errors import ConfigError, UnknownCriterion
from .model import Category, ExecutionMode

DIMENSIONS = (
    "functional suitability",
    "reliability",
    "usability",
    "performance efficiency",
    "maintainability",
    "portability",
    "security",
    "compatibility",
)
STATIC_CRITERIA_COUNT = 25
LAYER1_TOTAL = 40
LAYER2_TOTAL = 60
VERSIONS = ("1.0", "1.1.0")


@dataclass(frozen=True)
class StaticCriterion:
    id: str
    dimension: str
    title: str
    weight: float
    guidance: str
    predicate: str


@dataclass(frozen=True)
class DynamicCriterion:
    id: str
    title: str
    points: float
    guidance: str
    predicate: str


@dataclass(frozen=True)
class RubricManifest:
    static: tuple[StaticCriterion, ...]
    layer1: tuple[DynamicCriterion, ...]
    layer2: dict[Category, tuple[DynamicCriterion, ...]] = field(hash=False)

    def validate(self) -> None:
        if len(self.static) != STATIC_CRITERIA_COUNT:
            raise ConfigError(f"expected {STATIC_CRITERIA_COUNT} static criteria, found {len(self.static)}")
        dims = {c.dimension for c in self.static}
        if dims != set(DIMENSIONS):
            raise ConfigError(f"static dimensions {sorted(dims)} differ from the eight quality dimensions")
        if len({c.id for c in self.static}) != len(self.static):
            raise ConfigError("duplicate static criterion id")
        if any(c.weight <= 0 for c in self.static):
            raise ConfigError("static weights must be positive")
        if abs(sum(c.points for c in self.layer1) - LAYER1_TOTAL) > 1e-9:
            raise ConfigError("layer 1 maxima must sum to 40")
        for cat in Category:
            crit = self.layer2.get(cat)
            if not crit:
                raise ConfigError(f"no layer 2 rubric for category {cat.value}")
            if abs(sum(c.points for c in crit) - LAYER2_TOTAL) > 1e-9:
                raise ConfigError(f"layer 2 maxima for category {cat.value} must sum to 60")

    def static_ids(self) -> list[str]:
        return [c.id for c in self.static]


@dataclass(frozen=True)
class SceneOverride:
    category: Category
    criterion_id: str
    guidance: str
    predicate: str
    modes: frozenset[ExecutionMode] | None = None  # None: every mode

    def matches(self, category: Category, mode: ExecutionMode) -> bool:
        return self.category == category and (self.modes is None or mode in self.modes)


@dataclass(frozen=True)
class RubricNote:
    key: str
    category: Category
    text: str
    modes: frozenset[ExecutionMode] | None = None

    def matches(self, category: Category, mode: ExecutionMode) -> bool:
        return self.category == category and (self.modes is None or mode in self.modes)


@dataclass(frozen=True)
class EffectiveRubric:
    category: Category
    mode: ExecutionMode
    static: tuple[StaticCriterion, ...]
    layer1: tuple[DynamicCriterion, ...]
    layer2: tuple[DynamicCriterion, ...]
    notes: tuple[str, ...] = ()
    overridden: tuple[str, ...] = ()

    @property
    def dynamic(self) -> tuple[DynamicCriterion, ...]:
        return self.layer1 + self.layer2

    def static_criterion(self, cid: str) -> StaticCriterion:
        for c in self.static:
            if c.id == cid:
                return c
        raise UnknownCriterion(cid)

    def to_dict(self) -> dict:
        """Mode-independent content, used for cross-version comparison."""
        return {
            "category": self.category.value,
            "static": [asdict(c) for c in self.static],
            "layer1": [asdict(c) for c in self.layer1],
            "layer2": [asdict(c) for c in self.layer2],
            "notes": list(self.notes),
            "overridden": list(self.overridden),
        }


def _modes(raw: str) -> frozenset[ExecutionMode] | None:
    items = [m.strip() for m in raw.replace(",", "\n").splitlines() if m.strip()]
    return frozenset(ExecutionMode(m) for m in items) if items else None


def load_rubric(config: Config | None = None) -> RubricManifest:
    config = config or default_config()
    static = []
    for sec in config.sections("static:"):
        v = config.section_items(sec)
        static.append(
            StaticCriterion(sec.split(":", 1)[1], v["dimension"], v.get("title", ""), float(v.get("weight", 1)),
                            v.get("guidance", ""), v["predicate"])
        )
    layer1 = []
    for sec in config.sections("layer1:"):
        v = config.section_items(sec)
        layer1.append(DynamicCriterion(sec.split(":", 1)[1], v.get("title", ""), float(v["points"]),
                                       v.get("guidance", ""), v["predicate"]))
    layer2: dict[Category, list[DynamicCriterion]] = {}
    for sec in config.sections("layer2:"):
        _, cat, key = sec.split(":", 2)
        v = config.section_items(sec)
        layer2.setdefault(Category.parse(cat), []).append(
            DynamicCriterion(f"{cat}.{key}", v.get("title", ""), float(v["points"]), v.get("guidance", ""),
                             v["predicate"])
        )
    rubric = RubricManifest(tuple(static), tuple(layer1), {k: tuple(v) for k, v in layer2.items()})
    rubric.validate()
    return rubric


def _check_version(version: str) -> str:
    if version not in VERSIONS:
        raise ConfigError(f"unknown framework version {version!r}; expected one of {VERSIONS}")
    return version


def load_overrides(version: str, config: Config | None = None) -> list[SceneOverride]:
    """Overrides shipped for ``version`` (none for 1.0)."""
    config = config or default_config()
    _check_version(version)
    out = []
    for sec in config.sections(f"override:{version}:"):
        _, _, cat, cid = sec.split(":", 3)
        v = config.section_items(sec)
        out.append(SceneOverride(Category.parse(cat), cid, v.get("guidance", ""), v["predicate"],
                                 _modes(v.get("modes", ""))))
    return out


def load_notes(version: str, config: Config | None = None) -> list[RubricNote]:
    config = config or default_config()
    _check_version(version)
    out = []
    for sec in config.sections(f"note:{version}:"):
        _, _, cat, key = sec.split(":", 3)
        v = config.section_items(sec)
        out.append(RubricNote(key, Category.parse(cat), v.get("text", ""), _modes(v.get("modes", ""))))
    return out


def validate_overrides(rubric: RubricManifest, overrides: list[SceneOverride]) -> None:
    ids = set(rubric.static_ids())
    seen: set[tuple] = set()
    for o in overrides:
        if o.criterion_id not in ids:
            raise UnknownCriterion(f"override targets unknown criterion {o.criterion_id!r}")
        key = (o.category, o.modes, o.criterion_id)
        if key in seen:
            raise ConfigError(f"duplicate override for {key}")
        seen.add(key)


def apply_scene_overrides(
    rubric: RubricManifest,
    overrides: list[SceneOverride],
    category: Category,
    mode: ExecutionMode,
    notes: list[RubricNote] | tuple = (),
) -> EffectiveRubric:
    validate_overrides(rubric, overrides)
    active = {o.criterion_id: o for o in overrides if o.matches(category, mode)}
    static = tuple(
        replace(c, guidance=active[c.id].guidance, predicate=active[c.id].predicate) if c.id in active else c
        for c in rubric.static
    )
    return EffectiveRubric(
        category=category,
        mode=mode,
        static=static,
        layer1=rubric.layer1,
        layer2=rubric.layer2[category],
        notes=tuple(n.text for n in notes if n.matches(category, mode)),
        overridden=tuple(c for c in rubric.static_ids() if c in active),
    )


def effective_rubric(
    category: Category, mode: ExecutionMode, version: str, config: Config | None = None
) -> EffectiveRubric:
    config = config or default_config()
    return apply_scene_overrides(
        load_rubric(config), load_overrides(version, config), category, mode, load_notes(version, config)
    )
