"""Layered INI configuration: packaged defaults, then an optional user file."""

from __future__ import annotations

import configparser
import re
from functools import cached_property
from importlib import resources
from pathlib import Path

from .errors import ConfigError

_DATA_FILES = ("defaults.ini", "rubric.ini")


def _new_parser() -> configparser.ConfigParser:
    parser = configparser.ConfigParser(
        delimiters=("=",), interpolation=None, comment_prefixes=("#",), inline_comment_prefixes=None
    )
    parser.optionxform = str  # keep key case
    return parser


class Config:
    """Read-only view over the merged configuration.

    Sections and keys follow ``data/defaults.ini`` and ``data/rubric.ini``.
    """

    def __init__(self, parser: configparser.ConfigParser, source: str = "<defaults>"):
        self._parser = parser
        self.source = source

    @classmethod
    def load(cls, path: str | Path | None = None) -> "Config":
        parser = _new_parser()
        pkg = resources.files("skillaudit") / "data"
        for name in _DATA_FILES:
            parser.read_string((pkg / name).read_text(encoding="utf-8"), source=name)
        source = "<defaults>"
        if path is not None:
            path = Path(path)
            try:
                text = path.read_text(encoding="utf-8")
            except OSError as exc:
                raise ConfigError(f"cannot read config {path}: {exc}") from exc
            try:
                parser.read_string(text, source=str(path))
            except configparser.Error as exc:
                raise ConfigError(str(exc)) from exc
            source = str(path)
        return cls(parser, source)

    @classmethod
    def from_string(cls, text: str) -> "Config":
        """Defaults overlaid with ``text`` (handy in tests)."""
        cfg = cls.load()
        cfg._parser.read_string(text, source="<string>")
        return cfg

    # raw access -------------------------------------------------------
    def sections(self, prefix: str) -> list[str]:
        return [s for s in self._parser.sections() if s.startswith(prefix)]

    def has(self, section: str, key: str) -> bool:
        return self._parser.has_option(section, key)

    def get(self, section: str, key: str, fallback: str | None = None) -> str:
        value = self._parser.get(section, key, fallback=fallback)
        if value is None:
            raise ConfigError(f"missing config key [{section}] {key}")
        return value.strip()

    def get_int(self, section: str, key: str) -> int:
        try:
            return int(self.get(section, key))
        except ValueError as exc:
            raise ConfigError(f"[{section}] {key} must be an integer") from exc

    def get_float(self, section: str, key: str) -> float:
        try:
            return float(self.get(section, key))
        except ValueError as exc:
            raise ConfigError(f"[{section}] {key} must be a number") from exc

    def get_list(self, section: str, key: str) -> list[str]:
        raw = self.get(section, key, fallback="")
        return [line.strip() for line in raw.splitlines() if line.strip()]

    def get_map(self, section: str, key: str) -> dict[str, str]:
        """List of ``name: value`` lines as a dict."""
        out: dict[str, str] = {}
        for line in self.get_list(section, key):
            name, sep, value = line.partition(":")
            if not sep:
                raise ConfigError(f"[{section}] {key}: expected 'name: value', got {line!r}")
            out[name.strip()] = value.strip()
        return out

    def get_patterns(self, section: str, key: str) -> list[re.Pattern[str]]:
        return _compile(tuple(self.get_list(section, key)), f"[{section}] {key}")

    def section_items(self, section: str) -> dict[str, str]:
        return {k: v.strip() for k, v in self._parser.items(section)}

    # frequently used values -----------------------------------------------
    @cached_property
    def default_version(self) -> str:
        return self.get("framework", "default_version")

    @cached_property
    def max_crash_rate(self) -> float:
        return self.get_float("gate1", "max_crash_rate")


_PATTERN_CACHE: dict[tuple[str, ...], list[re.Pattern[str]]] = {}


def _compile(patterns: tuple[str, ...], where: str) -> list[re.Pattern[str]]:
    cached = _PATTERN_CACHE.get(patterns)
    if cached is not None:
        return cached
    try:
        compiled = [re.compile(p, re.IGNORECASE | re.MULTILINE) for p in patterns]
    except re.error as exc:
        raise ConfigError(f"{where}: bad pattern: {exc}") from exc
    _PATTERN_CACHE[patterns] = compiled
    return compiled


_DEFAULT: Config | None = None


def default_config() -> Config:
    global _DEFAULT
    if _DEFAULT is None:
        _DEFAULT = Config.load()
    return _DEFAULT
