"""Loading and validation of the external rule tables and run configuration.

Two files drive the pipeline: the pattern config (YAML rule tables consumed
by the cleaner, segmenter and extractor) and an optional run config that
overrides paths, seeds and model settings.  Packaged defaults are used for
anything not supplied.
"""

from __future__ import annotations

import re
import unicodedata
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any

import yaml

from .errors import ConfigError
from .evalsplit import SplitSpec
from .mtl import TrainConfig
from .textutil import collapse_ws, nfc

TAG_CLASS_NAMES = ("judge", "prosecutor", "defendant")

DEFAULT_NAME_TAG = "<नाम>"
DEFAULT_PHONE_TAG = "<फोन-नंबर>"


def packaged_data(name: str) -> str:
    return resources.files("bailpipe").joinpath("data", name).read_text(encoding="utf-8")


def case_type_key(raw: str) -> str:
    """Canonical lookup key: casefold, collapse whitespace, strip trailing punctuation."""
    key = collapse_ws(nfc(raw).casefold())
    while key and unicodedata.category(key[-1])[0] in ("P", "S"):
        key = key[:-1].rstrip()
    return key


@dataclass(frozen=True)
class FilterThresholds:
    """Byte/script thresholds for the cleaning rules."""

    blank_bytes: int = 32
    min_bytes: int = 2048
    max_bytes: int = 8096
    min_devanagari_ratio: float = 0.5


@dataclass
class PatternConfig:
    """All rule tables: pivots, tag regexes, decision tokens, number words."""

    header_pivots: list[str]
    result_pivot: str
    delimiters: list[str]
    tag_patterns: dict[str, list[re.Pattern]]  # key order is tag precedence
    granted_tokens: list[str]
    denied_tokens: list[str]
    bond_context: list[str]
    surety_context: list[str]
    amount_window: int
    number_words: dict[str, int]
    case_type_aliases: dict[str, str]
    filters: FilterThresholds
    header_window: float = 0.4

    @classmethod
    def load(cls, path: Path | str | None = None) -> "PatternConfig":
        """Parse and validate a pattern-config file (packaged default if None)."""
        if path is None:
            text = packaged_data("patterns.yaml")
            source = "<packaged patterns.yaml>"
        else:
            path = Path(path)
            if not path.is_file():
                raise ConfigError(f"pattern config not found: {path}")
            text = path.read_text(encoding="utf-8")
            source = str(path)
        try:
            raw = yaml.safe_load(text)
        except yaml.YAMLError as exc:
            raise ConfigError(f"{source}: invalid YAML: {exc}") from exc
        if not isinstance(raw, dict):
            raise ConfigError(f"{source}: expected a mapping at top level")
        return cls.from_dict(raw, source)

    @classmethod
    def from_dict(cls, raw: dict[str, Any], source: str = "<dict>") -> "PatternConfig":
        pivots = [nfc(p) for p in raw.get("header_pivots", [])]
        if not pivots or any(not p for p in pivots):
            raise ConfigError(f"{source}: header_pivots must be non-empty strings")
        result_pivot = nfc(raw.get("result_pivot", ""))
        if not result_pivot:
            raise ConfigError(f"{source}: result_pivot must be a non-empty string")
        delimiters = [nfc(d) for d in raw.get("delimiters", ["।", ".", "?"])]

        tag_patterns: dict[str, list[re.Pattern]] = {}
        tags_raw = raw.get("tags", {})
        for name in TAG_CLASS_NAMES:
            patterns = []
            for expr in tags_raw.get(name, []):
                try:
                    patterns.append(re.compile(nfc(expr)))
                except re.error as exc:
                    raise ConfigError(
                        f"{source}: tags.{name} pattern {expr!r} does not compile: {exc}"
                    ) from exc
            tag_patterns[name] = patterns

        decisions = raw.get("decisions", {})
        granted = [nfc(t) for t in decisions.get("granted", [])]
        denied = [nfc(t) for t in decisions.get("denied", [])]
        if not granted or not denied:
            raise ConfigError(f"{source}: decisions.granted and decisions.denied required")

        amounts = raw.get("amounts", {})
        bond_context = [nfc(t) for t in amounts.get("bond_context", [])]
        surety_context = [nfc(t) for t in amounts.get("surety_context", [])]
        amount_window = int(amounts.get("context_window", 48))

        number_words = {}
        for word, value in raw.get("number_words", {}).items():
            value = int(value)
            if value <= 0:
                raise ConfigError(f"{source}: number word {word!r} must map to a positive value")
            number_words[nfc(str(word))] = value

        aliases: dict[str, str] = {}
        for canonical, alts in (raw.get("case_types") or {}).items():
            canonical_name = case_type_key(str(canonical))
            aliases[canonical_name] = canonical_name
            for alt in alts or []:
                aliases[case_type_key(str(alt))] = canonical_name

        filt = raw.get("filters", {})
        thresholds = FilterThresholds(
            blank_bytes=int(filt.get("blank_bytes", 32)),
            min_bytes=int(filt.get("min_bytes", 2048)),
            max_bytes=int(filt.get("max_bytes", 8096)),
            min_devanagari_ratio=float(filt.get("min_devanagari_ratio", 0.5)),
        )

        return cls(
            header_pivots=pivots,
            result_pivot=result_pivot,
            delimiters=delimiters,
            tag_patterns=tag_patterns,
            granted_tokens=granted,
            denied_tokens=denied,
            bond_context=bond_context,
            surety_context=surety_context,
            amount_window=amount_window,
            number_words=number_words,
            case_type_aliases=aliases,
            filters=thresholds,
            header_window=float(raw.get("header_window", 0.4)),
        )


@dataclass
class PipelineConfig:
    """Run-level configuration: paths, seed, model and split settings."""

    seed: int = 2021
    patterns_path: Path | None = None
    gazetteer_replace_path: Path | None = None
    gazetteer_ambiguous_path: Path | None = None
    name_tag: str = DEFAULT_NAME_TAG
    phone_tag: str = DEFAULT_PHONE_TAG
    encoder_dim: int = 64
    salient_fraction: float = 0.5
    lexstats_min_total: int = 10
    lexstats_min_share: float = 0.5
    lexstats_top_k: int = 6
    workers: int = 1
    train: TrainConfig = field(default_factory=TrainConfig)
    split: SplitSpec = field(default_factory=SplitSpec)

    def __post_init__(self):
        # One seed governs all randomness unless sub-configs override it.
        if self.train.seed is None:
            self.train = TrainConfig(**{**self.train.__dict__, "seed": self.seed})
        if self.split.seed is None:
            self.split = SplitSpec(**{**self.split.__dict__, "seed": self.seed})

    def load_patterns(self) -> PatternConfig:
        return PatternConfig.load(self.patterns_path)


def _resolve(base: Path, value: str | None) -> Path | None:
    if value is None:
        return None
    p = Path(value)
    return p if p.is_absolute() else (base / p)


def load_pipeline_config(path: Path | str | None = None, **overrides) -> PipelineConfig:
    """Build a PipelineConfig from an optional YAML file plus keyword overrides."""
    raw: dict[str, Any] = {}
    base = Path.cwd()
    if path is not None:
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"pipeline config not found: {path}")
        base = path.parent
        try:
            raw = yaml.safe_load(path.read_text(encoding="utf-8")) or {}
        except yaml.YAMLError as exc:
            raise ConfigError(f"{path}: invalid YAML: {exc}") from exc

    paths = raw.get("paths", {})
    anonymizer = raw.get("anonymizer", {})
    encoder = raw.get("encoder", {})
    summarize = raw.get("summarize", {})
    lexstats = raw.get("lexstats", {})

    seed = int(overrides.pop("seed", raw.get("seed", 2021)))

    train_raw = dict(raw.get("train", {}))
    train = TrainConfig(
        dim=int(train_raw.get("dim", encoder.get("dim", 64))),
        heads=int(train_raw.get("heads", 4)),
        epochs=int(train_raw.get("epochs", 30)),
        learning_rate=float(train_raw.get("learning_rate", 5e-5)),
        batch_size=int(train_raw.get("batch_size", 4)),
        max_sentences=int(train_raw.get("max_sentences", 32)),
        seed=train_raw.get("seed"),
    )

    split_raw = dict(raw.get("split", {}))
    ratios = tuple(split_raw.get("ratios", (70, 10, 20)))
    if sum(ratios) != 100:
        raise ConfigError(f"split.ratios must sum to 100, got {ratios}")
    split = SplitSpec(
        mode=split_raw.get("mode", "all"),
        ratios=ratios,
        district_counts=tuple(split_raw.get("district_counts", (44, 10, 17))),
        rescale=bool(split_raw.get("rescale", True)),
        seed=split_raw.get("seed"),
    )

    cfg = PipelineConfig(
        seed=seed,
        patterns_path=_resolve(base, paths.get("patterns")),
        gazetteer_replace_path=_resolve(base, paths.get("gazetteer_replace")),
        gazetteer_ambiguous_path=_resolve(base, paths.get("gazetteer_ambiguous")),
        name_tag=nfc(anonymizer.get("name_tag", DEFAULT_NAME_TAG)),
        phone_tag=nfc(anonymizer.get("phone_tag", DEFAULT_PHONE_TAG)),
        encoder_dim=int(encoder.get("dim", 64)),
        salient_fraction=float(summarize.get("salient_fraction", 0.5)),
        lexstats_min_total=int(lexstats.get("min_total", 10)),
        lexstats_min_share=float(lexstats.get("min_share", 0.5)),
        lexstats_top_k=int(lexstats.get("top_k", 6)),
        workers=int(raw.get("workers", 1)),
        train=train,
        split=split,
    )
    for key, value in overrides.items():
        if value is None:
            continue
        if not hasattr(cfg, key):
            raise ConfigError(f"unknown config override: {key}")
        setattr(cfg, key, value)

    for label, p in (
        ("patterns", cfg.patterns_path),
        ("gazetteer_replace", cfg.gazetteer_replace_path),
        ("gazetteer_ambiguous", cfg.gazetteer_ambiguous_path),
    ):
        if p is not None and not Path(p).is_file():
            raise ConfigError(f"configured {label} file not found: {p}")
    return cfg
