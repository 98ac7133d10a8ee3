"""Run configuration: one flat YAML mapping, overridable from the command line."""

import logging
from dataclasses import dataclass, fields, replace
from datetime import date, datetime
from pathlib import Path
from typing import Any

import yaml

from chronotopics.corpus import (
    DEFAULT_MIN_DOC_TOKENS,
    DEFAULT_SLICE_DAYS,
    CleanConfig,
    IngestConfig,
    parse_timestamp,
)
from chronotopics.errors import ChronotopicsError, ConfigError
from chronotopics.lexicon import get_function_words, get_gazetteer, load_word_list
from chronotopics.metrics import DEFAULT_GAMMAS, DEFAULT_K_WORDS, MetricsConfig
from chronotopics.sampler import NocConfig
from chronotopics.summarizer import SummaryConfig

logger = logging.getLogger(__name__)

MODELS = ("noc", "lda", "tot")
ON_ERROR = ("skip", "raise")

INT_KEYS = {
    "slice_width_days",
    "min_doc_tokens",
    "topics",
    "sweeps",
    "burn_in",
    "seed",
    "docs_per_topic",
    "sentences_per_topic",
    "k_words",
}
FLOAT_KEYS = {"alpha", "beta", "psi_smoothing", "similarity_threshold"}
BOOL_KEYS = {"entity_filter", "language_filter", "length_normalize"}
PATH_KEYS = {"stopword_list", "gazetteer"}
TIME_KEYS = {"window_start", "window_end"}


@dataclass(frozen=True)
class RunConfig:
    model: str = "noc"
    slice_width_days: int = DEFAULT_SLICE_DAYS
    min_doc_tokens: int = DEFAULT_MIN_DOC_TOKENS
    window_start: datetime | None = None
    window_end: datetime | None = None
    on_error: str = "skip"
    entity_filter: bool = True
    language_filter: bool = False
    stopword_list: Path | None = None
    gazetteer: Path | None = None
    topics: int = 5
    alpha: float = 1.0
    beta: float = 0.5
    sweeps: int = 500
    burn_in: int = 300
    seed: int = 0
    psi_init: str = "random"
    psi_smoothing: float | None = None
    estimate: str = "final"
    docs_per_topic: int = 200
    sentences_per_topic: int = 8
    similarity_threshold: float = 0.70
    length_normalize: bool = False
    k_words: int = DEFAULT_K_WORDS
    gammas: tuple[float, ...] = DEFAULT_GAMMAS

    @classmethod
    def keys(cls) -> set[str]:
        return {f.name for f in fields(cls)}

    @classmethod
    def from_yaml(cls, path: str | Path) -> "RunConfig":
        path = Path(path)
        try:
            data = yaml.safe_load(path.read_text(encoding="utf-8")) or {}
        except OSError as e:
            raise ConfigError(f"Cannot read config file {path}: {e}") from e
        except yaml.YAMLError as e:
            raise ConfigError(f"Invalid YAML in {path}: {e}") from e
        if not isinstance(data, dict):
            raise ConfigError(f"Config file {path} must hold a mapping")
        base_dir = path.parent.resolve()
        values = {str(k): coerce(str(k), v, base_dir) for k, v in data.items()}
        logger.debug("loaded config keys %s from %s", sorted(values), path)
        return cls().with_overrides(**values)

    def with_overrides(self, **values: Any) -> "RunConfig":
        """Copy with every non-None value applied; unknown keys are rejected."""
        unknown = sorted(set(values) - self.keys())
        if unknown:
            raise ConfigError(f"Unknown config keys: {', '.join(unknown)}")
        return replace(self, **{k: v for k, v in values.items() if v is not None})

    def validate(self) -> None:
        if self.model not in MODELS:
            raise ConfigError(f"model must be one of {MODELS}, got {self.model!r}")
        if self.on_error not in ON_ERROR:
            raise ConfigError(f"on_error must be one of {ON_ERROR}, got {self.on_error!r}")
        if self.slice_width_days < 1:
            raise ConfigError(f"slice_width_days must be positive, got {self.slice_width_days}")
        if self.min_doc_tokens < 1:
            raise ConfigError(f"min_doc_tokens must be positive, got {self.min_doc_tokens}")
        for key in sorted(PATH_KEYS):
            path = getattr(self, key)
            if path is not None and not Path(path).is_file():
                raise ConfigError(f"{key} file {path} does not exist")
        self.noc_config().validate()
        self.summary_config().validate()
        self.metrics_config().validate()

    def ingest_config(self) -> IngestConfig:
        return IngestConfig(
            window_start=self.window_start, window_end=self.window_end, on_error=self.on_error
        )

    def clean_config(self) -> CleanConfig:
        try:
            stopwords = (
                load_word_list(self.stopword_list) if self.stopword_list else get_function_words()
            )
            gazetteer = get_gazetteer()
            if self.gazetteer:
                gazetteer = gazetteer | load_word_list(self.gazetteer)
        except ChronotopicsError as e:
            raise ConfigError(str(e)) from e
        return CleanConfig(
            stopwords=stopwords,
            gazetteer=gazetteer,
            entity_filter=self.entity_filter,
            language_filter=self.language_filter,
        )

    def noc_config(self, topics: int | None = None) -> NocConfig:
        return NocConfig(
            T=self.topics if topics is None else topics,
            alpha=self.alpha,
            beta=self.beta,
            sweeps=self.sweeps,
            burn_in=self.burn_in,
            seed=self.seed,
            psi_init=self.psi_init,
            psi_smoothing=self.psi_smoothing,
            estimate=self.estimate,
        )

    def summary_config(self) -> SummaryConfig:
        return SummaryConfig(
            docs_per_topic=self.docs_per_topic,
            sentences_per_topic=self.sentences_per_topic,
            similarity_threshold=self.similarity_threshold,
            length_normalize=self.length_normalize,
            seed=self.seed,
        )

    def metrics_config(self) -> MetricsConfig:
        return MetricsConfig(k_words=self.k_words, gammas=self.gammas)


def parse_gammas(value: Any) -> tuple[float, ...]:
    if isinstance(value, str):
        value = [v for v in value.split(",") if v.strip()]
    if not isinstance(value, (list, tuple)):
        raise ValueError(f"expected a list of numbers, got {value!r}")
    return tuple(float(v) for v in value)


def parse_bool(value: Any) -> bool:
    if isinstance(value, bool):
        return value
    if isinstance(value, str) and value.lower() in ("true", "yes", "1", "false", "no", "0"):
        return value.lower() in ("true", "yes", "1")
    raise ValueError(f"expected a boolean, got {value!r}")


def coerce(key: str, value: Any, base_dir: Path | None = None) -> Any:
    """Convert one raw config value to the field's type; ConfigError when it does not fit."""
    if value is None:
        return None
    try:
        if key in INT_KEYS:
            if isinstance(value, bool) or float(value) != int(value):
                raise ValueError(f"expected an integer, got {value!r}")
            return int(value)
        if key in FLOAT_KEYS:
            return float(value)
        if key in BOOL_KEYS:
            return parse_bool(value)
        if key in PATH_KEYS:
            path = Path(str(value)).expanduser()
            if base_dir is not None and not path.is_absolute():
                path = base_dir / path
            return path
        if key in TIME_KEYS:
            if isinstance(value, date):
                value = value.isoformat()
            return parse_timestamp(value)
        if key == "gammas":
            return parse_gammas(value)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"Invalid value for {key}: {e}") from e
    return str(value) if key in RunConfig.keys() else value
