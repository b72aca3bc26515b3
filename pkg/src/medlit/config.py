"""Run configuration: a plain ``key = value`` file with typed defaults.

Precedence is command-line override > file value > default. Relative paths
in a config file resolve against the file's directory.
"""

import dataclasses
import zlib
from dataclasses import dataclass, fields
from pathlib import Path

from ._io import read_text
from .exceptions import ConfigError

PATH_KEYS = (
    "metadata", "captions_dir", "annotations", "frame_predictions",
    "object_lexicon", "term_lexicon", "rater_b_annotations", "output_dir",
)
CHOICES = {
    "count_mode": ("occurrences", "distinct"),
    "feature_mode": ("counts", "rates", "combined"),
}


@dataclass(frozen=True)
class RunConfig:
    # inputs
    metadata: Path | None = None
    captions_dir: Path | None = None
    annotations: Path | None = None
    frame_predictions: Path | None = None
    object_lexicon: Path | None = None  # None: bundled starter lexicon
    term_lexicon: Path | None = None  # gazetteer baseline; optional
    rater_b_annotations: Path | None = None  # second annotator; optional
    output_dir: Path = Path("medlit-out")
    seed: int = 0
    # corpus
    train_fraction: float = 0.8
    stratify: bool = True
    # embeddings
    max_vocab: int = 5000
    emb_dim: int = 50
    emb_window: int = 5
    emb_negatives: int = 5
    emb_epochs: int = 5
    emb_learning_rate: float = 0.025
    # tagger
    tagger_hidden: int = 150
    tagger_epochs: int = 10
    tagger_learning_rate: float = 0.05
    tagger_clip_norm: float = 5.0
    freeze_embeddings: bool = False
    # frames
    frame_threshold: float = 0.10
    count_mode: str = "occurrences"
    # classifier
    feature_mode: str = "counts"
    clf_epochs: int = 1000
    clf_learning_rate: float = 0.1
    clf_l2_lambda: float = 1e-3
    clf_threshold: float = 0.5

    def __post_init__(self):
        for key, allowed in CHOICES.items():
            if getattr(self, key) not in allowed:
                raise ConfigError(f"{key} must be one of {allowed}, got {getattr(self, key)!r}")
        if not 0 < self.train_fraction < 1:
            raise ConfigError("train_fraction must be in (0, 1)")
        for key in ("frame_threshold", "clf_threshold"):
            if not 0 <= getattr(self, key) <= 1:
                raise ConfigError(f"{key} must be in [0, 1]")
        for key in ("max_vocab", "emb_dim", "emb_window", "tagger_hidden"):
            if getattr(self, key) < 1:
                raise ConfigError(f"{key} must be >= 1")
        for key in ("emb_negatives", "emb_epochs", "tagger_epochs", "clf_epochs"):
            if getattr(self, key) < 0:
                raise ConfigError(f"{key} must be >= 0")

    def stage_seed(self, stage):
        """Per-stage seed: global seed plus a CRC32 of the stage name, mod 2**32."""
        return (self.seed + zlib.crc32(stage.encode("utf-8"))) % 2**32

    def hyperparameters(self):
        return {f.name: getattr(self, f.name) for f in fields(self) if f.name not in PATH_KEYS}

    def as_dict(self):
        return {f.name: (str(v) if isinstance(v := getattr(self, f.name), Path) else v) for f in fields(self)}


_FIELDS = {f.name: f for f in fields(RunConfig)}
_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


def _coerce(key, value, base_dir):
    if key not in _FIELDS:
        raise ConfigError(f"unknown config key {key!r}")
    default = _FIELDS[key].default
    value = value.strip()
    if key in PATH_KEYS:
        if value == "":
            return None
        path = Path(value).expanduser()
        return path if path.is_absolute() or base_dir is None else base_dir / path
    try:
        if isinstance(default, bool):
            low = value.lower()
            if low not in _TRUE | _FALSE:
                raise ValueError(value)
            return low in _TRUE
        if isinstance(default, int):
            return int(value)
        if isinstance(default, float):
            return float(value)
    except ValueError:
        raise ConfigError(f"bad value for {key}: {value!r}") from None
    return value


def parse_config_text(text, base_dir=None):
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigError(f"line {lineno}: expected key = value")
        key = key.strip()
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        values[key] = _coerce(key, value, base_dir)
    return values


def load_config(path=None, overrides=None):
    """Build a :class:`RunConfig` from an optional file and ``key=value`` overrides."""
    values = {}
    if path is not None:
        path = Path(path)
        values.update(parse_config_text(read_text(path), base_dir=path.parent))
    for item in overrides or ():
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"override {item!r} is not key=value")
        values[key.strip()] = _coerce(key.strip(), value, Path.cwd())
    try:
        return RunConfig(**values)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


def replace(config, **changes):
    return dataclasses.replace(config, **changes)
