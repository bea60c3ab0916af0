"""Run configuration: one JSON-serialisable record per run."""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Mapping, Sequence

from .analysis import ALPHA, METHODS
from .discourse import FLESCH_CONSTANTS
from .errors import ConfigError
from .lexical import MTLD_THRESHOLD
from .registry import ExtractionConfig
from .syntactic import WL_AGGREGATES, WL_LABELS

CONFIG_FILE = "run_config.json"


@dataclass(frozen=True)
class BackendSettings:
    name: str = "mock"
    endpoint: str | None = None
    model: str | None = None
    temperature: float = 1.0
    api_key_env: str = "OPENAI_API_KEY"
    retries: int = 3
    backoff: float = 1.0
    concurrency: int = 4
    template_id: str = "mt180_v1"
    templates_dir: str | None = None


@dataclass(frozen=True)
class RunConfig:
    lexicon_paths: tuple[str, ...] = ()
    flesch_variant: str = "english"
    mtld_threshold: float = MTLD_THRESHOLD
    wl_iterations: int = 3
    wl_label: str = "deprel"
    wl_aggregate: str = "nearest"
    seed: int = 42
    granularity: float = 0.5
    alpha: float = ALPHA
    test_method: str = "mann-whitney"
    holm: bool = False
    directions: tuple[str, ...] = ("upgrade", "downgrade")
    backend: BackendSettings = field(default_factory=BackendSettings)
    out_dir: str = "out"

    def __post_init__(self) -> None:
        if self.flesch_variant not in FLESCH_CONSTANTS:
            raise ConfigError(f"flesch_variant must be one of {sorted(FLESCH_CONSTANTS)}")
        if self.wl_label not in WL_LABELS:
            raise ConfigError(f"wl_label must be one of {WL_LABELS}")
        if self.wl_aggregate not in WL_AGGREGATES:
            raise ConfigError(f"wl_aggregate must be one of {WL_AGGREGATES}")
        if self.test_method not in METHODS:
            raise ConfigError(f"test_method must be one of {METHODS}")
        if not 0 < self.mtld_threshold < 1:
            raise ConfigError("mtld_threshold must lie in (0, 1)")
        if not 0 < self.alpha < 1:
            raise ConfigError("alpha must lie in (0, 1)")
        if self.granularity <= 0:
            raise ConfigError("granularity must be positive")
        if self.wl_iterations < 0:
            raise ConfigError("wl_iterations must be non-negative")

    @property
    def extraction(self) -> ExtractionConfig:
        return ExtractionConfig(
            self.flesch_variant, self.mtld_threshold, self.wl_iterations, self.wl_label, self.wl_aggregate
        )

    def to_json(self) -> dict[str, Any]:
        obj = asdict(self)
        obj["lexicon_paths"] = list(self.lexicon_paths)
        obj["directions"] = list(self.directions)
        return obj

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2, sort_keys=True, ensure_ascii=False) + "\n"

    def digest(self, *parts: str, keys: Sequence[str] | None = None) -> str:
        """Content hash of this config (minus the output location) and ``parts``.

        With ``keys``, only those fields enter the hash.
        """
        obj = self.to_json()
        obj.pop("out_dir")
        if keys is not None:
            obj = {k: obj[k] for k in keys}
        h = hashlib.sha256(json.dumps(obj, sort_keys=True).encode("utf-8"))
        for p in parts:
            h.update(b"\0" + p.encode("utf-8"))
        return h.hexdigest()

    @classmethod
    def from_json(cls, obj: Mapping[str, Any]) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(obj) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
        kwargs = dict(obj)
        if "backend" in kwargs:
            b = kwargs["backend"] or {}
            bad = set(b) - {f.name for f in fields(BackendSettings)}
            if bad:
                raise ConfigError(f"unknown backend keys: {', '.join(sorted(bad))}")
            kwargs["backend"] = BackendSettings(**b)
        for key in ("lexicon_paths", "directions"):
            if key in kwargs:
                kwargs[key] = tuple(kwargs[key])
        try:
            return cls(**kwargs)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None

    def updated(self, **changes: Any) -> "RunConfig":
        changes = {k: v for k, v in changes.items() if v is not None}
        backend = changes.pop("backend", None)
        cfg = replace(self, **changes)
        if backend:
            cfg = replace(cfg, backend=replace(cfg.backend, **backend))
        return cfg


def load_config(path: str | Path | None) -> RunConfig:
    if path is None:
        return RunConfig()
    path = Path(path)
    try:
        obj = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"{path}: no such config file") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}: invalid JSON ({exc.msg})") from None
    if not isinstance(obj, dict):
        raise ConfigError(f"{path}: config must be a JSON object")
    return RunConfig.from_json(obj)
