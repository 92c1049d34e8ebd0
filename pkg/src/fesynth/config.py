"""Pipeline configuration: dataclasses, documented defaults, YAML loading.

Secrets (API tokens) are never read from config files. Config files carry the
*names* of environment variables; values are resolved at call time.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field, asdict
from pathlib import Path

import yaml

from .errors import ConfigError

# Protocol defaults, surfaced in reports and echoed by eval output.
DEFAULT_STAR_THRESHOLD = 10
DEFAULT_BLACKLIST = ["learn", "tutorial", "example", "demo"]
DEFAULT_TEMPERATURE = 0.1
DEFAULT_TOP_P = 0.95
DEFAULT_SIMILARITY_THRESHOLD = 0.9
DEFAULT_EVAL_SAMPLES = 50
DEFAULT_EVAL_KS = [1, 3, 5]

# Search keywords shipped as a configurable default; the choice is ours.
DEFAULT_SEARCH_KEYWORDS = [
    "react component library",
    "react ui components",
    "react dashboard",
    "react widgets",
]

VIEWPORT = (1280, 720)

_SECRET_KEY_FRAGMENTS = ("token", "secret", "api_key", "password")


@dataclass
class RetryPolicy:
    """Self-reflective repair budgets for the render sandbox."""

    n_install: int = 3
    m_render: int = 3
    per_attempt_timeout: float = 180.0

    def validate(self) -> None:
        if self.n_install < 0:
            raise ConfigError(f"n_install must be >= 0, got {self.n_install}")
        if self.m_render < 0:
            raise ConfigError(f"m_render must be >= 0, got {self.m_render}")
        if self.per_attempt_timeout <= 0:
            raise ConfigError(
                f"per_attempt_timeout must be > 0, got {self.per_attempt_timeout}"
            )


@dataclass
class SamplingParams:
    temperature: float = DEFAULT_TEMPERATURE
    top_p: float = DEFAULT_TOP_P
    max_output_tokens: int = 8192

    def validate(self) -> None:
        if self.temperature < 0:
            raise ConfigError(f"temperature must be >= 0, got {self.temperature}")
        if not (0 < self.top_p <= 1):
            raise ConfigError(f"top_p must be in (0, 1], got {self.top_p}")
        if self.max_output_tokens < 1:
            raise ConfigError("max_output_tokens must be >= 1")


@dataclass
class SimilarityPolicy:
    """Visual match policy: correct iff cosine similarity strictly exceeds
    the threshold."""

    threshold: float = DEFAULT_SIMILARITY_THRESHOLD
    backend: str = "structural"

    def validate(self) -> None:
        if not (-1 < self.threshold <= 1):
            raise ConfigError(f"threshold must be in (-1, 1], got {self.threshold}")


@dataclass
class SynthesisParams:
    strategy: str = "evolution"
    rounds: int = 3
    infer_num: int = 3
    max_variations: int = 10
    waterfall_task_bounds: tuple[int, int] = (10, 15)
    additive_step_bounds: tuple[int, int] = (15, 20)

    def validate(self) -> None:
        if self.strategy not in ("evolution", "waterfall", "additive"):
            raise ConfigError(f"unknown strategy {self.strategy!r}")
        if self.rounds < 1:
            raise ConfigError(f"rounds must be >= 1, got {self.rounds}")
        if self.infer_num < 1:
            raise ConfigError(f"infer_num must be >= 1, got {self.infer_num}")
        if self.max_variations < 1:
            raise ConfigError("max_variations must be >= 1")
        lo, hi = self.waterfall_task_bounds
        if not (1 <= lo <= hi):
            raise ConfigError(f"bad waterfall task bounds {self.waterfall_task_bounds}")
        lo, hi = self.additive_step_bounds
        if not (1 <= lo <= hi):
            raise ConfigError(f"bad additive step bounds {self.additive_step_bounds}")


@dataclass
class EvalParams:
    n_samples: int = DEFAULT_EVAL_SAMPLES
    ks: list[int] = field(default_factory=lambda: list(DEFAULT_EVAL_KS))

    def validate(self) -> None:
        if self.n_samples < 1:
            raise ConfigError("n_samples must be >= 1")
        for k in self.ks:
            if k < 1:
                raise ConfigError(f"every k must be >= 1, got {k}")
            if k > self.n_samples:
                raise ConfigError(f"k={k} exceeds n_samples={self.n_samples}")


@dataclass
class PipelineConfig:
    store_root: Path = Path("store")
    star_threshold: int = DEFAULT_STAR_THRESHOLD
    blacklist: list[str] = field(default_factory=lambda: list(DEFAULT_BLACKLIST))
    blacklist_enabled: bool = True
    search_keywords: list[str] = field(default_factory=lambda: list(DEFAULT_SEARCH_KEYWORDS))
    max_source_file_bytes: int = 1_000_000
    parallelism: int = 4
    retry_policy: RetryPolicy = field(default_factory=RetryPolicy)
    sampling: SamplingParams = field(default_factory=SamplingParams)
    similarity: SimilarityPolicy = field(default_factory=SimilarityPolicy)
    synthesis: SynthesisParams = field(default_factory=SynthesisParams)
    eval_params: EvalParams = field(default_factory=EvalParams)
    # Env var names; the values never live in config files.
    github_token_env: str = "GITHUB_TOKEN"
    llm_api_key_env: str = "LLM_API_KEY"
    llm_api_base_env: str = "LLM_API_BASE"
    llm_model_env: str = "LLM_MODEL"

    def validate(self) -> None:
        if self.star_threshold < 0:
            raise ConfigError(f"star_threshold must be >= 0, got {self.star_threshold}")
        if self.blacklist_enabled and not self.blacklist:
            raise ConfigError("blacklist must be non-empty when filtering is enabled")
        if self.max_source_file_bytes < 1:
            raise ConfigError("max_source_file_bytes must be >= 1")
        if self.parallelism < 1:
            raise ConfigError("parallelism must be >= 1")
        self.retry_policy.validate()
        self.sampling.validate()
        self.similarity.validate()
        self.synthesis.validate()
        self.eval_params.validate()

    def api_token(self, env_name: str) -> str | None:
        return os.environ.get(env_name) or None

    def github_token(self) -> str | None:
        return self.api_token(self.github_token_env)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["store_root"] = str(self.store_root)
        return d


_SECTION_TYPES = {
    "retry_policy": RetryPolicy,
    "sampling": SamplingParams,
    "similarity": SimilarityPolicy,
    "synthesis": SynthesisParams,
    "eval_params": EvalParams,
}

_TUPLE_FIELDS = {"waterfall_task_bounds", "additive_step_bounds"}


def _build_section(cls, raw: dict, context: str):
    obj = cls()
    for key, value in raw.items():
        if not hasattr(obj, key):
            raise ConfigError(f"unknown key {context}.{key}")
        if key in _TUPLE_FIELDS:
            value = tuple(value)
        setattr(obj, key, value)
    return obj


def load_config(path: str | Path) -> PipelineConfig:
    """Load a YAML config file, applying documented defaults for absent
    fields. An empty file yields the all-defaults config."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        raw = yaml.safe_load(path.read_text(encoding="utf-8"))
    except yaml.YAMLError as exc:
        raise ConfigError(f"could not parse {path}: {exc}") from exc
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigError(f"config root must be a mapping, got {type(raw).__name__}")

    _reject_inline_secrets(raw)

    cfg = PipelineConfig()
    for key, value in raw.items():
        if key in _SECTION_TYPES:
            if not isinstance(value, dict):
                raise ConfigError(f"section {key} must be a mapping")
            setattr(cfg, key, _build_section(_SECTION_TYPES[key], value, key))
        elif key == "store_root":
            cfg.store_root = Path(value)
        elif hasattr(cfg, key):
            setattr(cfg, key, value)
        else:
            raise ConfigError(f"unknown config key {key!r}")
    cfg.validate()
    return cfg


def _reject_inline_secrets(raw: dict, prefix: str = "") -> None:
    # Env var *names* (keys ending in _env) are fine; literal secrets are not.
    for key, value in raw.items():
        dotted = f"{prefix}{key}"
        if isinstance(value, dict):
            _reject_inline_secrets(value, prefix=f"{dotted}.")
            continue
        lowered = key.lower()
        if lowered.endswith("_env"):
            continue
        if any(fragment in lowered for fragment in _SECRET_KEY_FRAGMENTS):
            raise ConfigError(
                f"config key {dotted!r} looks like an inline secret; "
                "pass secrets through environment variables instead"
            )
