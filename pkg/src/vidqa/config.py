"""Engine configuration with flags > environment > config file > defaults.

The config file is JSON whose top-level keys mirror EngineConfig fields,
plus a `profiles` table of backend profiles. Environment variables use the
VIDQA_ prefix (see _ENV_FIELDS); wire endpoint variables override the
active profile so credentials never need to live in the file.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Mapping

DEFAULT_OPTION_SIX = "Not enough information to answer."

# variant ids, in ablation-table row order
VARIANTS = ("baseline", "+summary", "+agent", "full")


@dataclass
class EngineConfig:
    store_dir: Path = Path("store")
    backend: str = "mock"                      # active profile name
    profiles: dict[str, dict] = field(default_factory=dict)
    embedding_dim: int = 512                   # z
    sample_interval_s: float = 2.0             # frame sampling interval
    top_n: int = 5                             # retrieval breadth
    rethink_cap: int = 3                       # max rethink iterations
    batch_budget_fraction: float = 0.7         # share of context window per batch
    seed: int = 0
    seam_tolerance_s: float = 2.0              # summary contiguity repair
    anchor_score_floor: float = 0.2            # temporal-anchor fallback trigger
    max_functions_per_plan: int = 4
    image_token_cost: int = 256
    web_search_max_snippets: int = 3
    extractor_template: str | None = None

    def validate(self) -> None:
        if self.embedding_dim < 1:
            raise ValueError("embedding_dim must be >= 1")
        if self.top_n < 1:
            raise ValueError("top_n must be >= 1")
        if self.rethink_cap < 0:
            raise ValueError("rethink_cap must be >= 0")
        if not 0 < self.batch_budget_fraction < 1:
            raise ValueError("batch_budget_fraction must be in (0, 1)")
        if self.sample_interval_s <= 0:
            raise ValueError("sample_interval_s must be positive")

    def active_profile(self) -> dict:
        """The selected backend profile merged over built-in defaults."""
        profile = dict(self.profiles.get(self.backend, {}))
        profile.setdefault("type", "mock" if self.backend == "mock" else "wire")
        profile.setdefault("name", self.backend)
        return profile


_ENV_FIELDS = {
    "VIDQA_STORE": ("store_dir", Path),
    "VIDQA_BACKEND": ("backend", str),
    "VIDQA_EMBEDDING_DIM": ("embedding_dim", int),
    "VIDQA_SAMPLE_INTERVAL": ("sample_interval_s", float),
    "VIDQA_TOP_N": ("top_n", int),
    "VIDQA_RETHINK_CAP": ("rethink_cap", int),
    "VIDQA_BATCH_BUDGET_FRACTION": ("batch_budget_fraction", float),
    "VIDQA_SEED": ("seed", int),
    "VIDQA_EXTRACTOR": ("extractor_template", str),
}

# wire/mock settings injected into the active profile
_ENV_PROFILE_FIELDS = {
    "VIDQA_CHAT_URL": "chat_url",
    "VIDQA_EMBED_URL": "embed_url",
    "VIDQA_API_TOKEN": "auth_token",
    "VIDQA_MOCK_SCRIPT": "script",
}

_FIELD_TYPES = {f.name: f.type for f in fields(EngineConfig)}


def _coerce(name: str, value: Any) -> Any:
    if name == "store_dir":
        return Path(value)
    if name == "profiles":
        if not isinstance(value, dict):
            raise ValueError("profiles must be a table of backend profiles")
        return {str(k): dict(v) for k, v in value.items()}
    current = getattr(EngineConfig(), name)
    if isinstance(current, bool):
        return bool(value)
    if isinstance(current, int):
        return int(value)
    if isinstance(current, float):
        return float(value)
    return value


def resolve_config(
    flag_overrides: Mapping[str, Any] | None = None,
    env: Mapping[str, str] | None = None,
    config_path: str | Path | None = None,
) -> EngineConfig:
    """Build an EngineConfig applying the precedence chain.

    `flag_overrides` maps EngineConfig field names to values (None entries
    are ignored so unset CLI flags fall through).
    """
    env = os.environ if env is None else env
    cfg = EngineConfig()

    if config_path is not None:
        data = json.loads(Path(config_path).read_text(encoding="utf-8"))
        if not isinstance(data, dict):
            raise ValueError("config file must hold a JSON object")
        unknown = set(data) - set(_FIELD_TYPES)
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        cfg = replace(cfg, **{k: _coerce(k, v) for k, v in data.items()})

    for var, (name, cast) in _ENV_FIELDS.items():
        if var in env:
            cfg = replace(cfg, **{name: cast(env[var])})

    profile_env = {
        key: env[var] for var, key in _ENV_PROFILE_FIELDS.items() if var in env
    }

    if flag_overrides:
        applied = {
            k: _coerce(k, v) for k, v in flag_overrides.items() if v is not None
        }
        unknown = set(applied) - set(_FIELD_TYPES)
        if unknown:
            raise ValueError(f"unknown config overrides: {sorted(unknown)}")
        cfg = replace(cfg, **applied)

    if profile_env:
        profiles = {k: dict(v) for k, v in cfg.profiles.items()}
        merged = profiles.setdefault(cfg.backend, {})
        merged.update(profile_env)
        cfg = replace(cfg, profiles=profiles)

    cfg.validate()
    return cfg
