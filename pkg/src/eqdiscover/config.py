"""Run configuration: a TOML document whose top-level keys mirror the
hyperparameter names of the method (M, P, K, N_term, zeta1, lambda, T),
with nested tables for backend transport and search behavior.  Command-line
flags override file values; file values override these defaults.

Example::

    M = 10
    P = 100
    K = 5
    N_term = 6
    zeta1 = 0.01
    lambda = 0.001
    T = 0.9

    [backend]
    endpoint_url = "https://api.openai.com/v1"
    model_name = "gpt-3.5-turbo"
    api_key_env = "EQDISCOVER_API_KEY"

    [search]
    seed = 0
    schedule = "alternate"
"""

from __future__ import annotations

import sys
from pathlib import Path
from typing import Optional

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .backends import BackendConfig
from .evaluation import EvalConfig
from .search import SearchConfig

DEFAULTS = {
    "M": 10,
    "P": 100,
    "K": 5,
    "N_term": 6,
    "zeta1": 0.01,
    "lambda": 0.001,
    "T": 0.9,
    "backend": {},
    "search": {},
}


def load_config(path: Optional[str] = None) -> dict:
    merged = {key: (dict(value) if isinstance(value, dict) else value)
              for key, value in DEFAULTS.items()}
    if path is not None:
        with open(Path(path), "rb") as handle:
            loaded = tomllib.load(handle)
        for key, value in loaded.items():
            if isinstance(value, dict) and isinstance(merged.get(key), dict):
                merged[key].update(value)
            else:
                merged[key] = value
    return merged


def search_config(config: dict, **overrides) -> SearchConfig:
    section = config.get("search", {})
    values = {
        "M": config["M"],
        "P": config["P"],
        "K": config["K"],
        "seed": section.get("seed", 0),
        "schedule": section.get("schedule", "alternate"),
        "target_score": section.get("target_score"),
        "fallback_enabled": section.get("fallback_enabled", True),
        "stagnation_limit": section.get("stagnation_limit", 25),
        "max_workers": section.get("max_workers", 4),
    }
    values.update({k: v for k, v in overrides.items() if v is not None})
    return SearchConfig(**values)


def eval_config(config: dict, mode: str, **overrides) -> EvalConfig:
    values = {
        "mode": mode,
        "zeta1": config["zeta1"],
        "lam": config["lambda"],
        "n_term_max": config["N_term"],
    }
    values.update({k: v for k, v in overrides.items() if v is not None})
    return EvalConfig(**values)


def backend_config(config: dict) -> BackendConfig:
    section = dict(config.get("backend", {}))
    section.setdefault("temperature", config["T"])
    return BackendConfig(**section)
