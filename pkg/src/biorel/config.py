"""Cascading configuration: defaults < config file < environment < caller.

Analysis behaviour and store settings are plain key/value options.  A
later layer always wins, and every effective value stays traceable to
the layer that set it.
"""

from __future__ import annotations

import os
from pathlib import Path
from typing import Mapping

from .errors import BioRelError

__all__ = [
    "DEFAULTS",
    "Options",
    "load_config_file",
    "default_config_path",
    "env_overrides",
    "ENV_VARS",
]

DEFAULTS: dict[str, object] = {
    # store
    "data_dir": "~/.local/share/biorel",
    "backend": "memory",
    "repo_url": "",
    "fetch_policy": "never",
    # hits filtering
    "max_pvalue": 0.05,
    "min_abs_log2fc": 1.0,
    "direction": "both",
    # experiment csv layout
    "id_col": "Protein",
    "fc_col": "log2FC",
    "pval_col": "p.value",
    "id_kind": "protein_accession",
    # graphs and rendering
    "organism": "hs",
    "min_weight": 500,
    "include_absent": False,
    "include_isolated": True,
    "node_size": 3.0,
    "format": "svg",
    "color_up": "red",
    "color_down": "blue",
    # over-representation
    "alpha": 0.05,
    "adjust": "bh",
}

_COERCERS = {
    "max_pvalue": float,
    "min_abs_log2fc": float,
    "alpha": float,
    "node_size": float,
    "min_weight": int,
}

_BOOL_KEYS = {"include_absent", "include_isolated"}

# Environment variables mirror the store settings only.
ENV_VARS = {
    "BIOREL_DATA_DIR": "data_dir",
    "BIOREL_REPO_URL": "repo_url",
    "BIOREL_FETCH_POLICY": "fetch_policy",
}


def _coerce(key: str, value):
    if not isinstance(value, str):
        return value
    if key in _BOOL_KEYS:
        low = value.strip().lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise BioRelError(f"option {key!r}: {value!r} is not a boolean")
    caster = _COERCERS.get(key)
    if caster is None:
        return value
    try:
        return caster(value)
    except ValueError:
        raise BioRelError(f"option {key!r}: cannot parse {value!r}") from None


class Options:
    """An ordered stack of (layer name, mapping) pairs; later layers win."""

    def __init__(self, layers: list[tuple[str, Mapping[str, object]]] | None = None) -> None:
        self._layers = [("defaults", dict(DEFAULTS))]
        for name, mapping in layers or []:
            self._layers.append((name, {k: _coerce(k, v) for k, v in mapping.items()}))

    def with_layer(self, name: str, mapping: Mapping[str, object]) -> "Options":
        out = Options()
        out._layers = list(self._layers)
        out._layers.append((name, {k: _coerce(k, v) for k, v in mapping.items()}))
        return out

    def get(self, key: str, default=None):
        for _, mapping in reversed(self._layers):
            if key in mapping:
                return mapping[key]
        return default

    def source_of(self, key: str) -> str | None:
        """Which layer supplies the effective value for a key."""
        for name, mapping in reversed(self._layers):
            if key in mapping:
                return name
        return None

    def effective(self) -> dict[str, object]:
        out: dict[str, object] = {}
        for _, mapping in self._layers:
            out.update(mapping)
        return out

    def __repr__(self) -> str:
        return f"Options(layers={[name for name, _ in self._layers]})"


def default_config_path() -> Path:
    base = os.environ.get("XDG_CONFIG_HOME", "~/.config")
    return Path(base).expanduser() / "biorel" / "config"


def load_config_file(path: Path) -> dict[str, str]:
    """Parse a flat key=value config file ('#' starts a comment line)."""
    values: dict[str, str] = {}
    text = Path(path).read_text(encoding="utf-8")
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise BioRelError(f"{path}:{lineno}: expected key=value, got {raw!r}")
        values[key.strip()] = value.strip()
    return values


def env_overrides(environ: Mapping[str, str] | None = None) -> dict[str, str]:
    env = os.environ if environ is None else environ
    return {key: env[var] for var, key in ENV_VARS.items() if var in env}
