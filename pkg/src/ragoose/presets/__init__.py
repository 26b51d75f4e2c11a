"""Shipped GP hyperparameter presets."""

from functools import lru_cache
from importlib import resources

import yaml

__all__ = ["gp_presets", "gp_preset"]


@lru_cache(maxsize=1)
def gp_presets() -> dict:
    text = resources.files(__name__).joinpath("gp.yaml").read_text()
    return yaml.safe_load(text)


def gp_preset(name: str) -> dict:
    presets = gp_presets()
    if name not in presets:
        raise KeyError(f"unknown GP preset {name!r}; available: {sorted(presets)}")
    return presets[name]
