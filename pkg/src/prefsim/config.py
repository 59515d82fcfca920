"""Flat YAML configuration for experiments.

One document, one level of keys; inference knobs live at the top level
alongside the factor lists. configs/experiment-example.yaml in the
repository documents every key with units.
"""

from __future__ import annotations

from dataclasses import fields as dataclass_fields
from pathlib import Path

import yaml

from .harness import ExperimentConfig, desk_profile, full_profile
from .inference import InferenceConfig

__all__ = ["ConfigError", "load_experiment_config", "profile_config"]

_INFERENCE_KEYS = {f.name for f in dataclass_fields(InferenceConfig)}
_EXPERIMENT_KEYS = {
    f.name for f in dataclass_fields(ExperimentConfig) if f.name != "inference"
}
_LIST_KEYS = {"ranges", "prop_random", "n_totals"}


class ConfigError(ValueError):
    """Bad configuration file or option combination."""


def profile_config(name: str, **overrides) -> ExperimentConfig:
    if name == "desk":
        return desk_profile(**overrides)
    if name == "full":
        return full_profile(**overrides)
    raise ConfigError(f"unknown profile {name!r}; expected 'desk' or 'full'")


def load_experiment_config(path: str | Path, base: ExperimentConfig | None = None) -> ExperimentConfig:
    """Build an ExperimentConfig from a flat YAML mapping.

    Keys mirror ExperimentConfig and InferenceConfig field names; factor
    lists are YAML sequences. Unknown keys are errors so typos surface
    immediately. Keys present override the ``base`` config (default: the
    full profile).
    """
    path = Path(path)
    try:
        raw = yaml.safe_load(path.read_text())
    except (OSError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigError("config must be a flat key-value mapping")

    base = base or full_profile()
    exp_kwargs: dict = {}
    inf_kwargs: dict = {}
    for key, value in raw.items():
        if key in _LIST_KEYS:
            if not isinstance(value, (list, tuple)) or len(value) == 0:
                raise ConfigError(f"{key} must be a nonempty list")
            exp_kwargs[key] = tuple(value)
        elif key in _EXPERIMENT_KEYS:
            exp_kwargs[key] = value
        elif key in _INFERENCE_KEYS:
            inf_kwargs[key] = value
        else:
            raise ConfigError(f"unknown config key {key!r}")
    # nu names the Matern smoothness in both the simulation settings and
    # the fitted model; one key drives both so they cannot drift apart
    if "nu" in exp_kwargs:
        inf_kwargs["nu"] = exp_kwargs["nu"]

    try:
        inference = InferenceConfig(
            **{
                f.name: inf_kwargs.get(f.name, getattr(base.inference, f.name))
                for f in dataclass_fields(InferenceConfig)
            }
        )
        merged = {
            f.name: exp_kwargs.get(f.name, getattr(base, f.name))
            for f in dataclass_fields(ExperimentConfig)
            if f.name != "inference"
        }
        return ExperimentConfig(**merged, inference=inference)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid config value: {exc}") from exc
