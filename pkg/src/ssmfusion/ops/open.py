import json
import warnings
from typing import Any, Dict, Optional

import fsspec

from ssmfusion.models import PipelineConfig

# Flat keys and the (block, field) they set. "kappa" sets both neighborhood proportions.
FLAT_KEYS = {
    "kappa": (("kernel", "kappa"), ("snf", "kappa")),
    "kernel_kappa": (("kernel", "kappa"),),
    "beta": (("kernel", "beta"),),
    "snf_kappa": (("snf", "kappa"),),
    "T": (("snf", "T"),),
    "iterations": (("snf", "T"),),
    "reg": (("snf", "reg"),),
    "J": (("scattering", "J"),),
    "L": (("scattering", "L"),),
    "output_n": (("scattering", "output_n"),),
    "sigma0": (("scattering", "sigma0"),),
    "xi0": (("scattering", "xi0"),),
    "window": (("mfcc", "window"),),
    "hop": (("mfcc", "hop"),),
    "n_coeffs": (("mfcc", "n_coeffs"),),
    "n_mels": (("mfcc", "n_mels"),),
    "sample_rate": (("mfcc", "sample_rate"),),
}

BLOCKS = ("kernel", "snf", "scattering", "mfcc")


def nest(data: Dict[str, Any]) -> Dict[str, Any]:
    """Route flat keys into their parameter blocks. Flat keys win over the same field given inside a block.

    Args:
        data: Configuration with flat and/or nested keys.

    Returns:
        Dict[str, Any]: Configuration with nested blocks only.
    """
    out = {k: v for k, v in data.items() if k not in FLAT_KEYS and k not in BLOCKS}
    for block in BLOCKS:
        if data.get(block) is not None:
            out[block] = dict(data[block])

    for key, targets in FLAT_KEYS.items():
        if key not in data:
            continue
        for block, field in targets:
            out.setdefault(block, {})[field] = data[key]

    return out


def merge(base: Dict[str, Any], overrides: Dict[str, Any]) -> Dict[str, Any]:
    """Merge nested configurations. Values in overrides win, blocks are merged field by field."""
    out = dict(base)
    for key, value in overrides.items():
        if key in BLOCKS and isinstance(value, dict):
            out[key] = {**out.get(key, {}), **value}
        else:
            out[key] = value
    return out


def from_dict(data: Dict[str, Any], overrides: Optional[Dict[str, Any]] = None) -> PipelineConfig:
    """Build a pipeline configuration from a dictionary and optional overrides.

    Args:
        data: Configuration with flat and/or nested keys.
        overrides: Values that take precedence, e.g. command-line flags. None values are ignored.

    Returns:
        PipelineConfig: The validated configuration.
    """
    overrides = {k: v for k, v in (overrides or {}).items() if v is not None}
    config = merge(nest(data), nest(overrides))

    if "pipeline" not in config:
        config["pipeline"] = "FusedScatter"
        warnings.warn(
            "pipeline not found in config, defaulting to FusedScatter",
            DeprecationWarning,
            stacklevel=2,
        )

    return PipelineConfig(**config)


def from_string(data: str, overrides: Optional[Dict[str, Any]] = None) -> PipelineConfig:
    data = json.loads(data)
    if not isinstance(data, dict):
        raise ValueError("A pipeline config must be a JSON object.")

    return from_dict(data, overrides)


def from_file(path: str, overrides: Optional[Dict[str, Any]] = None) -> PipelineConfig:
    with fsspec.open(path, "r") as f:
        data = f.read()

    return from_string(data, overrides)
