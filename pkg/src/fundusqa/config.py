"""Pipeline configuration and its flat ``key = value`` file format.

Example file::

    # fundusqa configuration
    mask_threshold = 0.05
    frangi_scales = [1, 2, 4, 8]
    wavelets = ["daubechies7", "haar"]
    split = subject

Values are parsed as JSON when possible (numbers, ``true``/``false``,
lists, quoted strings) and otherwise taken as bare strings. Unknown keys are
rejected.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

from .vesselness import FrangiParams
from .wavelets import FAMILIES, get_family

__all__ = ["Config", "ConfigError", "load_config", "parse_config"]


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class Config:
    mask_threshold: float = 0.05
    mask_all_metrics: bool = False
    tau_percentile: float = 75.0
    frangi_scales: tuple = (1.0, 2.0, 4.0, 8.0)
    frangi_beta: float = 0.5
    frangi_c: float = 15.0 / 255.0
    frangi_dark_vessels: bool = True
    frangi_downscale: int = 1
    perivascular_variant: str = "literal"
    perivascular_normalise: str = "pixels"
    wavelets: tuple = FAMILIES
    wavelet_mode: str = "symmetric"
    logreg_folds: int = 5
    forest_trees: int = 100
    svm_c: float = 1.0
    test_fraction: float = 0.25
    split: str = "subject"
    seed: int = 0
    workers: int = 1

    def __post_init__(self):
        object.__setattr__(self, "frangi_scales", tuple(float(s) for s in self.frangi_scales))
        object.__setattr__(self, "wavelets", tuple(get_family(w).name for w in self.wavelets))
        if not 0.0 < self.mask_threshold < 1.0:
            raise ConfigError("mask_threshold must lie in (0, 1)")
        if not 0.0 <= self.tau_percentile <= 100.0:
            raise ConfigError("tau_percentile must lie in [0, 100]")
        if self.perivascular_variant not in ("literal", "frobenius"):
            raise ConfigError("perivascular_variant must be 'literal' or 'frobenius'")
        if self.perivascular_normalise not in ("pixels", "weights"):
            raise ConfigError("perivascular_normalise must be 'pixels' or 'weights'")
        if self.wavelet_mode not in ("symmetric", "periodization"):
            raise ConfigError("wavelet_mode must be 'symmetric' or 'periodization'")
        if self.split not in ("subject", "image"):
            raise ConfigError("split must be 'subject' or 'image'")
        if not 0.0 < self.test_fraction < 1.0:
            raise ConfigError("test_fraction must lie in (0, 1)")
        if self.frangi_downscale < 1 or self.workers < 1:
            raise ConfigError("frangi_downscale and workers must be >= 1")
        try:
            self.frangi
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    @property
    def frangi(self) -> FrangiParams:
        return FrangiParams(self.frangi_scales, self.frangi_beta, self.frangi_c, self.frangi_dark_vessels)

    def replace(self, **changes) -> "Config":
        return replace(self, **changes)

    def to_dict(self) -> dict:
        d = asdict(self)
        return {k: list(v) if isinstance(v, tuple) else v for k, v in d.items()}


def _parse_value(raw: str):
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        return raw


def parse_config(text: str, base: Config = Config()) -> Config:
    known = {f.name: f for f in fields(Config)}
    changes = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, raw = (part.strip() for part in line.split("=", 1))
        if key not in known:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        value = _parse_value(raw)
        ftype = known[key].type
        if ftype == "float" and isinstance(value, int) and not isinstance(value, bool):
            value = float(value)
        if ftype == "tuple" and not isinstance(value, list):
            raise ConfigError(f"line {lineno}: {key} expects a list")
        if ftype == "bool" and not isinstance(value, bool):
            raise ConfigError(f"line {lineno}: {key} expects true or false")
        if ftype == "int" and (not isinstance(value, int) or isinstance(value, bool)):
            raise ConfigError(f"line {lineno}: {key} expects an integer")
        if ftype == "float" and not isinstance(value, float):
            raise ConfigError(f"line {lineno}: {key} expects a number")
        if ftype == "str" and not isinstance(value, str):
            raise ConfigError(f"line {lineno}: {key} expects a string")
        changes[key] = tuple(value) if ftype == "tuple" else value
    try:
        return replace(base, **changes)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path) -> Config:
    return parse_config(Path(path).read_text())
