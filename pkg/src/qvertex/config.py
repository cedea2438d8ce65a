"""Run configuration: a small key/value file format plus CLI overrides.

The file format is deliberately minimal: ``key = value`` lines, ``#``
comments, and ``[section]`` headers that prefix subsequent keys as
``section.key``.  Values are parsed as integers, rationals (``p/q``),
booleans, or comma-separated lists of strings.  Command-line flags override
file values; a fixed seed makes runs fully deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Optional

from .errors import DomainError
from .rmatrix import RParams, TRIG, ELLIPTIC


@dataclass(frozen=True)
class RunConfig:
    family: str = TRIG
    N: int = 2
    K: int = 3
    p_coeff: Fraction = Fraction(1)
    p_power: int = 1
    shift: Fraction = Fraction(1)
    seed: int = 0
    deg: int = 3                  # degree box for R-matrix level checks
    mode_max: int = 16            # generator mode ceiling in rewriting
    in_mode: int = 3              # input-state mode ceiling
    word_len: int = 5             # operator length ceiling
    r_scan_max: int = 8           # locality / associativity power scans
    trials: int = 100             # randomized confluence trials
    checks: tuple[str, ...] = ()  # empty = full default suite for the family
    cache_dir: Optional[str] = None
    fmt: str = "text"             # text | jsonl

    def rparams(self) -> RParams:
        if self.family == TRIG:
            return RParams(TRIG, self.N)
        return RParams(ELLIPTIC, self.N, self.p_coeff, self.p_power, self.shift)


def _parse_value(raw: str):
    raw = raw.strip()
    low = raw.lower()
    if low in ("true", "false"):
        return low == "true"
    if "," in raw:
        return tuple(x.strip() for x in raw.split(",") if x.strip())
    try:
        return int(raw)
    except ValueError:
        pass
    if "/" in raw:
        num, _, den = raw.partition("/")
        try:
            return Fraction(int(num), int(den))
        except ValueError:
            pass
    return raw


def parse_config_text(text: str) -> dict:
    out: dict = {}
    section = ""
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip()
            continue
        if "=" not in line:
            raise DomainError(f"config line {lineno}: expected key = value")
        key, _, raw = line.partition("=")
        key = key.strip()
        if section:
            key = f"{section}.{key}"
        out[key] = _parse_value(raw)
    return out


_KEYMAP = {
    "family": "family", "N": "N", "K": "K", "seed": "seed", "deg": "deg",
    "checks": "checks", "cache_dir": "cache_dir", "format": "fmt",
    "elliptic.p_coeff": "p_coeff", "elliptic.p_power": "p_power",
    "elliptic.shift": "shift",
    "windows.deg": "deg", "windows.mode_max": "mode_max",
    "windows.in_mode": "in_mode", "windows.word_len": "word_len",
    "windows.r_scan_max": "r_scan_max", "windows.trials": "trials",
}


def config_from_mapping(data: dict, base: RunConfig | None = None) -> RunConfig:
    cfg = base or RunConfig()
    fields = {}
    for key, value in data.items():
        if key not in _KEYMAP:
            raise DomainError(f"unknown configuration key {key!r}")
        name = _KEYMAP[key]
        if name in ("p_coeff", "shift") and not isinstance(value, Fraction):
            value = Fraction(value)
        if name == "checks" and isinstance(value, str):
            value = (value,)
        fields[name] = value
    cfg = replace(cfg, **fields)
    if cfg.K < 1:
        raise DomainError("K must be >= 1")
    if cfg.fmt not in ("text", "jsonl"):
        raise DomainError("format must be text or jsonl")
    if cfg.family not in (TRIG, ELLIPTIC):
        raise DomainError(f"unknown family {cfg.family!r}")
    return cfg


def load_config(path: str | None, overrides: dict) -> RunConfig:
    cfg = RunConfig()
    if path is not None:
        with open(path, "r", encoding="utf-8") as fh:
            cfg = config_from_mapping(parse_config_text(fh.read()), cfg)
    return config_from_mapping(overrides, cfg)
