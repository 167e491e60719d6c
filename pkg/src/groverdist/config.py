"""Experiment configuration files: ``[section]`` headers, ``key = value`` lines, ``#`` comments.

Every key has a type and a default; unknown sections or keys are rejected so a
typo cannot silently fall back to a default.  :meth:`ExperimentConfig.to_text`
writes a canonical file that parses back to an equal config.
"""
from __future__ import annotations

import configparser
import hashlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

from .errors import ConfigError

COMMANDS = ("encode", "count", "train", "sweep")


def _bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _optional_int(text: str):
    text = text.strip()
    return None if text.lower() in ("", "auto") else int(text)


def _ints(text: str) -> tuple[int, ...]:
    return tuple(int(x) for x in text.replace(",", " ").split())


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(x) for x in text.replace(",", " ").split())


def _classes(text: str) -> tuple[tuple[int, ...], ...]:
    # "0 1; 2 3 4; 5 6 7" -- an empty group is an empty class
    return tuple(_ints(group) for group in text.split(";"))


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if value is None:
        return "auto"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        if value and isinstance(value[0], tuple):
            return "; ".join(" ".join(str(k) for k in c) for c in value)
        return " ".join(_fmt(v) for v in value)
    return str(value)


def _choice(*options: str) -> Callable[[str], str]:
    def parse(text: str) -> str:
        text = text.strip()
        if text not in options:
            raise ValueError(f"{text!r} not one of {', '.join(options)}")
        return text

    return parse


# section -> key -> (parser, default)
SCHEMA: dict[str, dict[str, tuple[Callable[[str], Any], Any]]] = {
    "run": {
        "command": (_choice(*COMMANDS), "encode"),
        "seed": (int, 0),
        "out": (str, "results"),
    },
    "encode": {
        "n_values": (int, 8),
        "classes": (_classes, ((0, 1), (2, 3, 4), (5, 6, 7))),
        "targets": (_floats, (0.6, 0.3, 0.1)),
        "remainder": (_choice("last", "largest", "least-likely"), "last"),
        "strict": (_bool, True),
    },
    "count": {
        "n_values": (int, 8),
        "classes": (_classes, ((0, 1), (2, 3, 4, 5, 6, 7))),
        "precision_bits": (_optional_int, None),
        "mode": (_choice("deterministic", "stochastic"), "deterministic"),
        "backend": (_choice("auto", "statevector", "subspace"), "auto"),
    },
    "env": {
        "kind": (_choice("gridworld", "bandit"), "gridworld"),
        "width": (int, 4),
        "height": (int, 4),
        "layout": (str, ""),
        "exploring_starts": (_bool, True),
        "step_reward": (float, -1.0),
        "goal_reward": (float, 10.0),
        "n_arms": (int, 16),
        "gap": (float, 0.5),
        "noise": (float, 0.1),
    },
    "policy": {
        "selector": (_choice("quantum", "classical"), "quantum"),
        "n_intervals": (int, 4),
        "t0": (float, 1.0),
        "t_min": (float, 0.1),
        "weighting": (_choice("midpoint", "exact"), "midpoint"),
        "remainder": (_choice("last", "largest", "least-likely"), "least-likely"),
        "counting_bits": (_optional_int, None),
        "counting_mode": (_choice("deterministic", "stochastic"), "deterministic"),
        "counting_backend": (_choice("auto", "statevector", "subspace"), "subspace"),
    },
    "train": {
        "episodes": (int, 5000),
        "max_steps": (int, 100),
        "learning_rate": (float, 0.5),
        "discount": (float, 0.9),
        "initial_q": (float, 10.0),
    },
    "sweep": {
        "n_values": (_ints, (64, 256, 1024)),
        "n_classes": (int, 4),
        "class_size": (int, 1),
        "target_sets": (int, 50),
    },
}


@dataclass
class ExperimentConfig:
    """Parsed configuration; ``values[section][key]`` holds typed values for every schema key."""

    values: dict = field(default_factory=dict)

    def __post_init__(self):
        merged = {sec: {k: d for k, (_, d) in keys.items()} for sec, keys in SCHEMA.items()}
        for sec, keys in self.values.items():
            if sec not in SCHEMA:
                raise ConfigError(f"unknown section [{sec}]")
            for key, val in keys.items():
                if key not in SCHEMA[sec]:
                    raise ConfigError(f"unknown key {key!r} in [{sec}]")
                merged[sec][key] = val
        self.values = merged

    def __getitem__(self, section: str) -> dict:
        return self.values[section]

    @property
    def command(self) -> str:
        return self.values["run"]["command"]

    @property
    def seed(self) -> int:
        return self.values["run"]["seed"]

    def with_overrides(self, **overrides) -> "ExperimentConfig":
        """Copy with ``section__key=value`` overrides applied (None values are skipped)."""
        values = {sec: dict(keys) for sec, keys in self.values.items()}
        for name, val in overrides.items():
            if val is None:
                continue
            sec, key = name.split("__")
            if key not in SCHEMA.get(sec, {}):
                raise ConfigError(f"unknown key {key!r} in [{sec}]")
            values[sec][key] = val
        return ExperimentConfig(values)

    def to_text(self) -> str:
        lines = []
        for sec, keys in self.values.items():
            lines.append(f"[{sec}]")
            lines.extend(f"{key} = {_fmt(val)}" for key, val in keys.items())
            lines.append("")
        return "\n".join(lines)

    def run_id(self) -> str:
        """Short hash of the canonical config text; the output location is not part of it."""
        echo = self.with_overrides(run__out="-").to_text()
        return hashlib.sha256(echo.encode()).hexdigest()[:12]


def parse_config(text: str) -> ExperimentConfig:
    parser = configparser.ConfigParser(
        comment_prefixes=("#",), inline_comment_prefixes=("#",), interpolation=None, delimiters=("=",)
    )
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from exc
    values: dict = {}
    for sec in parser.sections():
        if sec not in SCHEMA:
            raise ConfigError(f"unknown section [{sec}]")
        values[sec] = {}
        for key, raw in parser.items(sec):
            if key not in SCHEMA[sec]:
                raise ConfigError(f"unknown key {key!r} in [{sec}]")
            conv = SCHEMA[sec][key][0]
            try:
                values[sec][key] = conv(raw)
            except ValueError as exc:
                raise ConfigError(f"[{sec}] {key}: {exc}") from exc
    return ExperimentConfig(values)


def load_config(path) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text)
