"""Flat experiment configuration: one `experiment = <id>` line plus
`section.key = value` overrides, `#` comments, nothing nested deeper.

Every experiment id carries a complete defaults table, so the minimal valid
file is the single experiment line.  Values are typed by their defaults;
`serialize` round-trips through `parse_config` to an equal Config.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from types import MappingProxyType
from typing import Mapping

__all__ = [
    "ConfigError",
    "Config",
    "EXPERIMENT_IDS",
    "default_config",
    "parse_config",
    "load_config",
    "serialize",
]


class ConfigError(ValueError):
    """Malformed or inconsistent configuration; carries the offending line."""

    def __init__(self, message: str, line: int | None = None) -> None:
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


Value = bool | int | float | str

# Defaults double as the type schema: an override must parse to the same type
# (ints are accepted where a float is expected).
_DEFAULTS: dict[str, dict[str, dict[str, Value]]] = {
    "E1_boundedness": {
        "grid": {"dim": 2, "cells": 64, "length": 1.0},
        "run": {"t_end": 5.0, "eps": 0.0, "cfl_safety": 0.9, "diag_stride": 100,
                "seed": 0},
        "motility": {"kind": "linear", "beta": 1.0, "shift": 0.0},
        "init": {"u_base": 1.0, "u_height": 2.0, "v_peak": 1.0, "v_width": 0.25},
    },
    "E2_stabilization": {
        "grid": {"dim": 1, "cells": 128, "length": 1.0},
        "run": {"t_end": 40.0, "eps": 0.0, "cfl_safety": 0.9, "diag_stride": 200,
                "seed": 0},
        "motility": {"kind": "linear", "beta": 1.0, "shift": 0.0},
        "init": {"u_base": 1.0, "u_height": 2.0, "v_peak": 0.5, "v_radius": 0.1},
        "scaling": {"levels": 4, "bump_radius": 0.03},
    },
    "E3_pattern_threshold": {
        "grid": {"dim": 1, "cells": 256, "length": 1.0},
        "run": {"t_end": 50.0, "eps": 0.0, "cfl_safety": 0.9, "diag_stride": 500,
                "seed": 0},
        "motility": {"kind": "linear", "beta": 1.0, "shift": 0.5},
        "init": {"u_base": 1.0, "u_height": 2.0, "v_mass": 0.01, "v_peak": 0.25},
        "verdict": {"degenerate_ratio": 0.5, "shifted_ratio": 0.1},
    },
    "E4_eps_convergence": {
        "grid": {"dim": 1, "cells": 128, "length": 1.0},
        "run": {"t_end": 2.0, "cfl_safety": 0.9, "diag_stride": 100, "seed": 0},
        "motility": {"kind": "linear", "beta": 1.0, "shift": 0.0},
        "init": {"u_base": 1.0, "u_height": 2.0, "v_peak": 1.0, "v_width": 0.25},
        "sweep": {"eps_start": 0.1, "eps_factor": 0.25, "eps_count": 3},
    },
    "E5a_mp_probe": {
        "grid": {"dim": 1, "cells": 128, "length": 1.0},
        "probe": {"p1": 4.0, "q1": 4.0, "p2": 2.0, "q2": 2.0, "L": 4.0,
                  "T": 1.0, "tau": 0.1, "instances": 32, "seed": 0},
        "coupled": {"enabled": True, "cells": 128, "t_check": 0.25,
                    "eps_start": 0.1, "eps_factor": 0.1, "eps_count": 3},
    },
    "E5b_counterexample": {
        "grid": {"dim": 1, "cells": 512, "length": 2.0},
        "family": {"alpha": 0.5, "T": 1.0, "R": 0.5, "R0": 1.5, "p": 1.0,
                   "q": 1.0, "k_min": 1, "k_max": 6},
        "run": {"cfl_safety": 0.9, "check_stride": 8},
    },
    "E6_inequality_fit": {
        "grid": {"dim": 1, "cells": 128, "length": 1.0},
        "fit": {"p": 2.0, "corpus": 200, "validation": 200, "seed": 4,
                "modes": 6, "headroom": 1.1},
    },
}

EXPERIMENT_IDS = tuple(sorted(_DEFAULTS))

_DIM_MESSAGE = "grid.dim must be 1 or 2; the stencils only cover one and two dimensions"


def _freeze(values: dict[str, dict[str, Value]]) -> Mapping[str, Mapping[str, Value]]:
    return MappingProxyType({s: MappingProxyType(dict(kv)) for s, kv in values.items()})


@dataclass(frozen=True)
class Config:
    experiment: str
    values: Mapping[str, Mapping[str, Value]]

    def __getitem__(self, section: str) -> Mapping[str, Value]:
        return self.values[section]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Config):
            return NotImplemented
        return self.experiment == other.experiment and {
            s: dict(kv) for s, kv in self.values.items()
        } == {s: dict(kv) for s, kv in other.values.items()}

    def __hash__(self) -> int:
        items = tuple(
            (s, tuple(sorted(self.values[s].items()))) for s in sorted(self.values)
        )
        return hash((self.experiment, items))


def default_config(experiment: str) -> Config:
    if experiment not in _DEFAULTS:
        raise ConfigError(
            f"unknown experiment {experiment!r}; valid ids: {', '.join(EXPERIMENT_IDS)}"
        )
    values = {s: dict(kv) for s, kv in _DEFAULTS[experiment].items()}
    return Config(experiment=experiment, values=_freeze(values))


def _parse_scalar(text: str, line: int) -> Value:
    if text == "true":
        return True
    if text == "false":
        return False
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        pass
    if not text:
        raise ConfigError("empty value", line)
    return text


def _coerce(raw: Value, expected: Value, dotted: str, line: int) -> Value:
    if isinstance(expected, bool):
        if isinstance(raw, bool):
            return raw
        raise ConfigError(f"{dotted} expects true or false, got {raw!r}", line)
    if isinstance(expected, int):
        if isinstance(raw, int) and not isinstance(raw, bool):
            return raw
        raise ConfigError(f"{dotted} expects an integer, got {raw!r}", line)
    if isinstance(expected, float):
        if isinstance(raw, (int, float)) and not isinstance(raw, bool):
            return float(raw)
        raise ConfigError(f"{dotted} expects a number, got {raw!r}", line)
    if isinstance(raw, str):
        return raw
    raise ConfigError(f"{dotted} expects a string, got {raw!r}", line)


def parse_config(text: str) -> Config:
    """Parse config text into a Config with defaults filled in.

    Raises ConfigError with the 1-based line number on any malformed line,
    unknown key, or type mismatch."""
    experiment: str | None = None
    overrides: list[tuple[int, str, str, Value]] = []
    for lineno, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {line!r}", lineno)
        key, _, rhs = line.partition("=")
        key = key.strip()
        value = _parse_scalar(rhs.strip(), lineno)
        if key == "experiment":
            if experiment is not None:
                raise ConfigError("duplicate experiment line", lineno)
            if not isinstance(value, str):
                raise ConfigError(f"experiment must be an id, got {value!r}", lineno)
            experiment = value
            continue
        parts = key.split(".")
        if len(parts) != 2 or not all(parts):
            raise ConfigError(
                f"keys are exactly one section deep ('section.key'), got {key!r}",
                lineno,
            )
        overrides.append((lineno, parts[0], parts[1], value))
    if experiment is None:
        raise ConfigError("missing required 'experiment = <id>' line")
    if experiment not in _DEFAULTS:
        raise ConfigError(
            f"unknown experiment {experiment!r}; valid ids: {', '.join(EXPERIMENT_IDS)}"
        )
    values = {s: dict(kv) for s, kv in _DEFAULTS[experiment].items()}
    for lineno, section, key, value in overrides:
        if section not in values:
            raise ConfigError(
                f"unknown section {section!r} for {experiment}; "
                f"valid sections: {', '.join(sorted(values))}",
                lineno,
            )
        if key not in values[section]:
            raise ConfigError(
                f"unknown key {key!r} in section {section!r}; "
                f"valid keys: {', '.join(sorted(values[section]))}",
                lineno,
            )
        values[section][key] = _coerce(value, values[section][key],
                                       f"{section}.{key}", lineno)
    if "grid" in values and values["grid"].get("dim") not in (1, 2):
        raise ConfigError(_DIM_MESSAGE)
    _validate(experiment, values)
    return Config(experiment=experiment, values=_freeze(values))


def _validate(experiment: str, values: dict[str, dict[str, Value]]) -> None:
    grid = values.get("grid", {})
    if "cells" in grid and grid["cells"] < 2:
        raise ConfigError("grid.cells must be at least 2")
    if "length" in grid and grid["length"] <= 0:
        raise ConfigError("grid.length must be positive")
    run = values.get("run", {})
    if "t_end" in run and run["t_end"] <= 0:
        raise ConfigError("run.t_end must be positive")
    if "eps" in run and run["eps"] < 0:
        raise ConfigError("run.eps must be nonnegative")
    if "cfl_safety" in run and not 0 < run["cfl_safety"] <= 1:
        raise ConfigError("run.cfl_safety must lie in (0, 1]")
    mot = values.get("motility", {})
    if "kind" in mot and mot["kind"] not in ("linear", "exp_decay", "saturating"):
        raise ConfigError(
            f"motility.kind must be linear, exp_decay, or saturating, got {mot['kind']!r}"
        )
    if "shift" in mot and mot["shift"] < 0:
        raise ConfigError("motility.shift must be nonnegative")


def load_config(path: str | Path) -> Config:
    return parse_config(Path(path).read_text())


def _format_value(value: Value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def serialize(config: Config) -> str:
    """Stable text form; parse_config(serialize(c)) == c."""
    lines = [f"experiment = {config.experiment}"]
    for section in sorted(config.values):
        for key in sorted(config.values[section]):
            lines.append(f"{section}.{key} = {_format_value(config.values[section][key])}")
    return "\n".join(lines) + "\n"
