"""Run configuration: sectioned ``key = value`` text with strict validation.

Every value is SI. ``parse_config`` applies defaults and ``emit_config``
writes the canonical form, which parses back to an equal ``Config``.
"""

from __future__ import annotations

import configparser
import difflib
import math
from dataclasses import dataclass
from typing import Any, Callable


class ConfigError(ValueError):
    def __init__(self, message: str, key: str | None = None, line: int | None = None):
        where = []
        if key:
            where.append(key)
        if line:
            where.append(f"line {line}")
        super().__init__(f"{': '.join([', '.join(where), message]) if where else message}")
        self.key = key
        self.line = line


REQUIRED = object()


@dataclass(frozen=True)
class Option:
    parse: Callable[[str], Any]
    default: Any = REQUIRED
    check: Callable[[Any], str | None] | None = None


def _float(s: str) -> float:
    v = float(s)
    if not math.isfinite(v):
        raise ValueError("must be finite")
    return v


def _int(s: str) -> int:
    return int(s)


def _bool(s: str) -> bool:
    low = s.strip().lower()
    if low in ("true", "yes", "on", "1"):
        return True
    if low in ("false", "no", "off", "0"):
        return False
    raise ValueError(f"expected a boolean, got {s!r}")


def _auto_float(s: str):
    return None if s.strip().lower() == "auto" else _float(s)


def _float_list(s: str) -> tuple[float, ...]:
    parts = s.replace(",", " ").split()
    if not parts:
        return ()
    return tuple(_float(p) for p in parts)


def _str_list(s: str) -> tuple[str, ...]:
    return tuple(p for p in s.replace(",", " ").split())


def _crack(s: str):
    if s.strip().lower() == "none":
        return None
    v = _float_list(s)
    if len(v) != 4:
        raise ValueError("expected 'none' or four numbers x0 y0 x1 y1")
    return v


def _choice(*options):
    def parse(s: str) -> str:
        v = s.strip()
        if v not in options:
            raise ValueError(f"expected one of {', '.join(options)}, got {v!r}")
        return v

    return parse


def _positive(v):
    return None if v is None or v > 0 else "must be positive"


def _nonnegative(v):
    return None if v >= 0 else "must be nonnegative"


def _at_least_one(v):
    return None if v >= 1 else "must be >= 1"


def _poisson(v):
    return None if -1.0 < v < 0.5 else "must lie in (-1, 0.5)"


def _formats(v):
    bad = [f for f in v if f not in ("csv", "vtk")]
    return f"unknown format(s) {', '.join(bad)}; use csv, vtk" if bad else None


def _unit_interval(v):
    return None if 0.0 < v <= 1.0 else "must lie in (0, 1]"


def _all_positive(v):
    return None if all(x > 0 for x in v) else "entries must be positive"


def _all_nonnegative(v):
    return None if all(x >= 0 for x in v) else "entries must be nonnegative"


SCHEMA: dict[str, dict[str, Option]] = {
    "domain": {
        "width": Option(_float, check=_positive),
        "height": Option(_float, check=_positive),
        "crack": Option(_crack, None),
    },
    "material": {
        "density": Option(_float, 1200.0, _positive),
        "bulk_modulus": Option(_float, 25e9, _positive),
        "poisson_ratio": Option(_float, 0.245, _poisson),
        "fracture_toughness": Option(_float, 500.0, _positive),
        "horizon": Option(_float, check=_positive),
        "influence": Option(_choice("one_minus_r", "const"), "one_minus_r"),
        "hydrostatic": Option(_choice("quadratic", "convex_concave"), "quadratic"),
        "inflection": Option(_choice("analytic", "printed"), "analytic"),
        "boundary_function": Option(_choice("smoothstep", "product", "none"), "smoothstep"),
    },
    "discretization": {
        "h": Option(_float, check=_positive),
        "time_step": Option(_auto_float, None, _positive),
        "final_time": Option(_float, check=_positive),
        "quadrature_order": Option(_int, 2, lambda v: None if v in (1, 2) else "must be 1 or 2"),
        "cfl_safety": Option(_float, 0.9, _unit_interval),
        "cfl_iterations": Option(_int, 200, _at_least_one),
        "allow_unstable": Option(_bool, False),
    },
    "bc": {
        "mode": Option(_choice("crack", "free"), "free"),
        "collar": Option(_auto_float, None, _positive),
        "strip": Option(_auto_float, None, _positive),
        "left_velocity": Option(_float, -1.0),
        "right_velocity": Option(_float, 1.0),
    },
    "initial": {
        "displacement": Option(_choice("none", "sine"), "none"),
        "amplitude": Option(_float, 0.0),
        "velocity_x": Option(_float, 0.0),
        "velocity_y": Option(_float, 0.0),
    },
    "output": {
        "directory": Option(str, "runs/out"),
        "cadence": Option(_int, 100, _at_least_one),
        "formats": Option(_str_list, ("csv", "vtk"), _formats),
    },
    "study": {
        "mesh_sizes": Option(_float_list, (), _all_positive),
        "comparison_times": Option(_float_list, (), _all_nonnegative),
    },
}


class Section:
    """Read-only attribute view of one validated section."""

    def __init__(self, name: str, values: dict):
        object.__setattr__(self, "_name", name)
        object.__setattr__(self, "_values", dict(values))

    def __getattr__(self, key):
        try:
            return self._values[key]
        except KeyError:
            raise AttributeError(f"{self._name}.{key}") from None

    def __setattr__(self, key, value):
        raise AttributeError("config sections are read-only")

    def __eq__(self, other):
        return isinstance(other, Section) and self._name == other._name and self._values == other._values

    def as_dict(self) -> dict:
        return dict(self._values)

    def __repr__(self):
        return f"Section({self._name!r}, {self._values!r})"


class Config:
    def __init__(self, sections: dict[str, Section]):
        self._sections = sections

    def __getattr__(self, name):
        if name.startswith("_"):
            raise AttributeError(name)
        try:
            return self._sections[name]
        except KeyError:
            raise AttributeError(name) from None

    def __eq__(self, other):
        return isinstance(other, Config) and self._sections == other._sections

    def replace(self, section: str, **values) -> "Config":
        """Copy with some keys of one section changed (values are revalidated)."""
        secs = {k: v.as_dict() for k, v in self._sections.items()}
        for key, val in values.items():
            if key not in SCHEMA[section]:
                raise ConfigError("unknown key", f"{section}.{key}")
            secs[section][key] = val
        out = Config({k: Section(k, v) for k, v in secs.items()})
        _validate(out)
        return out

    def with_derived(self) -> "Config":
        """Resolve ``auto`` boundary widths to the horizon."""
        eps = self.material.horizon
        return self.replace("bc", collar=self.bc.collar or eps, strip=self.bc.strip or eps)


def _suggest(word: str, options) -> str:
    close = difflib.get_close_matches(word, list(options), n=1, cutoff=0.6)
    return f"; did you mean {close[0]!r}?" if close else ""


def _option_lines(text: str) -> dict:
    """(section, key) -> line number, for error messages."""
    where = {}
    section = None
    for n, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line[0] in "#;":
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip()
        elif section is not None:
            for sep in ("=", ":"):
                if sep in line:
                    where.setdefault((section, line.split(sep, 1)[0].strip().lower()), n)
                    break
    return where


def _validate(cfg: Config, lines: dict | None = None) -> None:
    lines = lines or {}
    for sec, opts in SCHEMA.items():
        for key, opt in opts.items():
            if opt.check is None:
                continue
            msg = opt.check(getattr(getattr(cfg, sec), key))
            if msg:
                raise ConfigError(msg, f"{sec}.{key}", lines.get((sec, key)))
    d = cfg.domain
    if d.crack is not None:
        x0, y0, x1, y1 = d.crack
        for x, y in ((x0, y0), (x1, y1)):
            if not (0.0 <= x <= d.width and 0.0 <= y <= d.height):
                raise ConfigError("crack endpoint outside the domain", "domain.crack", lines.get(("domain", "crack")))
        if (x0, y0) == (x1, y1):
            raise ConfigError("crack has zero length", "domain.crack", lines.get(("domain", "crack")))
    if cfg.bc.mode == "crack" and d.crack is None:
        raise ConfigError("mode 'crack' needs domain.crack", "bc.mode", lines.get(("bc", "mode")))
    if cfg.discretization.h >= min(d.width, d.height):
        raise ConfigError("mesh size must be smaller than the domain", "discretization.h",
                          lines.get(("discretization", "h")))


def parse_config(text: str) -> Config:
    """Parse and validate configuration text.

    Raises:
        ConfigError: on syntax errors (with line number), unknown sections or
            keys (with a suggestion), missing required keys and invalid values
            (with the ``section.key`` path).
    """
    cp = configparser.ConfigParser(interpolation=None, strict=True, empty_lines_in_values=False,
                                   inline_comment_prefixes=("#", ";"))
    try:
        cp.read_string(text)
    except configparser.MissingSectionHeaderError as exc:
        raise ConfigError("expected a [section] header", line=exc.lineno) from None
    except configparser.DuplicateOptionError as exc:
        raise ConfigError("duplicate key", f"{exc.section}.{exc.option}", exc.lineno) from None
    except configparser.DuplicateSectionError as exc:
        raise ConfigError("duplicate section", exc.section, exc.lineno) from None
    except configparser.ParsingError as exc:
        line = exc.errors[0][0] if exc.errors else None
        raise ConfigError("malformed line (expected key = value)", line=line) from None
    lines = _option_lines(text)
    sections = {}
    for sec in cp.sections():
        if sec not in SCHEMA:
            raise ConfigError(f"unknown section{_suggest(sec, SCHEMA)}", sec)
    for sec, opts in SCHEMA.items():
        raw = dict(cp.items(sec)) if cp.has_section(sec) else {}
        for key in raw:
            if key not in opts:
                raise ConfigError(f"unknown key{_suggest(key, opts)}", f"{sec}.{key}", lines.get((sec, key)))
        values = {}
        for key, opt in opts.items():
            if key in raw:
                try:
                    values[key] = opt.parse(raw[key])
                except ValueError as exc:
                    raise ConfigError(f"invalid value {raw[key]!r} ({exc})", f"{sec}.{key}",
                                      lines.get((sec, key))) from None
            elif opt.default is REQUIRED:
                raise ConfigError("missing required key", f"{sec}.{key}")
            else:
                values[key] = opt.default
        sections[sec] = Section(sec, values)
    cfg = Config(sections)
    _validate(cfg, lines)
    return cfg


def _format(value) -> str:
    if value is None:
        return "auto"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        return " ".join(_format(v) for v in value)
    return str(value)


def emit_config(cfg: Config) -> str:
    """Canonical text: every section and key in schema order."""
    out = []
    for sec, opts in SCHEMA.items():
        out.append(f"[{sec}]")
        s = getattr(cfg, sec)
        for key in opts:
            val = getattr(s, key)
            if key == "crack" and val is None:
                text = "none"
            else:
                text = _format(val)
            out.append(f"{key} = {text}")
        out.append("")
    return "\n".join(out)


def load_config(path) -> Config:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())
