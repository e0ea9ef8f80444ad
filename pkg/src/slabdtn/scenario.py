"""Scenario files: sectioned ``key = value`` text read with :mod:`configparser`.

Every key must appear in :data:`SCHEMA`; unknown sections or keys, duplicate
keys and out-of-range values are errors that name the key and line.
"""

from __future__ import annotations

import configparser
import math
import re
from dataclasses import dataclass, field

STAGES = ("symbol", "solve", "energy", "stability", "liouville", "symmetry", "layer",
          "hamiltonian", "double_well", "limits", "duality")


class ScenarioError(ValueError):
    pass


def _floats(text):
    parts = [p.strip() for p in text.split(",") if p.strip()]
    return tuple(float(p) for p in parts)


def _ints(text):
    return tuple(int(p) for p in _floats(text))


def _bool(text):
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _words(text):
    return tuple(p.strip() for p in text.split(",") if p.strip())


def _optional_float(text):
    return None if text.strip().lower() in ("", "auto", "none") else float(text)


def _seed(text):
    v = int(text)
    if not 0 <= v < 2 ** 64:
        raise ValueError("seed must be an unsigned 64-bit integer")
    return v


# section -> key -> (parser, default, check or None, description of the valid range)
SCHEMA = {
    "scenario": {
        "name": (str.strip, None, lambda v: bool(re.fullmatch(r"[A-Za-z0-9_.-]+", v)),
                 "letters, digits, '_', '.', '-'"),
        "pipeline": (_words, ("solve",), lambda v: len(v) > 0 and all(s in STAGES for s in v),
                     "comma list of " + ", ".join(STAGES)),
        "seed": (_seed, 0, None, "0 <= seed < 2^64"),
    },
    "grid": {
        "n": (int, 1, lambda v: v in (1, 2, 3), "1, 2 or 3"),
        "a": (float, 0.0, lambda v: -1.0 < v < 1.0, "the open interval (-1, 1)"),
        "L": (float, 20.0, lambda v: v > 0, "L > 0"),
        "N": (int, 161, lambda v: v >= 2, "N >= 2"),
        "M": (int, 16, lambda v: v >= 2, "M >= 2"),
        "gamma_mesh": (_optional_float, None, lambda v: v is None or v >= 1.0, "gamma_mesh >= 1 or auto"),
        "lateral_bc": (str.strip, "dirichlet", lambda v: v in ("dirichlet", "periodic"), "dirichlet or periodic"),
    },
    "nonlinearity": {
        "kind": (str.strip, "allen_cahn", lambda v: v in ("allen_cahn", "polynomial", "zero"),
                 "allen_cahn, polynomial or zero"),
        "coefficients": (_floats, (), None, "comma list of reals"),
        "tau": (_optional_float, None, None, "a real or auto"),
        "flip_sign": (_bool, False, None, "true or false (fault injection: f -> -f with G kept)"),
    },
    "boundary": {
        "kind": (str.strip, "constant", lambda v: v in ("constant", "layer", "profile", "linear", "cosine"),
                 "constant, layer, profile, linear or cosine"),
        "value": (_optional_float, None, None, "a real or auto"),
        "direction": (_floats, (), lambda v: len(v) == 0 or any(x != 0 for x in v), "nonzero vector"),
        "width": (float, 2.0, lambda v: v > 0, "width > 0"),
        "noise": (float, 0.0, lambda v: v >= 0, "noise >= 0"),
    },
    "solve": {
        "method": (str.strip, "descent", lambda v: v in ("descent", "newton", "descent+newton"),
                   "descent, newton or descent+newton"),
        "tol": (_optional_float, None, lambda v: v is None or v > 0, "tol > 0"),
        "max_iter": (int, 5000, lambda v: v > 0, "max_iter > 0"),
    },
    "symbol": {
        "rho_min": (float, 0.0, lambda v: v >= 0, "rho_min >= 0"),
        "rho_max": (float, 100.0, lambda v: v > 0, "rho_max > 0"),
        "count": (int, 64, lambda v: v >= 8, "count >= 8"),
        "M": (_optional_float, None, lambda v: v is None or v >= 2, "M >= 2 or auto"),
    },
    "audit": {
        "radii": (_floats, (4.0, 8.0, 16.0), lambda v: all(r > 0 for r in v), "positive radii"),
        "collar": (float, 0.1, lambda v: 0 <= v < 0.5, "0 <= collar < 0.5"),
        "axis": (int, -1, None, "lateral axis index"),
        "eig_tol": (float, 1e-10, lambda v: v > 0, "eig_tol > 0"),
        "refinements": (int, 2, lambda v: v >= 1, "refinements >= 1"),
    },
    "checks": {
        "exponent": (_optional_float, None, None, "expected energy exponent or none"),
        "exponent_tol": (float, 0.3, lambda v: v > 0, "exponent_tol > 0"),
        "lambda_floor": (float, -1e-8, None, "a real"),
        "cv_max": (float, 0.05, lambda v: v > 0, "cv_max > 0"),
        "residual_max": (float, 0.05, lambda v: v > 0, "residual_max > 0"),
        "ratio_min": (float, 1.5, lambda v: v > 0, "ratio_min > 0"),
        "far_field": (float, 0.05, lambda v: v > 0, "far_field > 0"),
    },
}


@dataclass
class Scenario:
    name: str
    values: dict = field(default_factory=dict)     # (section, key) -> parsed value
    text: str = ""

    def get(self, section, key):
        return self.values[(section, key)]

    def __getitem__(self, item):
        return self.values[item]

    @property
    def pipeline(self):
        return self.get("scenario", "pipeline")

    @property
    def seed(self):
        return self.get("scenario", "seed")

    def with_overrides(self, **pairs) -> "Scenario":
        vals = dict(self.values)
        for k, v in pairs.items():
            section, key = k.split("__")
            vals[(section, key)] = v
        return Scenario(self.name, vals, self.text)


def _first_line(text, section, key):
    current = None
    for no, line in enumerate(text.splitlines(), start=1):
        s = line.strip()
        m = re.fullmatch(r"\[([^\]]+)\]", s)
        if m:
            current = m.group(1).strip()
            continue
        if current == section and re.match(rf"{re.escape(key)}\s*[=:]", s):
            return no
    return None


def _line_of(text, section, key):
    return _first_line(text, section, key) or 0


def parse_scenario(text: str) -> Scenario:
    parser = configparser.ConfigParser(interpolation=None, strict=True, delimiters=("=",),
                                       comment_prefixes=("#", ";"), inline_comment_prefixes=("#",),
                                       empty_lines_in_values=False)
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.DuplicateOptionError as exc:
        first = _first_line(text, exc.section, exc.option)
        raise ScenarioError(f"duplicate key '{exc.option}' in [{exc.section}] at lines {first} and {exc.lineno}") from None
    except configparser.DuplicateSectionError as exc:
        raise ScenarioError(f"duplicate section [{exc.section}] at line {exc.lineno}") from None
    except configparser.MissingSectionHeaderError as exc:
        raise ScenarioError(f"syntax error at line {exc.lineno}: key outside any [section]") from None
    except configparser.ParsingError as exc:
        lineno, line = exc.errors[0]
        raise ScenarioError(f"syntax error at line {lineno}: {line.strip()!r} is not 'key = value'") from None

    values = {}
    for section in parser.sections():
        if section not in SCHEMA:
            raise ScenarioError(f"unknown section [{section}] at line {_line_of(text, section, '')}")
        for key, raw in parser.items(section):
            if key not in SCHEMA[section]:
                raise ScenarioError(f"unknown key '{key}' in [{section}] at line {_line_of(text, section, key)}")
            conv, _, check, desc = SCHEMA[section][key]
            try:
                val = conv(raw)
            except ValueError as exc:
                raise ScenarioError(f"bad value for '{key}' at line {_line_of(text, section, key)}: {exc}") from None
            if isinstance(val, float) and not math.isfinite(val):
                raise ScenarioError(f"'{key}' must be finite (line {_line_of(text, section, key)})")
            if check is not None and not check(val):
                raise ScenarioError(f"'{key}' = {raw.strip()} out of range: must be {desc} "
                                    f"(line {_line_of(text, section, key)})")
            values[(section, key)] = val
    for section, keys in SCHEMA.items():
        for key, (_, default, _, _) in keys.items():
            values.setdefault((section, key), default)
    if values[("scenario", "name")] is None:
        raise ScenarioError("missing required key 'name' in [scenario]")
    coeffs = values[("nonlinearity", "coefficients")]
    if values[("nonlinearity", "kind")] == "polynomial" and not coeffs:
        raise ScenarioError("polynomial nonlinearity needs 'coefficients'")
    if values[("grid", "lateral_bc")] == "periodic" and values[("boundary", "kind")] in ("layer", "profile"):
        raise ScenarioError("layer boundary data needs lateral_bc = dirichlet")
    direction = values[("boundary", "direction")]
    if direction and len(direction) != values[("grid", "n")]:
        raise ScenarioError(f"'direction' has {len(direction)} components, expected n = {values[('grid', 'n')]}")
    return Scenario(values[("scenario", "name")], values, text)


def load_scenario(path) -> Scenario:
    with open(path, encoding="utf-8") as fh:
        return parse_scenario(fh.read())
