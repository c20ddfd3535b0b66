"""Analysis configuration files and the bundled fixture corpus.

A configuration is a TOML document::

    name = "golden-bc"
    probs = ["1/2", "1/2"]

    [field]
    generator = "rho"
    minimal_polynomial = "rho^2 + rho - 1"
    root_interval = ["0", "1"]

    [[maps]]
    r = "rho"
    d = "0"

    [parameters]
    t_min = 1e-4

Map coefficients are strings in the element grammar.  Probabilities are
exact rationals or decimal strings.  Without a ``[field]`` table the
coefficients are rational.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, fields, replace
from fractions import Fraction
from importlib import resources
from pathlib import Path

from .dims import Params
from .exactnum import FieldError, NumberField, ParseError, parse_element, parse_polynomial
from .ifs import IFS, IFSError, Similarity

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

__all__ = ["ConfigError", "AnalysisConfig", "load_config", "parse_config", "fixture_names",
           "parse_probs"]


class ConfigError(ValueError):
    """Invalid configuration, with the offending location in the message."""


@dataclass
class AnalysisConfig:
    name: str
    ifs: IFS
    params: Params
    description: str = ""
    tier: str = "default"
    source: str = ""

    def with_probs(self, probs) -> "AnalysisConfig":
        return replace(self, ifs=self.ifs.with_probs(probs))


def _rational(value, where: str) -> Fraction:
    if isinstance(value, bool) or isinstance(value, float):
        raise ConfigError(f"{where}: use an exact rational string instead of {value!r}")
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, str):
        try:
            return Fraction(value.strip())
        except (ValueError, ZeroDivisionError):
            raise ConfigError(f"{where}: {value!r} is not a rational number") from None
    raise ConfigError(f"{where}: expected a rational, got {type(value).__name__}")


def parse_probs(values, where: str = "probs") -> tuple[Fraction, ...]:
    if isinstance(values, str):
        values = [v for v in values.split(",") if v.strip()]
    if not isinstance(values, (list, tuple)):
        raise ConfigError(f"{where}: expected a list")
    return tuple(_rational(v, f"{where}[{i + 1}]") for i, v in enumerate(values))


def _field(doc: dict) -> NumberField:
    field_doc = doc.get("field")
    if field_doc is None:
        return NumberField.rationals()
    if not isinstance(field_doc, dict):
        raise ConfigError("field: expected a table")
    gen = field_doc.get("generator", "theta")
    try:
        poly = parse_polynomial(str(field_doc["minimal_polynomial"]), gen)
    except KeyError:
        raise ConfigError("field.minimal_polynomial: missing") from None
    except ParseError as exc:
        raise ConfigError(f"field.minimal_polynomial: {exc}") from None
    iv = field_doc.get("root_interval")
    if not isinstance(iv, list) or len(iv) != 2:
        raise ConfigError("field.root_interval: expected [lo, hi]")
    lo = _rational(iv[0], "field.root_interval[1]")
    hi = _rational(iv[1], "field.root_interval[2]")
    try:
        return NumberField(poly, (lo, hi), gen)
    except FieldError as exc:
        raise ConfigError(f"field: {exc}") from None


def _params(doc: dict) -> Params:
    raw = doc.get("parameters", {})
    if not isinstance(raw, dict):
        raise ConfigError("parameters: expected a table")
    known = {f.name: f.type for f in fields(Params)}
    out = Params()
    for key, value in raw.items():
        if key not in known:
            raise ConfigError(f"parameters.{key}: unknown parameter")
        default = getattr(out, key)
        try:
            value = type(default)(value)
        except (TypeError, ValueError):
            raise ConfigError(f"parameters.{key}: bad value {value!r}") from None
        setattr(out, key, value)
    return out


def parse_config(text: str, source: str = "<string>") -> AnalysisConfig:
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{source}: {exc}") from None
    F = _field(doc)
    maps_raw = doc.get("maps")
    if not isinstance(maps_raw, list) or not maps_raw:
        raise ConfigError("maps: expected a non-empty array of tables")
    maps = []
    for i, m in enumerate(maps_raw):
        coeff = {}
        for key in ("r", "d"):
            where = f"maps[{i + 1}].{key}"
            if key not in m:
                raise ConfigError(f"{where}: missing")
            if not isinstance(m[key], (str, int)) or isinstance(m[key], bool):
                raise ConfigError(f"{where}: expected an element string")
            try:
                coeff[key] = parse_element(str(m[key]), F)
            except ParseError as exc:
                raise ConfigError(f"{where}: {exc}") from None
        maps.append(Similarity(coeff["r"], coeff["d"]))
    probs = parse_probs(doc.get("probs", []))
    try:
        ifs = IFS(F, tuple(maps), probs, str(doc.get("name", "")))
    except (IFSError, FieldError) as exc:
        raise ConfigError(f"{source}: {exc}") from None
    return AnalysisConfig(
        name=str(doc.get("name", Path(source).stem)),
        ifs=ifs,
        params=_params(doc),
        description=str(doc.get("description", "")),
        tier=str(doc.get("tier", "default")),
        source=source,
    )


def fixture_names() -> list[str]:
    root = resources.files("locdim") / "fixtures"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".toml"))


def load_config(path_or_name: str) -> AnalysisConfig:
    """Load a config file, or a bundled fixture by name."""
    p = Path(path_or_name)
    if p.is_file():
        return parse_config(p.read_text(), str(p))
    res = resources.files("locdim") / "fixtures" / f"{path_or_name}.toml"
    if res.is_file():
        return parse_config(res.read_text(), path_or_name)
    raise ConfigError(
        f"{path_or_name}: no such file or fixture (fixtures: {', '.join(fixture_names())})"
    )
