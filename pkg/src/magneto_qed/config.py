"""Run configuration: YAML in, validated and fully defaulted dict out."""

from __future__ import annotations

import copy
import re
from dataclasses import dataclass

import jsonschema
import numpy as np
import yaml

from . import pv
from .couplings import random_unitary
from .errors import ConfigError
from .grid import SpectralGrid
from .media import (
    BandRegion,
    ClosedFormRegion,
    LorentzTerm,
    MediumModel,
    OscillatorBand,
    Placement,
    ZeemanTerm,
    default_grid,
)
from .tensors import BLOCKS

_NUM = {"type": "number"}
_POS = {"type": "number", "exclusiveMinimum": 0}
_NONNEG = {"type": "number", "minimum": 0}
_VEC3 = {"type": "array", "items": _NUM, "minItems": 3, "maxItems": 3}
_EYE = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]
_TENSOR = {"type": "array", "items": _VEC3, "minItems": 3, "maxItems": 3, "default": _EYE}


def _obj(props: dict, required=(), **extra) -> dict:
    out = {"type": "object", "additionalProperties": False, "properties": props}
    if required:
        out["required"] = list(required)
    out.update(extra)
    return out


_OSC = _obj({"f": _NONNEG, "w0": _POS, "gamma": _POS}, ["f", "w0", "gamma"])

_LORENTZ = _obj(
    {"block": {"enum": list(BLOCKS), "default": "ee"}, "f": _NONNEG, "w0": _POS, "gamma": _POS, "tensor": _TENSOR},
    ["f", "w0", "gamma"],
)
_ZEEMAN = _obj(
    {"f": _NONNEG, "w0": _POS, "gamma": _POS, "bias": dict(_VEC3, default=[0.0, 0.0, 0.0]), "kappa": dict(_NUM, default=1.0)},
    ["f", "w0", "gamma"],
)
_BAND = _obj(
    {
        "electric": {"oneOf": [_OSC, {"type": "null"}], "default": None},
        "magnetic": {"oneOf": [_OSC, {"type": "null"}], "default": None},
        "sign": {"enum": [1, -1], "default": 1},
        "orientation_e": _TENSOR,
        "orientation_m": _TENSOR,
        "gauge_seed": {"type": ["integer", "null"], "default": None},
    }
)
_REGION = _obj(
    {
        "name": {"type": "string", "minLength": 1},
        "kind": {"enum": ["closed_form", "bands"], "default": "closed_form"},
        "lorentz": {"type": "array", "items": _LORENTZ, "default": []},
        "zeeman": {"type": "array", "items": _ZEEMAN, "default": []},
        "bands": {"type": "array", "items": _BAND, "default": []},
        "flips": {"type": "array", "items": {"enum": ["bias"]}, "default": []},
    },
    ["name"],
)
_PLACEMENT = _obj(
    {
        "region": {"type": "string"},
        "axis": {"type": ["integer", "null"], "minimum": 0, "maximum": 2, "default": None},
        "lo": dict(_NONNEG, default=0.0),
        "hi": dict(_NONNEG, default=1.0),
    },
    ["region"],
)
_OMEGA = _obj(
    {
        "min": dict(_POS, default=pv.DEFAULT_SPAN[0]),
        "max": dict(_POS, default=pv.DEFAULT_SPAN[1]),
        "points": {"type": "integer", "minimum": 2, "default": pv.DEFAULT_POINTS},
        "spacing": {"enum": ["log", "linear"], "default": "log"},
        "values": {"oneOf": [{"type": "array", "items": _POS, "minItems": 1}, {"type": "null"}], "default": None},
    },
    default={},
)
_FREQS = {"type": "array", "items": _POS, "minItems": 1, "default": [1.0]}

_TOLERANCES = _obj(
    {
        "kk": dict(_POS, default=1e-3),
        "onsager": dict(_POS, default=1e-10),
        "causality": dict(_POS, default=1e-4),
        "passivity": dict(_POS, default=1e-10),
        "cross_bound": dict(_POS, default=1e-10),
        "roundtrip": dict(_POS, default=1e-12),
        "eigen_residual": dict(_POS, default=1e-8),
        "normalization": dict(_POS, default=1e-10),
        "transversality": dict(_POS, default=1e-12),
        "curl": dict(_POS, default=1e-10),
        "sumrule": dict(_POS, default=0.02),
        "synthesis": dict(_POS, default=1e-6),
        "energy": dict(_POS, default=0.02),
    },
    default={},
)

_COMMANDS = _obj(
    {
        "validate": _obj(
            {
                "checks": {
                    "type": "array",
                    "items": {"enum": ["kk", "onsager", "causality", "passivity", "cross_bound"]},
                    "default": ["kk", "onsager", "causality", "passivity", "cross_bound"],
                },
                "window": {"type": "array", "items": _POS, "minItems": 2, "maxItems": 2, "default": [1e-2, 1e2]},
                "flips": {"oneOf": [{"type": "array", "items": {"enum": ["bias"]}}, {"type": "null"}], "default": None},
            },
            default={},
        ),
        "factorize": _obj(
            {
                "frequencies": _FREQS,
                "partition": {"enum": ["eigen", "n3"], "default": "eigen"},
                "electric_share": {"type": ["number", "null"], "default": None},
                "random_samples": {"type": "integer", "minimum": 0, "default": 0},
            },
            default={},
        ),
        "modes": _obj(
            {
                "frequencies": _FREQS,
                "format": {"enum": ["json", "csv", "both"], "default": "json"},
            },
            default={},
        ),
        "sumrule": _obj(
            {
                "k": dict(_VEC3, default=[1.0, 0.0, 0.0]),
                "components": {"type": "array", "items": {"enum": [0, 1, 2]}, "minItems": 2, "maxItems": 2, "default": [1, 2]},
                "refine": {"type": "array", "items": {"type": "integer", "minimum": 1}, "minItems": 1, "default": [1]},
            },
            default={},
        ),
        "spectra": _obj({"frequencies": _FREQS}, default={}),
        "synth": _obj(
            {
                "frequencies": _FREQS,
                "amplitudes": {
                    "type": "array",
                    "items": _obj(
                        {
                            "bin": {"type": "integer", "minimum": 0},
                            "n": {"type": "integer", "minimum": 0},
                            "value": {"type": "array", "items": _NUM, "minItems": 2, "maxItems": 2},
                        },
                        ["bin", "n", "value"],
                    ),
                    "default": [],
                },
                "times": _obj(
                    {"start": dict(_NUM, default=0.0), "stop": dict(_NUM, default=10.0), "points": {"type": "integer", "minimum": 1, "default": 101}},
                    default={},
                ),
                "cell": {"type": "integer", "minimum": 0, "default": 0},
                "transient": {
                    "oneOf": [
                        _obj(
                            {
                                "points": {"type": "integer", "minimum": 8},
                                "window": {"type": "array", "items": _NUM, "minItems": 2, "maxItems": 2},
                                "centre": _NUM,
                                "width": dict(_POS, default=1.5),
                                "carrier": dict(_POS, default=1.0),
                                "duration": dict(_POS, default=60.0),
                                "dt": dict(_POS, default=0.02),
                            },
                            ["points", "window", "centre"],
                        ),
                        {"type": "null"},
                    ],
                    "default": None,
                },
            },
            default={},
        ),
    },
    default={},
)

CONFIG_SCHEMA = _obj(
    {
        "units": _obj({"hbar": dict(_POS, default=1.0), "c": dict(_POS, default=1.0)}, default={}),
        "grid": _obj(
            {
                "box": {"type": "array", "items": _POS, "minItems": 3, "maxItems": 3, "default": [1.0, 1.0, 1.0]},
                "points": {"type": "array", "items": {"type": "integer", "minimum": 1}, "minItems": 3, "maxItems": 3, "default": [1, 1, 1]},
                "omega": _OMEGA,
            },
            default={},
        ),
        "medium": _obj(
            {
                "regions": {"type": "array", "items": _REGION, "minItems": 1},
                "layout": {"type": "array", "items": _PLACEMENT, "default": []},
                "response_time": {"oneOf": [_POS, {"type": "null"}], "default": None},
            },
            ["regions"],
        ),
        "tolerances": _TOLERANCES,
        "commands": _COMMANDS,
        "seed": {"type": "integer", "default": 0},
        "workers": {"type": "integer", "minimum": 1, "default": 1},
    },
    ["medium"],
)


# PyYAML only reads floats with a dot; accept 1e-3 style too
class _Loader(yaml.SafeLoader):
    pass


_Loader.add_implicit_resolver(
    "tag:yaml.org,2002:float",
    re.compile(
        r"""^(?:[-+]?(?:[0-9][0-9_]*)\.[0-9_]*(?:[eE][-+]?[0-9]+)?
        |[-+]?(?:[0-9][0-9_]*)(?:[eE][-+]?[0-9]+)
        |\.[0-9_]+(?:[eE][-+]?[0-9]+)?
        |[-+]?\.(?:inf|Inf|INF)
        |\.(?:nan|NaN|NAN))$""",
        re.X,
    ),
    list("-+0123456789."),
)


def _fill(schema: dict, value):
    """Insert schema defaults, recursing through objects and arrays."""
    if isinstance(value, dict) and "properties" in schema:
        for key, sub in schema["properties"].items():
            if key not in value and "default" in sub:
                value[key] = copy.deepcopy(sub["default"])
            if key in value:
                value[key] = _fill(sub, value[key])
    elif isinstance(value, list) and isinstance(schema.get("items"), dict):
        value = [_fill(schema["items"], v) for v in value]
    elif value is not None and "oneOf" in schema:
        for sub in schema["oneOf"]:
            if sub.get("type") == "object" and isinstance(value, dict):
                value = _fill(sub, value)
    return value


def _path(err) -> str:
    out = ""
    for p in err.absolute_path:
        out += f"[{p}]" if isinstance(p, int) else (f".{p}" if out else str(p))
    return out or "<root>"


@dataclass(frozen=True)
class RunConfig:
    data: dict

    def __getitem__(self, key):
        return self.data[key]

    @property
    def hbar(self) -> float:
        return self.data["units"]["hbar"]

    @property
    def c(self) -> float:
        return self.data["units"]["c"]

    @property
    def tolerances(self) -> dict:
        return self.data["tolerances"]

    def command(self, name: str) -> dict:
        return self.data["commands"][name]

    def echo(self) -> str:
        return yaml.safe_dump(self.data, sort_keys=True, default_flow_style=None)


def parse_config(text: str) -> RunConfig:
    try:
        raw = yaml.load(text, Loader=_Loader)
    except yaml.YAMLError as exc:
        raise ConfigError(f"config is not valid YAML: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config must be a mapping at the top level")
    data = _fill(CONFIG_SCHEMA, copy.deepcopy(raw))
    validator = jsonschema.Draft202012Validator(CONFIG_SCHEMA)
    errors = sorted(validator.iter_errors(data), key=lambda e: list(map(str, e.absolute_path)))
    if errors:
        err = errors[0]
        raise ConfigError(f"{_path(err)}: {err.message}")
    _check_semantics(data)
    return RunConfig(data)


def load_config(path) -> RunConfig:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text)


def _check_semantics(data: dict) -> None:
    names = [r["name"] for r in data["medium"]["regions"]]
    if len(set(names)) != len(names):
        raise ConfigError("medium.regions: region names must be unique")
    for i, r in enumerate(data["medium"]["regions"]):
        where = f"medium.regions[{i}]"
        if r["kind"] == "closed_form" and r["bands"]:
            raise ConfigError(f"{where}.bands: closed-form regions take lorentz/zeeman terms, not bands")
        if r["kind"] == "bands" and (r["lorentz"] or r["zeeman"]):
            raise ConfigError(f"{where}: band regions take only bands")
        if r["kind"] == "bands" and not r["bands"]:
            raise ConfigError(f"{where}.bands: a band region needs at least one band")
        for j, b in enumerate(r["bands"]):
            if b["electric"] is None and b["magnetic"] is None:
                raise ConfigError(f"{where}.bands[{j}]: band needs an electric or magnetic oscillator")
    for i, p in enumerate(data["medium"]["layout"]):
        if p["region"] not in names:
            raise ConfigError(f"medium.layout[{i}].region: unknown region {p['region']!r}")
        if p["lo"] >= p["hi"]:
            raise ConfigError(f"medium.layout[{i}]: lo must be below hi")
    om = data["grid"]["omega"]
    if om["values"] is None and om["min"] >= om["max"]:
        raise ConfigError("grid.omega: min must be below max")
    if om["values"] is not None and np.any(np.diff(om["values"]) <= 0):
        raise ConfigError("grid.omega.values: frequencies must increase")


# --------------------------------------------------------------------------
# builders


def omega_grid(cfg: RunConfig, refine: int = 1) -> np.ndarray:
    om = cfg["grid"]["omega"]
    if om["values"] is not None:
        return np.asarray(om["values"], dtype=float)
    n = (om["points"] - 1) * refine + 1 if refine > 1 else om["points"]
    if om["spacing"] == "log":
        return np.geomspace(om["min"], om["max"], n)
    return np.linspace(om["min"], om["max"], n)


def build_grid(cfg: RunConfig, refine: int = 1) -> SpectralGrid:
    g = cfg["grid"]
    return SpectralGrid(tuple(g["box"]), tuple(g["points"]), omega_grid(cfg, refine))


def _band(spec: dict, channel: int) -> OscillatorBand:
    gauge = np.eye(3, dtype=complex)
    if spec["gauge_seed"] is not None:
        gauge = random_unitary(np.random.default_rng(spec["gauge_seed"]))
    osc = lambda o: None if o is None else (o["f"], o["w0"], o["gamma"])
    return OscillatorBand(
        channel,
        electric=osc(spec["electric"]),
        magnetic=osc(spec["magnetic"]),
        sign=spec["sign"],
        orientation_e=np.asarray(spec["orientation_e"], dtype=float),
        orientation_m=np.asarray(spec["orientation_m"], dtype=float),
        gauge=gauge,
    )


def build_model(cfg: RunConfig) -> MediumModel:
    regions = []
    for r in cfg["medium"]["regions"]:
        if r["kind"] == "bands":
            bands = tuple(_band(b, j) for j, b in enumerate(r["bands"]))
            regions.append(BandRegion(r["name"], bands, default_grid(bands), tuple(r["flips"])))
        else:
            terms = [LorentzTerm(t["block"], t["f"], t["w0"], t["gamma"], np.asarray(t["tensor"], dtype=float)) for t in r["lorentz"]]
            terms += [ZeemanTerm(t["f"], t["w0"], t["gamma"], tuple(t["bias"]), t["kappa"]) for t in r["zeeman"]]
            regions.append(ClosedFormRegion(r["name"], tuple(terms), tuple(r["flips"])))
    layout = tuple(Placement(p["region"], p["axis"], p["lo"], p["hi"]) for p in cfg["medium"]["layout"])
    return MediumModel(tuple(regions), layout, cfg["medium"]["response_time"])
