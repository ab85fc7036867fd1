"""JSON schema for configuration files, checked with ``jsonschema``."""

from __future__ import annotations

import json
from typing import Mapping

import jsonschema

from .errors import ConfigError

_RATIONAL = {"type": "string", "pattern": r"^\s*-?\d+(\s*/\s*\d+)?\s*$"}
_PROB = {"oneOf": [{"type": "null"}, _RATIONAL]}
_WORD = {"type": "string", "pattern": "^[01]+$"}

_VAR = {
    "type": "object",
    "required": ["b"],
    "properties": {"b": {"type": "string", "pattern": "^[01]*$"}},
    "patternProperties": {"^y[0-9]+$": {"type": "integer", "minimum": 0}},
    "additionalProperties": False,
}

_LITERAL = {
    "type": "object",
    "required": ["b"],
    "properties": {"b": {"type": "string", "pattern": "^[01]*$"}, "sign": {"enum": ["+", "-"]}},
    "patternProperties": {"^y[0-9]+$": {"type": "integer", "minimum": 0}},
    "additionalProperties": False,
}

_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "switchlab configuration",
    "type": "object",
    "properties": {
        "seed": {"type": "integer", "minimum": 0, "maximum": 2 ** 64 - 1},
        "experiment": {"$ref": "#/$defs/experiment"},
        "oracle": {"$ref": "#/$defs/oracle"},
        "growth": {"$ref": "#/$defs/growth"},
    },
    "additionalProperties": False,
    "$defs": {
        "var": _VAR,
        "literal": _LITERAL,
        "varSpace": {
            "type": "object",
            "properties": {
                "scaleRange": {"type": "array", "items": {"type": "integer", "minimum": 1}},
                "words": {"type": "array", "items": _WORD, "minItems": 1},
                "wordsPerLength": {"type": "integer", "minimum": 1},
                "e1": {"type": "integer", "minimum": 1},
                "e2": {"type": "integer", "minimum": 1},
                "tupleArity": {"type": "integer", "minimum": 1},
            },
            "anyOf": [{"required": ["words"]}, {"required": ["scaleRange"]}],
            "additionalProperties": False,
        },
        "explicitSpace": {
            "type": "object",
            "required": ["variables"],
            "properties": {"variables": {"type": "array", "items": {"$ref": "#/$defs/var"}}},
            "additionalProperties": False,
        },
        "dnf": {
            "type": "object",
            "required": ["conjunctions"],
            "properties": {
                "polarity": {"enum": ["dnf", "cnf"]},
                "width": {"type": ["integer", "null"], "minimum": 0},
                "conjunctions": {"type": "array",
                                 "items": {"type": "array", "items": {"$ref": "#/$defs/literal"}}},
            },
            "additionalProperties": False,
        },
        "dnfSource": {
            "oneOf": [
                {"type": "object", "required": ["kind", "dnf"],
                 "properties": {"kind": {"const": "fixed"}, "dnf": {"$ref": "#/$defs/dnf"}},
                 "additionalProperties": False},
                {"type": "object", "required": ["kind", "count", "width"],
                 "properties": {"kind": {"const": "random"},
                                "count": {"type": "integer", "minimum": 0},
                                "width": {"type": "integer", "minimum": 1},
                                "seed": {"type": "integer", "minimum": 0}},
                 "additionalProperties": False},
            ]
        },
        "experiment": {
            "type": "object",
            "required": ["space", "dnf"],
            "properties": {
                "space": {"oneOf": [{"$ref": "#/$defs/varSpace"}, {"$ref": "#/$defs/explicitSpace"}]},
                "dnf": {"$ref": "#/$defs/dnfSource"},
                "params": {
                    "type": "object",
                    "properties": {
                        "smallBlockThreshold": {"type": "integer", "minimum": 2},
                        "heightThreshold": {"type": "integer", "minimum": 0},
                    },
                    "additionalProperties": False,
                },
                "trials": {"type": "integer", "minimum": 1},
                "seed": {"type": "integer", "minimum": 0},
                "mode": {"enum": ["exact", "montecarlo", "both"]},
                "delta": _RATIONAL,
                "epsilon": _RATIONAL,
                "log2N": {"type": "integer", "minimum": 1},
                "polarity": {"enum": ["normal", "flipped"]},
                "p": _PROB,
            },
            "additionalProperties": False,
        },
        "oracle": {
            "type": "object",
            "properties": {
                "words": {"type": "array", "items": _WORD, "minItems": 1},
                "e1": {"type": "integer", "minimum": 1},
                "e2": {"type": "integer", "minimum": 1},
                "aMin": _WORD,
                "bMin": {"type": "integer", "minimum": 0},
                "width": {"type": "integer", "minimum": 1},
                "disjuncts": {"type": "integer", "minimum": 0},
                "clauses": {"type": "integer", "minimum": 0},
                "smallBlockThreshold": {"type": "integer", "minimum": 2},
                "t": {"type": "integer", "minimum": 0},
                "T": {"type": "integer", "minimum": 0},
                "quota1": {"type": "integer", "minimum": 0},
                "quota2": {"type": "integer", "minimum": 0},
                "p1": _PROB,
                "p2": _PROB,
                "maxTries": {"type": "integer", "minimum": 1},
            },
            "additionalProperties": False,
        },
        "growth": {
            "type": "object",
            "properties": {
                "k": {"type": "integer", "minimum": 1},
                "range": {"type": "string", "pattern": r"^\d+\.\.\d+$"},
                "l": {"type": "integer", "minimum": 0},
                "m": {"type": "integer", "minimum": 0},
            },
            "additionalProperties": False,
        },
    },
}


def config_schema() -> dict:
    return json.loads(json.dumps(_SCHEMA))


def validate_config(doc: Mapping) -> None:
    """Raise ``ConfigError`` carrying the JSON path of the first problem."""
    validator = jsonschema.Draft202012Validator(_SCHEMA)
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        path = list(err.absolute_path)
        where = "/".join(map(str, path)) or "<root>"
        raise ConfigError(f"{where}: {err.message}", path)
