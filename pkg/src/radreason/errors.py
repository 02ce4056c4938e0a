"""Typed errors shared across the package.

Each error carries a short machine-readable category; the CLI prefixes its
diagnostics with ``error:<category>:`` and maps ``exit_code`` onto process
exit status (1 = domain error, 2 = usage/config error).
"""
from __future__ import annotations


class RecognizerError(Exception):
    """Base class for all domain errors raised by this package."""

    category = "domain"
    exit_code = 1


class ParseError(RecognizerError):
    category = "parse"


class SchemaError(RecognizerError):
    category = "schema"


class DanglingReferenceError(RecognizerError):
    category = "reference"


class DuplicateIdError(RecognizerError):
    category = "duplicate"


class UnknownIdError(RecognizerError):
    category = "unknown-id"


class InvalidParamsError(RecognizerError):
    category = "invalid-params"


class InfeasibleParamsError(RecognizerError):
    category = "infeasible"


class InstanceTooLargeError(RecognizerError):
    category = "instance-too-large"


class ShapeMismatchError(RecognizerError):
    category = "shape"


class ConfigError(RecognizerError):
    category = "config"
    exit_code = 2
