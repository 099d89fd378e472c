"""Monotone finite differences and viscosity certificates for
-F(Du, D^2u) + b|Du|^beta + lambda|u|^alpha u = f."""

from ._visco import (
    BracketViolated,
    Config,
    ConfigError,
    Error,
    ExponentOutOfRange,
    Expr,
    MaxItersExceeded,
    ParseError,
    comparison_suite,
    manufacture,
    pucci_minus,
    pucci_plus,
    run_cli,
    solve,
)

__all__ = [
    "BracketViolated",
    "Config",
    "ConfigError",
    "Error",
    "ExponentOutOfRange",
    "Expr",
    "MaxItersExceeded",
    "ParseError",
    "comparison_suite",
    "manufacture",
    "pucci_minus",
    "pucci_plus",
    "run_cli",
    "solve",
]
