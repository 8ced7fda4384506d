"""Combinatorial prophet and secretary algorithms with exhaustive lemma checks."""

from .errors import (
    CapacityError,
    DomainError,
    NumericError,
    PreconditionError,
    ProphetLabError,
    ProtocolError,
)
from .setfn import ExplicitSetFunction, GapReport, gap_report
from .matroid import Matroid, OcrsState
from .prophet import ProphetInstance, run_prophet
from .secretary import SecretaryInstance, run_subadditive_secretary

__version__ = "0.1.0"

__all__ = [
    "CapacityError",
    "DomainError",
    "ExplicitSetFunction",
    "GapReport",
    "Matroid",
    "NumericError",
    "OcrsState",
    "PreconditionError",
    "ProphetInstance",
    "ProphetLabError",
    "ProtocolError",
    "SecretaryInstance",
    "gap_report",
    "run_prophet",
    "run_subadditive_secretary",
]
