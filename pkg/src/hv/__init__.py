"""Consistency engine for UML class and sequence diagrams.

Detects cross-diagram inconsistencies (undefined operations, broken
associations, mismatched or unnamed messages, unresolvable lifelines,
structural breakage) and maintains them incrementally as the model
changes, with a stateless batch check as the correctness oracle.
"""

from hv.diffing import ChangeEvent, apply, apply_all, diff, parse_events, serialize_events
from hv.engine import DiagnosticDelta, Engine, full_check
from hv.canonical import ParseReport, parse_canonical, parse_path, serialize_canonical
from hv.model import (
    Association,
    AssociationEnd,
    Attribute,
    Class,
    Enumeration,
    Interaction,
    Lifeline,
    Message,
    MessageSort,
    Model,
    Operation,
    Parameter,
    ParameterDirection,
    Visibility,
    associated,
    element_path,
    operations_of,
    resolve_lifeline_type,
    validate_wellformed,
)
from hv.rules import Diagnostic, EvaluationResult, RuleDescriptor, Severity, catalog
from hv.store import DiagnosticStore, MemoryBackend, Summary
from hv.xmi import parse_xmi

__version__ = "1.0.0"

__all__ = [
    "Association",
    "AssociationEnd",
    "Attribute",
    "ChangeEvent",
    "Class",
    "Diagnostic",
    "DiagnosticDelta",
    "DiagnosticStore",
    "Engine",
    "Enumeration",
    "EvaluationResult",
    "Interaction",
    "Lifeline",
    "MemoryBackend",
    "Message",
    "MessageSort",
    "Model",
    "Operation",
    "Parameter",
    "ParameterDirection",
    "ParseReport",
    "RuleDescriptor",
    "Severity",
    "Summary",
    "Visibility",
    "apply",
    "apply_all",
    "associated",
    "catalog",
    "diff",
    "element_path",
    "full_check",
    "operations_of",
    "parse_canonical",
    "parse_events",
    "parse_path",
    "parse_xmi",
    "resolve_lifeline_type",
    "serialize_canonical",
    "serialize_events",
    "validate_wellformed",
    "__version__",
]
