"""Minimal anti-Hermitian operators, their quotient norms and the isospectral
curves they generate, at finite truncation."""
from __future__ import annotations

from .families import DiagonalSeq, FamilyParams, OrbitBasePoint, ParameterError, Tail
from .linalg import DEFAULT_TOL, StructureError, Tolerances, operator_norm
from .minimality import (MinimalityCertificate, check_theorem_minimality, perturbation_audit,
                         quotient_norm)
from .oracle import QuotientNormResult, best_diagonal_oracle
from .tails import TailClass, classify_diagonal_tail

__all__ = [
    "DEFAULT_TOL",
    "DiagonalSeq",
    "FamilyParams",
    "MinimalityCertificate",
    "OrbitBasePoint",
    "ParameterError",
    "QuotientNormResult",
    "StructureError",
    "Tail",
    "TailClass",
    "Tolerances",
    "best_diagonal_oracle",
    "check_theorem_minimality",
    "classify_diagonal_tail",
    "operator_norm",
    "perturbation_audit",
    "quotient_norm",
]
