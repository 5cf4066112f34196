"""Numerical geometry of fuzzy spaces: quasicoherent states, eigenmanifolds,
connections and geodesics."""

from __future__ import annotations

from .opcore import FuzzySpace, ModelTag, Operator, SpinorState, build_model, commutator, dirac_operator
from .qcstate import QcState, local_data, solve_qc

__version__ = "0.1.0"

__all__ = [
    "FuzzySpace",
    "ModelTag",
    "Operator",
    "QcState",
    "SpinorState",
    "build_model",
    "commutator",
    "dirac_operator",
    "local_data",
    "solve_qc",
]
