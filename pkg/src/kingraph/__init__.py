"""Possibility-set family relation graphs."""

from .relations import (
    Atom,
    AxiomReport,
    CliqueContext,
    CompositionTable,
    FULL_SET,
    atoms_of,
    check_axioms,
    inverse,
    invert_rset,
    labels_of,
    rset,
    supports,
)
from .world import Contradiction, Gender, WorldModel

__all__ = [
    "Atom",
    "AxiomReport",
    "CliqueContext",
    "CompositionTable",
    "Contradiction",
    "FULL_SET",
    "Gender",
    "WorldModel",
    "atoms_of",
    "check_axioms",
    "inverse",
    "invert_rset",
    "labels_of",
    "rset",
    "supports",
]
