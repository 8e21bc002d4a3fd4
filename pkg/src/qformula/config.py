"""Global numeric tolerances and model size limits."""

import os

# General closeness tolerance: unitarity residuals, trace checks, hermiticity.
TOL = 1e-9

# Singular value cutoff when deciding the rank of a span.
RANK_TOL = 1e-8

# Largest gate arity accepted when parsing circuit files.
D_MAX = 3

# Largest wire count the dense statevector engine will simulate.
SV_MAX = 14


def tolerance() -> float:
    """Active tolerance; the QF_TOL environment variable overrides TOL."""
    value = os.environ.get("QF_TOL")
    if value is None:
        return TOL
    return float(value)
