"""Numeric defaults shared across the package.

Tolerances come in two tiers: DEFAULT_TOL for residual checks that should
hold to solver precision, ASSERT_TOL for derived quantities that accumulate
a few orders of magnitude of conditioning loss.
"""

import os

DEFAULT_TOL = float(os.environ.get("QACT_TOL", "1e-9"))
ASSERT_TOL = 1e-7

# Dense multiplication matrices scale as dim^3 memory; past this size the
# structure-tensor routines must be used instead.
MUL_MATRIX_MAX_DIM = 64
