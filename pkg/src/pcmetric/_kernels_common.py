"""Tolerances shared by both kernel backends."""

EIG_CONVERGENCE_TOL = 1e-12  # Jacobi off-diagonal threshold, relative to Frobenius
EIG_TIE_RTOL = 1e-9  # eigenvalues closer than this (relative) count as tied
DEGENERATE_COV_TOL = 1e-30  # scatter-matrix Frobenius below this: coincident neighbors
