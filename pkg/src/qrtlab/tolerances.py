"""Numerical tolerances shared across the package.

All comparisons against exact algebraic statements go through these
constants so that every module agrees on what "equal" means.
"""

HERMITICITY = 1e-9      # max |H - H†| entry allowed for a Hermitian input
TRACE = 1e-9            # |tr(rho) - 1| allowed for a density matrix
PSD = 1e-9              # eigenvalues of a density matrix may dip to -PSD
EIG = 1e-10             # eigendecomposition reconstruction error bound
SUPPORT = 1e-9          # eigenvalue cutoff defining the support of a state
CPTP = 1e-8             # ||sum K†K - I||_1 allowed for a Kraus family
CONVERSION = 1e-6       # trace-norm slack for numeric state conversion
KRAUS_PRUNE = 1e-12     # Kraus operators below this norm are dropped
MONOTONE_SLACK = 1e-7   # slack when checking measure monotonicity
CONSISTENCY_SLACK = 1e-7  # slack when checking rate/measure consistency
SANDWICH = 1e-4         # slack for distillable <= measure <= cost checks
FW_RESIDUAL = 1e-6      # default Frank-Wolfe stationarity target
