"""Numeric constants shared across modules."""

# Cosine similarity returns 0 when either norm is below this.
COSINE_ZERO_NORM = 1e-12

# Weighted normal equations are rejected above this condition number.
MAX_CONDITION = 1e12

STATIONARY_TOL = 1e-12
STATIONARY_MAX_ITER = 100_000

ROW_SUM_TOL = 1e-12

# Forward pass vs oracle, absolute.
EQUIVALENCE_TOL = 1e-8

# Invariant-set Monte-Carlo pass band, in standard errors.
INVARIANT_SET_SE_BAND = 4.0
INVARIANT_SET_MIN_SAMPLES = 100

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8

XAVIER_GAIN = 0.1

VTD_ALPHA_LIMIT = 10.0

CSV_FLOAT_FORMAT = "%.17g"
SCHEMA_VERSION = 1
