"""
Application Constants

Defines constants used throughout the application: experiment kinds,
Φ-function families, condition ids, numerical tolerances and artifact names.
"""

# Experiment Kinds
EXPERIMENT_KINDS = [
    'phi-audit',
    'ops-verify',
    'ineq-sweep',
    'solve',
    's-dependence',
]

# Experiment Kind Labels (for the summary)
EXPERIMENT_KIND_LABELS = {
    'phi-audit': 'Φ-function audit',
    'ops-verify': 'Spectral operator identities',
    'ineq-sweep': 'Inequality sweep',
    'solve': 'Fractional Dirichlet solve',
    's-dependence': 'Continuous dependence in s',
}

# Φ-function families
PHI_FAMILIES = [
    'power',
    'variable-exponent',
    'log-perturbed',
    'double-phase',
    'tabulated',
    'custom',
]

# Families that can be declared in a configuration file
CONFIGURABLE_FAMILIES = ['power', 'variable-exponent', 'log-perturbed', 'double-phase']

# Condition ids understood by check_condition
CONDITION_IDS = [
    'inc',
    'dec',
    'a0',
    'a1',
    'a2',
    'hypothesis-on-a',
    'pointwise-bounds',
    'delta2',
    'definition',
]

# Sampling ladder: ℓ ∈ {2^k : k = LADDER_MIN..LADDER_MAX}
LADDER_MIN = -20
LADDER_MAX = 20

# Tolerances
TOL_INV = 1e-10           # left inverse, absolute on ℓ
TOL_CONJ = 1e-10          # conjugate maximizer, on r
TOL_LUX = 1e-8            # Luxemburg norm, relative
R_MIN = 1e-12             # density floor for p < 2
CONDITION_RTOL = 1e-9     # monotonicity slack on sampled ladders
DENSITY_RTOL = 1e-6       # quadrature consistency
BASELINE_DRIFT = 0.05     # allowed growth over a captured baseline
DEPENDENCE_WINDOW = 1e-2  # |s_n − σ| of the dependence tail
DEPENDENCE_RTOL = 1e-3    # last e_n relative to ∥u_σ∥_{L^A}
XI_GROWTH = 10.0          # default L^A bound of a ξ sequence, relative to its first norm

# Companion tabulation: t ∈ {2^(k/COMPANION_STEPS)}, |k| ≤ COMPANION_SPAN·COMPANION_STEPS
COMPANION_SPAN = 60
COMPANION_STEPS = 4

# Quadrature oracle size limits per dimension
ORACLE_MAX_N = {1: 1024, 2: 64}

# Solver defaults
DEFAULT_SOLVER = {
    'max_iter': 5000,
    'energy_tol': 1e-10,
    'residual_tol': 1e-6,
    'armijo': 1e-4,
    'backtrack': 0.5,
    'max_backtracks': 60,
    'restart_every': 50,
    'initial': 'zero',
}

# Suite composition
SUITE_BUMP_WIDTHS = (0.35, 0.55, 0.8)     # fractions of the mask radius
SUITE_PLACEMENTS = (0.0, 0.3)             # centre offsets, fractions of the mask radius
SUITE_RANDOM_FIELDS = 5
SUITE_RANDOM_MODES = 6                    # band limit of the random fields
SUITE_PURE_MODES = (1, 2, 3)

# Baseline keys
BASELINE_KEYS = [
    'poincare',
    'interpolation',
    'spaces_decrease',
    'sobolev',
    'multiplier',
    'dual_bound',
    'dependence',
    'coercivity',
]

# Artifacts
RECORDS_FILE = 'records.csv'
SUMMARY_FILE = 'summary.json'
BASELINES_FILE = 'baselines.json'
HISTORY_FILE = 'history.csv'
SOLUTION_FILE = 'solution.fogf'
BASELINES_VERSION = 1

# Record columns (CSV layout of the inequality lab)
INEQUALITY_COLUMNS = [
    'inequality_id', 'r', 's', 't', 'sigma', 'field_id',
    'lhs', 'rhs', 'ratio', 'baseline', 'pass',
]

DEPENDENCE_COLUMNS = ['n', 's_n', 'e_n', 'w_n_max', 'iterations', 'energy']

# Exit statuses
EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_INVALID = 2
