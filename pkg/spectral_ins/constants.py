import math

from importlib import metadata

PACKAGE_NAME = "spectral-ins"

DEFAULT_L = 2 * math.pi
MIN_POINTS_PER_AXIS = 8
MIN_SHELLS = 3
SUPPORTED_DIMENSIONS = (2, 3)

PARTITION_TOLERANCE = 1e-12
REALITY_TOLERANCE = 1e-12
PARSEVAL_TOLERANCE = 1e-10

PARTITION_INNER = 3 / 4
PARTITION_OUTER = 8 / 3

DEFAULT_TOLERANCE = 1e-10
ELLIPTIC_MAX_ITER = 10000
ELLIPTIC_FALLBACK_CONTRACTION = 0.9
L2_BOUND_SLACK = 1e-8

HOMOTOPY_EPS0 = 0.25
HOMOTOPY_EPS_MAX = 0.5
HOMOTOPY_EPS_MIN = 1e-4
HOMOTOPY_SUCCESSES_TO_GROW = 2
MAX_PICARD = 50
SPLITTING_THRESHOLD = 0.1

ALPHA = 0.01
BALL_RADIUS = 0.01
T_FLOOR = 1e-3
CONTRACTION_BOUND = 0.5
CONTRACTION_SLACK = 0.1
CFL = 0.5
DETERMINANT_TOLERANCE = 1e-6
INVERSE_FLOW_TOLERANCE = 1e-10
TAYLOR_ORDER = 6
DIRECT_INTERPOLATION_BUDGET = 2 ** 27

SNAPSHOT_MAGIC = b"BNSF"
SNAPSHOT_VERSION = 1
SNAPSHOT_SUFFIX = ".bnsf"

MODE_PARTITION_CHECK = "partition_check"
MODE_BESOV_SUITE = "besov_suite"
MODE_BONY_SUITE = "bony_suite"
MODE_ELLIPTIC = "elliptic"
MODE_STOKES_CONST = "stokes_const"
MODE_STOKES_VAR = "stokes_var"
MODE_LAGRANGE_SUITE = "lagrange_suite"
MODE_NS_LOCAL = "ns_local"
MODE_NS_CROSSCHECK = "ns_crosscheck"
MODES = [
    MODE_PARTITION_CHECK,
    MODE_BESOV_SUITE,
    MODE_BONY_SUITE,
    MODE_ELLIPTIC,
    MODE_STOKES_CONST,
    MODE_STOKES_VAR,
    MODE_LAGRANGE_SUITE,
    MODE_NS_LOCAL,
    MODE_NS_CROSSCHECK,
]

REGIME_LOW_P = "low_p"
REGIME_HIGH_P = "high_p"

MU_LAW_CONSTANT = "constant"
MU_LAW_LINEAR = "linear"
MU_LAW_POWER = "power"
MU_LAWS = [MU_LAW_CONSTANT, MU_LAW_LINEAR, MU_LAW_POWER]

CONFIG_SNAPSHOT = "config.snapshot"
CONFIG_RESOLVED = "config.resolved.json"
TRACES_CSV = "traces.csv"
DIAGNOSTICS_JSON = "diagnostics.json"
SNAPSHOTS_DIRECTORY = "snapshots"
SWEEP_CSV = "sweep.csv"
EVENTS_DIRECTORY = "events"
EVENT_TYPES = [
    "start",
    "failure",
    "success",
    "timeout",
    "process_failure",
    "processing_time",
    "broken_task",
]

DEFAULTS_FILE = "defaults.yaml"
SCHEMA_FILE = "config_schema.yaml"
SCHEMA_EXTENSIONS_FILE = "config_schema_extensions.py"
EXPERIMENTS_DIRECTORY = "experiments"

LUIGI_DEFAULT_LOG_LEVEL = "INFO"

EXIT_OK = 0
EXIT_SUITE_FAILURE = 1
EXIT_INVALID_CONFIG = 2

CSV_FLOAT_FORMAT = ".17g"


def get_version():
    return metadata.version(PACKAGE_NAME)
