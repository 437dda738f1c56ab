import os
from pathlib import Path
from dotenv import load_dotenv

BASE_DIR = Path(__file__).resolve().parent.parent
load_dotenv(BASE_DIR / ".env", override=True)
EXPERIMENTS_DIR = BASE_DIR / "experiments"
RESULTS_DIR = Path(os.getenv("LPVAR_RESULTS_DIR", str(BASE_DIR / "results")))

LOG_LEVEL = os.getenv("LOG_LEVEL", "INFO")

# Quadrature
QUAD_ABS_TOL = float(os.getenv("QUAD_ABS_TOL", "1e-10"))
QUAD_REL_TOL = float(os.getenv("QUAD_REL_TOL", "1e-8"))
QUAD_MAX_SUBDIVISIONS = int(os.getenv("QUAD_MAX_SUBDIVISIONS", str(2**20)))
QUAD_DIVERGENCE_CAP = float(os.getenv("QUAD_DIVERGENCE_CAP", "1e12"))
QUAD_ENDPOINT_GRADING = float(os.getenv("QUAD_ENDPOINT_GRADING", "0.5"))
GAUSS_LOW_NODES = 5
GAUSS_HIGH_NODES = 10
MAX_CELL_DEPTH = 60
LADDER_CHUNK = 32
LADDER_MAX_RUNGS = int(os.getenv("LADDER_MAX_RUNGS", "4096"))
GERM_SPAN = 40.0  # u = ln(1/t) width integrated before the germ tail takes over
SPIKE_QUAD_LEVELS = 32  # spike levels integrated cell by cell before the germ tail
SPIKE_DENSE_LEVELS = 64  # levels kept as exact per-level moments
SPIKE_EXPLICIT_LEVELS = 64  # germ levels summed term by term for non-geometric integrands
LOG_BOUNDED_SPAN = 50.0  # u-range integrated for bounded integrands under the log exponent
PLAN_CACHE = 128

# Norms
NORM_TOL = float(os.getenv("NORM_TOL", "1e-9"))
THETA_REL_TOL = float(os.getenv("THETA_REL_TOL", "1e-6"))
DISTANCE_TOL = float(os.getenv("DISTANCE_TOL", "1e-4"))
CONSISTENCY_FACTOR = 10.0
DUAL_CLIP = 1e-6
DISTANCE_SCHEDULE = tuple(2**k for k in range(1, 21))
BRACKET_DOUBLINGS = 200
ORLICZ_ITERATIONS = 200

# Exponents
KOZV_THRESHOLD = float(os.getenv("KOZV_THRESHOLD", "1e-3"))
KOZV_STABILITY = 0.05
SHUFFLE_DEPTH = 8

# Space analysis
CLOSEDNESS_STABILITY = 0.05
CLOSEDNESS_FLOOR = 1e-3
MAX_LEVEL_N = 64
SAMPLE_BREAKPOINTS = 16
SIMPLE_CELLS = 16
REPLAY_TOL = 1e-4

# Runner
DEFAULT_SEED = int(os.getenv("LPVAR_SEED", "20240917"))
DEFAULT_DEPTH = int(os.getenv("LPVAR_DEPTH", "10"))
DEFAULT_SAMPLES = int(os.getenv("LPVAR_SAMPLES", "100"))
REPORT_CSV = "report.csv"
REPORT_JSON = "report.json"
PLOT_PREFIX = "plotdata_"
