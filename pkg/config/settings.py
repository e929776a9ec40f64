import os
from pathlib import Path


BASE_DIR = Path(__file__).resolve().parent.parent

# Profile defaults (p = 3 keeps every constant in closed form)
DEFAULT_P = 3.0
DEFAULT_L = 16.0
DEFAULT_N = 4001
MIN_L = 10.0
MIN_N = 2001

# Polar grid on the unit-disk chart
DEFAULT_N_R = 128
DEFAULT_N_THETA = 256
MAX_N_R = 512
MAX_N_THETA = 1024

# Spectral checks
DEGENERACY_TOL = 1e-6
GAP_FLOOR = 1e-10
DEFAULT_SPECTRUM_COUNT = 100
DEFAULT_LEVELS = (3, 8)

# Geometry finite differences
FD_STEP = 1e-4
FD_STEP_THIRD = 1e-3
# Spread of finite-difference coefficients along theta that still counts as constant
FD_COEFF_TOL = 100 * FD_STEP ** 2
COLLAR_ORTHOGONALITY_TOL = 1e-6
DEFAULT_TUBE_RADIUS = 0.5
DEFAULT_EXTENSION_MARGIN = 0.1

# Strip problems
STRIP_K = 6.0
STRIP_H = 20.0
STRIP_N_ETA = 128
STRIP_N_THETA = 16
STRIP_X_STRIDE = 8

# Layer construction and residuals
DEFAULT_EPS = 0.05
DEFAULT_EPS_LIST = (0.02, 0.03, 0.05, 0.08, 0.12)
DEFAULT_SIGMA = 0.1
COLLAR_WIDTH = 0.2
LAYER_X_STRIDE = 4
LAYER_N_R = 32
LAYER_N_THETA = 16
DEFAULT_Q = float('inf')
DEFAULT_VARRHO = 0.005

FORMAT_VERSION = '1.0'

# Worker cap for independent levels / eps values
THREADS = max(1, int(os.getenv('LAYERLAB_THREADS', '1')))


OUTPUT_DIR = Path(os.getenv('LAYERLAB_OUTPUT_DIR', str(BASE_DIR / 'output')))
LOGS_DIR = OUTPUT_DIR / 'logs'


OUTPUT_DIR.mkdir(parents=True, exist_ok=True)
LOGS_DIR.mkdir(exist_ok=True)


LOG_LEVEL = os.getenv('LAYERLAB_LOG_LEVEL', 'INFO')
LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'
LOG_DATE_FORMAT = '%Y-%m-%d %H:%M:%S'
