# backend/config.py

import os
import logging
from dotenv import load_dotenv

load_dotenv()

# Gate geometry
ELECTRODE_SPACING_NM = 45.0       # plunger to neighbouring barrier
PLUNGER_PITCH_NM = 90.0
KERNEL_WIDTH_NM = 90.0            # FWHM of the gate kernel
LEVER_ARM_MEV_PER_MV = 0.1
GRID_SPACING_NM = 1.0
NOMINAL_DISPLACEMENT_NM = 180.0   # per conveyor cycle
CONVEYOR_FREQUENCY_HZ = 10e6

# Two-spin dynamics
DELTA_EZ_HZ = 83e6
EVOLVE_TOL = 1e-9                 # max entry change on step halving
UNITARY_TOL = 1e-9
MAX_SUBSTEPS = 2 ** 18
INITIAL_STEP_NS = 1.0

# CZ pulse: cycle-ramp stages map c(t) through J(c); load/unload hold J fixed
CZ_STAGES = [
    {"label": "load", "duration_ns": 2.0, "c_start": 0.0, "c_end": 0.0, "frequency_MHz": 0.0, "j_MHz": 0.0},
    {"label": "approach", "duration_ns": 2.0, "c_start": 0.4, "c_end": 0.65, "frequency_MHz": 125.0},
    {"label": "interaction", "duration_ns": 25.0, "c_start": 0.65, "c_end": 0.9, "frequency_MHz": 10.0},
    {"label": "return_interaction", "duration_ns": 25.0, "c_start": 0.9, "c_end": 0.65, "frequency_MHz": 10.0},
    {"label": "return_approach", "duration_ns": 2.0, "c_start": 0.65, "c_end": 0.4, "frequency_MHz": 125.0},
    {"label": "unload", "duration_ns": 2.0, "c_start": 0.0, "c_end": 0.0, "frequency_MHz": 0.0, "j_MHz": 0.0},
]
CALIBRATION_GATE_TIME_NS = 54.0

# Quasistatic noise
T_MEASURE_T2_S = 138.0            # T2* acquisition horizon
T_MEASURE_IRB_S = 5160.0          # IRB acquisition horizon
QUADRATURE_TOL = 1e-8
QUADRATURE_MAX_ORDER = 512

# Barrier-offset calibration
B3_REFERENCE_MV = 9.5
B3_EXCHANGE_SCALE_MV = 20.0       # e-folding of J with the B3 offset

# Randomized benchmarking
RB_SEQUENCES = 120
RB_SHOTS = 800
RB_LENGTHS = [1, 2, 4, 8, 16, 32, 64, 100]
T2_SENTINEL_FACTOR = 1e3          # unbounded-T2 bound, in units of the trace span

# Readout
CONFUSION_MATRIX = [[0.951, 0.125], [0.049, 0.875]]
PARITY_ERROR = 0.0144
SEQUENCE_KEEP = 1.0 / 3.0

# Teleportation
BELL_PREP_DEPOLARIZING = 0.13067
LOCAL_CZ_DEPOLARIZING = 0.07
TELEPORT_SHOTS = 20000

# Tomography
MLE_DILUTION = 0.5
MLE_TOL = 1e-10
MLE_MAX_ITER = 200000
CPTP_TOL = 1e-9
PTM_REPORT_TOL = 1e-6
BOOTSTRAP_RESAMPLES = 1000

# Runtime
N_JOBS = int(os.getenv("QSIM_N_JOBS", "1"))
STRICT_OUTPUTS = os.getenv("QSIM_STRICT", "True").lower() == "true"
OUTPUT_DIR = os.getenv("QSIM_OUTPUT_DIR", "results")
LOG_FILE = os.getenv("QSIM_LOG_FILE", "logs/qsim.log")


def setup_logging(log_file=None):
    log_file = log_file or LOG_FILE
    log_dir = os.path.dirname(log_file)
    if log_dir:
        os.makedirs(log_dir, exist_ok=True)
    logging.basicConfig(
        filename=log_file,
        level=logging.INFO,
        format="%(asctime)s | %(levelname)s | %(message)s",
        datefmt="%Y-%m-%d %H:%M:%S"
    )
