"""
Uncertainty-aware model-based successor features with Kalman-filtered
reward and transition models.
"""

import os

# must run before numpy loads; parallel runs use one process per seed
THREAD_ENV_VARS = ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS")
for _name in THREAD_ENV_VARS:
    os.environ.setdefault(_name, "1")

__version__ = "0.1.0"
