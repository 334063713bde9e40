"""First-passage statistics for a harmonically trapped particle diffusing
outside an absorbing sphere: eigenfunction-series survival probability, FPT
density and MFPT, an exact-update Monte Carlo validator, and independent
numerical oracles, served over a small HTTP API with a thin CLI.
"""

__version__ = "0.1.0"

from .specfun import EvalPolicy, DEFAULT_POLICY, gamma, kummer_m, tricomi_u  # noqa: F401
