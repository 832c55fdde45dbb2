"""Communication-metered simulation of distributed bandit protocols."""
from .comm import CommLedger, PublicRandomness, public_rand_assign, record_transfer
from .design import Design, g_value, solve_g_optimal
from .env import ActionSetGenerator, LinearInstance, MabInstance, UsageError, VaryingLinearInstance
from .harness import RunConfig, emit_csv, parse_config, run, sweep
from .linear import delb_run, dislinucb_run, pooled_linucb_run
from .mab import demab_run, immediate_sharing_mab_run, independent_run
from .result import RunResult

__all__ = [
    "ActionSetGenerator",
    "CommLedger",
    "Design",
    "LinearInstance",
    "MabInstance",
    "PublicRandomness",
    "RunConfig",
    "RunResult",
    "UsageError",
    "VaryingLinearInstance",
    "delb_run",
    "demab_run",
    "dislinucb_run",
    "emit_csv",
    "g_value",
    "immediate_sharing_mab_run",
    "independent_run",
    "parse_config",
    "pooled_linucb_run",
    "public_rand_assign",
    "record_transfer",
    "run",
    "solve_g_optimal",
    "sweep",
]
