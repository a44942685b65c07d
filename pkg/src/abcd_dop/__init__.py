"""Component-wise evolutionary dynamic optimization on the Moving Peaks Benchmark."""
from .config import AlgorithmConfig, ComponentToggles, build_preset, load_config, save_config
from .engine import RunResult, run
from .landscape import InstanceSpec, LandscapeState, make_landscape
from .metrics import RunTrace, aggregate_runs, final_offline_error
from .optimizers import OptimizerParams

__all__ = [
    "AlgorithmConfig",
    "ComponentToggles",
    "InstanceSpec",
    "LandscapeState",
    "OptimizerParams",
    "RunResult",
    "RunTrace",
    "aggregate_runs",
    "build_preset",
    "final_offline_error",
    "load_config",
    "make_landscape",
    "run",
    "save_config",
]
