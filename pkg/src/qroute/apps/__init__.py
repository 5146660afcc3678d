"""Experiment orchestration built on the core library, plus the command line."""
from .eca import (
    EcaPlan,
    Protocol,
    SamplingMode,
    SwapTestResult,
    eca_instantiate,
    swap_test_experiment,
    swap_test_study,
)
from .hubbard import HubbardParams, estimate_energy, hubbard_circuit, hubbard_params, hubbard_study

__all__ = [
    "EcaPlan",
    "HubbardParams",
    "Protocol",
    "SamplingMode",
    "SwapTestResult",
    "eca_instantiate",
    "estimate_energy",
    "hubbard_circuit",
    "hubbard_params",
    "hubbard_study",
    "swap_test_experiment",
    "swap_test_study",
]
