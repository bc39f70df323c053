"""Behavioral model of a bit-scalable compute-in-memory MVM accelerator."""

from .cima_array import CimaArray, Mode
from .core import Cimu, MvmResult, run_mvm, simulate_mvm
from .errors import CimuError, InputError, PlanError
from .numfmt import Kind, NumberFormat, twos, xnor

__all__ = [
    "CimaArray", "Mode", "Cimu", "MvmResult", "run_mvm", "simulate_mvm",
    "CimuError", "InputError", "PlanError", "Kind", "NumberFormat", "twos", "xnor",
]
__version__ = "0.1.0"
