"""Simulator and detection toolkit for a minimalist impostor-detection
vector coprocessor: Q16.16 fixed point, a 128-bit macro-instruction ISA,
a parallel-track datapath model, reference detectors, and a compiler from
trained model bundles to executable programs."""

from .fixedpoint import FixedPoint32
from .isa import HALT, MacroInstruction, OperationMode, Program, decode, encode
from .simulator import MachineConfig, MachineState, RunResult, boot

__version__ = "0.1.0"

__all__ = [
    "FixedPoint32",
    "HALT",
    "MacroInstruction",
    "OperationMode",
    "Program",
    "decode",
    "encode",
    "MachineConfig",
    "MachineState",
    "RunResult",
    "boot",
    "__version__",
]
