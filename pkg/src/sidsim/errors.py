"""Exception hierarchy for the toolkit.

Everything raised on purpose derives from SidError so callers (and the CLI
exit-code mapping) can tell toolkit failures from genuine bugs.
"""


class SidError(Exception):
    pass


# --- ISA / assembler ---

class FieldOverflowError(SidError):
    """An instruction field does not fit its bit width."""


class UnknownModeError(SidError):
    """A 4-bit mode encoding with no assigned operation."""


class AlignmentError(SidError):
    """An address is not 4-byte aligned."""


class ParseError(SidError):
    def __init__(self, message, line=None):
        super().__init__(f"line {line}: {message}" if line is not None else message)
        self.line = line


class UndefinedLabelError(SidError):
    pass


class ProgramFormatError(SidError):
    """A binary program image is malformed."""


# --- simulator ---

class MemoryOutOfBoundsError(SidError):
    pass


class ScratchpadOverflowError(SidError):
    pass


class CycleBudgetExceededError(SidError):
    pass


class BufferOverflowError(SidError):
    pass


class ScratchpadPoisonError(SidError):
    """Debug mode observed a scratchpad read before any write this instruction."""


class SimulationError(SidError):
    """Wraps a step() failure with the PC and retired-instruction context."""

    def __init__(self, message, pc, instruction_index):
        super().__init__(f"{message} (pc={pc}, instruction #{instruction_index})")
        self.pc = pc
        self.instruction_index = instruction_index


# --- detection ---

class DimensionMismatchError(SidError):
    pass


class EmptySampleError(SidError):
    pass


class UnsupportedAlphaError(SidError):
    pass


# --- codegen ---

class CapacityExceededError(SidError):
    """Compiled image or program exceeds the target machine's RAM."""


class ExpRangeError(SidError):
    """A compile-time exponential argument can exceed 0 (LUT domain is x <= 0)."""


# --- data ---

class MissingFileError(SidError, FileNotFoundError):
    pass


class MalformedRowError(SidError):
    def __init__(self, message, line=None, column=None):
        where = "" if line is None else f" (line {line}" + ("" if column is None else f", column {column}") + ")"
        super().__init__(message + where)
        self.line = line
        self.column = column


class ClockMismatchError(SidError):
    """Accelerometer and gyroscope streams of one experiment differ in length."""


class InsufficientDataError(SidError):
    pass


# --- persistence ---

class ShapeMismatchError(SidError):
    pass


class QuantizationMismatchError(SidError):
    """A bundle's pre-quantized i32 blob disagrees with quantize(f64 blob)."""


class UnknownModelKindError(SidError):
    pass


class BundleFormatError(SidError):
    pass


class MissingBundleError(SidError):
    pass
