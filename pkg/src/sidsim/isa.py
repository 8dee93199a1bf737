"""Macro-instruction set: encoding, decoding, and the binary program container.

One macro-instruction denotes an entire vector or matrix operation; the
number of datapath iterations is derived by the control FSM from the length
and width fields and the number of parallel tracks, so the same binary runs
unmodified on machines with different track counts.

128-bit instruction word layout:

  Bits [127:124]  Mode     (4 bits)   operation, see OperationMode
  Bits [123:110]  Length   (14 bits)  element count (matrix columns for MVmul)
  Bits [109: 96]  Width    (14 bits)  matrix rows; ignored by vector modes
  Bits [ 95: 64]  Addr_x   (32 bits)  first operand, byte address
  Bits [ 63: 32]  Addr_y   (32 bits)  second operand / scalar operand
  Bits [ 31:  0]  Addr_z   (32 bits)  result

Mode assignments (0 stops instruction fetch; operands are Q16.16 words in
datapath RAM, all addresses 4-byte aligned):

  0  Halt       stop fetching
  1  Vadd       z[i] = x[i] + y[i]
  2  Vsub       z[i] = x[i] - y[i]
  3  Vmul       z[i] = x[i] * y[i]
  4  Vsgt       z[i] = 1.0 if x[i] > y[i] else 0.0
  5  Vsig       z[i] = sigmoid(x[i])  (piecewise-linear LUT)
  6  Vtanh      z[i] = tanh(x[i])     (piecewise-linear LUT)
  7  Vexp       z[i] = exp(x[i])      (piecewise-linear LUT, domain x <= 0)
  8  MVmul      z = M x, M is width-by-length row-major at addr_x, x at addr_y
  9  VSsgt      z[i] = 1.0 if x[i] > s else 0.0, scalar s read at addr_y
  10 Vmaxabs    scalar at addr_z = max_i |x[i]|
  11 Vsqnorm    scalar at addr_z = sum_i x[i]^2

Binary program container ("-.sidp"): a 16-byte header -- magic "SIDP",
version u32, instruction count u32, data-segment length u32 (all
little-endian) -- followed by count 16-byte little-endian instruction words,
followed by the data segment, which loads at datapath RAM byte 0.
"""

from __future__ import annotations

import enum
import struct
from dataclasses import dataclass

from .errors import (
    AlignmentError,
    FieldOverflowError,
    ProgramFormatError,
    UnknownModeError,
)

MAGIC = b"SIDP"
FORMAT_VERSION = 1
INSTRUCTION_BYTES = 16

LENGTH_BITS = 14
LENGTH_MAX = (1 << LENGTH_BITS) - 1
ADDR_MAX = (1 << 32) - 1


class OperationMode(enum.IntEnum):
    HALT = 0
    VADD = 1
    VSUB = 2
    VMUL = 3
    VSGT = 4
    VSIG = 5
    VTANH = 6
    VEXP = 7
    MVMUL = 8
    VSSGT = 9
    VMAXABS = 10
    VSQNORM = 11


# Operand-shape classes the simulator and assembler key off.
ELEMENTWISE_MODES = frozenset(
    {OperationMode.VADD, OperationMode.VSUB, OperationMode.VMUL, OperationMode.VSGT}
)
LUT_MODES = frozenset({OperationMode.VSIG, OperationMode.VTANH, OperationMode.VEXP})
REDUCTION_MODES = frozenset({OperationMode.VMAXABS, OperationMode.VSQNORM})


@dataclass(frozen=True)
class MacroInstruction:
    mode: OperationMode
    length: int = 0
    width: int = 0
    addr_x: int = 0
    addr_y: int = 0
    addr_z: int = 0

    def __post_init__(self):
        if not isinstance(self.mode, OperationMode):
            object.__setattr__(self, "mode", OperationMode(self.mode))
        for name in ("length", "width"):
            v = getattr(self, name)
            if not 0 <= v <= LENGTH_MAX:
                raise FieldOverflowError(f"{name}={v} does not fit in {LENGTH_BITS} bits")
        for name in ("addr_x", "addr_y", "addr_z"):
            a = getattr(self, name)
            if not 0 <= a <= ADDR_MAX:
                raise FieldOverflowError(f"{name}=0x{a:x} does not fit in 32 bits")
            if a % 4 != 0:
                raise AlignmentError(f"{name}=0x{a:x} is not 4-byte aligned")
        if self.mode is not OperationMode.HALT and self.length < 1:
            raise FieldOverflowError(f"{self.mode.name} requires length >= 1")
        if self.mode is OperationMode.MVMUL and self.width < 1:
            raise FieldOverflowError("MVMUL requires width >= 1")


HALT = MacroInstruction(OperationMode.HALT)


def encode(inst: MacroInstruction) -> int:
    """Pack an instruction into its 128-bit word."""
    return (
        (inst.mode << 124)
        | (inst.length << 110)
        | (inst.width << 96)
        | (inst.addr_x << 64)
        | (inst.addr_y << 32)
        | inst.addr_z
    )


def decode(word: int) -> MacroInstruction:
    """Unpack a 128-bit word; inverse of encode on valid instructions."""
    if not 0 <= word < (1 << 128):
        raise ProgramFormatError(f"instruction word 0x{word:x} is not 128 bits")
    mode_nibble = (word >> 124) & 0xF
    try:
        mode = OperationMode(mode_nibble)
    except ValueError:
        raise UnknownModeError(f"unassigned mode encoding {mode_nibble:#x}") from None
    return MacroInstruction(
        mode=mode,
        length=(word >> 110) & LENGTH_MAX,
        width=(word >> 96) & LENGTH_MAX,
        addr_x=(word >> 64) & ADDR_MAX,
        addr_y=(word >> 32) & ADDR_MAX,
        addr_z=word & ADDR_MAX,
    )


def encode_bytes(inst: MacroInstruction) -> bytes:
    return encode(inst).to_bytes(INSTRUCTION_BYTES, "little")


def decode_bytes(raw: bytes) -> MacroInstruction:
    if len(raw) != INSTRUCTION_BYTES:
        raise ProgramFormatError(f"instruction record is {len(raw)} bytes, expected 16")
    return decode(int.from_bytes(raw, "little"))


@dataclass
class Program:
    """An executable image: instruction stream plus initial data segment."""

    instructions: list[MacroInstruction]
    data: bytes = b""

    def to_bytes(self) -> bytes:
        header = MAGIC + struct.pack("<III", FORMAT_VERSION, len(self.instructions), len(self.data))
        body = b"".join(encode_bytes(i) for i in self.instructions)
        return header + body + self.data

    @classmethod
    def from_bytes(cls, blob: bytes) -> "Program":
        if len(blob) < 16 or blob[:4] != MAGIC:
            raise ProgramFormatError("missing SIDP magic")
        version, count, data_len = struct.unpack("<III", blob[4:16])
        if version != FORMAT_VERSION:
            raise ProgramFormatError(f"unsupported program format version {version}")
        need = 16 + count * INSTRUCTION_BYTES + data_len
        if len(blob) != need:
            raise ProgramFormatError(f"program is {len(blob)} bytes, header implies {need}")
        insts = [
            decode_bytes(blob[16 + i * INSTRUCTION_BYTES : 32 + i * INSTRUCTION_BYTES])
            for i in range(count)
        ]
        data_start = 16 + count * INSTRUCTION_BYTES
        return cls(insts, blob[data_start : data_start + data_len])

    def save(self, path) -> None:
        with open(path, "wb") as fh:
            fh.write(self.to_bytes())

    @classmethod
    def load(cls, path) -> "Program":
        with open(path, "rb") as fh:
            return cls.from_bytes(fh.read())
