"""Textual assembly for macro-instruction programs.

Grammar (one statement per line; ';' or '#' starts a comment):

  .text                switch to the instruction section (default)
  .data                switch to the data section
  name:                define a label (data section only) at the cursor
  .word v1, v2, ...    emit 32-bit words: literals with a decimal point or
                       exponent are quantized to Q16.16, plain/hex integers
                       are raw word values
  .space N             emit N zero bytes (N a multiple of 4)
  .org ADDR            move the data cursor forward to ADDR
  .inst 0xHEX          emit a raw 128-bit instruction word verbatim

  halt
  mvmul  LEN, WID, X, Y, Z
  vadd   LEN, X, Y, Z          (likewise vsub, vmul, vsgt, vsig, vtanh,
  vssgt  LEN, X, Y, Z           vexp, vssgt, vmaxabs, vsqnorm)

Address operands are data labels (optionally label+N / label-N), decimal
integers, or 0x hex. The data segment loads at datapath RAM byte 0, so label
values are final byte addresses. Unused address slots (e.g. Vmaxabs has no
second operand) are written as 0.
"""

from __future__ import annotations

import re

from .errors import AlignmentError, ParseError, UndefinedLabelError
from .isa import (
    HALT,
    MacroInstruction,
    OperationMode,
    Program,
    decode,
    encode,
)

_MNEMONICS = {m.name.lower(): m for m in OperationMode}
_LABEL_RE = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")


def _strip(line: str) -> str:
    for marker in (";", "#"):
        if marker in line:
            line = line.split(marker, 1)[0]
    return line.strip()


def _parse_value(tok: str, lineno: int) -> int:
    """One .word literal -> raw 32-bit word (ints raw, reals quantized)."""
    from .fixedpoint import quantize

    try:
        raw = int(tok, 0)
    except ValueError:
        try:
            return quantize(float(tok))
        except ValueError:
            raise ParseError(f"bad literal {tok!r}", lineno) from None
    if not -(1 << 31) <= raw < (1 << 32):
        raise ParseError(f"raw word {tok!r} out of 32-bit range", lineno)
    return raw if raw < (1 << 31) else raw - (1 << 32)


class _Operand:
    """Deferred address: literal or label+offset, resolved in pass two."""

    def __init__(self, text: str, lineno: int):
        self.text = text.strip()
        self.lineno = lineno

    def resolve(self, symbols: dict[str, int]) -> int:
        t = self.text
        try:
            return int(t, 0)
        except ValueError:
            pass
        m = re.match(r"^([A-Za-z_][A-Za-z0-9_]*)([+-]\d+)?$", t)
        if not m:
            raise ParseError(f"bad address operand {t!r}", self.lineno)
        name, off = m.group(1), int(m.group(2) or 0)
        if name not in symbols:
            raise UndefinedLabelError(f"line {self.lineno}: undefined label {name!r}")
        return symbols[name] + off


def assemble(source: str) -> tuple[Program, dict[str, int]]:
    """Assemble source text into a Program and its symbol table."""
    symbols: dict[str, int] = {}
    data = bytearray()
    pending: list[tuple[OperationMode, int, int, _Operand, _Operand, _Operand]] = []
    raw_words: dict[int, int] = {}  # instruction index -> verbatim 128-bit word
    section = "text"

    for lineno, raw_line in enumerate(source.splitlines(), start=1):
        line = _strip(raw_line)
        if not line:
            continue

        if line.endswith(":") or (":" in line and _LABEL_RE.match(line.split(":", 1)[0].strip())):
            label, line = (part.strip() for part in line.split(":", 1))
            if not _LABEL_RE.match(label):
                raise ParseError(f"bad label {label!r}", lineno)
            if section != "data":
                raise ParseError("labels are only allowed in the data section", lineno)
            if label in symbols:
                raise ParseError(f"duplicate label {label!r}", lineno)
            if len(data) % 4 != 0:
                raise AlignmentError(f"line {lineno}: label {label!r} at unaligned offset {len(data)}")
            symbols[label] = len(data)
            if not line:
                continue

        head, _, rest = line.partition(" ")
        head = head.lower()
        args = [a.strip() for a in rest.split(",")] if rest.strip() else []

        if head == ".data":
            section = "data"
        elif head == ".text":
            section = "text"
        elif head == ".word":
            if section != "data":
                raise ParseError(".word outside the data section", lineno)
            if not args:
                raise ParseError(".word needs at least one value", lineno)
            for tok in args:
                data += _parse_value(tok, lineno).to_bytes(4, "little", signed=True)
        elif head == ".space":
            if section != "data":
                raise ParseError(".space outside the data section", lineno)
            n = int(args[0], 0) if args else -1
            if n < 0:
                raise ParseError(".space needs a byte count", lineno)
            if n % 4 != 0:
                raise AlignmentError(f"line {lineno}: .space {n} is not a multiple of 4")
            data += bytes(n)
        elif head == ".org":
            if section != "data":
                raise ParseError(".org outside the data section", lineno)
            target = int(args[0], 0) if args else -1
            if target < len(data):
                raise ParseError(f".org 0x{target:x} is behind the cursor (0x{len(data):x})", lineno)
            data += bytes(target - len(data))
        elif head == ".inst":
            if section != "text":
                raise ParseError(".inst outside the text section", lineno)
            word = int(args[0], 0)
            raw_words[len(pending)] = word
            pending.append(None)  # placeholder, filled from raw_words
        elif head in _MNEMONICS:
            if section != "text":
                raise ParseError("instructions belong in the text section", lineno)
            mode = _MNEMONICS[head]
            if mode is OperationMode.HALT:
                if args:
                    raise ParseError("halt takes no operands", lineno)
                pending.append((mode, 0, 0, None, None, None))
                continue
            want = 5 if mode is OperationMode.MVMUL else 4
            if len(args) != want:
                raise ParseError(f"{head} takes {want} operands, got {len(args)}", lineno)
            try:
                length = int(args[0], 0)
                width = int(args[1], 0) if mode is OperationMode.MVMUL else 0
            except ValueError:
                raise ParseError(f"bad length/width in {line!r}", lineno) from None
            ops = [_Operand(a, lineno) for a in args[-3:]]
            pending.append((mode, length, width, *ops))
        else:
            raise ParseError(f"unknown statement {head!r}", lineno)

    instructions = []
    for idx, item in enumerate(pending):
        if idx in raw_words:
            instructions.append(decode(raw_words[idx]))
            continue
        mode, length, width, ox, oy, oz = item
        if mode is OperationMode.HALT:
            instructions.append(HALT)
            continue
        addrs = []
        for op in (ox, oy, oz):
            a = op.resolve(symbols)
            if a % 4 != 0:
                raise AlignmentError(f"line {op.lineno}: address 0x{a:x} is not 4-byte aligned")
            addrs.append(a)
        instructions.append(MacroInstruction(mode, length, width, *addrs))

    return Program(instructions, bytes(data)), dict(symbols)


def _canonical(inst: MacroInstruction) -> bool:
    if inst.mode is OperationMode.HALT:
        return encode(inst) == 0
    if inst.mode is OperationMode.MVMUL:
        return True
    return inst.width == 0


def disassemble(program: Program) -> str:
    """Canonical text for a Program; assemble(disassemble(p)) reproduces p."""
    lines = []
    if program.data:
        if len(program.data) % 4 != 0:
            from .errors import ProgramFormatError

            raise ProgramFormatError("data segment length is not a multiple of 4")
        lines.append(".data")
        words = [
            int.from_bytes(program.data[i : i + 4], "little", signed=True)
            for i in range(0, len(program.data), 4)
        ]
        for i in range(0, len(words), 8):
            chunk = ", ".join(f"{w:#x}" if w >= 0 else str(w) for w in words[i : i + 8])
            lines.append(f"    .word {chunk}")
        lines.append(".text")
    for inst in program.instructions:
        if not _canonical(inst):
            lines.append(f"    .inst {encode(inst):#034x}")
        elif inst.mode is OperationMode.HALT:
            lines.append("    halt")
        elif inst.mode is OperationMode.MVMUL:
            lines.append(
                f"    mvmul {inst.length}, {inst.width}, "
                f"{inst.addr_x:#x}, {inst.addr_y:#x}, {inst.addr_z:#x}"
            )
        else:
            lines.append(
                f"    {inst.mode.name.lower()} {inst.length}, "
                f"{inst.addr_x:#x}, {inst.addr_y:#x}, {inst.addr_z:#x}"
            )
    return "\n".join(lines) + "\n"
