"""Functional + timing model of the detection coprocessor.

The datapath has N parallel tracks (LUT -> MUL -> ADD) behind a 6-stage
pipeline: fetch, decode, three execution stages, writeback. A macro
instruction initializes the control FSM; the FSM retires N(track) elements
per cycle for vector modes and one row-slice of N columns per cycle for
MVmul, so

    cycles(vector op, length L)  = ceil(L / N) + 5
    cycles(MVmul, width W, length L) = W * ceil(L / N) + 5

with the constant 5 being the pipeline fill. Consecutive macro-instructions
do not overlap, so program cycle counts are upper bounds for hardware that
pipelines across instructions.

Functional semantics are track-count independent by construction (reductions
accumulate in canonical element order with a single rounding at writeback),
which is what lets one binary run bit-identically on any number of tracks.

Memory map: the data segment of a program loads at datapath RAM byte 0;
by loader convention the sensor buffer occupies the first bytes, model
constants follow, and workspace grows above the loaded image.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import fixedpoint as fx
from .errors import (
    BufferOverflowError,
    CapacityExceededError,
    CycleBudgetExceededError,
    MemoryOutOfBoundsError,
    ScratchpadOverflowError,
    ScratchpadPoisonError,
    SimulationError,
)
from .isa import (
    ELEMENTWISE_MODES,
    INSTRUCTION_BYTES,
    LUT_MODES,
    MacroInstruction,
    OperationMode,
    Program,
)
from .lut import LutTable, default_luts

PIPELINE_FILL_CYCLES = 5

_LUT_FUNC_FOR_MODE = {
    OperationMode.VSIG: "sigmoid",
    OperationMode.VTANH: "tanh",
    OperationMode.VEXP: "exp",
}


@dataclass(frozen=True)
class MachineConfig:
    """Datapath geometry. Defaults mirror the FPGA prototype."""

    n_tracks: int = 4
    datapath_ram_bytes: int = 1_835_008      # 1.75 MB
    instruction_ram_bytes: int = 131_072     # 128 KB
    scratchpad_bytes: int = 256
    clock_hz: int = 115_000_000

    def __post_init__(self):
        if self.n_tracks < 1:
            raise ValueError("n_tracks must be >= 1")
        for name in ("datapath_ram_bytes", "instruction_ram_bytes", "scratchpad_bytes"):
            v = getattr(self, name)
            if v <= 0 or v % 4 != 0:
                raise ValueError(f"{name} must be a positive multiple of 4")
        if self.clock_hz <= 0:
            raise ValueError("clock_hz must be positive")


def iteration_count(inst: MacroInstruction, n_tracks: int) -> int:
    """FSM iterations one macro-instruction spends in the execute stages."""
    if inst.mode is OperationMode.HALT:
        return 0
    col_tiles = -(-inst.length // n_tracks)  # ceil
    if inst.mode is OperationMode.MVMUL:
        return inst.width * col_tiles
    return col_tiles


def fsm_length_trace(length: int, n_tracks: int) -> list[int]:
    """Successive reg_length values while a vector op drains (10 -> 6 -> 2)."""
    trace = []
    while length > 0:
        trace.append(length)
        length -= n_tracks
    return trace


def instruction_cycles(inst: MacroInstruction, n_tracks: int) -> int:
    if inst.mode is OperationMode.HALT:
        return 0
    return iteration_count(inst, n_tracks) + PIPELINE_FILL_CYCLES


@dataclass
class RunResult:
    cycles: int
    instructions_retired: int
    overflow: bool
    clock_hz: int
    state: "MachineState"

    @property
    def wall_time_s(self) -> float:
        return self.cycles / self.clock_hz

    def report_lines(self) -> list[str]:
        return [
            f"cycles={self.cycles}",
            f"instructions={self.instructions_retired}",
            f"wall_time_s={self.wall_time_s:.9f}",
            f"overflow={int(self.overflow)}",
        ]


class MachineState:
    """Full mutable state of one machine instance.

    One instance is single-threaded; independent instances share nothing and
    may run in parallel (the batch evaluator relies on this).
    """

    def __init__(self, config: MachineConfig, luts: dict[str, LutTable] | None = None):
        self.config = config
        self.ram = np.zeros(config.datapath_ram_bytes // 4, dtype=np.int32)
        self.instructions: list[MacroInstruction] = []
        self.scratchpad = np.zeros(config.scratchpad_bytes // 4, dtype=np.int32)
        self.pc = 0
        self.reg_length = 0
        self.reg_width = 0
        self.reg_width_copy = 0
        self.cycles = 0
        self.overflow = False
        self.halted = False
        self.sensor_capacity_bytes = 0
        self.luts = dict(luts) if luts is not None else default_luts()
        self.debug_scratchpad = False
        self._scratch_written = np.zeros(len(self.scratchpad), dtype=bool)
        self._retired = 0

    # -- loading ----------------------------------------------------------

    def load_program(self, program: Program, sensor_capacity_bytes: int = 0) -> None:
        size = len(program.instructions) * INSTRUCTION_BYTES
        if size > self.config.instruction_ram_bytes:
            raise CapacityExceededError(
                f"program is {size} bytes, instruction RAM holds {self.config.instruction_ram_bytes}"
            )
        if len(program.data) > self.config.datapath_ram_bytes:
            raise CapacityExceededError(
                f"data segment is {len(program.data)} bytes, datapath RAM holds "
                f"{self.config.datapath_ram_bytes}"
            )
        self.instructions = list(program.instructions)
        self.ram[:] = 0
        if program.data:
            pad = (-len(program.data)) % 4
            words = np.frombuffer(program.data + bytes(pad), dtype="<i4")
            self.ram[: len(words)] = words
        self.sensor_capacity_bytes = sensor_capacity_bytes
        self.pc = 0
        self.cycles = 0
        self.overflow = False
        self.halted = False
        self._retired = 0

    def memory_image(self) -> bytes:
        """Flat little-endian dump of datapath RAM (offset 0 = byte 0)."""
        return self.ram.astype("<i4").tobytes()

    def inject_sensor_window(self, window: np.ndarray) -> None:
        """Quantize readings into the sensor buffer and restart the program."""
        w = np.atleast_2d(np.asarray(window, dtype=np.float64))
        nbytes = w.size * 4
        if nbytes > self.sensor_capacity_bytes:
            raise BufferOverflowError(
                f"window needs {nbytes} bytes, sensor buffer holds {self.sensor_capacity_bytes}"
            )
        self.ram[: w.size] = fx.quantize_arr(w.reshape(-1))
        self.pc = 0
        self.halted = False

    # -- memory helpers ---------------------------------------------------

    def _view(self, addr: int, n_words: int) -> np.ndarray:
        word = addr // 4
        if addr < 0 or word + n_words > len(self.ram):
            raise MemoryOutOfBoundsError(
                f"access [{addr:#x}, {addr + 4 * n_words:#x}) outside "
                f"{self.config.datapath_ram_bytes}-byte datapath RAM"
            )
        return self.ram[word : word + n_words]

    # -- scratchpad bookkeeping (poison-on-instruction-start debug mode) --

    def _scratch_begin(self):
        if self.debug_scratchpad:
            self._scratch_written[:] = False

    def _scratch_write(self, index: int):
        if self.debug_scratchpad:
            self._scratch_written[index] = True

    def _scratch_read(self, index: int):
        if self.debug_scratchpad and not self._scratch_written[index]:
            raise ScratchpadPoisonError(
                f"scratchpad word {index} read before written in this instruction"
            )

    # -- execution --------------------------------------------------------

    def step(self) -> None:
        """Fetch and retire one macro-instruction."""
        if self.halted:
            return
        if not 0 <= self.pc < len(self.instructions):
            raise MemoryOutOfBoundsError(
                f"pc={self.pc} outside the {len(self.instructions)}-instruction program"
            )
        inst = self.instructions[self.pc]
        self.reg_length = inst.length
        self.reg_width = self.reg_width_copy = inst.width
        if inst.mode is OperationMode.HALT:
            self.halted = True
            self.pc += 1
            return
        self._execute(inst)
        self.cycles += instruction_cycles(inst, self.config.n_tracks)
        self.reg_length = 0
        self.reg_width = 0
        self.pc += 1
        self._retired += 1

    def _execute(self, inst: MacroInstruction) -> None:
        mode, n = inst.mode, inst.length
        if mode in ELEMENTWISE_MODES:
            x = self._view(inst.addr_x, n)
            y = self._view(inst.addr_y, n)
            if mode is OperationMode.VADD:
                z, ovf = fx.add_arr(x, y)
            elif mode is OperationMode.VSUB:
                z, ovf = fx.sub_arr(x, y)
            elif mode is OperationMode.VMUL:
                z, ovf = fx.mul_arr(x, y)
            else:  # VSGT
                z, ovf = np.where(x > y, np.int32(fx.ONE), np.int32(0)), False
            self._view(inst.addr_z, n)[:] = z
        elif mode in LUT_MODES:
            x = self._view(inst.addr_x, n)
            z, ovf = self.luts[_LUT_FUNC_FOR_MODE[mode]].eval_raw(x)
            self._view(inst.addr_z, n)[:] = z
        elif mode is OperationMode.VSSGT:
            x = self._view(inst.addr_x, n)
            s = self._view(inst.addr_y, 1)[0]
            self._view(inst.addr_z, n)[:] = np.where(x > s, np.int32(fx.ONE), np.int32(0))
            ovf = False
        elif mode is OperationMode.VMAXABS:
            x = self._view(inst.addr_x, n)
            self._scratch_begin()
            self._scratch_write(0)        # running maximum lives in word 0
            self._scratch_read(0)
            m = int(np.max(np.abs(x.astype(np.int64))))
            raw, ovf = fx._saturate(m)
            self.scratchpad[0] = raw
            self._view(inst.addr_z, 1)[0] = raw
        elif mode is OperationMode.VSQNORM:
            x = self._view(inst.addr_x, n)
            self._scratch_begin()
            self._scratch_write(0)        # partial sum lives in word 0
            self._scratch_read(0)
            raw, ovf = fx.sqnorm_raw(x)
            self.scratchpad[0] = raw
            self._view(inst.addr_z, 1)[0] = raw
        elif mode is OperationMode.MVMUL:
            ovf = self._exec_mvmul(inst)
        else:  # pragma: no cover - decode rejects unknown modes already
            raise SimulationError(f"unexecutable mode {mode}", self.pc, self._retired)
        self.overflow = self.overflow or ovf

    def _exec_mvmul(self, inst: MacroInstruction) -> bool:
        rows, cols = inst.width, inst.length
        if rows * 4 > self.config.scratchpad_bytes:
            raise ScratchpadOverflowError(
                f"MVmul width {rows} needs {rows * 4} scratchpad bytes, "
                f"have {self.config.scratchpad_bytes}"
            )
        mat = self._view(inst.addr_x, rows * cols).reshape(rows, cols)
        vec = self._view(inst.addr_y, cols)
        self._scratch_begin()
        if self.debug_scratchpad:
            # Walk the tile schedule: partial sums are written on the first
            # column tile and read back on every later one.
            n_tiles = -(-cols // self.config.n_tracks)
            for tile in range(n_tiles):
                for row in range(rows):
                    if tile > 0:
                        self._scratch_read(row)
                    self._scratch_write(row)
        z, ovf = fx.matvec_arr(mat, vec)
        self.scratchpad[:rows] = z
        self._view(inst.addr_z, rows)[:] = z
        return ovf

    def run(self, max_cycles: int = 1_000_000_000) -> RunResult:
        """Execute until Halt. The program must end with an explicit Halt."""
        start_retired = self._retired
        while not self.halted:
            pc = self.pc
            try:
                self.step()
            except CycleBudgetExceededError:
                raise
            except SimulationError:
                raise
            except Exception as exc:
                raise SimulationError(str(exc), pc, self._retired) from exc
            if self.cycles > max_cycles:
                raise CycleBudgetExceededError(
                    f"exceeded budget of {max_cycles} cycles at pc={self.pc}"
                )
        return RunResult(
            cycles=self.cycles,
            instructions_retired=self._retired - start_retired,
            overflow=self.overflow,
            clock_hz=self.config.clock_hz,
            state=self,
        )


def boot(config: MachineConfig, program: Program,
         luts: dict[str, LutTable] | None = None,
         sensor_capacity_bytes: int = 0) -> MachineState:
    """Fresh machine with a program loaded and PC at 0."""
    state = MachineState(config, luts=luts)
    state.load_program(program, sensor_capacity_bytes=sensor_capacity_bytes)
    return state
