import pytest
from hypothesis import given
from hypothesis import strategies as st

from sidsim import isa
from sidsim.errors import (
    AlignmentError,
    FieldOverflowError,
    ProgramFormatError,
    UnknownModeError,
)
from sidsim.isa import HALT, MacroInstruction, OperationMode, Program, decode, encode

aligned_addr = st.integers(0, (1 << 30) - 1).map(lambda w: w * 4)
nonhalt_mode = st.sampled_from([m for m in OperationMode if m is not OperationMode.HALT])


@st.composite
def instructions(draw):
    mode = draw(nonhalt_mode)
    width = draw(st.integers(1, isa.LENGTH_MAX)) if mode is OperationMode.MVMUL else 0
    return MacroInstruction(
        mode=mode,
        length=draw(st.integers(1, isa.LENGTH_MAX)),
        width=width,
        addr_x=draw(aligned_addr),
        addr_y=draw(aligned_addr),
        addr_z=draw(aligned_addr),
    )


def test_halt_is_all_zero():
    assert encode(HALT) == 0
    assert decode(0) == HALT


def test_field_positions():
    inst = MacroInstruction(OperationMode.VADD, length=64,
                            addr_x=0x1000, addr_y=0x1100, addr_z=0x1200)
    word = encode(inst)
    assert (word >> 124) & 0xF == OperationMode.VADD
    assert (word >> 110) & 0x3FFF == 64
    assert (word >> 96) & 0x3FFF == 0
    assert (word >> 64) & 0xFFFFFFFF == 0x1000
    assert (word >> 32) & 0xFFFFFFFF == 0x1100
    assert word & 0xFFFFFFFF == 0x1200


def test_length_field_overflow():
    with pytest.raises(FieldOverflowError):
        MacroInstruction(OperationMode.VADD, length=1 << 14)


def test_width_field_overflow():
    with pytest.raises(FieldOverflowError):
        MacroInstruction(OperationMode.MVMUL, length=4, width=1 << 14)


def test_zero_length_rejected_for_vector_ops():
    with pytest.raises(FieldOverflowError):
        MacroInstruction(OperationMode.VADD, length=0)


def test_mvmul_requires_width():
    with pytest.raises(FieldOverflowError):
        MacroInstruction(OperationMode.MVMUL, length=4, width=0)


def test_misaligned_address_rejected():
    with pytest.raises(AlignmentError):
        MacroInstruction(OperationMode.VADD, length=4, addr_x=2)


def test_unknown_mode_nibble():
    with pytest.raises(UnknownModeError):
        decode(0xF << 124)
    with pytest.raises(UnknownModeError):
        decode(12 << 124)


@given(instructions())
def test_encode_decode_round_trip(inst):
    assert decode(encode(inst)) == inst


@given(instructions())
def test_bytes_round_trip(inst):
    raw = isa.encode_bytes(inst)
    assert len(raw) == 16
    assert isa.decode_bytes(raw) == inst


def test_round_trip_bulk_randomized():
    import random

    rng = random.Random(0)
    modes = [m for m in OperationMode if m is not OperationMode.HALT]
    for _ in range(10_000):
        mode = rng.choice(modes)
        inst = MacroInstruction(
            mode,
            length=rng.randint(1, isa.LENGTH_MAX),
            width=rng.randint(1, isa.LENGTH_MAX) if mode is OperationMode.MVMUL else 0,
            addr_x=rng.randrange(0, 1 << 32, 4),
            addr_y=rng.randrange(0, 1 << 32, 4),
            addr_z=rng.randrange(0, 1 << 32, 4),
        )
        assert decode(encode(inst)) == inst


def test_program_container_round_trip():
    prog = Program(
        [MacroInstruction(OperationMode.VADD, 8, 0, 0, 32, 64), HALT],
        data=bytes(range(64)),
    )
    blob = prog.to_bytes()
    assert blob[:4] == b"SIDP"
    back = Program.from_bytes(blob)
    assert back.instructions == prog.instructions
    assert back.data == prog.data


def test_program_container_rejects_corruption():
    prog = Program([HALT], data=b"\x01\x02\x03\x04")
    blob = prog.to_bytes()
    with pytest.raises(ProgramFormatError):
        Program.from_bytes(blob[:-1])
    with pytest.raises(ProgramFormatError):
        Program.from_bytes(b"NOPE" + blob[4:])
    bad_version = blob[:4] + (99).to_bytes(4, "little") + blob[8:]
    with pytest.raises(ProgramFormatError):
        Program.from_bytes(bad_version)
