import pytest
from pydantic import ValidationError

from models.errors import ConfigError, DecodeError, RegisterRangeError
from models.isa import (
    SOp, VecConfig, VectorInstr, VOp, decode, format_instr, format_program, parse_program,
    set_vector_length,
)


@pytest.mark.parametrize("lanes, sew, expected", [(1, 64, 64), (2, 64, 128), (16, 64, 1024), (4, 32, 512)])
def test_vlmax_scales_with_lanes_and_element_width(lanes, sew, expected):
    assert VecConfig.compute_vlmax(lanes, sew) == expected


@pytest.mark.parametrize("requested, lanes, granted", [(256, 2, 128), (0, 4, 0), (100, 16, 100)])
def test_set_vector_length_clamps_to_vlmax(requested, lanes, granted):
    cfg = VecConfig.for_machine(lanes)
    assert set_vector_length(requested, cfg).vl == granted


def test_set_vector_length_keeps_element_type():
    cfg = VecConfig.for_machine(4, sew=32, etype="int")
    new = set_vector_length(7, cfg)
    assert (new.sew, new.etype, new.vlmax) == (32, "int", cfg.vlmax)


def test_negative_vector_length_is_rejected():
    with pytest.raises(ConfigError):
        set_vector_length(-1, VecConfig.for_machine(2))


def test_vec_config_rejects_unknown_sew():
    with pytest.raises(ValidationError):
        VecConfig(vl=1, sew=24, vlmax=8)


def test_decode_vmadd_with_listing_aliases():
    instr = decode("vmadd vC2, vA, vB1, vC2")
    assert instr.op is VOp.VMADD
    assert instr.vd == 6
    assert instr.vs == (0, 2, 6)
    assert instr.writes == 6


def test_decode_memory_and_scalar_forms():
    load = decode("vld v3, 16(a1)")
    assert (load.op, load.vd, load.rs, load.imm) == (VOp.VLD, 3, "a1", 16)
    store = decode("vst v5, 0(a2)")
    assert store.writes is None and store.reads == (5,)
    ld = decode("ld t0, 8(a0)")
    assert (ld.op, ld.rd, ld.rs1, ld.imm) == (SOp.LD, "t0", "a0", 8)
    add = decode("add a0, a0, -8")
    assert add.imm == -8 and add.rs2 is None


def test_decode_vsetvl():
    instr = decode("vsetvl t0, a3, e32, int")
    assert (instr.rd, instr.rs, instr.sew, instr.etype) == ("t0", "a3", 32, "int")


@pytest.mark.parametrize("line", ["vfoo v1, v2", "vadd v1, v2", "vld v1, a0", "vsetvl t0, a0, e12, fp"])
def test_decode_rejects_malformed_lines(line):
    with pytest.raises(DecodeError):
        decode(line)


def test_decode_rejects_out_of_range_registers():
    with pytest.raises(RegisterRangeError):
        decode("vadd v32, v1, v2")
    with pytest.raises(RegisterRangeError):
        decode("add x40, x1, x2")


def test_format_instr_is_canonical_for_decoded_text():
    line = "vslide v4, v5, 3"
    assert format_instr(decode(line)) == line


def test_parse_program_skips_comments_and_numbers_instructions():
    text = """
    ; header
    vsetvl t0, a3, e64, fp
    vld v1, 0(a0)   ; X
    add a0, a0, 8
    """
    program = parse_program(text)
    assert [instr.iid for instr in program] == [0, 1, 2]
    assert program[0].op is SOp.VDISPATCH
    assert program[1].sources == ("a0",)
    assert format_program(program).splitlines()[1] == "vld v1, 0(a0)"


def test_vector_instr_validates_registers():
    with pytest.raises(RegisterRangeError):
        VectorInstr(op=VOp.VADD, vd=1, vs=(2, 40))


CANONICAL_LINES = {
    VOp.VLD: "vld v3, 16(a1)",
    VOp.VST: "vst v5, 0(a2)",
    VOp.VLDS: "vlds v4, 8(a0), t1",
    VOp.VSTS: "vsts v4, 0(a3), t2",
    VOp.VLDX: "vldx v6, 0(a0), v7",
    VOp.VSTX: "vstx v6, 32(a1), v8",
    VOp.VMADD: "vmadd v9, v0, v1, v9",
    VOp.VADD: "vadd v1, v2, v3",
    VOp.VMUL: "vmul v10, v11, v12",
    VOp.VWADD: "vwadd v2, v4, v6",
    VOp.VWMUL: "vwmul v2, v4, v6",
    VOp.VFDIV: "vfdiv v13, v14, v15",
    VOp.VFSQRT: "vfsqrt v16, v17",
    VOp.VINS: "vins v0, t0, zero",
    VOp.VEXT: "vext a0, v31, 0",
    VOp.VSLIDE: "vslide v4, v5, 3",
    VOp.VSETVL: "vsetvl t0, a3, e16, int",
    SOp.LD: "ld t0, 8(a0)",
    SOp.ADD: "add a0, a0, -8",
    SOp.BRANCH: "bnez t3, loop",
}


def test_canonical_lines_cover_every_opcode():
    assert set(CANONICAL_LINES) == set(VOp) | (set(SOp) - {SOp.VDISPATCH})


@pytest.mark.parametrize("op, line", list(CANONICAL_LINES.items()),
                         ids=[op.value for op in CANONICAL_LINES])
def test_format_and_decode_agree_on_every_opcode(op, line):
    instr = decode(line)
    assert instr.op is op
    assert format_instr(instr) == line
    assert decode(format_instr(instr)) == instr


@pytest.mark.parametrize("line", ["vslide v2, v1, -1", "vext a0, v1, -2"])
def test_negative_slide_amount_and_extract_index_are_rejected(line):
    with pytest.raises(DecodeError):
        decode(line)
