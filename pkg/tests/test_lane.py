import numpy as np
import pytest

from models.errors import ConfigError
from models.isa import VOp
from services.lane import FunctionalUnit, UnitKind, execute_bundle, lane_bundles, unit_for


def f64_bits(*values):
    return np.array(values, dtype=np.float64).view(np.uint64)


def test_fma_bundle_is_exact_for_small_integers():
    fpu = FunctionalUnit(UnitKind.FPU, 5)
    out = execute_bundle(fpu, VOp.VMADD, [f64_bits(2.0), f64_bits(3.0), f64_bits(1.0)])
    assert out.view(np.float64)[0] == 7.0


def test_single_precision_add_produces_two_results_per_bundle():
    fpu = FunctionalUnit(UnitKind.FPU, 5)
    assert fpu.results_per_bundle(32) == 2
    a = np.array([1.5, 2.25], dtype=np.float32).view(np.uint32).astype(np.uint64)
    b = np.array([0.5, 0.75], dtype=np.float32).view(np.uint32).astype(np.uint64)
    out = execute_bundle(fpu, VOp.VADD, [a, b], sew=32)
    np.testing.assert_array_equal(out.astype(np.uint32).view(np.float32), [2.0, 3.0])


def test_integer_arithmetic_wraps_at_element_width():
    alu = FunctionalUnit(UnitKind.ALU, 1)
    out = execute_bundle(alu, VOp.VADD, [np.array([250, 3]), np.array([10, 4])], sew=8, etype="int")
    np.testing.assert_array_equal(out, [4, 7])


def test_widening_multiply_keeps_the_full_product():
    mul = FunctionalUnit(UnitKind.MUL, 2)
    out = execute_bundle(mul, VOp.VWMUL, [np.array([200]), np.array([3])], sew=8, etype="int")
    # 200 is -56 as a signed byte
    assert int(out[0]) == (-168) & 0xFFFF


def test_opcode_on_wrong_unit_is_rejected():
    with pytest.raises(ConfigError):
        execute_bundle(FunctionalUnit(UnitKind.ALU, 1), VOp.VMADD,
                       [f64_bits(1.0), f64_bits(1.0), f64_bits(1.0)])


def test_unit_selection():
    assert unit_for(VOp.VMADD, "fp") is UnitKind.FPU
    assert unit_for(VOp.VMUL, "int") is UnitKind.MUL
    assert unit_for(VOp.VADD, "int") is UnitKind.ALU
    assert unit_for(VOp.VSLIDE, "fp") is UnitKind.SLDU
    assert unit_for(VOp.VLDS, "fp") is UnitKind.LOAD
    assert unit_for(VOp.VSETVL, "fp") is None
    with pytest.raises(ConfigError):
        unit_for(VOp.VFDIV, "int")


@pytest.mark.parametrize("vl, lanes, sew, bundles", [(64, 4, 64, 16), (65, 4, 64, 17), (64, 4, 32, 8),
                                                     (0, 2, 64, 0), (112, 16, 64, 7)])
def test_lane_bundles(vl, lanes, sew, bundles):
    assert lane_bundles(vl, lanes, sew) == bundles


def _chain_setup(memory):
    rng = np.random.default_rng(7)
    for base in (0x1000, 0x2000, 0x3000):
        memory.write_f64(base, rng.uniform(-1, 1, 64))


CHAIN = """
vsetvl t0, a0, e64, fp
vld v2, 0(a2)
vld v4, 0(a3)
vld v1, 0(a1)
vmadd v3, v1, v2, v4
"""


def test_chained_fma_finishes_shortly_after_its_load(run_program):
    run = run_program(CHAIN, lanes=4, regs={"a0": 64, "a1": 0x1000, "a2": 0x2000, "a3": 0x3000},
                      setup=_chain_setup)
    load, fma = run.vu.records[3], run.vu.records[4]
    assert fma.instr.op is VOp.VMADD
    assert fma.state.done_cycle - load.state.done_cycle <= run.machine.fpu_depth + 2
    # the FMA starts before the load has finished
    assert fma.acknowledged < load.completed

    memory = run.vu.memory
    x, y, z = (memory.read_f64(base, 64) for base in (0x1000, 0x2000, 0x3000))
    got = run.vu.vrf.read(3, 64).view(np.float64)
    np.testing.assert_array_equal(got, x * y + z)


def test_fpu_and_multiplier_never_accept_in_the_same_cycle(run_program):
    text = """
    vsetvl t0, a0, e64, int
    vmul v5, v6, v7
    vsetvl t0, a0, e64, fp
    vmadd v8, v9, v10, v11
    vmul v12, v9, v10
    """
    run = run_program(text, lanes=2, regs={"a0": 32}, trace=True)
    busy = {}
    for cycle, _, unit, flag in run.vu.lane.trace_rows:
        busy.setdefault(cycle, {})[unit] = flag
    assert any(row.get("mul") for row in busy.values())
    assert any(row.get("fpu") for row in busy.values())
    assert not any(row.get("mul") and row.get("fpu") for row in busy.values())


def test_every_operand_access_is_granted_exactly_once(run_program):
    text = """
    vsetvl t0, a0, e64, fp
    vmadd v8, v0, v1, v2
    vmadd v9, v3, v4, v5
    vadd v10, v6, v7
    """
    run = run_program(text, lanes=1, regs={"a0": 64})
    lane = run.vu.lane
    assert lane.idle
    # three reads and one write per FMA element, two reads and one write per add
    assert lane.arbiter.grants == 2 * 64 * 4 + 64 * 3
