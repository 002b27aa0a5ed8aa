import numpy as np
import pytest

from models.errors import AlignmentError, ElementRangeError, InvariantViolation
from models.isa import VectorInstr, VOp, decode
from models.machine import MachineConfig
from services.vector_unit import (
    AddressStream, MainSequencerState, MemoryModel, VInstrRecord, burst_cycles, coalesce,
    generate_addresses, issue_to_lanes, slide_execute,
)
from services.vrf import VrfState


def test_unit_stride_addresses():
    stream = AddressStream(mode="unit", base=0x1000, count=4, size=8)
    assert list(generate_addresses(stream)) == [0x1000, 0x1008, 0x1010, 0x1018]


def test_strided_addresses():
    stream = AddressStream(mode="strided", base=0, count=3, size=8, stride=256)
    assert list(generate_addresses(stream)) == [0, 256, 512]


def test_indexed_addresses_follow_the_index_vector():
    stream = AddressStream(mode="indexed", base=64, count=3, size=8, indices=(16, 0, 8))
    assert list(generate_addresses(stream)) == [80, 64, 72]


def test_misaligned_access_is_rejected():
    with pytest.raises(AlignmentError):
        generate_addresses(AddressStream(mode="unit", base=4, count=2, size=8))


def test_contiguous_elements_form_one_burst_at_port_width():
    addresses = generate_addresses(AddressStream(mode="unit", base=0, count=64, size=8))
    bursts = coalesce(addresses)
    assert bursts == [(0, 512)]
    assert burst_cycles(bursts, width_bytes=16) == 32


def test_strided_elements_move_one_per_cycle():
    addresses = generate_addresses(AddressStream(mode="strided", base=0, count=8, size=8, stride=16))
    bursts = coalesce(addresses)
    assert len(bursts) == 8
    assert burst_cycles(bursts, width_bytes=16) == 8


def test_memory_port_width_is_enforced():
    memory = MemoryModel(width_bytes=16, latency=10)
    memory.begin_cycle()
    memory.transfer(8, write=False)
    memory.transfer(8, write=True)
    with pytest.raises(InvariantViolation):
        memory.transfer(1, write=False)


def test_memory_image_round_trip(tmp_path):
    memory = MemoryModel(width_bytes=16, latency=10)
    memory.write_f64(0x40, np.array([1.0, -2.5]))
    path = tmp_path / "image.bin"
    memory.save_image(str(path), 0x40, 16)
    other = MemoryModel(width_bytes=16, latency=10)
    assert other.load_image(str(path), base=0x100) == 16
    np.testing.assert_array_equal(other.read_f64(0x100, 2), [1.0, -2.5])
    assert other.read_word(0x100) == memory.read_word(0x40)


@pytest.fixture
def vrf():
    state = VrfState(lanes=2)
    state.write(1, np.array([1, 2, 3, 4], dtype=np.uint64))
    state.write(2, np.array([9, 9, 9, 9], dtype=np.uint64))
    return state


def test_slide_down_by_one_keeps_the_tail(vrf):
    slide_execute(decode("vslide v2, v1, 1"), vrf, vl=4, sew=64)
    assert list(vrf.read(2, 4)) == [2, 3, 4, 9]


def test_slide_by_zero_copies(vrf):
    slide_execute(decode("vslide v2, v1, 0"), vrf, vl=4, sew=64)
    assert list(vrf.read(2, 4)) == [1, 2, 3, 4]


def test_insert_and_extract(vrf):
    slide_execute(decode("vins v3, t0, zero"), vrf, vl=4, sew=64, scalar=77, position=0)
    assert vrf.is_scalar[3]
    assert slide_execute(decode("vext t1, v3, 0"), vrf, vl=4, sew=64) == 77
    slide_execute(decode("vins v1, t0, t1"), vrf, vl=4, sew=64, scalar=5, position=2)
    assert slide_execute(decode("vext t1, v1, 2"), vrf, vl=4, sew=64) == 5
    with pytest.raises(ElementRangeError):
        slide_execute(decode("vext t1, v1, 4"), vrf, vl=4, sew=64)


def _record(text, iid, vl=16):
    instr = decode(text, iid=iid)
    return VInstrRecord(instr=instr, vl=vl, sew=64, etype="fp", dispatched=0)


def test_ninth_instruction_waits_for_a_free_sequencer_slot():
    machine = MachineConfig(lanes=4)
    state = MainSequencerState(machine.max_inflight, machine.unit_queue_depth)
    program = [f"vadd v{10 + i}, v1, v2" for i in range(4)] + [f"vld v{20 + i}, 0(a0)" for i in range(4)]
    for iid, text in enumerate(program):
        assert issue_to_lanes(_record(text, iid), state, machine).issued
    outcome = issue_to_lanes(_record("vst v10, 0(a1)", 8), state, machine)
    assert not outcome.issued
    assert outcome.reason == "sequencer full"
    assert outcome.blocking == 0

    state.retire(state.inflight[0])
    assert issue_to_lanes(_record("vst v10, 0(a1)", 8), state, machine).issued


def test_fifth_fpu_instruction_hits_the_unit_tracker():
    machine = MachineConfig(lanes=4)
    state = MainSequencerState(machine.max_inflight, machine.unit_queue_depth)
    for iid in range(4):
        assert issue_to_lanes(_record(f"vmul v{10 + iid}, v1, v2", iid), state, machine).issued
    outcome = issue_to_lanes(_record("vmul v20, v1, v2", 4), state, machine)
    assert outcome.reason == "fpu tracker full"


def test_hazards_become_element_level_dependencies():
    machine = MachineConfig(lanes=4)
    state = MainSequencerState()
    first = _record("vmadd v3, v1, v2, v3", 0)
    reader = _record("vadd v5, v3, v4", 1)
    rewriter = _record("vmul v3, v6, v7", 2)
    for record in (first, reader, rewriter):
        assert issue_to_lanes(record, state, machine).issued

    assert reader.state.streams[0].producer is first.state
    assert rewriter.state.waw_on == [first.state]
    assert [r for r, _ in rewriter.state.war_on] == [first.state, reader.state]
    assert rewriter.state.dependencies == {0, 1}


def test_vector_length_request_is_clamped(run_program):
    run = run_program("vsetvl t0, a0, e64, fp", lanes=2, regs={"a0": 256})
    assert run.core.regs["t0"] == 128
    assert run.vu.vcfg.vl == 128


def test_store_writes_memory_in_element_order(run_program):
    def setup(memory):
        memory.write_f64(0x1000, np.arange(32, dtype=np.float64))

    text = """
    vsetvl t0, a0, e64, fp
    vld v1, 0(a1)
    vadd v2, v1, v1
    vst v2, 0(a2)
    """
    run = run_program(text, lanes=4, regs={"a0": 32, "a1": 0x1000, "a2": 0x4000}, setup=setup)
    np.testing.assert_array_equal(run.vu.memory.read_f64(0x4000, 32), 2 * np.arange(32))
    assert run.vu.memory.write_bytes == 32 * 8
    assert run.vu.memory.read_bytes == 32 * 8


def test_strided_load_is_slower_than_unit_stride(run_program):
    unit = run_program("vsetvl t0, a0, e64, fp\nvld v1, 0(a1)", regs={"a0": 32, "a1": 0})
    strided = run_program("vsetvl t0, a0, e64, fp\nvlds v1, 0(a1), a2",
                          regs={"a0": 32, "a1": 0, "a2": 16})
    assert strided.cycles - unit.cycles >= 32 - 32 * 8 // 16


def test_negative_slide_amount_is_rejected(vrf):
    instr = VectorInstr(op=VOp.VSLIDE, vd=2, vs=(1,), imm=-1)
    with pytest.raises(ElementRangeError):
        slide_execute(instr, vrf, vl=4, sew=64)


def test_back_to_back_slides_keep_their_own_operands(run_program):
    def setup(memory):
        memory.write_f64(0x1000, np.arange(64, dtype=np.float64))

    text = """
    vsetvl t0, a0, e64, fp
    vld v1, 0(a1)
    vslide v5, v1, 16
    vslide v6, v1, 8
    vadd v7, v5, v6
    """
    run = run_program(text, lanes=2, regs={"a0": 64, "a1": 0x1000}, setup=setup)
    values = np.arange(64, dtype=np.float64)
    got = run.vu.vrf.read(7, 64).view(np.float64)
    np.testing.assert_array_equal(got[:48], values[16:] + values[8:56])
    assert all(record.completed is not None for record in run.vu.records)


def test_memory_instruction_is_acknowledged_after_the_address_check(run_program):
    text = """
    vsetvl t0, a0, e64, fp
    vld v1, 0(a1)
    vadd v2, v3, v4
    """
    run = run_program(text, lanes=4, regs={"a0": 16, "a1": 0x1000})
    _, load, add = run.vu.records
    assert load.acknowledged - load.dispatched >= 1 + run.machine.mem_ack_latency
    assert add.dispatched >= load.acknowledged
    assert add.acknowledged == add.dispatched + 1
    assert run.core.stalls["acknowledge"] > 0


STORE_THEN_LOAD = """
vsetvl t0, a0, e64, fp
vld v1, 0(a1)
vst v1, 0(a2)
ld t1, 0(a3)
"""


def test_scalar_load_waits_for_outstanding_vector_stores(run_program):
    run = run_program(STORE_THEN_LOAD, lanes=2, regs={"a0": 32, "a1": 0x1000, "a2": 0x4000, "a3": 0x8000})
    store = run.vu.records[-1]
    ld = run.core.timeline[-1]
    assert ld.mnemonic == "ld"
    assert ld.cycle > store.completed
    assert run.core.stalls["store fence"] > 0


def test_store_fence_can_be_disabled(run_program):
    regs = {"a0": 32, "a1": 0x1000, "a2": 0x4000, "a3": 0x8000}
    fenced = run_program(STORE_THEN_LOAD, lanes=2, regs=regs)
    free = run_program(STORE_THEN_LOAD, lanes=2, regs=regs, store_fence=False)
    assert free.core.stalls["store fence"] == 0
    assert free.core.timeline[-1].cycle < fenced.core.timeline[-1].cycle


def test_single_element_store_completes_after_its_acknowledgement(run_program):
    text = """
    vsetvl t0, a0, e64, fp
    vld v1, 0(a1)
    vst v1, 0(a2)
    """
    run = run_program(text, lanes=4, regs={"a0": 1, "a1": 0x1000, "a2": 0x2000})
    for record in run.vu.records:
        assert record.dispatched < record.acknowledged <= record.completed


def test_gather_and_scatter_leave_no_memory_jobs_behind(run_program):
    offsets = np.array([24, 0, 16, 8, 56, 40, 48, 32], dtype=np.uint64)

    def setup(memory):
        memory.write_elements(0x1000 + 8 * np.arange(8), offsets)
        memory.write_f64(0x2000, np.arange(8, dtype=np.float64) + 0.5)

    text = """
    vsetvl t0, a0, e64, int
    vld v1, 0(a1)
    vldx v2, 0(a2), v1
    vstx v2, 0(a3), v1
    """
    run = run_program(text, lanes=2, regs={"a0": 8, "a1": 0x1000, "a2": 0x2000, "a3": 0x4000},
                      setup=setup)
    np.testing.assert_array_equal(run.vu.memory.read_f64(0x4000, 8), run.vu.memory.read_f64(0x2000, 8))
    assert run.vu.indexed_jobs == 0
    assert not run.vu.loads and not run.vu.stores
