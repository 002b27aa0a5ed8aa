import pytest

from models.errors import MeasurementError
from models.isa import parse_program
from models.report import IssueEvent
from services.scalar_core import IdealSink, ScalarCore, ScalarPipeModel, measure_issue_gap, run_scalar_stream


def unrolled(body: str, times: int) -> str:
    return "\n".join([body] * times)


FMA_BODY = """
ld t0, 0(a0)
add a0, a0, 8
vins vA, t0, zero
vmadd vC0, vA, vB0, vC0
"""


def test_broadcast_fma_issues_every_five_cycles():
    timeline = run_scalar_stream(parse_program(unrolled(FMA_BODY, 12)), regs={"a0": 0x1000})
    gap = measure_issue_gap(timeline, "vmadd")
    assert gap.mode == 5
    assert gap.max == 5 and gap.min == 5


def test_fma_period_drops_without_the_load_dependency():
    body = FMA_BODY.replace("vins vA, t0, zero", "vins vA, t1, zero")
    timeline = run_scalar_stream(parse_program(unrolled(body, 12)))
    assert measure_issue_gap(timeline, "vmadd").mode == 4


def test_load_latency_sets_the_period():
    model = ScalarPipeModel(ld_latency=4)
    timeline = run_scalar_stream(parse_program(unrolled(FMA_BODY, 8)), model=model)
    assert measure_issue_gap(timeline, "vmadd").mode == 7


def test_independent_instructions_issue_back_to_back():
    timeline = run_scalar_stream(parse_program(unrolled("add t1, t2, 1\nadd t3, t4, 2", 10)))
    gap = measure_issue_gap(timeline)
    assert gap.mode == 1 and gap.mean == 1.0


def test_back_to_back_dispatches_with_room_in_the_queue():
    timeline = run_scalar_stream(parse_program(unrolled("vadd v1, v2, v3", 6)))
    assert measure_issue_gap(timeline, "vadd").mode == 1


def test_extract_blocks_the_core_until_the_result_arrives():
    program = parse_program("vext t1, v4, 0\nadd t2, t1, 1")
    core = ScalarCore(program, IdealSink())
    cycle = 0
    while not core.finished:
        cycle += 1
        core.sink.step(cycle)
        core.step(cycle)
    first, second = core.timeline
    assert second.cycle - first.cycle == 2
    assert core.stalls["vector result"] == 1
    assert [e.iid for e in core.dispatch_events()] == [0]


def test_issue_gap_needs_two_matches():
    with pytest.raises(MeasurementError):
        measure_issue_gap([IssueEvent(iid=0, mnemonic="vmadd", cycle=3)], "vmadd")


def test_issue_gap_statistics():
    cycles = [1, 2, 7, 12, 17, 30]
    timeline = [IssueEvent(iid=i, mnemonic="vmadd", cycle=c) for i, c in enumerate(cycles)]
    gap = measure_issue_gap(timeline, "vmadd")
    assert gap.samples == 4
    assert (gap.mode, gap.max, gap.min) == (5, 13, 5)


class DrainingStores(IdealSink):
    """Reports vector stores in flight until ``until``"""

    def __init__(self, until: int):
        super().__init__()
        self.until = until

    def stores_pending(self, cycle):
        return cycle < self.until


def test_scalar_load_waits_behind_the_store_fence():
    timeline = run_scalar_stream(parse_program("ld t0, 0(a0)\nadd t1, t0, 1"), sink=DrainingStores(until=4))
    assert timeline[0].cycle == 4


def test_store_fence_off_ignores_pending_stores():
    model = ScalarPipeModel(store_fence=False)
    timeline = run_scalar_stream(parse_program("ld t0, 0(a0)"), sink=DrainingStores(until=4), model=model)
    assert timeline[0].cycle == 1
