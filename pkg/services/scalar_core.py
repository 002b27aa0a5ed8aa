"""
Timing model of the single-issue in-order scalar core and its dispatcher
into the vector unit
"""

import logging
from collections import Counter, deque
from typing import Deque, Dict, List, Mapping, Optional, Protocol, Sequence

from pydantic import BaseModel, ConfigDict, Field

from config import Config
from models.errors import InvariantViolation, MeasurementError
from models.isa import ScalarInstr, SOp, VectorInstr, VOp
from models.machine import MachineConfig
from models.report import DispatchEvent, IssueEvent, IssueGap
from services.vector_unit import MemoryModel, VInstrRecord


logger = logging.getLogger(__name__)

MASK64 = (1 << 64) - 1


class ScalarPipeModel(BaseModel):
    """Issue-rate parameters of the scalar core"""

    model_config = ConfigDict(frozen=True)

    issue_width: int = Field(default=1, ge=1, le=1)
    ld_latency: int = Field(default=Config.SCALAR_LD_LATENCY, ge=1)
    commit_ports: int = Field(default=Config.SCALAR_COMMIT_PORTS, ge=1)
    intake_depth: int = Field(default=Config.INTAKE_QUEUE_DEPTH, ge=1)
    store_fence: bool = Config.SCALAR_STORE_FENCE

    @classmethod
    def from_machine(cls, machine: MachineConfig) -> "ScalarPipeModel":
        return cls(ld_latency=machine.scalar_ld_latency, commit_ports=machine.commit_ports,
                   intake_depth=machine.intake_depth, store_fence=machine.store_fence)


class VectorSink(Protocol):
    """What the dispatcher needs from the vector unit"""

    def can_accept(self) -> bool: ...

    def dispatch(self, instr: VectorInstr, regs: Mapping[str, int], cycle: int) -> VInstrRecord: ...

    def result_ready(self, record: VInstrRecord, cycle: int) -> bool: ...

    def acknowledged(self, record: VInstrRecord, cycle: int) -> bool: ...

    def stores_pending(self, cycle: int) -> bool: ...

    def step(self, cycle: int) -> None: ...


class IdealSink:
    """
    Vector unit stand-in that acknowledges one instruction per cycle, one
    cycle after dispatch. Used to study the scalar issue rate in isolation.
    """

    def __init__(self, depth: int = Config.INTAKE_QUEUE_DEPTH, vlmax: int = 256):
        self.depth = depth
        self.vlmax = vlmax
        self.intake: Deque[VInstrRecord] = deque()
        self.records: List[VInstrRecord] = []

    def can_accept(self) -> bool:
        return len(self.intake) < self.depth

    def dispatch(self, instr: VectorInstr, regs: Mapping[str, int], cycle: int) -> VInstrRecord:
        record = VInstrRecord(instr=instr, vl=0, sew=64, etype="fp", dispatched=cycle)
        if instr.op is VOp.VSETVL:
            record.result = min(int(regs.get(instr.rs, 0)), self.vlmax)
        elif instr.op is VOp.VEXT:
            record.result = 0
        self.intake.append(record)
        self.records.append(record)
        return record

    def result_ready(self, record: VInstrRecord, cycle: int) -> bool:
        return record.completed is not None and record.completed < cycle

    def acknowledged(self, record: VInstrRecord, cycle: int) -> bool:
        return record.acknowledged is not None and record.acknowledged <= cycle

    def stores_pending(self, cycle: int) -> bool:
        return False

    def step(self, cycle: int) -> None:
        if self.intake and self.intake[0].dispatched < cycle:
            record = self.intake.popleft()
            record.acknowledged = record.completed = cycle

    @property
    def idle(self) -> bool:
        return not self.intake


class ScalarCore:
    """
    In-order, one issue per cycle. A register written by ``ld`` becomes
    readable ``ld_latency + 1`` cycles after the load issued; VEXT and VSETVL
    hold the core until the vector unit answers. A vector instruction is only
    dispatched once the previous one has been acknowledged, and with the store
    fence enabled a scalar ``ld`` waits for outstanding vector stores.
    """

    def __init__(self, program: Sequence[ScalarInstr], sink: VectorSink,
                 model: Optional[ScalarPipeModel] = None, memory: Optional[MemoryModel] = None,
                 regs: Optional[Mapping[str, int]] = None):
        self.program = list(program)
        self.sink = sink
        self.model = model or ScalarPipeModel()
        self.memory = memory
        self.regs: Dict[str, int] = dict(regs or {})
        self.regs["zero"] = 0
        self.ready: Dict[str, int] = {}
        self.pc = 0
        self.waiting: Optional[VInstrRecord] = None
        self.last_vector: Optional[VInstrRecord] = None
        self.timeline: List[IssueEvent] = []
        self.dispatched: List[VInstrRecord] = []
        self.stalls: Counter = Counter()
        self.load_bytes = 0

    @property
    def finished(self) -> bool:
        return self.pc >= len(self.program) and self.waiting is None

    def _write(self, reg: Optional[str], value: int, ready: int) -> None:
        if reg is None or reg == "zero":
            return
        self.regs[reg] = value & MASK64
        self.ready[reg] = ready

    def step(self, cycle: int) -> None:
        if self.waiting is not None:
            if not self.sink.result_ready(self.waiting, cycle):
                self.stalls["vector result"] += 1
                return
            self._write(self.waiting.instr.rd, self.waiting.result or 0, cycle)
            self.waiting = None
        if self.pc >= len(self.program):
            return

        instr = self.program[self.pc]
        if any(self.ready.get(src, 0) > cycle for src in instr.sources):
            self.stalls["data"] += 1
            return

        if instr.op is SOp.VDISPATCH:
            if self.last_vector is not None and not self.sink.acknowledged(self.last_vector, cycle):
                self.stalls["acknowledge"] += 1
                return
            if not self.sink.can_accept():
                self.stalls["intake full"] += 1
                return
            record = self.sink.dispatch(instr.vinstr, self.regs, cycle)
            self.dispatched.append(record)
            self.last_vector = record
            if instr.vinstr.rd is not None:
                self.waiting = record
                self.ready[instr.vinstr.rd] = 1 << 62
        elif instr.op is SOp.LD:
            if self.model.store_fence and self.sink.stores_pending(cycle):
                self.stalls["store fence"] += 1
                return
            address = self.regs.get(instr.rs1, 0) + instr.imm
            value = self.memory.read_word(address) if self.memory is not None else 0
            self.load_bytes += 8
            self._write(instr.rd, value, cycle + self.model.ld_latency + 1)
        elif instr.op is SOp.ADD:
            operand = self.regs.get(instr.rs2, 0) if instr.rs2 is not None else instr.imm
            self._write(instr.rd, self.regs.get(instr.rs1, 0) + operand, cycle + 1)

        mnemonic = instr.vinstr.op.value if instr.vinstr is not None else instr.op.value
        self.timeline.append(IssueEvent(iid=instr.iid, mnemonic=mnemonic, cycle=cycle))
        self.pc += 1

    def dispatch_events(self) -> List[DispatchEvent]:
        events = [record.event() for record in self.dispatched]
        for before, after in zip(events, events[1:]):
            if after.iid <= before.iid:
                raise InvariantViolation(f"dispatch reordered: iid {after.iid} after {before.iid}")
        return events


def run_scalar_stream(program: Sequence[ScalarInstr], sink: Optional[VectorSink] = None,
                      model: Optional[ScalarPipeModel] = None, memory: Optional[MemoryModel] = None,
                      regs: Optional[Mapping[str, int]] = None,
                      max_cycles: int = 10_000_000) -> List[IssueEvent]:
    """Run ``program`` against ``sink`` (an ideal one by default) and return the issue timeline"""
    model = model or ScalarPipeModel()
    sink = sink if sink is not None else IdealSink(model.intake_depth)
    core = ScalarCore(program, sink, model, memory, regs)
    cycle = 0
    while not core.finished:
        cycle += 1
        if cycle > max_cycles:
            raise InvariantViolation(f"scalar stream did not finish within {max_cycles} cycles")
        sink.step(cycle)
        core.step(cycle)
    logger.debug("scalar stream of %d instructions issued in %d cycles (stalls: %s)",
                 len(core.program), cycle, dict(core.stalls))
    return core.timeline


def measure_issue_gap(timeline: Sequence[IssueEvent], mnemonic: Optional[str] = None,
                      skip: int = 1) -> IssueGap:
    """
    Cycles between successive issues of ``mnemonic`` (all issues when None).

    The first ``skip`` gaps are warm-up and dropped when enough samples
    remain. The steady-state gap is the most frequent one.
    """
    cycles = [event.cycle for event in timeline if mnemonic is None or event.mnemonic == mnemonic]
    if len(cycles) < 2:
        raise MeasurementError(f"need two issues of {mnemonic or 'any instruction'}, found {len(cycles)}")
    gaps = [after - before for before, after in zip(cycles, cycles[1:])]
    if len(gaps) > skip:
        gaps = gaps[skip:]
    counts = Counter(gaps)
    top = max(counts.values())
    mode = min(gap for gap, count in counts.items() if count == top)
    return IssueGap(mean=sum(gaps) / len(gaps), max=max(gaps), min=min(gaps), mode=mode,
                    samples=len(gaps))
