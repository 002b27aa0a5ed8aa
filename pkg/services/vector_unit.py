"""
Global pieces of the vector unit: main sequencer with hazard bookkeeping,
load/store unit with the wide memory port, slide unit and the ideal memory.
"""

import logging
from collections import OrderedDict, deque
from dataclasses import dataclass, field
from typing import Deque, Dict, List, Literal, Mapping, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from models.errors import AlignmentError, ElementRangeError, InvariantViolation
from models.isa import LOADS, STORES, VecConfig, VectorInstr, VOp, set_vector_length
from models.machine import MachineConfig
from models.report import DispatchEvent
from services.lane import (FunctionalUnit, Lane, LaneInstrState, OperandStream, UnitKind,
                           execute_bundle, lane_bundles, unit_for)
from services.vrf import Priority, VrfState

_ELEMENT_DTYPES = {1: np.uint8, 2: np.uint16, 4: np.uint32, 8: np.uint64}


class AddressStream(BaseModel):
    """Address pattern of one vector memory instruction"""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    mode: Literal["unit", "strided", "indexed"]
    base: int = Field(ge=0)
    count: int = Field(ge=0)
    size: int = 8
    stride: int = 0
    indices: Tuple[int, ...] = ()


def generate_addresses(stream: AddressStream) -> np.ndarray:
    """Byte address of every element, in element order"""
    k = np.arange(stream.count, dtype=np.int64)
    if stream.mode == "unit":
        addresses = stream.base + k * stream.size
    elif stream.mode == "strided":
        addresses = stream.base + k * stream.stride
    else:
        if len(stream.indices) < stream.count:
            raise ElementRangeError(f"{stream.count} elements but {len(stream.indices)} indices")
        addresses = stream.base + np.asarray(stream.indices[:stream.count], dtype=np.int64)
    misaligned = addresses % stream.size != 0
    if misaligned.any():
        first = int(addresses[np.argmax(misaligned)])
        raise AlignmentError(f"address {first:#x} is not aligned to {stream.size} bytes")
    if (addresses < 0).any():
        raise AlignmentError("negative address")
    return addresses


def coalesce(addresses: Sequence[int], size: int = 8) -> List[Tuple[int, int]]:
    """Maximal runs of contiguous elements as (start address, length in bytes)"""
    bursts: List[Tuple[int, int]] = []
    for address in addresses:
        address = int(address)
        if bursts and bursts[-1][0] + bursts[-1][1] == address:
            start, length = bursts[-1]
            bursts[-1] = (start, length + size)
        else:
            bursts.append((address, size))
    return bursts


def burst_cycles(bursts: Sequence[Tuple[int, int]], width_bytes: int, size: int = 8) -> int:
    """Data cycles of a burst list: a single burst streams at port width, anything else goes one element per cycle"""
    if len(bursts) == 1:
        return -(-bursts[0][1] // width_bytes)
    return sum(length // size for _, length in bursts)


class MemoryModel:
    """
    Ideal byte-addressed memory behind a port of ``width_bytes`` per cycle
    with a fixed ``latency``. Storage grows on demand.
    """

    def __init__(self, width_bytes: int, latency: int, trace: bool = False):
        self.width_bytes = width_bytes
        self.latency = latency
        self.storage = np.zeros(1 << 16, dtype=np.uint8)
        self.read_bytes = 0
        self.write_bytes = 0
        self.cycle_read = 0
        self.cycle_write = 0
        self.trace = trace
        self.trace_rows: List[Tuple[int, int]] = []
        self.logger = logging.getLogger(__name__)

    def _ensure(self, end: int) -> None:
        if end > len(self.storage):
            size = len(self.storage)
            while size < end:
                size *= 2
            grown = np.zeros(size, dtype=np.uint8)
            grown[:len(self.storage)] = self.storage
            self.storage = grown

    def read_elements(self, addresses: np.ndarray, size: int = 8) -> np.ndarray:
        addresses = np.asarray(addresses, dtype=np.int64)
        if not len(addresses):
            return np.zeros(0, dtype=np.uint64)
        self._ensure(int(addresses.max()) + size)
        index = addresses[:, None] + np.arange(size)
        raw = np.ascontiguousarray(self.storage[index])
        return raw.view(np.dtype(_ELEMENT_DTYPES[size]).newbyteorder("<")).reshape(-1).astype(np.uint64)

    def write_elements(self, addresses: np.ndarray, values: np.ndarray, size: int = 8) -> None:
        addresses = np.asarray(addresses, dtype=np.int64)
        if not len(addresses):
            return
        self._ensure(int(addresses.max()) + size)
        typed = np.asarray(values, dtype=np.uint64).astype(np.dtype(_ELEMENT_DTYPES[size]).newbyteorder("<"))
        index = addresses[:, None] + np.arange(size)
        self.storage[index] = typed.view(np.uint8).reshape(-1, size)

    def write_f64(self, address: int, values: np.ndarray) -> None:
        values = np.asarray(values, dtype="<f8")
        self.write_elements(address + 8 * np.arange(len(values)), values.view(np.uint64))

    def read_f64(self, address: int, count: int) -> np.ndarray:
        return self.read_elements(address + 8 * np.arange(count)).view(np.float64)

    def read_word(self, address: int) -> int:
        if address % 8:
            raise AlignmentError(f"scalar load from unaligned address {address:#x}")
        return int(self.read_elements(np.array([address]))[0])

    def load_image(self, path: str, base: int = 0) -> int:
        """Copy a flat little-endian binary file into memory at ``base``"""
        data = np.fromfile(path, dtype=np.uint8)
        self._ensure(base + len(data))
        self.storage[base:base + len(data)] = data
        self.logger.info("Loaded %d bytes from %s at %#x", len(data), path, base)
        return len(data)

    def save_image(self, path: str, base: int, length: int) -> None:
        self._ensure(base + length)
        self.storage[base:base + length].tofile(path)

    def begin_cycle(self) -> None:
        self.cycle_read = 0
        self.cycle_write = 0

    def transfer(self, nbytes: int, write: bool) -> None:
        if write:
            self.cycle_write += nbytes
            self.write_bytes += nbytes
        else:
            self.cycle_read += nbytes
            self.read_bytes += nbytes
        if self.cycle_read + self.cycle_write > self.width_bytes:
            raise InvariantViolation(
                f"memory port moved {self.cycle_read + self.cycle_write} B in one cycle, "
                f"limit {self.width_bytes}")

    def end_cycle(self, cycle: int) -> None:
        moved = self.cycle_read + self.cycle_write
        if self.trace and moved:
            self.trace_rows.append((cycle, moved))

    @property
    def remaining(self) -> int:
        return self.width_bytes - self.cycle_read - self.cycle_write


@dataclass(eq=False)
class VInstrRecord:
    """A dispatched vector instruction with everything resolved at dispatch"""

    instr: VectorInstr
    vl: int
    sew: int
    etype: str
    dispatched: int
    out_sew: int = 64
    scalar_reads: Tuple[bool, ...] = ()
    addresses: Optional[np.ndarray] = None
    result: Optional[int] = None
    flops: int = 0
    acknowledged: Optional[int] = None
    completed: Optional[int] = None
    state: Optional[LaneInstrState] = None

    @property
    def iid(self) -> int:
        return self.instr.iid

    @property
    def unit(self) -> Optional[UnitKind]:
        return unit_for(self.instr.op, self.etype)

    def event(self) -> DispatchEvent:
        return DispatchEvent(iid=self.iid, dispatched=self.dispatched,
                             acknowledged=-1 if self.acknowledged is None else self.acknowledged)


@dataclass
class IssueOutcome:
    issued: bool
    reason: str = ""
    blocking: Optional[int] = None


@dataclass
class MainSequencerState:
    """In-flight instructions and the per-register ownership table"""

    max_inflight: int = 8
    unit_depth: int = 4
    inflight: "OrderedDict[int, VInstrRecord]" = field(default_factory=OrderedDict)
    writer: Dict[int, VInstrRecord] = field(default_factory=dict)
    readers: Dict[int, List[VInstrRecord]] = field(default_factory=dict)
    unit_count: Dict[UnitKind, int] = field(default_factory=dict)
    stalls: Dict[str, int] = field(default_factory=dict)

    def retire(self, record: VInstrRecord) -> None:
        self.inflight.pop(record.iid, None)
        dest = record.instr.writes
        if dest is not None and self.writer.get(dest) is record:
            del self.writer[dest]
        for reg in record.instr.reads:
            readers = self.readers.get(reg, [])
            if record in readers:
                readers.remove(record)
        if record.unit is not None:
            self.unit_count[record.unit] -= 1


def _stall(state: MainSequencerState, reason: str, blocking: Optional[int]) -> IssueOutcome:
    state.stalls[reason] = state.stalls.get(reason, 0) + 1
    return IssueOutcome(False, reason, blocking)


def _structural_hazard(record: VInstrRecord, state: MainSequencerState) -> Optional[IssueOutcome]:
    if len(state.inflight) >= state.max_inflight:
        return _stall(state, "sequencer full", next(iter(state.inflight)))
    unit = record.unit
    if unit is None:
        return None
    if state.unit_count.get(unit, 0) >= state.unit_depth:
        oldest = next(r.iid for r in state.inflight.values() if r.unit is unit)
        return _stall(state, f"{unit.value} tracker full", oldest)
    shared = {UnitKind.ALU: UnitKind.SLDU, UnitKind.SLDU: UnitKind.ALU}.get(unit)
    if shared is not None and state.unit_count.get(shared, 0):
        other = next(r.iid for r in state.inflight.values() if r.unit is shared)
        return _stall(state, "alu/sldu shared path busy", other)
    return None


def _operand_queues(record: VInstrRecord) -> List[Tuple[int, str, Priority]]:
    """(register, queue, priority) of every vector source read in the lane"""
    op = record.instr.op
    unit = record.unit
    if op in STORES:
        sources = [(record.instr.vd, "vlsu0", Priority.LOW)]
        if op is VOp.VSTX:
            sources.append((record.instr.vs[0], "vlsu1", Priority.LOW))
        return sources
    if op is VOp.VLDX:
        return [(record.instr.vs[0], "vlsu1", Priority.LOW)]
    if unit is UnitKind.SLDU:
        return [(reg, "alu0", Priority.HIGH) for reg in record.instr.vs]
    prefix = "fpu" if unit in (UnitKind.FPU, UnitKind.MUL) else "alu"
    return [(reg, f"{prefix}{i}", Priority.HIGH) for i, reg in enumerate(record.instr.vs)]


def build_lane_state(record: VInstrRecord, state: MainSequencerState,
                     machine: MachineConfig) -> LaneInstrState:
    """Per-lane work of an instruction, linked to the producers and readers it depends on"""
    instr = record.instr
    op = instr.op
    lanes = machine.lanes
    unit = record.unit
    in_bundles = lane_bundles(record.vl, lanes, record.sew)
    elems = lane_bundles(record.vl, lanes, record.out_sew)
    latency, pipelined, slide_rows = 1, True, 0
    if unit is UnitKind.FPU:
        latency = machine.fpu_depth
        if op in (VOp.VFDIV, VOp.VFSQRT):
            latency, pipelined = machine.div_latency, False
    elif unit is UnitKind.MUL:
        latency = machine.mul_depth
    elif unit is UnitKind.ALU:
        latency = machine.alu_depth
    if op is VOp.VINS:
        elems = 1
    elif op is VOp.VEXT:
        elems = 0
    elif op is VOp.VSLIDE:
        slide_rows = lane_bundles(instr.imm, lanes, record.sew)

    streams = []
    for position, (reg, queue, priority) in enumerate(_operand_queues(record)):
        scalar = position < len(record.scalar_reads) and record.scalar_reads[position]
        total = 1 if scalar or op is VOp.VEXT else in_bundles
        first_word = (instr.imm // lanes) * record.sew // 64 if op is VOp.VEXT else 0
        if record.vl == 0:
            total = 0
        producer = state.writer.get(reg)
        streams.append(OperandStream(
            register=reg, queue=queue, total=total, scalar=scalar, first_word=first_word,
            priority=priority,
            producer=producer.state if producer is not None and producer.state is not None else None))

    lane_state = LaneInstrState(iid=instr.iid, op=op, unit=unit, elems=elems, dest=instr.writes,
                                streams=streams, latency=latency, pipelined=pipelined,
                                slide_rows=slide_rows)
    dest = instr.writes
    if dest is not None:
        earlier = state.writer.get(dest)
        if earlier is not None and earlier.state is not None:
            lane_state.waw_on.append(earlier.state)
        for reader in state.readers.get(dest, []):
            if reader.state is None:
                continue
            for stream in reader.state.streams:
                if stream.register == dest:
                    lane_state.war_on.append((reader.state, stream))
    return lane_state


def issue_to_lanes(record: VInstrRecord, state: MainSequencerState, machine: MachineConfig,
                   lane: Optional[Lane] = None) -> IssueOutcome:
    """
    Issue the instruction at the head of the intake queue.

    Data hazards never stall: they are recorded as dependencies and resolved
    element by element in the lane. Structural hazards stall with the id of
    the instruction in the way.
    """
    hazard = _structural_hazard(record, state)
    if hazard is not None:
        return hazard
    unit = record.unit
    if unit is not None:
        record.state = build_lane_state(record, state, machine)
        if lane is not None:
            lane.accept(record.state)
        state.unit_count[unit] = state.unit_count.get(unit, 0) + 1
        state.inflight[record.iid] = record
        dest = record.instr.writes
        if dest is not None:
            state.writer[dest] = record
        for reg in record.instr.reads:
            state.readers.setdefault(reg, []).append(record)
    return IssueOutcome(True)


def slide_execute(instr: VectorInstr, vrf: VrfState, vl: int, sew: int,
                  scalar: int = 0, position: int = 0) -> Optional[int]:
    """
    Functional effect of a slide-unit instruction on the register file.

    VSLIDE writes ``vd[i] = vs[i + amount]`` where the source is in range and
    leaves the other elements untouched; VINS at position 0 broadcasts the
    scalar to the first position of every lane; VEXT returns the element.
    """
    if instr.op is VOp.VSLIDE:
        amount = instr.imm
        if amount < 0:
            raise ElementRangeError(f"slide amount {amount} is negative")
        if amount >= vl:
            return None
        source = vrf.read(instr.vs[0], vl, sew)
        target = vrf.read(instr.vd, vl, sew)
        target[:vl - amount] = source[amount:vl]
        vrf.write(instr.vd, target, sew)
        return None
    if instr.op is VOp.VINS:
        if position == 0:
            vrf.write_scalar(instr.vd, scalar)
        else:
            if position >= vl:
                raise ElementRangeError(f"insert position {position} outside vl={vl}")
            values = vrf.read(instr.vd, vl, sew)
            values[position] = scalar
            vrf.write(instr.vd, values, sew)
        return None
    if instr.op is VOp.VEXT:
        reg = instr.vs[0]
        if vrf.is_scalar[reg]:
            return vrf.read_scalar(reg, sew)
        if not 0 <= instr.imm < vl:
            raise ElementRangeError(f"extract index {instr.imm} outside vl={vl}")
        return int(vrf.read(reg, vl, sew)[instr.imm])
    raise ValueError(f"{instr.op.value} is not a slide-unit instruction")


@dataclass(eq=False)
class MemJob:
    """Port-side progress of one vector memory instruction"""

    record: VInstrRecord
    write: bool
    total: int
    size: int
    row_bytes: int
    burst: bool
    start: int
    moved: int = 0
    popped: int = 0
    index_rows: Deque[Tuple[int, int]] = field(default_factory=deque)
    indexed: bool = False

    @property
    def finished(self) -> bool:
        return self.moved >= self.total

    @property
    def drained(self) -> bool:
        stream = self.record.state.streams[0]
        return stream.consumed >= stream.total


class VectorUnit:
    """
    The coprocessor as seen from the scalar core: an intake queue, the main
    sequencer, the lane timing model, the load/store unit and memory.

    Instructions execute functionally when dispatched (program order); the
    timing model then replays them cycle by cycle.
    """

    def __init__(self, machine: MachineConfig, memory: Optional[MemoryModel] = None,
                 trace: bool = False):
        self.machine = machine
        self.memory = memory or MemoryModel(machine.mem_bytes_per_cycle, machine.mem_latency, trace)
        self.vrf = VrfState(machine.lanes, machine.vrf)
        self.lane = Lane(machine, trace=trace)
        self.sequencer = MainSequencerState(machine.max_inflight, machine.unit_queue_depth)
        self.vcfg = VecConfig.for_machine(machine.lanes, vrf_bytes_per_lane=machine.vrf.bytes_per_lane)
        self.intake: Deque[VInstrRecord] = deque()
        self.records: List[VInstrRecord] = []
        self.loads: Deque[MemJob] = deque()
        self.stores: Deque[MemJob] = deque()
        self.open_stores: Deque[VInstrRecord] = deque()
        self.indexed_jobs = 0
        self.flops = 0
        self.logger = logging.getLogger(__name__)

    # scalar-core side

    def can_accept(self) -> bool:
        return len(self.intake) < self.machine.intake_depth

    def dispatch(self, instr: VectorInstr, regs: Mapping[str, int], cycle: int) -> VInstrRecord:
        """Take one instruction from the scalar core and execute it functionally"""
        if not self.can_accept():
            raise InvariantViolation(f"dispatch of iid {instr.iid} into a full intake queue")
        record = self.execute(instr, regs, cycle)
        self.intake.append(record)
        if instr.op in STORES:
            self.open_stores.append(record)
        self.records.append(record)
        return record

    def execute(self, instr: VectorInstr, regs: Mapping[str, int], cycle: int = 0) -> VInstrRecord:
        op = instr.op
        cfg = self.vcfg
        record = VInstrRecord(instr=instr, vl=cfg.vl, sew=cfg.sew, etype=cfg.etype,
                              dispatched=cycle, out_sew=cfg.sew)

        def value(reg: Optional[str]) -> int:
            return int(regs.get(reg, 0)) if reg not in (None, "zero") else 0

        if op is VOp.VSETVL:
            vlmax = VecConfig.compute_vlmax(self.machine.lanes, instr.sew,
                                            self.machine.vrf.bytes_per_lane)
            base = VecConfig(vl=0, sew=instr.sew, vlmax=vlmax, etype=instr.etype)
            self.vcfg = set_vector_length(value(instr.rs), base)
            record.vl, record.sew, record.etype = self.vcfg.vl, self.vcfg.sew, self.vcfg.etype
            record.result = self.vcfg.vl
            return record

        vl, sew, size = cfg.vl, cfg.sew, cfg.sew // 8
        record.scalar_reads = tuple(self.vrf.is_scalar[reg] for reg, _, _ in _operand_queues(record)) \
            if record.unit is not None else ()
        if op in LOADS or op in STORES:
            base = value(instr.rs) + instr.imm
            if op in (VOp.VLD, VOp.VST):
                stream = AddressStream(mode="unit", base=base, count=vl, size=size)
            elif op in (VOp.VLDS, VOp.VSTS):
                stream = AddressStream(mode="strided", base=base, count=vl, size=size,
                                       stride=value(instr.rs2))
            else:
                indices = tuple(int(i) for i in self.vrf.read(instr.vs[0], vl, sew))
                stream = AddressStream(mode="indexed", base=base, count=vl, size=size, indices=indices)
            record.addresses = generate_addresses(stream)
            if op in LOADS:
                self.vrf.write(instr.vd, self.memory.read_elements(record.addresses, size), sew)
            else:
                self.memory.write_elements(record.addresses, self.vrf.read(instr.vd, vl, sew), size)
        elif op in (VOp.VINS, VOp.VEXT, VOp.VSLIDE):
            record.result = slide_execute(instr, self.vrf, vl, sew, value(instr.rs), value(instr.rs2))
        else:
            unit = FunctionalUnit(record.unit, 1)
            operands = [self.vrf.read(reg, vl, sew) for reg in instr.vs]
            out = execute_bundle(unit, op, operands, sew, cfg.etype)
            if op in (VOp.VWADD, VOp.VWMUL):
                record.out_sew = 2 * sew
            self.vrf.write(instr.vd, out, record.out_sew, vl)
            if cfg.etype == "fp":
                record.flops = vl * (2 if op is VOp.VMADD else 1)
                self.flops += record.flops
        return record

    # cycle loop

    def step(self, cycle: int) -> None:
        self._acknowledge(cycle)
        self._issue(cycle)
        self._memory(cycle)
        self.lane.step(cycle)
        self._retire(cycle)

    def _acknowledge(self, cycle: int) -> None:
        """Non-memory instructions are acknowledged once decoded, one cycle after dispatch"""
        for record in self.intake:
            if record.acknowledged is None and record.dispatched < cycle \
                    and record.instr.op not in LOADS and record.instr.op not in STORES:
                record.acknowledged = cycle

    def _issue(self, cycle: int) -> None:
        if not self.intake or self.intake[0].dispatched >= cycle:
            return
        record = self.intake[0]
        outcome = issue_to_lanes(record, self.sequencer, self.machine, self.lane)
        if not outcome.issued:
            return
        self.intake.popleft()
        op = record.instr.op
        if op in LOADS or op in STORES:
            record.acknowledged = cycle + self.machine.mem_ack_latency
        elif record.acknowledged is None:
            record.acknowledged = cycle
        if record.state is None:
            record.completed = cycle
            return
        if op in LOADS or op in STORES:
            self._start_memory(record, cycle)
        self.logger.debug("issue iid %d %s at cycle %d", record.iid, op.value, cycle)

    def _start_memory(self, record: VInstrRecord, cycle: int) -> None:
        op = record.instr.op
        size = record.sew // 8
        bursts = coalesce(record.addresses, size) if record.vl else []
        job = MemJob(record=record, write=op in STORES, total=record.vl * size, size=size,
                     row_bytes=8 * self.machine.lanes, burst=len(bursts) <= 1, start=cycle,
                     indexed=op in (VOp.VLDX, VOp.VSTX))
        (self.stores if job.write else self.loads).append(job)
        self.indexed_jobs += job.indexed

    def _finish(self, job: MemJob) -> None:
        if job.write:
            job.record.state.released = True
        self.indexed_jobs -= job.indexed

    def _pop_stream(self, job: MemJob, queue: str) -> bool:
        stream = next((s for s in job.record.state.streams if s.queue == queue), None)
        entries = self.lane.queues[queue]
        if stream is None or not len(entries) or entries.entries[0].owner is not stream:
            return False
        self.lane.queues.queue_pop(queue)
        stream.consumed += 1
        return True

    def _element_budget(self, job: MemJob, cycle: int) -> int:
        """Bytes whose address is known early enough to be served this cycle"""
        if not job.indexed:
            return job.total if cycle >= job.start + (0 if job.write else self.memory.latency) else 0
        ready = 0
        for popped_at, elements in job.index_rows:
            if cycle >= popped_at + (0 if job.write else self.memory.latency):
                ready = elements
        return min(job.total, ready * job.size)

    def _memory(self, cycle: int) -> None:
        memory = self.memory
        memory.begin_cycle()
        if self.indexed_jobs:
            for jobs in (self.loads, self.stores):
                for job in jobs:
                    if job.indexed and self._pop_stream(job, "vlsu1"):
                        per_row = self.machine.lanes * 64 // job.record.sew
                        known = job.index_rows[-1][1] if job.index_rows else 0
                        job.index_rows.append((cycle, min(job.record.vl, known + per_row)))

        for job in self.loads:
            if memory.remaining <= 0:
                break
            state = job.record.state
            allowed = (state.arrived + self.lane.load_space(state)) * job.row_bytes - job.moved
            amount = min(memory.remaining, job.total - job.moved, allowed,
                         self._element_budget(job, cycle) - job.moved)
            if not job.burst:
                amount = min(amount, job.size)
            if amount <= 0:
                continue
            memory.transfer(amount, write=False)
            job.moved += amount
            state.arrived = state.elems if job.finished else min(state.elems, job.moved // job.row_bytes)

        if self.stores:
            job = self.stores[0]
            if self._pop_stream(job, "vlsu0"):
                job.popped += 1
        for job in self.stores:
            if memory.remaining <= 0:
                break
            stream = job.record.state.streams[0]
            popped_bytes = job.total if stream.consumed >= stream.total else job.popped * job.row_bytes
            amount = min(memory.remaining, popped_bytes - job.moved,
                         self._element_budget(job, cycle) - job.moved)
            if not job.burst:
                amount = min(amount, job.size)
            if amount <= 0:
                continue
            memory.transfer(amount, write=True)
            job.moved += amount

        while self.stores and self.stores[0].finished and self.stores[0].drained:
            self._finish(self.stores.popleft())
        while self.loads and self.loads[0].finished:
            self._finish(self.loads.popleft())
        memory.end_cycle(cycle)

    def _retire(self, cycle: int) -> None:
        for record in list(self.sequencer.inflight.values()):
            if record.state is not None and record.state.done:
                # a short access can drain before its address check acknowledges it
                record.completed = max(cycle, record.acknowledged)
                self.sequencer.retire(record)
                self.logger.debug("retire iid %d at cycle %d", record.iid, cycle)

    def result_ready(self, record: VInstrRecord, cycle: int) -> bool:
        """Whether the scalar core may consume the result of ``record`` in ``cycle``"""
        return record.completed is not None and record.completed < cycle

    def acknowledged(self, record: VInstrRecord, cycle: int) -> bool:
        return record.acknowledged is not None and record.acknowledged <= cycle

    def stores_pending(self, cycle: int) -> bool:
        """Whether a dispatched vector store has not finished writing memory before ``cycle``"""
        while self.open_stores and self.result_ready(self.open_stores[0], cycle):
            self.open_stores.popleft()
        return any(not self.result_ready(record, cycle) for record in self.open_stores)

    @property
    def idle(self) -> bool:
        return not self.intake and not self.sequencer.inflight and self.lane.idle \
            and not self.loads and not self.stores
