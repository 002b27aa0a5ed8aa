"""
Lane execution engine: numeric execution of result bundles and the per-cycle
lane sequencer that throttles operand requests to implement chaining.
"""

import logging
from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from typing import Deque, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from models.errors import ConfigError, InvariantViolation
from models.isa import LOADS, STORES, WIDENING_OPS, VOp
from models.machine import MachineConfig
from services.vrf import (BankArbiter, BankRequest, OperandQueueSet, Priority, QueueEntry,
                          local_bank)

_FLOAT_TYPES = {16: (np.uint16, np.float16), 32: (np.uint32, np.float32), 64: (np.uint64, np.float64)}
_SIGNED = {8: np.int8, 16: np.int16, 32: np.int32, 64: np.int64}
_UNSIGNED = {8: np.uint8, 16: np.uint16, 32: np.uint32, 64: np.uint64}


class UnitKind(str, Enum):
    ALU = "alu"
    MUL = "mul"
    FPU = "fpu"
    SLDU = "sldu"
    LOAD = "load"
    STORE = "store"


@dataclass(frozen=True)
class FunctionalUnit:
    """Pipelined unit producing one 64-bit bundle per cycle whatever the element width"""

    kind: UnitKind
    depth: int
    throughput_bits: int = 64

    def results_per_bundle(self, sew: int) -> int:
        return self.throughput_bits // sew


def unit_for(op: VOp, etype: str) -> Optional[UnitKind]:
    """Functional unit an opcode runs on; ``None`` for configuration instructions"""
    if op in LOADS:
        return UnitKind.LOAD
    if op in STORES:
        return UnitKind.STORE
    if op in (VOp.VINS, VOp.VEXT, VOp.VSLIDE):
        return UnitKind.SLDU
    if op is VOp.VSETVL:
        return None
    if op in (VOp.VFDIV, VOp.VFSQRT):
        if etype != "fp":
            raise ConfigError(f"{op.value} needs floating-point elements")
        return UnitKind.FPU
    if etype == "fp":
        return UnitKind.FPU
    return UnitKind.ALU if op in (VOp.VADD, VOp.VWADD) else UnitKind.MUL


def lane_bundles(vl: int, lanes: int, sew: int = 64) -> int:
    """64-bit bundles the busiest lane handles for ``vl`` elements"""
    per_lane = -(-vl // lanes)
    return -(-per_lane * sew // 64)


def _float_view(bits: np.ndarray, sew: int) -> np.ndarray:
    if sew not in _FLOAT_TYPES:
        raise ConfigError(f"no floating-point format with sew={sew}")
    raw, flt = _FLOAT_TYPES[sew]
    return bits.astype(raw).view(flt)


def _float_bits(values: np.ndarray, sew: int) -> np.ndarray:
    raw, flt = _FLOAT_TYPES[sew]
    return values.astype(flt).view(raw).astype(np.uint64)


def _signed(bits: np.ndarray, sew: int) -> np.ndarray:
    return bits.astype(_UNSIGNED[sew]).view(_SIGNED[sew]).astype(np.int64)


def execute_bundle(unit: FunctionalUnit, op: VOp, operands: Sequence[np.ndarray],
                   sew: int = 64, etype: str = "fp") -> np.ndarray:
    """
    Compute the raw result bits of ``op`` on element arrays of raw bits.

    Floating point uses host IEEE arithmetic in the operation order
    ``vs1 * vs2 + vs3``; integers wrap at the element width. Widening ops
    return elements of width ``2 * sew``.
    """
    expected = unit_for(op, etype)
    if expected is not unit.kind:
        raise ConfigError(f"{op.value} ({etype}) does not run on the {unit.kind.value} unit")
    operands = [np.asarray(o, dtype=np.uint64) for o in operands]

    if op in WIDENING_OPS:
        if sew >= 64:
            raise ConfigError(f"{op.value} cannot promote sew={sew}")
        a, b = (_signed(o, sew) for o in operands[:2])
        out = a + b if op is VOp.VWADD else a * b
        return out.astype(np.uint64) & np.uint64((1 << (2 * sew)) - 1) \
            if 2 * sew < 64 else out.astype(np.uint64)

    if etype == "fp":
        values = [_float_view(o, sew) for o in operands]
        with np.errstate(all="ignore"):
            if op is VOp.VMADD:
                out = values[0] * values[1] + values[2]
            elif op is VOp.VADD:
                out = values[0] + values[1]
            elif op is VOp.VMUL:
                out = values[0] * values[1]
            elif op is VOp.VFDIV:
                out = values[0] / values[1]
            elif op is VOp.VFSQRT:
                out = np.sqrt(values[0])
            else:
                raise ConfigError(f"{op.value} is not an arithmetic opcode")
        return _float_bits(out, sew)

    mask = np.uint64((1 << sew) - 1) if sew < 64 else np.uint64(0xFFFFFFFFFFFFFFFF)
    with np.errstate(over="ignore"):
        if op is VOp.VMADD:
            out = operands[0] * operands[1] + operands[2]
        elif op is VOp.VADD:
            out = operands[0] + operands[1]
        elif op is VOp.VMUL:
            out = operands[0] * operands[1]
        else:
            raise ConfigError(f"{op.value} is not an integer opcode")
    return out & mask


@dataclass(eq=False)
class OperandStream:
    """Reads of one source register by one instruction, in element order"""

    register: int
    queue: str
    total: int
    scalar: bool = False
    first_word: int = 0
    priority: Priority = Priority.HIGH
    producer: Optional["LaneInstrState"] = None
    owner: Optional["LaneInstrState"] = field(default=None, repr=False)
    requested: int = 0
    consumed: int = 0
    read_prev: int = 0

    @property
    def finished(self) -> bool:
        return self.requested >= self.total

    def war_progress(self) -> int:
        """Elements a later writer may overwrite; a scalar is latched by its single read"""
        if self.scalar:
            return self.total if self.requested >= self.total else 0
        return self.requested


@dataclass(eq=False)
class LaneInstrState:
    """One instruction resident in the lane sequencer"""

    iid: int
    op: VOp
    unit: UnitKind
    elems: int
    dest: Optional[int] = None
    streams: List[OperandStream] = field(default_factory=list)
    latency: int = 1
    pipelined: bool = True
    slide_rows: int = 0
    waw_on: List["LaneInstrState"] = field(default_factory=list)
    war_on: List[Tuple["LaneInstrState", OperandStream]] = field(default_factory=list)
    accepted: int = 0
    written: int = 0
    written_prev: int = 0
    arrived: int = 0
    buffered: int = 0
    released: bool = False
    done: bool = False
    done_cycle: Optional[int] = None

    @property
    def dependencies(self) -> set:
        deps = {s.producer.iid for s in self.streams if s.producer is not None}
        deps.update(w.iid for w in self.waw_on)
        deps.update(r.iid for r, _ in self.war_on)
        return deps

    @property
    def requested(self) -> int:
        if self.unit is UnitKind.LOAD:
            return self.arrived
        return max((s.requested for s in self.streams), default=self.accepted)

    @property
    def completed(self) -> int:
        return self.written

    def raw_ready(self, stream: OperandStream) -> bool:
        producer = stream.producer
        if producer is None or producer.done:
            return True
        k = stream.requested
        return k >= producer.elems or producer.written_prev > k

    def can_write(self, element: int) -> bool:
        for earlier in self.waw_on:
            if not earlier.done and earlier.written_prev <= element < earlier.elems:
                return False
        for reader, stream in self.war_on:
            if not reader.done and stream.read_prev <= element < stream.total:
                return False
        return True

    def is_complete(self) -> bool:
        if self.unit is UnitKind.STORE:
            return self.released
        if self.op is VOp.VEXT:
            return all(s.consumed >= s.total for s in self.streams)
        return self.written >= self.elems


def request_operands(queues: OperandQueueSet, heads: Iterable[OperandStream], banks: int,
                     requester_ids: Dict[str, int]) -> List[BankRequest]:
    """
    Bank read requests of the streams at the head of their queues for this cycle.

    Only streams at the head of their queue may ask; a chained stream asks for
    element ``k`` only once its producer had written ``k`` by the end of the
    previous cycle.
    """
    requests = []
    for stream in heads:
        state = stream.owner
        if stream.finished or queues[stream.queue].space() <= 0:
            continue
        if not state.raw_ready(stream):
            continue
        word = stream.first_word + (0 if stream.scalar else stream.requested)
        requests.append(BankRequest(
            requester=requester_ids[stream.queue],
            register=stream.register,
            row=word // banks,
            bank=local_bank(stream.register, word, banks),
            write=False,
            priority=stream.priority,
            owner=(state, stream),
        ))
    return requests


class ExecPipe:
    """
    In-order front end of a group of units sharing operand queues.

    Accepts at most one bundle per cycle, so units behind one pipe (FPU and
    MUL, ALU and slide unit) never accept in the same cycle. Results retire
    in acceptance order into the pipe's write-back queue.
    """

    def __init__(self, name: str, wb_queue: str, queues: OperandQueueSet, wb_depth: int):
        self.name = name
        self.wb_queue = wb_queue
        self.queues = queues
        self.wb_depth = wb_depth
        self.instrs: Deque[LaneInstrState] = deque()
        self.inflight: Deque[Tuple[int, LaneInstrState, int]] = deque()
        self.blocked_until = 0
        self.accepted_now: Optional[UnitKind] = None

    def retire(self, cycle: int) -> None:
        wb = self.queues[self.wb_queue]
        while self.inflight and self.inflight[0][0] <= cycle:
            _, state, element = self.inflight[0]
            if wb.space() <= 0:
                break
            self.inflight.popleft()
            wb.push(QueueEntry(element=element, producer=state.iid, owner=state))

    def _head(self) -> Optional[LaneInstrState]:
        while self.instrs:
            head = self.instrs[0]
            pending_reads = any(s.consumed < s.total for s in head.streams)
            if head.accepted >= head.elems and not pending_reads:
                self.instrs.popleft()
                continue
            return head
        return None

    def _credit(self, state: LaneInstrState) -> bool:
        wb = self.queues[self.wb_queue]
        return len(self.inflight) + len(wb) < max(state.latency, 1) + self.wb_depth

    def _pop(self, stream: OperandStream, expected: int) -> None:
        _, entry = self.queues.queue_pop(stream.queue)
        if entry is None or entry.element != expected:
            got = None if entry is None else entry.element
            raise InvariantViolation(f"{stream.queue}: expected element {expected}, got {got}")
        stream.consumed += 1

    def accept(self, cycle: int) -> None:
        self.accepted_now = None
        if cycle < self.blocked_until:
            return
        state = self._head()
        if state is None:
            return

        if state.op is VOp.VEXT:
            stream = state.streams[0]
            if len(self.queues[stream.queue]):
                self._pop(stream, 0)
                self.accepted_now = state.unit
            return

        if state.op is VOp.VSLIDE:
            stream = state.streams[0]
            queue = self.queues[stream.queue]
            while len(queue) and queue.entries[0].owner is stream:
                self._pop(stream, stream.consumed)
                state.buffered += 1
            need = min(stream.total, state.accepted + state.slide_rows + 1)
            if state.accepted >= state.elems or state.buffered < need or not self._credit(state):
                return
            self._issue(state, cycle)
            return

        if state.accepted >= state.elems or not self._credit(state):
            return
        j = state.accepted
        for stream in state.streams:
            need = 0 if stream.scalar else j * stream.total // state.elems
            queue = self.queues[stream.queue]
            if not len(queue):
                return
            if queue.entries[0].element != need:
                raise InvariantViolation(
                    f"iid {state.iid}: {stream.queue} holds element {queue.entries[0].element}, "
                    f"bundle {j} needs {need}")
        last = j == state.elems - 1
        for stream in state.streams:
            if stream.scalar:
                if last:
                    self._pop(stream, 0)
                continue
            need = j * stream.total // state.elems
            if last or (j + 1) * stream.total // state.elems != need:
                self._pop(stream, need)
        self._issue(state, cycle)

    def _issue(self, state: LaneInstrState, cycle: int) -> None:
        self.inflight.append((cycle + state.latency, state, state.accepted))
        state.accepted += 1
        self.accepted_now = state.unit
        if not state.pipelined:
            self.blocked_until = cycle + state.latency

    @property
    def idle(self) -> bool:
        return not self.instrs and not self.inflight


class Lane:
    """
    Timing model of one lane.

    Every lane runs the same instruction sequence on its share of the
    elements, so the vector unit steps a single lane sized for the busiest
    one. Each cycle: results retire into write-back queues, write-back and
    operand reads compete for the banks, granted reads fill the operand
    queues, and the units accept their next bundle.
    """

    LOAD_REQUESTER = 12

    def __init__(self, machine: MachineConfig, trace: bool = False):
        self.machine = machine
        self.banks = machine.vrf.banks
        self.queues = OperandQueueSet(machine.fpu_queue_depth, machine.alu_queue_depth,
                                      machine.vlsu_queue_depth, machine.wb_queue_depth)
        self.arbiter = BankArbiter(self.banks)
        self.requester_ids = {name: i for i, name in enumerate(self.queues.operand_queues)}
        self.requester_ids.update({"wb_fpu": 10, "wb_alu": 11})
        self.pipes = {
            "fpu": ExecPipe("fpu", "wb_fpu", self.queues, machine.wb_queue_depth),
            "alu": ExecPipe("alu", "wb_alu", self.queues, machine.wb_queue_depth),
        }
        self.resident: List[LaneInstrState] = []
        self.loads: Deque[LaneInstrState] = deque()
        self.pending_reads: Dict[str, Deque[OperandStream]] = {
            name: deque() for name in self.queues.operand_queues}
        self.busy_cycles: Dict[UnitKind, int] = {kind: 0 for kind in UnitKind}
        self.busy_now: Dict[UnitKind, int] = {kind: 0 for kind in UnitKind}
        self._busy_last: List[UnitKind] = []
        self._pipes = tuple(self.pipes.values())
        self._pending = tuple(self.pending_reads.values())
        self.trace = trace
        self.trace_rows: List[Tuple[int, int, str, int]] = []
        self.logger = logging.getLogger(__name__)

    def unit(self, kind: UnitKind) -> FunctionalUnit:
        depth = {UnitKind.FPU: self.machine.fpu_depth, UnitKind.MUL: self.machine.mul_depth,
                 UnitKind.ALU: self.machine.alu_depth}.get(kind, 1)
        return FunctionalUnit(kind, depth)

    def accept(self, state: LaneInstrState) -> None:
        if len(self.resident) >= self.machine.max_inflight:
            raise InvariantViolation(f"lane sequencer full, cannot take iid {state.iid}")
        self.resident.append(state)
        for stream in state.streams:
            stream.owner = state
            self.pending_reads[stream.queue].append(stream)
        if state.unit in (UnitKind.FPU, UnitKind.MUL):
            self.pipes["fpu"].instrs.append(state)
        elif state.unit in (UnitKind.ALU, UnitKind.SLDU):
            self.pipes["alu"].instrs.append(state)
        elif state.unit is UnitKind.LOAD:
            self.loads.append(state)
        self.logger.debug("lane accepts iid %d (%s, %d bundles)", state.iid, state.op.value, state.elems)

    def load_space(self, state: LaneInstrState) -> int:
        """Rows the load receive buffer can still take for ``state``"""
        return self.machine.load_buffer_depth - (state.arrived - state.written)

    def _snapshot(self) -> None:
        for state in self.resident:
            state.written_prev = state.written
            for stream in state.streams:
                if stream.read_prev < stream.total:
                    stream.read_prev = stream.war_progress()

    def _write_requests(self) -> List[BankRequest]:
        requests = []
        for pipe in self.pipes.values():
            wb = self.queues[pipe.wb_queue]
            if not len(wb):
                continue
            entry = wb.entries[0]
            state = entry.owner
            if not state.can_write(entry.element):
                continue
            requests.append(BankRequest(
                requester=self.requester_ids[pipe.wb_queue], register=state.dest,
                row=entry.element // self.banks, bank=local_bank(state.dest, entry.element, self.banks),
                write=True, priority=Priority.HIGH, owner=(pipe.wb_queue, state)))
        while self.loads and self.loads[0].written >= self.loads[0].elems:
            self.loads.popleft()
        if self.loads:
            state = self.loads[0]
            k = state.written
            if state.arrived > k and state.can_write(k):
                requests.append(BankRequest(
                    requester=self.LOAD_REQUESTER, register=state.dest, row=k // self.banks,
                    bank=local_bank(state.dest, k, self.banks), write=True,
                    priority=Priority.LOW, owner=("load", state)))
        return requests

    def _read_requests(self) -> List[BankRequest]:
        heads = []
        for pending in self._pending:
            while pending and pending[0].finished:
                pending.popleft()
            if pending:
                heads.append(pending[0])
        return request_operands(self.queues, heads, self.banks, self.requester_ids) if heads else []

    def _apply(self, granted: List[BankRequest]) -> None:
        if len({g.bank for g in granted}) != len(granted):
            raise InvariantViolation("two accesses granted to one bank in a cycle")
        for grant in granted:
            if grant.write:
                source, state = grant.owner
                if source != "load":
                    self.queues.queue_pop(source)
                state.written += 1
                continue
            state, stream = grant.owner
            k = stream.requested
            producer = stream.producer
            if producer is not None and not producer.done and producer.written <= k < producer.elems:
                raise InvariantViolation(
                    f"iid {state.iid} read element {k} of v{stream.register} before iid "
                    f"{producer.iid} wrote it")
            self.queues.queue_push(stream.queue, QueueEntry(
                element=k if not stream.scalar else 0,
                producer=producer.iid if producer is not None else -1, owner=stream))
            stream.requested += 1

    def step(self, cycle: int) -> None:
        self._snapshot()
        for pipe in self._pipes:
            pipe.retire(cycle)
        requests = self._write_requests() + self._read_requests()
        if requests:
            self._apply(self.arbiter.grant(requests))

        busy_now = self.busy_now
        for kind in self._busy_last:
            busy_now[kind] = 0
        self._busy_last = []
        for pipe in self._pipes:
            pipe.accept(cycle)
            if pipe.accepted_now is not None:
                busy_now[pipe.accepted_now] = 1
                self.busy_cycles[pipe.accepted_now] += 1
                self._busy_last.append(pipe.accepted_now)
        if self.trace:
            self.trace_rows.extend((cycle, 0, kind.value, busy_now[kind])
                                   for kind in (UnitKind.ALU, UnitKind.MUL, UnitKind.FPU))

        finished = False
        for state in self.resident:
            if state.is_complete():
                state.done = True
                state.done_cycle = cycle
                finished = True
                self.logger.debug("lane completes iid %d at cycle %d", state.iid, cycle)
        if finished:
            self.resident = [state for state in self.resident if not state.done]

    @property
    def idle(self) -> bool:
        return not self.resident and all(p.idle for p in self.pipes.values())
