"""
Vector register file: barber's-pole element mapping, per-bank arbitration,
operand/write-back queues and the functional register storage
"""

import logging
from collections import deque
from dataclasses import dataclass, field
from enum import Enum, IntEnum
from typing import Deque, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from models.errors import ElementRangeError, RegisterRangeError
from models.machine import VrfGeometry

DEFAULT_GEOMETRY = VrfGeometry()


def map_element(register: int, element: int, lanes: int, vlmax: Optional[int] = None,
                sew: int = 64, geometry: VrfGeometry = DEFAULT_GEOMETRY,
                shifted: bool = True) -> Tuple[int, int, int]:
    """
    Locate element ``element`` of ``register`` as (lane, bank, row).

    Elements interleave across lanes (``element mod lanes``); inside a lane the
    starting bank of each register is shifted by its index. ``shifted=False``
    gives the layout where every register starts at bank 0.
    """
    if not 0 <= register < geometry.registers:
        raise RegisterRangeError(f"vector register v{register} out of range")
    if vlmax is None:
        vlmax = geometry.bytes_per_lane // geometry.registers * 8 // sew * lanes
    if not 0 <= element < vlmax:
        raise ElementRangeError(f"element {element} outside 0..{vlmax - 1}")
    lane = element % lanes
    local = element // lanes
    word = local * sew // geometry.bank_width_bits
    offset = register if shifted else 0
    bank = (word + offset) % geometry.banks
    row = register * geometry.rows_per_register + word // geometry.banks
    return lane, bank, row


def local_bank(register: int, word: int, banks: int = 8) -> int:
    """Bank of lane-local 64-bit word ``word`` of ``register``"""
    return (word + register) % banks


class Priority(IntEnum):
    LOW = 0
    HIGH = 1


@dataclass(slots=True)
class BankRequest:
    """One bank access wanted this cycle"""

    requester: int
    register: int
    row: int
    bank: int
    write: bool
    priority: Priority
    owner: object = None


def arbitrate(bank: int, pending: Sequence[BankRequest], pointers: Dict[int, int]) -> BankRequest:
    """
    Grant one request of ``bank``.

    High priority wins; inside a priority level the requester after the last
    granted one (round robin) wins. The pointer only moves on a grant.
    """
    if not pending:
        raise ValueError(f"bank {bank}: nothing to arbitrate")
    top = max(request.priority for request in pending)
    contenders = [request for request in pending if request.priority == top]
    last = pointers.get(bank, -1)
    winner = min(contenders, key=lambda r: ((r.requester - last - 1) % (1 << 16), r.requester))
    pointers[bank] = winner.requester
    return winner


class BankArbiter:
    """Per-bank weighted round-robin arbiters of one lane"""

    def __init__(self, banks: int):
        self.banks = banks
        self.pointers: Dict[int, int] = {}
        self.conflicts = 0
        self.grants = 0

    def grant(self, requests: Iterable[BankRequest]) -> List[BankRequest]:
        by_bank: Dict[int, List[BankRequest]] = {}
        for request in requests:
            by_bank.setdefault(request.bank, []).append(request)
        granted = []
        for bank in sorted(by_bank):
            pending = by_bank[bank]
            granted.append(pending[0] if len(pending) == 1 else arbitrate(bank, pending, self.pointers))
            if len(pending) == 1:
                self.pointers[bank] = pending[0].requester
            self.conflicts += len(pending) - 1
        self.grants += len(granted)
        return granted


def count_conflicts(requests: Iterable[Tuple[int, int]], lanes: int = 1,
                    shifted: bool = True, geometry: VrfGeometry = DEFAULT_GEOMETRY) -> int:
    """Requests that lose arbitration when (register, element) pairs are read in one cycle"""
    per_bank: Dict[Tuple[int, int], int] = {}
    for register, element in requests:
        lane, bank, _ = map_element(register, element, lanes, geometry=geometry, shifted=shifted)
        per_bank[(lane, bank)] = per_bank.get((lane, bank), 0) + 1
    return sum(count - 1 for count in per_bank.values())


class QueueStatus(str, Enum):
    OK = "ok"
    FULL = "full"
    EMPTY = "empty"


@dataclass(slots=True)
class QueueEntry:
    """64-bit payload tagged with the element it belongs to"""

    element: int
    payload: int = 0
    producer: int = -1
    owner: object = None


@dataclass
class OperandQueue:
    """Bounded FIFO between the register file and a functional unit"""

    name: str
    depth: int
    entries: Deque[QueueEntry] = field(default_factory=deque)
    reserved: int = 0

    def push(self, entry: QueueEntry) -> QueueStatus:
        if len(self.entries) >= self.depth:
            return QueueStatus.FULL
        self.entries.append(entry)
        return QueueStatus.OK

    def pop(self) -> Tuple[QueueStatus, Optional[QueueEntry]]:
        if not self.entries:
            return QueueStatus.EMPTY, None
        return QueueStatus.OK, self.entries.popleft()

    def space(self) -> int:
        """Free slots, counting reads already granted but not yet delivered"""
        return self.depth - len(self.entries) - self.reserved

    def __len__(self) -> int:
        return len(self.entries)


class OperandQueueSet:
    """
    The ten operand queues and two write-back queues of one lane.

    FPU/MUL own ``fpu0..fpu3``; the ALU owns ``alu0..alu2`` of which
    ``alu0`` and ``alu1`` are shared with the slide unit; the load/store
    unit owns ``vlsu0..vlsu2``.
    """

    FPU = ("fpu0", "fpu1", "fpu2", "fpu3")
    ALU = ("alu0", "alu1", "alu2")
    SLDU_SHARED = ("alu0", "alu1")
    VLSU = ("vlsu0", "vlsu1", "vlsu2")
    WRITEBACK = ("wb_fpu", "wb_alu")

    def __init__(self, fpu_depth: int, alu_depth: int, vlsu_depth: int, wb_depth: int):
        self.queues: Dict[str, OperandQueue] = {}
        for names, depth in ((self.FPU, fpu_depth), (self.ALU, alu_depth),
                             (self.VLSU, vlsu_depth), (self.WRITEBACK, wb_depth)):
            for name in names:
                self.queues[name] = OperandQueue(name, depth)

    def __getitem__(self, name: str) -> OperandQueue:
        return self.queues[name]

    def queue_push(self, name: str, entry: QueueEntry) -> QueueStatus:
        return self.queues[name].push(entry)

    def queue_pop(self, name: str) -> Tuple[QueueStatus, Optional[QueueEntry]]:
        return self.queues[name].pop()

    @property
    def operand_queues(self) -> List[str]:
        return list(self.FPU + self.ALU + self.VLSU)


class VrfState:
    """
    Functional contents of the register file for every lane.

    Storage is ``(lanes, banks, rows)`` 64-bit words; all reads and writes go
    through the barber's-pole mapping. Elements narrower than 64 bits are
    packed little-endian inside a word.
    """

    def __init__(self, lanes: int, geometry: VrfGeometry = DEFAULT_GEOMETRY):
        self.lanes = lanes
        self.geometry = geometry
        self.words = np.zeros((lanes, geometry.banks, geometry.rows_total), dtype=np.uint64)
        self.is_scalar = [False] * geometry.registers
        self.logger = logging.getLogger(__name__)
        self._maps: Dict[Tuple[int, int, int], Tuple[np.ndarray, ...]] = {}

    def vlmax(self, sew: int) -> int:
        return self.geometry.bytes_per_lane // self.geometry.registers * 8 // sew * self.lanes

    def _index(self, register: int, vl: int, sew: int) -> Tuple[np.ndarray, ...]:
        key = (register, vl, sew)
        if key not in self._maps:
            if not 0 <= register < self.geometry.registers:
                raise RegisterRangeError(f"vector register v{register} out of range")
            if vl > self.vlmax(sew):
                raise ElementRangeError(f"vl={vl} exceeds vlmax={self.vlmax(sew)} for sew={sew}")
            elements = np.arange(vl)
            local = elements // self.lanes
            word = local * sew // self.geometry.bank_width_bits
            per_word = self.geometry.bank_width_bits // sew
            lanes = elements % self.lanes
            banks = (word + register) % self.geometry.banks
            rows = register * self.geometry.rows_per_register + word // self.geometry.banks
            shifts = ((local % per_word) * sew).astype(np.uint64)
            self._maps[key] = (lanes, banks, rows, shifts)
        return self._maps[key]

    def read(self, register: int, vl: int, sew: int = 64) -> np.ndarray:
        """Raw bits of the first ``vl`` elements, one ``uint64`` per element"""
        if self.is_scalar[register]:
            return np.full(vl, self.read_scalar(register, sew), dtype=np.uint64)
        lanes, banks, rows, shifts = self._index(register, vl, sew)
        words = self.words[lanes, banks, rows]
        if sew == 64:
            return words.copy()
        mask = np.uint64((1 << sew) - 1)
        return (words >> shifts) & mask

    def write(self, register: int, bits: np.ndarray, sew: int = 64, vl: Optional[int] = None) -> None:
        """Write raw element bits; elements past ``len(bits)`` keep their value"""
        vl = len(bits) if vl is None else vl
        bits = np.asarray(bits, dtype=np.uint64)[:vl]
        lanes, banks, rows, shifts = self._index(register, vl, sew)
        self.is_scalar[register] = False
        if sew == 64:
            self.words[lanes, banks, rows] = bits
            return
        mask = np.uint64((1 << sew) - 1)
        per_word = self.geometry.bank_width_bits // sew
        local = np.arange(vl) // self.lanes
        for position in range(per_word):
            pick = (local % per_word) == position
            if not pick.any():
                continue
            shift = np.uint64(position * sew)
            index = (lanes[pick], banks[pick], rows[pick])
            current = self.words[index]
            self.words[index] = (current & ~(mask << shift)) | ((bits[pick] & mask) << shift)

    def write_scalar(self, register: int, bits: int) -> None:
        """Scalar convention: the value sits at the first position of every lane"""
        row = register * self.geometry.rows_per_register
        bank = register % self.geometry.banks
        self.words[:, bank, row] = np.uint64(bits)
        self.is_scalar[register] = True

    def read_scalar(self, register: int, sew: int = 64) -> int:
        row = register * self.geometry.rows_per_register
        bank = register % self.geometry.banks
        word = int(self.words[0, bank, row])
        return word if sew == 64 else word & ((1 << sew) - 1)

    def dump_csv(self, path: str, registers: Iterable[int], vl: int, sew: int = 64) -> None:
        """Write (register, element, lane, bank, row, value) rows for golden mapping checks"""
        frames = []
        for register in registers:
            lanes, banks, rows, _ = self._index(register, vl, sew)
            frames.append(pd.DataFrame({
                "register": register, "element": np.arange(vl), "lane": lanes, "bank": banks,
                "row": rows, "value": self.read(register, vl, sew)}))
        columns = ["register", "element", "lane", "bank", "row", "value"]
        frame = pd.concat(frames, ignore_index=True) if frames else pd.DataFrame(columns=columns)
        frame[columns].to_csv(path, index=False)
        self.logger.debug("VRF dump of %d elements written to %s", len(frame), path)
