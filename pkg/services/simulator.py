"""
Global cycle loop tying the scalar core, the vector unit and memory together
"""

import logging
import time
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from config import Config
from models.errors import FunctionalMismatch, InvariantViolation, MeasurementError
from models.isa import ScalarInstr
from models.kernel import RunConfig
from models.machine import MachineConfig
from models.report import RooflinePoint, SimReport
from services.kernel_generator import KernelProgram, generate
from services.lane import UnitKind
from services.perf_model import RooflineModel, loss_report, windowed_utilization
from services.scalar_core import ScalarCore, ScalarPipeModel, measure_issue_gap
from services.vector_unit import VectorUnit


@dataclass
class SimulationResult:
    report: SimReport
    point: Optional[RooflinePoint] = None
    unit_trace: List[Tuple[int, int, str, int]] = field(default_factory=list)
    port_trace: List[Tuple[int, int]] = field(default_factory=list)


class Simulator:
    """
    Steps the vector unit and then the scalar core once per cycle until the
    program has issued and every vector instruction has completed.
    """

    def __init__(self, machine: MachineConfig, program: Union[KernelProgram, Sequence[ScalarInstr]],
                 trace: bool = False, stall_limit: int = 100_000):
        self.machine = machine
        self.kernel = program if isinstance(program, KernelProgram) else None
        instrs = program.program if self.kernel is not None else list(program)
        self.vu = VectorUnit(machine, trace=trace)
        if self.kernel is not None:
            self.kernel.load_into(self.vu.memory)
        regs = self.kernel.regs if self.kernel is not None else {}
        self.core = ScalarCore(instrs, self.vu, ScalarPipeModel.from_machine(machine),
                               self.vu.memory, regs)
        self.trace = trace
        self.stall_limit = stall_limit
        self.cycle = 0
        self.fpu_issue: List[int] = []
        self.read_bytes: List[int] = []
        self.write_bytes: List[int] = []
        self.logger = logging.getLogger(__name__)

    def _progress(self) -> Tuple[int, ...]:
        memory = self.vu.memory
        return (self.core.pc, self.vu.lane.arbiter.grants, memory.read_bytes + memory.write_bytes,
                len(self.vu.sequencer.inflight), len(self.vu.intake))

    def run(self) -> SimReport:
        started = time.perf_counter()
        lane = self.vu.lane
        memory = self.vu.memory
        last_change, signature = 0, None
        while not (self.core.finished and self.vu.idle):
            self.cycle += 1
            self.vu.step(self.cycle)
            self.core.step(self.cycle)
            self.fpu_issue.append(lane.busy_now[UnitKind.FPU] | lane.busy_now[UnitKind.MUL])
            self.read_bytes.append(memory.cycle_read)
            self.write_bytes.append(memory.cycle_write)
            if self.cycle % 1024 == 0:
                current = self._progress()
                if current != signature:
                    signature, last_change = current, self.cycle
                elif self.cycle - last_change > self.stall_limit:
                    raise InvariantViolation(f"no progress for {self.stall_limit} cycles at cycle {self.cycle}")

        self._check_conservation()
        report = self._report()
        self.logger.info("%s on %d lanes: %d cycles, %.3f dpflop/cycle (%.1fs)", report.kernel,
                    report.lanes, report.cycles, report.performance, time.perf_counter() - started)
        return report

    def _check_conservation(self) -> None:
        for record in self.vu.records:
            if record.acknowledged is None or record.completed is None:
                raise InvariantViolation(f"iid {record.iid} was dispatched but never completed")
            if record.completed < record.acknowledged or record.acknowledged <= record.dispatched:
                raise InvariantViolation(f"iid {record.iid} has an inconsistent timeline")
        self.core.dispatch_events()

    def _functional_check(self) -> Tuple[Optional[float], Optional[bool]]:
        kernel = self.kernel
        if kernel is None:
            return None, None
        worst = 0.0
        for name in kernel.outputs:
            got = kernel.read_output(self.vu.memory, name).astype(np.float64)
            want = kernel.expected[name].astype(np.float64)
            scale = np.maximum(np.abs(want), np.finfo(np.float64).tiny)
            if got.size:
                worst = max(worst, float(np.max(np.abs(got - want) / scale)))
        if kernel.result_reg is not None:
            bits = np.array([self.core.regs.get(kernel.result_reg, 0)], dtype=np.uint64)
            got = float(bits.view(np.float64)[0])
            want = kernel.expected_scalar
            worst = max(worst, abs(got - want) / max(abs(want), np.finfo(np.float64).tiny))
        return worst, worst <= Config.REL_TOLERANCE

    def _report(self) -> SimReport:
        cycles = max(self.cycle, 1)
        flops = self.kernel.flops if self.kernel is not None else self.vu.flops
        try:
            delta = float(measure_issue_gap(self.core.timeline, "vmadd").mode)
        except MeasurementError:
            delta = None
        max_err, ok = self._functional_check()
        width = self.machine.mem_bytes_per_cycle
        util = windowed_utilization(
            {"fpu": np.array(self.fpu_issue), "ld": np.array(self.read_bytes),
             "st": np.array(self.write_bytes)},
            {"fpu": 1.0, "ld": float(width), "st": float(width)},
            self.machine.util_window)
        memory = self.vu.memory
        vector_instrs = len(self.vu.records)
        return SimReport(
            kernel=self.kernel.name if self.kernel is not None else "program",
            lanes=self.machine.lanes,
            cycles=self.cycle,
            flops=flops,
            performance=flops / cycles,
            peak=self.machine.peak_dpflop,
            fpu_busy=flops / cycles / self.machine.peak_dpflop,
            fpu_issue=sum(self.fpu_issue) / cycles,
            mem_bytes=memory.read_bytes + memory.write_bytes + self.core.load_bytes,
            delta=delta,
            scalar_instrs=len(self.core.program) - vector_instrs,
            vector_instrs=vector_instrs,
            bank_conflicts=self.vu.lane.arbiter.conflicts,
            max_rel_error=max_err,
            functional_ok=ok,
            util=util,
        )


def machine_for(run: RunConfig) -> MachineConfig:
    """Machine parameters of a run; ``opq_depth`` overrides every operand queue depth"""
    overrides: Dict[str, int] = {}
    if run.opq_depth is not None:
        overrides = {"fpu_queue_depth": run.opq_depth, "alu_queue_depth": run.opq_depth,
                     "vlsu_queue_depth": run.opq_depth}
    return MachineConfig(lanes=run.lanes, mem_latency=run.mem_latency, fpu_depth=run.fpu_depth,
                         util_window=run.util_window, **overrides)


def simulate(run: RunConfig, check: bool = True) -> SimulationResult:
    """Generate the kernel of ``run``, simulate it and compare against the roofline"""
    machine = machine_for(run)
    spec = run.kernel
    kernel = generate(spec, machine.vlmax(spec.sew))
    simulator = Simulator(machine, kernel, trace=run.trace)
    report = simulator.run()
    report.n = spec.n if spec.kind != "dconv" else None
    if check and report.functional_ok is False:
        raise FunctionalMismatch(
            f"{report.kernel}: max relative error {report.max_rel_error:.3e} exceeds {Config.REL_TOLERANCE}")
    point = loss_report(report, RooflineModel(lanes=run.lanes), spec)
    return SimulationResult(report=report, point=point, unit_trace=simulator.vu.lane.trace_rows,
                            port_trace=simulator.vu.memory.trace_rows)
