from types import SimpleNamespace
from typing import Callable, Dict, Optional

import pytest

from models.isa import parse_program
from models.machine import MachineConfig
from services.scalar_core import ScalarCore, ScalarPipeModel
from services.vector_unit import MemoryModel, VectorUnit


@pytest.fixture
def run_program():
    """Run assembly text on a fresh machine until the core and the vector unit drain"""

    def _run(text: str, lanes: int = 4, regs: Optional[Dict[str, int]] = None,
             setup: Optional[Callable[[MemoryModel], None]] = None, trace: bool = False,
             max_cycles: int = 100_000, **overrides) -> SimpleNamespace:
        machine = MachineConfig(lanes=lanes, **overrides)
        vu = VectorUnit(machine, trace=trace)
        if setup is not None:
            setup(vu.memory)
        core = ScalarCore(parse_program(text), vu, ScalarPipeModel.from_machine(machine),
                          vu.memory, regs)
        cycle = 0
        while not (core.finished and vu.idle):
            cycle += 1
            assert cycle <= max_cycles, "program did not drain"
            vu.step(cycle)
            core.step(cycle)
        return SimpleNamespace(machine=machine, vu=vu, core=core, cycles=cycle)

    return _run
