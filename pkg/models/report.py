"""
Result records: dispatch events, issue gaps, simulation reports and roofline points
"""

from typing import Dict, List, Optional

from pydantic import BaseModel, Field


class DispatchEvent(BaseModel):
    """One vector instruction handed from the scalar core to the vector unit"""

    iid: int
    dispatched: int
    acknowledged: int


class IssueEvent(BaseModel):
    """Issue slot taken by one scalar-stream instruction"""

    iid: int
    mnemonic: str
    cycle: int


class IssueGap(BaseModel):
    """Cycles between successive issues of matching instructions"""

    mean: float
    max: int
    min: int
    mode: int
    samples: int


class UtilSample(BaseModel):
    window_start: int
    unit: str
    utilization: float


class SimReport(BaseModel):
    """Counters collected from one simulation run"""

    kernel: str = "program"
    lanes: int
    n: Optional[int] = None
    cycles: int = 0
    flops: int = 0
    performance: float = 0.0
    peak: float = 0.0
    fpu_busy: float = 0.0
    fpu_issue: float = 0.0
    mem_bytes: int = 0
    delta: Optional[float] = None
    scalar_instrs: int = 0
    vector_instrs: int = 0
    bank_conflicts: int = 0
    max_rel_error: Optional[float] = None
    functional_ok: Optional[bool] = None
    util: List[UtilSample] = Field(default_factory=list)

    def metrics(self) -> Dict[str, float]:
        """Flat numeric view used for golden comparisons"""
        values = self.model_dump(exclude={"util", "kernel", "functional_ok", "max_rel_error"})
        return {key: float(value) for key, value in values.items() if value is not None}


class RooflinePoint(BaseModel):
    lanes: int
    kernel: str
    n: Optional[int] = None
    intensity: float
    bound: float
    measured: float
    loss_pct: float
