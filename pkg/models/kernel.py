"""
Kernel and run configuration models
"""

from typing import List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator

from config import Config


KernelKind = Literal["matmul", "daxpy", "dconv"]


class KernelSpec(BaseModel):
    """Benchmark kernel selection and sizes"""

    model_config = ConfigDict(frozen=True)

    kind: KernelKind
    n: int = Field(default=16, ge=0)
    tile: int = Field(default=Config.MATMUL_TILE, ge=1, le=28)
    alpha: float = 1.5
    c_out: int = Field(default=Config.DCONV_COUT, ge=1)
    c_in: int = Field(default=Config.DCONV_CIN, ge=1)
    k: int = Field(default=Config.DCONV_K, ge=1)
    hw: int = Field(default=Config.DCONV_HW, ge=1)
    cout_tile: int = Field(default=Config.DCONV_COUT_TILE, ge=1, le=24)
    seed: int = Config.DATA_SEED
    sew: int = Config.SEW

    @model_validator(mode="after")
    def _check(self) -> "KernelSpec":
        if self.kind == "matmul" and self.n < 1:
            raise ValueError("matmul needs n >= 1")
        if self.kind != "daxpy" and self.sew != 64:
            raise ValueError(f"{self.kind} is a double-precision kernel (sew=64)")
        return self

    @property
    def label(self) -> str:
        if self.kind == "dconv":
            return f"dconv-{self.c_out}x{self.c_in}x{self.k}x{self.k}-{self.hw}"
        return f"{self.kind}-{self.n}"


class RunConfig(BaseModel):
    """One simulator invocation as requested on the command line"""

    lanes: int = Field(default=Config.LANES, ge=1)
    kernel: KernelSpec
    mem_latency: int = Field(default=Config.MEM_LATENCY, ge=1)
    fpu_depth: int = Field(default=Config.FPU_DEPTH, ge=1)
    opq_depth: Optional[int] = Field(default=None, ge=1)
    out: str = Config.OUTPUT_DIR
    trace: bool = False
    util_window: int = Field(default=Config.UTIL_WINDOW, ge=1)

    @model_validator(mode="after")
    def _check_lanes(self) -> "RunConfig":
        if self.lanes & (self.lanes - 1):
            raise ValueError(f"lanes must be a power of two, got {self.lanes}")
        return self


class SweepConfig(BaseModel):
    """Cartesian product of run configurations"""

    lanes: List[int]
    sizes: List[int]
    base: RunConfig

    def expand(self) -> List[RunConfig]:
        runs = []
        for lanes in self.lanes:
            for n in self.sizes:
                data = self.base.model_dump()
                data["lanes"] = lanes
                data["kernel"]["n"] = n
                runs.append(RunConfig.model_validate(data))
        return runs
