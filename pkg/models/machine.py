"""
Machine configuration models
"""

from pydantic import BaseModel, ConfigDict, Field, model_validator

from config import Config


class VrfGeometry(BaseModel):
    """Per-lane vector register file geometry"""

    model_config = ConfigDict(frozen=True)

    banks: int = Field(default=Config.BANKS_PER_LANE, ge=1)
    bank_width_bits: int = Field(default=Config.BANK_WIDTH_BITS, ge=8)
    bytes_per_lane: int = Field(default=Config.VRF_BYTES_PER_LANE, ge=64)
    registers: int = Field(default=Config.VECTOR_REGISTERS, ge=1)

    @property
    def words_per_register(self) -> int:
        """64-bit words one register occupies in one lane"""
        return self.bytes_per_lane // self.registers // (self.bank_width_bits // 8)

    @property
    def rows_per_register(self) -> int:
        return self.words_per_register // self.banks

    @property
    def rows_total(self) -> int:
        return self.rows_per_register * self.registers

    @model_validator(mode="after")
    def _check(self) -> "VrfGeometry":
        if self.banks * self.bank_width_bits * self.rows_total != self.bytes_per_lane * 8:
            raise ValueError("banks x bank width x rows must equal the lane VRF size")
        return self


class MachineConfig(BaseModel):
    """Everything that shapes the simulated machine; defaults follow the design parameters"""

    model_config = ConfigDict(frozen=True)

    lanes: int = Field(default=Config.LANES, ge=1)
    vrf: VrfGeometry = Field(default_factory=VrfGeometry)

    scalar_ld_latency: int = Field(default=Config.SCALAR_LD_LATENCY, ge=1)
    commit_ports: int = Field(default=Config.SCALAR_COMMIT_PORTS, ge=1)
    intake_depth: int = Field(default=Config.INTAKE_QUEUE_DEPTH, ge=1)
    store_fence: bool = Config.SCALAR_STORE_FENCE

    max_inflight: int = Field(default=Config.MAX_INFLIGHT, ge=1)
    unit_queue_depth: int = Field(default=Config.UNIT_QUEUE_DEPTH, ge=1)

    fpu_depth: int = Field(default=Config.FPU_DEPTH, ge=1)
    alu_depth: int = Field(default=Config.ALU_DEPTH, ge=1)
    mul_depth: int = Field(default=Config.MUL_DEPTH, ge=1)
    div_latency: int = Field(default=Config.DIV_LATENCY, ge=1)

    fpu_queue_depth: int = Field(default=Config.FPU_QUEUE_DEPTH, ge=1)
    alu_queue_depth: int = Field(default=Config.ALU_QUEUE_DEPTH, ge=1)
    vlsu_queue_depth: int = Field(default=Config.VLSU_QUEUE_DEPTH, ge=1)
    wb_queue_depth: int = Field(default=Config.WRITEBACK_QUEUE_DEPTH, ge=1)
    load_buffer_depth: int = Field(default=Config.LOAD_BUFFER_DEPTH, ge=1)

    mem_latency: int = Field(default=Config.MEM_LATENCY, ge=1)
    mem_ack_latency: int = Field(default=Config.MEM_ACK_LATENCY, ge=0)
    util_window: int = Field(default=Config.UTIL_WINDOW, ge=1)

    @model_validator(mode="after")
    def _check_lanes(self) -> "MachineConfig":
        if self.lanes & (self.lanes - 1):
            raise ValueError(f"lanes must be a power of two, got {self.lanes}")
        return self

    @property
    def mem_width_bits(self) -> int:
        return Config.BITS_PER_LANE_PER_CYCLE * self.lanes

    @property
    def mem_bytes_per_cycle(self) -> int:
        return self.mem_width_bits // 8

    @property
    def peak_dpflop(self) -> float:
        """One FMA (two flops) per lane per cycle"""
        return 2.0 * self.lanes

    def vlmax(self, sew: int = 64) -> int:
        return (self.vrf.bytes_per_lane // self.vrf.registers) * 8 // sew * self.lanes
