"""
Configuration settings for the vector lane simulator
"""

from typing import Dict, Any


class Config:
    """Configuration class for the vector lane simulator"""

    # Machine geometry
    LANES = 4
    VRF_BYTES_PER_LANE = 16 * 1024
    BANKS_PER_LANE = 8
    BANK_WIDTH_BITS = 64
    VECTOR_REGISTERS = 32
    BITS_PER_LANE_PER_CYCLE = 32  # W = 32 * lanes

    # Scalar core
    SCALAR_LD_LATENCY = 2
    SCALAR_COMMIT_PORTS = 2
    INTAKE_QUEUE_DEPTH = 4
    SCALAR_STORE_FENCE = True  # scalar loads wait for outstanding vector stores

    # Sequencers
    MAX_INFLIGHT = 8
    UNIT_QUEUE_DEPTH = 4

    # Functional units
    FPU_DEPTH = 5
    ALU_DEPTH = 1
    MUL_DEPTH = 2
    DIV_LATENCY = 12

    # Operand and write-back queues
    FPU_QUEUE_DEPTH = 4
    ALU_QUEUE_DEPTH = 2
    VLSU_QUEUE_DEPTH = 2
    WRITEBACK_QUEUE_DEPTH = 2
    LOAD_BUFFER_DEPTH = 4

    # Memory
    MEM_LATENCY = 10
    MEM_ACK_LATENCY = 4    # address check before a vector memory op is acknowledged

    # Kernels
    SEW = 64
    MATMUL_TILE = 4
    DCONV_COUT = 64
    DCONV_CIN = 3
    DCONV_K = 7
    DCONV_HW = 112
    DCONV_COUT_TILE = 16
    DATA_SEED = 2019

    # Reporting
    UTIL_WINDOW = 100
    ISSUE_GAP = 5          # cycles between vector FMAs from the scalar core
    REL_TOLERANCE = 1e-12
    OUTPUT_DIR = "out"

    # Processing settings
    MAX_WORKERS = 4

    @classmethod
    def get_all_settings(cls) -> Dict[str, Any]:
        """Get all configuration settings as a dictionary"""
        return {
            attr: getattr(cls, attr)
            for attr in dir(cls)
            if not attr.startswith('_') and not callable(getattr(cls, attr))
        }

    @classmethod
    def load_file(cls, path: str) -> Dict[str, str]:
        """Read a flat ``key = value`` config file; ``#`` starts a comment"""
        settings: Dict[str, str] = {}
        with open(path, 'r', encoding='utf-8') as handle:
            for number, line in enumerate(handle, start=1):
                line = line.split('#', 1)[0].strip()
                if not line:
                    continue
                if '=' not in line:
                    raise ValueError(f"{path}:{number}: expected 'key = value', got {line!r}")
                key, value = line.split('=', 1)
                settings[key.strip().replace('-', '_').lower()] = value.strip()
        return settings
