"""
Instruction set models: vector configuration, vector and scalar instruction
records, and the textual decode/format layer
"""

import re
from enum import Enum
from typing import Dict, List, Optional, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, model_validator

from models.errors import ConfigError, DecodeError, RegisterRangeError


NUM_VREGS = 32
SUPPORTED_SEW = (8, 16, 32, 64)
ETYPES = ("fp", "int")


class VOp(str, Enum):
    VLD = "vld"
    VST = "vst"
    VLDS = "vlds"
    VLDX = "vldx"
    VSTS = "vsts"
    VSTX = "vstx"
    VMADD = "vmadd"
    VADD = "vadd"
    VMUL = "vmul"
    VWADD = "vwadd"
    VWMUL = "vwmul"
    VFDIV = "vfdiv"
    VFSQRT = "vfsqrt"
    VINS = "vins"
    VEXT = "vext"
    VSLIDE = "vslide"
    VSETVL = "vsetvl"


class SOp(str, Enum):
    LD = "ld"
    ADD = "add"
    BRANCH = "bnez"
    VDISPATCH = "vdispatch"


LOADS = frozenset({VOp.VLD, VOp.VLDS, VOp.VLDX})
STORES = frozenset({VOp.VST, VOp.VSTS, VOp.VSTX})
MEMORY_OPS = LOADS | STORES
ARITH_OPS = frozenset({VOp.VMADD, VOp.VADD, VOp.VMUL, VOp.VWADD, VOp.VWMUL, VOp.VFDIV, VOp.VFSQRT})
WIDENING_OPS = frozenset({VOp.VWADD, VOp.VWMUL})
SLIDE_OPS = frozenset({VOp.VINS, VOp.VEXT, VOp.VSLIDE})

# Arity of vector sources for arithmetic opcodes
ARITH_ARITY = {
    VOp.VMADD: 3, VOp.VADD: 2, VOp.VMUL: 2, VOp.VWADD: 2,
    VOp.VWMUL: 2, VOp.VFDIV: 2, VOp.VFSQRT: 1,
}

# Input-only register names used by hand-written listings
VREG_ALIASES: Dict[str, int] = {"vA": 0, "vB0": 1, "vB1": 2, "vB2": 3, "vX": 1, "vY": 2, "vT": 3}
VREG_ALIASES.update({f"vC{j}": 4 + j for j in range(NUM_VREGS - 4)})

_ABI_NAMES = (
    ["zero", "ra", "sp", "gp", "tp", "t0", "t1", "t2", "s0", "s1"]
    + [f"a{i}" for i in range(8)]
    + [f"s{i}" for i in range(2, 12)]
    + ["t3", "t4", "t5", "t6"]
)
XREG_INDEX: Dict[str, int] = {name: i for i, name in enumerate(_ABI_NAMES)}
XREG_INDEX.update({f"x{i}": i for i in range(32)})


class VecConfig(BaseModel):
    """Vector length configuration in force for subsequent vector instructions"""

    model_config = ConfigDict(frozen=True)

    vl: int = Field(ge=0)
    sew: int = 64
    vlmax: int = Field(ge=0)
    etype: str = "fp"

    @model_validator(mode="after")
    def _check(self) -> "VecConfig":
        if self.sew not in SUPPORTED_SEW:
            raise ValueError(f"sew must be one of {SUPPORTED_SEW}, got {self.sew}")
        if self.etype not in ETYPES:
            raise ValueError(f"etype must be one of {ETYPES}, got {self.etype}")
        if self.vl > self.vlmax:
            raise ValueError(f"vl={self.vl} exceeds vlmax={self.vlmax}")
        return self

    @staticmethod
    def compute_vlmax(lanes: int, sew: int, vrf_bytes_per_lane: int = 16 * 1024,
                      registers: int = NUM_VREGS) -> int:
        """Elements of width ``sew`` one register holds across all lanes"""
        return (vrf_bytes_per_lane // registers) * 8 // sew * lanes

    @classmethod
    def for_machine(cls, lanes: int, sew: int = 64, etype: str = "fp",
                    vrf_bytes_per_lane: int = 16 * 1024) -> "VecConfig":
        vlmax = cls.compute_vlmax(lanes, sew, vrf_bytes_per_lane)
        return cls(vl=vlmax, sew=sew, vlmax=vlmax, etype=etype)


def set_vector_length(requested: int, cfg: VecConfig) -> VecConfig:
    """Grant ``min(requested, vlmax)`` elements; sew and etype stay unchanged"""
    if requested < 0:
        raise ConfigError(f"requested vector length must be >= 0, got {requested}")
    return cfg.model_copy(update={"vl": min(requested, cfg.vlmax)})


class VectorInstr(BaseModel):
    """Decoded vector instruction"""

    model_config = ConfigDict(frozen=True)

    op: VOp
    vd: Optional[int] = None
    vs: Tuple[int, ...] = ()
    rs: Optional[str] = None      # scalar base address / scalar source / requested vl
    rs2: Optional[str] = None     # stride register, insert position register
    rd: Optional[str] = None      # scalar result of VEXT / VSETVL
    imm: int = 0                  # address offset, slide amount, element index
    sew: Optional[int] = None     # VSETVL only
    etype: Optional[str] = None   # VSETVL only
    iid: int = 0

    @model_validator(mode="after")
    def _check_registers(self) -> "VectorInstr":
        for reg in ((self.vd,) if self.vd is not None else ()) + tuple(self.vs):
            if not 0 <= reg < NUM_VREGS:
                raise RegisterRangeError(f"vector register v{reg} out of range 0..{NUM_VREGS - 1}")
        if len(self.vs) > 3:
            raise ValueError("at most three vector sources")
        return self

    @property
    def reads(self) -> Tuple[int, ...]:
        """Vector registers read, including the stored register of a store"""
        if self.op in STORES:
            return (self.vd,) + tuple(self.vs)
        return tuple(self.vs)

    @property
    def writes(self) -> Optional[int]:
        if self.op in STORES or self.op in (VOp.VEXT, VOp.VSETVL):
            return None
        return self.vd

    @property
    def scalar_sources(self) -> Tuple[str, ...]:
        return tuple(r for r in (self.rs, self.rs2) if r is not None)


class ScalarInstr(BaseModel):
    """Scalar core instruction; VDISPATCH wraps one vector instruction"""

    model_config = ConfigDict(frozen=True)

    op: SOp
    rd: Optional[str] = None
    rs1: Optional[str] = None
    rs2: Optional[str] = None
    imm: int = 0
    label: Optional[str] = None
    vinstr: Optional[VectorInstr] = None
    iid: int = 0

    @model_validator(mode="after")
    def _check(self) -> "ScalarInstr":
        if (self.op is SOp.VDISPATCH) != (self.vinstr is not None):
            raise ValueError("VDISPATCH wraps exactly one vector instruction")
        for reg in (self.rd, self.rs1, self.rs2):
            if reg is not None and reg not in XREG_INDEX:
                raise RegisterRangeError(f"scalar register {reg!r} out of range")
        return self

    @property
    def sources(self) -> Tuple[str, ...]:
        if self.vinstr is not None:
            return self.vinstr.scalar_sources
        return tuple(r for r in (self.rs1, self.rs2) if r is not None and r != "zero")

    @property
    def dest(self) -> Optional[str]:
        if self.vinstr is not None:
            return self.vinstr.rd
        return self.rd


Instr = Union[ScalarInstr, VectorInstr]

_MEM_OPERAND = re.compile(r"^(-?\w+)\((\w+)\)$")
_VREG = re.compile(r"^v(\d+)$")


def _vreg(token: str, line: str) -> int:
    if token in VREG_ALIASES:
        return VREG_ALIASES[token]
    match = _VREG.match(token)
    if not match:
        raise DecodeError(token, line)
    reg = int(match.group(1))
    if reg >= NUM_VREGS:
        raise RegisterRangeError(f"vector register {token} out of range 0..{NUM_VREGS - 1}")
    return reg


def _xreg(token: str, line: str) -> str:
    if token in XREG_INDEX:
        return token
    if re.match(r"^x\d+$", token):
        raise RegisterRangeError(f"scalar register {token} out of range")
    raise DecodeError(token, line)


def _imm(token: str, line: str) -> int:
    try:
        return int(token, 0)
    except ValueError:
        raise DecodeError(token, line) from None


def _count(token: str, line: str) -> int:
    """Element index or slide amount: a non-negative immediate"""
    value = _imm(token, line)
    if value < 0:
        raise DecodeError(token, line)
    return value


def _mem(token: str, line: str) -> Tuple[int, str]:
    match = _MEM_OPERAND.match(token)
    if not match:
        raise DecodeError(token, line)
    return _imm(match.group(1), line), _xreg(match.group(2), line)


def _expect(args: List[str], count: int, line: str) -> None:
    if len(args) != count:
        raise DecodeError(line.split()[0] if line.split() else line, line)


def _decode_vector(op: VOp, args: List[str], line: str, iid: int) -> VectorInstr:
    if op in (VOp.VLD, VOp.VST):
        _expect(args, 2, line)
        offset, base = _mem(args[1], line)
        return VectorInstr(op=op, vd=_vreg(args[0], line), rs=base, imm=offset, iid=iid)
    if op in (VOp.VLDS, VOp.VSTS):
        _expect(args, 3, line)
        offset, base = _mem(args[1], line)
        return VectorInstr(op=op, vd=_vreg(args[0], line), rs=base, imm=offset,
                           rs2=_xreg(args[2], line), iid=iid)
    if op in (VOp.VLDX, VOp.VSTX):
        _expect(args, 3, line)
        offset, base = _mem(args[1], line)
        return VectorInstr(op=op, vd=_vreg(args[0], line), rs=base, imm=offset,
                           vs=(_vreg(args[2], line),), iid=iid)
    if op in ARITH_ARITY:
        _expect(args, 1 + ARITH_ARITY[op], line)
        return VectorInstr(op=op, vd=_vreg(args[0], line),
                           vs=tuple(_vreg(a, line) for a in args[1:]), iid=iid)
    if op is VOp.VINS:
        _expect(args, 3, line)
        return VectorInstr(op=op, vd=_vreg(args[0], line), rs=_xreg(args[1], line),
                           rs2=_xreg(args[2], line), iid=iid)
    if op is VOp.VEXT:
        _expect(args, 3, line)
        return VectorInstr(op=op, rd=_xreg(args[0], line), vs=(_vreg(args[1], line),),
                           imm=_count(args[2], line), iid=iid)
    if op is VOp.VSLIDE:
        _expect(args, 3, line)
        return VectorInstr(op=op, vd=_vreg(args[0], line), vs=(_vreg(args[1], line),),
                           imm=_count(args[2], line), iid=iid)
    # VSETVL rd, rs, eNN, fp|int
    _expect(args, 4, line)
    sew_token = args[2]
    if not re.match(r"^e\d+$", sew_token) or int(sew_token[1:]) not in SUPPORTED_SEW:
        raise DecodeError(sew_token, line)
    if args[3] not in ETYPES:
        raise DecodeError(args[3], line)
    return VectorInstr(op=op, rd=_xreg(args[0], line), rs=_xreg(args[1], line),
                       sew=int(sew_token[1:]), etype=args[3], iid=iid)


def decode(raw: str, iid: int = 0) -> Instr:
    """Decode one line of assembly (comments already allowed after ``;``)"""
    line = raw.split(";", 1)[0].strip()
    if not line:
        raise DecodeError(raw)
    parts = line.split(None, 1)
    mnemonic = parts[0].lower()
    args = [a.strip() for a in parts[1].split(",")] if len(parts) > 1 else []

    vector_ops = {op.value: op for op in VOp}
    if mnemonic in vector_ops:
        return _decode_vector(vector_ops[mnemonic], args, line, iid)
    if mnemonic == SOp.LD.value:
        _expect(args, 2, line)
        offset, base = _mem(args[1], line)
        return ScalarInstr(op=SOp.LD, rd=_xreg(args[0], line), rs1=base, imm=offset, iid=iid)
    if mnemonic == SOp.ADD.value:
        _expect(args, 3, line)
        rd, rs1 = _xreg(args[0], line), _xreg(args[1], line)
        if args[2] in XREG_INDEX:
            return ScalarInstr(op=SOp.ADD, rd=rd, rs1=rs1, rs2=args[2], iid=iid)
        return ScalarInstr(op=SOp.ADD, rd=rd, rs1=rs1, imm=_imm(args[2], line), iid=iid)
    if mnemonic == SOp.BRANCH.value:
        _expect(args, 2, line)
        return ScalarInstr(op=SOp.BRANCH, rs1=_xreg(args[0], line), label=args[1], iid=iid)
    raise DecodeError(mnemonic, line)


def format_instr(instr: Instr) -> str:
    """Canonical text of an instruction; ``decode(format_instr(i))`` gives ``i`` back"""
    if isinstance(instr, ScalarInstr):
        if instr.op is SOp.VDISPATCH:
            return format_instr(instr.vinstr)
        if instr.op is SOp.LD:
            return f"ld {instr.rd}, {instr.imm}({instr.rs1})"
        if instr.op is SOp.ADD:
            third = instr.rs2 if instr.rs2 is not None else str(instr.imm)
            return f"add {instr.rd}, {instr.rs1}, {third}"
        return f"bnez {instr.rs1}, {instr.label}"

    op = instr.op
    name = op.value
    if op in (VOp.VLD, VOp.VST):
        return f"{name} v{instr.vd}, {instr.imm}({instr.rs})"
    if op in (VOp.VLDS, VOp.VSTS):
        return f"{name} v{instr.vd}, {instr.imm}({instr.rs}), {instr.rs2}"
    if op in (VOp.VLDX, VOp.VSTX):
        return f"{name} v{instr.vd}, {instr.imm}({instr.rs}), v{instr.vs[0]}"
    if op in ARITH_ARITY:
        return f"{name} v{instr.vd}, " + ", ".join(f"v{r}" for r in instr.vs)
    if op is VOp.VINS:
        return f"{name} v{instr.vd}, {instr.rs}, {instr.rs2}"
    if op is VOp.VEXT:
        return f"{name} {instr.rd}, v{instr.vs[0]}, {instr.imm}"
    if op is VOp.VSLIDE:
        return f"{name} v{instr.vd}, v{instr.vs[0]}, {instr.imm}"
    return f"{name} {instr.rd}, {instr.rs}, e{instr.sew}, {instr.etype}"


def as_scalar(instr: Instr) -> ScalarInstr:
    """Wrap vector instructions into the scalar stream"""
    if isinstance(instr, VectorInstr):
        return ScalarInstr(op=SOp.VDISPATCH, vinstr=instr, iid=instr.iid)
    return instr


def parse_program(text: str) -> List[ScalarInstr]:
    """Parse assembly text (one instruction per line, ``;`` comments) into a scalar stream"""
    program: List[ScalarInstr] = []
    for raw in text.splitlines():
        if not raw.split(";", 1)[0].strip():
            continue
        program.append(as_scalar(decode(raw, iid=len(program))))
    return program


def format_program(program: List[ScalarInstr]) -> str:
    return "\n".join(format_instr(instr) for instr in program) + "\n"
