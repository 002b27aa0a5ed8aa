"""
Instruction-stream generators and functional reference oracles for the
benchmark kernels
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Tuple

import numpy as np

from config import Config
from models.errors import ConfigError
from models.isa import NUM_VREGS, VREG_ALIASES, ScalarInstr, as_scalar, decode, format_program
from models.kernel import KernelSpec
from services.vector_unit import MemoryModel


logger = logging.getLogger(__name__)

V_A = VREG_ALIASES["vA"]
V_B = (VREG_ALIASES["vB0"], VREG_ALIASES["vB1"])
V_T = VREG_ALIASES["vT"]
V_C0 = VREG_ALIASES["vC0"]

_FLOATS = {16: np.float16, 32: np.float32, 64: np.float64}
_RAW = {16: np.uint16, 32: np.uint32, 64: np.uint64}


@dataclass
class KernelProgram:
    """A generated stream with its memory image and expected results"""

    name: str
    program: List[ScalarInstr]
    inputs: Dict[str, np.ndarray]
    placement: Dict[str, int]
    outputs: List[str]
    expected: Dict[str, np.ndarray]
    flops: int
    sew: int = 64
    regs: Dict[str, int] = field(default_factory=dict)
    result_reg: Optional[str] = None
    expected_scalar: Optional[float] = None

    def load_into(self, memory: MemoryModel) -> None:
        size = self.sew // 8
        for name, values in self.inputs.items():
            flat = np.ascontiguousarray(values, dtype=_FLOATS[self.sew]).reshape(-1)
            addresses = self.placement[name] + size * np.arange(flat.size)
            memory.write_elements(addresses, flat.view(_RAW[self.sew]).astype(np.uint64), size)

    def read_output(self, memory: MemoryModel, name: str) -> np.ndarray:
        shape = self.expected[name].shape
        size = self.sew // 8
        count = int(np.prod(shape))
        raw = memory.read_elements(self.placement[name] + size * np.arange(count), size)
        return raw.astype(_RAW[self.sew]).view(_FLOATS[self.sew]).reshape(shape)

    @property
    def text(self) -> str:
        return format_program(self.program)


class _Stream:
    """Collects assembly lines and numbers the decoded instructions"""

    def __init__(self):
        self.program: List[ScalarInstr] = []

    def emit(self, line: str) -> None:
        self.program.append(as_scalar(decode(line, iid=len(self.program))))


class _Layout:
    def __init__(self, base: int = 0x1000, align: int = 64):
        self.next = base
        self.align = align
        self.placement: Dict[str, int] = {}

    def place(self, name: str, nbytes: int) -> int:
        address = self.next
        self.placement[name] = address
        self.next = -(-(address + max(nbytes, 1)) // self.align) * self.align
        return address


def _uniform(rng: np.random.Generator, shape, sew: int = 64) -> np.ndarray:
    return rng.uniform(-1.0, 1.0, size=shape).astype(_FLOATS[sew])


def make_inputs(spec: KernelSpec) -> Dict[str, np.ndarray]:
    """Seeded input data, uniform in [-1, 1]"""
    rng = np.random.default_rng(spec.seed)
    if spec.kind == "matmul":
        n = spec.n
        return {"A": _uniform(rng, (n, n)), "B": _uniform(rng, (n, n)), "C": _uniform(rng, (n, n))}
    if spec.kind == "daxpy":
        return {"X": _uniform(rng, spec.n, spec.sew), "Y": _uniform(rng, spec.n, spec.sew)}
    padded = spec.hw + spec.k - 1
    return {"I": _uniform(rng, (spec.c_in, padded, padded)),
            "W": _uniform(rng, (spec.c_out, spec.c_in, spec.k, spec.k))}


def reference_oracle(spec: KernelSpec, inputs: Mapping[str, np.ndarray]) -> Dict[str, np.ndarray]:
    """
    Expected outputs computed in the same operation order as the generated
    stream (``a * b + c`` per step, reduction index ascending).
    """
    if spec.kind == "matmul":
        a, b, c = (np.asarray(inputs[key], dtype=np.float64) for key in ("A", "B", "C"))
        n = spec.n
        if a.shape != (n, n) or b.shape != (n, n) or c.shape != (n, n):
            raise ConfigError(f"matmul oracle expects {n}x{n} matrices")
        c = c.copy()
        for i in range(n):
            c = a[:, i:i + 1] * b[i] + c
        return {"C": c}
    if spec.kind == "daxpy":
        x, y = inputs["X"], inputs["Y"]
        if x.shape != (spec.n,) or y.shape != (spec.n,):
            raise ConfigError(f"daxpy oracle expects vectors of {spec.n} elements")
        alpha = _FLOATS[spec.sew](spec.alpha)
        return {"Y": (alpha * x + y).astype(_FLOATS[spec.sew])}
    image, weights = inputs["I"], inputs["W"]
    padded = spec.hw + spec.k - 1
    if image.shape != (spec.c_in, padded, padded) or weights.shape != (spec.c_out, spec.c_in, spec.k, spec.k):
        raise ConfigError("dconv oracle: image or weight shape does not match the kernel spec")
    acc = None
    for ci in range(spec.c_in):
        for kh in range(spec.k):
            for kw in range(spec.k):
                window = image[ci, kh:kh + spec.hw, kw:kw + spec.hw][None]
                term = weights[:, ci, kh, kw][:, None, None] * window
                acc = term if acc is None else term + acc
    return {"O": acc}


def matmul_instruction_count(n: int, tile: int, vlmax: int) -> int:
    """Length of the stream ``gen_matmul`` emits"""
    strip_count = -(-n // vlmax)
    tiles = -(-n // tile)
    return 2 + strip_count * (2 + 4 * (n + 1) * (tiles + n))


def gen_matmul(n: int, tile: int = Config.MATMUL_TILE, vlmax: int = 256,
               spec: Optional[KernelSpec] = None) -> KernelProgram:
    """
    C <- A B + C, strip-mined over columns of B and C.

    For each tile of ``tile`` rows of C: load the C rows, stream the rows of B
    through two ping-pong registers while broadcasting elements of A, then
    store the C rows back.
    """
    spec = spec or KernelSpec(kind="matmul", n=n, tile=tile)
    if tile + V_C0 > NUM_VREGS:
        raise ConfigError(f"tile of {tile} rows does not fit in the register file")
    row = 8 * n
    layout = _Layout()
    for name in ("A", "B", "C"):
        layout.place(name, row * n)
    a_base, b_base, c_base = (layout.placement[k] for k in ("A", "B", "C"))

    s = _Stream()
    s.emit(f"add a2, zero, {row}")
    s.emit(f"add a3, zero, {row}")
    for c, _ in strips(n, vlmax):
        s.emit(f"add t3, zero, {n - c}")
        s.emit("vsetvl t2, t3, e64, fp")
        for r in range(0, n, tile):
            rows = min(tile, n - r)
            s.emit(f"add a4, zero, {c_base + r * row + 8 * c}")
            for j in range(rows):
                s.emit(f"vld v{V_C0 + j}, 0(a4)")
                s.emit("add a4, a4, a3")
            s.emit(f"add a0, zero, {a_base + r * row}")
            s.emit(f"add a1, zero, {b_base + 8 * c}")
            for i in range(n):
                vb = V_B[i % 2]
                s.emit(f"vld v{vb}, 0(a1)")
                s.emit("add a1, a1, a3")
                for j in range(rows):
                    s.emit("ld t0, 0(a0)")
                    s.emit("add a0, a0, a2")
                    s.emit(f"vins v{V_A}, t0, zero")
                    s.emit(f"vmadd v{V_C0 + j}, v{V_A}, v{vb}, v{V_C0 + j}")
                s.emit(f"add a0, a0, {8 - rows * row}")
                s.emit("bnez a0, matmul_b_row")
            s.emit(f"add a4, zero, {c_base + r * row + 8 * c}")
            for j in range(rows):
                s.emit(f"vst v{V_C0 + j}, 0(a4)")
                s.emit("add a4, a4, a3")

    inputs = make_inputs(spec)
    expected = reference_oracle(spec, inputs)
    logger.debug("matmul n=%d tile=%d: %d instructions", n, tile, len(s.program))
    return KernelProgram(name=spec.label, program=s.program, inputs=inputs,
                         placement=layout.placement, outputs=["C"], expected=expected,
                         flops=2 * n ** 3)


def gen_daxpy(n: int, alpha: float = 1.5, vlmax: int = 256, sew: int = 64,
              spec: Optional[KernelSpec] = None) -> KernelProgram:
    """Y <- alpha X + Y, strip-mined; the scalar is broadcast once per strip"""
    spec = spec or KernelSpec(kind="daxpy", n=n, alpha=alpha, sew=sew)
    size = sew // 8
    layout = _Layout()
    x_base = layout.place("X", size * n)
    y_base = layout.place("Y", size * n)
    alpha_bits = int(np.array([alpha], dtype=_FLOATS[sew]).view(_RAW[sew])[0])

    s = _Stream()
    if n:
        s.emit(f"add t0, zero, {alpha_bits}")
        s.emit(f"add a0, zero, {x_base}")
        s.emit(f"add a1, zero, {y_base}")
    for c, vl in strips(n, vlmax):
        s.emit(f"add t3, zero, {n - c}")
        s.emit(f"vsetvl t2, t3, e{sew}, fp")
        s.emit(f"vld v{VREG_ALIASES['vX']}, 0(a0)")
        s.emit(f"vld v{VREG_ALIASES['vY']}, 0(a1)")
        s.emit(f"vins v{V_A}, t0, zero")
        s.emit(f"vmadd v{VREG_ALIASES['vY']}, v{V_A}, v{VREG_ALIASES['vX']}, v{VREG_ALIASES['vY']}")
        s.emit(f"vst v{VREG_ALIASES['vY']}, 0(a1)")
        s.emit(f"add a0, a0, {size * vl}")
        s.emit(f"add a1, a1, {size * vl}")

    inputs = make_inputs(spec)
    expected = reference_oracle(spec, inputs)
    return KernelProgram(name=spec.label, program=s.program, inputs=inputs,
                         placement=layout.placement, outputs=["Y"], expected=expected,
                         flops=2 * n, sew=sew)


def gen_dconv(spec: KernelSpec, vlmax: int = 256) -> KernelProgram:
    """
    Direct convolution vectorized along output rows.

    Output channels are processed ``cout_tile`` at a time so the accumulators
    stay in registers; for each kernel tap one shifted input row is loaded
    and multiplied by every weight of the tile. The first tap initializes
    the accumulators with a plain multiply.
    """
    if spec.kind != "dconv":
        raise ConfigError(f"gen_dconv needs a dconv spec, got {spec.kind}")
    if spec.cout_tile + V_C0 > NUM_VREGS:
        raise ConfigError(f"cout_tile={spec.cout_tile} does not fit in the register file")
    k, hw, c_in, c_out = spec.k, spec.hw, spec.c_in, spec.c_out
    padded = hw + k - 1
    layout = _Layout()
    i_base = layout.place("I", 8 * c_in * padded * padded)
    w_base = layout.place("W", 8 * c_out * c_in * k * k)
    o_base = layout.place("O", 8 * c_out * hw * hw)

    s = _Stream()
    taps = [(ci, kh, kw) for ci in range(c_in) for kh in range(k) for kw in range(k)]
    for c, _ in strips(hw, vlmax):
        s.emit(f"add t3, zero, {hw - c}")
        s.emit("vsetvl t2, t3, e64, fp")
        for y in range(hw):
            for co0 in range(0, c_out, spec.cout_tile):
                group = range(co0, min(c_out, co0 + spec.cout_tile))
                weight_regs = ("t0", "t1")
                pending = 0
                last: Tuple[int, int, bool] = (V_B[0], V_C0, True)
                for t_index, (ci, kh, kw) in enumerate(taps):
                    vin = V_B[t_index % 2]
                    s.emit(f"vld v{vin}, {i_base + 8 * ((ci * padded + y + kh) * padded + c + kw)}(zero)")
                    first = t_index == 0
                    for co in group:
                        w_addr = w_base + 8 * (((co * c_in + ci) * k + kh) * k + kw)
                        reg = weight_regs[pending % 2]
                        s.emit(f"ld {reg}, {w_addr}(zero)")
                        if pending:
                            _dconv_fma(s, weight_regs[(pending - 1) % 2], *last)
                        last = (vin, V_C0 + co - co0, first)
                        pending += 1
                _dconv_fma(s, weight_regs[(pending - 1) % 2], *last)
                for co in group:
                    s.emit(f"vst v{V_C0 + co - co0}, {o_base + 8 * ((co * hw + y) * hw + c)}(zero)")

    inputs = make_inputs(spec)
    expected = reference_oracle(spec, inputs)
    flops = 2 * c_out * c_in * k * k * hw * hw
    logger.debug("dconv %s: %d instructions", spec.label, len(s.program))
    return KernelProgram(name=spec.label, program=s.program, inputs=inputs,
                         placement=layout.placement, outputs=["O"], expected=expected, flops=flops)


def _dconv_fma(s: _Stream, weight: str, vin: int, acc: int, first: bool) -> None:
    s.emit(f"vins v{V_A}, {weight}, zero")
    if first:
        s.emit(f"vmul v{acc}, v{V_A}, v{vin}")
    else:
        s.emit(f"vmadd v{acc}, v{V_A}, v{vin}, v{acc}")


def gen_reduction(n: int, seed: int = Config.DATA_SEED) -> KernelProgram:
    """
    Sum of ``n`` doubles by halving: slide the upper half down, add, repeat.
    ``n`` must be a power of two; the sum comes back through ``vext``.
    """
    if n < 1 or n & (n - 1):
        raise ConfigError(f"reduction length must be a power of two, got {n}")
    layout = _Layout()
    x_base = layout.place("X", 8 * n)
    values = np.random.default_rng(seed).uniform(-1.0, 1.0, n)
    vx = VREG_ALIASES["vX"]

    s = _Stream()
    s.emit(f"add t3, zero, {n}")
    s.emit("vsetvl t2, t3, e64, fp")
    s.emit(f"vld v{vx}, {x_base}(zero)")
    tree = values.copy()
    half = n // 2
    while half:
        s.emit(f"vslide v{V_T}, v{vx}, {half}")
        s.emit(f"vadd v{vx}, v{vx}, v{V_T}")
        tree = tree[:half] + tree[half:2 * half]
        half //= 2
    s.emit(f"vext t0, v{vx}, 0")
    return KernelProgram(name=f"reduction-{n}", program=s.program, inputs={"X": values},
                         placement=layout.placement, outputs=[], expected={},
                         flops=n - 1, result_reg="t0", expected_scalar=float(tree[0]))


def generate(spec: KernelSpec, vlmax: int) -> KernelProgram:
    """Stream for any supported kernel kind"""
    if spec.kind == "matmul":
        return gen_matmul(spec.n, spec.tile, vlmax, spec)
    if spec.kind == "daxpy":
        return gen_daxpy(spec.n, spec.alpha, vlmax, spec.sew, spec)
    return gen_dconv(spec, vlmax)


def strips(n: int, vlmax: int) -> List[Tuple[int, int]]:
    """(start, length) of each strip-mining step over ``n`` columns"""
    out = []
    c = 0
    while c < n:
        vl = min(n - c, vlmax)
        out.append((c, vl))
        c += vl
    return out
